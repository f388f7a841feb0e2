mod common;

use std::collections::{BTreeMap, BTreeSet};

use obfugraph::cfg::{FunctionSample, Obfuscation};
use obfugraph::dataset::*;
use obfugraph::synth::GeneratorConfig;
use proptest::prelude::*;

use common::corpus;

fn projects() -> Vec<String> {
    GeneratorConfig::default().projects
}

fn per_binary(corpus: &[FunctionSample], seed: u64) -> SplitManifest {
    let p = projects();
    split_per_binary(corpus, &p[..3], &p[3..], DEFAULT_VAL_RATIO, seed, DEFAULT_BINS).unwrap()
}

/// Set of every base function, checked to be unique across its variants.
fn group_sets(manifest: &SplitManifest, corpus: &[FunctionSample]) -> BTreeMap<(String, String), BTreeSet<SplitSet>> {
    let mut out: BTreeMap<_, BTreeSet<_>> = BTreeMap::new();
    for s in corpus {
        out.entry((s.project.clone(), s.symbol.clone()))
            .or_default()
            .insert(manifest.set_of(&s.function_id).expect("assigned"));
    }
    out
}

#[test]
fn thousand_function_corpus_has_no_violations_under_both_strategies() {
    let corpus = corpus(41, 1000);
    let pf = split_per_function(&corpus, DEFAULT_RATIOS, 41, DEFAULT_BINS).unwrap();
    let pb = per_binary(&corpus, 41);
    for manifest in [&pf, &pb] {
        assert_eq!(audit_leakage(manifest, &corpus), vec![]);
        assert_eq!(manifest.assignment.len(), corpus.len());
        for sets in group_sets(manifest, &corpus).values() {
            assert_eq!(sets.len(), 1);
        }
    }
    let p = projects();
    let test_projects: BTreeSet<&str> = p[3..].iter().map(String::as_str).collect();
    for s in &corpus {
        let in_test = pb.set_of(&s.function_id) == Some(SplitSet::Test);
        assert_eq!(in_test, test_projects.contains(s.project.as_str()));
    }
}

#[test]
fn every_stratum_follows_the_ratios_within_one() {
    let corpus = corpus(42, 1000);
    let manifest = split_per_function(&corpus, DEFAULT_RATIOS, 42, DEFAULT_BINS).unwrap();
    let mut per_stratum: BTreeMap<usize, [usize; 3]> = BTreeMap::new();
    for s in corpus.iter().filter(|s| s.label() == Obfuscation::None) {
        let bb = s.cfg.blocks.len();
        let stratum = manifest.bins.iter().filter(|&&e| e <= bb).count();
        let set = manifest.set_of(&s.function_id).unwrap();
        let idx = SplitSet::ALL.iter().position(|&x| x == set).unwrap();
        per_stratum.entry(stratum).or_default()[idx] += 1;
    }
    assert!(per_stratum.len() >= 5, "{:?}", manifest.bins);
    for (stratum, counts) in per_stratum {
        let m: usize = counts.iter().sum();
        for (c, r) in counts.iter().zip(DEFAULT_RATIOS) {
            let want = r * m as f64;
            assert!((*c as f64 - want).abs() <= 1.0, "stratum {stratum}: {counts:?} of {m}");
        }
    }
}

#[test]
fn allot_sizes_sum_and_stay_within_one() {
    for n in 0..200 {
        for ratios in [DEFAULT_RATIOS, [0.8, 0.2, 0.0], [1.0 / 3.0; 3], [0.5, 0.25, 0.25]] {
            let sizes = allot_sizes(n, &ratios);
            assert_eq!(sizes.iter().sum::<usize>(), n);
            for (s, r) in sizes.iter().zip(ratios) {
                assert!((*s as f64 - r * n as f64).abs() < 1.0);
            }
        }
    }
}

#[test]
fn manifests_are_bitwise_reproducible() {
    let corpus = corpus(43, 300);
    let a = split_per_function(&corpus, DEFAULT_RATIOS, 7, DEFAULT_BINS).unwrap().to_json();
    let b = split_per_function(&corpus, DEFAULT_RATIOS, 7, DEFAULT_BINS).unwrap().to_json();
    assert_eq!(a.as_bytes(), b.as_bytes());
    let c = split_per_function(&corpus, DEFAULT_RATIOS, 8, DEFAULT_BINS).unwrap().to_json();
    assert_ne!(a, c);
    assert_eq!(per_binary(&corpus, 7).to_json(), per_binary(&corpus, 7).to_json());
}

#[test]
fn manifest_round_trips_through_a_file() {
    let corpus = corpus(44, 50);
    let manifest = split_per_function(&corpus, DEFAULT_RATIOS, 1, DEFAULT_BINS).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.json");
    manifest.write(&path).unwrap();
    assert_eq!(SplitManifest::read(&path).unwrap(), manifest);
}

/// Copies the whole group of each of `symbols` into `target`.
fn plant(corpus: &mut Vec<FunctionSample>, symbols: &[String], target: &str) {
    let copies: Vec<FunctionSample> = corpus
        .iter()
        .filter(|s| symbols.contains(&s.symbol))
        .map(|s| {
            let mut c = s.clone();
            let rest = s.function_id.splitn(3, '/').nth(2).unwrap().to_string();
            c.function_id = format!("{target}/{target}/{rest}");
            c.project = target.into();
            c.binary = target.into();
            c
        })
        .collect();
    corpus.extend(copies);
}

#[test]
fn planted_duplicates_are_removed_from_every_project() {
    let mut corpus = corpus(45, 100);
    let p = projects();
    let symbols: Vec<String> = corpus
        .iter()
        .filter(|s| s.project == p[0] && s.label() == Obfuscation::None)
        .take(5)
        .map(|s| s.symbol.clone())
        .collect();
    plant(&mut corpus, &symbols, &p[4]);
    let before = corpus.len();

    let (kept, log) = dedupe_shared_functions(corpus);
    assert_eq!(log.removed.len(), 5);
    for r in &log.removed {
        assert!(symbols.contains(&r.symbol));
        assert_eq!(r.projects, vec![p[0].clone(), p[4].clone()]);
        assert_eq!(r.samples, 24);
    }
    assert_eq!(log.removed_samples(), 120);
    assert_eq!(kept.len(), before - 120);
    assert!(kept.iter().all(|s| !symbols.contains(&s.symbol)));
}

#[test]
fn shared_symbol_across_sets_is_reported() {
    let mut corpus = corpus(46, 60);
    let p = projects();
    let symbol = corpus.iter().find(|s| s.project == p[0]).unwrap().symbol.clone();
    plant(&mut corpus, &[symbol.clone()], &p[4]);
    let manifest = per_binary(&corpus, 46);
    let violations = audit_leakage(&manifest, &corpus);
    assert_eq!(violations.len(), 1, "{violations:?}");
    assert!(matches!(&violations[0], LeakageViolation::DuplicateAcrossSets { symbol: s, .. } if *s == symbol));
}

#[test]
fn corrupted_manifest_yields_exactly_one_straddle() {
    let corpus = corpus(47, 200);
    let mut manifest = split_per_function(&corpus, DEFAULT_RATIOS, 47, DEFAULT_BINS).unwrap();
    let victim = corpus.iter().find(|s| s.label() == Obfuscation::Flatten).unwrap();
    let old = manifest.set_of(&victim.function_id).unwrap();
    let new = if old == SplitSet::Test { SplitSet::Train } else { SplitSet::Test };
    manifest.assignment.insert(victim.function_id.clone(), new);

    let violations = audit_leakage(&manifest, &corpus);
    assert_eq!(violations.len(), 1, "{violations:?}");
    match &violations[0] {
        LeakageViolation::GroupStraddle { project, symbol, sets } => {
            assert_eq!((project, symbol), (&victim.project, &victim.symbol));
            let mut want = vec![old, new];
            want.sort();
            assert_eq!(sets, &want);
        }
        v => panic!("unexpected {v:?}"),
    }
}

#[test]
fn project_straddle_is_detected_in_per_binary_manifests() {
    let corpus = corpus(48, 60);
    let mut manifest = per_binary(&corpus, 48);
    let p = projects();
    let train_sample = corpus.iter().find(|s| s.project == p[0]).unwrap();
    for s in corpus.iter().filter(|s| s.group_key() == train_sample.group_key()) {
        manifest.assignment.insert(s.function_id.clone(), SplitSet::Test);
    }
    let violations = audit_leakage(&manifest, &corpus);
    assert_eq!(violations, vec![LeakageViolation::ProjectStraddle { project: p[0].clone() }]);
}

#[test]
fn missing_and_extra_assignments_are_reported() {
    let corpus = corpus(49, 20);
    let mut manifest = split_per_function(&corpus, DEFAULT_RATIOS, 1, DEFAULT_BINS).unwrap();
    manifest.assignment.remove(&corpus[5].function_id);
    manifest.assignment.insert("ghost/ghost/g".into(), SplitSet::Train);
    let violations = audit_leakage(&manifest, &corpus);
    assert!(violations.contains(&LeakageViolation::Unassigned {
        function_id: corpus[5].function_id.clone()
    }));
    assert!(violations.contains(&LeakageViolation::NotInCorpus {
        function_id: "ghost/ghost/g".into()
    }));
    assert_eq!(violations.len(), 2);
}

#[test]
fn per_binary_argument_errors() {
    let corpus = corpus(50, 20);
    let p = projects();
    let overlap = split_per_binary(&corpus, &p[..3], &p[2..], 0.2, 0, DEFAULT_BINS);
    assert!(matches!(overlap, Err(obfugraph::Error::OverlappingProjects(v)) if v == vec![p[2].clone()]));
    let unknown = split_per_binary(&corpus, &p[..3], &["nowhere".to_string()], 0.2, 0, DEFAULT_BINS);
    assert!(matches!(unknown, Err(obfugraph::Error::UnknownProject(_))));
    assert!(split_per_binary(&corpus, &[], &p[3..], 0.2, 0, DEFAULT_BINS).is_err());
    assert!(split_per_function(&corpus, [0.5, 0.5, 0.5], 0, DEFAULT_BINS).is_err());
}

#[test]
fn class_ratio_report_matches_recount() {
    let corpus = corpus(51, 150);
    let manifest = split_per_function(&corpus, DEFAULT_RATIOS, 51, DEFAULT_BINS).unwrap();
    let report = class_ratio_report(&manifest, &corpus);
    assert_eq!(report.total_samples, corpus.len());
    assert_eq!(report.total_functions, 150);
    for stats in &report.sets {
        let members: Vec<&FunctionSample> = corpus
            .iter()
            .filter(|s| manifest.set_of(&s.function_id) == Some(stats.set))
            .collect();
        let unobf = members.iter().filter(|s| s.label() == Obfuscation::None).count();
        assert_eq!(stats.n_samples, members.len());
        assert_eq!(stats.n_functions, unobf);
        assert!((stats.unobfuscated_fraction - unobf as f64 / members.len() as f64).abs() < 1e-15);
        assert!((stats.unobfuscated_fraction - 1.0 / 12.0).abs() < 1e-12);
        for o in Obfuscation::ALL {
            assert_eq!(stats.per_class[o.name()], unobf);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn any_seed_gives_a_clean_reproducible_split(seed in any::<u64>(), n in 5usize..60) {
        let corpus = corpus(seed ^ 0x5eed, n);
        let a = split_per_function(&corpus, DEFAULT_RATIOS, seed, DEFAULT_BINS).unwrap();
        prop_assert!(audit_leakage(&a, &corpus).is_empty());
        prop_assert_eq!(&a, &split_per_function(&corpus, DEFAULT_RATIOS, seed, DEFAULT_BINS).unwrap());
        let b = per_binary(&corpus, seed);
        prop_assert!(audit_leakage(&b, &corpus).is_empty());
    }
}
