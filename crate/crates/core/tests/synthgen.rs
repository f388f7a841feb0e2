mod common;

use std::collections::HashMap;

use obfugraph::cfg::{validate_cfg, BasicBlock, ControlFlowGraph, FunctionSample, Instruction, Obfuscation, ObfuscationLabel, OptLevel};
use obfugraph::dataset::{audit_leakage, split_per_function, DEFAULT_BINS, DEFAULT_RATIOS};
use obfugraph::features::{cyclomatic_complexity, default_taxonomy, graph_level_features};
use obfugraph::features::taxonomy::BroadCategory;
use obfugraph::synth::*;
use proptest::prelude::*;

use common::*;

fn bases(seed: u64, n: usize) -> Vec<FunctionSample> {
    let config = GeneratorConfig {
        seed,
        n_functions: n,
        ..Default::default()
    };
    (0..n).map(|i| gen_base_function(&config, i)).collect()
}

fn sample(blocks: &[&[&str]], edges: &[(usize, usize)]) -> FunctionSample {
    FunctionSample {
        function_id: "p/p/g".into(),
        symbol: "g".into(),
        project: "p".into(),
        binary: "p".into(),
        opt_level: OptLevel::O0,
        obfuscation: ObfuscationLabel::NONE,
        cfg: ControlFlowGraph {
            blocks: blocks
                .iter()
                .enumerate()
                .map(|(i, ms)| BasicBlock {
                    id: format!("b{i}"),
                    instructions: ms.iter().map(|m| Instruction::new(*m, operand_count(m))).collect(),
                })
                .collect(),
            edges: edges.iter().map(|(a, b)| (format!("b{a}"), format!("b{b}"))).collect(),
            entry: "b0".into(),
        },
        degenerate: false,
    }
}

fn multiset(f: &FunctionSample) -> HashMap<String, usize> {
    mnemonic_counts(f)
}

fn transform(label: Obfuscation, f: &FunctionSample, donor: &FunctionSample, seed: u64) -> FunctionSample {
    apply_variant(label, f, Some(donor), seed, &TransformConfig::default())
}

#[test]
fn every_transform_output_is_valid_across_1000_applications() {
    let inputs = bases(21, 1000);
    for label in Obfuscation::OBFUSCATED {
        for (i, f) in inputs.iter().enumerate() {
            let donor = &inputs[(i + 1) % inputs.len()];
            let out = transform(label, f, donor, i as u64);
            let violations = validate_cfg(&out.cfg);
            assert!(violations.is_empty(), "{label} on {}: {violations:?}", f.function_id);
            assert_eq!(out.label(), label);
        }
    }
}

#[test]
fn structure_preserving_transforms_keep_node_and_edge_counts() {
    for f in bases(22, 300) {
        for out in [
            apply_encode_arithmetic(&f, 1, 1),
            apply_encode_arithmetic(&f, 2, 3),
            apply_encode_literals(&f, 3),
            apply_substitution(&f, 4),
        ] {
            assert_eq!(out.cfg.blocks.len(), f.cfg.blocks.len());
            assert_eq!(out.cfg.edges, f.cfg.edges);
        }
    }
}

#[test]
fn flatten_strictly_increases_cyclomatic_complexity() {
    let inputs = bases(23, 400);
    let mut checked = 0;
    for (i, f) in inputs.iter().enumerate() {
        let donor = &inputs[(i + 7) % inputs.len()];
        for label in Obfuscation::ALL {
            let input = if label == Obfuscation::None { f.clone() } else { transform(label, f, donor, i as u64) };
            if input.cfg.blocks.len() < 2 {
                continue;
            }
            let out = apply_flatten(&input, i as u64);
            assert!(!out.degenerate);
            assert!(
                cyclomatic_complexity(&out.cfg) > cyclomatic_complexity(&input.cfg),
                "{label} variant of {}",
                f.function_id
            );
            checked += 1;
        }
    }
    assert!(checked > 3000);
}

#[test]
fn flatten_of_diamond() {
    let f = sample(&[&["cmp", "je"], &["add"], &["sub"], &["ret"]], &[(0, 1), (0, 2), (1, 3), (2, 3)]);
    let out = apply_flatten(&f, 9);
    let g = graph_level_features(&out.cfg).values;
    assert_eq!(g[0], 5.0);
    assert_eq!(g[5], 4.0);
    let edges = index_edges(&out.cfg);
    let d = entry_index(&out.cfg);
    for v in 0..5 {
        if v != d {
            assert_eq!(edges.iter().filter(|e| e.0 == v).collect::<Vec<_>>(), [&(v, d)]);
        }
    }
    let before = multiset(&f);
    let after = multiset(&out);
    for (m, c) in before {
        assert!(after[&m] >= c);
    }
}

#[test]
fn single_block_flatten_is_flagged() {
    let f = sample(&[&["mov", "ret"]], &[]);
    let out = apply_flatten(&f, 0);
    assert!(out.degenerate);
    assert_eq!(out.cfg, f.cfg);
}

#[test]
fn opaque_predicates_rate_one_on_chain() {
    let f = sample(&[&["mov"], &["add"], &["ret"]], &[(0, 1), (1, 2)]);
    let out = apply_opaque_predicates(&f, 5, 1.0);
    let junk_like = out.cfg.blocks.len() - 3;
    assert!(junk_like >= 6);
    assert!(out.cfg.edges.len() >= f.cfg.edges.len() + 6);
}

#[test]
fn opaque_predicates_minimum_one_site() {
    let f = &bases(24, 200).into_iter().find(|f| f.cfg.blocks.len() >= 30).unwrap();
    let out = apply_opaque_predicates(f, 1, 1e-9);
    assert_eq!(out.cfg.blocks.len(), f.cfg.blocks.len() + 2);
    assert_eq!(out.cfg.edges.len(), f.cfg.edges.len() + 3);
}

fn arithmetic_share(f: &FunctionSample) -> f64 {
    let tax = default_taxonomy();
    let counts = mnemonic_counts(f);
    let total: usize = counts.values().sum();
    let arith: usize = counts
        .iter()
        .filter(|(m, _)| tax.broad_category(m) == BroadCategory::Arithmetic)
        .map(|(_, c)| c)
        .sum();
    arith as f64 / total as f64
}

#[test]
fn opaque_predicates_raise_arithmetic_share() {
    for (i, f) in bases(25, 300).iter().enumerate() {
        let out = apply_opaque_predicates(f, i as u64, 0.3);
        assert!(
            arithmetic_share(&out) > arithmetic_share(f),
            "{}: {} -> {}",
            f.function_id,
            arithmetic_share(f),
            arithmetic_share(&out)
        );
    }
}

#[test]
fn encode_arithmetic_expands_add() {
    let f = sample(&[&["mov", "add"]], &[]);
    let out = apply_encode_arithmetic(&f, 0, 1);
    assert_eq!(out.cfg.blocks[0].instructions.len(), 4);
    assert_eq!(out.cfg.edges, f.cfg.edges);
}

#[test]
fn encode_arithmetic_changes_only_instruction_components() {
    for (i, f) in bases(26, 100).iter().enumerate() {
        let a = graph_level_features(&f.cfg).values;
        let b = graph_level_features(&apply_encode_arithmetic(f, i as u64, 1).cfg).values;
        assert_eq!(a[..13], b[..13]);
        assert!(a[13..] != b[13..]);
    }
}

#[test]
fn split_single_four_instruction_block() {
    let f = sample(&[&["mov", "add", "sub", "ret"]], &[]);
    let out = apply_split(&f, 2);
    assert_eq!(out.cfg.blocks.len(), 2);
    assert!(out.cfg.blocks.iter().all(|b| b.instructions.len() == 2));
    assert_eq!(out.cfg.edges.len(), 1);
}

#[test]
fn split_without_eligible_block_is_flagged() {
    let f = sample(&[&["ret"]], &[]);
    assert!(apply_split(&f, 0).degenerate);
}

#[test]
fn merge_three_and_four_blocks() {
    let f = sample(&[&["mov"], &["add"], &["ret"]], &[(0, 1), (1, 2)]);
    let g = sample(&[&["cmp", "je"], &["add"], &["sub"], &["ret"]], &[(0, 1), (0, 2), (1, 3), (2, 3)]);
    let out = apply_merge(&f, Some(&g), 0);
    assert!(out.cfg.blocks.len() >= 8);
    assert!(validate_cfg(&out.cfg).is_empty());
    assert!(apply_merge(&f, None, 0).degenerate);
}

#[test]
fn copy_adds_at_least_one_block_per_site() {
    for (i, f) in bases(27, 200).iter().enumerate() {
        let out = apply_copy(f, i as u64);
        let n = f.cfg.blocks.len();
        let k = ((0.3 * n as f64).round() as usize).clamp(1, n);
        assert!(out.cfg.blocks.len() >= n + k);
    }
}

#[test]
fn virtualize_six_blocks() {
    let f = bases(28, 500).into_iter().find(|f| f.cfg.blocks.len() == 6).unwrap();
    let out = apply_virtualize(&f, 0);
    let g = graph_level_features(&out.cfg).values;
    assert!(g[0] >= 9.0);
    assert!(g[12] >= 1.0, "no back edge");
    let before = multiset(&f);
    let after = multiset(&out);
    for (m, c) in before {
        assert!(after[&m] >= c);
    }
}

#[test]
fn mix1_carries_all_component_signatures() {
    for (i, f) in bases(29, 100).iter().enumerate() {
        let out = apply_mix1(f, i as u64);
        let n = f.cfg.blocks.len();
        let sites = ((0.3 * n as f64).round() as usize).clamp(1, n);
        let g = graph_level_features(&out.cfg).values;
        let base = graph_level_features(&f.cfg).values;
        assert_eq!(g[0] as usize, 1 + n + 2 * sites, "dispatcher plus junk plumbing");
        assert_eq!(g[5] as usize, n + 2 * sites, "dispatcher reaches every block");
        let mba = |v: &[f64]| v[17] + v[18] + v[19];
        assert!(mba(&g) > mba(&base), "arithmetic inflated");
    }
}

#[test]
fn mix2_has_at_least_as_many_blocks_as_mix1() {
    for (i, f) in bases(30, 300).iter().enumerate() {
        let a = apply_mix1(f, i as u64);
        let b = apply_mix2(f, i as u64);
        assert!(b.cfg.blocks.len() >= a.cfg.blocks.len());
    }
}

#[test]
fn block_counts_follow_configured_distribution() {
    let config = GeneratorConfig {
        seed: 31,
        ..Default::default()
    };
    let n = 1000;
    let pmf = config.blocks.pmf();
    let mut observed = vec![0usize; pmf.len()];
    for i in 0..n {
        observed[gen_base_function(&config, i).cfg.blocks.len() - config.blocks.min] += 1;
    }
    // pool adjacent counts until each cell expects at least 5
    let mut cells: Vec<(f64, f64)> = Vec::new();
    let (mut e, mut o) = (0.0, 0.0);
    for (p, &c) in pmf.iter().zip(&observed) {
        e += p * n as f64;
        o += c as f64;
        if e >= 5.0 {
            cells.push((e, o));
            e = 0.0;
            o = 0.0;
        }
    }
    if e > 0.0 {
        let last = cells.last_mut().unwrap();
        last.0 += e;
        last.1 += o;
    }
    let chi2: f64 = cells.iter().map(|(e, o)| (o - e).powi(2) / e).sum();
    let k = (cells.len() - 1) as f64;
    let z = 3.09;
    let critical = k * (1.0 - 2.0 / (9.0 * k) + z * (2.0 / (9.0 * k)).sqrt()).powi(3);
    assert!(chi2 < critical, "chi2 {chi2:.2} >= {critical:.2} with {k} dof");
}

#[test]
fn corpus_of_ten_functions() {
    let corpus = corpus(32, 10);
    assert_eq!(corpus.len(), 120);
    let config = GeneratorConfig::default();
    for p in &config.projects {
        let in_p: Vec<_> = corpus.iter().filter(|f| &f.project == p).collect();
        let none = in_p.iter().filter(|f| !f.label().is_obfuscated()).count();
        assert_eq!(none * 12, in_p.len());
    }
}

#[test]
fn corpus_passes_leakage_audit_after_split() {
    let corpus = corpus(33, 200);
    let manifest = split_per_function(&corpus, DEFAULT_RATIOS, 33, DEFAULT_BINS).unwrap();
    assert!(audit_leakage(&manifest, &corpus).is_empty());
}

#[test]
fn labels_are_faithful() {
    let corpus = corpus(34, 150);
    let base: HashMap<&str, &FunctionSample> = corpus
        .iter()
        .filter(|f| !f.label().is_obfuscated())
        .map(|f| (f.symbol.as_str(), f))
        .collect();
    for f in corpus.iter().filter(|f| f.label().is_obfuscated()) {
        let b = base[f.symbol.as_str()];
        if f.cfg == b.cfg {
            assert!(f.degenerate, "{} unchanged but not flagged", f.function_id);
        }
        if f.degenerate && f.label() != Obfuscation::Mix2 {
            assert_eq!(f.cfg, b.cfg);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn transforms_are_deterministic(index in 0usize..500, seed in any::<u64>(), l in 1usize..12) {
        let config = GeneratorConfig::default();
        let f = gen_base_function(&config, index);
        let donor = gen_base_function(&config, index + 1);
        let label = Obfuscation::ALL[l];
        prop_assert_eq!(transform(label, &f, &donor, seed), transform(label, &f, &donor, seed));
    }

    #[test]
    fn generation_is_deterministic(seed in any::<u64>(), index in 0usize..10_000) {
        let config = GeneratorConfig { seed, ..Default::default() };
        prop_assert_eq!(gen_base_function(&config, index), gen_base_function(&config, index));
    }
}
