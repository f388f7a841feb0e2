//! Leakage-controlled dataset splits.
//!
//! A *base function* is identified by `(project, symbol)`; it owns its unobfuscated
//! sample and every obfuscated variant. Two strategies are provided:
//!
//! * **per function**: base functions are stratified by the basic-block count of their
//!   unobfuscated version and allotted to train/validation/test; variants follow their base.
//! * **per binary**: whole projects are held out as the test set; the remaining projects are
//!   split into train/validation with the per-function procedure.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cfg::{FunctionSample, Obfuscation};
use crate::error::{Error, Result};

pub const DEFAULT_RATIOS: [f64; 3] = [0.64, 0.16, 0.20];
pub const DEFAULT_BINS: usize = 10;
pub const DEFAULT_VAL_RATIO: f64 = 0.20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitSet {
    Train,
    Validation,
    Test,
}

impl SplitSet {
    pub const ALL: [SplitSet; 3] = [SplitSet::Train, SplitSet::Validation, SplitSet::Test];

    pub fn name(self) -> &'static str {
        match self {
            SplitSet::Train => "train",
            SplitSet::Validation => "validation",
            SplitSet::Test => "test",
        }
    }
}

impl fmt::Display for SplitSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitStrategy {
    PerFunction,
    PerBinary,
}

/// Reproducible assignment of function ids to sets.
///
/// For per-binary manifests `ratios` holds the train/validation proportions used inside the
/// training projects, with a zero test share; `test_projects` lists the held-out projects.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitManifest {
    pub strategy: SplitStrategy,
    pub seed: u64,
    pub ratios: [f64; 3],
    /// Lower edges of the basic-block-count strata (the first stratum is implicit).
    pub bins: Vec<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub test_projects: Vec<String>,
    pub assignment: BTreeMap<String, SplitSet>,
}

impl SplitManifest {
    pub fn set_of(&self, function_id: &str) -> Option<SplitSet> {
        self.assignment.get(function_id).copied()
    }

    /// Samples of `corpus` assigned to `set`, in corpus order.
    pub fn select<'a>(&self, corpus: &'a [FunctionSample], set: SplitSet) -> Vec<&'a FunctionSample> {
        corpus
            .iter()
            .filter(|s| self.set_of(&s.function_id) == Some(set))
            .collect()
    }

    pub fn len_of(&self, set: SplitSet) -> usize {
        self.assignment.values().filter(|&&s| s == set).count()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes")
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json() + "\n")?;
        Ok(())
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}

// ---------------------------------------------------------------------------
// Deduplication

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RemovedFunction {
    pub symbol: String,
    pub projects: Vec<String>,
    pub samples: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct RemovalLog {
    pub removed: Vec<RemovedFunction>,
}

impl RemovalLog {
    pub fn removed_samples(&self) -> usize {
        self.removed.iter().map(|r| r.samples).sum()
    }
}

/// Drops every base function whose unobfuscated symbol appears in two or more projects,
/// together with all its variants, from every project.
pub fn dedupe_shared_functions(corpus: Vec<FunctionSample>) -> (Vec<FunctionSample>, RemovalLog) {
    let mut projects_of: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
    for s in corpus.iter().filter(|s| s.label() == Obfuscation::None) {
        projects_of.entry(&s.symbol).or_default().insert(&s.project);
    }
    let shared: BTreeMap<String, Vec<String>> = projects_of
        .into_iter()
        .filter(|(_, p)| p.len() >= 2)
        .map(|(sym, p)| (sym.to_string(), p.into_iter().map(String::from).collect()))
        .collect();
    let mut counts: HashMap<String, usize> = HashMap::new();
    let kept = corpus
        .into_iter()
        .filter(|s| {
            if shared.contains_key(&s.symbol) {
                *counts.entry(s.symbol.clone()).or_default() += 1;
                false
            } else {
                true
            }
        })
        .collect();
    let removed = shared
        .into_iter()
        .map(|(symbol, projects)| RemovedFunction {
            samples: counts.get(&symbol).copied().unwrap_or(0),
            symbol,
            projects,
        })
        .collect();
    (kept, RemovalLog { removed })
}

// ---------------------------------------------------------------------------
// Stratified splitting

type GroupKey = (String, String);

/// Base functions with the block count of their unobfuscated version.
fn base_groups<'a, I>(samples: I) -> Result<Vec<(GroupKey, usize)>>
where
    I: IntoIterator<Item = &'a FunctionSample>,
{
    let mut groups: BTreeMap<GroupKey, Option<usize>> = BTreeMap::new();
    for s in samples {
        let slot = groups.entry(s.group_key()).or_default();
        if s.label() == Obfuscation::None {
            if slot.is_some() {
                return Err(Error::UnresolvedGroup(format!(
                    "{}/{}: several unobfuscated samples",
                    s.project, s.symbol
                )));
            }
            *slot = Some(s.cfg.blocks.len());
        }
    }
    groups
        .into_iter()
        .map(|(key, bb)| match bb {
            Some(bb) => Ok((key, bb)),
            None => Err(Error::UnresolvedGroup(format!("{}/{}: no unobfuscated sample", key.0, key.1))),
        })
        .collect()
}

fn check_ratios(ratios: &[f64; 3]) -> Result<()> {
    if ratios.iter().any(|r| !r.is_finite() || *r < 0.0) {
        return Err(Error::InvalidRatios(format!("{ratios:?} has a negative or non-finite entry")));
    }
    let sum: f64 = ratios.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidRatios(format!("{ratios:?} sums to {sum}")));
    }
    Ok(())
}

/// Set sizes for `n` items by largest-remainder rounding; ties go to the earlier set.
pub fn allot_sizes(n: usize, ratios: &[f64; 3]) -> [usize; 3] {
    let exact: Vec<f64> = ratios.iter().map(|r| r * n as f64).collect();
    let mut sizes = [0usize; 3];
    for (s, e) in sizes.iter_mut().zip(&exact) {
        *s = e.floor() as usize;
    }
    let mut remaining = n - sizes.iter().sum::<usize>();
    let mut order: Vec<usize> = (0..3).collect();
    order.sort_by(|&a, &b| {
        let fa = exact[a] - exact[a].floor();
        let fb = exact[b] - exact[b].floor();
        fb.total_cmp(&fa).then(a.cmp(&b))
    });
    for &i in order.iter().cycle() {
        if remaining == 0 {
            break;
        }
        if ratios[i] > 0.0 {
            sizes[i] += 1;
            remaining -= 1;
        }
    }
    sizes
}

/// Lower edges of equal-frequency strata over the sorted block counts.
fn quantile_edges(sorted: &[usize], n_bins: usize) -> Vec<usize> {
    let mut edges: Vec<usize> = (1..n_bins)
        .map(|i| sorted[i * sorted.len() / n_bins])
        .filter(|&e| e > sorted[0])
        .collect();
    edges.dedup();
    edges
}

fn stratum(edges: &[usize], bb: usize) -> usize {
    edges.partition_point(|&e| e <= bb)
}

fn stratified_assign(
    groups: Vec<(GroupKey, usize)>,
    ratios: &[f64; 3],
    n_bins: usize,
    rng: &mut ChaCha8Rng,
) -> (HashMap<GroupKey, SplitSet>, Vec<usize>) {
    let mut sorted: Vec<usize> = groups.iter().map(|g| g.1).collect();
    sorted.sort_unstable();
    let edges = if sorted.is_empty() {
        Vec::new()
    } else {
        quantile_edges(&sorted, n_bins.max(1))
    };
    let mut strata: Vec<Vec<GroupKey>> = vec![Vec::new(); edges.len() + 1];
    for (key, bb) in groups {
        strata[stratum(&edges, bb)].push(key);
    }
    let mut assignment = HashMap::new();
    for mut members in strata {
        // groups arrive sorted by key; the shuffle is the only source of randomness
        members.shuffle(rng);
        let sizes = allot_sizes(members.len(), ratios);
        let mut it = members.into_iter();
        for (set, size) in SplitSet::ALL.iter().zip(sizes) {
            for key in it.by_ref().take(size) {
                assignment.insert(key, *set);
            }
        }
    }
    (assignment, edges)
}

/// Per-function split with `n_bins` block-count strata.
pub fn split_per_function(
    corpus: &[FunctionSample],
    ratios: [f64; 3],
    seed: u64,
    n_bins: usize,
) -> Result<SplitManifest> {
    check_ratios(&ratios)?;
    let groups = base_groups(corpus)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (by_group, bins) = stratified_assign(groups, &ratios, n_bins, &mut rng);
    let assignment = corpus
        .iter()
        .map(|s| (s.function_id.clone(), by_group[&s.group_key()]))
        .collect();
    Ok(SplitManifest {
        strategy: SplitStrategy::PerFunction,
        seed,
        ratios,
        bins,
        test_projects: Vec::new(),
        assignment,
    })
}

/// Per-binary split: `test_projects` form the test set, `train_projects` are split into
/// train/validation by the stratified per-function procedure with `val_ratio`.
pub fn split_per_binary(
    corpus: &[FunctionSample],
    train_projects: &[String],
    test_projects: &[String],
    val_ratio: f64,
    seed: u64,
    n_bins: usize,
) -> Result<SplitManifest> {
    if train_projects.is_empty() {
        return Err(Error::EmptyProjects("no training projects given".into()));
    }
    if test_projects.is_empty() {
        return Err(Error::EmptyProjects("no test projects given".into()));
    }
    let train: BTreeSet<&str> = train_projects.iter().map(String::as_str).collect();
    let test: BTreeSet<&str> = test_projects.iter().map(String::as_str).collect();
    let overlap: Vec<String> = train.intersection(&test).map(|s| s.to_string()).collect();
    if !overlap.is_empty() {
        return Err(Error::OverlappingProjects(overlap));
    }
    let present: BTreeSet<&str> = corpus.iter().map(|s| s.project.as_str()).collect();
    if let Some(p) = train.union(&test).find(|p| !present.contains(*p)) {
        return Err(Error::UnknownProject(p.to_string()));
    }
    if let Some(p) = present.iter().find(|p| !train.contains(*p) && !test.contains(*p)) {
        return Err(Error::InvalidInput(format!(
            "project {p:?} is listed in neither train nor test projects"
        )));
    }
    let ratios = [1.0 - val_ratio, val_ratio, 0.0];
    check_ratios(&ratios)?;
    let groups = base_groups(corpus.iter().filter(|s| train.contains(s.project.as_str())))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (by_group, bins) = stratified_assign(groups, &ratios, n_bins, &mut rng);
    let assignment = corpus
        .iter()
        .map(|s| {
            let set = if test.contains(s.project.as_str()) {
                SplitSet::Test
            } else {
                by_group[&s.group_key()]
            };
            (s.function_id.clone(), set)
        })
        .collect();
    Ok(SplitManifest {
        strategy: SplitStrategy::PerBinary,
        seed,
        ratios,
        bins,
        test_projects: test.iter().map(|s| s.to_string()).collect(),
        assignment,
    })
}

// ---------------------------------------------------------------------------
// Auditing

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LeakageViolation {
    Unassigned { function_id: String },
    NotInCorpus { function_id: String },
    DuplicateFunctionId { function_id: String },
    /// A base function's variants lie in more than one set.
    GroupStraddle { project: String, symbol: String, sets: Vec<SplitSet> },
    /// A project contributes to both train/validation and test.
    ProjectStraddle { project: String },
    /// One symbol, present in several projects, reaches more than one set.
    DuplicateAcrossSets { symbol: String, projects: Vec<String>, sets: Vec<SplitSet> },
}

impl fmt::Display for LeakageViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names = |sets: &[SplitSet]| sets.iter().map(|s| s.name()).collect::<Vec<_>>().join(",");
        match self {
            LeakageViolation::Unassigned { function_id } => write!(f, "{function_id}: not assigned"),
            LeakageViolation::NotInCorpus { function_id } => write!(f, "{function_id}: assigned but not in corpus"),
            LeakageViolation::DuplicateFunctionId { function_id } => write!(f, "{function_id}: duplicate id"),
            LeakageViolation::GroupStraddle { project, symbol, sets } => {
                write!(f, "{project}/{symbol}: variants straddle {}", names(sets))
            }
            LeakageViolation::ProjectStraddle { project } => {
                write!(f, "project {project}: in both training and test sets")
            }
            LeakageViolation::DuplicateAcrossSets { symbol, projects, sets } => write!(
                f,
                "{symbol}: shared by {} and spread over {}",
                projects.join(","),
                names(sets)
            ),
        }
    }
}

pub fn audit_leakage(manifest: &SplitManifest, corpus: &[FunctionSample]) -> Vec<LeakageViolation> {
    let mut violations = Vec::new();
    let mut ids = HashSet::new();
    let mut group_sets: BTreeMap<GroupKey, BTreeSet<SplitSet>> = BTreeMap::new();
    let mut project_sides: BTreeMap<&str, (bool, bool)> = BTreeMap::new();
    let mut symbol_use: BTreeMap<&str, (BTreeSet<&str>, BTreeSet<SplitSet>)> = BTreeMap::new();

    for s in corpus {
        if !ids.insert(s.function_id.as_str()) {
            violations.push(LeakageViolation::DuplicateFunctionId {
                function_id: s.function_id.clone(),
            });
            continue;
        }
        let Some(set) = manifest.set_of(&s.function_id) else {
            violations.push(LeakageViolation::Unassigned {
                function_id: s.function_id.clone(),
            });
            continue;
        };
        group_sets.entry(s.group_key()).or_default().insert(set);
        let sides = project_sides.entry(&s.project).or_default();
        if set == SplitSet::Test {
            sides.1 = true;
        } else {
            sides.0 = true;
        }
        let usage = symbol_use.entry(&s.symbol).or_default();
        usage.0.insert(&s.project);
        usage.1.insert(set);
    }
    for id in manifest.assignment.keys() {
        if !ids.contains(id.as_str()) {
            violations.push(LeakageViolation::NotInCorpus {
                function_id: id.clone(),
            });
        }
    }
    for ((project, symbol), sets) in group_sets {
        if sets.len() > 1 {
            violations.push(LeakageViolation::GroupStraddle {
                project,
                symbol,
                sets: sets.into_iter().collect(),
            });
        }
    }
    if manifest.strategy == SplitStrategy::PerBinary {
        for (project, (training, test)) in project_sides {
            if training && test {
                violations.push(LeakageViolation::ProjectStraddle {
                    project: project.to_string(),
                });
            }
        }
    }
    for (symbol, (projects, sets)) in symbol_use {
        if projects.len() > 1 && sets.len() > 1 {
            violations.push(LeakageViolation::DuplicateAcrossSets {
                symbol: symbol.to_string(),
                projects: projects.into_iter().map(String::from).collect(),
                sets: sets.into_iter().collect(),
            });
        }
    }
    violations
}

// ---------------------------------------------------------------------------
// Class ratios

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SetStats {
    pub set: SplitSet,
    pub n_samples: usize,
    pub n_functions: usize,
    /// Unobfuscated samples over all samples of the set.
    pub unobfuscated_fraction: f64,
    pub per_class: BTreeMap<String, usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassRatioReport {
    pub sets: Vec<SetStats>,
    pub total_samples: usize,
    pub total_functions: usize,
}

pub fn class_ratio_report(manifest: &SplitManifest, corpus: &[FunctionSample]) -> ClassRatioReport {
    let sets: Vec<SetStats> = SplitSet::ALL
        .iter()
        .map(|&set| {
            let members = manifest.select(corpus, set);
            let functions: HashSet<GroupKey> = members.iter().map(|s| s.group_key()).collect();
            let mut per_class: BTreeMap<String, usize> =
                Obfuscation::ALL.iter().map(|o| (o.name().to_string(), 0)).collect();
            for s in &members {
                *per_class.get_mut(s.label().name()).unwrap() += 1;
            }
            let unobf = per_class[Obfuscation::None.name()];
            SetStats {
                set,
                n_samples: members.len(),
                n_functions: functions.len(),
                unobfuscated_fraction: if members.is_empty() {
                    0.0
                } else {
                    unobf as f64 / members.len() as f64
                },
                per_class,
            }
        })
        .collect();
    ClassRatioReport {
        total_samples: sets.iter().map(|s| s.n_samples).sum(),
        total_functions: sets.iter().map(|s| s.n_functions).sum(),
        sets,
    }
}
