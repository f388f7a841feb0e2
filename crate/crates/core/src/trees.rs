//! Tree-ensemble baselines over graph-level feature vectors: a CART random forest and
//! softmax gradient boosting with squared-error regression trees.
//!
//! Every tree maps an input to a score vector of length `n_classes`. Forest trees store the
//! (weighted) class distribution of their leaf and vote for its arg-max; boosting trees store
//! the already shrunk update of a single class logit.

use std::cmp::Ordering;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::metrics::{balanced_accuracy, inverse_frequency_weights};
use crate::eval::{argmax, softmax, Predictions};
use crate::features::{FeatureScheme, GraphFeatureVector};

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TreeKind {
    RandomForest,
    GradientBoosting,
}

impl TreeKind {
    pub fn name(self) -> &'static str {
        match self {
            TreeKind::RandomForest => "random_forest",
            TreeKind::GradientBoosting => "gradient_boosting",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TreeConfig {
    pub n_trees: usize,
    /// `None` grows until leaves are pure or too small to split.
    pub max_depth: Option<usize>,
    pub learning_rate: f64,
    /// Fraction of rows drawn without replacement for each boosting round.
    pub subsample: f64,
    pub min_samples_split: usize,
    /// Features examined per split; `None` means √d for forests and all for boosting.
    pub max_features: Option<usize>,
    pub class_weight: bool,
}

impl Default for TreeConfig {
    fn default() -> Self {
        TreeConfig {
            n_trees: 100,
            max_depth: None,
            learning_rate: 0.1,
            subsample: 1.0,
            min_samples_split: 2,
            max_features: None,
            class_weight: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TreeNode {
    Split {
        feat: usize,
        thr: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        leaf: Vec<f64>,
    },
}

/// Flat node array; node 0 is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DecisionTree {
    pub nodes: Vec<TreeNode>,
}

impl DecisionTree {
    pub fn leaf_scores(&self, x: &[f64]) -> &[f64] {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                TreeNode::Split { feat, thr, left, right } => i = if x[*feat] <= *thr { *left } else { *right },
                TreeNode::Leaf { leaf } => return leaf,
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[TreeNode], i: usize) -> usize {
            match &nodes[i] {
                TreeNode::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
                TreeNode::Leaf { .. } => 0,
            }
        }
        walk(&self.nodes, 0)
    }

    fn constant(scores: Vec<f64>) -> Self {
        DecisionTree {
            nodes: vec![TreeNode::Leaf { leaf: scores }],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeEnsembleModel {
    pub version: u32,
    pub kind: TreeKind,
    pub n_classes: usize,
    pub feature_scheme: FeatureScheme,
    pub feature_dim: usize,
    pub config: TreeConfig,
    pub seed: u64,
    /// Initial logits (boosting only).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub init: Vec<f64>,
    pub trees: Vec<DecisionTree>,
    /// Weighted training cross-entropy before the first round and after each round (boosting only).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub train_loss: Vec<f64>,
}

impl TreeEnsembleModel {
    pub fn scores_one(&self, x: &[f64]) -> Vec<f64> {
        match self.kind {
            TreeKind::RandomForest => {
                let mut votes = vec![0.0; self.n_classes];
                for tree in &self.trees {
                    votes[argmax(tree.leaf_scores(x))] += 1.0;
                }
                let n = self.trees.len() as f64;
                votes.iter_mut().for_each(|v| *v /= n);
                votes
            }
            TreeKind::GradientBoosting => softmax(&self.logits_one(x)),
        }
    }

    fn logits_one(&self, x: &[f64]) -> Vec<f64> {
        let mut f = self.init.clone();
        for tree in &self.trees {
            for (fk, s) in f.iter_mut().zip(tree.leaf_scores(x)) {
                *fk += s;
            }
        }
        f
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, serde_json::to_string(self)? + "\n")?;
        Ok(())
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let model: Self = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        model.check()?;
        Ok(model)
    }

    /// Structural invariants: feature indices in range, finite thresholds, leaf length.
    pub fn check(&self) -> Result<()> {
        for (t, tree) in self.trees.iter().enumerate() {
            for node in &tree.nodes {
                let ok = match node {
                    TreeNode::Split { feat, thr, left, right } => {
                        *feat < self.feature_dim && thr.is_finite() && *left < tree.nodes.len() && *right < tree.nodes.len()
                    }
                    TreeNode::Leaf { leaf } => leaf.len() == self.n_classes,
                };
                if !ok {
                    return Err(Error::InvalidInput(format!("tree {t} has a malformed node")));
                }
            }
        }
        Ok(())
    }
}

pub fn predict(model: &TreeEnsembleModel, x: &[GraphFeatureVector]) -> Result<Predictions> {
    let rows = rows_of(x, Some((model.feature_scheme, model.feature_dim)))?.1;
    Ok(predict_rows(model, &rows))
}

pub fn predict_rows(model: &TreeEnsembleModel, rows: &[&[f64]]) -> Predictions {
    let scores: Vec<Vec<f64>> = rows.iter().map(|r| model.scores_one(r)).collect();
    Predictions {
        labels: scores.iter().map(|s| argmax(s)).collect(),
        scores,
    }
}

fn rows_of(x: &[GraphFeatureVector], expect: Option<(FeatureScheme, usize)>) -> Result<(FeatureScheme, Vec<&[f64]>)> {
    let (scheme, dim) = match (expect, x.first()) {
        (Some(e), _) => e,
        (None, Some(first)) => (first.scheme, first.dim()),
        (None, None) => return Err(Error::InvalidInput("empty training set".into())),
    };
    for v in x {
        if v.dim() != dim {
            return Err(Error::DimMismatch {
                expected: dim,
                found: v.dim(),
            });
        }
        if v.scheme != scheme {
            return Err(Error::InvalidInput(format!(
                "feature scheme {} does not match {}",
                v.scheme, scheme
            )));
        }
    }
    Ok((scheme, x.iter().map(|v| v.values.as_slice()).collect()))
}

// ---------------------------------------------------------------------------
// Tree growing

enum Target<'a> {
    /// Class labels; leaves hold weighted class fractions.
    Classes { y: &'a [usize], n_classes: usize },
    /// Residuals of one class logit; leaves hold `scale ×` their weighted mean in slot `class`.
    Residual {
        r: &'a [f64],
        class: usize,
        n_classes: usize,
        scale: f64,
    },
}

struct Grower<'a> {
    columns: &'a [Vec<f64>],
    target: Target<'a>,
    /// Per-sample weight (bootstrap multiplicity × class weight).
    weight: &'a [f64],
    max_depth: usize,
    min_samples_split: usize,
    max_features: usize,
    nodes: Vec<TreeNode>,
}

struct BestSplit {
    score: f64,
    feat: usize,
    thr: f64,
    n_left: usize,
}

impl Grower<'_> {
    fn leaf(&self, idx: &[usize]) -> TreeNode {
        match self.target {
            Target::Classes { y, n_classes } => {
                let mut dist = vec![0.0; n_classes];
                for &i in idx {
                    dist[y[i]] += self.weight[i];
                }
                let total: f64 = dist.iter().sum();
                if total > 0.0 {
                    dist.iter_mut().for_each(|d| *d /= total);
                }
                TreeNode::Leaf { leaf: dist }
            }
            Target::Residual { r, class, n_classes, scale } => {
                let (mut s, mut w) = (0.0, 0.0);
                for &i in idx {
                    s += self.weight[i] * r[i];
                    w += self.weight[i];
                }
                let mut leaf = vec![0.0; n_classes];
                if w > 0.0 {
                    leaf[class] = scale * s / w;
                }
                TreeNode::Leaf { leaf }
            }
        }
    }

    fn is_pure(&self, idx: &[usize]) -> bool {
        match self.target {
            Target::Classes { y, .. } => idx.iter().all(|&i| y[i] == y[idx[0]]),
            Target::Residual { r, .. } => idx.iter().all(|&i| r[i] == r[idx[0]]),
        }
    }

    /// Score to maximize: Σ_c W_c² / W for Gini, S² / W for squared error (summed over both sides).
    fn best_split(&self, idx: &[usize], features: &[usize]) -> Option<BestSplit> {
        let mut best: Option<BestSplit> = None;
        let mut evaluated = 0;
        let mut order: Vec<usize> = idx.to_vec();
        for &f in features {
            if evaluated >= self.max_features {
                break;
            }
            let col = &self.columns[f];
            order.sort_by(|&a, &b| col[a].total_cmp(&col[b]).then(a.cmp(&b)));
            if col[order[0]] == col[order[order.len() - 1]] {
                continue;
            }
            evaluated += 1;
            let candidate = match self.target {
                Target::Classes { y, n_classes } => self.sweep_gini(&order, col, y, n_classes),
                Target::Residual { r, .. } => self.sweep_sse(&order, col, r),
            };
            if let Some((score, pos)) = candidate {
                if best.as_ref().is_none_or(|b| score > b.score) {
                    best = Some(BestSplit {
                        score,
                        feat: f,
                        thr: 0.5 * (col[order[pos - 1]] + col[order[pos]]),
                        n_left: pos,
                    });
                }
            }
        }
        best
    }

    fn sweep_gini(&self, order: &[usize], col: &[f64], y: &[usize], n_classes: usize) -> Option<(f64, usize)> {
        let mut right = vec![0.0; n_classes];
        for &i in order {
            right[y[i]] += self.weight[i];
        }
        let mut left = vec![0.0; n_classes];
        let mut w_right: f64 = right.iter().sum();
        let mut w_left = 0.0;
        let mut sq_left = 0.0;
        let mut sq_right: f64 = right.iter().map(|v| v * v).sum();
        let mut best: Option<(f64, usize)> = None;
        for pos in 1..order.len() {
            let i = order[pos - 1];
            let (c, w) = (y[i], self.weight[i]);
            sq_left += 2.0 * left[c] * w + w * w;
            sq_right += -2.0 * right[c] * w + w * w;
            left[c] += w;
            right[c] -= w;
            w_left += w;
            w_right -= w;
            if col[order[pos]] == col[i] || w_left <= 0.0 || w_right <= 0.0 {
                continue;
            }
            let score = sq_left / w_left + sq_right / w_right;
            if best.is_none_or(|(b, _)| score > b) {
                best = Some((score, pos));
            }
        }
        best
    }

    fn sweep_sse(&self, order: &[usize], col: &[f64], r: &[f64]) -> Option<(f64, usize)> {
        let (mut s_right, mut w_right) = (0.0, 0.0);
        for &i in order {
            s_right += self.weight[i] * r[i];
            w_right += self.weight[i];
        }
        let (mut s_left, mut w_left) = (0.0, 0.0);
        let mut best: Option<(f64, usize)> = None;
        for pos in 1..order.len() {
            let i = order[pos - 1];
            let w = self.weight[i];
            s_left += w * r[i];
            s_right -= w * r[i];
            w_left += w;
            w_right -= w;
            if col[order[pos]] == col[i] || w_left <= 0.0 || w_right <= 0.0 {
                continue;
            }
            let score = s_left * s_left / w_left + s_right * s_right / w_right;
            if best.is_none_or(|(b, _)| score > b) {
                best = Some((score, pos));
            }
        }
        best
    }

    fn grow(&mut self, idx: Vec<usize>, depth: usize, rng: &mut ChaCha8Rng) -> usize {
        let slot = self.nodes.len();
        self.nodes.push(TreeNode::Leaf { leaf: Vec::new() });
        if depth >= self.max_depth || idx.len() < self.min_samples_split || self.is_pure(&idx) {
            self.nodes[slot] = self.leaf(&idx);
            return slot;
        }
        let mut features: Vec<usize> = (0..self.columns.len()).collect();
        if self.max_features < features.len() {
            features.shuffle(rng);
        }
        let Some(split) = self.best_split(&idx, &features) else {
            self.nodes[slot] = self.leaf(&idx);
            return slot;
        };
        let col = &self.columns[split.feat];
        let (left_idx, right_idx): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&i| col[i] <= split.thr);
        debug_assert_eq!(left_idx.len(), split.n_left);
        let left = self.grow(left_idx, depth + 1, rng);
        let right = self.grow(right_idx, depth + 1, rng);
        self.nodes[slot] = TreeNode::Split {
            feat: split.feat,
            thr: split.thr,
            left,
            right,
        };
        slot
    }
}

fn columns_of(rows: &[&[f64]]) -> Vec<Vec<f64>> {
    let dim = rows.first().map_or(0, |r| r.len());
    (0..dim).map(|f| rows.iter().map(|r| r[f]).collect()).collect()
}

fn check_training(rows: &[&[f64]], y: &[usize], n_classes: usize, config: &TreeConfig) -> Result<()> {
    if rows.len() != y.len() {
        return Err(Error::LengthMismatch {
            left: rows.len(),
            right: y.len(),
        });
    }
    if y.is_empty() {
        return Err(Error::InvalidInput("empty training set".into()));
    }
    if let Some(&bad) = y.iter().find(|&&c| c >= n_classes) {
        return Err(Error::InvalidInput(format!("label {bad} outside a {n_classes}-class space")));
    }
    if rows.iter().flat_map(|r| r.iter()).any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("non-finite feature value".into()));
    }
    if config.n_trees == 0 {
        return Err(Error::Config("n_trees must be at least 1".into()));
    }
    if !(config.subsample > 0.0 && config.subsample <= 1.0) {
        return Err(Error::Config(format!("subsample {} outside (0, 1]", config.subsample)));
    }
    Ok(())
}

fn sample_weights(y: &[usize], n_classes: usize, config: &TreeConfig) -> Vec<f64> {
    if config.class_weight {
        let cw = inverse_frequency_weights(y, n_classes);
        y.iter().map(|&c| cw[c]).collect()
    } else {
        vec![1.0; y.len()]
    }
}

fn single_class(y: &[usize]) -> Option<usize> {
    y.iter().all(|&c| c == y[0]).then_some(y[0])
}

pub fn train_random_forest(
    x: &[GraphFeatureVector],
    y: &[usize],
    n_classes: usize,
    config: &TreeConfig,
    seed: u64,
) -> Result<TreeEnsembleModel> {
    let (scheme, rows) = rows_of(x, None)?;
    train_random_forest_rows(scheme, &rows, y, n_classes, config, seed)
}

pub fn train_random_forest_rows(
    scheme: FeatureScheme,
    rows: &[&[f64]],
    y: &[usize],
    n_classes: usize,
    config: &TreeConfig,
    seed: u64,
) -> Result<TreeEnsembleModel> {
    check_training(rows, y, n_classes, config)?;
    let dim = rows[0].len();
    let mut model = TreeEnsembleModel {
        version: MODEL_FORMAT_VERSION,
        kind: TreeKind::RandomForest,
        n_classes,
        feature_scheme: scheme,
        feature_dim: dim,
        config: config.clone(),
        seed,
        init: Vec::new(),
        trees: Vec::new(),
        train_loss: Vec::new(),
    };
    if let Some(c) = single_class(y) {
        log::warn!("training labels contain a single class ({c}); fitting a constant predictor");
        let mut leaf = vec![0.0; n_classes];
        leaf[c] = 1.0;
        model.trees = vec![DecisionTree::constant(leaf); config.n_trees];
        return Ok(model);
    }
    let columns = columns_of(rows);
    let base_weight = sample_weights(y, n_classes, config);
    let max_features = config
        .max_features
        .unwrap_or_else(|| ((dim as f64).sqrt().round() as usize).max(1))
        .clamp(1, dim.max(1));
    let n = y.len();
    for t in 0..config.n_trees {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(t as u64 + 1);
        let mut multiplicity = vec![0u32; n];
        for _ in 0..n {
            multiplicity[rng.random_range(0..n)] += 1;
        }
        let weight: Vec<f64> = base_weight
            .iter()
            .zip(&multiplicity)
            .map(|(w, &m)| w * m as f64)
            .collect();
        let idx: Vec<usize> = (0..n).filter(|&i| multiplicity[i] > 0).collect();
        let mut grower = Grower {
            columns: &columns,
            target: Target::Classes { y, n_classes },
            weight: &weight,
            max_depth: config.max_depth.unwrap_or(usize::MAX),
            min_samples_split: config.min_samples_split.max(2),
            max_features,
            nodes: Vec::new(),
        };
        grower.grow(idx, 0, &mut rng);
        model.trees.push(DecisionTree { nodes: grower.nodes });
    }
    Ok(model)
}

/// Weighted mean cross-entropy of logits `f` (row-major, `n × k`).
fn weighted_cross_entropy(f: &[f64], y: &[usize], w: &[f64], k: usize) -> f64 {
    let mut total = 0.0;
    let mut wsum = 0.0;
    for (i, (&c, &wi)) in y.iter().zip(w).enumerate() {
        let row = &f[i * k..(i + 1) * k];
        let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = m + row.iter().map(|&z| (z - m).exp()).sum::<f64>().ln();
        total += wi * (lse - row[c]);
        wsum += wi;
    }
    total / wsum
}

pub fn train_gradient_boosting(
    x: &[GraphFeatureVector],
    y: &[usize],
    n_classes: usize,
    config: &TreeConfig,
    seed: u64,
) -> Result<TreeEnsembleModel> {
    let (scheme, rows) = rows_of(x, None)?;
    train_gradient_boosting_rows(scheme, &rows, y, n_classes, config, seed)
}

/// Floor on class priors so that classes missing from training get a finite initial logit.
const PRIOR_FLOOR: f64 = 1e-12;

pub fn train_gradient_boosting_rows(
    scheme: FeatureScheme,
    rows: &[&[f64]],
    y: &[usize],
    n_classes: usize,
    config: &TreeConfig,
    seed: u64,
) -> Result<TreeEnsembleModel> {
    check_training(rows, y, n_classes, config)?;
    let dim = rows[0].len();
    let n = y.len();
    let k = n_classes;
    let w = sample_weights(y, n_classes, config);
    let mut prior = vec![0.0; k];
    for (&c, &wi) in y.iter().zip(&w) {
        prior[c] += wi;
    }
    let wsum: f64 = prior.iter().sum();
    let init: Vec<f64> = prior.iter().map(|p| (p / wsum).max(PRIOR_FLOOR).ln()).collect();
    let mut model = TreeEnsembleModel {
        version: MODEL_FORMAT_VERSION,
        kind: TreeKind::GradientBoosting,
        n_classes,
        feature_scheme: scheme,
        feature_dim: dim,
        config: config.clone(),
        seed,
        init: init.clone(),
        trees: Vec::new(),
        train_loss: Vec::new(),
    };
    if let Some(c) = single_class(y) {
        log::warn!("training labels contain a single class ({c}); fitting a constant predictor");
        return Ok(model);
    }
    let columns = columns_of(rows);
    let max_features = config.max_features.unwrap_or(dim).clamp(1, dim.max(1));
    let mut f: Vec<f64> = (0..n).flat_map(|_| init.iter().copied()).collect();
    model.train_loss.push(weighted_cross_entropy(&f, y, &w, k));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_sub = ((config.subsample * n as f64).round() as usize).clamp(1, n);
    let mut residual = vec![vec![0.0; n]; k];
    for _round in 0..config.n_trees {
        for i in 0..n {
            let p = softmax(&f[i * k..(i + 1) * k]);
            for c in 0..k {
                residual[c][i] = (y[i] == c) as u8 as f64 - p[c];
            }
        }
        let idx: Vec<usize> = if n_sub < n {
            let mut all: Vec<usize> = (0..n).collect();
            all.shuffle(&mut rng);
            let mut chosen = all[..n_sub].to_vec();
            chosen.sort_unstable();
            chosen
        } else {
            (0..n).collect()
        };
        let mut round_trees = Vec::with_capacity(k);
        for (c, r) in residual.iter().enumerate() {
            let mut grower = Grower {
                columns: &columns,
                target: Target::Residual {
                    r,
                    class: c,
                    n_classes: k,
                    scale: config.learning_rate,
                },
                weight: &w,
                max_depth: config.max_depth.unwrap_or(usize::MAX),
                min_samples_split: config.min_samples_split.max(2),
                max_features,
                nodes: Vec::new(),
            };
            grower.grow(idx.clone(), 0, &mut rng);
            round_trees.push(DecisionTree { nodes: grower.nodes });
        }
        for tree in &round_trees {
            for (i, row) in rows.iter().enumerate() {
                for (fk, s) in f[i * k..(i + 1) * k].iter_mut().zip(tree.leaf_scores(row)) {
                    *fk += s;
                }
            }
        }
        model.trees.extend(round_trees);
        model.train_loss.push(weighted_cross_entropy(&f, y, &w, k));
    }
    Ok(model)
}

pub fn train_trees(
    kind: TreeKind,
    x: &[GraphFeatureVector],
    y: &[usize],
    n_classes: usize,
    config: &TreeConfig,
    seed: u64,
) -> Result<TreeEnsembleModel> {
    match kind {
        TreeKind::RandomForest => train_random_forest(x, y, n_classes, config, seed),
        TreeKind::GradientBoosting => train_gradient_boosting(x, y, n_classes, config, seed),
    }
}

// ---------------------------------------------------------------------------
// Grid search

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TreeGrid {
    pub n_trees: Vec<usize>,
    pub max_depth: Vec<Option<usize>>,
    /// Ignored for random forests.
    pub learning_rate: Vec<f64>,
}

impl Default for TreeGrid {
    fn default() -> Self {
        TreeGrid {
            n_trees: vec![100, 300],
            max_depth: vec![Some(8), Some(16), None],
            learning_rate: vec![0.05, 0.1],
        }
    }
}

impl TreeGrid {
    pub fn single(config: &TreeConfig) -> Self {
        TreeGrid {
            n_trees: vec![config.n_trees],
            max_depth: vec![config.max_depth],
            learning_rate: vec![config.learning_rate],
        }
    }

    /// Configurations in grid order (trees, then depth, then learning rate).
    pub fn configs(&self, kind: TreeKind, base: &TreeConfig) -> Vec<TreeConfig> {
        let rates: Vec<f64> = match kind {
            TreeKind::RandomForest => vec![base.learning_rate],
            TreeKind::GradientBoosting => self.learning_rate.clone(),
        };
        let mut out = Vec::new();
        for &n_trees in &self.n_trees {
            for &max_depth in &self.max_depth {
                for &learning_rate in &rates {
                    out.push(TreeConfig {
                        n_trees,
                        max_depth,
                        learning_rate,
                        ..base.clone()
                    });
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridRow {
    pub n_trees: usize,
    pub max_depth: Option<usize>,
    pub learning_rate: f64,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridSearchResult {
    pub best: TreeConfig,
    pub best_score: f64,
    pub table: Vec<GridRow>,
}

/// Orders two rows by preference: higher score, then fewer trees, then shallower depth.
fn prefer(a: &GridRow, b: &GridRow) -> Ordering {
    b.score
        .total_cmp(&a.score)
        .then(a.n_trees.cmp(&b.n_trees))
        .then(a.max_depth.unwrap_or(usize::MAX).cmp(&b.max_depth.unwrap_or(usize::MAX)))
}

#[allow(clippy::too_many_arguments)]
pub fn grid_search_trees(
    kind: TreeKind,
    grid: &TreeGrid,
    base: &TreeConfig,
    train: (&[GraphFeatureVector], &[usize]),
    validation: (&[GraphFeatureVector], &[usize]),
    n_classes: usize,
    seed: u64,
) -> Result<GridSearchResult> {
    let configs = grid.configs(kind, base);
    if configs.is_empty() {
        return Err(Error::Config("empty hyperparameter grid".into()));
    }
    let mut table = Vec::with_capacity(configs.len());
    for config in &configs {
        let model = train_trees(kind, train.0, train.1, n_classes, config, seed)?;
        let predicted = predict(&model, validation.0)?;
        table.push(GridRow {
            n_trees: config.n_trees,
            max_depth: config.max_depth,
            learning_rate: config.learning_rate,
            score: balanced_accuracy(&predicted.labels, validation.1)?,
        });
    }
    // min_by keeps the first of equal elements, so grid order breaks the remaining ties
    let (best_i, best_row) = table
        .iter()
        .enumerate()
        .min_by(|(_, a), (_, b)| prefer(a, b))
        .unwrap();
    Ok(GridSearchResult {
        best: configs[best_i].clone(),
        best_score: best_row.score,
        table,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vectors(rows: &[[f64; 2]]) -> Vec<GraphFeatureVector> {
        rows.iter()
            .map(|r| GraphFeatureVector {
                scheme: FeatureScheme::Graph23,
                values: r.to_vec(),
            })
            .collect()
    }

    #[test]
    fn constant_labels_give_constant_predictor() {
        let x = vectors(&[[0.0, 1.0], [2.0, 3.0], [4.0, 5.0]]);
        let y = [2, 2, 2];
        for kind in [TreeKind::RandomForest, TreeKind::GradientBoosting] {
            let model = train_trees(kind, &x, &y, 3, &TreeConfig { n_trees: 3, ..Default::default() }, 0).unwrap();
            let p = predict(&model, &vectors(&[[9.0, -9.0]])).unwrap();
            assert_eq!(p.labels, [2]);
        }
    }

    #[test]
    fn single_tree_forest_follows_its_leaf() {
        let x = vectors(&[[0.0, 0.0], [1.0, 0.0], [2.0, 0.0], [3.0, 0.0]]);
        let y = [0, 0, 1, 1];
        let config = TreeConfig {
            n_trees: 1,
            ..Default::default()
        };
        let model = train_random_forest(&x, &y, 2, &config, 4).unwrap();
        for v in &x {
            let leaf = model.trees[0].leaf_scores(&v.values);
            assert_eq!(predict(&model, std::slice::from_ref(v)).unwrap().labels[0], argmax(leaf));
        }
    }

    #[test]
    fn dim_mismatch_is_rejected() {
        let model = train_random_forest(&vectors(&[[0.0, 0.0], [1.0, 1.0]]), &[0, 1], 2, &TreeConfig::default(), 0).unwrap();
        let short = GraphFeatureVector {
            scheme: FeatureScheme::Graph23,
            values: vec![1.0],
        };
        assert!(matches!(predict(&model, &[short]), Err(Error::DimMismatch { .. })));
    }

    #[test]
    fn zero_learning_rate_keeps_priors() {
        let x = vectors(&[[0.0, 0.0], [1.0, 0.0], [2.0, 0.0], [3.0, 0.0], [4.0, 0.0]]);
        let y = [0, 0, 0, 1, 1];
        let config = TreeConfig {
            n_trees: 5,
            learning_rate: 0.0,
            ..Default::default()
        };
        let model = train_gradient_boosting(&x, &y, 2, &config, 0).unwrap();
        let p = predict(&model, &x).unwrap();
        for s in &p.scores {
            assert!((s[0] - 0.5).abs() < 1e-12 && (s[1] - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn grid_of_one() {
        let x = vectors(&[[0.0, 0.0], [1.0, 1.0], [2.0, 2.0], [3.0, 3.0]]);
        let y = [0, 0, 1, 1];
        let config = TreeConfig {
            n_trees: 7,
            max_depth: Some(2),
            ..Default::default()
        };
        let r = grid_search_trees(TreeKind::RandomForest, &TreeGrid::single(&config), &config, (&x, &y), (&x, &y), 2, 0)
            .unwrap();
        assert_eq!(r.best, config);
        assert_eq!(r.table.len(), 1);
    }

    #[test]
    fn ties_prefer_smaller_models() {
        let rows = [
            GridRow { n_trees: 300, max_depth: Some(8), learning_rate: 0.1, score: 1.0 },
            GridRow { n_trees: 100, max_depth: None, learning_rate: 0.1, score: 1.0 },
            GridRow { n_trees: 100, max_depth: Some(16), learning_rate: 0.1, score: 1.0 },
        ];
        let best = rows.iter().min_by(|a, b| prefer(a, b)).unwrap();
        assert_eq!(best.max_depth, Some(16));
    }
}
