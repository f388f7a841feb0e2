//! Trained classifiers bound to their feature scheme, and the training entry point shared by
//! the command line and the benchmark.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::cfg::FunctionSample;
use crate::error::{Error, Result};
use crate::eval::report::{ClassSpace, Mode, Task};
use crate::eval::Predictions;
use crate::features::{FeatureScheme, Featurizer, GraphFeatureVector, MnemonicClassTaxonomy};
use crate::gnn::{tune_gnn, train_gnn, Architecture, GnnConfig, GnnModel, GraphInput, GraphSet, SearchSpace, TrainingLog, TrialRow};
use crate::trees::{self, grid_search_trees, train_trees, GridRow, TreeConfig, TreeEnsembleModel, TreeGrid, TreeKind};

pub const TRAINED_MODEL_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Algorithm {
    #[serde(rename = "rf", alias = "random_forest")]
    RandomForest,
    #[serde(rename = "gb", alias = "gradient_boosting")]
    GradientBoosting,
    #[serde(rename = "gcn")]
    Gcn,
    #[serde(rename = "sage")]
    Sage,
    #[serde(rename = "gin")]
    Gin,
    /// Listed so that benchmark tables can carry the row; training always fails.
    #[serde(rename = "gat")]
    Gat,
    #[serde(rename = "graph_unet", alias = "graph-unet")]
    GraphUnet,
}

impl Algorithm {
    pub const ALL: [Algorithm; 7] = [
        Algorithm::RandomForest,
        Algorithm::GradientBoosting,
        Algorithm::Gcn,
        Algorithm::Sage,
        Algorithm::Gin,
        Algorithm::Gat,
        Algorithm::GraphUnet,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::RandomForest => "rf",
            Algorithm::GradientBoosting => "gb",
            Algorithm::Gcn => "gcn",
            Algorithm::Sage => "sage",
            Algorithm::Gin => "gin",
            Algorithm::Gat => "gat",
            Algorithm::GraphUnet => "graph_unet",
        }
    }

    pub fn tree_kind(self) -> Option<TreeKind> {
        match self {
            Algorithm::RandomForest => Some(TreeKind::RandomForest),
            Algorithm::GradientBoosting => Some(TreeKind::GradientBoosting),
            _ => None,
        }
    }

    pub fn architecture(self) -> Option<Architecture> {
        match self {
            Algorithm::Gcn => Some(Architecture::Gcn),
            Algorithm::Sage => Some(Architecture::Sage),
            Algorithm::Gin => Some(Architecture::Gin),
            _ => None,
        }
    }

    pub fn is_implemented(self) -> bool {
        !matches!(self, Algorithm::Gat | Algorithm::GraphUnet)
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.to_ascii_lowercase().replace('-', "_");
        Self::ALL
            .iter()
            .copied()
            .find(|a| a.name() == s)
            .or(match s.as_str() {
                "random_forest" => Some(Algorithm::RandomForest),
                "gradient_boosting" => Some(Algorithm::GradientBoosting),
                _ => None,
            })
            .ok_or_else(|| Error::InvalidInput(format!("unknown model {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Classifier {
    Trees(TreeEnsembleModel),
    Gnn(GnnModel),
}

/// A classifier together with the fitted featurizer that produces its inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub version: u32,
    pub algorithm: Algorithm,
    pub task: Task,
    pub mode: Mode,
    pub featurizer: Featurizer,
    pub classifier: Classifier,
}

impl TrainedModel {
    pub fn class_space(&self) -> ClassSpace {
        ClassSpace::new(self.task, self.mode)
    }

    pub fn n_classes(&self) -> usize {
        self.class_space().n_classes()
    }

    /// `algorithm+scheme`, e.g. `gin+pcode_sem`.
    pub fn id(&self) -> String {
        format!("{}+{}", self.algorithm, self.featurizer.scheme)
    }

    pub fn predict(&self, samples: &[&FunctionSample]) -> Result<Predictions> {
        match &self.classifier {
            Classifier::Trees(m) => {
                let x = samples
                    .iter()
                    .map(|s| self.featurizer.graph_vector(&s.cfg))
                    .collect::<Result<Vec<_>>>()?;
                trees::predict(m, &x)
            }
            Classifier::Gnn(m) => {
                let inputs = samples
                    .iter()
                    .map(|s| GraphInput::from_sample(&self.featurizer, s))
                    .collect::<Result<Vec<_>>>()?;
                m.predict(&inputs.iter().collect::<Vec<_>>())
            }
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("model serializes")
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let model: TrainedModel = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        if model.version != TRAINED_MODEL_VERSION {
            return Err(Error::InvalidInput(format!("unsupported model version {}", model.version)));
        }
        let n = model.n_classes();
        let inner = match &model.classifier {
            Classifier::Trees(m) => {
                m.check()?;
                m.n_classes
            }
            Classifier::Gnn(m) => m.n_classes,
        };
        if inner != n {
            return Err(Error::DimMismatch { expected: n, found: inner });
        }
        Ok(model)
    }
}

fn one() -> usize {
    1
}

/// Everything needed to train one classifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSpec {
    pub algorithm: Algorithm,
    pub features: FeatureScheme,
    pub task: Task,
    /// Ignored by the binary task.
    #[serde(default)]
    pub mode: Mode,
    #[serde(default)]
    pub trees: TreeConfig,
    /// Searched on the validation set when present.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tree_grid: Option<TreeGrid>,
    #[serde(default)]
    pub gnn: GnnConfig,
    /// Sampled `n_trials` times, each trained under `n_seeds` seeds, when present.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub search: Option<SearchSpace>,
    #[serde(default = "one")]
    pub n_trials: usize,
    #[serde(default = "one")]
    pub n_seeds: usize,
}

impl TrainSpec {
    pub fn new(algorithm: Algorithm, features: FeatureScheme, task: Task) -> Self {
        TrainSpec {
            algorithm,
            features,
            task,
            mode: Mode::default(),
            trees: TreeConfig::default(),
            tree_grid: None,
            gnn: GnnConfig::default(),
            search: None,
            n_trials: 1,
            n_seeds: 1,
        }
    }

    pub fn class_space(&self) -> ClassSpace {
        ClassSpace::new(self.task, self.mode)
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: TrainedModel,
    /// Per-epoch log of the returned network.
    pub log: Option<TrainingLog>,
    pub grid: Vec<GridRow>,
    pub trials: Vec<TrialRow>,
}

fn graph_vectors(featurizer: &Featurizer, samples: &[&FunctionSample]) -> Result<Vec<GraphFeatureVector>> {
    samples.iter().map(|s| featurizer.graph_vector(&s.cfg)).collect()
}

fn graph_inputs(featurizer: &Featurizer, samples: &[&FunctionSample]) -> Result<Vec<GraphInput>> {
    samples.iter().map(|s| GraphInput::from_sample(featurizer, s)).collect()
}

/// Fits the featurizer on `train` and trains the classifier of `spec`; `validation` drives
/// grid search, trial search and checkpoint selection.
pub fn train_model(
    spec: &TrainSpec,
    train: &[&FunctionSample],
    validation: &[&FunctionSample],
    taxonomy: MnemonicClassTaxonomy,
    seed: u64,
) -> Result<TrainOutcome> {
    if !spec.algorithm.is_implemented() {
        return Err(Error::Unimplemented(format!("the {} architecture", spec.algorithm)));
    }
    let space = spec.class_space();
    let n_classes = space.n_classes();
    let (train, y_train) = space.labelled(train);
    let (validation, y_val) = space.labelled(validation);
    if train.is_empty() {
        return Err(Error::InvalidInput("no training samples in the task's class space".into()));
    }
    let featurizer = Featurizer::fit(spec.features, &train, taxonomy)?;
    let mut log = None;
    let mut grid = Vec::new();
    let mut trials = Vec::new();
    let classifier = if let Some(kind) = spec.algorithm.tree_kind() {
        if !spec.features.is_graph_level() {
            return Err(Error::InvalidInput(format!(
                "tree ensembles take graph-level features, not {}",
                spec.features
            )));
        }
        let x = graph_vectors(&featurizer, &train)?;
        let config = match &spec.tree_grid {
            Some(g) => {
                if validation.is_empty() {
                    return Err(Error::InvalidInput("grid search needs validation samples".into()));
                }
                let xv = graph_vectors(&featurizer, &validation)?;
                let result = grid_search_trees(kind, g, &spec.trees, (&x, &y_train), (&xv, &y_val), n_classes, seed)?;
                grid = result.table;
                result.best
            }
            None => spec.trees.clone(),
        };
        Classifier::Trees(train_trees(kind, &x, &y_train, n_classes, &config, seed)?)
    } else {
        if spec.features.is_graph_level() {
            return Err(Error::InvalidInput(format!(
                "graph networks take node features, not {}",
                spec.features
            )));
        }
        let config = GnnConfig {
            architecture: spec.algorithm.architecture().expect("implemented network"),
            ..spec.gnn.clone()
        };
        let graphs = graph_inputs(&featurizer, &train)?;
        let val_graphs = graph_inputs(&featurizer, &validation)?;
        let train_set = GraphSet {
            graphs: &graphs,
            labels: &y_train,
        };
        let val_set = GraphSet {
            graphs: &val_graphs,
            labels: &y_val,
        };
        let model = match &spec.search {
            Some(space) => {
                let result = tune_gnn(
                    space,
                    &config,
                    train_set,
                    val_set,
                    spec.features,
                    n_classes,
                    spec.n_trials,
                    spec.n_seeds,
                    seed,
                )?;
                trials = result.trials;
                result.best_model
            }
            None => {
                let (model, l) = train_gnn(train_set, val_set, spec.features, n_classes, &config, seed)?;
                log = Some(l);
                model
            }
        };
        Classifier::Gnn(model)
    };
    Ok(TrainOutcome {
        model: TrainedModel {
            version: TRAINED_MODEL_VERSION,
            algorithm: spec.algorithm,
            task: space.task,
            mode: space.mode,
            featurizer,
            classifier,
        },
        log,
        grid,
        trials,
    })
}
