//! Random hyperparameter search, each sampled configuration trained under several seeds.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::model::{GnnConfig, GnnModel};
use super::sparse::Readout;
use super::train::{train_gnn, GraphSet};
use crate::error::{Error, Result};
use crate::features::FeatureScheme;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SearchSpace {
    pub n_layers: Vec<usize>,
    pub hidden: Vec<usize>,
    /// Sampled log-uniformly; equal bounds pin the value.
    pub learning_rate: (f64, f64),
    pub batch_size: Vec<usize>,
    pub readout: Vec<Readout>,
}

impl Default for SearchSpace {
    fn default() -> Self {
        SearchSpace {
            n_layers: vec![2, 3, 4, 5],
            hidden: vec![32, 64, 128, 256],
            learning_rate: (1e-4, 1e-2),
            batch_size: vec![16, 32, 64],
            readout: vec![Readout::Sum, Readout::Mean],
        }
    }
}

impl SearchSpace {
    /// The space containing `config` only.
    pub fn single(config: &GnnConfig) -> Self {
        SearchSpace {
            n_layers: vec![config.n_layers],
            hidden: vec![config.hidden],
            learning_rate: (config.learning_rate, config.learning_rate),
            batch_size: vec![config.batch_size],
            readout: vec![config.readout],
        }
    }

    fn check(&self) -> Result<()> {
        let (lo, hi) = self.learning_rate;
        if self.n_layers.is_empty() || self.hidden.is_empty() || self.batch_size.is_empty() || self.readout.is_empty() {
            return Err(Error::Config("search space has an empty dimension".into()));
        }
        if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
            return Err(Error::Config(format!("invalid learning-rate range ({lo}, {hi})")));
        }
        Ok(())
    }

    pub fn sample(&self, base: &GnnConfig, rng: &mut ChaCha8Rng) -> GnnConfig {
        let pick = |v: &[usize], rng: &mut ChaCha8Rng| v[rng.random_range(0..v.len())];
        let (lo, hi) = self.learning_rate;
        let n_layers = pick(&self.n_layers, rng);
        let hidden = pick(&self.hidden, rng);
        let learning_rate = if lo == hi {
            lo
        } else {
            (lo.ln() + rng.random::<f64>() * (hi.ln() - lo.ln())).exp()
        };
        let batch_size = pick(&self.batch_size, rng);
        let readout = self.readout[rng.random_range(0..self.readout.len())];
        GnnConfig {
            n_layers,
            hidden,
            learning_rate,
            batch_size,
            readout,
            ..base.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialRow {
    pub trial: usize,
    pub seed: u64,
    pub n_layers: usize,
    pub hidden: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub readout: Readout,
    pub val_balanced_accuracy: f64,
}

#[derive(Debug, Clone)]
pub struct TuneResult {
    pub best_config: GnnConfig,
    pub best_seed: u64,
    pub best_score: f64,
    pub best_model: GnnModel,
    pub trials: Vec<TrialRow>,
}

/// Seed of the `j`-th run of every trial.
pub fn run_seed(meta_seed: u64, j: usize) -> u64 {
    meta_seed.wrapping_mul(0x9e37_79b9_7f4a_7c15).wrapping_add(j as u64 + 1)
}

#[allow(clippy::too_many_arguments)]
pub fn tune_gnn(
    space: &SearchSpace,
    base: &GnnConfig,
    train: GraphSet<'_>,
    validation: GraphSet<'_>,
    feature_scheme: FeatureScheme,
    n_classes: usize,
    n_trials: usize,
    n_seeds: usize,
    meta_seed: u64,
) -> Result<TuneResult> {
    space.check()?;
    if n_trials == 0 || n_seeds == 0 {
        return Err(Error::Config("n_trials and n_seeds must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(meta_seed);
    let mut trials = Vec::with_capacity(n_trials * n_seeds);
    let mut best: Option<(f64, GnnConfig, u64, GnnModel)> = None;
    for trial in 0..n_trials {
        let config = space.sample(base, &mut rng);
        for j in 0..n_seeds {
            let seed = run_seed(meta_seed, j);
            let (model, log) = train_gnn(train, validation, feature_scheme, n_classes, &config, seed)?;
            let score = match log.best_val_balanced_accuracy() {
                Some(s) => s,
                None => super::train::evaluate_balanced_accuracy(&model, validation)?,
            };
            trials.push(TrialRow {
                trial,
                seed,
                n_layers: config.n_layers,
                hidden: config.hidden,
                learning_rate: config.learning_rate,
                batch_size: config.batch_size,
                readout: config.readout,
                val_balanced_accuracy: score,
            });
            if best.as_ref().is_none_or(|b| score > b.0) {
                best = Some((score, config.clone(), seed, model));
            }
        }
    }
    let (best_score, best_config, best_seed, best_model) = best.expect("at least one trial");
    Ok(TuneResult {
        best_config,
        best_seed,
        best_score,
        best_model,
        trials,
    })
}
