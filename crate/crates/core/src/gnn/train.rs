//! Mini-batch training with Adam and best-validation checkpointing.

use std::io::Write;
use std::path::Path;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::model::{GnnConfig, GnnModel, GraphBatch, GraphInput};
use super::tape::Tape;
use crate::error::{Error, Result};
use crate::eval::metrics::{balanced_accuracy, inverse_frequency_weights};
use crate::features::FeatureScheme;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_balanced_accuracy: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainingLog {
    pub epochs: Vec<EpochLog>,
    /// Epoch (1-based) of the returned checkpoint; `None` if no epoch ran.
    pub best_epoch: Option<usize>,
}

impl TrainingLog {
    pub fn best_val_balanced_accuracy(&self) -> Option<f64> {
        self.best_epoch.map(|e| self.epochs[e - 1].val_balanced_accuracy)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for row in &self.epochs {
            w.serialize(row)?;
        }
        if self.epochs.is_empty() {
            w.write_record(["epoch", "train_loss", "val_balanced_accuracy"])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_csv_file(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }
}

/// Labelled graphs.
#[derive(Debug, Clone, Copy)]
pub struct GraphSet<'a> {
    pub graphs: &'a [GraphInput],
    pub labels: &'a [usize],
}

impl GraphSet<'_> {
    fn check(&self, what: &str) -> Result<()> {
        if self.graphs.len() != self.labels.len() {
            return Err(Error::LengthMismatch {
                left: self.graphs.len(),
                right: self.labels.len(),
            });
        }
        if self.graphs.is_empty() {
            return Err(Error::InvalidInput(format!("empty {what} set")));
        }
        Ok(())
    }
}

struct Adam {
    m: Vec<Array2<f64>>,
    v: Vec<Array2<f64>>,
    t: i32,
}

impl Adam {
    fn new(model: &GnnModel) -> Self {
        let zeros: Vec<Array2<f64>> = model.weights.iter().map(|w| Array2::zeros(w.value.raw_dim())).collect();
        Adam {
            m: zeros.clone(),
            v: zeros,
            t: 0,
        }
    }

    fn step(&mut self, model: &mut GnnModel, grads: &[Array2<f64>]) {
        let c = model.config.clone();
        self.t += 1;
        let bc1 = 1.0 - c.beta1.powi(self.t);
        let bc2 = 1.0 - c.beta2.powi(self.t);
        for (((w, g), m), v) in model.weights.iter_mut().zip(grads).zip(&mut self.m).zip(&mut self.v) {
            ndarray::Zip::from(&mut w.value)
                .and(g)
                .and(m)
                .and(v)
                .for_each(|w, &g, m, v| {
                    *m = c.beta1 * *m + (1.0 - c.beta1) * g;
                    *v = c.beta2 * *v + (1.0 - c.beta2) * g * g;
                    *w -= c.learning_rate * (*m / bc1) / ((*v / bc2).sqrt() + c.adam_eps);
                });
        }
    }
}

pub fn evaluate_balanced_accuracy(model: &GnnModel, set: GraphSet<'_>) -> Result<f64> {
    let refs: Vec<&GraphInput> = set.graphs.iter().collect();
    let predicted = model.predict(&refs)?;
    balanced_accuracy(&predicted.labels, set.labels)
}

/// Trains from a fresh seeded initialization and returns the best-validation checkpoint.
pub fn train_gnn(
    train: GraphSet<'_>,
    validation: GraphSet<'_>,
    feature_scheme: FeatureScheme,
    n_classes: usize,
    config: &GnnConfig,
    seed: u64,
) -> Result<(GnnModel, TrainingLog)> {
    train.check("training")?;
    validation.check("validation")?;
    if let Some(&bad) = train.labels.iter().chain(validation.labels).find(|&&y| y >= n_classes) {
        return Err(Error::InvalidInput(format!("label {bad} outside a {n_classes}-class space")));
    }
    let input_dim = train.graphs[0].features.ncols();
    let mut model = GnnModel::init(config, feature_scheme, input_dim, n_classes, seed)?;
    let mut log = TrainingLog::default();
    if config.epochs == 0 {
        return Ok((model, log));
    }
    let class_weights = if config.class_weight {
        inverse_frequency_weights(train.labels, n_classes)
    } else {
        vec![1.0; n_classes]
    };
    let mut adam = Adam::new(&model);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_0f_ba7c4e5);
    let mut order: Vec<usize> = (0..train.graphs.len()).collect();
    let mut best: Option<(f64, GnnModel)> = None;

    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut n_batches = 0;
        for (b, chunk) in order.chunks(config.batch_size).enumerate() {
            let graphs: Vec<&GraphInput> = chunk.iter().map(|&i| &train.graphs[i]).collect();
            let targets: Vec<usize> = chunk.iter().map(|&i| train.labels[i]).collect();
            let weights: Vec<f64> = targets.iter().map(|&y| class_weights[y]).collect();
            let batch = GraphBatch::new(&graphs)?;
            let ops = batch.operators(config.directed, config.readout)?;
            let mut tape = Tape::new();
            let params = model.params_on(&mut tape);
            let logits = model.forward_on(&mut tape, &params, &batch, &ops)?;
            let fault = |reason: &str| Error::TrainingFault {
                epoch,
                batch: b + 1,
                reason: reason.to_string(),
            };
            if tape.value(logits).iter().any(|v| !v.is_finite()) {
                return Err(fault("non-finite logits"));
            }
            let loss = tape.softmax_cross_entropy(logits, &targets, &weights);
            let loss_value = tape.value(loss)[[0, 0]];
            if !loss_value.is_finite() {
                return Err(fault("non-finite loss"));
            }
            let grads = tape.backward(loss);
            let grads: Vec<Array2<f64>> = params
                .iter()
                .zip(&model.weights)
                .map(|(&p, w)| grads.get(p, w.value.dim()))
                .collect();
            adam.step(&mut model, &grads);
            if model.weights.iter().any(|w| w.value.iter().any(|v| !v.is_finite())) {
                return Err(fault("non-finite weights after update"));
            }
            loss_sum += loss_value;
            n_batches += 1;
        }
        let val = evaluate_balanced_accuracy(&model, validation)?;
        log.epochs.push(EpochLog {
            epoch,
            train_loss: loss_sum / n_batches as f64,
            val_balanced_accuracy: val,
        });
        log::debug!("epoch {epoch}: loss {:.4} val_ba {val:.4}", loss_sum / n_batches as f64);
        if best.as_ref().is_none_or(|(b, _)| val > *b) {
            best = Some((val, model.clone()));
            log.best_epoch = Some(epoch);
        }
    }
    Ok((best.map(|(_, m)| m).unwrap_or(model), log))
}
