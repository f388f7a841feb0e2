//! Graph inputs, batches, and the stacked model: K message-passing layers, a readout and
//! a two-layer classification head.

use std::path::Path;
use std::str::FromStr;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::layers::{self, MlpVars};
use super::sparse::{Adjacency, BatchOperators, Readout};
use super::tape::{Tape, Var};
use crate::cfg::{CfgIndex, FunctionSample};
use crate::error::{Error, Result};
use crate::eval::{argmax, softmax, Predictions};
use crate::features::{FeatureScheme, Featurizer};

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Architecture {
    Gcn,
    Sage,
    Gin,
}

impl Architecture {
    pub fn name(self) -> &'static str {
        match self {
            Architecture::Gcn => "gcn",
            Architecture::Sage => "sage",
            Architecture::Gin => "gin",
        }
    }
}

impl FromStr for Architecture {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gcn" => Ok(Architecture::Gcn),
            "sage" | "graphsage" => Ok(Architecture::Sage),
            "gin" => Ok(Architecture::Gin),
            other => Err(Error::Config(format!("unknown architecture {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GnnConfig {
    pub architecture: Architecture,
    pub n_layers: usize,
    pub hidden: usize,
    pub readout: Readout,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub class_weight: bool,
    /// Keep CFG edge direction instead of symmetrizing.
    pub directed: bool,
    /// Apply `ln(1 + x)` to node features before the first layer.
    pub log_input: bool,
}

impl Default for GnnConfig {
    fn default() -> Self {
        GnnConfig {
            architecture: Architecture::Gin,
            n_layers: 3,
            hidden: 64,
            readout: Readout::Sum,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            adam_eps: 1e-8,
            epochs: 100,
            batch_size: 32,
            class_weight: true,
            directed: false,
            log_input: true,
        }
    }
}

impl GnnConfig {
    pub fn check(&self) -> Result<()> {
        if self.n_layers == 0 {
            return Err(Error::Config("n_layers must be at least 1".into()));
        }
        if self.hidden == 0 || self.batch_size == 0 {
            return Err(Error::Config("hidden and batch_size must be positive".into()));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!("invalid learning rate {}", self.learning_rate)));
        }
        Ok(())
    }
}

/// One graph: node features and edges between row indices.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphInput {
    pub features: Array2<f64>,
    pub edges: Vec<(usize, usize)>,
}

impl GraphInput {
    pub fn from_sample(featurizer: &Featurizer, sample: &FunctionSample) -> Result<Self> {
        let matrix = featurizer.node_matrix(&sample.cfg)?;
        let index = CfgIndex::new(&sample.cfg);
        let edges = index
            .succ
            .iter()
            .enumerate()
            .flat_map(|(u, succ)| succ.iter().map(move |&v| (u, v)))
            .collect();
        Ok(GraphInput {
            features: matrix.values,
            edges,
        })
    }

    pub fn n_nodes(&self) -> usize {
        self.features.nrows()
    }
}

/// Disjoint union of graphs: stacked features, shifted edges and node membership.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphBatch {
    pub x: Array2<f64>,
    pub edges: Vec<(usize, usize)>,
    pub membership: Vec<usize>,
    pub n_graphs: usize,
}

impl GraphBatch {
    pub fn new(graphs: &[&GraphInput]) -> Result<Self> {
        let dim = graphs.first().map_or(0, |g| g.features.ncols());
        let total: usize = graphs.iter().map(|g| g.n_nodes()).sum();
        let mut x = Array2::zeros((total, dim));
        let mut edges = Vec::new();
        let mut membership = Vec::with_capacity(total);
        let mut offset = 0;
        for (gi, g) in graphs.iter().enumerate() {
            if g.n_nodes() == 0 {
                return Err(Error::InvalidInput(format!("graph {gi} of the batch has no nodes")));
            }
            if g.features.ncols() != dim {
                return Err(Error::DimMismatch {
                    expected: dim,
                    found: g.features.ncols(),
                });
            }
            x.slice_mut(ndarray::s![offset..offset + g.n_nodes(), ..]).assign(&g.features);
            edges.extend(g.edges.iter().map(|&(u, v)| (u + offset, v + offset)));
            membership.extend(std::iter::repeat_n(gi, g.n_nodes()));
            offset += g.n_nodes();
        }
        Ok(GraphBatch {
            x,
            edges,
            membership,
            n_graphs: graphs.len(),
        })
    }

    pub fn operators(&self, directed: bool, readout: Readout) -> Result<BatchOperators> {
        let adjacency = Adjacency::from_edges(self.membership.len(), &self.edges, directed)?;
        BatchOperators::new(&adjacency, &self.membership, self.n_graphs, readout)
    }
}

/// A named weight matrix; serialized as `{name, shape, data}` with row-major data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "TensorRecord", try_from = "TensorRecord")]
pub struct Tensor {
    pub name: String,
    pub value: Array2<f64>,
}

#[derive(Serialize, Deserialize)]
struct TensorRecord {
    name: String,
    shape: [usize; 2],
    data: Vec<f64>,
}

impl From<Tensor> for TensorRecord {
    fn from(t: Tensor) -> Self {
        TensorRecord {
            shape: [t.value.nrows(), t.value.ncols()],
            data: t.value.iter().copied().collect(),
            name: t.name,
        }
    }
}

impl TryFrom<TensorRecord> for Tensor {
    type Error = String;

    fn try_from(r: TensorRecord) -> std::result::Result<Self, String> {
        let value = Array2::from_shape_vec((r.shape[0], r.shape[1]), r.data)
            .map_err(|e| format!("tensor {}: {e}", r.name))?;
        Ok(Tensor { name: r.name, value })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GnnModel {
    pub version: u32,
    pub config: GnnConfig,
    pub feature_scheme: FeatureScheme,
    pub input_dim: usize,
    pub n_classes: usize,
    pub seed: u64,
    pub weights: Vec<Tensor>,
}

/// Names and shapes of every parameter, in storage order.
pub fn parameter_layout(config: &GnnConfig, input_dim: usize, n_classes: usize) -> Vec<(String, (usize, usize))> {
    let h = config.hidden;
    let mut layout = Vec::new();
    for l in 0..config.n_layers {
        let d_in = if l == 0 { input_dim } else { h };
        match config.architecture {
            Architecture::Gcn => layout.push((format!("layer{l}.w"), (d_in, h))),
            Architecture::Sage => {
                layout.push((format!("layer{l}.w_self"), (d_in, h)));
                layout.push((format!("layer{l}.w_neigh"), (d_in, h)));
            }
            Architecture::Gin => {
                layout.push((format!("layer{l}.eps"), (1, 1)));
                layout.push((format!("layer{l}.w1"), (d_in, h)));
                layout.push((format!("layer{l}.b1"), (1, h)));
                layout.push((format!("layer{l}.w2"), (h, h)));
                layout.push((format!("layer{l}.b2"), (1, h)));
            }
        }
    }
    layout.push(("head.w1".into(), (h, h)));
    layout.push(("head.b1".into(), (1, h)));
    layout.push(("head.w2".into(), (h, n_classes)));
    layout.push(("head.b2".into(), (1, n_classes)));
    layout
}

impl GnnModel {
    /// Fresh weights: `U(−1/√fan_in, 1/√fan_in)` for weights and biases, GIN `eps = 0`.
    pub fn init(config: &GnnConfig, feature_scheme: FeatureScheme, input_dim: usize, n_classes: usize, seed: u64) -> Result<Self> {
        config.check()?;
        if input_dim == 0 || n_classes == 0 {
            return Err(Error::Config("input_dim and n_classes must be positive".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layout = parameter_layout(config, input_dim, n_classes);
        let mut weights = Vec::with_capacity(layout.len());
        let mut fan_in = input_dim;
        for (name, shape) in layout {
            let value = if name.ends_with(".eps") {
                Array2::zeros(shape)
            } else {
                let is_bias = name.rsplit('.').next().is_some_and(|n| n.starts_with('b'));
                if !is_bias {
                    fan_in = shape.0;
                }
                let bound = 1.0 / (fan_in as f64).sqrt();
                Array2::from_shape_simple_fn(shape, || rng.random_range(-bound..bound))
            };
            weights.push(Tensor { name, value });
        }
        Ok(GnnModel {
            version: MODEL_FORMAT_VERSION,
            config: config.clone(),
            feature_scheme,
            input_dim,
            n_classes,
            seed,
            weights,
        })
    }

    pub fn parameter_count(&self) -> usize {
        self.weights.iter().map(|t| t.value.len()).sum()
    }

    /// Puts every weight on the tape as a trainable leaf.
    pub fn params_on(&self, tape: &mut Tape) -> Vec<Var> {
        self.weights.iter().map(|t| tape.param(t.value.clone())).collect()
    }

    /// Logits of a batch, recorded on `tape`.
    pub fn forward_on(&self, tape: &mut Tape, params: &[Var], batch: &GraphBatch, ops: &BatchOperators) -> Result<Var> {
        if batch.x.ncols() != self.input_dim {
            return Err(Error::DimMismatch {
                expected: self.input_dim,
                found: batch.x.ncols(),
            });
        }
        let x = if self.config.log_input {
            batch.x.mapv(f64::ln_1p)
        } else {
            batch.x.clone()
        };
        let mut h = tape.constant(x);
        let mut p = params.iter().copied();
        let mut next = || p.next().expect("parameter layout");
        for _ in 0..self.config.n_layers {
            h = match self.config.architecture {
                Architecture::Gcn => layers::gcn(tape, &ops.gcn, h, next()),
                Architecture::Sage => {
                    let (ws, wn) = (next(), next());
                    layers::sage(tape, &ops.mean, h, ws, wn)
                }
                Architecture::Gin => {
                    let eps = next();
                    let m = MlpVars {
                        w1: next(),
                        b1: next(),
                        w2: next(),
                        b2: next(),
                    };
                    let out = layers::gin(tape, &ops.sum, h, eps, m);
                    tape.relu(out)
                }
            };
        }
        let g = tape.propagate(ops.readout.clone(), h);
        let head = MlpVars {
            w1: next(),
            b1: next(),
            w2: next(),
            b2: next(),
        };
        Ok(layers::mlp(tape, g, head))
    }

    pub fn logits(&self, batch: &GraphBatch) -> Result<Array2<f64>> {
        let ops = batch.operators(self.config.directed, self.config.readout)?;
        let mut tape = Tape::new();
        let params: Vec<Var> = self.weights.iter().map(|t| tape.constant(t.value.clone())).collect();
        let out = self.forward_on(&mut tape, &params, batch, &ops)?;
        Ok(tape.value(out).clone())
    }

    pub fn predict(&self, graphs: &[&GraphInput]) -> Result<Predictions> {
        const CHUNK: usize = 256;
        let mut labels = Vec::with_capacity(graphs.len());
        let mut scores = Vec::with_capacity(graphs.len());
        for chunk in graphs.chunks(CHUNK) {
            let logits = self.logits(&GraphBatch::new(chunk)?)?;
            for row in logits.rows() {
                let s = softmax(row.as_slice().expect("contiguous rows"));
                labels.push(argmax(&s));
                scores.push(s);
            }
        }
        Ok(Predictions { labels, scores })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("model serializes")
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json() + "\n")?;
        Ok(())
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let model: GnnModel = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        let layout = parameter_layout(&model.config, model.input_dim, model.n_classes);
        let matches = layout.len() == model.weights.len()
            && layout
                .iter()
                .zip(&model.weights)
                .all(|((name, shape), t)| *name == t.name && *shape == t.value.dim());
        if !matches {
            return Err(Error::InvalidInput("weights do not match the model layout".into()));
        }
        Ok(model)
    }
}

/// Logits of a batch (see [`GnnModel::logits`]).
pub fn model_forward(model: &GnnModel, batch: &GraphBatch) -> Result<Array2<f64>> {
    model.logits(batch)
}
