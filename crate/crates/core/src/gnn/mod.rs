//! Message-passing graph neural networks on a small reverse-mode tape.

pub mod gradcheck;
pub mod layers;
pub mod model;
pub mod sparse;
pub mod tape;
pub mod train;
pub mod tune;

pub use gradcheck::{gradient_check, model_gradient_check, GradientCheckReport};
pub use layers::{layer_forward_gcn, layer_forward_gin, layer_forward_sage, readout, GinMlp};
pub use model::{model_forward, parameter_layout, Architecture, GnnConfig, GnnModel, GraphBatch, GraphInput, Tensor};
pub use sparse::{Adjacency, BatchOperators, Readout, SparseMatrix};
pub use tape::{Gradients, Tape, Var};
pub use train::{evaluate_balanced_accuracy, train_gnn, EpochLog, GraphSet, TrainingLog};
pub use tune::{tune_gnn, SearchSpace, TrialRow, TuneResult};
