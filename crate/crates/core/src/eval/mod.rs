//! Evaluation: metrics, reports and the benchmark harness.

pub mod benchmark;
pub mod metrics;
pub mod report;

pub use benchmark::{run_benchmark, BenchmarkRow, BenchmarkSpec, BenchmarkTable, CellStatus};
pub use metrics::{balanced_accuracy, confusion_matrix, inverse_frequency_weights, per_class_recall};
pub use report::{evaluate, to_binary_task, ClassSpace, EvalReport, Mode, Task};

/// Labels with their per-class scores.
#[derive(Debug, Clone, PartialEq)]
pub struct Predictions {
    pub labels: Vec<usize>,
    /// Rows sum to 1.
    pub scores: Vec<Vec<f64>>,
}

/// Index of the largest entry; the first one on ties.
pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logits.iter().map(|&z| (z - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}
