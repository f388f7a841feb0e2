//! Classification metrics.

use crate::error::{Error, Result};

fn check_lengths(predictions: &[usize], truth: &[usize]) -> Result<()> {
    if predictions.len() != truth.len() {
        return Err(Error::LengthMismatch {
            left: predictions.len(),
            right: truth.len(),
        });
    }
    if truth.is_empty() {
        return Err(Error::EmptyEvaluation("no samples to score".into()));
    }
    Ok(())
}

/// `n_classes × n_classes` counts; row = truth, column = prediction.
pub fn confusion_matrix(predictions: &[usize], truth: &[usize], n_classes: usize) -> Result<Vec<Vec<u64>>> {
    check_lengths(predictions, truth)?;
    let mut m = vec![vec![0u64; n_classes]; n_classes];
    for (&p, &t) in predictions.iter().zip(truth) {
        if p >= n_classes || t >= n_classes {
            return Err(Error::InvalidInput(format!(
                "label {} outside a {n_classes}-class space",
                p.max(t)
            )));
        }
        m[t][p] += 1;
    }
    Ok(m)
}

/// Recall of each class; `None` for classes absent from the truth.
pub fn per_class_recall(confusion: &[Vec<u64>]) -> Vec<Option<f64>> {
    confusion
        .iter()
        .enumerate()
        .map(|(k, row)| {
            let support: u64 = row.iter().sum();
            (support > 0).then(|| row[k] as f64 / support as f64)
        })
        .collect()
}

/// Mean recall over the classes present in `truth`.
pub fn balanced_accuracy(predictions: &[usize], truth: &[usize]) -> Result<f64> {
    check_lengths(predictions, truth)?;
    let n_classes = predictions.iter().chain(truth).max().unwrap() + 1;
    let recalls = per_class_recall(&confusion_matrix(predictions, truth, n_classes)?);
    Ok(mean_present(&recalls))
}

pub(crate) fn mean_present(recalls: &[Option<f64>]) -> f64 {
    let present: Vec<f64> = recalls.iter().flatten().copied().collect();
    present.iter().sum::<f64>() / present.len() as f64
}

/// Per-class weights `n / (k · n_c)` over the `k` classes present, so the per-sample mean is 1.
pub fn inverse_frequency_weights(labels: &[usize], n_classes: usize) -> Vec<f64> {
    let mut counts = vec![0usize; n_classes];
    for &y in labels {
        counts[y] += 1;
    }
    let present = counts.iter().filter(|&&c| c > 0).count();
    counts
        .iter()
        .map(|&c| {
            if c == 0 {
                0.0
            } else {
                labels.len() as f64 / (present * c) as f64
            }
        })
        .collect()
}
