//! Finite-difference verification of tape gradients.

use ndarray::Array2;

use super::model::{GnnModel, GraphBatch};
use super::tape::{Tape, Var};
use crate::error::Result;

pub const FD_STEP: f64 = 1e-5;
/// Denominator floor of the relative error, so vanishing gradients compare absolutely.
pub const RELATIVE_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradientCheckReport {
    pub max_relative_error: f64,
    pub checked: usize,
    /// Coordinates whose perturbation moved some ReLU input across zero.
    pub skipped_at_kinks: usize,
}

/// Compares reverse-mode gradients of a scalar built by `loss` against central differences
/// for every entry of `params`.
pub fn gradient_check<F>(params: &[Array2<f64>], loss: F) -> GradientCheckReport
where
    F: Fn(&mut Tape, &[Var]) -> Var,
{
    let evaluate = |values: &[Array2<f64>]| {
        let mut tape = Tape::new();
        let vars: Vec<Var> = values.iter().map(|v| tape.param(v.clone())).collect();
        let out = loss(&mut tape, &vars);
        let value = tape.value(out).sum();
        (tape, vars, out, value)
    };
    let (tape, vars, out, _) = evaluate(params);
    let signature = tape.relu_signature();
    let grads = tape.backward(out);
    let analytic: Vec<Array2<f64>> = vars
        .iter()
        .zip(params)
        .map(|(&v, p)| grads.get(v, p.dim()))
        .collect();

    let mut report = GradientCheckReport {
        max_relative_error: 0.0,
        checked: 0,
        skipped_at_kinks: 0,
    };
    let mut work: Vec<Array2<f64>> = params.to_vec();
    for (p, param) in params.iter().enumerate() {
        for (idx, &orig) in param.indexed_iter() {
            work[p][idx] = orig + FD_STEP;
            let (tape_plus, _, _, plus) = evaluate(&work);
            work[p][idx] = orig - FD_STEP;
            let (tape_minus, _, _, minus) = evaluate(&work);
            work[p][idx] = orig;
            if tape_plus.relu_signature() != signature || tape_minus.relu_signature() != signature {
                report.skipped_at_kinks += 1;
                continue;
            }
            let numeric = (plus - minus) / (2.0 * FD_STEP);
            let a = analytic[p][idx];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(RELATIVE_FLOOR);
            report.max_relative_error = report.max_relative_error.max(rel);
            report.checked += 1;
        }
    }
    report
}

/// Checks the full model: cross-entropy of the logits of `batch` against `targets`.
pub fn model_gradient_check(model: &GnnModel, batch: &GraphBatch, targets: &[usize]) -> Result<GradientCheckReport> {
    let ops = batch.operators(model.config.directed, model.config.readout)?;
    let params: Vec<Array2<f64>> = model.weights.iter().map(|t| t.value.clone()).collect();
    let weights = vec![1.0; targets.len()];
    // validate shapes once outside the closure
    model.logits(batch)?;
    Ok(gradient_check(&params, |tape, vars| {
        let logits = model.forward_on(tape, vars, batch, &ops).expect("checked above");
        tape.softmax_cross_entropy(logits, targets, &weights)
    }))
}
