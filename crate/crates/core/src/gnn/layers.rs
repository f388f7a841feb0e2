//! Message-passing layers and readout, on the tape and as plain functions.

use std::sync::Arc;

use ndarray::Array2;

use super::sparse::{readout_operator, Adjacency, Readout};
use super::tape::{Tape, Var};
use crate::error::{Error, Result};

/// `ReLU(P · H · W)` with `P` the normalized GCN operator.
pub fn gcn(tape: &mut Tape, operator: &Arc<crate::gnn::SparseMatrix>, h: Var, w: Var) -> Var {
    let hw = tape.matmul(h, w);
    let p = tape.propagate(operator.clone(), hw);
    tape.relu(p)
}

/// `ReLU(H · W_self + mean_neighbors(H) · W_neigh)`.
pub fn sage(tape: &mut Tape, mean: &Arc<crate::gnn::SparseMatrix>, h: Var, w_self: Var, w_neigh: Var) -> Var {
    let own = tape.matmul(h, w_self);
    let m = tape.propagate(mean.clone(), h);
    let neigh = tape.matmul(m, w_neigh);
    let s = tape.add(own, neigh);
    tape.relu(s)
}

/// Weights of the two-layer perceptron inside a GIN layer.
#[derive(Debug, Clone, Copy)]
pub struct MlpVars {
    pub w1: Var,
    pub b1: Var,
    pub w2: Var,
    pub b2: Var,
}

/// `Lin2(ReLU(Lin1(x)))`.
pub fn mlp(tape: &mut Tape, x: Var, p: MlpVars) -> Var {
    let a = tape.matmul(x, p.w1);
    let a = tape.add_row(a, p.b1);
    let a = tape.relu(a);
    let b = tape.matmul(a, p.w2);
    tape.add_row(b, p.b2)
}

/// `MLP((1 + eps) · H + sum_neighbors(H))`.
pub fn gin(tape: &mut Tape, sum: &Arc<crate::gnn::SparseMatrix>, h: Var, eps: Var, p: MlpVars) -> Var {
    let own = tape.scale_one_plus(eps, h);
    let neigh = tape.propagate(sum.clone(), h);
    let z = tape.add(own, neigh);
    mlp(tape, z, p)
}

fn check_rows(h: &Array2<f64>, adjacency: &Adjacency) -> Result<()> {
    if h.nrows() != adjacency.len() {
        return Err(Error::DimMismatch {
            expected: adjacency.len(),
            found: h.nrows(),
        });
    }
    Ok(())
}

fn check_inner(left_cols: usize, right: &Array2<f64>) -> Result<()> {
    if left_cols != right.nrows() {
        return Err(Error::DimMismatch {
            expected: left_cols,
            found: right.nrows(),
        });
    }
    Ok(())
}

pub fn layer_forward_gcn(h: &Array2<f64>, adjacency: &Adjacency, w: &Array2<f64>) -> Result<Array2<f64>> {
    check_rows(h, adjacency)?;
    check_inner(h.ncols(), w)?;
    let mut tape = Tape::new();
    let (hv, wv) = (tape.constant(h.clone()), tape.constant(w.clone()));
    let out = gcn(&mut tape, &Arc::new(adjacency.gcn_operator()), hv, wv);
    Ok(tape.value(out).clone())
}

pub fn layer_forward_sage(
    h: &Array2<f64>,
    adjacency: &Adjacency,
    w_self: &Array2<f64>,
    w_neigh: &Array2<f64>,
) -> Result<Array2<f64>> {
    check_rows(h, adjacency)?;
    check_inner(h.ncols(), w_self)?;
    check_inner(h.ncols(), w_neigh)?;
    let mut tape = Tape::new();
    let hv = tape.constant(h.clone());
    let (s, n) = (tape.constant(w_self.clone()), tape.constant(w_neigh.clone()));
    let out = sage(&mut tape, &Arc::new(adjacency.mean_operator()), hv, s, n);
    Ok(tape.value(out).clone())
}

/// Dense parameters of a GIN perceptron.
#[derive(Debug, Clone, PartialEq)]
pub struct GinMlp {
    pub w1: Array2<f64>,
    pub b1: Array2<f64>,
    pub w2: Array2<f64>,
    pub b2: Array2<f64>,
}

impl GinMlp {
    /// Identity weights and zero biases; acts as the identity on non-negative inputs.
    pub fn identity(dim: usize) -> Self {
        GinMlp {
            w1: Array2::eye(dim),
            b1: Array2::zeros((1, dim)),
            w2: Array2::eye(dim),
            b2: Array2::zeros((1, dim)),
        }
    }
}

pub fn layer_forward_gin(h: &Array2<f64>, adjacency: &Adjacency, eps: f64, mlp_weights: &GinMlp) -> Result<Array2<f64>> {
    check_rows(h, adjacency)?;
    check_inner(h.ncols(), &mlp_weights.w1)?;
    check_inner(mlp_weights.w1.ncols(), &mlp_weights.w2)?;
    let mut tape = Tape::new();
    let hv = tape.constant(h.clone());
    let e = tape.constant(Array2::from_elem((1, 1), eps));
    let p = MlpVars {
        w1: tape.constant(mlp_weights.w1.clone()),
        b1: tape.constant(mlp_weights.b1.clone()),
        w2: tape.constant(mlp_weights.w2.clone()),
        b2: tape.constant(mlp_weights.b2.clone()),
    };
    let out = gin(&mut tape, &Arc::new(adjacency.sum_operator()), hv, e, p);
    Ok(tape.value(out).clone())
}

/// Per-graph sum or mean of node rows.
pub fn readout(h: &Array2<f64>, membership: &[usize], n_graphs: usize, method: Readout) -> Result<Array2<f64>> {
    if h.nrows() != membership.len() {
        return Err(Error::DimMismatch {
            expected: membership.len(),
            found: h.nrows(),
        });
    }
    Ok(readout_operator(membership, n_graphs, method)?.mul(h.view()))
}
