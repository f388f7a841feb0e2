//! Reverse-mode differentiation over dense matrices.
//!
//! Every value on a [`Tape`] is a 2-D array. Operations append a node holding the forward
//! value; [`Tape::backward`] walks the nodes in reverse and accumulates gradients into those
//! that require them.

use std::sync::Arc;

use ndarray::{Array2, Axis};

use super::sparse::SparseMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var),
    /// `a + 1·b` with `b` a single row.
    AddRow(Var, Var),
    Relu(Var),
    /// `(1 + s)·a` with `s` a 1×1 scalar.
    ScaleOnePlus(Var, Var),
    Propagate(Arc<SparseMatrix>, Var),
    SoftmaxCrossEntropy {
        logits: Var,
        targets: Vec<usize>,
        weights: Vec<f64>,
        probs: Array2<f64>,
        weight_sum: f64,
    },
}

#[derive(Debug)]
struct Node {
    value: Array2<f64>,
    op: Op,
    requires_grad: bool,
}

#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Gradients of one backward pass, indexed by [`Var`].
#[derive(Debug)]
pub struct Gradients(Vec<Option<Array2<f64>>>);

impl Gradients {
    /// Gradient of `v`, or zeros if nothing flowed into it.
    pub fn get(&self, v: Var, shape: (usize, usize)) -> Array2<f64> {
        self.0[v.0].clone().unwrap_or_else(|| Array2::zeros(shape))
    }
}

impl Tape {
    pub fn new() -> Self {
        Tape::default()
    }

    fn push(&mut self, value: Array2<f64>, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node { value, op, requires_grad });
        Var(self.nodes.len() - 1)
    }

    fn needs(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.nodes[v.0].requires_grad)
    }

    /// A trainable input.
    pub fn param(&mut self, value: Array2<f64>) -> Var {
        self.push(value, Op::Leaf, true)
    }

    /// A constant input.
    pub fn constant(&mut self, value: Array2<f64>) -> Var {
        self.push(value, Op::Leaf, false)
    }

    pub fn value(&self, v: Var) -> &Array2<f64> {
        &self.nodes[v.0].value
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let value = self.value(a).dot(self.value(b));
        let rg = self.needs(&[a, b]);
        self.push(value, Op::MatMul(a, b), rg)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let value = self.value(a) + self.value(b);
        let rg = self.needs(&[a, b]);
        self.push(value, Op::Add(a, b), rg)
    }

    pub fn add_row(&mut self, a: Var, row: Var) -> Var {
        assert_eq!(self.value(row).nrows(), 1, "bias must be a single row");
        let value = self.value(a) + self.value(row);
        let rg = self.needs(&[a, row]);
        self.push(value, Op::AddRow(a, row), rg)
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let value = self.value(a).mapv(|x| x.max(0.0));
        let rg = self.needs(&[a]);
        self.push(value, Op::Relu(a), rg)
    }

    pub fn scale_one_plus(&mut self, s: Var, a: Var) -> Var {
        let factor = 1.0 + self.value(s)[[0, 0]];
        let value = self.value(a) * factor;
        let rg = self.needs(&[s, a]);
        self.push(value, Op::ScaleOnePlus(s, a), rg)
    }

    pub fn propagate(&mut self, operator: Arc<SparseMatrix>, a: Var) -> Var {
        let value = operator.mul(self.value(a).view());
        let rg = self.needs(&[a]);
        self.push(value, Op::Propagate(operator, a), rg)
    }

    /// `Σ_i w_i · (−log softmax(z_i)[t_i]) / Σ_i w_i`, a 1×1 value.
    pub fn softmax_cross_entropy(&mut self, logits: Var, targets: &[usize], weights: &[f64]) -> Var {
        let z = self.value(logits);
        assert_eq!(z.nrows(), targets.len());
        assert_eq!(z.nrows(), weights.len());
        let mut probs = z.clone();
        let mut total = 0.0;
        for (i, mut row) in probs.rows_mut().into_iter().enumerate() {
            let m = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
            row.mapv_inplace(|v| (v - m).exp());
            let s = row.sum();
            row.mapv_inplace(|v| v / s);
            total += weights[i] * -(z[[i, targets[i]]] - m - s.ln());
        }
        let weight_sum: f64 = weights.iter().sum();
        let value = Array2::from_elem((1, 1), total / weight_sum);
        let rg = self.needs(&[logits]);
        self.push(
            value,
            Op::SoftmaxCrossEntropy {
                logits,
                targets: targets.to_vec(),
                weights: weights.to_vec(),
                probs,
                weight_sum,
            },
            rg,
        )
    }

    /// Sign pattern of every ReLU input (`true` where positive), in tape order.
    pub fn relu_signature(&self) -> Vec<bool> {
        self.nodes
            .iter()
            .filter_map(|n| match n.op {
                Op::Relu(a) => Some(a),
                _ => None,
            })
            .flat_map(|a| self.value(a).iter().map(|&x| x > 0.0).collect::<Vec<_>>())
            .collect()
    }

    /// Gradients of the sum of `root`'s entries.
    pub fn backward(&self, root: Var) -> Gradients {
        let mut grads: Vec<Option<Array2<f64>>> = vec![None; self.nodes.len()];
        grads[root.0] = Some(Array2::ones(self.value(root).raw_dim()));
        for i in (0..=root.0).rev() {
            let node = &self.nodes[i];
            if matches!(node.op, Op::Leaf) {
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            let mut send = |v: Var, d: Array2<f64>| {
                if !self.nodes[v.0].requires_grad {
                    return;
                }
                match &mut grads[v.0] {
                    Some(acc) => *acc += &d,
                    slot @ None => *slot = Some(d),
                }
            };
            match &node.op {
                Op::Leaf => unreachable!(),
                Op::MatMul(a, b) => {
                    if self.nodes[a.0].requires_grad {
                        send(*a, g.dot(&self.value(*b).t()));
                    }
                    if self.nodes[b.0].requires_grad {
                        send(*b, self.value(*a).t().dot(&g));
                    }
                }
                Op::Add(a, b) => {
                    send(*a, g.clone());
                    send(*b, g);
                }
                Op::AddRow(a, row) => {
                    send(*row, g.sum_axis(Axis(0)).insert_axis(Axis(0)));
                    send(*a, g);
                }
                Op::Relu(a) => {
                    let mask = self.value(*a).mapv(|x| if x > 0.0 { 1.0 } else { 0.0 });
                    send(*a, g * mask);
                }
                Op::ScaleOnePlus(s, a) => {
                    let factor = 1.0 + self.value(*s)[[0, 0]];
                    let ds = (&g * self.value(*a)).sum();
                    send(*s, Array2::from_elem((1, 1), ds));
                    send(*a, g * factor);
                }
                Op::Propagate(operator, a) => {
                    if self.nodes[a.0].requires_grad {
                        send(*a, operator.tmul(g.view()));
                    }
                }
                Op::SoftmaxCrossEntropy {
                    logits,
                    targets,
                    weights,
                    probs,
                    weight_sum,
                } => {
                    let upstream = g[[0, 0]];
                    let mut d = probs.clone();
                    for (r, mut row) in d.rows_mut().into_iter().enumerate() {
                        row[targets[r]] -= 1.0;
                        row *= upstream * weights[r] / weight_sum;
                    }
                    send(*logits, d);
                }
            }
        }
        Gradients(grads)
    }
}
