//! Sparse propagation operators over (batched) graphs.

use std::sync::Arc;

use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};

/// Compressed sparse rows.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    pub rows: usize,
    pub cols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    data: Vec<f64>,
}

impl SparseMatrix {
    /// Builds from per-row `(column, value)` lists.
    pub fn from_rows(cols: usize, rows: Vec<Vec<(usize, f64)>>) -> Self {
        let mut indptr = Vec::with_capacity(rows.len() + 1);
        let mut indices = Vec::new();
        let mut data = Vec::new();
        indptr.push(0);
        for row in &rows {
            for &(c, v) in row {
                debug_assert!(c < cols);
                indices.push(c);
                data.push(v);
            }
            indptr.push(indices.len());
        }
        SparseMatrix {
            rows: rows.len(),
            cols,
            indptr,
            indices,
            data,
        }
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.indptr[r]..self.indptr[r + 1];
        self.indices[span.clone()].iter().copied().zip(self.data[span].iter().copied())
    }

    pub fn nnz(&self) -> usize {
        self.data.len()
    }

    pub fn to_dense(&self) -> Array2<f64> {
        let mut m = Array2::zeros((self.rows, self.cols));
        for r in 0..self.rows {
            for (c, v) in self.row(r) {
                m[[r, c]] += v;
            }
        }
        m
    }

    /// `self · x`.
    pub fn mul(&self, x: ArrayView2<'_, f64>) -> Array2<f64> {
        assert_eq!(self.cols, x.nrows(), "sparse product shape");
        let mut out = Array2::zeros((self.rows, x.ncols()));
        for r in 0..self.rows {
            let mut target = out.row_mut(r);
            for (c, v) in self.row(r) {
                target.scaled_add(v, &x.row(c));
            }
        }
        out
    }

    /// `selfᵀ · g`.
    pub fn tmul(&self, g: ArrayView2<'_, f64>) -> Array2<f64> {
        assert_eq!(self.rows, g.nrows(), "sparse transpose product shape");
        let mut out = Array2::zeros((self.cols, g.ncols()));
        for r in 0..self.rows {
            let source = g.row(r);
            for (c, v) in self.row(r) {
                out.row_mut(c).scaled_add(v, &source);
            }
        }
        out
    }
}

/// Neighbor lists used for message passing.
///
/// Undirected (default): `A ∪ Aᵀ`, so every edge end sees the other. Directed: a node
/// receives from its predecessors only. Self-loops are dropped in both modes.
#[derive(Debug, Clone, PartialEq)]
pub struct Adjacency {
    pub neighbors: Vec<Vec<usize>>,
}

impl Adjacency {
    pub fn from_edges(n: usize, edges: &[(usize, usize)], directed: bool) -> Result<Self> {
        let mut neighbors = vec![Vec::new(); n];
        for &(u, v) in edges {
            if u >= n || v >= n {
                return Err(Error::InvalidInput(format!("edge ({u}, {v}) outside a {n}-node graph")));
            }
            if u == v {
                continue;
            }
            neighbors[v].push(u);
            if !directed {
                neighbors[u].push(v);
            }
        }
        for list in &mut neighbors {
            list.sort_unstable();
            list.dedup();
        }
        Ok(Adjacency { neighbors })
    }

    pub fn len(&self) -> usize {
        self.neighbors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.neighbors.is_empty()
    }

    /// `D̂^{-1/2} (A + I) D̂^{-1/2}` with `D̂` the row sums of `A + I`.
    pub fn gcn_operator(&self) -> SparseMatrix {
        let inv_sqrt: Vec<f64> = self
            .neighbors
            .iter()
            .map(|nb| 1.0 / ((nb.len() + 1) as f64).sqrt())
            .collect();
        let rows = self
            .neighbors
            .iter()
            .enumerate()
            .map(|(v, nb)| {
                let mut row: Vec<(usize, f64)> = nb.iter().map(|&u| (u, inv_sqrt[v] * inv_sqrt[u])).collect();
                row.push((v, inv_sqrt[v] * inv_sqrt[v]));
                row.sort_by_key(|e| e.0);
                row
            })
            .collect();
        SparseMatrix::from_rows(self.len(), rows)
    }

    /// Neighbor mean; nodes without neighbors get an all-zero row.
    pub fn mean_operator(&self) -> SparseMatrix {
        let rows = self
            .neighbors
            .iter()
            .map(|nb| {
                let w = 1.0 / nb.len().max(1) as f64;
                nb.iter().map(|&u| (u, w)).collect()
            })
            .collect();
        SparseMatrix::from_rows(self.len(), rows)
    }

    pub fn sum_operator(&self) -> SparseMatrix {
        let rows = self
            .neighbors
            .iter()
            .map(|nb| nb.iter().map(|&u| (u, 1.0)).collect())
            .collect();
        SparseMatrix::from_rows(self.len(), rows)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Readout {
    Sum,
    Mean,
}

impl Readout {
    pub fn name(self) -> &'static str {
        match self {
            Readout::Sum => "sum",
            Readout::Mean => "mean",
        }
    }
}

/// `B × N` pooling matrix of a node-to-graph membership vector.
pub fn readout_operator(membership: &[usize], n_graphs: usize, method: Readout) -> Result<SparseMatrix> {
    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n_graphs];
    for (node, &g) in membership.iter().enumerate() {
        if g >= n_graphs {
            return Err(Error::InvalidInput(format!("node {node} belongs to graph {g} of {n_graphs}")));
        }
        rows[g].push((node, 1.0));
    }
    if let Some(g) = rows.iter().position(Vec::is_empty) {
        return Err(Error::InvalidInput(format!("graph {g} of the batch has no nodes")));
    }
    if method == Readout::Mean {
        for row in &mut rows {
            let w = 1.0 / row.len() as f64;
            row.iter_mut().for_each(|e| e.1 = w);
        }
    }
    Ok(SparseMatrix::from_rows(membership.len(), rows))
}

/// The propagation operators a forward pass over one batch may need.
#[derive(Debug, Clone)]
pub struct BatchOperators {
    pub gcn: Arc<SparseMatrix>,
    pub mean: Arc<SparseMatrix>,
    pub sum: Arc<SparseMatrix>,
    pub readout: Arc<SparseMatrix>,
}

impl BatchOperators {
    pub fn new(adjacency: &Adjacency, membership: &[usize], n_graphs: usize, readout: Readout) -> Result<Self> {
        Ok(BatchOperators {
            gcn: Arc::new(adjacency.gcn_operator()),
            mean: Arc::new(adjacency.mean_operator()),
            sum: Arc::new(adjacency.sum_operator()),
            readout: Arc::new(readout_operator(membership, n_graphs, readout)?),
        })
    }
}
