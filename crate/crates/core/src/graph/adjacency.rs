use ndarray::{Array2, ArrayView2};

use super::Graph;
use crate::error::{Error, Result};

/// The GCN propagation operator `D̃^{-1/2} (A + I) D̃^{-1/2}` in CSR layout,
/// where `D̃` counts the added self-loop.
///
/// Column indices within a row are ascending and include the diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedAdjacency {
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl NormalizedAdjacency {
    pub fn new(graph: &Graph) -> Self {
        let neighbors: Vec<&[usize]> = (0..graph.num_nodes()).map(|i| graph.neighbors(i)).collect();
        Self::from_sorted_neighbors(&neighbors)
    }

    /// Build from `n` nodes and undirected edges given in any orientation.
    /// Isolated nodes are allowed here and get `Â[i][i] = 1`.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut lists = vec![Vec::new(); n];
        for &(a, b) in edges {
            if a >= n || b >= n {
                return Err(Error::Index {
                    index: a.max(b),
                    len: n,
                });
            }
            if a != b {
                lists[a].push(b);
                lists[b].push(a);
            }
        }
        for list in &mut lists {
            list.sort_unstable();
            list.dedup();
        }
        let neighbors: Vec<&[usize]> = lists.iter().map(Vec::as_slice).collect();
        Ok(Self::from_sorted_neighbors(&neighbors))
    }

    fn from_sorted_neighbors(neighbors: &[&[usize]]) -> Self {
        let n = neighbors.len();
        let inv_sqrt: Vec<f64> = neighbors
            .iter()
            .map(|list| 1.0 / ((list.len() + 1) as f64).sqrt())
            .collect();
        let nnz = n + neighbors.iter().map(|l| l.len()).sum::<usize>();
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::with_capacity(nnz);
        let mut values = Vec::with_capacity(nnz);
        row_ptr.push(0);
        for (i, list) in neighbors.iter().enumerate() {
            let split = list.partition_point(|&j| j < i);
            let cols = list[..split]
                .iter()
                .copied()
                .chain(std::iter::once(i))
                .chain(list[split..].iter().copied());
            for j in cols {
                col_idx.push(j);
                values.push(inv_sqrt[i] * inv_sqrt[j]);
            }
            row_ptr.push(col_idx.len());
        }
        Self {
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.row_ptr.len() - 1
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// `(column, value)` pairs of row `i`.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[span.clone()]
            .iter()
            .copied()
            .zip(self.values[span].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let span = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.col_idx[span.clone()].binary_search(&j) {
            Ok(pos) => self.values[span.start + pos],
            Err(_) => 0.0,
        }
    }

    /// `Â · m`.
    pub fn matmul(&self, m: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        let n = self.num_nodes();
        if m.nrows() != n {
            return Err(Error::Shape(format!(
                "adjacency is {n}x{n}, right operand has {} rows",
                m.nrows()
            )));
        }
        let mut out = Array2::zeros((n, m.ncols()));
        for i in 0..n {
            let mut acc = out.row_mut(i);
            for (j, a) in self.row(i) {
                acc.scaled_add(a, &m.row(j));
            }
        }
        Ok(out)
    }

    /// `Â · v`.
    pub fn matvec(&self, v: &[f64]) -> Result<Vec<f64>> {
        let n = self.num_nodes();
        if v.len() != n {
            return Err(Error::Shape(format!(
                "adjacency is {n}x{n}, vector has length {}",
                v.len()
            )));
        }
        Ok((0..n).map(|i| self.row(i).map(|(j, a)| a * v[j]).sum()).collect())
    }

    pub fn to_dense(&self) -> Array2<f64> {
        let n = self.num_nodes();
        let mut dense = Array2::zeros((n, n));
        for i in 0..n {
            for (j, a) in self.row(i) {
                dense[[i, j]] = a;
            }
        }
        dense
    }
}

/// Build the normalized propagation operator for `graph`.
pub fn normalize(graph: &Graph) -> NormalizedAdjacency {
    NormalizedAdjacency::new(graph)
}
