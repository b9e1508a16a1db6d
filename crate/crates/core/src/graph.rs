//! Undirected simple graphs in compressed sparse row form.
//!
//! Node ids are dense `0..n`. Adjacency lists are sorted and duplicate-free,
//! so every traversal and every sparse product visits entries in a fixed
//! order and results are reproducible bit-for-bit.

use std::collections::{BTreeMap, VecDeque};

use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Immutable undirected graph without self-loops.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    offsets: Vec<usize>,
    neighbors: Vec<usize>,
    num_edges: usize,
}

impl Graph {
    /// Builds a graph from an arbitrary edge list.
    ///
    /// Self-loops are dropped, one-directional entries are symmetrized and
    /// duplicates are collapsed.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (k, &(u, v)) in edges.iter().enumerate() {
            for idx in [u, v] {
                if idx >= n {
                    return Err(Error::NodeOutOfRange {
                        context: format!("edge #{} ({}, {})", k + 1, u, v),
                        index: idx,
                        n,
                    });
                }
            }
            if u == v {
                continue;
            }
            adj[u].push(v);
            adj[v].push(u);
        }
        Ok(Self::from_adjacency(adj))
    }

    fn from_adjacency(mut adj: Vec<Vec<usize>>) -> Self {
        let mut offsets = Vec::with_capacity(adj.len() + 1);
        offsets.push(0);
        let mut neighbors = Vec::new();
        for list in adj.iter_mut() {
            list.sort_unstable();
            list.dedup();
            neighbors.extend_from_slice(list);
            offsets.push(neighbors.len());
        }
        let num_edges = neighbors.len() / 2;
        Self {
            offsets,
            neighbors,
            num_edges,
        }
    }

    /// Graph with `n` nodes and no edges.
    pub fn empty(n: usize) -> Self {
        Self {
            offsets: vec![0; n + 1],
            neighbors: Vec::new(),
            num_edges: 0,
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.offsets.len() - 1
    }

    /// Number of undirected edges.
    pub fn num_edges(&self) -> usize {
        self.num_edges
    }

    #[inline]
    pub fn neighbors(&self, node: usize) -> &[usize] {
        &self.neighbors[self.offsets[node]..self.offsets[node + 1]]
    }

    #[inline]
    pub fn degree(&self, node: usize) -> usize {
        self.offsets[node + 1] - self.offsets[node]
    }

    pub fn degrees(&self) -> Vec<usize> {
        (0..self.num_nodes()).map(|i| self.degree(i)).collect()
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.neighbors(u).binary_search(&v).is_ok()
    }

    /// Each undirected edge once, as `(u, v)` with `u < v`, in sorted order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.num_nodes()).flat_map(move |u| {
            self.neighbors(u)
                .iter()
                .copied()
                .filter(move |&v| v > u)
                .map(move |v| (u, v))
        })
    }

    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    pub fn neighbor_array(&self) -> &[usize] {
        &self.neighbors
    }

    /// Hop distances from `source` to every node within `ell` hops.
    pub fn bounded_bfs(&self, source: usize, ell: usize) -> BTreeMap<usize, usize> {
        let mut scratch = BfsScratch::new(self.num_nodes());
        let mut out = BTreeMap::new();
        scratch.run(self, source, ell, |node, dist| {
            out.insert(node, dist);
        });
        out
    }

    /// Row-stochastic adjacency `Â` with entries `1/deg(i)`.
    pub fn row_normalize<T: Scalar>(&self) -> NormalizedAdjacency<T> {
        let row_weight = (0..self.num_nodes())
            .map(|i| match self.degree(i) {
                0 => T::zero(),
                d => T::one() / T::from_usize(d).expect("degree fits scalar"),
            })
            .collect();
        NormalizedAdjacency {
            offsets: self.offsets.clone(),
            neighbors: self.neighbors.clone(),
            row_weight,
        }
    }

    /// Subgraph on the nodes where `keep` is true, renumbered contiguously.
    pub fn induced_subgraph(&self, keep: &[bool]) -> Result<(Graph, NodeRemap)> {
        let n = self.num_nodes();
        if keep.len() != n {
            return Err(Error::DimensionMismatch {
                what: "subgraph mask length".into(),
                expected: n,
                found: keep.len(),
            });
        }
        let remap = NodeRemap::from_mask(keep);
        if remap.is_empty() {
            return Err(Error::Config("induced subgraph of an empty node set".into()));
        }
        let adj = remap
            .to_old
            .iter()
            .map(|&old| self.neighbors(old).iter().filter_map(|&v| remap.to_new[v]).collect())
            .collect();
        Ok((Graph::from_adjacency(adj), remap))
    }
}

/// Bijection between kept original node ids and contiguous new ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodeRemap {
    to_new: Vec<Option<usize>>,
    to_old: Vec<usize>,
}

impl NodeRemap {
    pub fn from_mask(keep: &[bool]) -> Self {
        let mut to_new = vec![None; keep.len()];
        let mut to_old = Vec::new();
        for (old, &k) in keep.iter().enumerate() {
            if k {
                to_new[old] = Some(to_old.len());
                to_old.push(old);
            }
        }
        Self { to_new, to_old }
    }

    /// Number of kept nodes.
    pub fn len(&self) -> usize {
        self.to_old.len()
    }

    pub fn is_empty(&self) -> bool {
        self.to_old.is_empty()
    }

    pub fn new_id(&self, old: usize) -> Option<usize> {
        self.to_new.get(old).copied().flatten()
    }

    pub fn old_id(&self, new: usize) -> usize {
        self.to_old[new]
    }

    pub fn kept(&self) -> &[usize] {
        &self.to_old
    }
}

/// Reusable visit buffers for repeated bounded BFS on one graph.
pub struct BfsScratch {
    dist: Vec<usize>,
    touched: Vec<usize>,
    queue: VecDeque<usize>,
}

impl BfsScratch {
    pub fn new(n: usize) -> Self {
        Self {
            dist: vec![usize::MAX; n],
            touched: Vec::new(),
            queue: VecDeque::new(),
        }
    }

    /// Calls `visit(node, dist)` once for every node within `ell` hops of
    /// `source`, in nondecreasing distance order.
    pub fn run<F: FnMut(usize, usize)>(&mut self, g: &Graph, source: usize, ell: usize, mut visit: F) {
        debug_assert_eq!(self.dist.len(), g.num_nodes());
        self.dist[source] = 0;
        self.touched.push(source);
        self.queue.push_back(source);
        while let Some(u) = self.queue.pop_front() {
            let du = self.dist[u];
            visit(u, du);
            if du == ell {
                continue;
            }
            for &v in g.neighbors(u) {
                if self.dist[v] == usize::MAX {
                    self.dist[v] = du + 1;
                    self.touched.push(v);
                    self.queue.push_back(v);
                }
            }
        }
        for &t in &self.touched {
            self.dist[t] = usize::MAX;
        }
        self.touched.clear();
    }
}

/// `Â`: same sparsity as the graph, row `i` weighted by `1/deg(i)`.
/// Rows of isolated nodes are all-zero.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedAdjacency<T> {
    offsets: Vec<usize>,
    neighbors: Vec<usize>,
    row_weight: Vec<T>,
}

impl<T: Scalar> NormalizedAdjacency<T> {
    pub fn num_nodes(&self) -> usize {
        self.offsets.len() - 1
    }

    /// Nonzero entries `(j, Â_ij)` of row `i`.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, T)> + '_ {
        let w = self.row_weight[i];
        self.neighbors[self.offsets[i]..self.offsets[i + 1]]
            .iter()
            .map(move |&j| (j, w))
    }

    pub fn is_isolated(&self, i: usize) -> bool {
        self.offsets[i] == self.offsets[i + 1]
    }

    /// Sparse-dense product `Â·Y`; row `i` is the mean of neighbor rows.
    pub fn matmul(&self, y: ArrayView2<'_, T>) -> Array2<T> {
        let mut out = Array2::zeros(y.raw_dim());
        self.matmul_into(y, &mut out);
        out
    }

    /// Writes `Â·Y` into `out`, overwriting it.
    pub fn matmul_into(&self, y: ArrayView2<'_, T>, out: &mut Array2<T>) {
        assert_eq!(y.nrows(), self.num_nodes());
        assert_eq!(out.dim(), y.dim());
        for (i, mut out_row) in out.rows_mut().into_iter().enumerate() {
            out_row.fill(T::zero());
            let lo = self.offsets[i];
            let hi = self.offsets[i + 1];
            if lo == hi {
                continue;
            }
            for &j in &self.neighbors[lo..hi] {
                out_row.zip_mut_with(&y.row(j), |o, &v| *o += v);
            }
            let w = self.row_weight[i];
            out_row.mapv_inplace(|v| v * w);
        }
    }

    /// Dense copy, for tests and tiny graphs only.
    pub fn to_dense(&self) -> Array2<T> {
        let n = self.num_nodes();
        let mut dense = Array2::zeros((n, n));
        for i in 0..n {
            for (j, w) in self.row(i) {
                dense[[i, j]] = w;
            }
        }
        dense
    }
}
