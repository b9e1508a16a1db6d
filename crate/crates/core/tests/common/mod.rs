//! Independent reference computations shared by the integration tests.
//! Nothing here calls into the code paths it is used to check.

#![allow(dead_code)]

use cohop::{Graph, LabelSet, NodeRole};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Erdős–Rényi graph; also returns the raw edge list.
pub fn gnp(n: usize, p: f64, rng: &mut ChaCha8Rng) -> (Graph, Vec<(usize, usize)>) {
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            if rng.random::<f64>() < p {
                edges.push((u, v));
            }
        }
    }
    (Graph::from_edges(n, &edges).unwrap(), edges)
}

/// All-pairs hop distances from an edge list; `None` when unreachable.
pub fn floyd_warshall(n: usize, edges: &[(usize, usize)]) -> Vec<Vec<Option<usize>>> {
    let inf = usize::MAX / 4;
    let mut d = vec![vec![inf; n]; n];
    for (i, row) in d.iter_mut().enumerate() {
        row[i] = 0;
    }
    for &(u, v) in edges {
        if u != v {
            d[u][v] = 1;
            d[v][u] = 1;
        }
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                let via = d[i][k] + d[k][j];
                if via < d[i][j] {
                    d[i][j] = via;
                }
            }
        }
    }
    d.into_iter()
        .map(|row| row.into_iter().map(|x| (x < inf).then_some(x)).collect())
        .collect()
}

/// Random labels: `train` nodes chosen at random with random classes.
pub fn random_labels(n: usize, c: usize, train: usize, rng: &mut ChaCha8Rng) -> LabelSet {
    let classes: Vec<u16> = (0..n).map(|_| rng.random_range(0..c) as u16).collect();
    let mut roles = vec![NodeRole::Test; n];
    let mut picked = 0;
    while picked < train.min(n) {
        let i = rng.random_range(0..n);
        if roles[i] != NodeRole::Train {
            roles[i] = NodeRole::Train;
            picked += 1;
        }
    }
    LabelSet::new(c, classes, roles).unwrap()
}

/// Direct sum over train nodes within ell hops of alpha^d·y_j,
/// then divide by the row sum (zero rows stay zero).
pub fn histogram_oracle(dist: &[Vec<Option<usize>>], labels: &LabelSet, alpha: f64, ell: usize) -> Array2<f64> {
    let n = dist.len();
    let c = labels.num_classes();
    let mut h = Array2::zeros((n, c));
    for i in 0..n {
        for j in 0..n {
            if labels.role(j) != NodeRole::Train {
                continue;
            }
            if let Some(d) = dist[i][j] {
                if d <= ell {
                    h[[i, labels.class(j)]] += alpha.powi(d as i32);
                }
            }
        }
        let s: f64 = h.row(i).sum();
        if s > 0.0 {
            h.row_mut(i).mapv_inplace(|v| v / s);
        }
    }
    h
}

/// Dense row-stochastic adjacency from an edge list.
pub fn dense_normalized_adjacency(n: usize, edges: &[(usize, usize)]) -> Array2<f64> {
    let mut a = Array2::<f64>::zeros((n, n));
    for &(u, v) in edges {
        if u != v {
            a[[u, v]] = 1.0;
            a[[v, u]] = 1.0;
        }
    }
    for mut row in a.rows_mut() {
        let s = row.sum();
        if s > 0.0 {
            row.mapv_inplace(|v| v / s);
        }
    }
    a
}

/// sum_{k=1..ell} (alpha·A)^k Ỹ with explicit dense powers, then row-normalized.
pub fn approx_histogram_oracle(a: &Array2<f64>, labels: &LabelSet, alpha: f64, ell: usize) -> Array2<f64> {
    let n = a.nrows();
    let c = labels.num_classes();
    let mut y = Array2::<f64>::zeros((n, c));
    for i in 0..n {
        if labels.role(i) == NodeRole::Train {
            y[[i, labels.class(i)]] = 1.0;
        }
    }
    let scaled = a * alpha;
    let mut power = Array2::<f64>::eye(n);
    let mut h = Array2::<f64>::zeros((n, c));
    for _ in 0..ell {
        power = power.dot(&scaled);
        h = h + power.dot(&y);
    }
    for mut row in h.rows_mut() {
        let s = row.sum();
        if s > 0.0 {
            row.mapv_inplace(|v| v / s);
        }
    }
    h
}

pub fn max_abs(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    assert_eq!(a.dim(), b.dim());
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
