//! Neighborhood label histograms.
//!
//! For node `i`, the unnormalized histogram sums the one-hot labels of the
//! training nodes within `ell` hops, each weighted by `alpha^dist`. The
//! approximate variant replaces hop distances by `ell` rounds of spreading
//! labels through the row-stochastic adjacency, which costs `O(ell·|E|·C)`
//! instead of one BFS per training node. Rows are finally divided by their
//! sum; a row with no label mass stays all-zero.

use ndarray::{concatenate, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{BfsScratch, Graph};
use crate::labels::LabelSet;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HistogramMode {
    Exact,
    Approximate,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistogramConfig {
    pub alpha: f64,
    pub ell: usize,
    pub mode: HistogramMode,
}

impl HistogramConfig {
    pub fn exact() -> Self {
        Self {
            alpha: 0.3,
            ell: 10,
            mode: HistogramMode::Exact,
        }
    }

    pub fn approximate() -> Self {
        Self {
            alpha: 0.1,
            ell: 10,
            mode: HistogramMode::Approximate,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::Config(format!("alpha {} outside [0, 1]", self.alpha)));
        }
        if self.ell < 1 {
            return Err(Error::Config("ell must be at least 1".into()));
        }
        Ok(())
    }
}

impl Default for HistogramConfig {
    fn default() -> Self {
        Self::exact()
    }
}

/// Computes normalized histograms in the mode selected by `cfg`.
pub fn histograms<T: Scalar>(g: &Graph, labels: &LabelSet, cfg: &HistogramConfig) -> Result<Array2<T>> {
    cfg.validate()?;
    check_nodes(g, labels)?;
    let raw = match cfg.mode {
        HistogramMode::Exact => exact_unnormalized(g, labels, cfg),
        HistogramMode::Approximate => approx_unnormalized(g, labels, cfg),
    };
    Ok(normalize_rows(raw))
}

pub fn exact_histograms<T: Scalar>(g: &Graph, labels: &LabelSet, cfg: &HistogramConfig) -> Result<Array2<T>> {
    histograms(
        g,
        labels,
        &HistogramConfig {
            mode: HistogramMode::Exact,
            ..*cfg
        },
    )
}

pub fn approx_histograms<T: Scalar>(g: &Graph, labels: &LabelSet, cfg: &HistogramConfig) -> Result<Array2<T>> {
    histograms(
        g,
        labels,
        &HistogramConfig {
            mode: HistogramMode::Approximate,
            ..*cfg
        },
    )
}

fn check_nodes(g: &Graph, labels: &LabelSet) -> Result<()> {
    if g.num_nodes() != labels.num_nodes() {
        return Err(Error::DimensionMismatch {
            what: "label count vs graph nodes".into(),
            expected: g.num_nodes(),
            found: labels.num_nodes(),
        });
    }
    Ok(())
}

/// One bounded BFS per training node, scattering `alpha^d · y_j` onto every
/// node it reaches (the source itself included at distance 0).
pub fn exact_unnormalized<T: Scalar>(g: &Graph, labels: &LabelSet, cfg: &HistogramConfig) -> Array2<T> {
    let n = g.num_nodes();
    let alpha = T::lit(cfg.alpha);
    let powers: Vec<T> = (0..=cfg.ell.min(n)).map(|k| alpha.powi(k as i32)).collect();
    let mut h = Array2::zeros((n, labels.num_classes()));
    let mut scratch = BfsScratch::new(n);
    // train_nodes() is ascending, which fixes the accumulation order.
    for src in labels.train_nodes() {
        let class = labels.class(src);
        scratch.run(g, src, cfg.ell, |node, dist| {
            h[[node, class]] += powers[dist];
        });
    }
    h
}

/// `sum_{k=1..ell} (alpha·Â)^k Ỹ` via the recurrence `P <- alpha·Â(P + Ỹ)`.
pub fn approx_unnormalized<T: Scalar>(g: &Graph, labels: &LabelSet, cfg: &HistogramConfig) -> Array2<T> {
    let n = g.num_nodes();
    let c = labels.num_classes();
    let mut seeds = Array2::<T>::zeros((n, c));
    for i in labels.train_nodes() {
        seeds[[i, labels.class(i)]] = T::one();
    }
    let alpha = T::lit(cfg.alpha);
    let offsets = g.offsets();
    let nbrs = g.neighbor_array();
    let seeds = seeds.as_slice().expect("standard layout");
    let mut acc = vec![T::zero(); n * c];
    let mut next = vec![T::zero(); n * c];
    for _ in 0..cfg.ell {
        for (i, out) in next.chunks_exact_mut(c).enumerate() {
            out.fill(T::zero());
            let (lo, hi) = (offsets[i], offsets[i + 1]);
            if lo == hi {
                continue;
            }
            for &j in &nbrs[lo..hi] {
                let src = &acc[j * c..(j + 1) * c];
                let seed = &seeds[j * c..(j + 1) * c];
                for k in 0..c {
                    out[k] += src[k] + seed[k];
                }
            }
            let w = alpha / T::from_usize(hi - lo).expect("degree fits scalar");
            out.iter_mut().for_each(|v| *v *= w);
        }
        std::mem::swap(&mut acc, &mut next);
    }
    Array2::from_shape_vec((n, c), acc).expect("shape matches buffer")
}

/// Divides each row by its sum; rows summing to zero stay zero.
pub fn normalize_rows<T: Scalar>(mut h: Array2<T>) -> Array2<T> {
    for mut row in h.rows_mut() {
        let s: T = row.iter().copied().sum();
        if s > T::zero() {
            row.mapv_inplace(|v| v / s);
        }
    }
    h
}

/// Appends histogram columns to the feature matrix.
pub fn concat_features<T: Scalar>(x: ArrayView2<'_, T>, h: ArrayView2<'_, T>) -> Result<Array2<T>> {
    if x.nrows() != h.nrows() {
        return Err(Error::DimensionMismatch {
            what: "histogram rows vs feature rows".into(),
            expected: x.nrows(),
            found: h.nrows(),
        });
    }
    Ok(concatenate(Axis(1), &[x, h]).expect("row counts checked"))
}
