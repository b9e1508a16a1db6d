//! Iterative pseudo-label training.
//!
//! Each iteration trains the predictor for a fixed number of full-batch
//! epochs on the current training set (ground-truth nodes plus confident
//! pseudo-labeled nodes) and keeps the epoch with the best validation
//! accuracy. Predictions for every node are then smoothed with their
//! neighbors' mean and the next training set is rebuilt from scratch:
//! ground-truth nodes always, other eligible nodes only while their
//! smoothed confidence is strictly above `tau`.

use ndarray::{Array2, ArrayView2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::featurize::{concat_features, histograms, HistogramConfig};
use crate::graph::{Graph, NormalizedAdjacency};
use crate::labels::{LabelSet, NodeRole};
use crate::model::{Adam, Backbone, LossOptions, Model, Targets};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub iterations: usize,
    pub epochs: usize,
    pub gamma: f64,
    pub tau: f64,
    pub lambda: f64,
    pub seed: u64,
    pub backbone: Backbone,
    pub learning_rate: f64,
    pub histograms: HistogramConfig,
    pub use_consistency: bool,
    pub use_histograms: bool,
    pub use_iterations: bool,
    pub use_smoothing: bool,
    /// One-hot argmax targets for pseudo-labels instead of the smoothed row.
    pub hard_pseudo_labels: bool,
    pub detach_consistency_target: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            iterations: 5,
            epochs: 200,
            gamma: 0.02,
            tau: 0.7,
            lambda: 0.7,
            seed: 0,
            backbone: Backbone::Linear,
            learning_rate: 1e-2,
            histograms: HistogramConfig::exact(),
            use_consistency: true,
            use_histograms: true,
            use_iterations: true,
            use_smoothing: true,
            hard_pseudo_labels: false,
            detach_consistency_target: false,
        }
    }
}

impl TrainConfig {
    /// Plain supervised training of the backbone.
    pub fn base() -> Self {
        Self {
            use_consistency: false,
            use_histograms: false,
            use_iterations: false,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.iterations < 1 {
            return Err(Error::Config("at least one iteration is required".into()));
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return Err(Error::Config(format!("tau {} outside (0, 1]", self.tau)));
        }
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(Error::Config(format!("lambda {} outside [0, 1]", self.lambda)));
        }
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return Err(Error::Config(format!(
                "gamma {} must be finite and non-negative",
                self.gamma
            )));
        }
        if self.learning_rate.is_nan() || self.learning_rate <= 0.0 {
            return Err(Error::Config(format!("learning rate {}", self.learning_rate)));
        }
        if let Backbone::Mlp { hidden: 0 } = self.backbone {
            return Err(Error::Config("hidden width must be positive".into()));
        }
        if self.use_histograms {
            self.histograms.validate()?;
        }
        Ok(())
    }

    pub fn effective_iterations(&self) -> usize {
        if self.use_iterations {
            self.iterations
        } else {
            1
        }
    }

    pub fn effective_gamma(&self) -> f64 {
        if self.use_consistency {
            self.gamma
        } else {
            0.0
        }
    }

    pub fn effective_lambda(&self) -> f64 {
        if self.use_smoothing {
            self.lambda
        } else {
            1.0
        }
    }

    pub fn loss_options(&self) -> LossOptions {
        LossOptions {
            gamma: self.effective_gamma(),
            detach_target: self.detach_consistency_target,
        }
    }
}

/// One JSON line per iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationMetrics {
    pub iteration: usize,
    /// 1-based epoch restored at the end of the iteration; 0 when no epoch ran.
    pub epoch_best: usize,
    pub val_acc: f64,
    pub train_set_size: usize,
    pub loss_gt: f64,
    pub loss_consist: f64,
}

#[derive(Debug, Clone)]
pub struct TrainState<T> {
    pub model: Model<T>,
    pub optimizer: Adam<T>,
    /// Current training set with per-node target distributions.
    pub targets: Targets<T>,
    /// Smoothed predictions behind the current pseudo-labels.
    pub smoothed: Option<Array2<T>>,
    pub best_val_acc: f64,
    pub iteration: usize,
}

impl<T: Scalar> TrainState<T> {
    pub fn new(model: Model<T>, labels: &LabelSet, learning_rate: f64) -> Self {
        Self {
            model,
            optimizer: Adam::new(learning_rate),
            targets: ground_truth_targets(labels),
            smoothed: None,
            best_val_acc: 0.0,
            iteration: 0,
        }
    }
}

/// One-hot targets for the ground-truth training nodes.
pub fn ground_truth_targets<T: Scalar>(labels: &LabelSet) -> Targets<T> {
    let nodes = labels.train_nodes();
    let mut rows = Array2::zeros((nodes.len(), labels.num_classes()));
    for (r, &i) in nodes.iter().enumerate() {
        rows[[r, labels.class(i)]] = T::one();
    }
    Targets::new(nodes, rows).expect("row per node")
}

pub fn argmax<T: Scalar>(row: ndarray::ArrayView1<'_, T>) -> usize {
    let mut best = 0;
    for (k, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = k;
        }
    }
    best
}

/// Fraction of `nodes` whose predicted class matches `labels`.
pub fn accuracy<T: Scalar>(pred: ArrayView2<'_, T>, nodes: &[usize], labels: &LabelSet) -> f64 {
    if nodes.is_empty() {
        return 0.0;
    }
    let hits = nodes
        .iter()
        .filter(|&&i| argmax(pred.row(i)) == labels.class(i))
        .count();
    hits as f64 / nodes.len() as f64
}

/// Trains for `cfg.epochs` epochs from the current weights and restores the
/// epoch with the highest validation accuracy (earliest on ties).
pub fn train_one_iteration<T: Scalar>(
    state: &mut TrainState<T>,
    g: &Graph,
    features: ArrayView2<'_, T>,
    labels: &LabelSet,
    cfg: &TrainConfig,
) -> Result<IterationMetrics> {
    state.iteration += 1;
    let opts = cfg.loss_options();
    let val = labels.val_nodes();
    let val_x = features.select(Axis(0), &val);
    let val_labels: Vec<usize> = val.iter().map(|&i| labels.class(i)).collect();

    let mut best: Option<(usize, f64, Model<T>)> = None;
    for epoch in 1..=cfg.epochs {
        let (_, grads) = state.model.backward(features, g, &state.targets, &opts)?;
        state.optimizer.step(&mut state.model, &grads);
        let acc = if val.is_empty() {
            0.0
        } else {
            let p = state.model.forward(val_x.view())?;
            let hits = p
                .rows()
                .into_iter()
                .zip(&val_labels)
                .filter(|(row, &c)| argmax(row.view()) == c)
                .count();
            hits as f64 / val.len() as f64
        };
        // Without validation nodes the last epoch is kept.
        let improves = match &best {
            None => true,
            Some((_, best_acc, _)) => acc > *best_acc || val.is_empty(),
        };
        if improves {
            best = Some((epoch, acc, state.model.clone()));
        }
    }

    let (epoch_best, val_acc) = match best {
        Some((epoch, acc, model)) => {
            state.model = model;
            (epoch, acc)
        }
        None => {
            let acc = if val.is_empty() {
                0.0
            } else {
                accuracy(state.model.forward(features)?.view(), &val, labels)
            };
            (0, acc)
        }
    };
    state.best_val_acc = val_acc;
    let loss = state.model.loss(features, g, &state.targets, &opts)?;
    Ok(IterationMetrics {
        iteration: state.iteration,
        epoch_best,
        val_acc,
        train_set_size: state.targets.len(),
        loss_gt: loss.gt_term.to_f64_lossy(),
        loss_consist: loss.consistency_term.to_f64_lossy(),
    })
}

/// `Y* = lambda·Ŷ + (1 - lambda)·ÂŶ`.
///
/// An isolated node has no neighbor mean, so its row `lambda·Ŷ_i` is divided
/// by `lambda` to stay a distribution (or copied from `Ŷ_i` when `lambda = 0`).
pub fn smooth_predictions<T: Scalar>(
    pred: ArrayView2<'_, T>,
    a_hat: &NormalizedAdjacency<T>,
    lambda: f64,
) -> Array2<T> {
    let lam = T::lit(lambda);
    let rest = T::lit(1.0 - lambda);
    let mut out = a_hat.matmul(pred);
    out.zip_mut_with(&pred, |o, &p| *o = lam * p + rest * *o);
    for i in 0..pred.nrows() {
        if a_hat.is_isolated(i) {
            let mut row = out.row_mut(i);
            if lambda > 0.0 {
                row.mapv_inplace(|v| v / lam);
            } else {
                row.assign(&pred.row(i));
            }
        }
    }
    out
}

/// Ground-truth nodes with one-hot targets, plus every eligible node whose
/// smoothed maximum exceeds `tau`, targeted at its smoothed row (or its
/// argmax one-hot when `hard`). Sorted by node id.
pub fn select_pseudo_labels<T: Scalar>(
    y_star: ArrayView2<'_, T>,
    labels: &LabelSet,
    tau: f64,
    eligible: &[bool],
    hard: bool,
) -> Targets<T> {
    assert_eq!(eligible.len(), labels.num_nodes(), "eligibility mask per node");
    let tau = T::lit(tau);
    let c = labels.num_classes();
    let mut nodes = Vec::new();
    let mut flat = Vec::new();
    for (i, &ok) in eligible.iter().enumerate() {
        if labels.is_train(i) {
            nodes.push(i);
            flat.extend(labels.one_hot::<T>(i));
            continue;
        }
        if !ok {
            continue;
        }
        let row = y_star.row(i);
        let top = argmax(row);
        if row[top] > tau {
            nodes.push(i);
            if hard {
                flat.extend((0..c).map(|k| if k == top { T::one() } else { T::zero() }));
            } else {
                flat.extend(row.iter().copied());
            }
        }
    }
    let rows = Array2::from_shape_vec((nodes.len(), c), flat).expect("row per node");
    Targets::new(nodes, rows).expect("row per node")
}

/// Nodes allowed to receive pseudo-labels: visible test nodes.
pub fn pseudo_label_eligible(labels: &LabelSet) -> Vec<bool> {
    labels.roles().iter().map(|&r| r == NodeRole::Test).collect()
}

#[derive(Debug, Clone)]
pub struct TrainOutcome<T> {
    pub model: Model<T>,
    pub metrics: Vec<IterationMetrics>,
    /// Training features after histogram augmentation.
    pub features: Array2<T>,
    /// Training set of every iteration, in order.
    pub target_history: Vec<Targets<T>>,
}

/// Builds the (optionally histogram-augmented) features used for training.
pub fn training_features<T: Scalar>(
    g: &Graph,
    x: ArrayView2<'_, T>,
    labels: &LabelSet,
    cfg: &TrainConfig,
) -> Result<Array2<T>> {
    if cfg.use_histograms {
        let h = histograms::<T>(g, labels, &cfg.histograms)?;
        concat_features(x, h.view())
    } else {
        Ok(x.to_owned())
    }
}

/// The full loop: featurize, then alternate training and pseudo-labeling.
pub fn run<T: Scalar>(
    g: &Graph,
    x: ArrayView2<'_, T>,
    labels: &LabelSet,
    cfg: &TrainConfig,
) -> Result<TrainOutcome<T>> {
    let features = training_features(g, x, labels, cfg)?;
    run_on_features(g, features, labels, cfg)
}

/// Same as [`run`] with features already prepared.
pub fn run_on_features<T: Scalar>(
    g: &Graph,
    features: Array2<T>,
    labels: &LabelSet,
    cfg: &TrainConfig,
) -> Result<TrainOutcome<T>> {
    cfg.validate()?;
    let n = g.num_nodes();
    for (what, found) in [("feature rows", features.nrows()), ("labels", labels.num_nodes())] {
        if found != n {
            return Err(Error::DimensionMismatch {
                what: what.into(),
                expected: n,
                found,
            });
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let model = Model::new(cfg.backbone, features.ncols(), labels.num_classes(), &mut rng);
    let mut state = TrainState::new(model, labels, cfg.learning_rate);
    let a_hat = g.row_normalize::<T>();
    let eligible = pseudo_label_eligible(labels);
    let iterations = cfg.effective_iterations();
    let mut metrics = Vec::with_capacity(iterations);
    let mut target_history = Vec::with_capacity(iterations);
    for t in 1..=iterations {
        target_history.push(state.targets.clone());
        let m = train_one_iteration(&mut state, g, features.view(), labels, cfg)?;
        log::debug!("{}", serde_json::to_string(&m).unwrap_or_default());
        metrics.push(m);
        if t < iterations {
            let pred = state.model.forward(features.view())?;
            let y_star = smooth_predictions(pred.view(), &a_hat, cfg.effective_lambda());
            state.targets = select_pseudo_labels(y_star.view(), labels, cfg.tau, &eligible, cfg.hard_pseudo_labels);
            state.smoothed = Some(y_star);
        }
    }
    Ok(TrainOutcome {
        model: state.model,
        metrics,
        features,
        target_history,
    })
}
