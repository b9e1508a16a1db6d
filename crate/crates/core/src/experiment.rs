//! Multi-seed experiment harness: split construction, training, test-time
//! evaluation, the component ablation lattice and the histogram benchmark.
//!
//! Evaluation is a single forward pass over the test rows. No neighbor is
//! consulted and no smoothing is applied at test time.

use std::time::Instant;

use ndarray::{Array2, ArrayView2, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{make_inductive_split, make_transductive_split, Dataset, SplitMode, SplitSpec};
use crate::error::{Error, Result};
use crate::featurize::{histograms, HistogramConfig, HistogramMode};
use crate::graph::{Graph, NodeRemap};
use crate::labels::{LabelSet, NodeRole};
use crate::model::{Model, Predictor};
use crate::scalar::Scalar;
use crate::trainer::{argmax, run_on_features, training_features, IterationMetrics, TrainConfig};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    F32,
    F64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub mode: SplitMode,
    pub seeds: usize,
    pub seed_base: u64,
    pub per_class_train: usize,
    pub per_class_val: usize,
    pub unseen_fraction: f64,
    pub precision: Precision,
    pub train: TrainConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            mode: SplitMode::Transductive,
            seeds: 10,
            seed_base: 0,
            per_class_train: 20,
            per_class_val: 30,
            unseen_fraction: 0.2,
            precision: Precision::F32,
            train: TrainConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.seeds == 0 {
            return Err(Error::Config("at least one seed is required".into()));
        }
        if self.mode == SplitMode::Inductive && !(self.unseen_fraction > 0.0 && self.unseen_fraction < 1.0) {
            return Err(Error::Config(format!(
                "unseen fraction {} outside (0, 1)",
                self.unseen_fraction
            )));
        }
        self.train.validate()
    }

    pub fn seed_list(&self) -> Vec<u64> {
        (0..self.seeds as u64).map(|k| self.seed_base + k).collect()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PhaseTimings {
    pub histograms_s: f64,
    pub training_s: f64,
    pub inference_s: f64,
}

/// Test-time accuracies for one trained model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub test_acc: f64,
    pub val_acc: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub seen_acc: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub unseen_acc: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub prod: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedReport {
    pub seed: u64,
    #[serde(flatten)]
    pub eval: Evaluation,
    pub timings: PhaseTimings,
    pub iterations: Vec<IterationMetrics>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub config: ExperimentConfig,
    pub accuracies: Vec<f64>,
    pub mean: f64,
    pub std: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub seen_mean: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub unseen_mean: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub prod_mean: Option<f64>,
    pub per_seed: Vec<SeedReport>,
}

impl RunReport {
    pub fn from_seeds(config: ExperimentConfig, per_seed: Vec<SeedReport>) -> Self {
        let accuracies: Vec<f64> = per_seed.iter().map(|s| s.eval.test_acc).collect();
        let (mean, std) = mean_std(&accuracies);
        let collect = |f: fn(&Evaluation) -> Option<f64>| -> Option<f64> {
            let v: Option<Vec<f64>> = per_seed.iter().map(|s| f(&s.eval)).collect();
            v.map(|v| mean_std(&v).0)
        };
        let seen_mean = collect(|e| e.seen_acc);
        let unseen_mean = collect(|e| e.unseen_acc);
        let prod_mean = collect(|e| e.prod);
        Self {
            schema_version: REPORT_SCHEMA_VERSION,
            config,
            accuracies,
            mean,
            std,
            seen_mean,
            unseen_mean,
            prod_mean,
            per_seed,
        }
    }

    /// Same report with every wall-clock field zeroed.
    pub fn without_timings(&self) -> Self {
        let mut out = self.clone();
        for s in &mut out.per_seed {
            s.timings = PhaseTimings::default();
        }
        out
    }

    pub fn csv_header() -> &'static str {
        "mode,seeds,mean,std,seen_mean,unseen_mean,prod_mean"
    }

    pub fn csv_row(&self) -> String {
        let opt = |v: Option<f64>| v.map(|v| format!("{v:.6}")).unwrap_or_default();
        let mode = match self.config.mode {
            SplitMode::Transductive => "transductive",
            SplitMode::Inductive => "inductive",
        };
        format!(
            "{},{},{:.6},{:.6},{},{},{}",
            mode,
            self.accuracies.len(),
            self.mean,
            self.std,
            opt(self.seen_mean),
            opt(self.unseen_mean),
            opt(self.prod_mean)
        )
    }
}

/// Mean and population standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// `(1 - f)·seen + f·unseen`; with the default `f = 0.2` this is
/// `0.8·seen + 0.2·unseen`.
pub fn prod_metric(seen: f64, unseen: f64, unseen_fraction: f64) -> f64 {
    (1.0 - unseen_fraction) * seen + unseen_fraction * unseen
}

/// The split used for one seed: the dataset's own split if it has one,
/// otherwise a fresh per-class sample.
pub fn split_for_seed(ds: &Dataset, cfg: &ExperimentConfig, seed: u64) -> Result<SplitSpec> {
    let base = match &ds.split {
        Some(s) => s.clone(),
        None => make_transductive_split(ds, cfg.per_class_train, cfg.per_class_val, seed)?,
    };
    match (cfg.mode, base.mode) {
        (SplitMode::Transductive, SplitMode::Transductive) => Ok(base),
        (SplitMode::Transductive, SplitMode::Inductive) => Ok(SplitSpec {
            mode: SplitMode::Transductive,
            unseen: Vec::new(),
            unseen_fraction: None,
            ..base
        }),
        (SplitMode::Inductive, SplitMode::Inductive) => Ok(base),
        (SplitMode::Inductive, SplitMode::Transductive) => {
            make_inductive_split(&base, cfg.unseen_fraction, seed.wrapping_add(0x5eed))
        }
    }
}

/// Everything needed to train on one split and to evaluate afterwards.
#[derive(Debug, Clone)]
pub struct PreparedRun<T> {
    pub split: SplitSpec,
    /// Training graph (the induced subgraph in inductive mode).
    pub graph: Graph,
    /// Maps original node ids to training-graph ids.
    pub remap: NodeRemap,
    /// Labels on training-graph ids.
    pub labels: LabelSet,
    /// Training features on training-graph ids, histogram columns included.
    pub features: Array2<T>,
    /// Test nodes (original ids), seen ones first, then unseen.
    pub test_nodes: Vec<usize>,
    /// Feature rows for `test_nodes`, in the same order.
    pub test_features: Array2<T>,
    pub num_seen: usize,
    pub histogram_seconds: f64,
}

impl<T: Scalar> PreparedRun<T> {
    pub fn new(ds: &Dataset, split: SplitSpec, train: &TrainConfig) -> Result<Self> {
        split.validate(ds.num_nodes())?;
        let x = ds.features_as::<T>();
        let (graph, remap) = split.training_graph(&ds.graph)?;
        let full_labels = ds.label_set(&split)?;
        let kept = remap.kept().to_vec();
        let labels = LabelSet::new(
            ds.num_classes,
            kept.iter().map(|&i| ds.classes[i]).collect(),
            kept.iter().map(|&i| full_labels.role(i)).collect(),
        )?;
        let x_train = x.select(Axis(0), &kept);

        let start = Instant::now();
        let features = training_features(&graph, x_train.view(), &labels, train)?;
        let mut histogram_seconds = start.elapsed().as_secs_f64();

        let seen = split.seen();
        let seen_rows: Vec<usize> = seen
            .iter()
            .map(|&i| remap.new_id(i).expect("seen nodes are in the training graph"))
            .collect();
        let mut test_features = features.select(Axis(0), &seen_rows);
        if !split.unseen.is_empty() {
            // Unseen nodes get histograms from the full graph, still using
            // ground-truth training labels only.
            let start = Instant::now();
            let full = training_features(&ds.graph, x.view(), &full_labels, train)?;
            histogram_seconds += start.elapsed().as_secs_f64();
            let unseen_rows = full.select(Axis(0), &split.unseen);
            test_features =
                ndarray::concatenate(Axis(0), &[test_features.view(), unseen_rows.view()]).expect("matching widths");
        }
        let num_seen = seen.len();
        let mut test_nodes = seen;
        test_nodes.extend_from_slice(&split.unseen);
        Ok(Self {
            split,
            graph,
            remap,
            labels,
            features,
            test_nodes,
            test_features,
            num_seen,
            histogram_seconds,
        })
    }

    /// One forward pass over the test rows, plus validation accuracy.
    pub fn evaluate<P: Predictor<T> + ?Sized>(&self, model: &P, ds: &Dataset) -> Result<Evaluation> {
        if model.input_dim() != self.features.ncols() {
            return Err(Error::DimensionMismatch {
                what: "model input width vs dataset feature width".into(),
                expected: self.features.ncols(),
                found: model.input_dim(),
            });
        }
        let pred = model.predict(self.test_features.view())?;
        let hit = |row: usize| argmax(pred.row(row)) == ds.classes[self.test_nodes[row]] as usize;
        let frac = |range: std::ops::Range<usize>| {
            let len = range.len();
            if len == 0 {
                return 0.0;
            }
            range.filter(|&r| hit(r)).count() as f64 / len as f64
        };
        let total = self.test_nodes.len();
        let test_acc = frac(0..total);
        let val_acc = self.validation_accuracy(model)?;
        if self.split.mode == SplitMode::Inductive {
            let seen_acc = frac(0..self.num_seen);
            let unseen_acc = frac(self.num_seen..total);
            let fraction = self.split.unseen_fraction.unwrap_or(0.2);
            Ok(Evaluation {
                test_acc,
                val_acc,
                seen_acc: Some(seen_acc),
                unseen_acc: Some(unseen_acc),
                prod: Some(prod_metric(seen_acc, unseen_acc, fraction)),
            })
        } else {
            Ok(Evaluation {
                test_acc,
                val_acc,
                seen_acc: None,
                unseen_acc: None,
                prod: None,
            })
        }
    }

    pub fn validation_accuracy<P: Predictor<T> + ?Sized>(&self, model: &P) -> Result<f64> {
        let val = self.labels.nodes_with(NodeRole::Val);
        if val.is_empty() {
            return Ok(0.0);
        }
        let pred = model.predict(self.features.select(Axis(0), &val).view())?;
        let hits = val
            .iter()
            .enumerate()
            .filter(|&(r, &i)| argmax(pred.row(r)) == self.labels.class(i))
            .count();
        Ok(hits as f64 / val.len() as f64)
    }
}

/// Trains and evaluates one seed.
pub fn run_seed<T: Scalar>(ds: &Dataset, cfg: &ExperimentConfig, seed: u64) -> Result<(SeedReport, Model<T>)> {
    let split = split_for_seed(ds, cfg, seed)?;
    let train = TrainConfig {
        seed,
        ..cfg.train.clone()
    };
    let prepared = PreparedRun::<T>::new(ds, split, &train)?;

    let start = Instant::now();
    let outcome = run_on_features(&prepared.graph, prepared.features.clone(), &prepared.labels, &train)?;
    let training_s = start.elapsed().as_secs_f64();

    let start = Instant::now();
    let eval = prepared.evaluate(&outcome.model, ds)?;
    let inference_s = start.elapsed().as_secs_f64();

    let report = SeedReport {
        seed,
        eval,
        timings: PhaseTimings {
            histograms_s: prepared.histogram_seconds,
            training_s,
            inference_s,
        },
        iterations: outcome.metrics,
    };
    Ok((report, outcome.model))
}

/// Runs every seed (in parallel) and merges the reports in seed order.
pub fn run_experiment<T: Scalar>(ds: &Dataset, cfg: &ExperimentConfig) -> Result<(RunReport, Vec<Model<T>>)> {
    cfg.validate()?;
    let results: Vec<(SeedReport, Model<T>)> = cfg
        .seed_list()
        .into_par_iter()
        .map(|seed| run_seed::<T>(ds, cfg, seed))
        .collect::<Result<_>>()?;
    let (reports, models) = results.into_iter().unzip();
    Ok((RunReport::from_seeds(cfg.clone(), reports), models))
}

/// Evaluates a stored model on the split that `seed` selects.
pub fn evaluate_checkpoint<T: Scalar>(
    model: &Model<T>,
    ds: &Dataset,
    cfg: &ExperimentConfig,
    seed: u64,
) -> Result<Evaluation> {
    let split = split_for_seed(ds, cfg, seed)?;
    let prepared = PreparedRun::<T>::new(ds, split, &cfg.train)?;
    prepared.evaluate(model, ds)
}

/// Which components a cell of the ablation lattice enables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AblationCell {
    pub consistency: bool,
    pub histograms: bool,
    pub iterations: bool,
}

impl AblationCell {
    pub const FULL: Self = Self {
        consistency: true,
        histograms: true,
        iterations: true,
    };
    pub const BASE: Self = Self {
        consistency: false,
        histograms: false,
        iterations: false,
    };

    /// All eight subsets, full method first and base last.
    pub fn lattice() -> Vec<Self> {
        let mut cells: Vec<Self> = (0..8u8)
            .rev()
            .map(|b| Self {
                consistency: b & 4 != 0,
                histograms: b & 2 != 0,
                iterations: b & 1 != 0,
            })
            .collect();
        cells.sort_by_key(|c| std::cmp::Reverse(c.enabled_count()));
        cells
    }

    pub fn enabled_count(&self) -> usize {
        [self.consistency, self.histograms, self.iterations]
            .iter()
            .filter(|&&b| b)
            .count()
    }

    pub fn name(&self) -> String {
        match self.enabled_count() {
            0 => "base".into(),
            3 => "full".into(),
            _ => {
                let mut parts = Vec::new();
                if self.consistency {
                    parts.push("consistency");
                }
                if self.histograms {
                    parts.push("histograms");
                }
                if self.iterations {
                    parts.push("iterations");
                }
                parts.join("+")
            }
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        Self::lattice().into_iter().find(|c| c.name() == name)
    }

    /// `base` with the cell's components switched on.
    pub fn apply(&self, base: &TrainConfig) -> TrainConfig {
        TrainConfig {
            use_consistency: self.consistency,
            use_histograms: self.histograms,
            use_iterations: self.iterations,
            ..base.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub cell: String,
    pub components: AblationCell,
    pub mean: f64,
    pub std: f64,
    pub accuracies: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub schema_version: u32,
    pub config: ExperimentConfig,
    pub rows: Vec<AblationRow>,
}

impl AblationReport {
    pub fn row(&self, cell: AblationCell) -> Option<&AblationRow> {
        self.rows.iter().find(|r| r.components == cell)
    }

    pub fn table(&self) -> String {
        let width = self.rows.iter().map(|r| r.cell.len()).max().unwrap_or(4).max(4);
        let mut out = format!("{:<width$}  {:>8}  {:>8}\n", "cell", "mean", "std");
        for r in &self.rows {
            out.push_str(&format!(
                "{:<width$}  {:>8.2}  {:>8.2}\n",
                r.cell,
                100.0 * r.mean,
                100.0 * r.std
            ));
        }
        out
    }
}

pub fn run_ablation<T: Scalar>(ds: &Dataset, cfg: &ExperimentConfig, cells: &[AblationCell]) -> Result<AblationReport> {
    let rows = cells
        .iter()
        .map(|cell| {
            let cell_cfg = ExperimentConfig {
                train: cell.apply(&cfg.train),
                ..cfg.clone()
            };
            let (report, _) = run_experiment::<T>(ds, &cell_cfg)?;
            Ok(AblationRow {
                cell: cell.name(),
                components: *cell,
                mean: report.mean,
                std: report.std,
                accuracies: report.accuracies,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(AblationReport {
        schema_version: REPORT_SCHEMA_VERSION,
        config: cfg.clone(),
        rows,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub ell: usize,
    /// Median wall-clock seconds over the trials.
    pub exact_s: f64,
    pub approx_s: f64,
    pub exact_acc: f64,
    pub approx_acc: f64,
    /// Largest entry-wise difference between the two normalized matrices.
    pub max_abs_diff: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub schema_version: u32,
    pub trials: usize,
    pub alpha_exact: f64,
    pub alpha_approx: f64,
    pub rows: Vec<BenchRow>,
}

impl BenchReport {
    pub fn row(&self, ell: usize) -> Option<&BenchRow> {
        self.rows.iter().find(|r| r.ell == ell)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchOptions {
    pub ells: Vec<usize>,
    pub trials: usize,
    pub alpha_exact: f64,
    pub alpha_approx: f64,
    /// Skip training; only time featurization.
    pub timing_only: bool,
}

impl Default for BenchOptions {
    fn default() -> Self {
        Self {
            ells: vec![1, 2, 4, 6, 8, 10],
            trials: 5,
            alpha_exact: HistogramConfig::exact().alpha,
            alpha_approx: HistogramConfig::approximate().alpha,
            timing_only: false,
        }
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

/// Times exact and approximate featurization for each `ell` on the training
/// graph of the first seed, and measures downstream accuracy of each.
/// Dataset loading is outside the timed region.
pub fn bench_histograms<T: Scalar>(ds: &Dataset, cfg: &ExperimentConfig, opts: &BenchOptions) -> Result<BenchReport> {
    cfg.validate()?;
    if opts.trials == 0 || opts.ells.is_empty() {
        return Err(Error::Config("benchmark needs at least one trial and one ell".into()));
    }
    let split = split_for_seed(ds, cfg, cfg.seed_base)?;
    let labels = ds.label_set(&split)?;
    let (graph, remap) = split.training_graph(&ds.graph)?;
    let kept = remap.kept();
    let train_labels = LabelSet::new(
        ds.num_classes,
        kept.iter().map(|&i| ds.classes[i]).collect(),
        kept.iter().map(|&i| labels.role(i)).collect(),
    )?;

    let mut rows = Vec::with_capacity(opts.ells.len());
    for &ell in &opts.ells {
        let exact_cfg = HistogramConfig {
            alpha: opts.alpha_exact,
            ell,
            mode: HistogramMode::Exact,
        };
        let approx_cfg = HistogramConfig {
            alpha: opts.alpha_approx,
            ell,
            mode: HistogramMode::Approximate,
        };
        let (exact_s, exact_h) = time_histograms::<T>(&graph, &train_labels, &exact_cfg, opts.trials)?;
        let (approx_s, approx_h) = time_histograms::<T>(&graph, &train_labels, &approx_cfg, opts.trials)?;
        let max_abs_diff = max_abs_diff(exact_h.view(), approx_h.view());
        let (exact_acc, approx_acc) = if opts.timing_only {
            (f64::NAN, f64::NAN)
        } else {
            let acc = |h: HistogramConfig| -> Result<f64> {
                let c = ExperimentConfig {
                    train: TrainConfig {
                        use_histograms: true,
                        histograms: h,
                        ..cfg.train.clone()
                    },
                    ..cfg.clone()
                };
                Ok(run_experiment::<T>(ds, &c)?.0.mean)
            };
            (acc(exact_cfg)?, acc(approx_cfg)?)
        };
        rows.push(BenchRow {
            ell,
            exact_s,
            approx_s,
            exact_acc,
            approx_acc,
            max_abs_diff,
        });
    }
    Ok(BenchReport {
        schema_version: REPORT_SCHEMA_VERSION,
        trials: opts.trials,
        alpha_exact: opts.alpha_exact,
        alpha_approx: opts.alpha_approx,
        rows,
    })
}

fn time_histograms<T: Scalar>(
    g: &Graph,
    labels: &LabelSet,
    cfg: &HistogramConfig,
    trials: usize,
) -> Result<(f64, Array2<T>)> {
    let mut times = Vec::with_capacity(trials);
    let mut last = None;
    for _ in 0..trials {
        let start = Instant::now();
        let h = histograms::<T>(g, labels, cfg)?;
        times.push(start.elapsed().as_secs_f64());
        last = Some(h);
    }
    Ok((median(times), last.expect("at least one trial")))
}

pub fn max_abs_diff<T: Scalar>(a: ArrayView2<'_, T>, b: ArrayView2<'_, T>) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (*x - *y).abs().to_f64_lossy())
        .fold(0.0, f64::max)
}
