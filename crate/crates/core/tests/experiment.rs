mod common;

use std::cell::RefCell;
use std::time::Instant;

use cohop::checkpoint::{load_model, save_model};
use cohop::data::generate_sbm;
use cohop::experiment::{
    bench_histograms, evaluate_checkpoint, mean_std, run_ablation, run_experiment, run_seed, split_for_seed,
    AblationCell, BenchOptions, ExperimentConfig, PreparedRun, RunReport,
};
use cohop::featurize::{approx_histograms, exact_histograms};
use cohop::model::{Layer, Predictor};
use cohop::{
    Dataset, Error, Graph, HistogramConfig, HistogramMode, LabelSet, Model, NodeRole, SbmConfig, SplitMode, TrainConfig,
};
use ndarray::{Array1, Array2, ArrayView2};

fn sbm(nodes: usize, seed: u64) -> Dataset {
    generate_sbm(&SbmConfig {
        nodes,
        seed,
        ..SbmConfig::default()
    })
    .unwrap()
}

fn quick(mode: SplitMode, seeds: usize) -> ExperimentConfig {
    ExperimentConfig {
        mode,
        seeds,
        per_class_train: 5,
        per_class_val: 10,
        train: TrainConfig {
            epochs: 30,
            iterations: 3,
            ..TrainConfig::default()
        },
        ..ExperimentConfig::default()
    }
}

/// Records every matrix handed to the wrapped model.
struct Recording<'a> {
    inner: &'a Model<f32>,
    calls: RefCell<Vec<Array2<f32>>>,
}

impl Predictor<f32> for Recording<'_> {
    fn input_dim(&self) -> usize {
        self.inner.input_dim()
    }

    fn predict(&self, x: ArrayView2<'_, f32>) -> cohop::Result<Array2<f32>> {
        self.calls.borrow_mut().push(x.to_owned());
        self.inner.forward(x)
    }
}

#[test]
fn test_rows_see_exactly_one_forward_pass() {
    let ds = sbm(300, 1);
    for mode in [SplitMode::Transductive, SplitMode::Inductive] {
        let cfg = quick(mode, 1);
        let (_, model) = run_seed::<f32>(&ds, &cfg, 0).unwrap();
        let split = split_for_seed(&ds, &cfg, 0).unwrap();
        let prepared = PreparedRun::<f32>::new(&ds, split, &cfg.train).unwrap();
        let rec = Recording {
            inner: &model,
            calls: RefCell::new(Vec::new()),
        };
        prepared.evaluate(&rec, &ds).unwrap();
        let calls = rec.calls.into_inner();
        let test_calls = calls.iter().filter(|c| **c == prepared.test_features).count();
        assert_eq!(test_calls, 1, "{mode:?}");
        assert_eq!(calls.len(), 2, "{mode:?}: one test pass and one validation pass");
        let val = prepared.labels.nodes_with(NodeRole::Val).len();
        assert!(calls.iter().any(|c| c.nrows() == val));
    }
}

#[test]
fn constant_model_scores_the_class_fraction() {
    let ds = sbm(200, 2);
    let cfg = quick(SplitMode::Transductive, 1);
    let split = split_for_seed(&ds, &cfg, 0).unwrap();
    let prepared = PreparedRun::<f32>::new(&ds, split.clone(), &cfg.train).unwrap();
    let width = prepared.features.ncols();
    for class in 0..ds.num_classes {
        let mut bias = Array1::zeros(ds.num_classes);
        bias[class] = 5.0;
        let model = Model::from_layers(vec![Layer {
            weight: Array2::zeros((width, ds.num_classes)),
            bias,
        }])
        .unwrap();
        let eval = prepared.evaluate(&model, &ds).unwrap();
        let want =
            split.test.iter().filter(|&&i| ds.classes[i] as usize == class).count() as f64 / split.test.len() as f64;
        assert_eq!(eval.test_acc, want);
    }
}

#[test]
fn stored_checkpoint_reproduces_logged_validation_accuracy() {
    let ds = sbm(300, 3);
    let cfg = quick(SplitMode::Transductive, 1);
    let (report, model) = run_seed::<f32>(&ds, &cfg, 4).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.bin");
    save_model(&model, &path).unwrap();
    let loaded: Model<f32> = load_model(&path).unwrap();
    assert_eq!(loaded, model);
    let eval = evaluate_checkpoint(&loaded, &ds, &cfg, 4).unwrap();
    assert_eq!(eval.val_acc, report.iterations.last().unwrap().val_acc);
    assert_eq!(eval.test_acc, report.eval.test_acc);
}

#[test]
fn width_mismatch_names_both_widths() {
    let ds = sbm(100, 4);
    let cfg = quick(SplitMode::Transductive, 1);
    let model = Model::<f32>::zeros(&[3, ds.num_classes]);
    let err = evaluate_checkpoint(&model, &ds, &cfg, 0).unwrap_err();
    let width = ds.feature_dim() + ds.num_classes;
    match &err {
        Error::DimensionMismatch { expected, found, .. } => {
            assert_eq!((*expected, *found), (width, 3));
        }
        other => panic!("unexpected error {other}"),
    }
    let text = err.to_string();
    assert!(text.contains(&width.to_string()) && text.contains('3'), "{text}");
}

#[test]
fn reports_are_deterministic_and_round_trip() {
    let ds = sbm(200, 5);
    let cfg = quick(SplitMode::Inductive, 4);
    let (a, _) = run_experiment::<f32>(&ds, &cfg).unwrap();
    let (b, _) = run_experiment::<f32>(&ds, &cfg).unwrap();
    let ja = serde_json::to_string(&a.without_timings()).unwrap();
    let jb = serde_json::to_string(&b.without_timings()).unwrap();
    assert_eq!(ja, jb);

    assert_eq!(a.accuracies.len(), 4);
    assert_eq!(a.per_seed.iter().map(|s| s.seed).collect::<Vec<_>>(), cfg.seed_list());
    let (mean, std) = mean_std(&a.accuracies);
    assert_eq!((a.mean, a.std), (mean, std));
    for s in &a.per_seed {
        let prod = 0.8 * s.eval.seen_acc.unwrap() + 0.2 * s.eval.unseen_acc.unwrap();
        assert!((s.eval.prod.unwrap() - prod).abs() <= 1e-9);
    }

    let back: RunReport = serde_json::from_str(&serde_json::to_string(&a).unwrap()).unwrap();
    assert_eq!(back, a);
    assert_eq!(back.config, cfg);
}

#[test]
fn ten_seeds_give_ten_accuracies() {
    let ds = sbm(120, 6);
    let mut cfg = quick(SplitMode::Transductive, 10);
    cfg.train.epochs = 5;
    let (report, models) = run_experiment::<f32>(&ds, &cfg).unwrap();
    assert_eq!(report.accuracies.len(), 10);
    assert_eq!(models.len(), 10);
}

#[test]
fn ablation_cells_are_order_independent() {
    let ds = sbm(200, 7);
    let mut cfg = quick(SplitMode::Transductive, 2);
    cfg.train.epochs = 15;
    let cells = AblationCell::lattice();
    let forward = run_ablation::<f32>(&ds, &cfg, &cells).unwrap();
    let reversed: Vec<_> = cells.iter().rev().copied().collect();
    let backward = run_ablation::<f32>(&ds, &cfg, &reversed).unwrap();
    assert_eq!(forward.rows.len(), 8);
    for cell in &cells {
        assert_eq!(forward.row(*cell), backward.row(*cell));
    }
    let table = forward.table();
    assert_eq!(table.lines().count(), 9);

    let base_cfg = ExperimentConfig {
        train: TrainConfig {
            epochs: cfg.train.epochs,
            iterations: cfg.train.iterations,
            ..TrainConfig::base()
        },
        ..cfg.clone()
    };
    let (base, _) = run_experiment::<f32>(&ds, &base_cfg).unwrap();
    assert_eq!(forward.row(AblationCell::BASE).unwrap().accuracies, base.accuracies);
}

fn cycle_labels(n: usize, c: usize, stride: usize) -> (Graph, LabelSet) {
    let edges: Vec<(usize, usize)> = (0..n).map(|i| (i, (i + 1) % n)).collect();
    let g = Graph::from_edges(n, &edges).unwrap();
    let classes = (0..n).map(|i| ((i / 7) % c) as u16).collect();
    let roles = (0..n)
        .map(|i| {
            if i % stride == 0 {
                NodeRole::Train
            } else {
                NodeRole::Test
            }
        })
        .collect();
    (g, LabelSet::new(c, classes, roles).unwrap())
}

#[test]
fn exact_and_approximate_differ_on_a_cycle() {
    let (g, labels) = cycle_labels(12, 2, 3);
    let exact: Array2<f64> = exact_histograms(
        &g,
        &labels,
        &HistogramConfig {
            alpha: 0.5,
            ell: 4,
            mode: HistogramMode::Exact,
        },
    )
    .unwrap();
    let approx: Array2<f64> = approx_histograms(
        &g,
        &labels,
        &HistogramConfig {
            alpha: 0.5,
            ell: 4,
            mode: HistogramMode::Approximate,
        },
    )
    .unwrap();
    assert!(common::max_abs(&exact, &approx) > 1e-3);
}

fn median_time<F: FnMut()>(mut f: F) -> f64 {
    let mut t: Vec<f64> = (0..5)
        .map(|_| {
            let s = Instant::now();
            f();
            s.elapsed().as_secs_f64()
        })
        .collect();
    t.sort_by(f64::total_cmp);
    t[2]
}

#[test]
fn histogram_cost_grows_with_ell() {
    let (g, labels) = cycle_labels(40_000, 3, 50);
    let time = |mode, ell| {
        let cfg = HistogramConfig { alpha: 0.5, ell, mode };
        median_time(|| {
            let h: Array2<f64> = cohop::featurize::histograms(&g, &labels, &cfg).unwrap();
            std::hint::black_box(h);
        })
    };
    // Widely spaced ells keep the comparison far above timer noise.
    let exact: Vec<f64> = [2, 16, 128].iter().map(|&l| time(HistogramMode::Exact, l)).collect();
    assert!(exact[0] < exact[1] && exact[1] < exact[2], "{exact:?}");
    let a8 = time(HistogramMode::Approximate, 8);
    let a64 = time(HistogramMode::Approximate, 64);
    assert!(a64 < 8.0 * a8 * 3.0, "approximate cost superlinear: {a8} -> {a64}");
}

#[test]
fn bench_report_has_requested_rows() {
    let ds = sbm(300, 8);
    let cfg = quick(SplitMode::Transductive, 2);
    let opts = BenchOptions {
        ells: vec![1, 3],
        trials: 2,
        ..BenchOptions::default()
    };
    let report = bench_histograms::<f32>(&ds, &cfg, &opts).unwrap();
    assert_eq!(report.rows.iter().map(|r| r.ell).collect::<Vec<_>>(), vec![1, 3]);
    for r in &report.rows {
        assert!(r.exact_s > 0.0 && r.approx_s > 0.0);
        assert!((0.0..=1.0).contains(&r.exact_acc) && (0.0..=1.0).contains(&r.approx_acc));
    }
    let json = serde_json::to_value(&report).unwrap();
    assert_eq!(json["schema_version"], 1);
    let bad = BenchOptions { trials: 0, ..opts };
    assert!(bench_histograms::<f32>(&ds, &cfg, &bad).unwrap_err().is_config());
}
