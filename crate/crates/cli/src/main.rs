mod args;

use std::path::Path;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::Parser;
use cohop::checkpoint::{load_model, save_model};
use cohop::data::generate_sbm;
use cohop::experiment::{
    bench_histograms, evaluate_checkpoint, run_ablation, run_experiment, AblationCell, BenchOptions, Evaluation,
    ExperimentConfig, Precision, RunReport,
};
use cohop::{Dataset, HistogramConfig, SbmConfig, Scalar};
use serde::Serialize;

use args::{AblateArgs, BenchArgs, Cli, Command, EvalArgs, SbmArgs, TrainArgs};

const EXIT_CONFIG: u8 = 2;
const EXIT_DATA: u8 = 3;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Train(a) => cmd_train(a),
        Command::Ablate(a) => cmd_ablate(a),
        Command::BenchHistograms(a) => cmd_bench(a),
        Command::Eval(a) => cmd_eval(a),
        Command::GenerateSbm(a) => cmd_generate(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &anyhow::Error) -> u8 {
    match e.chain().find_map(|c| c.downcast_ref::<cohop::Error>()) {
        Some(err) if err.is_config() => EXIT_CONFIG,
        Some(_) => EXIT_DATA,
        None => 1,
    }
}

fn load(dir: &Path) -> Result<Dataset> {
    Dataset::load(dir).with_context(|| format!("loading dataset {}", dir.display()))
}

fn emit<S: Serialize>(value: &S, out: Option<&Path>) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    match out {
        Some(path) => std::fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display())),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn cmd_train(a: TrainArgs) -> Result<()> {
    let mut cfg = a.run.experiment_config();
    if let Some(cell) = a.ablation {
        cfg.train = cell.apply(&cfg.train);
    }
    cfg.validate()?;
    let ds = load(&a.run.dataset)?;
    let report = match cfg.precision {
        Precision::F32 => train_with::<f32>(&ds, &cfg, a.checkpoint_dir.as_deref())?,
        Precision::F64 => train_with::<f64>(&ds, &cfg, a.checkpoint_dir.as_deref())?,
    };
    eprintln!("test accuracy {:.2} ± {:.2}", 100.0 * report.mean, 100.0 * report.std);
    if let Some(path) = &a.csv {
        let csv = format!("{}\n{}\n", RunReport::csv_header(), report.csv_row());
        std::fs::write(path, csv).with_context(|| format!("writing {}", path.display()))?;
    }
    emit(&report, a.out.as_deref())
}

fn train_with<T: Scalar>(ds: &Dataset, cfg: &ExperimentConfig, checkpoints: Option<&Path>) -> Result<RunReport> {
    let (report, models) = run_experiment::<T>(ds, cfg)?;
    if let Some(dir) = checkpoints {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        for (seed, model) in cfg.seed_list().into_iter().zip(&models) {
            save_model(model, &dir.join(format!("seed-{seed}.cohm")))?;
        }
    }
    Ok(report)
}

fn cmd_ablate(a: AblateArgs) -> Result<()> {
    let cfg = a.run.experiment_config();
    cfg.validate()?;
    let cells = if a.cells.is_empty() {
        AblationCell::lattice()
    } else {
        a.cells.clone()
    };
    let ds = load(&a.run.dataset)?;
    let report = match cfg.precision {
        Precision::F32 => run_ablation::<f32>(&ds, &cfg, &cells)?,
        Precision::F64 => run_ablation::<f64>(&ds, &cfg, &cells)?,
    };
    print!("{}", report.table());
    if let Some(path) = &a.out {
        emit(&report, Some(path))?;
    }
    Ok(())
}

fn cmd_bench(a: BenchArgs) -> Result<()> {
    let cfg = a.run.experiment_config();
    cfg.validate()?;
    let opts = BenchOptions {
        ells: a.ells.clone(),
        trials: a.trials,
        alpha_exact: a.run.alpha.unwrap_or(HistogramConfig::exact().alpha),
        alpha_approx: a.alpha_approx.unwrap_or(HistogramConfig::approximate().alpha),
        timing_only: a.timing_only,
    };
    let ds = load(&a.run.dataset)?;
    let report = match cfg.precision {
        Precision::F32 => bench_histograms::<f32>(&ds, &cfg, &opts)?,
        Precision::F64 => bench_histograms::<f64>(&ds, &cfg, &opts)?,
    };
    for r in &report.rows {
        eprintln!(
            "ell {:>3}: exact {:.3e}s  approx {:.3e}s  max |diff| {:.3e}",
            r.ell, r.exact_s, r.approx_s, r.max_abs_diff
        );
    }
    emit(&report, a.out.as_deref())
}

#[derive(Serialize)]
struct EvalReport {
    seed: u64,
    #[serde(flatten)]
    eval: Evaluation,
}

fn cmd_eval(a: EvalArgs) -> Result<()> {
    let cfg = a.run.experiment_config();
    cfg.validate()?;
    let ds = load(&a.run.dataset)?;
    let eval = match cfg.precision {
        Precision::F32 => {
            let model = load_model::<f32>(&a.checkpoint)?;
            evaluate_checkpoint(&model, &ds, &cfg, a.seed)?
        }
        Precision::F64 => {
            let model = load_model::<f64>(&a.checkpoint)?;
            evaluate_checkpoint(&model, &ds, &cfg, a.seed)?
        }
    };
    emit(&EvalReport { seed: a.seed, eval }, a.out.as_deref())
}

fn cmd_generate(a: SbmArgs) -> Result<()> {
    let ds = generate_sbm(&SbmConfig {
        nodes: a.nodes,
        classes: a.classes,
        p_in: a.p_in,
        p_out: a.p_out,
        feature_dim: a.feature_dim,
        noise_sigma: a.noise_sigma,
        mean_scale: a.mean_scale,
        seed: a.seed,
    })?;
    ds.save(&a.out)?;
    eprintln!(
        "wrote {} nodes, {} edges (homophily {:.3}) to {}",
        ds.num_nodes(),
        ds.graph.num_edges(),
        ds.edge_homophily(),
        a.out.display()
    );
    Ok(())
}
