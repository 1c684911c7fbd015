use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;
use thiserror::Error;

use dypro::cohort::{oracle_cindex, simulate_cohort, write_cohort, CohortError, OracleCindex, SimulationScenario};
use dypro::config::{load_config, ConfigError, RunConfig};
use dypro::evolution::Backbone;
use dypro::pipeline::{
    resolve_cohort, run_ablation, run_training, toy_gradient_check, CvReport, PipelineError, Task, Variant,
};
use dypro::report::{curve_rows, emit_report, read_report, sig6, summary_text, write_file, ReportError};
use dypro::train::{format_epoch, TrainError};

/// Largest relative error `gradcheck` accepts.
const GRADCHECK_TOLERANCE: f64 = 1e-4;

#[derive(Parser, Debug)]
#[command(
    name = "dypro",
    version,
    about = "Graph-trajectory survival models: simulate, train, cross-validate"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args, Debug)]
struct Common {
    /// Run configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Overrides the configured seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the configured output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a synthetic cohort and its ground truth.
    Simulate(Common),
    /// Fit one model on an 80/20 split of the cohort.
    Train(Common),
    /// Repeated stratified k-fold evaluation of the full model.
    Crossval(Common),
    /// Re-score the held-out predictions of an earlier run with the config's eval section.
    Evaluate {
        #[command(flatten)]
        common: Common,
        /// Earlier report; defaults to report.json in the output directory.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Cross-validate ablation variants, one subdirectory each.
    Ablate {
        #[command(flatten)]
        common: Common,
        /// Variants to run (full, static, mean_integrator, no_cascade); all by default.
        #[arg(long = "variant")]
        variants: Vec<Variant>,
    },
    /// Finite-difference check of the full pipeline on a toy batch.
    Gradcheck {
        /// Only the seed is read from it.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Also write gradcheck.json here.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value = "graphsage", value_parser = parse_backbone)]
        backbone: Backbone,
        #[arg(long, default_value_t = 1e-5)]
        step: f64,
    },
}

fn parse_backbone(s: &str) -> Result<Backbone, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string()))
        .map_err(|_| format!("unknown backbone {s:?}; expected graphsage, gcn or gat"))
}

#[derive(Debug, Error)]
enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Cohort(#[from] CohortError),
    #[error(transparent)]
    Report(#[from] ReportError),
    #[error(transparent)]
    Pipeline(PipelineError),
    #[error("{failed} of {total} folds failed to train")]
    TooManyFailures { failed: usize, total: usize },
    #[error("gradient check failed: max relative error {0:e}")]
    GradCheck(f64),
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::Config(c) => CliError::Config(c),
            PipelineError::Cohort(c) => CliError::Cohort(c),
            other => CliError::Pipeline(other),
        }
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Report(ReportError::Io { .. }) => 1,
            CliError::Cohort(_) | CliError::Report(ReportError::Parse(_)) => 2,
            CliError::Pipeline(PipelineError::Train(TrainError::Log(_))) => 1,
            CliError::Pipeline(_) | CliError::TooManyFailures { .. } | CliError::GradCheck(_) => 3,
        }
    }
}

fn load(common: &Common) -> Result<RunConfig, CliError> {
    let mut cfg = load_config(&common.config)?;
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &common.out {
        cfg.paths.output = out.clone();
    }
    Ok(cfg)
}

fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|source| {
        CliError::Report(ReportError::Io {
            path: dir.display().to_string(),
            source,
        })
    })
}

#[derive(Serialize)]
struct Truth<'a> {
    seed: u64,
    scenario: &'a SimulationScenario,
    censoring_horizon: Option<f64>,
    groups: &'a [u8],
    oracle_cindex: OracleCindex,
}

fn simulate(cfg: &RunConfig) -> Result<(), CliError> {
    let sim = simulate_cohort(&cfg.simulate, cfg.seed);
    let dir = &cfg.paths.output;
    ensure_dir(dir)?;
    write_cohort(&sim.cohort, &dir.join("cohort.json"))?;
    let truth = Truth {
        seed: cfg.seed,
        scenario: &sim.scenario,
        censoring_horizon: sim.scenario.censoring_horizon(),
        groups: &sim.groups,
        oracle_cindex: oracle_cindex(&sim),
    };
    write_file(
        &dir.join("truth.json"),
        &serde_json::to_string_pretty(&truth).expect("truth serializes"),
    )?;
    println!(
        "{} patients -> {} (oracle cindex os {:.3}, dfs {:.3})",
        sim.cohort.patients.len(),
        dir.display(),
        truth.oracle_cindex.os,
        truth.oracle_cindex.dfs
    );
    Ok(())
}

fn train_once(cfg: &RunConfig) -> Result<(), CliError> {
    let cohort = resolve_cohort(cfg)?;
    let run = run_training(cfg, &cohort)?;
    let dir = &cfg.paths.output;
    ensure_dir(dir)?;
    let log: String = run.outcome.history.iter().map(|e| format_epoch(e) + "\n").collect();
    write_file(&dir.join("train.log"), &log)?;
    write_file(
        &dir.join("training.json"),
        &serde_json::to_string_pretty(&run).expect("run serializes"),
    )?;
    write_file(
        &dir.join("curves.csv"),
        &curve_rows(run.predictions.iter().map(|(id, p)| (id.as_str(), p))),
    )?;
    println!(
        "best epoch {} of {}, validation loss {:.6}",
        run.outcome.best_epoch,
        run.outcome.history.len(),
        run.outcome.best_val_loss
    );
    Ok(())
}

fn finish(report: &CvReport, dir: &Path) -> Result<(), CliError> {
    emit_report(report, dir)?;
    print!("{}", summary_text(report));
    if report.exceeds_failure_threshold() {
        return Err(CliError::TooManyFailures {
            failed: report.failed_folds(),
            total: report.folds.len(),
        });
    }
    Ok(())
}

fn crossval(cfg: &RunConfig) -> Result<(), CliError> {
    let cohort = resolve_cohort(cfg)?;
    let report = run_ablation(cfg, &cohort, Variant::Full)?;
    finish(&report, &cfg.paths.output)
}

fn evaluate(cfg: &RunConfig, report_path: Option<&Path>) -> Result<(), CliError> {
    let path = report_path.map_or_else(|| cfg.paths.output.join("report.json"), Path::to_path_buf);
    let mut report = read_report(&path)?;
    report.rescore(&cfg.eval);
    finish(&report, &cfg.paths.output)
}

fn ablate(cfg: &RunConfig, variants: &[Variant]) -> Result<(), CliError> {
    let cohort = resolve_cohort(cfg)?;
    let variants = if variants.is_empty() {
        &Variant::ALL[..]
    } else {
        variants
    };
    let mut table = String::from("variant,task,cindex_mean,cindex_std,ibs_mean,ibs_std,cascade_gradient_norm\n");
    let mut worst = None;
    for &v in variants {
        let report = run_ablation(cfg, &cohort, v)?;
        let dir = cfg.paths.output.join(v.name());
        if let Err(e) = finish(&report, &dir) {
            if !matches!(e, CliError::TooManyFailures { .. }) {
                return Err(e);
            }
            worst.get_or_insert(e);
        }
        for task in Task::ALL {
            let a = report.aggregate_for(task).expect("both tasks aggregated");
            let cell = |x: Option<f64>| x.map_or_else(|| "NA".to_string(), sig6);
            table.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                v,
                task.name(),
                cell(a.cindex.mean),
                cell(a.cindex.std),
                cell(a.ibs.mean),
                cell(a.ibs.std),
                sig6(report.cascade_gradient_norm)
            ));
        }
    }
    ensure_dir(&cfg.paths.output)?;
    write_file(&cfg.paths.output.join("ablation.csv"), &table)?;
    worst.map_or(Ok(()), Err)
}

#[derive(Serialize)]
struct GradCheckSummary {
    backbone: Backbone,
    seed: u64,
    step: f64,
    coordinates: usize,
    max_rel_error: f64,
}

fn gradcheck(seed: u64, backbone: Backbone, step: f64, out: Option<&Path>) -> Result<(), CliError> {
    let report = toy_gradient_check(backbone, seed, step)?;
    println!(
        "{} coordinates, max relative error {:e}",
        report.coordinates, report.max_rel_error
    );
    if let Some(dir) = out {
        ensure_dir(dir)?;
        let summary = GradCheckSummary {
            backbone,
            seed,
            step,
            coordinates: report.coordinates,
            max_rel_error: report.max_rel_error,
        };
        write_file(
            &dir.join("gradcheck.json"),
            &serde_json::to_string_pretty(&summary).expect("summary serializes"),
        )?;
    }
    if report.max_rel_error > GRADCHECK_TOLERANCE {
        return Err(CliError::GradCheck(report.max_rel_error));
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Simulate(c) => simulate(&load(&c)?),
        Command::Train(c) => train_once(&load(&c)?),
        Command::Crossval(c) => crossval(&load(&c)?),
        Command::Evaluate { common, report } => evaluate(&load(&common)?, report.as_deref()),
        Command::Ablate { common, variants } => ablate(&load(&common)?, &variants),
        Command::Gradcheck {
            config,
            seed,
            out,
            backbone,
            step,
        } => {
            let base = match config {
                Some(path) => load_config(&path)?.seed,
                None => 0,
            };
            gradcheck(seed.unwrap_or(base), backbone, step, out.as_deref())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
