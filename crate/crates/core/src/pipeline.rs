//! Repeated cross-validation, ablation variants and single training runs.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::autodiff::{grad_check_params, GradCheckReport, Tape};
use crate::cohort::{simulate_cohort, stratified_repeated_kfold, Cohort, CohortError, Fold, SimulationScenario};
use crate::config::{ConfigError, EvalConfig, RunConfig};
use crate::evolution::Backbone;
use crate::heads::{SurvivalCurve, TimeBins};
use crate::init::derive_seed;
use crate::metrics::{
    bootstrap_ci, event_probabilities, format_ci, harrell_cindex, integrated_brier, mae_uncensored, time_dependent_auc,
    BootstrapInterval,
};
use crate::model::{DyPro, IntegratorMode, ModelConfig, ModelError, Prediction};
use crate::objective::{discrete_nll_on_tape, LossWeights, SurvivalLabel};
use crate::train::{train, EpochLog, Sample, TrainError, TrainOutcome};

const SPLIT_TAG: u64 = 0x5350_4c49;
const FOLD_TAG: u64 = 0x464f_4c44;
const BOOT_TAG: u64 = 0x424f_4f54;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Cohort(#[from] CohortError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Train(#[from] TrainError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Full,
    /// One residual update, one snapshot.
    Static,
    /// LSTM replaced by the mean of the snapshots.
    MeanIntegrator,
    /// OS head no longer sees the DFS context.
    NoCascade,
}

impl Variant {
    pub const ALL: [Variant; 4] = [
        Variant::Full,
        Variant::Static,
        Variant::MeanIntegrator,
        Variant::NoCascade,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Full => "full",
            Variant::Static => "static",
            Variant::MeanIntegrator => "mean_integrator",
            Variant::NoCascade => "no_cascade",
        }
    }

    pub fn apply(self, mut model: ModelConfig) -> ModelConfig {
        match self {
            Variant::Full => {}
            Variant::Static => model.horizon = 1,
            Variant::MeanIntegrator => model.integrator = IntegratorMode::Mean,
            Variant::NoCascade => model.cascade = false,
        }
        model
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| format!("unknown variant {s:?}; expected one of full, static, mean_integrator, no_cascade"))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Os,
    Dfs,
}

impl Task {
    pub const ALL: [Task; 2] = [Task::Os, Task::Dfs];

    pub fn name(self) -> &'static str {
        match self {
            Task::Os => "os",
            Task::Dfs => "dfs",
        }
    }
}

/// A held-out prediction for one patient in one repeat.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OofPrediction {
    /// Position in the cohort.
    pub patient: usize,
    pub patient_id: String,
    pub repeat: usize,
    pub fold: usize,
    pub os: SurvivalLabel,
    pub dfs: SurvivalLabel,
    pub prediction: Prediction,
}

impl OofPrediction {
    pub fn label(&self, task: Task) -> SurvivalLabel {
        match task {
            Task::Os => self.os,
            Task::Dfs => self.dfs,
        }
    }

    pub fn survival(&self, task: Task) -> &SurvivalCurve {
        match task {
            Task::Os => &self.prediction.os_survival,
            Task::Dfs => &self.prediction.dfs_survival,
        }
    }

    /// Predicted time in years.
    pub fn time(&self, task: Task) -> f64 {
        match task {
            Task::Os => self.prediction.os_time,
            Task::Dfs => self.prediction.dfs_time,
        }
    }

    /// Higher means earlier predicted event.
    pub fn risk(&self, task: Task) -> f64 {
        -self.time(task)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum FoldStatus {
    Trained { best_epoch: usize, best_val_loss: f64 },
    Failed { reason: String },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoldRecord {
    pub repeat: usize,
    pub fold: usize,
    pub seed: u64,
    pub n_train: usize,
    pub n_validation: usize,
    pub n_test: usize,
    pub status: FoldStatus,
    pub history: Vec<EpochLog>,
}

impl FoldRecord {
    pub fn failed(&self) -> bool {
        matches!(self.status, FoldStatus::Failed { .. })
    }
}

/// Test-fold metrics for one task; `None` marks an undefined value.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub repeat: usize,
    pub fold: usize,
    pub task: Task,
    pub cindex: Option<f64>,
    pub ibs: Option<f64>,
    /// One entry per configured horizon.
    pub auc: Vec<Option<f64>>,
    pub mae: Option<f64>,
    pub capped_weights: usize,
}

/// Mean and sample standard deviation over the defined values.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: Option<f64>,
    pub std: Option<f64>,
    pub n: usize,
}

impl Summary {
    pub fn of(values: impl IntoIterator<Item = Option<f64>>) -> Self {
        let v: Vec<f64> = values.into_iter().flatten().collect();
        let n = v.len();
        if n == 0 {
            return Self {
                mean: None,
                std: None,
                n,
            };
        }
        let mean = v.iter().sum::<f64>() / n as f64;
        let std = (n > 1).then(|| (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt());
        Self {
            mean: Some(mean),
            std,
            n,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskAggregate {
    pub task: Task,
    pub cindex: Summary,
    pub ibs: Summary,
    pub auc: Vec<Summary>,
    pub mae: Summary,
}

/// C-index bootstrap over the pooled held-out predictions of the first repeat.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskInterval {
    pub task: Task,
    pub point: Option<f64>,
    pub interval: Option<BootstrapInterval>,
    pub text: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub variant: Variant,
    pub seed: u64,
    pub config: RunConfig,
    pub folds: Vec<FoldRecord>,
    pub rows: Vec<MetricRow>,
    pub aggregate: Vec<TaskAggregate>,
    pub bootstrap: Vec<TaskInterval>,
    /// Norm of the OS-loss gradient reaching the DFS context weights at initialization.
    pub cascade_gradient_norm: f64,
    pub predictions: Vec<OofPrediction>,
    pub runtime_secs: f64,
}

impl CvReport {
    pub fn failed_folds(&self) -> usize {
        self.folds.iter().filter(|f| f.failed()).count()
    }

    /// More than a third of the folds failed to train.
    pub fn exceeds_failure_threshold(&self) -> bool {
        3 * self.failed_folds() > self.folds.len()
    }

    pub fn aggregate_for(&self, task: Task) -> Option<&TaskAggregate> {
        self.aggregate.iter().find(|a| a.task == task)
    }

    pub fn mean_cindex(&self, task: Task) -> Option<f64> {
        self.aggregate_for(task).and_then(|a| a.cindex.mean)
    }

    /// Recomputes rows, aggregates and intervals from the stored predictions.
    pub fn rescore(&mut self, eval: &EvalConfig) {
        self.config.eval = eval.clone();
        let bins = self.config.model.bins.clone();
        self.rows = score_rows(&self.folds, &self.predictions, eval, &bins);
        self.aggregate = aggregate(&self.rows, eval.horizons.len());
        self.bootstrap = bootstrap_intervals(&self.predictions, eval, derive_seed(self.seed, BOOT_TAG));
    }
}

pub fn samples_from(cohort: &Cohort) -> Result<Vec<Sample>, CohortError> {
    let graphs = cohort.graphs()?;
    Ok(cohort
        .patients
        .iter()
        .zip(graphs)
        .map(|(p, graph)| Sample {
            graph,
            os: p.os,
            dfs: p.dfs,
        })
        .collect())
}

fn labels_of(cohort: &Cohort) -> Vec<(SurvivalLabel, SurvivalLabel)> {
    cohort.patients.iter().map(|p| (p.os, p.dfs)).collect()
}

fn pick(samples: &[Sample], idx: &[usize]) -> Vec<Sample> {
    idx.iter().map(|&i| samples[i].clone()).collect()
}

fn run_fold(
    cfg: &RunConfig,
    model_cfg: &ModelConfig,
    cohort: &Cohort,
    samples: &[Sample],
    fold: &Fold,
    seed: u64,
) -> (FoldRecord, Vec<OofPrediction>) {
    let mut record = FoldRecord {
        repeat: fold.repeat,
        fold: fold.fold,
        seed,
        n_train: fold.train.len(),
        n_validation: fold.validation.len(),
        n_test: fold.test.len(),
        status: FoldStatus::Failed { reason: String::new() },
        history: Vec::new(),
    };
    let attempt = || -> Result<(TrainOutcome, Vec<OofPrediction>), PipelineError> {
        let mut model = DyPro::new(model_cfg.clone(), cohort.schema, derive_seed(seed, 0))?;
        let outcome = train(
            &mut model,
            &pick(samples, &fold.train),
            &pick(samples, &fold.validation),
            &cfg.train,
            derive_seed(seed, 1),
            None,
        )?;
        let preds = fold
            .test
            .iter()
            .map(|&i| {
                let p = &cohort.patients[i];
                Ok(OofPrediction {
                    patient: i,
                    patient_id: p.id.clone(),
                    repeat: fold.repeat,
                    fold: fold.fold,
                    os: p.os,
                    dfs: p.dfs,
                    prediction: model.predict(&samples[i].graph)?,
                })
            })
            .collect::<Result<Vec<_>, ModelError>>()?;
        Ok((outcome, preds))
    };
    match attempt() {
        Ok((outcome, preds)) => {
            record.status = FoldStatus::Trained {
                best_epoch: outcome.best_epoch,
                best_val_loss: outcome.best_val_loss,
            };
            record.history = outcome.history;
            (record, preds)
        }
        Err(e) => {
            record.status = FoldStatus::Failed { reason: e.to_string() };
            (record, Vec::new())
        }
    }
}

fn score_task(preds: &[&OofPrediction], task: Task, eval: &EvalConfig, bins: &TimeBins) -> MetricRow {
    let labels: Vec<SurvivalLabel> = preds.iter().map(|p| p.label(task)).collect();
    let curves: Vec<SurvivalCurve> = preds.iter().map(|p| p.survival(task).clone()).collect();
    let risks: Vec<f64> = preds.iter().map(|p| p.risk(task)).collect();
    let times: Vec<f64> = preds.iter().map(|p| p.time(task)).collect();
    let ibs = integrated_brier(&curves, &labels, bins, eval.tau(bins.last_edge()), eval.weight_cap).ok();
    MetricRow {
        repeat: preds.first().map_or(0, |p| p.repeat),
        fold: preds.first().map_or(0, |p| p.fold),
        task,
        cindex: harrell_cindex(&risks, &labels).ok(),
        ibs: ibs.map(|r| r.ibs),
        auc: eval
            .horizons
            .iter()
            .map(|&h| {
                time_dependent_auc(&event_probabilities(&curves, bins, h), &labels, h)
                    .ok()
                    .flatten()
            })
            .collect(),
        mae: mae_uncensored(&times, &labels),
        capped_weights: ibs.map_or(0, |r| r.capped_weights),
    }
}

fn score_rows(folds: &[FoldRecord], preds: &[OofPrediction], eval: &EvalConfig, bins: &TimeBins) -> Vec<MetricRow> {
    let mut rows = Vec::with_capacity(2 * folds.len());
    for f in folds {
        let mine: Vec<&OofPrediction> = preds
            .iter()
            .filter(|p| p.repeat == f.repeat && p.fold == f.fold)
            .collect();
        for task in Task::ALL {
            let mut row = score_task(&mine, task, eval, bins);
            row.repeat = f.repeat;
            row.fold = f.fold;
            if f.failed() {
                row = MetricRow {
                    cindex: None,
                    ibs: None,
                    auc: vec![None; eval.horizons.len()],
                    mae: None,
                    capped_weights: 0,
                    ..row
                };
            }
            rows.push(row);
        }
    }
    rows
}

pub fn aggregate(rows: &[MetricRow], horizons: usize) -> Vec<TaskAggregate> {
    Task::ALL
        .into_iter()
        .map(|task| {
            let mine: Vec<&MetricRow> = rows.iter().filter(|r| r.task == task).collect();
            TaskAggregate {
                task,
                cindex: Summary::of(mine.iter().map(|r| r.cindex)),
                ibs: Summary::of(mine.iter().map(|r| r.ibs)),
                auc: (0..horizons)
                    .map(|h| Summary::of(mine.iter().map(|r| r.auc.get(h).copied().flatten())))
                    .collect(),
                mae: Summary::of(mine.iter().map(|r| r.mae)),
            }
        })
        .collect()
}

fn bootstrap_intervals(preds: &[OofPrediction], eval: &EvalConfig, seed: u64) -> Vec<TaskInterval> {
    let mut pool: Vec<&OofPrediction> = preds.iter().filter(|p| p.repeat == 0).collect();
    pool.sort_by_key(|p| p.patient);
    Task::ALL
        .into_iter()
        .enumerate()
        .map(|(t, task)| {
            let risks: Vec<f64> = pool.iter().map(|p| p.risk(task)).collect();
            let labels: Vec<SurvivalLabel> = pool.iter().map(|p| p.label(task)).collect();
            let point = harrell_cindex(&risks, &labels).ok();
            let metric = |idx: &[usize]| {
                let r: Vec<f64> = idx.iter().map(|&i| risks[i]).collect();
                let l: Vec<SurvivalLabel> = idx.iter().map(|&i| labels[i]).collect();
                harrell_cindex(&r, &l).ok()
            };
            let interval = point.and_then(|_| {
                bootstrap_ci(
                    pool.len(),
                    metric,
                    eval.bootstrap,
                    eval.level,
                    derive_seed(seed, t as u64),
                )
                .ok()
            });
            TaskInterval {
                task,
                point,
                interval,
                text: point.zip(interval).map(|(p, ci)| format_ci(p, &ci)),
            }
        })
        .collect()
}

/// Frobenius norm of the gradient of the OS loss alone with respect to the
/// DFS context projection.
pub fn cascade_gradient_norm(model: &DyPro, sample: &Sample) -> Result<f64, ModelError> {
    let mut tape = Tape::new();
    let bound = model.params.bind(&mut tape);
    let out = model.forward(&mut tape, &bound, &sample.graph)?;
    let loss = discrete_nll_on_tape(&mut tape, out.os_logits, &sample.os, &model.config.bins)?;
    let grads = tape.backward(loss)?;
    Ok(grads
        .get(bound[model.heads.ctx_weight])
        .map_or(0.0, |g| g.frobenius_norm()))
}

/// Repeated stratified k-fold evaluation of one model variant.
pub fn run_ablation(cfg: &RunConfig, cohort: &Cohort, variant: Variant) -> Result<CvReport, PipelineError> {
    let started = Instant::now();
    cfg.validate()?;
    let samples = samples_from(cohort)?;
    let plan = stratified_repeated_kfold(
        &labels_of(cohort),
        cfg.cv.k,
        cfg.cv.repeats,
        derive_seed(cfg.seed, SPLIT_TAG),
    )?;
    let model_cfg = variant.apply(cfg.model.clone());

    let probe = DyPro::new(model_cfg.clone(), cohort.schema, derive_seed(cfg.seed, FOLD_TAG))?;
    let cascade_norm = cascade_gradient_norm(&probe, &samples[0])?;

    let fold_root = derive_seed(cfg.seed, FOLD_TAG);
    let results: Vec<(FoldRecord, Vec<OofPrediction>)> = plan
        .folds
        .par_iter()
        .enumerate()
        .map(|(i, fold)| {
            run_fold(
                cfg,
                &model_cfg,
                cohort,
                &samples,
                fold,
                derive_seed(fold_root, i as u64),
            )
        })
        .collect();
    let (folds, preds): (Vec<FoldRecord>, Vec<Vec<OofPrediction>>) = results.into_iter().unzip();
    let predictions: Vec<OofPrediction> = preds.into_iter().flatten().collect();

    let mut report = CvReport {
        variant,
        seed: cfg.seed,
        config: cfg.clone(),
        folds,
        rows: Vec::new(),
        aggregate: Vec::new(),
        bootstrap: Vec::new(),
        cascade_gradient_norm: cascade_norm,
        predictions,
        runtime_secs: 0.0,
    };
    report.rescore(&cfg.eval);
    report.runtime_secs = started.elapsed().as_secs_f64();
    Ok(report)
}

pub fn run_crossval(cfg: &RunConfig, cohort: &Cohort) -> Result<CvReport, PipelineError> {
    run_ablation(cfg, cohort, Variant::Full)
}

/// The cohort named in the config, or a simulated one.
pub fn resolve_cohort(cfg: &RunConfig) -> Result<Cohort, CohortError> {
    match &cfg.paths.cohort {
        Some(path) => crate::cohort::load_cohort(path),
        None => Ok(simulate_cohort(&cfg.simulate, cfg.seed).cohort),
    }
}

/// One model fit on the whole cohort with a stratified 80/20 train/validation split.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainingRun {
    pub outcome: TrainOutcome,
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
    pub predictions: Vec<(String, Prediction)>,
}

pub fn run_training(cfg: &RunConfig, cohort: &Cohort) -> Result<TrainingRun, PipelineError> {
    cfg.validate()?;
    let samples = samples_from(cohort)?;
    let plan = stratified_repeated_kfold(&labels_of(cohort), 5, 1, derive_seed(cfg.seed, SPLIT_TAG))?;
    let fold = &plan.folds[0];
    let mut train_idx: Vec<usize> = fold.train.iter().chain(&fold.validation).copied().collect();
    train_idx.sort_unstable();
    let seed = derive_seed(cfg.seed, FOLD_TAG);
    let mut model = DyPro::new(cfg.model.clone(), cohort.schema, derive_seed(seed, 0))?;
    let outcome = train(
        &mut model,
        &pick(&samples, &train_idx),
        &pick(&samples, &fold.test),
        &cfg.train,
        derive_seed(seed, 1),
        None,
    )?;
    let predictions = cohort
        .patients
        .iter()
        .zip(&samples)
        .map(|(p, s)| Ok((p.id.clone(), model.predict(&s.graph)?)))
        .collect::<Result<Vec<_>, ModelError>>()?;
    Ok(TrainingRun {
        outcome,
        train: train_idx,
        validation: fold.test.clone(),
        predictions,
    })
}

/// Finite-difference check of the whole forward pass and combined loss on a
/// three-patient toy batch with width 8 and four evolution steps.
pub fn toy_gradient_check(backbone: Backbone, seed: u64, step: f64) -> Result<GradCheckReport, PipelineError> {
    let scenario = SimulationScenario {
        n: 3,
        ..SimulationScenario::default()
    };
    let cohort = simulate_cohort(&scenario, seed).cohort;
    let samples = samples_from(&cohort)?;
    let config = ModelConfig {
        backbone,
        latent: 8,
        time_width: 4,
        hidden: 8,
        context: 4,
        horizon: 4,
        bins: TimeBins::annual(6),
        ..ModelConfig::default()
    };
    let model = DyPro::new(config, cohort.schema, derive_seed(seed, 0))?;
    let weights = LossWeights::default();
    let report = grad_check_params(
        |tape, bound| -> Result<_, ModelError> {
            let mut parts = Vec::with_capacity(samples.len());
            for s in &samples {
                parts.push(model.patient_loss(tape, bound, &s.graph, &s.os, &s.dfs, &weights)?);
            }
            let stacked = tape.stack_rows(&parts)?;
            Ok(tape.mean_all(stacked)?)
        },
        &model.params,
        step,
    )?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_config() -> RunConfig {
        let mut cfg = RunConfig {
            model: ModelConfig {
                latent: 6,
                time_width: 3,
                hidden: 6,
                context: 3,
                horizon: 3,
                bins: TimeBins::annual(6),
                ..ModelConfig::default()
            },
            ..RunConfig::default()
        };
        cfg.train.max_epochs = 2;
        cfg.train.augmentation.variants = 1;
        cfg.cv.repeats = 2;
        cfg.eval.bootstrap = 200;
        cfg.simulate.n = 60;
        cfg
    }

    #[test]
    fn variant_names_round_trip() {
        for v in Variant::ALL {
            assert_eq!(v.name().parse::<Variant>().unwrap(), v);
        }
        assert!("dynamic".parse::<Variant>().is_err());
    }

    #[test]
    fn variants_touch_one_knob() {
        let base = ModelConfig::default();
        assert_eq!(Variant::Full.apply(base.clone()), base);
        assert_eq!(Variant::Static.apply(base.clone()).horizon, 1);
        assert!(!Variant::NoCascade.apply(base.clone()).cascade);
        assert_eq!(Variant::MeanIntegrator.apply(base).integrator, IntegratorMode::Mean);
    }

    #[test]
    fn summary_uses_sample_std_and_skips_missing() {
        let s = Summary::of([Some(1.0), None, Some(3.0)]);
        assert_eq!(s.n, 2);
        assert_eq!(s.mean, Some(2.0));
        assert!((s.std.unwrap() - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(Summary::of([None]).mean, None);
        assert_eq!(Summary::of([Some(4.0)]).std, None);
    }

    #[test]
    fn crossval_shape_and_determinism() {
        let cfg = small_config();
        let cohort = resolve_cohort(&cfg).unwrap();
        let a = run_crossval(&cfg, &cohort).unwrap();
        assert_eq!(a.folds.len(), 10);
        assert_eq!(a.rows.len(), 20);
        assert_eq!(a.failed_folds(), 0);
        assert_eq!(a.predictions.len(), 120);
        assert!(a.cascade_gradient_norm > 0.0);
        let b = run_crossval(&cfg, &cohort).unwrap();
        assert_eq!(a.rows, b.rows);
        assert_eq!(a.predictions, b.predictions);
        let again = aggregate(&a.rows, cfg.eval.horizons.len());
        assert_eq!(again, a.aggregate);
    }

    #[test]
    fn no_cascade_blocks_the_context_gradient() {
        let cfg = small_config();
        let cohort = resolve_cohort(&cfg).unwrap();
        let samples = samples_from(&cohort).unwrap();
        for (cascade, zero) in [(true, false), (false, true)] {
            let model_cfg = ModelConfig {
                cascade,
                ..cfg.model.clone()
            };
            let model = DyPro::new(model_cfg, cohort.schema, 3).unwrap();
            let norm = cascade_gradient_norm(&model, &samples[0]).unwrap();
            assert_eq!(norm == 0.0, zero, "cascade {cascade}: {norm}");
        }
    }

    #[test]
    fn rescoring_with_same_eval_is_identity() {
        let cfg = small_config();
        let cohort = resolve_cohort(&cfg).unwrap();
        let report = run_ablation(&cfg, &cohort, Variant::Static).unwrap();
        let mut again = report.clone();
        again.rescore(&cfg.eval);
        assert_eq!(again, report);
    }

    #[test]
    fn toy_check_passes() {
        let r = toy_gradient_check(Backbone::GraphSage, 1, 1e-5).unwrap();
        assert!(r.max_rel_error <= 1e-4, "{r:?}");
    }

    #[test]
    fn training_run_predicts_everyone() {
        let cfg = small_config();
        let cohort = resolve_cohort(&cfg).unwrap();
        let run = run_training(&cfg, &cohort).unwrap();
        assert_eq!(run.predictions.len(), 60);
        assert_eq!(run.train.len() + run.validation.len(), 60);
    }
}
