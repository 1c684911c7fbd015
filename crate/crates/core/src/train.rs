//! Mini-batch training with augmentation, plateau decay and early stopping.

use std::io::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::autodiff::{Tape, Tensor};
use crate::cohort::{augment, AugmentConfig};
use crate::graph::PatientGraph;
use crate::init::derive_seed;
use crate::model::{DyPro, ModelError};
use crate::objective::{
    adamw_step, early_stop, plateau_schedule, AdamWConfig, EarlyStop, LossWeights, ObjectiveError, OptimizerState,
    SurvivalLabel,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub lr: f64,
    pub batch_size: usize,
    pub alpha: f64,
    pub beta: f64,
    pub max_epochs: usize,
    /// Early-stopping patience in epochs.
    pub patience: usize,
    pub scheduler_factor: f64,
    pub scheduler_patience: usize,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub augment: bool,
    pub augmentation: AugmentConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        let adam = AdamWConfig::default();
        Self {
            lr: 1e-3,
            batch_size: 64,
            alpha: 1.0,
            beta: 1.0,
            max_epochs: 500,
            patience: 20,
            scheduler_factor: 0.5,
            scheduler_patience: 5,
            weight_decay: adam.weight_decay,
            beta1: adam.beta1,
            beta2: adam.beta2,
            eps: adam.eps,
            augment: true,
            augmentation: AugmentConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn weights(&self) -> LossWeights {
        LossWeights {
            alpha: self.alpha,
            beta: self.beta,
        }
    }

    pub fn adamw(&self) -> AdamWConfig {
        AdamWConfig {
            lr: self.lr,
            beta1: self.beta1,
            beta2: self.beta2,
            eps: self.eps,
            weight_decay: self.weight_decay,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        self.weights().validate().map_err(|e| e.to_string())?;
        let checks = [
            (self.lr > 0.0 && self.lr.is_finite(), "lr must be positive"),
            (self.batch_size >= 1, "batch_size must be at least 1"),
            (self.max_epochs >= 1, "max_epochs must be at least 1"),
            (self.patience >= 1, "patience must be at least 1"),
            (
                self.scheduler_factor > 0.0 && self.scheduler_factor < 1.0,
                "scheduler_factor must lie in (0, 1)",
            ),
            (self.scheduler_patience >= 1, "scheduler_patience must be at least 1"),
            (self.weight_decay >= 0.0, "weight_decay must be non-negative"),
            ((0.0..1.0).contains(&self.beta1), "beta1 must lie in [0, 1)"),
            ((0.0..1.0).contains(&self.beta2), "beta2 must lie in [0, 1)"),
            (self.eps > 0.0, "eps must be positive"),
            (
                (0.0..=1.0).contains(&self.augmentation.dropout),
                "augmentation.dropout must lie in [0, 1]",
            ),
            (
                self.augmentation.noise_sd >= 0.0,
                "augmentation.noise_sd must be non-negative",
            ),
        ];
        match checks.into_iter().find(|(ok, _)| !ok) {
            Some((_, msg)) => Err(msg.to_string()),
            None => Ok(()),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub graph: PatientGraph,
    pub os: SurvivalLabel,
    pub dfs: SurvivalLabel,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub lr: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainOutcome {
    pub best_epoch: usize,
    pub best_val_loss: f64,
    pub history: Vec<EpochLog>,
}

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("empty training set")]
    NoData,
    #[error("non-finite loss in epoch {epoch}")]
    NonFiniteLoss { epoch: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Objective(#[from] ObjectiveError),
    #[error("writing training log: {0}")]
    Log(#[from] std::io::Error),
}

/// One training-log line.
pub fn format_epoch(e: &EpochLog) -> String {
    format!(
        "epoch {} train_loss {:.6} val_loss {:.6} lr {:.6e}",
        e.epoch, e.train_loss, e.val_loss, e.lr
    )
}

/// Loss and (optionally) summed parameter gradients of one sample.
fn sample_pass(
    model: &DyPro,
    sample: &Sample,
    weights: &LossWeights,
    grads: Option<&mut [Tensor]>,
) -> Result<f64, ModelError> {
    let mut tape = Tape::new();
    let bound = model.params.bind(&mut tape);
    let loss = model.patient_loss(&mut tape, &bound, &sample.graph, &sample.os, &sample.dfs, weights)?;
    let value = tape.value(loss).item().expect("scalar loss");
    if let Some(acc) = grads {
        let mut g = tape.backward(loss)?;
        for (a, t) in acc.iter_mut().zip(model.params.collect_gradients(&bound, &mut g)) {
            a.add_assign(&t);
        }
    }
    Ok(value)
}

/// Mean per-patient combined loss with no gradient.
pub fn evaluate_loss(model: &DyPro, samples: &[Sample], weights: &LossWeights) -> Result<f64, ModelError> {
    let mut total = 0.0;
    for s in samples {
        total += sample_pass(model, s, weights, None)?;
    }
    Ok(total / samples.len().max(1) as f64)
}

/// Trains in place and restores the parameters of the best validation epoch.
/// Validation falls back to the training loss when `val` is empty.
pub fn train(
    model: &mut DyPro,
    train_set: &[Sample],
    val_set: &[Sample],
    cfg: &TrainConfig,
    seed: u64,
    mut log: Option<&mut dyn Write>,
) -> Result<TrainOutcome, TrainError> {
    if train_set.is_empty() {
        return Err(TrainError::NoData);
    }
    let weights = cfg.weights();
    let hyper = cfg.adamw();
    let mut state = OptimizerState::new(&model.params, cfg.lr);
    let mut best = model.params.clone();
    let mut outcome = TrainOutcome {
        best_epoch: 0,
        best_val_loss: f64::INFINITY,
        history: Vec::new(),
    };

    for epoch in 1..=cfg.max_epochs {
        let epoch_seed = derive_seed(seed, epoch as u64);
        let expanded: Vec<Sample> = if cfg.augment {
            train_set
                .iter()
                .enumerate()
                .flat_map(|(i, s)| {
                    augment(&s.graph, derive_seed(epoch_seed, i as u64), &cfg.augmentation)
                        .into_iter()
                        .map(|graph| Sample {
                            graph,
                            os: s.os,
                            dfs: s.dfs,
                        })
                })
                .collect()
        } else {
            train_set.to_vec()
        };
        let mut order: Vec<usize> = (0..expanded.len()).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(derive_seed(epoch_seed, u64::MAX)));

        let mut train_total = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let mut acc: Vec<Tensor> = model
                .params
                .values()
                .iter()
                .map(|t| Tensor::zeros(t.rows(), t.cols()))
                .collect();
            for &i in batch {
                let loss = sample_pass(model, &expanded[i], &weights, Some(&mut acc))?;
                if !loss.is_finite() {
                    return Err(TrainError::NonFiniteLoss { epoch });
                }
                train_total += loss;
            }
            let scale = 1.0 / batch.len() as f64;
            for a in &mut acc {
                a.data_mut().iter_mut().for_each(|v| *v *= scale);
            }
            adamw_step(&mut model.params, &acc, &mut state, &hyper)?;
        }
        let train_loss = train_total / expanded.len() as f64;
        let val_loss = if val_set.is_empty() {
            train_loss
        } else {
            evaluate_loss(model, val_set, &weights)?
        };
        if !val_loss.is_finite() {
            return Err(TrainError::NonFiniteLoss { epoch });
        }
        let entry = EpochLog {
            epoch,
            train_loss,
            val_loss,
            lr: state.lr,
        };
        if let Some(w) = log.as_deref_mut() {
            writeln!(w, "{}", format_epoch(&entry))?;
        }
        outcome.history.push(entry);
        plateau_schedule(&mut state, val_loss, cfg.scheduler_factor, cfg.scheduler_patience);
        let decision = early_stop(&mut state, val_loss, cfg.patience);
        if let EarlyStop::Continue { improved: true } = decision {
            best = model.params.clone();
            outcome.best_epoch = epoch;
            outcome.best_val_loss = val_loss;
        }
        if decision == EarlyStop::Stop {
            break;
        }
    }
    model.params = best;
    Ok(outcome)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cohort::{simulate_cohort, SimulationScenario};
    use crate::heads::TimeBins;
    use crate::model::ModelConfig;

    fn samples(n: usize, seed: u64) -> (crate::graph::FeatureSchema, Vec<Sample>) {
        let sim = simulate_cohort(
            &SimulationScenario {
                n,
                ..SimulationScenario::default()
            },
            seed,
        );
        let graphs = sim.cohort.graphs().unwrap();
        let s = sim
            .cohort
            .patients
            .iter()
            .zip(graphs)
            .map(|(p, graph)| Sample {
                graph,
                os: p.os,
                dfs: p.dfs,
            })
            .collect();
        (sim.cohort.schema, s)
    }

    fn tiny() -> ModelConfig {
        ModelConfig {
            latent: 6,
            time_width: 3,
            hidden: 6,
            context: 3,
            horizon: 3,
            bins: TimeBins::annual(6),
            ..ModelConfig::default()
        }
    }

    #[test]
    fn loss_decreases_on_training_data() {
        let (schema, data) = samples(40, 1);
        let mut model = DyPro::new(tiny(), schema, 2).unwrap();
        let w = LossWeights::default();
        let before = evaluate_loss(&model, &data, &w).unwrap();
        let cfg = TrainConfig {
            lr: 1e-2,
            max_epochs: 15,
            batch_size: 16,
            augment: false,
            ..TrainConfig::default()
        };
        let out = train(&mut model, &data, &[], &cfg, 3, None).unwrap();
        let after = evaluate_loss(&model, &data, &w).unwrap();
        assert!(after < before, "{before} -> {after}");
        assert!(out.best_epoch >= 1);
    }

    #[test]
    fn deterministic_and_logged() {
        let (schema, data) = samples(20, 4);
        let cfg = TrainConfig {
            max_epochs: 3,
            batch_size: 8,
            ..TrainConfig::default()
        };
        let run = || {
            let mut model = DyPro::new(tiny(), schema, 2).unwrap();
            let mut log = Vec::new();
            train(&mut model, &data[..15], &data[15..], &cfg, 9, Some(&mut log)).unwrap();
            (model.params, String::from_utf8(log).unwrap())
        };
        let (a, log_a) = run();
        let (b, log_b) = run();
        assert_eq!(a, b);
        assert_eq!(log_a, log_b);
        assert_eq!(log_a.lines().count(), 3);
        assert!(log_a.starts_with("epoch 1 train_loss "));
    }

    #[test]
    fn batch_loss_is_mean_of_patient_losses() {
        let (schema, data) = samples(6, 5);
        let model = DyPro::new(tiny(), schema, 2).unwrap();
        let w = LossWeights { alpha: 2.0, beta: 0.5 };
        let per: Vec<f64> = data
            .iter()
            .map(|s| evaluate_loss(&model, std::slice::from_ref(s), &w).unwrap())
            .collect();
        let mean = per.iter().sum::<f64>() / per.len() as f64;
        assert!((evaluate_loss(&model, &data, &w).unwrap() - mean).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_config() {
        let cfg = TrainConfig {
            scheduler_factor: 1.5,
            ..TrainConfig::default()
        };
        assert!(cfg.validate().is_err());
        assert!(TrainConfig::default().validate().is_ok());
    }
}
