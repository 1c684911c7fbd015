//! Censored discrete-time likelihood, the two-task loss and the optimizer.

mod nll;
mod optim;

pub use nll::{combined_loss, discrete_nll, discrete_nll_on_tape, label_to_bin, LossWeights, SurvivalLabel, LOG_FLOOR};
pub use optim::{
    adamw_step, early_stop, plateau_schedule, AdamWConfig, EarlyStop, OptimizerState, StallCounter, IMPROVEMENT_TOL,
};

use thiserror::Error;

use crate::autodiff::AutodiffError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ObjectiveError {
    #[error("survival time {0} must be finite and non-negative")]
    NegativeTime(f64),
    #[error("hazard curve has {got} bins, expected {expected}")]
    BinMismatch { expected: usize, got: usize },
    #[error("loss weights alpha={alpha}, beta={beta} must be non-negative and not both zero")]
    BadWeights { alpha: f64, beta: f64 },
    #[error("batch length mismatch ({os} vs {dfs}) or empty batch")]
    BatchShape { os: usize, dfs: usize },
    #[error("gradient for {0} has the wrong shape")]
    GradientShape(String),
    #[error("non-finite gradient for parameter {0}")]
    NonFiniteGradient(String),
    #[error(transparent)]
    Autodiff(#[from] AutodiffError),
}
