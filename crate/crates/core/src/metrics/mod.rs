//! Censored-survival evaluation metrics.
//!
//! Undefined values (no cases, no comparable pairs, no uncensored patients)
//! surface as `None` or an error, never as zero.

mod auc;
mod bootstrap;
mod brier;
mod cindex;
mod km;

pub use auc::{event_probabilities, time_dependent_auc};
pub use bootstrap::{bootstrap_ci, format_ci, quantile, BootstrapInterval, MIN_RESAMPLES};
pub use brier::{brier_at, integrated_brier, IbsResult, BRIER_GRID_POINTS, DEFAULT_WEIGHT_CAP};
pub use cindex::harrell_cindex;
pub use km::{km_censoring_survival, CensoringSurvival};

use thiserror::Error;

use crate::objective::SurvivalLabel;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricError {
    #[error("no comparable pairs")]
    NoComparablePairs,
    #[error("{scores} scores for {labels} labels")]
    LengthMismatch { scores: usize, labels: usize },
    #[error("horizon {0} is out of range")]
    BadHorizon(f64),
    #[error("scores must be finite")]
    NonFiniteScore,
    #[error("metric over zero patients")]
    Empty,
    #[error("survival curves must have {0} bins")]
    CurveLength(usize),
    #[error("bootstrap needs at least 100 resamples, got {0}")]
    TooFewResamples(usize),
    #[error("confidence level {0} must lie in (0, 1)")]
    BadLevel(f64),
    #[error("{undefined} of {total} bootstrap resamples were undefined")]
    TooManyUndefined { undefined: usize, total: usize },
}

/// Mean absolute error over uncensored patients; `None` if there are none.
pub fn mae_uncensored(pred_times: &[f64], labels: &[SurvivalLabel]) -> Option<f64> {
    let errs: Vec<f64> = pred_times
        .iter()
        .zip(labels)
        .filter(|(_, l)| l.event)
        .map(|(p, l)| (p - l.time).abs())
        .collect();
    (!errs.is_empty()).then(|| errs.iter().sum::<f64>() / errs.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lab(t: f64, e: bool) -> SurvivalLabel {
        SurvivalLabel { time: t, event: e }
    }

    #[test]
    fn mae_examples() {
        assert_eq!(
            mae_uncensored(&[2.0, 3.0], &[lab(1.0, true), lab(3.0, true)]),
            Some(0.5)
        );
        assert_eq!(mae_uncensored(&[2.0, 3.0], &[lab(1.0, false), lab(3.0, false)]), None);
        assert_eq!(
            mae_uncensored(&[2.0, 99.0], &[lab(1.0, true), lab(5.0, false)]),
            Some(1.0)
        );
    }
}
