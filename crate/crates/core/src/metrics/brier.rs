use serde::{Deserialize, Serialize};

use super::km::{km_censoring_survival, CensoringSurvival};
use super::MetricError;
use crate::heads::{SurvivalCurve, TimeBins};
use crate::objective::SurvivalLabel;

pub const DEFAULT_WEIGHT_CAP: f64 = 100.0;
pub const BRIER_GRID_POINTS: usize = 100;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IbsResult {
    pub ibs: f64,
    /// Number of IPCW weights that hit the cap.
    pub capped_weights: usize,
}

fn weight(g: f64, cap: f64, capped: &mut usize) -> f64 {
    if g <= 0.0 || 1.0 / g > cap {
        *capped += 1;
        cap
    } else {
        1.0 / g
    }
}

/// IPCW Brier score at `t`.
pub fn brier_at(
    curves: &[SurvivalCurve],
    labels: &[SurvivalLabel],
    bins: &TimeBins,
    g: &CensoringSurvival,
    t: f64,
    cap: f64,
    capped: &mut usize,
) -> f64 {
    let mut sum = 0.0;
    for (c, l) in curves.iter().zip(labels) {
        let s = c.at(bins, t);
        if l.time <= t && l.event {
            sum += s * s * weight(g.left_limit(l.time), cap, capped);
        } else if l.time > t {
            sum += (1.0 - s) * (1.0 - s) * weight(g.at(t), cap, capped);
        }
    }
    sum / curves.len() as f64
}

/// Time-averaged IPCW Brier score over `[0, tau]` by the trapezoid rule on a
/// uniform grid.
pub fn integrated_brier(
    curves: &[SurvivalCurve],
    labels: &[SurvivalLabel],
    bins: &TimeBins,
    tau: f64,
    cap: f64,
) -> Result<IbsResult, MetricError> {
    if curves.len() != labels.len() {
        return Err(MetricError::LengthMismatch {
            scores: curves.len(),
            labels: labels.len(),
        });
    }
    if curves.is_empty() {
        return Err(MetricError::Empty);
    }
    if !(tau > 0.0 && tau <= bins.last_edge()) {
        return Err(MetricError::BadHorizon(tau));
    }
    if curves.iter().any(|c| c.0.len() != bins.count()) {
        return Err(MetricError::CurveLength(bins.count()));
    }
    let g = km_censoring_survival(labels);
    let mut capped = 0;
    let step = tau / (BRIER_GRID_POINTS - 1) as f64;
    let values: Vec<f64> = (0..BRIER_GRID_POINTS)
        .map(|m| brier_at(curves, labels, bins, &g, m as f64 * step, cap, &mut capped))
        .collect();
    let area: f64 = values.windows(2).map(|w| 0.5 * (w[0] + w[1]) * step).sum();
    Ok(IbsResult {
        ibs: area / tau,
        capped_weights: capped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lab(t: f64, e: bool) -> SurvivalLabel {
        SurvivalLabel { time: t, event: e }
    }

    #[test]
    fn perfect_oracle_scores_zero() {
        let bins = TimeBins::annual(6);
        let labels = [lab(2.0, true), lab(4.0, true), lab(1.0, true)];
        let curves: Vec<SurvivalCurve> = labels
            .iter()
            .map(|l| {
                let k = bins.bin_of(l.time).unwrap();
                SurvivalCurve((0..6).map(|j| if j < k { 1.0 } else { 0.0 }).collect())
            })
            .collect();
        let r = integrated_brier(&curves, &labels, &bins, 5.0, DEFAULT_WEIGHT_CAP).unwrap();
        assert_eq!(r.ibs, 0.0);
    }

    #[test]
    fn constant_half_gives_quarter() {
        let bins = TimeBins::annual(4);
        let r = integrated_brier(
            &[SurvivalCurve(vec![0.5; 4])],
            &[lab(2.0, true)],
            &bins,
            4.0,
            DEFAULT_WEIGHT_CAP,
        )
        .unwrap();
        assert!((r.ibs - 0.25).abs() < 1e-15);
    }

    #[test]
    fn large_weights_are_capped() {
        let bins = TimeBins::annual(4);
        // G(3-) = 1/3 so the event weight is 3.
        let labels = [lab(1.0, false), lab(2.0, false), lab(3.0, true)];
        let curves = vec![SurvivalCurve(vec![0.9, 0.8, 0.7, 0.6]); 3];
        let free = integrated_brier(&curves, &labels, &bins, 4.0, DEFAULT_WEIGHT_CAP).unwrap();
        assert_eq!(free.capped_weights, 0);
        let r = integrated_brier(&curves, &labels, &bins, 4.0, 1.5).unwrap();
        assert!(r.capped_weights > 0);
        assert!(r.ibs < free.ibs);
    }

    #[test]
    fn rejects_tau_past_last_edge() {
        let bins = TimeBins::annual(2);
        let r = integrated_brier(&[SurvivalCurve(vec![0.5, 0.4])], &[lab(1.0, true)], &bins, 3.0, 100.0);
        assert!(r.is_err());
    }
}
