use serde::{Deserialize, Serialize};

use super::ObjectiveError;
use crate::autodiff::{Tape, Tensor, Var};
use crate::heads::{HazardCurve, TimeBins};

/// Log arguments are clamped into this range.
pub const LOG_FLOOR: f64 = 1e-12;
const LOG_CEIL: f64 = 1.0 - 1e-12;

/// Observed time in years and whether the event was seen (`false` = censored).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurvivalLabel {
    pub time: f64,
    pub event: bool,
}

impl SurvivalLabel {
    pub fn new(time: f64, event: bool) -> Result<Self, ObjectiveError> {
        if !(time >= 0.0 && time.is_finite()) {
            return Err(ObjectiveError::NegativeTime(time));
        }
        Ok(Self { time, event })
    }

    pub fn event(time: f64) -> Self {
        Self { time, event: true }
    }

    pub fn censored(time: f64) -> Self {
        Self { time, event: false }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossWeights {
    pub alpha: f64,
    pub beta: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self { alpha: 1.0, beta: 1.0 }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<(), ObjectiveError> {
        let ok = |v: f64| v >= 0.0 && v.is_finite();
        if ok(self.alpha) && ok(self.beta) && self.alpha + self.beta > 0.0 {
            Ok(())
        } else {
            Err(ObjectiveError::BadWeights {
                alpha: self.alpha,
                beta: self.beta,
            })
        }
    }
}

pub fn label_to_bin(time: f64, bins: &TimeBins) -> Result<usize, ObjectiveError> {
    bins.bin_of(time).map_err(|_| ObjectiveError::NegativeTime(time))
}

/// `(event mask, survival mask)` over the `K` bins for `label`.
fn masks(label: &SurvivalLabel, bins: &TimeBins) -> Result<(Vec<f64>, Vec<f64>), ObjectiveError> {
    let k = label_to_bin(label.time, bins)?;
    let n = bins.count();
    let mut event = vec![0.0; n];
    let mut survive = vec![0.0; n];
    if label.event {
        event[k] = 1.0;
        survive[..k].fill(1.0);
    } else {
        survive[..=k].fill(1.0);
    }
    Ok((event, survive))
}

/// Negative log-likelihood of one label under per-bin hazards.
pub fn discrete_nll(h: &HazardCurve, label: &SurvivalLabel, bins: &TimeBins) -> Result<f64, ObjectiveError> {
    if h.0.len() != bins.count() {
        return Err(ObjectiveError::BinMismatch {
            expected: bins.count(),
            got: h.0.len(),
        });
    }
    let (event, survive) = masks(label, bins)?;
    let mut ll = 0.0;
    for (j, &hj) in h.0.iter().enumerate() {
        let hj = hj.clamp(LOG_FLOOR, LOG_CEIL);
        if event[j] > 0.0 {
            ll += hj.ln();
        }
        if survive[j] > 0.0 {
            ll += (1.0 - hj).ln();
        }
    }
    Ok(-ll)
}

/// Tape version of [`discrete_nll`] taking `1 x K` logits.
///
/// `1 - h` is evaluated as `sigmoid(-logit)` to keep precision in the tail.
pub fn discrete_nll_on_tape(
    tape: &mut Tape,
    logits: Var,
    label: &SurvivalLabel,
    bins: &TimeBins,
) -> Result<Var, ObjectiveError> {
    let (_, k) = tape.shape(logits);
    if k != bins.count() {
        return Err(ObjectiveError::BinMismatch {
            expected: bins.count(),
            got: k,
        });
    }
    let (event, survive) = masks(label, bins)?;
    let h = tape.sigmoid(logits)?;
    let h = tape.clamp(h, LOG_FLOOR, LOG_CEIL)?;
    let log_h = tape.log(h)?;
    let flipped = tape.neg(logits)?;
    let s = tape.sigmoid(flipped)?;
    let s = tape.clamp(s, LOG_FLOOR, LOG_CEIL)?;
    let log_s = tape.log(s)?;
    let em = tape.constant(Tensor::row_vector(event));
    let sm = tape.constant(Tensor::row_vector(survive));
    let a = tape.mul(log_h, em)?;
    let b = tape.mul(log_s, sm)?;
    let ll = tape.add(a, b)?;
    let ll = tape.sum_all(ll)?;
    Ok(tape.neg(ll)?)
}

/// Mean over patients of `alpha * os + beta * dfs`.
pub fn combined_loss(os_nll: &[f64], dfs_nll: &[f64], w: &LossWeights) -> Result<f64, ObjectiveError> {
    if os_nll.len() != dfs_nll.len() || os_nll.is_empty() {
        return Err(ObjectiveError::BatchShape {
            os: os_nll.len(),
            dfs: dfs_nll.len(),
        });
    }
    let total: f64 = os_nll.iter().zip(dfs_nll).map(|(o, d)| w.alpha * o + w.beta * d).sum();
    Ok(total / os_nll.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::heads::hazards_from_logits;

    fn annual() -> TimeBins {
        TimeBins::annual(12)
    }

    #[test]
    fn label_bins() {
        assert_eq!(label_to_bin(0.5, &annual()).unwrap(), 0);
        assert_eq!(label_to_bin(1.0, &annual()).unwrap(), 1);
        assert_eq!(label_to_bin(99.0, &annual()).unwrap(), 11);
        assert!(label_to_bin(-1.0, &annual()).is_err());
    }

    #[test]
    #[allow(clippy::approx_constant)]
    fn hand_examples() {
        let bins = TimeBins::annual(2);
        let half = HazardCurve(vec![0.5, 0.5]);
        let a = discrete_nll(&half, &SurvivalLabel::event(0.3), &bins).unwrap();
        let b = discrete_nll(&half, &SurvivalLabel::censored(0.3), &bins).unwrap();
        let c = discrete_nll(&HazardCurve(vec![0.2, 0.5]), &SurvivalLabel::event(1.5), &bins).unwrap();
        assert!((a - 0.6931).abs() < 1e-4);
        assert!((b - 0.6931).abs() < 1e-4);
        assert!((c - 0.9163).abs() < 1e-4);
        assert!((c + (0.8f64.ln() + 0.5f64.ln())).abs() < 1e-15);
    }

    #[test]
    fn censoring_counts_own_bin_as_survived() {
        let bins = TimeBins::annual(3);
        let h = HazardCurve(vec![0.1, 0.2, 0.3]);
        let v = discrete_nll(&h, &SurvivalLabel::censored(1.2), &bins).unwrap();
        assert!((v + 0.9f64.ln() + 0.8f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn extreme_hazards_stay_finite() {
        let bins = TimeBins::annual(2);
        let v = discrete_nll(&HazardCurve(vec![1.0, 0.0]), &SurvivalLabel::event(1.5), &bins).unwrap();
        assert!(v.is_finite() && v > 50.0);
    }

    #[test]
    fn tape_matches_values() {
        let bins = TimeBins::annual(4);
        let logits = [0.3, -1.2, 2.0, 0.1];
        let h = hazards_from_logits(&logits);
        for label in [
            SurvivalLabel::event(0.0),
            SurvivalLabel::event(2.5),
            SurvivalLabel::censored(3.9),
            SurvivalLabel::censored(40.0),
        ] {
            let mut tape = Tape::new();
            let l = tape.constant(Tensor::row_vector(logits.to_vec()));
            let v = discrete_nll_on_tape(&mut tape, l, &label, &bins).unwrap();
            let expect = discrete_nll(&h, &label, &bins).unwrap();
            assert!((tape.value(v).item().unwrap() - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn gradient_pushes_event_bin_up_and_earlier_bins_down() {
        let bins = TimeBins::annual(4);
        let mut tape = Tape::new();
        let l = tape.leaf(Tensor::row_vector(vec![0.0; 4]));
        let v = discrete_nll_on_tape(&mut tape, l, &SurvivalLabel::event(2.2), &bins).unwrap();
        let g = tape.backward(v).unwrap();
        let g = g.get(l).unwrap().data().to_vec();
        assert!(g[0] > 0.0 && g[1] > 0.0);
        assert!(g[2] < 0.0);
        assert_eq!(g[3], 0.0);
    }

    #[test]
    fn combined_examples() {
        let w = |alpha, beta| LossWeights { alpha, beta };
        assert_eq!(combined_loss(&[0.5], &[0.3], &w(1.0, 0.0)).unwrap(), 0.5);
        assert!((combined_loss(&[0.5], &[0.3], &w(1.0, 1.0)).unwrap() - 0.8).abs() < 1e-15);
        assert!((combined_loss(&[0.5], &[0.3], &w(2.0, 1.0)).unwrap() - 1.3).abs() < 1e-15);
        assert!(w(0.0, 0.0).validate().is_err());
        assert!(w(-1.0, 1.0).validate().is_err());
    }
}
