use super::MetricError;
use crate::heads::{SurvivalCurve, TimeBins};
use crate::objective::SurvivalLabel;

/// Cumulative/dynamic AUC at `horizon` from per-patient `P(event <= horizon)`.
///
/// Cases: events at or before the horizon. Controls: anyone still under
/// observation past it. Censored at or before the horizon are dropped.
/// `None` when either group is empty.
pub fn time_dependent_auc(scores: &[f64], labels: &[SurvivalLabel], horizon: f64) -> Result<Option<f64>, MetricError> {
    if scores.len() != labels.len() {
        return Err(MetricError::LengthMismatch {
            scores: scores.len(),
            labels: labels.len(),
        });
    }
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(MetricError::BadHorizon(horizon));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(MetricError::NonFiniteScore);
    }
    // (score, is_case)
    let mut pool: Vec<(f64, bool)> = Vec::new();
    for (&s, l) in scores.iter().zip(labels) {
        if l.time > horizon {
            pool.push((s, false));
        } else if l.event {
            pool.push((s, true));
        }
    }
    let cases = pool.iter().filter(|p| p.1).count();
    let controls = pool.len() - cases;
    if cases == 0 || controls == 0 {
        return Ok(None);
    }
    pool.sort_by(|a, b| a.0.total_cmp(&b.0));
    // Mann-Whitney U from mid-ranks (1-based).
    let mut case_rank_sum = 0.0;
    let mut i = 0;
    while i < pool.len() {
        let j = i + pool[i..].iter().take_while(|p| p.0 == pool[i].0).count();
        let mid = (i + 1 + j) as f64 / 2.0;
        let in_group = pool[i..j].iter().filter(|p| p.1).count();
        case_rank_sum += mid * in_group as f64;
        i = j;
    }
    let u = case_rank_sum - (cases * (cases + 1)) as f64 / 2.0;
    Ok(Some(u / (cases * controls) as f64))
}

/// `1 - S(horizon)` for each curve, read off the bin containing the horizon.
pub fn event_probabilities(curves: &[SurvivalCurve], bins: &TimeBins, horizon: f64) -> Vec<f64> {
    curves.iter().map(|c| 1.0 - c.at(bins, horizon)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lab(t: f64, e: bool) -> SurvivalLabel {
        SurvivalLabel { time: t, event: e }
    }

    #[test]
    fn hand_examples() {
        let l = [lab(1.0, true), lab(5.0, true)];
        assert_eq!(time_dependent_auc(&[0.9, 0.1], &l, 2.0).unwrap(), Some(1.0));
        assert_eq!(time_dependent_auc(&[0.4, 0.4], &l, 2.0).unwrap(), Some(0.5));
        let l = [lab(1.0, true), lab(1.5, false), lab(3.0, true)];
        assert_eq!(time_dependent_auc(&[0.8, 0.99, 0.3], &l, 2.0).unwrap(), Some(1.0));
    }

    #[test]
    fn missing_when_a_group_is_empty() {
        let l = [lab(3.0, true), lab(5.0, false)];
        assert_eq!(time_dependent_auc(&[0.5, 0.1], &l, 2.0).unwrap(), None);
        assert!(time_dependent_auc(&[0.5, 0.1], &l, 0.0).is_err());
    }
}
