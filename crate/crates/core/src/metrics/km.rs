use serde::{Deserialize, Serialize};

use crate::objective::SurvivalLabel;

/// Right-continuous step function from a Kaplan-Meier fit of the censoring
/// distribution. `values[i]` holds on `[times[i], times[i + 1])`; 1 before `times[0]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CensoringSurvival {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

impl CensoringSurvival {
    pub fn at(&self, t: f64) -> f64 {
        let k = self.times.partition_point(|&u| u <= t);
        if k == 0 {
            1.0
        } else {
            self.values[k - 1]
        }
    }

    /// `G(t-)`.
    pub fn left_limit(&self, t: f64) -> f64 {
        let k = self.times.partition_point(|&u| u < t);
        if k == 0 {
            1.0
        } else {
            self.values[k - 1]
        }
    }
}

/// Kaplan-Meier with censoring as the event of interest. Steps are recorded
/// only at times where a censoring occurs; ties share the full risk set.
pub fn km_censoring_survival(labels: &[SurvivalLabel]) -> CensoringSurvival {
    let mut sorted: Vec<&SurvivalLabel> = labels.iter().collect();
    sorted.sort_by(|a, b| a.time.total_cmp(&b.time));
    let n = sorted.len();
    let mut g = 1.0;
    let mut out = CensoringSurvival {
        times: Vec::new(),
        values: Vec::new(),
    };
    let mut i = 0;
    while i < n {
        let t = sorted[i].time;
        let tied = sorted[i..].iter().take_while(|l| l.time == t).count();
        let censored = sorted[i..i + tied].iter().filter(|l| !l.event).count();
        if censored > 0 {
            g *= 1.0 - censored as f64 / (n - i) as f64;
            out.times.push(t);
            out.values.push(g);
        }
        i += tied;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lab(t: f64, e: bool) -> SurvivalLabel {
        SurvivalLabel { time: t, event: e }
    }

    #[test]
    fn no_censoring_is_flat() {
        let g = km_censoring_survival(&[lab(1.0, true), lab(2.0, true)]);
        assert!(g.times.is_empty());
        assert_eq!(g.at(10.0), 1.0);
    }

    #[test]
    fn hand_tables() {
        let g = km_censoring_survival(&[lab(1.0, true), lab(2.0, false), lab(3.0, true)]);
        assert_eq!(g.at(1.9), 1.0);
        assert_eq!(g.at(2.0), 0.5);
        assert_eq!(g.left_limit(2.0), 1.0);
        assert_eq!(g.at(7.0), 0.5);

        let g = km_censoring_survival(&[lab(1.0, false), lab(2.0, false)]);
        assert_eq!((g.at(0.5), g.at(1.0), g.at(2.0)), (1.0, 0.5, 0.0));
    }

    #[test]
    fn tie_between_event_and_censoring_keeps_full_risk_set() {
        let g = km_censoring_survival(&[lab(1.0, true), lab(1.0, false), lab(2.0, true)]);
        assert!((g.at(1.0) - 2.0 / 3.0).abs() < 1e-15);
    }
}
