use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{Cohort, PatientRecord, RegionRecord};
use crate::graph::{FeatureSchema, NodeKind};
use crate::objective::SurvivalLabel;

/// Two latent risk groups with geometric per-bin hazards on annual bins.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulationScenario {
    pub n: usize,
    /// Scale of the group means relative to unit feature noise.
    pub signal: f64,
    /// Expected fraction of OS-censored patients.
    pub censoring_rate: f64,
    /// High-risk to low-risk ratio of per-bin event probabilities.
    pub hazard_ratio: f64,
    /// Per-bin death probability of the low-risk group.
    pub os_hazard: f64,
    /// Per-bin recurrence probability of the low-risk group.
    pub recurrence_hazard: f64,
    pub region_len: usize,
    pub clinical_len: usize,
    /// Probability that the remnant region is missing.
    pub remnant_missing: f64,
}

impl Default for SimulationScenario {
    fn default() -> Self {
        Self {
            n: 400,
            signal: 0.5,
            censoring_rate: 0.3,
            hazard_ratio: 3.0,
            os_hazard: 0.2,
            recurrence_hazard: 0.1,
            region_len: 4,
            clinical_len: 4,
            remnant_missing: 0.1,
        }
    }
}

const MAX_HAZARD: f64 = 0.95;

const BASE_CENTROIDS: [[f64; 3]; 5] = [
    [0.1, 0.0, 0.0],
    [0.3, 0.2, -0.1],
    [-0.2, 0.3, 0.1],
    [0.0, -0.3, 0.2],
    [0.2, 0.1, 0.3],
];

impl SimulationScenario {
    /// `(os, recurrence)` per-bin probabilities for `group` (1 = high risk).
    pub fn group_hazards(&self, group: u8) -> (f64, f64) {
        let scale = if group == 1 { self.hazard_ratio } else { 1.0 };
        (
            (self.os_hazard * scale).min(MAX_HAZARD),
            (self.recurrence_hazard * scale).min(MAX_HAZARD),
        )
    }

    /// Per-bin DFS hazard: either recurrence or death.
    pub fn dfs_hazard(&self, group: u8) -> f64 {
        let (d, r) = self.group_hazards(group);
        1.0 - (1.0 - d) * (1.0 - r)
    }

    /// Expected OS-censoring fraction under `U(0, c_max)` censoring.
    fn expected_censoring(&self, c_max: f64) -> f64 {
        let mut total = 0.0;
        for g in [0u8, 1] {
            let h = self.group_hazards(g).0;
            let mut surv = 1.0;
            for k in 0..10_000 {
                let p = surv * h;
                total += 0.5 * p * ((k as f64 + 0.5) / c_max).min(1.0);
                surv *= 1.0 - h;
                if surv < 1e-17 {
                    break;
                }
            }
        }
        total
    }

    /// Upper end of the uniform censoring distribution; `None` means no censoring.
    pub fn censoring_horizon(&self) -> Option<f64> {
        if self.censoring_rate <= 0.0 {
            return None;
        }
        let (mut lo, mut hi) = (1e-6f64.ln(), 1e6f64.ln());
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if self.expected_censoring(mid.exp()) > self.censoring_rate {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Some((0.5 * (lo + hi)).exp())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimulatedCohort {
    pub cohort: Cohort,
    /// Latent group per patient (1 = high risk).
    pub groups: Vec<u8>,
    pub scenario: SimulationScenario,
}

fn sign(a: usize, b: usize) -> f64 {
    if (a + b).is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

/// Bin midpoint of the first success of per-bin probability `h`.
fn geometric_time(rng: &mut ChaCha8Rng, h: f64) -> f64 {
    let mut k = 0u32;
    while rng.random::<f64>() >= h {
        k += 1;
    }
    k as f64 + 0.5
}

pub fn simulate_cohort(scenario: &SimulationScenario, seed: u64) -> SimulatedCohort {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let jitter = Normal::new(0.0, 0.05).expect("valid sd");
    let c_max = scenario.censoring_horizon();
    let schema = FeatureSchema {
        region_len: scenario.region_len,
        clinical_len: scenario.clinical_len,
    };
    let mut groups = Vec::with_capacity(scenario.n);
    let mut patients = Vec::with_capacity(scenario.n);
    for i in 0..scenario.n {
        let group = u8::from(rng.random_bool(0.5));
        let mean = if group == 1 { scenario.signal } else { -scenario.signal };
        let mut regions = BTreeMap::new();
        for (r, kind) in NodeKind::ANATOMICAL.into_iter().enumerate() {
            let missing = kind == NodeKind::FutureLiverRemnant && rng.random_bool(scenario.remnant_missing);
            let features: Vec<f64> = (0..scenario.region_len)
                .map(|j| mean * sign(r, j) + rng.sample::<f64, _>(StandardNormal))
                .collect();
            let centroid = BASE_CENTROIDS[r].map(|c| (c + jitter.sample(&mut rng)).clamp(-1.0, 1.0));
            regions.insert(
                kind,
                if missing {
                    RegionRecord {
                        present: false,
                        features: Vec::new(),
                        centroid: None,
                    }
                } else {
                    RegionRecord {
                        present: true,
                        features,
                        centroid: Some(centroid),
                    }
                },
            );
        }
        let clinical: Vec<f64> = (0..scenario.clinical_len)
            .map(|j| mean * sign(j, 1) + rng.sample::<f64, _>(StandardNormal))
            .collect();

        let (h_death, h_rec) = scenario.group_hazards(group);
        let death = geometric_time(&mut rng, h_death);
        let recurrence = geometric_time(&mut rng, h_rec);
        let progression = death.min(recurrence);
        let censor = c_max.map_or(f64::INFINITY, |c| rng.random_range(0.0..c));
        let os = SurvivalLabel {
            time: death.min(censor),
            event: death <= censor,
        };
        let dfs = SurvivalLabel {
            time: progression.min(censor),
            event: progression <= censor,
        };
        groups.push(group);
        patients.push(PatientRecord {
            id: format!("sim-{i:04}"),
            regions,
            clinical,
            dfs,
            os,
        });
    }
    normalize_clinical(&mut patients, scenario.clinical_len);
    SimulatedCohort {
        cohort: Cohort { schema, patients },
        groups,
        scenario: *scenario,
    }
}

/// Column-wise min-max scaling into `[0, 1]`.
fn normalize_clinical(patients: &mut [PatientRecord], len: usize) {
    for j in 0..len {
        let (lo, hi) = patients.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
            (lo.min(p.clinical[j]), hi.max(p.clinical[j]))
        });
        for p in patients.iter_mut() {
            p.clinical[j] = if hi > lo { (p.clinical[j] - lo) / (hi - lo) } else { 0.0 };
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleCindex {
    pub os: f64,
    pub dfs: f64,
}

fn pairwise_cindex(risk: &[f64], labels: &[SurvivalLabel]) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for i in 0..labels.len() {
        for j in 0..labels.len() {
            if labels[i].event && labels[i].time < labels[j].time {
                den += 1.0;
                if risk[i] > risk[j] {
                    num += 1.0;
                } else if risk[i] == risk[j] {
                    num += 0.5;
                }
            }
        }
    }
    if den > 0.0 {
        num / den
    } else {
        0.5
    }
}

/// Concordance of the realized labels with the true group hazards, by pair
/// enumeration.
pub fn oracle_cindex(sim: &SimulatedCohort) -> OracleCindex {
    let p = &sim.cohort.patients;
    let os_risk: Vec<f64> = sim.groups.iter().map(|&g| sim.scenario.group_hazards(g).0).collect();
    let dfs_risk: Vec<f64> = sim.groups.iter().map(|&g| sim.scenario.dfs_hazard(g)).collect();
    let os: Vec<SurvivalLabel> = p.iter().map(|r| r.os).collect();
    let dfs: Vec<SurvivalLabel> = p.iter().map(|r| r.dfs).collect();
    OracleCindex {
        os: pairwise_cindex(&os_risk, &os),
        dfs: pairwise_cindex(&dfs_risk, &dfs),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dfs_never_exceeds_os_and_records_validate() {
        let sim = simulate_cohort(&SimulationScenario::default(), 3);
        assert_eq!(sim.cohort.patients.len(), 400);
        for p in &sim.cohort.patients {
            assert!(p.dfs.time <= p.os.time);
            p.validate(&sim.cohort.schema).unwrap();
        }
    }

    #[test]
    fn censoring_rate_is_met_in_expectation() {
        for rate in [0.1, 0.3, 0.6] {
            let scenario = SimulationScenario {
                n: 10_000,
                censoring_rate: rate,
                ..SimulationScenario::default()
            };
            let sim = simulate_cohort(&scenario, 17);
            let censored = sim.cohort.patients.iter().filter(|p| !p.os.event).count();
            let frac = censored as f64 / 10_000.0;
            assert!((frac - rate).abs() <= 0.03, "rate {rate}: got {frac}");
        }
    }

    #[test]
    fn zero_censoring() {
        let scenario = SimulationScenario {
            censoring_rate: 0.0,
            n: 50,
            ..SimulationScenario::default()
        };
        let sim = simulate_cohort(&scenario, 1);
        assert!(sim.cohort.patients.iter().all(|p| p.os.event && p.dfs.event));
    }

    #[test]
    fn unit_ratio_oracle_is_chance() {
        let scenario = SimulationScenario {
            hazard_ratio: 1.0,
            ..SimulationScenario::default()
        };
        let o = oracle_cindex(&simulate_cohort(&scenario, 5));
        assert_eq!((o.os, o.dfs), (0.5, 0.5));
    }

    #[test]
    fn default_oracle_is_informative() {
        let o = oracle_cindex(&simulate_cohort(&SimulationScenario::default(), 5));
        assert!(o.os > 0.6 && o.dfs > 0.6, "{o:?}");
    }

    #[test]
    fn zero_signal_features_ignore_group() {
        let scenario = SimulationScenario {
            signal: 0.0,
            n: 4000,
            ..SimulationScenario::default()
        };
        let sim = simulate_cohort(&scenario, 8);
        let mean_for = |g: u8| {
            let xs: Vec<f64> = sim
                .cohort
                .patients
                .iter()
                .zip(&sim.groups)
                .filter(|(_, &gg)| gg == g)
                .map(|(p, _)| p.regions[&NodeKind::LiverParenchyma].features[0])
                .collect();
            xs.iter().sum::<f64>() / xs.len() as f64
        };
        assert!((mean_for(0) - mean_for(1)).abs() < 0.1);
    }

    #[test]
    fn deterministic_per_seed() {
        let s = SimulationScenario {
            n: 20,
            ..SimulationScenario::default()
        };
        assert_eq!(simulate_cohort(&s, 9), simulate_cohort(&s, 9));
        assert_ne!(simulate_cohort(&s, 9), simulate_cohort(&s, 10));
    }
}
