use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::CohortError;
use crate::init::derive_seed;
use crate::objective::SurvivalLabel;

/// Share of non-test patients held out for validation is `1 / INNER_BUCKETS`.
const INNER_BUCKETS: usize = 5;

/// Indices into the cohort for one held-out fold.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fold {
    pub repeat: usize,
    pub fold: usize,
    pub test: Vec<usize>,
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub k: usize,
    pub repeats: usize,
    pub folds: Vec<Fold>,
}

/// Groups `members` by joint (OS event, DFS event); sparse cells fall back to
/// their OS-event parent, and a still-sparse parent to one shared stratum.
/// Strata are ordered so that all OS-event patients are dealt contiguously.
fn strata(members: &[usize], labels: &[(SurvivalLabel, SurvivalLabel)], k: usize) -> Vec<Vec<usize>> {
    let cell = |i: usize| (labels[i].0.event, labels[i].1.event);
    let mut out: Vec<Vec<usize>> = Vec::new();
    let mut leftovers: Vec<usize> = Vec::new();
    for os in [true, false] {
        let mut parent: Vec<usize> = Vec::new();
        for dfs in [true, false] {
            let members: Vec<usize> = members.iter().copied().filter(|&i| cell(i) == (os, dfs)).collect();
            if members.len() >= k {
                out.push(members);
            } else {
                parent.extend(members);
            }
        }
        if parent.len() >= k {
            out.push(parent);
        } else {
            leftovers.extend(parent);
        }
    }
    if !leftovers.is_empty() {
        out.push(leftovers);
    }
    out
}

/// Shuffles each stratum and deals its members to `buckets` with one pointer
/// that carries over between strata.
fn deal(
    members: &[usize],
    labels: &[(SurvivalLabel, SurvivalLabel)],
    buckets: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new(); buckets];
    let mut ptr = 0;
    for mut s in strata(members, labels, buckets) {
        s.shuffle(rng);
        for i in s {
            out[ptr % buckets].push(i);
            ptr += 1;
        }
    }
    for b in &mut out {
        b.sort_unstable();
    }
    out
}

/// Repeated stratified k-fold over `(os, dfs)` labels with a stratified
/// inner train/validation split of every training portion.
pub fn stratified_repeated_kfold(
    labels: &[(SurvivalLabel, SurvivalLabel)],
    k: usize,
    repeats: usize,
    seed: u64,
) -> Result<SplitPlan, CohortError> {
    if k < 2 || repeats == 0 {
        return Err(CohortError::Split(format!("k={k}, repeats={repeats}")));
    }
    let n = labels.len();
    if n < k {
        return Err(CohortError::TooSmall { n, k });
    }
    let all: Vec<usize> = (0..n).collect();
    let mut folds = Vec::with_capacity(k * repeats);
    for repeat in 0..repeats {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, repeat as u64));
        let outer = deal(&all, labels, k, &mut rng);
        for (f, test) in outer.iter().enumerate() {
            let rest: Vec<usize> = outer
                .iter()
                .enumerate()
                .filter(|&(g, _)| g != f)
                .flat_map(|(_, b)| b.iter().copied())
                .collect();
            let (train, validation) = if rest.len() >= INNER_BUCKETS {
                let mut inner = deal(&rest, labels, INNER_BUCKETS, &mut rng);
                let validation = std::mem::take(&mut inner[0]);
                let mut train: Vec<usize> = inner.into_iter().flatten().collect();
                train.sort_unstable();
                (train, validation)
            } else {
                let mut rest = rest;
                rest.sort_unstable();
                (rest, Vec::new())
            };
            folds.push(Fold {
                repeat,
                fold: f,
                test: test.clone(),
                train,
                validation,
            });
        }
    }
    Ok(SplitPlan { k, repeats, folds })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels(n: usize, os_events: usize) -> Vec<(SurvivalLabel, SurvivalLabel)> {
        (0..n)
            .map(|i| {
                let l = SurvivalLabel {
                    time: 1.0 + i as f64,
                    event: i < os_events,
                };
                (l, SurvivalLabel { event: i % 3 == 0, ..l })
            })
            .collect()
    }

    #[test]
    fn ten_patients_five_folds() {
        let labs = labels(10, 4);
        let plan = stratified_repeated_kfold(&labs, 5, 1, 7).unwrap();
        let counts: Vec<usize> = plan
            .folds
            .iter()
            .map(|f| f.test.iter().filter(|&&i| labs[i].0.event).count())
            .collect();
        assert!(plan.folds.iter().all(|f| f.test.len() == 2));
        assert!(counts.iter().max().unwrap() - counts.iter().min().unwrap() <= 1);
    }

    #[test]
    fn repeats_partition_the_cohort() {
        let labs = labels(53, 20);
        let plan = stratified_repeated_kfold(&labs, 5, 3, 1).unwrap();
        assert_eq!(plan.folds.len(), 15);
        for r in 0..3 {
            let mut seen: Vec<usize> = plan
                .folds
                .iter()
                .filter(|f| f.repeat == r)
                .flat_map(|f| f.test.clone())
                .collect();
            seen.sort_unstable();
            assert_eq!(seen, (0..53).collect::<Vec<_>>());
        }
        for f in &plan.folds {
            let mut all: Vec<usize> = f.test.iter().chain(&f.train).chain(&f.validation).copied().collect();
            all.sort_unstable();
            assert_eq!(all, (0..53).collect::<Vec<_>>());
            assert!(f.validation.iter().all(|v| !f.train.contains(v)));
        }
        assert_ne!(plan.folds[0].test, plan.folds[5].test);
    }

    #[test]
    fn same_seed_same_plan() {
        let labs = labels(40, 13);
        assert_eq!(
            stratified_repeated_kfold(&labs, 5, 3, 4).unwrap(),
            stratified_repeated_kfold(&labs, 5, 3, 4).unwrap()
        );
    }

    #[test]
    fn too_small() {
        assert!(matches!(
            stratified_repeated_kfold(&labels(4, 2), 5, 1, 0),
            Err(CohortError::TooSmall { n: 4, k: 5 })
        ));
    }
}
