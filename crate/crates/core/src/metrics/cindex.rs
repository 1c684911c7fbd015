use super::MetricError;
use crate::objective::SurvivalLabel;

/// Binary indexed tree over risk ranks.
struct Fenwick {
    tree: Vec<u64>,
}

impl Fenwick {
    fn new(n: usize) -> Self {
        Self { tree: vec![0; n + 1] }
    }

    fn add(&mut self, rank: usize) {
        let mut i = rank + 1;
        while i < self.tree.len() {
            self.tree[i] += 1;
            i += i & i.wrapping_neg();
        }
    }

    /// Count of inserted ranks `< rank`.
    fn below(&self, rank: usize) -> u64 {
        let mut i = rank;
        let mut s = 0;
        while i > 0 {
            s += self.tree[i];
            i -= i & i.wrapping_neg();
        }
        s
    }
}

/// Harrell's C: pairs with a strictly earlier observed event are comparable;
/// higher risk on the earlier failure is concordant, equal risks count half.
pub fn harrell_cindex(risks: &[f64], labels: &[SurvivalLabel]) -> Result<f64, MetricError> {
    if risks.len() != labels.len() {
        return Err(MetricError::LengthMismatch {
            scores: risks.len(),
            labels: labels.len(),
        });
    }
    if risks.iter().any(|r| !r.is_finite()) {
        return Err(MetricError::NonFiniteScore);
    }
    let n = risks.len();
    let mut sorted: Vec<f64> = risks.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.dedup();
    let rank = |r: f64| sorted.partition_point(|&v| v < r);

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| labels[b].time.total_cmp(&labels[a].time));

    let mut tree = Fenwick::new(sorted.len());
    let (mut concordant, mut tied, mut comparable) = (0u64, 0u64, 0u64);
    let mut inserted = 0u64;
    let mut start = 0;
    while start < n {
        let t = labels[order[start]].time;
        let end = start + order[start..].iter().take_while(|&&i| labels[i].time == t).count();
        for &i in &order[start..end] {
            if !labels[i].event {
                continue;
            }
            let r = rank(risks[i]);
            let lower = tree.below(r);
            let lower_or_equal = tree.below(r + 1);
            concordant += lower;
            tied += lower_or_equal - lower;
            comparable += inserted;
        }
        for &i in &order[start..end] {
            tree.add(rank(risks[i]));
            inserted += 1;
        }
        start = end;
    }
    if comparable == 0 {
        return Err(MetricError::NoComparablePairs);
    }
    Ok((concordant as f64 + 0.5 * tied as f64) / comparable as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lab(t: f64, e: bool) -> SurvivalLabel {
        SurvivalLabel { time: t, event: e }
    }

    #[test]
    fn hand_examples() {
        let two = [lab(1.0, true), lab(2.0, true)];
        assert_eq!(harrell_cindex(&[2.0, 1.0], &two).unwrap(), 1.0);
        assert_eq!(harrell_cindex(&[1.0, 1.0], &two).unwrap(), 0.5);
        let three = [lab(1.0, true), lab(2.0, false), lab(3.0, true)];
        assert_eq!(harrell_cindex(&[3.0, 1.0, 2.0], &three).unwrap(), 1.0);
    }

    #[test]
    fn tied_times_are_not_comparable() {
        let labels = [lab(1.0, true), lab(1.0, true), lab(1.0, false)];
        assert_eq!(
            harrell_cindex(&[1.0, 2.0, 3.0], &labels),
            Err(MetricError::NoComparablePairs)
        );
    }

    #[test]
    fn reversed_risks_complement() {
        let labels = [lab(1.0, true), lab(2.5, false), lab(3.0, true), lab(4.0, true)];
        let r = [0.3, 0.9, 0.1, 0.5];
        let neg: Vec<f64> = r.iter().map(|v| -v).collect();
        let a = harrell_cindex(&r, &labels).unwrap();
        let b = harrell_cindex(&neg, &labels).unwrap();
        assert!((a + b - 1.0).abs() < 1e-15);
    }
}
