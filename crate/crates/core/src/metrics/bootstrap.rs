use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::MetricError;

pub const MIN_RESAMPLES: usize = 100;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BootstrapInterval {
    pub lo: f64,
    pub hi: f64,
    pub level: f64,
    pub resamples: usize,
    /// Resamples where the metric was undefined.
    pub discarded: usize,
}

/// Percentile interval of `metric` over `resamples` patient-level draws with
/// replacement from `0..n`. Resample `b` uses stream `b` of a ChaCha8 generator
/// seeded with `seed`, so results do not depend on evaluation order.
pub fn bootstrap_ci<F>(
    n: usize,
    metric: F,
    resamples: usize,
    level: f64,
    seed: u64,
) -> Result<BootstrapInterval, MetricError>
where
    F: Fn(&[usize]) -> Option<f64> + Sync,
{
    if resamples < MIN_RESAMPLES {
        return Err(MetricError::TooFewResamples(resamples));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(MetricError::BadLevel(level));
    }
    if n == 0 {
        return Err(MetricError::Empty);
    }
    let draws: Vec<Option<f64>> = (0..resamples)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(b as u64);
            let idx: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
            metric(&idx).filter(|v| v.is_finite())
        })
        .collect();
    let mut values: Vec<f64> = draws.into_iter().flatten().collect();
    let discarded = resamples - values.len();
    if 2 * discarded > resamples {
        return Err(MetricError::TooManyUndefined {
            undefined: discarded,
            total: resamples,
        });
    }
    values.sort_by(f64::total_cmp);
    let tail = (1.0 - level) / 2.0;
    Ok(BootstrapInterval {
        lo: quantile(&values, tail),
        hi: quantile(&values, 1.0 - tail),
        level,
        resamples,
        discarded,
    })
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

/// `"0.755 with a 95% CI of [0.711, 0.796]"`.
pub fn format_ci(point: f64, ci: &BootstrapInterval) -> String {
    format!(
        "{:.3} with a {}% CI of [{:.3}, {:.3}]",
        point,
        (ci.level * 100.0).round(),
        ci.lo,
        ci.hi
    )
}
