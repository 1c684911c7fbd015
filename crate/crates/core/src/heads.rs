//! Discrete-time hazard heads with a DFS-to-OS context cascade.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::autodiff::{AutodiffError, BoundParams, ParamId, ParamSet, Tape, Tensor, Var};

/// Hazards are kept strictly below one so survival stays positive.
pub const HAZARD_CEILING: f64 = 1.0 - 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HeadError {
    #[error("bin edges must start at 0 and strictly increase, got {0:?}")]
    BadEdges(Vec<f64>),
    #[error("time {0} is negative or not finite")]
    BadTime(f64),
    #[error("{what} has width {got}, expected {expected}")]
    WidthMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error(transparent)]
    Autodiff(#[from] AutodiffError),
}

/// `K + 1` increasing edges in years, first edge 0.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct TimeBins {
    edges: Vec<f64>,
}

impl TryFrom<Vec<f64>> for TimeBins {
    type Error = HeadError;
    fn try_from(edges: Vec<f64>) -> Result<Self, HeadError> {
        Self::new(edges)
    }
}

impl From<TimeBins> for Vec<f64> {
    fn from(b: TimeBins) -> Self {
        b.edges
    }
}

impl TimeBins {
    pub fn new(edges: Vec<f64>) -> Result<Self, HeadError> {
        let ok = edges.len() >= 2
            && edges[0] == 0.0
            && edges.iter().all(|e| e.is_finite())
            && edges.windows(2).all(|w| w[0] < w[1]);
        if ok {
            Ok(Self { edges })
        } else {
            Err(HeadError::BadEdges(edges))
        }
    }

    /// `k` one-year bins `[0, 1), [1, 2), ...`.
    pub fn annual(k: usize) -> Self {
        Self {
            edges: (0..=k.max(1)).map(|e| e as f64).collect(),
        }
    }

    pub fn count(&self) -> usize {
        self.edges.len() - 1
    }

    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    pub fn last_edge(&self) -> f64 {
        self.edges[self.count()]
    }

    pub fn midpoint(&self, k: usize) -> f64 {
        0.5 * (self.edges[k] + self.edges[k + 1])
    }

    /// Left-closed bin containing `time`; times past the last edge clamp to `K - 1`.
    pub fn bin_of(&self, time: f64) -> Result<usize, HeadError> {
        if !(time >= 0.0 && time.is_finite()) {
            return Err(HeadError::BadTime(time));
        }
        let k = self.edges.partition_point(|&e| e <= time);
        Ok(k.saturating_sub(1).min(self.count() - 1))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HazardCurve(pub Vec<f64>);

/// `S[k]`: probability of surviving beyond bin `k`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurvivalCurve(pub Vec<f64>);

impl SurvivalCurve {
    /// Step value at `time`: the entry of the bin containing it.
    pub fn at(&self, bins: &TimeBins, time: f64) -> f64 {
        match bins.bin_of(time) {
            Ok(k) => self.0[k],
            Err(_) => 1.0,
        }
    }

    pub fn is_valid(&self) -> bool {
        self.0.first().is_some_and(|&s| s <= 1.0)
            && self.0.last().is_some_and(|&s| s > 0.0)
            && self.0.windows(2).all(|w| w[0] >= w[1])
    }
}

pub fn hazards_from_logits(logits: &[f64]) -> HazardCurve {
    HazardCurve(logits.iter().map(|&x| sigmoid(x).min(HAZARD_CEILING)).collect())
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn survival_from_hazards(h: &HazardCurve) -> SurvivalCurve {
    let mut s = 1.0;
    SurvivalCurve(
        h.0.iter()
            .map(|&hk| {
                s *= 1.0 - hk;
                s
            })
            .collect(),
    )
}

/// Expected event time with the tail mass placed at the last edge.
pub fn point_estimate_time(s: &SurvivalCurve, bins: &TimeBins) -> f64 {
    let mut prev = 1.0;
    let mut total = 0.0;
    for (k, &sk) in s.0.iter().enumerate() {
        total += (prev - sk) * bins.midpoint(k);
        prev = sk;
    }
    total + prev * bins.last_edge()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeadParams {
    pub hidden: usize,
    pub context: usize,
    pub bins: usize,
    pub ctx_weight: ParamId,
    pub ctx_bias: ParamId,
    pub dfs_weight: ParamId,
    pub dfs_bias: ParamId,
    /// `(hidden + context) x bins`.
    pub os_weight: ParamId,
    pub os_bias: ParamId,
}

impl HeadParams {
    pub fn init(
        params: &mut ParamSet,
        hidden: usize,
        context: usize,
        bins: usize,
        init: &mut impl FnMut(usize, usize, usize) -> Tensor,
    ) -> Self {
        let os_in = hidden + context;
        Self {
            hidden,
            context,
            bins,
            ctx_weight: params.add("head.dfs_context.weight", init(hidden, context, hidden)),
            ctx_bias: params.add("head.dfs_context.bias", init(1, context, hidden)),
            dfs_weight: params.add("head.dfs.weight", init(hidden, bins, hidden)),
            dfs_bias: params.add("head.dfs.bias", init(1, bins, hidden)),
            os_weight: params.add("head.os.weight", init(os_in, bins, os_in)),
            os_bias: params.add("head.os.bias", init(1, bins, os_in)),
        }
    }
}

fn check_width(tape: &Tape, v: Var, what: &'static str, expected: usize) -> Result<(), HeadError> {
    let got = tape.shape(v).1;
    if got == expected {
        Ok(())
    } else {
        Err(HeadError::WidthMismatch { what, expected, got })
    }
}

/// Returns `(dfs_logits, dfs_context)`.
pub fn dfs_head(
    tape: &mut Tape,
    h_star: Var,
    params: &HeadParams,
    bound: &BoundParams,
) -> Result<(Var, Var), HeadError> {
    check_width(tape, h_star, "trajectory summary", params.hidden)?;
    let ctx = tape.affine(h_star, bound[params.ctx_weight], bound[params.ctx_bias])?;
    let ctx = tape.tanh(ctx)?;
    let logits = tape.affine(h_star, bound[params.dfs_weight], bound[params.dfs_bias])?;
    Ok((logits, ctx))
}

/// OS logits from `[h* ; context]`; with the cascade off the context is zeros.
pub fn os_head(
    tape: &mut Tape,
    h_star: Var,
    dfs_context: Var,
    params: &HeadParams,
    bound: &BoundParams,
    cascade: bool,
) -> Result<Var, HeadError> {
    check_width(tape, h_star, "trajectory summary", params.hidden)?;
    check_width(tape, dfs_context, "dfs context", params.context)?;
    let ctx = if cascade {
        dfs_context
    } else {
        tape.constant(Tensor::zeros(tape.shape(h_star).0, params.context))
    };
    let joined = tape.concat_cols(h_star, ctx)?;
    Ok(tape.affine(joined, bound[params.os_weight], bound[params.os_bias])?)
}
