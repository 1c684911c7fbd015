//! LSTM integrator over the snapshot sequence.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::autodiff::{AutodiffError, BoundParams, ParamId, ParamSet, Tape, Tensor, Var};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TrajectoryError {
    #[error("cannot integrate an empty snapshot sequence")]
    Empty,
    #[error("{what} has width {got}, expected {expected}")]
    WidthMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error(transparent)]
    Autodiff(#[from] AutodiffError),
}

/// Fused gate weights. Columns of `weight` and `bias` are laid out as
/// `[input | forget | candidate | output]`, each `hidden` wide.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LstmParams {
    pub input: usize,
    pub hidden: usize,
    /// `(input + hidden) x 4 hidden`, rows ordered `[z ; h]`.
    pub weight: ParamId,
    pub bias: ParamId,
}

impl LstmParams {
    pub fn init(
        params: &mut ParamSet,
        input: usize,
        hidden: usize,
        init: &mut impl FnMut(usize, usize, usize) -> Tensor,
    ) -> Self {
        Self {
            input,
            hidden,
            weight: params.add("lstm.weight", init(input + hidden, 4 * hidden, hidden)),
            bias: params.add("lstm.bias", init(1, 4 * hidden, hidden)),
        }
    }

    /// Column range of gate `g` (0 input, 1 forget, 2 candidate, 3 output).
    pub fn gate_cols(&self, g: usize) -> std::ops::Range<usize> {
        g * self.hidden..(g + 1) * self.hidden
    }
}

/// One cell update; `z`, `h`, `c` are row vectors.
pub fn lstm_step(
    tape: &mut Tape,
    z: Var,
    h: Var,
    c: Var,
    params: &LstmParams,
    bound: &BoundParams,
) -> Result<(Var, Var), TrajectoryError> {
    let check = |what, got: usize, expected| {
        if got == expected {
            Ok(())
        } else {
            Err(TrajectoryError::WidthMismatch { what, expected, got })
        }
    };
    check("snapshot", tape.shape(z).1, params.input)?;
    check("hidden state", tape.shape(h).1, params.hidden)?;
    check("cell state", tape.shape(c).1, params.hidden)?;

    let zh = tape.concat_cols(z, h)?;
    let gates = tape.affine(zh, bound[params.weight], bound[params.bias])?;
    let gate = |tape: &mut Tape, g: usize| {
        let r = params.gate_cols(g);
        tape.slice_cols(gates, r.start, r.end)
    };
    let i = gate(tape, 0)?;
    let i = tape.sigmoid(i)?;
    let f = gate(tape, 1)?;
    let f = tape.sigmoid(f)?;
    let g = gate(tape, 2)?;
    let g = tape.tanh(g)?;
    let o = gate(tape, 3)?;
    let o = tape.sigmoid(o)?;

    let keep = tape.mul(f, c)?;
    let write = tape.mul(i, g)?;
    let c_next = tape.add(keep, write)?;
    let squashed = tape.tanh(c_next)?;
    let h_next = tape.mul(o, squashed)?;
    Ok((h_next, c_next))
}

/// Mean of the hidden states `h_1..h_T`, starting from zero state.
pub fn integrate(
    tape: &mut Tape,
    snapshots: &[Var],
    params: &LstmParams,
    bound: &BoundParams,
) -> Result<Var, TrajectoryError> {
    if snapshots.is_empty() {
        return Err(TrajectoryError::Empty);
    }
    let mut h = tape.constant(Tensor::zeros(1, params.hidden));
    let mut c = tape.constant(Tensor::zeros(1, params.hidden));
    let mut hidden = Vec::with_capacity(snapshots.len());
    for &z in snapshots {
        (h, c) = lstm_step(tape, z, h, c, params, bound)?;
        hidden.push(h);
    }
    let stacked = tape.stack_rows(&hidden)?;
    Ok(tape.mean_rows(stacked)?)
}

/// Integrator bypass: mean of the raw snapshots.
pub fn integrate_mean(tape: &mut Tape, snapshots: &[Var]) -> Result<Var, TrajectoryError> {
    if snapshots.is_empty() {
        return Err(TrajectoryError::Empty);
    }
    let stacked = tape.stack_rows(snapshots)?;
    Ok(tape.mean_rows(stacked)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::grad_check_params;
    use crate::init::UniformInit;

    fn setup(input: usize, hidden: usize, seed: u64) -> (ParamSet, LstmParams) {
        let mut ps = ParamSet::new();
        let mut init = UniformInit::new(seed);
        let lp = LstmParams::init(&mut ps, input, hidden, &mut |r, c, f| init.tensor(r, c, f));
        (ps, lp)
    }

    fn step_values(ps: &ParamSet, lp: &LstmParams, z: &[f64], h: &[f64], c: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let mut tape = Tape::new();
        let bound = ps.bind(&mut tape);
        let z = tape.constant(Tensor::row_vector(z.to_vec()));
        let h = tape.constant(Tensor::row_vector(h.to_vec()));
        let c = tape.constant(Tensor::row_vector(c.to_vec()));
        let (h, c) = lstm_step(&mut tape, z, h, c, lp, &bound).unwrap();
        (tape.value(h).data().to_vec(), tape.value(c).data().to_vec())
    }

    #[test]
    fn zero_params_zero_cell() {
        let (mut ps, lp) = setup(2, 1, 0);
        ps.zero_all();
        let (h, c) = step_values(&ps, &lp, &[0.3, -0.2], &[0.0], &[0.0]);
        assert_eq!((h, c), (vec![0.0], vec![0.0]));
    }

    #[test]
    fn zero_params_unit_cell_by_hand() {
        let (mut ps, lp) = setup(2, 1, 0);
        ps.zero_all();
        let (h, c) = step_values(&ps, &lp, &[0.3, -0.2], &[0.0], &[1.0]);
        assert_eq!(c, vec![0.5]);
        assert!((h[0] - 0.5 * 0.5f64.tanh()).abs() < 1e-15);
        assert!((h[0] - 0.2311).abs() < 1e-4);
    }

    #[test]
    fn saturated_forget_gate_keeps_cell() {
        let (mut ps, lp) = setup(2, 3, 0);
        ps.zero_all();
        let cols = lp.gate_cols(1);
        ps.get_mut(lp.bias).data_mut()[cols].fill(100.0);
        let (_, c) = step_values(&ps, &lp, &[1.0, 2.0], &[0.1, 0.2, 0.3], &[0.7, -1.2, 3.0]);
        assert_eq!(c, vec![0.7, -1.2, 3.0]);
    }

    #[test]
    fn width_mismatch() {
        let (ps, lp) = setup(2, 2, 0);
        let mut tape = Tape::new();
        let bound = ps.bind(&mut tape);
        let z = tape.constant(Tensor::zeros(1, 3));
        let h = tape.constant(Tensor::zeros(1, 2));
        let r = lstm_step(&mut tape, z, h, h, &lp, &bound);
        assert!(matches!(
            r,
            Err(TrajectoryError::WidthMismatch { what: "snapshot", .. })
        ));
    }

    #[test]
    fn integrate_matches_manual_recurrence() {
        let (ps, lp) = setup(3, 4, 8);
        let z = [0.4, -0.3, 0.8];
        let steps = 6;
        let mut h = vec![0.0; 4];
        let mut c = vec![0.0; 4];
        let mut sum = vec![0.0; 4];
        for _ in 0..steps {
            (h, c) = step_values(&ps, &lp, &z, &h, &c);
            for (s, v) in sum.iter_mut().zip(&h) {
                *s += v;
            }
        }
        let mut tape = Tape::new();
        let bound = ps.bind(&mut tape);
        let snaps: Vec<Var> = (0..steps)
            .map(|_| tape.constant(Tensor::row_vector(z.to_vec())))
            .collect();
        let h_star = integrate(&mut tape, &snaps, &lp, &bound).unwrap();
        for (a, s) in tape.value(h_star).data().iter().zip(&sum) {
            assert!((a - s / steps as f64).abs() < 1e-14);
        }
    }

    #[test]
    fn single_step_and_zero_params() {
        let (mut ps, lp) = setup(2, 2, 3);
        let (h1, _) = step_values(&ps, &lp, &[1.0, 0.5], &[0.0, 0.0], &[0.0, 0.0]);
        let mut tape = Tape::new();
        let bound = ps.bind(&mut tape);
        let z = tape.constant(Tensor::row_vector(vec![1.0, 0.5]));
        let h_star = integrate(&mut tape, &[z], &lp, &bound).unwrap();
        assert_eq!(tape.value(h_star).data(), h1.as_slice());

        ps.zero_all();
        let mut tape = Tape::new();
        let bound = ps.bind(&mut tape);
        let zs: Vec<Var> = (0..3)
            .map(|i| tape.constant(Tensor::row_vector(vec![i as f64, 1.0])))
            .collect();
        let h_star = integrate(&mut tape, &zs, &lp, &bound).unwrap();
        assert_eq!(tape.value(h_star).data(), &[0.0, 0.0]);
        assert!(matches!(
            integrate(&mut tape, &[], &lp, &bound),
            Err(TrajectoryError::Empty)
        ));
    }

    #[test]
    fn mean_integrator_averages_snapshots() {
        let mut tape = Tape::new();
        let a = tape.constant(Tensor::row_vector(vec![1.0, 4.0]));
        let b = tape.constant(Tensor::row_vector(vec![3.0, 0.0]));
        let m = integrate_mean(&mut tape, &[a, b]).unwrap();
        assert_eq!(tape.value(m).data(), &[2.0, 2.0]);
    }

    #[test]
    fn gradients_pass_grad_check() {
        let (ps, lp) = setup(3, 2, 17);
        let report = grad_check_params(
            |tape: &mut Tape, bound: &BoundParams| -> Result<Var, TrajectoryError> {
                let zs: Vec<Var> = (0..4)
                    .map(|t| tape.constant(Tensor::row_vector(vec![0.1 * t as f64, -0.5, 0.3])))
                    .collect();
                let h = integrate(tape, &zs, &lp, bound)?;
                let sq = tape.mul(h, h)?;
                Ok(tape.sum_all(sq)?)
            },
            &ps,
            1e-5,
        )
        .unwrap();
        assert!(report.max_rel_error <= 1e-4, "{report:?}");
    }
}
