use super::params::{BoundParams, ParamSet};
use super::tape::{Tape, Var};
use super::tensor::Tensor;
use super::AutodiffError;

/// Outcome of comparing reverse-mode gradients with central differences.
#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    /// `max |autodiff - fd| / max(1, |fd|)` over all coordinates.
    pub max_rel_error: f64,
    /// `(parameter, flat index)` of the worst coordinate.
    pub worst: Option<(usize, usize)>,
    pub coordinates: usize,
}

/// Checks the gradient of the scalar `f` at `params` with central differences.
///
/// `f` receives one leaf per entry of `params` and must be deterministic.
pub fn grad_check<F, E>(f: F, params: &[Tensor], step: f64) -> Result<GradCheckReport, E>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var, E>,
    E: From<AutodiffError>,
{
    if !(step > 0.0 && step.is_finite()) {
        return Err(AutodiffError::InvalidArgument(format!("step must be positive, got {step}")).into());
    }
    let mut tape = Tape::new();
    let leaves: Vec<Var> = params.iter().map(|p| tape.leaf(p.clone())).collect();
    let out = f(&mut tape, &leaves)?;
    let grads = tape.backward(out)?;

    let eval = |values: &[Tensor]| -> Result<f64, E> {
        let mut tape = Tape::new();
        let leaves: Vec<Var> = values.iter().map(|p| tape.leaf(p.clone())).collect();
        let out = f(&mut tape, &leaves)?;
        Ok(tape
            .value(out)
            .item()
            .ok_or(AutodiffError::NotScalar { shape: tape.shape(out) })?)
    };

    let mut work: Vec<Tensor> = params.to_vec();
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst: None,
        coordinates: 0,
    };
    for (p, leaf) in leaves.iter().enumerate() {
        let analytic = grads.get(*leaf).expect("every leaf has a gradient");
        for i in 0..params[p].len() {
            let orig = params[p].data()[i];
            work[p].data_mut()[i] = orig + step;
            let plus = eval(&work)?;
            work[p].data_mut()[i] = orig - step;
            let minus = eval(&work)?;
            work[p].data_mut()[i] = orig;
            let fd = (plus - minus) / (2.0 * step);
            let ad = analytic.data()[i];
            if !fd.is_finite() || !ad.is_finite() {
                return Err(AutodiffError::GradCheckNonFinite { param: p, index: i }.into());
            }
            let err = (ad - fd).abs() / fd.abs().max(1.0);
            report.coordinates += 1;
            if report.worst.is_none() || err > report.max_rel_error {
                report.max_rel_error = err;
                report.worst = Some((p, i));
            }
        }
    }
    Ok(report)
}

/// [`grad_check`] over every tensor of a [`ParamSet`].
pub fn grad_check_params<F, E>(f: F, params: &ParamSet, step: f64) -> Result<GradCheckReport, E>
where
    F: Fn(&mut Tape, &BoundParams) -> Result<Var, E>,
    E: From<AutodiffError>,
{
    grad_check(
        |tape, leaves| f(tape, &BoundParams::from_vars(leaves.to_vec())),
        params.values(),
        step,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_is_exact() {
        let p = Tensor::from_rows(&[vec![1.5, -0.7], vec![0.2, 2.0]]).unwrap();
        let report = grad_check(
            |tape: &mut Tape, x: &[Var]| -> Result<Var, AutodiffError> {
                let sq = tape.mul(x[0], x[0])?;
                let s = tape.scale(sq, 3.0)?;
                tape.sum_all(s)
            },
            &[p],
            1e-5,
        )
        .unwrap();
        assert!(report.max_rel_error <= 1e-6, "{report:?}");
        assert_eq!(report.coordinates, 4);
    }

    #[test]
    fn unreachable_parameter_has_zero_error() {
        let report = grad_check(
            |tape: &mut Tape, x: &[Var]| -> Result<Var, AutodiffError> { tape.sum_all(x[0]) },
            &[Tensor::scalar(1.0), Tensor::scalar(5.0)],
            1e-5,
        )
        .unwrap();
        assert!(report.max_rel_error < 1e-9);
    }

    #[test]
    fn rejects_non_positive_step() {
        let r = grad_check(
            |tape: &mut Tape, x: &[Var]| -> Result<Var, AutodiffError> { tape.sum_all(x[0]) },
            &[Tensor::scalar(1.0)],
            0.0,
        );
        assert!(r.is_err());
    }
}
