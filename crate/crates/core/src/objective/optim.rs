use serde::{Deserialize, Serialize};

use super::ObjectiveError;
use crate::autodiff::{ParamSet, Tensor};

/// Relative improvement below this is treated as a stall.
pub const IMPROVEMENT_TOL: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdamWConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl Default for AdamWConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.01,
        }
    }
}

/// Best-so-far tracker with a stall counter.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StallCounter {
    pub best: f64,
    pub stalls: usize,
}

impl Default for StallCounter {
    fn default() -> Self {
        Self {
            best: f64::INFINITY,
            stalls: 0,
        }
    }
}

impl StallCounter {
    /// Records `value`; returns true when it beats the best by more than the tolerance.
    pub fn observe(&mut self, value: f64) -> bool {
        if value < self.best - IMPROVEMENT_TOL {
            self.best = value;
            self.stalls = 0;
            true
        } else {
            self.stalls += 1;
            false
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizerState {
    pub first_moment: Vec<Tensor>,
    pub second_moment: Vec<Tensor>,
    pub step: u64,
    pub lr: f64,
    pub plateau: StallCounter,
    pub early_stop: StallCounter,
}

impl OptimizerState {
    pub fn new(params: &ParamSet, lr: f64) -> Self {
        let zeros: Vec<Tensor> = params
            .values()
            .iter()
            .map(|t| Tensor::zeros(t.rows(), t.cols()))
            .collect();
        Self {
            first_moment: zeros.clone(),
            second_moment: zeros,
            step: 0,
            lr,
            plateau: StallCounter::default(),
            early_stop: StallCounter::default(),
        }
    }
}

/// Decoupled-decay Adam update at the state's current learning rate.
pub fn adamw_step(
    params: &mut ParamSet,
    grads: &[Tensor],
    state: &mut OptimizerState,
    hyper: &AdamWConfig,
) -> Result<(), ObjectiveError> {
    if grads.len() != params.len() || state.first_moment.len() != params.len() {
        return Err(ObjectiveError::BatchShape {
            os: params.len(),
            dfs: grads.len(),
        });
    }
    for (id, g) in params.ids().zip(grads) {
        if g.shape() != params.get(id).shape() {
            return Err(ObjectiveError::GradientShape(params.name(id).to_string()));
        }
        if !g.is_finite() {
            return Err(ObjectiveError::NonFiniteGradient(params.name(id).to_string()));
        }
    }
    state.step += 1;
    let t = state.step as i32;
    let bc1 = 1.0 - hyper.beta1.powi(t);
    let bc2 = 1.0 - hyper.beta2.powi(t);
    let lr = state.lr;
    for (i, p) in params.values_mut().iter_mut().enumerate() {
        let m = state.first_moment[i].data_mut();
        let v = state.second_moment[i].data_mut();
        for (j, (w, &g)) in p.data_mut().iter_mut().zip(grads[i].data()).enumerate() {
            *w -= lr * hyper.weight_decay * *w;
            m[j] = hyper.beta1 * m[j] + (1.0 - hyper.beta1) * g;
            v[j] = hyper.beta2 * v[j] + (1.0 - hyper.beta2) * g * g;
            let m_hat = m[j] / bc1;
            let v_hat = v[j] / bc2;
            *w -= lr * m_hat / (v_hat.sqrt() + hyper.eps);
        }
    }
    Ok(())
}

/// Halves (by `factor`) the learning rate once `patience` evaluations have
/// passed without improvement. Returns true when the rate changed.
pub fn plateau_schedule(state: &mut OptimizerState, val_loss: f64, factor: f64, patience: usize) -> bool {
    state.plateau.observe(val_loss);
    if state.plateau.stalls > patience {
        state.lr *= factor;
        state.plateau.stalls = 0;
        true
    } else {
        false
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EarlyStop {
    /// Keep training; `improved` marks a new best to snapshot.
    Continue {
        improved: bool,
    },
    Stop,
}

pub fn early_stop(state: &mut OptimizerState, val_loss: f64, patience: usize) -> EarlyStop {
    let improved = state.early_stop.observe(val_loss);
    if state.early_stop.stalls >= patience {
        EarlyStop::Stop
    } else {
        EarlyStop::Continue { improved }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_param(v: f64) -> ParamSet {
        let mut ps = ParamSet::new();
        ps.add("w", Tensor::scalar(v));
        ps
    }

    fn hyper(lr: f64, wd: f64) -> AdamWConfig {
        AdamWConfig {
            lr,
            weight_decay: wd,
            ..AdamWConfig::default()
        }
    }

    #[test]
    fn zero_gradient_no_decay_is_identity() {
        let mut ps = one_param(0.37);
        let mut st = OptimizerState::new(&ps, 0.1);
        adamw_step(&mut ps, &[Tensor::scalar(0.0)], &mut st, &hyper(0.1, 0.0)).unwrap();
        assert_eq!(ps.values()[0].item(), Some(0.37));
    }

    #[test]
    fn first_step_by_hand() {
        let mut ps = one_param(1.0);
        let mut st = OptimizerState::new(&ps, 0.1);
        adamw_step(&mut ps, &[Tensor::scalar(1.0)], &mut st, &hyper(0.1, 0.0)).unwrap();
        assert!((ps.values()[0].item().unwrap() - 0.9).abs() < 1e-7);
    }

    #[test]
    fn decoupled_decay_by_hand() {
        let mut ps = one_param(2.0);
        let mut st = OptimizerState::new(&ps, 0.1);
        adamw_step(&mut ps, &[Tensor::scalar(0.0)], &mut st, &hyper(0.1, 0.1)).unwrap();
        assert!((ps.values()[0].item().unwrap() - 2.0 * 0.99).abs() < 1e-15);
    }

    #[test]
    fn rejects_non_finite_gradient() {
        let mut ps = one_param(1.0);
        let mut st = OptimizerState::new(&ps, 0.1);
        let r = adamw_step(&mut ps, &[Tensor::scalar(f64::NAN)], &mut st, &hyper(0.1, 0.0));
        assert_eq!(r, Err(ObjectiveError::NonFiniteGradient("w".into())));
    }

    #[test]
    fn deterministic_updates() {
        let run = || {
            let mut ps = one_param(0.5);
            let mut st = OptimizerState::new(&ps, 0.01);
            for k in 0..20 {
                let g = Tensor::scalar((k as f64 * 0.7).sin());
                adamw_step(&mut ps, &[g], &mut st, &AdamWConfig::default()).unwrap();
            }
            ps.values()[0].item().unwrap().to_bits()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn plateau_rules() {
        let ps = one_param(0.0);
        let mut st = OptimizerState::new(&ps, 1.0);
        for k in 0..10 {
            assert!(!plateau_schedule(&mut st, 10.0 - k as f64, 0.5, 5));
        }
        assert_eq!(st.lr, 1.0);

        let mut st = OptimizerState::new(&ps, 1.0);
        plateau_schedule(&mut st, 1.0, 0.5, 5);
        let changed: Vec<bool> = (0..6).map(|_| plateau_schedule(&mut st, 1.0, 0.5, 5)).collect();
        assert_eq!(changed, vec![false, false, false, false, false, true]);
        assert_eq!(st.lr, 0.5);

        let mut st = OptimizerState::new(&ps, 1.0);
        plateau_schedule(&mut st, 1.0, 0.5, 5);
        for _ in 0..5 {
            plateau_schedule(&mut st, 1.0, 0.5, 5);
        }
        plateau_schedule(&mut st, 0.5, 0.5, 5);
        assert_eq!((st.lr, st.plateau.stalls), (1.0, 0));
    }

    #[test]
    fn early_stop_rules() {
        let ps = one_param(0.0);
        let mut st = OptimizerState::new(&ps, 1.0);
        for k in 0..100 {
            assert_ne!(early_stop(&mut st, 100.0 - k as f64, 10), EarlyStop::Stop);
        }

        let mut st = OptimizerState::new(&ps, 1.0);
        let stop_epoch = (1..=100).find(|_| early_stop(&mut st, 1.0, 10) == EarlyStop::Stop);
        assert_eq!(stop_epoch, Some(11));

        let mut st = OptimizerState::new(&ps, 1.0);
        let losses = [5.0, 4.0, 3.0, 3.5, 3.2, 3.1, 3.3, 3.4, 3.6, 3.0, 3.05, 3.2, 3.9];
        let mut best_epoch = 0;
        let mut stopped = None;
        for (i, &l) in losses.iter().enumerate() {
            match early_stop(&mut st, l, 10) {
                EarlyStop::Continue { improved: true } => best_epoch = i + 1,
                EarlyStop::Continue { .. } => {}
                EarlyStop::Stop => {
                    stopped = Some(i + 1);
                    break;
                }
            }
        }
        assert_eq!((best_epoch, stopped), (3, Some(13)));
    }
}
