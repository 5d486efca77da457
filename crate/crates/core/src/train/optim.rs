use serde::{Deserialize, Serialize};

use crate::error::{check_dims, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum Optimizer {
    Sgd,
    Adam {
        #[serde(default = "default_beta1")]
        beta1: f64,
        #[serde(default = "default_beta2")]
        beta2: f64,
        #[serde(default = "default_eps")]
        eps: f64,
    },
}

fn default_beta1() -> f64 {
    0.9
}
fn default_beta2() -> f64 {
    0.999
}
fn default_eps() -> f64 {
    1e-8
}

impl Optimizer {
    pub fn adam() -> Self {
        Optimizer::Adam { beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }

    pub fn validate(&self) -> Result<()> {
        if let Optimizer::Adam { beta1, beta2, eps } = *self {
            if !((0.0..1.0).contains(&beta1) && (0.0..1.0).contains(&beta2) && eps > 0.0) {
                return Err(Error::invalid("optimizer", "need 0 <= beta < 1 and eps > 0"));
            }
        }
        Ok(())
    }
}

impl Default for Optimizer {
    fn default() -> Self {
        Self::adam()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
}

impl AdamState {
    pub fn new(n: usize) -> Self {
        Self { m: vec![0.0; n], v: vec![0.0; n], t: 0 }
    }
}

fn check_finite(grads: &[f64]) -> Result<()> {
    if let Some(i) = grads.iter().position(|g| !g.is_finite()) {
        return Err(Error::NonFinite { context: format!("gradient coordinate {i} is {}", grads[i]) });
    }
    Ok(())
}

/// Bias-corrected Adam update.
pub fn adam_step(
    params: &mut [f64],
    grads: &[f64],
    state: &mut AdamState,
    lr: f64,
    (beta1, beta2, eps): (f64, f64, f64),
) -> Result<()> {
    check_dims(params.len(), grads.len())?;
    check_dims(params.len(), state.m.len())?;
    check_finite(grads)?;
    state.t += 1;
    let c1 = 1.0 - beta1.powi(state.t as i32);
    let c2 = 1.0 - beta2.powi(state.t as i32);
    for i in 0..params.len() {
        let g = grads[i];
        state.m[i] = beta1 * state.m[i] + (1.0 - beta1) * g;
        state.v[i] = beta2 * state.v[i] + (1.0 - beta2) * g * g;
        let mhat = state.m[i] / c1;
        let vhat = state.v[i] / c2;
        params[i] -= lr * mhat / (vhat.sqrt() + eps);
    }
    Ok(())
}

pub fn sgd_step(params: &mut [f64], grads: &[f64], lr: f64) -> Result<()> {
    check_dims(params.len(), grads.len())?;
    check_finite(grads)?;
    for (p, g) in params.iter_mut().zip(grads) {
        *p -= lr * g;
    }
    Ok(())
}

/// Optimizer together with its running state.
#[derive(Debug, Clone)]
pub struct OptimizerState {
    kind: Optimizer,
    adam: Option<AdamState>,
}

impl OptimizerState {
    pub fn new(kind: Optimizer, n: usize) -> Self {
        let adam = matches!(kind, Optimizer::Adam { .. }).then(|| AdamState::new(n));
        Self { kind, adam }
    }

    pub fn step(&mut self, params: &mut [f64], grads: &[f64], lr: f64) -> Result<()> {
        match (self.kind, self.adam.as_mut()) {
            (Optimizer::Adam { beta1, beta2, eps }, Some(state)) => {
                adam_step(params, grads, state, lr, (beta1, beta2, eps))
            }
            _ => sgd_step(params, grads, lr),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const DEFAULTS: (f64, f64, f64) = (0.9, 0.999, 1e-8);

    #[test]
    fn zero_gradient_leaves_params() {
        let mut p = vec![1.0, -2.0];
        let mut s = AdamState::new(2);
        s.m = vec![0.5, 0.5];
        adam_step(&mut p, &[0.0, 0.0], &mut s, 0.1, DEFAULTS).unwrap();
        assert!((s.m[0] - 0.45).abs() < 1e-15);
        // Moments decay but the step is not zero while m is nonzero; with
        // fresh state it is.
        let mut p2 = vec![1.0, -2.0];
        adam_step(&mut p2, &[0.0, 0.0], &mut AdamState::new(2), 0.1, DEFAULTS).unwrap();
        assert_eq!(p2, vec![1.0, -2.0]);
        let _ = p;
    }

    #[test]
    fn first_step_is_lr_times_sign() {
        let mut p = vec![0.0; 3];
        let mut s = AdamState::new(3);
        adam_step(&mut p, &[3.0, -0.2, 1e-3], &mut s, 0.01, DEFAULTS).unwrap();
        for (v, sign) in p.iter().zip([-1.0, 1.0, -1.0]) {
            assert!((v - sign * 0.01).abs() < 1e-6, "{v}");
        }
    }

    #[test]
    fn quadratic_bowl_converges() {
        let target = [3.0, -1.5, 0.25];
        let mut p = vec![0.0; 3];
        let mut s = AdamState::new(3);
        let mut steps = 0;
        while steps < 5000 {
            let g: Vec<f64> = p.iter().zip(&target).map(|(x, t)| 2.0 * (x - t)).collect();
            adam_step(&mut p, &g, &mut s, 1e-2, DEFAULTS).unwrap();
            steps += 1;
        }
        for (x, t) in p.iter().zip(&target) {
            assert!((x - t).abs() < 1e-6, "{x} vs {t}");
        }
    }

    #[test]
    fn nan_aborts() {
        let mut p = vec![0.0];
        assert!(adam_step(&mut p, &[f64::NAN], &mut AdamState::new(1), 0.1, DEFAULTS).is_err());
        assert!(sgd_step(&mut p, &[f64::INFINITY], 0.1).is_err());
    }
}
