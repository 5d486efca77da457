//! Generative similarity of binary feature vectors under independent
//! Beta-Bernoulli features.

use serde::{Deserialize, Serialize};

use crate::error::{check_dims, Error, Result};
use crate::numeric::ln_beta;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaBernoulliParams {
    alpha: f64,
    beta: f64,
}

impl BetaBernoulliParams {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite() && beta > 0.0 && beta.is_finite()) {
            return Err(Error::Precondition(format!(
                "Beta parameters must be positive and finite, got ({alpha}, {beta})"
            )));
        }
        Ok(Self { alpha, beta })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }
}

fn check_binary(f: &[u8]) -> Result<()> {
    if f.iter().any(|v| *v > 1) {
        return Err(Error::Precondition("feature vectors must be binary".into()));
    }
    Ok(())
}

/// Log ratio of the joint marginal of `f1`, `f2` sharing one feature
/// probability vector against independent draws.
pub fn shape_log_gen_sim_general(f1: &[u8], f2: &[u8], params: BetaBernoulliParams) -> Result<f64> {
    check_dims(f1.len(), f2.len())?;
    check_binary(f1)?;
    check_binary(f2)?;
    let (a, b) = (params.alpha, params.beta);
    let prior = ln_beta(a, b);
    let mut total = 0.0;
    for (&x, &y) in f1.iter().zip(f2) {
        let (x, y) = (f64::from(x), f64::from(y));
        total += ln_beta(x + y + a, 2.0 - x - y + b) + prior
            - ln_beta(x + a, 1.0 - x + b)
            - ln_beta(y + a, 1.0 - y + b);
    }
    Ok(total)
}

/// The `alpha = beta -> 0` limit: `n ln 2 - ln((beta + 1) / beta) * hamming`.
pub fn shape_log_gen_sim_limit(f1: &[u8], f2: &[u8], beta: f64) -> Result<f64> {
    check_dims(f1.len(), f2.len())?;
    check_binary(f1)?;
    check_binary(f2)?;
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::Precondition(format!("beta must be positive, got {beta}")));
    }
    let hamming = f1.iter().zip(f2).filter(|(x, y)| x != y).count();
    Ok(f1.len() as f64 * std::f64::consts::LN_2 - ((beta + 1.0) / beta).ln() * hamming as f64)
}

/// Number of differing bits, equal to the squared Euclidean distance.
pub fn feature_sq_distance(f1: &[u8], f2: &[u8]) -> Result<usize> {
    check_dims(f1.len(), f2.len())?;
    check_binary(f1)?;
    check_binary(f2)?;
    Ok(f1.iter().zip(f2).filter(|(x, y)| x != y).count())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn limit_examples() {
        let ln2 = std::f64::consts::LN_2;
        let z = [0u8; 22];
        let mut f = z;
        f[3] = 1;
        f[7] = 1;
        f[21] = 1;
        assert!((shape_log_gen_sim_limit(&z, &z, 1.0).unwrap() - 22.0 * ln2).abs() < 1e-12);
        assert!((shape_log_gen_sim_limit(&z, &f, 1.0).unwrap() - 19.0 * ln2).abs() < 1e-12);
        assert_eq!(feature_sq_distance(&z, &f).unwrap(), 3);
    }

    #[test]
    fn rejects_bad_inputs() {
        let p = BetaBernoulliParams::new(1.0, 1.0).unwrap();
        assert!(shape_log_gen_sim_general(&[0, 1], &[0], p).is_err());
        assert!(shape_log_gen_sim_general(&[0, 2], &[0, 1], p).is_err());
        assert!(BetaBernoulliParams::new(0.0, 1.0).is_err());
        assert!(shape_log_gen_sim_limit(&[0], &[1], 0.0).is_err());
    }

    #[test]
    fn uniform_prior_single_feature() {
        // alpha = beta = 1: p(1,1) = 1/3, p(1) = 1/2, ratio 4/3.
        let p = BetaBernoulliParams::new(1.0, 1.0).unwrap();
        let v = shape_log_gen_sim_general(&[1], &[1], p).unwrap();
        assert!((v - (4.0f64 / 3.0).ln()).abs() < 1e-12);
        let v = shape_log_gen_sim_general(&[1], &[0], p).unwrap();
        assert!((v - (2.0f64 / 3.0).ln()).abs() < 1e-12);
    }
}
