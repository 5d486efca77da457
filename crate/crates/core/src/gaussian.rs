//! Isotropic Gaussian mixtures: a hierarchical process whose parameter is the
//! component index, with closed-form generative similarity for two
//! components and the linear-projection loss analysis.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{check_dims, Error, Result};
use crate::numeric::{self, log_sum_exp2};
use crate::process::{sample_triplet, HierarchicalProcess};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianMixture {
    means: Vec<Vec<f64>>,
    variance: f64,
    weights: Vec<f64>,
}

impl GaussianMixture {
    /// Shared isotropic variance `σ²`; `weights` default to uniform.
    pub fn new(means: Vec<Vec<f64>>, variance: f64, weights: Option<Vec<f64>>) -> Result<Self> {
        if means.is_empty() {
            return Err(Error::invalid("means", "at least one component required"));
        }
        let d = means[0].len();
        if d == 0 {
            return Err(Error::invalid("means", "zero-dimensional component"));
        }
        if means.iter().any(|m| m.len() != d) {
            return Err(Error::invalid("means", "components differ in dimension"));
        }
        if means.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::invalid("means", "non-finite coordinate"));
        }
        if !(variance > 0.0 && variance.is_finite()) {
            return Err(Error::invalid("variance", format!("must be positive, got {variance}")));
        }
        let k = means.len();
        let weights = weights.unwrap_or_else(|| vec![1.0 / k as f64; k]);
        if weights.len() != k {
            return Err(Error::invalid("weights", "length differs from number of means"));
        }
        if weights.iter().any(|w| !(*w >= 0.0)) {
            return Err(Error::invalid("weights", "negative weight"));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::invalid("weights", format!("sum to {total}, not 1")));
        }
        Ok(GaussianMixture { means, variance, weights })
    }

    /// Two unit-variance components at (5,5) and (1,1).
    pub fn paper() -> Self {
        GaussianMixture::new(vec![vec![5.0, 5.0], vec![1.0, 1.0]], 1.0, None)
            .expect("valid constant mixture")
    }

    pub fn means(&self) -> &[Vec<f64>] {
        &self.means
    }

    pub fn variance(&self) -> f64 {
        self.variance
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn dim(&self) -> usize {
        self.means[0].len()
    }

    pub fn n_components(&self) -> usize {
        self.means.len()
    }

    /// Full normalized log density of component `k` at `x`.
    pub fn component_log_density(&self, x: &[f64], k: usize) -> f64 {
        let d = self.dim() as f64;
        -numeric::sq_dist(x, &self.means[k]) / (2.0 * self.variance)
            - 0.5 * d * (2.0 * std::f64::consts::PI * self.variance).ln()
    }

    /// Posterior over components, `p(k | x)`.
    pub fn responsibilities(&self, x: &[f64]) -> Vec<f64> {
        let logs: Vec<f64> = (0..self.n_components())
            .map(|k| self.weights[k].ln() + self.component_log_density(x, k))
            .collect();
        let z = numeric::log_sum_exp(&logs);
        logs.iter().map(|l| (l - z).exp()).collect()
    }

    /// Point sampled from a fresh component draw, with that component.
    pub fn sample_point<R: Rng + ?Sized>(&self, rng: &mut R) -> (usize, Vec<f64>) {
        let k = self.draw_component(rng);
        (k, self.draw_from(k, rng))
    }

    fn draw_component<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (k, w) in self.weights.iter().enumerate() {
            acc += w;
            if u < acc {
                return k;
            }
        }
        self.weights.iter().rposition(|w| *w > 0.0).unwrap_or(0)
    }

    fn draw_from<R: Rng + ?Sized>(&self, k: usize, rng: &mut R) -> Vec<f64> {
        let sd = self.variance.sqrt();
        self.means[k]
            .iter()
            .map(|m| m + sd * rng.sample::<f64, _>(StandardNormal))
            .collect()
    }
}

impl HierarchicalProcess for GaussianMixture {
    type Param = usize;
    type Datum = Vec<f64>;

    fn sample_param<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<usize> {
        Ok(self.draw_component(rng))
    }

    fn sample_datum<R: Rng + ?Sized>(&self, k: &usize, rng: &mut R) -> Result<Vec<f64>> {
        Ok(self.draw_from(*k, rng))
    }

    fn log_likelihood(&self, x: &Vec<f64>, k: &usize) -> Option<f64> {
        Some(self.component_log_density(x, *k))
    }

    fn label_of(&self, k: &usize) -> Option<usize> {
        Some(*k)
    }
}

fn require_two_uniform(mix: &GaussianMixture) -> Result<()> {
    if mix.n_components() != 2 {
        return Err(Error::Precondition(format!(
            "closed form needs exactly 2 components, mixture has {}",
            mix.n_components()
        )));
    }
    if mix.weights.iter().any(|w| (w - 0.5).abs() > 1e-12) {
        return Err(Error::Precondition("closed form needs uniform weights".into()));
    }
    Ok(())
}

/// Exact log generative similarity for a uniform two-component mixture.
///
/// `(x − μ)²` is the squared Euclidean norm. The normalizing constants cancel
/// between numerator and denominator, leaving
/// `log[½e^{-a₁-b₁} + ½e^{-a₂-b₂}] − log[½e^{-a₁}+½e^{-a₂}] − log[½e^{-b₁}+½e^{-b₂}]`
/// with `a_k = ‖x₁−μ_k‖²/2σ²`, `b_k = ‖x₂−μ_k‖²/2σ²`.
pub fn closed_form_log_gen_sim(mix: &GaussianMixture, x1: &[f64], x2: &[f64]) -> Result<f64> {
    require_two_uniform(mix)?;
    check_dims(mix.dim(), x1.len())?;
    check_dims(mix.dim(), x2.len())?;
    let s2 = 2.0 * mix.variance;
    let a: Vec<f64> = mix.means.iter().map(|m| numeric::sq_dist(x1, m) / s2).collect();
    let b: Vec<f64> = mix.means.iter().map(|m| numeric::sq_dist(x2, m) / s2).collect();
    let num = log_sum_exp2(-(a[0] + b[0]), -(a[1] + b[1]));
    let den_a = log_sum_exp2(-a[0], -a[1]);
    let den_b = log_sum_exp2(-b[0], -b[1]);
    // The ½ factors contribute +log 2 overall.
    Ok(num + std::f64::consts::LN_2 - (den_a + den_b))
}

const UNIT_TOL: f64 = 1e-9;

fn require_unit(phi: &[f64]) -> Result<()> {
    let n = numeric::norm(phi);
    if (n - 1.0).abs() > UNIT_TOL {
        return Err(Error::Precondition(format!("projection must be a unit vector, norm is {n}")));
    }
    Ok(())
}

/// `−4‖μ‖²cos²∠(φ, μ)`: the expected dot-product triplet loss of a linear
/// projection, up to a positive scale and θ-independent terms.
pub fn analytic_linear_loss(phi: &[f64], mu: &[f64]) -> Result<f64> {
    check_dims(phi.len(), mu.len())?;
    require_unit(phi)?;
    let mu_norm = numeric::norm(mu);
    if mu_norm == 0.0 {
        return Err(Error::Precondition("mu must be nonzero".into()));
    }
    let cos = numeric::dot(phi, mu) / mu_norm;
    Ok(-4.0 * mu_norm * mu_norm * cos * cos)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub std_error: f64,
}

/// Per-triplet dot-product loss `(φ·x)(φ·x⁻) − (φ·x)(φ·x⁺)`.
fn linear_triplet_loss(phi: &[f64], a: &[f64], p: &[f64], n: &[f64]) -> f64 {
    let pa = numeric::dot(phi, a);
    pa * numeric::dot(phi, n) - pa * numeric::dot(phi, p)
}

/// Monte-Carlo mean of the dot-product triplet loss of projection `phi`.
///
/// Works for any uniform two-component mixture: the expectation is
/// translation invariant and equals `−¼(φ·(μ₁−μ₂))²`.
pub fn empirical_linear_loss<R: Rng + ?Sized>(
    phi: &[f64],
    mix: &GaussianMixture,
    rng: &mut R,
    n_triplets: usize,
) -> Result<Estimate> {
    require_two_uniform(mix)?;
    check_dims(mix.dim(), phi.len())?;
    require_unit(phi)?;
    if n_triplets < 2 {
        return Err(Error::Precondition("need at least two triplets".into()));
    }
    let mut losses = Vec::with_capacity(n_triplets);
    for _ in 0..n_triplets {
        let t = sample_triplet(mix, rng)?;
        losses.push(linear_triplet_loss(phi, &t.anchor, &t.positive, &t.negative));
    }
    Ok(Estimate { mean: numeric::mean(&losses), std_error: numeric::std_error(&losses) })
}

/// `(μ₁ − μ₂)/‖μ₁ − μ₂‖`, sign fixed so the first nonzero coordinate is positive.
pub fn optimal_projection(mu1: &[f64], mu2: &[f64]) -> Result<Vec<f64>> {
    check_dims(mu1.len(), mu2.len())?;
    let diff: Vec<f64> = mu1.iter().zip(mu2).map(|(a, b)| a - b).collect();
    let n = numeric::norm(&diff);
    if n == 0.0 {
        return Err(Error::Precondition("means must differ".into()));
    }
    let sign = match diff.iter().find(|v| **v != 0.0) {
        Some(v) if *v < 0.0 => -1.0,
        _ => 1.0,
    };
    Ok(diff.iter().map(|v| sign * v / n).collect())
}

/// Projected stochastic gradient descent on the dot-product triplet loss over
/// the unit sphere, from a random start.
pub fn fit_linear_projection<R: Rng + ?Sized>(
    mix: &GaussianMixture,
    rng: &mut R,
    steps: usize,
    learning_rate: f64,
    batch: usize,
) -> Result<Vec<f64>> {
    require_two_uniform(mix)?;
    let d = mix.dim();
    let mut phi: Vec<f64> = (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    normalize(&mut phi);
    for _ in 0..steps {
        let mut grad = vec![0.0; d];
        for _ in 0..batch {
            let t = sample_triplet(mix, rng)?;
            let (pa, pp, pn) = (
                numeric::dot(&phi, &t.anchor),
                numeric::dot(&phi, &t.positive),
                numeric::dot(&phi, &t.negative),
            );
            for j in 0..d {
                grad[j] += t.anchor[j] * (pn - pp) + pa * (t.negative[j] - t.positive[j]);
            }
        }
        for j in 0..d {
            phi[j] -= learning_rate * grad[j] / batch as f64;
        }
        normalize(&mut phi);
    }
    Ok(phi)
}

fn normalize(v: &mut [f64]) {
    let n = numeric::norm(v);
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
}
