//! Independent numeric oracles shared by integration tests.

use std::f64::consts::PI;

/// `∫₀¹ θ^(a-1) (1-θ)^(b-1) dθ` by tanh-sinh quadrature on `points` nodes.
/// Both `θ` and `1 - θ` come straight from the substitution, so the endpoint
/// singularities of small shape parameters cost no precision.
pub fn beta_integral(a: f64, b: f64, points: usize) -> f64 {
    let half_width = 6.0;
    let h = 2.0 * half_width / (points - 1) as f64;
    let mut total = 0.0;
    for k in 0..points {
        let t = -half_width + k as f64 * h;
        let u = PI * t.sinh();
        let theta = 1.0 / (1.0 + (-u).exp());
        let one_minus = 1.0 / (1.0 + u.exp());
        let jac = PI * t.cosh() * theta * one_minus;
        // θ^(a-1)(1-θ)^(b-1) · θ(1-θ)π cosh t, in logs to avoid underflow.
        let log_term = (a - 1.0) * theta.ln() + (b - 1.0) * one_minus.ln() + jac.ln();
        if log_term.is_finite() {
            total += log_term.exp();
        }
    }
    total * h
}

/// Log generative similarity of two binary feature vectors under independent
/// Beta(a, b) priors on each feature probability, by numeric integration of
/// the shared- and separate-parameter marginals.
pub fn beta_bernoulli_log_gen_sim(f1: &[u8], f2: &[u8], a: f64, b: f64, points: usize) -> f64 {
    let z = beta_integral(a, b, points);
    f1.iter()
        .zip(f2)
        .map(|(&x, &y)| {
            let (x, y) = (f64::from(x), f64::from(y));
            let joint = beta_integral(a + x + y, b + 2.0 - x - y, points);
            let m1 = beta_integral(a + x, b + 1.0 - x, points);
            let m2 = beta_integral(a + y, b + 1.0 - y, points);
            (joint * z / (m1 * m2)).ln()
        })
        .sum()
}
