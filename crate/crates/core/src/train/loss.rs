use serde::{Deserialize, Serialize};

use crate::error::{check_dims, Error, Result};
use crate::numeric::log_sum_exp;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LossKind {
    /// `ℓ(Δ) = Δ` with `Δ = d(a, p) - d(a, n)`.
    LinearTriplet,
    /// `ℓ(Δ) = log(1 + e^Δ)`.
    SoftmaxTriplet,
    /// `d(a, p)² - d(a, n)²`.
    QuadraticTriplet,
    /// `(d(e1, e2) - target)²` over all pairs in a batch.
    GenSimRegression,
    InfoNce { temperature: f64 },
    /// Cross-entropy through a linear classification head.
    Supervised,
}

impl LossKind {
    pub fn validate(&self) -> Result<()> {
        if let LossKind::InfoNce { temperature } = self {
            if !(*temperature > 0.0 && temperature.is_finite()) {
                return Err(Error::invalid("temperature", "must be positive"));
            }
        }
        Ok(())
    }

    pub fn is_triplet(&self) -> bool {
        matches!(self, LossKind::LinearTriplet | LossKind::SoftmaxTriplet | LossKind::QuadraticTriplet)
    }
}

/// Euclidean distance and its gradient with respect to `a` (zero at `a = b`).
fn dist_grad(a: &[f64], b: &[f64]) -> (f64, Vec<f64>) {
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let d = diff.iter().map(|v| v * v).sum::<f64>().sqrt();
    if d == 0.0 {
        return (0.0, vec![0.0; a.len()]);
    }
    (d, diff.into_iter().map(|v| v / d).collect())
}

fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Loss of one triplet and its gradients with respect to anchor, positive
/// and negative embeddings.
pub fn triplet_loss(kind: LossKind, a: &[f64], p: &[f64], n: &[f64]) -> Result<(f64, [Vec<f64>; 3])> {
    check_dims(a.len(), p.len())?;
    check_dims(a.len(), n.len())?;
    match kind {
        LossKind::QuadraticTriplet => {
            let mut ga = vec![0.0; a.len()];
            let mut gp = vec![0.0; a.len()];
            let mut gn = vec![0.0; a.len()];
            let mut loss = 0.0;
            for i in 0..a.len() {
                let (dp, dn) = (a[i] - p[i], a[i] - n[i]);
                loss += dp * dp - dn * dn;
                ga[i] = 2.0 * (dp - dn);
                gp[i] = -2.0 * dp;
                gn[i] = 2.0 * dn;
            }
            Ok((loss, [ga, gp, gn]))
        }
        LossKind::LinearTriplet | LossKind::SoftmaxTriplet => {
            let (d_ap, u_ap) = dist_grad(a, p);
            let (d_an, u_an) = dist_grad(a, n);
            let delta = d_ap - d_an;
            let (loss, slope) = if kind == LossKind::LinearTriplet {
                (delta, 1.0)
            } else {
                (softplus(delta), sigmoid(delta))
            };
            let ga = u_ap.iter().zip(&u_an).map(|(x, y)| slope * (x - y)).collect();
            let gp = u_ap.iter().map(|x| -slope * x).collect();
            let gn = u_an.iter().map(|y| slope * y).collect();
            Ok((loss, [ga, gp, gn]))
        }
        other => Err(Error::Precondition(format!("{other:?} is not a triplet loss"))),
    }
}

/// `(‖e1 - e2‖ - target)²` and gradients for `e1`, `e2`.
pub fn gensim_regression_loss(e1: &[f64], e2: &[f64], target: f64) -> Result<(f64, [Vec<f64>; 2])> {
    check_dims(e1.len(), e2.len())?;
    if !(target >= 0.0 && target.is_finite()) {
        return Err(Error::Precondition(format!("target distance must be nonnegative, got {target}")));
    }
    let (d, u) = dist_grad(e1, e2);
    let r = d - target;
    let g1: Vec<f64> = u.iter().map(|v| 2.0 * r * v).collect();
    let g2 = g1.iter().map(|v| -v).collect();
    Ok((r * r, [g1, g2]))
}

/// `-(1/N) Σ_i log softmax_j(cos(v_i, w_j) / τ)[i]` with gradients for both
/// views.
pub fn infonce_loss(views: &[Vec<f64>], partners: &[Vec<f64>], temperature: f64) -> Result<(f64, Vec<Vec<f64>>, Vec<Vec<f64>>)> {
    let n = views.len();
    check_dims(n, partners.len())?;
    if n < 2 {
        return Err(Error::Precondition("InfoNCE needs at least two pairs".into()));
    }
    if !(temperature > 0.0) {
        return Err(Error::Precondition("temperature must be positive".into()));
    }
    let dim = views[0].len();
    for v in views.iter().chain(partners) {
        check_dims(dim, v.len())?;
    }
    let norms = |vs: &[Vec<f64>]| -> Result<Vec<f64>> {
        vs.iter()
            .map(|v| {
                let nrm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                if nrm > 0.0 { Ok(nrm) } else { Err(Error::Precondition("zero-norm embedding".into())) }
            })
            .collect()
    };
    let (na, nb) = (norms(views)?, norms(partners)?);
    let mut cos = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            let dot: f64 = views[i].iter().zip(&partners[j]).map(|(x, y)| x * y).sum();
            cos[i * n + j] = dot / (na[i] * nb[j]);
        }
    }
    let mut loss = 0.0;
    // dL/dcos_ij
    let mut g = vec![0.0; n * n];
    for i in 0..n {
        let row: Vec<f64> = cos[i * n..(i + 1) * n].iter().map(|c| c / temperature).collect();
        let lse = log_sum_exp(&row);
        loss -= row[i] - lse;
        for j in 0..n {
            let p = (row[j] - lse).exp();
            g[i * n + j] = (p - if i == j { 1.0 } else { 0.0 }) / (n as f64 * temperature);
        }
    }
    loss /= n as f64;
    let mut ga = vec![vec![0.0; dim]; n];
    let mut gb = vec![vec![0.0; dim]; n];
    for i in 0..n {
        for j in 0..n {
            let gij = g[i * n + j];
            if gij == 0.0 {
                continue;
            }
            let c = cos[i * n + j];
            let (a, b) = (&views[i], &partners[j]);
            for k in 0..dim {
                ga[i][k] += gij * (b[k] / (na[i] * nb[j]) - c * a[k] / (na[i] * na[i]));
                gb[j][k] += gij * (a[k] / (na[i] * nb[j]) - c * b[k] / (nb[j] * nb[j]));
            }
        }
    }
    Ok((loss, ga, gb))
}

/// Softmax cross-entropy of `logits` against `label`, with the logit gradient.
pub fn cross_entropy(logits: &[f64], label: usize) -> Result<(f64, Vec<f64>)> {
    if label >= logits.len() {
        return Err(Error::Precondition(format!("label {label} out of range for {} classes", logits.len())));
    }
    let lse = log_sum_exp(logits);
    let grad = logits
        .iter()
        .enumerate()
        .map(|(k, z)| (z - lse).exp() - if k == label { 1.0 } else { 0.0 })
        .collect();
    Ok((lse - logits[label], grad))
}
