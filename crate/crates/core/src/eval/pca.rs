use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaResult {
    /// Unit-norm principal directions, most variance first.
    pub components: Vec<Vec<f64>>,
    /// Centered data projected on the components.
    pub projected: Vec<Vec<f64>>,
    /// Variance along each component (divisor n - 1).
    pub explained_variance: Vec<f64>,
    pub mean: Vec<f64>,
    /// Set when fewer than `k` components carry variance.
    pub truncated: bool,
}

/// Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.
/// Returns eigenvalues and eigenvectors (as columns of the row-major `v`).
pub fn symmetric_eigen(a: &[f64], n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut a = a.to_vec();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    for _sweep in 0..100 {
        let off: f64 = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| a[i * n + j].powi(2)).sum();
        let total: f64 = a.iter().map(|x| x * x).sum();
        if off <= 1e-30 * total.max(1e-300) {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                if apq.abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q * n + q] - a[p * n + p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k * n + p], a[k * n + q]);
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p * n + k], a[q * n + k]);
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let (vkp, vkq) = (v[k * n + p], v[k * n + q]);
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    ((0..n).map(|i| a[i * n + i]).collect(), v)
}

/// Principal components of the rows of `data`.
pub fn pca_project(data: &[Vec<f64>], k: usize) -> Result<PcaResult> {
    let n = data.len();
    if n < 2 {
        return Err(Error::Precondition("PCA needs at least two rows".into()));
    }
    let d = data[0].len();
    if k == 0 || k > d {
        return Err(Error::Precondition(format!("k = {k} must lie in 1..={d}")));
    }
    for r in data {
        crate::error::check_dims(d, r.len())?;
    }
    let mean: Vec<f64> = (0..d).map(|j| data.iter().map(|r| r[j]).sum::<f64>() / n as f64).collect();
    let centered: Vec<Vec<f64>> = data.iter().map(|r| r.iter().zip(&mean).map(|(x, m)| x - m).collect()).collect();
    let mut cov = vec![0.0; d * d];
    for r in &centered {
        for i in 0..d {
            for j in 0..=i {
                cov[i * d + j] += r[i] * r[j] / (n - 1) as f64;
            }
        }
    }
    for i in 0..d {
        for j in 0..i {
            cov[j * d + i] = cov[i * d + j];
        }
    }
    let (vals, vecs) = symmetric_eigen(&cov, d);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| vals[b].total_cmp(&vals[a]));
    let top = vals[order[0]].max(0.0);
    let available = order.iter().filter(|&&i| vals[i] > 1e-12 * top.max(1e-300)).count().max(1);
    let kept = k.min(available);
    let components: Vec<Vec<f64>> = order[..kept].iter().map(|&c| (0..d).map(|r| vecs[r * d + c]).collect()).collect();
    let projected = centered
        .iter()
        .map(|r| components.iter().map(|c| c.iter().zip(r).map(|(a, b)| a * b).sum()).collect())
        .collect();
    Ok(PcaResult {
        explained_variance: order[..kept].iter().map(|&i| vals[i].max(0.0)).collect(),
        components,
        projected,
        mean,
        truncated: kept < k,
    })
}
