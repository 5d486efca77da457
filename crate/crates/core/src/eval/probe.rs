//! Cross-validated linear probes on frozen embeddings.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::stats::t_interval;
use crate::error::{check_dims, Error, Result};
use crate::numeric::{mean, Interval};
use crate::rng::{derive_seed, seeded};

pub const OUTER_FOLDS: usize = 5;
pub const INNER_FOLDS: usize = 4;
pub const LAMBDA_GRID: [f64; 7] = [1e-3, 1e-2, 1e-1, 1.0, 1e1, 1e2, 1e3];
const TOL: f64 = 1e-8;
const MAX_ITER: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeMetric {
    Accuracy,
    RSquared,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeReport {
    pub metric: ProbeMetric,
    pub folds: Vec<f64>,
    pub mean: f64,
    /// 95% Student-t interval over the folds.
    pub ci: Interval,
    /// Regularization strength picked in each outer fold.
    pub lambdas: Vec<f64>,
}

impl ProbeReport {
    fn new(metric: ProbeMetric, folds: Vec<f64>, lambdas: Vec<f64>) -> Self {
        let ci = t_interval(&folds, 0.95);
        Self { metric, mean: mean(&folds), folds, ci, lambdas }
    }
}

/// Standardization fitted on a training split.
struct Scaler {
    mean: Vec<f64>,
    scale: Vec<f64>,
}

impl Scaler {
    fn fit(rows: &[&[f64]]) -> Self {
        let d = rows[0].len();
        let n = rows.len() as f64;
        let mut m = vec![0.0; d];
        for r in rows {
            for (a, b) in m.iter_mut().zip(r.iter()) {
                *a += b / n;
            }
        }
        let mut s = vec![0.0; d];
        for r in rows {
            for j in 0..d {
                s[j] += (r[j] - m[j]).powi(2) / n;
            }
        }
        let scale = s.into_iter().map(|v| if v > 1e-24 { v.sqrt() } else { 1.0 }).collect();
        Self { mean: m, scale }
    }

    fn apply(&self, rows: &[&[f64]]) -> Vec<Vec<f64>> {
        rows.iter()
            .map(|r| r.iter().zip(&self.mean).zip(&self.scale).map(|((x, m), s)| (x - m) / s).collect())
            .collect()
    }
}

/// Solves `a x = b` for a symmetric positive definite `a` (row-major).
fn cholesky_solve(a: &[f64], b: &[f64]) -> Result<Vec<f64>> {
    let n = b.len();
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let s: f64 = (0..j).map(|k| l[i * n + k] * l[j * n + k]).sum();
            if i == j {
                let d = a[i * n + i] - s;
                if d <= 0.0 {
                    return Err(Error::NonFinite { context: "Hessian not positive definite".into() });
                }
                l[i * n + i] = d.sqrt();
            } else {
                l[i * n + j] = (a[i * n + j] - s) / l[j * n + j];
            }
        }
    }
    let mut y = vec![0.0; n];
    for i in 0..n {
        y[i] = (b[i] - (0..i).map(|k| l[i * n + k] * y[k]).sum::<f64>()) / l[i * n + i];
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        x[i] = (y[i] - ((i + 1)..n).map(|k| l[k * n + i] * x[k]).sum::<f64>()) / l[i * n + i];
    }
    Ok(x)
}

/// L2-regularized logistic regression (bias unpenalized) fitted by damped
/// Newton iterations on the mean log-loss. Returns `[w..., b]`.
pub fn fit_logistic(x: &[Vec<f64>], y: &[bool], lambda: f64) -> Result<Vec<f64>> {
    let n = x.len();
    let d = x[0].len();
    let p = d + 1;
    let mut w = vec![0.0; p];
    let objective = |w: &[f64]| -> f64 {
        let mut total = 0.0;
        for (xi, yi) in x.iter().zip(y) {
            let z = w[d] + xi.iter().zip(w).map(|(a, b)| a * b).sum::<f64>();
            let s = if *yi { -z } else { z };
            total += if s > 0.0 { s + (-s).exp().ln_1p() } else { s.exp().ln_1p() };
        }
        total / n as f64 + 0.5 * lambda * w[..d].iter().map(|v| v * v).sum::<f64>()
    };
    let mut f = objective(&w);
    for _ in 0..MAX_ITER {
        let mut g = vec![0.0; p];
        let mut h = vec![0.0; p * p];
        for (xi, yi) in x.iter().zip(y) {
            let z = w[d] + xi.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>();
            let pr = 1.0 / (1.0 + (-z).exp());
            let r = pr - if *yi { 1.0 } else { 0.0 };
            let s = pr * (1.0 - pr);
            for a in 0..p {
                let xa = if a < d { xi[a] } else { 1.0 };
                g[a] += r * xa / n as f64;
                for b in 0..=a {
                    let xb = if b < d { xi[b] } else { 1.0 };
                    h[a * p + b] += s * xa * xb / n as f64;
                }
            }
        }
        for a in 0..p {
            for b in 0..a {
                h[b * p + a] = h[a * p + b];
            }
            if a < d {
                g[a] += lambda * w[a];
                h[a * p + a] += lambda;
            }
            h[a * p + a] += 1e-12;
        }
        let gnorm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        if gnorm < TOL {
            break;
        }
        let step = cholesky_solve(&h, &g)?;
        let decrement: f64 = g.iter().zip(&step).map(|(a, b)| a * b).sum();
        // The gradient can stall at a roundoff floor just above TOL; the
        // Newton decrement still tells us the objective cannot move.
        if decrement / 2.0 < TOL * TOL {
            break;
        }
        let mut t = 1.0;
        loop {
            let cand: Vec<f64> = w.iter().zip(&step).map(|(a, s)| a - t * s).collect();
            let fc = objective(&cand);
            if fc <= f - 1e-4 * t * decrement || t < 1e-10 {
                w = cand;
                f = fc;
                break;
            }
            t *= 0.5;
        }
        if t < 1e-10 {
            break;
        }
    }
    Ok(w)
}

fn predict_logistic(w: &[f64], x: &[f64]) -> f64 {
    let d = x.len();
    w[d] + x.iter().zip(w).map(|(a, b)| a * b).sum::<f64>()
}

/// Ridge regression with an unpenalized intercept, solved by conjugate
/// gradients on the normal equations of the centered problem.
pub fn fit_ridge(x: &[Vec<f64>], y: &[f64], lambda: f64) -> Vec<f64> {
    let n = x.len();
    let d = x[0].len();
    let xm: Vec<f64> = (0..d).map(|j| x.iter().map(|r| r[j]).sum::<f64>() / n as f64).collect();
    let ym = mean(y);
    let xc: Vec<Vec<f64>> = x.iter().map(|r| r.iter().zip(&xm).map(|(a, m)| a - m).collect()).collect();
    let yc: Vec<f64> = y.iter().map(|v| v - ym).collect();
    // (XᵀX/n + λI) w = Xᵀy/n
    let apply = |v: &[f64]| -> Vec<f64> {
        let xv: Vec<f64> = xc.iter().map(|r| r.iter().zip(v).map(|(a, b)| a * b).sum()).collect();
        let mut out: Vec<f64> = v.iter().map(|vi| lambda * vi).collect();
        for (r, s) in xc.iter().zip(&xv) {
            for j in 0..d {
                out[j] += r[j] * s / n as f64;
            }
        }
        out
    };
    let mut b = vec![0.0; d];
    for (r, yi) in xc.iter().zip(&yc) {
        for j in 0..d {
            b[j] += r[j] * yi / n as f64;
        }
    }
    let mut w = vec![0.0; d];
    let mut r = b.clone();
    let mut p = r.clone();
    let mut rs: f64 = r.iter().map(|v| v * v).sum();
    let bnorm = rs.sqrt().max(1e-300);
    for _ in 0..MAX_ITER.min(10 * d + 100) {
        if rs.sqrt() <= TOL * bnorm {
            break;
        }
        let ap = apply(&p);
        let alpha = rs / p.iter().zip(&ap).map(|(a, b)| a * b).sum::<f64>();
        for j in 0..d {
            w[j] += alpha * p[j];
            r[j] -= alpha * ap[j];
        }
        let rs_new: f64 = r.iter().map(|v| v * v).sum();
        for j in 0..d {
            p[j] = r[j] + rs_new / rs * p[j];
        }
        rs = rs_new;
    }
    let intercept = ym - w.iter().zip(&xm).map(|(a, b)| a * b).sum::<f64>();
    w.push(intercept);
    w
}

fn predict_linear(w: &[f64], x: &[f64]) -> f64 {
    predict_logistic(w, x)
}

/// Fold assignment; with labels the folds are stratified.
fn folds(n: usize, k: usize, strata: Option<&[bool]>, seed: u64) -> Vec<usize> {
    let mut rng = seeded(seed);
    let mut assign = vec![0usize; n];
    let groups: Vec<Vec<usize>> = match strata {
        Some(s) => vec![(0..n).filter(|&i| s[i]).collect(), (0..n).filter(|&i| !s[i]).collect()],
        None => vec![(0..n).collect()],
    };
    let mut offset = 0;
    for mut g in groups {
        g.shuffle(&mut rng);
        for (pos, i) in g.into_iter().enumerate() {
            assign[i] = (pos + offset) % k;
        }
        offset += 1;
    }
    assign
}

fn split<T: Clone>(v: &[T], assign: &[usize], fold: usize) -> (Vec<T>, Vec<T>) {
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (x, a) in v.iter().zip(assign) {
        if *a == fold {
            test.push(x.clone());
        } else {
            train.push(x.clone());
        }
    }
    (train, test)
}

fn logloss(w: &[f64], x: &[Vec<f64>], y: &[bool]) -> f64 {
    x.iter()
        .zip(y)
        .map(|(xi, yi)| {
            let z = predict_logistic(w, xi);
            let s = if *yi { -z } else { z };
            if s > 0.0 { s + (-s).exp().ln_1p() } else { s.exp().ln_1p() }
        })
        .sum::<f64>()
        / x.len() as f64
}

fn pick_lambda_logistic(x: &[Vec<f64>], y: &[bool], seed: u64) -> Result<f64> {
    let assign = folds(x.len(), INNER_FOLDS, Some(y), seed);
    let mut best = (f64::INFINITY, LAMBDA_GRID[0]);
    for &lambda in &LAMBDA_GRID {
        let mut total = 0.0;
        for f in 0..INNER_FOLDS {
            let (xtr, xte) = split(x, &assign, f);
            let (ytr, yte) = split(y, &assign, f);
            if xte.is_empty() || !ytr.contains(&true) || !ytr.contains(&false) {
                return Err(Error::Precondition("inner fold has a single class".into()));
            }
            let w = fit_logistic(&xtr, &ytr, lambda)?;
            total += logloss(&w, &xte, &yte);
        }
        if total < best.0 {
            best = (total, lambda);
        }
    }
    Ok(best.1)
}

/// Test accuracy of a logistic classifier under 5-fold cross-validation,
/// with the penalty tuned by an inner 4-fold split of each training part.
pub fn logistic_probe(embeddings: &[Vec<f64>], labels: &[bool], seed: u64) -> Result<ProbeReport> {
    check_dims(embeddings.len(), labels.len())?;
    let pos = labels.iter().filter(|l| **l).count();
    if pos < 10 || labels.len() - pos < 10 {
        return Err(Error::Precondition("logistic probe needs at least 10 examples per class".into()));
    }
    let assign = folds(embeddings.len(), OUTER_FOLDS, Some(labels), seed);
    let mut accs = Vec::with_capacity(OUTER_FOLDS);
    let mut lambdas = Vec::with_capacity(OUTER_FOLDS);
    for f in 0..OUTER_FOLDS {
        let (xtr, xte) = split(embeddings, &assign, f);
        let (ytr, yte) = split(labels, &assign, f);
        if !ytr.contains(&true) || !ytr.contains(&false) || !yte.contains(&true) || !yte.contains(&false) {
            return Err(Error::Precondition(format!("fold {f} has a single class")));
        }
        let tr_refs: Vec<&[f64]> = xtr.iter().map(Vec::as_slice).collect();
        let te_refs: Vec<&[f64]> = xte.iter().map(Vec::as_slice).collect();
        let scaler = Scaler::fit(&tr_refs);
        let (xtr, xte) = (scaler.apply(&tr_refs), scaler.apply(&te_refs));
        let lambda = pick_lambda_logistic(&xtr, &ytr, derive_seed(seed, &format!("inner/{f}")))?;
        let w = fit_logistic(&xtr, &ytr, lambda)?;
        let correct = xte.iter().zip(&yte).filter(|(x, y)| (predict_logistic(&w, x) > 0.0) == **y).count();
        accs.push(correct as f64 / xte.len() as f64);
        lambdas.push(lambda);
    }
    Ok(ProbeReport::new(ProbeMetric::Accuracy, accs, lambdas))
}

/// Ordinary least squares of `y` on `[1, c]`; returns `(intercept, slope)`.
fn ols(c: &[f64], y: &[f64]) -> (f64, f64) {
    let (mc, my) = (mean(c), mean(y));
    let sxx: f64 = c.iter().map(|v| (v - mc).powi(2)).sum();
    let sxy: f64 = c.iter().zip(y).map(|(a, b)| (a - mc) * (b - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    (my - slope * mc, slope)
}

fn mse(w: &[f64], x: &[Vec<f64>], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(xi, yi)| (predict_linear(w, xi) - yi).powi(2)).sum::<f64>() / x.len() as f64
}

/// Held-out R² of a ridge regression from embeddings to `targets` after the
/// confound has been regressed out of the targets (fitted on each training
/// part only). A test fold whose residual targets have no variance scores 0.
pub fn ridge_probe(embeddings: &[Vec<f64>], targets: &[f64], confound: &[f64], seed: u64) -> Result<ProbeReport> {
    check_dims(embeddings.len(), targets.len())?;
    check_dims(embeddings.len(), confound.len())?;
    if embeddings.len() < 20 {
        return Err(Error::Precondition("ridge probe needs at least 20 items".into()));
    }
    if targets.iter().all(|t| *t == targets[0]) {
        return Err(Error::Precondition("ridge probe targets are constant".into()));
    }
    let assign = folds(embeddings.len(), OUTER_FOLDS, None, seed);
    let mut r2s = Vec::with_capacity(OUTER_FOLDS);
    let mut lambdas = Vec::with_capacity(OUTER_FOLDS);
    for f in 0..OUTER_FOLDS {
        let (xtr, xte) = split(embeddings, &assign, f);
        let (ytr, yte) = split(targets, &assign, f);
        let (ctr, cte) = split(confound, &assign, f);
        let (a, b) = ols(&ctr, &ytr);
        let rtr: Vec<f64> = ytr.iter().zip(&ctr).map(|(y, c)| y - a - b * c).collect();
        let rte: Vec<f64> = yte.iter().zip(&cte).map(|(y, c)| y - a - b * c).collect();
        let tr_refs: Vec<&[f64]> = xtr.iter().map(Vec::as_slice).collect();
        let te_refs: Vec<&[f64]> = xte.iter().map(Vec::as_slice).collect();
        let scaler = Scaler::fit(&tr_refs);
        let (xtr, xte) = (scaler.apply(&tr_refs), scaler.apply(&te_refs));

        let inner = folds(xtr.len(), INNER_FOLDS, None, derive_seed(seed, &format!("inner/{f}")));
        let mut best = (f64::INFINITY, LAMBDA_GRID[0]);
        for &lambda in &LAMBDA_GRID {
            let mut total = 0.0;
            for g in 0..INNER_FOLDS {
                let (itr, ite) = split(&xtr, &inner, g);
                let (jtr, jte) = split(&rtr, &inner, g);
                if ite.is_empty() || itr.is_empty() {
                    continue;
                }
                total += mse(&fit_ridge(&itr, &jtr, lambda), &ite, &jte);
            }
            if total < best.0 {
                best = (total, lambda);
            }
        }
        let w = fit_ridge(&xtr, &rtr, best.1);
        let m = mean(&rte);
        let sst: f64 = rte.iter().map(|v| (v - m).powi(2)).sum();
        let sse: f64 = xte.iter().zip(&rte).map(|(x, y)| (predict_linear(&w, x) - y).powi(2)).sum();
        let scale: f64 = yte.iter().map(|v| v * v).sum::<f64>().max(1.0);
        r2s.push(if sst <= 1e-20 * scale { 0.0 } else { 1.0 - sse / sst });
        lambdas.push(best.1);
    }
    Ok(ProbeReport::new(ProbeMetric::RSquared, r2s, lambdas))
}
