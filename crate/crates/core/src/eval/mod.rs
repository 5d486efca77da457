//! Oddball scoring, rank statistics, linear probes and PCA.

mod oddball;
mod pca;
mod probe;
mod stats;

pub use oddball::{oddball_error_rate, predict_oddball, CategoryErrors, EvalTrial, OddballResult};
pub use pca::{pca_project, symmetric_eigen, PcaResult};
pub use probe::{
    fit_logistic, fit_ridge, logistic_probe, ridge_probe, ProbeMetric, ProbeReport, INNER_FOLDS, LAMBDA_GRID,
    OUTER_FOLDS,
};
pub use stats::{bootstrap_ci, spearman_exact, spearman_rho, t_interval, MAX_EXACT_N};

use serde::{Deserialize, Serialize};

use crate::error::{check_dims, Error, Result};

/// A one-dimensional decision rule `sign * (x - cut) > 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Threshold {
    pub cut: f64,
    pub sign: f64,
}

impl Threshold {
    pub fn predict(&self, x: f64) -> bool {
        self.sign * (x - self.cut) > 0.0
    }

    /// Cut and direction maximizing training accuracy.
    pub fn fit(scores: &[f64], labels: &[bool]) -> Result<Self> {
        check_dims(scores.len(), labels.len())?;
        if scores.is_empty() {
            return Err(Error::Precondition("no scores".into()));
        }
        let mut idx: Vec<usize> = (0..scores.len()).collect();
        idx.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
        let total_pos = labels.iter().filter(|l| **l).count() as i64;
        let n = scores.len() as i64;
        // Everything above the cut predicted positive.
        let mut best = (total_pos, f64::NEG_INFINITY, 1.0);
        let mut pos_below = 0i64;
        for k in 0..idx.len() {
            if labels[idx[k]] {
                pos_below += 1;
            }
            if k + 1 < idx.len() && scores[idx[k]] == scores[idx[k + 1]] {
                continue;
            }
            let below = k as i64 + 1;
            let correct_up = (below - pos_below) + (total_pos - pos_below);
            let correct_down = n - correct_up;
            let cut = if k + 1 < idx.len() { 0.5 * (scores[idx[k]] + scores[idx[k + 1]]) } else { scores[idx[k]] };
            if correct_up > best.0 {
                best = (correct_up, cut, 1.0);
            }
            if correct_down > best.0 {
                best = (correct_down, cut, -1.0);
            }
        }
        Ok(Threshold { cut: best.1, sign: best.2 })
    }

    pub fn accuracy(&self, scores: &[f64], labels: &[bool]) -> f64 {
        let correct = scores.iter().zip(labels).filter(|(s, l)| self.predict(**s) == **l).count();
        correct as f64 / scores.len().max(1) as f64
    }
}
