use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::sq_dist;
use crate::par;
use crate::process::Embed;
use crate::quad::QuadCategory;

/// A trial as network inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalTrial {
    pub category: QuadCategory,
    pub items: Vec<Vec<f64>>,
    pub oddball_index: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryErrors {
    pub error_rate: f64,
    pub n_trials: usize,
    /// Trials where the largest distance was shared by several items.
    pub ties: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OddballResult {
    pub per_category: BTreeMap<QuadCategory, CategoryErrors>,
}

impl OddballResult {
    /// Error rates in the order of [`QuadCategory::ALL`], skipping absent ones.
    pub fn rates_by_rank(&self) -> Vec<(QuadCategory, f64)> {
        QuadCategory::ALL
            .iter()
            .filter_map(|c| self.per_category.get(c).map(|e| (*c, e.error_rate)))
            .collect()
    }
}

/// Index of the embedding farthest from the mean of all of them (lowest
/// index on ties) and whether a tie occurred.
pub fn predict_oddball(embeddings: &[Vec<f64>]) -> (usize, bool) {
    let d = embeddings[0].len();
    let n = embeddings.len() as f64;
    let mut centroid = vec![0.0; d];
    for e in embeddings {
        for (c, x) in centroid.iter_mut().zip(e) {
            *c += x / n;
        }
    }
    let dists: Vec<f64> = embeddings.iter().map(|e| sq_dist(e, &centroid)).collect();
    let best = dists.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let winners: Vec<usize> = (0..dists.len()).filter(|&i| dists[i] == best).collect();
    (winners[0], winners.len() > 1)
}

pub fn oddball_error_rate<E: Embed + ?Sized>(net: &E, trials: &[EvalTrial]) -> Result<OddballResult> {
    if trials.is_empty() {
        return Err(Error::Precondition("no trials".into()));
    }
    let outcomes = par::try_map_indexed(trials.len(), |i| {
        let t = &trials[i];
        let embs = t.items.iter().map(|x| net.embed(x)).collect::<Result<Vec<_>>>()?;
        let (pred, tie) = predict_oddball(&embs);
        Ok::<_, Error>((pred != t.oddball_index, tie))
    })?;
    let mut per_category: BTreeMap<QuadCategory, CategoryErrors> = BTreeMap::new();
    for (t, (wrong, tie)) in trials.iter().zip(outcomes) {
        let e = per_category.entry(t.category).or_insert(CategoryErrors { error_rate: 0.0, n_trials: 0, ties: 0 });
        e.n_trials += 1;
        e.error_rate += f64::from(u8::from(wrong));
        e.ties += usize::from(tie);
    }
    for e in per_category.values_mut() {
        e.error_rate /= e.n_trials as f64;
    }
    Ok(OddballResult { per_category })
}
