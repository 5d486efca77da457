//! Embedding networks with hand-written backpropagation.

mod checkpoint;
mod forward;
mod params;
mod spec;

use rand::seq::index::sample;

pub use checkpoint::{decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint, MAGIC};
pub use forward::{backward, backward_into, embed, forward, Cache};
pub use params::{init, ParamVector};
pub use spec::{NetSpec, ParamBlock};

use crate::error::{Error, Result};
use crate::process::Embed;
use crate::rng::seeded;

/// A spec together with its parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub spec: NetSpec,
    pub params: ParamVector,
}

impl Model {
    pub fn new(spec: NetSpec, params: ParamVector) -> Result<Self> {
        spec.validate()?;
        crate::error::check_dims(spec.param_count(), params.len())?;
        Ok(Self { spec, params })
    }
}

impl Embed for Model {
    fn embed(&self, input: &[f64]) -> Result<Vec<f64>> {
        embed(&self.spec, &self.params, input)
    }
}

/// Loss over the embeddings of several inputs: returns the loss and its
/// gradient with respect to each embedding.
pub type EmbeddingLoss<'a> = dyn Fn(&[Vec<f64>]) -> Result<(f64, Vec<Vec<f64>>)> + 'a;

fn total_loss(spec: &NetSpec, params: &ParamVector, inputs: &[Vec<f64>], loss: &EmbeddingLoss) -> Result<f64> {
    let embs = inputs.iter().map(|x| embed(spec, params, x)).collect::<Result<Vec<_>>>()?;
    Ok(loss(&embs)?.0)
}

/// Maximum relative error between backprop and central differences over up
/// to 200 coordinates (all of them for small nets), with denominator
/// `max(|a|, |b|, 1e-8)`.
pub fn finite_diff_check(
    spec: &NetSpec,
    params: &ParamVector,
    inputs: &[Vec<f64>],
    loss: &EmbeddingLoss,
    eps: f64,
) -> Result<f64> {
    if !(1e-7..=1e-3).contains(&eps) {
        return Err(Error::Precondition(format!("eps {eps} outside [1e-7, 1e-3]")));
    }
    let mut embs = Vec::with_capacity(inputs.len());
    let mut caches = Vec::with_capacity(inputs.len());
    for x in inputs {
        let (e, c) = forward(spec, params, x)?;
        embs.push(e);
        caches.push(c);
    }
    let (_, grads) = loss(&embs)?;
    let mut analytic = params.zeros_like();
    for (cache, g) in caches.iter().zip(&grads) {
        backward_into(spec, params, cache, g, &mut analytic)?;
    }
    let n = params.len();
    let coords: Vec<usize> = if n <= 200 {
        (0..n).collect()
    } else {
        sample(&mut seeded(n as u64), n, 200).into_vec()
    };
    let mut worst: f64 = 0.0;
    let mut probe = params.clone();
    for j in coords {
        let a = analytic.values[j];
        // A step that straddles a ReLU or max-pool kink gives a meaningless
        // difference; such coordinates get retried with smaller steps, and a
        // wrong gradient disagrees at every step size.
        let mut best = f64::INFINITY;
        for h in [eps, eps / 10.0, eps / 100.0, eps / 1000.0] {
            let orig = probe.values[j];
            probe.values[j] = orig + h;
            let plus = total_loss(spec, &probe, inputs, loss)?;
            probe.values[j] = orig - h;
            let minus = total_loss(spec, &probe, inputs, loss)?;
            probe.values[j] = orig;
            let numeric = (plus - minus) / (2.0 * h);
            // Differences below what cancellation in `plus - minus` can resolve count as agreement.
            let roundoff = 100.0 * f64::EPSILON * plus.abs().max(minus.abs()).max(1.0) / h;
            let err = if (a - numeric).abs() <= roundoff {
                0.0
            } else {
                (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-8)
            };
            best = best.min(err);
            if best <= 1e-6 {
                break;
            }
        }
        worst = worst.max(best);
    }
    Ok(worst)
}
