//! Losses, augmentation, optimizers and the training loop.

mod augment;
mod loss;
mod optim;

use std::path::PathBuf;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

pub use augment::{augment, gaussian_blur, hflip, AugmentSpec};
pub use loss::{cross_entropy, gensim_regression_loss, infonce_loss, triplet_loss, LossKind};
pub use optim::{adam_step, sgd_step, AdamState, Optimizer, OptimizerState};

use crate::error::{check_dims, Error, Result};
use crate::net::{backward_into, forward, init, save_checkpoint, Cache, NetSpec, ParamVector};
use crate::numeric::dist;
use crate::par;
use crate::process::Triplet;
use crate::raster::Raster;
use crate::rng::{child_rng, derive_seed, seeded};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub loss: LossKind,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    #[serde(default)]
    pub optimizer: Optimizer,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.loss.validate()?;
        self.optimizer.validate()?;
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::invalid("learning_rate", "must be positive"));
        }
        if self.batch_size == 0 {
            return Err(Error::invalid("batch_size", "must be positive"));
        }
        Ok(())
    }
}

const MAX_VIEW_REDRAWS: usize = 20;

/// Training data. Which variant is valid depends on the loss.
#[derive(Debug, Clone, Copy)]
pub enum DataSource<'a> {
    /// Fixed triplets, reshuffled every epoch.
    Triplets(&'a [Triplet<Vec<f64>>]),
    /// Triplets drawn afresh every epoch from a labelled pool. Each item is
    /// the anchor once; the positive is another item with the same label and
    /// the negative is drawn uniformly from the whole pool, so it shares the
    /// anchor's label at the base rate.
    LabeledTriplets { items: &'a [Vec<f64>], labels: &'a [usize] },
    /// Every pair inside a batch is a regression example whose target is the
    /// Euclidean distance between the two items' descriptors.
    PairTargets { items: &'a [Vec<f64>], descriptors: &'a [Vec<f64>] },
    /// Two augmented views of every image, fresh each epoch.
    Augmented { items: &'a [Raster], augment: AugmentSpec },
    /// Class labels for a linear classification head on the embedding.
    Labeled { items: &'a [Vec<f64>], labels: &'a [usize], n_classes: usize },
}

impl DataSource<'_> {
    fn len(&self) -> usize {
        match self {
            DataSource::Triplets(t) => t.len(),
            DataSource::LabeledTriplets { items, .. }
            | DataSource::PairTargets { items, .. }
            | DataSource::Labeled { items, .. } => items.len(),
            DataSource::Augmented { items, .. } => items.len(),
        }
    }

    fn check(&self, loss: LossKind) -> Result<()> {
        let ok = match self {
            DataSource::Triplets(_) | DataSource::LabeledTriplets { .. } => loss.is_triplet(),
            DataSource::PairTargets { .. } => loss == LossKind::GenSimRegression,
            DataSource::Augmented { .. } => matches!(loss, LossKind::InfoNce { .. }),
            DataSource::Labeled { .. } => loss == LossKind::Supervised,
        };
        if !ok {
            return Err(Error::Precondition(format!("data source does not fit loss {loss:?}")));
        }
        match self {
            DataSource::LabeledTriplets { items, labels } => check_dims(items.len(), labels.len()),
            DataSource::PairTargets { items, descriptors } => check_dims(items.len(), descriptors.len()),
            DataSource::Labeled { items, labels, n_classes } => {
                check_dims(items.len(), labels.len())?;
                if labels.iter().any(|l| l >= n_classes) {
                    return Err(Error::Precondition("label out of range".into()));
                }
                Ok(())
            }
            DataSource::Augmented { augment, .. } => augment.validate(),
            DataSource::Triplets(_) => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub mean_loss: f64,
    pub wall_ms: u64,
}

#[derive(Debug, Clone, Default)]
pub struct TrainOptions {
    /// Starting parameters; drawn from the seed when absent.
    pub initial: Option<ParamVector>,
    /// Overwritten after every completed epoch.
    pub checkpoint_path: Option<PathBuf>,
}

#[derive(Debug, Clone)]
pub struct TrainOutput {
    pub params: ParamVector,
    /// Classification head (`n_classes x (dim + 1)`, bias last) for the
    /// supervised loss.
    pub head: Option<Vec<f64>>,
    pub log: Vec<EpochRecord>,
}

/// Loss and gradient of one batch, summed per example in index order so the
/// result does not depend on how the work was split across threads.
struct BatchGrad {
    loss: f64,
    grad: Vec<f64>,
}

struct Trainer<'a> {
    spec: &'a NetSpec,
    config: &'a TrainConfig,
    n_net: usize,
    head_dim: Option<(usize, usize)>,
}

fn accumulate(parts: Vec<Result<(f64, Vec<f64>)>>, n: usize) -> Result<BatchGrad> {
    let mut loss = 0.0;
    let mut grad = vec![0.0; n];
    for part in parts {
        let (l, g) = part?;
        loss += l;
        for (a, b) in grad.iter_mut().zip(&g) {
            *a += b;
        }
    }
    Ok(BatchGrad { loss, grad })
}

impl Trainer<'_> {
    fn net_params(&self, all: &[f64], template: &ParamVector) -> ParamVector {
        ParamVector { values: all[..self.n_net].to_vec(), layout: template.layout.clone() }
    }

    fn backward_many(&self, params: &ParamVector, caches: &[Cache], grads: &[Vec<f64>], total: usize) -> Result<Vec<f64>> {
        let parts = par::map_indexed(caches.len(), |i| {
            let mut g = params.zeros_like();
            backward_into(self.spec, params, &caches[i], &grads[i], &mut g)?;
            Ok((0.0, g.values))
        });
        let mut out = accumulate(parts, self.n_net)?.grad;
        out.resize(total, 0.0);
        Ok(out)
    }

    fn forward_many(&self, params: &ParamVector, inputs: &[&[f64]]) -> Result<(Vec<Vec<f64>>, Vec<Cache>)> {
        let outs = par::try_map_indexed(inputs.len(), |i| forward(self.spec, params, inputs[i]))?;
        Ok(outs.into_iter().unzip())
    }

    fn triplet_batch(&self, params: &ParamVector, triplets: &[(&[f64], &[f64], &[f64])], total: usize) -> Result<BatchGrad> {
        let scale = 1.0 / triplets.len() as f64;
        let parts = par::map_indexed(triplets.len(), |i| {
            let (a, p, n) = triplets[i];
            let (ea, ca) = forward(self.spec, params, a)?;
            let (ep, cp) = forward(self.spec, params, p)?;
            let (en, cn) = forward(self.spec, params, n)?;
            let (loss, [ga, gp, gn]) = triplet_loss(self.config.loss, &ea, &ep, &en)?;
            let mut g = params.zeros_like();
            for (c, gr) in [(&ca, ga), (&cp, gp), (&cn, gn)] {
                let gr: Vec<f64> = gr.iter().map(|v| v * scale).collect();
                backward_into(self.spec, params, c, &gr, &mut g)?;
            }
            Ok((loss * scale, g.values))
        });
        let mut out = accumulate(parts, self.n_net)?;
        out.grad.resize(total, 0.0);
        Ok(out)
    }

    fn regression_batch(&self, params: &ParamVector, items: &[&[f64]], descs: &[&[f64]], total: usize) -> Result<BatchGrad> {
        let (embs, caches) = self.forward_many(params, items)?;
        let n = items.len();
        let n_pairs = n * (n - 1) / 2;
        let mut grads = vec![vec![0.0; self.spec.output_dim()]; n];
        let mut loss = 0.0;
        if n_pairs > 0 {
            let scale = 1.0 / n_pairs as f64;
            for i in 0..n {
                for j in (i + 1)..n {
                    let target = dist(descs[i], descs[j]);
                    let (l, [gi, gj]) = gensim_regression_loss(&embs[i], &embs[j], target)?;
                    loss += l * scale;
                    for (a, b) in grads[i].iter_mut().zip(&gi) {
                        *a += b * scale;
                    }
                    for (a, b) in grads[j].iter_mut().zip(&gj) {
                        *a += b * scale;
                    }
                }
            }
        }
        Ok(BatchGrad { loss, grad: self.backward_many(params, &caches, &grads, total)? })
    }

    fn infonce_batch(&self, params: &ParamVector, views: &[Vec<f64>], total: usize) -> Result<BatchGrad> {
        let LossKind::InfoNce { temperature } = self.config.loss else { unreachable!("checked") };
        let refs: Vec<&[f64]> = views.iter().map(Vec::as_slice).collect();
        let (embs, caches) = self.forward_many(params, &refs)?;
        let half = views.len() / 2;
        let (a, b) = embs.split_at(half);
        let (loss, ga, gb) = infonce_loss(a, b, temperature)?;
        let grads: Vec<Vec<f64>> = ga.into_iter().chain(gb).collect();
        Ok(BatchGrad { loss, grad: self.backward_many(params, &caches, &grads, total)? })
    }

    fn supervised_batch(&self, all: &[f64], params: &ParamVector, items: &[&[f64]], labels: &[usize]) -> Result<BatchGrad> {
        let (n_classes, dim) = self.head_dim.expect("supervised has a head");
        let head = &all[self.n_net..];
        let (embs, caches) = self.forward_many(params, items)?;
        let scale = 1.0 / items.len() as f64;
        let mut head_grad = vec![0.0; head.len()];
        let mut emb_grads = Vec::with_capacity(items.len());
        let mut loss = 0.0;
        for (e, &label) in embs.iter().zip(labels) {
            let logits: Vec<f64> = (0..n_classes)
                .map(|k| {
                    let row = &head[k * (dim + 1)..(k + 1) * (dim + 1)];
                    row[dim] + row[..dim].iter().zip(e).map(|(w, x)| w * x).sum::<f64>()
                })
                .collect();
            let (l, gl) = cross_entropy(&logits, label)?;
            loss += l * scale;
            let mut ge = vec![0.0; dim];
            for k in 0..n_classes {
                let g = gl[k] * scale;
                let row = &head[k * (dim + 1)..(k + 1) * (dim + 1)];
                let grow = &mut head_grad[k * (dim + 1)..(k + 1) * (dim + 1)];
                for d in 0..dim {
                    grow[d] += g * e[d];
                    ge[d] += g * row[d];
                }
                grow[dim] += g;
            }
            emb_grads.push(ge);
        }
        let mut grad = self.backward_many(params, &caches, &emb_grads, self.n_net)?;
        grad.extend(head_grad);
        Ok(BatchGrad { loss, grad })
    }
}

/// Trains `spec` on `source` with minibatch gradient steps. Initialization,
/// data order and augmentation draws all derive from `config.seed`.
pub fn train_run(spec: &NetSpec, config: &TrainConfig, source: DataSource<'_>, options: &TrainOptions) -> Result<TrainOutput> {
    spec.validate()?;
    config.validate()?;
    source.check(config.loss)?;
    let n_items = source.len();
    if n_items == 0 {
        return Err(Error::Precondition("empty training set".into()));
    }
    let mut init_rng = seeded(derive_seed(config.seed, "init"));
    let template = match &options.initial {
        Some(p) => {
            check_dims(spec.param_count(), p.len())?;
            p.clone()
        }
        None => init(spec, &mut init_rng)?,
    };
    let head_dim = match source {
        DataSource::Labeled { n_classes, .. } => Some((n_classes, spec.output_dim())),
        _ => None,
    };
    let mut all = template.values.clone();
    if let Some((k, d)) = head_dim {
        let limit = (6.0 / d as f64).sqrt();
        for _ in 0..k {
            for j in 0..=d {
                all.push(if j < d { init_rng.random_range(-limit..limit) } else { 0.0 });
            }
        }
    }
    let trainer = Trainer { spec, config, n_net: template.len(), head_dim };
    let total = all.len();
    let mut opt = OptimizerState::new(config.optimizer, total);
    let mut order_rng = seeded(derive_seed(config.seed, "order"));
    let mut log = Vec::with_capacity(config.epochs);
    let mut order: Vec<usize> = (0..n_items).collect();

    for epoch in 0..config.epochs {
        let start = Instant::now();
        order.shuffle(&mut order_rng);
        // Epoch-level draws that must not depend on batch boundaries.
        let pairing: Vec<(usize, usize)> = match source {
            DataSource::LabeledTriplets { labels, .. } => {
                let mut by_label: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
                for (i, l) in labels.iter().enumerate() {
                    by_label.entry(*l).or_default().push(i);
                }
                order
                    .iter()
                    .map(|&a| {
                        let same = &by_label[&labels[a]];
                        let p = if same.len() > 1 {
                            loop {
                                let c = same[order_rng.random_range(0..same.len())];
                                if c != a {
                                    break c;
                                }
                            }
                        } else {
                            a
                        };
                        (p, order_rng.random_range(0..n_items))
                    })
                    .collect()
            }
            _ => Vec::new(),
        };
        let aug_seed = derive_seed(config.seed, &format!("augment/{epoch}"));
        let mut weighted_loss = 0.0;
        let mut seen = 0usize;
        for (b, chunk) in order.chunks(config.batch_size).enumerate() {
            let net = trainer.net_params(&all, &template);
            let batch = match source {
                DataSource::Triplets(ts) => {
                    let refs: Vec<_> = chunk
                        .iter()
                        .map(|&i| (ts[i].anchor.as_slice(), ts[i].positive.as_slice(), ts[i].negative.as_slice()))
                        .collect();
                    trainer.triplet_batch(&net, &refs, total)?
                }
                DataSource::LabeledTriplets { items, .. } => {
                    let base = b * config.batch_size;
                    let refs: Vec<_> = chunk
                        .iter()
                        .enumerate()
                        .map(|(k, &a)| {
                            let (p, n) = pairing[base + k];
                            (items[a].as_slice(), items[p].as_slice(), items[n].as_slice())
                        })
                        .collect();
                    trainer.triplet_batch(&net, &refs, total)?
                }
                DataSource::PairTargets { items, descriptors } => {
                    let xs: Vec<&[f64]> = chunk.iter().map(|&i| items[i].as_slice()).collect();
                    let ds: Vec<&[f64]> = chunk.iter().map(|&i| descriptors[i].as_slice()).collect();
                    trainer.regression_batch(&net, &xs, &ds, total)?
                }
                DataSource::Augmented { items, augment: spec_aug } => {
                    if chunk.len() < 2 {
                        continue;
                    }
                    let n = chunk.len();
                    let views = par::map_indexed(2 * n, |k| {
                        let item = chunk[k % n];
                        let mut rng = child_rng(aug_seed, (2 * item + k / n) as u64);
                        // A crop that misses every stroke carries no signal and
                        // embeds to the zero vector, so redraw it.
                        let mut view = augment(&items[item], &spec_aug, &mut rng);
                        for _ in 0..MAX_VIEW_REDRAWS {
                            if view.count_nonzero() > 0 || items[item].count_nonzero() == 0 {
                                break;
                            }
                            view = augment(&items[item], &spec_aug, &mut rng);
                        }
                        view.into_vec()
                    });
                    trainer.infonce_batch(&net, &views, total)?
                }
                DataSource::Labeled { items, labels, .. } => {
                    let xs: Vec<&[f64]> = chunk.iter().map(|&i| items[i].as_slice()).collect();
                    let ls: Vec<usize> = chunk.iter().map(|&i| labels[i]).collect();
                    trainer.supervised_batch(&all, &net, &xs, &ls)?
                }
            };
            if !batch.loss.is_finite() || batch.grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::Diverged { epoch, last_good: Box::new(net) });
            }
            weighted_loss += batch.loss * chunk.len() as f64;
            seen += chunk.len();
            opt.step(&mut all, &batch.grad, config.learning_rate)?;
        }
        let params = trainer.net_params(&all, &template);
        if !params.is_finite() {
            return Err(Error::Diverged { epoch, last_good: Box::new(params) });
        }
        if let Some(path) = &options.checkpoint_path {
            save_checkpoint(path, spec, &params)?;
        }
        log.push(EpochRecord {
            epoch,
            mean_loss: if seen > 0 { weighted_loss / seen as f64 } else { f64::NAN },
            wall_ms: start.elapsed().as_millis() as u64,
        });
    }
    let params = trainer.net_params(&all, &template);
    let head = head_dim.map(|_| all[trainer.n_net..].to_vec());
    Ok(TrainOutput { params, head, log })
}
