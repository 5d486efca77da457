//! Finite-difference check of every loss through a network.

use gensim::net::{finite_diff_check, init, EmbeddingLoss, NetSpec};
use gensim::rng::{derive_seed, seeded};
use gensim::train::{cross_entropy, gensim_regression_loss, infonce_loss, triplet_loss, LossKind};
use gensim::Result;
use rand::Rng;
use serde_json::{json, Value};

pub const TOLERANCE: f64 = 1e-4;
pub const EPS: f64 = 1e-5;

type Loss = Box<EmbeddingLoss<'static>>;

fn losses(dim: usize) -> Vec<(&'static str, usize, Loss)> {
    let triplet = |kind: LossKind| -> Loss {
        Box::new(move |e: &[Vec<f64>]| {
            let (l, [a, p, n]) = triplet_loss(kind, &e[0], &e[1], &e[2])?;
            Ok((l, vec![a, p, n]))
        })
    };
    // Fixed head so the classifier loss is a function of the embedding alone.
    let head: Vec<f64> = (0..3 * (dim + 1)).map(|i| ((i * 7 % 11) as f64 - 5.0) / 10.0).collect();
    vec![
        ("linear_triplet", 3, triplet(LossKind::LinearTriplet)),
        ("softmax_triplet", 3, triplet(LossKind::SoftmaxTriplet)),
        ("quadratic_triplet", 3, triplet(LossKind::QuadraticTriplet)),
        (
            "gensim_regression",
            2,
            Box::new(|e: &[Vec<f64>]| {
                let (l, [a, b]) = gensim_regression_loss(&e[0], &e[1], 0.8)?;
                Ok((l, vec![a, b]))
            }),
        ),
        (
            "infonce",
            4,
            Box::new(|e: &[Vec<f64>]| {
                let (l, ga, gb) = infonce_loss(&e[..2], &e[2..], 0.5)?;
                Ok((l, ga.into_iter().chain(gb).collect()))
            }),
        ),
        (
            "supervised",
            1,
            Box::new(move |e: &[Vec<f64>]| {
                let d = e[0].len();
                let logits: Vec<f64> = head
                    .chunks(d + 1)
                    .map(|w| w[..d].iter().zip(&e[0]).map(|(a, b)| a * b).sum::<f64>() + w[d])
                    .collect();
                let (l, g) = cross_entropy(&logits, 1)?;
                let mut ge = vec![0.0; d];
                for (w, gk) in head.chunks(d + 1).zip(&g) {
                    for (x, wi) in ge.iter_mut().zip(w) {
                        *x += gk * wi;
                    }
                }
                Ok((l, vec![ge]))
            }),
        ),
    ]
}

/// Relative error of every loss on `spec` and on `other`. Returns the report
/// and whether everything is within [`TOLERANCE`].
pub fn run(spec: &NetSpec, other: &NetSpec, seed: u64) -> Result<(Value, bool)> {
    let mut rng = seeded(derive_seed(seed, "gradcheck"));
    let mut rows = Vec::new();
    let mut ok = true;
    for (role, s) in [("configured", spec), ("counterpart", other)] {
        let mut p = init(s, &mut rng)?;
        // Zero biases put many units exactly on the ReLU kink.
        for v in p.values.iter_mut() {
            *v += rng.random_range(-0.05..0.05);
        }
        for (name, n_inputs, loss) in losses(s.output_dim()) {
            let inputs: Vec<Vec<f64>> =
                (0..n_inputs).map(|_| (0..s.input_dim()).map(|_| rng.random::<f64>()).collect()).collect();
            let err = finite_diff_check(s, &p, &inputs, loss.as_ref(), EPS)?;
            let pass = err <= TOLERANCE;
            ok &= pass;
            rows.push(json!({"net": role, "spec": s, "loss": name, "max_rel_error": err, "pass": pass}));
        }
    }
    Ok((json!({"tolerance": TOLERANCE, "eps": EPS, "checks": rows, "pass": ok}), ok))
}
