use gensim::eval::{
    bootstrap_ci, logistic_probe, oddball_error_rate, pca_project, predict_oddball, ridge_probe, spearman_exact,
    spearman_rho, EvalTrial, ProbeMetric,
};
use gensim::net::{init, Model, NetSpec};
use gensim::process::FnEmbed;
use gensim::quad::QuadCategory;
use gensim::rng::seeded;
use gensim::Error;
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use statrs::distribution::{ChiSquared, ContinuousCDF};

fn normal(rng: &mut impl Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// Rank of each value by direct pairwise counting; ties share the average rank.
fn pairwise_ranks(xs: &[f64]) -> Vec<f64> {
    xs.iter()
        .map(|x| {
            let below = xs.iter().filter(|y| *y < x).count() as f64;
            let equal = xs.iter().filter(|y| *y == x).count() as f64;
            below + (equal + 1.0) / 2.0
        })
        .collect()
}

fn pearson_oracle(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

#[test]
fn spearman_matches_pairwise_rank_oracle_with_ties() {
    let mut rng = seeded(1);
    let mut checked = 0;
    while checked < 100 {
        let n = rng.random_range(3..40);
        let xs: Vec<f64> = (0..n).map(|_| f64::from(rng.random_range(0..6))).collect();
        let ys: Vec<f64> = (0..n).map(|_| f64::from(rng.random_range(0..6))).collect();
        let Ok((rho, p)) = spearman_rho(&xs, &ys) else { continue };
        let oracle = pearson_oracle(&pairwise_ranks(&xs), &pairwise_ranks(&ys));
        assert!((rho - oracle).abs() <= 1e-12, "{rho} vs {oracle}");
        assert!((0.0..=1.0).contains(&p));
        checked += 1;
    }
}

#[test]
fn spearman_exact_p_matches_brute_force_enumeration() {
    // Eleven points: the regularity test size.
    let xs: Vec<f64> = vec![0.1, 0.3, 0.2, 0.5, 0.4, 0.7, 0.6, 0.9, 0.8, 1.0, 0.65];
    let ys: Vec<f64> = (0..11).map(f64::from).collect();
    let (rho, p) = spearman_exact(&xs, &ys).unwrap();
    let rx = pairwise_ranks(&xs);
    let ry = pairwise_ranks(&ys);
    // Heap's algorithm over all 11! orderings of ry.
    let mut perm = ry.clone();
    let mut c = vec![0usize; perm.len()];
    let (mut hits, mut total) = (0u64, 0u64);
    let mut visit = |v: &[f64]| {
        total += 1;
        if pearson_oracle(&rx, v).abs() >= rho.abs() - 1e-12 {
            hits += 1;
        }
    };
    visit(&perm);
    let mut i = 0;
    while i < perm.len() {
        if c[i] < i {
            if i % 2 == 0 { perm.swap(0, i) } else { perm.swap(c[i], i) }
            visit(&perm);
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    assert_eq!(total, 39_916_800);
    assert!((p - hits as f64 / total as f64).abs() <= 1e-12, "{p} vs {hits}/{total}");
}

#[test]
fn spearman_errors() {
    assert!(spearman_rho(&[1.0, 2.0], &[1.0, 2.0]).is_err());
    assert!(spearman_rho(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]).is_err());
    assert!(spearman_rho(&[1.0, 2.0, 3.0], &[1.0, 2.0]).is_err());
    assert!(spearman_exact(&[0.0; 13].map(|_| rand::random::<f64>()), &[0.0; 13].map(|_| rand::random::<f64>())).is_err());
}

fn blobs(n: usize, gap: f64, seed: u64) -> (Vec<Vec<f64>>, Vec<bool>) {
    let mut rng = seeded(seed);
    (0..n)
        .map(|i| {
            let y = i % 2 == 0;
            let shift = if y { gap } else { -gap };
            ((0..4).map(|j| normal(&mut rng) + if j == 0 { shift } else { 0.0 }).collect(), y)
        })
        .unzip()
}

#[test]
fn logistic_probe_on_separable_and_shuffled_labels() {
    let (x, y) = blobs(200, 5.0, 2);
    let r = logistic_probe(&x, &y, 7).unwrap();
    assert_eq!(r.metric, ProbeMetric::Accuracy);
    assert_eq!(r.folds.len(), 5);
    assert!(r.mean >= 0.99, "{r:?}");
    assert!(r.ci.contains(r.mean));

    let (x, mut shuffled) = blobs(400, 0.0, 4);
    shuffled.shuffle(&mut seeded(3));
    let r = logistic_probe(&x, &shuffled, 7).unwrap();
    assert!((0.4..=0.6).contains(&r.mean), "{r:?}");
}

#[test]
fn logistic_probe_preconditions() {
    let (x, mut y) = blobs(40, 1.0, 5);
    y.iter_mut().for_each(|v| *v = true);
    assert!(matches!(logistic_probe(&x, &y, 1), Err(Error::Precondition(_))));
    let (x, y) = blobs(18, 1.0, 5);
    assert!(logistic_probe(&x, &y, 1).is_err());
}

#[test]
fn ridge_probe_linear_targets_and_pure_confound() {
    let mut rng = seeded(6);
    let x: Vec<Vec<f64>> = (0..150).map(|_| (0..5).map(|_| normal(&mut rng)).collect()).collect();
    let t: Vec<f64> = x.iter().map(|r| 2.0 * r[0] - r[3] + 0.5).collect();
    let zero = vec![0.0; x.len()];
    let r = ridge_probe(&x, &t, &zero, 1).unwrap();
    assert_eq!(r.metric, ProbeMetric::RSquared);
    assert!(r.mean >= 0.99, "{r:?}");

    let grey: Vec<f64> = (0..x.len()).map(|_| rng.random::<f64>()).collect();
    let r = ridge_probe(&x, &grey, &grey, 1).unwrap();
    assert!(r.mean.abs() <= 1e-6, "{r:?}");

    assert!(ridge_probe(&x, &vec![3.0; x.len()], &zero, 1).is_err());
    assert!(ridge_probe(&x[..19], &t[..19], &zero[..19], 1).is_err());
}

#[test]
fn probes_ignore_coordinate_order() {
    let (x, y) = blobs(120, 0.7, 8);
    let perm = [2usize, 0, 3, 1];
    let xp: Vec<Vec<f64>> = x.iter().map(|r| perm.iter().map(|&j| r[j]).collect()).collect();
    let a = logistic_probe(&x, &y, 9).unwrap();
    let b = logistic_probe(&xp, &y, 9).unwrap();
    assert!((a.mean - b.mean).abs() <= 1e-6);
    let t: Vec<f64> = x.iter().map(|r| r[0] * r[1] + r[2]).collect();
    let c: Vec<f64> = x.iter().map(|r| r[3]).collect();
    let a = ridge_probe(&x, &t, &c, 9).unwrap();
    let b = ridge_probe(&xp, &t, &c, 9).unwrap();
    assert!((a.mean - b.mean).abs() <= 1e-6, "{} {}", a.mean, b.mean);
}

#[test]
fn pca_collinear_and_orthonormal() {
    let data: Vec<Vec<f64>> = (0..30).map(|i| vec![f64::from(i), 2.0 * f64::from(i) + 1.0]).collect();
    let p = pca_project(&data, 2).unwrap();
    let total: f64 = p.explained_variance.iter().sum();
    assert!(p.explained_variance[0] / total >= 1.0 - 1e-9);
    assert!(p.truncated);

    let mut rng = seeded(10);
    let data: Vec<Vec<f64>> = (0..50).map(|_| (0..16).map(|_| normal(&mut rng)).collect()).collect();
    let p = pca_project(&data, 16).unwrap();
    for (i, a) in p.components.iter().enumerate() {
        for (j, b) in p.components.iter().enumerate() {
            let d: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
            assert!((d - f64::from(u8::from(i == j))).abs() <= 1e-9);
        }
    }
    assert!(p.explained_variance.windows(2).all(|w| w[0] >= w[1]));
    assert!(pca_project(&data, 17).is_err());
}

#[test]
fn pca_reconstruction_matches_eigen_oracle() {
    let mut rng = seeded(11);
    for _ in 0..5 {
        let data: Vec<Vec<f64>> = (0..50).map(|_| (0..16).map(|_| normal(&mut rng) * 3.0).collect()).collect();
        let n = data.len();
        let m = DMatrix::from_fn(n, 16, |i, j| data[i][j]);
        let mean = m.row_mean();
        let centered = DMatrix::from_fn(n, 16, |i, j| m[(i, j)] - mean[j]);
        let cov = centered.transpose() * &centered / (n - 1) as f64;
        let eig = cov.symmetric_eigen();
        let mut order: Vec<usize> = (0..16).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        for k in [1, 4, 9] {
            let p = pca_project(&data, k).unwrap();
            // Residual energy after projecting on the top-k space.
            let ours: f64 = (0..n)
                .map(|i| {
                    let recon: Vec<f64> =
                        (0..16).map(|j| p.components.iter().zip(&p.projected[i]).map(|(c, z)| c[j] * z).sum()).collect();
                    (0..16).map(|j| (centered[(i, j)] - recon[j]).powi(2)).sum::<f64>()
                })
                .sum();
            let oracle: f64 = order[k..].iter().map(|&i| eig.eigenvalues[i]).sum::<f64>() * (n - 1) as f64;
            assert!((ours - oracle).abs() <= 1e-8 * oracle.max(1.0), "k={k}: {ours} vs {oracle}");
            for (v, &i) in p.explained_variance.iter().zip(&order) {
                assert!((v - eig.eigenvalues[i]).abs() <= 1e-9 * eig.eigenvalues[order[0]]);
            }
        }
    }
}

#[test]
fn bootstrap_coverage_and_reproducibility() {
    let mut rng = seeded(12);
    let sims = 1000u32;
    let mut covered = 0;
    for s in 0..sims {
        let v: Vec<f64> = (0..50).map(|_| 2.0 + normal(&mut rng)).collect();
        if bootstrap_ci(&v, 400, 0.9, u64::from(s)).unwrap().contains(2.0) {
            covered += 1;
        }
    }
    let rate = f64::from(covered) / f64::from(sims);
    // Percentile intervals run a little narrow at n = 50.
    assert!((0.86..=0.93).contains(&rate), "{rate}");
    let v = [1.0, 4.0, 2.0, 8.0];
    assert_eq!(bootstrap_ci(&v, 100, 0.95, 3).unwrap(), bootstrap_ci(&v, 100, 0.95, 3).unwrap());
    assert!(bootstrap_ci(&[], 10, 0.9, 0).is_err());
}

fn trial(items: Vec<Vec<f64>>, oddball_index: usize) -> EvalTrial {
    EvalTrial { category: QuadCategory::Square, items, oddball_index }
}

#[test]
fn oddball_outlier_is_found() {
    let mut items: Vec<Vec<f64>> = (0..6).map(|i| vec![f64::from(i) * 0.01, 0.0]).collect();
    items[4] = vec![10.0, -3.0];
    let id = FnEmbed(|x: &[f64]| x.to_vec());
    let r = oddball_error_rate(&id, &[trial(items, 4)]).unwrap();
    assert_eq!(r.per_category[&QuadCategory::Square].error_rate, 0.0);
    assert!(oddball_error_rate(&id, &[]).is_err());
    // All-equal embeddings tie everywhere and fall back to index 0.
    assert_eq!(predict_oddball(&vec![vec![1.0, 1.0]; 6]), (0, true));
}

#[test]
fn random_net_is_at_chance_with_uniform_picks() {
    let spec = NetSpec::mlp(&[6, 16, 4]);
    let mut rng = seeded(13);
    let model = Model::new(spec.clone(), init(&spec, &mut rng).unwrap()).unwrap();
    let n_trials = 3000;
    let trials: Vec<EvalTrial> = (0..n_trials)
        .map(|_| {
            let items = (0..6).map(|_| (0..6).map(|_| rng.random::<f64>()).collect()).collect();
            trial(items, 0)
        })
        .collect();
    let mut counts = [0f64; 6];
    for t in &trials {
        let embs: Vec<Vec<f64>> = t.items.iter().map(|x| gensim::process::Embed::embed(&model, x).unwrap()).collect();
        counts[predict_oddball(&embs).0] += 1.0;
    }
    let expected = f64::from(n_trials) / 6.0;
    let chi2: f64 = counts.iter().map(|c| (c - expected).powi(2) / expected).sum();
    let p = 1.0 - ChiSquared::new(5.0).unwrap().cdf(chi2);
    assert!(p > 0.01, "chi2 {chi2} p {p} counts {counts:?}");
    let r = oddball_error_rate(&model, &trials).unwrap();
    let rate = r.per_category[&QuadCategory::Square].error_rate;
    assert!((rate - 5.0 / 6.0).abs() <= 0.03, "{rate}");
}

proptest! {
    #[test]
    fn oddball_pick_is_isometry_invariant(
        pts in prop::collection::vec(prop::collection::vec(-5.0f64..5.0, 3), 6),
        angle in 0.0f64..6.28,
        shift in prop::collection::vec(-10.0f64..10.0, 3),
    ) {
        let (s, c) = angle.sin_cos();
        let moved: Vec<Vec<f64>> = pts
            .iter()
            .map(|p| vec![c * p[0] - s * p[1] + shift[0], s * p[0] + c * p[1] + shift[1], -p[2] + shift[2]])
            .collect();
        let dists = |e: &[Vec<f64>]| {
            let m: Vec<f64> = (0..3).map(|j| e.iter().map(|r| r[j]).sum::<f64>() / 6.0).collect();
            e.iter().map(|r| r.iter().zip(&m).map(|(a, b)| (a - b).powi(2)).sum::<f64>()).collect::<Vec<_>>()
        };
        let d = dists(&pts);
        let mut sorted = d.clone();
        sorted.sort_by(|a, b| b.total_cmp(a));
        // Skip near-ties, where rounding may legitimately flip the pick.
        prop_assume!(sorted[0] - sorted[1] > 1e-9 * sorted[0].max(1.0));
        prop_assert_eq!(predict_oddball(&pts).0, predict_oddball(&moved).0);
    }

    #[test]
    fn spearman_self_and_reversed(xs in prop::collection::hash_set(-1000i32..1000, 3..30)) {
        let xs: Vec<f64> = xs.into_iter().map(f64::from).collect();
        let neg: Vec<f64> = xs.iter().map(|x| -x).collect();
        prop_assert!((spearman_rho(&xs, &xs).unwrap().0 - 1.0).abs() <= 1e-12);
        prop_assert!((spearman_rho(&xs, &neg).unwrap().0 + 1.0).abs() <= 1e-12);
    }
}
