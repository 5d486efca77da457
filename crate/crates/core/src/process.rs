//! Hierarchical generative processes and the quantities defined over them.
//!
//! A process samples a latent parameter `θ ~ p(θ)` and then data `x ~ p(x|θ)`.
//! Generative similarity of two data points is the odds that they share one
//! `θ` draw versus two independent draws; contrastive training consumes
//! triplets `(x, x⁺, x⁻)` where `x, x⁺` share `θ⁺` and `x⁻` comes from `θ⁻`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{self, Interval};
use crate::par;
use crate::rng::child_rng;

/// Two-level generative model. `Param` is opaque to everything but the
/// implementing process.
pub trait HierarchicalProcess: Sync {
    type Param: Clone + Send + Sync;
    type Datum: Clone + Send + Sync;

    fn sample_param<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Self::Param>;

    fn sample_datum<R: Rng + ?Sized>(&self, param: &Self::Param, rng: &mut R)
        -> Result<Self::Datum>;

    /// `log p(x|θ)`, or `None` when the process has no tractable likelihood.
    fn log_likelihood(&self, _datum: &Self::Datum, _param: &Self::Param) -> Option<f64> {
        None
    }

    /// Discrete label of a parameter (component index, grammar id, ...).
    fn label_of(&self, _param: &Self::Param) -> Option<usize> {
        None
    }
}

/// Training atom: `anchor` and `positive` share `θ⁺`, `negative` uses an
/// independent `θ⁻`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Triplet<D> {
    pub anchor: D,
    pub positive: D,
    pub negative: D,
    pub theta_plus_label: Option<usize>,
    pub theta_minus_label: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimilarityValue {
    /// Natural log of the same/different odds ratio.
    pub log_odds: f64,
    /// Monte-Carlo standard error, when estimated.
    pub std_error: Option<f64>,
}

fn stage_err(stage: &'static str, e: Error) -> Error {
    match e {
        Error::Sampling { reason, stage: inner } => {
            Error::Sampling { stage, reason: format!("{inner}: {reason}") }
        }
        other => Error::Sampling { stage, reason: other.to_string() },
    }
}

/// Draws one triplet: `θ⁺, θ⁻ ~ p(θ)`, then `x, x⁺ ~ p(·|θ⁺)`, `x⁻ ~ p(·|θ⁻)`.
pub fn sample_triplet<P, R>(process: &P, rng: &mut R) -> Result<Triplet<P::Datum>>
where
    P: HierarchicalProcess + ?Sized,
    R: Rng + ?Sized,
{
    let plus = process.sample_param(rng).map_err(|e| stage_err("theta_plus", e))?;
    let minus = process.sample_param(rng).map_err(|e| stage_err("theta_minus", e))?;
    let anchor = process.sample_datum(&plus, rng).map_err(|e| stage_err("anchor", e))?;
    let positive = process.sample_datum(&plus, rng).map_err(|e| stage_err("positive", e))?;
    let negative = process.sample_datum(&minus, rng).map_err(|e| stage_err("negative", e))?;
    Ok(Triplet {
        anchor,
        positive,
        negative,
        theta_plus_label: process.label_of(&plus),
        theta_minus_label: process.label_of(&minus),
    })
}

/// `n` triplets drawn one after another from the same stream.
pub fn sample_triplet_batch<P, R>(process: &P, rng: &mut R, n: usize) -> Result<Vec<Triplet<P::Datum>>>
where
    P: HierarchicalProcess + ?Sized,
    R: Rng + ?Sized,
{
    if n == 0 {
        return Err(Error::Precondition("triplet batch size must be at least 1".into()));
    }
    (0..n).map(|_| sample_triplet(process, rng)).collect()
}

/// `n` triplets where item `i` is drawn from child stream `i` of `seed`.
/// Parallel under the `parallel` feature; identical output either way.
pub fn sample_triplet_batch_seeded<P>(process: &P, seed: u64, n: usize) -> Result<Vec<Triplet<P::Datum>>>
where
    P: HierarchicalProcess + ?Sized,
{
    if n == 0 {
        return Err(Error::Precondition("triplet batch size must be at least 1".into()));
    }
    par::try_map_indexed(n, |i| sample_triplet(process, &mut child_rng(seed, i as u64)))
}

/// Running log-sum-exp with support for leave-one-out queries.
struct LooLse<'a> {
    terms: &'a [f64],
    shift: f64,
    shifted_sum: f64,
}

impl<'a> LooLse<'a> {
    fn new(terms: &'a [f64]) -> Self {
        let shift = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let shifted_sum = if shift == f64::NEG_INFINITY {
            0.0
        } else {
            terms.iter().map(|t| (t - shift).exp()).sum()
        };
        LooLse { terms, shift, shifted_sum }
    }

    fn full(&self) -> f64 {
        if self.shifted_sum == 0.0 {
            f64::NEG_INFINITY
        } else {
            self.shift + self.shifted_sum.ln()
        }
    }

    fn without(&self, i: usize) -> f64 {
        if self.shift == f64::NEG_INFINITY {
            return f64::NEG_INFINITY;
        }
        let own = (self.terms[i] - self.shift).exp();
        let rest = self.shifted_sum - own;
        if rest > self.shifted_sum * 1e-9 {
            self.shift + rest.ln()
        } else {
            // One term carries nearly all the mass; subtracting it would
            // cancel catastrophically, so recompute the remainder directly.
            let others: Vec<f64> = self
                .terms
                .iter()
                .enumerate()
                .filter(|&(k, _)| k != i)
                .map(|(_, &t)| t)
                .collect();
            numeric::log_sum_exp(&others)
        }
    }
}

/// Monte-Carlo estimate of log generative similarity.
///
/// With `θ_k ~ p(θ)`, returns
/// `log[(1/n)Σ p(x1|θ_k)p(x2|θ_k)] − log[(1/n)Σ p(x1|θ_k)] − log[(1/n)Σ p(x2|θ_k)]`,
/// all three sums over the same draws. The standard error is the delete-one
/// jackknife of the log ratio.
pub fn mc_log_gen_sim<P, R>(
    process: &P,
    x1: &P::Datum,
    x2: &P::Datum,
    n_theta: usize,
    rng: &mut R,
) -> Result<SimilarityValue>
where
    P: HierarchicalProcess + ?Sized,
    R: Rng + ?Sized,
{
    if n_theta < 2 {
        return Err(Error::Precondition("n_theta must be at least 2".into()));
    }
    let mut la = Vec::with_capacity(n_theta);
    let mut lb = Vec::with_capacity(n_theta);
    for _ in 0..n_theta {
        let theta = process.sample_param(rng).map_err(|e| stage_err("theta", e))?;
        let a = process.log_likelihood(x1, &theta).ok_or(Error::MissingLikelihood)?;
        let b = process.log_likelihood(x2, &theta).ok_or(Error::MissingLikelihood)?;
        la.push(a);
        lb.push(b);
    }
    log_ratio_from_loglik(&la, &lb)
}

/// Paired log-ratio estimator and its jackknife error from per-draw
/// log-likelihoods of the two points.
pub fn log_ratio_from_loglik(la: &[f64], lb: &[f64]) -> Result<SimilarityValue> {
    let n = la.len();
    if n < 2 || lb.len() != n {
        return Err(Error::Precondition("need at least two paired draws".into()));
    }
    let lab: Vec<f64> = la.iter().zip(lb).map(|(a, b)| a + b).collect();
    let sa = LooLse::new(la);
    let sb = LooLse::new(lb);
    let sab = LooLse::new(&lab);
    let (lse_a, lse_b, lse_ab) = (sa.full(), sb.full(), sab.full());
    if lse_a == f64::NEG_INFINITY || lse_b == f64::NEG_INFINITY {
        return Err(Error::DegenerateDensity);
    }
    // Written as num − (a + b) so swapping x1 and x2 is bitwise neutral.
    let log_n = (n as f64).ln();
    let log_odds = lse_ab + log_n - (lse_a + lse_b);
    if !log_odds.is_finite() {
        return Ok(SimilarityValue { log_odds, std_error: None });
    }

    let log_n1 = ((n - 1) as f64).ln();
    let loo: Vec<f64> = (0..n)
        .map(|i| sab.without(i) + log_n1 - (sa.without(i) + sb.without(i)))
        .collect();
    let std_error = if loo.iter().all(|v| v.is_finite()) {
        let m = numeric::mean(&loo);
        let ss: f64 = loo.iter().map(|v| (v - m) * (v - m)).sum();
        Some((ss * (n - 1) as f64 / n as f64).sqrt())
    } else {
        None
    };
    Ok(SimilarityValue { log_odds, std_error })
}

/// Anything that maps an input vector to an embedding.
pub trait Embed: Sync {
    fn embed(&self, input: &[f64]) -> Result<Vec<f64>>;
}

/// Adapter turning a closure into an [`Embed`].
pub struct FnEmbed<F>(pub F);

impl<F> Embed for FnEmbed<F>
where
    F: Fn(&[f64]) -> Vec<f64> + Sync,
{
    fn embed(&self, input: &[f64]) -> Result<Vec<f64>> {
        Ok((self.0)(input))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairDistances {
    pub mean_same: f64,
    pub mean_diff: f64,
    pub ci_same: Interval,
    pub ci_diff: Interval,
    pub n: usize,
}

impl PairDistances {
    /// Same-pair mean below diff-pair mean with disjoint 95% intervals.
    pub fn separated(&self) -> bool {
        self.mean_same < self.mean_diff && self.ci_same.hi < self.ci_diff.lo
    }
}

/// Mean embedding distances for same pairs `d(φ(x), φ(x⁺))` and different
/// pairs `d(φ(x), φ(x⁻))` over `n` fresh triplets, with 1.96σ intervals.
pub fn expected_pair_distances<P, E, R>(
    net: &E,
    process: &P,
    rng: &mut R,
    n: usize,
) -> Result<PairDistances>
where
    P: HierarchicalProcess + ?Sized,
    P::Datum: AsRef<[f64]>,
    E: Embed + ?Sized,
    R: Rng + ?Sized,
{
    if n < 2 {
        return Err(Error::Precondition("need at least two triplets".into()));
    }
    let triplets = sample_triplet_batch(process, rng, n)?;
    pair_distances_of(net, &triplets)
}

/// Same as [`expected_pair_distances`] on an already drawn triplet set.
pub fn pair_distances_of<D, E>(net: &E, triplets: &[Triplet<D>]) -> Result<PairDistances>
where
    D: AsRef<[f64]> + Sync,
    E: Embed + ?Sized,
{
    let n = triplets.len();
    if n < 2 {
        return Err(Error::Precondition("need at least two triplets".into()));
    }
    let dists: Vec<(f64, f64)> = par::map_slice(triplets, |t| -> Result<(f64, f64)> {
        let a = net.embed(t.anchor.as_ref())?;
        let p = net.embed(t.positive.as_ref())?;
        let m = net.embed(t.negative.as_ref())?;
        Ok((numeric::dist(&a, &p), numeric::dist(&a, &m)))
    })
    .into_iter()
    .collect::<Result<_>>()?;
    let same: Vec<f64> = dists.iter().map(|d| d.0).collect();
    let diff: Vec<f64> = dists.iter().map(|d| d.1).collect();
    let (ms, md) = (numeric::mean(&same), numeric::mean(&diff));
    Ok(PairDistances {
        mean_same: ms,
        mean_diff: md,
        ci_same: Interval::around(ms, 1.96 * numeric::std_error(&same)),
        ci_diff: Interval::around(md, 1.96 * numeric::std_error(&diff)),
        n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian::GaussianMixture;
    use crate::rng::seeded;

    /// Single fixed θ: same and different hypotheses coincide.
    struct PointMass;

    impl HierarchicalProcess for PointMass {
        type Param = ();
        type Datum = Vec<f64>;
        fn sample_param<R: Rng + ?Sized>(&self, _rng: &mut R) -> Result<()> {
            Ok(())
        }
        fn sample_datum<R: Rng + ?Sized>(&self, _p: &(), rng: &mut R) -> Result<Vec<f64>> {
            Ok(vec![rng.random::<f64>()])
        }
        fn log_likelihood(&self, x: &Vec<f64>, _p: &()) -> Option<f64> {
            Some(-0.5 * x[0] * x[0])
        }
        fn label_of(&self, _p: &()) -> Option<usize> {
            Some(0)
        }
    }

    struct Failing;

    impl HierarchicalProcess for Failing {
        type Param = u8;
        type Datum = Vec<f64>;
        fn sample_param<R: Rng + ?Sized>(&self, _rng: &mut R) -> Result<u8> {
            Ok(1)
        }
        fn sample_datum<R: Rng + ?Sized>(&self, _p: &u8, _rng: &mut R) -> Result<Vec<f64>> {
            Err(Error::Sampling { stage: "exemplar", reason: "rejection limit".into() })
        }
    }

    #[test]
    fn point_mass_prior_gives_equal_labels_and_zero_similarity() {
        let mut rng = seeded(1);
        let t = sample_triplet(&PointMass, &mut rng).unwrap();
        assert_eq!(t.theta_plus_label, t.theta_minus_label);
        for _ in 0..5 {
            let x1 = vec![rng.random::<f64>() * 4.0];
            let x2 = vec![rng.random::<f64>() * 4.0];
            let s = mc_log_gen_sim(&PointMass, &x1, &x2, 50, &mut rng).unwrap();
            assert!(s.log_odds.abs() < 1e-12, "{}", s.log_odds);
        }
    }

    #[test]
    fn sampler_failure_names_the_stage() {
        let err = sample_triplet(&Failing, &mut seeded(0)).unwrap_err();
        match err {
            Error::Sampling { stage, reason } => {
                assert_eq!(stage, "anchor");
                assert!(reason.contains("rejection limit"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn batch_of_one_equals_single_draw() {
        let mix = GaussianMixture::paper();
        let single = sample_triplet(&mix, &mut seeded(9)).unwrap();
        let batch = sample_triplet_batch(&mix, &mut seeded(9), 1).unwrap();
        assert_eq!(batch, vec![single]);
    }

    #[test]
    fn batch_equals_repeated_calls() {
        let mix = GaussianMixture::paper();
        let mut a = seeded(3);
        let repeated: Vec<_> = (0..20).map(|_| sample_triplet(&mix, &mut a).unwrap()).collect();
        let batch = sample_triplet_batch(&mix, &mut seeded(3), 20).unwrap();
        assert_eq!(batch, repeated);
    }

    #[test]
    fn empty_batch_rejected() {
        let mix = GaussianMixture::paper();
        assert!(matches!(
            sample_triplet_batch(&mix, &mut seeded(0), 0),
            Err(Error::Precondition(_))
        ));
        assert!(sample_triplet_batch_seeded(&mix, 0, 0).is_err());
    }

    #[test]
    fn seeded_batches_are_bitwise_reproducible() {
        let mix = GaussianMixture::paper();
        let a = sample_triplet_batch_seeded(&mix, 77, 500).unwrap();
        let b = sample_triplet_batch_seeded(&mix, 77, 500).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn negative_shares_anchor_label_half_the_time() {
        // seed 42, two uniform components, 10,000 triplets; counting oracle.
        let mix = GaussianMixture::paper();
        let batch = sample_triplet_batch(&mix, &mut seeded(42), 10_000).unwrap();
        let shared = batch
            .iter()
            .filter(|t| t.theta_plus_label == t.theta_minus_label)
            .count() as f64
            / 10_000.0;
        assert!((0.49..=0.51).contains(&shared), "{shared}");
    }

    #[test]
    fn symmetric_far_mixture_at_origin_has_unit_ratio() {
        let mix = GaussianMixture::new(vec![vec![10.0], vec![-10.0]], 1.0, None).unwrap();
        let s = mc_log_gen_sim(&mix, &vec![0.0], &vec![0.0], 2000, &mut seeded(5)).unwrap();
        assert!(s.log_odds.abs() < 1e-12, "{}", s.log_odds);
    }

    #[test]
    fn mc_estimate_is_symmetric_on_shared_draws() {
        let mix = GaussianMixture::paper();
        let x1 = vec![2.0, 3.5];
        let x2 = vec![4.0, 4.4];
        let a = mc_log_gen_sim(&mix, &x1, &x2, 500, &mut seeded(11)).unwrap();
        let b = mc_log_gen_sim(&mix, &x2, &x1, 500, &mut seeded(11)).unwrap();
        assert_eq!(a.log_odds, b.log_odds);
        assert_eq!(a.std_error, b.std_error);
    }

    #[test]
    fn mc_matches_closed_form_within_three_std_errors() {
        let mix = GaussianMixture::paper();
        let x = vec![5.0, 5.0];
        let s = mc_log_gen_sim(&mix, &x, &x, 100_000, &mut seeded(2)).unwrap();
        let exact = crate::gaussian::closed_form_log_gen_sim(&mix, &x, &x).unwrap();
        let se = s.std_error.unwrap();
        assert!(se >= 0.0);
        assert!((s.log_odds - exact).abs() <= 3.0 * se.max(1e-12), "{} vs {exact} (se {se})", s.log_odds);
    }

    #[test]
    fn vanishing_marginals_are_degenerate() {
        assert!(matches!(
            log_ratio_from_loglik(&[f64::NEG_INFINITY; 3], &[0.0; 3]),
            Err(Error::DegenerateDensity)
        ));
    }

    #[test]
    fn collapsed_net_has_zero_pair_distances() {
        let mix = GaussianMixture::paper();
        let net = FnEmbed(|_: &[f64]| vec![1.0, -2.0]);
        let d = expected_pair_distances(&net, &mix, &mut seeded(0), 100).unwrap();
        assert_eq!(d.mean_same, 0.0);
        assert_eq!(d.mean_diff, 0.0);
    }

    #[test]
    fn identity_embedding_already_separates_far_components() {
        // Resampling oracle: mean_same < mean_diff in 20/20 independent draws.
        let mix = GaussianMixture::new(vec![vec![10.0, 0.0], vec![-10.0, 0.0]], 1.0, None).unwrap();
        let net = FnEmbed(|x: &[f64]| x.to_vec());
        for seed in 0..20 {
            let d = expected_pair_distances(&net, &mix, &mut seeded(seed), 200).unwrap();
            assert!(d.mean_same < d.mean_diff);
            assert!(d.separated());
        }
    }
}
