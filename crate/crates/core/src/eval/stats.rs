use rand::Rng;
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{check_dims, Error, Result};
use crate::numeric::{average_ranks, mean, pearson, Interval};
use crate::rng::seeded;

/// Largest sample for which every permutation is enumerated.
pub const MAX_EXACT_N: usize = 12;

fn ranks_checked(xs: &[f64], ys: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    check_dims(xs.len(), ys.len())?;
    if xs.len() < 3 {
        return Err(Error::Precondition("Spearman needs at least 3 points".into()));
    }
    if xs.iter().chain(ys).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite { context: "Spearman input".into() });
    }
    let constant = |v: &[f64]| v.iter().all(|x| *x == v[0]);
    if constant(xs) || constant(ys) {
        return Err(Error::Precondition("Spearman correlation undefined for constant input".into()));
    }
    Ok((average_ranks(xs), average_ranks(ys)))
}

/// Two-sided permutation p-value of a Pearson statistic on ranks, counting
/// all `n!` orderings of `ry`.
fn exact_permutation_p(rx: &[f64], ry: &[f64], observed: f64) -> f64 {
    let n = ry.len();
    let mut perm = ry.to_vec();
    let mut c = vec![0usize; n];
    let mx = mean(rx);
    let my = mean(ry);
    let sx: f64 = rx.iter().map(|v| (v - mx).powi(2)).sum::<f64>().sqrt();
    let sy: f64 = ry.iter().map(|v| (v - my).powi(2)).sum::<f64>().sqrt();
    let dx: Vec<f64> = rx.iter().map(|v| (v - mx) / sx).collect();
    let stat = |p: &[f64]| dx.iter().zip(p).map(|(a, b)| a * (b - my)).sum::<f64>() / sy;
    let threshold = observed.abs() - 1e-12;
    let mut hits = 0u64;
    let mut total = 0u64;
    let mut check = |p: &[f64]| {
        total += 1;
        if stat(p).abs() >= threshold {
            hits += 1;
        }
    };
    // Heap's algorithm.
    check(&perm);
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(c[i], i);
            }
            check(&perm);
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    hits as f64 / total as f64
}

fn t_approx_p(rho: f64, n: usize) -> f64 {
    if rho.abs() >= 1.0 {
        return 0.0;
    }
    let df = (n - 2) as f64;
    let t = rho * (df / (1.0 - rho * rho)).sqrt();
    let dist = StudentsT::new(0.0, 1.0, df).expect("df > 0");
    2.0 * (1.0 - dist.cdf(t.abs()))
}

/// Spearman's rho with average ranks for ties. The two-sided p-value is exact
/// (full permutation) for `n <= 10` and from the t approximation otherwise.
pub fn spearman_rho(xs: &[f64], ys: &[f64]) -> Result<(f64, f64)> {
    let (rx, ry) = ranks_checked(xs, ys)?;
    let rho = pearson(&rx, &ry).clamp(-1.0, 1.0);
    let p = if xs.len() <= 10 { exact_permutation_p(&rx, &ry, rho) } else { t_approx_p(rho, xs.len()) };
    Ok((rho, p))
}

/// Spearman's rho with an exact two-sided permutation p-value for up to
/// [`MAX_EXACT_N`] points.
pub fn spearman_exact(xs: &[f64], ys: &[f64]) -> Result<(f64, f64)> {
    let (rx, ry) = ranks_checked(xs, ys)?;
    if xs.len() > MAX_EXACT_N {
        return Err(Error::Precondition(format!("exact permutation limited to n <= {MAX_EXACT_N}")));
    }
    let rho = pearson(&rx, &ry).clamp(-1.0, 1.0);
    Ok((rho, exact_permutation_p(&rx, &ry, rho)))
}

/// Percentile bootstrap interval for the mean.
pub fn bootstrap_ci(values: &[f64], n_boot: usize, level: f64, seed: u64) -> Result<Interval> {
    if values.is_empty() {
        return Err(Error::Precondition("bootstrap needs at least one value".into()));
    }
    if !(level > 0.0 && level < 1.0) || n_boot == 0 {
        return Err(Error::Precondition("need 0 < level < 1 and n_boot >= 1".into()));
    }
    let mut rng = seeded(seed);
    let n = values.len();
    let mut means: Vec<f64> = (0..n_boot)
        .map(|_| (0..n).map(|_| values[rng.random_range(0..n)]).sum::<f64>() / n as f64)
        .collect();
    means.sort_by(f64::total_cmp);
    let alpha = (1.0 - level) / 2.0;
    let q = |p: f64| {
        let pos = p * (n_boot - 1) as f64;
        let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
        means[lo] + (means[hi] - means[lo]) * (pos - lo as f64)
    };
    Ok(Interval::new(q(alpha), q(1.0 - alpha)))
}

/// Mean with a Student-t confidence interval.
pub fn t_interval(values: &[f64], level: f64) -> Interval {
    let m = mean(values);
    if values.len() < 2 {
        return Interval::new(m, m);
    }
    let df = (values.len() - 1) as f64;
    let se = crate::numeric::std_error(values);
    let t = StudentsT::new(0.0, 1.0, df).expect("df > 0").inverse_cdf(0.5 + level / 2.0);
    Interval::around(m, t * se)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_orderings() {
        let xs = [1.0, 2.0, 3.5, 7.0, 8.0];
        let ys = [10.0, 20.0, 30.0, 40.0, 50.0];
        let (rho, p) = spearman_rho(&xs, &ys).unwrap();
        assert!((rho - 1.0).abs() < 1e-12);
        // Two of 120 orderings are as extreme.
        assert!((p - 2.0 / 120.0).abs() < 1e-12);
        let rev: Vec<f64> = ys.iter().rev().copied().collect();
        assert!((spearman_rho(&xs, &rev).unwrap().0 + 1.0).abs() < 1e-12);
    }

    #[test]
    fn constant_input_is_an_error() {
        assert!(spearman_rho(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]).is_err());
        assert!(spearman_rho(&[1.0, 2.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn exact_and_approximate_p_are_close_at_moderate_n() {
        let xs: Vec<f64> = (0..10).map(f64::from).collect();
        let ys = [0.0, 2.0, 1.0, 4.0, 3.0, 6.0, 5.0, 9.0, 7.0, 8.0];
        let (rho, p_exact) = spearman_exact(&xs, &ys).unwrap();
        let p_t = t_approx_p(rho, 10);
        assert!((p_exact - p_t).abs() < 0.01, "{p_exact} vs {p_t}");
    }

    #[test]
    fn bootstrap_of_constant_is_a_point() {
        let ci = bootstrap_ci(&[2.5; 30], 500, 0.95, 1).unwrap();
        assert_eq!((ci.lo, ci.hi), (2.5, 2.5));
        assert_eq!(bootstrap_ci(&[1.0, 2.0, 5.0], 200, 0.9, 4).unwrap(), bootstrap_ci(&[1.0, 2.0, 5.0], 200, 0.9, 4).unwrap());
    }
}
