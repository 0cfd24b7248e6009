//! Two-sample and goodness-of-fit tests, plus the large-deviation tail
//! screen for the record times.

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::analytic::special::{gamma_q, kolmogorov_survival};
use crate::error::{Error, Result};
use crate::processes::sample_zeta;
use crate::stats::harness::mc_collect;
use crate::stats::rng::RngStream;

/// Two-sample Kolmogorov-Smirnov test on pre-sorted samples.
///
/// Returns the sup-distance of the empirical CDFs and an asymptotic upper
/// bound on the p-value. For integer-valued (tied) data the bound is
/// conservative: the true p-value is at least as large, so a non-rejection
/// is safe and a rejection should be followed up with a chi-square test.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<(f64, f64)> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Domain("ks_two_sample: empty sample".into()));
    }
    debug_assert!(a.windows(2).all(|w| w[0] <= w[1]));
    debug_assert!(b.windows(2).all(|w| w[0] <= w[1]));
    let (m, n) = (a.len(), b.len());
    let (mut i, mut j) = (0usize, 0usize);
    let mut d = 0.0f64;
    while i < m && j < n {
        let x = a[i].min(b[j]);
        while i < m && a[i] <= x {
            i += 1;
        }
        while j < n && b[j] <= x {
            j += 1;
        }
        let gap = (i as f64 / m as f64 - j as f64 / n as f64).abs();
        d = d.max(gap);
    }
    let n_eff = (m as f64 * n as f64) / (m + n) as f64;
    let p_bound = kolmogorov_survival(n_eff.sqrt() * d);
    Ok((d, p_bound))
}

/// Pearson chi-square statistic against expected bin probabilities.
///
/// Trailing bins are merged until each kept bin has expected count at least
/// 5; any expected mass beyond the listed bins joins the final merged bin.
/// Returns (statistic, degrees of freedom).
pub fn chi_square_gof(observed: &[u64], expected_probs: &[f64]) -> Result<(f64, usize)> {
    if observed.len() != expected_probs.len() {
        return Err(Error::Domain(format!(
            "chi_square_gof: {} observed bins vs {} probabilities",
            observed.len(),
            expected_probs.len()
        )));
    }
    if expected_probs.iter().any(|&p| !(0.0..=1.0).contains(&p)) {
        return Err(Error::Domain("chi_square_gof: probability outside [0,1]".into()));
    }
    let total: u64 = observed.iter().sum();
    if total == 0 {
        return Err(Error::DegenerateBins("no observations".into()));
    }
    let n = total as f64;
    let leftover: f64 = (1.0 - expected_probs.iter().sum::<f64>()).max(0.0);

    // Walk from the right, pooling bins until the pooled expectation
    // reaches the threshold; the leftover mass beyond the table starts
    // the pool.
    let mut exp_counts: Vec<f64> = Vec::new();
    let mut obs_counts: Vec<f64> = Vec::new();
    let mut pool_exp = leftover * n;
    let mut pool_obs = 0.0f64;
    for (o, p) in observed.iter().zip(expected_probs).rev() {
        pool_exp += p * n;
        pool_obs += *o as f64;
        if pool_exp >= 5.0 {
            exp_counts.push(pool_exp);
            obs_counts.push(pool_obs);
            pool_exp = 0.0;
            pool_obs = 0.0;
        }
    }
    if pool_exp > 0.0 || pool_obs > 0.0 {
        // residual head pool folds into the last kept bin
        match exp_counts.last_mut() {
            Some(e) => {
                *e += pool_exp;
                *obs_counts.last_mut().unwrap() += pool_obs;
            }
            None => return Err(Error::DegenerateBins("total expected count below 5".into())),
        }
    }
    if exp_counts.len() < 2 {
        return Err(Error::DegenerateBins(format!(
            "only {} usable bin(s) after merging",
            exp_counts.len()
        )));
    }
    let stat: f64 = obs_counts
        .iter()
        .zip(&exp_counts)
        .map(|(o, e)| (o - e) * (o - e) / e)
        .sum();
    Ok((stat, exp_counts.len() - 1))
}

/// Upper-tail p-value of the chi-square distribution with `dof` degrees of
/// freedom.
pub fn chi_square_pvalue(stat: f64, dof: usize) -> f64 {
    gamma_q(dof as f64 / 2.0, stat / 2.0)
}

/// Empirical large-deviation check for a record time against the
/// 3·exp(−z/4) envelope.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TailReport {
    pub n: u64,
    pub reps: u64,
    pub z: Vec<f64>,
    /// P(|zeta_n − a_n| > z · sd) estimated over the replications.
    pub empirical: Vec<f64>,
    pub bound: Vec<f64>,
    /// bound − empirical per grid point.
    pub margin: Vec<f64>,
    pub pass: bool,
}

/// Estimate the standardized tail of the n-th record time on a grid and
/// compare against the exponential envelope.
pub fn tail_bound_check(
    n: u64,
    reps: u64,
    z_grid: &[f64],
    stream: RngStream,
    workers: usize,
) -> Result<TailReport> {
    if n < 1 {
        return Err(Error::Domain("tail_bound_check: n must be positive".into()));
    }
    if z_grid.iter().any(|&z| z < 0.0) {
        return Err(Error::Domain("tail_bound_check: z_grid must be nonnegative".into()));
    }
    let nf = n as f64;
    let a_n = nf * (nf + 1.0) / 2.0;
    let sd = (nf * (nf + 1.0) * (2.0 * nf + 1.0) / 6.0).sqrt();
    let kernel = move |rng: &mut ChaCha8Rng| Ok((sample_zeta(n, rng) - a_n).abs() / sd);
    let devs = mc_collect(kernel, reps, stream, workers)?;
    let empirical: Vec<f64> = z_grid
        .iter()
        .map(|&z| devs.iter().filter(|&&d| d > z).count() as f64 / reps as f64)
        .collect();
    let bound: Vec<f64> = z_grid.iter().map(|&z| 3.0 * (-z / 4.0).exp()).collect();
    let margin: Vec<f64> = bound.iter().zip(&empirical).map(|(b, e)| b - e).collect();
    let pass = margin.iter().all(|&m| m >= 0.0);
    Ok(TailReport {
        n,
        reps,
        z: z_grid.to_vec(),
        empirical,
        bound,
        margin,
        pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn ks_identical_and_disjoint() {
        let a = vec![1.0, 2.0, 3.0];
        let (d, p) = ks_two_sample(&a, &a).unwrap();
        assert_eq!(d, 0.0);
        assert!(p > 0.999);
        let b = vec![10.0, 11.0];
        let (d, _) = ks_two_sample(&a, &b).unwrap();
        assert_eq!(d, 1.0);
    }

    #[test]
    fn ks_uniform_null() {
        let mut rng = RngStream::new(50, 0).rng();
        let mut a: Vec<f64> = (0..10_000).map(|_| rng.random()).collect();
        let mut b: Vec<f64> = (0..10_000).map(|_| rng.random()).collect();
        a.sort_by(f64::total_cmp);
        b.sort_by(f64::total_cmp);
        let (d, p) = ks_two_sample(&a, &b).unwrap();
        assert!(d < 0.05, "d = {d}");
        assert!(p > 1e-3, "p = {p}");
    }

    #[test]
    fn ks_detects_shift() {
        let mut rng = RngStream::new(50, 1).rng();
        let mut a: Vec<f64> = (0..10_000).map(|_| rng.random()).collect();
        let mut b: Vec<f64> = (0..10_000).map(|_| rng.random::<f64>() + 0.1).collect();
        a.sort_by(f64::total_cmp);
        b.sort_by(f64::total_cmp);
        let (_, p) = ks_two_sample(&a, &b).unwrap();
        assert!(p < 1e-6);
    }

    #[test]
    fn chi_square_exact_fit_is_zero() {
        let observed = vec![100u64, 200, 300, 400];
        let expected = vec![0.1, 0.2, 0.3, 0.4];
        let (stat, dof) = chi_square_gof(&observed, &expected).unwrap();
        assert!(stat.abs() < 1e-20);
        assert_eq!(dof, 3);
    }

    #[test]
    fn chi_square_single_bin_errors() {
        assert!(matches!(
            chi_square_gof(&[1000], &[1.0]),
            Err(Error::DegenerateBins(_))
        ));
    }

    #[test]
    fn chi_square_merges_thin_tail() {
        // last three bins each expect < 5 counts and must pool
        let observed = vec![510u64, 470, 12, 5, 3];
        let expected = vec![0.5, 0.49, 0.006, 0.003, 0.001];
        let (_, dof) = chi_square_gof(&observed, &expected).unwrap();
        assert_eq!(dof, 2);
    }

    #[test]
    fn chi_square_null_calibration() {
        // multinomial draws from the stated law should not reject
        let probs = [0.3, 0.25, 0.2, 0.15, 0.1];
        let mut rng = RngStream::new(51, 0).rng();
        let mut counts = [0u64; 5];
        for _ in 0..50_000 {
            let u: f64 = rng.random();
            let mut acc = 0.0;
            for (k, p) in probs.iter().enumerate() {
                acc += p;
                if u < acc {
                    counts[k] += 1;
                    break;
                }
            }
        }
        let (stat, dof) = chi_square_gof(&counts, &probs).unwrap();
        assert!(chi_square_pvalue(stat, dof) > 1e-3);
    }

    #[test]
    fn pvalue_reference_points() {
        // chi-square(1) upper tail at 3.841 is 0.05
        assert!((chi_square_pvalue(3.841_458_820_694_124, 1) - 0.05).abs() < 1e-9);
        assert!((chi_square_pvalue(0.0, 4) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn tail_check_small_case() {
        let report =
            tail_bound_check(20, 20_000, &[0.0, 1.0, 2.0, 4.0], RngStream::new(52, 0), 4).unwrap();
        assert!(report.pass, "{report:?}");
        assert_eq!(report.empirical[0], 1.0); // z = 0: every deviation exceeds 0
        assert_eq!(report.bound[0], 3.0);
        // empirical tail nonincreasing in z
        assert!(report.empirical.windows(2).all(|w| w[0] >= w[1]));
    }
}
