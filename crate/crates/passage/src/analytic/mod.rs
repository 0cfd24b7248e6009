//! Closed-form and numerical evaluation of the exit/entrance count laws:
//! the Borel-weighted series for the mean, the entrance CDF, the
//! pure-birth master equation, moment identities and bounds.

mod birth;
mod extended;
mod quad;
pub mod special;

pub use birth::{birth_distribution, birth_distribution_with_rates, DistributionTable};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use quad::adaptive_simpson;
use special::ln_gamma;

/// A truncated series value with an absolute error bound.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SeriesEval {
    pub value: f64,
    pub terms_used: usize,
    pub tail_bound: f64,
}

/// Mean/variance pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentPair {
    pub mean: f64,
    pub variance: f64,
}

/// Borel pmf P(Z = j) = e^{-j} j^{j-1} / j!, the law of the total progeny
/// of a critical Poisson branching process.
pub fn borel_pmf(j: u64) -> Result<f64> {
    if j == 0 {
        return Err(Error::Domain("borel_pmf requires j >= 1".into()));
    }
    let j = j as f64;
    Ok((-j + (j - 1.0) * j.ln() - ln_gamma(j + 1.0)).exp())
}

/// log of the j-th series weight e^{-j} j^j / j! = j * borel_pmf(j).
fn ln_weight(j: f64) -> f64 {
    -j + j * j.ln() - ln_gamma(j + 1.0)
}

/// Smallest direct summation length; beyond it the j^{-3/2}-tailed series
/// is replaced by an integral against the Stirling form of the weights.
const J_DIRECT_MIN: usize = 100_000;
const J_DIRECT_MAX: usize = 4_000_000;

/// Truncation point such that the midpoint-rule error of the tail,
/// ~ (1/24)(2/3)(2 pi)^{-1/2} 0.8 J^{-3/2}, stays below an eighth of tol,
/// leaving room for the Stirling remainder which scales the same way.
fn direct_terms(tol: f64) -> usize {
    let j = (0.071 / tol).powf(2.0 / 3.0);
    (j.ceil() as usize).clamp(J_DIRECT_MIN, J_DIRECT_MAX)
}

/// Mean exit count nu(t) = sum_{j>=1} e^{-j} (j^j/j!) (1 - e^{-t/j}),
/// evaluated to absolute accuracy `tol`.
pub fn mean_exit_count(t: f64, tol: f64) -> Result<SeriesEval> {
    if !(t >= 0.0) {
        return Err(Error::Domain(format!("t must be >= 0, got {t}")));
    }
    if !(tol > 0.0) {
        return Err(Error::Domain(format!("tol must be > 0, got {tol}")));
    }
    if t == 0.0 {
        return Ok(SeriesEval {
            value: 0.0,
            terms_used: 1,
            tail_bound: 0.0,
        });
    }

    let j_direct = direct_terms(tol);
    // Kahan summation keeps the rounding term of the long sum near eps.
    let mut direct = 0.0f64;
    let mut comp = 0.0f64;
    for j in 1..=j_direct {
        let jf = j as f64;
        let term = ln_weight(jf).exp() * (-(-t / jf).exp_m1()) - comp;
        let s = direct + term;
        comp = (s - direct) - term;
        direct = s;
    }

    // Tail sum_{j>J} approximated by the midpoint integral from J + 1/2,
    // with the weight replaced by (2 pi y)^{-1/2} (1 - 1/(12 y)).
    // Substitution u = y^{-1/2} maps the tail to a finite interval.
    let j0 = j_direct as f64 + 0.5;
    let u_max = 1.0 / j0.sqrt();
    let c = 2.0 / (2.0 * std::f64::consts::PI).sqrt();
    let integrand = |u: f64| {
        let g = if u == 0.0 {
            t
        } else {
            -(-t * u * u).exp_m1() / (u * u)
        };
        c * (1.0 - u * u / 12.0) * g
    };
    let quad_tol = (tol / 4.0).min(1e-9);
    let tail = adaptive_simpson(integrand, 0.0, u_max, quad_tol);

    // Error budget:
    // (a) Stirling remainder: |weight(y) - approx(y)| <= (2 pi y)^{-1/2}/(96 y^2).
    let stirling = adaptive_simpson(
        |u: f64| {
            let g = if u == 0.0 {
                t
            } else {
                -(-t * u * u).exp_m1() / (u * u)
            };
            c * (u * u * u * u / 96.0) * g
        },
        0.0,
        u_max,
        1e-12,
    );
    // (b) Euler-Maclaurin midpoint error: (1/24) int |f''| with the majorant
    // |f''(y)| <= (2 pi y)^{-1/2} [0.8/y^2 + (3.2 t/y^3 + t^2/y^4) e^{-t/y}].
    let em = adaptive_simpson(
        |u: f64| {
            if u == 0.0 {
                return 0.0;
            }
            let y = 1.0 / (u * u);
            let e = (-t / y).exp();
            let major = 0.8 / (y * y) + (3.2 * t / (y * y * y) + t * t / (y * y * y * y)) * e;
            c / (u * u) * major / 24.0
        },
        0.0,
        u_max,
        1e-12,
    );
    // (c) rounding in the compensated direct sum plus per-term evaluation
    // error of the 1e-14-accurate log-gamma.
    let roundoff = 4.0 * f64::EPSILON * direct.max(1.0) + 2e-14 * direct.max(1.0);

    let value = direct + tail.value;
    let bound = stirling.value + em.value + tail.err_est + quad_tol + roundoff;
    let terms_used = j_direct + tail.evals;
    if bound > tol {
        return Err(Error::Convergence {
            value,
            bound,
            tol,
        });
    }
    Ok(SeriesEval {
        value,
        terms_used,
        tail_bound: bound,
    })
}

/// Entrance CDF P(M(t) >= n) = P(zeta_n <= t).
///
/// Three regimes sharing validation overlaps: the alternating binomial sum
/// in f64 for n <= 12, the same sum in extended precision for n <= 60, and
/// the uniformized master equation beyond.
pub fn entrance_cdf(n: u64, t: f64) -> Result<f64> {
    if n == 0 {
        return Err(Error::Domain("entrance_cdf requires n >= 1".into()));
    }
    if !(t >= 0.0) {
        return Err(Error::Domain(format!("t must be >= 0, got {t}")));
    }
    if t == 0.0 {
        return Ok(0.0);
    }
    if n <= 12 {
        return Ok(entrance_cdf_f64(n, t));
    }
    if n <= 60 {
        return Ok(extended::entrance_cdf_big(n, t));
    }
    let table = birth_distribution(t, n as usize - 1, 1.0)?;
    Ok(table.deficit)
}

fn entrance_cdf_f64(n: u64, t: f64) -> f64 {
    // Exact integer coefficients C(n,j) j^n stay below 2^63 for n <= 12.
    let mut sum = 0.0f64;
    let mut binom = 1u128;
    for j in 1..=n {
        binom = binom * (n - j + 1) as u128 / j as u128;
        let coeff = binom * (j as u128).pow(n as u32);
        let term = coeff as f64 * (-(-t / j as f64).exp_m1());
        if (n - j) % 2 == 0 {
            sum += term;
        } else {
            sum -= term;
        }
    }
    let mut fact = 1.0f64;
    for j in 2..=n {
        fact *= j as f64;
    }
    (sum / fact).clamp(0.0, 1.0)
}

/// Variance of the exit count via sigma^2(t) = 2t - nu^2(t) - nu(t).
pub fn exit_variance(t: f64, tol: f64) -> Result<f64> {
    let nu = mean_exit_count(t, tol)?.value;
    Ok(2.0 * t - nu * nu - nu)
}

/// The two-sided bound sqrt(2t+1) - 1 < nu(t) < sqrt(2t).
pub fn mean_bounds(t: f64) -> Result<(f64, f64)> {
    if !(t > 0.0) {
        return Err(Error::Domain(format!("t must be > 0, got {t}")));
    }
    Ok(((2.0 * t + 1.0).sqrt() - 1.0, (2.0 * t).sqrt()))
}

/// Mean and variance of the entrance jump time zeta_n = sum_{j<=n} j eta_j.
pub fn zeta_moments(n: u64) -> Result<MomentPair> {
    if n == 0 {
        return Err(Error::Domain("zeta_moments requires n >= 1".into()));
    }
    let nf = n as f64;
    Ok(MomentPair {
        mean: nf * (nf + 1.0) / 2.0,
        variance: nf * (nf + 1.0) * (2.0 * nf + 1.0) / 6.0,
    })
}

/// MGF of the integrated Poisson process, E e^{z T(x)} = exp((e^{zx}-zx-1)/z).
pub fn waiting_time_mgf(x: f64, z: f64) -> Result<f64> {
    if !(x >= 0.0) {
        return Err(Error::Domain(format!("x must be >= 0, got {x}")));
    }
    let zx = z * x;
    let exponent = if zx.abs() < 1e-6 {
        // series limit, removable singularity at z = 0
        x * x / 2.0 * z + x * x * x / 6.0 * z * z + x * x * x * x / 24.0 * z * z * z
    } else {
        (zx.exp_m1() - zx) / z
    };
    if exponent > 709.0 {
        return Err(Error::Range {
            log_value: exponent,
        });
    }
    Ok(exponent.exp())
}

/// m-th central moment of a unit exponential, E(eta - 1)^m: the
/// derangement number D_m = m! sum_{j=0}^m (-1)^j / j!.
pub fn centered_exponential_moment(m: u32) -> f64 {
    match m {
        0 => 1.0,
        1 => 0.0,
        _ => {
            let mut prev = 1.0f64; // D_0
            let mut cur = 0.0f64; // D_1
            for k in 2..=m {
                let next = (k as f64 - 1.0) * (cur + prev);
                prev = cur;
                cur = next;
            }
            cur
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn borel_pmf_small_values() {
        // j = 1: e^{-1}; j = 3: 9 e^{-3} / 6
        assert!((borel_pmf(1).unwrap() - (-1.0f64).exp()).abs() < 1e-15);
        assert!((borel_pmf(3).unwrap() - 1.5 * (-3.0f64).exp()).abs() < 1e-15);
        assert!(borel_pmf(0).is_err());
    }

    #[test]
    fn borel_mass_approaches_one_monotonically() {
        let mut acc = 0.0;
        let mut prev = 0.0;
        for j in 1..=1_000_000u64 {
            acc += borel_pmf(j).unwrap();
            assert!(acc > prev);
            assert!(acc < 1.0 + 1e-9);
            prev = acc;
        }
        // tail of the Borel law is O(j^{-1/2})
        assert!(acc > 0.999);
    }

    #[test]
    fn borel_weight_matches_series_weight() {
        // j * pmf(j) = e^{-j} j^j / j! in log space, exactly the series weight
        for j in [1u64, 5, 100, 10_000] {
            let lhs = (j as f64).ln() + borel_pmf(j).unwrap().ln();
            let rhs = ln_weight(j as f64);
            // the two routes cancel O(j ln j)-sized terms differently
            let scale = 1.0 + (j as f64) * (j as f64).ln();
            assert!((lhs - rhs).abs() < 1e-14 * scale, "j={j}");
        }
    }

    #[test]
    fn mean_exit_count_edge_cases() {
        assert_eq!(mean_exit_count(0.0, 1e-9).unwrap().value, 0.0);
        assert!(mean_exit_count(-1.0, 1e-9).is_err());
        assert!(mean_exit_count(1.0, 0.0).is_err());
    }

    #[test]
    fn mean_exit_count_within_bounds_at_t2() {
        let v = mean_exit_count(2.0, 1e-9).unwrap();
        assert!(v.value > 5f64.sqrt() - 1.0 && v.value < 2.0, "{}", v.value);
        assert!(v.tail_bound <= 1e-9);
    }

    #[test]
    fn gap_limit_at_large_t() {
        let t = 1e6;
        let v = mean_exit_count(t, 1e-6).unwrap();
        let gap = (2.0 * t).sqrt() - v.value;
        assert!((gap - 2.0 / 3.0).abs() < 0.01, "gap = {gap}");
    }

    #[test]
    fn entrance_cdf_closed_forms() {
        // n = 1: 1 - e^{-t}
        for &t in &[0.1, 1.0, 7.0] {
            assert!((entrance_cdf(1, t).unwrap() - (1.0 - (-t).exp())).abs() < 1e-14);
        }
        // n = 2, t = 2
        let expect = 1.0 - 2.0 * (-1.0f64).exp() + (-2.0f64).exp();
        assert!((entrance_cdf(2, 2.0).unwrap() - expect).abs() < 1e-12);
        assert_eq!(entrance_cdf(5, 0.0).unwrap(), 0.0);
        assert!(entrance_cdf(0, 1.0).is_err());
    }

    #[test]
    fn entrance_cdf_regimes_agree_on_overlaps() {
        // f64 vs extended at n = 12, extended vs uniformization at n ~ 60.
        for &t in &[5.0, 15.0, 30.0] {
            let a = entrance_cdf_f64(12, t);
            let b = extended::entrance_cdf_big(12, t);
            assert!((a - b).abs() < 1e-10, "t={t}: {a} vs {b}");
        }
        for &t in &[800.0, 1500.0, 2000.0] {
            let big = extended::entrance_cdf_big(60, t);
            let uni = birth_distribution(t, 59, 1.0).unwrap().deficit;
            assert!((big - uni).abs() < 1e-9, "t={t}: {big} vs {uni}");
        }
    }

    #[test]
    fn entrance_cdf_consistent_with_birth_distribution() {
        // tail identity P(M >= n) = sum_{k>=n} p_k + deficit
        for &t in &[2.0, 10.0, 30.0] {
            let table = birth_distribution(t, 80, 1e-12).unwrap();
            for n in 1..=12u64 {
                let lhs = entrance_cdf(n, t).unwrap();
                let rhs = table.tail_from(n as usize);
                assert!((lhs - rhs).abs() < 1e-9, "n={n} t={t}: {lhs} vs {rhs}");
            }
        }
    }

    #[test]
    fn entrance_cdf_monotone_in_n_and_t() {
        for n in 1..=30u64 {
            let lo = entrance_cdf(n, 3.0).unwrap();
            let hi = entrance_cdf(n, 4.0).unwrap();
            assert!(hi >= lo - 1e-12, "n={n}");
            let next = entrance_cdf(n + 1, 3.0).unwrap();
            assert!(next <= lo + 1e-12, "n={n}");
        }
    }

    #[test]
    fn mean_equals_summed_entrance_cdfs() {
        // first equality of the exact series: nu(t) = sum_n P(zeta_n <= t)
        for &t in &[1.0, 10.0, 30.0] {
            let nu = mean_exit_count(t, 1e-10).unwrap().value;
            let mut sum = 0.0;
            for n in 1..200u64 {
                let p = entrance_cdf(n, t).unwrap();
                sum += p;
                if p < 1e-14 {
                    break;
                }
            }
            assert!((nu - sum).abs() < 1e-8, "t={t}: {nu} vs {sum}");
        }
    }

    #[test]
    fn derivative_of_mean_matches_inverse_population_rate() {
        // nu'(t) = E[1/(M(t)+1)] via central finite differences
        let t = 10.0;
        let h = 1e-3;
        let up = mean_exit_count(t + h, 1e-11).unwrap().value;
        let dn = mean_exit_count(t - h, 1e-11).unwrap().value;
        let deriv = (up - dn) / (2.0 * h);
        let table = birth_distribution(t, 80, 1e-13).unwrap();
        let expect: f64 = table
            .probs
            .iter()
            .enumerate()
            .map(|(n, p)| p / (n as f64 + 1.0))
            .sum();
        assert!((deriv - expect).abs() < 1e-6, "{deriv} vs {expect}");
    }

    #[test]
    fn second_moment_identity() {
        // E M^2 = 2t - E M
        for &t in &[2.0, 10.0, 25.0] {
            let table = birth_distribution(t, 90, 1e-13).unwrap();
            let m1 = table.mean();
            let m2 = table.second_moment();
            assert!((m2 - (2.0 * t - m1)).abs() < 1e-9, "t={t}");
        }
    }

    #[test]
    fn bounds_bracket_the_mean_on_log_grid() {
        let mut t = 0.1;
        while t <= 1e6 {
            let (lo, hi) = mean_bounds(t).unwrap();
            let nu = mean_exit_count(t, 1e-7).unwrap();
            assert!(lo < nu.value - nu.tail_bound, "t={t}");
            assert!(nu.value + nu.tail_bound < hi, "t={t}");
            assert!(hi - lo < 1.0);
            t *= 10.0_f64.powf(0.25);
        }
        assert!(mean_bounds(0.0).is_err());
    }

    #[test]
    fn gap_approaches_limit_from_below() {
        // numerical observation recorded by the source analysis: the gap
        // sqrt(2t) - nu(t) increases towards 2/3
        let mut prev = f64::NEG_INFINITY;
        let mut t = 1.0;
        while t <= 1e5 {
            let nu = mean_exit_count(t, 1e-9).unwrap().value;
            let gap = (2.0 * t).sqrt() - nu;
            assert!(gap > prev, "t={t}");
            assert!(gap < 2.0 / 3.0 + 1e-6);
            prev = gap;
            t *= 10.0;
        }
    }

    #[test]
    fn exit_variance_values() {
        assert_eq!(exit_variance(0.0, 1e-9).unwrap(), 0.0);
        let t = 1e4;
        let v = exit_variance(t, 1e-7).unwrap();
        // leading asymptote with the constant correction
        let expect = (2.0 * t).sqrt() / 3.0 + 2.0 / 9.0;
        assert!((v - expect).abs() < 0.25, "{v} vs {expect}");
        let ratio = v / ((2.0 * t).sqrt() / 3.0);
        assert!((0.99..=1.02).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn zeta_moment_table() {
        assert_eq!(
            zeta_moments(1).unwrap(),
            MomentPair {
                mean: 1.0,
                variance: 1.0
            }
        );
        assert_eq!(
            zeta_moments(2).unwrap(),
            MomentPair {
                mean: 3.0,
                variance: 5.0
            }
        );
        assert_eq!(
            zeta_moments(3).unwrap(),
            MomentPair {
                mean: 6.0,
                variance: 14.0
            }
        );
        assert!(zeta_moments(0).is_err());
    }

    #[test]
    fn mgf_limit_and_derivative() {
        // z -> 0 limit is 1
        assert!((waiting_time_mgf(3.0, 0.0).unwrap() - 1.0).abs() < 1e-15);
        assert!((waiting_time_mgf(3.0, 1e-12).unwrap() - 1.0).abs() < 1e-10);
        // d/dz at 0 equals E T(x) = x^2/2
        let x = 3.0;
        let h = 1e-5;
        let d = (waiting_time_mgf(x, h).unwrap() - waiting_time_mgf(x, -h).unwrap()) / (2.0 * h);
        assert!((d - x * x / 2.0).abs() < 1e-4, "{d}");
        // continuity across the small-|z| switch: the jump is O(dz), not O(1)
        let lo = waiting_time_mgf(1.0, 0.999e-6).unwrap();
        let hi = waiting_time_mgf(1.0, 1.001e-6).unwrap();
        assert!((lo - hi).abs() < 2e-9);
        // overflow reporting
        match waiting_time_mgf(100.0, 10.0) {
            Err(Error::Range { log_value }) => assert!(log_value > 709.0),
            other => panic!("expected range error, got {other:?}"),
        }
    }

    #[test]
    fn derangement_moments() {
        assert_eq!(centered_exponential_moment(0), 1.0);
        assert_eq!(centered_exponential_moment(1), 0.0);
        assert_eq!(centered_exponential_moment(2), 1.0);
        assert_eq!(centered_exponential_moment(3), 2.0);
        assert_eq!(centered_exponential_moment(4), 9.0);
        assert_eq!(centered_exponential_moment(5), 44.0);
        // D_m < m!/e + 1
        let mut fact = 1.0;
        for m in 2..=15u32 {
            fact *= m as f64;
            assert!(centered_exponential_moment(m) < fact / std::f64::consts::E + 1.0);
        }
    }
}
