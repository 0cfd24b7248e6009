//! Distribution of a pure-birth chain by uniformization.
//!
//! The entrance count M(t) moves from state n to n+1 at rate 1/(n+1).
//! All rates are bounded by 1, so the chain embeds exactly into a
//! discrete chain subordinated to a Poisson(t) clock; truncating the
//! Poisson sum at t + 12 sqrt(t) + 20 steps leaves mass far below f64
//! resolution, and whatever is lost lands in the explicit deficit.

use serde::{Deserialize, Serialize};

use super::special::ln_gamma;
use crate::error::{Error, Result};

/// Probabilities p_0..p_{n_max} of a counting variable at horizon t,
/// with the unassigned mass tracked in `deficit`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DistributionTable {
    pub t: f64,
    pub probs: Vec<f64>,
    pub deficit: f64,
}

impl DistributionTable {
    /// P(X >= n), counting the deficit as mass at or above n_max + 1.
    pub fn tail_from(&self, n: usize) -> f64 {
        self.probs[n.min(self.probs.len())..].iter().sum::<f64>() + self.deficit
    }

    /// Lower bound on E X from the tabulated states (deficit ignored).
    pub fn mean(&self) -> f64 {
        self.probs
            .iter()
            .enumerate()
            .map(|(n, p)| n as f64 * p)
            .sum()
    }

    pub fn second_moment(&self) -> f64 {
        self.probs
            .iter()
            .enumerate()
            .map(|(n, p)| (n * n) as f64 * p)
            .sum()
    }
}

/// Law of the entrance count M(t) on {0..n_max}.
pub fn birth_distribution(t: f64, n_max: usize, deficit_cap: f64) -> Result<DistributionTable> {
    birth_distribution_with_rates(|n| 1.0 / (n as f64 + 1.0), 1.0, t, n_max, deficit_cap)
}

/// Same scheme for a general birth chain with rates `rate(n) <= rate_bound`.
pub fn birth_distribution_with_rates(
    rate: impl Fn(usize) -> f64,
    rate_bound: f64,
    t: f64,
    n_max: usize,
    deficit_cap: f64,
) -> Result<DistributionTable> {
    if !(t >= 0.0) {
        return Err(Error::Domain(format!("t must be >= 0, got {t}")));
    }
    if n_max < 1 {
        return Err(Error::Domain("n_max must be >= 1".into()));
    }
    if !(rate_bound > 0.0) {
        return Err(Error::Domain("rate_bound must be positive".into()));
    }
    let q = rate_bound;
    let qt = q * t;
    // jump probabilities of the uniformized chain
    let jump: Vec<f64> = (0..=n_max)
        .map(|n| {
            let r = rate(n);
            assert!(
                (0.0..=q).contains(&r),
                "rate({n}) = {r} outside [0, {q}]"
            );
            r / q
        })
        .collect();

    let mut probs = vec![0.0; n_max + 1];
    if qt == 0.0 {
        probs[0] = 1.0;
        return Ok(DistributionTable {
            t,
            probs,
            deficit: 0.0,
        });
    }

    let steps = (qt + 12.0 * qt.sqrt() + 20.0).ceil() as u64;
    let mut v = vec![0.0f64; n_max + 1];
    let mut v_over = 0.0f64;
    v[0] = 1.0;
    let mut acc_over = 0.0f64;
    let log_qt = qt.ln();
    for m in 0..=steps {
        let w = (-qt + m as f64 * log_qt - ln_gamma(m as f64 + 1.0)).exp();
        if w > 0.0 {
            for (a, x) in probs.iter_mut().zip(v.iter()) {
                *a += w * x;
            }
            acc_over += w * v_over;
        }
        if m < steps {
            v_over += v[n_max] * jump[n_max];
            for k in (1..=n_max).rev() {
                v[k] = v[k] * (1.0 - jump[k]) + v[k - 1] * jump[k - 1];
            }
            v[0] *= 1.0 - jump[0];
        }
    }
    let total: f64 = probs.iter().sum::<f64>();
    let deficit = (1.0 - total).max(acc_over).max(0.0);
    if deficit > deficit_cap {
        return Err(Error::Truncation {
            deficit,
            cap: deficit_cap,
        });
    }
    Ok(DistributionTable { t, probs, deficit })
}
