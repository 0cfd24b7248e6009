//! Samplers and path functionals of the unit-rate Poisson process:
//! exit and entrance counts, the integrals T(x) and S(x), the urn model,
//! and the per-path inverse identities tying them together.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::rng::unit_exponential;

/// A realized Poisson path: strictly increasing arrival times in
/// (0, horizon]. May be empty.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ArrivalSequence {
    pub horizon: f64,
    pub times: Vec<f64>,
}

impl ArrivalSequence {
    /// Wrap pre-computed arrival times, checking the invariants.
    pub fn from_times(horizon: f64, times: Vec<f64>) -> Result<Self> {
        let mut prev = 0.0;
        for &x in &times {
            if !(x > prev) {
                return Err(Error::Domain(format!(
                    "arrival times must be strictly increasing and positive, got {x} after {prev}"
                )));
            }
            prev = x;
        }
        if prev > horizon {
            return Err(Error::Domain(
                "arrival beyond the stated horizon".into(),
            ));
        }
        Ok(Self { horizon, times })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Inter-arrival gaps eta_j = pi_j - pi_{j-1}.
    pub fn gaps(&self) -> impl Iterator<Item = f64> + '_ {
        self.times
            .iter()
            .scan(0.0, |prev, &x| {
                let gap = x - *prev;
                *prev = x;
                Some(gap)
            })
    }
}

/// T(x), S(x) and the arrival count of one path at level x.
/// The integration-by-parts identity T = x * count - S holds per path.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PathFunctionals {
    pub x: f64,
    pub t_integral: f64,
    pub s_integral: f64,
    pub count: u64,
}

/// Arrivals of a unit-rate Poisson process on [0, horizon], as cumulative
/// sums of unit exponentials.
pub fn sample_arrivals<R: Rng + ?Sized>(horizon: f64, rng: &mut R) -> ArrivalSequence {
    let mut times = Vec::new();
    let mut x = unit_exponential(rng);
    while x <= horizon {
        times.push(x);
        x += unit_exponential(rng);
    }
    ArrivalSequence { horizon, times }
}

/// Exit count N(t): the largest n with pi_1 + ... + pi_n <= t.
///
/// Errors if the sequence is too short to decide: the last prefix sum must
/// exceed t, otherwise more arrivals could still be counted.
pub fn exit_count(arrivals: &ArrivalSequence, t: f64) -> Result<u64> {
    if !(t >= 0.0) {
        return Err(Error::Domain(format!("t must be >= 0, got {t}")));
    }
    let mut sum = 0.0;
    let mut n = 0u64;
    for &pi in &arrivals.times {
        sum += pi;
        if sum > t {
            return Ok(n);
        }
        n += 1;
    }
    Err(Error::InsufficientHorizon {
        horizon: arrivals.horizon,
        t,
    })
}

/// Exit count sampled directly at level t, extending the arrival sequence
/// lazily until the partial sums exceed t. Exact: no truncation bias.
pub fn sample_exit_count<R: Rng + ?Sized>(t: f64, rng: &mut R) -> u64 {
    let mut pi = 0.0f64;
    let mut sum = 0.0f64;
    let mut n = 0u64;
    loop {
        pi += unit_exponential(rng);
        sum += pi;
        if sum > t {
            return n;
        }
        n += 1;
    }
}

/// Entrance count M(t), sampled through its jump times
/// zeta_n = sum_{j<=n} j eta_j. M(0) = 0.
pub fn sample_entrance_count<R: Rng + ?Sized>(t: f64, rng: &mut R) -> u64 {
    let mut zeta = 0.0f64;
    let mut n = 0u64;
    loop {
        zeta += (n + 1) as f64 * unit_exponential(rng);
        if zeta > t {
            return n;
        }
        n += 1;
    }
}

/// One draw of the entrance jump time zeta_n = sum_{j=1}^n j eta_j.
pub fn sample_zeta<R: Rng + ?Sized>(n: u64, rng: &mut R) -> f64 {
    (1..=n).map(|j| j as f64 * unit_exponential(rng)).sum()
}

/// T(x) = sum of arrivals <= x, S(x) = sum of (x - arrival) over the same
/// set, plus the count.
pub fn waiting_integrals(arrivals: &ArrivalSequence, x: f64) -> Result<PathFunctionals> {
    if x > arrivals.horizon {
        return Err(Error::Domain(format!(
            "x = {x} beyond horizon {}",
            arrivals.horizon
        )));
    }
    let mut t_int = 0.0;
    let mut s_int = 0.0;
    let mut count = 0u64;
    for &pi in &arrivals.times {
        if pi > x {
            break;
        }
        t_int += pi;
        s_int += x - pi;
        count += 1;
    }
    Ok(PathFunctionals {
        x,
        t_integral: t_int,
        s_integral: s_int,
        count,
    })
}

/// Per-path check of the inverse representations
/// N(t) = Pi(X(t)) - 1 with X the right-continuous inverse of T, and
/// M(t) = Pi(tau(t)) with tau solving S(tau) + tau = t.
pub fn inverse_identities_check(arrivals: &ArrivalSequence, t: f64) -> Result<bool> {
    if !(t >= 0.0) {
        return Err(Error::Domain(format!("t must be >= 0, got {t}")));
    }
    let n_exit = exit_count(arrivals, t)?;

    // X(t) = min{x : T(x) > t}; T jumps only at arrivals, so X(t) is the
    // first arrival at which the prefix sum exceeds t.
    let mut sum = 0.0;
    let mut x_of_t = None;
    let mut jumps_before = 0u64;
    for &pi in &arrivals.times {
        sum += pi;
        jumps_before += 1;
        if sum > t {
            x_of_t = Some(pi);
            break;
        }
    }
    let _x = x_of_t.ok_or(Error::InsufficientHorizon {
        horizon: arrivals.horizon,
        t,
    })?;
    // Pi(X(t)) counts arrivals up to and including X(t).
    let check_exit = jumps_before - 1 == n_exit;

    // tau(t): S(y) + y is piecewise linear with slope n + 1 between the
    // n-th and (n+1)-st arrivals; solve segment by segment, exactly.
    // Its value at the n-th arrival is zeta_n, so breakpoints come free.
    let mut zeta = 0.0;
    let mut prev_time = 0.0;
    let mut tau = None;
    let mut pi_count = 0u64;
    for &pi in &arrivals.times {
        let slope = pi_count as f64 + 1.0;
        let at_next = zeta + slope * (pi - prev_time);
        if at_next > t {
            tau = Some(prev_time + (t - zeta) / slope);
            break;
        }
        zeta = at_next;
        prev_time = pi;
        pi_count += 1;
    }
    let tau = match tau {
        Some(v) => v,
        // Ran out of arrivals before S + id reached t.
        None => {
            return Err(Error::InsufficientHorizon {
                horizon: arrivals.horizon,
                t,
            })
        }
    };
    let pi_at_tau = arrivals.times.iter().take_while(|&&p| p <= tau).count() as u64;

    // Entrance count from the defining max, computed from the same path.
    let mut m_def = 0u64;
    let mut prefix = 0.0;
    for (n, &pi) in arrivals.times.iter().enumerate() {
        let n1 = (n + 1) as f64;
        if n1 * pi - prefix <= t {
            m_def = n as u64 + 1;
        } else {
            break;
        }
        prefix += pi;
    }
    let check_entrance = pi_at_tau == m_def;

    Ok(check_exit && check_entrance)
}

/// The urn model: one red ball, whites added each time the red is drawn at
/// the events of a unit-rate Poisson clock. Returns the white count at t.
pub fn sample_urn_count<R: Rng + ?Sized>(t: f64, rng: &mut R) -> u64 {
    let mut clock = 0.0f64;
    let mut whites = 0u64;
    loop {
        clock += unit_exponential(rng);
        if clock > t {
            return whites;
        }
        let u: f64 = rng.random();
        if u * (whites as f64 + 1.0) < 1.0 {
            whites += 1;
        }
    }
}
