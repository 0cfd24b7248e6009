//! Online selection policies on a marked Poisson scatter: the self-similar
//! acceptance-window policies under a monotonicity or sum constraint, the
//! fixed-threshold policy, the offline smallest-first count, and patience
//! sorting for the offline longest increasing subsequence.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::rng::unit_exponential;

/// Mark xi arriving at time tau.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarkedPoint {
    pub time: f64,
    pub mark: f64,
}

/// A realized scatter on [0, horizon] x [0, 1], sorted by time.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PlanarSample {
    pub horizon: f64,
    pub points: Vec<MarkedPoint>,
}

impl PlanarSample {
    pub fn from_points(horizon: f64, points: Vec<MarkedPoint>) -> Result<Self> {
        let mut prev = 0.0;
        for p in &points {
            if !(p.time > prev) || p.time > horizon {
                return Err(Error::Domain(
                    "point times must be strictly increasing within the horizon".into(),
                ));
            }
            if !(0.0..=1.0).contains(&p.mark) {
                return Err(Error::Domain(format!("mark {} outside [0,1]", p.mark)));
            }
            prev = p.time;
        }
        Ok(Self { horizon, points })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Unit-rate scatter: exponential gaps in time, uniform marks.
pub fn sample_planar<R: Rng + ?Sized>(horizon: f64, rng: &mut R) -> PlanarSample {
    let mut points = Vec::new();
    let mut t = unit_exponential(rng);
    while t <= horizon {
        points.push(MarkedPoint {
            time: t,
            mark: rng.random(),
        });
        t += unit_exponential(rng);
    }
    PlanarSample { horizon, points }
}

/// z below which the asymptotic optimal control saturates at 1:
/// the positive root of sqrt(2/z) - 1/(3z) = 1, namely 1/(6 - sqrt(27)).
pub const OPTIMAL_CLAMP_Z: f64 = 1.0 / (6.0 - 5.196_152_422_706_632);

/// Acceptance-window control psi driving the self-similar policies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ControlFunction {
    /// Asymptotically optimal sqrt(2/z) - 1/(3z), clamped to 1 below
    /// [`OPTIMAL_CLAMP_Z`].
    Optimal,
    /// Constant 1: accept every feasible item.
    Greedy,
    /// Constant min(sqrt(2/horizon), 1); the horizon is fixed at
    /// construction, not the remaining time.
    Stationary { horizon: f64 },
    /// Fixed mark threshold; runnable only through [`threshold_count`].
    Threshold(f64),
    /// Monotone linear interpolation of a (z, psi) table, clamped to [0,1];
    /// end values extend beyond the table.
    Custom(Vec<(f64, f64)>),
}

impl ControlFunction {
    /// psi(z), always in [0, 1].
    pub fn value(&self, z: f64) -> Result<f64> {
        if !(z >= 0.0) {
            return Err(Error::Domain(format!("z must be >= 0, got {z}")));
        }
        match self {
            ControlFunction::Optimal => {
                if z <= OPTIMAL_CLAMP_Z {
                    Ok(1.0)
                } else {
                    Ok(((2.0 / z).sqrt() - 1.0 / (3.0 * z)).clamp(0.0, 1.0))
                }
            }
            ControlFunction::Greedy => Ok(1.0),
            ControlFunction::Stationary { horizon } => Ok((2.0 / horizon).sqrt().min(1.0)),
            ControlFunction::Threshold(_) => Err(Error::UnsupportedControl(
                "threshold policies count marks directly; use threshold_count".into(),
            )),
            ControlFunction::Custom(table) => {
                if table.is_empty() {
                    return Err(Error::Domain("empty control table".into()));
                }
                Ok(interpolate(table, z).clamp(0.0, 1.0))
            }
        }
    }
}

fn interpolate(table: &[(f64, f64)], z: f64) -> f64 {
    if z <= table[0].0 {
        return table[0].1;
    }
    if z >= table[table.len() - 1].0 {
        return table[table.len() - 1].1;
    }
    let idx = table.partition_point(|&(zi, _)| zi <= z);
    let (z0, p0) = table[idx - 1];
    let (z1, p1) = table[idx];
    p0 + (p1 - p0) * (z - z0) / (z1 - z0)
}

/// Which constraint a trace was selected under.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SelectionKind {
    /// Marks must increase (running maximum path).
    Monotone,
    /// Marks must total at most 1 (running sum path).
    SumConstrained,
}

/// Output of a policy run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SelectionTrace {
    pub accepted: Vec<MarkedPoint>,
    pub path: Vec<f64>,
    pub kind: SelectionKind,
}

impl SelectionTrace {
    pub fn count(&self) -> u64 {
        self.accepted.len() as u64
    }
}

/// Run the monotone-constraint policy: with last selection x, accept
/// (tau, xi) iff 0 < (xi - x)/(1 - x) <= psi((t - tau)(1 - x)).
pub fn run_i_policy(sample: &PlanarSample, control: &ControlFunction) -> Result<SelectionTrace> {
    // reject unusable controls before scanning
    control.value(0.0)?;
    let t = sample.horizon;
    let mut x = 0.0f64;
    let mut accepted = Vec::new();
    let mut path = Vec::new();
    for &p in &sample.points {
        if p.mark <= x || 1.0 - x <= 0.0 {
            continue;
        }
        let rel = (p.mark - x) / (1.0 - x);
        let psi = control.value((t - p.time) * (1.0 - x))?;
        if rel <= psi {
            x = p.mark;
            accepted.push(p);
            path.push(x);
        }
    }
    Ok(SelectionTrace {
        accepted,
        path,
        kind: SelectionKind::Monotone,
    })
}

/// Run the sum-constraint policy: with running total x, accept (tau, xi)
/// iff 0 < xi/(1 - x) <= psi((t - tau)(1 - x)). psi <= 1 forces the total
/// to stay within 1.
pub fn run_b_policy(sample: &PlanarSample, control: &ControlFunction) -> Result<SelectionTrace> {
    control.value(0.0)?;
    let t = sample.horizon;
    let mut x = 0.0f64;
    let mut accepted = Vec::new();
    let mut path = Vec::new();
    for &p in &sample.points {
        if p.mark <= 0.0 || 1.0 - x <= 0.0 {
            continue;
        }
        let rel = p.mark / (1.0 - x);
        let psi = control.value((t - p.time) * (1.0 - x))?;
        if rel <= psi {
            x += p.mark;
            accepted.push(p);
            path.push(x);
        }
    }
    Ok(SelectionTrace {
        accepted,
        path,
        kind: SelectionKind::SumConstrained,
    })
}

/// Count of points with mark <= theta. Meets the sum constraint only in
/// the mean; the count is Poisson(theta * horizon) in law.
pub fn threshold_count(sample: &PlanarSample, theta: f64) -> Result<u64> {
    if !(0.0..=1.0).contains(&theta) {
        return Err(Error::Domain(format!("theta {theta} outside [0,1]")));
    }
    Ok(sample.points.iter().filter(|p| p.mark <= theta).count() as u64)
}

/// Offline smallest-first packing: sort ascending, count the longest
/// prefix whose sum stays within the capacity.
pub fn smallest_first_count(items: &[f64], capacity: f64) -> Result<u64> {
    if !(capacity > 0.0) {
        return Err(Error::Domain(format!("capacity must be > 0, got {capacity}")));
    }
    let mut sorted = items.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("no NaN items"));
    let mut sum = 0.0;
    let mut count = 0u64;
    for v in sorted {
        sum += v;
        if sum > capacity {
            break;
        }
        count += 1;
    }
    Ok(count)
}

/// Longest strictly increasing subsequence of the marks in time order,
/// by patience sorting in O(n log n).
pub fn lis_length(sample: &PlanarSample) -> u64 {
    let mut tails: Vec<f64> = Vec::new();
    for p in &sample.points {
        let idx = tails.partition_point(|&v| v < p.mark);
        if idx == tails.len() {
            tails.push(p.mark);
        } else {
            tails[idx] = p.mark;
        }
    }
    tails.len() as u64
}

// ---------------------------------------------------------------------------
// Direct count samplers. These avoid materializing the full scatter by
// simulating only the arrivals inside the acceptance window: with state
// (tau, x) the window has width (1-x) psi(z), z = (t - tau)(1-x), and in
// the z variable the candidate process has cumulative intensity
// Psi(z) = int_0^z psi. Every candidate is accepted, so a replication
// costs O(count) instead of O(t).
// ---------------------------------------------------------------------------

/// One draw of the selection count L(t) under a closed-form control.
/// The monotone and sum-constrained counts share this law.
///
/// Supports `Optimal`, `Greedy` and `Stationary`; table-based controls
/// need an explicit sample.
pub fn sample_selection_count<R: Rng + ?Sized>(
    t: f64,
    control: &ControlFunction,
    rng: &mut R,
) -> Result<u64> {
    if !(t >= 0.0) {
        return Err(Error::Domain(format!("t must be >= 0, got {t}")));
    }
    match control {
        ControlFunction::Optimal | ControlFunction::Greedy | ControlFunction::Stationary { .. } => {
        }
        other => {
            return Err(Error::UnsupportedControl(format!(
                "no closed-form intensity for {other:?}"
            )))
        }
    }
    let mut z = t;
    let mut count = 0u64;
    loop {
        let budget = big_psi(control, z);
        let e = unit_exponential(rng);
        if budget <= e {
            return Ok(count);
        }
        z = inverse_big_psi(control, budget - e);
        // accepted mark, uniform inside the window
        let u = 1.0 - rng.random::<f64>(); // (0, 1]
        let w = u * control.value(z)?;
        z *= 1.0 - w;
        count += 1;
    }
}

/// Psi(z) = int_0^z psi(s) ds for the closed-form controls.
fn big_psi(control: &ControlFunction, z: f64) -> f64 {
    match control {
        ControlFunction::Greedy => z,
        ControlFunction::Stationary { horizon } => (2.0 / horizon).sqrt().min(1.0) * z,
        ControlFunction::Optimal => {
            let z0 = OPTIMAL_CLAMP_Z;
            if z <= z0 {
                z
            } else {
                z0 + 2.0 * (2.0 * z).sqrt() - z.ln() / 3.0 - 2.0 * (2.0 * z0).sqrt()
                    + z0.ln() / 3.0
            }
        }
        _ => unreachable!("checked by caller"),
    }
}

fn inverse_big_psi(control: &ControlFunction, y: f64) -> f64 {
    debug_assert!(y >= 0.0);
    match control {
        ControlFunction::Greedy => y,
        ControlFunction::Stationary { horizon } => y / (2.0 / horizon).sqrt().min(1.0),
        ControlFunction::Optimal => {
            let z0 = OPTIMAL_CLAMP_Z;
            if y <= z0 {
                return y;
            }
            // Newton on Psi(z) - y with Psi' = psi; the cumulative
            // intensity is smooth and strictly increasing above z0.
            let k = z0 - 2.0 * (2.0 * z0).sqrt() + z0.ln() / 3.0;
            let mut z = (((y - k) / (2.0 * std::f64::consts::SQRT_2)).max(z0.sqrt())).powi(2);
            for _ in 0..60 {
                let g = big_psi(control, z) - y;
                let d = (2.0 / z).sqrt() - 1.0 / (3.0 * z);
                let next = (z - g / d).max(z0);
                if (next - z).abs() <= 1e-13 * z.max(1.0) {
                    return next.max(z0);
                }
                z = next;
            }
            z.max(z0)
        }
        _ => unreachable!("checked by caller"),
    }
}

/// Smallest-first count for n iid uniform items, generating only the
/// ascending order statistics actually needed.
pub fn sample_smallest_first_count_fixed_n<R: Rng + ?Sized>(
    n: u64,
    capacity: f64,
    rng: &mut R,
) -> Result<u64> {
    if !(capacity > 0.0) {
        return Err(Error::Domain("capacity must be > 0".into()));
    }
    // u_(k) = 1 - (1 - u_(k-1)) U^{1/(n-k+1)}: sequential beta sampling of
    // uniform order statistics, smallest first.
    let mut prev = 0.0f64;
    let mut sum = 0.0f64;
    let mut count = 0u64;
    for k in 1..=n {
        let u: f64 = rng.sample(rand::distr::Open01);
        let next = 1.0 - (1.0 - prev) * u.powf(1.0 / (n - k + 1) as f64);
        sum += next;
        if sum > capacity {
            return Ok(count);
        }
        count += 1;
        prev = next;
    }
    Ok(count)
}

/// Smallest-first count when items are the points of a rate-`rate`
/// Poisson process on [0, 1]: the ascending items are themselves the
/// arrivals, so the packing prefix is simulated directly.
pub fn sample_smallest_first_count_poisson<R: Rng + ?Sized>(
    rate: f64,
    capacity: f64,
    rng: &mut R,
) -> Result<u64> {
    if !(capacity > 0.0) || !(rate > 0.0) {
        return Err(Error::Domain("rate and capacity must be > 0".into()));
    }
    let mut pos = 0.0f64;
    let mut sum = 0.0f64;
    let mut count = 0u64;
    loop {
        pos += unit_exponential(rng) / rate;
        if pos > 1.0 {
            return Ok(count);
        }
        sum += pos;
        if sum > capacity {
            return Ok(count);
        }
        count += 1;
    }
}
