//! Streaming moment accumulation through fourth order.
//!
//! One-pass update and pairwise merge formulas (Chan/Pebay); the merge is
//! exact in the same sense as the update, so partial accumulators from a
//! fixed partition combine deterministically.

use serde::{Deserialize, Serialize};

/// Monte Carlo estimate record.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SummaryStats {
    pub n: u64,
    pub mean: f64,
    /// Unbiased (n-1) sample variance.
    pub variance: f64,
    /// Standard error of the mean, sqrt(variance / n).
    pub se: f64,
    pub skewness: f64,
    pub excess_kurtosis: f64,
}

/// Accumulator of central moments up to order four.
#[derive(Debug, Clone, Copy, Default)]
pub struct RunningMoments {
    n: u64,
    mean: f64,
    m2: f64,
    m3: f64,
    m4: f64,
}

impl RunningMoments {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, x: f64) {
        let n0 = self.n as f64;
        self.n += 1;
        let n = self.n as f64;
        let delta = x - self.mean;
        let delta_n = delta / n;
        let delta_n2 = delta_n * delta_n;
        let term1 = delta * delta_n * n0;
        self.m4 += term1 * delta_n2 * (n * n - 3.0 * n + 3.0)
            + 6.0 * delta_n2 * self.m2
            - 4.0 * delta_n * self.m3;
        self.m3 += term1 * delta_n * (n - 2.0) - 3.0 * delta_n * self.m2;
        self.m2 += term1;
        self.mean += delta_n;
    }

    /// Combine two partial accumulators; associative up to rounding and
    /// deterministic for a fixed merge order.
    pub fn merge(&self, other: &Self) -> Self {
        if other.n == 0 {
            return *self;
        }
        if self.n == 0 {
            return *other;
        }
        let na = self.n as f64;
        let nb = other.n as f64;
        let n = na + nb;
        let delta = other.mean - self.mean;
        let d2 = delta * delta;
        let mean = self.mean + delta * nb / n;
        let m2 = self.m2 + other.m2 + d2 * na * nb / n;
        let m3 = self.m3
            + other.m3
            + d2 * delta * na * nb * (na - nb) / (n * n)
            + 3.0 * delta * (na * other.m2 - nb * self.m2) / n;
        let m4 = self.m4
            + other.m4
            + d2 * d2 * na * nb * (na * na - na * nb + nb * nb) / (n * n * n)
            + 6.0 * d2 * (na * na * other.m2 + nb * nb * self.m2) / (n * n)
            + 4.0 * delta * (na * other.m3 - nb * self.m3) / n;
        Self {
            n: self.n + other.n,
            mean,
            m2,
            m3,
            m4,
        }
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn summary(&self) -> SummaryStats {
        let n = self.n as f64;
        let variance = if self.n > 1 { self.m2 / (n - 1.0) } else { 0.0 };
        let pop_var = if self.n > 0 { self.m2 / n } else { 0.0 };
        let (skewness, excess_kurtosis) = if pop_var > 0.0 {
            (
                self.m3 / n / pop_var.powf(1.5),
                self.m4 / n / (pop_var * pop_var) - 3.0,
            )
        } else {
            (0.0, 0.0)
        };
        SummaryStats {
            n: self.n,
            mean: self.mean,
            variance,
            se: if self.n > 0 { (variance / n).sqrt() } else { 0.0 },
            skewness,
            excess_kurtosis,
        }
    }
}
