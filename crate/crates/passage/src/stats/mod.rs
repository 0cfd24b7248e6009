//! Seeded parallel Monte Carlo: streams, moment accumulation, the
//! replication driver, and the hypothesis tests built on it.

pub mod gof;
pub mod harness;
pub mod moments;
pub mod rng;

pub use gof::{chi_square_gof, chi_square_pvalue, ks_two_sample, tail_bound_check, TailReport};
pub use harness::{mc_collect, mc_estimate};
pub use moments::{RunningMoments, SummaryStats};
pub use rng::RngStream;
