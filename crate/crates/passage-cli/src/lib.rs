//! Library surface of the command-line front-end: report types, config
//! handling, control parsing, and the preregistered experiments. The
//! binary in `main.rs` is a thin dispatcher over these.

pub mod config;
pub mod control;
pub mod experiments;
pub mod report;

pub use config::{Config, Opts, DEFAULT_SEED};
pub use report::{Estimate, ExperimentReport, Target};
