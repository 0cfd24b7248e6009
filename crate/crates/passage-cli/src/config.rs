//! Experiment sizing: built-in defaults, optionally overridden by a TOML
//! config file, with command-line flags taking final precedence.

use std::collections::BTreeMap;

use serde::Deserialize;

/// Seed used when `--seed` is absent; embedded in every report.
pub const DEFAULT_SEED: u64 = 271_828;

/// Per-experiment overrides from the config file.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Override {
    pub reps: Option<u64>,
    pub t: Option<f64>,
    pub n: Option<u64>,
    pub capacity: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub experiments: BTreeMap<String, Override>,
}

impl Config {
    pub fn load(path: &std::path::Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
        toml::from_str(&text).map_err(|e| format!("bad config {}: {e}", path.display()))
    }

    pub fn overrides(&self, experiment: &str) -> Override {
        self.experiments.get(experiment).cloned().unwrap_or_default()
    }
}

/// Effective settings for one experiment run after merging flags over the
/// config file over defaults. Fields left `None` fall back to experiment
/// defaults at the point of use.
#[derive(Debug, Clone, Copy)]
pub struct Opts {
    pub seed: u64,
    pub workers: usize,
    pub reps: Option<u64>,
    pub t: Option<f64>,
    pub n: Option<u64>,
    pub capacity: Option<f64>,
}

impl Opts {
    pub fn merged(mut self, file: &Override) -> Self {
        self.reps = self.reps.or(file.reps);
        self.t = self.t.or(file.t);
        self.n = self.n.or(file.n);
        self.capacity = self.capacity.or(file.capacity);
        self
    }
}
