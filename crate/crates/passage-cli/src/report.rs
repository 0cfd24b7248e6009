//! Experiment report structure. Field order is the serialization order,
//! so JSON output is byte-stable for identical runs.

use std::collections::BTreeMap;

use passage::stats::SummaryStats;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Estimate {
    Exact { label: String, value: f64 },
    Mc { label: String, stats: SummaryStats },
}

/// One acceptance target with its verdict. `check` names the comparison
/// applied; `tolerance` is meaningful only for the absolute-difference
/// form.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Target {
    pub label: String,
    pub observed: f64,
    pub expected: f64,
    pub tolerance: f64,
    pub check: String,
    pub pass: bool,
}

impl Target {
    pub fn within(label: &str, observed: f64, expected: f64, tolerance: f64) -> Self {
        Self {
            label: label.to_string(),
            observed,
            expected,
            tolerance,
            check: "abs_diff_le_tolerance".to_string(),
            pass: (observed - expected).abs() <= tolerance,
        }
    }

    pub fn greater_than(label: &str, observed: f64, threshold: f64) -> Self {
        Self {
            label: label.to_string(),
            observed,
            expected: threshold,
            tolerance: 0.0,
            check: "observed_gt_expected".to_string(),
            pass: observed > threshold,
        }
    }

    pub fn at_least(label: &str, observed: f64, threshold: f64) -> Self {
        Self {
            label: label.to_string(),
            observed,
            expected: threshold,
            tolerance: 0.0,
            check: "observed_ge_expected".to_string(),
            pass: observed >= threshold,
        }
    }

    pub fn at_most(label: &str, observed: f64, threshold: f64) -> Self {
        Self {
            label: label.to_string(),
            observed,
            expected: threshold,
            tolerance: 0.0,
            check: "observed_le_expected".to_string(),
            pass: observed <= threshold,
        }
    }

    pub fn equals_count(label: &str, observed: u64, expected: u64) -> Self {
        Self {
            label: label.to_string(),
            observed: observed as f64,
            expected: expected as f64,
            tolerance: 0.0,
            check: "exact_count".to_string(),
            pass: observed == expected,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub name: String,
    pub seed: u64,
    pub parameters: BTreeMap<String, String>,
    pub estimates: Vec<Estimate>,
    pub targets: Vec<Target>,
    pub pass: bool,
}

impl ExperimentReport {
    pub fn new(name: &str, seed: u64) -> Self {
        Self {
            name: name.to_string(),
            seed,
            parameters: BTreeMap::new(),
            estimates: Vec::new(),
            targets: Vec::new(),
            pass: true,
        }
    }

    pub fn param(&mut self, key: &str, value: impl ToString) {
        self.parameters.insert(key.to_string(), value.to_string());
    }

    pub fn exact(&mut self, label: &str, value: f64) {
        self.estimates.push(Estimate::Exact {
            label: label.to_string(),
            value,
        });
    }

    pub fn mc(&mut self, label: &str, stats: SummaryStats) {
        self.estimates.push(Estimate::Mc {
            label: label.to_string(),
            stats,
        });
    }

    pub fn target(&mut self, t: Target) {
        self.pass &= t.pass;
        self.targets.push(t);
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}
