use serde::{Deserialize, Serialize};

/// One violated rule. `indices` are 1-based, matching the JSON interface.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub rule: String,
    pub indices: Vec<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub deviation: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub valid: bool,
    pub violations: Vec<Violation>,
    /// Largest numeric deviation observed, for checks that measure one.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_deviation: Option<f64>,
}

impl ValidationReport {
    pub fn from_violations(violations: Vec<Violation>) -> Self {
        ValidationReport {
            valid: violations.is_empty(),
            violations,
            max_deviation: None,
        }
    }

    pub fn with_max_deviation(mut self, dev: f64) -> Self {
        self.max_deviation = Some(dev);
        self
    }

    pub fn has_rule(&self, rule: &str) -> bool {
        self.violations.iter().any(|v| v.rule == rule)
    }
}

impl Violation {
    pub fn new(rule: &str, indices: Vec<usize>) -> Self {
        Violation {
            rule: rule.to_string(),
            indices,
            deviation: None,
        }
    }

    pub fn with_deviation(mut self, d: f64) -> Self {
        self.deviation = Some(d);
        self
    }
}
