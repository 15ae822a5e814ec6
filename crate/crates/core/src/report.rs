use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;

/// Outcome of one numerical inequality check `lhs (op) rhs`.
///
/// `margin` is signed so that a positive value always means the inequality
/// holds with room to spare; `pass` is `margin >= 0` unless the check was
/// vacuous.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
    pub pass: bool,
    pub params: BTreeMap<String, Value>,
}

impl CheckReport {
    /// Report for `lhs >= rhs`.
    pub fn at_least(name: impl Into<String>, lhs: f64, rhs: f64) -> Self {
        Self::build(name, lhs, rhs, lhs - rhs)
    }

    /// Report for `lhs <= rhs`.
    pub fn at_most(name: impl Into<String>, lhs: f64, rhs: f64) -> Self {
        Self::build(name, lhs, rhs, rhs - lhs)
    }

    /// A check whose hypothesis does not apply; passes trivially.
    pub fn vacuous(name: impl Into<String>, lhs: f64, rhs: f64) -> Self {
        let mut r = Self::build(name, lhs, rhs, 0.0);
        r.pass = true;
        r.params.insert("vacuous".into(), Value::Bool(true));
        r
    }

    fn build(name: impl Into<String>, lhs: f64, rhs: f64, margin: f64) -> Self {
        Self {
            name: name.into(),
            lhs,
            rhs,
            margin,
            pass: margin >= 0.0 && !margin.is_nan(),
            params: BTreeMap::new(),
        }
    }

    pub fn with(mut self, key: &str, value: impl Into<Value>) -> Self {
        self.params.insert(key.to_string(), value.into());
        self
    }

    pub fn is_vacuous(&self) -> bool {
        self.params.get("vacuous") == Some(&Value::Bool(true))
    }

    /// `name,lhs,rhs,margin,pass` row for the summary CSV.
    pub fn csv_row(&self) -> String {
        format!(
            "{},{:e},{:e},{:e},{}",
            self.name, self.lhs, self.rhs, self.margin, self.pass
        )
    }
}
