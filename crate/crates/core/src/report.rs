//! Pass/fail reports with a versioned JSON layout.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub const SCHEMA_VERSION: u32 = 1;

/// How a measured value is compared with its threshold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Comparison {
    Lt,
    Le,
    Gt,
    Ge,
}

impl Comparison {
    pub fn holds(self, value: f64, threshold: f64) -> bool {
        match self {
            Self::Lt => value < threshold,
            Self::Le => value <= threshold,
            Self::Gt => value > threshold,
            Self::Ge => value >= threshold,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportEntry {
    pub claim: String,
    /// Short description of the statement being checked.
    pub anchor: String,
    #[serde(with = "lossless_f64")]
    pub value: f64,
    pub comparison: Comparison,
    #[serde(with = "lossless_f64")]
    pub threshold: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvariantReport {
    pub schema: u32,
    pub experiment: String,
    pub seed: u64,
    pub config: serde_json::Value,
    pub entries: Vec<ReportEntry>,
    /// Supporting numbers, keyed by name.
    pub tables: BTreeMap<String, serde_json::Value>,
    pub error: Option<String>,
    pub pass: bool,
}

impl InvariantReport {
    pub fn new(experiment: &str, seed: u64, config: serde_json::Value) -> Self {
        Self {
            schema: SCHEMA_VERSION,
            experiment: experiment.to_string(),
            seed,
            config,
            entries: Vec::new(),
            tables: BTreeMap::new(),
            error: None,
            pass: true,
        }
    }

    /// Records `value <cmp> threshold`. NaN never passes.
    pub fn check(&mut self, claim: &str, anchor: &str, value: f64, comparison: Comparison, threshold: f64) -> bool {
        let pass = comparison.holds(value, threshold);
        self.pass &= pass;
        self.entries.push(ReportEntry {
            claim: claim.to_string(),
            anchor: anchor.to_string(),
            value,
            comparison,
            threshold,
            pass,
        });
        pass
    }

    /// A boolean outcome, stored as `1 ≥ 1` or `0 ≥ 1`.
    pub fn flag(&mut self, claim: &str, anchor: &str, ok: bool) -> bool {
        self.check(claim, anchor, if ok { 1.0 } else { 0.0 }, Comparison::Ge, 1.0)
    }

    pub fn table(&mut self, name: &str, value: impl Serialize) {
        let v = serde_json::to_value(value).unwrap_or(serde_json::Value::Null);
        self.tables.insert(name.to_string(), v);
    }

    pub fn fail_with(&mut self, error: String) {
        self.error = Some(error);
        self.pass = false;
    }

    pub fn entry(&self, claim: &str) -> Option<&ReportEntry> {
        self.entries.iter().find(|e| e.claim == claim)
    }

    /// Recomputes the overall flag from the entries.
    pub fn consistent(&self) -> bool {
        self.pass == (self.error.is_none() && self.entries.iter().all(|e| e.pass))
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("reports serialize");
        s.push('\n');
        s
    }
}

/// JSON has no NaN or infinities; those are written as strings.
mod lossless_f64 {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_str(&v.to_string())
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Text(t) => t.parse().map_err(serde::de::Error::custom),
        }
    }
}
