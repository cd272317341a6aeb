//! Runtime configuration: which backend serves each external.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::ConfigError;
use crate::runtime::value::{Obj, Value};

pub const DEFAULT_MAX_IN_FLIGHT: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case", deny_unknown_fields)]
#[derive(Default)]
pub enum ReplyRule {
    /// Hash of the rendered arguments modulo `mod`, as an int or as `prefix` + digits.
    HashMod {
        #[serde(rename = "mod")]
        modulus: u64,
        #[serde(default)]
        prefix: Option<String>,
    },
    /// The single argument, or a tuple of all of them.
    #[default]
    Echo,
    Constant {
        value: serde_json::Value,
    },
    /// `n` hash-derived items joined by `sep`.
    Expand {
        n: usize,
        #[serde(default = "default_sep")]
        sep: String,
    },
}

fn default_sep() -> String {
    "\n".into()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FileMode {
    Read,
    Write,
    Append,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "backend", rename_all = "snake_case", deny_unknown_fields)]
pub enum BackendSpec {
    /// A builtin data operation, by default the one with the external's own name.
    Builtin {
        #[serde(default)]
        op: Option<String>,
    },
    Mock {
        #[serde(default)]
        latency_ms: f64,
        /// Relative spread of seeded latencies: uniform in `latency * [1 - jitter, 1 + jitter]`.
        #[serde(default = "default_jitter")]
        jitter: f64,
        #[serde(default)]
        reply: ReplyRule,
    },
    Http {
        url: String,
        #[serde(default = "default_method")]
        method: String,
        #[serde(default = "default_timeout")]
        timeout_ms: u64,
    },
    Stdout,
    File {
        mode: FileMode,
        #[serde(default)]
        root: Option<String>,
    },
}

fn default_jitter() -> f64 {
    1.0
}

fn default_method() -> String {
    "POST".into()
}

fn default_timeout() -> u64 {
    30_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RuntimeConfig {
    #[serde(default)]
    pub externals: BTreeMap<String, BackendSpec>,
    #[serde(default = "default_in_flight")]
    pub max_in_flight: usize,
}

fn default_in_flight() -> usize {
    DEFAULT_MAX_IN_FLIGHT
}

impl Default for RuntimeConfig {
    fn default() -> Self {
        RuntimeConfig { externals: BTreeMap::new(), max_in_flight: DEFAULT_MAX_IN_FLIGHT }
    }
}

impl RuntimeConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let c: RuntimeConfig = serde_json::from_str(text).map_err(|e| ConfigError::Json(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.max_in_flight == 0 {
            return Err(ConfigError::Invalid("max_in_flight must be at least 1".into()));
        }
        for (name, spec) in &self.externals {
            match spec {
                BackendSpec::Mock { latency_ms, jitter, reply } => {
                    if !(latency_ms.is_finite() && *latency_ms >= 0.0) {
                        return Err(ConfigError::Invalid(format!("{name}: latency_ms must be a non-negative number")));
                    }
                    if !(0.0..=1.0).contains(jitter) {
                        return Err(ConfigError::Invalid(format!("{name}: jitter must lie in [0, 1]")));
                    }
                    match reply {
                        ReplyRule::HashMod { modulus: 0, .. } => return Err(ConfigError::Invalid(format!("{name}: mod must be positive"))),
                        ReplyRule::Constant { value } => {
                            value_from_json(value, 0).map_err(|e| ConfigError::Invalid(format!("{name}: {e}")))?;
                        }
                        _ => {}
                    }
                }
                BackendSpec::Builtin { op: Some(op) } if !super::is_builtin(op) => {
                    return Err(ConfigError::Invalid(format!("{name}: unknown builtin `{op}`")))
                }
                _ => {}
            }
        }
        Ok(())
    }

    /// The backend serving `name`: configured, else the library default.
    pub fn backend_for(&self, name: &str) -> Option<BackendSpec> {
        if let Some(b) = self.externals.get(name) {
            return Some(b.clone());
        }
        if name == "print" {
            return Some(BackendSpec::Stdout);
        }
        if super::is_builtin(name) {
            return Some(BackendSpec::Builtin { op: None });
        }
        None
    }

    /// Sets every mock latency to `ms`.
    pub fn with_mock_latency(mut self, ms: f64) -> Self {
        for spec in self.externals.values_mut() {
            if let BackendSpec::Mock { latency_ms, .. } = spec {
                *latency_ms = ms;
            }
        }
        self
    }
}

/// Converts a JSON literal: arrays become tuples, `{"list": [...]}` a list.
pub fn value_from_json(j: &serde_json::Value, serial: u64) -> Result<Value, String> {
    use serde_json::Value as J;
    Ok(match j {
        J::Null => Value::None,
        J::Bool(b) => Value::Bool(*b),
        J::Number(n) => match n.as_i64() {
            Some(i) => Value::Int(i),
            None => Value::Float(n.as_f64().ok_or("number out of range")?),
        },
        J::String(s) => Value::text(s.as_str()),
        J::Array(items) => Value::tuple(items.iter().map(|i| value_from_json(i, serial)).collect::<Result<_, _>>()?),
        J::Object(o) if o.len() == 1 && o.contains_key("list") => match &o["list"] {
            J::Array(items) => Value::List(Obj::new(serial, items.iter().map(|i| value_from_json(i, serial)).collect::<Result<_, _>>()?)),
            _ => return Err("`list` must hold an array".into()),
        },
        J::Object(_) => return Err("objects are not supported as values".into()),
    })
}

/// JSON form of a resolved value, for reports.
pub fn value_to_json(v: &Value) -> serde_json::Value {
    use serde_json::Value as J;
    match v {
        Value::Int(i) => J::from(*i),
        Value::Float(f) => serde_json::Number::from_f64(*f).map(J::Number).unwrap_or(J::Null),
        Value::Text(s) => J::String(s.to_string()),
        Value::Bool(b) => J::Bool(*b),
        Value::None => J::Null,
        Value::Tuple(items) | Value::FrozenSet(items) => J::Array(items.iter().map(value_to_json).collect()),
        Value::List(l) => J::Array(l.data.borrow().iter().map(value_to_json).collect()),
        other => J::String(other.py_repr()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_documented_shape() {
        let c = RuntimeConfig::from_json(
            r#"{"externals": {"llm": {"backend":"mock","latency_ms":100,"reply":{"rule":"hash_mod","mod":10}}, "print": {"backend":"stdout"}}, "max_in_flight": 64}"#,
        )
        .unwrap();
        assert_eq!(
            c.externals["llm"],
            BackendSpec::Mock { latency_ms: 100.0, jitter: 1.0, reply: ReplyRule::HashMod { modulus: 10, prefix: None } }
        );
        assert_eq!(c.backend_for("print"), Some(BackendSpec::Stdout));
        assert_eq!(c.backend_for("add"), Some(BackendSpec::Builtin { op: None }));
        assert_eq!(c.backend_for("nobody"), None);
    }

    #[test]
    fn rejects_bad_values() {
        assert!(RuntimeConfig::from_json(r#"{"max_in_flight": 0}"#).is_err());
        assert!(RuntimeConfig::from_json(r#"{"externals":{"x":{"backend":"mock","latency_ms":-1}}}"#).is_err());
        assert!(RuntimeConfig::from_json(r#"{"externals":{"x":{"backend":"carrier_pigeon"}}}"#).is_err());
    }

    #[test]
    fn json_values() {
        let v = value_from_json(&serde_json::json!(["a", 1, 2.5, null, {"list": [true]}]), 3).unwrap();
        assert_eq!(v.py_repr(), "('a', 1, 2.5, None, [True])");
        assert!(v.is_mutable());
    }
}
