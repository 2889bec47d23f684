//! Reports as an ordered header plus records, rendered either as
//! `key=value` lines or as JSON.

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub command: String,
    pub header: Map<String, Value>,
    pub records: Vec<Map<String, Value>>,
}

/// A JSON number, or a string for the non-finite values JSON cannot carry.
pub fn num(x: f64) -> Value {
    if x.is_finite() {
        Value::from(x)
    } else if x.is_nan() {
        Value::from("nan")
    } else if x > 0.0 {
        Value::from("inf")
    } else {
        Value::from("-inf")
    }
}

pub fn opt_num(x: Option<f64>) -> Value {
    x.map(num).unwrap_or(Value::Null)
}

fn render_value(v: &Value) -> String {
    match v {
        Value::String(s) => {
            let plain = !s.is_empty() && !s.chars().any(|c| c.is_whitespace() || c == '"' || c == '=' || c == '#');
            if plain {
                s.clone()
            } else {
                Value::String(s.clone()).to_string()
            }
        }
        other => other.to_string(),
    }
}

fn render_line(fields: &Map<String, Value>) -> String {
    fields
        .iter()
        .map(|(k, v)| format!("{k}={}", render_value(v)))
        .collect::<Vec<_>>()
        .join(" ")
}

impl Report {
    pub fn new(command: &str) -> Self {
        Report {
            command: command.to_string(),
            header: Map::new(),
            records: Vec::new(),
        }
    }

    pub fn set(&mut self, key: &str, value: impl Into<Value>) -> &mut Self {
        self.header.insert(key.to_string(), value.into());
        self
    }

    pub fn push(&mut self, record: Map<String, Value>) {
        self.records.push(record);
    }

    /// Header lines start with `#`, then one record per line.
    pub fn to_table(&self) -> String {
        let mut out = format!("# command={}\n", render_value(&Value::from(self.command.clone())));
        for (k, v) in &self.header {
            out.push_str(&format!("# {k}={}\n", render_value(v)));
        }
        for r in &self.records {
            out.push_str(&render_line(r));
            out.push('\n');
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report values are plain JSON") + "\n"
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })
    }
}

/// Builds a record from `key => value` pairs.
#[macro_export]
macro_rules! record {
    ($($k:expr => $v:expr),* $(,)?) => {{
        let mut m = serde_json::Map::new();
        $( m.insert($k.to_string(), serde_json::Value::from($v)); )*
        m
    }};
}
