//! Machine-readable reports.
//!
//! Keys are emitted in sorted order and nothing time- or host-dependent is
//! recorded, so identical inputs give byte-identical output.

use serde_json::{json, Map, Value};

use crate::number::{ExtendedValue, Number, Scalar};

/// Where a number came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Provenance {
    Analytic,
    Oracle,
    MonteCarlo,
}

impl Provenance {
    pub fn as_str(&self) -> &'static str {
        match self {
            Provenance::Analytic => "analytic",
            Provenance::Oracle => "oracle",
            Provenance::MonteCarlo => "monte-carlo",
        }
    }
}

/// How a command finished; maps onto the process exit code.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Ok,
    VerificationFailed,
    Inconclusive,
}

impl Status {
    pub fn exit_code(&self) -> i32 {
        match self {
            Status::Ok => 0,
            Status::VerificationFailed => 2,
            Status::Inconclusive => 3,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Status::Ok => "ok",
            Status::VerificationFailed => "verification-failed",
            Status::Inconclusive => "inconclusive",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Report {
    pub command: String,
    pub config: Value,
    pub chain: Value,
    pub results: Map<String, Value>,
    pub warnings: Vec<String>,
    pub status: Status,
    /// Flat rows for CSV output; `None` falls back to flattened results.
    pub rows: Option<(Vec<String>, Vec<Vec<String>>)>,
}

impl Report {
    pub fn new(command: &str, config: Value, chain: Value) -> Self {
        Self {
            command: command.to_string(),
            config,
            chain,
            results: Map::new(),
            warnings: Vec::new(),
            status: Status::Ok,
            rows: None,
        }
    }

    pub fn insert(&mut self, key: &str, block: Value) {
        self.results.insert(key.to_string(), block);
    }

    pub fn warn(&mut self, message: impl Into<String>) {
        self.warnings.push(message.into());
    }

    pub fn to_value(&self) -> Value {
        json!({
            "command": self.command,
            "config": self.config,
            "chain": self.chain,
            "results": Value::Object(self.results.clone()),
            "warnings": self.warnings,
            "status": self.status.as_str(),
        })
    }

    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(&self.to_value()).expect("report serializes");
        text.push('\n');
        text
    }

    pub fn to_csv(&self) -> String {
        let (header, rows) = match &self.rows {
            Some((h, r)) => (h.clone(), r.clone()),
            None => {
                let mut rows = Vec::new();
                flatten("", &Value::Object(self.results.clone()), &mut rows);
                for w in &self.warnings {
                    rows.push(vec!["warning".to_string(), w.clone()]);
                }
                (vec!["key".to_string(), "value".to_string()], rows)
            }
        };
        let mut out = String::new();
        out.push_str(&header.iter().map(|h| csv_field(h)).collect::<Vec<_>>().join(","));
        out.push('\n');
        for row in rows {
            out.push_str(&row.iter().map(|f| csv_field(f)).collect::<Vec<_>>().join(","));
            out.push('\n');
        }
        out
    }
}

fn csv_field(field: &str) -> String {
    if field.contains([',', '"', '\n']) {
        format!("\"{}\"", field.replace('"', "\"\""))
    } else {
        field.to_string()
    }
}

fn flatten(prefix: &str, value: &Value, rows: &mut Vec<Vec<String>>) {
    let join = |key: &str| if prefix.is_empty() { key.to_string() } else { format!("{prefix}.{key}") };
    match value {
        Value::Object(map) => {
            for (k, v) in map {
                flatten(&join(k), v, rows);
            }
        }
        Value::Array(items) => {
            for (i, v) in items.iter().enumerate() {
                flatten(&join(&i.to_string()), v, rows);
            }
        }
        Value::String(s) => rows.push(vec![prefix.to_string(), s.clone()]),
        other => rows.push(vec![prefix.to_string(), other.to_string()]),
    }
}

/// A number as JSON: exact values as `"a/b"` strings with a float approximation.
pub fn number_json(value: &Number) -> Value {
    match value {
        Number::Exact(_) => json!({"exact": value.to_string(), "approx": finite_json(value.to_f64())}),
        Number::Float(x) => json!({"approx": finite_json(*x)}),
    }
}

pub fn scalar_json<S: Scalar>(value: &S) -> Value {
    number_json(&value.to_number())
}

pub fn extended_json<S: Scalar>(value: &ExtendedValue<S>) -> Value {
    match value {
        ExtendedValue::Finite(v) => scalar_json(v),
        ExtendedValue::PosInfinity => json!({"exact": "+inf", "approx": "+inf"}),
    }
}

/// JSON cannot carry NaN or infinities; those become strings.
pub fn finite_json(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else if x.is_nan() {
        json!("nan")
    } else if x > 0.0 {
        json!("+inf")
    } else {
        json!("-inf")
    }
}

/// Numeric block with provenance and error bound.
pub fn block(provenance: Provenance, value: Value, error_bound: Value) -> Value {
    json!({"provenance": provenance.as_str(), "value": value, "error_bound": error_bound})
}

pub fn exact_bound<S: Scalar>() -> Value {
    if S::EXACT {
        json!("exact")
    } else {
        json!("double precision")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_flattening_and_quoting() {
        let mut report = Report::new("x", json!({}), json!({}));
        report.insert("b", json!({"inner": [1, "a,b"]}));
        report.insert("a", json!(true));
        report.warn("careful");
        assert_eq!(report.to_csv(), "key,value\na,true\nb.inner.0,1\nb.inner.1,\"a,b\"\nwarning,careful\n");
    }

    #[test]
    fn exact_numbers_carry_strings() {
        assert_eq!(number_json(&Number::ratio(3, 2)), json!({"exact": "3/2", "approx": 1.5}));
        assert_eq!(extended_json::<f64>(&ExtendedValue::PosInfinity)["exact"], json!("+inf"));
        assert_eq!(finite_json(f64::NAN), json!("nan"));
    }

    #[test]
    fn exit_codes() {
        assert_eq!(Status::Ok.exit_code(), 0);
        assert_eq!(Status::VerificationFailed.exit_code(), 2);
        assert_eq!(Status::Inconclusive.exit_code(), 3);
    }
}
