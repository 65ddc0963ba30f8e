//! JSON chain-spec documents.
//!
//! ```json
//! {"family": "eventually-constant", "k": 2, "M": 1, "prefix": [["2/3", "1/3"]]}
//! ```
//!
//! Probabilities given as JSON numbers are doubles; strings `"a/b"` are exact.

use serde_json::{json, Map, Value};

use crate::chain::{ChainSpec, Family, ProbPair, RationalFormula, TailRule};
use crate::error::SpecError;
use crate::number::Number;

const COMMON_FIELDS: &[&str] = &["family", "k", "name"];

fn family_fields(tag: &str) -> Option<&'static [&'static str]> {
    Some(match tag {
        "simple-symmetric" | "example1" | "example1-mirrored" => &[],
        "constant" => &["p"],
        "eventually-constant" => &["M", "prefix"],
        "table" => &["table", "tail"],
        "rational" => &["numerator", "denominator"],
        _ => return None,
    })
}

pub fn parse_spec(document: &str) -> Result<ChainSpec, SpecError> {
    let value: Value = serde_json::from_str(document).map_err(|e| SpecError::Malformed(e.to_string()))?;
    spec_from_value(&value)
}

pub fn spec_from_value(value: &Value) -> Result<ChainSpec, SpecError> {
    let obj = value.as_object().ok_or_else(|| SpecError::Malformed("document must be a JSON object".into()))?;
    let tag = match obj.get("family") {
        Some(Value::String(s)) => s.as_str(),
        Some(_) => return Err(SpecError::Malformed("family must be a string".into())),
        None => return Err(SpecError::MissingParameter { family: String::new(), field: "family".into() }),
    };
    let allowed = family_fields(tag).ok_or_else(|| SpecError::UnknownFamily(tag.to_string()))?;
    if let Some(field) =
        obj.keys().find(|key| !COMMON_FIELDS.contains(&key.as_str()) && !allowed.contains(&key.as_str()))
    {
        return Err(SpecError::UnknownField { family: tag.into(), field: field.clone() });
    }
    let require = |field: &str| {
        obj.get(field).ok_or_else(|| SpecError::MissingParameter { family: tag.into(), field: field.into() })
    };

    let k = match require("k")? {
        Value::Number(n) => match n.as_u64() {
            Some(0) | None => {
                return Err(SpecError::OutOfRange {
                    field: "k".into(),
                    reason: format!("start state must be an integer >= 1, got {n}"),
                })
            }
            Some(k) => k,
        },
        _ => return Err(SpecError::Malformed("k must be an integer".into())),
    };

    let family = match tag {
        "simple-symmetric" => Family::SimpleSymmetric,
        "example1" => Family::Example1,
        "example1-mirrored" => Family::Example1Mirrored,
        "constant" => Family::ConstantDrift(probability(require("p")?, "p")?),
        "eventually-constant" => {
            let prefix = pairs(require("prefix")?, "prefix")?;
            let m = require("M")?.as_u64().ok_or_else(|| SpecError::Malformed("M must be an integer".into()))?;
            if m == 0 || m as usize != prefix.len() {
                return Err(SpecError::OutOfRange {
                    field: "M".into(),
                    reason: format!("M={m} must be >= 1 and equal the prefix length {}", prefix.len()),
                });
            }
            Family::EventuallyConstant(prefix)
        }
        "table" => {
            let table = pairs(require("table")?, "table")?;
            if table.is_empty() {
                return Err(SpecError::OutOfRange { field: "table".into(), reason: "must be non-empty".into() });
            }
            Family::Table { table, tail: tail_rule(require("tail")?)? }
        }
        "rational" => Family::RationalExpression(RationalFormula {
            numerator: coefficients(require("numerator")?, "numerator")?,
            denominator: coefficients(require("denominator")?, "denominator")?,
        }),
        _ => unreachable!("family tag checked above"),
    };

    let name = match obj.get("name") {
        None => String::new(),
        Some(Value::String(s)) => s.clone(),
        Some(_) => return Err(SpecError::Malformed("name must be a string".into())),
    };
    Ok(ChainSpec::new(family, k)?.with_name(name))
}

fn number(value: &Value, field: &str) -> Result<Number, SpecError> {
    match value {
        Value::Number(n) => {
            n.as_f64().map(Number::Float).ok_or_else(|| SpecError::Malformed(format!("{field}: not a finite number")))
        }
        Value::String(s) => Ok(s.parse()?),
        _ => Err(SpecError::Malformed(format!("{field}: expected a number or \"a/b\" string"))),
    }
}

fn probability(value: &Value, field: &str) -> Result<Number, SpecError> {
    let p = number(value, field)?;
    if !(p.is_positive() && p < Number::one()) {
        return Err(SpecError::OutOfRange {
            field: field.into(),
            reason: format!("{p} is not strictly between 0 and 1"),
        });
    }
    Ok(p)
}

fn pairs(value: &Value, field: &str) -> Result<Vec<ProbPair>, SpecError> {
    let items =
        value.as_array().ok_or_else(|| SpecError::Malformed(format!("{field} must be an array of [l, r] pairs")))?;
    items
        .iter()
        .map(|item| match item.as_array().map(Vec::as_slice) {
            Some([l, r]) => Ok(ProbPair::new(number(l, field)?, number(r, field)?)),
            _ => Err(SpecError::Malformed(format!("{field}: each entry must be a [l, r] pair"))),
        })
        .collect()
}

fn tail_rule(value: &Value) -> Result<TailRule, SpecError> {
    let obj = value.as_object().ok_or_else(|| SpecError::Malformed("tail must be an object".into()))?;
    let rule = obj
        .get("rule")
        .and_then(Value::as_str)
        .ok_or_else(|| SpecError::MissingParameter { family: "table".into(), field: "tail.rule".into() })?;
    let allowed: &[&str] = if rule == "constant" { &["rule", "p"] } else { &["rule"] };
    if let Some(field) = obj.keys().find(|k| !allowed.contains(&k.as_str())) {
        return Err(SpecError::UnknownField { family: "table".into(), field: format!("tail.{field}") });
    }
    match rule {
        "half" => Ok(TailRule::Half),
        "repeat-last" => Ok(TailRule::RepeatLast),
        "constant" => {
            let p = obj
                .get("p")
                .ok_or_else(|| SpecError::MissingParameter { family: "table".into(), field: "tail.p".into() })?;
            Ok(TailRule::Constant(probability(p, "tail.p")?))
        }
        other => {
            Err(SpecError::Malformed(format!("unknown tail rule {other:?}; expected half, constant or repeat-last")))
        }
    }
}

fn coefficients(value: &Value, field: &str) -> Result<Vec<i64>, SpecError> {
    let items = value.as_array().ok_or_else(|| SpecError::Malformed(format!("{field} must be an integer array")))?;
    let coeffs = items
        .iter()
        .map(|v| v.as_i64().ok_or_else(|| SpecError::Malformed(format!("{field}: coefficients must be integers"))))
        .collect::<Result<Vec<_>, _>>()?;
    if coeffs.is_empty() {
        return Err(SpecError::OutOfRange { field: field.into(), reason: "must be non-empty".into() });
    }
    Ok(coeffs)
}

fn number_value(n: &Number) -> Value {
    match n {
        Number::Exact(_) => Value::String(n.to_string()),
        Number::Float(x) => json!(x),
    }
}

fn pairs_value(pairs: &[ProbPair]) -> Value {
    Value::Array(pairs.iter().map(|p| Value::Array(vec![number_value(&p.left), number_value(&p.right)])).collect())
}

pub fn spec_to_value(spec: &ChainSpec) -> Value {
    let mut obj = Map::new();
    obj.insert("family".into(), json!(spec.family().tag()));
    obj.insert("k".into(), json!(spec.start_state()));
    if !spec.name().is_empty() {
        obj.insert("name".into(), json!(spec.name()));
    }
    match spec.family() {
        Family::SimpleSymmetric | Family::Example1 | Family::Example1Mirrored => {}
        Family::ConstantDrift(p) => {
            obj.insert("p".into(), number_value(p));
        }
        Family::EventuallyConstant(prefix) => {
            obj.insert("M".into(), json!(prefix.len()));
            obj.insert("prefix".into(), pairs_value(prefix));
        }
        Family::Table { table, tail } => {
            obj.insert("table".into(), pairs_value(table));
            let tail = match tail {
                TailRule::Half => json!({"rule": "half"}),
                TailRule::RepeatLast => json!({"rule": "repeat-last"}),
                TailRule::Constant(p) => json!({"rule": "constant", "p": number_value(p)}),
            };
            obj.insert("tail".into(), tail);
        }
        Family::RationalExpression(f) => {
            obj.insert("numerator".into(), json!(f.numerator));
            obj.insert("denominator".into(), json!(f.denominator));
        }
    }
    Value::Object(obj)
}

pub fn spec_to_json(spec: &ChainSpec) -> String {
    spec_to_value(spec).to_string()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_documented_examples() {
        let spec = parse_spec(r#"{"family":"example1","k":1}"#).unwrap();
        assert_eq!(spec, ChainSpec::example1(1).unwrap());

        let spec = parse_spec(r#"{"family":"constant","p":0.6666666666666666,"k":1}"#).unwrap();
        assert_eq!(spec.family(), &Family::ConstantDrift(Number::Float(0.6666666666666666)));

        let spec = parse_spec(r#"{"family":"constant","p":"2/3","k":1}"#).unwrap();
        assert_eq!(spec.family(), &Family::ConstantDrift(Number::ratio(2, 3)));
        assert!(spec.is_exact());
    }

    #[test]
    fn rejects_out_of_range_p() {
        let err = parse_spec(r#"{"family":"constant","p":1.2,"k":1}"#).unwrap_err();
        assert!(matches!(&err, SpecError::OutOfRange { field, .. } if field == "p"));
        assert!(err.to_string().contains("p out of range"));
    }

    #[test]
    fn distinct_diagnostics() {
        assert!(matches!(parse_spec("{not json"), Err(SpecError::Malformed(_))));
        assert!(matches!(
            parse_spec(r#"{"family":"banana","k":1}"#),
            Err(SpecError::UnknownFamily(tag)) if tag == "banana"
        ));
        assert!(matches!(
            parse_spec(r#"{"family":"constant","k":1}"#),
            Err(SpecError::MissingParameter { field, .. }) if field == "p"
        ));
        assert!(matches!(
            parse_spec(r#"{"family":"example1","k":1,"p":0.5}"#),
            Err(SpecError::UnknownField { field, .. }) if field == "p"
        ));
        assert!(matches!(
            parse_spec(r#"{"family":"example1","k":0}"#),
            Err(SpecError::OutOfRange { field, .. }) if field == "k"
        ));
        assert!(matches!(
            parse_spec(r#"{"family":"eventually-constant","k":1,"M":2,"prefix":[["2/3","1/3"]]}"#),
            Err(SpecError::OutOfRange { field, .. }) if field == "M"
        ));
        assert!(matches!(
            parse_spec(r#"{"family":"table","k":1,"table":[[0.5,0.5]],"tail":{"rule":"sideways"}}"#),
            Err(SpecError::Malformed(_))
        ));
    }

    #[test]
    fn table_and_tail_round_trip() {
        let doc = r#"{"family":"table","k":2,"name":"t","table":[["1/3","2/3"],[0.25,0.75]],
                      "tail":{"rule":"constant","p":"3/5"}}"#;
        let spec = parse_spec(doc).unwrap();
        assert_eq!(parse_spec(&spec_to_json(&spec)).unwrap(), spec);
        assert!(!spec.is_exact());
    }
}
