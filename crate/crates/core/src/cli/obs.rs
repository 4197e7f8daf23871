//! Observation logs: one JSON object per line.
//!
//! `{"time": 100, "port": "bus.shed", "value": "abnormal"}` records the first
//! abnormal instant; `{"port": "x.o", "normal_through": 150}` records that
//! the port was still normal up to 150.

use serde::Deserialize;
use serde_json::Value;
use thiserror::Error;

use crate::explain::Observation;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("observations line {line}: {message}")]
pub struct ObsError {
    pub line: usize,
    pub message: String,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Record {
    port: String,
    #[serde(default)]
    time: Option<Value>,
    #[serde(default)]
    value: Option<String>,
    #[serde(default)]
    normal_through: Option<Value>,
}

fn tick(v: &Value) -> Option<i64> {
    v.as_i64()
}

pub fn parse_observations(text: &str) -> Result<Vec<Observation>, ObsError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let raw = raw.trim();
        if raw.is_empty() {
            continue;
        }
        let err = |message: String| ObsError { line, message };
        let r: Record = serde_json::from_str(raw).map_err(|e| err(e.to_string()))?;
        let obs = match (&r.time, r.value.as_deref(), &r.normal_through) {
            (Some(t), Some("abnormal") | None, None) => {
                Observation::abnormal(r.port, tick(t).ok_or_else(|| err("`time` must be an integer tick".into()))?)
            }
            (Some(t), Some("normal"), None) | (None, None | Some("normal"), Some(t)) => {
                Observation::normal_through(r.port, tick(t).ok_or_else(|| err("time must be an integer tick".into()))?)
            }
            (_, Some(v), _) if v != "abnormal" && v != "normal" => return Err(err(format!("unknown value `{v}`"))),
            _ => return Err(err("expected either `time` (with value abnormal) or `normal_through`".into())),
        };
        out.push(obs);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn both_record_shapes() {
        let text = "{\"time\": 100, \"port\": \"bus.shed\", \"value\": \"abnormal\"}\n\n{\"port\": \"x.o\", \"normal_through\": 150}\n";
        let obs = parse_observations(text).unwrap();
        assert_eq!(obs, [Observation::abnormal("bus.shed", 100), Observation::normal_through("x.o", 150)]);
        let e = parse_observations("{\"port\": \"x.o\"}\n{\"time\": 1.5, \"port\": \"a.b\"}").unwrap_err();
        assert_eq!(e.line, 1);
        assert!(parse_observations("{\"time\": 1.5, \"port\": \"a.b\"}").is_err());
        assert!(parse_observations("{\"time\": 1, \"port\": \"a.b\", \"value\": \"odd\"}").is_err());
    }
}
