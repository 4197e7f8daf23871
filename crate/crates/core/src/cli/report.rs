//! Machine-readable reports. Objects are built as `serde_json::Value`, whose
//! maps keep keys sorted, so equal inputs give byte-identical output.

use serde_json::{json, Value};

use crate::explain::Explanation;
use crate::model::{Issue, Severity, ValidationReport};
use crate::theory::CausalTheory;

fn interval(i: &crate::temporal::Interval) -> Value {
    serde_json::to_value(i).expect("interval")
}

pub fn explanation(theory: &CausalTheory, rank: usize, e: &Explanation) -> Value {
    json!({
        "rank": rank,
        "causes": e.causes.iter().map(|c| json!({"var": c.var, "mode": c.mode, "interval": interval(&c.interval)})).collect::<Vec<_>>(),
        "normals": e.normals.iter().map(|n| json!({"var": n.var, "interval": interval(&n.interval)})).collect::<Vec<_>>(),
        "events": e.events.iter().map(|a| theory.name_of(*a)).collect::<Vec<_>>(),
        "belief": e.belief,
        "cost": e.cost.0,
        "paths": e.paths.iter().map(|p| theory.path(*p).label.clone()).collect::<Vec<_>>(),
        "substituted": e.substituted.iter().map(|c| theory.model.cause(*c).label.clone()).collect::<Vec<_>>(),
    })
}

pub fn explanations(theory: &CausalTheory, list: &[Explanation]) -> Value {
    Value::Array(list.iter().enumerate().map(|(i, e)| explanation(theory, i + 1, e)).collect())
}

/// One line per explanation.
pub fn table(theory: &CausalTheory, list: &[Explanation]) -> String {
    let mut out = String::from("rank  cost      belief    causes / events\n");
    for (i, e) in list.iter().enumerate() {
        let causes: Vec<String> = e.causes.iter().map(|c| format!("{}={} in {}", c.var, c.mode, c.interval)).collect();
        let events: Vec<String> = e.events.iter().map(|a| theory.name_of(*a)).collect();
        let belief = e.belief.map_or("-".to_string(), |b| format!("{b:.6}"));
        let causes = if causes.is_empty() { "(all normal)".to_string() } else { causes.join(", ") };
        out.push_str(&format!("{:<5} {:<9.6} {:<9} {} | {}\n", i + 1, e.cost.0, belief, causes, events.join(", ")));
    }
    out
}

fn issue(i: &Issue) -> Value {
    json!({
        "severity": match i.severity { Severity::Error => "error", Severity::Warning => "warning" },
        "line": i.line,
        "location": i.location,
        "message": i.message,
    })
}

pub fn validation(report: &ValidationReport) -> Value {
    json!({
        "errors": report.errors().map(issue).collect::<Vec<_>>(),
        "warnings": report.warnings().map(issue).collect::<Vec<_>>(),
    })
}

pub fn parse_error(line: usize, message: &str) -> Value {
    json!({
        "errors": [{"severity": "error", "line": line, "location": "syntax", "message": message}],
        "warnings": [],
    })
}

pub fn to_string(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("json");
    s.push('\n');
    s
}
