//! Command reports: echoed command, instance digest, named values and checks.

use std::fmt::Write as _;

use serde::Serialize;
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub status: Status,
    pub observed: f64,
    pub tolerance: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl Check {
    /// Passes when `observed <= tolerance`.
    pub fn at_most(name: impl Into<String>, observed: f64, tolerance: f64) -> Self {
        Self::new(name, observed <= tolerance, observed, tolerance)
    }

    /// Passes when `observed >= -tolerance`.
    pub fn at_least_neg(name: impl Into<String>, observed: f64, tolerance: f64) -> Self {
        Self::new(name, observed >= -tolerance, observed, tolerance)
    }

    pub fn new(name: impl Into<String>, pass: bool, observed: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            status: if pass { Status::Pass } else { Status::Fail },
            observed,
            tolerance,
            note: None,
        }
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }

    pub fn passed(&self) -> bool {
        self.status == Status::Pass
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub command: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub instance_digest: Option<String>,
    pub values: Map<String, Value>,
    pub checks: Vec<Check>,
    pub wall_clock_ms: f64,
}

/// Hex SHA-256 of `bytes`.
pub fn digest(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// `v` rounded to 12 significant digits, for display.
pub fn display_number(v: f64) -> String {
    if !v.is_finite() || v == 0.0 {
        return format!("{v}");
    }
    let rounded: f64 = format!("{v:.11e}").parse().unwrap_or(v);
    format!("{rounded}")
}

fn display_value(v: &Value) -> String {
    match v {
        Value::Number(n) => match n.as_f64() {
            Some(f) if !n.is_i64() && !n.is_u64() => display_number(f),
            _ => n.to_string(),
        },
        Value::String(s) => s.clone(),
        Value::Array(items) => {
            let parts: Vec<String> = items.iter().map(display_value).collect();
            format!("({})", parts.join(", "))
        }
        Value::Object(m) => {
            let parts: Vec<String> = m.iter().map(|(k, v)| format!("{k}={}", display_value(v))).collect();
            parts.join(" ")
        }
        other => other.to_string(),
    }
}

impl Report {
    pub fn new(command: impl Into<String>) -> Self {
        Self {
            command: command.into(),
            instance_digest: None,
            values: Map::new(),
            checks: Vec::new(),
            wall_clock_ms: 0.0,
        }
    }

    /// Records a value; non-finite floats are stored as strings.
    pub fn value(&mut self, key: &str, v: impl Into<Value>) {
        self.values.insert(key.to_string(), v.into());
    }

    pub fn number(&mut self, key: &str, v: f64) {
        self.values.insert(key.to_string(), number(v));
    }

    pub fn numbers(&mut self, key: &str, vs: &[f64]) {
        self.values
            .insert(key.to_string(), Value::Array(vs.iter().map(|&v| number(v)).collect()));
    }

    pub fn check(&mut self, c: Check) {
        self.checks.push(c);
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(Check::passed)
    }

    pub fn failures(&self) -> usize {
        self.checks.iter().filter(|c| !c.passed()).count()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize")
    }

    /// JSON without the wall clock, for comparing runs.
    pub fn deterministic_json(&self) -> String {
        let mut r = self.clone();
        r.wall_clock_ms = 0.0;
        r.to_json()
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "command: {}", self.command);
        if let Some(d) = &self.instance_digest {
            let _ = writeln!(out, "instance: sha256:{d}");
        }
        for (k, v) in &self.values {
            let _ = writeln!(out, "{k}: {}", display_value(v));
        }
        for c in &self.checks {
            let tag = if c.passed() { "PASS" } else { "FAIL" };
            let _ = write!(
                out,
                "[{tag}] {}  observed {:.3e}  tolerance {:.1e}",
                c.name, c.observed, c.tolerance
            );
            if let Some(n) = &c.note {
                let _ = write!(out, "  ({n})");
            }
            out.push('\n');
        }
        if !self.checks.is_empty() {
            let _ = writeln!(
                out,
                "{} of {} checks passed",
                self.checks.len() - self.failures(),
                self.checks.len()
            );
        }
        let _ = writeln!(out, "wall clock: {:.1} ms", self.wall_clock_ms);
        out
    }
}

pub fn number(v: f64) -> Value {
    serde_json::Number::from_f64(v)
        .map(Value::Number)
        .unwrap_or_else(|| Value::String(v.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rounding_for_display() {
        assert_eq!(display_number(7.999999999999999), "8");
        assert_eq!(display_number(0.5), "0.5");
        assert_eq!(display_number(4.5000000000000036), "4.5");
        assert_eq!(display_number(-1.0 / 3.0), "-0.333333333333");
    }

    #[test]
    fn text_layout() {
        let mut r = Report::new("jump --m 1,1");
        r.number("jump", 0.5);
        r.value("effective", true);
        r.numbers("mu", &[1.0, 4.0]);
        r.check(Check::at_least_neg("effective", 0.5, 1e-9));
        let t = r.to_text();
        assert!(t.contains("jump: 0.5\n"));
        assert!(t.contains("effective: true\n"));
        assert!(t.contains("mu: (1, 4)\n"));
        assert!(t.contains("[PASS] effective"));
        assert!(r.passed());
    }

    #[test]
    fn non_finite_numbers() {
        assert_eq!(number(f64::INFINITY), Value::String("inf".into()));
        assert_eq!(
            digest(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
