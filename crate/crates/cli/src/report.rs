//! Verification reports: schema-versioned JSON with deterministic output.
//!
//! Maps are serialized with sorted keys (serde_json's default object is a
//! BTreeMap) and every float is printed with 12 significant digits, so the
//! same scene and options produce byte-identical reports. `Infinity` has no
//! JSON representation and is emitted as the string `"inf"`.

use std::io::Write;

use serde_json::{json, Map, Value};

/// One verified property: a named residual against its tolerance.
#[derive(Debug, Clone)]
pub struct Check {
    pub name: String,
    pub residual: f64,
    pub tol: f64,
    pub pass: bool,
}

impl Check {
    pub fn new(name: impl Into<String>, residual: f64, tol: f64) -> Check {
        Check {
            name: name.into(),
            residual,
            tol,
            pass: residual <= tol,
        }
    }

    /// A boolean check without a numeric residual.
    pub fn flag(name: impl Into<String>, pass: bool) -> Check {
        Check {
            name: name.into(),
            residual: if pass { 0.0 } else { 1.0 },
            tol: 0.0,
            pass,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Report {
    pub command: String,
    pub tol_scale: f64,
    pub stable: bool,
    pub checks: Vec<Check>,
    pub result: Value,
    pub error: Option<Value>,
    pub wall_time_ms: f64,
}

impl Report {
    pub fn new(command: &str, tol_scale: f64, stable: bool) -> Report {
        Report {
            command: command.to_string(),
            tol_scale,
            stable,
            checks: Vec::new(),
            result: Value::Object(Map::new()),
            error: None,
            wall_time_ms: 0.0,
        }
    }

    pub fn push(&mut self, check: Check) {
        self.checks.push(check);
    }

    pub fn pass(&self) -> bool {
        self.error.is_none() && self.checks.iter().all(|c| c.pass)
    }

    pub fn exit_code(&self) -> i32 {
        if self.pass() {
            0
        } else {
            1
        }
    }

    pub fn to_value(&self) -> Value {
        let checks: Vec<Value> = self
            .checks
            .iter()
            .map(|c| {
                json!({
                    "name": c.name,
                    "residual": finite(c.residual),
                    "tol": finite(c.tol),
                    "pass": c.pass,
                })
            })
            .collect();
        let mut obj = Map::new();
        obj.insert("schema".into(), json!(1));
        obj.insert("command".into(), json!(self.command));
        obj.insert(
            "options".into(),
            json!({"tol": self.tol_scale, "stable": self.stable}),
        );
        obj.insert("pass".into(), json!(self.pass()));
        obj.insert("checks".into(), Value::Array(checks));
        obj.insert("result".into(), self.result.clone());
        if let Some(err) = &self.error {
            obj.insert("error".into(), err.clone());
        }
        if !self.stable {
            obj.insert("wall_time_ms".into(), json!(self.wall_time_ms));
        }
        Value::Object(obj)
    }

    pub fn render(&self) -> String {
        render_value(&self.to_value())
    }
}

/// Non-finite floats become schema-stable strings.
pub fn finite(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else if x.is_nan() {
        json!("nan")
    } else if x > 0.0 {
        json!("inf")
    } else {
        json!("-inf")
    }
}

struct SigFigFormatter;

impl serde_json::ser::Formatter for SigFigFormatter {
    fn write_f64<W>(&mut self, writer: &mut W, value: f64) -> std::io::Result<()>
    where
        W: ?Sized + Write,
    {
        // 12 significant digits in scientific notation; integers written as
        // integers stay integers, only f64 passes through here
        write!(writer, "{:.11e}", value)
    }
}

/// Deterministic serialization: sorted keys, 12-significant-digit floats.
pub fn render_value(value: &Value) -> String {
    let mut out = Vec::new();
    let mut serializer = serde_json::Serializer::with_formatter(&mut out, SigFigFormatter);
    serde::Serialize::serialize(value, &mut serializer).expect("report serialization");
    out.push(b'\n');
    String::from_utf8(out).expect("report is utf-8")
}
