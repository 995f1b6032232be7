//! Machine-readable reports.
//!
//! Schema (version 1), keys in sorted order:
//!
//! - `tool`, `version`, `schema`: producer and schema version
//! - `command`, `system`, `input_sha256`: what was run on which file
//! - `settings`: `seed`, `samples`, `tol`
//! - `status`: `ok`, `fail` or `indeterminate`, the combination of all checks
//! - `checks`: list of `{name, status, certification, reasons}`; certification
//!   is `symbolic`, `numeric` or null when no zero verdict was reached
//! - `results`: command-specific values
//!
//! No timestamps: the same input and seed give byte-identical output.

use std::fmt::Write as _;

use eds_core::decomposable::Status;
use eds_core::expr::Certification;
use serde_json::{json, Map, Value};

use crate::spec::SystemSpec;

pub const SCHEMA: u32 = 1;

pub struct Report {
    command: String,
    system: String,
    digest: String,
    settings: Value,
    checks: Vec<(String, Status, Option<Certification>, Vec<String>)>,
    results: Map<String, Value>,
}

impl Report {
    pub fn new(command: &str, spec: &SystemSpec) -> Report {
        let p = spec.policy();
        Report {
            command: command.to_string(),
            system: spec.name.clone(),
            digest: spec.digest.clone(),
            settings: json!({"seed": p.seed, "samples": p.samples, "tol": p.tolerance}),
            checks: Vec::new(),
            results: Map::new(),
        }
    }

    pub fn check(&mut self, name: &str, status: Status, cert: Option<Certification>, reasons: Vec<String>) {
        self.checks.push((name.to_string(), status, cert, reasons));
    }

    pub fn set(&mut self, key: &str, value: Value) {
        self.results.insert(key.to_string(), value);
    }

    pub fn get(&self, key: &str) -> Option<&Value> {
        self.results.get(key)
    }

    pub fn status(&self) -> Status {
        self.checks.iter().fold(Status::Ok, |acc, c| acc.and(c.1))
    }

    pub fn check_status(&self, name: &str) -> Option<Status> {
        self.checks.iter().find(|c| c.0 == name).map(|c| c.1)
    }

    pub fn to_json(&self) -> Value {
        let checks: Vec<Value> = self
            .checks
            .iter()
            .map(|(name, status, cert, reasons)| {
                json!({
                    "name": name,
                    "status": status.as_str(),
                    "certification": cert.map(Certification::as_str),
                    "reasons": reasons,
                })
            })
            .collect();
        json!({
            "tool": "eds",
            "version": env!("CARGO_PKG_VERSION"),
            "schema": SCHEMA,
            "command": self.command,
            "system": self.system,
            "input_sha256": self.digest,
            "settings": self.settings,
            "status": self.status().as_str(),
            "checks": checks,
            "results": Value::Object(self.results.clone()),
        })
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{} {}: {}", self.command, self.system, self.status().as_str());
        for (name, status, cert, reasons) in &self.checks {
            let cert = cert.map_or(String::new(), |c| format!(" [{}]", c.as_str()));
            let _ = writeln!(out, "  {name}: {}{cert}", status.as_str());
            for r in reasons {
                let _ = writeln!(out, "    {r}");
            }
        }
        for (k, v) in &self.results {
            let _ = writeln!(out, "  {k} = {v}");
        }
        out
    }
}
