use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::config::{Format, RunConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    Fail,
}

/// One check with its verdict and the constants it computed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub status: Status,
    pub summary: String,
    pub values: BTreeMap<String, Value>,
    pub warnings: Vec<String>,
    pub artifacts: Vec<String>,
}

impl CheckResult {
    pub fn new(name: &str) -> Self {
        Self {
            name: name.into(),
            status: Status::Pass,
            summary: String::new(),
            values: BTreeMap::new(),
            warnings: Vec::new(),
            artifacts: Vec::new(),
        }
    }

    pub fn set(&mut self, key: &str, v: impl Into<Value>) {
        self.values.insert(key.into(), v.into());
    }

    pub fn fail(&mut self, summary: impl Into<String>) {
        self.status = Status::Fail;
        self.summary = summary.into();
    }

    /// Marks the check failed at `stage` with the library error.
    pub fn stage_error(&mut self, stage: &str, err: impl std::fmt::Display) {
        self.set("failed_stage", stage);
        self.fail(format!("{stage}: {err}"));
    }
}

/// A number that survives JSON: non-finite values become the strings `inf`, `-inf`, `nan`.
pub fn num(x: f64) -> Value {
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

pub fn nums(xs: &[f64]) -> Value {
    Value::Array(xs.iter().map(|&x| num(x)).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config_hash: String,
    pub seed: u64,
    pub passed: bool,
    pub checks: Vec<CheckResult>,
    pub warnings: Vec<String>,
    /// The resolved configuration, defaults included.
    pub config: Value,
}

impl AnalysisReport {
    pub fn new(command: &str, cfg: &RunConfig, checks: Vec<CheckResult>, warnings: Vec<String>) -> Result<Self> {
        Ok(Self {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            config_hash: cfg.hash()?,
            seed: cfg.numeric.seed,
            passed: checks.iter().all(|c| c.status == Status::Pass),
            checks,
            warnings,
            config: serde_json::to_value(cfg)?,
        })
    }

    /// Writes `<stem>.json` and `<stem>.txt` as configured; returns the paths written.
    pub fn write(&self, dir: &Path, stem: &str, cfg: &RunConfig) -> Result<Vec<String>> {
        let mut written = Vec::new();
        if cfg.output.wants(Format::Json) {
            let p = dir.join(format!("{stem}.json"));
            std::fs::write(&p, serde_json::to_string_pretty(self)? + "\n")
                .with_context(|| format!("writing {}", p.display()))?;
            written.push(p.display().to_string());
        }
        if cfg.output.wants(Format::Text) {
            let p = dir.join(format!("{stem}.txt"));
            std::fs::write(&p, self.to_text()?).with_context(|| format!("writing {}", p.display()))?;
            written.push(p.display().to_string());
        }
        Ok(written)
    }

    /// Human-readable rendering. Numbers are printed from the JSON values so
    /// both renderings carry the same digits.
    pub fn to_text(&self) -> Result<String> {
        let v = serde_json::to_value(self)?;
        let mut s = String::new();
        writeln!(s, "{} {} :: {}", self.tool, self.version, self.command)?;
        writeln!(s, "config hash {}", self.config_hash)?;
        writeln!(s, "seed {}", self.seed)?;
        writeln!(s, "overall {}", if self.passed { "PASS" } else { "FAIL" })?;
        for w in &self.warnings {
            writeln!(s, "warning: {w}")?;
        }
        for (k, c) in self.checks.iter().enumerate() {
            writeln!(s)?;
            let status = if c.status == Status::Pass { "PASS" } else { "FAIL" };
            writeln!(s, "[{status}] {}", c.name)?;
            if !c.summary.is_empty() {
                writeln!(s, "  {}", c.summary)?;
            }
            if let Some(values) = v["checks"][k]["values"].as_object() {
                for (key, val) in values {
                    writeln!(s, "  {key} = {}", render(val))?;
                }
            }
            for w in &c.warnings {
                writeln!(s, "  warning: {w}")?;
            }
            for a in &c.artifacts {
                writeln!(s, "  artifact: {a}")?;
            }
        }
        writeln!(s)?;
        writeln!(s, "resolved configuration")?;
        flatten(&v["config"], "  ", &mut s)?;
        Ok(s)
    }
}

fn render(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        Value::Array(items) => format!("[{}]", items.iter().map(render).collect::<Vec<_>>().join(", ")),
        Value::Object(map) => {
            format!("{{{}}}", map.iter().map(|(k, x)| format!("{k}: {}", render(x))).collect::<Vec<_>>().join(", "))
        }
        other => other.to_string(),
    }
}

fn flatten(v: &Value, prefix: &str, out: &mut String) -> std::fmt::Result {
    match v {
        Value::Object(map) => {
            for (k, x) in map {
                if x.is_object() {
                    flatten(x, &format!("{prefix}{k}."), out)?;
                } else {
                    writeln!(out, "{prefix}{k} = {}", render(x))?;
                }
            }
            Ok(())
        }
        other => writeln!(out, "{}{}", prefix, render(other)),
    }
}
