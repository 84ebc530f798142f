use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::Result;

use crate::config::RunConfig;
use crate::report::{AnalysisReport, CheckResult, Status};

/// Artifact stem written by the command that produces `check`.
pub fn producer(check: &str) -> &'static str {
    match check {
        "wasserstein_contraction" => "check-wass",
        "subordinate" => "subordinate",
        _ => "check-tv",
    }
}

/// Outcome of collecting prior artifacts.
pub enum Collected {
    Complete(Vec<CheckResult>, Vec<String>),
    /// `(check, reason)` for every requested check without a usable artifact.
    Missing(Vec<(String, String)>),
}

pub fn collect(cfg: &RunConfig, out: &Path) -> Result<Collected> {
    let hash = cfg.hash()?;
    let mut found = Vec::new();
    let mut missing = Vec::new();
    let mut warnings = Vec::new();
    for check in &cfg.analysis.checks {
        let stem = producer(check);
        let path = out.join(format!("{stem}.json"));
        let text = match std::fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) => {
                missing.push((check.clone(), format!("{}: {e}", path.display())));
                continue;
            }
        };
        let prior: AnalysisReport = match serde_json::from_str(&text) {
            Ok(r) => r,
            Err(e) => {
                missing.push((check.clone(), format!("{}: unreadable report: {e}", path.display())));
                continue;
            }
        };
        match prior.checks.iter().find(|c| &c.name == check) {
            Some(c) => {
                if prior.config_hash != hash {
                    warnings.push(format!("{check}: {} was produced under config {}", path.display(), prior.config_hash));
                }
                found.push(c.clone());
            }
            None => missing.push((check.clone(), format!("{} has no result for this check", path.display()))),
        }
    }
    Ok(if missing.is_empty() { Collected::Complete(found, warnings) } else { Collected::Missing(missing) })
}

/// One row per check, for spreadsheets and plotting scripts.
pub fn write_csv(report: &AnalysisReport, out: &Path) -> Result<String> {
    let p = out.join("report.csv");
    let mut w = BufWriter::new(File::create(&p)?);
    writeln!(w, "check,status,producer,summary,artifacts")?;
    for c in &report.checks {
        let status = if c.status == Status::Pass { "pass" } else { "fail" };
        writeln!(w, "{},{status},{},{},{}", c.name, producer(&c.name), quote(&c.summary), quote(&c.artifacts.join(";")))?;
    }
    w.flush()?;
    Ok(p.display().to_string())
}

fn quote(s: &str) -> String {
    format!("\"{}\"", s.replace('"', "\"\""))
}
