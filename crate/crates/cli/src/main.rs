//! `subgeo`: command-line front end for the sub-geometric ergodicity checks.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use subgeo_cli::commands::{self, report::{collect, Collected}};
use subgeo_cli::config::{Format, RunConfig};
use subgeo_cli::report::{AnalysisReport, CheckResult, Status};

/// Exit code when a requested check fails.
const EXIT_FAIL: u8 = 1;
/// Exit code for configuration, input or missing-artifact errors.
const EXIT_ERROR: u8 = 2;

#[derive(Parser)]
#[command(name = "subgeo", version, about = "Sub-geometric ergodicity checks for diffusions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integral test, Lyapunov construction and verification, total-variation rate curve.
    CheckTv(Common),
    /// Synchronous coupling against the Wasserstein contraction bound.
    CheckWass(Common),
    /// Simulate the model and export the ensemble.
    Simulate(Common),
    /// Rate transform under a subordinator.
    Subordinate(Common),
    /// Consolidate earlier artifacts into one report.
    Report(Common),
}

#[derive(Args)]
struct Common {
    /// Run configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `output.dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed; overrides `numeric.seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Multiplies every acceptance tolerance; overrides `numeric.tolerance_scale`.
    #[arg(long)]
    tolerance_scale: Option<f64>,
}

impl Common {
    fn load(&self) -> Result<(RunConfig, PathBuf)> {
        let mut cfg = RunConfig::load(&self.config)?;
        if let Some(dir) = &self.out {
            cfg.output.dir = dir.display().to_string();
        }
        if let Some(seed) = self.seed {
            cfg.numeric.seed = seed;
        }
        if let Some(s) = self.tolerance_scale {
            anyhow::ensure!(s > 0.0, "--tolerance-scale must be positive");
            cfg.numeric.tolerance_scale = s;
        }
        cfg.resolve();
        let out = PathBuf::from(&cfg.output.dir);
        std::fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
        Ok((cfg, out))
    }
}

type Runner = fn(&RunConfig, &Path) -> Result<(Vec<CheckResult>, Vec<String>)>;

fn finish(name: &str, cfg: &RunConfig, out: &Path, checks: Vec<CheckResult>, warnings: Vec<String>) -> Result<u8> {
    let report = AnalysisReport::new(name, cfg, checks, warnings)?;
    let mut written = report.write(out, name, cfg)?;
    if name == "report" && cfg.output.wants(Format::Csv) {
        written.push(commands::report::write_csv(&report, out)?);
    }
    for c in &report.checks {
        let status = if c.status == Status::Pass { "PASS" } else { "FAIL" };
        println!("{status} {}: {}", c.name, c.summary);
    }
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    for p in written {
        println!("wrote {p}");
    }
    Ok(if report.passed { 0 } else { EXIT_FAIL })
}

fn run(cli: Cli) -> Result<u8> {
    let (name, common, runner): (&str, &Common, Option<Runner>) = match &cli.command {
        Command::CheckTv(c) => ("check-tv", c, Some(commands::tv::run)),
        Command::CheckWass(c) => ("check-wass", c, Some(commands::wass::run)),
        Command::Simulate(c) => ("simulate", c, Some(commands::simulate::run)),
        Command::Subordinate(c) => ("subordinate", c, Some(commands::subordinate::run)),
        Command::Report(c) => ("report", c, None),
    };
    let (cfg, out) = common.load()?;
    match runner {
        Some(f) => {
            let (checks, warnings) = f(&cfg, &out).with_context(|| format!("{name} failed"))?;
            finish(name, &cfg, &out, checks, warnings)
        }
        None => match collect(&cfg, &out)? {
            Collected::Complete(checks, warnings) => finish(name, &cfg, &out, checks, warnings),
            Collected::Missing(list) => {
                eprintln!("missing artifacts for {} requested check(s):", list.len());
                for (check, why) in list {
                    eprintln!("  {check} (run `subgeo {}`): {why}", commands::report::producer(&check));
                }
                Ok(EXIT_ERROR)
            }
        },
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_ERROR)
        }
    }
}
