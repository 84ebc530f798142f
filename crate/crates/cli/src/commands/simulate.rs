use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::{bail, Context, Result};

use subgeo::simulate::{euler_maruyama, fit_moment_delta, jump_sde, SimOptions};

use crate::config::{Format, RunConfig};
use crate::report::{num, nums, CheckResult};

/// Simulates the configured model from `numeric.starts` and exports the ensemble.
pub fn run(cfg: &RunConfig, out: &Path) -> Result<(Vec<CheckResult>, Vec<String>)> {
    let n = &cfg.numeric;
    let built = cfg.model.build()?;
    let opts = SimOptions { t_end: n.t_end, dt: n.dt, n_paths: n.n_paths, seed: n.seed, record_every: n.record_every };
    let mut c = CheckResult::new("simulation");
    let ens = match &built.jump_spec {
        Some(spec) => {
            c.set("moment_delta", num(fit_moment_delta(spec, 20.0, 4001)?));
            jump_sde(spec, &n.starts, &opts)?
        }
        None if built.coefficients.jump.is_some() => {
            bail!("state-dependent jump kernels cannot be simulated; use the clamped_jumps family")
        }
        None => euler_maruyama(&built.coefficients, &n.starts, &opts)?,
    };
    let last = ens.n_times() - 1;
    let col = ens.column_at(last, 0);
    let mean = col.iter().sum::<f64>() / col.len() as f64;
    let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (col.len().max(2) - 1) as f64;
    c.set("n_paths", ens.n_paths);
    c.set("n_times", ens.n_times());
    c.set("dt", num(opts.dt));
    c.set("t_end", num(opts.t_end));
    c.set("starts", n.starts.iter().map(|s| nums(s)).collect::<Vec<_>>());
    c.set("flagged", ens.flagged_count());
    c.set("final_mean_x0", num(mean));
    c.set("final_variance_x0", num(var));
    if let Some(j) = &ens.jump_counts {
        c.set("mean_jumps", num(j.iter().sum::<usize>() as f64 / j.len() as f64));
    }

    let bin = out.join("ensemble.bin");
    let mut w = BufWriter::new(File::create(&bin).with_context(|| format!("creating {}", bin.display()))?);
    ens.write_binary(&mut w)?;
    w.flush()?;
    c.artifacts.push(bin.display().to_string());
    if cfg.output.wants(Format::Csv) {
        let p = out.join("ensemble_summary.csv");
        let mut w = BufWriter::new(File::create(&p)?);
        ens.write_summary_csv(&mut w)?;
        w.flush()?;
        c.artifacts.push(p.display().to_string());
    }
    if ens.flagged_count() == 0 {
        c.summary = format!("{} paths simulated to t = {}", ens.n_paths, opts.t_end);
    } else {
        c.fail(format!("{} of {} paths left the explosion radius", ens.flagged_count(), ens.n_paths));
    }
    Ok((vec![c], Vec::new()))
}
