use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::{bail, Result};
use serde_json::{json, Value};

use subgeo::distance::{coupling_cost, decay_fit, DecayModel};
use subgeo::drift_geometry::{certify_flatness, symmetric_grid, CoefficientModel};
use subgeo::rate_calculus::{Family, Kappa, ModulusPair};
use subgeo::simulate::{synchronous_pair, SimOptions};

use crate::config::{FitChoice, Format, RunConfig};
use crate::report::{num, nums, CheckResult};

/// Runs wasserstein_contraction when requested.
pub fn run(cfg: &RunConfig, out: &Path) -> Result<(Vec<CheckResult>, Vec<String>)> {
    if !cfg.analysis.wants("wasserstein_contraction") {
        return Ok((Vec::new(), vec!["no Wasserstein checks requested".into()]));
    }
    let built = cfg.model.build()?;
    if built.jump_spec.is_some() || built.coefficients.jump.is_some() {
        bail!("synchronous coupling is only available for diffusions without jumps");
    }
    let mut c = CheckResult::new("wasserstein_contraction");
    contraction(cfg, &built.coefficients, out, &mut c);
    Ok((vec![c], Vec::new()))
}

/// Γ from the configuration, or certified by a scan of the flatness condition.
fn contraction_constant(cfg: &RunConfig, model: &CoefficientModel<f64>, f: Family, psi: Family, c: &mut CheckResult) -> Result<f64, String> {
    let w = &cfg.analysis.wass;
    if w.contraction > 0.0 {
        c.set("contraction_source", "configured");
        return Ok(w.contraction);
    }
    if model.dim != 1 {
        return Err("the certification scan is one-dimensional; set analysis.wass.contraction".into());
    }
    let scan = ModulusPair::from_families(f, psi, w.gamma_threshold, 1.0).map_err(|e| e.to_string())?;
    let cert = certify_flatness(model, &scan, &symmetric_grid(w.flatness_half_width, w.flatness_points))
        .map_err(|e| e.to_string())?;
    c.set("contraction_source", "certified");
    c.set("pairs_checked", cert.pairs_checked);
    c.set("far_branch_max", num(cert.far_branch_max));
    if let Some((x, y)) = &cert.binding_pair {
        c.set("binding_pair", json!([nums(x), nums(y)]));
    }
    match cert.gamma_certified {
        Some(g) if cert.holds() => Ok(g),
        Some(_) => Err(format!("far branch fails: max {} > 0", cert.far_branch_max)),
        None => Err("no positive Γ satisfies the near branch".into()),
    }
}

fn contraction(cfg: &RunConfig, model: &CoefficientModel<f64>, out: &Path, c: &mut CheckResult) {
    let w = &cfg.analysis.wass;
    let n = &cfg.numeric;
    let (f, psi): (Family, Family) = match (w.f.parse(), w.psi.parse()) {
        (Ok(f), Ok(p)) => (f, p),
        _ => return c.stage_error("modulus", "bad family name"),
    };
    let big_gamma = match contraction_constant(cfg, model, f, psi, c) {
        Ok(g) => g,
        Err(e) => return c.stage_error("flatness", e),
    };
    c.set("contraction", num(big_gamma));
    let modulus = match ModulusPair::from_families(f, psi, w.gamma_threshold, big_gamma) {
        Ok(m) => m,
        Err(e) => return c.stage_error("modulus", e),
    };
    let tolerance = w.excess_tolerance * n.tolerance_scale;
    c.set("excess_tolerance", num(tolerance));
    let mut rows: Vec<Value> = Vec::new();
    let mut worst = f64::NEG_INFINITY;
    for (i, [x, y]) in w.pairs.iter().enumerate() {
        let opts = SimOptions { t_end: n.t_end, dt: n.dt, n_paths: n.n_paths, seed: n.seed.wrapping_add(i as u64), record_every: n.record_every };
        match pair(cfg, model, &modulus, big_gamma, x, y, &opts, i, out, c) {
            Ok((row, excess)) => {
                worst = worst.max(excess);
                rows.push(row);
            }
            Err((stage, e)) => {
                c.set("pairs", rows);
                return c.stage_error(stage, format!("pair {i}: {e}"));
            }
        }
    }
    c.set("pairs", rows);
    c.set("max_excess", num(worst));
    if worst <= tolerance {
        c.summary = format!("coupling stays within the Ψ⁻¹ bound for Γ = {big_gamma}; max excess {worst}");
    } else {
        c.fail(format!("coupling exceeds the Ψ⁻¹ bound by {worst} > {tolerance}"));
    }
}

type Stage = (&'static str, String);

#[allow(clippy::too_many_arguments)]
fn pair(
    cfg: &RunConfig,
    model: &CoefficientModel<f64>,
    modulus: &ModulusPair<f64>,
    big_gamma: f64,
    x: &[f64],
    y: &[f64],
    opts: &SimOptions,
    index: usize,
    out: &Path,
    c: &mut CheckResult,
) -> Result<(Value, f64), Stage> {
    let w = &cfg.analysis.wass;
    let ens = synchronous_pair(model, x, y, opts, None).map_err(|e| ("simulation", e.to_string()))?;
    let distance = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
    let f0 = modulus.f(distance);
    let near = f0 <= w.gamma_threshold;
    let (kappa, chain) = if near {
        (f0, 1.0)
    } else {
        (w.gamma_threshold, modulus.chaining_factor(distance).map_err(|e| ("chaining", e.to_string()))?)
    };
    let mut costs = Vec::with_capacity(ens.n_times());
    let mut bounds = Vec::with_capacity(ens.n_times());
    let mut pathwise = Vec::with_capacity(ens.n_times());
    for (k, &t) in ens.times.iter().enumerate() {
        let cost = coupling_cost(&ens, modulus, w.p, k).map_err(|e| ("coupling cost", e.to_string()))?;
        let bound = if distance == 0.0 {
            0.0
        } else {
            chain * modulus.psi_big_inv(Kappa::Finite(kappa), big_gamma * t).map_err(|e| ("Ψ⁻¹", e.to_string()))?
        };
        let mut top = 0f64;
        for path in (0..ens.n_paths).filter(|&p| !ens.flagged[p]) {
            let z = ens.partner_state(path, k).expect("coupled ensemble");
            let d = ens.state(path, k).iter().zip(z).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
            top = top.max(modulus.f(d));
        }
        costs.push(cost);
        bounds.push(bound);
        pathwise.push(top);
    }
    // Below the threshold the bound holds path by path; above it only in mean.
    let observed = if near { &pathwise } else { &costs };
    let excess = observed.iter().zip(&bounds).map(|(o, b)| o - b).fold(f64::NEG_INFINITY, f64::max);

    let mut row = json!({
        "x": nums(x), "y": nums(y), "distance": num(distance), "kappa": num(kappa),
        "chaining_factor": num(chain), "bound_kind": if near { "pathwise" } else { "mean" },
        "max_excess": num(excess), "flagged": ens.flagged_count(),
        "final_coupling_cost": num(*costs.last().unwrap_or(&0.0)),
    });
    if ens.flagged_count() > 0 {
        c.warnings.push(format!("pair {index}: {} paths left the explosion radius", ens.flagged_count()));
    }
    if distance == 0.0 {
        row["fit"] = json!("skipped: the pair starts coupled");
    } else {
        let from = ens.times.partition_point(|&t| t < w.fit_from);
        let model_choice = match w.fit {
            FitChoice::Exponential => DecayModel::Exponential,
            FitChoice::Power => DecayModel::Power,
            FitChoice::PsiInverse => DecayModel::PsiInverse { modulus: modulus.clone(), kappa: kappa * chain },
        };
        match decay_fit(&ens.times[from..], &costs[from..], &model_choice) {
            Ok(fit) => {
                let params: serde_json::Map<String, Value> = fit.params.iter().map(|(k, v)| (k.clone(), num(*v))).collect();
                row["fit"] = json!({
                    "model": fit.model, "params": params, "residual": num(fit.residual),
                    "points_used": fit.points_used, "dropped": fit.dropped,
                });
                c.warnings.extend(fit.warnings.into_iter().map(|s| format!("pair {index} fit: {s}")));
            }
            Err(e) => {
                row["fit"] = json!(format!("failed: {e}"));
                c.warnings.push(format!("pair {index}: decay fit failed: {e}"));
            }
        }
    }
    if cfg.output.wants(Format::Csv) {
        let path = out.join(format!("coupling_pair_{index}.csv"));
        let written = File::create(&path).map(BufWriter::new).and_then(|mut fh| {
            writeln!(fh, "t,coupling_cost,bound,max_pathwise")?;
            for k in 0..ens.n_times() {
                writeln!(fh, "{},{},{},{}", ens.times[k], costs[k], bounds[k], pathwise[k])?;
            }
            fh.flush()
        });
        match written {
            Ok(()) => c.artifacts.push(path.display().to_string()),
            Err(e) => c.warnings.push(format!("writing {}: {e}", path.display())),
        }
    }
    Ok((row, if distance == 0.0 { 0.0 } else { excess }))
}
