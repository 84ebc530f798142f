use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::Result;
use serde_json::json;

use subgeo::drift_geometry::{
    check_subgeo_classical, lambda_constant, ls_slope, n_matrix_profile, radial_profile, sphere::sphere_points,
    ClassicalOptions, CoefficientModel, LambdaOptions, LambdaVerdict, ProfileKind, ProfileOptions, RadialProfile,
};
use subgeo::lyapunov::{build_geometric, build_subgeometric, hitting_bound, verify_drift_inequality, HittingOptions, VerifyOptions};
use subgeo::rate_calculus::{Family, RateFunction};
use subgeo::scalar::linspace;

use crate::config::{Format, ProfileChoice, RunConfig, TvConfig};
use crate::report::{num, nums, CheckResult};

struct Chosen {
    profile: RadialProfile<f64>,
    verdict: LambdaVerdict<f64>,
}

/// Runs the requested checks among tv_condition, lyapunov_verify, classical_subgeo and hitting_bound.
pub fn run(cfg: &RunConfig, out: &Path) -> Result<(Vec<CheckResult>, Vec<String>)> {
    let a = &cfg.analysis;
    let mut checks = Vec::new();
    let mut warnings = Vec::new();
    let wanted = ["tv_condition", "lyapunov_verify", "classical_subgeo", "hitting_bound"];
    if !wanted.iter().any(|c| a.wants(c)) {
        warnings.push("no total-variation checks requested".into());
        return Ok((checks, warnings));
    }
    let model = cfg.model.build()?.coefficients;
    let family: Family = a.tv.rate.parse()?;
    let geometric = family == Family::Identity;
    let rate = RateFunction::from_family(family)?;

    let mut chosen = None;
    if a.wants("tv_condition") || a.wants("lyapunov_verify") {
        let mut tv = CheckResult::new("tv_condition");
        chosen = tv_condition(cfg, &model, &rate, geometric, out, &mut tv);
        if a.wants("tv_condition") {
            checks.push(tv);
        }
    }
    if a.wants("lyapunov_verify") {
        let mut c = CheckResult::new("lyapunov_verify");
        match &chosen {
            Some(ch) => lyapunov_verify(cfg, &model, &rate, geometric, ch, out, &mut c),
            None => c.stage_error("lambda", "no centre and base radius gave a finite Λ, so no Lyapunov function exists"),
        }
        checks.push(c);
    }
    if a.wants("classical_subgeo") {
        let mut c = CheckResult::new("classical_subgeo");
        classical(cfg, &model, &mut c);
        checks.push(c);
    }
    if a.wants("hitting_bound") {
        let mut c = CheckResult::new("hitting_bound");
        hitting(cfg, &model, &mut c);
        checks.push(c);
    }
    Ok((checks, warnings))
}

fn profile_for(
    model: &CoefficientModel<f64>,
    tv: &TvConfig,
    x0: &[f64],
    r0: f64,
) -> subgeo::Result<RadialProfile<f64>> {
    let grid = linspace(r0, tv.r_max, tv.grid_points);
    let kind = match tv.profile {
        ProfileChoice::Diffusion => ProfileKind::Diffusion,
        ProfileChoice::JumpSecondMoment => ProfileKind::JumpSecondMoment,
    };
    let opts = ProfileOptions { kind, ..ProfileOptions::default() };
    match kind {
        ProfileKind::Diffusion => radial_profile(model, x0, r0, &grid, &opts),
        ProfileKind::JumpSecondMoment => n_matrix_profile(model, x0, r0, &grid, &opts),
    }
}

fn tv_condition(
    cfg: &RunConfig,
    model: &CoefficientModel<f64>,
    rate: &RateFunction<f64>,
    geometric: bool,
    out: &Path,
    c: &mut CheckResult,
) -> Option<Chosen> {
    let tv = &cfg.analysis.tv;
    let opts = LambdaOptions {
        slope_margin: tv.slope_margin,
        doubling_rel_change: tv.doubling_rel_change,
        tail_rel_tol: tv.tail_rel_tol,
        ..LambdaOptions::default()
    };
    c.set("branch", if geometric { "geometric" } else { "subgeometric" });
    c.set("rate", rate.label());
    c.set("grid_points", tv.grid_points);
    c.set("r_max", num(tv.r_max));
    let mut sweep = Vec::new();
    let mut chosen: Option<Chosen> = None;
    let mut last_err = None;
    for x0 in &tv.centers {
        for &r0 in &tv.base_radii {
            let attempt = profile_for(model, tv, x0, r0)
                .map_err(|e| ("profile", e))
                .and_then(|p| lambda_constant(&p, rate, tv.r_max, &opts).map(|v| (p, v)).map_err(|e| ("lambda", e)));
            match attempt {
                Ok((p, v)) => {
                    sweep.push(json!({
                        "center": nums(x0), "base_radius": num(r0), "lambda": num(v.value), "finite": v.finite,
                        "decay_exponent": num(v.decay_exponent), "tail_bound": num(v.tail_bound),
                        "nodes_used": v.nodes_used,
                    }));
                    if !p.nonpositive_gamma.is_empty() {
                        c.warnings.push(format!("γ not positive at {} radii for r₀ = {r0}", p.nonpositive_gamma.len()));
                    }
                    if chosen.is_none() && v.finite {
                        chosen = Some(Chosen { profile: p, verdict: v });
                    }
                }
                Err((stage, e)) => {
                    sweep.push(json!({ "center": nums(x0), "base_radius": num(r0), "error": format!("{stage}: {e}") }));
                    last_err = Some((stage, e));
                }
            }
        }
    }
    c.set("sweep", sweep);
    let finite = chosen.is_some();
    c.set("finite", finite);
    c.set("expect_finite", tv.expect_finite);
    match &chosen {
        Some(ch) => {
            let v = &ch.verdict;
            c.set("lambda", num(v.value));
            c.set("center", nums(&ch.profile.center));
            c.set("base_radius", num(ch.profile.base_radius));
            c.set("decay_exponent", num(v.decay_exponent));
            c.set("tail_bound", num(v.tail_bound));
            c.set("nodes_used", v.nodes_used);
            c.set("sphere_samples", ch.profile.sphere_samples);
            c.summary = format!("Λ = {} is finite", v.value);
            match rate_curve(cfg, rate, geometric, out, c) {
                Ok(()) => {}
                Err(e) => c.warnings.push(format!("rate curve: {e}")),
            }
        }
        None => {
            c.set("lambda", num(f64::INFINITY));
            c.summary = "Λ is infinite for every centre and base radius; no rate".into();
        }
    }
    if let (false, Some((stage, e))) = (finite, &last_err) {
        if tv.expect_finite {
            c.stage_error(stage, e);
            return None;
        }
    }
    if finite != tv.expect_finite {
        let s = c.summary.clone();
        c.fail(format!("{s}, but expect_finite = {}", tv.expect_finite));
    }
    chosen
}

/// Emits `φ(Φ⁻¹(t))` and the fitted growth of the rate.
fn rate_curve(
    cfg: &RunConfig,
    rate: &RateFunction<f64>,
    geometric: bool,
    out: &Path,
    c: &mut CheckResult,
) -> Result<()> {
    let tv = &cfg.analysis.tv;
    let n = tv.rate_points.max(10);
    let times: Vec<f64> = if geometric {
        linspace(0.0, tv.rate_t_max.min(50.0), n)
    } else {
        linspace(0.0, tv.rate_t_max.log10(), n).into_iter().map(|e| 10f64.powf(e)).collect()
    };
    let values: Vec<f64> = times.iter().map(|&t| rate.tv_rate_at(t)).collect::<subgeo::Result<_>>()?;
    let tail = n - n / 4;
    if geometric {
        let ln: Vec<f64> = values.iter().map(|v| v.ln()).collect();
        c.set("rate_log_slope", num(ls_slope(&times[tail..], &ln[tail..])));
    } else {
        let lt: Vec<f64> = times[tail..].iter().map(|t| t.ln()).collect();
        let lv: Vec<f64> = values[tail..].iter().map(|v| v.ln()).collect();
        c.set("rate_exponent", num(ls_slope(&lt, &lv)));
    }
    if cfg.output.wants(Format::Csv) {
        let path = out.join("tv_rate_curve.csv");
        let mut w = BufWriter::new(File::create(&path)?);
        writeln!(w, "t,rate")?;
        for (t, v) in times.iter().zip(&values) {
            writeln!(w, "{t},{v}")?;
        }
        w.flush()?;
        c.artifacts.push(path.display().to_string());
    }
    Ok(())
}

/// Sample points on shells `r ∈ [r₁, 10r₁]` around the centre.
fn shell_points(center: &[f64], r1: f64, n: usize) -> Vec<Vec<f64>> {
    let d = center.len();
    let dirs: Vec<Vec<f64>> = if d == 1 { vec![vec![1.0], vec![-1.0]] } else { sphere_points(d, 16) };
    linspace(r1, 10.0 * r1, n)
        .into_iter()
        .enumerate()
        .map(|(k, r)| center.iter().zip(&dirs[k % dirs.len()]).map(|(c, u)| c + r * u).collect())
        .collect()
}

fn lyapunov_verify(
    cfg: &RunConfig,
    model: &CoefficientModel<f64>,
    rate: &RateFunction<f64>,
    geometric: bool,
    ch: &Chosen,
    out: &Path,
    c: &mut CheckResult,
) {
    let tv = &cfg.analysis.tv;
    let r0 = ch.profile.base_radius;
    let r1 = if tv.r1 > r0 { tv.r1 } else { 1.5 * r0 };
    let built = if geometric {
        build_geometric(&ch.profile, &ch.verdict, Some(r1))
    } else {
        build_subgeometric(&ch.profile, &ch.verdict, rate, Some(r1))
    };
    let table = match built {
        Ok(t) => t,
        Err(e) => return c.stage_error("lyapunov build", e),
    };
    let pts = shell_points(&ch.profile.center, table.r1, tv.verify_points);
    let opts = VerifyOptions { tolerance: tv.verify_tolerance * cfg.numeric.tolerance_scale };
    let rep = match verify_drift_inequality(&table, model, &pts, &opts) {
        Ok(r) => r,
        Err(e) => return c.stage_error("drift verification", e),
    };
    c.set("r1", num(table.r1));
    c.set("lambda_used", num(table.lambda_used));
    c.set("max_violation", num(rep.max_violation));
    c.set("argmax", nums(&rep.argmax));
    c.set("tolerance", num(rep.tolerance));
    c.set("tail_budget", num(rep.tail_budget));
    c.set("points", pts.len());
    if let Some(j) = rep.jump_term_max {
        c.set("jump_term_max", num(j));
    }
    if cfg.output.wants(Format::Csv) {
        let path = out.join("lyapunov_table.csv");
        match File::create(&path).map(BufWriter::new).and_then(|mut w| {
            table.write_csv(&mut w)?;
            w.flush()
        }) {
            Ok(()) => c.artifacts.push(path.display().to_string()),
            Err(e) => c.warnings.push(format!("writing {}: {e}", path.display())),
        }
    }
    if rep.passed {
        c.summary = format!("LV + ½φ(V) ≤ 0 holds at {} points; max violation {}", pts.len(), rep.max_violation);
    } else {
        c.fail(format!(
            "drift inequality violated: max violation {} exceeds {} + budget {}",
            rep.max_violation, rep.tolerance, rep.tail_budget
        ));
    }
}

fn classical(cfg: &RunConfig, model: &CoefficientModel<f64>, c: &mut CheckResult) {
    let k = &cfg.analysis.classical;
    let opts = ClassicalOptions { r_max: k.r_max, points_per_unit: k.points_per_unit, ..ClassicalOptions::default() };
    let v = match check_subgeo_classical(model, k.alpha, k.gamma_exp, k.big_gamma, k.r0, &opts) {
        Ok(v) => v,
        Err(e) => return c.stage_error("classical", e),
    };
    c.set("feasible", v.feasible);
    c.set("expect_feasible", k.expect_feasible);
    c.set("worst_margin", num(v.worst_margin));
    c.set("worst_radius", num(v.worst_radius));
    c.set("violation_peaks", nums(&v.violation_peaks));
    c.set("exponent", num(v.exponent));
    c.set("samples", v.samples);
    c.summary = if v.feasible {
        format!("the polynomial drift condition holds; worst margin {}", v.worst_margin)
    } else {
        format!("the polynomial drift condition fails at r = {} (margin {})", v.worst_radius, v.worst_margin)
    };
    if v.feasible != k.expect_feasible {
        let s = c.summary.clone();
        c.fail(format!("{s}, but expect_feasible = {}", k.expect_feasible));
    }
}

fn hitting(cfg: &RunConfig, model: &CoefficientModel<f64>, c: &mut CheckResult) {
    let h = &cfg.analysis.hitting;
    let opts = HittingOptions { r_max: h.r_max, step: h.step, ..HittingOptions::default() };
    let mut rows = Vec::new();
    for x in &h.points {
        match hitting_bound(model, &h.center, h.radius, x, &opts) {
            Ok(b) => rows.push(json!({
                "x": nums(x), "bound": num(b.bound), "vbar_at_x": num(b.vbar_at_x),
                "vbar_infinity": num(b.vbar_infinity), "recurrent": b.recurrent,
                "decay_exponent": num(b.decay_exponent),
            })),
            Err(e) => {
                c.set("bounds", rows);
                return c.stage_error("hitting bound", format!("x = {x:?}: {e}"));
            }
        }
    }
    c.summary = format!("escape-probability bounds computed at {} points", rows.len());
    c.set("bounds", rows);
}
