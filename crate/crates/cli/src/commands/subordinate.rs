use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::Result;
use serde_json::json;

use subgeo::simulate::{PositiveJumpLaw, SubordinatorSpec};
use subgeo::subordinate::{subordinate_curve, write_curve_csv, BaseRate, SubordinatedRate, SubordinationMethod};

use crate::config::{BaseRateConfig, Format, MethodChoice, RunConfig, SubordinatorConfig};
use crate::report::{num, CheckResult};

/// Evaluates `r_φ(t)` on the configured times; for an exponential base rate the
/// values are compared with the closed form `e^{−tφ(pλ)/p}`.
pub fn run(cfg: &RunConfig, out: &Path) -> Result<(Vec<CheckResult>, Vec<String>)> {
    if !cfg.analysis.wants("subordinate") {
        return Ok((Vec::new(), vec!["no subordination check requested".into()]));
    }
    let s = &cfg.analysis.subordinate;
    let spec = match s.subordinator {
        SubordinatorConfig::Gamma { a, b } => SubordinatorSpec::Gamma { a, b },
        SubordinatorConfig::DriftOnly { b } => SubordinatorSpec::DriftOnly { b },
        SubordinatorConfig::CompoundPoisson { drift, rate, jump_rate } => {
            SubordinatorSpec::CompoundPoisson { drift, rate, jumps: PositiveJumpLaw::Exponential { rate: jump_rate } }
        }
    };
    let base = match s.base {
        BaseRateConfig::Exponential { lambda } => BaseRate::exponential(lambda),
        BaseRateConfig::PowerDecay { q } => BaseRate::power_decay(q),
    };
    let method = match s.method {
        MethodChoice::MonteCarlo => SubordinationMethod::MonteCarlo { n: s.samples, seed: cfg.numeric.seed },
        MethodChoice::DensityQuadrature => SubordinationMethod::DensityQuadrature,
    };
    let sr = SubordinatedRate { base_rate: base, spec, p: s.p, method };
    let mut c = CheckResult::new("subordinate");
    let rows = match subordinate_curve(&sr, &s.times) {
        Ok(r) => r,
        Err(e) => {
            c.stage_error("subordination", e);
            return Ok((vec![c], Vec::new()));
        }
    };
    let scale = cfg.numeric.tolerance_scale;
    let mut worst_z: f64 = 0.0;
    let mut table = Vec::new();
    for v in &rows {
        let mut row = json!({ "t": num(v.t), "value": num(v.value), "se": num(v.se), "heavy_tail": v.heavy_tail });
        if v.heavy_tail {
            c.warnings.push(format!("t = {}: heavy-tailed samples, the standard error is unreliable", v.t));
        }
        if let BaseRateConfig::Exponential { lambda } = s.base {
            let exact = (-v.t * spec.bernstein(s.p * lambda) / s.p).exp();
            let slack = 3.0 * v.se * scale + 1e-12 * exact.max(1.0);
            let z = if v.se > 0.0 { (v.value - exact).abs() / v.se } else { 0.0 };
            worst_z = worst_z.max(z);
            row["exact"] = num(exact);
            if (v.value - exact).abs() > slack {
                c.fail(format!("t = {}: r_φ = {} differs from e^(−tφ(pλ)/p) = {exact} by more than 3 SE", v.t, v.value));
            }
        }
        if !v.value.is_finite() {
            c.fail(format!("t = {}: non-finite value", v.t));
        }
        table.push(row);
    }
    c.set("values", table);
    c.set("p", num(s.p));
    if matches!(s.base, BaseRateConfig::Exponential { .. }) {
        c.set("max_z", num(worst_z));
    }
    if c.summary.is_empty() {
        c.summary = format!("r_φ evaluated at {} times", rows.len());
    }
    if cfg.output.wants(Format::Csv) {
        let p = out.join("subordinate.csv");
        let mut w = BufWriter::new(File::create(&p)?);
        write_curve_csv(&rows, &mut w)?;
        w.flush()?;
        c.artifacts.push(p.display().to_string());
    }
    Ok((vec![c], Vec::new()))
}
