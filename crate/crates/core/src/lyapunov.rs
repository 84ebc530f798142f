//! Radial Lyapunov functions built from the drift integral, and numeric checks
//! of their drift inequalities and of the hitting-probability bound.
//!
//! With `U(u) = ∫_u^∞ φ(J+1)e^{I}/γ` and `Λ = U(r₀)` the radial part is
//! `V̄(r) = ∫_{r₀}^r e^{−I(u)} U(u)/Λ du`, so that `V̄′ = e^{−I}U/Λ` and
//! `V̄″ = −(ι/r)V̄′ − φ_Λ(J+1)/γ` with `φ_Λ = φ/Λ`. Values grow like
//! `e^{−I}`, so the table is kept in log space together with the ratio
//! `V̄″/V̄′ = −ι/r − g/U`, which stays moderate.

use std::io::Write;

use rayon::prelude::*;

use crate::drift_geometry::{
    jump_second_moment_form, ln_half_left, ln_panel, ls_slope, pointwise_functionals, radial_profile,
    CoefficientModel, LambdaVerdict, ProfileKind, ProfileOptions, RadialProfile,
};
use crate::error::{Error, Result};
use crate::rate_calculus::RateFunction;
use crate::scalar::{linspace, log_add_exp, norm, Scalar};

/// Which drift inequality a table is built for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LyapunovKind {
    /// `LV ≤ −½φ_Λ(V)` for a sub-linear rate φ.
    Subgeometric,
    /// `LV ≤ −V/(2Λ)`, the case φ(t) = t.
    Geometric,
}

/// Tabulated `V̄` on the profile grid up to the Λ truncation radius.
#[derive(Clone)]
pub struct LyapunovTable<T> {
    pub kind: LyapunovKind,
    pub profile: RadialProfile<T>,
    pub rate: RateFunction<T>,
    /// Matching radius; the drift inequality is checked for `|x − x₀| ≥ r₁`.
    pub r1: T,
    pub lambda_used: T,
    /// Relative size of the extrapolated tail in Λ, added to verification tolerances.
    pub tail_budget: T,
    /// Grid radii covered by the table.
    pub radii: Vec<T>,
    pub ln_vbar_nodes: Vec<T>,
    pub ln_vbar_mids: Vec<T>,
    pub ln_d1_nodes: Vec<T>,
    pub ln_d1_mids: Vec<T>,
    /// `V̄″/V̄′` at nodes and midpoints.
    pub ratio_nodes: Vec<T>,
    pub ratio_mids: Vec<T>,
}

/// `V̄` and its derivatives at one radius.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadialValues<T> {
    pub ln_vbar: T,
    pub ln_d1: T,
    pub ratio: T,
}

impl<T: Scalar> RadialValues<T> {
    pub fn vbar(&self) -> T {
        self.ln_vbar.exp()
    }

    pub fn d1(&self) -> T {
        self.ln_d1.exp()
    }

    pub fn d2(&self) -> T {
        self.ratio * self.ln_d1.exp()
    }
}

impl<T: Scalar> std::fmt::Debug for LyapunovTable<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LyapunovTable")
            .field("kind", &self.kind)
            .field("rate", &self.rate.label())
            .field("r1", &self.r1.as_f64())
            .field("lambda_used", &self.lambda_used.as_f64())
            .field("nodes", &self.radii.len())
            .finish()
    }
}

fn lagrange3<T: Scalar>(t: T, y0: T, ym: T, y1: T) -> T {
    let half = T::lit(0.5);
    let two = T::lit(2.0);
    y0 * two * (t - half) * (t - T::one()) - ym * T::lit(4.0) * t * (t - T::one()) + y1 * two * t * (t - half)
}

impl<T: Scalar> LyapunovTable<T> {
    pub fn r_max(&self) -> T {
        *self.radii.last().expect("tables have at least three nodes")
    }

    /// `(V̄, V̄′, V̄″)` at node `k`; entries overflow to infinity for large radii.
    pub fn node_values(&self, k: usize) -> (T, T, T) {
        let d1 = self.ln_d1_nodes[k].exp();
        (self.ln_vbar_nodes[k].exp(), d1, self.ratio_nodes[k] * d1)
    }

    /// Quadratic interpolation of the log-space table inside a grid segment.
    pub fn radial_at(&self, r: T) -> Result<RadialValues<T>> {
        let (lo, hi) = (self.radii[0], self.r_max());
        if !(r >= lo && r <= hi) {
            return Err(Error::Argument(format!(
                "radius {} is outside the table range [{}, {}]",
                r.as_f64(),
                lo.as_f64(),
                hi.as_f64()
            )));
        }
        let k = self.radii.partition_point(|&g| g <= r).clamp(1, self.radii.len() - 1) - 1;
        let h = self.radii[k + 1] - self.radii[k];
        let t = (r - self.radii[k]) / h;
        let ln_vbar = if k == 0 {
            // V̄ vanishes at the base radius, so interpolate plain values here
            let v = lagrange3(
                t,
                T::zero(),
                self.ln_vbar_mids[0].exp(),
                self.ln_vbar_nodes[1].exp(),
            );
            v.max(T::zero()).ln()
        } else {
            lagrange3(t, self.ln_vbar_nodes[k], self.ln_vbar_mids[k], self.ln_vbar_nodes[k + 1])
        };
        Ok(RadialValues {
            ln_vbar,
            ln_d1: lagrange3(t, self.ln_d1_nodes[k], self.ln_d1_mids[k], self.ln_d1_nodes[k + 1]),
            ratio: lagrange3(t, self.ratio_nodes[k], self.ratio_mids[k], self.ratio_nodes[k + 1]),
        })
    }

    /// Writes `r, vbar, vbar_d1, vbar_d2, ln_vbar, ln_vbar_d1` at the grid nodes.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "r,vbar,vbar_d1,vbar_d2,ln_vbar,ln_vbar_d1")?;
        for k in 0..self.radii.len() {
            let (v, d1, d2) = self.node_values(k);
            writeln!(
                out,
                "{},{},{},{},{},{}",
                self.radii[k].as_f64(),
                v.as_f64(),
                d1.as_f64(),
                d2.as_f64(),
                self.ln_vbar_nodes[k].as_f64(),
                self.ln_d1_nodes[k].as_f64()
            )?;
        }
        Ok(())
    }
}

fn build<T: Scalar>(
    kind: LyapunovKind,
    profile: &RadialProfile<T>,
    verdict: &LambdaVerdict<T>,
    rate: RateFunction<T>,
    r1: Option<T>,
) -> Result<LyapunovTable<T>> {
    if !verdict.finite {
        return Err(Error::Refused(format!(
            "Λ for {} is not finite (decay exponent {:.3})",
            verdict.rate_label,
            verdict.decay_exponent.as_f64()
        )));
    }
    if rate.label() != verdict.rate_label {
        return Err(Error::Argument(format!(
            "verdict was computed for {}, not {}",
            verdict.rate_label,
            rate.label()
        )));
    }
    let n = verdict.nodes_used;
    if profile.grid.len() < n || verdict.ln_j_nodes.len() != n {
        return Err(Error::Argument("verdict does not belong to this profile".into()));
    }
    let r0 = profile.base_radius;
    let r1 = r1.unwrap_or(r0 * T::lit(1.5));
    if !(r1 > r0) {
        return Err(Error::Argument(format!("r₁ = {} must exceed r₀ = {}", r1.as_f64(), r0.as_f64())));
    }
    let ln_lambda = verdict.value.ln();
    let grid = &profile.grid[..n];

    let ln_d1 = |i: T, ln_u: T| -i + ln_u - ln_lambda;
    let ratio = |iota: T, r: T, ln_g: T, ln_u: T| -iota / r - (ln_g - ln_u).exp();
    let ln_d1_nodes: Vec<T> = (0..n).map(|k| ln_d1(profile.i_vals[k], verdict.ln_upper_nodes[k])).collect();
    let ln_d1_mids: Vec<T> = (0..n - 1).map(|k| ln_d1(profile.i_mids[k], verdict.ln_upper_mids[k])).collect();
    let ratio_nodes: Vec<T> = (0..n)
        .map(|k| ratio(profile.iota_vals[k], grid[k], verdict.ln_integrand_nodes[k], verdict.ln_upper_nodes[k]))
        .collect();
    let ratio_mids: Vec<T> = (0..n - 1)
        .map(|k| {
            ratio(profile.iota_mids[k], profile.mids[k], verdict.ln_integrand_mids[k], verdict.ln_upper_mids[k])
        })
        .collect();

    let mut ln_vbar_nodes = Vec::with_capacity(n);
    let mut ln_vbar_mids = Vec::with_capacity(n - 1);
    let mut acc = T::neg_infinity();
    ln_vbar_nodes.push(acc);
    for k in 0..n - 1 {
        let h = grid[k + 1] - grid[k];
        let (a, m, b) = (ln_d1_nodes[k], ln_d1_mids[k], ln_d1_nodes[k + 1]);
        ln_vbar_mids.push(log_add_exp(acc, ln_half_left(h, a, m, b)));
        acc = log_add_exp(acc, ln_panel(h, a, m, b));
        ln_vbar_nodes.push(acc);
    }
    let bad = ln_d1_nodes
        .iter()
        .chain(&ratio_nodes)
        .chain(&ln_d1_mids)
        .chain(&ratio_mids)
        .any(|v| v.is_nan() || *v == T::infinity());
    if bad {
        return Err(Error::Divergence("the Lyapunov table has non-finite entries".into()));
    }
    if r1 >= grid[n - 1] {
        return Err(Error::Argument("r₁ lies beyond the tabulated range".into()));
    }
    let tail_budget = if verdict.tail_bound.is_finite() { verdict.tail_bound / verdict.value } else { T::zero() };
    Ok(LyapunovTable {
        kind,
        profile: profile.clone(),
        rate,
        r1,
        lambda_used: verdict.value,
        tail_budget,
        radii: grid.to_vec(),
        ln_vbar_nodes,
        ln_vbar_mids,
        ln_d1_nodes,
        ln_d1_mids,
        ratio_nodes,
        ratio_mids,
    })
}

/// Builds `V̄` for a sub-geometric rate φ; `r1` defaults to `1.5 r₀`.
pub fn build_subgeometric<T: Scalar>(
    profile: &RadialProfile<T>,
    verdict: &LambdaVerdict<T>,
    rate: &RateFunction<T>,
    r1: Option<T>,
) -> Result<LyapunovTable<T>> {
    build(LyapunovKind::Subgeometric, profile, verdict, rate.clone(), r1)
}

/// Builds `V̄` for φ(t) = t; the verdict must have been computed for the identity rate.
pub fn build_geometric<T: Scalar>(
    profile: &RadialProfile<T>,
    verdict: &LambdaVerdict<T>,
    r1: Option<T>,
) -> Result<LyapunovTable<T>> {
    build(LyapunovKind::Geometric, profile, verdict, RateFunction::identity(), r1)
}

/// Settings for [`verify_drift_inequality`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerifyOptions {
    pub tolerance: f64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self { tolerance: 1e-6 }
    }
}

/// Drift inequality check at sample points.
///
/// The violation at `x` is `(LV + ½φ_Λ(V)) / max(1, ½φ_Λ(V))`, i.e. measured
/// relative to the asserted decay once that exceeds one, because `V` itself
/// grows like `e^{−I}`.
#[derive(Debug, Clone, PartialEq)]
pub struct DriftReport<T> {
    pub max_violation: T,
    pub argmax: Vec<T>,
    pub violations: Vec<T>,
    pub tolerance: T,
    pub tail_budget: T,
    pub passed: bool,
    /// Largest `½⟨u, n u⟩/|u|² V̄″` over the points, for models with jumps.
    pub jump_term_max: Option<T>,
}

/// Checks `LV + ½φ_Λ(V) ≤ 0` (geometric kind: `LV + V/(2Λ) ≤ 0`) at points with
/// `|x − x₀| ≥ r₁`, where `LV = ½C V̄″ + V̄′(2A − C + 2B)/(2|x − x₀|)`.
///
/// For a table built on the jump second-moment profile `C` is replaced by
/// `C + ⟨u, n u⟩/|u|²`; the jump contribution is reported separately either way.
pub fn verify_drift_inequality<T: Scalar>(
    table: &LyapunovTable<T>,
    model: &CoefficientModel<T>,
    points: &[Vec<T>],
    opts: &VerifyOptions,
) -> Result<DriftReport<T>> {
    if points.is_empty() {
        return Err(Error::Argument("no sample points".into()));
    }
    let center = &table.profile.center;
    let ln_lambda = table.lambda_used.ln();
    let ln_two = T::lit(2.0).ln();
    let per_point: Vec<(T, Option<T>)> = points
        .par_iter()
        .map(|x| -> Result<(T, Option<T>)> {
            if x.len() != model.dim {
                return Err(Error::Argument(format!("points must have dimension {}", model.dim)));
            }
            let u: Vec<T> = x.iter().zip(center).map(|(&a, &b)| a - b).collect();
            let r = norm(&u);
            if r < table.r1 {
                return Err(Error::Argument(format!(
                    "point at radius {} lies inside r₁ = {}",
                    r.as_f64(),
                    table.r1.as_f64()
                )));
            }
            let rv = table.radial_at(r)?;
            let f = pointwise_functionals(model, center, x)?;
            let jump_form = jump_second_moment_form(model, center, x);
            let c_eff = match table.profile.kind {
                ProfileKind::Diffusion => f.c,
                ProfileKind::JumpSecondMoment => f.c + jump_form,
            };
            let ln_decay = table.rate.ln_eval_at_ln(log_add_exp(rv.ln_vbar, T::zero())) - ln_lambda - ln_two;
            let scale = ln_decay.max(T::zero());
            let core = T::lit(0.5) * c_eff * rv.ratio + f.numerator() / (T::lit(2.0) * r);
            let v = (rv.ln_d1 - scale).exp() * core + (ln_decay - scale).exp();
            let jump = model.jump.as_ref().map(|_| T::lit(0.5) * jump_form * rv.d2());
            Ok((v, jump))
        })
        .collect::<Result<_>>()?;

    let mut max_violation = T::neg_infinity();
    let mut arg = 0;
    for (k, (v, _)) in per_point.iter().enumerate() {
        if *v > max_violation || v.is_nan() {
            max_violation = *v;
            arg = k;
        }
    }
    let jump_term_max = per_point
        .iter()
        .filter_map(|p| p.1)
        .fold(None, |acc: Option<T>, v| Some(acc.map_or(v, |a| a.max(v))));
    let tolerance = T::lit(opts.tolerance);
    Ok(DriftReport {
        passed: max_violation <= tolerance + table.tail_budget,
        max_violation,
        argmax: points[arg].clone(),
        violations: per_point.into_iter().map(|p| p.0).collect(),
        tolerance,
        tail_budget: table.tail_budget,
        jump_term_max,
    })
}

/// Grid and tail settings for [`hitting_bound`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HittingOptions {
    /// Offset below the ball radius where `V̄` starts; defaults to `r₀/10`.
    pub eps: Option<f64>,
    /// Outer radius of the tabulation; at least `4|x − x₀|` is used.
    pub r_max: f64,
    pub step: f64,
    pub profile: ProfileOptions,
    /// Relative change allowed across the last upper-limit doublings.
    pub doubling_rel_change: f64,
}

impl Default for HittingOptions {
    fn default() -> Self {
        Self { eps: None, r_max: 40.0, step: 0.01, profile: ProfileOptions::default(), doubling_rel_change: 1e-8 }
    }
}

/// Upper bound on the probability of never entering the ball `B_{r₀}(x₀)`.
#[derive(Debug, Clone, PartialEq)]
pub struct HittingBound<T> {
    /// `V̄(|x − x₀|)/V̄(∞)`, or 0 when `V̄(∞)` is infinite.
    pub bound: T,
    pub vbar_at_x: T,
    /// Infinite when the tail test finds `∫ e^{−I}` divergent.
    pub vbar_infinity: T,
    pub recurrent: bool,
    pub decay_exponent: T,
}

/// `V̄(|x−x₀|)/V̄(∞)` with `V̄(r) = ∫_{r₀−ε}^r e^{−I}` and I based at `r₀ − ε`.
pub fn hitting_bound<T: Scalar>(
    model: &CoefficientModel<T>,
    x0: &[T],
    r0_ball: T,
    x: &[T],
    opts: &HittingOptions,
) -> Result<HittingBound<T>> {
    if x.len() != model.dim || x0.len() != model.dim {
        return Err(Error::Argument(format!("points must have dimension {}", model.dim)));
    }
    let u: Vec<T> = x.iter().zip(x0).map(|(&a, &b)| a - b).collect();
    let rx = norm(&u);
    if rx < r0_ball {
        return Err(Error::Argument(format!(
            "|x − x₀| = {} is inside the ball of radius {}",
            rx.as_f64(),
            r0_ball.as_f64()
        )));
    }
    let eps = opts.eps.map(T::lit).unwrap_or(r0_ball / T::lit(10.0));
    let base = r0_ball - eps;
    if !(eps > T::zero() && base > T::zero()) {
        return Err(Error::Argument("ε must lie in (0, r₀)".into()));
    }
    let r_max = T::lit(opts.r_max).max(rx * T::lit(4.0));
    let n = (((r_max - base) / T::lit(opts.step)).ceil().as_f64() as usize).max(8) + 1;
    let mut grid = linspace(base, r_max, n);
    // place |x − x₀| on a node so V̄ there needs no interpolation
    let kx = grid.partition_point(|&g| g < rx);
    if kx < n && (grid[kx] - rx).abs() > T::zero() {
        if kx > 0 && (rx - grid[kx - 1]) < (grid[kx] - rx) {
            grid[kx - 1] = rx;
        } else if kx < n - 1 {
            grid[kx] = rx;
        } else {
            grid[kx - 1] = rx;
        }
    }
    grid[0] = base;
    let grid_ok = grid.windows(2).all(|w| w[1] > w[0]);
    if !grid_ok {
        return Err(Error::Argument("grid step too coarse for the requested radii".into()));
    }
    let profile = radial_profile(model, x0, base, &grid, &opts.profile)?;

    let mut ln_cum = vec![T::neg_infinity(); n];
    for k in 0..n - 1 {
        let h = grid[k + 1] - grid[k];
        let seg = ln_panel(h, -profile.i_vals[k], -profile.i_mids[k], -profile.i_vals[k + 1]);
        ln_cum[k + 1] = log_add_exp(ln_cum[k], seg);
    }
    if ln_cum.iter().any(|v| v.is_nan()) {
        return Err(Error::NonFiniteIntegrand { abscissa: grid[ln_cum.iter().position(|v| v.is_nan()).unwrap_or(0)].as_f64() });
    }
    let kx = grid.partition_point(|&g| g < rx).min(n - 1);
    let ln_vx = ln_cum[kx];

    // tail test on e^{−I}
    let k0 = grid.partition_point(|&g| g < r_max / T::lit(10.0)).min(n - 3);
    let xs: Vec<T> = grid[k0..].iter().map(|r| r.ln()).collect();
    let ys: Vec<T> = profile.i_vals[k0..].iter().map(|&i| -i).collect();
    let decay_exponent = ls_slope(&xs, &ys);
    let at = |frac: f64| ln_cum[grid.partition_point(|&g| g <= r_max * T::lit(frac)).max(1) - 1].exp();
    let rel = T::lit(opts.doubling_rel_change);
    let settled = [at(0.125), at(0.25), at(0.5), at(1.0)]
        .windows(2)
        .all(|w| (w[1] - w[0]).abs() <= rel * w[1].abs());
    let finite = decay_exponent < T::lit(-1.1) && settled;
    let ln_tail = if decay_exponent < -T::one() {
        -profile.i_vals[n - 1] + r_max.ln() - (-decay_exponent - T::one()).ln()
    } else {
        T::infinity()
    };
    if finite {
        let ln_inf = log_add_exp(ln_cum[n - 1], ln_tail);
        if ln_inf == T::neg_infinity() {
            return Err(Error::Domain("V̄(∞) vanishes".into()));
        }
        Ok(HittingBound {
            bound: (ln_vx - ln_inf).exp(),
            vbar_at_x: ln_vx.exp(),
            vbar_infinity: ln_inf.exp(),
            recurrent: false,
            decay_exponent,
        })
    } else {
        Ok(HittingBound {
            bound: T::zero(),
            vbar_at_x: ln_vx.exp(),
            vbar_infinity: T::infinity(),
            recurrent: true,
            decay_exponent,
        })
    }
}
