use super::lambda::{lambda_constant, LambdaOptions, LambdaVerdict};
use super::model::CoefficientModel;
use super::profile::{pointwise_functionals, radial_profile, ProfileOptions};
use super::sphere::{sphere_extrema, sphere_points, SphereOptions};
use crate::error::{Error, Result};
use crate::rate_calculus::RateFunction;
use crate::scalar::{linspace, Scalar};

/// Sampling for the classical polynomial drift test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassicalOptions {
    pub r_max: f64,
    pub points_per_unit: usize,
    pub sphere: SphereOptions,
}

impl Default for ClassicalOptions {
    fn default() -> Self {
        Self { r_max: 50.0, points_per_unit: 200, sphere: SphereOptions::default() }
    }
}

/// Outcome of testing `A − (1 − γ/2)C₀ + B₀ ≤ −Γ|x|^{γα−γ+2}` on `|x| ≥ r₀`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassicalVerdict<T> {
    pub feasible: bool,
    /// Largest sampled value of the left side minus the right side.
    pub worst_margin: T,
    pub worst_radius: T,
    /// Interior local maxima of the margin where it is positive, refined.
    pub violation_peaks: Vec<T>,
    pub exponent: T,
    pub samples: usize,
}

struct MarginCurve<'a, T: Scalar> {
    model: &'a CoefficientModel<T>,
    dirs: Vec<Vec<T>>,
    sphere: SphereOptions,
    one_minus_half_gamma: T,
    exponent: T,
}

impl<T: Scalar> MarginCurve<'_, T> {
    /// `sup_{|x| = r} (A − (1 − γ/2)C₀ + B₀)`.
    fn radial_sup(&self, r: T) -> T {
        let origin = vec![T::zero(); self.model.dim];
        let (_, hi) = sphere_extrema(
            self.model.dim,
            &self.dirs,
            |u: &[T]| {
                let x: Vec<T> = u.iter().map(|&v| v * r).collect();
                match pointwise_functionals(self.model, &origin, &x) {
                    Ok(f) => f.a - self.one_minus_half_gamma * f.c + f.b,
                    Err(_) => T::nan(),
                }
            },
            &self.sphere,
        );
        hi.value
    }
}

fn validate_params<T: Scalar>(alpha: T, gamma_exp: T) -> Result<()> {
    if !(alpha > T::zero() && alpha < T::one()) {
        return Err(Error::Argument(format!("α must lie in (0, 1), got {}", alpha.as_f64())));
    }
    if !(gamma_exp > T::zero()) {
        return Err(Error::Argument(format!("γ must be positive, got {}", gamma_exp.as_f64())));
    }
    Ok(())
}

fn curve<'a, T: Scalar>(
    model: &'a CoefficientModel<T>,
    alpha: T,
    gamma_exp: T,
    opts: &ClassicalOptions,
) -> MarginCurve<'a, T> {
    let samples = if model.dim == 1 { 2 } else { opts.sphere.samples };
    MarginCurve {
        model,
        dirs: sphere_points(model.dim, samples),
        sphere: opts.sphere,
        one_minus_half_gamma: T::one() - gamma_exp / T::lit(2.0),
        exponent: gamma_exp * alpha - gamma_exp + T::lit(2.0),
    }
}

fn radii<T: Scalar>(r0: T, opts: &ClassicalOptions) -> Vec<T> {
    let start = if r0 > T::zero() { r0 } else { T::lit(opts.r_max * 1e-6) };
    let span = (opts.r_max - start.as_f64()).max(0.0);
    let n = ((span * opts.points_per_unit as f64).ceil() as usize).max(2) + 1;
    linspace(start, T::lit(opts.r_max), n)
}

/// Tests the classical polynomial drift condition with centre 0 on a dense radial grid.
pub fn check_subgeo_classical<T: Scalar>(
    model: &CoefficientModel<T>,
    alpha: T,
    gamma_exp: T,
    big_gamma: T,
    r0: T,
    opts: &ClassicalOptions,
) -> Result<ClassicalVerdict<T>> {
    validate_params(alpha, gamma_exp)?;
    if !(big_gamma > T::zero()) {
        return Err(Error::Argument(format!("Γ must be positive, got {}", big_gamma.as_f64())));
    }
    let mc = curve(model, alpha, gamma_exp, opts);
    let margin = |r: T| mc.radial_sup(r) + big_gamma * r.powf(mc.exponent);
    let rs = radii(r0, opts);
    let vals: Vec<T> = rs.iter().map(|&r| margin(r)).collect();

    let (mut worst_margin, mut worst_radius) = (T::neg_infinity(), rs[0]);
    for (&r, &v) in rs.iter().zip(&vals) {
        if v > worst_margin || v.is_nan() {
            worst_margin = v;
            worst_radius = r;
        }
    }
    let mut violation_peaks = Vec::new();
    for k in 1..rs.len() - 1 {
        if vals[k] > T::zero() && vals[k] >= vals[k - 1] && vals[k] > vals[k + 1] {
            violation_peaks.push(golden_max(&margin, rs[k - 1], rs[k + 1]));
        }
    }
    Ok(ClassicalVerdict {
        feasible: worst_margin <= T::zero(),
        worst_margin,
        worst_radius,
        violation_peaks,
        exponent: mc.exponent,
        samples: rs.len(),
    })
}

/// The largest Γ for which the sampled condition holds, or `None` if none does.
pub fn max_feasible_gamma<T: Scalar>(
    model: &CoefficientModel<T>,
    alpha: T,
    gamma_exp: T,
    r0: T,
    opts: &ClassicalOptions,
) -> Result<Option<T>> {
    validate_params(alpha, gamma_exp)?;
    let mc = curve(model, alpha, gamma_exp, opts);
    let mut best = T::infinity();
    for r in radii(r0, opts) {
        best = best.min(-mc.radial_sup(r) / r.powf(mc.exponent));
    }
    Ok(if best > T::zero() { Some(best) } else { None })
}

/// Golden-section search for a maximiser of a unimodal `f` on `[a, b]`.
pub(crate) fn golden_max<T: Scalar, F: Fn(T) -> T>(f: &F, mut a: T, mut b: T) -> T {
    let inv_phi = T::lit((5f64.sqrt() - 1.0) / 2.0);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..80 {
        if (b - a).abs() <= T::epsilon().sqrt() * T::one().max(a.abs()) {
            break;
        }
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    (a + b) / T::lit(2.0)
}

/// Options for [`check_p1_implication`].
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct P1Options {
    pub classical: ClassicalOptions,
    pub profile: ProfileOptions,
    pub lambda: LambdaOptions,
}

/// The classical condition and the integral test, side by side.
#[derive(Debug, Clone, PartialEq)]
pub struct P1Verdict<T> {
    pub classical: ClassicalVerdict<T>,
    /// Sampled range of `C₀` over `r₀ ≤ |x| ≤ r_max`.
    pub c0_range: (T, T),
    pub c0_bounds_hold: bool,
    pub lambda: LambdaVerdict<T>,
    /// The classical condition fails while Λ is finite.
    pub generality_gap: bool,
    /// False only if the classical condition holds and Λ is not finite.
    pub consistent: bool,
}

/// Checks that the classical condition implies `Λ < ∞` for `φ(t) = t^α`.
///
/// Refuses when `γ ≥ 2/(1 − α)`, where the implication is not available.
#[allow(clippy::too_many_arguments)]
pub fn check_p1_implication<T: Scalar>(
    model: &CoefficientModel<T>,
    alpha: T,
    gamma_exp: T,
    big_gamma: T,
    r0: T,
    delta_bound: T,
    grid: &[T],
    opts: &P1Options,
) -> Result<P1Verdict<T>> {
    validate_params(alpha, gamma_exp)?;
    let limit = T::lit(2.0) / (T::one() - alpha);
    if gamma_exp >= limit {
        return Err(Error::Hypothesis(format!(
            "γ = {} is not below 2/(1 − α) = {}",
            gamma_exp.as_f64(),
            limit.as_f64()
        )));
    }
    if !(delta_bound >= T::one()) {
        return Err(Error::Argument("the ellipticity bound Δ must be at least 1".into()));
    }
    let classical = check_subgeo_classical(model, alpha, gamma_exp, big_gamma, r0, &opts.classical)?;

    let origin = vec![T::zero(); model.dim];
    let dirs = sphere_points::<T>(model.dim, if model.dim == 1 { 2 } else { opts.classical.sphere.samples });
    let mut c0_range = (T::infinity(), T::neg_infinity());
    for &r in grid {
        for u in &dirs {
            let x: Vec<T> = u.iter().map(|&v| v * r).collect();
            let c = pointwise_functionals(model, &origin, &x)?.c;
            c0_range = (c0_range.0.min(c), c0_range.1.max(c));
        }
    }
    let c0_bounds_hold = c0_range.0 >= delta_bound.recip() && c0_range.1 <= delta_bound;

    let profile = radial_profile(model, &origin, r0, grid, &opts.profile)?;
    let rate = RateFunction::power(alpha)?;
    let r_max = *grid.last().expect("grid checked non-empty by the profile");
    let lambda = lambda_constant(&profile, &rate, r_max, &opts.lambda)?;
    Ok(P1Verdict {
        generality_gap: !classical.feasible && lambda.finite,
        consistent: !classical.feasible || !c0_bounds_hold || lambda.finite,
        classical,
        c0_range,
        c0_bounds_hold,
        lambda,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ou_threshold_is_one_half() {
        let m = CoefficientModel::<f64>::ou(1.0, 1.0, 1).unwrap();
        let opts = ClassicalOptions { r_max: 20.0, ..Default::default() };
        let g = max_feasible_gamma(&m, 0.5, 2.0, 1.0, &opts).unwrap().unwrap();
        assert!((g - 0.5).abs() < 1e-12);
        assert!(check_subgeo_classical(&m, 0.5, 2.0, 0.4, 1.0, &opts).unwrap().feasible);
        assert!(!check_subgeo_classical(&m, 0.5, 2.0, 0.6, 1.0, &opts).unwrap().feasible);
    }

    #[test]
    fn brownian_motion_is_infeasible() {
        let m = CoefficientModel::<f64>::ou(0.0, 1.0, 1).unwrap();
        let opts = ClassicalOptions { r_max: 10.0, ..Default::default() };
        for g in [0.5, 1.0, 2.0] {
            assert!(!check_subgeo_classical(&m, 0.5, g, 0.01, 1.0, &opts).unwrap().feasible);
        }
        assert!(max_feasible_gamma(&m, 0.5, 1.0, 1.0, &opts).unwrap().is_none());
    }

    #[test]
    fn golden_section() {
        let x = golden_max(&|t: f64| -(t - 0.3).powi(2), 0.0, 1.0);
        assert!((x - 0.3).abs() < 1e-7);
    }

    #[test]
    fn p1_refuses_large_gamma() {
        let m = CoefficientModel::<f64>::ou(1.0, 1.0, 1).unwrap();
        let grid = linspace(1.0, 10.0, 11);
        let r = check_p1_implication(&m, 0.5, 4.0, 0.1, 1.0, 1.0, &grid, &P1Options::default());
        assert!(matches!(r, Err(Error::Hypothesis(_))));
    }
}
