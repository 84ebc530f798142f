use super::classical::golden_max;
use crate::error::{Error, Result};
use crate::quadrature::{integrate, integrate_to_infinity, QuadOptions};
use crate::scalar::{linspace, Scalar};

/// Grid settings for [`sub_sufficient`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SufficientOptions {
    pub r_max: f64,
    pub grid_n: usize,
    /// `sup ρ` when ρ is known to be bounded.
    pub rho_sup: Option<f64>,
    pub quad: QuadOptions,
}

impl Default for SufficientOptions {
    fn default() -> Self {
        Self {
            r_max: 50.0,
            grid_n: 501,
            rho_sup: None,
            quad: QuadOptions { abs_tol: 1e-14, rel_tol: 1e-11, max_intervals: 2000 },
        }
    }
}

/// Which bound of the integration-by-parts estimate was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SufficientClause {
    /// β > 0: `Δ(1+β)/β · ρ(G(r) + c)^{−β}`.
    Power,
    /// β = 0: `Δ + Δ ln(ρ(G(∞) + c)/ρ(G(r) + c))`.
    Logarithmic,
}

/// Δ and the resulting bound on `∫_r^∞ ρ(G(u) + c) f(u) du` with `G = ∫_{r₀} g`.
#[derive(Debug, Clone, PartialEq)]
pub struct SufficientBound<T> {
    pub delta: T,
    pub argsup: T,
    pub clause: SufficientClause,
    pub radii: Vec<T>,
    pub bound: Vec<T>,
}

/// Computes `Δ = sup_{r ≥ r₀} ρ(G(r) + c)^{1+β} ∫_r^∞ f` and the bound curve.
///
/// For β = 0 either `∫_{r₀}^∞ g` must be finite or `rho_sup` must be given.
#[allow(clippy::too_many_arguments)]
pub fn sub_sufficient<T, R, F, G>(
    rho: R,
    f_tail: F,
    g: G,
    c: T,
    beta: T,
    r0: T,
    opts: &SufficientOptions,
) -> Result<SufficientBound<T>>
where
    T: Scalar,
    R: Fn(T) -> T,
    F: Fn(T) -> T,
    G: Fn(T) -> T,
{
    if !(c >= T::zero() && beta >= T::zero()) {
        return Err(Error::Argument("c and β must be non-negative".into()));
    }
    let r_max = T::lit(opts.r_max);
    if !(r_max > r0) || opts.grid_n < 3 {
        return Err(Error::Argument("need r_max > r₀ and at least three grid points".into()));
    }
    let radii = linspace(r0, r_max, opts.grid_n);
    let q = &opts.quad;

    // G at the nodes and ∫_r^∞ f at the nodes
    let mut big_g = vec![T::zero(); radii.len()];
    for k in 1..radii.len() {
        big_g[k] = big_g[k - 1] + integrate(&g, radii[k - 1], radii[k], q)?.value;
    }
    let mut tail = vec![T::zero(); radii.len()];
    let last = radii.len() - 1;
    tail[last] = integrate_to_infinity(&f_tail, radii[last], q)?.value;
    for k in (0..last).rev() {
        tail[k] = tail[k + 1] + integrate(&f_tail, radii[k], radii[k + 1], q)?.value;
    }

    let one_beta = T::one() + beta;
    let objective_at = |k: usize| rho(big_g[k] + c).powf(one_beta) * tail[k];
    let mut best = (T::neg_infinity(), 0usize);
    for k in 0..radii.len() {
        let v = objective_at(k);
        if !v.is_finite() {
            return Err(Error::NonFiniteIntegrand { abscissa: radii[k].as_f64() });
        }
        if v > best.0 {
            best = (v, k);
        }
    }
    // refine the supremum inside the neighbouring cells
    let k = best.1;
    let (lo, hi) = (k.saturating_sub(1), (k + 1).min(last));
    let objective = |r: T| -> T {
        let gk = big_g[lo] + integrate(&g, radii[lo], r, q).map(|x| x.value).unwrap_or(T::nan());
        let tk = tail[lo] - integrate(&f_tail, radii[lo], r, q).map(|x| x.value).unwrap_or(T::nan());
        rho(gk + c).powf(one_beta) * tk
    };
    let (mut delta, mut argsup) = (best.0, radii[k]);
    if hi > lo && best.0 > T::zero() {
        let r = golden_max(&objective, radii[lo], radii[hi]);
        let v = objective(r);
        if v > delta {
            delta = v;
            argsup = r;
        }
    }

    let (clause, bound) = if beta > T::zero() {
        let factor = delta * one_beta / beta;
        let b = big_g
            .iter()
            .map(|&gv| {
                let rv = rho(gv + c);
                if delta == T::zero() {
                    T::zero()
                } else {
                    factor * rv.powf(-beta)
                }
            })
            .collect();
        (SufficientClause::Power, b)
    } else {
        let g_inf = integrate_to_infinity(&g, r0, q).ok().filter(|x| x.converged && x.value.is_finite());
        let rho_inf = match (g_inf, opts.rho_sup) {
            (Some(gi), _) => rho(gi.value + c),
            (None, Some(s)) => T::lit(s),
            (None, None) => {
                return Err(Error::Hypothesis(
                    "β = 0 needs either a finite ∫g or a bounded ρ".into(),
                ))
            }
        };
        let b = big_g
            .iter()
            .map(|&gv| {
                if delta == T::zero() {
                    T::zero()
                } else {
                    delta + delta * (rho_inf / rho(gv + c)).ln()
                }
            })
            .collect();
        (SufficientClause::Logarithmic, b)
    };
    Ok(SufficientBound { delta, argsup, clause, radii, bound })
}
