use std::fmt;
use std::sync::Arc;

use super::family::Family;
use super::ScalarFn;
use crate::error::{Error, Result};
use crate::quadrature::{integrate, QuadOptions};
use crate::roots::bracketed_root;
use crate::scalar::Scalar;

/// Upper limit of the Ψ integral.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Kappa<T> {
    Finite(T),
    Infinite,
}

impl<T: Scalar> fmt::Display for Kappa<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Kappa::Finite(k) => write!(f, "{k}"),
            Kappa::Infinite => f.write_str("inf"),
        }
    }
}

/// Distance modulus `f`, contraction profile `ψ`, threshold `γ` and rate `Γ`
/// of a one-sided flatness condition.
///
/// `f` only needs to be differentiable almost everywhere; without an explicit
/// derivative a right-hand difference quotient is used, so any check built on
/// `f′` holds a.e. only.
#[derive(Clone)]
pub struct ModulusPair<T> {
    f: ScalarFn<T>,
    f_deriv: Option<ScalarFn<T>>,
    psi: ScalarFn<T>,
    f_label: String,
    psi_label: String,
    pub gamma_threshold: T,
    pub contraction_const: T,
}

impl<T> fmt::Debug for ModulusPair<T>
where
    T: fmt::Debug,
{
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ModulusPair")
            .field("f", &self.f_label)
            .field("psi", &self.psi_label)
            .field("gamma_threshold", &self.gamma_threshold)
            .field("contraction_const", &self.contraction_const)
            .finish()
    }
}

// Doubling and halving budget for bracket searches.
const MAX_DOUBLINGS: usize = 200;
// Ψ_∞ is declared finite after this many small consecutive doubling increments.
const TAIL_STABLE_STEPS: usize = 3;
const TAIL_REL_CHANGE: f64 = 1e-10;

impl<T: Scalar> ModulusPair<T> {
    pub fn new(
        f: impl Fn(T) -> T + Send + Sync + 'static,
        psi: impl Fn(T) -> T + Send + Sync + 'static,
        gamma_threshold: T,
        contraction_const: T,
    ) -> Result<Self> {
        if !(gamma_threshold > T::zero() && contraction_const > T::zero()) {
            return Err(Error::Argument("γ and Γ must be positive".into()));
        }
        Ok(Self {
            f: Arc::new(f),
            f_deriv: None,
            psi: Arc::new(psi),
            f_label: "custom".into(),
            psi_label: "custom".into(),
            gamma_threshold,
            contraction_const,
        })
    }

    pub fn with_f_derivative(mut self, d: impl Fn(T) -> T + Send + Sync + 'static) -> Self {
        self.f_deriv = Some(Arc::new(d));
        self
    }

    pub fn with_labels(mut self, f: impl Into<String>, psi: impl Into<String>) -> Self {
        self.f_label = f.into();
        self.psi_label = psi.into();
        self
    }

    /// Builds the pair from named families (see [`Family`]).
    pub fn from_families(f: Family, psi: Family, gamma_threshold: T, contraction_const: T) -> Result<Self> {
        let (fv, fd): (ScalarFn<T>, ScalarFn<T>) = match f {
            Family::Power(a) if a > 0.0 && a <= 1.0 => {
                let a = T::lit(a);
                (
                    Arc::new(move |t: T| if t > T::zero() { t.powf(a) } else { T::zero() }),
                    Arc::new(move |t: T| a * t.powf(a - T::one())),
                )
            }
            Family::Power(a) => {
                return Err(Error::Argument(format!("modulus f = t^{a} needs exponent in (0, 1]")))
            }
            Family::Log => (
                Arc::new(|t: T| t.ln_1p()),
                Arc::new(|t: T| (T::one() + t).recip()),
            ),
            Family::Identity => (Arc::new(|t: T| t), Arc::new(|_| T::one())),
            Family::Indicator => (
                Arc::new(|t: T| if t > T::zero() { T::one() } else { T::zero() }),
                Arc::new(|_| T::zero()),
            ),
        };
        let pv: ScalarFn<T> = match psi {
            Family::Power(a) if a >= 1.0 => {
                let a = T::lit(a);
                Arc::new(move |s: T| s.abs().powf(a))
            }
            Family::Power(a) => {
                return Err(Error::Argument(format!(
                    "ψ(s) = s^{a} is not convex; exponent must be at least 1"
                )))
            }
            Family::Log => Arc::new(|s: T| s * s.ln_1p()),
            Family::Identity => Arc::new(|s: T| s),
            Family::Indicator => {
                return Err(Error::Argument("the indicator family cannot serve as ψ".into()))
            }
        };
        let mut pair = Self::new(move |t| fv(t), move |s| pv(s), gamma_threshold, contraction_const)?;
        pair.f_deriv = Some(fd);
        pair.f_label = f.to_string();
        pair.psi_label = psi.to_string();
        Ok(pair)
    }

    pub fn f_label(&self) -> &str {
        &self.f_label
    }

    pub fn psi_label(&self) -> &str {
        &self.psi_label
    }

    #[inline]
    pub fn f(&self, t: T) -> T {
        (self.f)(t)
    }

    /// `f′(t)`, or the right-hand difference quotient when no derivative was given.
    pub fn f_deriv(&self, t: T) -> T {
        match &self.f_deriv {
            Some(d) => d(t),
            None => {
                let h = T::epsilon().sqrt() * T::one().max(t.abs());
                (self.f(t + h) - self.f(t)) / h
            }
        }
    }

    #[inline]
    pub fn psi(&self, s: T) -> T {
        (self.psi)(s)
    }

    /// Checks the structural hypotheses on a sorted grid starting at 0.
    ///
    /// ψ must be convex; non-convex profiles are rejected because the
    /// comparison bound is only established for convex ψ.
    pub fn validate(&self, grid: &[T], tol: T) -> Result<()> {
        if grid.first() != Some(&T::zero()) {
            return Err(Error::Argument("validation grid must start at 0".into()));
        }
        if self.f(T::zero()) != T::zero() || self.psi(T::zero()) != T::zero() {
            return Err(Error::Domain("f and ψ must vanish at 0".into()));
        }
        let fv: Vec<T> = grid.iter().map(|&t| self.f(t)).collect();
        let pv: Vec<T> = grid.iter().map(|&t| self.psi(t)).collect();
        for i in 1..grid.len() {
            if !(fv[i] > T::zero()) || !(pv[i] > T::zero()) {
                return Err(Error::Domain(format!(
                    "f and ψ must be positive away from 0 (t = {})",
                    grid[i].as_f64()
                )));
            }
            if fv[i] - fv[i - 1] < -tol {
                return Err(Error::Domain(format!("f decreases near t = {}", grid[i].as_f64())));
            }
        }
        for i in 1..grid.len().saturating_sub(1) {
            let h0 = grid[i] - grid[i - 1];
            let h1 = grid[i + 1] - grid[i];
            let fs = (fv[i + 1] - fv[i]) / h1 - (fv[i] - fv[i - 1]) / h0;
            let ps = (pv[i + 1] - pv[i]) / h1 - (pv[i] - pv[i - 1]) / h0;
            // the indicator modulus is concave on (0, ∞) but jumps at 0
            if i > 1 && fs > tol {
                return Err(Error::Domain(format!("f is not concave near t = {}", grid[i].as_f64())));
            }
            if ps < -tol {
                return Err(Error::Domain(format!("ψ is not convex near t = {}", grid[i].as_f64())));
            }
        }
        Ok(())
    }

    fn inv_psi_integral(&self, a: T, b: T) -> Result<T> {
        let opts = QuadOptions::default();
        Ok(integrate(|s| self.psi(s).recip(), a, b, &opts)?.value)
    }

    /// `∫_a^b ds/ψ(s)` split into geometric pieces so each panel spans at most a factor 2.
    fn inv_psi_geometric(&self, a: T, b: T) -> Result<T> {
        let two = T::lit(2.0);
        let mut total = T::zero();
        let mut lo = a;
        while lo < b {
            let hi = (lo * two).min(b);
            total = total + self.inv_psi_integral(lo, hi)?;
            lo = hi;
        }
        Ok(total)
    }

    /// Ψ_κ(t) = ∫ₜ^κ ds/ψ(s) for `0 < t ≤ κ`.
    pub fn psi_big(&self, kappa: T, t: T) -> Result<T> {
        if !(t > T::zero() && t <= kappa && kappa.is_finite()) {
            return Err(Error::Domain(format!(
                "Ψ_κ(t) needs 0 < t ≤ κ < ∞, got t = {}, κ = {}",
                t.as_f64(),
                kappa.as_f64()
            )));
        }
        self.inv_psi_geometric(t, kappa)
    }

    /// Ψ_∞(t) = ∫ₜ^∞ ds/ψ(s), established by upper-limit doubling.
    ///
    /// The tail counts as finite once three consecutive doublings change the
    /// integral by less than `1e-10·max(1, Ψ)` and the local decay exponent of
    /// `1/ψ` is below −1; the remaining tail is then extrapolated from that
    /// exponent. Otherwise a divergence error is returned.
    pub fn psi_big_infinite(&self, t: T) -> Result<T> {
        if !(t > T::zero() && t.is_finite()) {
            return Err(Error::Domain(format!("Ψ_∞(t) needs t > 0, got {}", t.as_f64())));
        }
        let two = T::lit(2.0);
        let tol = T::lit(TAIL_REL_CHANGE);
        let mut upper = t.max(T::one()) * two;
        let mut total = self.inv_psi_geometric(t, upper)?;
        let mut stable = 0;
        for _ in 0..MAX_DOUBLINGS {
            let next = upper * two;
            if !next.is_finite() {
                break;
            }
            let inc = self.inv_psi_integral(upper, next)?;
            total = total + inc;
            let g0 = self.psi(upper).recip();
            let g1 = self.psi(next).recip();
            let exponent = (g1 / g0).ln() / two.ln();
            upper = next;
            if inc < tol * T::one().max(total) && exponent < -T::one() {
                stable += 1;
                if stable >= TAIL_STABLE_STEPS {
                    let tail = g1 * upper / (-exponent - T::one());
                    return Ok(total + tail);
                }
            } else {
                stable = 0;
            }
        }
        Err(Error::Divergence(format!(
            "∫ ds/ψ(s) from {} to ∞ did not settle; last partial value {} at upper limit {}",
            t.as_f64(),
            total.as_f64(),
            upper.as_f64()
        )))
    }

    /// Ψ_κ⁻¹(u) for `u ≥ 0`; the result lies in `(0, κ]`.
    pub fn psi_big_inv(&self, kappa: Kappa<T>, u: T) -> Result<T> {
        if !(u >= T::zero()) {
            return Err(Error::Domain(format!("Ψ⁻¹ needs u ≥ 0, got {}", u.as_f64())));
        }
        match kappa {
            Kappa::Finite(k) => {
                if !(k > T::zero() && k.is_finite()) {
                    return Err(Error::Domain(format!("κ must be positive, got {}", k.as_f64())));
                }
                if u == T::zero() {
                    return Ok(k);
                }
                self.invert_from(k, T::zero(), u)
            }
            Kappa::Infinite => {
                if u == T::zero() {
                    return Ok(T::infinity());
                }
                let reference = T::one();
                let at_ref = self.psi_big_infinite(reference)?;
                if u <= at_ref {
                    // solve ∫₁ᵗ ds/ψ = at_ref − u for t ≥ 1
                    let target = at_ref - u;
                    if target == T::zero() {
                        return Ok(reference);
                    }
                    let two = T::lit(2.0);
                    let mut a = reference;
                    let mut acc = T::zero();
                    for _ in 0..MAX_DOUBLINGS {
                        let b = a * two;
                        let seg = self.inv_psi_integral(a, b)?;
                        if acc + seg >= target {
                            let base = acc;
                            return bracketed_root(
                                |t| Ok(base + self.inv_psi_integral(a, t)? - target),
                                a,
                                b,
                                Some(|t| self.psi(t).recip()),
                            );
                        }
                        acc = acc + seg;
                        a = b;
                    }
                    Err(Error::Range { target: u.as_f64(), max_reachable: at_ref.as_f64() })
                } else {
                    self.invert_from(reference, at_ref, u)
                }
            }
        }
    }

    /// Solves `base + ∫ₜ^top ds/ψ = u` for `t ≤ top`, halving downwards.
    fn invert_from(&self, top: T, base: T, u: T) -> Result<T> {
        let half = T::lit(0.5);
        let mut b = top;
        let mut acc = base;
        for _ in 0..4 * MAX_DOUBLINGS {
            let a = b * half;
            if !(a > T::zero()) {
                break;
            }
            let seg = self.inv_psi_integral(a, b)?;
            if acc + seg >= u {
                let upper_acc = acc;
                let hi = b;
                // residual u − Ψ(t) is increasing in t
                return bracketed_root(
                    |t| Ok(u - upper_acc - self.inv_psi_integral(t, hi)?),
                    a,
                    b,
                    Some(|t| self.psi(t).recip()),
                );
            }
            acc = acc + seg;
            b = a;
        }
        Err(Error::Range { target: u.as_f64(), max_reachable: acc.as_f64() })
    }

    /// `sup{s : f(s) ≤ γ}`, infinite when `f` never exceeds γ.
    pub fn threshold_radius(&self) -> T {
        let g = self.gamma_threshold;
        let two = T::lit(2.0);
        let mut hi = T::one();
        let mut guard = 0;
        while self.f(hi) <= g {
            hi = hi * two;
            guard += 1;
            if guard > MAX_DOUBLINGS || !hi.is_finite() {
                return T::infinity();
            }
        }
        let mut lo = T::zero();
        for _ in 0..200 {
            let mid = (lo + hi) / two;
            if mid <= lo || mid >= hi {
                break;
            }
            if self.f(mid) <= g {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    }

    /// Chaining multiplier `⌈δ|x − y|⌉` with `δ = inf{t > 0 : f(1/t) ≤ γ}`.
    pub fn chaining_factor(&self, distance: T) -> Result<T> {
        let s = self.threshold_radius();
        if s == T::zero() {
            return Err(Error::Refused(
                "f exceeds γ arbitrarily close to 0, so no chaining step exists".into(),
            ));
        }
        let delta = s.recip();
        Ok((delta * distance).ceil())
    }
}
