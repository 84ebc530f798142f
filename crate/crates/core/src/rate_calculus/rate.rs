use std::fmt;
use std::sync::Arc;

use super::family::Family;
use super::ScalarFn;
use crate::error::{Error, Result};
use crate::quadrature::{integrate, QuadOptions};
use crate::roots::bracketed_root;
use crate::scalar::Scalar;

/// A total-variation rate generator φ on `[1, ∞)`: positive, non-decreasing
/// and concave.
///
/// The optional log-log form `s ↦ ln φ(e^s)` lets callers evaluate φ at
/// arguments whose magnitude does not fit the scalar type, which happens when
/// φ is applied to the exponentially growing inner integral of the drift test.
#[derive(Clone)]
pub struct RateFunction<T> {
    eval: ScalarFn<T>,
    deriv: Option<ScalarFn<T>>,
    ln_at_ln: Option<ScalarFn<T>>,
    label: String,
}

impl<T> fmt::Debug for RateFunction<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RateFunction").field("label", &self.label).finish()
    }
}

impl<T: Scalar> RateFunction<T> {
    pub fn new(label: impl Into<String>, eval: impl Fn(T) -> T + Send + Sync + 'static) -> Self {
        Self {
            eval: Arc::new(eval),
            deriv: None,
            ln_at_ln: None,
            label: label.into(),
        }
    }

    pub fn with_derivative(mut self, deriv: impl Fn(T) -> T + Send + Sync + 'static) -> Self {
        self.deriv = Some(Arc::new(deriv));
        self
    }

    /// Supplies `s ↦ ln φ(e^s)`.
    pub fn with_log_form(mut self, ln_at_ln: impl Fn(T) -> T + Send + Sync + 'static) -> Self {
        self.ln_at_ln = Some(Arc::new(ln_at_ln));
        self
    }

    /// φ(t) = t^α.
    pub fn power(alpha: T) -> Result<Self> {
        if !(alpha >= T::zero() && alpha <= T::one()) {
            return Err(Error::Argument(format!(
                "power rate needs exponent in [0, 1], got {}",
                alpha.as_f64()
            )));
        }
        Ok(Self::new(format!("power({})", alpha), move |t: T| t.powf(alpha))
            .with_derivative(move |t: T| alpha * t.powf(alpha - T::one()))
            .with_log_form(move |s: T| alpha * s))
    }

    /// φ(t) = 1 + ln t.
    pub fn log() -> Self {
        Self::new("log", |t: T| T::one() + t.ln())
            .with_derivative(|t: T| t.recip())
            .with_log_form(|s: T| s.ln_1p())
    }

    /// φ(t) = t, the geometric borderline.
    pub fn identity() -> Self {
        Self::new("identity", |t: T| t)
            .with_derivative(|_| T::one())
            .with_log_form(|s: T| s)
    }

    pub fn from_family(family: Family) -> Result<Self> {
        match family {
            Family::Power(a) => Self::power(T::lit(a)),
            Family::Log => Ok(Self::log()),
            Family::Identity => Ok(Self::identity()),
            Family::Indicator => Err(Error::Argument(
                "the indicator family is a modulus, not a rate".into(),
            )),
        }
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    #[inline]
    pub fn eval(&self, t: T) -> T {
        (self.eval)(t)
    }

    /// φ′(t); falls back to a right-hand difference quotient.
    pub fn derivative(&self, t: T) -> T {
        match &self.deriv {
            Some(d) => d(t),
            None => {
                let h = T::epsilon().sqrt() * T::one().max(t.abs());
                (self.eval(t + h) - self.eval(t)) / h
            }
        }
    }

    pub fn has_derivative(&self) -> bool {
        self.deriv.is_some()
    }

    /// `ln φ(e^s)`.
    pub fn ln_eval_at_ln(&self, s: T) -> T {
        match &self.ln_at_ln {
            Some(g) => g(s),
            None => self.eval(s.exp()).ln(),
        }
    }

    /// Checks positivity, monotonicity and concavity on `grid` (sorted, ≥ 1).
    pub fn validate(&self, grid: &[T], tol: T) -> Result<()> {
        let vals: Vec<T> = grid.iter().map(|&t| self.eval(t)).collect();
        for (t, v) in grid.iter().zip(&vals) {
            if *t < T::one() {
                return Err(Error::Domain(format!("rate grid point {} below 1", t.as_f64())));
            }
            if !(v.is_finite() && *v > T::zero()) {
                return Err(Error::Domain(format!(
                    "rate '{}' is not positive at t = {}",
                    self.label,
                    t.as_f64()
                )));
            }
        }
        for w in vals.windows(2).zip(grid.windows(2)) {
            if w.0[1] - w.0[0] < -tol {
                return Err(Error::Domain(format!(
                    "rate '{}' decreases near t = {}",
                    self.label,
                    w.1[0].as_f64()
                )));
            }
        }
        // divided second differences handle uneven grids
        for i in 1..grid.len().saturating_sub(1) {
            let s0 = (vals[i] - vals[i - 1]) / (grid[i] - grid[i - 1]);
            let s1 = (vals[i + 1] - vals[i]) / (grid[i + 1] - grid[i]);
            if s1 - s0 > tol {
                return Err(Error::Domain(format!(
                    "rate '{}' is not concave near t = {}",
                    self.label,
                    grid[i].as_f64()
                )));
            }
        }
        Ok(())
    }

    fn inverse_integral(&self, a: T, b: T, opts: &QuadOptions) -> Result<T> {
        Ok(integrate(|s| self.eval(s).recip(), a, b, opts)?.value)
    }

    /// Φ(t) = ∫₁ᵗ ds/φ(s).
    pub fn phi_big(&self, t: T) -> Result<T> {
        if !(t >= T::one()) {
            return Err(Error::Domain(format!("Φ is defined on [1, ∞), got {}", t.as_f64())));
        }
        self.inverse_integral(T::one(), t, &QuadOptions::default())
    }

    /// Φ⁻¹(u) for `u ≥ 0`.
    pub fn phi_big_inv(&self, u: T) -> Result<T> {
        if !(u >= T::zero()) {
            return Err(Error::Domain(format!("Φ⁻¹ needs u ≥ 0, got {}", u.as_f64())));
        }
        if u == T::zero() {
            return Ok(T::one());
        }
        let opts = QuadOptions::default();
        let two = T::lit(2.0);
        let mut a = T::one();
        let mut phi_a = T::zero();
        loop {
            let b = a * two;
            let seg = if b.is_finite() {
                self.inverse_integral(a, b, &opts).ok().filter(|v| v.is_finite())
            } else {
                None
            };
            let Some(seg) = seg else {
                return Err(Error::Range {
                    target: u.as_f64(),
                    max_reachable: phi_a.as_f64(),
                });
            };
            if phi_a + seg >= u {
                let base = phi_a;
                return bracketed_root(
                    |t| Ok(base + self.inverse_integral(a, t, &opts)? - u),
                    a,
                    b,
                    Some(|t| self.eval(t).recip()),
                );
            }
            phi_a = phi_a + seg;
            a = b;
        }
    }

    /// φ(Φ⁻¹(t)), the total-variation convergence rate at time `t ≥ 0`.
    pub fn tv_rate_at(&self, t: T) -> Result<T> {
        if !(t >= T::zero()) {
            return Err(Error::Domain(format!("time must be non-negative, got {}", t.as_f64())));
        }
        Ok(self.eval(self.phi_big_inv(t)?))
    }
}
