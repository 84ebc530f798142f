//! Rate transforms under Bochner subordination.
//!
//! A process time-changed by an independent subordinator `S` inherits the rate
//! `r_φ(t) = E[r(S_t)]`, and in the Wasserstein `L^p` setting
//! `r_φ(t) = (E[r^p(S_t)])^{1/p}`.

use std::fmt;
use std::io::Write;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::quadrature::{integrate, integrate_to_infinity, QuadOptions};
use crate::scalar::Scalar;
use crate::simulate::{subordinator_sample, SubordinatorSpec};

/// A named rate curve `t ↦ r(t) ≥ 0`.
#[derive(Clone)]
pub struct BaseRate<T> {
    pub label: String,
    f: Arc<dyn Fn(T) -> T + Send + Sync>,
}

impl<T> fmt::Debug for BaseRate<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BaseRate").field("label", &self.label).finish()
    }
}

impl<T: Scalar> BaseRate<T> {
    pub fn new(label: impl Into<String>, f: impl Fn(T) -> T + Send + Sync + 'static) -> Self {
        Self { label: label.into(), f: Arc::new(f) }
    }

    /// `e^{−λt}`.
    pub fn exponential(lambda: T) -> Self {
        Self::new(format!("exp(-{} t)", lambda), move |t: T| (-lambda * t).exp())
    }

    /// `(1 + t)^{−q}`.
    pub fn power_decay(q: T) -> Self {
        Self::new(format!("(1 + t)^(-{})", q), move |t: T| (T::one() + t).powf(-q))
    }

    pub fn eval(&self, t: T) -> T {
        (self.f)(t)
    }
}

/// How the expectation over `S_t` is computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SubordinationMethod {
    MonteCarlo { n: usize, seed: u64 },
    /// Adaptive quadrature against the gamma density; gamma subordinators only.
    DensityQuadrature,
}

/// A base rate, a subordinator and the exponent `p ≥ 1`.
#[derive(Debug, Clone)]
pub struct SubordinatedRate<T> {
    pub base_rate: BaseRate<T>,
    pub spec: SubordinatorSpec,
    pub p: T,
    pub method: SubordinationMethod,
}

/// `r_φ(t)` with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubordinatedValue<T> {
    pub t: T,
    pub value: T,
    /// Delta-method standard error for Monte Carlo; the quadrature error
    /// estimate otherwise; 0 for deterministic subordinators.
    pub se: T,
    /// More than 90% of the Monte Carlo mass of `r^p(S_t)` sits in the top
    /// decile of samples, so the variance estimate is unreliable.
    pub heavy_tail: bool,
}

fn deterministic_speed(spec: &SubordinatorSpec) -> Option<f64> {
    match *spec {
        SubordinatorSpec::DriftOnly { b } => Some(b),
        SubordinatorSpec::CompoundPoisson { drift, rate: 0.0, .. } => Some(drift),
        _ => None,
    }
}

/// Evaluates `(E[r^p(S_t)])^{1/p}`.
pub fn subordinate_rate<T: Scalar>(sr: &SubordinatedRate<T>, t: T) -> Result<SubordinatedValue<T>> {
    sr.spec.validate()?;
    if !(sr.p >= T::one()) || !sr.p.is_finite() {
        return Err(Error::Argument(format!("p must be at least 1, got {}", sr.p)));
    }
    if !(t >= T::zero()) || !t.is_finite() {
        return Err(Error::Argument(format!("time must be non-negative, got {t}")));
    }
    if let Some(b) = deterministic_speed(&sr.spec) {
        let s = T::lit(b * t.as_f64());
        let value = checked_rate(&sr.base_rate, s)?;
        return Ok(SubordinatedValue { t, value, se: T::zero(), heavy_tail: false });
    }
    match sr.method {
        SubordinationMethod::MonteCarlo { n, seed } => monte_carlo(sr, t, n, seed),
        SubordinationMethod::DensityQuadrature => density_quadrature(sr, t),
    }
}

/// [`subordinate_rate`] on a grid of times.
pub fn subordinate_curve<T: Scalar>(sr: &SubordinatedRate<T>, times: &[T]) -> Result<Vec<SubordinatedValue<T>>> {
    times.iter().map(|&t| subordinate_rate(sr, t)).collect()
}

/// Writes `t,value,se` rows.
pub fn write_curve_csv<T: Scalar, W: Write>(rows: &[SubordinatedValue<T>], mut out: W) -> std::io::Result<()> {
    writeln!(out, "t,value,se")?;
    for r in rows {
        writeln!(out, "{},{},{}", r.t, r.value, r.se)?;
    }
    Ok(())
}

fn checked_rate<T: Scalar>(rate: &BaseRate<T>, s: T) -> Result<T> {
    let v = rate.eval(s);
    if v >= T::zero() && v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Domain(format!("rate {} is {} at {}", rate.label, v, s)))
    }
}

fn monte_carlo<T: Scalar>(sr: &SubordinatedRate<T>, t: T, n: usize, seed: u64) -> Result<SubordinatedValue<T>> {
    if n < 2 {
        return Err(Error::Argument("Monte Carlo needs at least 2 samples".into()));
    }
    let samples: Vec<T> = subordinator_sample(&sr.spec, t.as_f64(), n, seed)?;
    let mut vals = Vec::with_capacity(n);
    for s in samples {
        vals.push(checked_rate(&sr.base_rate, s)?.powf(sr.p));
    }
    let nn = T::count(n);
    let mean = vals.iter().fold(T::zero(), |a, &v| a + v) / nn;
    let var = vals.iter().fold(T::zero(), |a, &v| a + (v - mean) * (v - mean)) / T::count(n - 1);
    let se_mean = (var / nn).sqrt();

    let total = vals.iter().fold(T::zero(), |a, &v| a + v);
    vals.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    let top = vals[..n.div_ceil(10)].iter().fold(T::zero(), |a, &v| a + v);
    let heavy_tail = total > T::zero() && top > T::lit(0.9) * total;

    let inv_p = sr.p.recip();
    let value = mean.powf(inv_p);
    let se = if mean > T::zero() { inv_p * mean.powf(inv_p - T::one()) * se_mean } else { se_mean };
    Ok(SubordinatedValue { t, value, se, heavy_tail })
}

fn density_quadrature<T: Scalar>(sr: &SubordinatedRate<T>, t: T) -> Result<SubordinatedValue<T>> {
    let SubordinatorSpec::Gamma { a, b } = sr.spec else {
        return Err(Error::Refused("density quadrature is only available for gamma subordinators".into()));
    };
    let k = a * t.as_f64();
    if k == 0.0 {
        let value = checked_rate(&sr.base_rate, T::zero())?;
        return Ok(SubordinatedValue { t, value, se: T::zero(), heavy_tail: false });
    }
    let p = sr.p.as_f64();
    let lgk1 = libm::lgamma(k + 1.0);
    let mut bad = None;
    let mut rp = |s: f64| -> f64 {
        let v = sr.base_rate.eval(T::lit(s)).as_f64();
        if !(v >= 0.0 && v.is_finite()) {
            bad.get_or_insert(s);
        }
        v.powf(p)
    };
    let opts = QuadOptions { abs_tol: 1e-14, rel_tol: 1e-11, max_intervals: 4000 };
    let (value, err) = if k < 1.0 {
        // u = (b s)^k removes the s^{k−1} singularity: the density becomes e^{−b s}/Γ(k + 1) du
        let q = integrate_to_infinity(
            |u: f64| {
                if u == 0.0 {
                    return rp(0.0) / libm::exp(lgk1);
                }
                let s = u.powf(1.0 / k) / b;
                rp(s) * (-b * s - lgk1).exp()
            },
            0.0,
            &opts,
        )?;
        (q.value, q.abs_error)
    } else {
        let ln_density = |s: f64| k * b.ln() + (k - 1.0) * s.ln() - b * s - libm::lgamma(k);
        let mut g = |s: f64| if s == 0.0 { if k == 1.0 { rp(0.0) * b } else { 0.0 } } else { rp(s) * ln_density(s).exp() };
        let mean = k / b;
        let left = integrate(&mut g, 0.0, mean, &opts)?;
        let right = integrate_to_infinity(&mut g, mean, &opts)?;
        (left.value + right.value, left.abs_error + right.abs_error)
    };
    if let Some(s) = bad {
        return Err(Error::Domain(format!("rate {} is negative or non-finite at {s}", sr.base_rate.label)));
    }
    let inv_p = 1.0 / p;
    let out = value.powf(inv_p);
    let se = if value > 0.0 { inv_p * value.powf(inv_p - 1.0) * err } else { err };
    Ok(SubordinatedValue { t, value: T::lit(out), se: T::lit(se), heavy_tail: false })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulate::PositiveJumpLaw;

    fn gamma_rate(p: f64, method: SubordinationMethod) -> SubordinatedRate<f64> {
        SubordinatedRate {
            base_rate: BaseRate::exponential(1.0),
            spec: SubordinatorSpec::Gamma { a: 1.0, b: 1.0 },
            p,
            method,
        }
    }

    #[test]
    fn quadrature_matches_laplace_transform() {
        let sr = gamma_rate(1.0, SubordinationMethod::DensityQuadrature);
        for t in [0.3, 0.5, 1.0, 2.0, 7.5] {
            let v = subordinate_rate(&sr, t).unwrap();
            assert!((v.value - 2f64.powf(-t)).abs() < 1e-9, "t = {t}: {}", v.value);
        }
    }

    #[test]
    fn drift_only_and_zero_rate_poisson_agree_bitwise() {
        let r = BaseRate::<f64>::power_decay(1.5);
        let mk = |spec| SubordinatedRate {
            base_rate: r.clone(),
            spec,
            p: 2.0,
            method: SubordinationMethod::MonteCarlo { n: 100, seed: 3 },
        };
        let d = subordinate_rate(&mk(SubordinatorSpec::DriftOnly { b: 0.7 }), 3.0).unwrap();
        let cp = SubordinatorSpec::CompoundPoisson { drift: 0.7, rate: 0.0, jumps: PositiveJumpLaw::Constant(1.0) };
        let c = subordinate_rate(&mk(cp), 3.0).unwrap();
        assert_eq!(d.value.to_bits(), c.value.to_bits());
        assert_eq!(d.value.to_bits(), r.eval(0.7 * 3.0).to_bits());
    }

    #[test]
    fn quadrature_refuses_other_families() {
        let mut sr = gamma_rate(1.0, SubordinationMethod::DensityQuadrature);
        sr.spec = SubordinatorSpec::CompoundPoisson {
            drift: 0.0,
            rate: 1.0,
            jumps: PositiveJumpLaw::Exponential { rate: 1.0 },
        };
        assert!(matches!(subordinate_rate(&sr, 1.0), Err(Error::Refused(_))));
    }

    #[test]
    fn heavy_tail_flag() {
        let sr = SubordinatedRate {
            base_rate: BaseRate::new("spike", |s: f64| if s > 6.0 { 1e9 } else { 0.0 }),
            spec: SubordinatorSpec::Gamma { a: 1.0, b: 1.0 },
            p: 1.0,
            method: SubordinationMethod::MonteCarlo { n: 20_000, seed: 1 },
        };
        assert!(subordinate_rate(&sr, 1.0).unwrap().heavy_tail);
        assert!(!subordinate_rate(&gamma_rate(1.0, SubordinationMethod::MonteCarlo { n: 20_000, seed: 1 }), 1.0)
            .unwrap()
            .heavy_tail);
    }
}
