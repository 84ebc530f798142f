use super::modulus::{Kappa, ModulusPair};
use crate::error::{Error, Result};
use crate::scalar::{linspace, Scalar};

/// The comparison bound `Ψ⁻¹_{f0}(Γt)` tabulated on a time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GronwallCurve<T> {
    pub times: Vec<T>,
    pub bound_values: Vec<T>,
    pub kappa: Kappa<T>,
}

impl<T: Scalar> GronwallCurve<T> {
    /// Linear interpolation of the bound at `t` inside the grid.
    pub fn at(&self, t: T) -> Option<T> {
        let n = self.times.len();
        if n == 0 || t < self.times[0] || t > self.times[n - 1] {
            return None;
        }
        let k = self.times.partition_point(|&s| s <= t).clamp(1, n.max(2) - 1);
        if n == 1 {
            return Some(self.bound_values[0]);
        }
        let (t0, t1) = (self.times[k - 1], self.times[k]);
        let w = if t1 > t0 { (t - t0) / (t1 - t0) } else { T::zero() };
        Some(self.bound_values[k - 1] + w * (self.bound_values[k] - self.bound_values[k - 1]))
    }
}

/// Tabulates `t ↦ Ψ⁻¹_{f0}(Γt)` on `grid_n` evenly spaced times in `[0, horizon]`.
///
/// For convex ψ vanishing only at 0 this dominates every absolutely continuous
/// `f` with `f(0) ≤ f0` and `f′ ≤ −Γψ(f)`.
pub fn gronwall_bound<T: Scalar>(
    modulus: &ModulusPair<T>,
    f0: T,
    horizon: T,
    grid_n: usize,
) -> Result<GronwallCurve<T>> {
    if !(f0 > T::zero() && f0.is_finite()) {
        return Err(Error::Argument(format!("initial value must be positive, got {}", f0.as_f64())));
    }
    if !(horizon >= T::zero()) || grid_n < 2 {
        return Err(Error::Argument("need a non-negative horizon and at least two grid points".into()));
    }
    let times = linspace(T::zero(), horizon, grid_n);
    let kappa = Kappa::Finite(f0);
    let gamma = modulus.contraction_const;
    let bound_values = times
        .iter()
        .map(|&t| modulus.psi_big_inv(kappa, gamma * t))
        .collect::<Result<Vec<_>>>()?;
    Ok(GronwallCurve { times, bound_values, kappa })
}

/// Outcome of comparing a sampled series against the Gronwall bound.
#[derive(Debug, Clone, PartialEq)]
pub struct GronwallReport<T> {
    /// `max_k (f_k − Ψ⁻¹_{f0}(Γt_k))`.
    pub max_excess: T,
    pub time_of_max: T,
    pub tolerance: T,
    pub violated: bool,
    pub samples: usize,
}

/// Compares `samples[k]` taken at `times[k]` with `Ψ⁻¹_{f0}(Γt_k)`.
pub fn verify_gronwall<T: Scalar>(
    times: &[T],
    samples: &[T],
    modulus: &ModulusPair<T>,
    f0: T,
    tolerance: T,
) -> Result<GronwallReport<T>> {
    if samples.is_empty() {
        return Err(Error::Argument("empty sample series".into()));
    }
    if times.len() != samples.len() {
        return Err(Error::Argument(format!(
            "{} times but {} samples",
            times.len(),
            samples.len()
        )));
    }
    if times.windows(2).any(|w| !(w[1] > w[0])) || !(times[0] >= T::zero()) {
        return Err(Error::Argument("sample times must be non-negative and increasing".into()));
    }
    if !(f0 >= samples[0]) {
        return Err(Error::Argument(format!(
            "initial bound {} is below the first sample {}",
            f0.as_f64(),
            samples[0].as_f64()
        )));
    }
    let gamma = modulus.contraction_const;
    let mut max_excess = T::neg_infinity();
    let mut time_of_max = times[0];
    for (&t, &f) in times.iter().zip(samples) {
        let excess = if f0 == T::zero() {
            f
        } else {
            f - modulus.psi_big_inv(Kappa::Finite(f0), gamma * t)?
        };
        if excess > max_excess {
            max_excess = excess;
            time_of_max = t;
        }
    }
    Ok(GronwallReport {
        max_excess,
        time_of_max,
        tolerance,
        violated: max_excess > tolerance,
        samples: samples.len(),
    })
}
