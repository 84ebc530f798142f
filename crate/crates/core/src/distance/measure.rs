use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Weighted point cloud `Σ w_i δ_{x_i}`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalMeasure<T> {
    pub dim: usize,
    pub samples: Vec<Vec<T>>,
    pub weights: Vec<T>,
}

impl<T: Scalar> EmpiricalMeasure<T> {
    /// Uniform weights.
    pub fn uniform(samples: Vec<Vec<T>>) -> Result<Self> {
        let n = samples.len();
        let w = vec![T::one() / T::count(n.max(1)); n];
        Self::weighted(samples, w)
    }

    /// Explicit weights; they must be non-negative and sum to one within `1e−12`.
    pub fn weighted(samples: Vec<Vec<T>>, weights: Vec<T>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::Argument("empty measure".into()));
        }
        if weights.len() != samples.len() {
            return Err(Error::Argument("one weight per sample is required".into()));
        }
        let dim = samples[0].len();
        if dim == 0 || samples.iter().any(|s| s.len() != dim) {
            return Err(Error::Argument("samples must share a positive dimension".into()));
        }
        if samples.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Argument("samples must be finite".into()));
        }
        if weights.iter().any(|w| !(*w >= T::zero())) {
            return Err(Error::Argument("weights must be non-negative".into()));
        }
        let total = weights.iter().fold(T::zero(), |s, &w| s + w);
        let tol = T::lit(1e-12).max(T::epsilon() * T::count(weights.len()) * T::lit(4.0));
        if (total - T::one()).abs() > tol {
            return Err(Error::Argument(format!("weights sum to {}, not 1", total.as_f64())));
        }
        Ok(Self { dim, samples, weights })
    }

    /// One-dimensional cloud from scalars.
    pub fn from_scalars(values: &[T]) -> Result<Self> {
        Self::uniform(values.iter().map(|&v| vec![v]).collect())
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn is_uniform(&self) -> bool {
        let w = T::one() / T::count(self.len());
        self.weights.iter().all(|&v| (v - w).abs() <= T::epsilon() * T::lit(4.0))
    }
}
