use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::scalar::{norm, Scalar};

/// Vector or matrix valued field writing its value into the output buffer.
pub type FieldFn<T> = Arc<dyn Fn(&[T], &mut [T]) + Send + Sync>;

/// Interval `[lo, hi]` containing the jump displacements from a state.
pub type SupportFn<T> = Arc<dyn Fn(&[T]) -> (T, T) + Send + Sync>;

/// Diffusion coefficient σ, a `d × n` matrix stored row-major.
#[derive(Clone)]
pub enum Diffusion<T> {
    /// State-independent σ.
    Constant { matrix: Vec<T>, cols: usize },
    /// σ(x) written into a buffer of length `d·cols`.
    Field { cols: usize, field: FieldFn<T> },
}

impl<T: Scalar> Diffusion<T> {
    pub fn cols(&self) -> usize {
        match self {
            Diffusion::Constant { cols, .. } | Diffusion::Field { cols, .. } => *cols,
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, Diffusion::Constant { .. })
    }

    /// σ(x) into `out` (length `d·cols`).
    pub fn eval(&self, x: &[T], out: &mut [T]) {
        match self {
            Diffusion::Constant { matrix, .. } => out.copy_from_slice(matrix),
            Diffusion::Field { field, .. } => field(x, out),
        }
    }
}

/// Structure of a jump kernel ν(x, dy).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JumpKind {
    None,
    LevyTranslationInvariant,
    StateDependent,
}

/// Lévy kernel ν(x, dy), described through the two integrals the analysis needs.
///
/// `compensator` writes `∫_{B₁(0)} y ν(x, dy)` (a vector), `second_moment`
/// writes `n(x)` with `n_ij = ∫_{B₁(0)} y_i y_j ν(x, dy)` (a `d × d` matrix).
/// `support` optionally reports, for one-dimensional kernels, an interval
/// containing the jump sizes at `x`; it is used to spot-check the bounded
/// inward jump assumption beyond `bounded_jump_radius`.
#[derive(Clone)]
pub struct JumpKernel<T> {
    pub kind: JumpKind,
    pub compensator: FieldFn<T>,
    pub second_moment: FieldFn<T>,
    pub support: Option<SupportFn<T>>,
    pub bounded_jump_radius: Option<T>,
    pub label: String,
}

impl<T: Scalar> JumpKernel<T> {
    /// The null kernel: both integrals vanish identically.
    pub fn null(dim: usize) -> Self {
        Self {
            kind: JumpKind::None,
            compensator: Arc::new(|_, out: &mut [T]| out.iter_mut().for_each(|v| *v = T::zero())),
            second_moment: Arc::new(move |_, out: &mut [T]| {
                debug_assert_eq!(out.len(), dim * dim);
                out.iter_mut().for_each(|v| *v = T::zero())
            }),
            support: None,
            bounded_jump_radius: None,
            label: "null".into(),
        }
    }

    /// Checks that jumps from sampled `|x| ≥ ρ` land in the closed ball of
    /// radius `|x|` around the origin (one-dimensional kernels with a support).
    pub fn check_bounded_jumps(&self, probes: &[T]) -> Result<()> {
        let (Some(rho), Some(support)) = (self.bounded_jump_radius, self.support.as_ref()) else {
            return Ok(());
        };
        for &x in probes {
            if x.abs() < rho {
                continue;
            }
            let (lo, hi) = support(&[x]);
            for y in [lo, hi] {
                if (x + y).abs() > x.abs() * (T::one() + T::epsilon() * T::lit(8.0)) {
                    return Err(Error::Hypothesis(format!(
                        "jump of size {} from x = {} moves away from the origin",
                        y.as_f64(),
                        x.as_f64()
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Flags describing regularity the user asserts about the coefficients.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RegularityHints<T> {
    pub drift_locally_bounded: bool,
    /// `(radius, one-sided Lipschitz constant)` pairs.
    pub lipschitz_radii: Vec<(T, T)>,
}

/// Coefficients `(b, σ, ν)` of `dX = b(X)dt + σ(X)dB (+ jumps)` in `R^d`.
#[derive(Clone)]
pub struct CoefficientModel<T> {
    pub dim: usize,
    pub drift: FieldFn<T>,
    pub diffusion: Diffusion<T>,
    pub jump: Option<JumpKernel<T>>,
    pub hints: RegularityHints<T>,
    pub label: String,
}

impl<T> fmt::Debug for CoefficientModel<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CoefficientModel")
            .field("label", &self.label)
            .field("dim", &self.dim)
            .field("jump", &self.jump.as_ref().map(|j| j.label.clone()))
            .finish()
    }
}

fn sgn<T: Scalar>(x: T) -> T {
    if x >= T::zero() {
        T::one()
    } else {
        -T::one()
    }
}

/// `−1` for `x ≥ 1`, `−x` on `[−1, 1]`, `1` for `x ≤ −1`.
pub fn clamp_neg<T: Scalar>(x: T) -> T {
    (-x).max(-T::one()).min(T::one())
}

impl<T: Scalar> CoefficientModel<T> {
    pub fn new(
        dim: usize,
        drift: impl Fn(&[T], &mut [T]) + Send + Sync + 'static,
        diffusion: Diffusion<T>,
        label: impl Into<String>,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Argument("dimension must be positive".into()));
        }
        if let Diffusion::Constant { matrix, cols } = &diffusion {
            if matrix.len() != dim * cols {
                return Err(Error::Argument(format!(
                    "σ has {} entries, expected {}×{}",
                    matrix.len(),
                    dim,
                    cols
                )));
            }
        }
        Ok(Self {
            dim,
            drift: Arc::new(drift),
            diffusion,
            jump: None,
            hints: RegularityHints { drift_locally_bounded: true, lipschitz_radii: Vec::new() },
            label: label.into(),
        })
    }

    pub fn with_jump(mut self, jump: JumpKernel<T>) -> Self {
        self.jump = Some(jump);
        self
    }

    fn scalar_sigma(dim: usize, sigma: T) -> Diffusion<T> {
        let mut m = vec![T::zero(); dim * dim];
        for i in 0..dim {
            m[i * dim + i] = sigma;
        }
        Diffusion::Constant { matrix: m, cols: dim }
    }

    /// `b(x) = −θx`, `σ = s·I`. θ = 0 gives Brownian motion, θ < 0 an outward drift.
    pub fn ou(theta: T, sigma: T, dim: usize) -> Result<Self> {
        Self::new(
            dim,
            move |x: &[T], out: &mut [T]| {
                for (o, &xi) in out.iter_mut().zip(x) {
                    *o = -theta * xi;
                }
            },
            Self::scalar_sigma(dim, sigma),
            format!("ou(theta={theta}, sigma={sigma}, dim={dim})"),
        )
    }

    /// Componentwise `b_i(x) = −sgn(x_i)|x_i|^p`, `σ = s·I`.
    pub fn power_drift(p: T, sigma: T, dim: usize) -> Result<Self> {
        if !(p > T::zero()) {
            return Err(Error::Argument("power drift exponent must be positive".into()));
        }
        Self::new(
            dim,
            move |x: &[T], out: &mut [T]| {
                for (o, &xi) in out.iter_mut().zip(x) {
                    *o = -sgn(xi) * xi.abs().powf(p);
                }
            },
            Self::scalar_sigma(dim, sigma),
            format!("power_drift(p={p}, sigma={sigma}, dim={dim})"),
        )
    }

    /// One-dimensional `b(x) = −sgn(x)(cos x + ρ)`, `σ = s`.
    pub fn cosine_drift(rho: T, sigma: T) -> Result<Self> {
        Self::new(
            1,
            move |x: &[T], out: &mut [T]| out[0] = -sgn(x[0]) * (x[0].cos() + rho),
            Self::scalar_sigma(1, sigma),
            format!("cosine_drift(rho={rho}, sigma={sigma})"),
        )
    }

    /// The scalar jump diffusion `dX = Φ(X)dt + dB + Φ(X−)dZ` with
    /// `Φ(x) = clamp(−x, −1, 1)` and `Z` driven by uniform jumps on `[0, 1]`.
    ///
    /// Jumps from `x` are `Φ(x)·z`, `z ~ U[0, 1]`, all of modulus at most 1,
    /// so `∫_{B₁} y ν(x, dy) = Φ(x)/2` and `n(x) = Φ(x)²/3`.
    pub fn example_e3() -> Self {
        let kernel = JumpKernel {
            kind: JumpKind::StateDependent,
            compensator: Arc::new(|x: &[T], out: &mut [T]| out[0] = clamp_neg(x[0]) / T::lit(2.0)),
            second_moment: Arc::new(|x: &[T], out: &mut [T]| {
                let p = clamp_neg(x[0]);
                out[0] = p * p / T::lit(3.0)
            }),
            support: Some(Arc::new(|x: &[T]| {
                let p = clamp_neg(x[0]);
                (p.min(T::zero()), p.max(T::zero()))
            })),
            bounded_jump_radius: Some(T::one()),
            label: "uniform(0,1) scaled by clamp(-x)".into(),
        };
        Self {
            dim: 1,
            drift: Arc::new(|x: &[T], out: &mut [T]| out[0] = clamp_neg(x[0])),
            diffusion: Self::scalar_sigma(1, T::one()),
            jump: Some(kernel),
            hints: RegularityHints { drift_locally_bounded: true, lipschitz_radii: Vec::new() },
            label: "example_e3".into(),
        }
    }

    pub fn drift_at(&self, x: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); self.dim];
        (self.drift)(x, &mut out);
        out
    }

    pub fn sigma_at(&self, x: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); self.dim * self.diffusion.cols()];
        self.diffusion.eval(x, &mut out);
        out
    }

    /// `c(x) = σ(x)σ(x)ᵀ`, row-major `d × d`.
    pub fn c_at(&self, x: &[T]) -> Vec<T> {
        let d = self.dim;
        let n = self.diffusion.cols();
        let s = self.sigma_at(x);
        let mut c = vec![T::zero(); d * d];
        for i in 0..d {
            for j in 0..=i {
                let mut acc = T::zero();
                for k in 0..n {
                    acc = acc + s[i * n + k] * s[j * n + k];
                }
                c[i * d + j] = acc;
                c[j * d + i] = acc;
            }
        }
        c
    }

    /// Sampled `sup |b| + ‖σ‖_HS` over the ball of radius `r` for each probe radius.
    pub fn check_local_boundedness(&self, radii: &[T], points_per_radius: usize) -> Result<Vec<T>> {
        let dirs = super::sphere::sphere_points::<T>(self.dim, points_per_radius.max(2));
        radii
            .iter()
            .map(|&r| {
                let mut sup = T::zero();
                for k in 0..=8 {
                    let rr = r * T::count(k) / T::lit(8.0);
                    for u in &dirs {
                        let x: Vec<T> = u.iter().map(|&ui| ui * rr).collect();
                        let v = norm(&self.drift_at(&x)) + norm(&self.sigma_at(&x));
                        if !v.is_finite() {
                            return Err(Error::Hypothesis(format!(
                                "coefficients are not finite at radius {}",
                                rr.as_f64()
                            )));
                        }
                        sup = sup.max(v);
                    }
                }
                Ok(sup)
            })
            .collect()
    }

    /// Largest sampled `(2⟨x, b(x)⟩ + ‖σ(x)‖²_HS) − Γ(1 + |x|²)`; non-positive
    /// when the linear growth bound holds on the samples.
    pub fn check_linear_growth(&self, big_gamma: T, radii: &[T], points_per_radius: usize) -> T {
        let dirs = super::sphere::sphere_points::<T>(self.dim, points_per_radius.max(2));
        let two = T::lit(2.0);
        let mut worst = T::neg_infinity();
        for &r in radii {
            for u in &dirs {
                let x: Vec<T> = u.iter().map(|&ui| ui * r).collect();
                let b = self.drift_at(&x);
                let s = self.sigma_at(&x);
                let hs: T = s.iter().fold(T::zero(), |a, &v| a + v * v);
                let xb: T = x.iter().zip(&b).fold(T::zero(), |a, (&p, &q)| a + p * q);
                let excess = two * xb + hs - big_gamma * (T::one() + r * r);
                worst = worst.max(excess);
            }
        }
        worst
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn families_evaluate() {
        let ou = CoefficientModel::<f64>::ou(1.0, 1.0, 2).unwrap();
        assert_eq!(ou.drift_at(&[1.0, -2.0]), vec![-1.0, 2.0]);
        assert_eq!(ou.c_at(&[0.0, 0.0]), vec![1.0, 0.0, 0.0, 1.0]);
        let p = CoefficientModel::<f64>::power_drift(2.0, 1.0, 1).unwrap();
        assert_eq!(p.drift_at(&[-3.0]), vec![9.0]);
        let c = CoefficientModel::<f64>::cosine_drift(1.0, 1.0).unwrap();
        assert!((c.drift_at(&[std::f64::consts::PI])[0]).abs() < 1e-15);
        assert!(CoefficientModel::<f64>::new(
            2,
            |_, _| {},
            Diffusion::Constant { matrix: vec![1.0], cols: 1 },
            "bad"
        )
        .is_err());
    }

    #[test]
    fn e3_kernel_integrals() {
        let m = CoefficientModel::<f64>::example_e3();
        let j = m.jump.as_ref().unwrap();
        let mut out = [0.0];
        (j.compensator)(&[2.0], &mut out);
        assert_eq!(out[0], -0.5);
        (j.second_moment)(&[-5.0], &mut out);
        assert!((out[0] - 1.0 / 3.0).abs() < 1e-16);
        let probes: Vec<f64> = (-40..=40).map(|i| i as f64 * 0.25).collect();
        assert!(j.check_bounded_jumps(&probes).is_ok());
    }

    #[test]
    fn outward_jumps_fail_bounded_check() {
        let mut k = JumpKernel::<f64>::null(1);
        k.bounded_jump_radius = Some(1.0);
        k.support = Some(Arc::new(|_| (0.0, 0.5)));
        assert!(k.check_bounded_jumps(&[2.0]).is_err());
    }

    #[test]
    fn growth_checks() {
        let ou = CoefficientModel::<f64>::ou(1.0, 1.0, 1).unwrap();
        let radii: Vec<f64> = (0..50).map(|i| i as f64).collect();
        assert!(ou.check_linear_growth(1.0, &radii, 2) <= 0.0);
        let sup = ou.check_local_boundedness(&[1.0, 10.0], 2).unwrap();
        assert!((sup[1] - 11.0).abs() < 1e-12);
    }
}
