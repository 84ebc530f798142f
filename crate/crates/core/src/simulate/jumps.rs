use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, StandardNormal};
use rayon::prelude::*;

use super::diffusion::{assemble, exploded, fill_normals, EulerStep, PathRecord};
use super::ensemble::{PathEnsemble, SimOptions};
use super::rng::{substream, Stream};
use crate::drift_geometry::{clamp_neg, sphere::sphere_points, CoefficientModel, Diffusion, FieldFn};
use crate::error::{Error, Result};
use crate::scalar::{dot, linspace, Scalar};

/// Law of the jump sizes, i.e. the normalised Lévy measure `ν/ν(R^d)`.
#[derive(Debug, Clone, PartialEq)]
pub enum JumpLaw<T> {
    /// Every jump has the same size.
    Constant(Vec<T>),
    /// One-dimensional uniform law on `[lo, hi]`.
    Uniform { lo: T, hi: T },
    /// One-dimensional normal law.
    Gaussian { mean: T, sd: T },
}

fn std_normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

fn std_normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

impl<T: Scalar> JumpLaw<T> {
    pub fn dim(&self) -> usize {
        match self {
            JumpLaw::Constant(v) => v.len(),
            _ => 1,
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            JumpLaw::Constant(v) if v.is_empty() => Err(Error::Argument("constant jump needs a size".into())),
            JumpLaw::Uniform { lo, hi } if !(hi >= lo) => Err(Error::Argument("uniform jumps need lo ≤ hi".into())),
            JumpLaw::Gaussian { sd, .. } if !(*sd >= T::zero()) => {
                Err(Error::Argument("Gaussian jumps need sd ≥ 0".into()))
            }
            _ => Ok(()),
        }
    }

    pub fn sample(&self, rng: &mut ChaCha8Rng, out: &mut [T]) {
        match self {
            JumpLaw::Constant(v) => out.copy_from_slice(v),
            JumpLaw::Uniform { lo, hi } => {
                let u: f64 = rng.random();
                out[0] = *lo + (*hi - *lo) * T::lit(u);
            }
            JumpLaw::Gaussian { mean, sd } => {
                let z: f64 = rng.sample(StandardNormal);
                out[0] = *mean + *sd * T::lit(z);
            }
        }
    }

    /// `E[Y; |Y| < 1]`.
    pub fn inner_mean(&self) -> Vec<T> {
        match self {
            JumpLaw::Constant(v) => {
                if dot(v, v) < T::one() {
                    v.clone()
                } else {
                    vec![T::zero(); v.len()]
                }
            }
            JumpLaw::Uniform { lo, hi } => {
                if hi == lo {
                    return JumpLaw::Constant(vec![*lo]).inner_mean();
                }
                let a = lo.max(-T::one());
                let b = hi.min(T::one());
                let v = if b > a { (b * b - a * a) / (T::lit(2.0) * (*hi - *lo)) } else { T::zero() };
                vec![v]
            }
            JumpLaw::Gaussian { mean, sd } => {
                if *sd == T::zero() {
                    return JumpLaw::Constant(vec![*mean]).inner_mean();
                }
                let (m, s) = (mean.as_f64(), sd.as_f64());
                let (a, b) = ((-1.0 - m) / s, (1.0 - m) / s);
                let v = m * (std_normal_cdf(b) - std_normal_cdf(a)) + s * (std_normal_pdf(a) - std_normal_pdf(b));
                vec![T::lit(v)]
            }
        }
    }

    pub fn mean(&self) -> Vec<T> {
        match self {
            JumpLaw::Constant(v) => v.clone(),
            JumpLaw::Uniform { lo, hi } => vec![(*lo + *hi) / T::lit(2.0)],
            JumpLaw::Gaussian { mean, .. } => vec![*mean],
        }
    }

    /// `E|Y|²`.
    pub fn second_moment(&self) -> T {
        match self {
            JumpLaw::Constant(v) => dot(v, v),
            JumpLaw::Uniform { lo, hi } => (*lo * *lo + *lo * *hi + *hi * *hi) / T::lit(3.0),
            JumpLaw::Gaussian { mean, sd } => *mean * *mean + *sd * *sd,
        }
    }
}

/// `dX = b(X)dt + dY` with `Y` a Lévy process of triplet `(β, γ, ν)` and
/// finite `ν = rate · law`.
///
/// With the truncation at the unit ball, `Y_t = (β − ∫_{|y|<1} y ν)t + γ^{1/2}B_t`
/// plus the sum of the jumps, so between jumps the paths follow the drift
/// `b + β − rate·E[Y; |Y| < 1]`.
#[derive(Clone)]
pub struct JumpSdeSpec<T> {
    pub dim: usize,
    pub drift: FieldFn<T>,
    pub beta: Vec<T>,
    /// Covariance of the Gaussian part, row-major `d × d`.
    pub gamma: Vec<T>,
    pub rate: T,
    pub law: JumpLaw<T>,
    pub label: String,
}

impl<T: Scalar> std::fmt::Debug for JumpSdeSpec<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("JumpSdeSpec").field("label", &self.label).field("dim", &self.dim).finish()
    }
}

/// Lower-triangular `L` with `LLᵀ = a` for a positive semi-definite `a`.
fn cholesky<T: Scalar>(a: &[T], d: usize) -> Result<Vec<T>> {
    let mut l = vec![T::zero(); d * d];
    let tol = T::epsilon() * T::lit(64.0) * a.iter().fold(T::one(), |m, v| m.max(v.abs()));
    for j in 0..d {
        let mut s = a[j * d + j];
        for k in 0..j {
            s = s - l[j * d + k] * l[j * d + k];
        }
        if s < -tol {
            return Err(Error::Argument("γ must be positive semi-definite".into()));
        }
        let pivot = s.max(T::zero()).sqrt();
        l[j * d + j] = pivot;
        for i in j + 1..d {
            let mut s = a[i * d + j];
            for k in 0..j {
                s = s - l[i * d + k] * l[j * d + k];
            }
            l[i * d + j] = if pivot > T::zero() { s / pivot } else { T::zero() };
        }
    }
    Ok(l)
}

impl<T: Scalar> JumpSdeSpec<T> {
    pub fn new(
        dim: usize,
        drift: impl Fn(&[T], &mut [T]) + Send + Sync + 'static,
        beta: Vec<T>,
        gamma: Vec<T>,
        rate: T,
        law: JumpLaw<T>,
        label: impl Into<String>,
    ) -> Result<Self> {
        if dim == 0 || beta.len() != dim || gamma.len() != dim * dim {
            return Err(Error::Argument(format!("β needs {dim} and γ {} entries", dim * dim)));
        }
        if !(rate >= T::zero() && rate.is_finite()) {
            return Err(Error::Refused(format!("the Lévy measure must have finite mass, got {}", rate.as_f64())));
        }
        law.validate()?;
        if law.dim() != dim {
            return Err(Error::Argument(format!("jump law has dimension {}, expected {dim}", law.dim())));
        }
        cholesky(&gamma, dim)?;
        Ok(Self { dim, drift: Arc::new(drift), beta, gamma, rate, law, label: label.into() })
    }

    /// `b(x) = clamp(−x, −1, 1)`, unit Gaussian part and rate-one jumps uniform on `[−1, 1]`.
    pub fn clamped_drift_uniform_jumps() -> Self {
        Self::new(
            1,
            |x: &[T], out: &mut [T]| out[0] = clamp_neg(x[0]),
            vec![T::zero()],
            vec![T::one()],
            T::one(),
            JumpLaw::Uniform { lo: -T::one(), hi: T::one() },
            "clamped drift with uniform jumps",
        )
        .expect("valid built-in spec")
    }

    /// The diffusion part as a coefficient model with `σ = γ^{1/2}` (Cholesky factor).
    pub fn diffusion_model(&self) -> Result<CoefficientModel<T>> {
        let sigma = cholesky(&self.gamma, self.dim)?;
        let drift = self.drift.clone();
        CoefficientModel::new(
            self.dim,
            move |x: &[T], out: &mut [T]| drift(x, out),
            Diffusion::Constant { matrix: sigma, cols: self.dim },
            self.label.clone(),
        )
    }

    /// `β − rate·E[Y; |Y| < 1]`, added to `b` between jumps.
    pub fn drift_shift(&self) -> Vec<T> {
        let inner = self.law.inner_mean();
        self.beta.iter().zip(&inner).map(|(&b, &m)| b - self.rate * m).collect()
    }

    /// `L|x|² = 2⟨x, b(x) + β + ∫_{|y|≥1} y ν⟩ + Tr γ + ∫|y|² ν`.
    pub fn generator_of_square(&self, x: &[T]) -> T {
        let mut b = vec![T::zero(); self.dim];
        (self.drift)(x, &mut b);
        let inner = self.law.inner_mean();
        let mean = self.law.mean();
        let mut drift_term = T::zero();
        for i in 0..self.dim {
            let outer = self.rate * (mean[i] - inner[i]);
            drift_term = drift_term + x[i] * (b[i] + self.beta[i] + outer);
        }
        let trace = (0..self.dim).fold(T::zero(), |s, i| s + self.gamma[i * self.dim + i]);
        T::lit(2.0) * drift_term + trace + self.rate * self.law.second_moment()
    }
}

/// Δ with `L|x|² ≤ Δ(1 + |x|²)` on sampled points of the ball of radius `radius`,
/// so that `E|X_t|² ≤ (|x|² + 1)e^{Δt}`.
pub fn fit_moment_delta<T: Scalar>(spec: &JumpSdeSpec<T>, radius: T, n: usize) -> Result<T> {
    if !(radius > T::zero()) || n < 2 {
        return Err(Error::Argument("need a positive radius and at least two points".into()));
    }
    let points: Vec<Vec<T>> = if spec.dim == 1 {
        linspace(-radius, radius, n).into_iter().map(|x| vec![x]).collect()
    } else {
        let dirs = sphere_points::<T>(spec.dim, 64);
        let mut pts = vec![vec![T::zero(); spec.dim]];
        for r in linspace(radius / T::count(n), radius, n) {
            pts.extend(dirs.iter().map(|u| u.iter().map(|&v| v * r).collect()));
        }
        pts
    };
    let delta = points.iter().fold(T::zero(), |m, x| {
        let v = spec.generator_of_square(x) / (T::one() + dot(x, x));
        m.max(v)
    });
    Ok(delta)
}

/// Paths of a jump SDE with exact exponential jump clocks and Euler steps between jumps.
///
/// Gaussian increments come from the same substream as [`super::euler_maruyama`],
/// jump clocks and sizes from a separate one; with no jumps the paths coincide
/// bitwise with the Euler–Maruyama paths of the diffusion part.
pub fn jump_sde<T: Scalar>(spec: &JumpSdeSpec<T>, starts: &[Vec<T>], opts: &SimOptions) -> Result<PathEnsemble<T>> {
    if starts.is_empty() || starts.iter().any(|s| s.len() != spec.dim) {
        return Err(Error::Argument(format!("need start points of dimension {}", spec.dim)));
    }
    let model = spec.diffusion_model()?;
    let steps = opts.steps()?;
    let rec = opts.record_steps()?;
    let dt = T::lit(opts.dt);
    let sqrt_dt = dt.sqrt();
    let d = spec.dim;
    let shift = spec.drift_shift();
    let shift = if shift.iter().all(|&v| v == T::zero()) { None } else { Some(shift) };
    let clock = if spec.rate > T::zero() {
        Some(Exp::new(spec.rate.as_f64()).map_err(|e| Error::Argument(e.to_string()))?)
    } else {
        None
    };
    let records: Vec<PathRecord<T>> = (0..opts.n_paths)
        .into_par_iter()
        .map(|p| {
            let mut rng = substream(opts.seed, Stream::Gaussian, p as u64);
            let mut jrng = substream(opts.seed, Stream::Jumps, p as u64);
            let mut step = EulerStep::new(&model);
            let mut xi = vec![T::zero(); d];
            let mut y = vec![T::zero(); d];
            let mut x = starts[p % starts.len()].clone();
            let mut states = Vec::with_capacity(rec.len() * d);
            let mut next_jump = clock.map_or(f64::INFINITY, |c| c.sample(&mut jrng));
            let mut jumps = 0;
            let mut next = 0;
            let mut flagged = false;
            for k in 0..=steps {
                if next < rec.len() && rec[next] == k {
                    states.extend_from_slice(&x);
                    next += 1;
                }
                if k == steps {
                    break;
                }
                let t_hi = (k + 1) as f64 * opts.dt;
                if next_jump > t_hi {
                    fill_normals(&mut rng, &mut xi);
                    step.apply(&model, &mut x, dt, sqrt_dt, &xi, shift.as_deref());
                } else {
                    let mut s = k as f64 * opts.dt;
                    while next_jump <= t_hi {
                        let h = next_jump - s;
                        if h > 0.0 {
                            fill_normals(&mut rng, &mut xi);
                            let h = T::lit(h);
                            step.apply(&model, &mut x, h, h.sqrt(), &xi, shift.as_deref());
                        }
                        spec.law.sample(&mut jrng, &mut y);
                        for (xi, &yi) in x.iter_mut().zip(&y) {
                            *xi = *xi + yi;
                        }
                        jumps += 1;
                        s = next_jump;
                        next_jump += clock.map_or(f64::INFINITY, |c| c.sample(&mut jrng));
                    }
                    let h = t_hi - s;
                    if h > 0.0 {
                        fill_normals(&mut rng, &mut xi);
                        let h = T::lit(h);
                        step.apply(&model, &mut x, h, h.sqrt(), &xi, shift.as_deref());
                    }
                }
                if exploded(&x) {
                    flagged = true;
                    break;
                }
            }
            states.resize(rec.len() * d, T::nan());
            PathRecord { states, partner: None, coupled_at: None, flagged, jumps }
        })
        .collect();
    let times = rec.iter().map(|&k| T::count(k) * dt).collect();
    Ok(assemble(d, opts, times, records, false, true))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn truncated_moments() {
        let u = JumpLaw::<f64>::Uniform { lo: -1.0, hi: 3.0 };
        // density 1/4 on [−1, 3]; ∫_{−1}^{1} y/4 = 0
        assert!(u.inner_mean()[0].abs() < 1e-15);
        assert!((u.second_moment() - 7.0 / 3.0).abs() < 1e-14);
        let g = JumpLaw::<f64>::Gaussian { mean: 0.0, sd: 1.0 };
        assert!(g.inner_mean()[0].abs() < 1e-15);
        let c = JumpLaw::Constant(vec![2.0f64]);
        assert_eq!(c.inner_mean(), vec![0.0]);
    }

    #[test]
    fn clamped_spec_envelope() {
        let s = JumpSdeSpec::<f64>::clamped_drift_uniform_jumps();
        let delta = fit_moment_delta(&s, 10.0, 2001).unwrap();
        assert!((delta - 4.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn cholesky_of_psd() {
        let l = cholesky(&[4.0f64, 2.0, 2.0, 2.0], 2).unwrap();
        assert_eq!(l, vec![2.0, 0.0, 1.0, 1.0]);
        assert!(cholesky(&[1.0f64, 2.0, 2.0, 1.0], 2).is_err());
    }
}
