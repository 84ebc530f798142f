use rayon::prelude::*;

use super::model::CoefficientModel;
use super::sphere::{sphere_extrema, sphere_points, SphereOptions};
use crate::error::{Error, Result};
use crate::quadrature::{integrate, QuadOptions};
use crate::scalar::{dot, Scalar};

/// The functionals `A = ½ Tr c`, `B = ⟨x − x₀, b⟩` and
/// `C = ⟨x − x₀, c(x − x₀)⟩ / |x − x₀|²` at a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Functionals<T> {
    pub a: T,
    pub b: T,
    pub c: T,
}

impl<T: Scalar> Functionals<T> {
    /// `2A − C + 2B`.
    pub fn numerator(&self) -> T {
        let two = T::lit(2.0);
        two * self.a - self.c + two * self.b
    }
}

/// Evaluates `A`, `B`, `C` at `x ≠ x₀`.
///
/// With a jump kernel the drift in `B` is replaced by `b(x) − ∫_{B₁} y ν(x, dy)`.
pub fn pointwise_functionals<T: Scalar>(
    model: &CoefficientModel<T>,
    x0: &[T],
    x: &[T],
) -> Result<Functionals<T>> {
    let d = model.dim;
    if x.len() != d || x0.len() != d {
        return Err(Error::Argument(format!("points must have dimension {d}")));
    }
    let u: Vec<T> = x.iter().zip(x0).map(|(&a, &b)| a - b).collect();
    let r2 = dot(&u, &u);
    if !(r2 > T::zero()) {
        return Err(Error::Domain("the functionals are undefined at x = x₀".into()));
    }
    let c = model.c_at(x);
    let mut b = model.drift_at(x);
    if let Some(j) = &model.jump {
        let mut comp = vec![T::zero(); d];
        (j.compensator)(x, &mut comp);
        for (bi, ci) in b.iter_mut().zip(&comp) {
            *bi = *bi - *ci;
        }
    }
    let mut trace = T::zero();
    let mut quad = T::zero();
    for i in 0..d {
        trace = trace + c[i * d + i];
        let mut row = T::zero();
        for j in 0..d {
            row = row + c[i * d + j] * u[j];
        }
        quad = quad + u[i] * row;
    }
    Ok(Functionals { a: trace / T::lit(2.0), b: dot(&u, &b), c: quad / r2 })
}

/// `⟨x − x₀, n(x)(x − x₀)⟩ / |x − x₀|²` for the jump second-moment matrix.
pub fn jump_second_moment_form<T: Scalar>(model: &CoefficientModel<T>, x0: &[T], x: &[T]) -> T {
    let d = model.dim;
    let Some(j) = &model.jump else {
        return T::zero();
    };
    let mut n = vec![T::zero(); d * d];
    (j.second_moment)(x, &mut n);
    let u: Vec<T> = x.iter().zip(x0).map(|(&a, &b)| a - b).collect();
    let mut quad = T::zero();
    for i in 0..d {
        for k in 0..d {
            quad = quad + u[i] * n[i * d + k] * u[k];
        }
    }
    quad / dot(&u, &u)
}

/// Which quadratic form plays the role of `C` in γ and in the denominator of ι.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ProfileKind {
    #[default]
    Diffusion,
    /// `N = C + ⟨u, n u⟩/|u|²` with the jump second moments `n`.
    JumpSecondMoment,
}

/// Settings for [`radial_profile`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfileOptions {
    pub sphere: SphereOptions,
    pub quad: QuadOptions,
    pub kind: ProfileKind,
}

impl Default for ProfileOptions {
    fn default() -> Self {
        Self {
            sphere: SphereOptions::default(),
            quad: QuadOptions { abs_tol: 1e-13, rel_tol: 1e-10, max_intervals: 200 },
            kind: ProfileKind::Diffusion,
        }
    }
}

/// γ, ι and I tabulated at the grid nodes and at the midpoint of each grid segment.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialProfile<T> {
    pub center: Vec<T>,
    pub base_radius: T,
    pub grid: Vec<T>,
    pub mids: Vec<T>,
    pub gamma_vals: Vec<T>,
    pub iota_vals: Vec<T>,
    pub i_vals: Vec<T>,
    pub gamma_mids: Vec<T>,
    pub iota_mids: Vec<T>,
    pub i_mids: Vec<T>,
    pub sphere_samples: usize,
    pub kind: ProfileKind,
    /// Radii (nodes or midpoints) where the sampled γ is not positive.
    pub nonpositive_gamma: Vec<T>,
}

impl<T: Scalar> RadialProfile<T> {
    /// Largest tabulated radius.
    pub fn r_max(&self) -> T {
        *self.grid.last().expect("profile grids are non-empty")
    }

    /// Index of the segment containing `r` (clamped to the grid).
    pub fn segment_of(&self, r: T) -> usize {
        let k = self.grid.partition_point(|&g| g <= r);
        k.clamp(1, self.grid.len() - 1) - 1
    }
}

struct Evaluator<'a, T: Scalar> {
    model: &'a CoefficientModel<T>,
    x0: &'a [T],
    dirs: Vec<Vec<T>>,
    opts: ProfileOptions,
}

impl<T: Scalar> Evaluator<'_, T> {
    fn denominator_and_numerator(&self, x: &[T]) -> (T, T) {
        match pointwise_functionals(self.model, self.x0, x) {
            Ok(f) => {
                let den = match self.opts.kind {
                    ProfileKind::Diffusion => f.c,
                    ProfileKind::JumpSecondMoment => f.c + jump_second_moment_form(self.model, self.x0, x),
                };
                (den, f.numerator())
            }
            Err(_) => (T::nan(), T::nan()),
        }
    }

    fn point(&self, r: T, u: &[T]) -> Vec<T> {
        self.x0.iter().zip(u).map(|(&c, &ui)| c + r * ui).collect()
    }

    /// (γ(r), ι(r)).
    fn at_radius(&self, r: T) -> (T, T) {
        let d = self.model.dim;
        let (gmin, _) = sphere_extrema(
            d,
            &self.dirs,
            |u: &[T]| self.denominator_and_numerator(&self.point(r, u)).0,
            &self.opts.sphere,
        );
        let (_, imax) = sphere_extrema(
            d,
            &self.dirs,
            |u: &[T]| {
                let (den, num) = self.denominator_and_numerator(&self.point(r, u));
                if den > T::zero() {
                    num / den
                } else {
                    T::infinity()
                }
            },
            &self.opts.sphere,
        );
        (gmin.value, imax.value)
    }

    fn iota_over_s_integral(&self, a: T, b: T) -> T {
        integrate(|s| self.at_radius(s).1 / s, a, b, &self.opts.quad)
            .map(|q| q.value)
            .unwrap_or_else(|_| T::nan())
    }
}

/// Tabulates γ_{x₀}, ι_{x₀} and `I_{x₀}(r) = ∫_{r₀}^r ι(s)/s ds` on `grid`.
///
/// The grid must start at `r₀ > 0` and increase strictly. I is integrated
/// adaptively between consecutive nodes, evaluating sphere extrema on the fly.
/// Radii where γ is not positive are recorded in `nonpositive_gamma`; I is
/// NaN past the first radius where ι is not finite.
pub fn radial_profile<T: Scalar>(
    model: &CoefficientModel<T>,
    x0: &[T],
    r0: T,
    grid: &[T],
    opts: &ProfileOptions,
) -> Result<RadialProfile<T>> {
    if x0.len() != model.dim {
        return Err(Error::Argument(format!("center must have dimension {}", model.dim)));
    }
    if !(r0 > T::zero()) {
        return Err(Error::Domain("the base radius must be positive".into()));
    }
    if grid.len() < 2 || grid[0] != r0 || grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Argument(
            "grid must start at the base radius, increase strictly and have at least two points".into(),
        ));
    }
    let samples = if model.dim == 1 { 2 } else { opts.sphere.samples.max(4) };
    let ev = Evaluator { model, x0, dirs: sphere_points(model.dim, samples), opts: *opts };
    let two = T::lit(2.0);

    let node_vals: Vec<(T, T)> = grid.par_iter().map(|&r| ev.at_radius(r)).collect();
    let seg_vals: Vec<(T, T, T, T, T)> = grid
        .par_windows(2)
        .map(|w| {
            let (a, b) = (w[0], w[1]);
            let m = (a + b) / two;
            let (g, i) = ev.at_radius(m);
            (m, g, i, ev.iota_over_s_integral(a, m), ev.iota_over_s_integral(m, b))
        })
        .collect();

    let n = grid.len();
    let mut i_vals = Vec::with_capacity(n);
    let mut i_mids = Vec::with_capacity(n - 1);
    let mut acc = T::zero();
    i_vals.push(acc);
    for s in &seg_vals {
        i_mids.push(acc + s.3);
        acc = acc + s.3 + s.4;
        i_vals.push(acc);
    }
    let mut nonpositive_gamma = Vec::new();
    for k in 0..n {
        if !(node_vals[k].0 > T::zero()) {
            nonpositive_gamma.push(grid[k]);
        }
        if k + 1 < n && !(seg_vals[k].1 > T::zero()) {
            nonpositive_gamma.push(seg_vals[k].0);
        }
    }
    Ok(RadialProfile {
        center: x0.to_vec(),
        base_radius: r0,
        grid: grid.to_vec(),
        mids: seg_vals.iter().map(|s| s.0).collect(),
        gamma_vals: node_vals.iter().map(|v| v.0).collect(),
        iota_vals: node_vals.iter().map(|v| v.1).collect(),
        i_vals,
        gamma_mids: seg_vals.iter().map(|s| s.1).collect(),
        iota_mids: seg_vals.iter().map(|s| s.2).collect(),
        i_mids,
        sphere_samples: samples,
        kind: opts.kind,
        nonpositive_gamma,
    })
}

/// Profile with the jump second moments added to the diffusion form.
///
/// Requires `2A − C + 2B ≤ 0` at every sampled point with `|x − x₀| ≥ r₀`;
/// otherwise the worst offender is reported in a refusal.
pub fn n_matrix_profile<T: Scalar>(
    model: &CoefficientModel<T>,
    x0: &[T],
    r0: T,
    grid: &[T],
    opts: &ProfileOptions,
) -> Result<RadialProfile<T>> {
    if model.jump.is_none() {
        return Err(Error::Argument("the second-moment profile needs a jump kernel".into()));
    }
    let samples = if model.dim == 1 { 2 } else { opts.sphere.samples.max(4) };
    let dirs = sphere_points::<T>(model.dim, samples);
    let mut worst: Option<(T, Vec<T>)> = None;
    for &r in grid {
        for u in &dirs {
            let x: Vec<T> = x0.iter().zip(u).map(|(&c, &ui)| c + r * ui).collect();
            let v = pointwise_functionals(model, x0, &x)?.numerator();
            if v > T::zero() && worst.as_ref().is_none_or(|w| v > w.0) {
                worst = Some((v, x));
            }
        }
    }
    if let Some((v, x)) = worst {
        let pt: Vec<f64> = x.iter().map(|c| c.as_f64()).collect();
        return Err(Error::Refused(format!(
            "2A − C + 2B = {} > 0 at x = {:?}",
            v.as_f64(),
            pt
        )));
    }
    radial_profile(model, x0, r0, grid, &ProfileOptions { kind: ProfileKind::JumpSecondMoment, ..*opts })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::linspace;

    #[test]
    fn ou_functionals() {
        let m = CoefficientModel::<f64>::ou(1.0, 1.0, 1).unwrap();
        let f = pointwise_functionals(&m, &[0.0], &[2.0]).unwrap();
        assert_eq!((f.a, f.b, f.c), (0.5, -4.0, 1.0));
        assert!(pointwise_functionals(&m, &[0.0], &[0.0]).is_err());
    }

    #[test]
    fn isotropic_brownian_in_plane() {
        let m = CoefficientModel::<f64>::ou(0.0, 1.0, 2).unwrap();
        let f = pointwise_functionals(&m, &[0.0, 0.0], &[0.3, -1.7]).unwrap();
        assert_eq!((f.a, f.b), (1.0, 0.0));
        assert!((f.c - 1.0).abs() < 1e-15);
    }

    #[test]
    fn e3_compensated_drift() {
        let m = CoefficientModel::<f64>::example_e3();
        let f = pointwise_functionals(&m, &[0.0], &[2.0]).unwrap();
        assert_eq!(f.b, -1.0);
    }

    #[test]
    fn ou_profile_is_exact_in_one_dimension() {
        let m = CoefficientModel::<f64>::ou(1.0, 1.0, 1).unwrap();
        let grid = linspace(1.0, 5.0, 41);
        let p = radial_profile(&m, &[0.0], 1.0, &grid, &ProfileOptions::default()).unwrap();
        for (k, &r) in grid.iter().enumerate() {
            assert!((p.iota_vals[k] + 2.0 * r * r).abs() < 1e-12);
            assert!((p.i_vals[k] + (r * r - 1.0)).abs() < 1e-10);
            assert_eq!(p.gamma_vals[k], 1.0);
        }
        assert!((p.i_mids[3] + (p.mids[3] * p.mids[3] - 1.0)).abs() < 1e-10);
        assert!(p.nonpositive_gamma.is_empty());
    }

    #[test]
    fn planar_ou_profile_by_sampling() {
        let m = CoefficientModel::<f64>::ou(1.0, 1.0, 2).unwrap();
        let grid = linspace(1.0, 3.0, 9);
        let p = radial_profile(&m, &[0.0, 0.0], 1.0, &grid, &ProfileOptions::default()).unwrap();
        for (k, &r) in grid.iter().enumerate() {
            assert!((p.gamma_vals[k] - 1.0).abs() < 1e-6);
            assert!((p.iota_vals[k] - (1.0 - 2.0 * r * r)).abs() < 1e-6);
        }
    }

    #[test]
    fn degenerate_diffusion_is_flagged_and_jump_profile_repairs_it() {
        let mut m = CoefficientModel::<f64>::example_e3();
        m.diffusion = super::super::model::Diffusion::Constant { matrix: vec![0.0], cols: 1 };
        let grid = linspace(1.0, 3.0, 5);
        let p = radial_profile(&m, &[0.0], 1.0, &grid, &ProfileOptions::default()).unwrap();
        assert!(!p.nonpositive_gamma.is_empty());
        let q = n_matrix_profile(&m, &[0.0], 1.0, &grid, &ProfileOptions::default()).unwrap();
        assert!(q.nonpositive_gamma.is_empty());
        assert!(q.gamma_vals.iter().all(|&g| (g - 1.0 / 3.0).abs() < 1e-15));
    }

    #[test]
    fn second_moment_hypothesis_is_enforced() {
        let mut m = CoefficientModel::<f64>::ou(-1.0, 1.0, 1).unwrap();
        m.jump = Some(super::super::model::JumpKernel::null(1));
        let grid = linspace(1.0, 3.0, 5);
        assert!(matches!(
            n_matrix_profile(&m, &[0.0], 1.0, &grid, &ProfileOptions::default()),
            Err(Error::Refused(_))
        ));
    }
}
