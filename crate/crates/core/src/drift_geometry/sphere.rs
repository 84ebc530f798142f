//! Deterministic point sets on the unit sphere and sampled extrema over spheres.
//!
//! A sampled infimum can only overestimate the true infimum (and a sampled
//! supremum underestimate the true supremum). Local refinement narrows the
//! gap; the `margin` knob shifts both extrema conservatively.

use crate::scalar::{norm, Scalar};

/// Sampling and refinement settings for sphere extrema.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SphereOptions {
    pub samples: usize,
    /// Pattern-search sweeps around the best sample (0 disables refinement).
    pub refine_iterations: usize,
    /// Subtracted from every infimum and added to every supremum.
    pub margin: f64,
}

impl Default for SphereOptions {
    fn default() -> Self {
        Self { samples: 512, refine_iterations: 60, margin: 0.0 }
    }
}

const PRIMES: [u32; 16] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53];

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    while i > 0 {
        f /= base as f64;
        r += f * (i % base) as f64;
        i /= base;
    }
    r
}

/// `n` unit vectors in `R^d`.
///
/// `d = 1`: the two points ±1. `d = 2`: equispaced angles. `d = 3`: a
/// Fibonacci lattice. `d ≥ 4`: a Halton sequence pushed through Box–Muller
/// and normalised.
pub fn sphere_points<T: Scalar>(d: usize, n: usize) -> Vec<Vec<T>> {
    match d {
        0 => Vec::new(),
        1 => vec![vec![T::one()], vec![-T::one()]],
        2 => (0..n.max(1))
            .map(|k| {
                let a = 2.0 * std::f64::consts::PI * k as f64 / n.max(1) as f64;
                vec![T::lit(a.cos()), T::lit(a.sin())]
            })
            .collect(),
        3 => {
            let n = n.max(2);
            let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
            (0..n)
                .map(|k| {
                    let z = 1.0 - 2.0 * (k as f64 + 0.5) / n as f64;
                    let rho = (1.0 - z * z).sqrt();
                    let th = golden * k as f64;
                    vec![T::lit(rho * th.cos()), T::lit(rho * th.sin()), T::lit(z)]
                })
                .collect()
        }
        _ => {
            let pairs = d.div_ceil(2);
            let mut out = Vec::with_capacity(n);
            let mut i = 1u64;
            while out.len() < n {
                let mut v = Vec::with_capacity(2 * pairs);
                for p in 0..pairs {
                    let b1 = PRIMES[(2 * p) % PRIMES.len()] as u64;
                    let b2 = PRIMES[(2 * p + 1) % PRIMES.len()] as u64;
                    let u1 = radical_inverse(i, b1).max(1e-300);
                    let u2 = radical_inverse(i, b2);
                    let r = (-2.0 * u1.ln()).sqrt();
                    let a = 2.0 * std::f64::consts::PI * u2;
                    v.push(r * a.cos());
                    v.push(r * a.sin());
                }
                v.truncate(d);
                let nv = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                i += 1;
                if nv > 1e-12 {
                    out.push(v.iter().map(|x| T::lit(x / nv)).collect());
                }
            }
            out
        }
    }
}

/// Sampled extrema of a function over a sphere.
#[derive(Debug, Clone, PartialEq)]
pub struct SphereExtremum<T> {
    pub value: T,
    pub direction: Vec<T>,
}

fn refine<T: Scalar, F: Fn(&[T]) -> T>(
    g: &F,
    start: &[T],
    start_value: T,
    step0: T,
    iterations: usize,
    maximise: bool,
) -> (T, Vec<T>) {
    let d = start.len();
    let better = |a: T, b: T| if maximise { a > b } else { a < b };
    let mut best = start.to_vec();
    let mut best_v = start_value;
    let mut step = step0;
    let mut trial = vec![T::zero(); d];
    let floor = T::lit(1e-10);
    for _ in 0..iterations {
        let mut improved = false;
        for i in 0..d {
            for sign in [T::one(), -T::one()] {
                trial.copy_from_slice(&best);
                trial[i] = trial[i] + sign * step;
                let n = norm(&trial);
                if !(n > T::zero()) {
                    continue;
                }
                trial.iter_mut().for_each(|v| *v = *v / n);
                let v = g(&trial);
                if v.is_finite() && better(v, best_v) {
                    best_v = v;
                    best.copy_from_slice(&trial);
                    improved = true;
                }
            }
        }
        if !improved {
            step = step / T::lit(2.0);
            if step < floor {
                break;
            }
        }
    }
    (best_v, best)
}

/// Infimum and supremum of `g` over the unit sphere (`g` takes a unit direction).
pub fn sphere_extrema<T: Scalar, F: Fn(&[T]) -> T>(
    d: usize,
    dirs: &[Vec<T>],
    g: F,
    opts: &SphereOptions,
) -> (SphereExtremum<T>, SphereExtremum<T>) {
    let mut lo = (T::infinity(), 0usize);
    let mut hi = (T::neg_infinity(), 0usize);
    for (k, u) in dirs.iter().enumerate() {
        let v = g(u);
        if v < lo.0 || v.is_nan() {
            lo = (v, k);
        }
        if v > hi.0 || v.is_nan() {
            hi = (v, k);
        }
    }
    let margin = T::lit(opts.margin);
    if d == 1 || opts.refine_iterations == 0 || !lo.0.is_finite() || !hi.0.is_finite() {
        return (
            SphereExtremum { value: lo.0 - margin, direction: dirs[lo.1].clone() },
            SphereExtremum { value: hi.0 + margin, direction: dirs[hi.1].clone() },
        );
    }
    // initial step: typical spacing of the point set
    let spacing = T::lit((4.0 * std::f64::consts::PI / dirs.len().max(1) as f64).powf(1.0 / (d as f64 - 1.0)));
    let (lv, ld) = refine(&g, &dirs[lo.1], lo.0, spacing, opts.refine_iterations, false);
    let (hv, hd) = refine(&g, &dirs[hi.1], hi.0, spacing, opts.refine_iterations, true);
    (
        SphereExtremum { value: lv - margin, direction: ld },
        SphereExtremum { value: hv + margin, direction: hd },
    )
}
