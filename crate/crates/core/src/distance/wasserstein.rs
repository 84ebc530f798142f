use rand::seq::index::sample;

use super::assignment::solve_assignment;
use super::measure::EmpiricalMeasure;
use crate::error::{Error, Result};
use crate::rate_calculus::ModulusPair;
use crate::scalar::Scalar;
use crate::simulate::{substream, PathEnsemble, Stream};

/// Largest cloud size accepted by the exact assignment solver.
pub const ASSIGNMENT_CAP: usize = 1024;

fn check_p<T: Scalar>(p: T) -> Result<()> {
    if !(p >= T::one() && p.is_finite()) {
        return Err(Error::Argument(format!("need p ≥ 1, got {}", p.as_f64())));
    }
    Ok(())
}

fn pth_root<T: Scalar>(v: T, p: T) -> T {
    if p == T::one() {
        v
    } else {
        v.max(T::zero()).powf(p.recip())
    }
}

fn cost<T: Scalar>(a: &[T], b: &[T], p: T) -> T {
    let d2 = a.iter().zip(b).fold(T::zero(), |s, (&x, &y)| s + (x - y) * (x - y));
    if p == T::lit(2.0) {
        d2
    } else {
        d2.sqrt().powf(p)
    }
}

/// Exact `W_p` on the line through the quantile coupling.
pub fn wasserstein_1d<T: Scalar>(mu: &EmpiricalMeasure<T>, nu: &EmpiricalMeasure<T>, p: T) -> Result<T> {
    check_p(p)?;
    if mu.dim != 1 || nu.dim != 1 {
        return Err(Error::Argument("wasserstein_1d needs one-dimensional measures; use wasserstein_assignment".into()));
    }
    let sorted = |m: &EmpiricalMeasure<T>| {
        let mut v: Vec<(T, T)> = m.samples.iter().map(|s| s[0]).zip(m.weights.iter().copied()).collect();
        v.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite samples"));
        v
    };
    let (a, b) = (sorted(mu), sorted(nu));
    let total = if mu.len() == nu.len() && mu.is_uniform() && nu.is_uniform() {
        let s = a.iter().zip(&b).fold(T::zero(), |s, (x, y)| s + (x.0 - y.0).abs().powf(p));
        s / T::count(a.len())
    } else {
        let (mut i, mut j) = (0, 0);
        let (mut ra, mut rb) = (a[0].1, b[0].1);
        let mut s = T::zero();
        while i < a.len() && j < b.len() {
            let m = ra.min(rb);
            s = s + m * (a[i].0 - b[j].0).abs().powf(p);
            ra = ra - m;
            rb = rb - m;
            if ra <= T::zero() {
                i += 1;
                if i < a.len() {
                    ra = a[i].1;
                }
            }
            if rb <= T::zero() {
                j += 1;
                if j < b.len() {
                    rb = b[j].1;
                }
            }
        }
        s
    };
    Ok(pth_root(total, p))
}

/// Exact `W_p` between equal-size uniform clouds in any dimension (`n ≤ 1024`).
pub fn wasserstein_assignment<T: Scalar>(mu: &EmpiricalMeasure<T>, nu: &EmpiricalMeasure<T>, p: T) -> Result<T> {
    check_p(p)?;
    if mu.dim != nu.dim {
        return Err(Error::Argument("measures live in different dimensions".into()));
    }
    let n = mu.len();
    if nu.len() != n || !mu.is_uniform() || !nu.is_uniform() {
        return Err(Error::Argument("the assignment solver needs equal-size uniform clouds".into()));
    }
    if n > ASSIGNMENT_CAP {
        return Err(Error::Refused(format!(
            "{n} points exceed the exact solver cap of {ASSIGNMENT_CAP}; use wasserstein_subsampled"
        )));
    }
    let mut c = Vec::with_capacity(n * n);
    for a in &mu.samples {
        for b in &nu.samples {
            c.push(cost(a, b, p));
        }
    }
    let assign = solve_assignment(&c, n)?;
    let total = assign.iter().enumerate().fold(T::zero(), |s, (i, &j)| s + c[i * n + j]);
    Ok(pth_root(total / T::count(n), p))
}

/// Median of 8 exact solves on random subsamples of `ASSIGNMENT_CAP` points
/// (or the exact value when both clouds are small enough).
pub fn wasserstein_subsampled<T: Scalar>(
    mu: &EmpiricalMeasure<T>,
    nu: &EmpiricalMeasure<T>,
    p: T,
    seed: u64,
) -> Result<T> {
    if mu.len() <= ASSIGNMENT_CAP && nu.len() == mu.len() {
        return wasserstein_assignment(mu, nu, p);
    }
    let m = ASSIGNMENT_CAP.min(mu.len()).min(nu.len());
    let mut vals = Vec::with_capacity(8);
    for k in 0..8u64 {
        let mut rng = substream(seed, Stream::Batch, k);
        let pick = |src: &EmpiricalMeasure<T>, rng: &mut _| -> Result<EmpiricalMeasure<T>> {
            let idx = sample(rng, src.len(), m);
            EmpiricalMeasure::uniform(idx.iter().map(|i| src.samples[i].clone()).collect())
        };
        let a = pick(mu, &mut rng)?;
        let b = pick(nu, &mut rng)?;
        vals.push(wasserstein_assignment(&a, &b, p)?);
    }
    vals.sort_by(|a, b| a.partial_cmp(b).expect("finite distances"));
    Ok((vals[3] + vals[4]) / T::lit(2.0))
}

/// `(mean over paths of f(|X_t − Z_t|)^p)^{1/p}` for a coupled ensemble, an
/// upper bound for `W_{f,p}` between the two time-t laws.
pub fn coupling_cost<T: Scalar>(
    ensemble: &PathEnsemble<T>,
    modulus: &ModulusPair<T>,
    p: T,
    t_index: usize,
) -> Result<T> {
    check_p(p)?;
    let Some(_) = &ensemble.partner else {
        return Err(Error::Argument("coupling_cost needs a coupled ensemble".into()));
    };
    if t_index >= ensemble.n_times() {
        return Err(Error::Argument(format!("time index {t_index} out of range")));
    }
    let mut s = T::zero();
    let mut n = 0usize;
    for path in 0..ensemble.n_paths {
        if ensemble.flagged[path] {
            continue;
        }
        let x = ensemble.state(path, t_index);
        let z = ensemble.partner_state(path, t_index).expect("coupled ensemble");
        let d = cost(x, z, T::lit(2.0)).sqrt();
        s = s + modulus.f(d).powf(p);
        n += 1;
    }
    if n == 0 {
        return Err(Error::Argument("every path is flagged".into()));
    }
    Ok(pth_root(s / T::count(n), p))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn translation_and_identity() {
        let a = EmpiricalMeasure::from_scalars(&[0.0f64; 5]).unwrap();
        let b = EmpiricalMeasure::from_scalars(&[1.0f64; 5]).unwrap();
        assert_eq!(wasserstein_1d(&a, &b, 2.0).unwrap(), 1.0);
        assert_eq!(wasserstein_1d(&a, &a, 1.0).unwrap(), 0.0);
        let single = |v: f64| EmpiricalMeasure::from_scalars(&[v]).unwrap();
        assert_eq!(wasserstein_assignment(&single(0.5), &single(2.0), 3.0).unwrap(), 1.5);
    }

    #[test]
    fn weighted_quantile_coupling() {
        let a = EmpiricalMeasure::weighted(vec![vec![0.0f64], vec![1.0]], vec![0.25, 0.75]).unwrap();
        let b = EmpiricalMeasure::from_scalars(&[0.0f64, 1.0]).unwrap();
        // move mass 1/4 from 1 to 0... quantile coupling transports 1/4 over distance 1
        assert!((wasserstein_1d(&a, &b, 1.0).unwrap() - 0.25).abs() < 1e-15);
    }

    #[test]
    fn rigid_translation_in_plane() {
        let pts: Vec<Vec<f64>> = (0..12).map(|k| vec![(k as f64).cos() * 3.0, (k as f64 * 1.7).sin()]).collect();
        let shifted: Vec<Vec<f64>> = pts.iter().map(|p| vec![p[0] + 0.3, p[1] - 0.4]).collect();
        let a = EmpiricalMeasure::uniform(pts).unwrap();
        let b = EmpiricalMeasure::uniform(shifted).unwrap();
        assert!((wasserstein_assignment(&a, &b, 2.0).unwrap() - 0.5).abs() < 1e-12);
    }
}
