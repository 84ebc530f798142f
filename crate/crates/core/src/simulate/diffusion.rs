use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use super::ensemble::{PathEnsemble, SimOptions, EXPLOSION_RADIUS};
use super::rng::{substream, Stream};
use crate::drift_geometry::CoefficientModel;
use crate::error::{Error, Result};
use crate::scalar::{norm, Scalar};

/// Standard normals for one step, in the order every simulator draws them.
pub(crate) fn fill_normals<T: Scalar>(rng: &mut ChaCha8Rng, out: &mut [T]) {
    for v in out.iter_mut() {
        let z: f64 = rng.sample(StandardNormal);
        *v = T::lit(z);
    }
}

/// Scratch buffers for `x ← x + b(x)dt + σ(x)√dt ξ`.
pub(crate) struct EulerStep<T> {
    drift: Vec<T>,
    sigma: Vec<T>,
    cols: usize,
}

impl<T: Scalar> EulerStep<T> {
    pub(crate) fn new(model: &CoefficientModel<T>) -> Self {
        let cols = model.diffusion.cols();
        Self { drift: vec![T::zero(); model.dim], sigma: vec![T::zero(); model.dim * cols], cols }
    }

    /// One step; `shift` is added to the drift (used for Lévy drifts).
    pub(crate) fn apply(
        &mut self,
        model: &CoefficientModel<T>,
        x: &mut [T],
        dt: T,
        sqrt_dt: T,
        xi: &[T],
        shift: Option<&[T]>,
    ) {
        (model.drift)(x, &mut self.drift);
        if let Some(s) = shift {
            for (b, &v) in self.drift.iter_mut().zip(s) {
                *b = *b + v;
            }
        }
        model.diffusion.eval(x, &mut self.sigma);
        for i in 0..x.len() {
            let mut noise = T::zero();
            for k in 0..self.cols {
                noise = noise + self.sigma[i * self.cols + k] * xi[k];
            }
            x[i] = x[i] + self.drift[i] * dt + noise * sqrt_dt;
        }
    }
}

pub(crate) fn exploded<T: Scalar>(x: &[T]) -> bool {
    x.iter().any(|v| !v.is_finite()) || norm(x) > T::lit(EXPLOSION_RADIUS)
}

/// Per-path output gathered before assembling the ensemble.
pub(crate) struct PathRecord<T> {
    pub states: Vec<T>,
    pub partner: Option<Vec<T>>,
    pub coupled_at: Option<T>,
    pub flagged: bool,
    pub jumps: usize,
}

pub(crate) fn assemble<T: Scalar>(
    dim: usize,
    opts: &SimOptions,
    times: Vec<T>,
    records: Vec<PathRecord<T>>,
    coupled: bool,
    with_jumps: bool,
) -> PathEnsemble<T> {
    let mut states = Vec::with_capacity(records.len() * times.len() * dim);
    let mut partner = coupled.then(|| Vec::with_capacity(states.capacity()));
    let mut coupling_times = coupled.then(Vec::new);
    let mut flagged = Vec::with_capacity(records.len());
    let mut jump_counts = with_jumps.then(Vec::new);
    for r in records {
        states.extend_from_slice(&r.states);
        if let (Some(p), Some(z)) = (partner.as_mut(), r.partner.as_ref()) {
            p.extend_from_slice(z);
        }
        if let Some(c) = coupling_times.as_mut() {
            c.push(r.coupled_at);
        }
        if let Some(j) = jump_counts.as_mut() {
            j.push(r.jumps);
        }
        flagged.push(r.flagged);
    }
    PathEnsemble {
        dim,
        n_paths: opts.n_paths,
        dt: T::lit(opts.dt),
        seed: opts.seed,
        times,
        states,
        partner,
        coupling_times,
        flagged,
        jump_counts,
    }
}

fn check_starts<T: Scalar>(dim: usize, starts: &[Vec<T>]) -> Result<()> {
    if starts.is_empty() || starts.iter().any(|s| s.len() != dim) {
        return Err(Error::Argument(format!("need at least one start point of dimension {dim}")));
    }
    Ok(())
}

/// Euler–Maruyama paths of `dX = b(X)dt + σ(X)dB`; path `i` starts at `starts[i mod len]`.
///
/// Path `i` draws its Gaussian increments from its own substream, so the
/// ensemble is a pure function of the inputs and the seed.
pub fn euler_maruyama<T: Scalar>(
    model: &CoefficientModel<T>,
    starts: &[Vec<T>],
    opts: &SimOptions,
) -> Result<PathEnsemble<T>> {
    if model.jump.is_some() {
        return Err(Error::Argument("use jump_sde for models with jumps".into()));
    }
    check_starts(model.dim, starts)?;
    let steps = opts.steps()?;
    let rec = opts.record_steps()?;
    let dt = T::lit(opts.dt);
    let sqrt_dt = dt.sqrt();
    let d = model.dim;
    let m = model.diffusion.cols();
    let records: Vec<PathRecord<T>> = (0..opts.n_paths)
        .into_par_iter()
        .map(|p| {
            let mut rng = substream(opts.seed, Stream::Gaussian, p as u64);
            let mut step = EulerStep::new(model);
            let mut xi = vec![T::zero(); m];
            let mut x = starts[p % starts.len()].clone();
            let mut states = Vec::with_capacity(rec.len() * d);
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
                fill_normals(&mut rng, &mut xi);
                step.apply(model, &mut x, dt, sqrt_dt, &xi, None);
                if exploded(&x) {
                    flagged = true;
                    break;
                }
            }
            states.resize(rec.len() * d, T::nan());
            PathRecord { states, partner: None, coupled_at: None, flagged, jumps: 0 }
        })
        .collect();
    let times = rec.iter().map(|&k| T::count(k) * dt).collect();
    Ok(assemble(d, opts, times, records, false, false))
}

/// Synchronously coupled pairs started at `x` and `y`, driven by identical
/// Gaussian increments; once `|X − Z| ≤ eps_c` the partner is glued to `X`.
///
/// `eps_c` defaults to `1e−9·|x − y|`. Requires a state-independent σ.
pub fn synchronous_pair<T: Scalar>(
    model: &CoefficientModel<T>,
    x: &[T],
    y: &[T],
    opts: &SimOptions,
    eps_c: Option<T>,
) -> Result<PathEnsemble<T>> {
    if !model.diffusion.is_constant() {
        return Err(Error::Refused("synchronous coupling needs a constant σ".into()));
    }
    if model.jump.is_some() {
        return Err(Error::Argument("synchronous coupling is only built for diffusions".into()));
    }
    check_starts(model.dim, &[x.to_vec(), y.to_vec()])?;
    let steps = opts.steps()?;
    let rec = opts.record_steps()?;
    let dt = T::lit(opts.dt);
    let sqrt_dt = dt.sqrt();
    let d = model.dim;
    let m = model.diffusion.cols();
    let dist = |a: &[T], b: &[T]| a.iter().zip(b).fold(T::zero(), |s, (&u, &v)| s + (u - v) * (u - v)).sqrt();
    let eps = eps_c.unwrap_or(T::lit(1e-9) * dist(x, y));
    let records: Vec<PathRecord<T>> = (0..opts.n_paths)
        .into_par_iter()
        .map(|p| {
            let mut rng = substream(opts.seed, Stream::Gaussian, p as u64);
            let mut step = EulerStep::new(model);
            let mut xi = vec![T::zero(); m];
            let mut a = x.to_vec();
            let mut b = y.to_vec();
            let mut sa = Vec::with_capacity(rec.len() * d);
            let mut sb = Vec::with_capacity(rec.len() * d);
            let mut coupled_at = (dist(&a, &b) <= eps).then_some(T::zero());
            if coupled_at.is_some() {
                b.copy_from_slice(&a);
            }
            let mut next = 0;
            let mut flagged = false;
            for k in 0..=steps {
                if next < rec.len() && rec[next] == k {
                    sa.extend_from_slice(&a);
                    sb.extend_from_slice(&b);
                    next += 1;
                }
                if k == steps {
                    break;
                }
                fill_normals(&mut rng, &mut xi);
                step.apply(model, &mut a, dt, sqrt_dt, &xi, None);
                if coupled_at.is_some() {
                    b.copy_from_slice(&a);
                } else {
                    step.apply(model, &mut b, dt, sqrt_dt, &xi, None);
                    if dist(&a, &b) <= eps {
                        coupled_at = Some(T::count(k + 1) * dt);
                        b.copy_from_slice(&a);
                    }
                }
                if exploded(&a) || exploded(&b) {
                    flagged = true;
                    break;
                }
            }
            sa.resize(rec.len() * d, T::nan());
            sb.resize(rec.len() * d, T::nan());
            PathRecord { states: sa, partner: Some(sb), coupled_at, flagged, jumps: 0 }
        })
        .collect();
    let times = rec.iter().map(|&k| T::count(k) * dt).collect();
    Ok(assemble(d, opts, times, records, true, false))
}
