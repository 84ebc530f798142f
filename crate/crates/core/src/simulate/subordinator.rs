use rand::Rng;
use rand_distr::{Distribution, Exp, Gamma, Poisson};
use rayon::prelude::*;

use super::rng::{substream, Stream};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Law of the jumps of a compound Poisson subordinator, on `(0, ∞)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PositiveJumpLaw {
    Exponential { rate: f64 },
    Constant(f64),
    Uniform { lo: f64, hi: f64 },
}

impl PositiveJumpLaw {
    fn validate(&self) -> Result<()> {
        let ok = match *self {
            PositiveJumpLaw::Exponential { rate } => rate > 0.0 && rate.is_finite(),
            PositiveJumpLaw::Constant(c) => c > 0.0 && c.is_finite(),
            PositiveJumpLaw::Uniform { lo, hi } => lo >= 0.0 && hi > lo && hi.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Argument(format!("unsupported jump law {self:?}")))
        }
    }

    /// `E[e^{−uJ}]`.
    pub fn laplace(&self, u: f64) -> f64 {
        match *self {
            PositiveJumpLaw::Exponential { rate } => rate / (rate + u),
            PositiveJumpLaw::Constant(c) => (-u * c).exp(),
            PositiveJumpLaw::Uniform { lo, hi } => {
                if u == 0.0 {
                    1.0
                } else {
                    ((-u * lo).exp() - (-u * hi).exp()) / (u * (hi - lo))
                }
            }
        }
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        match *self {
            PositiveJumpLaw::Exponential { rate } => Exp::new(rate).expect("validated").sample(rng),
            PositiveJumpLaw::Constant(c) => c,
            PositiveJumpLaw::Uniform { lo, hi } => lo + (hi - lo) * rng.random::<f64>(),
        }
    }
}

/// Subordinators whose marginals `S_t` can be sampled exactly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SubordinatorSpec {
    /// `S_t ~ Gamma(shape a·t, rate b)`, `φ(u) = a ln(1 + u/b)`.
    Gamma { a: f64, b: f64 },
    /// `S_t = b·t`, `φ(u) = b·u`.
    DriftOnly { b: f64 },
    /// `S_t = drift·t + Σ_{i ≤ N_t} J_i`, `N_t ~ Poisson(rate·t)`,
    /// `φ(u) = drift·u + rate(1 − E e^{−uJ})`.
    CompoundPoisson { drift: f64, rate: f64, jumps: PositiveJumpLaw },
}

impl SubordinatorSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            SubordinatorSpec::Gamma { a, b } if a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite() => Ok(()),
            SubordinatorSpec::DriftOnly { b } if b >= 0.0 && b.is_finite() => Ok(()),
            SubordinatorSpec::CompoundPoisson { drift, rate, jumps }
                if drift >= 0.0 && rate >= 0.0 && drift.is_finite() && rate.is_finite() =>
            {
                jumps.validate()
            }
            _ => Err(Error::Argument(format!("unsupported subordinator parameters {self:?}"))),
        }
    }

    /// The Bernstein function φ with `E[e^{−uS_t}] = e^{−tφ(u)}`.
    pub fn bernstein(&self, u: f64) -> f64 {
        match *self {
            SubordinatorSpec::Gamma { a, b } => a * (u / b).ln_1p(),
            SubordinatorSpec::DriftOnly { b } => b * u,
            SubordinatorSpec::CompoundPoisson { drift, rate, jumps } => drift * u + rate * (1.0 - jumps.laplace(u)),
        }
    }
}

const BATCH: usize = 4096;

/// `n` independent samples of `S_t`; batch `k` of 4096 uses its own substream.
pub fn subordinator_sample<T: Scalar>(spec: &SubordinatorSpec, t: f64, n: usize, seed: u64) -> Result<Vec<T>> {
    spec.validate()?;
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::Argument(format!("time must be non-negative, got {t}")));
    }
    let batches = n.div_ceil(BATCH);
    let out: Vec<Vec<T>> = (0..batches)
        .into_par_iter()
        .map(|k| -> Result<Vec<T>> {
            let len = BATCH.min(n - k * BATCH);
            let mut rng = substream(seed, Stream::Batch, k as u64);
            let mut v = Vec::with_capacity(len);
            match *spec {
                SubordinatorSpec::Gamma { a, b } => {
                    if t == 0.0 {
                        v.resize(len, T::zero());
                    } else {
                        let g = Gamma::new(a * t, 1.0 / b).map_err(|e| Error::Argument(e.to_string()))?;
                        v.extend((0..len).map(|_| T::lit(g.sample(&mut rng))));
                    }
                }
                SubordinatorSpec::DriftOnly { b } => v.resize(len, T::lit(b * t)),
                SubordinatorSpec::CompoundPoisson { drift, rate, jumps } => {
                    let mean = rate * t;
                    let pois = if mean > 0.0 {
                        Some(Poisson::new(mean).map_err(|e| Error::Argument(e.to_string()))?)
                    } else {
                        None
                    };
                    for _ in 0..len {
                        let count = pois.map_or(0.0, |p| p.sample(&mut rng)) as u64;
                        let mut s = drift * t;
                        for _ in 0..count {
                            s += jumps.sample(&mut rng);
                        }
                        v.push(T::lit(s));
                    }
                }
            }
            Ok(v)
        })
        .collect::<Result<_>>()?;
    Ok(out.into_iter().flatten().collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn drift_only_is_deterministic() {
        let s: Vec<f64> = subordinator_sample(&SubordinatorSpec::DriftOnly { b: 1.5 }, 2.0, 10, 1).unwrap();
        assert!(s.iter().all(|&v| v == 3.0));
        let cp = SubordinatorSpec::CompoundPoisson { drift: 1.5, rate: 0.0, jumps: PositiveJumpLaw::Constant(1.0) };
        let c: Vec<f64> = subordinator_sample(&cp, 2.0, 10, 1).unwrap();
        assert_eq!(s, c);
    }

    #[test]
    fn gamma_mean() {
        let n = 100_000;
        let s: Vec<f64> = subordinator_sample(&SubordinatorSpec::Gamma { a: 1.0, b: 1.0 }, 3.0, n, 11).unwrap();
        let mean = s.iter().sum::<f64>() / n as f64;
        let se = (3.0f64 / n as f64).sqrt();
        assert!((mean - 3.0).abs() < 3.0 * se, "{mean}");
        assert!(s.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn bernstein_values() {
        let g = SubordinatorSpec::Gamma { a: 1.0, b: 1.0 };
        assert!((g.bernstein(1.0) - 2f64.ln()).abs() < 1e-15);
        let cp = SubordinatorSpec::CompoundPoisson {
            drift: 0.0,
            rate: 2.0,
            jumps: PositiveJumpLaw::Exponential { rate: 1.0 },
        };
        assert!((cp.bernstein(1.0) - 1.0).abs() < 1e-15);
        assert!(SubordinatorSpec::Gamma { a: -1.0, b: 1.0 }.validate().is_err());
    }
}
