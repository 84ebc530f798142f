use std::collections::HashMap;

use super::measure::EmpiricalMeasure;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// How histogram bins are chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BinRule {
    /// Width `2·IQR·n^{−1/3}` per coordinate on the pooled sample.
    #[default]
    FreedmanDiaconis,
    /// A fixed number of bins per coordinate.
    Count(usize),
}

const MAX_BINS_PER_AXIS: usize = 4096;

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// `½ Σ_bins |μ̂(bin) − ν̂(bin)|` on a common grid of bins (dimension ≤ 2).
///
/// Coarse bins bias the estimate downwards (mass differences inside a bin
/// cancel); fine bins inflate it with sampling noise.
pub fn tv_histogram<T: Scalar>(mu: &EmpiricalMeasure<T>, nu: &EmpiricalMeasure<T>, rule: BinRule) -> Result<T> {
    if mu.is_empty() || nu.is_empty() {
        return Err(Error::Argument("empty measure".into()));
    }
    if mu.dim != nu.dim {
        return Err(Error::Argument("measures live in different dimensions".into()));
    }
    let d = mu.dim;
    if d > 2 {
        return Err(Error::Argument("histogram TV supports dimension 1 or 2".into()));
    }
    let pooled_n = (mu.len() + nu.len()) as f64;
    let mut edges = Vec::with_capacity(d);
    for c in 0..d {
        let mut all: Vec<f64> = mu.samples.iter().chain(&nu.samples).map(|s| s[c].as_f64()).collect();
        all.sort_by(|a, b| a.total_cmp(b));
        let (lo, hi) = (all[0], *all.last().expect("non-empty"));
        let span = hi - lo;
        let bins = match rule {
            BinRule::Count(k) => k.max(1),
            BinRule::FreedmanDiaconis => {
                let iqr = quantile(&all, 0.75) - quantile(&all, 0.25);
                let h = 2.0 * iqr * pooled_n.powf(-1.0 / 3.0);
                if h > 0.0 && span > 0.0 {
                    (span / h).ceil() as usize
                } else {
                    (pooled_n.log2().ceil() as usize + 1).max(1)
                }
            }
        };
        edges.push((lo, span, bins.clamp(1, MAX_BINS_PER_AXIS)));
    }
    let bin_of = |s: &[T]| -> usize {
        let mut idx = 0;
        for (c, &(lo, span, bins)) in edges.iter().enumerate() {
            let k = if span > 0.0 {
                (((s[c].as_f64() - lo) / span) * bins as f64).floor().clamp(0.0, (bins - 1) as f64) as usize
            } else {
                0
            };
            idx = idx * bins + k;
        }
        idx
    };
    let mut mass: HashMap<usize, f64> = HashMap::new();
    for (s, &w) in mu.samples.iter().zip(&mu.weights) {
        *mass.entry(bin_of(s)).or_default() += w.as_f64();
    }
    for (s, &w) in nu.samples.iter().zip(&nu.weights) {
        *mass.entry(bin_of(s)).or_default() -= w.as_f64();
    }
    let tv = 0.5 * mass.values().map(|v| v.abs()).sum::<f64>();
    Ok(T::lit(tv.clamp(0.0, 1.0)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_and_disjoint() {
        let a = EmpiricalMeasure::from_scalars(&[0.1f64, 0.5, 0.7, 0.9]).unwrap();
        assert_eq!(tv_histogram(&a, &a, BinRule::default()).unwrap(), 0.0);
        let b = EmpiricalMeasure::from_scalars(&[10.1f64, 10.5, 10.7, 10.9]).unwrap();
        assert!((tv_histogram(&a, &b, BinRule::Count(20)).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn planar_clouds() {
        let a = EmpiricalMeasure::uniform(vec![vec![0.0f64, 0.0], vec![1.0, 1.0]]).unwrap();
        let b = EmpiricalMeasure::uniform(vec![vec![0.0f64, 0.0], vec![1.0, 0.0]]).unwrap();
        assert!((tv_histogram(&a, &b, BinRule::Count(2)).unwrap() - 0.5).abs() < 1e-12);
    }
}
