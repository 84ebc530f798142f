use std::io::{self, Write};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Time grid settings shared by the simulators.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimOptions {
    pub t_end: f64,
    pub dt: f64,
    pub n_paths: usize,
    pub seed: u64,
    /// Record the state every `record_every` steps; 0 records only the start and the end.
    pub record_every: usize,
}

impl SimOptions {
    /// Number of steps, requiring `t_end/dt` to be an integer.
    pub fn steps(&self) -> Result<usize> {
        if !(self.dt > 0.0 && self.t_end >= 0.0 && self.dt.is_finite() && self.t_end.is_finite()) {
            return Err(Error::Argument("need dt > 0 and a finite horizon T ≥ 0".into()));
        }
        let n = (self.t_end / self.dt).round();
        if (n * self.dt - self.t_end).abs() > 1e-9 * self.t_end.max(1.0) {
            return Err(Error::Argument(format!("T/dt = {} is not an integer", self.t_end / self.dt)));
        }
        if self.n_paths == 0 {
            return Err(Error::Argument("need at least one path".into()));
        }
        Ok(n as usize)
    }

    /// Step indices at which the state is recorded.
    pub fn record_steps(&self) -> Result<Vec<usize>> {
        let n = self.steps()?;
        let mut out: Vec<usize> = if self.record_every == 0 {
            vec![0]
        } else {
            (0..=n).step_by(self.record_every).collect()
        };
        if *out.last().expect("non-empty") != n {
            out.push(n);
        }
        Ok(out)
    }
}

/// States that leave the ball of this radius (or become non-finite) flag the path.
pub const EXPLOSION_RADIUS: f64 = 1e12;

/// Simulated paths recorded on a common time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PathEnsemble<T> {
    pub dim: usize,
    pub n_paths: usize,
    pub dt: T,
    pub seed: u64,
    /// Recorded times.
    pub times: Vec<T>,
    /// `n_paths × times.len() × dim`, path-major.
    pub states: Vec<T>,
    /// Synchronously coupled partner paths, same layout.
    pub partner: Option<Vec<T>>,
    /// First time the partners came within the gluing threshold.
    pub coupling_times: Option<Vec<Option<T>>>,
    /// Paths whose state exploded; their later records are NaN.
    pub flagged: Vec<bool>,
    /// Number of jumps per path for jump SDEs.
    pub jump_counts: Option<Vec<usize>>,
}

impl<T: Scalar> PathEnsemble<T> {
    pub fn n_times(&self) -> usize {
        self.times.len()
    }

    fn offset(&self, path: usize, t_index: usize) -> usize {
        (path * self.times.len() + t_index) * self.dim
    }

    pub fn state(&self, path: usize, t_index: usize) -> &[T] {
        let o = self.offset(path, t_index);
        &self.states[o..o + self.dim]
    }

    pub fn partner_state(&self, path: usize, t_index: usize) -> Option<&[T]> {
        let o = self.offset(path, t_index);
        self.partner.as_ref().map(|p| &p[o..o + self.dim])
    }

    pub fn flagged_count(&self) -> usize {
        self.flagged.iter().filter(|&&f| f).count()
    }

    /// States of the unflagged paths at a recorded time.
    pub fn cloud_at(&self, t_index: usize) -> Vec<Vec<T>> {
        (0..self.n_paths)
            .filter(|&p| !self.flagged[p])
            .map(|p| self.state(p, t_index).to_vec())
            .collect()
    }

    /// One coordinate of the unflagged paths at a recorded time.
    pub fn column_at(&self, t_index: usize, component: usize) -> Vec<T> {
        (0..self.n_paths)
            .filter(|&p| !self.flagged[p])
            .map(|p| self.state(p, t_index)[component])
            .collect()
    }

    /// Index of the recorded time closest to `t`.
    pub fn time_index(&self, t: T) -> usize {
        let mut best = 0;
        for (k, &s) in self.times.iter().enumerate() {
            if (s - t).abs() < (self.times[best] - t).abs() {
                best = k;
            }
        }
        best
    }

    /// Binary columnar dump: a little-endian header `(n_paths, n_times, dim)` as
    /// `u64`, the times, then for each coordinate the `n_paths × n_times` block
    /// as `f64`, then the partner blocks when present.
    pub fn write_binary<W: Write>(&self, mut out: W) -> io::Result<()> {
        for v in [self.n_paths as u64, self.times.len() as u64, self.dim as u64, self.partner.is_some() as u64] {
            out.write_all(&v.to_le_bytes())?;
        }
        for t in &self.times {
            out.write_all(&t.as_f64().to_le_bytes())?;
        }
        let blocks = std::iter::once(&self.states).chain(self.partner.as_ref());
        for data in blocks {
            for c in 0..self.dim {
                for p in 0..self.n_paths {
                    for k in 0..self.times.len() {
                        out.write_all(&data[self.offset(p, k) + c].as_f64().to_le_bytes())?;
                    }
                }
            }
        }
        Ok(())
    }

    /// Per-time quantiles of the first coordinate (or of `|X − Z|` for coupled
    /// ensembles), followed by a coupling-time histogram when available.
    pub fn write_summary_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        let probs = [0.05, 0.25, 0.5, 0.75, 0.95];
        let what = if self.partner.is_some() { "distance" } else { "x0" };
        writeln!(out, "t,quantity,n,mean,q05,q25,q50,q75,q95")?;
        for k in 0..self.times.len() {
            let mut vals: Vec<f64> = (0..self.n_paths)
                .filter(|&p| !self.flagged[p])
                .map(|p| match self.partner_state(p, k) {
                    Some(z) => {
                        let x = self.state(p, k);
                        x.iter().zip(z).map(|(&a, &b)| (a - b).as_f64().powi(2)).sum::<f64>().sqrt()
                    }
                    None => self.state(p, k)[0].as_f64(),
                })
                .collect();
            vals.sort_by(|a, b| a.total_cmp(b));
            let n = vals.len();
            let mean = vals.iter().sum::<f64>() / n.max(1) as f64;
            write!(out, "{},{what},{n},{mean}", self.times[k].as_f64())?;
            for q in probs {
                let v = if n == 0 { f64::NAN } else { vals[((q * (n - 1) as f64).round() as usize).min(n - 1)] };
                write!(out, ",{v}")?;
            }
            writeln!(out)?;
        }
        if let Some(ct) = &self.coupling_times {
            let t_end = self.times.last().map_or(0.0, |t| t.as_f64());
            let bins = 20usize;
            let mut counts = vec![0usize; bins];
            let mut never = 0;
            for c in ct {
                match c {
                    Some(t) if t_end > 0.0 => {
                        let b = ((t.as_f64() / t_end) * bins as f64).floor() as usize;
                        counts[b.min(bins - 1)] += 1;
                    }
                    Some(_) => counts[0] += 1,
                    None => never += 1,
                }
            }
            writeln!(out)?;
            writeln!(out, "coupling_bin_lo,coupling_bin_hi,count")?;
            for (b, c) in counts.iter().enumerate() {
                let w = t_end / bins as f64;
                writeln!(out, "{},{},{c}", b as f64 * w, (b + 1) as f64 * w)?;
            }
            writeln!(out, "never,never,{never}")?;
        }
        Ok(())
    }
}
