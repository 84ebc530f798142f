use crate::drift_geometry::ls_slope;
use crate::error::{Error, Result};
use crate::rate_calculus::{Kappa, ModulusPair};
use crate::scalar::Scalar;

/// Model families for [`decay_fit`].
#[derive(Clone)]
pub enum DecayModel<T> {
    /// `κ e^{−Γt}`.
    Exponential,
    /// `c t^{−q}`.
    Power,
    /// `Ψ_κ⁻¹(Γt)` with ψ from the modulus and κ fixed; only Γ is fitted.
    PsiInverse { modulus: ModulusPair<T>, kappa: T },
}

impl<T> std::fmt::Debug for DecayModel<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            DecayModel::Exponential => write!(f, "Exponential"),
            DecayModel::Power => write!(f, "Power"),
            DecayModel::PsiInverse { .. } => write!(f, "PsiInverse"),
        }
    }
}

/// Result of a least-squares decay fit on the log scale.
#[derive(Debug, Clone, PartialEq)]
pub struct DecayFit<T> {
    pub model: String,
    /// `(name, value)` pairs: `kappa`/`rate` for exponential, `c`/`exponent`
    /// (the signed power `−q`) for power, `rate` for ψ-inverse.
    pub params: Vec<(String, T)>,
    /// Root-mean-square residual of the log distances.
    pub residual: T,
    pub points_used: usize,
    pub dropped: usize,
    pub warnings: Vec<String>,
}

impl<T: Scalar> DecayFit<T> {
    pub fn param(&self, name: &str) -> Option<T> {
        self.params.iter().find(|p| p.0 == name).map(|p| p.1)
    }
}

fn rms<T: Scalar>(r: impl Iterator<Item = T>) -> T {
    let (s, n) = r.fold((T::zero(), 0usize), |(s, n), v| (s + v * v, n + 1));
    (s / T::count(n.max(1))).sqrt()
}

/// Fits `distances ≈ model(times)` by least squares on the log scale.
///
/// Non-positive distances (and `t ≤ 0` for the power model) are dropped with a
/// warning; fewer than five remaining points is an error.
pub fn decay_fit<T: Scalar>(times: &[T], distances: &[T], model: &DecayModel<T>) -> Result<DecayFit<T>> {
    if times.len() != distances.len() {
        return Err(Error::Argument("times and distances differ in length".into()));
    }
    let needs_positive_t = matches!(model, DecayModel::Power);
    let mut ts = Vec::new();
    let mut ls = Vec::new();
    for (&t, &d) in times.iter().zip(distances) {
        if d > T::zero() && d.is_finite() && (!needs_positive_t || t > T::zero()) {
            ts.push(t);
            ls.push(d.ln());
        }
    }
    let dropped = times.len() - ts.len();
    let mut warnings = Vec::new();
    if dropped > 0 {
        warnings.push(format!("dropped {dropped} points that cannot be fitted on the log scale"));
    }
    if ts.len() < 5 {
        return Err(Error::Argument(format!("need at least 5 usable points, have {}", ts.len())));
    }
    let n = T::count(ts.len());
    let mean = |v: &[T]| v.iter().fold(T::zero(), |s, &x| s + x) / n;
    let (name, params, residual) = match model {
        DecayModel::Exponential => {
            let slope = ls_slope(&ts, &ls);
            let icpt = mean(&ls) - slope * mean(&ts);
            let res = rms(ts.iter().zip(&ls).map(|(&t, &l)| l - icpt - slope * t));
            ("exponential", vec![("kappa".to_string(), icpt.exp()), ("rate".to_string(), -slope)], res)
        }
        DecayModel::Power => {
            let xs: Vec<T> = ts.iter().map(|t| t.ln()).collect();
            let slope = ls_slope(&xs, &ls);
            let icpt = mean(&ls) - slope * mean(&xs);
            let res = rms(xs.iter().zip(&ls).map(|(&x, &l)| l - icpt - slope * x));
            ("power", vec![("c".to_string(), icpt.exp()), ("exponent".to_string(), slope)], res)
        }
        DecayModel::PsiInverse { modulus, kappa } => {
            let sse = |ln_rate: T| -> T {
                let g = ln_rate.exp();
                let mut s = T::zero();
                for (&t, &l) in ts.iter().zip(&ls) {
                    match modulus.psi_big_inv(Kappa::Finite(*kappa), g * t) {
                        Ok(v) if v > T::zero() => s = s + (l - v.ln()).powi(2),
                        _ => return T::infinity(),
                    }
                }
                s
            };
            // coarse scan of ln Γ, then golden-section refinement
            let grid: Vec<T> = (0..=80).map(|k| T::lit(-20.0 + 0.5 * k as f64)).collect();
            let vals: Vec<T> = grid.iter().map(|&g| sse(g)).collect();
            let k = (0..vals.len()).fold(0, |b, i| if vals[i] < vals[b] { i } else { b });
            let (mut a, mut b) = (grid[k.saturating_sub(1)], grid[(k + 1).min(grid.len() - 1)]);
            let inv_phi = T::lit((5f64.sqrt() - 1.0) / 2.0);
            let mut c = b - inv_phi * (b - a);
            let mut d = a + inv_phi * (b - a);
            let (mut fc, mut fd) = (sse(c), sse(d));
            for _ in 0..200 {
                if (b - a).abs() < T::lit(1e-13) {
                    break;
                }
                if fc < fd {
                    b = d;
                    d = c;
                    fd = fc;
                    c = b - inv_phi * (b - a);
                    fc = sse(c);
                } else {
                    a = c;
                    c = d;
                    fc = fd;
                    d = a + inv_phi * (b - a);
                    fd = sse(d);
                }
            }
            let ln_g = (a + b) / T::lit(2.0);
            let res = (sse(ln_g) / n).sqrt();
            ("psi_inverse", vec![("rate".to_string(), ln_g.exp())], res)
        }
    };
    Ok(DecayFit { model: name.into(), params, residual, points_used: ts.len(), dropped, warnings })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rate_calculus::Family;
    use crate::scalar::linspace;

    #[test]
    fn noiseless_exponential() {
        let t = linspace(0.0f64, 5.0, 21);
        let d: Vec<f64> = t.iter().map(|t| 3.0 * (-2.0 * t).exp()).collect();
        let f = decay_fit(&t, &d, &DecayModel::Exponential).unwrap();
        assert!((f.param("rate").unwrap() - 2.0).abs() < 1e-6);
        assert!((f.param("kappa").unwrap() - 3.0).abs() < 1e-6);
    }

    #[test]
    fn noiseless_psi_inverse() {
        let t = linspace(0.0f64, 10.0, 21);
        let d: Vec<f64> = t.iter().map(|t| 1.0 / (1.0 + t)).collect();
        let m = ModulusPair::from_families(Family::Identity, Family::Power(2.0), 1.0, 1.0).unwrap();
        let f = decay_fit(&t, &d, &DecayModel::PsiInverse { modulus: m, kappa: 1.0 }).unwrap();
        assert!((f.param("rate").unwrap() - 1.0).abs() < 1e-6, "{:?}", f.params);
    }

    #[test]
    fn too_few_points_and_drops() {
        let t = [1.0f64, 2.0, 3.0, 4.0, 5.0, 6.0];
        let d = [1.0f64, 0.5, 0.0, 0.25, 0.2, 0.1];
        let f = decay_fit(&t, &d, &DecayModel::Power).unwrap();
        assert_eq!(f.dropped, 1);
        assert_eq!(f.warnings.len(), 1);
        assert!(decay_fit(&t[..4], &d[..4], &DecayModel::Power).is_err());
    }
}
