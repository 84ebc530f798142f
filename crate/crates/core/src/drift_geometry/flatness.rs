use super::model::CoefficientModel;
use crate::error::{Error, Result};
use crate::rate_calculus::ModulusPair;
use crate::scalar::{dot, linspace, Scalar};

/// Result of scanning the one-sided flatness condition over sampled pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct FlatnessCertificate<T> {
    /// Largest Γ satisfying the near branch on every sampled pair, if positive.
    pub gamma_certified: Option<T>,
    /// Pair attaining the certified Γ.
    pub binding_pair: Option<(Vec<T>, Vec<T>)>,
    /// Largest `f′(|x−y|)⟨x−y, b(x)−b(y)⟩` over pairs with `f(|x−y|) > γ`;
    /// the far branch holds when this is not positive.
    pub far_branch_max: T,
    pub pairs_checked: usize,
}

impl<T: Scalar> FlatnessCertificate<T> {
    pub fn holds(&self) -> bool {
        self.gamma_certified.is_some() && self.far_branch_max <= T::zero()
    }
}

/// `n` points evenly spaced on `[−half_width, half_width]` in one dimension.
pub fn symmetric_grid<T: Scalar>(half_width: T, n: usize) -> Vec<Vec<T>> {
    linspace(-half_width, half_width, n).into_iter().map(|x| vec![x]).collect()
}

/// Certifies `f′(|x−y|)⟨x−y, b(x)−b(y)⟩ ≤ −Γ|x−y|ψ(f(|x−y|))` when
/// `f(|x−y|) ≤ γ` (and `≤ 0` otherwise) over all pairs of `points`.
///
/// Only `f`, `f′`, `ψ` and `γ` of the modulus are used; the returned Γ is the
/// minimum over near pairs of `−f′⟨x−y, b(x)−b(y)⟩ / (|x−y| ψ(f(|x−y|)))`.
/// Where `f` has kinks `f′` is the right-hand difference quotient, so the
/// certificate is an almost-everywhere statement.
pub fn certify_flatness<T: Scalar>(
    model: &CoefficientModel<T>,
    modulus: &ModulusPair<T>,
    points: &[Vec<T>],
) -> Result<FlatnessCertificate<T>> {
    if points.len() < 2 {
        return Err(Error::Argument("need at least two points".into()));
    }
    if points.iter().any(|p| p.len() != model.dim) {
        return Err(Error::Argument(format!("points must have dimension {}", model.dim)));
    }
    let drifts: Vec<Vec<T>> = points.iter().map(|p| model.drift_at(p)).collect();
    let mut best: Option<(T, usize, usize)> = None;
    let mut far_max = T::neg_infinity();
    let mut checked = 0;
    let mut diff = vec![T::zero(); model.dim];
    let mut bdiff = vec![T::zero(); model.dim];
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            for k in 0..model.dim {
                diff[k] = points[i][k] - points[j][k];
                bdiff[k] = drifts[i][k] - drifts[j][k];
            }
            let dist = dot(&diff, &diff).sqrt();
            if dist == T::zero() {
                continue;
            }
            checked += 1;
            let lhs = modulus.f_deriv(dist) * dot(&diff, &bdiff);
            let fd = modulus.f(dist);
            if fd <= modulus.gamma_threshold {
                let ratio = -lhs / (dist * modulus.psi(fd));
                if best.is_none_or(|b| ratio < b.0) {
                    best = Some((ratio, i, j));
                }
            } else {
                far_max = far_max.max(lhs);
            }
        }
    }
    let (gamma_certified, binding_pair) = match best {
        Some((g, i, j)) if g > T::zero() => (Some(g), Some((points[i].clone(), points[j].clone()))),
        Some((_, i, j)) => (None, Some((points[i].clone(), points[j].clone()))),
        None => (None, None),
    };
    Ok(FlatnessCertificate { gamma_certified, binding_pair, far_branch_max: far_max, pairs_checked: checked })
}
