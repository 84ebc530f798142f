use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Minimum-cost perfect matching of a square cost matrix (row-major, `n × n`).
///
/// Shortest augmenting paths with dual potentials, `O(n³)`. Returns the column
/// assigned to each row.
pub fn solve_assignment<T: Scalar>(cost: &[T], n: usize) -> Result<Vec<usize>> {
    if cost.len() != n * n {
        return Err(Error::Argument("cost matrix must be n × n".into()));
    }
    if cost.iter().any(|c| !c.is_finite()) {
        return Err(Error::Argument("costs must be finite".into()));
    }
    // 1-based arrays with a virtual column 0
    let inf = T::infinity();
    let mut u = vec![T::zero(); n + 1];
    let mut v = vec![T::zero(); n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost[(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] = u[p[j]] + delta;
                    v[j] = v[j] - delta;
                } else {
                    minv[j] = minv[j] - delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut row_to_col = vec![0usize; n];
    for j in 1..=n {
        if p[j] > 0 {
            row_to_col[p[j] - 1] = j - 1;
        }
    }
    Ok(row_to_col)
}
