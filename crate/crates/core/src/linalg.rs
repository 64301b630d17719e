//! Dense least squares through the normal equations.
//!
//! The Gram matrix is scaled to unit diagonal and factored with a diagonally
//! pivoted Cholesky decomposition. A pivot that falls below the tolerance means
//! the design is rank deficient; the columns taking part in the dependency are
//! reported instead of being papered over with a pseudo-inverse.

use alloc::vec;
use alloc::vec::Vec;
use thiserror::Error;

/// Relative pivot threshold on the unit-diagonal Gram matrix.
pub const RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinalgError {
    #[error("design is rank deficient; colliding columns {columns:?}")]
    RankDeficient { columns: Vec<usize> },
    #[error("{rows} rows cannot determine {params} parameters")]
    TooFewRows { rows: usize, params: usize },
    #[error("non-finite value in the design or response")]
    NonFinite,
}

/// `L·Lᵀ = P·A·Pᵀ` for a symmetric positive-definite `A` (row-major, p × p).
#[derive(Debug, Clone)]
pub struct PivotedCholesky {
    p: usize,
    lower: Vec<f64>,
    perm: Vec<usize>,
}

impl PivotedCholesky {
    /// Factors `a`; on failure returns the original indices of every column
    /// involved in a (numerical) linear dependency.
    pub fn factor(a: &[f64], p: usize, tol: f64) -> Result<Self, LinalgError> {
        let mut work = a.to_vec();
        let mut perm: Vec<usize> = (0..p).collect();
        let scale = (0..p).map(|i| a[i * p + i]).fold(0.0_f64, f64::max).max(f64::MIN_POSITIVE);
        let mut lower = vec![0.0; p * p];
        for k in 0..p {
            // pivot: largest remaining diagonal, lowest index on ties
            let mut best = k;
            for j in k + 1..p {
                if work[perm[j] * p + perm[j]] > work[perm[best] * p + perm[best]] {
                    best = j;
                }
            }
            if work[perm[best] * p + perm[best]] <= tol * scale {
                return Err(LinalgError::RankDeficient { columns: dependency(a, p, &perm, k, &lower) });
            }
            perm.swap(k, best);
            lower_swap(&mut lower, p, k, best);
            let pk = perm[k];
            let d = libm::sqrt(work[pk * p + pk]);
            lower[k * p + k] = d;
            for i in k + 1..p {
                let pi = perm[i];
                let v = work[pi * p + pk] / d;
                lower[i * p + k] = v;
            }
            for i in k + 1..p {
                for j in k + 1..=i {
                    let (pi, pj) = (perm[i], perm[j]);
                    let delta = lower[i * p + k] * lower[j * p + k];
                    work[pi * p + pj] -= delta;
                    if pi != pj {
                        work[pj * p + pi] -= delta;
                    }
                }
            }
        }
        Ok(Self { p, lower, perm })
    }

    /// Solves `A·x = b`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let p = self.p;
        let mut z: Vec<f64> = self.perm.iter().map(|&i| b[i]).collect();
        for i in 0..p {
            let s: f64 = (0..i).map(|j| self.lower[i * p + j] * z[j]).sum();
            z[i] = (z[i] - s) / self.lower[i * p + i];
        }
        for i in (0..p).rev() {
            let s: f64 = (i + 1..p).map(|j| self.lower[j * p + i] * z[j]).sum();
            z[i] = (z[i] - s) / self.lower[i * p + i];
        }
        let mut x = vec![0.0; p];
        for (k, &i) in self.perm.iter().enumerate() {
            x[i] = z[k];
        }
        x
    }
}

fn lower_swap(lower: &mut [f64], p: usize, a: usize, b: usize) {
    if a == b {
        return;
    }
    for j in 0..a {
        lower.swap(a * p + j, b * p + j);
    }
}

/// Columns left unpivoted at step `k`, plus the pivoted columns that enter
/// their least-squares representation with a non-negligible weight.
fn dependency(a: &[f64], p: usize, perm: &[usize], k: usize, lower: &[f64]) -> Vec<usize> {
    let mut involved = vec![false; p];
    for &c in &perm[k..] {
        involved[c] = true;
        if k == 0 {
            continue;
        }
        // Solve L11 L11ᵀ β = A[piv, c]
        let mut z: Vec<f64> = perm[..k].iter().map(|&i| a[i * p + c]).collect();
        for i in 0..k {
            let s: f64 = (0..i).map(|j| lower[i * p + j] * z[j]).sum();
            z[i] = (z[i] - s) / lower[i * p + i];
        }
        for i in (0..k).rev() {
            let s: f64 = (i + 1..k).map(|j| lower[j * p + i] * z[j]).sum();
            z[i] = (z[i] - s) / lower[i * p + i];
        }
        for (i, beta) in z.iter().enumerate() {
            if libm::fabs(*beta) > 1e-6 {
                involved[perm[i]] = true;
            }
        }
    }
    (0..p).filter(|&i| involved[i]).collect()
}

/// Minimizes ‖X·β − y‖² for column-major `columns` of equal length.
///
/// `min_rows` is the smallest acceptable row count (callers pass `p + 1` for a
/// strictly over-determined fit, `p` to allow exact interpolation).
pub fn least_squares(columns: &[Vec<f64>], y: &[f64], min_rows: usize) -> Result<Vec<f64>, LinalgError> {
    let p = columns.len();
    let n = y.len();
    if n < min_rows || n < p {
        return Err(LinalgError::TooFewRows { rows: n, params: p });
    }
    if y.iter().chain(columns.iter().flatten()).any(|v| !v.is_finite()) {
        return Err(LinalgError::NonFinite);
    }
    let norms: Vec<f64> = columns.iter().map(|c| libm::sqrt(c.iter().map(|v| v * v).sum())).collect();
    let zero: Vec<usize> = (0..p).filter(|&j| norms[j] == 0.0).collect();
    if !zero.is_empty() {
        return Err(LinalgError::RankDeficient { columns: zero });
    }
    let mut gram = vec![0.0; p * p];
    let mut rhs = vec![0.0; p];
    for i in 0..p {
        for j in 0..=i {
            let g: f64 = columns[i].iter().zip(&columns[j]).map(|(a, b)| a * b).sum::<f64>() / (norms[i] * norms[j]);
            gram[i * p + j] = g;
            gram[j * p + i] = g;
        }
        rhs[i] = columns[i].iter().zip(y).map(|(a, b)| a * b).sum::<f64>() / norms[i];
    }
    let chol = PivotedCholesky::factor(&gram, p, RANK_TOL)?;
    let scaled = chol.solve(&rhs);
    Ok(scaled.iter().zip(&norms).map(|(b, s)| b / s).collect())
}
