//! Small dense linear-algebra helpers shared by the model, chain and
//! estimation code.

use nalgebra::{Cholesky, DMatrix, Dyn};

use crate::error::{Error, Result};

/// Outcome of an unpivoted dense Cholesky attempt.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PivotReport {
    /// Every pivot was strictly positive; carries the smallest one.
    Positive { min_pivot: f64 },
    /// The pivot at `index` was zero, negative or not finite.
    Failed { index: usize, pivot: f64 },
}

/// Runs a textbook `L Lᵀ` factorization and reports pivots. Pivots are the
/// Schur-complement diagonal entries before the square root; threshold 0.
pub fn cholesky_pivots(a: &DMatrix<f64>) -> PivotReport {
    let n = a.nrows();
    let mut l = DMatrix::<f64>::zeros(n, n);
    let mut min_pivot = f64::INFINITY;
    for j in 0..n {
        let mut d = a[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if !(d > 0.0) || !d.is_finite() {
            return PivotReport::Failed { index: j, pivot: d };
        }
        min_pivot = min_pivot.min(d);
        let ljj = d.sqrt();
        l[(j, j)] = ljj;
        for i in (j + 1)..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / ljj;
        }
    }
    PivotReport::Positive { min_pivot }
}

/// Symmetric positive-definite factorization. On failure the first
/// non-positive pivot is located and returned in the error.
pub fn spd_factor(a: &DMatrix<f64>) -> Result<Cholesky<f64, Dyn>> {
    match Cholesky::new(a.clone()) {
        Some(c) => Ok(c),
        None => {
            let index = match cholesky_pivots(a) {
                PivotReport::Failed { index, .. } => index,
                // nalgebra rejected a matrix whose pivots look positive: this
                // only happens with non-finite entries.
                PivotReport::Positive { .. } => 0,
            };
            Err(Error::NotPositiveDefinite { index })
        }
    }
}

/// Inverse of an SPD matrix through its Cholesky factor, symmetrized.
pub fn spd_inverse(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let inv = spd_factor(a)?.inverse();
    Ok(symmetrize(&inv))
}

pub fn symmetrize(a: &DMatrix<f64>) -> DMatrix<f64> {
    (a + a.transpose()) * 0.5
}

/// Largest `|a_ij - a_ji|`.
pub fn asymmetry(a: &DMatrix<f64>) -> f64 {
    let n = a.nrows();
    let mut worst = 0.0_f64;
    for i in 0..n {
        for j in (i + 1)..n {
            worst = worst.max((a[(i, j)] - a[(j, i)]).abs());
        }
    }
    worst
}

pub fn max_abs(a: &DMatrix<f64>) -> f64 {
    a.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
}

/// Factor `G` with `G Gᵀ = A` for a symmetric positive-semidefinite `A`,
/// using diagonal pivoting. Pivots below `rel_tol * trace(A)` are treated as
/// zero and the remaining columns are left empty. The returned factor is in
/// the original ordering, so it is generally not triangular.
pub fn psd_factor(a: &DMatrix<f64>, rel_tol: f64) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::Dimension(format!("expected square matrix, got {}x{}", n, a.ncols())));
    }
    let trace: f64 = (0..n).map(|i| a[(i, i)]).sum();
    let threshold = rel_tol * trace.abs();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut work = a.clone();
    let mut l = DMatrix::<f64>::zeros(n, n);
    for j in 0..n {
        // pick the largest remaining diagonal
        let (mut best, mut best_val) = (j, f64::NEG_INFINITY);
        for i in j..n {
            let v = work[(perm[i], perm[i])];
            if v > best_val {
                best = i;
                best_val = v;
            }
        }
        if best_val <= threshold {
            if best_val < -threshold {
                return Err(Error::BoundaryCovariance(format!(
                    "matrix is not positive semidefinite (pivot {best_val:e})"
                )));
            }
            break;
        }
        perm.swap(j, best);
        let p = perm[j];
        let d = best_val.sqrt();
        l[(p, j)] = d;
        for &q in &perm[(j + 1)..] {
            l[(q, j)] = work[(q, p)] / d;
        }
        for &q in &perm[(j + 1)..] {
            for &r in &perm[(j + 1)..] {
                work[(q, r)] -= l[(q, j)] * l[(r, j)];
            }
        }
    }
    Ok(l)
}

/// `‖a - b‖_F / (1 + ‖b‖_F)`.
pub fn relative_deviation(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).norm() / (1.0 + b.norm())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pivots_of_identity() {
        let r = cholesky_pivots(&DMatrix::identity(4, 4));
        assert_eq!(r, PivotReport::Positive { min_pivot: 1.0 });
    }

    #[test]
    fn pivots_report_first_failure() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        match cholesky_pivots(&a) {
            PivotReport::Failed { index, pivot } => {
                assert_eq!(index, 1);
                assert!((pivot + 3.0).abs() < 1e-15);
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(spd_factor(&a), Err(Error::NotPositiveDefinite { index: 1 })));
    }

    #[test]
    fn psd_factor_handles_rank_deficiency() {
        let u = nalgebra::DVector::from_vec(vec![1.0, -2.0, 0.5]);
        let a = &u * u.transpose();
        let g = psd_factor(&a, 1e-12).unwrap();
        assert!((&g * g.transpose() - &a).norm() < 1e-12);
        let z = psd_factor(&DMatrix::zeros(3, 3), 1e-12).unwrap();
        assert_eq!(z, DMatrix::zeros(3, 3));
    }

    #[test]
    fn psd_factor_rejects_indefinite() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        assert!(psd_factor(&a, 1e-12).is_err());
    }
}
