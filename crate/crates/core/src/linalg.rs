//! Small dense helpers on top of nalgebra: a Cholesky factorization that
//! reports the failing pivot, triangular solves, and symmetric checks.

#[allow(unused_imports)]
use num_traits::Float;

use crate::{Error, Matrix, Result, Vector};

/// Lower-triangular Cholesky factor `L` with `A = L Lᵀ`.
///
/// Only the lower triangle of `a` is read. Fails with the index of the first
/// non-positive pivot.
pub fn cholesky(a: &Matrix) -> Result<Matrix> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::DimensionMismatch {
            what: "cholesky input columns",
            expected: n,
            found: a.ncols(),
        });
    }
    let mut l = Matrix::zeros(n, n);
    for j in 0..n {
        let mut d = a[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if !(d > 0.0) || !d.is_finite() {
            return Err(Error::NotPositiveDefinite { pivot: j });
        }
        let d = d.sqrt();
        l[(j, j)] = d;
        for i in (j + 1)..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / d;
        }
    }
    Ok(l)
}

/// Solves `L x = b` for lower-triangular `L`.
pub fn solve_lower(l: &Matrix, b: &Vector) -> Vector {
    let n = l.nrows();
    let mut x = b.clone();
    for i in 0..n {
        let mut s = x[i];
        for k in 0..i {
            s -= l[(i, k)] * x[k];
        }
        x[i] = s / l[(i, i)];
    }
    x
}

/// Solves `Lᵀ x = b` for lower-triangular `L`.
pub fn solve_lower_transpose(l: &Matrix, b: &Vector) -> Vector {
    let n = l.nrows();
    let mut x = b.clone();
    for i in (0..n).rev() {
        let mut s = x[i];
        for k in (i + 1)..n {
            s -= l[(k, i)] * x[k];
        }
        x[i] = s / l[(i, i)];
    }
    x
}

/// Solves `A x = b` given the Cholesky factor of `A`.
pub fn cholesky_solve(l: &Matrix, b: &Vector) -> Vector {
    solve_lower_transpose(l, &solve_lower(l, b))
}

/// Inverse of a symmetric positive-definite matrix.
pub fn spd_inverse(a: &Matrix) -> Result<Matrix> {
    let l = cholesky(a)?;
    let n = a.nrows();
    let mut inv = Matrix::zeros(n, n);
    let mut e = Vector::zeros(n);
    for j in 0..n {
        e.fill(0.0);
        e[j] = 1.0;
        let col = cholesky_solve(&l, &e);
        inv.set_column(j, &col);
    }
    symmetrize(&mut inv);
    Ok(inv)
}

/// Log-determinant of an SPD matrix from its Cholesky factor.
pub fn log_det_from_cholesky(l: &Matrix) -> f64 {
    2.0 * (0..l.nrows()).map(|i| l[(i, i)].ln()).sum::<f64>()
}

/// Replaces `a` by `(a + aᵀ)/2`.
pub fn symmetrize(a: &mut Matrix) {
    let n = a.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let m = 0.5 * (a[(i, j)] + a[(j, i)]);
            a[(i, j)] = m;
            a[(j, i)] = m;
        }
    }
}

/// Fails if `a` is not square or any mirrored pair differs by more than `tol`.
pub fn check_symmetric(a: &Matrix, tol: f64) -> Result<()> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::DimensionMismatch {
            what: "square matrix columns",
            expected: n,
            found: a.ncols(),
        });
    }
    for i in 0..n {
        for j in (i + 1)..n {
            let diff = (a[(i, j)] - a[(j, i)]).abs();
            if !(diff <= tol) {
                return Err(Error::Asymmetric { row: i, col: j, diff });
            }
        }
    }
    Ok(())
}

pub fn all_finite(a: &Matrix) -> bool {
    a.iter().all(|x| x.is_finite())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cholesky_reconstructs() {
        let a = Matrix::from_row_slice(3, 3, &[4.0, 2.0, 0.4, 2.0, 5.0, 1.0, 0.4, 1.0, 3.0]);
        let l = cholesky(&a).unwrap();
        let r = &l * l.transpose();
        assert!((r - &a).abs().max() < 1e-12);
        let inv = spd_inverse(&a).unwrap();
        assert!((&a * inv - Matrix::identity(3, 3)).abs().max() < 1e-12);
    }

    #[test]
    fn cholesky_reports_pivot() {
        let a = Matrix::from_row_slice(3, 3, &[1.0, 0.0, 0.0, 0.0, 1.0, 1.0, 0.0, 1.0, 1.0]);
        assert_eq!(cholesky(&a), Err(Error::NotPositiveDefinite { pivot: 2 }));
        let b = Matrix::from_row_slice(1, 1, &[-1.0]);
        assert_eq!(cholesky(&b), Err(Error::NotPositiveDefinite { pivot: 0 }));
    }

    #[test]
    fn triangular_solves() {
        let a = Matrix::from_row_slice(2, 2, &[4.0, 1.0, 1.0, 3.0]);
        let l = cholesky(&a).unwrap();
        let b = Vector::from_vec(alloc::vec![1.0, 2.0]);
        let x = cholesky_solve(&l, &b);
        assert!((&a * x - b).abs().max() < 1e-14);
    }
}
