//! Small dense helpers shared by the phase-space and Fisher modules.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Components smaller than this are skipped when fixing eigenvector signs.
const SIGN_EPS: f64 = 1e-12;

/// Symplectic form for `modes` modes in interleaved `(x1, p1, x2, p2, ...)` order.
pub fn omega(modes: usize) -> DMatrix<f64> {
    let mut om = DMatrix::zeros(2 * modes, 2 * modes);
    for k in 0..modes {
        om[(2 * k, 2 * k + 1)] = 1.0;
        om[(2 * k + 1, 2 * k)] = -1.0;
    }
    om
}

/// Largest absolute entry of `a - a^T`.
pub fn max_asymmetry(a: &DMatrix<f64>) -> f64 {
    let n = a.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in (i + 1)..n {
            worst = worst.max((a[(i, j)] - a[(j, i)]).abs());
        }
    }
    worst
}

pub fn symmetrize(a: &DMatrix<f64>) -> DMatrix<f64> {
    (a + a.transpose()) * 0.5
}

/// Eigen-decomposition of a symmetric matrix with eigenvalues ascending.
///
/// Each eigenvector is flipped so that its first component with magnitude
/// above `1e-12` is positive, which makes the output deterministic.
pub fn sym_eigen_sorted(a: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let n = a.nrows();
    let eig = SymmetricEigen::new(symmetrize(a));
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));

    let values = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut vectors = DMatrix::zeros(n, n);
    for (col, &i) in order.iter().enumerate() {
        let mut v = eig.eigenvectors.column(i).into_owned();
        if let Some(first) = v.iter().find(|c| c.abs() > SIGN_EPS) {
            if *first < 0.0 {
                v.neg_mut();
            }
        }
        vectors.set_column(col, &v);
    }
    (values, vectors)
}

/// Inverse of a symmetric positive-definite matrix together with its
/// spectral condition number.
pub fn spd_inverse(a: &DMatrix<f64>) -> Result<(DMatrix<f64>, f64)> {
    let (values, _) = sym_eigen_sorted(a);
    let lo = values[0];
    let hi = values[values.len() - 1];
    if lo <= 0.0 {
        return Err(Error::IllConditioned(f64::INFINITY));
    }
    let cond = hi / lo;
    let chol = nalgebra::Cholesky::new(symmetrize(a)).ok_or(Error::IllConditioned(cond))?;
    Ok((chol.inverse(), cond))
}

/// Outer product `u v^T`.
pub fn outer(u: &DVector<f64>, v: &DVector<f64>) -> DMatrix<f64> {
    u * v.transpose()
}

/// Largest absolute entry of `a - b`.
pub fn max_abs_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eigen_sorted_with_sign_convention() {
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        let (w, v) = sym_eigen_sorted(&a);
        assert!((w[0] - 1.0).abs() < 1e-14 && (w[1] - 3.0).abs() < 1e-14);
        assert!(v[(0, 0)] > 0.0 && v[(0, 1)] > 0.0);
        let rebuilt = &v * DMatrix::from_diagonal(&w) * v.transpose();
        assert!(max_abs_diff(&rebuilt, &a) < 1e-14);
    }

    #[test]
    fn omega_is_antisymmetric_and_squares_to_minus_identity() {
        let om = omega(3);
        assert_eq!(&om + om.transpose(), DMatrix::zeros(6, 6));
        assert_eq!(&om * &om, -DMatrix::identity(6, 6));
    }

    #[test]
    fn spd_inverse_rejects_singular() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        assert!(spd_inverse(&a).is_err());
        let b = DMatrix::from_row_slice(2, 2, &[4.0, 0.0, 0.0, 1.0]);
        let (inv, cond) = spd_inverse(&b).unwrap();
        assert!((cond - 4.0).abs() < 1e-12);
        assert!((inv[(0, 0)] - 0.25).abs() < 1e-15);
    }
}
