//! Dense least squares and symmetric inversion on `nalgebra` matrices.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Relative pivot size below which a design column counts as linearly
/// dependent on the columns before it.
pub const COLLINEARITY_TOL: f64 = 1e-10;

/// Default relative tolerance for [`invert_spd`].
pub const SPD_TOL: f64 = 1e-12;

/// Least-squares solution together with the unscaled covariance `(X'X)^-1`.
#[derive(Debug, Clone)]
pub struct LeastSquares {
    pub beta: DVector<f64>,
    pub xtx_inv: DMatrix<f64>,
}

/// Solve `min ||y - X b||` through a Householder QR factorization.
///
/// A column whose QR pivot is smaller than [`COLLINEARITY_TOL`] times the
/// column's own norm is reported as collinear. The error carries the column
/// index; callers that know the variable names attach them with
/// [`Error::with_names`].
pub fn solve_least_squares(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<LeastSquares> {
    let (n, p) = x.shape();
    if y.len() != n {
        return Err(Error::Contract(format!(
            "response has {} rows, design has {n}",
            y.len()
        )));
    }
    if p == 0 {
        return Err(Error::Contract("design matrix has no columns".into()));
    }
    if n < p {
        return Err(Error::InsufficientObservations(format!(
            "{n} rows for {p} parameters"
        )));
    }

    let qr = x.clone().qr();
    let r = qr.r();
    let max_pivot = (0..p).map(|j| r[(j, j)].abs()).fold(0.0_f64, f64::max);
    for j in 0..p {
        let col_norm = x.column(j).norm();
        let pivot = r[(j, j)].abs();
        if col_norm == 0.0 || pivot <= COLLINEARITY_TOL * col_norm || pivot <= f64::EPSILON * max_pivot
        {
            return Err(Error::Collinear {
                column: j,
                name: format!("column {j}"),
            });
        }
    }

    let qty = qr.q().transpose() * y;
    let beta = r
        .solve_upper_triangular(&qty)
        .ok_or_else(|| Error::Degenerate("triangular solve failed".into()))?;
    let r_inv = r
        .solve_upper_triangular(&DMatrix::identity(p, p))
        .ok_or_else(|| Error::Degenerate("triangular inverse failed".into()))?;
    let xtx_inv = symmetrize(&(&r_inv * r_inv.transpose()));

    Ok(LeastSquares { beta, xtx_inv })
}

/// Weighted least squares with non-negative observation weights.
pub fn solve_weighted_least_squares(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    weights: &[f64],
) -> Result<LeastSquares> {
    let mut xw = x.clone();
    let mut yw = y.clone();
    for (i, &w) in weights.iter().enumerate() {
        let sw = w.max(0.0).sqrt();
        xw.row_mut(i).scale_mut(sw);
        yw[i] *= sw;
    }
    solve_least_squares(&xw, &yw)
}

/// Result of [`invert_spd`].
#[derive(Debug, Clone)]
pub struct SpdInverse {
    pub inverse: DMatrix<f64>,
    /// Number of eigenvalues retained (equals the dimension when the
    /// Cholesky path succeeds).
    pub rank: usize,
    /// True when the eigendecomposition fallback produced a pseudo-inverse.
    pub pseudo: bool,
}

/// `|A - A'|_inf <= tol (1 + |A|_inf)`, with `|.|_inf` the max-row-sum norm.
pub fn is_symmetric(a: &DMatrix<f64>, tol: f64) -> bool {
    if !a.is_square() {
        return false;
    }
    let diff = a - a.transpose();
    inf_norm(&diff) <= tol * (1.0 + inf_norm(a))
}

fn inf_norm(a: &DMatrix<f64>) -> f64 {
    a.row_iter()
        .map(|row| row.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Average `A` and `A'` to clear rounding asymmetry.
pub fn symmetrize(a: &DMatrix<f64>) -> DMatrix<f64> {
    (a + a.transpose()) * 0.5
}

/// Invert a symmetric matrix.
///
/// Uses a Cholesky factorization when every pivot exceeds
/// `tol * trace(A) / p`. Otherwise falls back to a symmetric pseudo-inverse
/// built from the eigendecomposition, zeroing eigenvalues at or below
/// `tol * max|lambda|` (negative eigenvalues included) and reporting the
/// retained rank.
pub fn invert_spd(a: &DMatrix<f64>, tol: f64) -> Result<SpdInverse> {
    if !is_symmetric(a, 1e-10) {
        return Err(Error::Contract("matrix is not symmetric".into()));
    }
    let p = a.nrows();
    if p == 0 {
        return Ok(SpdInverse {
            inverse: DMatrix::zeros(0, 0),
            rank: 0,
            pseudo: false,
        });
    }
    let a = symmetrize(a);
    let trace = a.trace();

    if trace > 0.0 {
        if let Some(chol) = a.clone().cholesky() {
            let l = chol.l_dirty();
            let floor = tol * trace / p as f64;
            if (0..p).all(|i| l[(i, i)] * l[(i, i)] > floor) {
                return Ok(SpdInverse {
                    inverse: symmetrize(&chol.inverse()),
                    rank: p,
                    pseudo: false,
                });
            }
        }
    }

    let eig = a.symmetric_eigen();
    let max_abs = eig.eigenvalues.iter().map(|v| v.abs()).fold(0.0_f64, f64::max);
    let cutoff = tol * max_abs;
    let mut inverse = DMatrix::zeros(p, p);
    let mut rank = 0;
    for (k, &lambda) in eig.eigenvalues.iter().enumerate() {
        if lambda > cutoff {
            rank += 1;
            let v = eig.eigenvectors.column(k);
            inverse += (v * v.transpose()) / lambda;
        }
    }
    Ok(SpdInverse {
        inverse: symmetrize(&inverse),
        rank,
        pseudo: true,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Normal equations solved by Gaussian elimination with partial pivoting.
    fn gauss_normal_equations(x: &[Vec<f64>], y: &[f64]) -> Vec<f64> {
        let p = x[0].len();
        let mut a = vec![vec![0.0; p + 1]; p];
        for (row, &yi) in x.iter().zip(y) {
            for i in 0..p {
                for j in 0..p {
                    a[i][j] += row[i] * row[j];
                }
                a[i][p] += row[i] * yi;
            }
        }
        for col in 0..p {
            let piv = (col..p)
                .max_by(|&r1, &r2| a[r1][col].abs().partial_cmp(&a[r2][col].abs()).unwrap())
                .unwrap();
            a.swap(col, piv);
            for r in col + 1..p {
                let f = a[r][col] / a[col][col];
                for c in col..=p {
                    a[r][c] -= f * a[col][c];
                }
            }
        }
        let mut b = vec![0.0; p];
        for i in (0..p).rev() {
            let s: f64 = (i + 1..p).map(|j| a[i][j] * b[j]).sum();
            b[i] = (a[i][p] - s) / a[i][i];
        }
        b
    }

    #[test]
    fn perfect_fit_recovers_exact_coefficients() {
        let x = DMatrix::from_row_slice(3, 2, &[1.0, 1.0, 2.0, 1.0, 3.0, 1.0]);
        let y = DVector::from_vec(vec![3.0, 5.0, 7.0]);
        let ls = solve_least_squares(&x, &y).unwrap();
        assert!((ls.beta[0] - 2.0).abs() < 1e-14);
        assert!((ls.beta[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn duplicated_column_is_collinear() {
        let x = DMatrix::from_row_slice(
            4,
            3,
            &[1.0, 1.0, 1.0, 2.0, 2.0, 1.0, 3.0, 3.0, 1.0, 5.0, 5.0, 1.0],
        );
        let y = DVector::from_vec(vec![1.0, 2.0, 2.0, 4.0]);
        match solve_least_squares(&x, &y) {
            Err(Error::Collinear { column, .. }) => assert_eq!(column, 1),
            other => panic!("expected collinearity, got {other:?}"),
        }
    }

    #[test]
    fn random_system_matches_gaussian_elimination() {
        // fixed 6x3 system
        let rows = vec![
            vec![0.3, -1.2, 1.0],
            vec![1.7, 0.4, 1.0],
            vec![-0.8, 2.2, 1.0],
            vec![2.5, 1.1, 1.0],
            vec![0.0, -0.6, 1.0],
            vec![1.1, 3.0, 1.0],
        ];
        let y = vec![1.0, 2.5, -0.5, 4.2, 0.1, 3.3];
        let oracle = gauss_normal_equations(&rows, &y);
        let x = DMatrix::from_fn(6, 3, |i, j| rows[i][j]);
        let ls = solve_least_squares(&x, &DVector::from_vec(y)).unwrap();
        for j in 0..3 {
            assert!((ls.beta[j] - oracle[j]).abs() < 1e-9);
        }
    }

    #[test]
    fn residuals_orthogonal_to_design() {
        let x = DMatrix::from_fn(8, 3, |i, j| if j == 2 { 1.0 } else { ((i * 7 + j * 3) % 5) as f64 + 0.1 * i as f64 });
        let y = DVector::from_fn(8, |i, _| (i as f64).sin() * 3.0 + 1.0);
        let ls = solve_least_squares(&x, &y).unwrap();
        let resid = &y - &x * &ls.beta;
        let xtr = x.transpose() * resid;
        let xty = x.transpose() * &y;
        assert!(xtr.amax() <= 1e-8 * xty.amax());
    }

    #[test]
    fn too_few_rows_is_rejected() {
        let x = DMatrix::from_row_slice(1, 2, &[1.0, 1.0]);
        let y = DVector::from_vec(vec![1.0]);
        assert!(matches!(
            solve_least_squares(&x, &y),
            Err(Error::InsufficientObservations(_))
        ));
    }

    #[test]
    fn identity_inverts_to_identity() {
        let inv = invert_spd(&DMatrix::identity(3, 3), SPD_TOL).unwrap();
        assert!((inv.inverse - DMatrix::<f64>::identity(3, 3)).amax() < 1e-15);
        assert_eq!(inv.rank, 3);
        assert!(!inv.pseudo);
    }

    #[test]
    fn diagonal_inverse() {
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![4.0, 9.0]));
        let inv = invert_spd(&a, SPD_TOL).unwrap().inverse;
        assert!((inv[(0, 0)] - 0.25).abs() < 1e-15);
        assert!((inv[(1, 1)] - 1.0 / 9.0).abs() < 1e-15);
        assert_eq!(inv[(0, 1)], 0.0);
    }

    #[test]
    fn two_by_two_closed_form() {
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        let inv = invert_spd(&a, SPD_TOL).unwrap().inverse;
        let expected = DMatrix::from_row_slice(2, 2, &[2.0 / 3.0, -1.0 / 3.0, -1.0 / 3.0, 2.0 / 3.0]);
        assert!((&inv - expected).amax() < 1e-12);
        assert!((&a * &inv - DMatrix::<f64>::identity(2, 2)).amax() < 1e-12);
    }

    #[test]
    fn singular_matrix_uses_pseudo_inverse() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let inv = invert_spd(&a, SPD_TOL).unwrap();
        assert!(inv.pseudo);
        assert_eq!(inv.rank, 1);
        // Moore-Penrose: A A+ A = A
        assert!((&a * &inv.inverse * &a - &a).amax() < 1e-12);
    }

    #[test]
    fn nonsymmetric_input_is_a_contract_violation() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 1.0]);
        assert!(matches!(invert_spd(&a, SPD_TOL), Err(Error::Contract(_))));
    }
}
