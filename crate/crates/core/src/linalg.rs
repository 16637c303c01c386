//! Dense factorization helpers shared by the geometry and dynamics modules.
//!
//! Rank decisions and orthonormal bases go through column-pivoted QR, and
//! projector-type matrices through symmetric eigendecomposition. Both are
//! backward stable here, whereas the library's iterative SVD loses accuracy
//! on clustered singular values.

use nalgebra::{DMatrix, DVector};

/// Orthonormal basis of the column space together with the numerical rank.
/// Rank counts pivoted-QR diagonal entries above `rel_tol` times the largest
/// one (the diagonal of a column-pivoted R estimates the singular values).
pub fn column_space_basis(raw: &DMatrix<f64>, rel_tol: f64) -> DMatrix<f64> {
    column_space_basis_scaled(raw, rel_tol, 0.0)
}

/// [`column_space_basis`] with a scale floor for the rank cutoff: entries
/// are compared against `rel_tol * max(leading pivot, scale_floor)`. Blocks
/// sliced out of an orthonormal basis pass `scale_floor = 1` so that a block
/// consisting of rounding noise is recognized as zero rather than normalized
/// into garbage directions.
pub fn column_space_basis_scaled(
    raw: &DMatrix<f64>,
    rel_tol: f64,
    scale_floor: f64,
) -> DMatrix<f64> {
    let k = raw.nrows();
    let m = raw.ncols();
    if k == 0 || m == 0 {
        return DMatrix::zeros(k, 0);
    }
    let qr = raw.clone().col_piv_qr();
    let q = qr.q();
    let r = qr.r();
    let diag_len = r.nrows().min(r.ncols());
    let lead = r[(0, 0)].abs().max(scale_floor);
    if !(lead > 0.0) {
        return DMatrix::zeros(k, 0);
    }
    let cutoff = rel_tol * lead;
    let mut rank = 0;
    for i in 0..diag_len {
        if r[(i, i)].abs() > cutoff {
            rank += 1;
        } else {
            break;
        }
    }
    q.columns(0, rank).into_owned()
}

/// Orthonormal basis of the range of a symmetric projector-like matrix
/// (spectrum at 0 and 1). Householder QR with column pivoting and a
/// unit-scale rank floor: direct and backward stable, unlike the library's
/// iterative spectral kernels, which lose accuracy on the repeated
/// eigenvalues that projectors always have.
pub fn projector_range_basis(projector: &DMatrix<f64>) -> DMatrix<f64> {
    column_space_basis_scaled(projector, 1e-8, 1.0)
}

/// Minimum-norm least-squares solution of A x = b via a complete orthogonal
/// decomposition (column-pivoted QR of A followed by a QR of the leading
/// rows of R). Works for any shape and rank.
pub fn min_norm_solve(a: &DMatrix<f64>, b: &DVector<f64>, rel_tol: f64) -> DVector<f64> {
    min_norm_solve_scaled(a, b, rel_tol, 0.0)
}

/// [`min_norm_solve`] with a scale floor on the rank decision (see
/// [`column_space_basis_scaled`]): systems whose matrix is rounding noise
/// relative to the floor are treated as rank zero instead of being
/// "solved" with enormous solutions.
pub fn min_norm_solve_scaled(
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    rel_tol: f64,
    scale_floor: f64,
) -> DVector<f64> {
    let n = a.ncols();
    let x_cols = min_norm_solve_mat_scaled(
        a,
        &DMatrix::from_column_slice(b.len(), 1, b.as_slice()),
        rel_tol,
        scale_floor,
    );
    DVector::from_column_slice(x_cols.column(0).as_slice())
        .rows(0, n)
        .into_owned()
}

/// Column-wise version of [`min_norm_solve`].
pub fn min_norm_solve_mat(a: &DMatrix<f64>, b: &DMatrix<f64>, rel_tol: f64) -> DMatrix<f64> {
    min_norm_solve_mat_scaled(a, b, rel_tol, 0.0)
}

/// Column-wise version of [`min_norm_solve_scaled`].
pub fn min_norm_solve_mat_scaled(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    rel_tol: f64,
    scale_floor: f64,
) -> DMatrix<f64> {
    let m = a.nrows();
    let n = a.ncols();
    assert_eq!(b.nrows(), m, "right-hand side has wrong row count");
    if n == 0 || m == 0 {
        return DMatrix::zeros(n, b.ncols());
    }
    let qr = a.clone().col_piv_qr();
    let q = qr.q();
    let r = qr.r();
    let diag_len = r.nrows().min(r.ncols());
    let lead = r[(0, 0)].abs().max(scale_floor);
    if !(lead > 0.0) {
        return DMatrix::zeros(n, b.ncols());
    }
    let cutoff = rel_tol * lead;
    let mut rank = 0;
    for i in 0..diag_len {
        if r[(i, i)].abs() > cutoff {
            rank += 1;
        } else {
            break;
        }
    }
    if rank == 0 {
        return DMatrix::zeros(n, b.ncols());
    }
    // A P = Q R with R = [R_top; ~0]; factor R_topᵀ = U T so that
    // A P = Q₁ Tᵀ Uᵀ, giving the min-norm solution x_P = U T⁻ᵀ Q₁ᵀ b.
    let r_top = r.rows(0, rank).into_owned(); // rank x n
    let qr2 = r_top.transpose().qr();
    let u = qr2.q(); // n x rank, orthonormal
    let t = qr2.r(); // rank x rank, upper triangular
    let q1 = q.columns(0, rank);
    let c = q1.transpose() * b; // rank x nrhs
    let w = t
        .transpose()
        .solve_lower_triangular(&c)
        .expect("triangular solve on full-rank factor");
    let mut x_p = &u * w; // n x nrhs, in permuted coordinates
    // Undo the column permutation: x = P x_P.
    qr.p().inv_permute_rows(&mut x_p);
    x_p
}

/// Least-squares residual norm ||A x - b|| for the min-norm solution.
pub fn least_squares_residual(a: &DMatrix<f64>, b: &DVector<f64>, rel_tol: f64) -> f64 {
    let x = min_norm_solve(a, b, rel_tol);
    (a * x - b).norm()
}

/// [`least_squares_residual`] with a scale floor on the rank decision.
pub fn least_squares_residual_scaled(
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    rel_tol: f64,
    scale_floor: f64,
) -> f64 {
    let x = min_norm_solve_scaled(a, b, rel_tol, scale_floor);
    (a * x - b).norm()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn column_space_of_projector_residual_is_exact() {
        // Regression for the clustered-singular-value case that defeats the
        // iterative SVD: a 6x6 projector with a 3-dimensional range.
        let raw = DMatrix::from_fn(6, 3, |i, j| (i as f64).powi(j as i32));
        let b = column_space_basis(&raw, 1e-10);
        let p = &b * b.transpose();
        let residual = DMatrix::<f64>::identity(6, 6) - &p;
        let compl = projector_range_basis(&residual);
        assert_eq!(compl.ncols(), 3);
        let recomposed = &p + &compl * compl.transpose();
        assert_abs_diff_eq!(recomposed, DMatrix::identity(6, 6), epsilon = 1e-12);
    }

    #[test]
    fn min_norm_solve_square_full_rank() {
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 3.0]);
        let b = DVector::from_column_slice(&[5.0, 10.0]);
        let x = min_norm_solve(&a, &b, 1e-12);
        assert_abs_diff_eq!(&a * &x, b, epsilon = 1e-12);
    }

    #[test]
    fn min_norm_solve_underdetermined_picks_smallest() {
        // x1 + x2 = 2 has min-norm solution (1, 1).
        let a = DMatrix::from_row_slice(1, 2, &[1.0, 1.0]);
        let b = DVector::from_column_slice(&[2.0]);
        let x = min_norm_solve(&a, &b, 1e-12);
        assert_abs_diff_eq!(x[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(x[1], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn min_norm_solve_rank_deficient() {
        // Columns are parallel: A = [1 2; 1 2]; b = (3, 3).
        // Solutions x with x1 + 2 x2 = 3; min-norm = (3/5, 6/5).
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 1.0, 2.0]);
        let b = DVector::from_column_slice(&[3.0, 3.0]);
        let x = min_norm_solve(&a, &b, 1e-12);
        assert_abs_diff_eq!(x[0], 0.6, epsilon = 1e-12);
        assert_abs_diff_eq!(x[1], 1.2, epsilon = 1e-12);
    }

    #[test]
    fn min_norm_solve_inconsistent_reports_residual() {
        // Overdetermined inconsistent system: residual is the distance to the
        // column space.
        let a = DMatrix::from_row_slice(3, 1, &[1.0, 0.0, 0.0]);
        let b = DVector::from_column_slice(&[1.0, 1.0, 0.0]);
        let r = least_squares_residual(&a, &b, 1e-12);
        assert_abs_diff_eq!(r, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn min_norm_matches_normal_equations_on_random_tall() {
        let a = DMatrix::from_fn(6, 3, |i, j| ((3 * i + j) as f64 * 0.7).sin());
        let b = DVector::from_fn(6, |i, _| (i as f64 * 0.31).cos());
        let x = min_norm_solve(&a, &b, 1e-12);
        // Full-rank tall case: x solves the normal equations.
        let lhs = a.transpose() * &a * &x;
        let rhs = a.transpose() * &b;
        assert_abs_diff_eq!(lhs, rhs, epsilon = 1e-10);
    }
}
