//! Dense matrix helpers shared by the rest of the crate.
//!
//! Everything is carried by [`DenseMatrix`] (an alias for `nalgebra::DMatrix<f64>`);
//! this module adds the handful of operations the consensus machinery needs:
//! spectral radius, entrywise nonnegativity, Kronecker products and
//! minimum-norm least squares.

use thiserror::Error;

pub type DenseMatrix = nalgebra::DMatrix<f64>;
pub type Vector = nalgebra::DVector<f64>;

#[derive(Debug, Error, PartialEq)]
pub enum LinalgError {
    #[error("matrix is not square: {0} x {1}")]
    NotSquare(usize, usize),
    #[error("matrix must have at least one row and one column")]
    Empty,
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("rows have unequal lengths: row 0 has {expected} entries, row {row} has {found}")]
    RaggedRows {
        row: usize,
        expected: usize,
        found: usize,
    },
}

/// Builds a matrix from row-major nested slices, rejecting empty or ragged input.
pub fn from_rows(rows: &[Vec<f64>]) -> Result<DenseMatrix, LinalgError> {
    if rows.is_empty() || rows[0].is_empty() {
        return Err(LinalgError::Empty);
    }
    let ncols = rows[0].len();
    for (i, r) in rows.iter().enumerate() {
        if r.len() != ncols {
            return Err(LinalgError::RaggedRows {
                row: i,
                expected: ncols,
                found: r.len(),
            });
        }
    }
    let flat: Vec<f64> = rows.iter().flatten().copied().collect();
    Ok(DenseMatrix::from_row_slice(rows.len(), ncols, &flat))
}

/// Inverse of [`from_rows`], used when emitting scenario files.
pub fn to_rows(m: &DenseMatrix) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

/// Largest eigenvalue modulus of a square matrix.
pub fn spectral_radius(m: &DenseMatrix) -> Result<f64, LinalgError> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Err(LinalgError::Empty);
    }
    if m.nrows() != m.ncols() {
        return Err(LinalgError::NotSquare(m.nrows(), m.ncols()));
    }
    let eig = m.complex_eigenvalues();
    Ok(eig.iter().map(|z| z.norm()).fold(0.0, f64::max))
}

/// Eigenvalue range `(min, max)` of a symmetric matrix.
pub fn symmetric_eigen_range(m: &DenseMatrix) -> Result<(f64, f64), LinalgError> {
    if m.nrows() == 0 {
        return Err(LinalgError::Empty);
    }
    if m.nrows() != m.ncols() {
        return Err(LinalgError::NotSquare(m.nrows(), m.ncols()));
    }
    let eig = m.symmetric_eigenvalues();
    let lo = eig.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = eig.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok((lo, hi))
}

/// True when every entry is at least `-tol`.
pub fn is_nonnegative(m: &DenseMatrix, tol: f64) -> bool {
    m.iter().all(|&x| x >= -tol)
}

/// Smallest entry of the matrix.
pub fn min_entry(m: &DenseMatrix) -> f64 {
    m.iter().copied().fold(f64::INFINITY, f64::min)
}

/// Kronecker product `a ⊗ b`.
pub fn kron(a: &DenseMatrix, b: &DenseMatrix) -> DenseMatrix {
    a.kronecker(b)
}

/// Minimum-norm least-squares solution of `a x = b`.
///
/// Returns `(x, residual)` where `residual = ‖a x − b‖₂`. Built from two
/// Householder QR passes (a complete orthogonal decomposition): the
/// column-pivoted pass reveals the numerical rank — diagonal entries of `R`
/// below `1e-12 · |r₀₀|` count as zero — and a second QR of the surviving
/// rows of `R` turns the basic solution into the minimum-norm one.
/// Householder reflections are direct, so unlike an iteratively computed SVD
/// this path cannot return a silently mis-converged factorization; see the
/// `least_squares_survives_hard_kronecker_system` test for a 12×12 system
/// where the SVD of this nalgebra release loses five digits.
pub fn solve_linear_least_squares(
    a: &DenseMatrix,
    b: &Vector,
) -> Result<(Vector, f64), LinalgError> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return Err(LinalgError::Empty);
    }
    if a.nrows() != b.len() {
        return Err(LinalgError::DimensionMismatch(format!(
            "matrix has {} rows but right-hand side has {} entries",
            a.nrows(),
            b.len()
        )));
    }
    let ncols = a.ncols();
    let (q1, r, p) = a.clone().col_piv_qr().unpack();
    // Pivoting makes |r₀₀| the largest diagonal entry, so it plays the role
    // of σ_max in the rank cutoff.
    let tol = r[(0, 0)].abs() * 1e-12;
    let rank = (0..r.nrows().min(ncols))
        .take_while(|&i| r[(i, i)].abs() > tol)
        .count();
    if rank == 0 {
        return Ok((Vector::zeros(ncols), b.norm()));
    }
    let c1 = (q1.transpose() * b).rows(0, rank).into_owned();
    // R₁ᵀ = Q₂T with T square upper triangular, so the minimum-norm solution
    // of R₁w = c₁ is w = Q₂ T⁻ᵀ c₁.
    let qr2 = r.rows(0, rank).transpose().qr();
    let y = qr2
        .r()
        .tr_solve_upper_triangular(&c1)
        .ok_or_else(|| LinalgError::DimensionMismatch("triangular solve failed".into()))?;
    let mut x = qr2.q() * y;
    p.inv_permute_rows(&mut x);
    let residual = (a * &x - b).norm();
    Ok((x, residual))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn mat(rows: &[&[f64]]) -> DenseMatrix {
        from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn spectral_radius_identity() {
        assert_eq!(spectral_radius(&DenseMatrix::identity(2, 2)).unwrap(), 1.0);
    }

    #[test]
    fn spectral_radius_jordan_block() {
        // defective matrix with a double eigenvalue at 1
        let m = mat(&[&[1.0, 0.5], &[0.0, 1.0]]);
        assert!((spectral_radius(&m).unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn spectral_radius_triangular() {
        let m = mat(&[&[0.5, 0.0], &[1.0, 0.0]]);
        assert!((spectral_radius(&m).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn spectral_radius_rejects_non_square() {
        let m = DenseMatrix::zeros(2, 3);
        assert_eq!(spectral_radius(&m), Err(LinalgError::NotSquare(2, 3)));
    }

    #[test]
    fn nonnegativity_examples() {
        assert!(is_nonnegative(&mat(&[&[0.0, 1.0], &[2.0, 3.0]]), 0.0));
        assert!(is_nonnegative(&mat(&[&[-1e-15]]), 1e-12));
        assert!(!is_nonnegative(&mat(&[&[-1e-3]]), 1e-9));
    }

    #[test]
    fn kron_identity_is_block_diagonal() {
        let b = mat(&[&[1.0, 2.0], &[3.0, 4.0]]);
        let k = kron(&DenseMatrix::identity(2, 2), &b);
        let expect = mat(&[
            &[1.0, 2.0, 0.0, 0.0],
            &[3.0, 4.0, 0.0, 0.0],
            &[0.0, 0.0, 1.0, 2.0],
            &[0.0, 0.0, 3.0, 4.0],
        ]);
        assert_eq!(k, expect);
    }

    #[test]
    fn kron_swap_is_block_antidiagonal() {
        let a = mat(&[&[0.0, 1.0], &[1.0, 0.0]]);
        let b = mat(&[&[1.0, 2.0], &[3.0, 4.0]]);
        let k = kron(&a, &b);
        let expect = mat(&[
            &[0.0, 0.0, 1.0, 2.0],
            &[0.0, 0.0, 3.0, 4.0],
            &[1.0, 2.0, 0.0, 0.0],
            &[3.0, 4.0, 0.0, 0.0],
        ]);
        assert_eq!(k, expect);
    }

    #[test]
    fn kron_scalar_scales() {
        let b = mat(&[&[1.0, 2.0], &[3.0, 4.0]]);
        assert_eq!(kron(&mat(&[&[2.0]]), &b), 2.0 * b);
    }

    #[test]
    fn least_squares_identity() {
        let b = Vector::from_vec(vec![3.0, -1.0]);
        let (x, r) = solve_linear_least_squares(&DenseMatrix::identity(2, 2), &b).unwrap();
        assert!((x - b).norm() < 1e-12);
        assert!(r < 1e-12);
    }

    #[test]
    fn least_squares_overdetermined() {
        // [1;1] x = (1,3): best x = 2, residual sqrt(2)
        let a = mat(&[&[1.0], &[1.0]]);
        let b = Vector::from_vec(vec![1.0, 3.0]);
        let (x, r) = solve_linear_least_squares(&a, &b).unwrap();
        assert!((x[0] - 2.0).abs() < 1e-12);
        assert!((r - 2.0_f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn least_squares_underdetermined_minimum_norm() {
        // x1 + x2 = 2 has the minimum-norm solution (1, 1)
        let a = mat(&[&[1.0, 1.0]]);
        let b = Vector::from_vec(vec![2.0]);
        let (x, r) = solve_linear_least_squares(&a, &b).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-12 && (x[1] - 1.0).abs() < 1e-12);
        assert!(r < 1e-12);
    }

    #[test]
    fn least_squares_rank_deficient_minimum_norm() {
        // rows are parallel: rank 1. Consistent rhs, so the residual vanishes
        // and the answer must be the projection onto the row space.
        let a = mat(&[&[1.0, 2.0], &[2.0, 4.0]]);
        let b = Vector::from_vec(vec![5.0, 10.0]);
        let (x, r) = solve_linear_least_squares(&a, &b).unwrap();
        assert!(r < 1e-10);
        let expect = Vector::from_vec(vec![1.0, 2.0]);
        assert!((x - expect).norm() < 1e-10, "minimum-norm solution expected");
    }

    #[test]
    fn least_squares_zero_matrix() {
        let a = DenseMatrix::zeros(3, 2);
        let b = Vector::from_vec(vec![1.0, 2.0, 2.0]);
        let (x, r) = solve_linear_least_squares(&a, &b).unwrap();
        assert_eq!(x, Vector::zeros(2));
        assert!((r - 3.0).abs() < 1e-12);
    }

    #[test]
    fn least_squares_survives_hard_kronecker_system() {
        // A consistent, well-conditioned (κ ≈ 100) 12×12 system assembled the
        // same way the regulator solver vectorizes its equations. The SVD in
        // this nalgebra release mis-converges on this matrix (reconstruction
        // error ‖UΣVᵀ − M‖ ≈ 2e-5), which poisoned the returned solution; the
        // QR-based path must stay at machine precision.
        let mut entries = vec![0.0f64; 40];
        for (i, v) in [
            (5, 0.664457887596066),
            (6, 0.4836528338746001),
            (7, 0.32483838745700644),
            (8, 0.7540906282680515),
            (11, 0.0059956238004156455),
            (12, 0.4576243681005599),
            (13, 0.5415455582214533),
            (14, 0.17228011813912075),
            (15, 0.8843089690813231),
            (16, 0.641353948493359),
            (17, 0.37037065917755985),
            (18, 0.021980724512101722),
            (19, 0.6474094334316289),
            (20, 0.09356288916053562),
        ] {
            entries[i] = v;
        }
        let pick = |rows: usize, cols: usize, offset: usize| {
            DenseMatrix::from_fn(rows, cols, |i, j| entries[(offset + i * cols + j) % 40])
        };
        let (n, n0, l) = (2usize, 3usize, 2usize);
        let x_true = pick(n, n0, 0);
        let a = pick(n, n, 5);
        let a0 = pick(n0, n0, 11);
        let c = pick(l, n, 17);
        let b = DenseMatrix::identity(n, n);
        let u_true = &x_true * &a0 - &a * &x_true;
        let c0 = &c * &x_true;

        let eye_n0 = DenseMatrix::identity(n0, n0);
        let eye_n = DenseMatrix::identity(n, n);
        let mut sys = DenseMatrix::zeros(n * n0 + l * n0, 2 * n * n0);
        sys.view_mut((0, 0), (n * n0, n * n0))
            .copy_from(&(kron(&eye_n0, &a) - kron(&a0.transpose(), &eye_n)));
        sys.view_mut((0, n * n0), (n * n0, n * n0))
            .copy_from(&kron(&eye_n0, &b));
        sys.view_mut((n * n0, 0), (l * n0, n * n0))
            .copy_from(&kron(&eye_n0, &c));
        let mut rhs = Vector::zeros(n * n0 + l * n0);
        rhs.rows_mut(n * n0, l * n0).copy_from_slice(c0.as_slice());

        let mut z_true = Vector::zeros(2 * n * n0);
        z_true.rows_mut(0, n * n0).copy_from_slice(x_true.as_slice());
        z_true
            .rows_mut(n * n0, n * n0)
            .copy_from_slice(u_true.as_slice());
        assert!((&sys * &z_true - &rhs).norm() < 1e-12, "system is consistent");

        let (_, r) = solve_linear_least_squares(&sys, &rhs).unwrap();
        assert!(r < 1e-12, "residual {r:.3e} should be at machine precision");
    }

    #[test]
    fn from_rows_rejects_bad_shapes() {
        assert_eq!(from_rows(&[]), Err(LinalgError::Empty));
        assert!(matches!(
            from_rows(&[vec![1.0, 2.0], vec![3.0]]),
            Err(LinalgError::RaggedRows { row: 1, .. })
        ));
    }

    #[test]
    fn symmetric_eigen_range_simple() {
        let (lo, hi) = symmetric_eigen_range(&mat(&[&[2.0, -1.0], &[-1.0, 2.0]])).unwrap();
        assert!((lo - 1.0).abs() < 1e-12);
        assert!((hi - 3.0).abs() < 1e-12);
    }

    fn square_matrix(max_dim: usize) -> impl Strategy<Value = DenseMatrix> {
        (1..=max_dim).prop_flat_map(|n| {
            proptest::collection::vec(-10.0..10.0f64, n * n)
                .prop_map(move |v| DenseMatrix::from_row_slice(n, n, &v))
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn spectral_radius_scales_homogeneously(m in square_matrix(8), alpha in -5.0..5.0f64) {
            let r = spectral_radius(&m).unwrap();
            let rs = spectral_radius(&(&m * alpha)).unwrap();
            prop_assert!((rs - alpha.abs() * r).abs() < 1e-8 * (1.0 + r));
        }

        #[test]
        fn spectral_radius_bounded_by_row_sums(m in square_matrix(8)) {
            let m = m.map(f64::abs);
            let r = spectral_radius(&m).unwrap();
            let bound = (0..m.nrows())
                .map(|i| m.row(i).iter().sum::<f64>())
                .fold(0.0, f64::max);
            prop_assert!(r <= bound + 1e-8 * (1.0 + bound));
        }

        #[test]
        fn kron_mixed_product(
            a in square_matrix(4), b in square_matrix(4),
            c in square_matrix(4), d in square_matrix(4),
        ) {
            // (a⊗b)(c⊗d) = (ac)⊗(bd), restricted to conformal shapes
            let (a, c) = if a.nrows() == c.nrows() { (a, c) } else { return Ok(()); };
            let (b, d) = if b.nrows() == d.nrows() { (b, d) } else { return Ok(()); };
            let lhs = kron(&a, &b) * kron(&c, &d);
            let rhs = kron(&(&a * &c), &(&b * &d));
            let scale = 1.0 + rhs.amax();
            prop_assert!((lhs - rhs).amax() < 1e-10 * scale);
        }

        #[test]
        fn least_squares_residual_is_orthogonal(
            rows in 1..6usize, cols in 1..6usize,
            seed in proptest::collection::vec(-10.0..10.0f64, 36 + 6),
        ) {
            let a = DenseMatrix::from_row_slice(rows, cols, &seed[..rows * cols]);
            let b = Vector::from_column_slice(&seed[36..36 + rows]);
            let (x, r) = solve_linear_least_squares(&a, &b).unwrap();
            prop_assert!(r <= b.norm() + 1e-10);
            // normal equations: aᵀ(ax − b) ≈ 0
            let resid = &a * &x - &b;
            prop_assert!((a.transpose() * resid).amax() < 1e-7 * (1.0 + b.norm()));
        }
    }
}
