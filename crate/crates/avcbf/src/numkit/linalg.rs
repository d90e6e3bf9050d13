//! Small dense linear algebra used by the QP solver.
//!
//! The problems in this crate are tiny (at most a few dozen unknowns), so
//! a straightforward row-major matrix with LU-based solves is both fast
//! enough and easy to audit. Solves carry an explicit condition estimate
//! so ill-conditioned systems fail loudly instead of returning garbage.

use thiserror::Error;

use crate::scalar::{real, Scalar};

/// Errors from the dense linear algebra layer.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinAlgError {
    /// Matrix/vector shapes are incompatible with the requested operation.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    /// The matrix is singular to working precision (zero pivot).
    #[error("matrix is singular to working precision")]
    Singular,
    /// The matrix is numerically nonsingular but too ill-conditioned to
    /// trust; carries the infinity-norm condition estimate.
    #[error("matrix condition estimate {condition:.3e} exceeds the trust threshold")]
    IllConditioned {
        /// Estimated infinity-norm condition number.
        condition: f64,
    },
}

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<S> {
    rows: usize,
    cols: usize,
    data: Vec<S>,
}

impl<S: Scalar> Matrix<S> {
    /// Zero matrix of the given shape.
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![S::zero(); rows * cols],
        }
    }

    /// Identity matrix of size `n`.
    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = S::one();
        }
        m
    }

    /// Builds a matrix from nested row slices; all rows must share a length.
    pub fn from_rows(rows: &[&[S]]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c, "ragged rows in Matrix::from_rows");
            data.extend_from_slice(row);
        }
        Self { rows: r, cols: c, data }
    }

    /// Diagonal matrix from the given entries.
    pub fn from_diagonal(diag: &[S]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = d;
        }
        m
    }

    /// Number of rows.
    pub fn nrows(&self) -> usize {
        self.rows
    }

    /// Number of columns.
    pub fn ncols(&self) -> usize {
        self.cols
    }

    /// Immutable view of row `i`.
    pub fn row(&self, i: usize) -> &[S] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    /// Mutable view of row `i`.
    pub fn row_mut(&mut self, i: usize) -> &mut [S] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    /// Appends a row; the matrix must be empty or have matching width.
    pub fn push_row(&mut self, row: &[S]) {
        if self.rows == 0 {
            self.cols = row.len();
        }
        assert_eq!(row.len(), self.cols, "row width mismatch in push_row");
        self.data.extend_from_slice(row);
        self.rows += 1;
    }

    /// Matrix-vector product `A x`.
    pub fn matvec(&self, x: &[S]) -> Vec<S> {
        assert_eq!(x.len(), self.cols, "matvec dimension mismatch");
        (0..self.rows).map(|i| dot(self.row(i), x)).collect()
    }

    /// Transposed matrix-vector product `Aᵀ x`.
    pub fn t_matvec(&self, x: &[S]) -> Vec<S> {
        assert_eq!(x.len(), self.rows, "t_matvec dimension mismatch");
        let mut out = vec![S::zero(); self.cols];
        for i in 0..self.rows {
            let xi = x[i];
            for (o, &a) in out.iter_mut().zip(self.row(i)) {
                *o = *o + a * xi;
            }
        }
        out
    }

    /// Infinity norm (maximum absolute row sum).
    pub fn norm_inf(&self) -> S {
        (0..self.rows)
            .map(|i| self.row(i).iter().fold(S::zero(), |acc, &v| acc + v.abs()))
            .fold(S::zero(), S::max)
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> S {
        self.data.iter().fold(S::zero(), |acc, &v| acc.max(v.abs()))
    }

    /// Maximum relative asymmetry `|A_ij - A_ji|` scaled by the matrix
    /// magnitude; zero for exactly symmetric matrices.
    pub fn asymmetry(&self) -> S {
        assert_eq!(self.rows, self.cols, "asymmetry needs a square matrix");
        let scale = S::one().max(self.max_abs());
        let mut worst = S::zero();
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                worst = worst.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        worst / scale
    }

    /// Eigenvalues of a symmetric matrix via cyclic Jacobi rotations.
    ///
    /// Intended for the small positive-semidefiniteness checks on QP
    /// Hessians; cost is cubic per sweep which is negligible at these
    /// sizes.
    pub fn symmetric_eigenvalues(&self) -> Vec<S> {
        assert_eq!(self.rows, self.cols, "eigenvalues need a square matrix");
        let n = self.rows;
        let mut a = self.clone();
        let tol = real::<S>(1e-14) * S::one().max(a.max_abs());
        for _sweep in 0..50 {
            let mut off = S::zero();
            for i in 0..n {
                for j in (i + 1)..n {
                    off = off.max(a[(i, j)].abs());
                }
            }
            if off <= tol {
                break;
            }
            for p in 0..n {
                for q in (p + 1)..n {
                    let apq = a[(p, q)];
                    if apq.abs() <= tol {
                        continue;
                    }
                    let theta = (a[(q, q)] - a[(p, p)]) / (real::<S>(2.0) * apq);
                    let t = {
                        let sign = if theta >= S::zero() { S::one() } else { -S::one() };
                        sign / (theta.abs() + (theta * theta + S::one()).sqrt())
                    };
                    let c = S::one() / (t * t + S::one()).sqrt();
                    let s = t * c;
                    for k in 0..n {
                        let akp = a[(k, p)];
                        let akq = a[(k, q)];
                        a[(k, p)] = c * akp - s * akq;
                        a[(k, q)] = s * akp + c * akq;
                    }
                    for k in 0..n {
                        let apk = a[(p, k)];
                        let aqk = a[(q, k)];
                        a[(p, k)] = c * apk - s * aqk;
                        a[(q, k)] = s * apk + c * aqk;
                    }
                }
            }
        }
        (0..n).map(|i| a[(i, i)]).collect()
    }
}

impl<S: Scalar> std::ops::Index<(usize, usize)> for Matrix<S> {
    type Output = S;
    fn index(&self, (i, j): (usize, usize)) -> &S {
        &self.data[i * self.cols + j]
    }
}

impl<S: Scalar> std::ops::IndexMut<(usize, usize)> for Matrix<S> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut S {
        &mut self.data[i * self.cols + j]
    }
}

/// Dot product of two equal-length slices.
pub fn dot<S: Scalar>(a: &[S], b: &[S]) -> S {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).fold(S::zero(), |acc, (&x, &y)| acc + x * y)
}

/// Infinity norm of a vector.
pub fn norm_inf<S: Scalar>(v: &[S]) -> S {
    v.iter().fold(S::zero(), |acc, &x| acc.max(x.abs()))
}

/// LU factorization with partial pivoting.
struct Lu<S> {
    lu: Matrix<S>,
    perm: Vec<usize>,
}

impl<S: Scalar> Lu<S> {
    fn factor(a: &Matrix<S>) -> Result<Self, LinAlgError> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(LinAlgError::DimensionMismatch(format!(
                "LU needs a square matrix, got {}x{}",
                a.nrows(),
                a.ncols()
            )));
        }
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        // Pivot floor near machine precision relative to the matrix
        // magnitude; the condition gate catches anything milder.
        let pivot_floor = real::<S>(1e-300).max(lu.max_abs() * S::epsilon() * real::<S>(1e-3));
        for k in 0..n {
            let mut p = k;
            let mut best = lu[(k, k)].abs();
            for i in (k + 1)..n {
                let v = lu[(i, k)].abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best <= pivot_floor || !best.is_finite() {
                return Err(LinAlgError::Singular);
            }
            if p != k {
                perm.swap(k, p);
                for j in 0..n {
                    let tmp = lu[(k, j)];
                    lu[(k, j)] = lu[(p, j)];
                    lu[(p, j)] = tmp;
                }
            }
            let pivot = lu[(k, k)];
            for i in (k + 1)..n {
                let factor = lu[(i, k)] / pivot;
                lu[(i, k)] = factor;
                for j in (k + 1)..n {
                    let adj = factor * lu[(k, j)];
                    lu[(i, j)] = lu[(i, j)] - adj;
                }
            }
        }
        Ok(Self { lu, perm })
    }

    fn solve(&self, b: &[S]) -> Vec<S> {
        let n = self.lu.nrows();
        let mut x: Vec<S> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 1..n {
            let mut acc = x[i];
            for j in 0..i {
                acc = acc - self.lu[(i, j)] * x[j];
            }
            x[i] = acc;
        }
        for i in (0..n).rev() {
            let mut acc = x[i];
            for j in (i + 1)..n {
                acc = acc - self.lu[(i, j)] * x[j];
            }
            x[i] = acc / self.lu[(i, i)];
        }
        x
    }
}

/// Condition-estimate threshold above which solves are rejected.
///
/// `f64` uses the stated 1e12 gate; coarser scalar types get a gate
/// proportional to their precision so the same code remains usable in
/// `f32`.
fn condition_gate<S: Scalar>() -> S {
    let eps: S = S::epsilon();
    real::<S>(1e12).min(real::<S>(0.01) / eps)
}

/// Residual tolerance factor for [`solve_linear_system`]; 1e-9 in `f64`.
fn residual_gate<S: Scalar>() -> S {
    real::<S>(1e-9).max(S::epsilon() * real::<S>(5e6))
}

/// Solves the square system `A x = b` by LU with partial pivoting and one
/// step of iterative refinement.
///
/// Returns an error if the matrix is singular, if the infinity-norm
/// condition estimate exceeds the trust threshold (1e12 in `f64`), or if
/// the final residual `‖A x − b‖∞` exceeds `1e-9 · (1 + ‖b‖∞)`.
pub fn solve_linear_system<S: Scalar>(a: &Matrix<S>, b: &[S]) -> Result<Vec<S>, LinAlgError> {
    let n = a.nrows();
    if b.len() != n {
        return Err(LinAlgError::DimensionMismatch(format!(
            "matrix is {}x{} but rhs has length {}",
            a.nrows(),
            a.ncols(),
            b.len()
        )));
    }
    let lu = Lu::factor(a)?;

    // Infinity-norm condition estimate from the explicit inverse; the
    // systems here are small enough that n extra solves are negligible.
    let mut inv_norm = S::zero();
    let mut e = vec![S::zero(); n];
    let mut row_sums = vec![S::zero(); n];
    for j in 0..n {
        e[j] = S::one();
        let col = lu.solve(&e);
        e[j] = S::zero();
        for (sum, &v) in row_sums.iter_mut().zip(&col) {
            *sum = *sum + v.abs();
        }
    }
    for &s in &row_sums {
        inv_norm = inv_norm.max(s);
    }
    let condition = a.norm_inf() * inv_norm;
    if !condition.is_finite() || condition > condition_gate() {
        return Err(LinAlgError::IllConditioned {
            condition: condition.to_real(),
        });
    }

    let mut x = lu.solve(b);
    // One refinement pass tightens the residual toward machine precision.
    let ax = a.matvec(&x);
    let r: Vec<S> = b.iter().zip(&ax).map(|(&bi, &axi)| bi - axi).collect();
    let dx = lu.solve(&r);
    for (xi, di) in x.iter_mut().zip(&dx) {
        *xi = *xi + *di;
    }

    let resid = norm_inf(
        &a.matvec(&x)
            .iter()
            .zip(b)
            .map(|(&axi, &bi)| axi - bi)
            .collect::<Vec<_>>(),
    );
    let gate = residual_gate::<S>() * (S::one() + norm_inf(b));
    if !resid.is_finite() || resid > gate {
        return Err(LinAlgError::IllConditioned {
            condition: condition.to_real(),
        });
    }
    Ok(x)
}

/// Householder QR of a tall-or-square matrix (`rows ≥ cols`): returns
/// `(q, r)` with `a = q · r`, `q` orthogonal `rows×rows`, and `r` upper
/// trapezoidal `rows×cols`.
///
/// Used by the QP solver to split directions into the range and null
/// space of the active-constraint normals; orthogonality makes that
/// split exact even when the normals are badly scaled against each
/// other.
pub fn qr_decompose<S: Scalar>(a: &Matrix<S>) -> Result<(Matrix<S>, Matrix<S>), LinAlgError> {
    let rows = a.nrows();
    let cols = a.ncols();
    if cols > rows {
        return Err(LinAlgError::DimensionMismatch(format!(
            "QR here expects rows >= cols, got {rows}x{cols}"
        )));
    }
    let mut r = a.clone();
    let mut q = Matrix::identity(rows);
    for j in 0..cols.min(rows.saturating_sub(1)) {
        // Householder vector for column j below the diagonal.
        let mut norm = S::zero();
        for i in j..rows {
            norm = norm + r[(i, j)] * r[(i, j)];
        }
        let norm = norm.sqrt();
        if norm <= S::zero() {
            continue;
        }
        let alpha = if r[(j, j)] >= S::zero() { -norm } else { norm };
        let mut v = vec![S::zero(); rows];
        for i in j..rows {
            v[i] = r[(i, j)];
        }
        v[j] = v[j] - alpha;
        let v_norm_sq = dot(&v[j..], &v[j..]);
        if v_norm_sq <= S::zero() {
            continue;
        }
        let two = real::<S>(2.0);
        // Reflect the remaining columns of R.
        for col in j..cols {
            let mut proj = S::zero();
            for i in j..rows {
                proj = proj + v[i] * r[(i, col)];
            }
            let scale = two * proj / v_norm_sq;
            for i in j..rows {
                r[(i, col)] = r[(i, col)] - scale * v[i];
            }
        }
        // Accumulate Q = H_0 · H_1 · … (apply each reflector from the
        // right).
        for row in 0..rows {
            let mut proj = S::zero();
            for i in j..rows {
                proj = proj + q[(row, i)] * v[i];
            }
            let scale = two * proj / v_norm_sq;
            for i in j..rows {
                q[(row, i)] = q[(row, i)] - scale * v[i];
            }
        }
    }
    // Zero the strictly-lower part of R explicitly; the reflections leave
    // roundoff dust there.
    for i in 0..rows {
        for j in 0..cols.min(i) {
            r[(i, j)] = S::zero();
        }
    }
    Ok((q, r))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_solve_returns_rhs() {
        let a = Matrix::<f64>::identity(3);
        let b = vec![1.0, -2.0, 3.5];
        let x = solve_linear_system(&a, &b).unwrap();
        assert_eq!(x, b);
    }

    #[test]
    fn diagonal_solve_divides() {
        let a = Matrix::<f64>::from_diagonal(&[2.0, 4.0]);
        let x = solve_linear_system(&a, &[2.0, 8.0]).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-14);
        assert!((x[1] - 2.0).abs() < 1e-14);
    }

    #[test]
    fn two_by_two_elimination() {
        // [[1, 1], [1, -1]] x = (3, 1) has the unique solution (2, 1).
        let a = Matrix::<f64>::from_rows(&[&[1.0, 1.0], &[1.0, -1.0]]);
        let x = solve_linear_system(&a, &[3.0, 1.0]).unwrap();
        assert!((x[0] - 2.0).abs() < 1e-12);
        assert!((x[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn singular_matrix_is_reported() {
        let a = Matrix::<f64>::from_rows(&[&[1.0, 2.0], &[2.0, 4.0]]);
        let err = solve_linear_system(&a, &[1.0, 2.0]).unwrap_err();
        assert!(matches!(
            err,
            LinAlgError::Singular | LinAlgError::IllConditioned { .. }
        ));
    }

    #[test]
    fn ill_conditioned_matrix_is_rejected() {
        let a = Matrix::<f64>::from_rows(&[&[1.0, 1.0], &[1.0, 1.0 + 1e-14]]);
        let err = solve_linear_system(&a, &[1.0, 1.0]).unwrap_err();
        assert!(matches!(err, LinAlgError::IllConditioned { .. }));
    }

    #[test]
    fn residual_meets_gate() {
        let a = Matrix::<f64>::from_rows(&[
            &[4.0, 1.0, 0.5],
            &[1.0, 3.0, -0.2],
            &[0.5, -0.2, 5.0],
        ]);
        let b = vec![1.0, 2.0, 3.0];
        let x = solve_linear_system(&a, &b).unwrap();
        let ax = a.matvec(&x);
        let resid = ax
            .iter()
            .zip(&b)
            .map(|(axi, bi)| (axi - bi).abs())
            .fold(0.0f64, f64::max);
        assert!(resid <= 1e-9 * (1.0 + 3.0));
    }

    #[test]
    fn rhs_length_mismatch_is_an_error() {
        let a = Matrix::<f64>::identity(2);
        assert!(matches!(
            solve_linear_system(&a, &[1.0]),
            Err(LinAlgError::DimensionMismatch(_))
        ));
    }

    #[test]
    fn jacobi_eigenvalues_of_known_matrix() {
        // [[2, 1], [1, 2]] has eigenvalues 1 and 3.
        let a = Matrix::<f64>::from_rows(&[&[2.0, 1.0], &[1.0, 2.0]]);
        let mut eig = a.symmetric_eigenvalues();
        eig.sort_by(|x, y| x.partial_cmp(y).unwrap());
        assert!((eig[0] - 1.0).abs() < 1e-10);
        assert!((eig[1] - 3.0).abs() < 1e-10);
    }

    #[test]
    fn f32_solve_works_with_scaled_gates() {
        let a = Matrix::<f32>::from_rows(&[&[2.0, 0.0], &[0.0, 4.0]]);
        let x = solve_linear_system(&a, &[2.0f32, 4.0]).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-5);
        assert!((x[1] - 1.0).abs() < 1e-5);
    }

    fn assert_qr_reconstructs(a: &Matrix<f64>) {
        let (q, r) = qr_decompose(a).unwrap();
        let rows = a.nrows();
        // Q orthogonal: QᵀQ = I.
        for i in 0..rows {
            for j in 0..rows {
                let mut s = 0.0;
                for k in 0..rows {
                    s += q[(k, i)] * q[(k, j)];
                }
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((s - expect).abs() < 1e-12, "QᵀQ[{i}][{j}] = {s}");
            }
        }
        // A = Q·R.
        for i in 0..rows {
            for j in 0..a.ncols() {
                let mut s = 0.0;
                for k in 0..rows {
                    s += q[(i, k)] * r[(k, j)];
                }
                assert!((s - a[(i, j)]).abs() < 1e-11, "QR[{i}][{j}] = {s}");
            }
        }
        // R upper trapezoidal.
        for i in 0..rows {
            for j in 0..a.ncols().min(i) {
                assert_eq!(r[(i, j)], 0.0);
            }
        }
    }

    #[test]
    fn qr_of_square_matrix_reconstructs() {
        let a = Matrix::<f64>::from_rows(&[
            &[2.0, -1.0, 0.5],
            &[1.0, 3.0, -2.0],
            &[-0.5, 0.25, 4.0],
        ]);
        assert_qr_reconstructs(&a);
    }

    #[test]
    fn qr_of_tall_matrix_reconstructs() {
        let a = Matrix::<f64>::from_rows(&[&[1.0, 2.0], &[3.0, -4.0], &[0.5, 0.0], &[-2.0, 1.0]]);
        assert_qr_reconstructs(&a);
    }

    #[test]
    fn qr_flags_dependent_columns_with_tiny_diagonal() {
        // Second column is twice the first: R[1][1] collapses to zero.
        let a = Matrix::<f64>::from_rows(&[&[1.0, 2.0], &[2.0, 4.0], &[-1.0, -2.0]]);
        let (_, r) = qr_decompose(&a).unwrap();
        assert!(r[(0, 0)].abs() > 1.0);
        assert!(r[(1, 1)].abs() < 1e-12);
    }

    #[test]
    fn qr_rejects_wide_matrices() {
        let a = Matrix::<f64>::from_rows(&[&[1.0, 2.0, 3.0]]);
        assert!(matches!(
            qr_decompose(&a),
            Err(LinAlgError::DimensionMismatch(_))
        ));
    }
}
