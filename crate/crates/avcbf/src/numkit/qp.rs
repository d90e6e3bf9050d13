//! Dense convex quadratic programming.
//!
//! Solves `minimize ½ wᵀH w + cᵀw + k` subject to `G w ≥ h` with a primal
//! active-set method. The problems produced by the barrier controllers are
//! tiny (a handful of variables and rows) but must be solved thousands of
//! times per run with bit-reproducible results, and infeasibility must be
//! detected reliably because it is a terminating event for a simulation,
//! not a solver failure.
//!
//! Implementation outline:
//!
//! * the Hessian is regularized with `1e-10·I` before factorization so
//!   costs with linear-only terms stay strictly convex;
//! * the problem is diagonally equilibrated (variable scaling from the
//!   Hessian diagonal, row scaling to unit infinity norm) so the mixed
//!   magnitudes produced by penalty weights spanning many decades do not
//!   poison the KKT solves;
//! * feasibility is established by a Phase-1 problem minimizing the
//!   maximum constraint violation; if the minimum exceeds the declaration
//!   threshold the problem is reported infeasible together with a
//!   Farkas-type certificate (`y ≥ 0`, `Gᵀy ≈ 0`, `hᵀy > 0`) recovered
//!   from the Phase-1 multipliers;
//! * ties in active-set selection are broken deterministically: the most
//!   violated (most restrictive) row first, lowest index on ties.

use thiserror::Error;

use crate::numkit::linalg::{
    dot, norm_inf, qr_decompose, solve_linear_system, LinAlgError, Matrix,
};
use crate::scalar::{real, Scalar};

/// Hessian regularization added before factorization.
pub const HESSIAN_REGULARIZATION: f64 = 1e-10;

/// Phase-1 violation above which a problem is declared infeasible.
pub const INFEASIBILITY_THRESHOLD: f64 = 1e-7;

/// Default active-set iteration cap.
pub const DEFAULT_MAX_ITERATIONS: usize = 200;

/// Errors for malformed QP inputs; solver outcomes (including
/// infeasibility and iteration exhaustion) are reported through
/// [`QpStatus`] instead.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum QpError {
    /// Matrix/vector shapes are inconsistent.
    #[error("inconsistent problem dimensions: {0}")]
    Dimensions(String),
    /// The Hessian is not symmetric within tolerance.
    #[error("hessian asymmetry {0:.3e} exceeds tolerance")]
    AsymmetricHessian(f64),
    /// The Hessian has an eigenvalue below the PSD tolerance.
    #[error("hessian eigenvalue {0:.3e} violates positive semidefiniteness")]
    IndefiniteHessian(f64),
    /// A supplied warm start has the wrong length.
    #[error("warm start has length {got}, expected {expected}")]
    WarmStartLength {
        /// Provided length.
        got: usize,
        /// Required length (number of decision variables).
        expected: usize,
    },
    /// Problem data contains NaN or infinity.
    #[error("problem data contains non-finite entries")]
    NonFinite,
}

/// Convex QP `minimize ½ wᵀH w + cᵀw + k` subject to `G w ≥ h`.
#[derive(Debug, Clone, PartialEq)]
pub struct QpProblem<S> {
    /// Symmetric positive-semidefinite cost Hessian `H`.
    pub hessian: Matrix<S>,
    /// Linear cost term `c`.
    pub linear_cost: Vec<S>,
    /// Constant cost offset `k`; carried so reported objectives match the
    /// modeled cost (e.g. `(u − u_ref)²` expansions) exactly.
    pub constant: S,
    /// Inequality rows `G`, one per constraint, in `G w ≥ h` orientation.
    pub ineq_matrix: Matrix<S>,
    /// Inequality right-hand side `h`.
    pub ineq_rhs: Vec<S>,
    /// Decision-variable names for diagnostics; empty or one per column.
    pub var_names: Vec<String>,
}

impl<S: Scalar> QpProblem<S> {
    /// Convenience constructor with no constraints and no names.
    pub fn new(hessian: Matrix<S>, linear_cost: Vec<S>) -> Self {
        let n = linear_cost.len();
        Self {
            hessian,
            linear_cost,
            constant: S::zero(),
            ineq_matrix: Matrix::zeros(0, n),
            ineq_rhs: Vec::new(),
            var_names: Vec::new(),
        }
    }

    /// Number of decision variables.
    pub fn num_vars(&self) -> usize {
        self.linear_cost.len()
    }

    /// Number of inequality rows.
    pub fn num_rows(&self) -> usize {
        self.ineq_rhs.len()
    }

    /// Objective value `½ wᵀH w + cᵀw + k` at `w`.
    pub fn objective(&self, w: &[S]) -> S {
        let hw = self.hessian.matvec(w);
        real::<S>(0.5) * dot(w, &hw) + dot(&self.linear_cost, w) + self.constant
    }

    /// Checks shape consistency, Hessian symmetry (relative asymmetry at
    /// most 1e-12) and positive semidefiniteness (eigenvalues at least
    /// `−1e-10`, scaled by the matrix magnitude to stay meaningful for
    /// large penalty weights).
    pub fn validate(&self) -> Result<(), QpError> {
        let n = self.num_vars();
        if self.hessian.nrows() != n || self.hessian.ncols() != n {
            return Err(QpError::Dimensions(format!(
                "hessian is {}x{} but there are {} variables",
                self.hessian.nrows(),
                self.hessian.ncols(),
                n
            )));
        }
        if self.ineq_matrix.nrows() != self.num_rows() {
            return Err(QpError::Dimensions(format!(
                "{} inequality rows but rhs has length {}",
                self.ineq_matrix.nrows(),
                self.num_rows()
            )));
        }
        if self.num_rows() > 0 && self.ineq_matrix.ncols() != n {
            return Err(QpError::Dimensions(format!(
                "inequality matrix has {} columns but there are {} variables",
                self.ineq_matrix.ncols(),
                n
            )));
        }
        if !self.var_names.is_empty() && self.var_names.len() != n {
            return Err(QpError::Dimensions(format!(
                "{} variable names for {} variables",
                self.var_names.len(),
                n
            )));
        }
        let finite = self
            .linear_cost
            .iter()
            .chain(self.ineq_rhs.iter())
            .all(|v| v.is_finite())
            && (0..self.hessian.nrows()).all(|i| self.hessian.row(i).iter().all(|v| v.is_finite()))
            && (0..self.ineq_matrix.nrows())
                .all(|i| self.ineq_matrix.row(i).iter().all(|v| v.is_finite()))
            && self.constant.is_finite();
        if !finite {
            return Err(QpError::NonFinite);
        }
        let asym = self.hessian.asymmetry();
        if asym > real::<S>(1e-12) {
            return Err(QpError::AsymmetricHessian(asym.to_real()));
        }
        let scale = S::one().max(self.hessian.max_abs());
        let psd_floor = -real::<S>(HESSIAN_REGULARIZATION) * scale;
        if let Some(min_eig) = self
            .hessian
            .symmetric_eigenvalues()
            .into_iter()
            .min_by(|a, b| a.partial_cmp(b).expect("finite eigenvalues"))
        {
            if min_eig < psd_floor {
                return Err(QpError::IndefiniteHessian(min_eig.to_real()));
            }
        }
        Ok(())
    }
}

/// Termination status of a QP solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QpStatus {
    /// A minimizer satisfying the KKT conditions was found.
    Optimal,
    /// No feasible point exists; a Farkas certificate is attached.
    Infeasible,
    /// The iteration cap was reached or a KKT system could not be solved
    /// reliably; the last iterate is reported but not certified.
    MaxIterations,
}

impl std::fmt::Display for QpStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            QpStatus::Optimal => write!(f, "optimal"),
            QpStatus::Infeasible => write!(f, "infeasible"),
            QpStatus::MaxIterations => write!(f, "max_iterations"),
        }
    }
}

/// Farkas-type infeasibility certificate: `y ≥ 0` with `Gᵀy ≈ 0` and
/// `hᵀy > 0`, proving `G w ≥ h` has no solution.
#[derive(Debug, Clone, PartialEq)]
pub struct FarkasCertificate<S> {
    /// Nonnegative row combination, normalized to unit infinity norm.
    pub y: Vec<S>,
    /// Residual `‖Gᵀy‖∞` of the certificate on the original data.
    pub gt_y_norm: S,
    /// Certificate value `hᵀy`; strictly positive for a valid certificate.
    pub h_dot_y: S,
}

/// Result of [`qp_solve`].
#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution<S> {
    /// Termination status.
    pub status: QpStatus,
    /// Minimizer when [`QpStatus::Optimal`]; last iterate when
    /// [`QpStatus::MaxIterations`]; empty when infeasible.
    pub w: Vec<S>,
    /// Objective at `w` (NaN when no iterate is available).
    pub objective: S,
    /// Scale-normalized KKT residual at `w` with the solver multipliers:
    /// the maximum of stationarity (normalized by the gradient magnitude),
    /// primal violation, and per-row complementarity, each measured
    /// relative to the magnitude of the row's contributions. At most 1e-8
    /// whenever the status is `Optimal`.
    pub kkt_residual: S,
    /// Lagrange multipliers, one per inequality row (zero off the active
    /// set); empty when infeasible.
    pub multipliers: Vec<S>,
    /// Indices of rows active at termination, ascending.
    pub active_set: Vec<usize>,
    /// Total active-set iterations across both phases.
    pub iterations: usize,
    /// Minimized maximum constraint violation from Phase 1, measured on
    /// unit-norm rows; zero when a feasible point was found directly.
    pub phase1_violation: S,
    /// Infeasibility certificate when [`QpStatus::Infeasible`].
    pub certificate: Option<FarkasCertificate<S>>,
}

/// Solver options.
#[derive(Debug, Clone)]
pub struct QpOptions {
    /// Cap on active-set iterations per phase.
    pub max_iterations: usize,
}

impl Default for QpOptions {
    fn default() -> Self {
        Self {
            max_iterations: DEFAULT_MAX_ITERATIONS,
        }
    }
}

/// Scale-aware solver tolerances (the quoted values are for `f64`).
struct Tols<S> {
    /// Row-violation slack treated as feasible (1e-9).
    feas: S,
    /// Multiplier negativity tolerated at optimality (1e-9).
    dual: S,
    /// Step norm treated as zero (1e-11).
    step: S,
    /// Phase-1 minimum above which infeasibility is declared (1e-7).
    phase1: S,
    /// Hessian regularization (1e-10).
    reg: S,
    /// Phase-1 curvature on the original variables (1e-10).
    phase1_curvature: S,
}

impl<S: Scalar> Tols<S> {
    fn new() -> Self {
        let eps = S::epsilon();
        Self {
            feas: real::<S>(1e-9).max(eps * real::<S>(50.0)),
            dual: real::<S>(1e-9).max(eps * real::<S>(50.0)),
            step: real::<S>(1e-11).max(eps * real::<S>(10.0)),
            phase1: real::<S>(INFEASIBILITY_THRESHOLD).max(eps * real::<S>(1e3)),
            reg: real::<S>(HESSIAN_REGULARIZATION).max(eps * real::<S>(1e-2)),
            phase1_curvature: real::<S>(1e-10).max(eps * real::<S>(1e2)),
        }
    }
}

/// Outcome of the shared active-set iteration.
struct ActiveSetOutcome<S> {
    /// True when KKT optimality was certified.
    optimal: bool,
    /// True when a KKT system failed to solve (numerical trouble).
    trouble: bool,
    w: Vec<S>,
    /// Full-length multipliers (zero off the working set).
    lambda: Vec<S>,
    working: Vec<usize>,
    iterations: usize,
}

/// Primal active-set iteration for `min ½wᵀHw + cᵀw` s.t. `Gw ≥ h`,
/// starting from a feasible `w0` with working set `working0`.
///
/// Directions are computed with a null-space method: the active normals
/// `A = G_Wᵀ` are factored as `A = QR`, the step is solved in the
/// orthonormal null-space basis (the trailing columns of `Q`), and the
/// multipliers come from a triangular solve against the leading columns.
/// Unlike a monolithic KKT solve, this keeps the step exactly zero at a
/// fully-determined vertex even when the normals are scaled apart by
/// many orders of magnitude, which is what badly-weighted penalty costs
/// produce; without it, noise in the near-null direction can masquerade
/// as a descent step and stall the iteration at the optimum.
fn active_set_min<S: Scalar>(
    h: &Matrix<S>,
    c: &[S],
    g: &Matrix<S>,
    rhs: &[S],
    w0: Vec<S>,
    working0: Vec<usize>,
    max_iterations: usize,
    tols: &Tols<S>,
) -> ActiveSetOutcome<S> {
    let n = w0.len();
    let m = rhs.len();
    let mut w = w0;
    let mut working = working0;
    working.sort_unstable();
    let mut lambda = vec![S::zero(); m];
    let mut iterations = 0usize;

    loop {
        if iterations >= max_iterations {
            return ActiveSetOutcome {
                optimal: false,
                trouble: false,
                w,
                lambda,
                working,
                iterations,
            };
        }
        iterations += 1;

        // Factor the active normals A = G_Wᵀ (n×k) as QR.
        let k = working.len();
        let mut normals = Matrix::zeros(n, k.max(1));
        if k > 0 {
            normals = Matrix::zeros(n, k);
            for (a, &row_idx) in working.iter().enumerate() {
                for j in 0..n {
                    normals[(j, a)] = g[(row_idx, j)];
                }
            }
        }
        let (q, r) = if k > 0 {
            match qr_decompose(&normals) {
                Ok(qr) => qr,
                Err(_) => {
                    return ActiveSetOutcome {
                        optimal: false,
                        trouble: true,
                        w,
                        lambda,
                        working,
                        iterations,
                    };
                }
            }
        } else {
            (Matrix::identity(n), Matrix::zeros(n, 0))
        };

        // A dependent active normal shows up as a collapsed diagonal in
        // R; the corresponding row adds nothing to the vertex, so drop
        // it rather than carry a rank-deficient basis.
        let rank_tol = real::<S>(1e-10) * (S::one() + normals.max_abs());
        if let Some(dependent) = (0..k).find(|&i| r[(i, i)].abs() <= rank_tol) {
            working.remove(dependent);
            continue;
        }

        // Gradient of the objective at w.
        let grad: Vec<S> = h
            .matvec(&w)
            .iter()
            .zip(c)
            .map(|(&a, &b)| a + b)
            .collect();

        // Step in the null space of the active normals: d = Z·dz with
        // (ZᵀHZ)dz = −Zᵀ∇f. With k == n the null space is empty and the
        // step is exactly zero.
        let d: Vec<S> = match null_space_correction(h, &q, k, &grad) {
            Ok(d) => d,
            Err(_) => {
                return ActiveSetOutcome {
                    optimal: false,
                    trouble: true,
                    w,
                    lambda,
                    working,
                    iterations,
                };
            }
        };

        let step_norm = norm_inf(&d);
        if step_norm <= tols.step * (S::one() + norm_inf(&w)) {
            // Stationary on the working set. Multipliers solve
            // G_Wᵀλ = ∇f in least squares: Rλ = Q₁ᵀ∇f.
            let lam_w = working_set_multipliers(&q, &r, k, &grad);

            // Negativity threshold relative to the multiplier scale: at
            // badly-mixed curvatures the multipliers grow huge, and an
            // absolute test would chase sign noise forever.
            let lam_scale = S::one() + norm_inf(&lam_w);
            let mut worst_idx = None;
            let mut worst_val = -tols.dual * lam_scale;
            for (a, &row_idx) in working.iter().enumerate() {
                if lam_w[a] < worst_val {
                    worst_val = lam_w[a];
                    worst_idx = Some((a, row_idx));
                }
            }
            match worst_idx {
                None => {
                    // Mixed-scale walks leave the iterate a few ulps per
                    // step off its own active rows; rebuild the point
                    // from the factorization so the accumulation never
                    // reaches the certification gate, and re-derive the
                    // multipliers at the rebuilt point so stationarity
                    // holds there too.
                    let mut lam_final = lam_w;
                    if let Some(polished) =
                        polish_on_working_set(h, c, g, rhs, &q, &r, &working, &w)
                    {
                        let polished_grad: Vec<S> = h
                            .matvec(&polished)
                            .iter()
                            .zip(c)
                            .map(|(&a, &b)| a + b)
                            .collect();
                        lam_final = working_set_multipliers(&q, &r, k, &polished_grad);
                        w = polished;
                    }
                    lambda = vec![S::zero(); m];
                    for (a, &row_idx) in working.iter().enumerate() {
                        lambda[row_idx] = lam_final[a].max(S::zero());
                    }
                    return ActiveSetOutcome {
                        optimal: true,
                        trouble: false,
                        w,
                        lambda,
                        working,
                        iterations,
                    };
                }
                Some((a, _)) => {
                    working.remove(a);
                    continue;
                }
            }
        }

        // Ratio test against rows outside the working set. The smallest
        // step (most restrictive row) blocks first; scanning in ascending
        // order with a strict comparison keeps the lowest index on ties.
        // A row counts as decreasing relative to its own contribution
        // magnitude `Σ|g_ij·d_j|`, not the global direction norm: when the
        // direction mixes scales, a bound on a slow coordinate still has
        // to block even though its directional rate looks tiny globally.
        let mut alpha = S::one();
        let mut blocker: Option<usize> = None;
        for i in 0..m {
            if working.binary_search(&i).is_ok() {
                continue;
            }
            let row = g.row(i);
            let mut gd = S::zero();
            let mut gd_mag = S::one();
            for j in 0..n {
                let term = row[j] * d[j];
                gd = gd + term;
                gd_mag = gd_mag + term.abs();
            }
            if gd < -real::<S>(1e-13) * gd_mag {
                let slack = dot(g.row(i), &w) - rhs[i];
                let limit = (slack / -gd).max(S::zero());
                if limit < alpha {
                    alpha = limit;
                    blocker = Some(i);
                }
            }
        }
        for (wi, &di) in w.iter_mut().zip(&d) {
            *wi = *wi + alpha * di;
        }
        if let Some(b) = blocker {
            let pos = working.binary_search(&b).unwrap_err();
            working.insert(pos, b);
        }
    }
}

/// Working-set multipliers from the QR factors of the active normals:
/// `Rλ = Q₁ᵀ·grad` by back-substitution. Empty for `k == 0`.
fn working_set_multipliers<S: Scalar>(
    q: &Matrix<S>,
    r: &Matrix<S>,
    k: usize,
    grad: &[S],
) -> Vec<S> {
    let n = grad.len();
    let mut lam_w = vec![S::zero(); k];
    if k > 0 {
        let mut q1t_grad = vec![S::zero(); k];
        for (slot, item) in q1t_grad.iter_mut().enumerate() {
            let mut s = S::zero();
            for row in 0..n {
                s = s + q[(row, slot)] * grad[row];
            }
            *item = s;
        }
        for i in (0..k).rev() {
            let mut s = q1t_grad[i];
            for j in (i + 1)..k {
                s = s - r[(i, j)] * lam_w[j];
            }
            lam_w[i] = s / r[(i, i)];
        }
    }
    lam_w
}

/// Objective-minimizing correction `Z·dz` over the null space of the
/// active normals, where `Z` is the trailing `n−k` columns of `q` and
/// `grad` is the objective gradient at the base point:
/// `(ZᵀHZ)dz = −Zᵀ·grad`. Zero-length null space yields the zero vector.
fn null_space_correction<S: Scalar>(
    h: &Matrix<S>,
    q: &Matrix<S>,
    k: usize,
    grad: &[S],
) -> Result<Vec<S>, LinAlgError> {
    let n = grad.len();
    let free = n - k;
    if free == 0 {
        return Ok(vec![S::zero(); n]);
    }
    let mut z = Matrix::zeros(n, free);
    for i in 0..n {
        for j in 0..free {
            z[(i, j)] = q[(i, k + j)];
        }
    }
    let mut reduced = Matrix::zeros(free, free);
    for i in 0..free {
        let hz: Vec<S> = {
            let zi: Vec<S> = (0..n).map(|row| z[(row, i)]).collect();
            h.matvec(&zi)
        };
        for j in 0..free {
            let mut s = S::zero();
            for row in 0..n {
                s = s + z[(row, j)] * hz[row];
            }
            reduced[(j, i)] = s;
        }
    }
    let rhs_z: Vec<S> = (0..free)
        .map(|j| {
            let mut s = S::zero();
            for row in 0..n {
                s = s + z[(row, j)] * grad[row];
            }
            -s
        })
        .collect();
    let dz = solve_linear_system(&reduced, &rhs_z)?;
    Ok((0..n)
        .map(|row| {
            let mut s = S::zero();
            for j in 0..free {
                s = s + z[(row, j)] * dz[j];
            }
            s
        })
        .collect())
}

/// One clean equality-constrained solve on the final working set.
///
/// The returned point satisfies the active rows from a single
/// factorization application (particular solution `Q₁·R⁻ᵀh_W` plus the
/// reduced-space minimizer) instead of inheriting the walk's accumulated
/// roundoff. `None` (keep the walked iterate) when the rebuild fails or
/// would meaningfully violate a resting row.
#[allow(clippy::too_many_arguments)]
fn polish_on_working_set<S: Scalar>(
    h: &Matrix<S>,
    c: &[S],
    g: &Matrix<S>,
    rhs: &[S],
    q: &Matrix<S>,
    r: &Matrix<S>,
    working: &[usize],
    fallback: &[S],
) -> Option<Vec<S>> {
    let n = fallback.len();
    let k = working.len();
    if k == 0 {
        return None;
    }
    // Particular solution on the active rows: Rᵀy = h_W, w_p = Q₁y.
    let mut y = vec![S::zero(); k];
    for i in 0..k {
        let mut s = rhs[working[i]];
        for j in 0..i {
            s = s - r[(j, i)] * y[j];
        }
        if r[(i, i)] == S::zero() {
            return None;
        }
        y[i] = s / r[(i, i)];
    }
    let mut w = vec![S::zero(); n];
    for (row, slot) in w.iter_mut().enumerate() {
        let mut s = S::zero();
        for i in 0..k {
            s = s + q[(row, i)] * y[i];
        }
        *slot = s;
    }
    let grad: Vec<S> = h
        .matvec(&w)
        .iter()
        .zip(c)
        .map(|(&a, &b)| a + b)
        .collect();
    let correction = null_space_correction(h, q, k, &grad).ok()?;
    for (wi, di) in w.iter_mut().zip(&correction) {
        *wi = *wi + *di;
    }
    // Keep the walked iterate when the rebuilt point lands outside a
    // resting row by more than its evaluation noise.
    for i in 0..rhs.len() {
        let row = g.row(i);
        let mut slack = -rhs[i];
        let mut mag = S::one() + rhs[i].abs();
        for j in 0..n {
            let term = row[j] * w[j];
            slack = slack + term;
            mag = mag + term.abs();
        }
        if slack < -real::<S>(1e-8) * mag {
            return None;
        }
    }
    Some(w)
}

/// Diagonal equilibration of a QP: variables scaled by the inverse square
/// root of the (regularized) Hessian diagonal, rows scaled to unit
/// infinity norm.
struct Equilibration<S> {
    /// Per-variable scale: `w = d ∘ w̃`.
    d: Vec<S>,
    /// Per-row scale applied to `G` and `h`.
    r: Vec<S>,
}

fn equilibrate<S: Scalar>(
    h_reg: &Matrix<S>,
    g: &Matrix<S>,
) -> (Equilibration<S>, Matrix<S>, Matrix<S>) {
    let n = h_reg.nrows();
    let m = g.nrows();
    let floor = real::<S>(1e-12);
    let d: Vec<S> = (0..n)
        .map(|j| S::one() / h_reg[(j, j)].abs().max(floor).sqrt())
        .collect();
    let mut h_s = h_reg.clone();
    for i in 0..n {
        for j in 0..n {
            h_s[(i, j)] = h_s[(i, j)] * d[i] * d[j];
        }
    }
    let mut g_s = Matrix::zeros(m, n.max(1));
    let mut r = vec![S::one(); m];
    if m > 0 {
        g_s = Matrix::zeros(m, n);
        for i in 0..m {
            let mut row_max = S::zero();
            for j in 0..n {
                let v = g[(i, j)] * d[j];
                g_s[(i, j)] = v;
                row_max = row_max.max(v.abs());
            }
            let ri = S::one() / row_max.max(floor);
            r[i] = ri;
            for j in 0..n {
                g_s[(i, j)] = g_s[(i, j)] * ri;
            }
        }
    }
    (Equilibration { d, r }, h_s, g_s)
}

/// Solves a convex QP with default options. See [`qp_solve_with`].
pub fn qp_solve<S: Scalar>(
    problem: &QpProblem<S>,
    warm_start: Option<&[S]>,
) -> Result<QpSolution<S>, QpError> {
    qp_solve_with(problem, warm_start, &QpOptions::default())
}

/// Solves a convex QP.
///
/// The solve is deterministic: identical inputs produce bit-identical
/// results. A warm start, when feasible, only changes the iteration
/// count, not the minimizer (the problem is strictly convex after
/// regularization). `Optimal` results satisfy every row within 1e-9 slack
/// and carry a normalized KKT residual of at most 1e-8; `Infeasible`
/// results carry a Farkas certificate verified against the input data.
pub fn qp_solve_with<S: Scalar>(
    problem: &QpProblem<S>,
    warm_start: Option<&[S]>,
    options: &QpOptions,
) -> Result<QpSolution<S>, QpError> {
    problem.validate()?;
    let n = problem.num_vars();
    let m = problem.num_rows();
    if let Some(ws) = warm_start {
        if ws.len() != n {
            return Err(QpError::WarmStartLength {
                got: ws.len(),
                expected: n,
            });
        }
        if ws.iter().any(|v| !v.is_finite()) {
            return Err(QpError::NonFinite);
        }
    }
    let tols = Tols::<S>::new();

    // Regularize, then equilibrate.
    let mut h_reg = problem.hessian.clone();
    for i in 0..n {
        h_reg[(i, i)] = h_reg[(i, i)] + tols.reg;
    }
    let (eq, h_s, g_s) = equilibrate(&h_reg, &problem.ineq_matrix);
    let c_s: Vec<S> = problem
        .linear_cost
        .iter()
        .zip(&eq.d)
        .map(|(&c, &d)| c * d)
        .collect();
    let h_rhs_s: Vec<S> = problem
        .ineq_rhs
        .iter()
        .zip(&eq.r)
        .map(|(&h, &r)| h * r)
        .collect();

    let scaled_violation = |w_s: &[S]| -> S {
        let mut worst = S::zero();
        for i in 0..m {
            worst = worst.max(h_rhs_s[i] - dot(g_s.row(i), w_s));
        }
        worst
    };

    let mut iterations = 0usize;
    let mut phase1_violation = S::zero();

    // Choose a feasible starting point: warm start if feasible, else the
    // origin if feasible, else run Phase 1.
    let warm_scaled: Option<Vec<S>> = warm_start.map(|ws| {
        ws.iter()
            .zip(&eq.d)
            .map(|(&w, &d)| w / d)
            .collect::<Vec<S>>()
    });
    let start: Option<Vec<S>> = match &warm_scaled {
        Some(w_s) if scaled_violation(w_s) <= tols.feas => Some(w_s.clone()),
        _ => {
            let origin = vec![S::zero(); n];
            if scaled_violation(&origin) <= tols.feas {
                Some(origin)
            } else {
                None
            }
        }
    };

    let start = match start {
        Some(s) => s,
        None => {
            // Phase 1: minimize the worst violation s over (w, s) with
            // rows G̃w + s ≥ h̃ and s ≥ 0. A large linear weight drives s
            // to its minimum; the tiny curvature keeps the subproblem
            // strictly convex. That curvature also biases against
            // large-norm points, so when the nearest feasible point lies
            // very far from the origin the first pass can stall at s > 0
            // even though the rows are satisfiable. Infeasibility is
            // therefore only declared on a Farkas combination that checks
            // out on the original data; an unverified stall retries once
            // with a heavier weight before giving up.
            let mut h1 = Matrix::zeros(n + 1, n + 1);
            for i in 0..n {
                h1[(i, i)] = tols.phase1_curvature;
            }
            h1[(n, n)] = S::one();
            let mut g1 = Matrix::zeros(m + 1, n + 1);
            let mut rhs1 = vec![S::zero(); m + 1];
            for i in 0..m {
                for j in 0..n {
                    g1[(i, j)] = g_s[(i, j)];
                }
                g1[(i, n)] = S::one();
                rhs1[i] = h_rhs_s[i];
            }
            g1[(m, n)] = S::one();

            // Start at the origin lifted by the worst violation; that row
            // (the most violated one, lowest index on ties) starts active.
            let mut s0 = S::zero();
            let mut worst_row = None;
            for i in 0..m {
                if h_rhs_s[i] > s0 {
                    s0 = h_rhs_s[i];
                    worst_row = Some(i);
                }
            }

            let g_scale = (0..m)
                .map(|i| norm_inf(problem.ineq_matrix.row(i)))
                .fold(S::one(), |a, b| a.max(b));

            let mut start_feasible: Option<Vec<S>> = None;
            for &big_m in &[real::<S>(1e8), real::<S>(1e12)] {
                let mut c1 = vec![S::zero(); n + 1];
                c1[n] = big_m;
                let mut w1 = vec![S::zero(); n + 1];
                w1[n] = s0;
                let working0 = worst_row.into_iter().collect::<Vec<_>>();

                let outcome = active_set_min(
                    &h1,
                    &c1,
                    &g1,
                    &rhs1,
                    w1,
                    working0,
                    options.max_iterations,
                    &tols,
                );
                iterations += outcome.iterations;
                let s_star = outcome.w[n].max(S::zero());
                phase1_violation = s_star;

                if outcome.trouble || !outcome.optimal {
                    return Ok(QpSolution {
                        status: QpStatus::MaxIterations,
                        w: unscale(&outcome.w[..n], &eq.d),
                        objective: problem.objective(&unscale(&outcome.w[..n], &eq.d)),
                        kkt_residual: S::nan(),
                        multipliers: Vec::new(),
                        active_set: Vec::new(),
                        iterations,
                        phase1_violation,
                        certificate: None,
                    });
                }

                if s_star <= tols.phase1 {
                    start_feasible = Some(outcome.w[..n].to_vec());
                    break;
                }

                // The Phase-1 multipliers on the original rows form the
                // Farkas combination.
                let mut y_scaled: Vec<S> =
                    (0..m).map(|i| outcome.lambda[i].max(S::zero())).collect();
                let y_max = norm_inf(&y_scaled);
                if y_max > S::zero() {
                    for y in &mut y_scaled {
                        *y = *y / y_max;
                    }
                }
                // Undo row scaling: original-row combination y_i = r_i ŷ_i.
                let y: Vec<S> = y_scaled
                    .iter()
                    .zip(&eq.r)
                    .map(|(&y, &r)| y * r)
                    .collect();
                let y = {
                    let mx = norm_inf(&y);
                    if mx > S::zero() {
                        y.into_iter().map(|v| v / mx).collect::<Vec<S>>()
                    } else {
                        y
                    }
                };
                let gty = problem.ineq_matrix.t_matvec(&y);
                let certificate = FarkasCertificate {
                    gt_y_norm: norm_inf(&gty),
                    h_dot_y: dot(&problem.ineq_rhs, &y),
                    y,
                };
                if certificate.gt_y_norm <= real::<S>(1e-6) * g_scale
                    && certificate.h_dot_y > S::zero()
                {
                    return Ok(QpSolution {
                        status: QpStatus::Infeasible,
                        w: Vec::new(),
                        objective: S::nan(),
                        kkt_residual: S::nan(),
                        multipliers: Vec::new(),
                        active_set: Vec::new(),
                        iterations,
                        phase1_violation,
                        certificate: Some(certificate),
                    });
                }
            }

            match start_feasible {
                Some(s) => s,
                None => {
                    // Could neither reach feasibility nor certify its
                    // absence: report the stall rather than guessing.
                    return Ok(QpSolution {
                        status: QpStatus::MaxIterations,
                        w: Vec::new(),
                        objective: S::nan(),
                        kkt_residual: S::nan(),
                        multipliers: Vec::new(),
                        active_set: Vec::new(),
                        iterations,
                        phase1_violation,
                        certificate: None,
                    });
                }
            }
        }
    };

    // Phase 2 from the feasible start with an empty working set.
    let outcome = active_set_min(
        &h_s,
        &c_s,
        &g_s,
        &h_rhs_s,
        start,
        Vec::new(),
        options.max_iterations,
        &tols,
    );
    iterations += outcome.iterations;

    let w = unscale(&outcome.w, &eq.d);
    let multipliers: Vec<S> = outcome
        .lambda
        .iter()
        .zip(&eq.r)
        .map(|(&l, &r)| l * r)
        .collect();
    let residual = normalized_kkt_residual(&h_s, &c_s, &g_s, &h_rhs_s, &outcome.w, &outcome.lambda);

    let status = if outcome.trouble || !outcome.optimal {
        QpStatus::MaxIterations
    } else if residual > real::<S>(1e-8) {
        // Never certify a point that fails the KKT gate (its primal
        // component covers row feasibility).
        QpStatus::MaxIterations
    } else {
        QpStatus::Optimal
    };

    Ok(QpSolution {
        status,
        objective: problem.objective(&w),
        kkt_residual: residual,
        multipliers: if status == QpStatus::Optimal {
            multipliers
        } else {
            Vec::new()
        },
        active_set: outcome.working,
        iterations,
        phase1_violation,
        certificate: None,
        w,
    })
}

fn unscale<S: Scalar>(w_scaled: &[S], d: &[S]) -> Vec<S> {
    w_scaled.iter().zip(d).map(|(&w, &s)| w * s).collect()
}

/// Scale-normalized KKT residual on equilibrated data with solver
/// multipliers: max of normalized stationarity, primal violation, and
/// per-row complementarity.
///
/// Slack-based terms are measured relative to the absolute sum of the
/// row's contributions `Σ|g_ij·w_j| + |rhs_i|`: evaluating a row whose
/// products cancel at that magnitude already carries rounding of the
/// same order, so an absolute test would reject exact vertex solves
/// whenever the optimum sits far from the origin.
fn normalized_kkt_residual<S: Scalar>(
    h: &Matrix<S>,
    c: &[S],
    g: &Matrix<S>,
    rhs: &[S],
    w: &[S],
    lambda: &[S],
) -> S {
    let hw = h.matvec(w);
    // Per-variable stationarity, each measured against the absolute sum
    // of its contributions: a multiplier combination whose terms cancel
    // at magnitude M cannot land closer to zero than rounding of order
    // M, which matters when near-parallel active rows push the
    // multipliers many orders above the gradient.
    let mut worst = S::zero();
    for j in 0..w.len() {
        let mut resid = hw[j] + c[j];
        let mut mag = S::one() + hw[j].abs() + c[j].abs();
        for i in 0..rhs.len() {
            let term = g[(i, j)] * lambda[i];
            resid = resid - term;
            mag = mag + term.abs();
        }
        worst = worst.max(resid.abs() / mag);
    }
    for i in 0..rhs.len() {
        let row = g.row(i);
        let mut slack = -rhs[i];
        let mut row_mag = S::one() + rhs[i].abs();
        for j in 0..w.len() {
            let term = row[j] * w[j];
            slack = slack + term;
            row_mag = row_mag + term.abs();
        }
        worst = worst.max(-slack / row_mag);
        let compl = (lambda[i] * slack).abs() / ((S::one() + lambda[i].abs()) * row_mag);
        worst = worst.max(compl);
        worst = worst.max(-lambda[i]); // dual sign violation
    }
    worst
}

/// Absolute KKT residual of an arbitrary point `w` for `problem`.
///
/// Multipliers are reconstructed by nonnegative least squares on the rows
/// active at `w`; the residual is the max-norm of stationarity
/// `H w + c − Gᵀλ`, primal violation `max(h − G w, 0)`, and
/// complementarity `|λᵢ·slackᵢ|`. Exactly zero at the analytic optimum of
/// a strictly convex problem.
pub fn qp_kkt_residual<S: Scalar>(problem: &QpProblem<S>, w: &[S]) -> Result<S, QpError> {
    let n = problem.num_vars();
    if w.len() != n {
        return Err(QpError::Dimensions(format!(
            "point has length {}, expected {}",
            w.len(),
            n
        )));
    }
    let m = problem.num_rows();
    let grad: Vec<S> = {
        let hw = problem.hessian.matvec(w);
        hw.iter()
            .zip(&problem.linear_cost)
            .map(|(&a, &b)| a + b)
            .collect()
    };

    // Rows active at w (small absolute slack relative to the rhs scale).
    let mut active = Vec::new();
    let mut primal = S::zero();
    let mut slacks = vec![S::zero(); m];
    for i in 0..m {
        let slack = dot(problem.ineq_matrix.row(i), w) - problem.ineq_rhs[i];
        slacks[i] = slack;
        primal = primal.max(-slack);
        if slack.abs() <= real::<S>(1e-8) * (S::one() + problem.ineq_rhs[i].abs()) {
            active.push(i);
        }
    }

    // Least-squares multipliers on the active rows, clamped nonnegative.
    let mut lambda = vec![S::zero(); m];
    if !active.is_empty() {
        let k = active.len();
        let mut gram = Matrix::zeros(k, k);
        let mut rhs = vec![S::zero(); k];
        for (a, &i) in active.iter().enumerate() {
            for (b, &j) in active.iter().enumerate() {
                gram[(a, b)] = dot(problem.ineq_matrix.row(i), problem.ineq_matrix.row(j));
            }
            // Tiny ridge keeps degenerate active sets solvable.
            gram[(a, a)] = gram[(a, a)] + real::<S>(1e-12);
            rhs[a] = dot(problem.ineq_matrix.row(i), &grad);
        }
        if let Ok(sol) = solve_linear_system(&gram, &rhs) {
            for (a, &i) in active.iter().enumerate() {
                lambda[i] = sol[a].max(S::zero());
            }
        }
    }

    let gtl = if m == 0 {
        vec![S::zero(); n]
    } else {
        problem.ineq_matrix.t_matvec(&lambda)
    };
    let mut worst = S::zero();
    for i in 0..n {
        worst = worst.max((grad[i] - gtl[i]).abs());
    }
    worst = worst.max(primal);
    for i in 0..m {
        worst = worst.max((lambda[i] * slacks[i]).abs());
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn problem_1d(h: f64, c: f64, constant: f64, rows: &[(f64, f64)]) -> QpProblem<f64> {
        let mut g = Matrix::zeros(0, 1);
        let mut rhs = Vec::new();
        for &(a, b) in rows {
            g.push_row(&[a]);
            rhs.push(b);
        }
        QpProblem {
            hessian: Matrix::from_rows(&[&[h]]),
            linear_cost: vec![c],
            constant,
            ineq_matrix: g,
            ineq_rhs: rhs,
            var_names: vec!["u".into()],
        }
    }

    #[test]
    fn unconstrained_scalar_quadratic() {
        // minimize (u − 2)² = u² − 4u + 4 → u* = 2, objective 0.
        let p = problem_1d(2.0, -4.0, 4.0, &[]);
        let sol = qp_solve(&p, None).unwrap();
        assert_eq!(sol.status, QpStatus::Optimal);
        assert!((sol.w[0] - 2.0).abs() < 1e-8, "w = {}", sol.w[0]);
        assert!(sol.objective.abs() < 1e-9);
        assert!(sol.kkt_residual <= 1e-8);
    }

    #[test]
    fn active_bound_scalar_quadratic() {
        // minimize u² subject to u ≥ 3 → u* = 3, objective 9, λ = 6.
        let p = problem_1d(2.0, 0.0, 0.0, &[(1.0, 3.0)]);
        let sol = qp_solve(&p, None).unwrap();
        assert_eq!(sol.status, QpStatus::Optimal);
        assert!((sol.w[0] - 3.0).abs() < 1e-9);
        assert!((sol.objective - 9.0).abs() < 1e-8);
        assert_eq!(sol.active_set, vec![0]);
        assert!((sol.multipliers[0] - 6.0).abs() < 1e-7);
    }

    #[test]
    fn coupled_two_variable_relaxation() {
        // minimize u² + δ² subject to u + δ ≥ 2 → u* = δ* = 1, objective 2.
        let p: QpProblem<f64> = QpProblem {
            hessian: Matrix::from_rows(&[&[2.0, 0.0], &[0.0, 2.0]]),
            linear_cost: vec![0.0, 0.0],
            constant: 0.0,
            ineq_matrix: Matrix::from_rows(&[&[1.0, 1.0]]),
            ineq_rhs: vec![2.0],
            var_names: vec!["u".into(), "delta".into()],
        };
        let sol = qp_solve(&p, None).unwrap();
        assert_eq!(sol.status, QpStatus::Optimal);
        assert!((sol.w[0] - 1.0).abs() < 1e-9);
        assert!((sol.w[1] - 1.0).abs() < 1e-9);
        assert!((sol.objective - 2.0).abs() < 1e-8);
    }

    #[test]
    fn contradictory_bounds_are_infeasible_with_certificate() {
        // u ≥ 1 and −u ≥ 1 cannot both hold.
        let p = problem_1d(2.0, 0.0, 0.0, &[(1.0, 1.0), (-1.0, 1.0)]);
        let sol = qp_solve(&p, None).unwrap();
        assert_eq!(sol.status, QpStatus::Infeasible);
        assert!(sol.phase1_violation > 1e-7);
        let cert = sol.certificate.expect("certificate");
        assert!(cert.y.iter().all(|&y| y >= 0.0));
        assert!(cert.gt_y_norm <= 1e-8, "Gᵀy = {}", cert.gt_y_norm);
        assert!(cert.h_dot_y > 0.0);
    }

    #[test]
    fn kkt_residual_examples() {
        // minimize u², u ≥ 3: residual 0 at w = 3 (λ = 6), ≥ 3 at w = 0.
        let p = problem_1d(2.0, 0.0, 0.0, &[(1.0, 3.0)]);
        let at_opt = qp_kkt_residual(&p, &[3.0]).unwrap();
        assert!(at_opt < 1e-9, "residual at optimum = {at_opt}");
        let at_zero = qp_kkt_residual(&p, &[0.0]).unwrap();
        assert!(at_zero >= 3.0 - 1e-12);

        // Unconstrained (u − 2)²: zero exactly at 2, positive elsewhere.
        let q = problem_1d(2.0, -4.0, 4.0, &[]);
        assert_eq!(qp_kkt_residual(&q, &[2.0]).unwrap(), 0.0);
        assert!(qp_kkt_residual(&q, &[3.0]).unwrap() > 0.0);
    }

    #[test]
    fn warm_start_does_not_move_the_minimizer() {
        let p: QpProblem<f64> = QpProblem {
            hessian: Matrix::from_rows(&[&[2.0, 0.2], &[0.2, 4.0]]),
            linear_cost: vec![-1.0, -2.0],
            constant: 0.0,
            ineq_matrix: Matrix::from_rows(&[&[1.0, 0.0], &[0.0, 1.0], &[-1.0, -1.0]]),
            ineq_rhs: vec![-1.0, -1.0, -3.0],
            var_names: vec![],
        };
        let cold = qp_solve(&p, None).unwrap();
        let warm = qp_solve(&p, Some(&[0.3, 0.4])).unwrap();
        assert_eq!(cold.status, QpStatus::Optimal);
        assert_eq!(warm.status, QpStatus::Optimal);
        for (a, b) in cold.w.iter().zip(&warm.w) {
            assert!((a - b).abs() <= 1e-9);
        }
    }

    #[test]
    fn deterministic_repeat_solves_are_bit_identical() {
        let p: QpProblem<f64> = QpProblem {
            hessian: Matrix::from_rows(&[&[2.0, 0.0], &[0.0, 2.0]]),
            linear_cost: vec![-2.0, 0.5],
            constant: 0.0,
            ineq_matrix: Matrix::from_rows(&[&[1.0, 1.0], &[1.0, -1.0]]),
            ineq_rhs: vec![1.0, -2.0],
            var_names: vec![],
        };
        let a = qp_solve(&p, None).unwrap();
        let b = qp_solve(&p, None).unwrap();
        assert_eq!(a.status, b.status);
        assert_eq!(a.w, b.w);
        assert_eq!(a.iterations, b.iterations);
    }

    #[test]
    fn asymmetric_hessian_is_rejected() {
        let p: QpProblem<f64> = QpProblem {
            hessian: Matrix::from_rows(&[&[1.0, 0.5], &[0.0, 1.0]]),
            linear_cost: vec![0.0, 0.0],
            constant: 0.0,
            ineq_matrix: Matrix::zeros(0, 2),
            ineq_rhs: vec![],
            var_names: vec![],
        };
        assert!(matches!(
            qp_solve(&p, None),
            Err(QpError::AsymmetricHessian(_))
        ));
    }

    #[test]
    fn indefinite_hessian_is_rejected() {
        let p: QpProblem<f64> = QpProblem {
            hessian: Matrix::from_rows(&[&[1.0, 0.0], &[0.0, -1.0]]),
            linear_cost: vec![0.0, 0.0],
            constant: 0.0,
            ineq_matrix: Matrix::zeros(0, 2),
            ineq_rhs: vec![],
            var_names: vec![],
        };
        assert!(matches!(
            qp_solve(&p, None),
            Err(QpError::IndefiniteHessian(_))
        ));
    }

    #[test]
    fn linear_only_cost_direction_is_handled_by_regularization() {
        // minimize w (no quadratic term) subject to w ≥ −5: the
        // regularized problem pins w at the bound.
        let p = problem_1d(0.0, 1.0, 0.0, &[(1.0, -5.0)]);
        let sol = qp_solve(&p, None).unwrap();
        assert_eq!(sol.status, QpStatus::Optimal);
        assert!((sol.w[0] + 5.0).abs() < 1e-6, "w = {}", sol.w[0]);
    }

    #[test]
    fn mixed_scale_penalty_problem_stays_solvable() {
        // Mimics the penalty-method cost scales: a 2e12 linear weight on
        // one variable with box rows, a 4e12 quadratic on another.
        let p = QpProblem {
            hessian: Matrix::from_rows(&[
                &[2.0 / (1650.0f64 * 1650.0), 0.0, 0.0],
                &[0.0, 0.0, 0.0],
                &[0.0, 0.0, 4e12],
            ]),
            linear_cost: vec![-0.1, 2e12, -4e12],
            constant: 0.0,
            ineq_matrix: Matrix::from_rows(&[
                &[1.0, 0.0, 0.0],
                &[-1.0, 0.0, 0.0],
                &[0.0, 1.0, 0.0],
                &[0.0, -1.0, 0.0],
            ]),
            ineq_rhs: vec![-6474.6, -6474.6, -0.103, -2.897],
            var_names: vec![],
        };
        let sol = qp_solve(&p, None).unwrap();
        assert_eq!(sol.status, QpStatus::Optimal);
        // The huge linear weight pins the middle variable at its lower
        // bound; the quadratic one sits at its unconstrained optimum.
        assert!((sol.w[1] + 0.103).abs() < 1e-6, "w1 = {}", sol.w[1]);
        assert!((sol.w[2] - 1.0).abs() < 1e-6, "w2 = {}", sol.w[2]);
        assert!(sol.kkt_residual <= 1e-8);
    }

    #[test]
    fn max_iterations_is_reported_not_mislabeled() {
        let p: QpProblem<f64> = QpProblem {
            hessian: Matrix::from_rows(&[&[2.0, 0.0], &[0.0, 2.0]]),
            linear_cost: vec![-10.0, -10.0],
            constant: 0.0,
            ineq_matrix: Matrix::from_rows(&[&[1.0, 1.0], &[1.0, -1.0], &[-1.0, 0.0]]),
            ineq_rhs: vec![-4.0, -4.0, -4.0],
            var_names: vec![],
        };
        let sol = qp_solve_with(&p, None, &QpOptions { max_iterations: 1 }).unwrap();
        assert_eq!(sol.status, QpStatus::MaxIterations);
    }
}
