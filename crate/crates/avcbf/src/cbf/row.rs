//! Affine constraint rows and QP assembly.

use crate::cbf::CbfError;
use crate::numkit::{Matrix, QpProblem};
use crate::scalar::Scalar;

/// Role of a constraint row in the step QP; used for diagnostics and for
/// attributing infeasibility.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowTag {
    /// Highest-order barrier condition (the safety row).
    Barrier,
    /// Positivity-cascade row of auxiliary chain `i`.
    AuxChain(usize),
    /// Lyapunov tracking row with slack.
    Clf,
    /// Box bound on control `index`; `upper` distinguishes the two sides.
    ControlBound {
        /// Control index within the control block.
        index: usize,
        /// True for the upper-bound row.
        upper: bool,
    },
    /// Penalty-state box row (`upper` side flag).
    PacbfAux {
        /// True for the upper-bound row.
        upper: bool,
    },
    /// Penalty-state tracking row with its own slack.
    PacbfClf,
}

impl std::fmt::Display for RowTag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RowTag::Barrier => write!(f, "barrier"),
            RowTag::AuxChain(i) => write!(f, "aux_chain_{i}"),
            RowTag::Clf => write!(f, "clf"),
            RowTag::ControlBound { index, upper } => {
                write!(f, "u{}_{}", index, if *upper { "max" } else { "min" })
            }
            RowTag::PacbfAux { upper } => {
                write!(f, "penalty_{}", if *upper { "max" } else { "min" })
            }
            RowTag::PacbfClf => write!(f, "penalty_clf"),
        }
    }
}

/// One affine inequality `coeffs · w ≥ rhs` over the decision vector.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintRow<S> {
    /// Coefficients over the full decision vector.
    pub coeffs: Vec<S>,
    /// Right-hand side.
    pub rhs: S,
    /// Row role.
    pub tag: RowTag,
    /// Barrier levels `ψ₀ …` recorded at build time (barrier rows only);
    /// diagnostic payload for trajectory export.
    pub level_values: Vec<S>,
}

impl<S: Scalar> ConstraintRow<S> {
    /// Row residual `coeffs · w − rhs` at a decision vector; nonnegative
    /// when satisfied.
    pub fn residual(&self, w: &[S]) -> S {
        self.coeffs
            .iter()
            .zip(w)
            .fold(S::zero(), |acc, (&c, &wi)| acc + c * wi)
            - self.rhs
    }
}

/// Quadratic cost `½ wᵀH w + cᵀw + k` for the step QP.
#[derive(Debug, Clone, PartialEq)]
pub struct CostSpec<S> {
    /// Hessian `H`.
    pub hessian: Matrix<S>,
    /// Linear term `c`.
    pub linear: Vec<S>,
    /// Constant `k`, so reported objectives match the modeled cost.
    pub constant: S,
    /// Decision-variable names.
    pub var_names: Vec<String>,
}

/// Builds the Lyapunov tracking row
/// `−Σ LgVⱼ·uⱼ + δ ≥ LfV + c₃·V`
/// from the relaxed condition `LfV + LgV·u + c₃V ≤ δ`.
///
/// `lg_v` holds the Lie derivative along each control column (one entry
/// per control); `delta_index` locates the slack variable.
pub fn build_clf_row<S: Scalar>(
    lf_v: S,
    lg_v: &[S],
    c3: S,
    v_value: S,
    dim: usize,
    u_indices: &[usize],
    delta_index: usize,
) -> ConstraintRow<S> {
    assert_eq!(lg_v.len(), u_indices.len(), "one LgV entry per control");
    let mut coeffs = vec![S::zero(); dim];
    for (&idx, &lg) in u_indices.iter().zip(lg_v) {
        coeffs[idx] = -lg;
    }
    coeffs[delta_index] = S::one();
    ConstraintRow {
        coeffs,
        rhs: lf_v + c3 * v_value,
        tag: RowTag::Clf,
        level_values: Vec::new(),
    }
}

/// Builds the pair of box rows `uⱼ ≥ lo` and `−uⱼ ≥ −hi` for each
/// control; fails if any pair has `lo ≥ hi`.
pub fn build_control_bound_rows<S: Scalar>(
    lower: &[S],
    upper: &[S],
    dim: usize,
    u_indices: &[usize],
) -> Result<Vec<ConstraintRow<S>>, CbfError> {
    assert_eq!(lower.len(), upper.len(), "bound vectors must align");
    assert_eq!(lower.len(), u_indices.len(), "one bound pair per control");
    let mut rows = Vec::with_capacity(2 * lower.len());
    for (j, ((&lo, &hi), &idx)) in lower.iter().zip(upper).zip(u_indices).enumerate() {
        if !(lo < hi) {
            return Err(CbfError::CrossedBounds {
                index: j,
                lower: lo.to_real(),
                upper: hi.to_real(),
            });
        }
        let mut lo_coeffs = vec![S::zero(); dim];
        lo_coeffs[idx] = S::one();
        rows.push(ConstraintRow {
            coeffs: lo_coeffs,
            rhs: lo,
            tag: RowTag::ControlBound {
                index: j,
                upper: false,
            },
            level_values: Vec::new(),
        });
        let mut hi_coeffs = vec![S::zero(); dim];
        hi_coeffs[idx] = -S::one();
        rows.push(ConstraintRow {
            coeffs: hi_coeffs,
            rhs: -hi,
            tag: RowTag::ControlBound {
                index: j,
                upper: true,
            },
            level_values: Vec::new(),
        });
    }
    Ok(rows)
}

/// Stacks constraint rows and a cost into a QP ready for the solver.
pub fn assemble_qp<S: Scalar>(rows: &[ConstraintRow<S>], cost: &CostSpec<S>) -> QpProblem<S> {
    let dim = cost.linear.len();
    let mut g = Matrix::zeros(0, dim);
    let mut rhs = Vec::with_capacity(rows.len());
    for row in rows {
        assert_eq!(
            row.coeffs.len(),
            dim,
            "row width must match the decision dimension"
        );
        g.push_row(&row.coeffs);
        rhs.push(row.rhs);
    }
    QpProblem {
        hessian: cost.hessian.clone(),
        linear_cost: cost.linear.clone(),
        constant: cost.constant,
        ineq_matrix: g,
        ineq_rhs: rhs,
        var_names: cost.var_names.clone(),
    }
}
