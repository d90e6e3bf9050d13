//! Barrier-function building blocks.
//!
//! This layer turns barrier values and their Lie derivatives into the
//! affine inequality rows of the per-step safety QP: linear class-κ
//! cascades, auxiliary-variable chains with positivity conditions,
//! Lyapunov (CLF) rows, control bounds, and the assembly of all rows
//! plus a quadratic cost into a solvable problem.

mod chain;
mod criterion;
mod kappa;
mod row;

pub use chain::{build_aux_chain_row, AuxFnKind, AuxiliaryChain};
pub use criterion::{safety_feasibility_criterion, SafetyFeasibilityReport};
pub use kappa::{cascade_levels, eval_class_kappa, ClassKappaLinear};
pub use row::{
    assemble_qp, build_clf_row, build_control_bound_rows, ConstraintRow, CostSpec, RowTag,
};

use thiserror::Error;

/// Errors from barrier-row construction.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum CbfError {
    /// A class-κ gain must be strictly positive.
    #[error("class-kappa gain must be positive, got {0}")]
    NonPositiveGain(f64),
    /// Derivative/state vectors are shorter than the cascade needs.
    #[error("{context}: need {needed} values, got {got}")]
    LengthMismatch {
        /// What was being built.
        context: &'static str,
        /// Required length.
        needed: usize,
        /// Provided length.
        got: usize,
    },
    /// A control bound pair has lower ≥ upper.
    #[error("control bound {index} has lower {lower} >= upper {upper}")]
    CrossedBounds {
        /// Control index.
        index: usize,
        /// Lower bound.
        lower: f64,
        /// Upper bound.
        upper: f64,
    },
}
