//! Numeric kernel: dense linear algebra and the convex QP solver.

pub mod linalg;
pub mod qp;

pub use linalg::{qr_decompose, solve_linear_system, LinAlgError, Matrix};
pub use qp::{
    qp_kkt_residual, qp_solve, qp_solve_with, FarkasCertificate, QpError, QpOptions, QpProblem,
    QpSolution, QpStatus,
};
