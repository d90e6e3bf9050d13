//! Adaptive control barrier function toolkit.
//!
//! Implements QP-based safety filters built from high-order control
//! barrier functions whose levels are multiplied by auxiliary adaptive
//! variables, together with the scenario models (adaptive cruise control
//! and unicycle-style obstacle avoidance), a windowed gradient-ascent
//! hyperparameter tuner, and a simulation/export layer.
//!
//! The numeric core is generic over the scalar type (`f32` or `f64`)
//! through the [`scalar::Scalar`] trait; concrete `f64` aliases are
//! exported at the crate root for ordinary use.

pub mod autotune;
pub mod cbf;
pub mod dynamics;
pub mod numkit;
pub mod scalar;
pub mod scenarios;
pub mod sim;

pub use scalar::Scalar;

/// Default scalar type for simulation and I/O work.
pub type Real = f64;

/// Dense matrix over the default scalar.
pub type Matrix = numkit::Matrix<Real>;
/// QP problem over the default scalar.
pub type QpProblem = numkit::QpProblem<Real>;
/// QP solution over the default scalar.
pub type QpSolution = numkit::QpSolution<Real>;
/// Constraint row over the default scalar.
pub type ConstraintRow = cbf::ConstraintRow<Real>;
/// Auxiliary chain over the default scalar.
pub type AuxiliaryChain = cbf::AuxiliaryChain<Real>;
/// Augmented simulation state over the default scalar.
pub type AugmentedState = dynamics::AugmentedState<Real>;
