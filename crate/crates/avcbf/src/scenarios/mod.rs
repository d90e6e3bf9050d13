//! Concrete control scenarios: adaptive cruise control and unicycle
//! obstacle avoidance, each in several controller flavours (plain HOCBF,
//! auxiliary-variable adaptive variants, and a penalty-parameter
//! baseline).
//!
//! A [`Scenario`] packages everything the simulation engine needs per
//! control interval: the plant, the decision-variable layout, the
//! constraint rows (barrier cascade, auxiliary positivity, CLF, control
//! bounds), the quadratic cost, and the bookkeeping hooks (barrier
//! value, ψ levels, target test).

mod acc;
mod unicycle;

pub use acc::{
    acc_resistance, AccParams, AccScenario, AccVariant, CdProfile, PacbfParams, ReducedWeights,
};
pub use unicycle::{UnicycleParams, UnicycleScenario, UnicycleVariant};

use thiserror::Error;

use crate::cbf::{CbfError, ConstraintRow, CostSpec};
use crate::dynamics::{step_augmented, AffineDynamics, AugmentedState, DynamicsError};
use crate::scalar::Scalar;

/// Errors raised while evaluating a scenario.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScenarioError {
    /// The initial state violates a required set membership.
    #[error("initial state outside required set: {0}")]
    InitialMembership(String),
    /// A state reached a region where the model is undefined.
    #[error("invalid state: {0}")]
    InvalidState(String),
    /// Constraint construction failed.
    #[error(transparent)]
    Cbf(#[from] CbfError),
}

/// A pluggable closed-loop scenario.
///
/// Implementations are immutable after construction; all methods take
/// the state explicitly, so independent simulations may share one
/// scenario value.
pub trait Scenario<S: Scalar>: Send + Sync {
    /// Stable identifier, e.g. `acc_avcbf`.
    fn name(&self) -> String;

    /// Plant state component names, in state-vector order.
    fn state_names(&self) -> Vec<String>;

    /// Auxiliary chain state names, flattened in chain order.
    fn chain_state_names(&self) -> Vec<String>;

    /// Decision variable names (controls, auxiliary inputs, slacks).
    fn decision_names(&self) -> Vec<String>;

    /// Positions of plant controls within the decision vector.
    fn control_indices(&self) -> Vec<usize>;

    /// Positions of the chain-driving auxiliary inputs, one per chain.
    fn chain_input_indices(&self) -> Vec<usize>;

    /// Positions of relaxation slacks within the decision vector.
    fn slack_indices(&self) -> Vec<usize>;

    /// The plant dynamics.
    fn dynamics(&self) -> &AffineDynamics<S>;

    /// Initial augmented state at `t = 0`.
    fn initial_state(&self) -> AugmentedState<S>;

    /// Control interval length.
    fn dt(&self) -> S;

    /// Simulation horizon `T`.
    fn horizon(&self) -> S;

    /// Raw safety function `b(x)` (unscaled by auxiliary functions).
    fn barrier(&self, state: &AugmentedState<S>) -> S;

    /// The pre-input barrier levels `ψ₀ .. ψ_{mₐ−1}`; the last entry is
    /// the safety-feasibility criterion value.
    fn psi_levels(&self, state: &AugmentedState<S>) -> Vec<S>;

    /// All constraint rows at this state.
    fn rows(&self, state: &AugmentedState<S>) -> Result<Vec<ConstraintRow<S>>, ScenarioError>;

    /// Quadratic cost at this state. `aux_targets` supplies the value
    /// each chain input is pulled toward (one entry per chain); pass
    /// [`Scenario::default_aux_targets`] when not tuning.
    fn cost(&self, state: &AugmentedState<S>, aux_targets: &[S]) -> CostSpec<S>;

    /// The configured resting targets for the chain inputs.
    fn default_aux_targets(&self) -> Vec<S>;

    /// Verifies the initial state lies in every required set.
    fn initial_membership(&self) -> Result<(), ScenarioError>;

    /// Rejects states where the scenario's model assumptions fail
    /// (e.g. non-positive forward speed in the cruise-control model).
    fn validate_state(&self, _state: &AugmentedState<S>) -> Result<(), ScenarioError> {
        Ok(())
    }

    /// Whether the goal region has been reached; `None` for scenarios
    /// without a terminal target.
    fn target_reached(&self, _state: &AugmentedState<S>) -> Option<bool> {
        None
    }

    /// Advances one control interval under the solved decision vector.
    fn advance(
        &self,
        state: &AugmentedState<S>,
        decision: &[S],
        substeps: usize,
    ) -> Result<AugmentedState<S>, DynamicsError> {
        let u: Vec<S> = self
            .control_indices()
            .iter()
            .map(|&i| decision[i])
            .collect();
        let nu: Vec<S> = self
            .chain_input_indices()
            .iter()
            .map(|&i| decision[i])
            .collect();
        step_augmented(self.dynamics(), state, &u, &nu, self.dt(), substeps)
    }
}
