//! The per-step closed-loop engine.
//!
//! Each control interval: read the state, build the scenario's
//! constraint rows, assemble and solve the step QP, hold the optimal
//! decisions over the interval, and integrate. The loop stops at the
//! horizon, at the goal region, at the first infeasible QP (the row is
//! recorded, nothing follows it), or — for the tuner — at the first
//! step where the safety-feasibility criterion drops to its threshold.
//! Runs are deterministic: identical inputs produce bit-identical
//! trajectories.

use thiserror::Error;

use crate::cbf::assemble_qp;
use crate::dynamics::{AugmentedState, DEFAULT_SUBSTEPS};
use crate::numkit::{qp_solve, QpStatus};
use crate::scalar::Scalar;
use crate::scenarios::{Scenario, ScenarioError};
use crate::sim::trajectory::{StepRecord, StepStatus, Trajectory};

/// Errors raised by the simulation layer.
#[derive(Debug, Error)]
pub enum SimError {
    /// The scenario rejected its configuration or initial state before
    /// any stepping.
    #[error("scenario rejected at startup: {0}")]
    Setup(#[from] ScenarioError),
    /// The run hit a state or solve the numerics cannot continue from.
    #[error("numeric abort at step {step}: {detail}")]
    NumericAbort {
        /// Step index at which the abort occurred.
        step: usize,
        /// Human-readable cause.
        detail: String,
    },
    /// A file could not be read or written.
    #[error("{path}: {source}")]
    Io {
        /// Path involved.
        path: String,
        /// Underlying I/O error.
        #[source]
        source: std::io::Error,
    },
    /// A CSV file did not match the expected shape.
    #[error("{path}: {detail}")]
    Parse {
        /// Path involved.
        path: String,
        /// What was malformed.
        detail: String,
    },
    /// Runs handed to the comparator do not share a time grid.
    #[error("misaligned runs: {0}")]
    Misaligned(String),
}

/// Per-step values the chain inputs are pulled toward in the cost,
/// indexed by global step number.
///
/// Plain runs use a constant schedule equal to the scenario defaults;
/// the tuner rewrites individual entries. Lookups past the end hold the
/// final value, matching the tuner's forward propagation rule.
#[derive(Debug, Clone, PartialEq)]
pub struct AuxSchedule<S> {
    /// One target vector per step.
    pub values: Vec<Vec<S>>,
}

impl<S: Scalar> AuxSchedule<S> {
    /// A schedule holding `targets` at every one of `n_steps` steps.
    pub fn constant(targets: Vec<S>, n_steps: usize) -> Self {
        Self {
            values: vec![targets; n_steps.max(1)],
        }
    }

    /// The targets for step `k`, holding the last entry beyond the end.
    pub fn at(&self, k: usize) -> &[S] {
        match self.values.len() {
            0 => &[],
            n => &self.values[k.min(n - 1)],
        }
    }
}

/// Why the engine stopped recording.
#[derive(Debug, Clone, PartialEq)]
pub enum StopReason<S> {
    /// The step limit (horizon or window length) was reached.
    Horizon,
    /// The goal region test passed at this step.
    Target {
        /// Step index of the target row.
        step: usize,
    },
    /// The step QP was infeasible.
    Infeasible {
        /// Step index of the infeasible row.
        step: usize,
        /// Minimized maximum constraint violation from the solver's
        /// feasibility phase (the tuner ascends against this when a
        /// window contains an infeasible QP).
        phase1_violation: S,
    },
    /// The monitored criterion failed `value > threshold`.
    CriterionHalt {
        /// Step index of the halted row.
        step: usize,
        /// Criterion value at that step.
        value: S,
    },
}

/// A finished engine invocation.
#[derive(Debug, Clone)]
pub struct EngineRun<S> {
    /// The recorded rows.
    pub trajectory: Trajectory<S>,
    /// Exact augmented state at each recorded row — the tuner's
    /// lossless rollback checkpoints.
    pub states: Vec<AugmentedState<S>>,
    /// Why recording stopped.
    pub stop: StopReason<S>,
}

/// Engine knobs beyond the scenario itself.
#[derive(Debug, Clone)]
pub struct EngineOptions<S> {
    /// Integrator substeps per control interval.
    pub substeps: usize,
    /// Per-step chain-input targets; scenario defaults when `None`.
    pub schedule: Option<AuxSchedule<S>>,
    /// Stop before solving when the criterion value fails
    /// `value > threshold`. Plain simulation leaves this `None`.
    pub halt_below: Option<S>,
    /// Cap on the number of solved steps, counted from the start state
    /// (window re-simulations); the horizon still applies.
    pub max_steps: Option<usize>,
}

impl<S> Default for EngineOptions<S> {
    fn default() -> Self {
        Self {
            substeps: DEFAULT_SUBSTEPS,
            schedule: None,
            halt_below: None,
            max_steps: None,
        }
    }
}

/// Number of control intervals in the scenario's horizon.
pub fn horizon_steps<S: Scalar>(scenario: &dyn Scenario<S>) -> usize {
    let ratio = (scenario.horizon() / scenario.dt()).to_real();
    ratio.round().max(0.0) as usize
}

/// Runs the closed loop from `start` (the state at global step
/// `start_step`) until a stop condition, recording one row per
/// control-interval boundary including the stopping row.
pub fn run_engine<S: Scalar>(
    scenario: &dyn Scenario<S>,
    start: AugmentedState<S>,
    start_step: usize,
    opts: &EngineOptions<S>,
) -> Result<EngineRun<S>, SimError> {
    let n_total = horizon_steps(scenario);
    let end_step = match opts.max_steps {
        Some(m) => n_total.min(start_step + m),
        None => n_total,
    };
    let defaults = scenario.default_aux_targets();

    let mut rows: Vec<StepRecord<S>> = Vec::new();
    let mut states: Vec<AugmentedState<S>> = Vec::new();
    let mut state = start;
    let mut step = start_step;
    let mut level_count = scenario.psi_levels(&state).len();

    let stop = loop {
        let b = scenario.barrier(&state);
        let psi = scenario.psi_levels(&state);
        let criterion = *psi.last().expect("every scenario has at least one level");
        level_count = level_count.max(psi.len());
        states.push(state.clone());

        let mut record = |status: StepStatus, decisions: Option<Vec<S>>, objective: Option<S>| {
            rows.push(StepRecord {
                t: state.t,
                x: state.x.clone(),
                chains: state.flat_chains(),
                b,
                decisions,
                psi: psi.clone(),
                criterion,
                status,
                objective,
            });
        };

        if scenario.target_reached(&state) == Some(true) {
            record(StepStatus::Target, None, None);
            break StopReason::Target { step };
        }
        if step >= end_step {
            record(StepStatus::Terminal, None, None);
            break StopReason::Horizon;
        }
        if let Some(threshold) = opts.halt_below {
            if !(criterion > threshold) {
                record(StepStatus::Halted, None, None);
                break StopReason::CriterionHalt {
                    step,
                    value: criterion,
                };
            }
        }

        scenario
            .validate_state(&state)
            .map_err(|e| SimError::NumericAbort {
                step,
                detail: e.to_string(),
            })?;
        let constraint_rows = scenario.rows(&state).map_err(|e| SimError::NumericAbort {
            step,
            detail: e.to_string(),
        })?;
        let targets = match &opts.schedule {
            Some(schedule) => schedule.at(step),
            None => defaults.as_slice(),
        };
        let cost = scenario.cost(&state, targets);
        let problem = assemble_qp(&constraint_rows, &cost);
        let solution = qp_solve(&problem, None).map_err(|e| SimError::NumericAbort {
            step,
            detail: e.to_string(),
        })?;
        match solution.status {
            QpStatus::Optimal => {
                record(
                    StepStatus::Optimal,
                    Some(solution.w.clone()),
                    Some(solution.objective),
                );
                state = scenario
                    .advance(&state, &solution.w, opts.substeps)
                    .map_err(|e| SimError::NumericAbort {
                        step,
                        detail: e.to_string(),
                    })?;
                step += 1;
            }
            QpStatus::Infeasible => {
                record(StepStatus::Infeasible, None, None);
                break StopReason::Infeasible {
                    step,
                    phase1_violation: solution.phase1_violation,
                };
            }
            QpStatus::MaxIterations => {
                return Err(SimError::NumericAbort {
                    step,
                    detail: "step QP hit the solver iteration cap".to_string(),
                });
            }
        }
    };

    Ok(EngineRun {
        trajectory: Trajectory {
            name: scenario.name(),
            state_names: scenario.state_names(),
            chain_names: scenario.chain_state_names(),
            decision_names: scenario.decision_names(),
            level_count,
            rows,
        },
        states,
        stop,
    })
}

/// Simulates a scenario from its initial state over its full horizon,
/// verifying initial-set membership first.
pub fn simulate<S: Scalar>(
    scenario: &dyn Scenario<S>,
    opts: &EngineOptions<S>,
) -> Result<EngineRun<S>, SimError> {
    scenario.initial_membership()?;
    run_engine(scenario, scenario.initial_state(), 0, opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenarios::{AccParams, AccScenario, AccVariant};
    use crate::sim::trajectory::StepStatus;

    fn short_cruise(horizon: f64) -> AccScenario<f64> {
        let params = AccParams::<f64> {
            horizon,
            ..AccParams::cruise()
        };
        AccScenario::new(params, AccVariant::Avcbf).unwrap()
    }

    #[test]
    fn zero_horizon_records_only_the_initial_row() {
        let sc = short_cruise(0.0);
        let run = simulate(&sc, &EngineOptions::default()).unwrap();
        assert_eq!(run.trajectory.rows.len(), 1);
        assert_eq!(run.trajectory.rows[0].status, StepStatus::Terminal);
        assert_eq!(run.stop, StopReason::Horizon);
        assert!(run.trajectory.rows[0].decisions.is_none());
    }

    #[test]
    fn one_second_run_has_uniform_grid_and_optimal_rows() {
        let sc = short_cruise(1.0);
        let run = simulate(&sc, &EngineOptions::default()).unwrap();
        let rows = &run.trajectory.rows;
        assert_eq!(rows.len(), 11);
        for (k, row) in rows.iter().enumerate() {
            assert!((row.t - 0.1 * k as f64).abs() < 1e-12);
            if k < 10 {
                assert_eq!(row.status, StepStatus::Optimal);
                assert!(row.decisions.is_some());
            } else {
                assert_eq!(row.status, StepStatus::Terminal);
            }
        }
        assert_eq!(run.states.len(), rows.len());
        // Accelerating from 6 m/s toward the 24 m/s setpoint while the
        // faster lead car opens the gap: both states increase.
        assert!(rows[10].x[0] > rows[0].x[0]);
        assert!(rows[10].x[1] > rows[0].x[1]);
    }

    #[test]
    fn reruns_are_bit_identical() {
        let sc = short_cruise(2.0);
        let a = simulate(&sc, &EngineOptions::default()).unwrap();
        let b = simulate(&sc, &EngineOptions::default()).unwrap();
        assert_eq!(a.trajectory, b.trajectory);
    }

    #[test]
    fn window_resimulation_from_checkpoint_is_bit_exact() {
        let sc = short_cruise(2.0);
        let full = simulate(&sc, &EngineOptions::default()).unwrap();
        let window = run_engine(
            &sc,
            full.states[5].clone(),
            5,
            &EngineOptions {
                max_steps: Some(8),
                ..EngineOptions::default()
            },
        )
        .unwrap();
        assert_eq!(window.trajectory.rows.len(), 9);
        for (k, row) in window.trajectory.rows.iter().enumerate() {
            let original = &full.trajectory.rows[5 + k];
            assert_eq!(row.t, original.t);
            assert_eq!(row.x, original.x);
            assert_eq!(row.chains, original.chains);
            if k < 8 {
                assert_eq!(row.decisions, original.decisions);
            }
        }
    }

    #[test]
    fn criterion_halt_stops_before_solving() {
        let sc = short_cruise(1.0);
        // The criterion starts near 106.89; an impossible threshold halts
        // the run at the first row.
        let run = simulate(
            &sc,
            &EngineOptions {
                halt_below: Some(1e9),
                ..EngineOptions::default()
            },
        )
        .unwrap();
        assert_eq!(run.trajectory.rows.len(), 1);
        assert_eq!(run.trajectory.rows[0].status, StepStatus::Halted);
        match run.stop {
            StopReason::CriterionHalt { step, value } => {
                assert_eq!(step, 0);
                assert!((value - 106.89).abs() < 1e-9);
            }
            other => panic!("expected criterion halt, got {other:?}"),
        }
    }

    #[test]
    fn schedule_lookup_holds_last_entry() {
        let schedule = AuxSchedule {
            values: vec![vec![1.0_f64], vec![2.0]],
        };
        assert_eq!(schedule.at(0), &[1.0]);
        assert_eq!(schedule.at(1), &[2.0]);
        assert_eq!(schedule.at(7), &[2.0]);
        let empty = AuxSchedule::<f64> { values: vec![] };
        assert!(empty.at(3).is_empty());
    }
}
