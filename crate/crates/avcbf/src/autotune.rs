//! Hyperparameter auto-tuning by rollback gradient ascent.
//!
//! The tuner watches a closed-loop run for the first step where the
//! safety-feasibility criterion `ψ_{mₐ−1} > ε` fails (an infeasible
//! step QP counts as a failure, since the criterion is its sufficient
//! condition), rolls back `N_c` control steps to a stored checkpoint,
//! and gradient-ascends the per-step cost references `a_{i,w}(t_l)`
//! until the minimum of the criterion over the re-simulated window
//! clears the threshold. Tuned values propagate forward past the
//! window, and the watch-tune cycle repeats until the horizon is
//! covered or a window fails to converge.
//!
//! Gradients of the windowed hard minimum are estimated by central
//! finite differences of window re-simulations. When a probed window
//! contains an infeasible QP, the minimum is `−∞` and the ascent
//! direction comes from the solver's feasibility-phase violation
//! instead, pushing the window back toward feasibility first.

use serde::Serialize;

use crate::dynamics::{AugmentedState, DEFAULT_SUBSTEPS};
use crate::scalar::{real, Scalar};
use crate::scenarios::Scenario;
use crate::sim::{
    horizon_steps, run_engine, AuxSchedule, EngineOptions, EngineRun, SimError, StopReason,
};

/// Knobs of the rollback gradient-ascent tuner.
#[derive(Debug, Clone, PartialEq)]
pub struct TuningConfig<S> {
    /// Iteration limit `J_m`: maximum ascent sweeps per window.
    pub j_m: usize,
    /// Rollback horizon `N_c` in control steps.
    pub n_c: usize,
    /// Criterion threshold `ε̄`.
    pub threshold: S,
    /// Ascent rate `γ`.
    pub learning_rate: S,
    /// Central finite-difference step for gradient estimation.
    pub fd_step: S,
    /// Integrator substeps per control interval.
    pub substeps: usize,
}

impl<S: Scalar> Default for TuningConfig<S> {
    fn default() -> Self {
        Self {
            j_m: 10,
            n_c: 8,
            threshold: real(0.1),
            learning_rate: real(10.0),
            fd_step: real(1e-3),
            substeps: DEFAULT_SUBSTEPS,
        }
    }
}

impl<S: Scalar> TuningConfig<S> {
    /// Checks the documented invariants (`J_m ≥ 1`, `N_c ≥ 1`, `γ > 0`,
    /// `ε̄ > 0`, `fd_step > 0`). Library entry points do not call this —
    /// property tests legitimately pass degenerate thresholds — but
    /// anything user-facing should.
    pub fn validate(&self) -> Result<(), String> {
        if self.j_m < 1 {
            return Err("iteration limit must be at least 1".to_string());
        }
        if self.n_c < 1 {
            return Err("rollback horizon must be at least 1 step".to_string());
        }
        if !(self.learning_rate > S::zero()) {
            return Err("learning rate must be positive".to_string());
        }
        if !(self.threshold > S::zero()) {
            return Err("criterion threshold must be positive".to_string());
        }
        if !(self.fd_step > S::zero()) {
            return Err("finite-difference step must be positive".to_string());
        }
        if self.substeps == 0 {
            return Err("integrator substeps must be positive".to_string());
        }
        Ok(())
    }
}

/// Value of one window evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowScore<S> {
    /// Hard minimum of the criterion over the window; `−∞` when any
    /// window QP was infeasible.
    pub psi_min: S,
    /// Feasibility-phase violation of the first infeasible window QP;
    /// zero when every solve succeeded.
    pub violation: S,
}

/// A watch run stopped at the first criterion failure.
#[derive(Debug, Clone)]
pub struct ViolationScan<S> {
    /// The recorded run, ending at the failing row (or the horizon).
    pub run: EngineRun<S>,
    /// Step index of the first criterion failure or infeasible QP;
    /// `None` when the run finished cleanly.
    pub violation_step: Option<usize>,
}

/// Simulates from `start` (at global step `start_step`) under the given
/// schedule until the criterion fails, the QP goes infeasible, or the
/// run finishes.
pub fn run_until_violation<S: Scalar>(
    scenario: &dyn Scenario<S>,
    start: AugmentedState<S>,
    start_step: usize,
    schedule: &AuxSchedule<S>,
    config: &TuningConfig<S>,
) -> Result<ViolationScan<S>, SimError> {
    let run = run_engine(
        scenario,
        start,
        start_step,
        &EngineOptions {
            substeps: config.substeps,
            schedule: Some(schedule.clone()),
            halt_below: Some(config.threshold),
            max_steps: None,
        },
    )?;
    let violation_step = match run.stop {
        StopReason::CriterionHalt { step, .. } => Some(step),
        StopReason::Infeasible { step, .. } => Some(step),
        _ => None,
    };
    Ok(ViolationScan {
        run,
        violation_step,
    })
}

/// Re-simulates the window `[t_k0, t_f]` from its checkpoint (solving
/// the step QPs at `t_k0 .. t_f` inclusive) and scores it: the hard
/// minimum of the criterion over steps `[suffix_start, t_f]`, with the
/// `−∞`/violation sentinel on any infeasible solve.
fn eval_window<S: Scalar>(
    scenario: &dyn Scenario<S>,
    checkpoint: &AugmentedState<S>,
    window_start: usize,
    suffix_start: usize,
    violation_step: usize,
    schedule: &AuxSchedule<S>,
    config: &TuningConfig<S>,
) -> Result<WindowScore<S>, SimError> {
    let run = run_engine(
        scenario,
        checkpoint.clone(),
        window_start,
        &EngineOptions {
            substeps: config.substeps,
            schedule: Some(schedule.clone()),
            halt_below: None,
            max_steps: Some(violation_step - window_start + 1),
        },
    )?;
    if let StopReason::Infeasible {
        phase1_violation, ..
    } = run.stop
    {
        return Ok(WindowScore {
            psi_min: S::neg_infinity(),
            violation: phase1_violation,
        });
    }
    let mut psi_min = S::infinity();
    for (offset, row) in run.trajectory.rows.iter().enumerate() {
        let step = window_start + offset;
        if step >= suffix_start && step <= violation_step && row.criterion < psi_min {
            psi_min = row.criterion;
        }
    }
    Ok(WindowScore {
        psi_min,
        violation: S::zero(),
    })
}

/// The hard minimum of the criterion over a re-simulated window
/// (`−∞` when the window contains an infeasible QP).
pub fn windowed_psi_min<S: Scalar>(
    scenario: &dyn Scenario<S>,
    checkpoint: &AugmentedState<S>,
    window_start: usize,
    violation_step: usize,
    schedule: &AuxSchedule<S>,
    config: &TuningConfig<S>,
) -> Result<S, SimError> {
    eval_window(
        scenario,
        checkpoint,
        window_start,
        window_start,
        violation_step,
        schedule,
        config,
    )
    .map(|s| s.psi_min)
}

/// Bookkeeping of one window's ascent.
#[derive(Debug, Clone, PartialEq)]
pub struct AscentFragment {
    /// Sweep number at which each tunable window step was last updated
    /// (`j(t_l)` for `l` from the window start to the step before the
    /// violation); zero for steps never updated.
    pub j_values: Vec<usize>,
    /// Ascent sweeps performed over the window.
    pub sweeps: usize,
    /// Whether the windowed minimum cleared the threshold.
    pub converged: bool,
}

/// The ascent core, separated from window re-simulation so it can be
/// driven by synthetic objectives in tests.
///
/// `window` holds the schedule entries for the window steps, the entry
/// for the violation step last; only the entries before it are tuned.
/// `objective(k, window)` scores the window evaluated from tunable
/// position `k` onward. Each sweep walks the tunable positions in
/// order: score, exit if the threshold is cleared, otherwise update
/// every component of the position's entry by `γ` times its central
/// finite-difference gradient. Up to `J_m` sweeps run; a final score
/// decides convergence when no sweep exited early.
pub fn gradient_ascend<S, F>(
    objective: &mut F,
    window: &mut [Vec<S>],
    config: &TuningConfig<S>,
) -> Result<AscentFragment, SimError>
where
    S: Scalar,
    F: FnMut(usize, &[Vec<S>]) -> Result<WindowScore<S>, SimError>,
{
    let tunable = window.len().saturating_sub(1);
    let mut j_values = vec![0usize; tunable];
    if tunable == 0 {
        return Ok(AscentFragment {
            j_values,
            sweeps: 0,
            converged: false,
        });
    }
    let two_h = real::<S>(2.0) * config.fd_step;
    for sweep in 1..=config.j_m {
        for k in 0..tunable {
            let score = objective(k, window)?;
            if score.psi_min > config.threshold {
                return Ok(AscentFragment {
                    j_values,
                    sweeps: sweep,
                    converged: true,
                });
            }
            let components = window[k].len();
            let mut grads = vec![S::zero(); components];
            for i in 0..components {
                let original = window[k][i];
                window[k][i] = original + config.fd_step;
                let plus = objective(k, window)?;
                window[k][i] = original - config.fd_step;
                let minus = objective(k, window)?;
                window[k][i] = original;
                grads[i] = if plus.psi_min.is_finite() && minus.psi_min.is_finite() {
                    (plus.psi_min - minus.psi_min) / two_h
                } else {
                    // At least one probe hit an infeasible QP: descend
                    // the feasibility-phase violation instead.
                    -(plus.violation - minus.violation) / two_h
                };
            }
            for i in 0..components {
                window[k][i] = window[k][i] + config.learning_rate * grads[i];
            }
            j_values[k] = sweep;
        }
    }
    let converged = objective(0, window)?.psi_min > config.threshold;
    Ok(AscentFragment {
        j_values,
        sweeps: config.j_m,
        converged,
    })
}

/// Runs the ascent over the window `[window_start, violation_step]`,
/// rewriting the affected schedule entries in place.
pub fn grad_ascent_window<S: Scalar>(
    scenario: &dyn Scenario<S>,
    checkpoint: &AugmentedState<S>,
    window_start: usize,
    violation_step: usize,
    schedule: &mut AuxSchedule<S>,
    config: &TuningConfig<S>,
) -> Result<AscentFragment, SimError> {
    let mut window: Vec<Vec<S>> = (window_start..=violation_step)
        .map(|k| schedule.at(k).to_vec())
        .collect();
    let base = schedule.clone();
    let mut probe = base.clone();
    let mut objective = |k: usize, win: &[Vec<S>]| {
        for (offset, entry) in win.iter().enumerate() {
            probe.values[window_start + offset] = entry.clone();
        }
        eval_window(
            scenario,
            checkpoint,
            window_start,
            window_start + k,
            violation_step,
            &probe,
            config,
        )
    };
    let fragment = gradient_ascend(&mut objective, &mut window, config)?;
    for (offset, entry) in window.into_iter().enumerate() {
        schedule.values[window_start + offset] = entry;
    }
    Ok(fragment)
}

/// One processed tuning window.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TuningWindow {
    /// First window step (the rollback target).
    pub start_step: usize,
    /// Step of the detected criterion failure.
    pub violation_step: usize,
    /// Time of the first window step.
    pub start_time: f64,
    /// Time of the detected failure.
    pub violation_time: f64,
    /// Ascent sweeps spent on this window.
    pub sweeps: usize,
    /// Whether this window cleared the threshold.
    pub converged: bool,
}

/// Tuning results over a full horizon.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TuningReport {
    /// Final per-step cost references, one vector of chain targets per
    /// control step.
    pub tuned_values: Vec<Vec<f64>>,
    /// Per-step ascent-update counts, accumulated across windows.
    pub iterations: Vec<usize>,
    /// Sum of all per-step counts. Derivable from `iterations`, so the
    /// exported report omits it.
    #[serde(skip)]
    pub cumulative_iterations: usize,
    /// Windows processed, in order.
    pub windows: Vec<TuningWindow>,
    /// True when the final watch run covered the horizon (or reached
    /// the goal region) without a criterion failure.
    pub converged: bool,
}

/// A finished tuning session: the report, the tuned schedule, and the
/// last watch run (full-horizon when converged, partial otherwise).
#[derive(Debug, Clone)]
pub struct TuningOutcome<S> {
    /// Serializable results.
    pub report: TuningReport,
    /// The tuned per-step schedule.
    pub schedule: AuxSchedule<S>,
    /// The final watch run.
    pub final_run: EngineRun<S>,
}

/// Guard against non-terminating watch-tune cycles; generous, since a
/// healthy session needs at most a few windows.
fn execution_cap(n_steps: usize) -> usize {
    2 * n_steps + 4
}

/// Watches the run, tunes each detected window, propagates the tuned
/// values forward, and repeats until the horizon is covered or a
/// window fails.
pub fn tune_full_horizon<S: Scalar>(
    scenario: &dyn Scenario<S>,
    config: &TuningConfig<S>,
) -> Result<TuningOutcome<S>, SimError> {
    scenario.initial_membership()?;
    let n_steps = horizon_steps(scenario);
    let dt = scenario.dt().to_real();
    let mut schedule = AuxSchedule::constant(scenario.default_aux_targets(), n_steps);
    let mut iterations = vec![0usize; n_steps.max(1)];
    let mut windows: Vec<TuningWindow> = Vec::new();
    let mut previous: Option<(usize, Vec<Vec<S>>)> = None;

    let finish = |schedule: AuxSchedule<S>,
                  iterations: Vec<usize>,
                  windows: Vec<TuningWindow>,
                  converged: bool,
                  final_run: EngineRun<S>| {
        let cumulative_iterations = iterations.iter().sum();
        TuningOutcome {
            report: TuningReport {
                tuned_values: schedule
                    .values
                    .iter()
                    .map(|v| v.iter().map(|x| x.to_real()).collect())
                    .collect(),
                iterations,
                cumulative_iterations,
                windows,
                converged,
            },
            schedule,
            final_run,
        }
    };

    for _ in 0..execution_cap(n_steps) {
        let scan = run_until_violation(scenario, scenario.initial_state(), 0, &schedule, config)?;
        let Some(f) = scan.violation_step else {
            return Ok(finish(schedule, iterations, windows, true, scan.run));
        };
        if f == 0 {
            // Violated at the initial state: nothing upstream to tune.
            return Ok(finish(schedule, iterations, windows, false, scan.run));
        }
        // A repeat of the same failure under an identical schedule can
        // never resolve (runs are deterministic); stop honestly.
        if let Some((prev_f, prev_values)) = &previous {
            if *prev_f == f && *prev_values == schedule.values {
                return Ok(finish(schedule, iterations, windows, false, scan.run));
            }
        }
        previous = Some((f, schedule.values.clone()));

        let window_start = f.saturating_sub(config.n_c);
        let checkpoint = scan.run.states[window_start].clone();
        let fragment = grad_ascent_window(
            scenario,
            &checkpoint,
            window_start,
            f,
            &mut schedule,
            config,
        )?;
        for (offset, j) in fragment.j_values.iter().enumerate() {
            iterations[window_start + offset] += j;
        }
        windows.push(TuningWindow {
            start_step: window_start,
            violation_step: f,
            start_time: window_start as f64 * dt,
            violation_time: f as f64 * dt,
            sweeps: fragment.sweeps,
            converged: fragment.converged,
        });
        if !fragment.converged {
            return Ok(finish(schedule, iterations, windows, false, scan.run));
        }
        // Forward propagation: every step from the violation onward
        // inherits the last tuned value.
        let carry = schedule.values[f - 1].clone();
        for value in schedule.values.iter_mut().skip(f) {
            *value = carry.clone();
        }
    }
    // Cycle guard tripped: report the state of affairs without claiming
    // convergence.
    let scan = run_until_violation(scenario, scenario.initial_state(), 0, &schedule, config)?;
    Ok(finish(schedule, iterations, windows, false, scan.run))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenarios::{AccParams, AccScenario, AccVariant};
    use crate::sim::simulate;

    fn short_cruise(horizon: f64) -> AccScenario<f64> {
        let params = AccParams::<f64> {
            horizon,
            ..AccParams::cruise()
        };
        AccScenario::new(params, AccVariant::Avcbf).unwrap()
    }

    fn quadratic_oracle(k: usize, win: &[Vec<f64>]) -> Result<WindowScore<f64>, SimError> {
        assert_eq!(k, 0);
        let a = win[0][0];
        Ok(WindowScore {
            psi_min: 1.0 - (a - 2.0) * (a - 2.0),
            violation: 0.0,
        })
    }

    #[test]
    fn synthetic_oracle_ascends_monotonically() {
        let config = TuningConfig::<f64> {
            j_m: 10,
            n_c: 1,
            threshold: 0.5,
            learning_rate: 0.1,
            fd_step: 1e-3,
            substeps: 1,
        };
        let mut history = Vec::new();
        let mut objective = |k: usize, win: &[Vec<f64>]| {
            let score = quadratic_oracle(k, win)?;
            history.push((win[0][0], score.psi_min));
            Ok(score)
        };
        let mut window = vec![vec![0.0], vec![0.0]];
        let fragment = gradient_ascend(&mut objective, &mut window, &config).unwrap();
        assert!(fragment.converged);
        assert!(fragment.sweeps <= 6, "took {} sweeps", fragment.sweeps);
        // Only the pre-update scores form the ascent sequence; probe
        // evaluations interleave, so filter to the sweep-start values.
        let sweep_scores: Vec<f64> = history
            .iter()
            .enumerate()
            .filter(|(i, _)| i % 3 == 0)
            .map(|(_, (_, s))| *s)
            .collect();
        for pair in sweep_scores.windows(2) {
            assert!(pair[1] >= pair[0], "not monotone: {sweep_scores:?}");
        }
        assert!(window[0][0] > 1.2 && window[0][0] < 2.0);
    }

    #[test]
    fn zero_rate_changes_nothing_and_reports_failure() {
        let config = TuningConfig::<f64> {
            j_m: 3,
            learning_rate: 0.0,
            threshold: 0.5,
            ..TuningConfig::default()
        };
        let mut objective = |k, win: &[Vec<f64>]| quadratic_oracle(k, win);
        let mut window = vec![vec![0.0], vec![0.0]];
        let fragment = gradient_ascend(&mut objective, &mut window, &config).unwrap();
        assert!(!fragment.converged);
        assert_eq!(fragment.sweeps, 3);
        assert_eq!(window[0][0], 0.0);
        assert_eq!(fragment.j_values, vec![3]);
    }

    #[test]
    fn satisfied_window_exits_without_updates() {
        let config = TuningConfig::<f64> {
            threshold: 0.5,
            ..TuningConfig::default()
        };
        let mut calls = 0usize;
        let mut objective = |_k: usize, _win: &[Vec<f64>]| {
            calls += 1;
            Ok(WindowScore {
                psi_min: 5.0,
                violation: 0.0,
            })
        };
        let mut window = vec![vec![7.5], vec![7.5]];
        let fragment = gradient_ascend(&mut objective, &mut window, &config).unwrap();
        assert!(fragment.converged);
        assert_eq!(calls, 1);
        assert_eq!(window[0][0], 7.5);
        assert_eq!(fragment.j_values, vec![0]);
    }

    #[test]
    fn infeasible_probes_switch_to_violation_descent() {
        let config = TuningConfig::<f64> {
            j_m: 1,
            threshold: 0.5,
            learning_rate: 1.0,
            fd_step: 0.5,
            ..TuningConfig::default()
        };
        // Violation shrinks as `a` grows; the window is infeasible
        // everywhere, so ascent must push `a` upward via the violation.
        let mut objective = |_k: usize, win: &[Vec<f64>]| {
            Ok(WindowScore {
                psi_min: f64::NEG_INFINITY,
                violation: 10.0 - win[0][0],
            })
        };
        let mut window = vec![vec![0.0], vec![0.0]];
        let fragment = gradient_ascend(&mut objective, &mut window, &config).unwrap();
        assert!(!fragment.converged);
        // grad = −(viol(+h) − viol(−h)) / 2h = 1, update = γ·1.
        assert!((window[0][0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn impossible_threshold_flags_the_first_step() {
        let sc = short_cruise(1.0);
        let schedule = AuxSchedule::constant(sc.default_aux_targets(), 10);
        let config = TuningConfig::<f64> {
            threshold: f64::INFINITY,
            ..TuningConfig::default()
        };
        let scan =
            run_until_violation(&sc, sc.initial_state(), 0, &schedule, &config).unwrap();
        assert_eq!(scan.violation_step, Some(0));
    }

    #[test]
    fn benign_run_reports_no_violation() {
        let sc = short_cruise(1.0);
        let schedule = AuxSchedule::constant(sc.default_aux_targets(), 10);
        let config = TuningConfig::<f64> {
            threshold: 1e-6,
            ..TuningConfig::default()
        };
        let scan =
            run_until_violation(&sc, sc.initial_state(), 0, &schedule, &config).unwrap();
        assert_eq!(scan.violation_step, None);
        assert_eq!(scan.run.trajectory.rows.len(), 11);
    }

    #[test]
    fn windowed_minimum_matches_the_recorded_criterion_column() {
        let sc = short_cruise(2.0);
        let config = TuningConfig::<f64> {
            threshold: 1e-6,
            ..TuningConfig::default()
        };
        let schedule = AuxSchedule::constant(sc.default_aux_targets(), 20);
        let full = simulate(&sc, &EngineOptions::default()).unwrap();
        let expected = full.trajectory.rows[4..=12]
            .iter()
            .map(|r| r.criterion)
            .fold(f64::INFINITY, f64::min);
        let got =
            windowed_psi_min(&sc, &full.states[4], 4, 12, &schedule, &config).unwrap();
        assert_eq!(got, expected);
    }

    #[test]
    fn untriggered_tuner_reproduces_the_plain_run_exactly() {
        let sc = short_cruise(1.5);
        let config = TuningConfig::<f64> {
            threshold: f64::NEG_INFINITY,
            ..TuningConfig::default()
        };
        let outcome = tune_full_horizon(&sc, &config).unwrap();
        assert!(outcome.report.converged);
        assert!(outcome.report.windows.is_empty());
        assert_eq!(outcome.report.cumulative_iterations, 0);
        let plain = simulate(&sc, &EngineOptions::default()).unwrap();
        assert_eq!(outcome.final_run.trajectory, plain.trajectory);
    }

    #[test]
    fn zero_rate_full_horizon_reports_unconverged_window() {
        // An impossible threshold forces a window at step 1; with a zero
        // learning rate the window cannot improve, so the session ends
        // with converged=false and the window recorded.
        let sc = short_cruise(1.0);
        let config = TuningConfig::<f64> {
            threshold: 1e6,
            learning_rate: 0.0,
            j_m: 2,
            n_c: 4,
            ..TuningConfig::default()
        };
        let outcome = tune_full_horizon(&sc, &config).unwrap();
        assert!(!outcome.report.converged);
        // Violation at step 0 ends the session before any window.
        assert!(outcome.report.windows.is_empty());
    }
}
