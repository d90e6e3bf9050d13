//! JSON run configuration and the scenario registry.
//!
//! One JSON document describes one run: a scenario identifier, an
//! optional named parameter preset, numeric parameter overrides, and
//! optional tuning settings. Unknown top-level keys and unknown
//! parameter names are rejected so a typo cannot silently fall back to
//! a default.

use std::path::Path;

use serde::Deserialize;
use serde_json::{Map, Value};
use thiserror::Error;

use crate::autotune::{tune_full_horizon, TuningConfig, TuningReport};
use crate::dynamics::DEFAULT_SUBSTEPS;
use crate::scenarios::{
    AccParams, AccScenario, AccVariant, PacbfParams, ReducedWeights, Scenario, UnicycleParams,
    UnicycleScenario, UnicycleVariant,
};
use crate::sim::engine::{simulate, EngineOptions, EngineRun, SimError};

/// Errors raised while loading or applying a run configuration.
#[derive(Debug, Error)]
pub enum ConfigError {
    /// The file could not be read.
    #[error("{path}: {source}")]
    Io {
        /// Path involved.
        path: String,
        /// Underlying I/O error.
        #[source]
        source: std::io::Error,
    },
    /// The document is not valid JSON or has unknown/ill-typed keys.
    #[error("{path}: {detail}")]
    Schema {
        /// Path involved (or `<memory>`).
        path: String,
        /// Parser message.
        detail: String,
    },
    /// The scenario id is not in the registry.
    #[error("unknown scenario {0:?}; available: {}", scenario_ids().join(", "))]
    UnknownScenario(String),
    /// The preset name is not defined for the scenario's family.
    #[error("unknown preset {preset:?} for {scenario}; available: {available}")]
    UnknownPreset {
        /// Requested preset.
        preset: String,
        /// Scenario id.
        scenario: String,
        /// Valid preset names.
        available: String,
    },
    /// A parameter override names no parameter of this scenario.
    #[error("unknown parameter {key:?} for {scenario}")]
    UnknownParameter {
        /// Offending key.
        key: String,
        /// Scenario id.
        scenario: String,
    },
    /// A parameter override is not a finite number.
    #[error("parameter {key:?} must be a finite number")]
    BadValue {
        /// Offending key.
        key: String,
    },
    /// Cross-field validation failed.
    #[error("{0}")]
    Invalid(String),
}

/// Tuning settings inside a run configuration.
#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct TuningSection {
    /// Whether `run` should tune before simulating.
    #[serde(default = "default_enabled")]
    pub enabled: bool,
    /// Ascent sweeps per window.
    #[serde(default = "default_j_m")]
    pub j_m: usize,
    /// Rollback horizon in control steps.
    #[serde(default = "default_n_c")]
    pub n_c: usize,
    /// Criterion threshold.
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    /// Ascent rate.
    #[serde(default = "default_rate")]
    pub learning_rate: f64,
    /// Finite-difference step.
    #[serde(default = "default_fd_step")]
    pub fd_step: f64,
}

fn default_enabled() -> bool {
    true
}
fn default_j_m() -> usize {
    10
}
fn default_n_c() -> usize {
    8
}
fn default_threshold() -> f64 {
    0.1
}
fn default_rate() -> f64 {
    10.0
}
fn default_fd_step() -> f64 {
    1e-3
}

impl Default for TuningSection {
    fn default() -> Self {
        Self {
            enabled: true,
            j_m: default_j_m(),
            n_c: default_n_c(),
            threshold: default_threshold(),
            learning_rate: default_rate(),
            fd_step: default_fd_step(),
        }
    }
}

impl TuningSection {
    /// Converts to the tuner's configuration, validating invariants.
    pub fn to_config(&self, substeps: usize) -> Result<TuningConfig<f64>, ConfigError> {
        let config = TuningConfig {
            j_m: self.j_m,
            n_c: self.n_c,
            threshold: self.threshold,
            learning_rate: self.learning_rate,
            fd_step: self.fd_step,
            substeps,
        };
        config.validate().map_err(ConfigError::Invalid)?;
        Ok(config)
    }
}

/// One run, as described by a JSON document.
#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Registry identifier, e.g. `acc_avcbf`.
    pub scenario: String,
    /// Named parameter preset; each family has a default.
    #[serde(default)]
    pub preset: Option<String>,
    /// Numeric parameter overrides applied on top of the preset.
    #[serde(default)]
    pub params: Map<String, Value>,
    /// Penalty-baseline parameters (only for `acc_pacbf`).
    #[serde(default)]
    pub pacbf: Map<String, Value>,
    /// Piecewise cost weights (only for `acc_reduced`).
    #[serde(default)]
    pub reduced: Map<String, Value>,
    /// Tuning settings; absent means no tuning.
    #[serde(default)]
    pub tuning: Option<TuningSection>,
    /// Integrator substeps per control interval.
    #[serde(default)]
    pub substeps: Option<usize>,
    /// Default output path, overridden by the command line.
    #[serde(default)]
    pub out: Option<String>,
    /// Seed for randomized test harnesses; simulations themselves are
    /// deterministic and ignore it.
    #[serde(default)]
    pub seed: Option<u64>,
}

/// All registry identifiers.
pub fn scenario_ids() -> Vec<&'static str> {
    vec![
        "acc_avcbf",
        "acc_hocbf",
        "acc_pacbf",
        "acc_reduced",
        "uni_hocbf",
        "uni_avcbf1",
        "uni_avcbf2",
        "uni_avcbf_r",
        "uni_avcbf_m",
    ]
}

/// Parses a configuration document from text.
pub fn parse_config(text: &str, origin: &str) -> Result<RunConfig, ConfigError> {
    serde_json::from_str(text).map_err(|e| ConfigError::Schema {
        path: origin.to_string(),
        detail: e.to_string(),
    })
}

/// Loads a configuration file.
pub fn load_config(path: &Path) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_config(&text, &path.display().to_string())
}

fn numeric(key: &str, value: &Value) -> Result<f64, ConfigError> {
    value
        .as_f64()
        .filter(|v| v.is_finite())
        .ok_or_else(|| ConfigError::BadValue {
            key: key.to_string(),
        })
}

fn apply_acc_override(
    params: &mut AccParams<f64>,
    key: &str,
    value: &Value,
    scenario: &str,
) -> Result<(), ConfigError> {
    let v = numeric(key, value)?;
    match key {
        "v_p" => params.v_p = v,
        "v_d" => params.v_d = v,
        "mass" => params.mass = v,
        "gravity" => params.gravity = v,
        "z0" => params.z0 = v,
        "l_p" => params.l_p = v,
        "f0" => params.f0 = v,
        "f1" => params.f1 = v,
        "f2" => params.f2 = v,
        "c_a" => params.c_a = v,
        "c_d" => {
            params.c_d.start = v;
            params.c_d.end = v;
        }
        "c_d_start" => params.c_d.start = v,
        "c_d_end" => params.c_d.end = v,
        "c3" => params.c3 = v,
        "q" => params.q = v,
        "w1" => params.w1 = v,
        "a_1w" => params.a_1w = v,
        "k1" => params.k1 = v,
        "k2" => params.k2 = v,
        "l1" => params.l1 = v,
        "l2" => params.l2 = v,
        "margin" => params.margin = v,
        "dt" => params.dt = v,
        "horizon" => params.horizon = v,
        "v0" => params.v0 = v,
        "a1_0" => params.a1_0 = v,
        "pi12_0" => params.pi12_0 = v,
        _ => {
            return Err(ConfigError::UnknownParameter {
                key: key.to_string(),
                scenario: scenario.to_string(),
            })
        }
    }
    Ok(())
}

fn apply_pacbf_override(
    params: &mut PacbfParams<f64>,
    key: &str,
    value: &Value,
) -> Result<(), ConfigError> {
    let v = numeric(key, value)?;
    match key {
        "p1_0" => params.p1_0 = v,
        "p2_0" => params.p2_0 = v,
        "p1_star" => params.p1_star = v,
        "p1_max" => params.p1_max = v,
        "rho" => params.rho = v,
        "w1" => params.w1 = v,
        "w2" => params.w2 = v,
        "q" => params.q = v,
        "q_p" => params.q_p = v,
        "c3" => params.c3 = v,
        _ => {
            return Err(ConfigError::UnknownParameter {
                key: key.to_string(),
                scenario: "acc_pacbf".to_string(),
            })
        }
    }
    Ok(())
}

fn apply_reduced_override(
    params: &mut ReducedWeights<f64>,
    key: &str,
    value: &Value,
) -> Result<(), ConfigError> {
    let v = numeric(key, value)?;
    match key {
        "w1_over" => params.w1_over = v,
        "q_over" => params.q_over = v,
        "w1_under" => params.w1_under = v,
        "q_under" => params.q_under = v,
        _ => {
            return Err(ConfigError::UnknownParameter {
                key: key.to_string(),
                scenario: "acc_reduced".to_string(),
            })
        }
    }
    Ok(())
}

fn apply_unicycle_override(
    params: &mut UnicycleParams<f64>,
    key: &str,
    value: &Value,
    scenario: &str,
) -> Result<(), ConfigError> {
    let v = numeric(key, value)?;
    match key {
        "mass" => params.mass = v,
        "x_o" => params.x_o = v,
        "y_o" => params.y_o = v,
        "r_o" => params.r_o = v,
        "x_d" => params.x_d = v,
        "y_d" => params.y_d = v,
        "r_d" => params.r_d = v,
        "u1_max" => params.u1_max = v,
        "u2_max" => params.u2_max = v,
        "k1" => params.k1 = v,
        "k2" => params.k2 = v,
        "l11" => params.l11 = v,
        "l12" => params.l12 = v,
        "l21" => params.l21 = v,
        "w1" => params.w1 = v,
        "w2" => params.w2 = v,
        "q" => params.q = v,
        "a_1w" => params.a_1w = v,
        "a_2w" => params.a_2w = v,
        "c3" => params.c3 = v,
        "margin" => params.margin = v,
        "x0" => params.x0 = v,
        "y0" => params.y0 = v,
        "theta0" => params.theta0 = v,
        "v0" => params.v0 = v,
        "phi0" => params.phi0 = v,
        "a1_0" => params.a1_0 = v,
        "pi12_0" => params.pi12_0 = v,
        "a2_0" => params.a2_0 = v,
        "dt" => params.dt = v,
        "horizon" => params.horizon = v,
        _ => {
            return Err(ConfigError::UnknownParameter {
                key: key.to_string(),
                scenario: scenario.to_string(),
            })
        }
    }
    Ok(())
}

fn acc_preset(name: &str, scenario: &str) -> Result<AccParams<f64>, ConfigError> {
    match name {
        "cruise" => Ok(AccParams::cruise()),
        "urgent_braking" => Ok(AccParams::urgent_braking()),
        "penalty_baseline" => Ok(AccParams::penalty_baseline()),
        "reduced_degree" => Ok(AccParams::reduced_degree()),
        _ => Err(ConfigError::UnknownPreset {
            preset: name.to_string(),
            scenario: scenario.to_string(),
            available: "cruise, urgent_braking, penalty_baseline, reduced_degree".to_string(),
        }),
    }
}

fn unicycle_preset(name: &str, scenario: &str) -> Result<UnicycleParams<f64>, ConfigError> {
    match name {
        "benchmark" => Ok(UnicycleParams::benchmark()),
        "sum_coupled" => Ok(UnicycleParams::sum_coupled()),
        "mixed_degree" => Ok(UnicycleParams::mixed_degree()),
        _ => Err(ConfigError::UnknownPreset {
            preset: name.to_string(),
            scenario: scenario.to_string(),
            available: "benchmark, sum_coupled, mixed_degree".to_string(),
        }),
    }
}

fn reject_section(section: &Map<String, Value>, name: &str, scenario: &str) -> Result<(), ConfigError> {
    if section.is_empty() {
        Ok(())
    } else {
        Err(ConfigError::Invalid(format!(
            "the {name} section does not apply to {scenario}"
        )))
    }
}

/// Builds the configured scenario.
pub fn build_scenario(config: &RunConfig) -> Result<Box<dyn Scenario<f64>>, ConfigError> {
    let id = config.scenario.as_str();
    let invalid = |e: crate::scenarios::ScenarioError| ConfigError::Invalid(e.to_string());
    match id {
        "acc_avcbf" | "acc_hocbf" | "acc_pacbf" | "acc_reduced" => {
            let (variant, default_preset) = match id {
                "acc_avcbf" => (AccVariant::Avcbf, "cruise"),
                "acc_hocbf" => (AccVariant::Hocbf, "cruise"),
                "acc_pacbf" => (AccVariant::Pacbf, "penalty_baseline"),
                _ => (AccVariant::Reduced, "reduced_degree"),
            };
            let preset = config.preset.as_deref().unwrap_or(default_preset);
            let mut params = acc_preset(preset, id)?;
            for (key, value) in &config.params {
                apply_acc_override(&mut params, key, value, id)?;
            }
            let mut scenario = AccScenario::new(params, variant).map_err(invalid)?;
            if variant == AccVariant::Pacbf {
                let mut pacbf = PacbfParams::default();
                for (key, value) in &config.pacbf {
                    apply_pacbf_override(&mut pacbf, key, value)?;
                }
                scenario = scenario.with_pacbf(pacbf);
            } else {
                reject_section(&config.pacbf, "pacbf", id)?;
            }
            if variant == AccVariant::Reduced {
                let mut weights = ReducedWeights::default();
                for (key, value) in &config.reduced {
                    apply_reduced_override(&mut weights, key, value)?;
                }
                scenario = scenario.with_reduced_weights(weights);
            } else {
                reject_section(&config.reduced, "reduced", id)?;
            }
            Ok(Box::new(scenario))
        }
        "uni_hocbf" | "uni_avcbf1" | "uni_avcbf2" | "uni_avcbf_r" | "uni_avcbf_m" => {
            reject_section(&config.pacbf, "pacbf", id)?;
            reject_section(&config.reduced, "reduced", id)?;
            let (variant, default_preset) = match id {
                "uni_hocbf" => (UnicycleVariant::Hocbf, "benchmark"),
                "uni_avcbf1" => (UnicycleVariant::Avcbf1, "benchmark"),
                "uni_avcbf2" => (UnicycleVariant::Avcbf2, "benchmark"),
                "uni_avcbf_r" => (UnicycleVariant::AvcbfR, "sum_coupled"),
                _ => (UnicycleVariant::AvcbfM, "mixed_degree"),
            };
            let preset = config.preset.as_deref().unwrap_or(default_preset);
            let mut params = unicycle_preset(preset, id)?;
            for (key, value) in &config.params {
                apply_unicycle_override(&mut params, key, value, id)?;
            }
            let scenario = UnicycleScenario::new(params, variant).map_err(invalid)?;
            Ok(Box::new(scenario))
        }
        other => Err(ConfigError::UnknownScenario(other.to_string())),
    }
}

/// Errors of a config-driven run: either the configuration or the
/// simulation failed.
#[derive(Debug, Error)]
pub enum RunError {
    /// Configuration problem.
    #[error(transparent)]
    Config(#[from] ConfigError),
    /// Simulation problem.
    #[error(transparent)]
    Sim(#[from] SimError),
}

/// A config-driven run: the recorded run plus the tuning report when
/// tuning ran first.
#[derive(Debug)]
pub struct RunProduct {
    /// The recorded run.
    pub run: EngineRun<f64>,
    /// Tuning results, when the configuration enabled tuning.
    pub tuning: Option<TuningReport>,
}

/// Executes one configuration end to end: builds the scenario, tunes
/// first when enabled, and simulates the full horizon.
pub fn simulate_config(config: &RunConfig) -> Result<RunProduct, RunError> {
    let scenario = build_scenario(config)?;
    let substeps = config.substeps.unwrap_or(DEFAULT_SUBSTEPS);
    if substeps == 0 {
        return Err(ConfigError::Invalid("substeps must be positive".to_string()).into());
    }
    match &config.tuning {
        Some(section) if section.enabled => {
            let tuning_config = section.to_config(substeps)?;
            let outcome = tune_full_horizon(scenario.as_ref(), &tuning_config)?;
            Ok(RunProduct {
                run: outcome.final_run,
                tuning: Some(outcome.report),
            })
        }
        _ => {
            let run = simulate(
                scenario.as_ref(),
                &EngineOptions {
                    substeps,
                    ..EngineOptions::default()
                },
            )?;
            Ok(RunProduct { run, tuning: None })
        }
    }
}

/// Executes the tuning session of one configuration (tuning settings
/// default when the section is absent).
pub fn tune_config(config: &RunConfig) -> Result<crate::autotune::TuningOutcome<f64>, RunError> {
    let scenario = build_scenario(config)?;
    let substeps = config.substeps.unwrap_or(DEFAULT_SUBSTEPS);
    let section = config.tuning.clone().unwrap_or_default();
    let tuning_config = section.to_config(substeps)?;
    Ok(tune_full_horizon(scenario.as_ref(), &tuning_config)?)
}
