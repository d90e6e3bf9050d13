//! Closed-loop simulation: the step engine, recorded trajectories,
//! CSV export, run comparison, and JSON run configurations.

pub mod compare;
pub mod config;
pub mod csv;
pub mod engine;
pub mod trajectory;

pub use compare::{aligned_table, compare_runs, CompareReport, RunDelta, RunDigest};
pub use config::{
    build_scenario, load_config, parse_config, scenario_ids, simulate_config, tune_config,
    ConfigError, RunConfig, RunError, RunProduct, TuningSection,
};
pub use csv::{export_csv, parse_csv, parse_csv_text, table_to_csv};
pub use engine::{
    horizon_steps, run_engine, simulate, AuxSchedule, EngineOptions, EngineRun, SimError,
    StopReason,
};
pub use trajectory::{
    tables_match, Cell, DataTable, RunSummary, StepRecord, StepStatus, Trajectory,
};
