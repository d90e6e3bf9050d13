//! Command-line front end for the simulation toolkit: run one
//! configuration, compare several on a shared time grid, tune
//! auxiliary-input references, or list the scenario registry.
//!
//! Exit codes: 0 on success, 2 on configuration errors, 3 when a run
//! terminates at an infeasible step (the partial trajectory is still
//! written), 4 on numeric aborts, and 1 on I/O failures.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use avcbf::sim::{
    aligned_table, build_scenario, compare_runs, export_csv, load_config, scenario_ids,
    simulate_config, table_to_csv, tune_config, ConfigError, RunConfig, RunError, RunProduct,
    SimError, StopReason, Trajectory,
};

/// Simulation toolkit for adaptive control barrier function
/// controllers.
#[derive(Parser)]
#[command(name = "simkit", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one configuration and write the trajectory CSV.
    Run {
        /// JSON run configuration.
        #[arg(long)]
        config: PathBuf,
        /// Output CSV path (falls back to the config's `out` field).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Simulate several configurations sharing one time grid; write
    /// per-run CSVs, an aligned table, and a summary report.
    Compare {
        /// JSON run configurations (at least two).
        #[arg(long, num_args = 2.., required = true)]
        configs: Vec<PathBuf>,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Tune auxiliary-input references and write the tuning report.
    Tune {
        /// JSON run configuration.
        #[arg(long)]
        config: PathBuf,
        /// Output JSON path (falls back to the config's `out` field).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// List the scenario registry.
    ListScenarios,
}

/// A failure with its process exit code.
enum Failure {
    /// Bad configuration (exit 2).
    Config(String),
    /// Numeric abort inside a run (exit 4).
    Numeric(String),
    /// I/O or serialization problem (exit 1).
    Io(String),
}

impl Failure {
    fn exit_code(&self) -> ExitCode {
        match self {
            Failure::Config(_) => ExitCode::from(2),
            Failure::Numeric(_) => ExitCode::from(4),
            Failure::Io(_) => ExitCode::from(1),
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Config(m) | Failure::Numeric(m) | Failure::Io(m) => m,
        }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e.to_string())
    }
}

impl From<SimError> for Failure {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Setup(_) | SimError::Misaligned(_) => Failure::Config(e.to_string()),
            SimError::NumericAbort { .. } => Failure::Numeric(e.to_string()),
            SimError::Io { .. } | SimError::Parse { .. } => Failure::Io(e.to_string()),
        }
    }
}

impl From<RunError> for Failure {
    fn from(e: RunError) -> Self {
        match e {
            RunError::Config(c) => c.into(),
            RunError::Sim(s) => s.into(),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { config, out } => cmd_run(&config, out.as_deref()),
        Command::Compare { configs, out } => cmd_compare(&configs, &out),
        Command::Tune { config, out } => cmd_tune(&config, out.as_deref()),
        Command::ListScenarios => cmd_list(),
    };
    match result {
        Ok(code) => code,
        Err(failure) => {
            eprintln!("error: {}", failure.message());
            failure.exit_code()
        }
    }
}

/// Picks the output path: command line first, then the config's `out`.
fn resolve_out(cli_out: Option<&Path>, config: &RunConfig) -> Result<PathBuf, Failure> {
    cli_out
        .map(Path::to_path_buf)
        .or_else(|| config.out.as_deref().map(PathBuf::from))
        .ok_or_else(|| {
            Failure::Config(
                "no output path: pass --out or set \"out\" in the configuration".to_string(),
            )
        })
}

fn cmd_run(config_path: &Path, out: Option<&Path>) -> Result<ExitCode, Failure> {
    let config = load_config(config_path)?;
    let out = resolve_out(out, &config)?;
    let product = simulate_config(&config)?;
    export_csv(&product.run.trajectory, &out)?;
    let rows = product.run.trajectory.rows.len();
    let last_t = product
        .run
        .trajectory
        .rows
        .last()
        .map(|r| r.t)
        .unwrap_or(0.0);
    match product.run.stop {
        StopReason::Infeasible { step, .. } => {
            println!(
                "{}: {rows} rows, infeasible at step {step} (t = {last_t}); partial trajectory written",
                out.display()
            );
            Ok(ExitCode::from(3))
        }
        StopReason::Target { step } => {
            println!(
                "{}: {rows} rows, target reached at step {step} (t = {last_t})",
                out.display()
            );
            Ok(ExitCode::SUCCESS)
        }
        StopReason::Horizon | StopReason::CriterionHalt { .. } => {
            println!("{}: {rows} rows, horizon covered", out.display());
            Ok(ExitCode::SUCCESS)
        }
    }
}

/// File stem of a config path, made unique within the batch.
fn run_label(path: &Path, used: &[String]) -> String {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "run".to_string());
    if !used.contains(&stem) {
        return stem;
    }
    let mut n = 2;
    loop {
        let candidate = format!("{stem}_{n}");
        if !used.contains(&candidate) {
            return candidate;
        }
        n += 1;
    }
}

fn cmd_compare(config_paths: &[PathBuf], out_dir: &Path) -> Result<ExitCode, Failure> {
    if config_paths.len() < 2 {
        return Err(Failure::Config(
            "comparison needs at least two configurations".to_string(),
        ));
    }
    let mut grid: Option<(f64, f64)> = None;
    let mut products: Vec<RunProduct> = Vec::new();
    let mut labels: Vec<String> = Vec::new();
    for path in config_paths {
        let config = load_config(path)?;
        let scenario = build_scenario(&config)?;
        let this_grid = (scenario.dt(), scenario.horizon());
        match grid {
            None => grid = Some(this_grid),
            Some((dt, horizon)) => {
                if (dt - this_grid.0).abs() > 1e-9 || (horizon - this_grid.1).abs() > 1e-9 {
                    return Err(Failure::Config(format!(
                        "{}: grid (dt = {}, horizon = {}) does not match the first run's (dt = {dt}, horizon = {horizon})",
                        path.display(),
                        this_grid.0,
                        this_grid.1
                    )));
                }
            }
        }
        let mut product = simulate_config(&config)?;
        let label = run_label(path, &labels);
        product.run.trajectory.name = label.clone();
        labels.push(label);
        products.push(product);
    }

    std::fs::create_dir_all(out_dir)
        .map_err(|e| Failure::Io(format!("{}: {e}", out_dir.display())))?;
    for product in &products {
        let path = out_dir.join(format!("{}.csv", product.run.trajectory.name));
        export_csv(&product.run.trajectory, &path)?;
    }
    let trajectories: Vec<&Trajectory<f64>> =
        products.iter().map(|p| &p.run.trajectory).collect();
    let report = compare_runs(&trajectories)?;
    let aligned = aligned_table(&trajectories)?;
    let aligned_path = out_dir.join("aligned.csv");
    std::fs::write(&aligned_path, table_to_csv(&aligned))
        .map_err(|e| Failure::Io(format!("{}: {e}", aligned_path.display())))?;
    let summary_path = out_dir.join("summary.json");
    let json = serde_json::to_string_pretty(&report)
        .map_err(|e| Failure::Io(format!("{}: {e}", summary_path.display())))?;
    std::fs::write(&summary_path, json + "\n")
        .map_err(|e| Failure::Io(format!("{}: {e}", summary_path.display())))?;
    println!(
        "{}: {} runs compared; wrote aligned.csv and summary.json",
        out_dir.display(),
        products.len()
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_tune(config_path: &Path, out: Option<&Path>) -> Result<ExitCode, Failure> {
    let config = load_config(config_path)?;
    let out = resolve_out(out, &config)?;
    let outcome = tune_config(&config)?;
    let json = serde_json::to_string_pretty(&outcome.report)
        .map_err(|e| Failure::Io(format!("{}: {e}", out.display())))?;
    std::fs::write(&out, json + "\n")
        .map_err(|e| Failure::Io(format!("{}: {e}", out.display())))?;
    println!(
        "{}: {} windows tuned, converged = {}",
        out.display(),
        outcome.report.windows.len(),
        outcome.report.converged
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_list() -> Result<ExitCode, Failure> {
    let blurbs = [
        ("acc_avcbf", "cruise control, adaptive barrier with a two-integrator auxiliary chain"),
        ("acc_hocbf", "cruise control, fixed-gain high-order barrier baseline"),
        ("acc_pacbf", "cruise control, penalty-adaptation baseline with boxed penalties"),
        ("acc_reduced", "cruise control, degree-reducing auxiliary chain (one integrator)"),
        ("uni_hocbf", "unicycle obstacle avoidance, fixed-gain high-order barrier baseline"),
        ("uni_avcbf1", "unicycle obstacle avoidance, one auxiliary variable"),
        ("uni_avcbf2", "unicycle obstacle avoidance, two auxiliary variables"),
        ("uni_avcbf_r", "unicycle obstacle avoidance, state-coupled auxiliary function"),
        ("uni_avcbf_m", "unicycle with steering state, mixed-relative-degree barrier row"),
    ];
    debug_assert_eq!(
        blurbs.iter().map(|(id, _)| *id).collect::<Vec<_>>(),
        scenario_ids()
    );
    for (id, blurb) in blurbs {
        println!("{id:<12} {blurb}");
    }
    Ok(ExitCode::SUCCESS)
}
