//! Side-by-side run comparison.
//!
//! Takes two or more recorded runs on the same time grid and produces
//! a summary digest per run, deltas of each run against the first, and
//! an aligned per-step table (shared `t` column plus each run's safety
//! and criterion columns; runs that stopped early leave empty cells).

use serde::Serialize;

use crate::scalar::Scalar;
use crate::sim::engine::SimError;
use crate::sim::trajectory::{Cell, DataTable, Trajectory};

/// Per-run summary facts, in `f64` for reporting.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunDigest {
    /// Scenario identifier.
    pub name: String,
    /// Number of recorded rows.
    pub rows: usize,
    /// Minimum of the `b` column.
    pub min_b: f64,
    /// Time of the infeasible stop, if any.
    pub first_infeasible: Option<f64>,
    /// Time the goal region was reached, if any.
    pub target_time: Option<f64>,
    /// Time of the last row.
    pub terminal_t: f64,
    /// Plant state at the last row.
    pub terminal_x: Vec<f64>,
}

/// Differences of one run against the baseline (the first run).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunDelta {
    /// Name of the compared run.
    pub name: String,
    /// `min_b − baseline.min_b`.
    pub d_min_b: f64,
    /// Difference of first-infeasible times when both runs have one.
    pub d_first_infeasible: Option<f64>,
    /// Difference of terminal times.
    pub d_terminal_t: f64,
    /// Component-wise terminal state difference when the state
    /// dimensions agree.
    pub d_terminal_x: Option<Vec<f64>>,
}

/// The comparison product.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompareReport {
    /// One digest per run, input order preserved.
    pub runs: Vec<RunDigest>,
    /// One delta per non-baseline run, against the first run.
    pub deltas: Vec<RunDelta>,
}

fn digest<S: Scalar>(traj: &Trajectory<S>) -> RunDigest {
    let s = traj.summary();
    RunDigest {
        name: traj.name.clone(),
        rows: traj.rows.len(),
        min_b: s.min_b.to_real(),
        first_infeasible: s.first_infeasible.map(|t| t.to_real()),
        target_time: s.target_time.map(|t| t.to_real()),
        terminal_t: s.terminal_t.to_real(),
        terminal_x: s.terminal_x.iter().map(|v| v.to_real()).collect(),
    }
}

/// Checks that all runs start at the same time and share the same row
/// spacing (runs with fewer than two rows impose no spacing).
fn check_alignment<S: Scalar>(runs: &[&Trajectory<S>]) -> Result<(), SimError> {
    let mut grid: Option<(f64, f64, String)> = None;
    for traj in runs {
        if traj.rows.is_empty() {
            return Err(SimError::Misaligned(format!("run {} has no rows", traj.name)));
        }
        let t0 = traj.rows[0].t.to_real();
        if traj.rows.len() < 2 {
            continue;
        }
        let dt = traj.rows[1].t.to_real() - t0;
        match &grid {
            None => grid = Some((t0, dt, traj.name.clone())),
            Some((g0, gdt, gname)) => {
                if (t0 - g0).abs() > 1e-9 || (dt - gdt).abs() > 1e-9 {
                    return Err(SimError::Misaligned(format!(
                        "run {} uses grid (t0={t0}, dt={dt}) but {gname} uses (t0={g0}, dt={gdt})",
                        traj.name
                    )));
                }
            }
        }
    }
    Ok(())
}

/// Builds the comparison report for two or more aligned runs.
pub fn compare_runs<S: Scalar>(runs: &[&Trajectory<S>]) -> Result<CompareReport, SimError> {
    if runs.len() < 2 {
        return Err(SimError::Misaligned(
            "comparison needs at least two runs".to_string(),
        ));
    }
    check_alignment(runs)?;
    let digests: Vec<RunDigest> = runs.iter().map(|t| digest(*t)).collect();
    let base = &digests[0];
    let deltas = digests[1..]
        .iter()
        .map(|d| RunDelta {
            name: d.name.clone(),
            d_min_b: d.min_b - base.min_b,
            d_first_infeasible: match (d.first_infeasible, base.first_infeasible) {
                (Some(a), Some(b)) => Some(a - b),
                _ => None,
            },
            d_terminal_t: d.terminal_t - base.terminal_t,
            d_terminal_x: if d.terminal_x.len() == base.terminal_x.len() {
                Some(
                    d.terminal_x
                        .iter()
                        .zip(&base.terminal_x)
                        .map(|(a, b)| a - b)
                        .collect(),
                )
            } else {
                None
            },
        })
        .collect();
    Ok(CompareReport {
        runs: digests,
        deltas,
    })
}

/// Joins runs on the shared time grid: a `t` column from the longest
/// run, then `<name>.b`, `<name>.criterion`, `<name>.qp_status` per
/// run. Rows past a run's end are empty in its columns.
pub fn aligned_table<S: Scalar>(runs: &[&Trajectory<S>]) -> Result<DataTable, SimError> {
    if runs.is_empty() {
        return Err(SimError::Misaligned("no runs to align".to_string()));
    }
    check_alignment(runs)?;
    let longest = runs
        .iter()
        .max_by_key(|t| t.rows.len())
        .expect("nonempty run list");
    let mut columns = vec!["t".to_string()];
    for traj in runs {
        columns.push(format!("{}.b", traj.name));
        columns.push(format!("{}.criterion", traj.name));
        columns.push(format!("{}.qp_status", traj.name));
    }
    let mut rows = Vec::with_capacity(longest.rows.len());
    for k in 0..longest.rows.len() {
        let mut cells = vec![Cell::Num(longest.rows[k].t.to_real())];
        for traj in runs {
            match traj.rows.get(k) {
                Some(row) => {
                    cells.push(Cell::Num(row.b.to_real()));
                    cells.push(Cell::Num(row.criterion.to_real()));
                    cells.push(Cell::Text(row.status.token().to_string()));
                }
                None => {
                    cells.push(Cell::Empty);
                    cells.push(Cell::Empty);
                    cells.push(Cell::Empty);
                }
            }
        }
        rows.push(cells);
    }
    Ok(DataTable { columns, rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::trajectory::{StepRecord, StepStatus};

    fn run(name: &str, n: usize, stop: StepStatus) -> Trajectory<f64> {
        let rows = (0..n)
            .map(|k| {
                let last = k + 1 == n;
                StepRecord {
                    t: 0.1 * k as f64,
                    x: vec![k as f64],
                    chains: vec![],
                    b: 10.0 - k as f64,
                    decisions: if last { None } else { Some(vec![0.0]) },
                    psi: vec![10.0 - k as f64],
                    criterion: 10.0 - k as f64,
                    status: if last { stop } else { StepStatus::Optimal },
                    objective: if last { None } else { Some(0.0) },
                }
            })
            .collect();
        Trajectory {
            name: name.into(),
            state_names: vec!["v".into()],
            chain_names: vec![],
            decision_names: vec!["u".into()],
            level_count: 1,
            rows,
        }
    }

    #[test]
    fn identical_runs_have_zero_deltas() {
        let a = run("left", 5, StepStatus::Terminal);
        let b = run("right", 5, StepStatus::Terminal);
        let report = compare_runs(&[&a, &b]).unwrap();
        assert_eq!(report.deltas.len(), 1);
        assert_eq!(report.deltas[0].d_min_b, 0.0);
        assert_eq!(report.deltas[0].d_terminal_t, 0.0);
        assert_eq!(report.deltas[0].d_terminal_x, Some(vec![0.0]));
    }

    #[test]
    fn early_infeasible_stop_shows_in_digest_and_table() {
        let full = run("full", 6, StepStatus::Terminal);
        let cut = run("cut", 3, StepStatus::Infeasible);
        let report = compare_runs(&[&full, &cut]).unwrap();
        assert_eq!(report.runs[1].first_infeasible, Some(0.2));
        assert_eq!(report.runs[0].first_infeasible, None);

        let table = aligned_table(&[&full, &cut]).unwrap();
        assert_eq!(table.rows.len(), 6);
        // The shorter run's cells end after its infeasible row.
        let cut_b = table.column_index("cut.b").unwrap();
        assert!(matches!(table.rows[2][cut_b], Cell::Num(_)));
        assert!(matches!(table.rows[3][cut_b], Cell::Empty));
        let cut_status = table.column_index("cut.qp_status").unwrap();
        assert_eq!(table.rows[2][cut_status], Cell::Text("infeasible".into()));
    }

    #[test]
    fn mismatched_grids_are_rejected() {
        let a = run("a", 4, StepStatus::Terminal);
        let mut b = run("b", 4, StepStatus::Terminal);
        for (k, row) in b.rows.iter_mut().enumerate() {
            row.t = 0.2 * k as f64;
        }
        assert!(matches!(
            compare_runs(&[&a, &b]),
            Err(SimError::Misaligned(_))
        ));
    }

    #[test]
    fn single_run_is_rejected() {
        let a = run("a", 4, StepStatus::Terminal);
        assert!(compare_runs(&[&a]).is_err());
    }
}
