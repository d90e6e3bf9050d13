//! Recorded closed-loop runs.
//!
//! A [`Trajectory`] stores one row per control-interval boundary:
//! the augmented state, the safety function value, the decision vector
//! applied over the following interval (absent on terminal rows), the
//! barrier levels, and the per-step QP diagnostics. Everything needed
//! to reproduce the exported CSV lives here; the run summary is always
//! recomputed from the rows so file and summary cannot disagree.

use crate::scalar::Scalar;

/// Outcome token of one recorded step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepStatus {
    /// The step QP solved; the row's decisions were applied.
    Optimal,
    /// The step QP was infeasible; the run stopped here.
    Infeasible,
    /// Final row at the end of the horizon (no QP solved).
    Terminal,
    /// Final row where the goal region test passed.
    Target,
    /// Final row where a monitored criterion threshold stopped the run
    /// (used by the hyperparameter tuner, never by plain simulation).
    Halted,
}

impl StepStatus {
    /// Stable CSV token.
    pub fn token(&self) -> &'static str {
        match self {
            StepStatus::Optimal => "optimal",
            StepStatus::Infeasible => "infeasible",
            StepStatus::Terminal => "terminal",
            StepStatus::Target => "target",
            StepStatus::Halted => "halted",
        }
    }

    /// Parses a CSV token.
    pub fn from_token(token: &str) -> Option<Self> {
        match token {
            "optimal" => Some(StepStatus::Optimal),
            "infeasible" => Some(StepStatus::Infeasible),
            "terminal" => Some(StepStatus::Terminal),
            "target" => Some(StepStatus::Target),
            "halted" => Some(StepStatus::Halted),
            _ => None,
        }
    }
}

impl std::fmt::Display for StepStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.token())
    }
}

/// One control-interval boundary of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord<S> {
    /// Time of this boundary.
    pub t: S,
    /// Plant state at `t`.
    pub x: Vec<S>,
    /// Auxiliary chain states at `t`, flattened in chain order.
    pub chains: Vec<S>,
    /// Safety function value `b(x(t))`.
    pub b: S,
    /// Decision vector applied over `[t, t+dt)`; `None` on rows where
    /// no QP solution was applied (terminal, target, infeasible).
    pub decisions: Option<Vec<S>>,
    /// Barrier levels `ψ₀ .. ψ_{mₐ−1}` at `t`.
    pub psi: Vec<S>,
    /// Safety-feasibility criterion value (the last barrier level).
    pub criterion: S,
    /// What happened at this step.
    pub status: StepStatus,
    /// QP objective at the applied decisions, when one was applied.
    pub objective: Option<S>,
}

/// Derived per-run summary; always computed from the rows.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary<S> {
    /// Column-wise minimum of the `b` column.
    pub min_b: S,
    /// Time of the infeasible row, when the run stopped infeasible.
    pub first_infeasible: Option<S>,
    /// Time of the target row, when the goal region was reached.
    pub target_time: Option<S>,
    /// Time of the last row.
    pub terminal_t: S,
    /// Plant state of the last row.
    pub terminal_x: Vec<S>,
}

/// A recorded closed-loop run plus the naming needed to export it.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<S> {
    /// Scenario identifier the run came from.
    pub name: String,
    /// Plant state column names.
    pub state_names: Vec<String>,
    /// Auxiliary chain state column names.
    pub chain_names: Vec<String>,
    /// Decision vector column names.
    pub decision_names: Vec<String>,
    /// Number of barrier levels recorded per row.
    pub level_count: usize,
    /// Rows at strictly increasing, uniformly spaced times.
    pub rows: Vec<StepRecord<S>>,
}

impl<S: Scalar> Trajectory<S> {
    /// CSV column names, in export order.
    pub fn columns(&self) -> Vec<String> {
        let mut cols = vec!["t".to_string()];
        cols.extend(self.state_names.iter().cloned());
        cols.extend(self.chain_names.iter().cloned());
        cols.push("b".to_string());
        cols.extend(self.decision_names.iter().cloned());
        for i in 0..self.level_count {
            cols.push(format!("psi{i}"));
        }
        cols.push("criterion".to_string());
        cols.push("qp_status".to_string());
        cols.push("objective".to_string());
        cols
    }

    /// Recomputes the run summary from the rows.
    ///
    /// Panics on an empty trajectory; every recorded run has at least
    /// its initial row.
    pub fn summary(&self) -> RunSummary<S> {
        let last = self.rows.last().expect("trajectory has at least one row");
        let mut min_b = self.rows[0].b;
        for row in &self.rows {
            if row.b < min_b {
                min_b = row.b;
            }
        }
        let first_infeasible = self
            .rows
            .iter()
            .find(|r| r.status == StepStatus::Infeasible)
            .map(|r| r.t);
        let target_time = self
            .rows
            .iter()
            .find(|r| r.status == StepStatus::Target)
            .map(|r| r.t);
        RunSummary {
            min_b,
            first_infeasible,
            target_time,
            terminal_t: last.t,
            terminal_x: last.x.clone(),
        }
    }

    /// Flattens the run into a plain table mirroring the CSV layout.
    pub fn to_table(&self) -> DataTable {
        let columns = self.columns();
        let rows = self
            .rows
            .iter()
            .map(|row| {
                let mut cells = Vec::with_capacity(columns.len());
                cells.push(Cell::Num(row.t.to_real()));
                cells.extend(row.x.iter().map(|v| Cell::Num(v.to_real())));
                cells.extend(row.chains.iter().map(|v| Cell::Num(v.to_real())));
                cells.push(Cell::Num(row.b.to_real()));
                match &row.decisions {
                    Some(w) => cells.extend(w.iter().map(|v| Cell::Num(v.to_real()))),
                    None => cells.extend(
                        std::iter::repeat(Cell::Empty).take(self.decision_names.len()),
                    ),
                }
                cells.extend(row.psi.iter().map(|v| Cell::Num(v.to_real())));
                cells.push(Cell::Num(row.criterion.to_real()));
                cells.push(Cell::Text(row.status.token().to_string()));
                match row.objective {
                    Some(v) => cells.push(Cell::Num(v.to_real())),
                    None => cells.push(Cell::Empty),
                }
                cells
            })
            .collect();
        DataTable { columns, rows }
    }
}

/// One cell of a [`DataTable`].
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    /// A numeric value.
    Num(f64),
    /// A non-numeric token (e.g. a status column).
    Text(String),
    /// An absent value (empty CSV field).
    Empty,
}

/// A plain named-column table — the in-memory form of an exported CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct DataTable {
    /// Column names.
    pub columns: Vec<String>,
    /// Row-major cells; every row has `columns.len()` entries.
    pub rows: Vec<Vec<Cell>>,
}

impl DataTable {
    /// Index of a named column.
    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    /// All numeric values of a named column, skipping non-numeric cells.
    pub fn numeric_column(&self, name: &str) -> Vec<f64> {
        match self.column_index(name) {
            Some(i) => self
                .rows
                .iter()
                .filter_map(|r| match &r[i] {
                    Cell::Num(v) => Some(*v),
                    _ => None,
                })
                .collect(),
            None => Vec::new(),
        }
    }
}

/// Compares two tables cell by cell.
///
/// Numeric cells must agree within `tol · max(1, |a|)`; text and empty
/// cells must match exactly. Returns a located description of the first
/// mismatch.
pub fn tables_match(a: &DataTable, b: &DataTable, tol: f64) -> Result<(), String> {
    if a.columns != b.columns {
        return Err(format!(
            "column headers differ: {:?} vs {:?}",
            a.columns, b.columns
        ));
    }
    if a.rows.len() != b.rows.len() {
        return Err(format!(
            "row counts differ: {} vs {}",
            a.rows.len(),
            b.rows.len()
        ));
    }
    for (i, (ra, rb)) in a.rows.iter().zip(&b.rows).enumerate() {
        for (j, (ca, cb)) in ra.iter().zip(rb).enumerate() {
            let col = &a.columns[j];
            match (ca, cb) {
                (Cell::Num(x), Cell::Num(y)) => {
                    let gate = tol * x.abs().max(1.0);
                    if !((x - y).abs() <= gate) {
                        return Err(format!(
                            "row {i} column {col}: {x} vs {y} exceeds tolerance {gate}"
                        ));
                    }
                }
                (Cell::Text(x), Cell::Text(y)) if x == y => {}
                (Cell::Empty, Cell::Empty) => {}
                _ => {
                    return Err(format!("row {i} column {col}: {ca:?} vs {cb:?}"));
                }
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_trajectory() -> Trajectory<f64> {
        Trajectory {
            name: "probe".into(),
            state_names: vec!["v".into()],
            chain_names: vec!["a1".into()],
            decision_names: vec!["u".into(), "delta".into()],
            level_count: 2,
            rows: vec![
                StepRecord {
                    t: 0.0,
                    x: vec![6.0],
                    chains: vec![1.0],
                    b: 90.0,
                    decisions: Some(vec![39.1, 0.0]),
                    psi: vec![90.0, 106.89],
                    criterion: 106.89,
                    status: StepStatus::Optimal,
                    objective: Some(0.5),
                },
                StepRecord {
                    t: 0.1,
                    x: vec![6.1],
                    chains: vec![1.01],
                    b: 89.0,
                    decisions: None,
                    psi: vec![89.0, 105.0],
                    criterion: 105.0,
                    status: StepStatus::Terminal,
                    objective: None,
                },
            ],
        }
    }

    #[test]
    fn columns_follow_the_export_layout() {
        let traj = tiny_trajectory();
        assert_eq!(
            traj.columns(),
            vec!["t", "v", "a1", "b", "u", "delta", "psi0", "psi1", "criterion", "qp_status", "objective"]
        );
    }

    #[test]
    fn summary_takes_column_minimum_and_terminal_row() {
        let traj = tiny_trajectory();
        let s = traj.summary();
        assert_eq!(s.min_b, 89.0);
        assert_eq!(s.first_infeasible, None);
        assert_eq!(s.target_time, None);
        assert_eq!(s.terminal_t, 0.1);
        assert_eq!(s.terminal_x, vec![6.1]);
    }

    #[test]
    fn summary_reports_infeasible_time() {
        let mut traj = tiny_trajectory();
        traj.rows[1].status = StepStatus::Infeasible;
        assert_eq!(traj.summary().first_infeasible, Some(0.1));
    }

    #[test]
    fn table_round_trips_through_cells() {
        let traj = tiny_trajectory();
        let table = traj.to_table();
        assert_eq!(table.rows.len(), 2);
        assert_eq!(table.rows[0][0], Cell::Num(0.0));
        assert_eq!(table.rows[1][4], Cell::Empty);
        assert_eq!(table.rows[1][9], Cell::Text("terminal".into()));
        assert!(tables_match(&table, &table, 0.0).is_ok());
    }

    #[test]
    fn table_mismatches_are_located() {
        let traj = tiny_trajectory();
        let a = traj.to_table();
        let mut b = traj.to_table();
        b.rows[0][3] = Cell::Num(90.1);
        let err = tables_match(&a, &b, 1e-12).unwrap_err();
        assert!(err.contains("row 0"), "{err}");
        assert!(err.contains("column b"), "{err}");
        // The relative gate scales with magnitude: 90.0 vs 90.1 passes a
        // 0.01 relative tolerance but not 1e-12.
        assert!(tables_match(&a, &b, 2e-3).is_ok());
    }

    #[test]
    fn status_tokens_round_trip() {
        for s in [
            StepStatus::Optimal,
            StepStatus::Infeasible,
            StepStatus::Terminal,
            StepStatus::Target,
            StepStatus::Halted,
        ] {
            assert_eq!(StepStatus::from_token(s.token()), Some(s));
        }
        assert_eq!(StepStatus::from_token("bogus"), None);
    }
}
