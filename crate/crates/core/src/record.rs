//! Per-iteration convergence logs and their CSV form.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::Result;

/// Column order of every convergence CSV written by this crate.
pub const CSV_HEADER: &str = "outer_iter,cum_cg_iters,wall_time_s,violation_inf,cost_error,plan_error_l1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub outer_iter: usize,
    /// Cumulative cost units: CG iterations for Newton, sweeps for Sinkhorn.
    pub cum_cg_iters: usize,
    pub wall_time_s: f64,
    pub violation_inf: f64,
    /// `|<C, P^k - P*>|`, present when a reference plan was supplied.
    pub cost_error: Option<f64>,
    /// `||P^k - P*||_1` (entrywise), present when a reference plan was supplied.
    pub plan_error_l1: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ConvergenceRecord {
    pub rows: Vec<IterationRecord>,
    pub converged: bool,
    /// Newton steps whose length was capped to avoid overflow.
    pub clipped_steps: usize,
    /// Newton steps whose CG solve stopped at the iteration cap.
    pub capped_cg_solves: usize,
}

impl ConvergenceRecord {
    /// Index of the last outer iteration (0 if only the initial point was logged).
    pub fn iterations(&self) -> usize {
        self.rows.last().map_or(0, |r| r.outer_iter)
    }

    pub fn total_cg_iters(&self) -> usize {
        self.rows.last().map_or(0, |r| r.cum_cg_iters)
    }

    pub fn final_violation(&self) -> Option<f64> {
        self.rows.last().map(|r| r.violation_inf)
    }

    pub fn wall_time_s(&self) -> f64 {
        self.rows.last().map_or(0.0, |r| r.wall_time_s)
    }

    pub fn violations(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.violation_inf).collect()
    }

    /// First logged row whose violation is below `threshold`.
    pub fn first_below(&self, threshold: f64) -> Option<&IterationRecord> {
        self.rows.iter().find(|r| r.violation_inf < threshold)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut csv = csv::Writer::from_writer(writer);
        for row in &self.rows {
            csv.serialize(row)?;
        }
        if self.rows.is_empty() {
            csv.write_record(CSV_HEADER.split(','))?;
        }
        csv.flush().map_err(csv::Error::from)?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        Ok(String::from_utf8(buf).expect("csv output is utf-8"))
    }

    pub fn from_csv<R: std::io::Read>(reader: R) -> Result<Vec<IterationRecord>> {
        let mut csv = csv::Reader::from_reader(reader);
        let rows = csv.deserialize().collect::<std::result::Result<Vec<_>, _>>()?;
        Ok(rows)
    }
}
