//! CSV writers.

use std::path::Path;

use rispriv_core::pdd::OptimizerReport;
use serde::Serialize;

use crate::error::{HarnessError, Result};
use crate::sweep::SweepRow;

fn write_rows<T: Serialize>(rows: &[T], path: &Path) -> Result<()> {
    let wrap = |source: csv::Error| HarnessError::Write {
        path: path.to_path_buf(),
        source,
    };
    let mut w = csv::Writer::from_path(path).map_err(wrap)?;
    for row in rows {
        w.serialize(row).map_err(wrap)?;
    }
    w.flush().map_err(|e| wrap(e.into()))
}

/// Sweep summary with a header row, one line per row in the given order.
pub fn write_csv(rows: &[SweepRow], path: &Path) -> Result<()> {
    write_rows(rows, path)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub iteration: usize,
    pub objective: f64,
    pub augmented_objective: f64,
    pub residual: f64,
}

/// One row per inner cycle, numbered from 1 across outer iterations.
pub fn convergence_rows(report: &OptimizerReport) -> Vec<ConvergenceRow> {
    report
        .trajectory
        .iter()
        .enumerate()
        .map(|(i, r)| ConvergenceRow {
            iteration: i + 1,
            objective: r.objective,
            augmented_objective: r.augmented,
            residual: r.residual,
        })
        .collect()
}

pub fn write_convergence_csv(rows: &[ConvergenceRow], path: &Path) -> Result<()> {
    write_rows(rows, path)
}
