//! Experiment runner: tuning grids over length-based subsets, cutoff sweeps,
//! and the CSV/SVG reports built from them.

pub mod grid;
pub mod plan;
pub mod report;

pub use grid::{
    run_cutoff_sweep, run_grid, with_threads, CellResult, CellRuns, CutoffResult, CutoffRow, GridResult,
    LoadedTask, MeanSd, ReportRow, SubsetProfile, TestBench, TEST_CONDITIONS,
};
pub use plan::{ExperimentPlan, TaskSource, TuneCondition, SEED_ENV, THREADS_ENV};
pub use report::{emit_reports, fmt_num, Figure, Point, Series};

use std::path::Path;

use crate::error::Result;

/// Loads the task, runs the grid (and the cutoff sweep if enabled) and writes all reports to `out`.
pub fn run_experiment(plan: &ExperimentPlan, out: &Path) -> Result<(GridResult, Option<CutoffResult>)> {
    with_threads(plan, || -> Result<_> {
        let task = LoadedTask::load(plan)?;
        let grid = run_grid(plan, &task)?;
        let sweep = if plan.cutoff {
            Some(run_cutoff_sweep(plan, &task)?)
        } else {
            None
        };
        emit_reports(out, Some(&grid), sweep.as_ref())?;
        Ok((grid, sweep))
    })?
}
