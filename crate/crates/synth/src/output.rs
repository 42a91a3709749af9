//! Result files: trajectory CSV, iteration log CSV and a JSON summary.

use std::fs;
use std::path::Path;

use serde::Serialize;
use stlbo::ucb::IterationRecord;
use stlbo::Trace;

use crate::pipeline::RunOutcome;
use crate::{io_err, SynthError};

pub const TRAJECTORY_FILE: &str = "trajectory.csv";
pub const ITERATIONS_FILE: &str = "iterations.csv";
pub const RESULT_FILE: &str = "result.json";

pub const ITERATION_COLUMNS: [&str; 8] = [
    "iter",
    "proposed_u",
    "J",
    "rho",
    "beta",
    "post_mean",
    "post_sigma",
    "elapsed_ms",
];

/// Header `t, <labels...>`, one row per time step.
pub fn write_trajectory(path: &Path, labels: &[String], trace: &Trace) -> Result<(), SynthError> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["t".to_string()];
    header.extend(labels.iter().cloned());
    w.write_record(&header)?;
    for (t, y) in trace.samples().enumerate() {
        let mut row = vec![t.to_string()];
        row.extend(y.iter().map(|v| v.to_string()));
        w.write_record(&row)?;
    }
    w.flush().map_err(io_err(path))?;
    Ok(())
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Missing values (initial guesses have no beta or posterior) are empty.
pub fn write_iterations(path: &Path, log: &[IterationRecord]) -> Result<(), SynthError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(ITERATION_COLUMNS)?;
    for r in log {
        let u: Vec<String> = r.control.iter().map(|v| v.to_string()).collect();
        w.write_record([
            r.iteration.to_string(),
            u.join(";"),
            r.cost.to_string(),
            r.robustness.to_string(),
            opt(r.beta),
            opt(r.posterior_mean),
            opt(r.posterior_std),
            r.elapsed_ms.to_string(),
        ])?;
    }
    w.flush().map_err(io_err(path))?;
    Ok(())
}

#[derive(Debug, Serialize)]
pub struct ResultSummary<'a> {
    pub pipeline: &'a str,
    pub seed: u64,
    pub horizon: usize,
    pub formula: String,
    pub status: &'a str,
    pub robustness: f64,
    pub cost: f64,
    pub evaluations: usize,
    pub bo_iterations: usize,
    pub wall_time_secs: f64,
    pub revalidated: bool,
    /// Control tape, one row per time step.
    pub control: Vec<Vec<f64>>,
}

impl<'a> ResultSummary<'a> {
    pub fn new(run: &'a RunOutcome) -> Self {
        let u = &run.result.best_control;
        Self {
            pipeline: run.pipeline.as_str(),
            seed: run.seed,
            horizon: run.horizon,
            formula: run.formula.to_string(),
            status: run.result.status.as_str(),
            robustness: run.result.best_robustness,
            cost: run.result.best_cost,
            evaluations: run.total_evaluations,
            bo_iterations: run.result.bo_iterations,
            wall_time_secs: run.wall_time_secs,
            revalidated: run.revalidated,
            control: (0..u.steps()).map(|t| u.step(t).to_vec()).collect(),
        }
    }
}

/// Writes all three files for one run into `dir`, creating it if needed.
pub fn write_run(dir: &Path, labels: &[String], run: &RunOutcome) -> Result<(), SynthError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    write_trajectory(&dir.join(TRAJECTORY_FILE), labels, &run.trace)?;
    write_iterations(&dir.join(ITERATIONS_FILE), &run.result.log)?;
    let path = dir.join(RESULT_FILE);
    let json = serde_json::to_string_pretty(&ResultSummary::new(run))?;
    fs::write(&path, json + "\n").map_err(io_err(&path))?;
    Ok(())
}
