//! Sweeps over time bounds, pipelines and seeds.
//!
//! `sweep.csv` columns, in order:
//! `T, pipeline, seed, status, rho, cost, evaluations, wall_ms, revalidated, error`.
//! A failed cell has `status = error`, empty numeric fields and the message
//! in `error`.
//!
//! `sweep_summary.csv` columns, in order:
//! `T, pipeline, runs, satisfied, errors, median_rho, median_wall_ms`.
//! Medians are over the cells without errors.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::ProblemConfig;
use crate::output::write_run;
use crate::pipeline::{run_case_study, Pipeline};
use crate::{io_err, SynthError};

pub const SWEEP_FILE: &str = "sweep.csv";
pub const SUMMARY_FILE: &str = "sweep_summary.csv";

#[derive(Debug, Clone)]
pub struct SweepSpec {
    pub config: ProblemConfig,
    pub pipelines: Vec<Pipeline>,
    pub seeds: Vec<u64>,
    /// Time bounds; empty means the config's own horizon.
    pub horizons: Vec<usize>,
    pub out: PathBuf,
}

impl SweepSpec {
    pub fn horizons(&self) -> Vec<usize> {
        if self.horizons.is_empty() {
            vec![self.config.horizon]
        } else {
            self.horizons.clone()
        }
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        if self.seeds.is_empty() {
            return Err(SynthError::Config("sweep needs at least one seed".into()));
        }
        if self.pipelines.is_empty() {
            return Err(SynthError::Config("sweep needs at least one pipeline".into()));
        }
        // structural horizon of the spec with every free time bound at zero
        let min = self.config.formula(0)?.horizon();
        if let Some(&t) = self.horizons().iter().find(|&&t| t < min) {
            return Err(SynthError::Config(format!(
                "time bound {t} is below the spec's minimum horizon {min}"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    #[serde(rename = "T")]
    pub horizon: usize,
    pub pipeline: Pipeline,
    pub seed: u64,
    pub status: String,
    pub rho: Option<f64>,
    pub cost: Option<f64>,
    pub evaluations: Option<usize>,
    pub wall_ms: Option<f64>,
    pub revalidated: Option<bool>,
    pub error: String,
}

impl SweepRow {
    pub fn is_error(&self) -> bool {
        !self.error.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    #[serde(rename = "T")]
    pub horizon: usize,
    pub pipeline: Pipeline,
    pub runs: usize,
    pub satisfied: usize,
    pub errors: usize,
    pub median_rho: Option<f64>,
    pub median_wall_ms: Option<f64>,
}

pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    })
}

pub fn summarize(rows: &[SweepRow]) -> Vec<SummaryRow> {
    let mut keys: Vec<(usize, Pipeline)> = Vec::new();
    for r in rows {
        if !keys.contains(&(r.horizon, r.pipeline)) {
            keys.push((r.horizon, r.pipeline));
        }
    }
    keys.into_iter()
        .map(|(t, p)| {
            let cell: Vec<&SweepRow> =
                rows.iter().filter(|r| r.horizon == t && r.pipeline == p).collect();
            let ok: Vec<&&SweepRow> = cell.iter().filter(|r| !r.is_error()).collect();
            let rho: Vec<f64> = ok.iter().filter_map(|r| r.rho).collect();
            let wall: Vec<f64> = ok.iter().filter_map(|r| r.wall_ms).collect();
            SummaryRow {
                horizon: t,
                pipeline: p,
                runs: cell.len(),
                satisfied: ok.iter().filter(|r| r.status == "satisfied").count(),
                errors: cell.len() - ok.len(),
                median_rho: median(&rho),
                median_wall_ms: median(&wall),
            }
        })
        .collect()
}

fn cell_dir(out: &Path, t: usize, p: Pipeline, seed: u64) -> PathBuf {
    out.join(format!("T{t}")).join(p.as_str()).join(format!("seed{seed}"))
}

/// Runs every `(T, pipeline, seed)` cell in order and writes per-cell output
/// plus the two CSV tables into `spec.out`. Cells run one at a time so that
/// wall times are comparable; each cell parallelizes internally.
pub fn run_sweep(spec: &SweepSpec) -> Result<Vec<SweepRow>, SynthError> {
    spec.validate()?;
    fs::create_dir_all(&spec.out).map_err(io_err(&spec.out))?;
    let labels = spec.config.model()?.output_labels().to_vec();
    let mut rows = Vec::new();
    for t in spec.horizons() {
        for &p in &spec.pipelines {
            for &seed in &spec.seeds {
                let row = match run_case_study(&spec.config, t, p, seed).and_then(|run| {
                    write_run(&cell_dir(&spec.out, t, p, seed), &labels, &run)?;
                    Ok(run)
                }) {
                    Ok(run) => SweepRow {
                        horizon: t,
                        pipeline: p,
                        seed,
                        status: run.result.status.as_str().to_string(),
                        rho: Some(run.result.best_robustness),
                        cost: Some(run.result.best_cost),
                        evaluations: Some(run.total_evaluations),
                        wall_ms: Some(run.wall_time_secs * 1e3),
                        revalidated: Some(run.revalidated),
                        error: String::new(),
                    },
                    Err(e) => {
                        log::warn!("T={t} {p} seed {seed}: {e}");
                        SweepRow {
                            horizon: t,
                            pipeline: p,
                            seed,
                            status: "error".into(),
                            rho: None,
                            cost: None,
                            evaluations: None,
                            wall_ms: None,
                            revalidated: None,
                            error: e.to_string(),
                        }
                    }
                };
                log::info!("T={t} {p} seed {seed}: {} rho={:?}", row.status, row.rho);
                rows.push(row);
            }
        }
    }
    write_rows(&spec.out.join(SWEEP_FILE), &rows)?;
    write_rows(&spec.out.join(SUMMARY_FILE), &summarize(&rows))?;
    Ok(rows)
}

fn write_rows<R: Serialize>(path: &Path, rows: &[R]) -> Result<(), SynthError> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(io_err(path))?;
    Ok(())
}

pub fn read_sweep(path: &Path) -> Result<Vec<SweepRow>, SynthError> {
    let mut r = csv::Reader::from_path(path)?;
    Ok(r.deserialize().collect::<Result<_, _>>()?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn medians() {
        assert_eq!(median(&[]), None);
        assert_eq!(median(&[3.0, 1.0, 2.0]), Some(2.0));
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), Some(2.5));
    }
}
