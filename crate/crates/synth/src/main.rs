use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use stlbo_synth::check::check_trace;
use stlbo_synth::output::write_run;
use stlbo_synth::sweep::SUMMARY_FILE;
use stlbo_synth::{run_case_study, run_sweep, Pipeline, ProblemConfig, SweepSpec};

/// Temporal-logic control synthesis with DE-seeded Bayesian optimization.
#[derive(Debug, Parser)]
#[command(name = "synth", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one pipeline on one problem and write its result files.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "de_bo")]
        pipeline: Pipeline,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Time bound; defaults to the config's `horizon`.
        #[arg(long)]
        horizon: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run every pipeline over a grid of time bounds and seeds.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated time bounds, e.g. `10,15,20`.
        #[arg(long, value_delimiter = ',')]
        horizons: Vec<usize>,
        /// Inclusive range `a..b` or a comma-separated list.
        #[arg(long, default_value = "0..9", value_parser = parse_seeds)]
        seeds: Seeds,
        /// Comma-separated subset of `de_only,bo_only,de_bo`.
        #[arg(long, value_delimiter = ',', default_values_t = Pipeline::ALL)]
        pipelines: Vec<Pipeline>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate an STL formula on a trace CSV.
    Check {
        #[arg(long)]
        formula: String,
        #[arg(long)]
        trace: PathBuf,
    },
}

#[derive(Debug, Clone)]
struct Seeds(Vec<u64>);

fn parse_seeds(s: &str) -> Result<Seeds, String> {
    let s = s.trim();
    if let Some((a, b)) = s.split_once("..") {
        let b = b.strip_prefix('=').unwrap_or(b);
        let a: u64 = a.trim().parse().map_err(|e| format!("bad range start: {e}"))?;
        let b: u64 = b.trim().parse().map_err(|e| format!("bad range end: {e}"))?;
        if a > b {
            return Err(format!("empty seed range {s}"));
        }
        return Ok(Seeds((a..=b).collect()));
    }
    let seeds = s
        .split(',')
        .map(|v| v.trim().parse::<u64>().map_err(|e| format!("bad seed '{v}': {e}")))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Seeds(seeds))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Run {
            config,
            pipeline,
            seed,
            horizon,
            out,
        } => {
            let cfg = ProblemConfig::load(&config)?;
            let t = horizon.unwrap_or(cfg.horizon);
            let run = run_case_study(&cfg, t, pipeline, seed)?;
            let labels = cfg.model()?.output_labels().to_vec();
            write_run(&out, &labels, &run)?;
            println!(
                "{} rho={:.6} evaluations={} wall={:.3}s revalidated={}",
                run.result.status.as_str(),
                run.result.best_robustness,
                run.total_evaluations,
                run.wall_time_secs,
                run.revalidated
            );
            if run.soundness_violation() {
                bail!("satisfied result failed re-validation");
            }
            Ok(if run.result.is_satisfied() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            })
        }
        Command::Sweep {
            config,
            horizons,
            seeds,
            pipelines,
            out,
        } => {
            let cfg = ProblemConfig::load(&config)?;
            let spec = SweepSpec {
                config: cfg,
                pipelines,
                seeds: seeds.0,
                horizons,
                out: out.clone(),
            };
            let rows = run_sweep(&spec)?;
            let summary = std::fs::read_to_string(out.join(SUMMARY_FILE))
                .with_context(|| format!("reading {}", out.join(SUMMARY_FILE).display()))?;
            print!("{summary}");
            if rows.iter().any(|r| r.status == "satisfied" && r.revalidated == Some(false)) {
                bail!("a satisfied row failed re-validation");
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Check { formula, trace } => {
            let report = check_trace(&formula, &trace)?;
            println!("satisfied={} robustness={}", report.satisfied, report.robustness);
            Ok(if report.satisfied {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seed_ranges_are_inclusive() {
        assert_eq!(parse_seeds("0..9").unwrap().0, (0..10).collect::<Vec<_>>());
        assert_eq!(parse_seeds("3..=4").unwrap().0, vec![3, 4]);
        assert_eq!(parse_seeds("1,5, 7").unwrap().0, vec![1, 5, 7]);
        assert!(parse_seeds("5..2").is_err());
        assert!(parse_seeds("x").is_err());
    }
}
