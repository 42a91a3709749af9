//! The three synthesis pipelines compared by the harness.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use stlbo::ucb::IterationRecord;
use stlbo::{
    de_search, synthesize, ControlSequence, Formula, SynthesisProblem, SynthesisResult,
    SynthesisStatus, Trace,
};

use crate::config::ProblemConfig;
use crate::SynthError;

/// Offset mixed into the run seed for the BO stage, so that DE and BO draw
/// from unrelated streams.
const BO_SEED_SALT: u64 = 0x5eed_b0b0_0000_0001;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pipeline {
    DeOnly,
    BoOnly,
    DeBo,
}

impl Pipeline {
    pub const ALL: [Pipeline; 3] = [Pipeline::DeOnly, Pipeline::BoOnly, Pipeline::DeBo];

    pub fn as_str(&self) -> &'static str {
        match self {
            Pipeline::DeOnly => "de_only",
            Pipeline::BoOnly => "bo_only",
            Pipeline::DeBo => "de_bo",
        }
    }
}

impl fmt::Display for Pipeline {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Pipeline {
    type Err = SynthError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Pipeline::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| SynthError::Config(format!("unknown pipeline '{s}'")))
    }
}

/// One finished synthesis run.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub pipeline: Pipeline,
    pub seed: u64,
    pub horizon: usize,
    pub formula: Formula,
    pub result: SynthesisResult,
    pub trace: Trace,
    /// Objective evaluations across all stages.
    pub total_evaluations: usize,
    pub wall_time_secs: f64,
    /// Boolean satisfaction of the spec by `trace`, checked independently of
    /// the optimizer's bookkeeping.
    pub revalidated: bool,
}

impl RunOutcome {
    /// A satisfied status whose trace fails the Boolean check.
    pub fn soundness_violation(&self) -> bool {
        self.result.is_satisfied() && !self.revalidated
    }
}

/// Runs `pipeline` on the configured problem at time bound `horizon`.
pub fn run_case_study(
    cfg: &ProblemConfig,
    horizon: usize,
    pipeline: Pipeline,
    seed: u64,
) -> Result<RunOutcome, SynthError> {
    let formula = cfg.formula(horizon)?;
    let problem = SynthesisProblem::new(cfg.model()?, formula.clone())?;
    let ucb = cfg.ucb_config(seed ^ BO_SEED_SALT, problem.dim())?;
    let de = cfg.de_config(seed);

    let clock = Instant::now();
    let (result, total_evaluations) = match pipeline {
        Pipeline::DeOnly => {
            let out = de_search(&problem, &de)?;
            let log: Vec<IterationRecord> = out
                .members
                .iter()
                .map(|(x, cost)| IterationRecord {
                    iteration: 0,
                    control: x.clone(),
                    cost: *cost,
                    robustness: -cost,
                    beta: None,
                    posterior_mean: None,
                    posterior_std: None,
                    elapsed_ms: clock.elapsed().as_secs_f64() * 1e3,
                    gp_size: 0,
                    gp_update_secs: None,
                })
                .collect();
            let (best, cost) = out.best();
            let status = if cost <= -cfg.rho_min {
                SynthesisStatus::Satisfied
            } else {
                SynthesisStatus::InfeasibleBudget
            };
            let result = SynthesisResult {
                status,
                best_control: problem.control(best)?,
                best_cost: cost,
                best_robustness: -cost,
                log,
                evaluations: out.evaluations,
                bo_iterations: 0,
            };
            (result, out.evaluations)
        }
        Pipeline::BoOnly => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let bounds = problem.search_box();
            let init = (0..cfg.bo.random_init)
                .map(|_| problem.control(&bounds.sample(&mut rng)))
                .collect::<Result<Vec<ControlSequence>, _>>()?;
            let result = synthesize(&problem, &ucb, &init)?;
            let evals = result.evaluations;
            (result, evals)
        }
        Pipeline::DeBo => {
            let out = de_search(&problem, &de)?;
            let init = out
                .members
                .iter()
                .map(|(x, _)| problem.control(x))
                .collect::<Result<Vec<_>, _>>()?;
            let result = synthesize(&problem, &ucb, &init)?;
            // initial guesses were already counted by DE
            let evals = out.evaluations + result.bo_iterations;
            (result, evals)
        }
    };
    let wall_time_secs = clock.elapsed().as_secs_f64();

    let trace = problem.model().rollout(&result.best_control)?;
    let revalidated = stlbo::eval_boolean(&formula, &trace, 0)?;
    if result.is_satisfied() && !revalidated {
        log::error!("soundness violation: {pipeline} seed {seed} T={horizon}");
    }
    Ok(RunOutcome {
        pipeline,
        seed,
        horizon,
        formula,
        result,
        trace,
        total_evaluations,
        wall_time_secs,
        revalidated,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pipeline_names_round_trip() {
        for p in Pipeline::ALL {
            assert_eq!(p.as_str().parse::<Pipeline>().unwrap(), p);
        }
        assert!("milp".parse::<Pipeline>().is_err());
    }
}
