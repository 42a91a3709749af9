//! GP-UCB synthesis loop.
//!
//! The cost `J(u) = -rho` is minimized, so the acquisition is the lower
//! confidence bound `mu(u) - sqrt(beta) * sigma(u)`. The loop returns as soon
//! as a proposal reaches `J <= -rho_min`, before that proposal is added to the
//! GP.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::bounds::SearchBox;
use crate::gp::{GpError, GpState, KernelParams};
use crate::system::{ControlSequence, SynthesisProblem, SystemError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SynthesisError {
    #[error("invalid synthesis configuration: {0}")]
    InvalidConfig(String),
    #[error("no initial control sequences supplied")]
    NoInitialGuesses,
    #[error("initial guess {index} has {found} steps, expected {expected}")]
    InitLength {
        index: usize,
        expected: usize,
        found: usize,
    },
    #[error(transparent)]
    System(#[from] SystemError),
    #[error(transparent)]
    Gp(#[from] GpError),
}

/// Growth model for the information-gain term of [`BetaSchedule::HighProbability`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GammaProxy {
    /// `gamma_i = c`.
    Constant(f64),
    /// `gamma_i = c * i`.
    Linear(f64),
    /// `gamma_i = c * ln(1 + i)^p`.
    LogPower { scale: f64, exponent: f64 },
}

impl GammaProxy {
    pub fn value(&self, i: usize) -> f64 {
        let i = i as f64;
        match *self {
            GammaProxy::Constant(c) => c,
            GammaProxy::Linear(c) => c * i,
            GammaProxy::LogPower { scale, exponent } => scale * (1.0 + i).ln().powf(exponent),
        }
    }

    fn scale(&self) -> f64 {
        match *self {
            GammaProxy::Constant(c) | GammaProxy::Linear(c) => c,
            GammaProxy::LogPower { scale, .. } => scale,
        }
    }
}

/// Exploration weight `beta_i` at BO iteration `i >= 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BetaSchedule {
    Constant(f64),
    /// `beta_i = a * ln(b * i^2)`.
    LogGrowth { a: f64, b: f64 },
    /// `beta_i = 2 B + 300 gamma_i ln^3(i / delta)` for an RKHS norm bound
    /// `||J||_k^2 <= B` and failure probability `delta`.
    HighProbability {
        rkhs_bound: f64,
        delta: f64,
        gamma: GammaProxy,
    },
}

impl Default for BetaSchedule {
    fn default() -> Self {
        BetaSchedule::LogGrowth {
            a: 2.0,
            b: std::f64::consts::PI.powi(2) / (3.0 * 0.1),
        }
    }
}

impl BetaSchedule {
    /// `i` counts from 1; `i = 0` is treated as 1.
    pub fn value(&self, i: usize) -> f64 {
        let i = i.max(1);
        match *self {
            BetaSchedule::Constant(beta) => beta,
            BetaSchedule::LogGrowth { a, b } => a * (b * (i as f64).powi(2)).ln(),
            BetaSchedule::HighProbability {
                rkhs_bound,
                delta,
                gamma,
            } => 2.0 * rkhs_bound + 300.0 * gamma.value(i) * (i as f64 / delta).ln().powi(3),
        }
    }

    pub fn validate(&self) -> Result<(), SynthesisError> {
        let bad = |m: String| Err(SynthesisError::InvalidConfig(m));
        match *self {
            BetaSchedule::Constant(beta) if !(beta > 0.0 && beta.is_finite()) => {
                bad(format!("constant beta must be positive, got {beta}"))
            }
            BetaSchedule::LogGrowth { a, b } if !(a > 0.0 && b > 1.0) => {
                bad(format!("log-growth beta needs a > 0 and b > 1, got a={a}, b={b}"))
            }
            BetaSchedule::HighProbability {
                rkhs_bound,
                delta,
                gamma,
            } => {
                if !(rkhs_bound >= 0.0) || !(delta > 0.0 && delta < 1.0) || !(gamma.scale() > 0.0) {
                    bad(format!(
                        "high-probability beta needs B >= 0, 0 < delta < 1 and a positive gamma \
                         scale, got B={rkhs_bound}, delta={delta}, gamma={gamma:?}"
                    ))
                } else {
                    Ok(())
                }
            }
            _ => Ok(()),
        }
    }
}

/// Inner search effort for one acquisition step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AcquisitionBudget {
    /// Uniform random candidates drawn from the box.
    pub candidates: usize,
    /// Coordinate-descent refinements, started from the best candidates.
    pub restarts: usize,
    /// Coordinate sweeps per refinement.
    pub steps: usize,
}

impl Default for AcquisitionBudget {
    fn default() -> Self {
        Self {
            candidates: 512,
            restarts: 3,
            steps: 50,
        }
    }
}

/// Periodic marginal-likelihood grid search over the kernel hyperparameters.
#[derive(Debug, Clone, PartialEq)]
pub struct HyperRefit {
    pub every: usize,
    pub signal_variances: Vec<f64>,
    pub lengthscales: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UcbConfig {
    /// BO iteration cap `N`.
    pub max_iters: usize,
    pub rho_min: f64,
    pub beta: BetaSchedule,
    pub budget: AcquisitionBudget,
    pub seed: u64,
    /// Defaults to [`KernelParams::for_dimension`] of the search space.
    pub kernel: Option<KernelParams>,
    /// Center costs by their running mean before fitting.
    pub center: bool,
    pub refit: Option<HyperRefit>,
}

impl Default for UcbConfig {
    fn default() -> Self {
        Self {
            max_iters: 100,
            rho_min: 0.05,
            beta: BetaSchedule::default(),
            budget: AcquisitionBudget::default(),
            seed: 0,
            kernel: None,
            center: true,
            refit: None,
        }
    }
}

impl UcbConfig {
    pub fn validate(&self) -> Result<(), SynthesisError> {
        let bad = |m: String| Err(SynthesisError::InvalidConfig(m));
        if self.max_iters == 0 {
            return bad("max_iters must be at least 1".into());
        }
        if !(self.rho_min > 0.0 && self.rho_min.is_finite()) {
            return bad(format!("rho_min must be positive, got {}", self.rho_min));
        }
        if self.budget.candidates == 0 {
            return bad("acquisition needs at least one random candidate".into());
        }
        if let Some(r) = &self.refit {
            if r.every == 0 {
                return bad("hyperparameter refit interval must be positive".into());
            }
        }
        self.beta.validate()
    }
}

fn lcb(gp: &GpState, sqrt_beta: f64, x: &[f64]) -> f64 {
    let post = gp.posterior(x);
    post.mean - sqrt_beta * post.std_dev()
}

/// Proposes the next query point by minimizing `mu - sqrt(beta) sigma` over
/// `bounds`. The result lies strictly inside the box on every coordinate of
/// positive width.
pub fn ucb_acquire<R: Rng>(
    gp: &GpState,
    beta: f64,
    bounds: &SearchBox,
    budget: &AcquisitionBudget,
    rng: &mut R,
) -> Vec<f64> {
    let sqrt_beta = beta.max(0.0).sqrt();
    let n = budget.candidates.max(1);
    let candidates: Vec<Vec<f64>> = (0..n).map(|_| bounds.sample(rng)).collect();
    let values: Vec<f64> = candidates
        .par_iter()
        .map(|x| lcb(gp, sqrt_beta, x))
        .collect();

    let mut order: Vec<usize> = (0..n).collect();
    // stable, so ties resolve to the lowest candidate index
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut best = candidates[order[0]].clone();
    let mut best_value = values[order[0]];

    let starts: Vec<usize> = order.iter().copied().take(budget.restarts).collect();
    let refined: Vec<(Vec<f64>, f64)> = starts
        .par_iter()
        .map(|&s| coordinate_descent(gp, sqrt_beta, bounds, &candidates[s], values[s], budget.steps))
        .collect();
    for (x, v) in refined {
        if v < best_value {
            best = x;
            best_value = v;
        }
    }
    best
}

/// Cyclic coordinate descent on the LCB with per-coordinate step
/// `width / 4`, halved after every sweep that brings no improvement. Moves
/// that would leave the open box are skipped.
fn coordinate_descent(
    gp: &GpState,
    sqrt_beta: f64,
    bounds: &SearchBox,
    start: &[f64],
    start_value: f64,
    sweeps: usize,
) -> (Vec<f64>, f64) {
    let mut x = start.to_vec();
    let mut value = start_value;
    let mut scale = 0.25;
    for _ in 0..sweeps {
        let mut improved = false;
        for j in 0..x.len() {
            let h = scale * bounds.width(j);
            if h == 0.0 {
                continue;
            }
            let orig = x[j];
            for dir in [1.0, -1.0] {
                let moved = orig + dir * h;
                if !bounds.interior_coord(j, moved) {
                    continue;
                }
                x[j] = moved;
                let v = lcb(gp, sqrt_beta, &x);
                if v < value {
                    value = v;
                    improved = true;
                    break;
                }
                x[j] = orig;
            }
        }
        if !improved {
            scale *= 0.5;
            if scale < 1e-6 {
                break;
            }
        }
    }
    (x, value)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SynthesisStatus {
    /// A control tape with `J <= -rho_min` was found.
    Satisfied,
    /// The iteration cap was reached first.
    InfeasibleBudget,
}

impl SynthesisStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            SynthesisStatus::Satisfied => "satisfied",
            SynthesisStatus::InfeasibleBudget => "infeasible_budget",
        }
    }
}

/// One evaluated control tape. Initial guesses are logged as iteration 0
/// with no beta or posterior.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    pub control: Vec<f64>,
    pub cost: f64,
    pub robustness: f64,
    pub beta: Option<f64>,
    pub posterior_mean: Option<f64>,
    pub posterior_std: Option<f64>,
    /// Time since the start of the run.
    pub elapsed_ms: f64,
    /// Side of the factorized GP covariance once this record was processed.
    pub gp_size: usize,
    /// Time spent in the GP update for this record, when one happened.
    pub gp_update_secs: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthesisResult {
    pub status: SynthesisStatus,
    pub best_control: ControlSequence,
    pub best_cost: f64,
    pub best_robustness: f64,
    pub log: Vec<IterationRecord>,
    pub evaluations: usize,
    pub bo_iterations: usize,
}

impl SynthesisResult {
    pub fn is_satisfied(&self) -> bool {
        self.status == SynthesisStatus::Satisfied
    }

    /// Best cost seen after each log entry.
    pub fn best_so_far(&self) -> Vec<f64> {
        self.log
            .iter()
            .scan(f64::INFINITY, |best, r| {
                *best = best.min(r.cost);
                Some(*best)
            })
            .collect()
    }
}

/// Runs the GP-UCB loop from the given initial guesses.
pub fn synthesize(
    problem: &SynthesisProblem,
    cfg: &UcbConfig,
    init: &[ControlSequence],
) -> Result<SynthesisResult, SynthesisError> {
    cfg.validate()?;
    if init.is_empty() {
        return Err(SynthesisError::NoInitialGuesses);
    }
    for (index, u) in init.iter().enumerate() {
        if u.steps() != problem.steps() || u.input_dim() != problem.model().input_dim() {
            return Err(SynthesisError::InitLength {
                index,
                expected: problem.steps(),
                found: u.steps(),
            });
        }
    }
    let clock = Instant::now();
    let elapsed_ms = |c: &Instant| c.elapsed().as_secs_f64() * 1e3;
    let satisfies = |cost: f64| cost <= -cfg.rho_min;

    let evals: Vec<_> = init
        .par_iter()
        .map(|u| problem.evaluate(u.as_flat()))
        .collect::<Result<_, _>>()?;
    let mut log: Vec<IterationRecord> = init
        .iter()
        .zip(&evals)
        .map(|(u, e)| IterationRecord {
            iteration: 0,
            control: u.as_flat().to_vec(),
            cost: e.cost,
            robustness: e.robustness,
            beta: None,
            posterior_mean: None,
            posterior_std: None,
            elapsed_ms: elapsed_ms(&clock),
            gp_size: 0,
            gp_update_secs: None,
        })
        .collect();

    let mut best = (0..init.len())
        .min_by(|&a, &b| evals[a].cost.total_cmp(&evals[b].cost))
        .expect("init is non-empty");
    let finish = |status, best_idx: usize, log: Vec<IterationRecord>, bo_iterations| {
        let rec = &log[best_idx];
        Ok(SynthesisResult {
            status,
            best_control: problem.control(&rec.control)?,
            best_cost: rec.cost,
            best_robustness: rec.robustness,
            evaluations: log.len(),
            bo_iterations,
            log,
        })
    };
    if satisfies(evals[best].cost) {
        return finish(SynthesisStatus::Satisfied, best, log, 0);
    }

    let bounds = problem.search_box();
    let kernel = cfg
        .kernel
        .unwrap_or_else(|| KernelParams::for_dimension(problem.dim()));
    let started = Instant::now();
    let mut gp = GpState::fit(
        kernel,
        cfg.center,
        log.iter().map(|r| r.control.clone()).collect(),
        log.iter().map(|r| r.cost).collect(),
    )?;
    let init_fit = started.elapsed().as_secs_f64();
    for r in &mut log {
        r.gp_size = gp.factor_dim();
        r.gp_update_secs = Some(init_fit);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    for i in 1..=cfg.max_iters {
        let beta = cfg.beta.value(i);
        let u = ucb_acquire(&gp, beta, &bounds, &cfg.budget, &mut rng);
        let post = gp.posterior(&u);
        let eval = problem.evaluate(&u)?;
        log.push(IterationRecord {
            iteration: i,
            control: u,
            cost: eval.cost,
            robustness: eval.robustness,
            beta: Some(beta),
            posterior_mean: Some(post.mean),
            posterior_std: Some(post.std_dev()),
            elapsed_ms: elapsed_ms(&clock),
            gp_size: gp.factor_dim(),
            gp_update_secs: None,
        });
        let idx = log.len() - 1;
        if eval.cost < log[best].cost {
            best = idx;
        }
        if satisfies(eval.cost) {
            return finish(SynthesisStatus::Satisfied, idx, log, i);
        }
        let started = Instant::now();
        gp = gp.update(&log[idx].control, eval.cost)?;
        if let Some(refit) = &cfg.refit {
            if i % refit.every == 0 {
                gp = gp.refit_hyperparameters(&refit.signal_variances, &refit.lengthscales)?;
            }
        }
        let rec = &mut log[idx];
        rec.gp_update_secs = Some(started.elapsed().as_secs_f64());
        rec.gp_size = gp.factor_dim();
    }
    finish(SynthesisStatus::InfeasibleBudget, best, log, cfg.max_iters)
}
