//! Differential Evolution (DE/rand/1/bin) over a box, used to seed the
//! Bayesian optimization loop with initial control tapes.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::bounds::SearchBox;
use crate::system::{ControlSequence, SynthesisProblem, SystemError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DeError {
    #[error("invalid DE configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    System(#[from] SystemError),
}

/// What happens to a mutant coordinate that leaves the box.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BoundHandling {
    /// Project onto the nearest face.
    #[default]
    Clamp,
    /// Redraw the coordinate uniformly from its interval.
    Resample,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeConfig {
    pub population: usize,
    pub generations: usize,
    /// Differential weight `F`.
    pub weight: f64,
    /// Crossover rate `CR`.
    pub crossover: f64,
    pub seed: u64,
    /// Number of distinct best members to return.
    pub k_best: usize,
    pub bound_handling: BoundHandling,
}

impl Default for DeConfig {
    fn default() -> Self {
        Self {
            population: 30,
            generations: 8,
            weight: 0.8,
            crossover: 0.9,
            seed: 0,
            k_best: 5,
            bound_handling: BoundHandling::Clamp,
        }
    }
}

impl DeConfig {
    pub fn validate(&self) -> Result<(), DeError> {
        let bad = |msg: String| Err(DeError::InvalidConfig(msg));
        if self.population < 4 {
            return bad(format!("population {} < 4", self.population));
        }
        if !(self.weight > 0.0 && self.weight <= 2.0) {
            return bad(format!("weight {} outside (0, 2]", self.weight));
        }
        if !(0.0..=1.0).contains(&self.crossover) {
            return bad(format!("crossover {} outside [0, 1]", self.crossover));
        }
        if self.k_best == 0 || self.k_best > self.population {
            return bad(format!(
                "k_best {} outside [1, population {}]",
                self.k_best, self.population
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct DeOutcome {
    /// Up to `k_best` pairwise-distinct members, ascending by cost.
    pub members: Vec<(Vec<f64>, f64)>,
    /// Best cost in the population after initialization and after each
    /// generation (`generations + 1` entries).
    pub best_history: Vec<f64>,
    pub evaluations: usize,
}

impl DeOutcome {
    pub fn best(&self) -> (&[f64], f64) {
        let (x, c) = &self.members[0];
        (x, *c)
    }
}

/// NaN costs rank worst.
fn sanitize(c: f64) -> f64 {
    if c.is_nan() {
        f64::INFINITY
    } else {
        c
    }
}

fn evaluate_all<F>(objective: &F, xs: &[Vec<f64>]) -> Vec<f64>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    xs.par_iter().map(|x| sanitize(objective(x))).collect()
}

pub fn de_minimize<F>(objective: F, bounds: &SearchBox, cfg: &DeConfig) -> Result<DeOutcome, DeError>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    de_minimize_observed(objective, bounds, cfg, |_, _, _| {})
}

/// Like [`de_minimize`], calling `observe(generation, population, costs)`
/// once after initialization (generation 0) and after every generation.
pub fn de_minimize_observed<F, O>(
    objective: F,
    bounds: &SearchBox,
    cfg: &DeConfig,
    mut observe: O,
) -> Result<DeOutcome, DeError>
where
    F: Fn(&[f64]) -> f64 + Sync,
    O: FnMut(usize, &[Vec<f64>], &[f64]),
{
    cfg.validate()?;
    let d = bounds.dim();
    let np = cfg.population;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let mut pop: Vec<Vec<f64>> = (0..np).map(|_| bounds.sample(&mut rng)).collect();
    let mut costs = evaluate_all(&objective, &pop);
    let mut evaluations = np;
    let best_of = |c: &[f64]| c.iter().copied().fold(f64::INFINITY, f64::min);
    let mut best_history = vec![best_of(&costs)];
    observe(0, &pop, &costs);

    for generation in 1..=cfg.generations {
        // Trials are built from the previous generation only, so that the
        // parallel evaluation below cannot affect the result.
        let trials: Vec<Vec<f64>> = (0..np)
            .map(|i| {
                let [r1, r2, r3] = pick_three(&mut rng, np, i);
                let forced = rng.random_range(0..d);
                (0..d)
                    .map(|j| {
                        let cross = rng.random::<f64>() < cfg.crossover;
                        if cross || j == forced {
                            let v = pop[r1][j] + cfg.weight * (pop[r2][j] - pop[r3][j]);
                            let (lo, hi) = (bounds.lower()[j], bounds.upper()[j]);
                            match cfg.bound_handling {
                                BoundHandling::Resample if !(lo..=hi).contains(&v) => {
                                    if hi > lo {
                                        rng.random_range(lo..hi)
                                    } else {
                                        lo
                                    }
                                }
                                _ => bounds.clamp_coord(j, v),
                            }
                        } else {
                            pop[i][j]
                        }
                    })
                    .collect()
            })
            .collect();
        let trial_costs = evaluate_all(&objective, &trials);
        evaluations += np;
        for (i, (trial, cost)) in trials.into_iter().zip(trial_costs).enumerate() {
            if cost <= costs[i] {
                pop[i] = trial;
                costs[i] = cost;
            }
        }
        best_history.push(best_of(&costs));
        observe(generation, &pop, &costs);
    }

    Ok(DeOutcome {
        members: distinct_best(pop, costs, cfg.k_best),
        best_history,
        evaluations,
    })
}

fn pick_three<R: Rng>(rng: &mut R, n: usize, exclude: usize) -> [usize; 3] {
    let mut picked = [usize::MAX; 3];
    for k in 0..3 {
        picked[k] = loop {
            let r = rng.random_range(0..n);
            if r != exclude && !picked[..k].contains(&r) {
                break r;
            }
        };
    }
    picked
}

fn distinct_best(pop: Vec<Vec<f64>>, costs: Vec<f64>, k: usize) -> Vec<(Vec<f64>, f64)> {
    let mut ranked: Vec<(Vec<f64>, f64)> = pop.into_iter().zip(costs).collect();
    // stable: ties keep population order
    ranked.sort_by(|a, b| a.1.total_cmp(&b.1));
    let mut out: Vec<(Vec<f64>, f64)> = Vec::with_capacity(k);
    for (x, c) in ranked {
        if out.len() == k {
            break;
        }
        if !out.iter().any(|(y, _)| y == &x) {
            out.push((x, c));
        }
    }
    out
}

/// Runs DE on the synthesis cost over the control box.
pub fn de_search(problem: &SynthesisProblem, cfg: &DeConfig) -> Result<DeOutcome, DeError> {
    de_minimize(|u| problem.cost(u), &problem.search_box(), cfg)
}

/// The `k_best` DE members as control sequences, best first.
pub fn de_seed_synthesis(
    problem: &SynthesisProblem,
    cfg: &DeConfig,
) -> Result<Vec<ControlSequence>, DeError> {
    de_search(problem, cfg)?
        .members
        .into_iter()
        .map(|(x, _)| problem.control(&x).map_err(DeError::from))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sphere(x: &[f64]) -> f64 {
        x.iter().map(|v| v * v).sum()
    }

    #[test]
    fn config_validation() {
        let ok = DeConfig::default();
        assert!(ok.validate().is_ok());
        for bad in [
            DeConfig { population: 3, k_best: 2, ..ok.clone() },
            DeConfig { weight: 0.0, ..ok.clone() },
            DeConfig { weight: 2.5, ..ok.clone() },
            DeConfig { crossover: 1.5, ..ok.clone() },
            DeConfig { k_best: 0, ..ok.clone() },
            DeConfig { k_best: 31, ..ok.clone() },
        ] {
            assert!(bad.validate().is_err(), "{bad:?}");
        }
    }

    #[test]
    fn zero_generations_returns_initial_population() {
        let b = SearchBox::uniform(3, -2.0, 2.0).unwrap();
        let cfg = DeConfig {
            population: 10,
            generations: 0,
            k_best: 10,
            seed: 3,
            ..DeConfig::default()
        };
        let out = de_minimize(sphere, &b, &cfg).unwrap();
        assert_eq!(out.members.len(), 10);
        assert_eq!(out.evaluations, 10);
        assert_eq!(out.best_history.len(), 1);
        assert!(out.members.windows(2).all(|w| w[0].1 <= w[1].1));
        assert!(out.members.iter().all(|(x, c)| b.contains(x) && *c == sphere(x)));
    }

    #[test]
    fn deterministic_under_seed() {
        let b = SearchBox::uniform(4, -5.0, 5.0).unwrap();
        let cfg = DeConfig {
            population: 12,
            generations: 15,
            seed: 42,
            ..DeConfig::default()
        };
        let a = de_minimize(sphere, &b, &cfg).unwrap();
        let c = de_minimize(sphere, &b, &cfg).unwrap();
        assert_eq!(a.members, c.members);
        assert_eq!(a.best_history, c.best_history);
    }

    #[test]
    fn members_are_distinct_and_backfilled() {
        let b = SearchBox::uniform(2, 0.0, 1.0).unwrap();
        // a flat objective with clamping pushes many members onto the corner
        let cfg = DeConfig {
            population: 8,
            generations: 30,
            weight: 2.0,
            k_best: 8,
            seed: 1,
            ..DeConfig::default()
        };
        let out = de_minimize(|x| -(x[0] + x[1]), &b, &cfg).unwrap();
        for (i, (x, _)) in out.members.iter().enumerate() {
            for (y, _) in &out.members[i + 1..] {
                assert_ne!(x, y);
            }
        }
        assert!(!out.members.is_empty());
    }

    #[test]
    fn nan_costs_rank_last() {
        let b = SearchBox::uniform(1, 0.0, 1.0).unwrap();
        let cfg = DeConfig {
            population: 6,
            generations: 3,
            k_best: 6,
            ..DeConfig::default()
        };
        let out = de_minimize(|x| if x[0] < 0.5 { f64::NAN } else { x[0] }, &b, &cfg).unwrap();
        assert!(out.best_history.iter().all(|c| !c.is_nan()));
    }
}
