//! Problem configuration files (JSON).

use std::path::Path;

use serde::{Deserialize, Serialize};
use stlbo::gp::KernelParams;
use stlbo::ucb::{AcquisitionBudget, BetaSchedule, GammaProxy, HyperRefit};
use stlbo::{double_integrator, BoundHandling, parse_formula, DeConfig, Formula, SearchBox, SystemModel, UcbConfig};

use crate::case_study::ReachAvoid;
use crate::SynthError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SystemConfig {
    /// Planar double integrator with the same bounds on both inputs.
    DoubleIntegrator { u_min: f64, u_max: f64 },
    /// `x' = A x + B u`, output picks coordinates of `[x; u]`.
    Lti {
        a: Vec<Vec<f64>>,
        b: Vec<Vec<f64>>,
        output_selector: Vec<usize>,
        input_lower: Vec<f64>,
        input_upper: Vec<f64>,
        #[serde(default)]
        output_labels: Option<Vec<String>>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SpecConfig {
    /// STL text; every `{T}` is replaced by the horizon.
    Formula { text: String },
    ReachAvoid(ReachAvoid),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DeSection {
    pub population: usize,
    pub generations: usize,
    pub weight: f64,
    pub crossover: f64,
    pub k_best: usize,
    pub bound_handling: BoundHandlingConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundHandlingConfig {
    #[default]
    Clamp,
    Resample,
}

impl From<BoundHandlingConfig> for BoundHandling {
    fn from(b: BoundHandlingConfig) -> Self {
        match b {
            BoundHandlingConfig::Clamp => BoundHandling::Clamp,
            BoundHandlingConfig::Resample => BoundHandling::Resample,
        }
    }
}

impl Default for DeSection {
    fn default() -> Self {
        let d = DeConfig::default();
        Self {
            population: d.population,
            generations: d.generations,
            weight: d.weight,
            crossover: d.crossover,
            k_best: d.k_best,
            bound_handling: BoundHandlingConfig::Clamp,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GammaConfig {
    Constant { value: f64 },
    Linear { scale: f64 },
    LogPower { scale: f64, exponent: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BetaConfig {
    Constant { beta: f64 },
    LogGrowth { a: f64, b: f64 },
    HighProbability {
        rkhs_bound: f64,
        delta: f64,
        gamma: GammaConfig,
    },
}

impl From<BetaConfig> for BetaSchedule {
    fn from(b: BetaConfig) -> Self {
        match b {
            BetaConfig::Constant { beta } => BetaSchedule::Constant(beta),
            BetaConfig::LogGrowth { a, b } => BetaSchedule::LogGrowth { a, b },
            BetaConfig::HighProbability {
                rkhs_bound,
                delta,
                gamma,
            } => BetaSchedule::HighProbability {
                rkhs_bound,
                delta,
                gamma: match gamma {
                    GammaConfig::Constant { value } => GammaProxy::Constant(value),
                    GammaConfig::Linear { scale } => GammaProxy::Linear(scale),
                    GammaConfig::LogPower { scale, exponent } => {
                        GammaProxy::LogPower { scale, exponent }
                    }
                },
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelSection {
    pub signal_variance: f64,
    /// Omitted: `sqrt` of the search dimension.
    #[serde(default)]
    pub lengthscale: Option<f64>,
    #[serde(default)]
    pub noise_variance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RefitSection {
    pub every: usize,
    pub signal_variances: Vec<f64>,
    pub lengthscales: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoSection {
    pub max_iters: usize,
    pub beta: Option<BetaConfig>,
    pub candidates: usize,
    pub restarts: usize,
    pub steps: usize,
    /// Uniform random initial guesses for the `bo_only` pipeline.
    pub random_init: usize,
    pub kernel: Option<KernelSection>,
    pub center: bool,
    pub refit: Option<RefitSection>,
}

impl Default for BoSection {
    fn default() -> Self {
        let budget = AcquisitionBudget::default();
        Self {
            max_iters: 100,
            beta: None,
            candidates: budget.candidates,
            restarts: budget.restarts,
            steps: budget.steps,
            random_init: DeConfig::default().k_best,
            kernel: None,
            center: true,
            refit: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    /// Free text, ignored by the tool.
    #[serde(default)]
    pub description: Option<String>,
    pub system: SystemConfig,
    /// Initial state; defaults to the origin.
    #[serde(default)]
    pub x0: Option<Vec<f64>>,
    pub spec: SpecConfig,
    /// Time bound `T` substituted into the spec.
    pub horizon: usize,
    pub rho_min: f64,
    #[serde(default)]
    pub de: DeSection,
    #[serde(default)]
    pub bo: BoSection,
}

impl ProblemConfig {
    pub fn load(path: &Path) -> Result<Self, SynthError> {
        let text = std::fs::read_to_string(path).map_err(|e| SynthError::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self, SynthError> {
        let cfg: ProblemConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        if !(self.rho_min > 0.0 && self.rho_min.is_finite()) {
            return Err(SynthError::Config(format!(
                "rho_min must be positive, got {}",
                self.rho_min
            )));
        }
        let model = self.model()?;
        self.formula(self.horizon)?;
        self.de_config(0).validate()?;
        let dim = model.input_dim() * (self.horizon + 1);
        self.ucb_config(0, dim)?.validate()?;
        if self.bo.random_init == 0 {
            return Err(SynthError::Config("bo.random_init must be at least 1".into()));
        }
        Ok(())
    }

    pub fn model(&self) -> Result<SystemModel, SynthError> {
        let model = match &self.system {
            SystemConfig::DoubleIntegrator { u_min, u_max } => {
                if !(u_min < u_max) {
                    return Err(SynthError::Config(format!(
                        "double integrator needs u_min < u_max, got [{u_min}, {u_max}]"
                    )));
                }
                double_integrator(*u_min, *u_max)
            }
            SystemConfig::Lti {
                a,
                b,
                output_selector,
                input_lower,
                input_upper,
                output_labels,
            } => {
                let bounds = SearchBox::new(input_lower.clone(), input_upper.clone())
                    .map_err(|e| SynthError::Config(e.to_string()))?;
                let model = SystemModel::linear_selected_rows(
                    a,
                    b,
                    output_selector,
                    vec![0.0; a.len()],
                    bounds,
                )?;
                match output_labels {
                    Some(labels) => model.with_output_labels(labels.clone())?,
                    None => model,
                }
            }
        };
        Ok(match &self.x0 {
            Some(x0) => model.with_initial_state(x0.clone())?,
            None => model,
        })
    }

    /// The specification instantiated at time bound `horizon`.
    pub fn formula(&self, horizon: usize) -> Result<Formula, SynthError> {
        let model = self.model()?;
        match &self.spec {
            SpecConfig::Formula { text } => {
                let text = text.replace("{T}", &horizon.to_string());
                Ok(parse_formula(&text, model.output_dim())?)
            }
            SpecConfig::ReachAvoid(ra) => ra.formula(&model, horizon),
        }
    }

    pub fn de_config(&self, seed: u64) -> DeConfig {
        DeConfig {
            population: self.de.population,
            generations: self.de.generations,
            weight: self.de.weight,
            crossover: self.de.crossover,
            seed,
            k_best: self.de.k_best,
            bound_handling: self.de.bound_handling.into(),
        }
    }

    /// UCB settings for a search space of dimension `dim`.
    pub fn ucb_config(&self, seed: u64, dim: usize) -> Result<UcbConfig, SynthError> {
        let kernel = match self.bo.kernel {
            Some(k) => Some(KernelParams::new(
                k.signal_variance,
                k.lengthscale
                    .unwrap_or_else(|| KernelParams::for_dimension(dim).lengthscale),
                k.noise_variance,
            )?),
            None => None,
        };
        Ok(UcbConfig {
            max_iters: self.bo.max_iters,
            rho_min: self.rho_min,
            beta: self.bo.beta.map(Into::into).unwrap_or_default(),
            budget: AcquisitionBudget {
                candidates: self.bo.candidates,
                restarts: self.bo.restarts,
                steps: self.bo.steps,
            },
            seed,
            kernel,
            center: self.bo.center,
            refit: self.bo.refit.as_ref().map(|r| HyperRefit {
                every: r.every,
                signal_variances: r.signal_variances.clone(),
                lengthscales: r.lengthscales.clone(),
            }),
        })
    }
}
