//! Synthesis of control sequences whose output traces satisfy bounded Signal
//! Temporal Logic specifications with a required robustness margin.
//!
//! The pipeline: [`de`] produces a handful of good initial control tapes,
//! then [`ucb::synthesize`] runs GP-UCB on the cost `J(u) = -rho(spec, y(u))`
//! until a tape reaches `J <= -rho_min` or the iteration cap is hit.

pub mod bounds;
pub mod de;
pub mod gp;
pub mod stl;
pub mod system;
pub mod ucb;

pub use bounds::SearchBox;
pub use de::{de_minimize, BoundHandling, de_search, de_seed_synthesis, DeConfig, DeOutcome};
pub use gp::{matern52, GpState, KernelParams, Posterior};
pub use stl::{eval_boolean, parse_formula, robustness, Formula, Robustness, Trace};
pub use system::{double_integrator, ControlSequence, SynthesisProblem, SystemModel};
pub use ucb::{
    synthesize, ucb_acquire, AcquisitionBudget, BetaSchedule, SynthesisResult, SynthesisStatus,
    UcbConfig,
};
