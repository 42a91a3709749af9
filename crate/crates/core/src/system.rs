//! Deterministic discrete-time control systems
//! `x_{t+1} = f(x_t, u_t)`, `y_t = g(x_t, u_t)` and their rollouts.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::bounds::{BoundsError, SearchBox};
use crate::stl::{robustness, Formula, StlError, Trace};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SystemError {
    #[error("{what}: expected dimension {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("control sequence has {found} steps, at least {needed} required")]
    ControlTooShort { needed: usize, found: usize },
    #[error("control sequence is empty")]
    EmptyControl,
    #[error(transparent)]
    Bounds(#[from] BoundsError),
    #[error(transparent)]
    Stl(#[from] StlError),
}

/// `(x, u) -> vector`, used for both the transition and the output map.
pub type StepFn = Arc<dyn Fn(&[f64], &[f64]) -> Vec<f64> + Send + Sync>;

#[derive(Clone)]
pub enum Dynamics {
    /// `x' = A x + B u`, `y = C x + D u`.
    Linear {
        a: DMatrix<f64>,
        b: DMatrix<f64>,
        c: DMatrix<f64>,
        d: DMatrix<f64>,
    },
    Custom { transition: StepFn, output: StepFn },
}

impl fmt::Debug for Dynamics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Dynamics::Linear { a, b, c, d } => f
                .debug_struct("Linear")
                .field("a", a)
                .field("b", b)
                .field("c", c)
                .field("d", d)
                .finish(),
            Dynamics::Custom { .. } => f.write_str("Custom { .. }"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SystemModel {
    state_dim: usize,
    input_dim: usize,
    output_dim: usize,
    dynamics: Dynamics,
    input_bounds: SearchBox,
    x0: Vec<f64>,
    output_labels: Vec<String>,
}

fn check_dim(what: &'static str, expected: usize, found: usize) -> Result<(), SystemError> {
    if expected == found {
        Ok(())
    } else {
        Err(SystemError::DimensionMismatch {
            what,
            expected,
            found,
        })
    }
}

fn matrix_from_rows(what: &'static str, rows: &[Vec<f64>]) -> Result<DMatrix<f64>, SystemError> {
    let cols = rows.first().map_or(0, Vec::len);
    if let Some(bad) = rows.iter().find(|r| r.len() != cols) {
        return Err(SystemError::DimensionMismatch {
            what,
            expected: cols,
            found: bad.len(),
        });
    }
    Ok(DMatrix::from_row_slice(rows.len(), cols, &rows.concat()))
}

fn default_labels(p: usize) -> Vec<String> {
    (0..p).map(|i| format!("y{i}")).collect()
}

impl SystemModel {
    /// Linear time-invariant model. `input_bounds` has one interval per input.
    pub fn linear(
        a: DMatrix<f64>,
        b: DMatrix<f64>,
        c: DMatrix<f64>,
        d: DMatrix<f64>,
        x0: Vec<f64>,
        input_bounds: SearchBox,
    ) -> Result<Self, SystemError> {
        let n = a.nrows();
        check_dim("A columns", n, a.ncols())?;
        check_dim("B rows", n, b.nrows())?;
        let m = b.ncols();
        let p = c.nrows();
        check_dim("C columns", n, c.ncols())?;
        check_dim("D rows", p, d.nrows())?;
        check_dim("D columns", m, d.ncols())?;
        check_dim("initial state", n, x0.len())?;
        check_dim("input bounds", m, input_bounds.dim())?;
        Ok(Self {
            state_dim: n,
            input_dim: m,
            output_dim: p,
            dynamics: Dynamics::Linear { a, b, c, d },
            input_bounds,
            x0,
            output_labels: default_labels(p),
        })
    }

    /// LTI model whose output picks coordinates of the stacked vector `[x; u]`.
    pub fn linear_selected(
        a: DMatrix<f64>,
        b: DMatrix<f64>,
        selector: &[usize],
        x0: Vec<f64>,
        input_bounds: SearchBox,
    ) -> Result<Self, SystemError> {
        let (n, m) = (a.nrows(), b.ncols());
        let p = selector.len();
        let mut c = DMatrix::zeros(p, n);
        let mut d = DMatrix::zeros(p, m);
        for (row, &idx) in selector.iter().enumerate() {
            if idx < n {
                c[(row, idx)] = 1.0;
            } else if idx < n + m {
                d[(row, idx - n)] = 1.0;
            } else {
                return Err(SystemError::DimensionMismatch {
                    what: "output selector index",
                    expected: n + m,
                    found: idx,
                });
            }
        }
        Self::linear(a, b, c, d, x0, input_bounds)
    }

    /// [`SystemModel::linear_selected`] from row-major nested vectors.
    pub fn linear_selected_rows(
        a: &[Vec<f64>],
        b: &[Vec<f64>],
        selector: &[usize],
        x0: Vec<f64>,
        input_bounds: SearchBox,
    ) -> Result<Self, SystemError> {
        Self::linear_selected(
            matrix_from_rows("A", a)?,
            matrix_from_rows("B", b)?,
            selector,
            x0,
            input_bounds,
        )
    }

    /// Model with user-supplied pure transition and output functions.
    pub fn custom(
        output_dim: usize,
        transition: impl Fn(&[f64], &[f64]) -> Vec<f64> + Send + Sync + 'static,
        output: impl Fn(&[f64], &[f64]) -> Vec<f64> + Send + Sync + 'static,
        x0: Vec<f64>,
        input_bounds: SearchBox,
    ) -> Self {
        Self {
            state_dim: x0.len(),
            input_dim: input_bounds.dim(),
            output_dim,
            dynamics: Dynamics::Custom {
                transition: Arc::new(transition),
                output: Arc::new(output),
            },
            input_bounds,
            x0,
            output_labels: default_labels(output_dim),
        }
    }

    /// Replaces the output column names used when writing trajectories.
    pub fn with_output_labels(mut self, labels: Vec<String>) -> Result<Self, SystemError> {
        check_dim("output labels", self.output_dim, labels.len())?;
        self.output_labels = labels;
        Ok(self)
    }

    pub fn with_initial_state(mut self, x0: Vec<f64>) -> Result<Self, SystemError> {
        check_dim("initial state", self.state_dim, x0.len())?;
        self.x0 = x0;
        Ok(self)
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.output_dim
    }

    pub fn input_bounds(&self) -> &SearchBox {
        &self.input_bounds
    }

    pub fn initial_state(&self) -> &[f64] {
        &self.x0
    }

    pub fn output_labels(&self) -> &[String] {
        &self.output_labels
    }

    pub fn dynamics(&self) -> &Dynamics {
        &self.dynamics
    }

    /// Box over a flattened control tape of `steps` inputs.
    pub fn control_box(&self, steps: usize) -> SearchBox {
        self.input_bounds.repeat(steps)
    }

    /// Simulates the system under `u`, returning `y_0..=y_T` for `T+1 = u.len()`.
    pub fn rollout(&self, u: &ControlSequence) -> Result<Trace, SystemError> {
        check_dim("control input", self.input_dim, u.input_dim())?;
        self.rollout_flat(u.as_flat())
    }

    /// Rollout on a flat tape of `(T+1) * m` values, taken as given.
    pub fn rollout_flat(&self, tape: &[f64]) -> Result<Trace, SystemError> {
        let m = self.input_dim;
        if tape.is_empty() {
            return Err(SystemError::EmptyControl);
        }
        if tape.len() % m != 0 {
            return Err(SystemError::DimensionMismatch {
                what: "flattened control length (multiple of input dimension)",
                expected: m * tape.len().div_ceil(m),
                found: tape.len(),
            });
        }
        let steps = tape.len() / m;
        let mut out = Vec::with_capacity(steps * self.output_dim);
        match &self.dynamics {
            Dynamics::Linear { a, b, c, d } => {
                let mut x = DVector::from_column_slice(&self.x0);
                for u in tape.chunks_exact(m) {
                    let u = DVector::from_column_slice(u);
                    let y = c * &x + d * &u;
                    out.extend(y.iter());
                    x = a * &x + b * &u;
                }
            }
            Dynamics::Custom { transition, output } => {
                let mut x = self.x0.clone();
                for u in tape.chunks_exact(m) {
                    let y = output(&x, u);
                    check_dim("output map result", self.output_dim, y.len())?;
                    out.extend(y);
                    x = transition(&x, u);
                    check_dim("transition result", self.state_dim, x.len())?;
                }
            }
        }
        Ok(Trace::from_flat(self.output_dim, out)?)
    }

    /// Cost `J(u) = -rho(spec, rollout(u), 0)`.
    pub fn objective(&self, spec: &Formula, u: &ControlSequence) -> Result<f64, SystemError> {
        let needed = spec.horizon() + 1;
        if u.steps() < needed {
            return Err(SystemError::ControlTooShort {
                needed,
                found: u.steps(),
            });
        }
        let trace = self.rollout(u)?;
        Ok(-robustness(spec, &trace, 0)?.value())
    }
}

/// The planar double integrator: state `(px, vx, py, vy)`, input
/// `(ax, ay)`, output `(px, py, ax, ay)`, starting at rest at the origin.
///
/// Panics unless `u_min < u_max`.
pub fn double_integrator(u_min: f64, u_max: f64) -> SystemModel {
    assert!(
        u_min < u_max,
        "double integrator needs u_min < u_max, got [{u_min}, {u_max}]"
    );
    #[rustfmt::skip]
    let a = DMatrix::from_row_slice(4, 4, &[
        1.0, 1.0, 0.0, 0.0,
        0.0, 1.0, 0.0, 0.0,
        0.0, 0.0, 1.0, 1.0,
        0.0, 0.0, 0.0, 1.0,
    ]);
    #[rustfmt::skip]
    let b = DMatrix::from_row_slice(4, 2, &[
        0.0, 0.0,
        1.0, 0.0,
        0.0, 0.0,
        0.0, 1.0,
    ]);
    let bounds = SearchBox::uniform(2, u_min, u_max).expect("validated bounds");
    SystemModel::linear_selected(a, b, &[0, 2, 4, 5], vec![0.0; 4], bounds)
        .and_then(|m| m.with_output_labels(["x1", "x3", "u1", "u2"].map(String::from).to_vec()))
        .expect("double integrator dimensions are consistent")
}

/// Control tape `u_0..=u_T`, clamped into the input bounds on construction.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlSequence {
    input_dim: usize,
    values: Vec<f64>,
}

impl ControlSequence {
    /// `values` is the flattened tape, `m` values per step.
    pub fn new(values: Vec<f64>, input_bounds: &SearchBox) -> Result<Self, SystemError> {
        let m = input_bounds.dim();
        if values.is_empty() {
            return Err(SystemError::EmptyControl);
        }
        if values.len() % m != 0 {
            return Err(SystemError::DimensionMismatch {
                what: "flattened control length (multiple of input dimension)",
                expected: m * values.len().div_ceil(m),
                found: values.len(),
            });
        }
        let mut values = values;
        for step in values.chunks_exact_mut(m) {
            input_bounds.clamp(step);
        }
        Ok(Self { input_dim: m, values })
    }

    pub fn from_steps(steps: Vec<Vec<f64>>, input_bounds: &SearchBox) -> Result<Self, SystemError> {
        let m = input_bounds.dim();
        if let Some(bad) = steps.iter().find(|s| s.len() != m) {
            return Err(SystemError::DimensionMismatch {
                what: "control step",
                expected: m,
                found: bad.len(),
            });
        }
        Self::new(steps.concat(), input_bounds)
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    /// Number of steps, `T + 1`.
    pub fn steps(&self) -> usize {
        self.values.len() / self.input_dim
    }

    pub fn step(&self, t: usize) -> &[f64] {
        &self.values[t * self.input_dim..(t + 1) * self.input_dim]
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.values
    }

    pub fn into_flat(self) -> Vec<f64> {
        self.values
    }
}

/// A system paired with the specification its outputs must satisfy.
#[derive(Debug, Clone)]
pub struct SynthesisProblem {
    model: SystemModel,
    spec: Formula,
    steps: usize,
}

/// Cost and robustness of one control tape.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub cost: f64,
    pub robustness: f64,
}

impl SynthesisProblem {
    /// Control tapes have exactly `horizon(spec) + 1` steps.
    pub fn new(model: SystemModel, spec: Formula) -> Result<Self, SystemError> {
        let steps = spec.horizon() + 1;
        let problem = Self { model, spec, steps };
        // one trial rollout surfaces dimension errors up front
        problem.evaluate(&problem.search_box().center())?;
        Ok(problem)
    }

    pub fn model(&self) -> &SystemModel {
        &self.model
    }

    pub fn spec(&self) -> &Formula {
        &self.spec
    }

    /// Control tape length `T + 1`.
    pub fn steps(&self) -> usize {
        self.steps
    }

    /// Flattened search dimension `m (T + 1)`.
    pub fn dim(&self) -> usize {
        self.steps * self.model.input_dim()
    }

    pub fn search_box(&self) -> SearchBox {
        self.model.control_box(self.steps)
    }

    /// Clamps `tape` into bounds and wraps it.
    pub fn control(&self, tape: &[f64]) -> Result<ControlSequence, SystemError> {
        check_dim("flattened control", self.dim(), tape.len())?;
        ControlSequence::new(tape.to_vec(), self.model.input_bounds())
    }

    /// Evaluates a flat tape (clamped into bounds first).
    pub fn evaluate(&self, tape: &[f64]) -> Result<Evaluation, SystemError> {
        let u = self.control(tape)?;
        let trace = self.model.rollout(&u)?;
        let rho = robustness(&self.spec, &trace, 0)?.value();
        Ok(Evaluation {
            cost: -rho,
            robustness: rho,
        })
    }

    /// Cost of a tape already known to have the right shape.
    ///
    /// Panics on dimension errors, which [`SynthesisProblem::new`] rules out
    /// for well-behaved dynamics.
    pub fn cost(&self, tape: &[f64]) -> f64 {
        self.evaluate(tape)
            .unwrap_or_else(|e| panic!("objective evaluation failed: {e}"))
            .cost
    }

    /// Rolls out `u` and checks Boolean satisfaction of the spec at time 0.
    pub fn satisfied_by(&self, u: &ControlSequence) -> Result<bool, SystemError> {
        let trace = self.model.rollout(u)?;
        Ok(crate::stl::eval_boolean(&self.spec, &trace, 0)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stl::{eval_boolean, parse_formula};

    fn identity_scalar(x0: f64) -> SystemModel {
        SystemModel::custom(
            1,
            |x, _u| x.to_vec(),
            |x, _u| x.to_vec(),
            vec![x0],
            SearchBox::uniform(1, -10.0, 10.0).unwrap(),
        )
    }

    /// y_t = u_t
    fn passthrough(lo: f64, hi: f64) -> SystemModel {
        SystemModel::custom(
            1,
            |_x, _u| vec![],
            |_x, u| u.to_vec(),
            vec![],
            SearchBox::uniform(1, lo, hi).unwrap(),
        )
    }

    #[test]
    fn identity_fixed_point() {
        let model = identity_scalar(1.0);
        let u = ControlSequence::new(vec![0.3, -2.0, 5.0], model.input_bounds()).unwrap();
        let tr = model.rollout(&u).unwrap();
        assert_eq!(tr.as_flat(), &[1.0, 1.0, 1.0]);
    }

    #[test]
    fn double_integrator_zero_input() {
        let model = double_integrator(-1.0, 1.0);
        let u = ControlSequence::new(vec![0.0; 12], model.input_bounds()).unwrap();
        let tr = model.rollout(&u).unwrap();
        assert_eq!(tr.len(), 6);
        assert!(tr.as_flat().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn double_integrator_impulse() {
        let model = double_integrator(-1.0, 1.0);
        let u = ControlSequence::from_steps(
            vec![vec![1.0, 0.0], vec![0.0, 0.0], vec![0.0, 0.0]],
            model.input_bounds(),
        )
        .unwrap();
        let tr = model.rollout(&u).unwrap();
        let px: Vec<f64> = tr.samples().map(|y| y[0]).collect();
        assert_eq!(px, vec![0.0, 0.0, 1.0]);
        assert_eq!(tr.sample(0), &[0.0, 0.0, 1.0, 0.0]);
    }

    #[test]
    fn double_integrator_matrices() {
        let model = double_integrator(-1.0, 1.0);
        let Dynamics::Linear { a, b, c, d } = model.dynamics() else {
            panic!("expected LTI");
        };
        assert_eq!(a.row(0).iter().copied().collect::<Vec<_>>(), vec![1.0, 1.0, 0.0, 0.0]);
        let col: Vec<f64> = b.column(0).iter().copied().collect();
        assert_eq!(col, vec![0.0, 1.0, 0.0, 0.0]);
        let x = DVector::from_vec(vec![1.0, 2.0, 3.0, 4.0]);
        let u = DVector::from_vec(vec![5.0, 6.0]);
        let y = c * x + d * u;
        assert_eq!(y.as_slice(), &[1.0, 3.0, 5.0, 6.0]);
        assert_eq!(model.output_labels(), &["x1", "x3", "u1", "u2"]);
    }

    #[test]
    #[should_panic]
    fn double_integrator_rejects_empty_box() {
        double_integrator(1.0, 1.0);
    }

    #[test]
    fn controls_are_clamped() {
        let bounds = SearchBox::uniform(2, -1.0, 1.0).unwrap();
        let u = ControlSequence::new(vec![2.0, -3.0, 0.5, 0.0], &bounds).unwrap();
        assert_eq!(u.as_flat(), &[1.0, -1.0, 0.5, 0.0]);
        assert_eq!(u.steps(), 2);
        assert_eq!(u.step(1), &[0.5, 0.0]);
        assert!(ControlSequence::new(vec![1.0, 2.0, 3.0], &bounds).is_err());
        assert!(ControlSequence::new(vec![], &bounds).is_err());
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let model = double_integrator(-1.0, 1.0);
        let u = ControlSequence::new(vec![0.0; 3], &SearchBox::uniform(1, 0.0, 1.0).unwrap())
            .unwrap();
        assert!(matches!(
            model.rollout(&u),
            Err(SystemError::DimensionMismatch { .. })
        ));
        let bad = SystemModel::custom(
            2,
            |x, _| x.to_vec(),
            |x, _| x.to_vec(),
            vec![0.0],
            SearchBox::uniform(1, 0.0, 1.0).unwrap(),
        );
        assert!(bad.rollout_flat(&[0.0]).is_err());
    }

    #[test]
    fn objective_is_negated_robustness() {
        let model = passthrough(-10.0, 10.0);
        let spec = parse_formula("G[0,3] ((y0 > 3) and (not (y0 > 6)))", 1).unwrap();
        let good = ControlSequence::new(vec![4.0, 4.0, 5.0, 5.0, 7.0], model.input_bounds()).unwrap();
        let bad = ControlSequence::new(vec![4.0, 5.0, 6.0, 7.0, 7.0], model.input_bounds()).unwrap();
        assert_eq!(model.objective(&spec, &good).unwrap(), -1.0);
        assert_eq!(model.objective(&spec, &bad).unwrap(), 1.0);
        let short = ControlSequence::new(vec![4.0; 3], model.input_bounds()).unwrap();
        assert!(matches!(
            model.objective(&spec, &short),
            Err(SystemError::ControlTooShort { needed: 4, found: 3 })
        ));
    }

    #[test]
    fn satisfying_cost_implies_satisfaction() {
        let model = passthrough(0.0, 10.0);
        let spec = parse_formula("G[0,2] (y0 > 2)", 1).unwrap();
        let problem = SynthesisProblem::new(model.clone(), spec.clone()).unwrap();
        let rho_min = 0.5;
        for tape in [[3.0, 3.0, 3.0], [2.5, 9.0, 4.0], [1.0, 5.0, 5.0]] {
            let cost = problem.cost(&tape);
            if cost <= -rho_min {
                let tr = model.rollout(&problem.control(&tape).unwrap()).unwrap();
                assert!(eval_boolean(&spec, &tr, 0).unwrap());
            }
        }
    }

    #[test]
    fn problem_validation() {
        let spec = parse_formula("(y0 > 0)", 1).unwrap();
        let wrong_dim = parse_formula("(y1 > 0)", 2).unwrap();
        assert!(SynthesisProblem::new(passthrough(0.0, 1.0), wrong_dim).is_err());
        let p = SynthesisProblem::new(passthrough(0.0, 1.0), spec.always(0, 4)).unwrap();
        assert_eq!(p.steps(), 5);
        assert_eq!(p.dim(), 5);
    }
}
