//! Reach-avoid specifications over a planar workspace: visit one of several
//! waypoint regions and a goal region within `T` steps, never enter an
//! obstacle, and keep every control input inside its bounds.

use serde::{Deserialize, Serialize};
use stlbo::{Formula, SystemModel};

use crate::SynthError;

/// Axis-aligned rectangle `[x0, x1] x [y0, y1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x: [f64; 2],
    pub y: [f64; 2],
}

impl Rect {
    pub fn new(x: [f64; 2], y: [f64; 2]) -> Self {
        Self { x, y }
    }

    pub fn center(&self) -> (f64, f64) {
        (0.5 * (self.x[0] + self.x[1]), 0.5 * (self.y[0] + self.y[1]))
    }

    pub fn contains(&self, px: f64, py: f64) -> bool {
        self.x[0] <= px && px <= self.x[1] && self.y[0] <= py && py <= self.y[1]
    }

    fn validate(&self, name: &str) -> Result<(), SynthError> {
        let ok = |[lo, hi]: [f64; 2]| lo.is_finite() && hi.is_finite() && lo < hi;
        if ok(self.x) && ok(self.y) {
            Ok(())
        } else {
            Err(SynthError::Config(format!("region {name} is empty or not finite: {self:?}")))
        }
    }

    /// Conjunction of the four half-planes; its robustness is the distance
    /// to the nearest edge (negative outside).
    pub fn inside(&self, p: usize, px: usize, py: usize) -> Formula {
        let axis = |idx: usize, sign: f64| {
            let mut c = vec![0.0; p];
            c[idx] = sign;
            c
        };
        Formula::all([
            Formula::pred(axis(px, 1.0), self.x[0]),
            Formula::pred(axis(px, -1.0), -self.x[1]),
            Formula::pred(axis(py, 1.0), self.y[0]),
            Formula::pred(axis(py, -1.0), -self.y[1]),
        ])
        .expect("four half-planes")
    }
}

fn default_position_outputs() -> [usize; 2] {
    [0, 1]
}

fn default_control_outputs() -> Vec<usize> {
    vec![2, 3]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReachAvoid {
    pub goal: Rect,
    #[serde(default)]
    pub waypoints: Vec<Rect>,
    #[serde(default)]
    pub obstacles: Vec<Rect>,
    /// Output coordinates holding the planar position.
    #[serde(default = "default_position_outputs")]
    pub position_outputs: [usize; 2],
    /// Output coordinates holding the control inputs, in input order; each
    /// is kept inside the matching input bound. Empty disables the term.
    #[serde(default = "default_control_outputs")]
    pub control_outputs: Vec<usize>,
    /// `[lo, hi]` per control output for the bounded-control term; defaults
    /// to the model's input bounds.
    #[serde(default)]
    pub control_limits: Option<Vec<[f64; 2]>>,
}

impl ReachAvoid {
    /// `F[0,T](wp_1 or ... or wp_k) and F[0,T] goal and G[0,T] not obs_i ...
    /// and G[0,T] (controls within bounds)`.
    pub fn formula(&self, model: &SystemModel, horizon: usize) -> Result<Formula, SynthError> {
        let p = model.output_dim();
        let [px, py] = self.position_outputs;
        if px >= p || py >= p {
            return Err(SynthError::Config(format!(
                "position outputs {:?} out of range for output dimension {p}",
                self.position_outputs
            )));
        }
        self.goal.validate("goal")?;
        for (i, w) in self.waypoints.iter().enumerate() {
            w.validate(&format!("waypoint {i}"))?;
        }
        for (i, o) in self.obstacles.iter().enumerate() {
            o.validate(&format!("obstacle {i}"))?;
        }
        let t = horizon;
        let mut terms = Vec::new();
        if let Some(reach_any) = Formula::any(self.waypoints.iter().map(|w| w.inside(p, px, py))) {
            terms.push(reach_any.eventually(0, t));
        }
        terms.push(self.goal.inside(p, px, py).eventually(0, t));
        for obs in &self.obstacles {
            terms.push(obs.inside(p, px, py).not().always(0, t));
        }
        if !self.control_outputs.is_empty() {
            let bounds = model.input_bounds();
            if self.control_outputs.len() > bounds.dim() {
                return Err(SynthError::Config(format!(
                    "{} control outputs but only {} inputs",
                    self.control_outputs.len(),
                    bounds.dim()
                )));
            }
            if let Some(cl) = &self.control_limits {
                if cl.len() != self.control_outputs.len() {
                    return Err(SynthError::Config(format!(
                        "{} control limits for {} control outputs",
                        cl.len(),
                        self.control_outputs.len()
                    )));
                }
                if let Some(bad) = cl.iter().find(|[lo, hi]| !(lo.is_finite() && hi.is_finite() && lo < hi)) {
                    return Err(SynthError::Config(format!("empty control limit {bad:?}")));
                }
            }
            let limit = |k: usize| match &self.control_limits {
                Some(cl) => cl[k],
                None => [bounds.lower()[k], bounds.upper()[k]],
            };
            let mut limits = Vec::new();
            for (k, &idx) in self.control_outputs.iter().enumerate() {
                if idx >= p {
                    return Err(SynthError::Config(format!(
                        "control output {idx} out of range for output dimension {p}"
                    )));
                }
                let mut up = vec![0.0; p];
                up[idx] = 1.0;
                let down: Vec<f64> = up.iter().map(|v| -v).collect();
                let [lo, hi] = limit(k);
                limits.push(Formula::pred(up, lo));
                limits.push(Formula::pred(down, -hi));
            }
            terms.push(Formula::all(limits).expect("non-empty").always(0, t));
        }
        Ok(Formula::all(terms).expect("goal term present"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use stlbo::{double_integrator, robustness, Trace};

    fn geometry() -> ReachAvoid {
        ReachAvoid {
            goal: Rect::new([7.0, 9.0], [7.0, 9.0]),
            waypoints: vec![Rect::new([1.0, 3.0], [6.0, 8.0]), Rect::new([6.0, 8.0], [1.0, 3.0])],
            obstacles: vec![Rect::new([4.0, 6.0], [4.0, 6.0])],
            position_outputs: [0, 1],
            control_outputs: vec![2, 3],
            control_limits: None,
        }
    }

    fn trace(points: &[(f64, f64)]) -> Trace {
        Trace::new(points.iter().map(|&(x, y)| vec![x, y, 0.0, 0.0]).collect()).unwrap()
    }

    #[test]
    fn inside_robustness_is_edge_distance() {
        let r = Rect::new([0.0, 2.0], [0.0, 4.0]);
        let f = r.inside(4, 0, 1);
        let rho = |x, y| robustness(&f, &trace(&[(x, y)]), 0).unwrap().value();
        assert_eq!(rho(1.0, 2.0), 1.0);
        assert!((rho(0.5, 3.9) - 0.1).abs() < 1e-12);
        assert_eq!(rho(-1.0, 2.0), -1.0);
        assert_eq!(rho(1.0, 7.0), -3.0);
    }

    #[test]
    fn formula_structure() {
        let model = double_integrator(-1.0, 1.0);
        let f = geometry().formula(&model, 10).unwrap();
        assert_eq!(f.horizon(), 10);
        // 2 waypoints + goal + obstacle: 4 predicates each, plus 4 control limits
        assert_eq!(f.predicate_count(), 20);
    }

    #[test]
    fn rejects_bad_geometry() {
        let model = double_integrator(-1.0, 1.0);
        let mut g = geometry();
        g.goal = Rect::new([3.0, 3.0], [0.0, 1.0]);
        assert!(g.formula(&model, 5).is_err());
        let mut g = geometry();
        g.position_outputs = [0, 7];
        assert!(g.formula(&model, 5).is_err());
        let mut g = geometry();
        g.control_outputs = vec![2, 3, 1];
        assert!(g.formula(&model, 5).is_err());
        let mut g = geometry();
        g.control_limits = Some(vec![[-1.0, 1.0]]);
        assert!(g.formula(&model, 5).is_err());
        let mut g = geometry();
        g.control_limits = Some(vec![[-1.0, 1.0], [1.0, 1.0]]);
        assert!(g.formula(&model, 5).is_err());
    }

    #[test]
    fn control_limits_override_input_bounds() {
        let model = double_integrator(-2.0, 2.0);
        let mut g = geometry();
        g.control_limits = Some(vec![[-1.0, 1.0], [-0.5, 0.5]]);
        let f = g.formula(&model, 0).unwrap();
        let mut limits = Vec::new();
        f.for_each_predicate(&mut |p| {
            if let stlbo::stl::Predicate::Linear { coeffs, offset } = p {
                if coeffs[2] != 0.0 || coeffs[3] != 0.0 {
                    limits.push(*offset);
                }
            }
        });
        assert_eq!(limits, vec![-1.0, -1.0, -0.5, -0.5]);
    }
}
