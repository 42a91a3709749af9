//! Boolean and quantitative (robustness) semantics over finite traces.
//!
//! Temporal windows are relative to the evaluation time: `F[a,b] f` at time
//! `t` looks at `t' in [t+a, t+b]`. Until requires the left operand on every
//! step of `[t, t']`, inclusive on both ends, in both semantics.

use std::fmt;

use super::{Formula, StlError, Trace};

/// Robustness degree of a formula on a trace at some time.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Robustness(pub f64);

impl Robustness {
    pub fn value(self) -> f64 {
        self.0
    }

    /// Strictly positive robustness implies Boolean satisfaction.
    pub fn is_positive(self) -> bool {
        self.0 > 0.0
    }
}

impl fmt::Display for Robustness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// Checks that `f` can be evaluated on `tr` at time `t`.
pub fn check_evaluable(f: &Formula, tr: &Trace, t: usize) -> Result<(), StlError> {
    let mut mismatch = None;
    f.for_each_predicate(&mut |p| {
        if let Some(d) = p.dimension() {
            if d != tr.dim() && mismatch.is_none() {
                mismatch = Some(d);
            }
        }
    });
    if let Some(found) = mismatch {
        return Err(StlError::DimensionMismatch {
            expected: tr.dim(),
            found,
        });
    }
    let needed = t + f.horizon() + 1;
    if needed > tr.len() {
        return Err(StlError::TraceTooShort {
            needed,
            len: tr.len(),
        });
    }
    Ok(())
}

/// Boolean satisfaction `tr |=_t f`. Predicates hold when `mu(y_t) >= c`.
pub fn eval_boolean(f: &Formula, tr: &Trace, t: usize) -> Result<bool, StlError> {
    check_evaluable(f, tr, t)?;
    Ok(sat(f, tr, t))
}

/// Robustness degree `rho(f, tr, t)`.
pub fn robustness(f: &Formula, tr: &Trace, t: usize) -> Result<Robustness, StlError> {
    check_evaluable(f, tr, t)?;
    Ok(Robustness(rho(f, tr, t)))
}

fn sat(f: &Formula, tr: &Trace, t: usize) -> bool {
    match f {
        Formula::Predicate(p) => p.margin(tr.sample(t)) >= 0.0,
        Formula::Not(g) => !sat(g, tr, t),
        Formula::And(a, b) => sat(a, tr, t) && sat(b, tr, t),
        Formula::Or(a, b) => sat(a, tr, t) || sat(b, tr, t),
        Formula::Until(a, b, iv) => {
            let (lo, hi) = (t + iv.start(), t + iv.end());
            // Left operand must hold on [t, t'] for the witness t'.
            for s in t..=hi {
                if !sat(a, tr, s) {
                    return false;
                }
                if s >= lo && sat(b, tr, s) {
                    return true;
                }
            }
            false
        }
        Formula::Eventually(g, iv) => (t + iv.start()..=t + iv.end()).any(|s| sat(g, tr, s)),
        Formula::Always(g, iv) => (t + iv.start()..=t + iv.end()).all(|s| sat(g, tr, s)),
    }
}

fn rho(f: &Formula, tr: &Trace, t: usize) -> f64 {
    match f {
        Formula::Predicate(p) => p.margin(tr.sample(t)),
        Formula::Not(g) => -rho(g, tr, t),
        Formula::And(a, b) => rho(a, tr, t).min(rho(b, tr, t)),
        Formula::Or(a, b) => rho(a, tr, t).max(rho(b, tr, t)),
        Formula::Until(a, b, iv) => {
            let (lo, hi) = (t + iv.start(), t + iv.end());
            let mut left_min = f64::INFINITY;
            let mut best = f64::NEG_INFINITY;
            for s in t..=hi {
                left_min = left_min.min(rho(a, tr, s));
                if s >= lo {
                    best = best.max(rho(b, tr, s).min(left_min));
                }
            }
            best
        }
        Formula::Eventually(g, iv) => (t + iv.start()..=t + iv.end())
            .map(|s| rho(g, tr, s))
            .fold(f64::NEG_INFINITY, f64::max),
        Formula::Always(g, iv) => (t + iv.start()..=t + iv.end())
            .map(|s| rho(g, tr, s))
            .fold(f64::INFINITY, f64::min),
    }
}
