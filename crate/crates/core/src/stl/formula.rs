use std::fmt;
use std::sync::Arc;

/// Closed integer window `[start, end]` of a temporal operator, in samples,
/// relative to the evaluation time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Interval {
    start: usize,
    end: usize,
}

impl Interval {
    /// Returns `None` when `start > end`.
    pub fn new(start: usize, end: usize) -> Option<Self> {
        (start <= end).then_some(Self { start, end })
    }

    pub fn start(&self) -> usize {
        self.start
    }

    pub fn end(&self) -> usize {
        self.end
    }
}

/// User-supplied predicate function `mu(y_t)`.
pub type PredicateFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// Atomic predicate `mu(y_t) >= offset`, evaluated on the current sample.
#[derive(Clone)]
pub enum Predicate {
    /// `coeffs . y_t >= offset`.
    Linear { coeffs: Vec<f64>, offset: f64 },
    /// Arbitrary (possibly nonlinear) function of the current sample.
    Custom {
        name: String,
        func: PredicateFn,
        offset: f64,
    },
}

impl Predicate {
    pub fn linear(coeffs: Vec<f64>, offset: f64) -> Self {
        Predicate::Linear { coeffs, offset }
    }

    pub fn custom(
        name: impl Into<String>,
        func: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
        offset: f64,
    ) -> Self {
        Predicate::Custom {
            name: name.into(),
            func: Arc::new(func),
            offset,
        }
    }

    pub fn offset(&self) -> f64 {
        match self {
            Predicate::Linear { offset, .. } | Predicate::Custom { offset, .. } => *offset,
        }
    }

    /// `mu(sample)`, without subtracting the offset.
    pub fn value(&self, sample: &[f64]) -> f64 {
        match self {
            Predicate::Linear { coeffs, .. } => {
                coeffs.iter().zip(sample).map(|(a, y)| a * y).sum()
            }
            Predicate::Custom { func, .. } => func(sample),
        }
    }

    /// Signed margin `mu(sample) - offset`.
    pub fn margin(&self, sample: &[f64]) -> f64 {
        let offset = self.offset();
        // The constant predicates carry an infinite offset and zero
        // coefficients; skip the product so that 0 * y never meets inf.
        if offset.is_infinite() {
            return -offset;
        }
        self.value(sample) - offset
    }

    /// Output dimension the predicate expects, if it is linear.
    pub fn dimension(&self) -> Option<usize> {
        match self {
            Predicate::Linear { coeffs, .. } => Some(coeffs.len()),
            Predicate::Custom { .. } => None,
        }
    }

    fn constant(&self) -> Option<bool> {
        match self {
            Predicate::Linear { coeffs, offset }
                if offset.is_infinite() && coeffs.iter().all(|&c| c == 0.0) =>
            {
                Some(*offset < 0.0)
            }
            _ => None,
        }
    }
}

impl PartialEq for Predicate {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (
                Predicate::Linear { coeffs, offset },
                Predicate::Linear {
                    coeffs: c2,
                    offset: o2,
                },
            ) => coeffs == c2 && offset == o2,
            (
                Predicate::Custom { name, func, offset },
                Predicate::Custom {
                    name: n2,
                    func: f2,
                    offset: o2,
                },
            ) => name == n2 && Arc::ptr_eq(func, f2) && offset == o2,
            _ => false,
        }
    }
}

impl fmt::Debug for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Predicate::Linear { coeffs, offset } => f
                .debug_struct("Linear")
                .field("coeffs", coeffs)
                .field("offset", offset)
                .finish(),
            Predicate::Custom { name, offset, .. } => f
                .debug_struct("Custom")
                .field("name", name)
                .field("offset", offset)
                .finish_non_exhaustive(),
        }
    }
}

/// Bounded STL formula.
#[derive(Debug, Clone, PartialEq)]
pub enum Formula {
    Predicate(Predicate),
    Not(Box<Formula>),
    And(Box<Formula>, Box<Formula>),
    Or(Box<Formula>, Box<Formula>),
    Until(Box<Formula>, Box<Formula>, Interval),
    Eventually(Box<Formula>, Interval),
    Always(Box<Formula>, Interval),
}

impl Formula {
    /// Linear predicate `coeffs . y_t >= offset`.
    pub fn pred(coeffs: Vec<f64>, offset: f64) -> Self {
        Formula::Predicate(Predicate::linear(coeffs, offset))
    }

    /// Constant true over `p`-dimensional outputs. Its robustness is `+inf`.
    pub fn truth(p: usize) -> Self {
        Formula::pred(vec![0.0; p], f64::NEG_INFINITY)
    }

    /// Constant false over `p`-dimensional outputs. Its robustness is `-inf`.
    pub fn falsity(p: usize) -> Self {
        Formula::pred(vec![0.0; p], f64::INFINITY)
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(self) -> Self {
        Formula::Not(Box::new(self))
    }

    pub fn and(self, rhs: Formula) -> Self {
        Formula::And(Box::new(self), Box::new(rhs))
    }

    pub fn or(self, rhs: Formula) -> Self {
        Formula::Or(Box::new(self), Box::new(rhs))
    }

    /// `self U[a,b] rhs`. Panics if `a > b`.
    pub fn until(self, rhs: Formula, a: usize, b: usize) -> Self {
        Formula::Until(Box::new(self), Box::new(rhs), interval(a, b))
    }

    /// `F[a,b] self`. Panics if `a > b`.
    pub fn eventually(self, a: usize, b: usize) -> Self {
        Formula::Eventually(Box::new(self), interval(a, b))
    }

    /// `G[a,b] self`. Panics if `a > b`.
    pub fn always(self, a: usize, b: usize) -> Self {
        Formula::Always(Box::new(self), interval(a, b))
    }

    /// Conjunction of a non-empty list, folded left.
    pub fn all(parts: impl IntoIterator<Item = Formula>) -> Option<Self> {
        parts.into_iter().reduce(Formula::and)
    }

    /// Disjunction of a non-empty list, folded left.
    pub fn any(parts: impl IntoIterator<Item = Formula>) -> Option<Self> {
        parts.into_iter().reduce(Formula::or)
    }

    /// Smallest `T` such that evaluating at time 0 reads only `y_0..=y_T`.
    pub fn horizon(&self) -> usize {
        match self {
            Formula::Predicate(_) => 0,
            Formula::Not(f) => f.horizon(),
            Formula::And(a, b) | Formula::Or(a, b) => a.horizon().max(b.horizon()),
            Formula::Until(a, b, iv) => iv.end + a.horizon().max(b.horizon()),
            Formula::Eventually(f, iv) | Formula::Always(f, iv) => iv.end + f.horizon(),
        }
    }

    /// Number of atomic predicates in the tree.
    pub fn predicate_count(&self) -> usize {
        match self {
            Formula::Predicate(_) => 1,
            Formula::Not(f) | Formula::Eventually(f, _) | Formula::Always(f, _) => {
                f.predicate_count()
            }
            Formula::And(a, b) | Formula::Or(a, b) | Formula::Until(a, b, _) => {
                a.predicate_count() + b.predicate_count()
            }
        }
    }

    /// Visits every predicate in the tree, left to right.
    pub fn for_each_predicate<'a>(&'a self, visit: &mut impl FnMut(&'a Predicate)) {
        match self {
            Formula::Predicate(p) => visit(p),
            Formula::Not(f) | Formula::Eventually(f, _) | Formula::Always(f, _) => {
                f.for_each_predicate(visit)
            }
            Formula::And(a, b) | Formula::Or(a, b) | Formula::Until(a, b, _) => {
                a.for_each_predicate(visit);
                b.for_each_predicate(visit);
            }
        }
    }
}

fn interval(a: usize, b: usize) -> Interval {
    Interval::new(a, b).unwrap_or_else(|| panic!("temporal interval [{a},{b}] has start > end"))
}

fn write_coeff(f: &mut fmt::Formatter<'_>, first: bool, coeff: f64, var: usize) -> fmt::Result {
    let (sign, mag) = if coeff < 0.0 { ("-", -coeff) } else { ("+", coeff) };
    match (first, sign) {
        (true, "+") => {}
        (true, _) => write!(f, "-")?,
        (false, s) => write!(f, " {s} ")?,
    }
    if mag == 1.0 {
        write!(f, "y{var}")
    } else {
        write!(f, "{mag:?}*y{var}")
    }
}

impl fmt::Display for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(c) = self.constant() {
            return write!(f, "{}", if c { "true" } else { "false" });
        }
        match self {
            Predicate::Linear { coeffs, offset } => {
                write!(f, "(")?;
                let mut first = true;
                for (i, &c) in coeffs.iter().enumerate() {
                    if c != 0.0 {
                        write_coeff(f, first, c, i)?;
                        first = false;
                    }
                }
                if first {
                    write!(f, "0")?;
                }
                write!(f, " > {offset:?})")
            }
            Predicate::Custom { name, offset, .. } => write!(f, "({name} > {offset:?})"),
        }
    }
}

/// Fully parenthesized text form accepted by [`crate::stl::parse_formula`]
/// (except for custom predicates, which print by name).
impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Formula::Predicate(p) => write!(f, "{p}"),
            Formula::Not(g) => write!(f, "(not {g})"),
            Formula::And(a, b) => write!(f, "({a} and {b})"),
            Formula::Or(a, b) => write!(f, "({a} or {b})"),
            Formula::Until(a, b, iv) => write!(f, "({a} U[{},{}] {b})", iv.start, iv.end),
            Formula::Eventually(g, iv) => write!(f, "(F[{},{}] {g})", iv.start, iv.end),
            Formula::Always(g, iv) => write!(f, "(G[{},{}] {g})", iv.start, iv.end),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pi() -> Formula {
        Formula::pred(vec![1.0], 0.0)
    }

    #[test]
    fn horizon_examples() {
        assert_eq!(pi().always(0, 3).horizon(), 3);
        assert_eq!(pi().horizon(), 0);
        assert_eq!(pi().eventually(0, 2).always(0, 3).horizon(), 5);
        assert_eq!(pi().until(pi().eventually(1, 4), 2, 3).horizon(), 7);
        assert_eq!(pi().and(pi().eventually(0, 6)).horizon(), 6);
    }

    #[test]
    fn interval_rejects_reversed_bounds() {
        assert!(Interval::new(3, 2).is_none());
        assert_eq!(Interval::new(2, 2).map(|i| (i.start(), i.end())), Some((2, 2)));
    }

    #[test]
    fn display_is_parenthesized() {
        let f = Formula::pred(vec![1.0, -2.5], 3.0)
            .and(Formula::pred(vec![0.0, 1.0], -1.0).not())
            .always(0, 4);
        assert_eq!(
            f.to_string(),
            "(G[0,4] ((y0 - 2.5*y1 > 3.0) and (not (y1 > -1.0))))"
        );
        assert_eq!(Formula::truth(2).to_string(), "true");
        assert_eq!(Formula::falsity(2).to_string(), "false");
    }

    #[test]
    fn counts_predicates() {
        let f = pi().and(pi().or(pi())).until(pi(), 0, 1);
        assert_eq!(f.predicate_count(), 4);
    }

    #[test]
    fn custom_predicates_compare_by_identity() {
        let p = Predicate::custom("norm", |y: &[f64]| y.iter().map(|v| v * v).sum(), 1.0);
        let q = p.clone();
        assert_eq!(p, q);
        let r = Predicate::custom("norm", |y: &[f64]| y.iter().map(|v| v * v).sum(), 1.0);
        assert_ne!(p, r);
        assert_eq!(p.margin(&[1.0, 2.0]), 4.0);
    }
}
