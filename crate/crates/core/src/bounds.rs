use rand::Rng;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BoundsError {
    #[error("lower and upper bounds have different lengths ({lower} vs {upper})")]
    LengthMismatch { lower: usize, upper: usize },
    #[error("bounds are empty")]
    Empty,
    #[error("coordinate {index}: lower bound {lower} exceeds upper bound {upper}")]
    Inverted { index: usize, lower: f64, upper: f64 },
    #[error("coordinate {index}: bounds must be finite")]
    NotFinite { index: usize },
}

/// Axis-aligned box `[lower_i, upper_i]` in `R^d`.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchBox {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl SearchBox {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self, BoundsError> {
        if lower.len() != upper.len() {
            return Err(BoundsError::LengthMismatch {
                lower: lower.len(),
                upper: upper.len(),
            });
        }
        if lower.is_empty() {
            return Err(BoundsError::Empty);
        }
        for (index, (&lo, &hi)) in lower.iter().zip(&upper).enumerate() {
            if !lo.is_finite() || !hi.is_finite() {
                return Err(BoundsError::NotFinite { index });
            }
            if lo > hi {
                return Err(BoundsError::Inverted {
                    index,
                    lower: lo,
                    upper: hi,
                });
            }
        }
        Ok(Self { lower, upper })
    }

    /// The same interval on every one of `dim` coordinates.
    pub fn uniform(dim: usize, lower: f64, upper: f64) -> Result<Self, BoundsError> {
        Self::new(vec![lower; dim], vec![upper; dim])
    }

    /// This box repeated `times` times, concatenated.
    pub fn repeat(&self, times: usize) -> Self {
        Self {
            lower: self.lower.repeat(times),
            upper: self.upper.repeat(times),
        }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn width(&self, i: usize) -> f64 {
        self.upper[i] - self.lower[i]
    }

    /// Euclidean length of the box diagonal.
    pub fn diagonal(&self) -> f64 {
        (0..self.dim())
            .map(|i| self.width(i).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    pub fn center(&self) -> Vec<f64> {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(lo, hi)| 0.5 * (lo + hi))
            .collect()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x
                .iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(v, (lo, hi))| *lo <= *v && *v <= *hi)
    }

    pub fn clamp(&self, x: &mut [f64]) {
        for (v, (lo, hi)) in x.iter_mut().zip(self.lower.iter().zip(&self.upper)) {
            *v = v.clamp(*lo, *hi);
        }
    }

    pub fn clamp_coord(&self, i: usize, v: f64) -> f64 {
        v.clamp(self.lower[i], self.upper[i])
    }

    /// `lower < v < upper` on coordinate `i`.
    pub fn interior_coord(&self, i: usize, v: f64) -> bool {
        self.lower[i] < v && v < self.upper[i]
    }

    /// Uniform sample from the open box, or the fixed value of a coordinate
    /// with zero width.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(&lo, &hi)| {
                if hi > lo {
                    loop {
                        let v = lo + (hi - lo) * rng.random::<f64>();
                        if lo < v && v < hi {
                            break v;
                        }
                    }
                } else {
                    lo
                }
            })
            .collect()
    }
}
