use super::StlError;

/// Finite output signal `y_0..=y_T`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    dim: usize,
    data: Vec<f64>,
}

impl Trace {
    /// Builds a trace from per-step samples. All samples must share one
    /// non-zero dimension and there must be at least one sample.
    pub fn new(samples: Vec<Vec<f64>>) -> Result<Self, StlError> {
        let dim = samples.first().map(Vec::len).ok_or(StlError::EmptyTrace)?;
        if dim == 0 {
            return Err(StlError::EmptyTrace);
        }
        let mut data = Vec::with_capacity(dim * samples.len());
        for (t, s) in samples.into_iter().enumerate() {
            if s.len() != dim {
                return Err(StlError::RaggedTrace {
                    step: t,
                    expected: dim,
                    found: s.len(),
                });
            }
            data.extend(s);
        }
        Ok(Self { dim, data })
    }

    /// Builds a trace from a flat row-major buffer of `len * dim` values.
    pub fn from_flat(dim: usize, data: Vec<f64>) -> Result<Self, StlError> {
        if dim == 0 || data.is_empty() {
            return Err(StlError::EmptyTrace);
        }
        if data.len() % dim != 0 {
            return Err(StlError::RaggedTrace {
                step: data.len() / dim,
                expected: dim,
                found: data.len() % dim,
            });
        }
        Ok(Self { dim, data })
    }

    /// Scalar signal, one value per step.
    pub fn scalar(values: &[f64]) -> Result<Self, StlError> {
        Self::from_flat(1, values.to_vec())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn sample(&self, t: usize) -> &[f64] {
        &self.data[t * self.dim..(t + 1) * self.dim]
    }

    pub fn samples(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim)
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.data
    }
}
