//! Gaussian-process regression with an isotropic Matérn-5/2 kernel.
//!
//! The covariance `K + (noise + jitter) I` is kept as a packed lower
//! Cholesky factor that grows by one row per observation. Costs are centered
//! by their running mean before fitting unless centering is disabled.

use thiserror::Error;

const JITTER_START: f64 = 1e-10;
const JITTER_MAX: f64 = 1e-4;
const SQRT5: f64 = 2.236_067_977_499_79;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GpError {
    #[error("invalid kernel parameter {name} = {value}")]
    InvalidKernel { name: &'static str, value: f64 },
    #[error("observation has dimension {found}, expected {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("observation is not finite")]
    NonFinite,
    #[error("covariance factorization failed even with jitter {jitter:e}")]
    Factorization { jitter: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelParams {
    pub signal_variance: f64,
    pub lengthscale: f64,
    /// Observation noise variance; may be zero.
    pub noise_variance: f64,
}

impl KernelParams {
    pub fn new(signal_variance: f64, lengthscale: f64, noise_variance: f64) -> Result<Self, GpError> {
        let positive = |name, value: f64| {
            if value > 0.0 && value.is_finite() {
                Ok(())
            } else {
                Err(GpError::InvalidKernel { name, value })
            }
        };
        positive("signal_variance", signal_variance)?;
        positive("lengthscale", lengthscale)?;
        if !(noise_variance >= 0.0 && noise_variance.is_finite()) {
            return Err(GpError::InvalidKernel {
                name: "noise_variance",
                value: noise_variance,
            });
        }
        Ok(Self {
            signal_variance,
            lengthscale,
            noise_variance,
        })
    }

    /// Unit signal variance, lengthscale `sqrt(dim)`, no noise.
    pub fn for_dimension(dim: usize) -> Self {
        Self {
            signal_variance: 1.0,
            lengthscale: (dim.max(1) as f64).sqrt(),
            noise_variance: 0.0,
        }
    }
}

/// Matérn kernel with smoothness 5/2.
pub fn matern52(x: &[f64], y: &[f64], params: &KernelParams) -> f64 {
    debug_assert_eq!(x.len(), y.len());
    let r2: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
    matern52_from_sq_dist(r2, params)
}

fn matern52_from_sq_dist(r2: f64, params: &KernelParams) -> f64 {
    let s = SQRT5 * r2.sqrt() / params.lengthscale;
    params.signal_variance * (1.0 + s + s * s / 3.0) * (-s).exp()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Posterior {
    pub mean: f64,
    pub variance: f64,
}

impl Posterior {
    pub fn std_dev(&self) -> f64 {
        self.variance.sqrt()
    }
}

/// Immutable snapshot of a fitted GP; [`GpState::update`] returns a new one.
#[derive(Debug, Clone)]
pub struct GpState {
    kernel: KernelParams,
    center: bool,
    dim: Option<usize>,
    inputs: Vec<Vec<f64>>,
    costs: Vec<f64>,
    /// Packed lower factor: row `i` holds `i + 1` entries starting at `i(i+1)/2`.
    chol: Vec<f64>,
    jitter: f64,
    offset: f64,
    alpha: Vec<f64>,
}

impl GpState {
    pub fn new(kernel: KernelParams) -> Self {
        Self {
            kernel,
            center: true,
            dim: None,
            inputs: Vec::new(),
            costs: Vec::new(),
            chol: Vec::new(),
            jitter: JITTER_START,
            offset: 0.0,
            alpha: Vec::new(),
        }
    }

    /// Disables centering: the prior mean is exactly zero.
    pub fn without_centering(mut self) -> Self {
        self.center = false;
        self
    }

    /// Fits from scratch on a batch of observations.
    pub fn fit(
        kernel: KernelParams,
        center: bool,
        inputs: Vec<Vec<f64>>,
        costs: Vec<f64>,
    ) -> Result<Self, GpError> {
        let mut state = Self::new(kernel);
        state.center = center;
        if inputs.len() != costs.len() {
            return Err(GpError::DimensionMismatch {
                expected: inputs.len(),
                found: costs.len(),
            });
        }
        for (x, &j) in inputs.iter().zip(&costs) {
            state.check_observation(x, j)?;
            state.dim.get_or_insert(x.len());
        }
        state.inputs = inputs;
        state.costs = costs;
        state.refactor(JITTER_START)?;
        Ok(state)
    }

    pub fn kernel(&self) -> &KernelParams {
        &self.kernel
    }

    pub fn is_centered(&self) -> bool {
        self.center
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    /// Side length of the factorized covariance matrix.
    pub fn factor_dim(&self) -> usize {
        // n(n+1)/2 packed entries
        ((((8 * self.chol.len() + 1) as f64).sqrt() as usize) - 1) / 2
    }

    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn input_dim(&self) -> Option<usize> {
        self.dim
    }

    pub fn inputs(&self) -> &[Vec<f64>] {
        &self.inputs
    }

    pub fn costs(&self) -> &[f64] {
        &self.costs
    }

    /// Constant prior mean currently in use (the running mean when centering).
    pub fn mean_offset(&self) -> f64 {
        self.offset
    }

    fn check_observation(&self, x: &[f64], j: f64) -> Result<(), GpError> {
        if !j.is_finite() || x.iter().any(|v| !v.is_finite()) {
            return Err(GpError::NonFinite);
        }
        if let Some(d) = self.dim {
            if d != x.len() {
                return Err(GpError::DimensionMismatch {
                    expected: d,
                    found: x.len(),
                });
            }
        }
        Ok(())
    }

    /// Adds one observation. The result matches [`GpState::fit`] on the
    /// enlarged data set.
    pub fn update(&self, x: &[f64], j: f64) -> Result<GpState, GpError> {
        self.check_observation(x, j)?;
        let mut next = self.clone();
        next.dim.get_or_insert(x.len());
        let n = self.len();
        let mut row: Vec<f64> = self.inputs.iter().map(|xi| self.k(xi, x)).collect();
        self.forward_solve(&mut row);
        let diag2 = self.kernel.signal_variance + self.kernel.noise_variance + self.jitter
            - row.iter().map(|v| v * v).sum::<f64>();
        next.inputs.push(x.to_vec());
        next.costs.push(j);
        if diag2 > 0.0 && diag2.is_finite() {
            next.chol.extend_from_slice(&row);
            next.chol.push(diag2.sqrt());
            debug_assert_eq!(next.factor_dim(), n + 1);
            next.refresh_weights();
        } else {
            next.refactor(self.jitter * 2.0)?;
        }
        Ok(next)
    }

    /// Posterior of the latent function at `x`. Empty state gives the prior.
    pub fn posterior(&self, x: &[f64]) -> Posterior {
        if self.is_empty() {
            return Posterior {
                mean: self.offset,
                variance: self.kernel.signal_variance,
            };
        }
        let mut kx: Vec<f64> = self.inputs.iter().map(|xi| self.k(xi, x)).collect();
        let mean = self.offset + kx.iter().zip(&self.alpha).map(|(a, b)| a * b).sum::<f64>();
        self.forward_solve(&mut kx);
        let explained: f64 = kx.iter().map(|v| v * v).sum();
        Posterior {
            mean,
            variance: (self.kernel.signal_variance - explained).max(0.0),
        }
    }

    /// Log marginal likelihood of the (centered) costs.
    pub fn log_marginal_likelihood(&self) -> f64 {
        let n = self.len();
        if n == 0 {
            return 0.0;
        }
        let fit: f64 = self
            .costs
            .iter()
            .zip(&self.alpha)
            .map(|(j, a)| (j - self.offset) * a)
            .sum();
        let log_det: f64 = (0..n).map(|i| self.l(i, i).ln()).sum();
        -0.5 * fit - log_det - 0.5 * n as f64 * (2.0 * std::f64::consts::PI).ln()
    }

    /// Refits on the same data with every `(signal_variance, lengthscale)`
    /// pair from the grids and keeps the one with the highest marginal
    /// likelihood. The current kernel is always a candidate.
    pub fn refit_hyperparameters(
        &self,
        signal_variances: &[f64],
        lengthscales: &[f64],
    ) -> Result<GpState, GpError> {
        let mut best = self.clone();
        let mut best_lml = self.log_marginal_likelihood();
        for &sv in signal_variances {
            for &ls in lengthscales {
                let kernel = KernelParams::new(sv, ls, self.kernel.noise_variance)?;
                if kernel == self.kernel {
                    continue;
                }
                let Ok(candidate) =
                    GpState::fit(kernel, self.center, self.inputs.clone(), self.costs.clone())
                else {
                    continue;
                };
                let lml = candidate.log_marginal_likelihood();
                if lml > best_lml {
                    best_lml = lml;
                    best = candidate;
                }
            }
        }
        Ok(best)
    }

    fn k(&self, a: &[f64], b: &[f64]) -> f64 {
        matern52(a, b, &self.kernel)
    }

    fn l(&self, i: usize, j: usize) -> f64 {
        self.chol[i * (i + 1) / 2 + j]
    }

    /// In place `v <- L^{-1} v`.
    fn forward_solve(&self, v: &mut [f64]) {
        for i in 0..v.len() {
            let base = i * (i + 1) / 2;
            let row = &self.chol[base..base + i];
            let s: f64 = row.iter().zip(&v[..i]).map(|(l, x)| l * x).sum();
            v[i] = (v[i] - s) / self.chol[base + i];
        }
    }

    /// In place `v <- L^{-T} v`.
    fn backward_solve(&self, v: &mut [f64]) {
        let n = v.len();
        for i in (0..n).rev() {
            let mut s = v[i];
            for (k, vk) in v.iter().enumerate().skip(i + 1) {
                s -= self.l(k, i) * vk;
            }
            v[i] = s / self.l(i, i);
        }
    }

    fn refresh_weights(&mut self) {
        let n = self.costs.len();
        self.offset = if self.center && n > 0 {
            self.costs.iter().sum::<f64>() / n as f64
        } else {
            0.0
        };
        let mut alpha: Vec<f64> = self.costs.iter().map(|j| j - self.offset).collect();
        self.forward_solve(&mut alpha);
        self.backward_solve(&mut alpha);
        self.alpha = alpha;
    }

    /// Full Cholesky of `K + (noise + jitter) I`, doubling the jitter from
    /// `start` until it succeeds or passes the ceiling.
    fn refactor(&mut self, start: f64) -> Result<(), GpError> {
        let n = self.inputs.len();
        let mut jitter = start.max(JITTER_START);
        loop {
            if let Some(chol) = self.cholesky(jitter) {
                self.chol = chol;
                self.jitter = jitter;
                self.refresh_weights();
                debug_assert_eq!(self.factor_dim(), n);
                return Ok(());
            }
            if jitter >= JITTER_MAX {
                return Err(GpError::Factorization { jitter });
            }
            jitter = (jitter * 2.0).min(JITTER_MAX);
        }
    }

    fn cholesky(&self, jitter: f64) -> Option<Vec<f64>> {
        let n = self.inputs.len();
        let mut chol = vec![0.0; n * (n + 1) / 2];
        let diag = self.kernel.signal_variance + self.kernel.noise_variance + jitter;
        for i in 0..n {
            let bi = i * (i + 1) / 2;
            for j in 0..=i {
                let bj = j * (j + 1) / 2;
                let kij = if i == j {
                    diag
                } else {
                    self.k(&self.inputs[i], &self.inputs[j])
                };
                let s: f64 = (0..j).map(|k| chol[bi + k] * chol[bj + k]).sum();
                if i == j {
                    let d2 = kij - s;
                    if !(d2 > 0.0 && d2.is_finite()) {
                        return None;
                    }
                    chol[bi + i] = d2.sqrt();
                } else {
                    chol[bi + j] = (kij - s) / chol[bj + j];
                }
            }
        }
        Some(chol)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit() -> KernelParams {
        KernelParams::new(1.0, 1.0, 0.0).unwrap()
    }

    #[test]
    fn kernel_basics() {
        let p = KernelParams::new(2.5, 0.7, 0.0).unwrap();
        assert_eq!(matern52(&[0.3, -1.0], &[0.3, -1.0], &p), 2.5);
        let a = [0.1, 0.2, -0.4];
        let b = [1.0, -0.5, 0.25];
        assert_eq!(matern52(&a, &b, &p), matern52(&b, &a, &p));
    }

    #[test]
    fn kernel_params_validation() {
        assert!(KernelParams::new(0.0, 1.0, 0.0).is_err());
        assert!(KernelParams::new(1.0, -1.0, 0.0).is_err());
        assert!(KernelParams::new(1.0, 1.0, -1e-3).is_err());
        assert!(KernelParams::new(1.0, f64::NAN, 0.0).is_err());
        let d = KernelParams::for_dimension(16);
        assert_eq!((d.signal_variance, d.lengthscale), (1.0, 4.0));
    }

    #[test]
    fn empty_state_is_prior() {
        let gp = GpState::new(KernelParams::new(3.0, 1.0, 0.0).unwrap());
        let post = gp.posterior(&[0.4, 0.2]);
        assert_eq!((post.mean, post.variance), (0.0, 3.0));
        assert_eq!(gp.factor_dim(), 0);
    }

    #[test]
    fn interpolates_single_point() {
        for center in [true, false] {
            let mut gp = GpState::new(unit());
            if !center {
                gp = gp.without_centering();
            }
            let gp = gp.update(&[0.5], -1.25).unwrap();
            let post = gp.posterior(&[0.5]);
            assert!((post.mean + 1.25).abs() < 1e-6);
            assert!(post.variance <= 1e-4);
        }
    }

    #[test]
    fn duplicate_observation_changes_nothing() {
        // with centering the running mean itself moves, so compare uncentered
        let gp = GpState::new(unit())
            .without_centering()
            .update(&[0.0, 0.0], 1.0)
            .unwrap()
            .update(&[1.0, 0.5], -0.5)
            .unwrap();
        let dup = gp.update(&[1.0, 0.5], -0.5).unwrap();
        for q in [[0.2, 0.1], [1.0, 0.5], [2.0, -1.0]] {
            let (a, b) = (gp.posterior(&q), dup.posterior(&q));
            assert!((a.mean - b.mean).abs() < 1e-6);
            assert!((a.variance - b.variance).abs() < 1e-6);
        }
    }

    #[test]
    fn far_queries_revert_to_prior() {
        let gp = GpState::new(unit())
            .without_centering()
            .update(&[0.0], 2.0)
            .unwrap()
            .update(&[0.3], 1.0)
            .unwrap();
        let post = gp.posterior(&[100.0]);
        assert!(post.mean.abs() < 1e-6);
        assert!((post.variance - 1.0).abs() < 1e-6);
    }

    #[test]
    fn two_point_closed_form() {
        let k = KernelParams::new(1.5, 0.8, 0.01).unwrap();
        let (x1, x2, q) = ([0.0], [0.6], [0.25]);
        let (j1, j2) = (0.7, -0.4);
        let gp = GpState::new(k)
            .without_centering()
            .update(&x1, j1)
            .unwrap()
            .update(&x2, j2)
            .unwrap();
        // hand inverse of [[a, b], [b, c]]
        let d = k.signal_variance + k.noise_variance + gp.jitter();
        let b = matern52(&x1, &x2, &k);
        let det = d * d - b * b;
        let inv = [[d / det, -b / det], [-b / det, d / det]];
        let kq = [matern52(&q, &x1, &k), matern52(&q, &x2, &k)];
        let w = [
            inv[0][0] * kq[0] + inv[0][1] * kq[1],
            inv[1][0] * kq[0] + inv[1][1] * kq[1],
        ];
        let mean = w[0] * j1 + w[1] * j2;
        let var = k.signal_variance - (w[0] * kq[0] + w[1] * kq[1]);
        let post = gp.posterior(&q);
        assert!((post.mean - mean).abs() < 1e-12);
        assert!((post.variance - var).abs() < 1e-12);
    }

    #[test]
    fn incremental_matches_refit() {
        let k = KernelParams::new(1.0, 0.9, 1e-6).unwrap();
        let xs: Vec<Vec<f64>> = (0..25)
            .map(|i| {
                let t = i as f64;
                vec![(t * 0.37).sin(), (t * 0.91).cos(), (t * 0.13).fract()]
            })
            .collect();
        let js: Vec<f64> = xs.iter().map(|x| x[0] * x[1] - x[2]).collect();
        let mut gp = GpState::new(k);
        for (x, &j) in xs.iter().zip(&js) {
            gp = gp.update(x, j).unwrap();
        }
        let full = GpState::fit(k, true, xs, js).unwrap();
        assert_eq!(gp.factor_dim(), 25);
        for q in [[0.1, 0.2, 0.3], [-0.5, 0.9, 0.0], [2.0, 2.0, 2.0]] {
            let (a, b) = (gp.posterior(&q), full.posterior(&q));
            assert!((a.mean - b.mean).abs() < 1e-10);
            assert!((a.variance - b.variance).abs() < 1e-10);
        }
    }

    #[test]
    fn rejects_bad_observations() {
        let gp = GpState::new(unit()).update(&[0.0, 1.0], 0.0).unwrap();
        assert_eq!(gp.update(&[0.0, 1.0], f64::NAN).unwrap_err(), GpError::NonFinite);
        assert_eq!(gp.update(&[0.0, f64::INFINITY], 1.0).unwrap_err(), GpError::NonFinite);
        assert!(matches!(
            gp.update(&[0.0], 1.0),
            Err(GpError::DimensionMismatch {
                expected: 2,
                found: 1
            })
        ));
    }

    #[test]
    fn hyperparameter_refit_does_not_lower_likelihood() {
        let xs: Vec<Vec<f64>> = (0..12).map(|i| vec![i as f64 / 11.0]).collect();
        let js: Vec<f64> = xs.iter().map(|x| (6.0 * x[0]).sin()).collect();
        let gp = GpState::fit(unit(), true, xs, js).unwrap();
        let refit = gp
            .refit_hyperparameters(&[0.25, 1.0, 4.0], &[0.05, 0.2, 1.0, 5.0])
            .unwrap();
        assert!(refit.log_marginal_likelihood() >= gp.log_marginal_likelihood());
        assert_eq!(refit.len(), 12);
    }
}
