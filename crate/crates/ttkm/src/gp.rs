//! Exact Gaussian-process regression baseline with a squared-exponential
//! kernel, used by the comparison experiments.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};
use crate::inference::{PredictiveCovariance, PredictiveDistribution};
use crate::metrics;
use crate::scalar::{real, Real};

/// Squared-exponential kernel hyperparameters plus the noise precision.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GpConfig<T> {
    pub signal_variance: T,
    pub lengthscale: T,
    pub noise_precision: T,
}

impl<T: Real> GpConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if self.signal_variance <= T::zero()
            || self.lengthscale <= T::zero()
            || self.noise_precision <= T::zero()
        {
            return Err(Error::InvalidConfig(
                "GP hyperparameters must be strictly positive".into(),
            ));
        }
        Ok(())
    }
}

/// `k(x, x') = sigma_f^2 exp(-||x - x'||^2 / (2 l^2))`.
fn kernel<T: Real>(config: &GpConfig<T>, a: &DMatrix<T>, i: usize, b: &DMatrix<T>, j: usize) -> T {
    let mut sq = T::zero();
    for d in 0..a.ncols() {
        let diff = a[(i, d)] - b[(j, d)];
        sq += diff * diff;
    }
    let half = real::<T>(0.5);
    config.signal_variance * (-half * sq / (config.lengthscale * config.lengthscale)).exp()
}

/// Fitted GP: a Cholesky factor of `K + beta^(-1) I` and the solved weights.
#[derive(Debug, Clone)]
pub struct GpFit<T: Real> {
    config: GpConfig<T>,
    train_inputs: DMatrix<T>,
    chol: Cholesky<T, Dyn>,
    weights: DVector<T>,
}

/// Factorize `K + beta^(-1) I` and solve against the targets. On a failed
/// factorization the diagonal jitter escalates through `1e-10`, `1e-8`,
/// `1e-6` before giving up.
pub fn gp_fit<T: Real>(
    inputs: &DMatrix<T>,
    targets: &DVector<T>,
    config: GpConfig<T>,
) -> Result<GpFit<T>> {
    config.validate()?;
    let n = inputs.nrows();
    if n == 0 || n != targets.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} input rows vs {} targets",
            n,
            targets.len()
        )));
    }
    let noise_var = T::one() / config.noise_precision;
    let mut gram = DMatrix::from_fn(n, n, |i, j| kernel(&config, inputs, i, inputs, j));
    for i in 0..n {
        gram[(i, i)] += noise_var;
    }
    let mut chol = Cholesky::new(gram.clone());
    for jitter in [1e-10, 1e-8, 1e-6] {
        if chol.is_some() {
            break;
        }
        let mut bumped = gram.clone();
        for i in 0..n {
            bumped[(i, i)] += real::<T>(jitter);
        }
        chol = Cholesky::new(bumped);
    }
    let chol = chol.ok_or(Error::NotPositiveDefinite)?;
    let weights = chol.solve(targets);
    Ok(GpFit {
        config,
        train_inputs: inputs.clone(),
        chol,
        weights,
    })
}

/// Per-point GP prediction: latent mean/variance plus the observation noise
/// level.
#[derive(Debug, Clone, PartialEq)]
pub struct GpPrediction<T> {
    pub mean: DVector<T>,
    /// `k** - k*^T [K + beta^(-1) I]^(-1) k*`, clamped at zero.
    pub latent_variance: DVector<T>,
    /// `beta^(-1)`.
    pub noise_variance: T,
}

impl<T: Real> GpPrediction<T> {
    /// Predictive variance for observations: latent variance plus noise.
    pub fn observation_variance(&self) -> DVector<T> {
        self.latent_variance.map(|v| v + self.noise_variance)
    }

    /// Predictive distribution at the observation level (noise included),
    /// matching the TT model's predictive output.
    pub fn predictive(&self) -> PredictiveDistribution<T> {
        PredictiveDistribution {
            mean: self.mean.clone(),
            covariance: PredictiveCovariance::Diagonal(self.observation_variance()),
        }
    }
}

impl<T: Real> GpFit<T> {
    pub fn config(&self) -> &GpConfig<T> {
        &self.config
    }

    /// Predictive mean and variance at the test inputs.
    pub fn predict(&self, inputs: &DMatrix<T>) -> Result<GpPrediction<T>> {
        if inputs.ncols() != self.train_inputs.ncols() {
            return Err(Error::ShapeMismatch(format!(
                "{} input columns vs {} at fit time",
                inputs.ncols(),
                self.train_inputs.ncols()
            )));
        }
        let n = self.train_inputs.nrows();
        let m = inputs.nrows();
        let cross = DMatrix::from_fn(n, m, |i, j| {
            kernel(&self.config, &self.train_inputs, i, inputs, j)
        });
        let mean = cross.tr_mul(&self.weights);
        let solved = self.chol.solve(&cross);
        let mut latent = DVector::zeros(m);
        for j in 0..m {
            let prior = kernel(&self.config, inputs, j, inputs, j);
            let mut reduction = T::zero();
            for i in 0..n {
                reduction += cross[(i, j)] * solved[(i, j)];
            }
            let mut v = prior - reduction;
            if v < T::zero() {
                if v > real::<T>(-1e-10) {
                    eprintln!(
                        "warning: clamping round-off negative GP variance {:?} to zero",
                        v.to_f64()
                    );
                } else {
                    eprintln!(
                        "warning: clamping substantially negative GP variance {:?} to zero",
                        v.to_f64()
                    );
                }
                v = T::zero();
            }
            latent[j] = v;
        }
        Ok(GpPrediction {
            mean,
            latent_variance: latent,
            noise_variance: T::one() / self.config.noise_precision,
        })
    }
}

/// Pick the grid entry maximizing held-out log likelihood on an internal
/// 80/20 split of the provided data. Ties (and duplicates) resolve to the
/// earliest grid entry.
pub fn gp_select_hypers<T: Real>(
    inputs: &DMatrix<T>,
    targets: &DVector<T>,
    grid: &[GpConfig<T>],
    seed: u64,
) -> Result<GpConfig<T>> {
    if grid.is_empty() {
        return Err(Error::InvalidConfig("hyperparameter grid is empty".into()));
    }
    let (fit_idx, holdout_idx) = crate::data::split_indices(inputs.nrows(), 0.2, seed)?;
    if holdout_idx.is_empty() {
        return Err(Error::InvalidConfig("not enough rows for an internal holdout".into()));
    }
    let take = |rows: &[usize]| {
        let x = DMatrix::from_fn(rows.len(), inputs.ncols(), |i, j| inputs[(rows[i], j)]);
        let y = DVector::from_fn(rows.len(), |i, _| targets[rows[i]]);
        (x, y)
    };
    let (x_fit, y_fit) = take(&fit_idx);
    let (x_hold, y_hold) = take(&holdout_idx);

    let mut best: Option<(T, GpConfig<T>)> = None;
    for candidate in grid {
        let fitted = gp_fit(&x_fit, &y_fit, *candidate)?;
        let pred = fitted.predict(&x_hold)?;
        let nll = metrics::nll(&y_hold, &pred.mean, &pred.observation_variance())?;
        let log_lik = -nll * real::<T>(y_hold.len() as f64);
        let better = match &best {
            None => true,
            Some((incumbent, _)) => log_lik > *incumbent,
        };
        if better {
            best = Some((log_lik, *candidate));
        }
    }
    Ok(best.expect("nonempty grid").1)
}
