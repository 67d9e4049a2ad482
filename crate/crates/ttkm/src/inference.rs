//! Gaussian posterior over one TT-core, the closed-form predictive
//! distribution, and coordinate-ascent variational updates for the noise and
//! weight precisions.
//!
//! ALS solves each core exactly given the others, so the core at which the
//! sweep terminates sits at the mode of the loss restricted to that core;
//! centering a Gaussian there with the inverse Hessian as covariance is the
//! Laplace approximation used throughout.

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::als::{SweepState, TrainConfig};
use crate::als::{self};
use crate::error::{Error, Result};
use crate::scalar::{real, Real};
use crate::tensor::TTWeights;

/// Parameters of a Gamma distribution in shape/rate form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaParams<T> {
    pub shape: T,
    pub rate: T,
}

impl<T: Real> GammaParams<T> {
    pub fn new(shape: T, rate: T) -> Result<Self> {
        if shape <= T::zero() || rate <= T::zero() {
            return Err(Error::InvalidConfig(
                "Gamma parameters must be strictly positive".into(),
            ));
        }
        Ok(Self { shape, rate })
    }

    /// `E[z] = a / b`.
    pub fn mean(&self) -> T {
        self.shape / self.rate
    }
}

/// Gamma factors for the noise precision (beta) and weight precision (gamma),
/// together with the priors they are updated from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrecisionPosterior<T> {
    pub noise: GammaParams<T>,
    pub weight: GammaParams<T>,
    pub noise_prior: GammaParams<T>,
    pub weight_prior: GammaParams<T>,
}

impl<T: Real> PrecisionPosterior<T> {
    /// Start from the priors themselves (before any variational update).
    pub fn from_priors(noise_prior: GammaParams<T>, weight_prior: GammaParams<T>) -> Self {
        Self {
            noise: noise_prior,
            weight: weight_prior,
            noise_prior,
            weight_prior,
        }
    }

    /// Degenerate representation of fixed hyperparameters: `E[beta] = beta`
    /// and `E[gamma] = gamma` exactly.
    pub fn fixed(beta: T, gamma: T) -> Result<Self> {
        let noise = GammaParams::new(beta, T::one())?;
        let weight = GammaParams::new(gamma, T::one())?;
        Ok(Self {
            noise,
            weight,
            noise_prior: noise,
            weight_prior: weight,
        })
    }

    pub fn expected_noise_precision(&self) -> T {
        self.noise.mean()
    }

    pub fn expected_weight_precision(&self) -> T {
        self.weight.mean()
    }
}

/// Gaussian posterior over the vectorized Bayesian core.
#[derive(Debug, Clone, PartialEq)]
pub struct CorePosterior<T> {
    /// Zero-based index of the Bayesian core.
    pub core_index: usize,
    /// Posterior mean; equals the ALS solution for that core.
    pub mean: DVector<T>,
    /// Posterior covariance `(beta A^T A + gamma I)^(-1)`.
    pub covariance: DMatrix<T>,
}

/// Dense or diagonal-only predictive covariance.
#[derive(Debug, Clone, PartialEq)]
pub enum PredictiveCovariance<T> {
    Full(DMatrix<T>),
    Diagonal(DVector<T>),
}

impl<T: Real> PredictiveCovariance<T> {
    /// Per-point predictive variances.
    pub fn diagonal(&self) -> DVector<T> {
        match self {
            PredictiveCovariance::Full(m) => m.diagonal(),
            PredictiveCovariance::Diagonal(v) => v.clone(),
        }
    }
}

/// Gaussian predictive distribution over test outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictiveDistribution<T> {
    pub mean: DVector<T>,
    pub covariance: PredictiveCovariance<T>,
}

impl<T: Real> PredictiveDistribution<T> {
    pub fn variances(&self) -> DVector<T> {
        self.covariance.diagonal()
    }
}

/// Evaluation mode for [`predictive_from_design`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PredictiveMode {
    Diagonal,
    Full,
}

/// Laplace posterior for the core behind the design matrix `a`:
/// mean `(A^T A + (gamma/beta) I)^(-1) A^T y`, covariance
/// `(beta A^T A + gamma I)^(-1)`.
pub fn laplace_from_design<T: Real>(
    a: &DMatrix<T>,
    targets: &DVector<T>,
    beta: T,
    gamma: T,
    core_index: usize,
) -> Result<CorePosterior<T>> {
    if beta <= T::zero() {
        return Err(Error::InvalidConfig("noise precision must be positive".into()));
    }
    if gamma < T::zero() {
        return Err(Error::InvalidConfig("weight precision must be nonnegative".into()));
    }
    let m = a.ncols();
    let gram = a.tr_mul(a);

    let mut mean_system = gram.clone();
    let reg = gamma / beta;
    for i in 0..m {
        mean_system[(i, i)] += reg;
    }
    let mean_chol = Cholesky::new(mean_system).ok_or(Error::NotPositiveDefinite)?;
    let mean = mean_chol.solve(&a.tr_mul(targets));

    let mut hessian = gram * beta;
    for i in 0..m {
        hessian[(i, i)] += gamma;
    }
    let covariance = Cholesky::new(hessian)
        .ok_or(Error::NotPositiveDefinite)?
        .inverse();

    Ok(CorePosterior {
        core_index,
        mean,
        covariance,
    })
}

/// Laplace posterior at the core the sweep terminated on.
pub fn laplace_posterior<T: Real>(
    state: &SweepState<'_, T>,
    targets: &DVector<T>,
    beta: T,
    gamma: T,
) -> Result<CorePosterior<T>> {
    let d = state.current_core();
    let a = state.design_matrix(d)?;
    laplace_from_design(&a, targets, beta, gamma, d)
}

/// Predictive distribution `N(A* mu, beta^(-1) I + A* C A*^T)` given the
/// test-input design matrix for the Bayesian core.
pub fn predictive_from_design<T: Real>(
    a_star: &DMatrix<T>,
    posterior: &CorePosterior<T>,
    noise_precision: T,
    mode: PredictiveMode,
) -> Result<PredictiveDistribution<T>> {
    if a_star.ncols() != posterior.mean.len() {
        return Err(Error::ShapeMismatch(format!(
            "design matrix has {} columns, posterior dimension is {}",
            a_star.ncols(),
            posterior.mean.len()
        )));
    }
    if noise_precision <= T::zero() {
        return Err(Error::InvalidConfig("noise precision must be positive".into()));
    }
    let mean = a_star * &posterior.mean;
    let noise_var = T::one() / noise_precision;
    let half_projected = a_star * &posterior.covariance;
    let covariance = match mode {
        PredictiveMode::Full => {
            let mut cov = &half_projected * &a_star.transpose();
            for i in 0..cov.nrows() {
                cov[(i, i)] += noise_var;
            }
            PredictiveCovariance::Full(cov)
        }
        PredictiveMode::Diagonal => {
            let m = a_star.nrows();
            let mut diag = DVector::from_element(m, noise_var);
            for i in 0..m {
                let mut acc = T::zero();
                for j in 0..a_star.ncols() {
                    acc += half_projected[(i, j)] * a_star[(i, j)];
                }
                diag[i] += acc;
            }
            PredictiveCovariance::Diagonal(diag)
        }
    };
    Ok(PredictiveDistribution { mean, covariance })
}

/// `E_v ||y - A v||^2 = ||y - A mu||^2 + trace(C A^T A)` under
/// `v ~ N(mu, C)`.
pub fn expected_residual_sq<T: Real>(
    a: &DMatrix<T>,
    posterior: &CorePosterior<T>,
    targets: &DVector<T>,
) -> T {
    let residual = targets - a * &posterior.mean;
    let gram = a.tr_mul(a);
    let mut trace = T::zero();
    for i in 0..gram.nrows() {
        for j in 0..gram.ncols() {
            trace += posterior.covariance[(i, j)] * gram[(j, i)];
        }
    }
    residual.norm_squared() + trace
}

/// `E ||v||^2` over all cores: deterministic cores enter by their squared
/// norm, the Bayesian core by `||mu||^2 + trace(C)`.
pub fn expected_weight_sq<T: Real>(weights: &TTWeights<T>, posterior: &CorePosterior<T>) -> T {
    let mut total = posterior.mean.norm_squared() + posterior.covariance.trace();
    for (d, core) in weights.cores().iter().enumerate() {
        if d != posterior.core_index {
            total += core.norm_squared();
        }
    }
    total
}

/// One coordinate-ascent update of both Gamma factors. Shape and rate are
/// computed from the priors each call, so repeated updates do not accumulate.
pub fn vi_update_precisions<T: Real>(
    precisions: &PrecisionPosterior<T>,
    num_samples: usize,
    num_weights: usize,
    expected_residual: T,
    expected_weight: T,
) -> Result<PrecisionPosterior<T>> {
    if expected_residual < T::zero() || expected_weight < T::zero() {
        return Err(Error::InvalidConfig(
            "expected squared norms must be nonnegative".into(),
        ));
    }
    let half = real::<T>(0.5);
    let noise = GammaParams::new(
        precisions.noise_prior.shape + half * real::<T>(num_samples as f64),
        precisions.noise_prior.rate + half * expected_residual,
    )?;
    let weight = GammaParams::new(
        precisions.weight_prior.shape + half * real::<T>(num_weights as f64),
        precisions.weight_prior.rate + half * expected_weight,
    )?;
    Ok(PrecisionPosterior {
        noise,
        weight,
        noise_prior: precisions.noise_prior,
        weight_prior: precisions.weight_prior,
    })
}

/// Settings for the outer variational loop.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ViConfig<T> {
    /// Maximum number of outer iterations.
    pub max_outer: usize,
    /// Early stop when both precision means move by less than this relative
    /// amount.
    pub rel_tol: T,
    pub noise_prior: GammaParams<T>,
    pub weight_prior: GammaParams<T>,
}

impl<T: Real> Default for ViConfig<T> {
    fn default() -> Self {
        let broad = GammaParams {
            shape: real(1e-6),
            rate: real(1e-6),
        };
        Self {
            max_outer: 10,
            rel_tol: real(1e-4),
            noise_prior: broad,
            weight_prior: broad,
        }
    }
}

/// Per-iteration record of the variational loop.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ViIteration<T> {
    /// `J(v)` at the precisions used for that iteration's sweep.
    pub objective: T,
    /// `E[beta]` after the iteration's precision update.
    pub expected_noise_precision: T,
    /// `E[gamma]` after the iteration's precision update.
    pub expected_weight_precision: T,
}

/// Output of [`fit_vi`].
#[derive(Debug, Clone)]
pub struct ViFit<T> {
    pub weights: TTWeights<T>,
    pub posterior: CorePosterior<T>,
    pub precisions: PrecisionPosterior<T>,
    pub trace: Vec<ViIteration<T>>,
}

/// Alternate ALS sweeps, the Laplace posterior at the Bayesian core, and
/// Gamma precision updates until the precision means stabilize.
///
/// The returned posterior is the one computed in the final iteration (at the
/// precisions used for that iteration); the returned precisions include that
/// iteration's update.
pub fn fit_vi<T: Real>(
    phis: &[DMatrix<T>],
    targets: &DVector<T>,
    train: &TrainConfig<T>,
    vi: &ViConfig<T>,
) -> Result<ViFit<T>> {
    train.validate()?;
    if vi.max_outer == 0 {
        return Err(Error::InvalidConfig("at least one outer iteration is required".into()));
    }
    let basis_count = phis
        .first()
        .map(DMatrix::ncols)
        .ok_or_else(|| Error::InvalidConfig("no feature matrices".into()))?;

    let mut weights = als::init_weights::<T>(&train.ranks, basis_count, train.init_seed)?;
    let num_weights = weights.num_parameters();
    let num_samples = targets.len();
    let mut precisions = PrecisionPosterior::from_priors(vi.noise_prior, vi.weight_prior);
    let mut trace = Vec::new();
    let mut posterior = None;

    for _ in 0..vi.max_outer {
        let beta = precisions.expected_noise_precision();
        let gamma = precisions.expected_weight_precision();
        let mut state = SweepState::new(weights, phis, gamma / beta)?;
        state.sweep(targets, train)?;

        let d = state.current_core();
        let a = state.design_matrix(d)?;
        let post = laplace_from_design(&a, targets, beta, gamma, d)?;
        let residual = expected_residual_sq(&a, &post, targets);
        let weight_sq = expected_weight_sq(state.weights(), &post);
        let objective = state.objective(targets, beta, gamma);
        weights = state.into_weights();

        let updated =
            vi_update_precisions(&precisions, num_samples, num_weights, residual, weight_sq)?;
        let new_beta = updated.expected_noise_precision();
        let new_gamma = updated.expected_weight_precision();
        if !new_beta.is_finite() || !new_gamma.is_finite() {
            return Err(Error::NonFinite("precision expectation".into()));
        }
        trace.push(ViIteration {
            objective,
            expected_noise_precision: new_beta,
            expected_weight_precision: new_gamma,
        });
        posterior = Some(post);
        let beta_moved = (new_beta - beta).abs() / new_beta;
        let gamma_moved = (new_gamma - gamma).abs() / new_gamma;
        precisions = updated;
        if beta_moved < vi.rel_tol && gamma_moved < vi.rel_tol {
            break;
        }
    }

    Ok(ViFit {
        weights,
        posterior: posterior.expect("at least one iteration ran"),
        precisions,
        trace,
    })
}
