//! Tensor-train kernel machines.
//!
//! A regression model `f(x) = phi(x)^T g(v)` whose weights are a tensor
//! train contracted against tensor-product features, trained by alternating
//! least squares. One chosen TT-core receives a Gaussian posterior via the
//! Laplace approximation, precision hyperparameters get conjugate Gamma
//! factors updated by coordinate-ascent variational inference, and an exact
//! Gaussian-process baseline is included for comparison experiments.
//!
//! All numerics are generic over the scalar type (see [`Real`]); `f64`
//! aliases for the main types live at the crate root.

pub mod als;
pub mod data;
pub mod error;
pub mod features;
pub mod inference;
pub mod scalar;
pub mod tensor;

pub use error::{Error, Result};
pub use scalar::Real;

/// `f64` tensor-train weights.
pub type TTWeights64 = tensor::TTWeights<f64>;
/// `f64` TT-core.
pub type TTCore64 = tensor::TTCore<f64>;
/// `f64` feature map.
pub type FeatureMap64 = features::FeatureMap<f64>;
/// `f64` dataset.
pub type Dataset64 = data::Dataset<f64>;
/// `f64` standardizer.
pub type Standardizer64 = data::Standardizer<f64>;
/// `f64` train configuration.
pub type TrainConfig64 = als::TrainConfig<f64>;
/// `f64` core posterior.
pub type CorePosterior64 = inference::CorePosterior<f64>;
/// `f64` precision posterior.
pub type PrecisionPosterior64 = inference::PrecisionPosterior<f64>;
