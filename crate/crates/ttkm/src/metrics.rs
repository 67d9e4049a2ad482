//! Shared evaluation metrics. Both the TT model and the GP baseline report
//! through these functions.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::scalar::{real, Real};

/// Average Gaussian negative log-likelihood:
/// `(1/M) sum_m [ 0.5 ln(2 pi v_m) + (y_m - mu_m)^2 / (2 v_m) ]`.
pub fn nll<T: Real>(targets: &DVector<T>, means: &DVector<T>, variances: &DVector<T>) -> Result<T> {
    let m = targets.len();
    if means.len() != m || variances.len() != m {
        return Err(Error::ShapeMismatch(format!(
            "metric inputs differ in length: {} targets, {} means, {} variances",
            m,
            means.len(),
            variances.len()
        )));
    }
    if m == 0 {
        return Err(Error::InvalidConfig("cannot score zero points".into()));
    }
    let half = real::<T>(0.5);
    let two_pi = T::two_pi();
    let mut total = T::zero();
    for i in 0..m {
        let v = variances[i];
        if v <= T::zero() {
            return Err(Error::NonPositiveVariance {
                index: i,
                value: v.to_f64().unwrap_or(f64::NAN),
            });
        }
        let r = targets[i] - means[i];
        total += half * (two_pi * v).ln() + r * r / (real::<T>(2.0) * v);
    }
    Ok(total / real::<T>(m as f64))
}

/// Root mean squared error.
pub fn rmse<T: Real>(targets: &DVector<T>, means: &DVector<T>) -> Result<T> {
    if targets.len() != means.len() || targets.is_empty() {
        return Err(Error::ShapeMismatch(format!(
            "metric inputs differ in length: {} targets, {} means",
            targets.len(),
            means.len()
        )));
    }
    let mse = (targets - means).norm_squared() / real::<T>(targets.len() as f64);
    Ok(mse.sqrt())
}
