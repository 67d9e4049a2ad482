//! Per-dimension feature matrices realizing the tensor-product feature map.
//!
//! Two basis families are supported, both fitted on training data only:
//! * unit-norm polynomial: inputs are affinely mapped to `[-1, 1]` and the
//!   monomial columns rescaled so each has unit root-mean-square on the
//!   training split,
//! * Fourier: constant plus cosine/sine pairs of increasing harmonic over
//!   the training range of each column.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::scalar::{real, Real};
use crate::tensor::{self, kron};

/// Basis family for the per-dimension feature maps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureFamily {
    /// Monomials of the rescaled input, normalized to unit RMS per column.
    Polynomial,
    /// Constant, then cos/sin pairs with period equal to the training range.
    Fourier,
}

impl FeatureFamily {
    pub fn name(&self) -> &'static str {
        match self {
            FeatureFamily::Polynomial => "polynomial",
            FeatureFamily::Fourier => "fourier",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "polynomial" => Ok(FeatureFamily::Polynomial),
            "fourier" => Ok(FeatureFamily::Fourier),
            other => Err(Error::InvalidConfig(format!(
                "unknown feature family \"{other}\" (expected \"polynomial\" or \"fourier\")"
            ))),
        }
    }
}

/// Fitted feature map over all input dimensions; the basis count is uniform
/// across dimensions by construction.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap<T> {
    family: FeatureFamily,
    basis_count: usize,
    /// Per-dimension training bounds `[a_d, b_d]`.
    bounds: Vec<(T, T)>,
    /// Per-dimension, per-basis normalization constants (polynomial only).
    norms: Vec<Vec<T>>,
}

impl<T: Real> FeatureMap<T> {
    /// Fit bounds (and polynomial normalization constants) on the training
    /// inputs.
    pub fn fit(train_inputs: &DMatrix<T>, family: FeatureFamily, basis_count: usize) -> Result<Self> {
        if basis_count == 0 {
            return Err(Error::InvalidConfig("basis count must be positive".into()));
        }
        if train_inputs.nrows() == 0 || train_inputs.ncols() == 0 {
            return Err(Error::InvalidConfig("training inputs must be nonempty".into()));
        }
        let n = train_inputs.nrows();
        let dims = train_inputs.ncols();
        let mut bounds = Vec::with_capacity(dims);
        for d in 0..dims {
            let col = train_inputs.column(d);
            let mut lo = col[0];
            let mut hi = col[0];
            for &v in col.iter() {
                lo = lo.min(v);
                hi = hi.max(v);
            }
            if hi <= lo {
                return Err(Error::DegenerateColumn {
                    column: d,
                    value: lo.to_f64().unwrap_or(f64::NAN),
                });
            }
            bounds.push((lo, hi));
        }

        let mut norms = Vec::new();
        if family == FeatureFamily::Polynomial {
            let sqrt_n = real::<T>(n as f64).sqrt();
            for d in 0..dims {
                let (a, b) = bounds[d];
                let mut constants = vec![T::zero(); basis_count];
                // c_i = ||raw column i||_2 / sqrt(N), raw entry = rescaled^i
                for row in 0..n {
                    let scaled = rescale(train_inputs[(row, d)], a, b);
                    let mut power = T::one();
                    for c in constants.iter_mut() {
                        *c += power * power;
                        power *= scaled;
                    }
                }
                for (i, c) in constants.iter_mut().enumerate() {
                    *c = c.sqrt() / sqrt_n;
                    if *c <= T::zero() {
                        return Err(Error::DegenerateColumn {
                            column: d,
                            value: i as f64,
                        });
                    }
                }
                norms.push(constants);
            }
        }

        Ok(Self {
            family,
            basis_count,
            bounds,
            norms,
        })
    }

    pub fn family(&self) -> FeatureFamily {
        self.family
    }

    pub fn basis_count(&self) -> usize {
        self.basis_count
    }

    pub fn num_dims(&self) -> usize {
        self.bounds.len()
    }

    pub fn bounds(&self) -> &[(T, T)] {
        &self.bounds
    }

    pub fn norms(&self) -> &[Vec<T>] {
        &self.norms
    }

    /// Rebuild a map from stored parts (used when loading model files).
    pub fn from_parts(
        family: FeatureFamily,
        basis_count: usize,
        bounds: Vec<(T, T)>,
        norms: Vec<Vec<T>>,
    ) -> Result<Self> {
        if basis_count == 0 || bounds.is_empty() {
            return Err(Error::InvalidConfig("empty feature map".into()));
        }
        if family == FeatureFamily::Polynomial
            && (norms.len() != bounds.len() || norms.iter().any(|c| c.len() != basis_count))
        {
            return Err(Error::InvalidConfig(
                "polynomial normalization constants do not match shape".into(),
            ));
        }
        Ok(Self {
            family,
            basis_count,
            bounds,
            norms,
        })
    }

    /// Evaluate the features of dimension `dim` for all rows of `inputs`.
    /// Inputs outside the training bounds are evaluated as-is.
    pub fn eval_dim(&self, inputs: &DMatrix<T>, dim: usize) -> Result<DMatrix<T>> {
        if inputs.ncols() != self.num_dims() {
            return Err(Error::ShapeMismatch(format!(
                "inputs have {} columns, feature map was fitted on {}",
                inputs.ncols(),
                self.num_dims()
            )));
        }
        if dim >= self.num_dims() {
            return Err(Error::IndexOutOfRange {
                index: dim,
                mode: dim,
                size: self.num_dims(),
            });
        }
        let m = inputs.nrows();
        let (a, b) = self.bounds[dim];
        let mut out = DMatrix::zeros(m, self.basis_count);
        match self.family {
            FeatureFamily::Polynomial => {
                let constants = &self.norms[dim];
                for row in 0..m {
                    let scaled = rescale(inputs[(row, dim)], a, b);
                    let mut power = T::one();
                    for i in 0..self.basis_count {
                        out[(row, i)] = power / constants[i];
                        power *= scaled;
                    }
                }
            }
            FeatureFamily::Fourier => {
                let period = b - a;
                let two_pi = T::two_pi();
                for row in 0..m {
                    let phase = two_pi * (inputs[(row, dim)] - a) / period;
                    for i in 0..self.basis_count {
                        out[(row, i)] = if i == 0 {
                            T::one()
                        } else {
                            let harmonic = real::<T>(((i + 1) / 2) as f64);
                            if i % 2 == 1 {
                                (harmonic * phase).cos()
                            } else {
                                (harmonic * phase).sin()
                            }
                        };
                    }
                }
            }
        }
        Ok(out)
    }

    /// Evaluate all `D` per-dimension feature matrices.
    pub fn eval_all(&self, inputs: &DMatrix<T>) -> Result<Vec<DMatrix<T>>> {
        (0..self.num_dims()).map(|d| self.eval_dim(inputs, d)).collect()
    }

    /// The full Kronecker feature row for a single input, first dimension
    /// fastest. Test-only path; guarded by the expansion cap.
    pub fn full_feature_row(&self, x: &DVector<T>) -> Result<DVector<T>> {
        let size = self
            .basis_count
            .checked_pow(self.num_dims() as u32)
            .filter(|&s| s <= tensor::EXPANSION_CAP)
            .ok_or(Error::ExpansionTooLarge {
                size: usize::MAX,
                cap: tensor::EXPANSION_CAP,
            })?;
        let inputs = DMatrix::from_fn(1, x.len(), |_, j| x[j]);
        let mut acc = self.eval_dim(&inputs, 0)?.row(0).transpose();
        for d in 1..self.num_dims() {
            let row = self.eval_dim(&inputs, d)?.row(0).transpose();
            acc = kron(&row, &acc);
        }
        debug_assert_eq!(acc.len(), size);
        Ok(acc)
    }
}

#[inline]
fn rescale<T: Real>(x: T, a: T, b: T) -> T {
    real::<T>(2.0) * (x - a) / (b - a) - T::one()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    #[test]
    fn polynomial_two_point_constants_are_unit() {
        // Train column {0, 1}: rescaled values are -1 and 1, so both monomial
        // columns already have unit RMS.
        let x = DMatrix::from_column_slice(2, 1, &[0.0, 1.0]);
        let map = FeatureMap::fit(&x, FeatureFamily::Polynomial, 2).unwrap();
        assert_abs_diff_eq!(map.norms()[0][0], 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(map.norms()[0][1], 1.0, epsilon = 1e-14);
    }

    #[test]
    fn single_basis_is_constant_one() {
        let x = DMatrix::from_column_slice(3, 1, &[0.0, 0.5, 1.0]);
        for family in [FeatureFamily::Polynomial, FeatureFamily::Fourier] {
            let map = FeatureMap::fit(&x, family, 1).unwrap();
            let phi = map.eval_dim(&x, 0).unwrap();
            for row in 0..3 {
                assert_abs_diff_eq!(phi[(row, 0)], 1.0, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn fourier_bounds_are_column_min_max() {
        let x = DMatrix::from_column_slice(4, 1, &[3.0, -1.0, 2.0, 0.5]);
        let map = FeatureMap::fit(&x, FeatureFamily::Fourier, 3).unwrap();
        assert_eq!(map.bounds()[0], (-1.0, 3.0));
    }

    #[test]
    fn fourier_phase_zero_row() {
        let x = DMatrix::from_column_slice(2, 1, &[0.0, 2.0]);
        let map = FeatureMap::fit(&x, FeatureFamily::Fourier, 5).unwrap();
        let probe = DMatrix::from_column_slice(1, 1, &[0.0]);
        let phi = map.eval_dim(&probe, 0).unwrap();
        let expected = [1.0, 1.0, 0.0, 1.0, 0.0];
        for (i, &e) in expected.iter().enumerate() {
            assert_abs_diff_eq!(phi[(0, i)], e, epsilon = 1e-12);
        }
    }

    #[test]
    fn fourier_quarter_period_row() {
        let x = DMatrix::from_column_slice(2, 1, &[1.0, 5.0]);
        let map = FeatureMap::fit(&x, FeatureFamily::Fourier, 3).unwrap();
        let probe = DMatrix::from_column_slice(1, 1, &[2.0]); // a + L/4
        let phi = map.eval_dim(&probe, 0).unwrap();
        assert_abs_diff_eq!(phi[(0, 0)], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(phi[(0, 1)], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(phi[(0, 2)], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn polynomial_midpoint_row() {
        let x = DMatrix::from_column_slice(3, 1, &[0.0, 0.5, 1.0]);
        let map = FeatureMap::fit(&x, FeatureFamily::Polynomial, 3).unwrap();
        let probe = DMatrix::from_column_slice(1, 1, &[0.5]); // rescaled to 0
        let phi = map.eval_dim(&probe, 0).unwrap();
        assert_abs_diff_eq!(phi[(0, 0)], 1.0 / map.norms()[0][0], epsilon = 1e-14);
        assert_abs_diff_eq!(phi[(0, 1)], 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(phi[(0, 2)], 0.0, epsilon = 1e-14);
    }

    #[test]
    fn polynomial_training_columns_have_unit_rms() {
        let mut rng = StdRng::seed_from_u64(5);
        let x = DMatrix::from_fn(40, 2, |_, _| rng.random_range(-3.0..2.0));
        let map = FeatureMap::fit(&x, FeatureFamily::Polynomial, 4).unwrap();
        for d in 0..2 {
            let phi = map.eval_dim(&x, d).unwrap();
            for i in 0..4 {
                let rms = f64::sqrt(phi.column(i).norm_squared() / 40.0);
                assert_abs_diff_eq!(rms, 1.0, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn constant_column_is_rejected() {
        let x = DMatrix::from_column_slice(3, 2, &[0.0, 1.0, 2.0, 5.0, 5.0, 5.0]);
        let err = FeatureMap::<f64>::fit(&x, FeatureFamily::Fourier, 2).unwrap_err();
        assert!(matches!(err, Error::DegenerateColumn { column: 1, .. }));
    }

    #[test]
    fn full_row_single_dim_is_eval_row() {
        let x = DMatrix::from_column_slice(3, 1, &[0.0, 0.5, 1.0]);
        let map = FeatureMap::fit(&x, FeatureFamily::Fourier, 3).unwrap();
        let point = DVector::from_row_slice(&[0.3]);
        let full = map.full_feature_row(&point).unwrap();
        let probe = DMatrix::from_column_slice(1, 1, &[0.3]);
        let phi = map.eval_dim(&probe, 0).unwrap();
        for i in 0..3 {
            assert_abs_diff_eq!(full[i], phi[(0, i)], epsilon = 1e-14);
        }
    }

    #[test]
    fn full_row_two_dims_is_kron() {
        let mut rng = StdRng::seed_from_u64(9);
        let x = DMatrix::from_fn(10, 2, |_, _| rng.random_range(0.0..1.0));
        let map = FeatureMap::fit(&x, FeatureFamily::Polynomial, 3).unwrap();
        let point = DVector::from_row_slice(&[0.2, 0.7]);
        let full = map.full_feature_row(&point).unwrap();
        let probe = DMatrix::from_row_slice(1, 2, &[0.2, 0.7]);
        let u = map.eval_dim(&probe, 0).unwrap().row(0).transpose();
        let v = map.eval_dim(&probe, 1).unwrap().row(0).transpose();
        let expected = kron(&v, &u);
        for k in 0..full.len() {
            assert_abs_diff_eq!(full[k], expected[k], epsilon = 1e-14);
        }
    }

    #[test]
    fn full_row_three_dims_matches_nested_loop() {
        let mut rng = StdRng::seed_from_u64(13);
        let x = DMatrix::from_fn(8, 3, |_, _| rng.random_range(0.0..1.0));
        let map = FeatureMap::fit(&x, FeatureFamily::Fourier, 2).unwrap();
        let point = DVector::from_row_slice(&[0.1, 0.6, 0.9]);
        let full = map.full_feature_row(&point).unwrap();
        let probe = DMatrix::from_row_slice(1, 3, &[0.1, 0.6, 0.9]);
        let rows: Vec<_> = (0..3).map(|d| map.eval_dim(&probe, d).unwrap()).collect();
        let mut k = 0;
        for i3 in 0..2 {
            for i2 in 0..2 {
                for i1 in 0..2 {
                    let expected = rows[0][(0, i1)] * rows[1][(0, i2)] * rows[2][(0, i3)];
                    assert_abs_diff_eq!(full[k], expected, epsilon = 1e-13);
                    k += 1;
                }
            }
        }
    }

    #[test]
    fn evaluation_is_row_order_independent() {
        let x = DMatrix::from_column_slice(4, 1, &[0.0, 0.3, 0.7, 1.0]);
        let map = FeatureMap::fit(&x, FeatureFamily::Fourier, 3).unwrap();
        let fwd = DMatrix::from_column_slice(2, 1, &[0.2, 0.8]);
        let rev = DMatrix::from_column_slice(2, 1, &[0.8, 0.2]);
        let phi_fwd = map.eval_dim(&fwd, 0).unwrap();
        let phi_rev = map.eval_dim(&rev, 0).unwrap();
        assert_eq!(phi_fwd.row(0), phi_rev.row(1));
        assert_eq!(phi_fwd.row(1), phi_rev.row(0));
    }
}
