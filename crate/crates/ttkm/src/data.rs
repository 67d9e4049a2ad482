//! Dataset ingestion, splitting, cyclic feature shifts, and standardization.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::inference::{PredictiveCovariance, PredictiveDistribution};
use crate::scalar::{real, Real};

/// In-memory regression dataset: inputs `X` (N x D) and targets `y` (N).
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<T> {
    pub inputs: DMatrix<T>,
    pub targets: DVector<T>,
    pub feature_names: Vec<String>,
    pub target_name: String,
    pub source: String,
}

impl<T: Real> Dataset<T> {
    pub fn new(
        inputs: DMatrix<T>,
        targets: DVector<T>,
        feature_names: Vec<String>,
        target_name: String,
        source: String,
    ) -> Result<Self> {
        if inputs.nrows() != targets.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} input rows vs {} targets",
                inputs.nrows(),
                targets.len()
            )));
        }
        if inputs.nrows() < 2 {
            return Err(Error::InvalidConfig("a dataset needs at least two rows".into()));
        }
        if inputs.ncols() < 1 {
            return Err(Error::InvalidConfig("a dataset needs at least one feature".into()));
        }
        if feature_names.len() != inputs.ncols() {
            return Err(Error::ShapeMismatch(format!(
                "{} feature names vs {} columns",
                feature_names.len(),
                inputs.ncols()
            )));
        }
        for (i, v) in targets.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFinite(format!("target at row {}", i + 1)));
            }
        }
        for j in 0..inputs.ncols() {
            for i in 0..inputs.nrows() {
                if !inputs[(i, j)].is_finite() {
                    return Err(Error::NonFinite(format!(
                        "input at row {}, column \"{}\"",
                        i + 1,
                        feature_names[j]
                    )));
                }
            }
        }
        Ok(Self {
            inputs,
            targets,
            feature_names,
            target_name,
            source,
        })
    }

    pub fn num_rows(&self) -> usize {
        self.inputs.nrows()
    }

    pub fn num_dims(&self) -> usize {
        self.inputs.ncols()
    }

    /// Dataset restricted to the given rows, preserving their order.
    pub fn select(&self, rows: &[usize]) -> Self {
        let inputs = DMatrix::from_fn(rows.len(), self.num_dims(), |i, j| {
            self.inputs[(rows[i], j)]
        });
        let targets = DVector::from_fn(rows.len(), |i, _| self.targets[rows[i]]);
        Self {
            inputs,
            targets,
            feature_names: self.feature_names.clone(),
            target_name: self.target_name.clone(),
            source: self.source.clone(),
        }
    }
}

/// Load a CSV file with a header row; `target` names the target column.
pub fn load_csv<T: Real>(path: &Path, target: &str, delimiter: u8) -> Result<Dataset<T>> {
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .has_headers(true)
        .from_path(path)?;
    let headers: Vec<String> = reader.headers()?.iter().map(str::to_owned).collect();
    let target_idx = headers
        .iter()
        .position(|h| h == target)
        .ok_or_else(|| Error::InvalidConfig(format!("target column \"{target}\" not found")))?;
    let feature_names: Vec<String> = headers
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != target_idx)
        .map(|(_, h)| h.clone())
        .collect();

    let mut x_rows: Vec<Vec<T>> = Vec::new();
    let mut y_values: Vec<T> = Vec::new();
    for (row_idx, record) in reader.records().enumerate() {
        let record = record?;
        if record.len() != headers.len() {
            return Err(Error::CsvValue {
                row: row_idx + 1,
                column: String::new(),
                message: format!("expected {} cells, got {}", headers.len(), record.len()),
            });
        }
        let mut row: Vec<T> = Vec::with_capacity(headers.len() - 1);
        for (col_idx, cell) in record.iter().enumerate() {
            let parsed: f64 = cell.trim().parse().map_err(|_| Error::CsvValue {
                row: row_idx + 1,
                column: headers[col_idx].clone(),
                message: format!("cannot parse \"{cell}\" as a number"),
            })?;
            if !parsed.is_finite() {
                return Err(Error::CsvValue {
                    row: row_idx + 1,
                    column: headers[col_idx].clone(),
                    message: format!("non-finite value \"{cell}\""),
                });
            }
            let value = real::<T>(parsed);
            if col_idx == target_idx {
                y_values.push(value);
            } else {
                row.push(value);
            }
        }
        x_rows.push(row);
    }

    let n = x_rows.len();
    let dims = feature_names.len();
    let inputs = DMatrix::from_fn(n, dims, |i, j| x_rows[i][j]);
    let targets = DVector::from_vec(y_values);
    Dataset::new(
        inputs,
        targets,
        feature_names,
        target.to_owned(),
        path.display().to_string(),
    )
}

/// Seeded shuffle-and-split of row indices. The train side gets
/// `ceil(N * (1 - test_fraction))` rows, the test side the remainder.
pub fn split_indices(n: usize, test_fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(0.0..1.0).contains(&test_fraction) || test_fraction <= 0.0 {
        return Err(Error::InvalidConfig(format!(
            "test fraction must be in (0, 1), got {test_fraction}"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    let n_train = ((n as f64) * (1.0 - test_fraction)).ceil() as usize;
    let test = order.split_off(n_train);
    Ok((order, test))
}

/// Split a dataset into train and test parts (see [`split_indices`]).
pub fn split<T: Real>(
    dataset: &Dataset<T>,
    test_fraction: f64,
    seed: u64,
) -> Result<(Dataset<T>, Dataset<T>)> {
    let (train_idx, test_idx) = split_indices(dataset.num_rows(), test_fraction, seed)?;
    Ok((dataset.select(&train_idx), dataset.select(&test_idx)))
}

/// Rotate feature columns right by `k`: shift 1 maps `[x_1..x_D]` to
/// `[x_D, x_1, .., x_{D-1}]`. Shift 0 is the identity.
pub fn cyclic_shift<T: Real>(dataset: &Dataset<T>, k: usize) -> Result<Dataset<T>> {
    let d = dataset.num_dims();
    if k >= d {
        return Err(Error::InvalidConfig(format!(
            "shift {k} out of range for {d} feature columns"
        )));
    }
    if k == 0 {
        return Ok(dataset.clone());
    }
    let source_col = |j: usize| (j + d - k) % d;
    let inputs = DMatrix::from_fn(dataset.num_rows(), d, |i, j| {
        dataset.inputs[(i, source_col(j))]
    });
    let feature_names = (0..d)
        .map(|j| dataset.feature_names[source_col(j)].clone())
        .collect();
    Ok(Dataset {
        inputs,
        targets: dataset.targets.clone(),
        feature_names,
        target_name: dataset.target_name.clone(),
        source: dataset.source.clone(),
    })
}

/// Z-score statistics fitted on a training split.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer<T> {
    pub x_mean: Vec<T>,
    pub x_std: Vec<T>,
    pub y_mean: T,
    pub y_std: T,
}

impl<T: Real> Standardizer<T> {
    /// Fit per-column means and (population) standard deviations on the
    /// training split only. Zero-variance columns are rejected.
    pub fn fit(train: &Dataset<T>) -> Result<Self> {
        let n = real::<T>(train.num_rows() as f64);
        let mut x_mean = Vec::with_capacity(train.num_dims());
        let mut x_std = Vec::with_capacity(train.num_dims());
        for j in 0..train.num_dims() {
            let col = train.inputs.column(j);
            let mean = col.sum() / n;
            let var = col.iter().fold(T::zero(), |acc, &v| {
                let d = v - mean;
                acc + d * d
            }) / n;
            let std = var.sqrt();
            if std <= T::zero() {
                return Err(Error::ZeroVariance {
                    column: train.feature_names[j].clone(),
                });
            }
            x_mean.push(mean);
            x_std.push(std);
        }
        let y_mean = train.targets.sum() / n;
        let y_var = train.targets.iter().fold(T::zero(), |acc, &v| {
            let d = v - y_mean;
            acc + d * d
        }) / n;
        let y_std = y_var.sqrt();
        if y_std <= T::zero() {
            return Err(Error::ZeroVariance {
                column: train.target_name.clone(),
            });
        }
        Ok(Self {
            x_mean,
            x_std,
            y_mean,
            y_std,
        })
    }

    /// Standardize an input matrix.
    pub fn apply_inputs(&self, inputs: &DMatrix<T>) -> Result<DMatrix<T>> {
        if inputs.ncols() != self.x_mean.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} input columns vs {} fitted columns",
                inputs.ncols(),
                self.x_mean.len()
            )));
        }
        Ok(DMatrix::from_fn(inputs.nrows(), inputs.ncols(), |i, j| {
            (inputs[(i, j)] - self.x_mean[j]) / self.x_std[j]
        }))
    }

    /// Standardize targets.
    pub fn apply_targets(&self, targets: &DVector<T>) -> DVector<T> {
        targets.map(|v| (v - self.y_mean) / self.y_std)
    }

    /// Standardize a whole dataset.
    pub fn apply(&self, dataset: &Dataset<T>) -> Result<Dataset<T>> {
        Ok(Dataset {
            inputs: self.apply_inputs(&dataset.inputs)?,
            targets: self.apply_targets(&dataset.targets),
            feature_names: dataset.feature_names.clone(),
            target_name: dataset.target_name.clone(),
            source: dataset.source.clone(),
        })
    }

    /// Map a standardized predictive mean back to the original target scale.
    pub fn invert_mean(&self, mean: T) -> T {
        mean * self.y_std + self.y_mean
    }

    /// Map a standardized predictive variance back to the original scale.
    pub fn invert_variance(&self, variance: T) -> T {
        variance * self.y_std * self.y_std
    }

    /// Map a whole predictive distribution back to the original target scale.
    pub fn invert_prediction(&self, pred: &PredictiveDistribution<T>) -> PredictiveDistribution<T> {
        let mean = pred.mean.map(|m| self.invert_mean(m));
        let scale = self.y_std * self.y_std;
        let cov = match &pred.covariance {
            PredictiveCovariance::Diagonal(v) => {
                PredictiveCovariance::Diagonal(v.map(|x| x * scale))
            }
            PredictiveCovariance::Full(m) => PredictiveCovariance::Full(m.map(|x| x * scale)),
        };
        PredictiveDistribution {
            mean,
            covariance: cov,
        }
    }
}
