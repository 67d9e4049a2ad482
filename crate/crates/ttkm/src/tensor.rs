//! Tensor-train containers and the product primitives built on them.
//!
//! Index conventions used throughout the crate:
//! * multi-indices are zero-based and the **first** mode runs fastest,
//! * a TT-core of shape `R_l x I x R_r` is vectorized with the left rank
//!   index fastest and the right rank index slowest,
//! * `kron(slow, fast)` places the left operand on the slow axis, matching
//!   a feature map assembled as `phi_D (x) ... (x) phi_1`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Default cap on the number of entries materialized by [`tt_full_vector`].
pub const EXPANSION_CAP: usize = 1_000_000;

/// Bijective map between multi-indices and linear indices, first mode fastest.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MultiIndexMap {
    mode_sizes: Vec<usize>,
}

impl MultiIndexMap {
    pub fn new(mode_sizes: Vec<usize>) -> Result<Self> {
        if mode_sizes.is_empty() || mode_sizes.iter().any(|&s| s == 0) {
            return Err(Error::InvalidConfig(
                "mode sizes must be nonempty and positive".into(),
            ));
        }
        Ok(Self { mode_sizes })
    }

    pub fn mode_sizes(&self) -> &[usize] {
        &self.mode_sizes
    }

    pub fn num_modes(&self) -> usize {
        self.mode_sizes.len()
    }

    /// Total number of linear indices, `prod(I_d)`.
    pub fn len(&self) -> usize {
        self.mode_sizes.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Linear index of `indices`: `i_1 + sum_d i_d * prod_{j<d} I_j`.
    pub fn flatten(&self, indices: &[usize]) -> Result<usize> {
        if indices.len() != self.mode_sizes.len() {
            return Err(Error::ShapeMismatch(format!(
                "expected {} mode indices, got {}",
                self.mode_sizes.len(),
                indices.len()
            )));
        }
        let mut linear = 0;
        let mut stride = 1;
        for (mode, (&idx, &size)) in indices.iter().zip(&self.mode_sizes).enumerate() {
            if idx >= size {
                return Err(Error::IndexOutOfRange {
                    index: idx,
                    mode,
                    size,
                });
            }
            linear += idx * stride;
            stride *= size;
        }
        Ok(linear)
    }

    /// Inverse of [`flatten`](Self::flatten).
    pub fn unflatten(&self, mut linear: usize) -> Result<Vec<usize>> {
        if linear >= self.len() {
            return Err(Error::IndexOutOfRange {
                index: linear,
                mode: 0,
                size: self.len(),
            });
        }
        let mut indices = Vec::with_capacity(self.mode_sizes.len());
        for &size in &self.mode_sizes {
            indices.push(linear % size);
            linear /= size;
        }
        Ok(indices)
    }
}

/// One three-way TT factor of shape `left_rank x mode_size x right_rank`.
///
/// Entries are stored in vectorization order: left rank fastest, mode index
/// next, right rank slowest.
#[derive(Debug, Clone, PartialEq)]
pub struct TTCore<T> {
    left_rank: usize,
    mode_size: usize,
    right_rank: usize,
    data: Vec<T>,
}

impl<T: Real> TTCore<T> {
    pub fn new(left_rank: usize, mode_size: usize, right_rank: usize, data: Vec<T>) -> Result<Self> {
        if left_rank == 0 || mode_size == 0 || right_rank == 0 {
            return Err(Error::InvalidConfig("core dimensions must be positive".into()));
        }
        if data.len() != left_rank * mode_size * right_rank {
            return Err(Error::ShapeMismatch(format!(
                "core data length {} does not match {}x{}x{}",
                data.len(),
                left_rank,
                mode_size,
                right_rank
            )));
        }
        Ok(Self {
            left_rank,
            mode_size,
            right_rank,
            data,
        })
    }

    pub fn zeros(left_rank: usize, mode_size: usize, right_rank: usize) -> Self {
        Self {
            left_rank,
            mode_size,
            right_rank,
            data: vec![T::zero(); left_rank * mode_size * right_rank],
        }
    }

    pub fn left_rank(&self) -> usize {
        self.left_rank
    }

    pub fn mode_size(&self) -> usize {
        self.mode_size
    }

    pub fn right_rank(&self) -> usize {
        self.right_rank
    }

    pub fn num_entries(&self) -> usize {
        self.data.len()
    }

    #[inline]
    fn offset(&self, rl: usize, i: usize, rr: usize) -> usize {
        rl + self.left_rank * (i + self.mode_size * rr)
    }

    #[inline]
    pub fn get(&self, rl: usize, i: usize, rr: usize) -> T {
        self.data[self.offset(rl, i, rr)]
    }

    #[inline]
    pub fn set(&mut self, rl: usize, i: usize, rr: usize, value: T) {
        let k = self.offset(rl, i, rr);
        self.data[k] = value;
    }

    /// The `left_rank x right_rank` matrix slice `V(i)`.
    pub fn slice(&self, i: usize) -> DMatrix<T> {
        DMatrix::from_fn(self.left_rank, self.right_rank, |rl, rr| self.get(rl, i, rr))
    }

    /// Entries in vectorization order (left rank fastest).
    pub fn as_vec(&self) -> &[T] {
        &self.data
    }

    /// Replace all entries; `values` must be in vectorization order.
    pub fn set_vec(&mut self, values: &DVector<T>) -> Result<()> {
        if values.len() != self.data.len() {
            return Err(Error::ShapeMismatch(format!(
                "core vector length {} does not match {}",
                values.len(),
                self.data.len()
            )));
        }
        self.data.copy_from_slice(values.as_slice());
        Ok(())
    }

    pub fn norm_squared(&self) -> T {
        self.data.iter().fold(T::zero(), |acc, &v| acc + v * v)
    }

    /// Contract the mode dimension with one feature row: `sum_i phi[n,i] V(i)`.
    pub(crate) fn contract_feature_row(&self, phi: &DMatrix<T>, n: usize) -> DMatrix<T> {
        let mut out = DMatrix::zeros(self.left_rank, self.right_rank);
        for i in 0..self.mode_size {
            let w = phi[(n, i)];
            for rr in 0..self.right_rank {
                for rl in 0..self.left_rank {
                    out[(rl, rr)] += w * self.get(rl, i, rr);
                }
            }
        }
        out
    }
}

/// Ordered chain of TT-cores with boundary ranks one.
#[derive(Debug, Clone, PartialEq)]
pub struct TTWeights<T> {
    cores: Vec<TTCore<T>>,
}

impl<T: Real> TTWeights<T> {
    pub fn new(cores: Vec<TTCore<T>>) -> Result<Self> {
        if cores.is_empty() {
            return Err(Error::InvalidConfig("a tensor train needs at least one core".into()));
        }
        if cores[0].left_rank() != 1 || cores[cores.len() - 1].right_rank() != 1 {
            return Err(Error::ShapeMismatch("boundary ranks must be one".into()));
        }
        for (d, pair) in cores.windows(2).enumerate() {
            if pair[0].right_rank() != pair[1].left_rank() {
                return Err(Error::ShapeMismatch(format!(
                    "rank chain broken between cores {} and {}: {} vs {}",
                    d,
                    d + 1,
                    pair[0].right_rank(),
                    pair[1].left_rank()
                )));
            }
        }
        Ok(Self { cores })
    }

    pub fn num_dims(&self) -> usize {
        self.cores.len()
    }

    pub fn cores(&self) -> &[TTCore<T>] {
        &self.cores
    }

    pub fn core(&self, d: usize) -> &TTCore<T> {
        &self.cores[d]
    }

    pub fn core_mut(&mut self, d: usize) -> &mut TTCore<T> {
        &mut self.cores[d]
    }

    pub fn mode_sizes(&self) -> Vec<usize> {
        self.cores.iter().map(TTCore::mode_size).collect()
    }

    /// Number of entries of the dense tensor represented by this train.
    pub fn dense_len(&self) -> usize {
        self.cores.iter().map(TTCore::mode_size).product()
    }

    /// Total parameter count `sum_d R_{d-1} I_d R_d`.
    pub fn num_parameters(&self) -> usize {
        self.cores.iter().map(TTCore::num_entries).sum()
    }

    /// Squared Euclidean norm of the stacked core vector `v`.
    pub fn norm_squared(&self) -> T {
        self.cores.iter().fold(T::zero(), |acc, c| acc + c.norm_squared())
    }
}

/// Kronecker product with the left operand on the slow axis:
/// `out[i + j*len(fast)] = fast[i] * slow[j]`.
pub fn kron<T: Real>(slow: &DVector<T>, fast: &DVector<T>) -> DVector<T> {
    let ni = fast.len();
    let nj = slow.len();
    DVector::from_fn(ni * nj, |k, _| {
        let i = k % ni;
        let j = k / ni;
        fast[i] * slow[j]
    })
}

/// Row-wise Khatri-Rao product: row `n` of the result is `kron(slow_n, fast_n)`.
pub fn khatri_rao_rows<T: Real>(slow: &DMatrix<T>, fast: &DMatrix<T>) -> Result<DMatrix<T>> {
    if slow.nrows() != fast.nrows() {
        return Err(Error::ShapeMismatch(format!(
            "row counts differ: {} vs {}",
            slow.nrows(),
            fast.nrows()
        )));
    }
    let n = slow.nrows();
    let ni = fast.ncols();
    let nj = slow.ncols();
    let mut out = DMatrix::zeros(n, ni * nj);
    for r in 0..n {
        for j in 0..nj {
            let s = slow[(r, j)];
            for i in 0..ni {
                out[(r, i + j * ni)] = fast[(r, i)] * s;
            }
        }
    }
    Ok(out)
}

/// Materialize the dense weight vector `w = g(v)` with a configurable cap.
pub fn tt_full_vector_with_cap<T: Real>(weights: &TTWeights<T>, cap: usize) -> Result<DVector<T>> {
    let len = weights.dense_len();
    if len > cap {
        return Err(Error::ExpansionTooLarge { size: len, cap });
    }
    let map = MultiIndexMap::new(weights.mode_sizes())?;
    let mut out = DVector::zeros(len);
    for linear in 0..len {
        let idx = map.unflatten(linear)?;
        let mut acc = DMatrix::identity(1, 1);
        for (core, &i) in weights.cores().iter().zip(&idx) {
            acc = acc * core.slice(i);
        }
        out[linear] = acc[(0, 0)];
    }
    Ok(out)
}

/// Materialize the dense weight vector with the default [`EXPANSION_CAP`].
pub fn tt_full_vector<T: Real>(weights: &TTWeights<T>) -> Result<DVector<T>> {
    tt_full_vector_with_cap(weights, EXPANSION_CAP)
}

/// Model responses `f[n] = phi(x_n)^T g(v)` without forming the dense feature
/// matrix: a running row vector is contracted through the cores left to right.
pub fn tt_dot_features<T: Real>(
    weights: &TTWeights<T>,
    phis: &[DMatrix<T>],
) -> Result<DVector<T>> {
    if phis.len() != weights.num_dims() {
        return Err(Error::ShapeMismatch(format!(
            "got {} feature matrices for {} cores",
            phis.len(),
            weights.num_dims()
        )));
    }
    let n = phis.first().map_or(0, DMatrix::nrows);
    for (d, (phi, core)) in phis.iter().zip(weights.cores()).enumerate() {
        if phi.nrows() != n {
            return Err(Error::ShapeMismatch(format!(
                "feature matrix {} has {} rows, expected {}",
                d,
                phi.nrows(),
                n
            )));
        }
        if phi.ncols() != core.mode_size() {
            return Err(Error::ShapeMismatch(format!(
                "feature matrix {} has {} columns, core expects {}",
                d,
                phi.ncols(),
                core.mode_size()
            )));
        }
    }
    let mut out = DVector::zeros(n);
    for row in 0..n {
        let mut acc = DMatrix::identity(1, 1);
        for (core, phi) in weights.cores().iter().zip(phis) {
            acc = acc * core.contract_feature_row(phi, row);
        }
        out[row] = acc[(0, 0)];
    }
    Ok(out)
}
