//! Alternating least squares over the TT-cores.
//!
//! Each core update solves a regularized least-squares problem whose design
//! matrix is the row-wise Khatri-Rao product of the right interface `Q`, the
//! local features, and the left interface `P`. Interfaces are maintained
//! incrementally as the sweep walks the cores; they are never rebuilt from
//! scratch inside a sweep.

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::scalar::{real, Real};
use crate::tensor::{khatri_rao_rows, tt_dot_features, TTCore, TTWeights};

/// Training configuration for the ALS optimizer.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig<T> {
    /// Interior TT-ranks `R_1..R_{D-1}` (boundary ranks are one).
    pub ranks: Vec<usize>,
    /// Hard cap on the number of forward-backward sweeps.
    pub epochs: usize,
    /// Zero-based index of the core treated in a Bayesian manner; the sweep
    /// terminates there.
    pub bayesian_core: usize,
    /// Seed for the Gaussian core initialization.
    pub init_seed: u64,
    /// Early-stop threshold on the relative objective decrease per sweep.
    pub convergence_tol: T,
}

impl<T: Real> TrainConfig<T> {
    pub fn new(ranks: Vec<usize>, epochs: usize, bayesian_core: usize, init_seed: u64) -> Self {
        Self {
            ranks,
            epochs,
            bayesian_core,
            init_seed,
            convergence_tol: real(1e-8),
        }
    }

    pub fn num_dims(&self) -> usize {
        self.ranks.len() + 1
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::InvalidConfig("epochs must be positive".into()));
        }
        if self.ranks.iter().any(|&r| r == 0) {
            return Err(Error::InvalidConfig("TT-ranks must be positive".into()));
        }
        if self.bayesian_core >= self.num_dims() {
            return Err(Error::InvalidConfig(format!(
                "Bayesian core {} out of range for {} cores",
                self.bayesian_core,
                self.num_dims()
            )));
        }
        Ok(())
    }
}

/// Interior-rank layouts used by the rank ablation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RankPattern {
    /// `[R, .., R]`.
    Uniform,
    /// `R` everywhere except a wider middle rank `R + 1`.
    MiddleWide,
    /// `R` everywhere except a narrower middle rank `R - 1`.
    MiddleNarrow,
}

impl RankPattern {
    pub fn label(&self) -> &'static str {
        match self {
            RankPattern::Uniform => "pattern1",
            RankPattern::MiddleWide => "pattern2",
            RankPattern::MiddleNarrow => "pattern3",
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        match text {
            "1" | "pattern1" => Ok(RankPattern::Uniform),
            "2" | "pattern2" => Ok(RankPattern::MiddleWide),
            "3" | "pattern3" => Ok(RankPattern::MiddleNarrow),
            other => Err(Error::InvalidConfig(format!("unknown rank pattern \"{other}\""))),
        }
    }
}

/// Build the interior ranks for a pattern; the middle position is rank index
/// `ceil((D-1)/2)` counting from one.
pub fn pattern_ranks(pattern: RankPattern, dims: usize, rank: usize) -> Result<Vec<usize>> {
    if dims < 2 {
        return Err(Error::InvalidConfig("rank patterns need at least two cores".into()));
    }
    if rank == 0 {
        return Err(Error::InvalidConfig("rank must be positive".into()));
    }
    let mut ranks = vec![rank; dims - 1];
    let middle = (dims - 1).div_ceil(2) - 1;
    match pattern {
        RankPattern::Uniform => {}
        RankPattern::MiddleWide => ranks[middle] = rank + 1,
        RankPattern::MiddleNarrow => {
            if rank < 2 {
                return Err(Error::InvalidConfig(
                    "a narrower middle rank needs a base rank of at least two".into(),
                ));
            }
            ranks[middle] = rank - 1;
        }
    }
    Ok(ranks)
}

/// Seeded Gaussian initialization; core `d` entries have standard deviation
/// `(I * R_{d-1} * R_d)^(-1/2)`.
pub fn init_weights<T: Real>(
    ranks: &[usize],
    basis_count: usize,
    init_seed: u64,
) -> Result<TTWeights<T>> {
    if basis_count == 0 {
        return Err(Error::InvalidConfig("basis count must be positive".into()));
    }
    let dims = ranks.len() + 1;
    let mut chain = Vec::with_capacity(dims + 1);
    chain.push(1);
    chain.extend_from_slice(ranks);
    chain.push(1);

    let mut rng = ChaCha8Rng::seed_from_u64(init_seed);
    let normal = StandardNormal;
    let mut cores = Vec::with_capacity(dims);
    for d in 0..dims {
        let (rl, rr) = (chain[d], chain[d + 1]);
        let stddev = 1.0 / ((basis_count * rl * rr) as f64).sqrt();
        let data: Vec<T> = (0..rl * basis_count * rr)
            .map(|_| {
                let z: f64 = normal.sample(&mut rng);
                real::<T>(z * stddev)
            })
            .collect();
        cores.push(TTCore::new(rl, basis_count, rr, data)?);
    }
    TTWeights::new(cores)
}

/// Core visit order for one epoch: `0..D-1..1` (zero-based). When `terminal`
/// is given, the zigzag continues past the base pattern until that core is
/// the last one visited.
pub fn sweep_order(dims: usize, terminal: Option<usize>) -> Vec<usize> {
    let mut order: Vec<usize> = if dims == 1 {
        vec![0]
    } else {
        (0..dims).chain((1..dims - 1).rev()).collect()
    };
    if let Some(target) = terminal {
        if dims > 1 {
            let mut pos = *order.last().unwrap();
            let prev = order[order.len() - 2];
            let mut dir: isize = if pos > prev { 1 } else { -1 };
            while pos != target {
                if pos == 0 {
                    dir = 1;
                } else if pos == dims - 1 {
                    dir = -1;
                }
                pos = (pos as isize + dir) as usize;
                order.push(pos);
            }
        }
    }
    order
}

/// Result of a call to [`SweepState::sweep`].
#[derive(Debug, Clone)]
pub struct SweepSummary<T> {
    /// Internal objective `0.5 ||y - f||^2 + 0.5 * reg * ||v||^2` after each
    /// completed epoch.
    pub epoch_objectives: Vec<T>,
    /// Whether the early-stop criterion fired before the epoch cap.
    pub converged: bool,
}

/// Mutable ALS state: the weights plus cached left/right interface matrices
/// positioned at `current_core`.
#[derive(Debug, Clone)]
pub struct SweepState<'a, T> {
    weights: TTWeights<T>,
    phis: &'a [DMatrix<T>],
    /// `left[d]`: N x R_{d-1} contraction of cores `0..d`.
    left: Vec<DMatrix<T>>,
    /// `right[d]`: N x R_d contraction of cores `d+1..D`.
    right: Vec<DMatrix<T>>,
    current: usize,
    reg: T,
}

impl<'a, T: Real> SweepState<'a, T> {
    /// Position the state at core zero with freshly computed interfaces.
    /// `reg` is the effective regularization `gamma / beta`.
    pub fn new(weights: TTWeights<T>, phis: &'a [DMatrix<T>], reg: T) -> Result<Self> {
        if reg < T::zero() {
            return Err(Error::InvalidConfig("regularization must be nonnegative".into()));
        }
        if phis.len() != weights.num_dims() {
            return Err(Error::ShapeMismatch(format!(
                "{} feature matrices for {} cores",
                phis.len(),
                weights.num_dims()
            )));
        }
        let n = phis[0].nrows();
        for (d, (phi, core)) in phis.iter().zip(weights.cores()).enumerate() {
            if phi.nrows() != n || phi.ncols() != core.mode_size() {
                return Err(Error::ShapeMismatch(format!(
                    "feature matrix {} is {}x{}, expected {}x{}",
                    d,
                    phi.nrows(),
                    phi.ncols(),
                    n,
                    core.mode_size()
                )));
            }
        }
        let dims = weights.num_dims();
        let (mut left, mut right) = (Vec::with_capacity(dims), vec![DMatrix::zeros(0, 0); dims]);
        left.push(DMatrix::from_element(n, 1, T::one()));
        left.resize(dims, DMatrix::zeros(0, 0));
        right[dims - 1] = DMatrix::from_element(n, 1, T::one());
        for d in (0..dims - 1).rev() {
            right[d] = retreat(&right[d + 1], &phis[d + 1], weights.core(d + 1));
        }
        Ok(Self {
            weights,
            phis,
            left,
            right,
            current: 0,
            reg,
        })
    }

    pub fn weights(&self) -> &TTWeights<T> {
        &self.weights
    }

    pub fn into_weights(self) -> TTWeights<T> {
        self.weights
    }

    pub fn current_core(&self) -> usize {
        self.current
    }

    pub fn regularization(&self) -> T {
        self.reg
    }

    pub fn set_regularization(&mut self, reg: T) {
        self.reg = reg;
    }

    pub fn num_rows(&self) -> usize {
        self.phis[0].nrows()
    }

    /// Model responses for the training rows.
    pub fn responses(&self) -> DVector<T> {
        tt_dot_features(&self.weights, self.phis).expect("state shapes are validated")
    }

    /// The design matrix `A^(d) = Q^(d) (x)_R Phi^(d) (x)_R P^(d)` for the
    /// core the caches are positioned at.
    pub fn design_matrix(&self, d: usize) -> Result<DMatrix<T>> {
        if d != self.current {
            return Err(Error::InvalidConfig(format!(
                "interface caches are positioned at core {}, not {}",
                self.current, d
            )));
        }
        let inner = khatri_rao_rows(&self.phis[d], &self.left[d])?;
        khatri_rao_rows(&self.right[d], &inner)
    }

    /// Solve the regularized normal equations for core `d` and store the
    /// solution in place.
    pub fn update_core(&mut self, d: usize, targets: &DVector<T>) -> Result<()> {
        let a = self.design_matrix(d)?;
        if targets.len() != a.nrows() {
            return Err(Error::ShapeMismatch(format!(
                "{} targets for {} rows",
                targets.len(),
                a.nrows()
            )));
        }
        let mut gram = a.tr_mul(&a);
        for i in 0..gram.nrows() {
            gram[(i, i)] += self.reg;
        }
        let chol = Cholesky::new(gram).ok_or_else(|| {
            if self.reg <= T::zero() {
                Error::RankDeficient
            } else {
                Error::NotPositiveDefinite
            }
        })?;
        let rhs = a.tr_mul(targets);
        let solution = chol.solve(&rhs);
        self.weights.core_mut(d).set_vec(&solution)
    }

    /// Move the cache position one core to the right, folding the freshly
    /// updated core into the left interface.
    fn move_right(&mut self) {
        let d = self.current;
        self.left[d + 1] = advance(&self.left[d], &self.phis[d], self.weights.core(d));
        self.current = d + 1;
    }

    /// Move the cache position one core to the left, folding the freshly
    /// updated core into the right interface.
    fn move_left(&mut self) {
        let d = self.current;
        self.right[d - 1] = retreat(&self.right[d], &self.phis[d], self.weights.core(d));
        self.current = d - 1;
    }

    fn walk_to(&mut self, next: usize) -> Result<()> {
        if next == self.current + 1 {
            self.move_right();
        } else if next + 1 == self.current {
            self.move_left();
        } else if next != self.current {
            return Err(Error::InvalidConfig(format!(
                "sweep may only step between adjacent cores ({} -> {})",
                self.current, next
            )));
        }
        Ok(())
    }

    fn run_path(&mut self, path: &[usize], targets: &DVector<T>) -> Result<()> {
        for (k, &d) in path.iter().enumerate() {
            if d != self.current {
                self.walk_to(d)?;
            }
            self.update_core(d, targets)?;
            if let Some(&next) = path.get(k + 1) {
                self.walk_to(next)?;
            }
        }
        Ok(())
    }

    /// Run up to `config.epochs` forward-backward sweeps with early stopping;
    /// the final epoch is extended so the last updated core is
    /// `config.bayesian_core`.
    pub fn sweep(&mut self, targets: &DVector<T>, config: &TrainConfig<T>) -> Result<SweepSummary<T>> {
        config.validate()?;
        let dims = self.weights.num_dims();
        if config.num_dims() != dims {
            return Err(Error::ShapeMismatch(format!(
                "config is for {} cores, state has {}",
                config.num_dims(),
                dims
            )));
        }
        let base = sweep_order(dims, None);
        let full = sweep_order(dims, Some(config.bayesian_core));
        let tail = &full[base.len()..];

        let mut summary = SweepSummary {
            epoch_objectives: Vec::with_capacity(config.epochs),
            converged: false,
        };
        let mut previous = self.internal_objective(targets);
        for epoch in 1..=config.epochs {
            while self.current > 0 {
                self.move_left();
            }
            self.run_path(&base, targets)?;
            let objective = self.internal_objective(targets);
            summary.epoch_objectives.push(objective);
            let scale = previous.abs().max(real(1e-30));
            let converged = (previous - objective) / scale < config.convergence_tol;
            previous = objective;
            if converged || epoch == config.epochs {
                summary.converged = converged;
                self.run_path(tail, targets)?;
                break;
            }
        }
        Ok(summary)
    }

    /// `J(v) = beta/2 ||y - f||^2 + gamma/2 ||v||^2`, computed without the
    /// dense feature matrix.
    pub fn objective(&self, targets: &DVector<T>, beta: T, gamma: T) -> T {
        let residual = targets - self.responses();
        let half = real::<T>(0.5);
        half * beta * residual.norm_squared() + half * gamma * self.weights.norm_squared()
    }

    /// Convergence metric: the objective at `beta = 1`, `gamma = reg`.
    fn internal_objective(&self, targets: &DVector<T>) -> T {
        self.objective(targets, T::one(), self.reg)
    }
}

/// New left interface after absorbing core `d`:
/// `out[n, r_d] = sum_{r, i} left[n, r] phi[n, i] core[r, i, r_d]`.
fn advance<T: Real>(left: &DMatrix<T>, phi: &DMatrix<T>, core: &TTCore<T>) -> DMatrix<T> {
    let n = left.nrows();
    let mut out = DMatrix::zeros(n, core.right_rank());
    for row in 0..n {
        let slice = core.contract_feature_row(phi, row);
        for rr in 0..core.right_rank() {
            let mut acc = T::zero();
            for rl in 0..core.left_rank() {
                acc += left[(row, rl)] * slice[(rl, rr)];
            }
            out[(row, rr)] = acc;
        }
    }
    out
}

/// New right interface after absorbing core `d`:
/// `out[n, r_{d-1}] = sum_{i, r} phi[n, i] core[r_{d-1}, i, r] right[n, r]`.
fn retreat<T: Real>(right: &DMatrix<T>, phi: &DMatrix<T>, core: &TTCore<T>) -> DMatrix<T> {
    let n = right.nrows();
    let mut out = DMatrix::zeros(n, core.left_rank());
    for row in 0..n {
        let slice = core.contract_feature_row(phi, row);
        for rl in 0..core.left_rank() {
            let mut acc = T::zero();
            for rr in 0..core.right_rank() {
                acc += slice[(rl, rr)] * right[(row, rr)];
            }
            out[(row, rl)] = acc;
        }
    }
    out
}

/// Left and right interfaces for core `d` computed from scratch (used for
/// test-input design matrices and as the cache-refresh oracle).
pub fn interfaces<T: Real>(
    weights: &TTWeights<T>,
    phis: &[DMatrix<T>],
    d: usize,
) -> Result<(DMatrix<T>, DMatrix<T>)> {
    if d >= weights.num_dims() {
        return Err(Error::IndexOutOfRange {
            index: d,
            mode: 0,
            size: weights.num_dims(),
        });
    }
    let n = phis[0].nrows();
    let mut left = DMatrix::from_element(n, 1, T::one());
    for k in 0..d {
        left = advance(&left, &phis[k], weights.core(k));
    }
    let mut right = DMatrix::from_element(n, 1, T::one());
    for k in (d + 1..weights.num_dims()).rev() {
        right = retreat(&right, &phis[k], weights.core(k));
    }
    Ok((left, right))
}

/// Design matrix for core `d` computed from scratch from weights and
/// feature matrices (the prediction-time path).
pub fn design_from_weights<T: Real>(
    weights: &TTWeights<T>,
    phis: &[DMatrix<T>],
    d: usize,
) -> Result<DMatrix<T>> {
    let (left, right) = interfaces(weights, phis, d)?;
    let inner = khatri_rao_rows(&phis[d], &left)?;
    khatri_rao_rows(&right, &inner)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::{kron, tt_full_vector};
    use approx::assert_abs_diff_eq;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn random_phis(rng: &mut StdRng, dims: usize, n: usize, basis: usize) -> Vec<DMatrix<f64>> {
        (0..dims)
            .map(|_| DMatrix::from_fn(n, basis, |_, _| rng.random_range(-1.0..1.0)))
            .collect()
    }

    #[test]
    fn init_is_deterministic() {
        let a: TTWeights<f64> = init_weights(&[2, 2], 3, 99).unwrap();
        let b: TTWeights<f64> = init_weights(&[2, 2], 3, 99).unwrap();
        assert_eq!(a, b);
        let c: TTWeights<f64> = init_weights(&[2, 2], 3, 100).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn init_rank_one_cores_are_vectors() {
        let w: TTWeights<f64> = init_weights(&[1, 1], 4, 0).unwrap();
        for core in w.cores() {
            assert_eq!(core.left_rank(), 1);
            assert_eq!(core.right_rank(), 1);
            assert_eq!(core.mode_size(), 4);
        }
    }

    #[test]
    fn init_standard_deviation_matches_rule() {
        // D = 3 train with enough entries for a stable sample variance.
        let w: TTWeights<f64> = init_weights(&[24, 24], 24, 7).unwrap();
        for core in w.cores() {
            let m = core.num_entries();
            assert!(m >= 10_000 || core.left_rank() == 1 || core.right_rank() == 1);
            let target_var =
                1.0 / (core.mode_size() * core.left_rank() * core.right_rank()) as f64;
            let sample_var = core.as_vec().iter().map(|v| v * v).sum::<f64>() / m as f64;
            if m >= 10_000 {
                assert!(
                    (sample_var - target_var).abs() <= 0.2 * target_var,
                    "variance {sample_var} not within 20% of {target_var}"
                );
            }
        }
    }

    #[test]
    fn sweep_order_matches_epoch_pattern() {
        assert_eq!(sweep_order(3, None), vec![0, 1, 2, 1]);
        assert_eq!(sweep_order(3, Some(0)), vec![0, 1, 2, 1, 0]);
        assert_eq!(sweep_order(3, Some(1)), vec![0, 1, 2, 1]);
        assert_eq!(sweep_order(3, Some(2)), vec![0, 1, 2, 1, 0, 1, 2]);
        assert_eq!(sweep_order(1, Some(0)), vec![0]);
        assert_eq!(sweep_order(2, Some(0)), vec![0, 1, 0]);
    }

    #[test]
    fn design_matrix_single_core_is_phi() {
        let mut rng = StdRng::seed_from_u64(1);
        let phis = random_phis(&mut rng, 1, 6, 3);
        let w: TTWeights<f64> = init_weights(&[], 3, 0).unwrap();
        let state = SweepState::new(w, &phis, 0.1).unwrap();
        let a = state.design_matrix(0).unwrap();
        assert_eq!(a, phis[0]);
    }

    #[test]
    fn design_times_core_vec_equals_responses() {
        // The module's central oracle: A^(d) vec(core d) is the model response
        // for every d on the same weights.
        let mut rng = StdRng::seed_from_u64(2);
        let phis = random_phis(&mut rng, 3, 8, 2);
        let w: TTWeights<f64> = init_weights(&[2, 3], 2, 5).unwrap();
        let expected = tt_dot_features(&w, &phis).unwrap();
        for d in 0..3 {
            let a = design_from_weights(&w, &phis, d).unwrap();
            let v = DVector::from_row_slice(w.core(d).as_vec());
            let got = &a * &v;
            for n in 0..8 {
                assert_abs_diff_eq!(got[n], expected[n], epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn design_single_row_is_kron_chain() {
        let mut rng = StdRng::seed_from_u64(3);
        let phis = random_phis(&mut rng, 3, 1, 2);
        let w: TTWeights<f64> = init_weights(&[2, 2], 2, 8).unwrap();
        let (left, right) = interfaces(&w, &phis, 1).unwrap();
        let a = design_from_weights(&w, &phis, 1).unwrap();
        let inner = kron(&phis[1].row(0).transpose(), &left.row(0).transpose());
        let expected = kron(&right.row(0).transpose(), &inner);
        for k in 0..a.ncols() {
            assert_abs_diff_eq!(a[(0, k)], expected[k], epsilon = 1e-12);
        }
    }

    #[test]
    fn update_single_core_matches_ridge_closed_form() {
        let mut rng = StdRng::seed_from_u64(4);
        let phis = random_phis(&mut rng, 1, 12, 3);
        let y = DVector::from_fn(12, |_, _| rng.random_range(-1.0..1.0));
        let w: TTWeights<f64> = init_weights(&[], 3, 0).unwrap();
        let reg = 0.37;
        let mut state = SweepState::new(w, &phis, reg).unwrap();
        state.update_core(0, &y).unwrap();

        let a = &phis[0];
        let gram = a.tr_mul(a) + DMatrix::identity(3, 3) * reg;
        let expected = gram.try_inverse().unwrap() * a.tr_mul(&y);
        for i in 0..3 {
            assert_abs_diff_eq!(state.weights().core(0).as_vec()[i], expected[i], epsilon = 1e-10);
        }
    }

    #[test]
    fn update_recovers_noiseless_core_without_regularization() {
        let mut rng = StdRng::seed_from_u64(5);
        let phis = random_phis(&mut rng, 2, 20, 2);
        let w: TTWeights<f64> = init_weights(&[2], 2, 6).unwrap();
        let y = tt_dot_features(&w, &phis).unwrap();
        // perturb core 0, then one exact solve must recover it
        let mut perturbed = w.clone();
        let noisy: Vec<f64> = perturbed
            .core(0)
            .as_vec()
            .iter()
            .map(|v| v + rng.random_range(-0.5..0.5))
            .collect();
        perturbed
            .core_mut(0)
            .set_vec(&DVector::from_vec(noisy))
            .unwrap();
        let mut state = SweepState::new(perturbed, &phis, 0.0).unwrap();
        state.update_core(0, &y).unwrap();
        for (got, want) in state
            .weights()
            .core(0)
            .as_vec()
            .iter()
            .zip(w.core(0).as_vec())
        {
            assert_abs_diff_eq!(got, want, epsilon = 1e-8);
        }
    }

    #[test]
    fn huge_regularization_drives_core_to_zero() {
        let mut rng = StdRng::seed_from_u64(6);
        let phis = random_phis(&mut rng, 2, 10, 2);
        let y = DVector::from_fn(10, |_, _| rng.random_range(-1.0..1.0));
        let w: TTWeights<f64> = init_weights(&[2], 2, 7).unwrap();
        let mut state = SweepState::new(w, &phis, 1e12).unwrap();
        state.update_core(0, &y).unwrap();
        let norm: f64 = state.weights().core(0).norm_squared().sqrt();
        assert!(norm < 1e-6, "core norm {norm} not driven to zero");
    }

    #[test]
    fn rank_deficiency_reported_without_regularization() {
        // Two identical basis columns make the normal matrix singular.
        let phis = vec![DMatrix::from_fn(5, 2, |i, _| i as f64 + 1.0)];
        let w: TTWeights<f64> = init_weights(&[], 2, 0).unwrap();
        let y = DVector::from_element(5, 1.0);
        let mut state = SweepState::new(w, &phis, 0.0).unwrap();
        assert!(matches!(
            state.update_core(0, &y),
            Err(Error::RankDeficient)
        ));
    }

    #[test]
    fn objective_zero_weights_is_half_beta_norm() {
        let phis = vec![DMatrix::from_element(4, 2, 1.0)];
        let core = TTCore::new(1, 2, 1, vec![0.0, 0.0]).unwrap();
        let w = TTWeights::new(vec![core]).unwrap();
        let y = DVector::from_row_slice(&[1.0, 2.0, 3.0, 4.0]);
        let state = SweepState::new(w, &phis, 0.0).unwrap();
        let beta = 2.5;
        assert_abs_diff_eq!(
            state.objective(&y, beta, 1.0),
            0.5 * beta * y.norm_squared(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn objective_perfect_fit_without_weight_penalty_is_zero() {
        let mut rng = StdRng::seed_from_u64(8);
        let phis = random_phis(&mut rng, 2, 6, 2);
        let w: TTWeights<f64> = init_weights(&[2], 2, 9).unwrap();
        let y = tt_dot_features(&w, &phis).unwrap();
        let state = SweepState::new(w, &phis, 0.0).unwrap();
        assert_abs_diff_eq!(state.objective(&y, 1.0, 0.0), 0.0, epsilon = 1e-20);
    }

    #[test]
    fn objective_matches_dense_feature_oracle() {
        let mut rng = StdRng::seed_from_u64(9);
        let phis = random_phis(&mut rng, 3, 7, 2);
        let w: TTWeights<f64> = init_weights(&[2, 2], 2, 10).unwrap();
        let y = DVector::from_fn(7, |_, _| rng.random_range(-1.0..1.0));
        let state = SweepState::new(w.clone(), &phis, 0.0).unwrap();

        let full = tt_full_vector(&w).unwrap();
        let mut dense = DMatrix::zeros(7, full.len());
        for n in 0..7 {
            let row = kron(
                &phis[2].row(n).transpose(),
                &kron(&phis[1].row(n).transpose(), &phis[0].row(n).transpose()),
            );
            dense.set_row(n, &row.transpose());
        }
        let residual = &y - &dense * &full;
        let beta = 1.7;
        let gamma = 0.3;
        let expected = 0.5 * beta * residual.norm_squared() + 0.5 * gamma * w.norm_squared();
        assert_abs_diff_eq!(state.objective(&y, beta, gamma), expected, epsilon = 1e-10);
    }

    #[test]
    fn sweep_objective_never_increases() {
        let mut rng = StdRng::seed_from_u64(10);
        let phis = random_phis(&mut rng, 3, 15, 2);
        let y = DVector::from_fn(15, |_, _| rng.random_range(-1.0..1.0));
        let w: TTWeights<f64> = init_weights(&[2, 2], 2, 11).unwrap();
        let reg = 0.01;
        let mut state = SweepState::new(w, &phis, reg).unwrap();
        let order = sweep_order(3, Some(0));
        let mut prev = state.objective(&y, 1.0, reg);
        for _epoch in 0..3 {
            while state.current_core() > 0 {
                state.move_left();
            }
            for (k, &d) in order.iter().enumerate() {
                state.update_core(d, &y).unwrap();
                let now = state.objective(&y, 1.0, reg);
                assert!(
                    now <= prev * (1.0 + 1e-9) + 1e-12,
                    "objective rose from {prev} to {now}"
                );
                prev = now;
                if let Some(&next) = order.get(k + 1) {
                    state.walk_to(next).unwrap();
                }
            }
        }
    }

    #[test]
    fn two_sweeps_no_worse_than_one() {
        let mut rng = StdRng::seed_from_u64(12);
        let phis = random_phis(&mut rng, 3, 20, 3);
        let y = DVector::from_fn(20, |_, _| rng.random_range(-1.0..1.0));
        let w: TTWeights<f64> = init_weights(&[2, 2], 3, 13).unwrap();
        let reg = 0.05;

        let mut one = SweepState::new(w.clone(), &phis, reg).unwrap();
        let mut cfg = TrainConfig::new(vec![2, 2], 1, 0, 13);
        cfg.convergence_tol = -1.0; // never early-stop
        one.sweep(&y, &cfg).unwrap();

        let mut two = SweepState::new(w, &phis, reg).unwrap();
        cfg.epochs = 2;
        two.sweep(&y, &cfg).unwrap();

        assert!(two.objective(&y, 1.0, reg) <= one.objective(&y, 1.0, reg) + 1e-12);
    }

    #[test]
    fn incremental_caches_match_scratch_recomputation() {
        let mut rng = StdRng::seed_from_u64(14);
        let phis = random_phis(&mut rng, 4, 9, 2);
        let y = DVector::from_fn(9, |_, _| rng.random_range(-1.0..1.0));
        let w: TTWeights<f64> = init_weights(&[2, 2, 2], 2, 15).unwrap();
        let mut state = SweepState::new(w, &phis, 0.1).unwrap();
        let cfg = TrainConfig::new(vec![2, 2, 2], 2, 2, 15);
        state.sweep(&y, &cfg).unwrap();

        let d = state.current_core();
        assert_eq!(d, 2);
        let (left, right) = interfaces(state.weights(), &phis, d).unwrap();
        let cached_a = state.design_matrix(d).unwrap();
        let scratch_a = design_from_weights(state.weights(), &phis, d).unwrap();
        for i in 0..cached_a.nrows() {
            for j in 0..cached_a.ncols() {
                assert_abs_diff_eq!(cached_a[(i, j)], scratch_a[(i, j)], epsilon = 1e-10);
            }
        }
        assert_eq!(left.ncols(), state.left[d].ncols());
        assert_eq!(right.ncols(), state.right[d].ncols());
        for n in 0..9 {
            for c in 0..left.ncols() {
                assert_abs_diff_eq!(left[(n, c)], state.left[d][(n, c)], epsilon = 1e-10);
            }
            for c in 0..right.ncols() {
                assert_abs_diff_eq!(right[(n, c)], state.right[d][(n, c)], epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn training_is_bitwise_deterministic() {
        let mut rng = StdRng::seed_from_u64(16);
        let phis = random_phis(&mut rng, 3, 12, 2);
        let y = DVector::from_fn(12, |_, _| rng.random_range(-1.0..1.0));
        let cfg = TrainConfig::new(vec![2, 2], 3, 1, 21);

        let run = || {
            let w: TTWeights<f64> = init_weights(&cfg.ranks, 2, cfg.init_seed).unwrap();
            let mut state = SweepState::new(w, &phis, 0.01).unwrap();
            state.sweep(&y, &cfg).unwrap();
            state.into_weights()
        };
        let a = run();
        let b = run();
        assert_eq!(a, b);
    }

    #[test]
    fn design_matrix_errors_when_caches_elsewhere() {
        let mut rng = StdRng::seed_from_u64(17);
        let phis = random_phis(&mut rng, 3, 5, 2);
        let w: TTWeights<f64> = init_weights(&[2, 2], 2, 0).unwrap();
        let state = SweepState::new(w, &phis, 0.1).unwrap();
        assert!(state.design_matrix(2).is_err());
    }
}
