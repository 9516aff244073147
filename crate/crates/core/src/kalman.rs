//! Recursive Bayesian estimators.
//!
//! Three layers build on each other:
//!
//! * [`GaussianBelief`] + [`KfConfig`] — a linear Kalman filter over a
//!   parameter vector with scalar measurements `y = h^T x + noise`.
//! * [`MmaeBank`] — a bank of parallel filters fused by likelihood-derived
//!   probabilistic weights (multiple-model adaptive estimation).
//! * [`MatrixBelief`] — a Kalman filter over a parameter *matrix* `F` with
//!   vector measurements `y = F x + noise`, equivalent to a standard filter
//!   on `vec(F)` with evolution `decay * I` and regressor `x^T (x) I`.
//!
//! All covariance updates re-symmetrize with `(C + C^T) / 2`; the plain-form
//! covariance update is sufficient at the dimensions used here (L <= 36).

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric;

/// Likelihoods summing below this are treated as total underflow and the
/// bank keeps its previous weights for the step.
pub const LIKELIHOOD_UNDERFLOW: f64 = 1e-300;

/// Gaussian belief over a parameter vector: mean and covariance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianBelief {
    mean: DVector<f64>,
    covariance: DMatrix<f64>,
}

/// Outcome of a measurement update.
#[derive(Debug, Clone)]
pub struct KfUpdate {
    /// Innovation `y - h^T mean` against the pre-update mean.
    pub residual: f64,
    /// Kalman gain vector.
    pub gain: DVector<f64>,
}

impl GaussianBelief {
    pub fn new(mean: DVector<f64>, covariance: DMatrix<f64>) -> Result<Self> {
        if covariance.nrows() != mean.len() || covariance.ncols() != mean.len() {
            return Err(Error::Dimension {
                context: "GaussianBelief covariance",
                expected: mean.len(),
                actual: covariance.nrows(),
            });
        }
        let mut covariance = covariance;
        numeric::symmetrize(&mut covariance);
        Ok(Self { mean, covariance })
    }

    /// Zero mean with covariance `prior_cov * I`.
    pub fn isotropic(dim: usize, prior_cov: f64) -> Self {
        Self {
            mean: DVector::zeros(dim),
            covariance: DMatrix::identity(dim, dim) * prior_cov,
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.covariance
    }

    pub fn covariance_trace(&self) -> f64 {
        self.covariance.trace()
    }

    /// Time update: `mean <- G mean`, `cov <- G cov G^T + P_omega`.
    pub fn predicted(&self, cfg: &KfConfig) -> Result<Self> {
        if cfg.evolution.ncols() != self.dim() {
            return Err(Error::Dimension {
                context: "kf predict evolution matrix",
                expected: self.dim(),
                actual: cfg.evolution.ncols(),
            });
        }
        let mean = &cfg.evolution * &self.mean;
        let mut covariance =
            &cfg.evolution * &self.covariance * cfg.evolution.transpose() + &cfg.process_noise;
        numeric::symmetrize(&mut covariance);
        Ok(Self { mean, covariance })
    }

    /// Innovation variance `Z = h^T cov h + noise_var` for a scalar measurement.
    pub fn innovation_variance(&self, h: &DVector<f64>, noise_var: f64) -> f64 {
        (h.transpose() * &self.covariance * h)[(0, 0)] + noise_var
    }

    /// Measurement update with scalar observation `y` and regressor row `h`.
    pub fn update(&mut self, h: &DVector<f64>, y: f64, noise_var: f64) -> Result<KfUpdate> {
        if h.len() != self.dim() {
            return Err(Error::Dimension {
                context: "kf update regressor",
                expected: self.dim(),
                actual: h.len(),
            });
        }
        let u = &self.covariance * h;
        let z = h.dot(&u) + noise_var;
        if z <= 0.0 || !z.is_finite() {
            return Err(Error::Degenerate(format!(
                "innovation variance {z} is not positive"
            )));
        }
        let residual = y - h.dot(&self.mean);
        let gain = &u / z;
        self.mean += &gain * residual;
        // (I - K h^T) P  ==  P - u u^T / z   for symmetric P
        self.covariance -= &u * u.transpose() / z;
        numeric::symmetrize(&mut self.covariance);
        Ok(KfUpdate { residual, gain })
    }

    /// Gaussian density of the observation under the predicted belief.
    pub fn likelihood(&self, h: &DVector<f64>, y: f64, noise_var: f64) -> Result<f64> {
        let z = self.innovation_variance(h, noise_var);
        if z <= 0.0 || !z.is_finite() {
            return Err(Error::Degenerate(format!(
                "likelihood variance {z} is not positive"
            )));
        }
        let residual = y - h.dot(&self.mean);
        Ok((-0.5 * residual * residual / z).exp() / (2.0 * std::f64::consts::PI * z).sqrt())
    }
}

/// Per-filter model: evolution matrix, process noise and measurement noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KfConfig {
    pub evolution: DMatrix<f64>,
    pub process_noise: DMatrix<f64>,
    pub measurement_noise_var: f64,
}

impl KfConfig {
    pub fn new(
        evolution: DMatrix<f64>,
        process_noise: DMatrix<f64>,
        measurement_noise_var: f64,
    ) -> Result<Self> {
        if evolution.nrows() != evolution.ncols() {
            return Err(Error::Config("evolution matrix must be square".into()));
        }
        if process_noise.shape() != evolution.shape() {
            return Err(Error::Dimension {
                context: "KfConfig process noise",
                expected: evolution.nrows(),
                actual: process_noise.nrows(),
            });
        }
        if !(measurement_noise_var > 0.0) {
            return Err(Error::Config(format!(
                "measurement noise variance must be positive, got {measurement_noise_var}"
            )));
        }
        Ok(Self {
            evolution,
            process_noise,
            measurement_noise_var,
        })
    }

    /// Random-walk model: `G = I`, `P_omega = process_noise * I`.
    pub fn random_walk(dim: usize, process_noise: f64, measurement_noise_var: f64) -> Result<Self> {
        Self::new(
            DMatrix::identity(dim, dim),
            DMatrix::identity(dim, dim) * process_noise,
            measurement_noise_var,
        )
    }
}

/// Outcome of one bank step.
#[derive(Debug, Clone)]
pub struct MmaeStep {
    /// Innovation of the weight-fused prediction.
    pub residual: f64,
    /// True when every member likelihood underflowed and weights were kept.
    pub underflow: bool,
}

/// Bank of parallel Kalman filters fused by probabilistic weights.
///
/// How members of a bank larger than one should differ (priors, noise
/// levels, evolution models) is up to the caller; the bank only requires
/// equal parameter dimension across members.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MmaeBank {
    members: Vec<(GaussianBelief, KfConfig)>,
    weights: DVector<f64>,
    fused: GaussianBelief,
}

impl MmaeBank {
    /// Build a bank with uniform initial weights `1 / M`.
    pub fn new(members: Vec<(GaussianBelief, KfConfig)>) -> Result<Self> {
        if members.is_empty() {
            return Err(Error::Config("bank needs at least one filter".into()));
        }
        let dim = members[0].0.dim();
        for (belief, cfg) in &members {
            if belief.dim() != dim || cfg.evolution.nrows() != dim {
                return Err(Error::Dimension {
                    context: "MmaeBank member",
                    expected: dim,
                    actual: belief.dim(),
                });
            }
        }
        let m = members.len();
        let weights = DVector::from_element(m, 1.0 / m as f64);
        let fused = Self::fuse(&members, &weights);
        Ok(Self {
            members,
            weights,
            fused,
        })
    }

    /// Single random-walk filter around a zero prior.
    pub fn single(
        dim: usize,
        prior_cov: f64,
        process_noise: f64,
        measurement_noise_var: f64,
    ) -> Result<Self> {
        Self::new(vec![(
            GaussianBelief::isotropic(dim, prior_cov),
            KfConfig::random_walk(dim, process_noise, measurement_noise_var)?,
        )])
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.members[0].0.dim()
    }

    pub fn weights(&self) -> &DVector<f64> {
        &self.weights
    }

    pub fn members(&self) -> &[(GaussianBelief, KfConfig)] {
        &self.members
    }

    /// Weight-fused posterior.
    pub fn fused(&self) -> &GaussianBelief {
        &self.fused
    }

    /// Advance every member one predict + update cycle, reweight by the
    /// likelihood of the observation under each predicted member, and refresh
    /// the fused belief.
    pub fn step(&mut self, h: &DVector<f64>, y: f64) -> Result<MmaeStep> {
        let m = self.members.len();
        let mut likelihoods = DVector::zeros(m);
        let mut fused_prediction = 0.0;
        for (i, (belief, cfg)) in self.members.iter_mut().enumerate() {
            *belief = belief.predicted(cfg)?;
            likelihoods[i] = belief.likelihood(h, y, cfg.measurement_noise_var)?;
            fused_prediction += self.weights[i] * h.dot(belief.mean());
            belief.update(h, y, cfg.measurement_noise_var)?;
        }
        let residual = y - fused_prediction;

        let mut underflow = false;
        let normalizer: f64 = self
            .weights
            .iter()
            .zip(likelihoods.iter())
            .map(|(w, l)| w * l)
            .sum();
        if normalizer > LIKELIHOOD_UNDERFLOW {
            for i in 0..m {
                self.weights[i] = self.weights[i] * likelihoods[i] / normalizer;
            }
        } else {
            // All filters consider the observation impossible; reweighting
            // would divide by zero, so the step keeps the previous weights.
            underflow = true;
        }

        self.fused = Self::fuse(&self.members, &self.weights);
        Ok(MmaeStep {
            residual,
            underflow,
        })
    }

    /// `theta = sum_i w_i theta_i`,
    /// `Pi = sum_i w_i (Pi_i + (theta_i - theta)(theta_i - theta)^T)`.
    fn fuse(members: &[(GaussianBelief, KfConfig)], weights: &DVector<f64>) -> GaussianBelief {
        let dim = members[0].0.dim();
        if members.len() == 1 {
            return members[0].0.clone();
        }
        let mut mean = DVector::zeros(dim);
        for (i, (belief, _)) in members.iter().enumerate() {
            mean += belief.mean() * weights[i];
        }
        let mut covariance = DMatrix::zeros(dim, dim);
        for (i, (belief, _)) in members.iter().enumerate() {
            let d = belief.mean() - &mean;
            covariance += (belief.covariance() + &d * d.transpose()) * weights[i];
        }
        numeric::symmetrize(&mut covariance);
        GaussianBelief { mean, covariance }
    }
}

/// Outcome of one matrix-filter step.
#[derive(Debug, Clone)]
pub struct MatrixStep {
    /// Norm of the innovation `y - F_pred x`.
    pub residual_norm: f64,
}

/// Gaussian belief over an `L x L` parameter matrix `F` driven by
/// `F_t = decay * F_{t-1} + A_t` and measured through `y = F_t x + B_t`.
///
/// Noise terms are isotropic: `A ~ N(0, process_noise * I_{L^2})` on
/// `vec(F)` and `B ~ N(0, measurement_noise * I_L)`. Under isotropic noise
/// the `L^2 x L^2` covariance of `vec(F)` stays an exact Kronecker product
/// `col_cov (x) I_L` for a column-stacked `vec`, so only the `L x L`
/// `col_cov` factor is stored and each step costs `O(L^2)` instead of
/// `O(L^6)`. The dense equivalence is pinned by tests.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixBelief {
    mean: DMatrix<f64>,
    col_cov: DMatrix<f64>,
    decay: f64,
    process_noise: f64,
    measurement_noise: f64,
}

impl MatrixBelief {
    pub fn new(
        mean: DMatrix<f64>,
        col_cov: DMatrix<f64>,
        decay: f64,
        process_noise: f64,
        measurement_noise: f64,
    ) -> Result<Self> {
        let l = mean.nrows();
        if mean.ncols() != l {
            return Err(Error::Config("matrix belief mean must be square".into()));
        }
        if col_cov.nrows() != l || col_cov.ncols() != l {
            return Err(Error::Dimension {
                context: "MatrixBelief column covariance",
                expected: l,
                actual: col_cov.nrows(),
            });
        }
        if !(decay > 0.0 && decay <= 1.0) {
            return Err(Error::Config(format!(
                "decay must lie in (0, 1], got {decay}"
            )));
        }
        if process_noise < 0.0 {
            return Err(Error::Config("process noise must be nonnegative".into()));
        }
        if !(measurement_noise > 0.0) {
            return Err(Error::Config("measurement noise must be positive".into()));
        }
        let mut col_cov = col_cov;
        numeric::symmetrize(&mut col_cov);
        Ok(Self {
            mean,
            col_cov,
            decay,
            process_noise,
            measurement_noise,
        })
    }

    /// `mean = f0 * I`, `covariance = prior_cov * I_{L^2}`.
    pub fn isotropic(
        l: usize,
        f0: f64,
        prior_cov: f64,
        decay: f64,
        process_noise: f64,
        measurement_noise: f64,
    ) -> Result<Self> {
        Self::new(
            DMatrix::identity(l, l) * f0,
            DMatrix::identity(l, l) * prior_cov,
            decay,
            process_noise,
            measurement_noise,
        )
    }

    pub fn dim(&self) -> usize {
        self.mean.nrows()
    }

    pub fn mean(&self) -> &DMatrix<f64> {
        &self.mean
    }

    pub fn decay(&self) -> f64 {
        self.decay
    }

    /// Column-covariance factor `C` with full covariance `C (x) I_L`.
    pub fn col_cov(&self) -> &DMatrix<f64> {
        &self.col_cov
    }

    /// Materialized `L^2 x L^2` covariance of `vec(F)` (tests/diagnostics).
    pub fn covariance(&self) -> DMatrix<f64> {
        self.col_cov.kronecker(&DMatrix::identity(self.dim(), self.dim()))
    }

    /// `tr(S) = L * tr(C)` without materializing the Kronecker product.
    pub fn covariance_trace(&self) -> f64 {
        self.col_cov.trace() * self.dim() as f64
    }

    /// Predicted mean of the next measurement, `F x`.
    pub fn predict_output(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.mean * x
    }

    /// One filter cycle: time update then measurement update with input
    /// features `x` and observed output features `y`.
    pub fn update(&mut self, x: &DVector<f64>, y: &DVector<f64>) -> Result<MatrixStep> {
        let l = self.dim();
        if x.len() != l {
            return Err(Error::Dimension {
                context: "matrix filter input",
                expected: l,
                actual: x.len(),
            });
        }
        if y.len() != l {
            return Err(Error::Dimension {
                context: "matrix filter output",
                expected: l,
                actual: y.len(),
            });
        }
        if !numeric::all_finite_vec(x) || !numeric::all_finite_vec(y) {
            return Err(Error::Validation(
                "matrix filter features must be finite".into(),
            ));
        }

        // Predict: F <- d F, C <- d^2 C + a I.
        self.mean *= self.decay;
        self.col_cov *= self.decay * self.decay;
        for i in 0..l {
            self.col_cov[(i, i)] += self.process_noise;
        }

        // Update: with regressor x^T (x) I_L the innovation covariance is
        // (x^T C x + b) I_L, a positive scalar times identity.
        let u = &self.col_cov * x;
        let z = x.dot(&u) + self.measurement_noise;
        if z <= 0.0 || !z.is_finite() {
            return Err(Error::Degenerate(format!(
                "matrix filter innovation variance {z} is not positive"
            )));
        }
        let residual = y - &self.mean * x;
        self.mean += &residual * (u.transpose() / z);
        self.col_cov -= &u * u.transpose() / z;
        numeric::symmetrize(&mut self.col_cov);

        Ok(MatrixStep {
            residual_norm: residual.norm(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};
    use rand_distr::{Distribution, StandardNormal};

    fn randn(rng: &mut StdRng) -> f64 {
        StandardNormal.sample(rng)
    }

    #[test]
    fn predict_identity_without_noise_is_noop() {
        let belief = GaussianBelief::new(
            DVector::from_vec(vec![1.0, -2.0]),
            DMatrix::from_row_slice(2, 2, &[0.3, 0.1, 0.1, 0.5]),
        )
        .unwrap();
        let cfg = KfConfig::random_walk(2, 0.0, 1.0).unwrap();
        let out = belief.predicted(&cfg).unwrap();
        assert_eq!(out.mean(), belief.mean());
        assert_eq!(out.covariance(), belief.covariance());
    }

    #[test]
    fn predict_adds_process_noise_on_diagonal() {
        let belief = GaussianBelief::isotropic(3, 0.1);
        let cfg = KfConfig::random_walk(3, 0.01, 1.0).unwrap();
        let out = belief.predicted(&cfg).unwrap();
        for i in 0..3 {
            assert_abs_diff_eq!(out.covariance()[(i, i)], 0.11, epsilon = 1e-15);
        }
        assert_eq!(out.mean(), belief.mean());
    }

    #[test]
    fn predict_scales_mean_through_evolution() {
        let belief = GaussianBelief::new(
            DVector::from_vec(vec![2.0, 0.0]),
            DMatrix::identity(2, 2) * 0.1,
        )
        .unwrap();
        let cfg = KfConfig::new(
            DMatrix::identity(2, 2) * 0.5,
            DMatrix::zeros(2, 2),
            1.0,
        )
        .unwrap();
        let out = belief.predicted(&cfg).unwrap();
        assert_abs_diff_eq!(out.mean()[0], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(out.mean()[1], 0.0, epsilon = 1e-15);
    }

    #[test]
    fn one_dimensional_update_matches_hand_computation() {
        // mean 0, cov 1, h 1, noise 1, y 1 -> gain 0.5, mean 0.5, cov 0.5
        let mut belief = GaussianBelief::isotropic(1, 1.0);
        let h = DVector::from_vec(vec![1.0]);
        let out = belief.update(&h, 1.0, 1.0).unwrap();
        assert_abs_diff_eq!(out.gain[0], 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(out.residual, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(belief.mean()[0], 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(belief.covariance()[(0, 0)], 0.5, epsilon = 1e-15);
    }

    #[test]
    fn zero_regressor_update_is_noop_with_zero_gain() {
        let mut belief = GaussianBelief::isotropic(3, 0.7);
        let before = belief.clone();
        let out = belief.update(&DVector::zeros(3), 5.0, 0.5).unwrap();
        assert_eq!(belief.mean(), before.mean());
        assert_eq!(belief.covariance(), before.covariance());
        assert_eq!(out.gain.norm(), 0.0);
    }

    #[test]
    fn repeated_observations_converge_monotonically() {
        let mut belief = GaussianBelief::isotropic(1, 10.0);
        let h = DVector::from_vec(vec![1.0]);
        let target = 3.0;
        let mut last_gap = f64::INFINITY;
        let mut last_cov = f64::INFINITY;
        for _ in 0..200 {
            belief.update(&h, target, 1.0).unwrap();
            let gap = (belief.mean()[0] - target).abs();
            assert!(gap <= last_gap + 1e-12);
            assert!(belief.covariance()[(0, 0)] <= last_cov);
            last_gap = gap;
            last_cov = belief.covariance()[(0, 0)];
        }
        assert!(last_gap < 1e-1);
        assert!(last_cov < 0.06);
    }

    #[test]
    fn update_shrinks_variance_along_regressor() {
        let mut rng = StdRng::seed_from_u64(7);
        for _ in 0..20 {
            let dim = 4;
            let mut belief = GaussianBelief::isotropic(dim, 1.0);
            let h = DVector::from_fn(dim, |_, _| randn(&mut rng));
            if h.norm() < 1e-6 {
                continue;
            }
            let before = belief.innovation_variance(&h, 0.0);
            belief.update(&h, randn(&mut rng), 0.3).unwrap();
            let after = belief.innovation_variance(&h, 0.0);
            assert!(after < before);
        }
    }

    #[test]
    fn likelihood_matches_standard_normal_values() {
        let belief = GaussianBelief::isotropic(1, 0.5);
        let h = DVector::from_vec(vec![1.0]);
        // Z = 0.5 + 0.5 = 1; residual 0 and residual 1.
        let l0 = belief.likelihood(&h, 0.0, 0.5).unwrap();
        let l1 = belief.likelihood(&h, 1.0, 0.5).unwrap();
        assert_abs_diff_eq!(l0, 0.3989422804014327, epsilon = 1e-12);
        assert_abs_diff_eq!(l1, 0.24197072451914337, epsilon = 1e-12);
        // Doubling the residual never increases the likelihood.
        let l2 = belief.likelihood(&h, 2.0, 0.5).unwrap();
        assert!(l2 < l1 && l1 < l0);
    }

    /// With G = I and no process noise the filter is Bayesian linear
    /// regression; the batch posterior mean is the independent oracle.
    #[test]
    fn recursive_update_equals_batch_bayesian_regression() {
        let mut rng = StdRng::seed_from_u64(42);
        for _ in 0..50 {
            let dim = rng.random_range(1..8);
            let n = rng.random_range(dim..40);
            let noise_var = rng.random_range(0.1..2.0);
            let prior_cov = rng.random_range(0.5..5.0);

            let mut belief = GaussianBelief::isotropic(dim, prior_cov);
            let mut xs = Vec::new();
            let mut ys = Vec::new();
            for _ in 0..n {
                let x = DVector::from_fn(dim, |_, _| randn(&mut rng));
                let y = randn(&mut rng);
                belief.update(&x, y, noise_var).unwrap();
                xs.push(x);
                ys.push(y);
            }

            // theta = (Pi0^-1 + X^T X / s^2)^-1 (X^T y / s^2)  with zero prior mean
            let mut a = DMatrix::identity(dim, dim) / prior_cov;
            let mut b = DVector::zeros(dim);
            for (x, y) in xs.iter().zip(ys.iter()) {
                a += x * x.transpose() / noise_var;
                b += x * *y / noise_var;
            }
            let batch = a.lu().solve(&b).unwrap();
            assert!((belief.mean() - &batch).norm() <= 1e-6);
        }
    }

    #[test]
    fn covariance_stays_symmetric_psd_under_random_updates() {
        let mut rng = StdRng::seed_from_u64(9);
        let dim = 6;
        let mut belief = GaussianBelief::isotropic(dim, 2.0);
        let cfg = KfConfig::random_walk(dim, 0.01, 0.5).unwrap();
        for _ in 0..500 {
            belief = belief.predicted(&cfg).unwrap();
            let h = DVector::from_fn(dim, |_, _| randn(&mut rng));
            belief.update(&h, randn(&mut rng), 0.5).unwrap();
            assert!(numeric::max_asymmetry(belief.covariance()) <= 1e-9);
            assert!(numeric::min_symmetric_eigenvalue(belief.covariance()) >= -1e-9);
        }
    }

    #[test]
    fn bank_with_identical_members_keeps_uniform_weights() {
        let mut rng = StdRng::seed_from_u64(3);
        let member = || {
            (
                GaussianBelief::isotropic(2, 1.0),
                KfConfig::random_walk(2, 0.0, 1.0).unwrap(),
            )
        };
        let mut bank = MmaeBank::new(vec![member(), member()]).unwrap();
        for _ in 0..50 {
            let h = DVector::from_fn(2, |_, _| randn(&mut rng));
            bank.step(&h, randn(&mut rng)).unwrap();
            assert_abs_diff_eq!(bank.weights()[0], 0.5, epsilon = 1e-12);
            assert_abs_diff_eq!(bank.weights()[1], 0.5, epsilon = 1e-12);
        }
    }

    #[test]
    fn singleton_bank_equals_its_member() {
        let mut bank = MmaeBank::single(3, 1.0, 0.0, 0.7).unwrap();
        let mut solo = GaussianBelief::isotropic(3, 1.0);
        let cfg = KfConfig::random_walk(3, 0.0, 0.7).unwrap();
        let mut rng = StdRng::seed_from_u64(11);
        for _ in 0..30 {
            let h = DVector::from_fn(3, |_, _| randn(&mut rng));
            let y = randn(&mut rng);
            bank.step(&h, y).unwrap();
            solo = solo.predicted(&cfg).unwrap();
            solo.update(&h, y, 0.7).unwrap();
            assert_abs_diff_eq!(bank.weights()[0], 1.0, epsilon = 1e-15);
            assert!((bank.fused().mean() - solo.mean()).norm() < 1e-12);
            assert!((bank.fused().covariance() - solo.covariance()).norm() < 1e-12);
        }
    }

    /// Member A predicts the observations exactly; member B's prior is ten
    /// standard deviations off. The expected weights come from iterating the
    /// weight recursion with likelihoods computed independently here.
    #[test]
    fn accurate_member_wins_the_weights() {
        let dim = 1;
        let h = DVector::from_vec(vec![1.0]);
        let good = GaussianBelief::new(DVector::from_vec(vec![0.0]), DMatrix::identity(1, 1) * 0.1)
            .unwrap();
        let bad = GaussianBelief::new(DVector::from_vec(vec![10.0]), DMatrix::identity(1, 1) * 0.1)
            .unwrap();
        let cfg = KfConfig::random_walk(dim, 0.0, 1.0).unwrap();
        let mut bank = MmaeBank::new(vec![(good.clone(), cfg.clone()), (bad.clone(), cfg.clone())])
            .unwrap();

        // Independent weight recursion oracle.
        let mut oracle = [0.5f64, 0.5];
        let mut beliefs = [good, bad];
        for _ in 0..5 {
            let mut lik = [0.0f64; 2];
            for (i, b) in beliefs.iter_mut().enumerate() {
                lik[i] = b.likelihood(&h, 0.0, 1.0).unwrap();
                b.update(&h, 0.0, 1.0).unwrap();
            }
            let z = oracle[0] * lik[0] + oracle[1] * lik[1];
            oracle = [oracle[0] * lik[0] / z, oracle[1] * lik[1] / z];

            bank.step(&h, 0.0).unwrap();
            assert_abs_diff_eq!(bank.weights()[0], oracle[0], epsilon = 1e-12);
            assert_abs_diff_eq!(bank.weights()[1], oracle[1], epsilon = 1e-12);
        }
        assert!(bank.weights()[0] > 0.999);
    }

    #[test]
    fn weights_stay_on_simplex_and_fusion_is_permutation_invariant() {
        let mut rng = StdRng::seed_from_u64(21);
        let mk = |mean: f64, cov: f64, noise: f64| {
            (
                GaussianBelief::new(
                    DVector::from_element(2, mean),
                    DMatrix::identity(2, 2) * cov,
                )
                .unwrap(),
                KfConfig::random_walk(2, 0.001, noise).unwrap(),
            )
        };
        let a = mk(0.0, 1.0, 0.5);
        let b = mk(1.0, 2.0, 1.0);
        let c = mk(-1.0, 0.5, 2.0);
        let mut bank = MmaeBank::new(vec![a.clone(), b.clone(), c.clone()]).unwrap();
        let mut flipped = MmaeBank::new(vec![c, b, a]).unwrap();
        for _ in 0..40 {
            let h = DVector::from_fn(2, |_, _| randn(&mut rng));
            let y = randn(&mut rng);
            bank.step(&h, y).unwrap();
            flipped.step(&h, y).unwrap();
            let sum: f64 = bank.weights().iter().sum();
            assert_abs_diff_eq!(sum, 1.0, epsilon = 1e-12);
            assert!(bank.weights().iter().all(|&w| (0.0..=1.0).contains(&w)));
            assert!((bank.fused().mean() - flipped.fused().mean()).norm() < 1e-12);
        }
    }

    #[test]
    fn total_likelihood_underflow_keeps_weights() {
        // Tiny noise and an absurd observation push both likelihoods to zero.
        let mk = |mean: f64| {
            (
                GaussianBelief::new(
                    DVector::from_element(1, mean),
                    DMatrix::identity(1, 1) * 1e-12,
                )
                .unwrap(),
                KfConfig::random_walk(1, 0.0, 1e-12).unwrap(),
            )
        };
        let mut bank = MmaeBank::new(vec![mk(0.0), mk(0.5)]).unwrap();
        let h = DVector::from_vec(vec![1.0]);
        bank.step(&h, 0.2).unwrap(); // tilt the weights away from uniform
        let before = bank.weights().clone();
        let out = bank.step(&h, 1e9).unwrap();
        assert!(out.underflow);
        assert_eq!(bank.weights(), &before);
    }

    // ---- matrix filter ----------------------------------------------------

    /// Dense oracle: the same model run as a standard Kalman filter on
    /// `vec(F)` with evolution `decay * I_{L^2}`, process noise `a I_{L^2}`,
    /// regressor `x^T (x) I_L` and measurement noise `b I_L`.
    struct DenseVecKf {
        mean: DVector<f64>,
        cov: DMatrix<f64>,
        decay: f64,
        a: f64,
        b: f64,
        l: usize,
    }

    impl DenseVecKf {
        fn from_belief(mb: &MatrixBelief) -> Self {
            let l = mb.dim();
            let mut mean = DVector::zeros(l * l);
            for j in 0..l {
                for i in 0..l {
                    mean[j * l + i] = mb.mean()[(i, j)]; // column stacking
                }
            }
            Self {
                mean,
                cov: mb.covariance(),
                decay: mb.decay,
                a: mb.process_noise,
                b: mb.measurement_noise,
                l,
            }
        }

        fn step(&mut self, x: &DVector<f64>, y: &DVector<f64>) {
            let n = self.l * self.l;
            self.mean *= self.decay;
            self.cov = &self.cov * (self.decay * self.decay)
                + DMatrix::identity(n, n) * self.a;
            // H = x^T (x) I_L  (L x L^2)
            let mut h = DMatrix::zeros(self.l, n);
            for j in 0..self.l {
                for i in 0..self.l {
                    h[(i, j * self.l + i)] = x[j];
                }
            }
            let s = &h * &self.cov * h.transpose() + DMatrix::identity(self.l, self.l) * self.b;
            let k = &self.cov * h.transpose() * s.clone().try_inverse().unwrap();
            let innovation = y - &h * &self.mean;
            self.mean += &k * innovation;
            self.cov = (DMatrix::identity(n, n) - &k * &h) * &self.cov;
        }

        fn mean_matrix(&self) -> DMatrix<f64> {
            let mut m = DMatrix::zeros(self.l, self.l);
            for j in 0..self.l {
                for i in 0..self.l {
                    m[(i, j)] = self.mean[j * self.l + i];
                }
            }
            m
        }
    }

    #[test]
    fn matrix_filter_matches_dense_vectorized_filter() {
        let mut rng = StdRng::seed_from_u64(5);
        for &l in &[2usize, 3] {
            let mut mb = MatrixBelief::isotropic(l, 0.1, 2.0, 0.9, 0.05, 0.5).unwrap();
            let mut dense = DenseVecKf::from_belief(&mb);
            for _ in 0..40 {
                let x = DVector::from_fn(l, |_, _| randn(&mut rng));
                let y = DVector::from_fn(l, |_, _| randn(&mut rng));
                mb.update(&x, &y).unwrap();
                dense.step(&x, &y);
                assert!((mb.mean() - dense.mean_matrix()).norm() < 1e-9);
                assert!((mb.covariance() - &dense.cov).norm() < 1e-8);
            }
        }
    }

    #[test]
    fn zero_input_runs_only_the_time_update() {
        let mut mb = MatrixBelief::isotropic(3, 0.5, 1.0, 0.9, 0.2, 1.0).unwrap();
        let mean_before = mb.mean().clone();
        let cov_before = mb.col_cov().clone();
        mb.update(&DVector::zeros(3), &DVector::from_element(3, 4.0))
            .unwrap();
        assert!((mb.mean() - mean_before * 0.9).norm() < 1e-14);
        let expected = cov_before * 0.81 + DMatrix::identity(3, 3) * 0.2;
        assert!((mb.col_cov() - expected).norm() < 1e-14);
    }

    #[test]
    fn one_dimensional_matrix_filter_reduces_to_scalar_path() {
        let mut mb = MatrixBelief::isotropic(1, 0.3, 2.0, 1.0, 0.0, 0.7).unwrap();
        let mut scalar = GaussianBelief::new(
            DVector::from_vec(vec![0.3]),
            DMatrix::identity(1, 1) * 2.0,
        )
        .unwrap();
        let cfg = KfConfig::random_walk(1, 0.0, 0.7).unwrap();
        let mut rng = StdRng::seed_from_u64(13);
        for _ in 0..50 {
            let x = DVector::from_vec(vec![randn(&mut rng)]);
            let y = DVector::from_vec(vec![randn(&mut rng)]);
            mb.update(&x, &y).unwrap();
            scalar = scalar.predicted(&cfg).unwrap();
            scalar.update(&x, y[0], 0.7).unwrap();
            assert!((mb.mean()[(0, 0)] - scalar.mean()[0]).abs() <= 1e-12);
            assert!((mb.col_cov()[(0, 0)] - scalar.covariance()[(0, 0)]).abs() <= 1e-12);
        }
    }

    /// Monte-Carlo regression oracle: with decay 1 and no process noise the
    /// filter must recover a fixed matrix from noisy products.
    #[test]
    fn recovers_synthetic_transition_matrix() {
        let l = 8;
        let mut rng = StdRng::seed_from_u64(2024);
        let raw = DMatrix::from_fn(l, l, |_, _| randn(&mut rng));
        let spectral = raw.singular_values().max();
        let target = raw * (0.9 / spectral);

        let mut mb = MatrixBelief::isotropic(l, 0.0, 10.0, 1.0, 0.0, 0.04).unwrap();
        for _ in 0..2000 {
            let x = DVector::from_fn(l, |_, _| randn(&mut rng));
            let noise = DVector::from_fn(l, |_, _| 0.2 * randn(&mut rng));
            let y = &target * &x + noise;
            mb.update(&x, &y).unwrap();
        }
        assert!((mb.mean() - &target).norm() <= 0.1);
    }

    #[test]
    fn column_covariance_stays_symmetric_psd() {
        let mut rng = StdRng::seed_from_u64(77);
        let l = 5;
        let mut mb = MatrixBelief::isotropic(l, 0.0, 3.0, 0.9, 0.5, 1.0).unwrap();
        for _ in 0..300 {
            let x = DVector::from_fn(l, |_, _| randn(&mut rng));
            let y = DVector::from_fn(l, |_, _| randn(&mut rng));
            mb.update(&x, &y).unwrap();
            assert!(numeric::max_asymmetry(mb.col_cov()) <= 1e-9);
            assert!(numeric::min_symmetric_eigenvalue(mb.col_cov()) >= -1e-9);
        }
    }
}
