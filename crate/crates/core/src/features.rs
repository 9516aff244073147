//! Radial-basis-function state featurization and its online refinement.
//!
//! A feature map carries `L` Gaussian bumps with diagonal covariances. Each
//! raw state `s` maps to `phi(s)` with components
//! `phi_j(s) = exp(-1/2 (s - mu_j)^T Sigma_j^-1 (s - mu_j))`, so every
//! component lies in `(0, 1]`. The map is refined by stochastic gradient
//! descent on a joint model-fit loss combining the reward residual, the
//! transition residual and a unit-norm regularizer.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smallest admissible RBF variance after a gradient step.
pub const SIGMA_FLOOR: f64 = 1e-6;

/// One Gaussian bump: center and per-dimension variances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RbfBasis {
    pub mu: DVector<f64>,
    /// Diagonal of the covariance matrix (variances, strictly positive).
    pub sigma_diag: DVector<f64>,
}

impl RbfBasis {
    pub fn new(mu: DVector<f64>, sigma_diag: DVector<f64>) -> Result<Self> {
        if mu.len() != sigma_diag.len() {
            return Err(Error::Dimension {
                context: "RbfBasis",
                expected: mu.len(),
                actual: sigma_diag.len(),
            });
        }
        if sigma_diag.iter().any(|&v| !(v > 0.0)) {
            return Err(Error::Config("RBF variances must be positive".into()));
        }
        Ok(Self { mu, sigma_diag })
    }

    fn response(&self, s: &DVector<f64>) -> f64 {
        let mut exponent = 0.0;
        for d in 0..self.mu.len() {
            let diff = s[d] - self.mu[d];
            exponent += diff * diff / self.sigma_diag[d];
        }
        (-0.5 * exponent).exp()
    }
}

/// Where grid centers sit relative to the given range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridPlacement {
    /// `order` interior points, a margin of `(hi-lo)/(order+1)` at each end.
    Interior,
    /// `order` points including both endpoints.
    Spanning,
}

/// A bank of `L` radial basis functions plus the SGD learning rates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMap {
    bases: Vec<RbfBasis>,
    pub lr_mu: f64,
    pub lr_sigma: f64,
}

/// One transition sample in raw state coordinates.
#[derive(Debug, Clone, Copy)]
pub struct FeatureSample<'a> {
    pub s: &'a DVector<f64>,
    pub s_next: &'a DVector<f64>,
    pub reward: f64,
}

/// Outcome of a gradient step.
#[derive(Debug, Clone, Copy)]
pub struct SgdOutcome {
    /// True when the gradient was non-finite and the step was skipped.
    pub skipped: bool,
}

impl FeatureMap {
    pub fn new(bases: Vec<RbfBasis>, lr_mu: f64, lr_sigma: f64) -> Result<Self> {
        if bases.is_empty() {
            return Err(Error::Config("feature map needs at least one basis".into()));
        }
        let d = bases[0].mu.len();
        if bases.iter().any(|b| b.mu.len() != d) {
            return Err(Error::Config("all bases must share one input dimension".into()));
        }
        if !(lr_mu > 0.0 && lr_sigma > 0.0) {
            return Err(Error::Config("learning rates must be positive".into()));
        }
        Ok(Self {
            bases,
            lr_mu,
            lr_sigma,
        })
    }

    /// Evenly spaced grid over `[lo, hi]^d` with `order` points per axis and
    /// every variance set to `2 / (order - 1)`.
    pub fn grid(
        d: usize,
        order: usize,
        lo: &DVector<f64>,
        hi: &DVector<f64>,
        placement: GridPlacement,
        lr_mu: f64,
        lr_sigma: f64,
    ) -> Result<Self> {
        if order < 2 {
            return Err(Error::Config(format!(
                "grid order must be at least 2, got {order}"
            )));
        }
        if lo.len() != d || hi.len() != d {
            return Err(Error::Dimension {
                context: "grid bounds",
                expected: d,
                actual: lo.len(),
            });
        }
        if lo.iter().zip(hi.iter()).any(|(a, b)| a >= b) {
            return Err(Error::Config("grid bounds must satisfy lo < hi".into()));
        }
        let axis = |dim: usize, k: usize| -> f64 {
            let span = hi[dim] - lo[dim];
            match placement {
                GridPlacement::Interior => lo[dim] + (k + 1) as f64 * span / (order + 1) as f64,
                GridPlacement::Spanning => lo[dim] + k as f64 * span / (order - 1) as f64,
            }
        };
        let variance = 2.0 / (order - 1) as f64;
        let l = order.pow(d as u32);
        let mut bases = Vec::with_capacity(l);
        for idx in 0..l {
            let mut rem = idx;
            let mut mu = DVector::zeros(d);
            for dim in 0..d {
                mu[dim] = axis(dim, rem % order);
                rem /= order;
            }
            bases.push(RbfBasis::new(mu, DVector::from_element(d, variance))?);
        }
        Self::new(bases, lr_mu, lr_sigma)
    }

    /// Number of basis functions `L`.
    pub fn len(&self) -> usize {
        self.bases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bases.is_empty()
    }

    /// Raw state dimension `D`.
    pub fn input_dim(&self) -> usize {
        self.bases[0].mu.len()
    }

    pub fn bases(&self) -> &[RbfBasis] {
        &self.bases
    }

    /// `phi(s)`, every component in `(0, 1]`.
    pub fn featurize(&self, s: &DVector<f64>) -> DVector<f64> {
        DVector::from_fn(self.bases.len(), |j, _| self.bases[j].response(s))
    }

    /// Joint model-fit loss
    /// `J = (r - theta^T phi(s))^2 + ||phi(s') - F phi(s)||^2 + (||phi(s)||^2 - 1)^2`.
    ///
    /// The norm regularizer is squared here: minimizing the raw signed term
    /// would be unbounded below, while the squared form keeps the intended
    /// pull toward unit-norm features.
    pub fn loss(&self, sample: &FeatureSample, theta_a: &DVector<f64>, f_a: &DMatrix<f64>) -> f64 {
        let phi_s = self.featurize(sample.s);
        let phi_next = self.featurize(sample.s_next);
        let reward_residual = sample.reward - theta_a.dot(&phi_s);
        let transition_residual = &phi_next - f_a * &phi_s;
        let norm_excess = phi_s.norm_squared() - 1.0;
        reward_residual * reward_residual
            + transition_residual.norm_squared()
            + norm_excess * norm_excess
    }

    /// Analytic gradient of the loss with respect to every center and every
    /// diagonal variance, in the flat order `[mu_j(d)..., sigma_j(d)...]`.
    ///
    /// Both `phi(s)` and `phi(s')` depend on the basis parameters, so the
    /// transition term contributes through the two featurizations.
    pub fn loss_gradient(
        &self,
        sample: &FeatureSample,
        theta_a: &DVector<f64>,
        f_a: &DMatrix<f64>,
    ) -> (Vec<DVector<f64>>, Vec<DVector<f64>>) {
        let phi_s = self.featurize(sample.s);
        let phi_next = self.featurize(sample.s_next);
        let reward_residual = sample.reward - theta_a.dot(&phi_s);
        let transition_residual = &phi_next - f_a * &phi_s;
        let norm_excess = phi_s.norm_squared() - 1.0;

        // dJ/dphi(s) and dJ/dphi(s')
        let grad_phi_s = theta_a * (-2.0 * reward_residual)
            - f_a.transpose() * &transition_residual * 2.0
            + &phi_s * (4.0 * norm_excess);
        let grad_phi_next = &transition_residual * 2.0;

        let d = self.input_dim();
        let mut grad_mu = Vec::with_capacity(self.bases.len());
        let mut grad_sigma = Vec::with_capacity(self.bases.len());
        for (j, basis) in self.bases.iter().enumerate() {
            let mut gm = DVector::zeros(d);
            let mut gs = DVector::zeros(d);
            for dim in 0..d {
                let var = basis.sigma_diag[dim];
                let diff_s = sample.s[dim] - basis.mu[dim];
                let diff_n = sample.s_next[dim] - basis.mu[dim];
                // dphi_j/dmu = phi_j * diff / var ; dphi_j/dvar = phi_j * diff^2 / (2 var^2)
                gm[dim] = grad_phi_s[j] * phi_s[j] * diff_s / var
                    + grad_phi_next[j] * phi_next[j] * diff_n / var;
                gs[dim] = grad_phi_s[j] * phi_s[j] * diff_s * diff_s / (2.0 * var * var)
                    + grad_phi_next[j] * phi_next[j] * diff_n * diff_n / (2.0 * var * var);
            }
            grad_mu.push(gm);
            grad_sigma.push(gs);
        }
        (grad_mu, grad_sigma)
    }

    /// One SGD step on the loss; variances are clamped at [`SIGMA_FLOOR`] and
    /// the whole step is skipped if any gradient entry is non-finite.
    pub fn sgd_step(
        &mut self,
        sample: &FeatureSample,
        theta_a: &DVector<f64>,
        f_a: &DMatrix<f64>,
    ) -> SgdOutcome {
        let (grad_mu, grad_sigma) = self.loss_gradient(sample, theta_a, f_a);
        let finite = grad_mu
            .iter()
            .chain(grad_sigma.iter())
            .all(|g| g.iter().all(|v| v.is_finite()));
        if !finite {
            return SgdOutcome { skipped: true };
        }
        for (j, basis) in self.bases.iter_mut().enumerate() {
            basis.mu -= &grad_mu[j] * self.lr_mu;
            basis.sigma_diag -= &grad_sigma[j] * self.lr_sigma;
            for v in basis.sigma_diag.iter_mut() {
                if *v < SIGMA_FLOOR {
                    *v = SIGMA_FLOOR;
                }
            }
        }
        SgdOutcome { skipped: false }
    }
}
