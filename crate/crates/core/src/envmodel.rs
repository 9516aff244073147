//! Per-action reward and transition estimators with policy-level aggregates.
//!
//! Each action owns a filter bank for its reward weights `theta_a` and a
//! matrix belief for its transition matrix `F_a`. The policy-level
//! aggregates `theta_pi` / `F_pi` either track the most recently updated
//! action (the training-loop rule) or the uniform average over actions.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kalman::{MatrixBelief, MmaeBank};

/// How `theta_pi` and `F_pi` follow the per-action estimates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PiAggregation {
    /// Overwrite with the estimate of the action just updated.
    #[default]
    LastAction,
    /// Uniform mean over all actions.
    Uniform,
}

/// Reward model: one filter bank per action plus `theta_pi`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RewardModel {
    banks: Vec<MmaeBank>,
    theta_pi: DVector<f64>,
    aggregation: PiAggregation,
}

/// Reward observation outcome.
#[derive(Debug, Clone, Copy)]
pub struct RewardStep {
    /// Innovation of the fused one-step reward prediction.
    pub residual: f64,
    /// All member likelihoods underflowed; weights were kept.
    pub underflow: bool,
}

impl RewardModel {
    pub fn new(banks: Vec<MmaeBank>, aggregation: PiAggregation) -> Result<Self> {
        if banks.is_empty() {
            return Err(Error::Config("reward model needs at least one action".into()));
        }
        let dim = banks[0].dim();
        if banks.iter().any(|b| b.dim() != dim) {
            return Err(Error::Config(
                "all actions must share one feature dimension".into(),
            ));
        }
        let theta_pi = DVector::zeros(dim);
        Ok(Self {
            banks,
            theta_pi,
            aggregation,
        })
    }

    pub fn num_actions(&self) -> usize {
        self.banks.len()
    }

    pub fn dim(&self) -> usize {
        self.banks[0].dim()
    }

    pub fn bank(&self, action: usize) -> &MmaeBank {
        &self.banks[action]
    }

    pub fn theta(&self, action: usize) -> &DVector<f64> {
        self.banks[action].fused().mean()
    }

    pub fn theta_pi(&self) -> &DVector<f64> {
        &self.theta_pi
    }

    pub fn aggregation(&self) -> PiAggregation {
        self.aggregation
    }

    /// Advance the acted action's bank one cycle with regressor `phi_s` and
    /// observation `reward`, then refresh `theta_pi`. Other actions keep
    /// their beliefs untouched.
    pub fn observe(&mut self, phi_s: &DVector<f64>, action: usize, reward: f64) -> Result<RewardStep> {
        let bank = self
            .banks
            .get_mut(action)
            .ok_or(Error::Validation(format!("unknown action {action}")))?;
        let out = bank.step(phi_s, reward)?;
        self.refresh_theta_pi(action);
        Ok(RewardStep {
            residual: out.residual,
            underflow: out.underflow,
        })
    }

    fn refresh_theta_pi(&mut self, last_action: usize) {
        match self.aggregation {
            PiAggregation::LastAction => {
                self.theta_pi = self.banks[last_action].fused().mean().clone();
            }
            PiAggregation::Uniform => {
                let mut mean = DVector::zeros(self.dim());
                for bank in &self.banks {
                    mean += bank.fused().mean();
                }
                self.theta_pi = mean / self.banks.len() as f64;
            }
        }
    }

    /// Predicted expected reward `phi^T theta_a` for the fused estimate.
    pub fn predicted_reward(&self, phi_s: &DVector<f64>, action: usize) -> f64 {
        phi_s.dot(self.banks[action].fused().mean())
    }

    /// `tr(Pi_a)` of the fused posterior covariance.
    pub fn covariance_trace(&self, action: usize) -> f64 {
        self.banks[action].fused().covariance_trace()
    }
}

/// Transition model: one matrix belief per action plus `F_pi`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TransitionModel {
    beliefs: Vec<MatrixBelief>,
    f_pi: DMatrix<f64>,
    aggregation: PiAggregation,
}

/// Transition observation outcome.
#[derive(Debug, Clone, Copy)]
pub struct TransitionStep {
    /// Norm of the one-step feature prediction residual.
    pub residual_norm: f64,
}

impl TransitionModel {
    pub fn new(beliefs: Vec<MatrixBelief>, aggregation: PiAggregation) -> Result<Self> {
        if beliefs.is_empty() {
            return Err(Error::Config(
                "transition model needs at least one action".into(),
            ));
        }
        let dim = beliefs[0].dim();
        if beliefs.iter().any(|b| b.dim() != dim) {
            return Err(Error::Config(
                "all actions must share one feature dimension".into(),
            ));
        }
        let f_pi = beliefs[0].mean().clone();
        Ok(Self {
            beliefs,
            f_pi,
            aggregation,
        })
    }

    pub fn num_actions(&self) -> usize {
        self.beliefs.len()
    }

    pub fn dim(&self) -> usize {
        self.beliefs[0].dim()
    }

    pub fn belief(&self, action: usize) -> &MatrixBelief {
        &self.beliefs[action]
    }

    pub fn f(&self, action: usize) -> &DMatrix<f64> {
        self.beliefs[action].mean()
    }

    pub fn f_pi(&self) -> &DMatrix<f64> {
        &self.f_pi
    }

    /// Advance the acted action's belief with input features `phi_s` and
    /// observed next features `phi_next`, then refresh `F_pi`.
    pub fn observe(
        &mut self,
        phi_s: &DVector<f64>,
        action: usize,
        phi_next: &DVector<f64>,
    ) -> Result<TransitionStep> {
        let belief = self
            .beliefs
            .get_mut(action)
            .ok_or(Error::Validation(format!("unknown action {action}")))?;
        let out = belief.update(phi_s, phi_next)?;
        self.refresh_f_pi(action);
        Ok(TransitionStep {
            residual_norm: out.residual_norm,
        })
    }

    fn refresh_f_pi(&mut self, last_action: usize) {
        match self.aggregation {
            PiAggregation::LastAction => {
                self.f_pi = self.beliefs[last_action].mean().clone();
            }
            PiAggregation::Uniform => {
                let dim = self.dim();
                let mut mean = DMatrix::zeros(dim, dim);
                for belief in &self.beliefs {
                    mean += belief.mean();
                }
                self.f_pi = mean / self.beliefs.len() as f64;
            }
        }
    }

    /// Predicted next features `F_a phi(s)`.
    pub fn predicted_next_features(&self, phi_s: &DVector<f64>, action: usize) -> DVector<f64> {
        self.beliefs[action].predict_output(phi_s)
    }

    /// `tr(S_a)` of the full `L^2 x L^2` covariance.
    pub fn covariance_trace(&self, action: usize) -> f64 {
        self.beliefs[action].covariance_trace()
    }
}

/// Exploration bonus of an action: total posterior uncertainty
/// `tr(Pi_a) + tr(S_a)`. Nonnegative while the covariances stay PSD.
pub fn exploration_bonus(rewards: &RewardModel, transitions: &TransitionModel, action: usize) -> f64 {
    rewards.covariance_trace(action) + transitions.covariance_trace(action)
}
