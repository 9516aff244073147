//! The learning agent: model updates, action selection, episode loop.
//!
//! One step processes a transition `(s, a, s', r)` in a fixed order:
//! featurize both states, advance the acted action's reward filter, advance
//! its transition estimate, then refine the feature map by one gradient
//! step. Action selection maximizes `Q(s, b) + tr(Pi_b) + tr(S_b)` — the
//! posterior-trace bonus steers the agent toward actions it knows least
//! about. Two ablation variants share the machinery: an epsilon-greedy
//! policy without the bonus, and a temporal-difference variant that
//! estimates the successor map directly instead of a transition model.

use nalgebra::DVector;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::envmodel::{exploration_bonus, RewardModel, TransitionModel};
use crate::envs::{TaskSpec, TaskState};
use crate::error::{Error, Result};
use crate::features::{FeatureMap, FeatureSample};
use crate::kalman::MatrixBelief;
use crate::successor::{error_bound, guarded_value_weights};

/// Action-selection rule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    /// Greedy on Q plus the posterior-trace exploration bonus.
    UncertaintyAware,
    /// Random action with probability epsilon, otherwise greedy on Q alone.
    EpsilonGreedy { epsilon: f64 },
    /// Successor map learned from temporal-difference measurements; no
    /// transition model.
    TdSuccessor,
}

/// What the agent learns about the dynamics.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum Dynamics {
    /// Per-action transition matrices (the full model path).
    Model(TransitionModel),
    /// A single successor-map estimate `m(s) = Psi phi(s)` updated from
    /// `phi(s) = Psi (phi(s) - gamma phi(s')) + noise`.
    TdSuccessor(MatrixBelief),
}

/// Counters for rare numerical events, aggregated per run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostics {
    /// Times the value solve had to shrink the transition matrix.
    pub resolvent_shrinks: u64,
    /// Times every bank likelihood underflowed and weights were kept.
    pub likelihood_underflows: u64,
    /// Feature-gradient steps skipped because of non-finite gradients.
    pub sgd_skips: u64,
}

impl Diagnostics {
    pub fn merge(&mut self, other: &Diagnostics) {
        self.resolvent_shrinks += other.resolvent_shrinks;
        self.likelihood_underflows += other.likelihood_underflows;
        self.sgd_skips += other.sgd_skips;
    }
}

/// One transition in feature-input coordinates.
#[derive(Debug, Clone, Copy)]
pub struct Sample<'a> {
    pub obs: &'a DVector<f64>,
    pub action: usize,
    pub next_obs: &'a DVector<f64>,
    pub reward: f64,
}

/// Per-episode record kept by the harness.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub length: usize,
    pub total_return: f64,
    pub reached_goal: bool,
    /// Error-bound value after each step, when tracking is enabled.
    pub bound_trace: Option<Vec<f64>>,
}

/// Full learnable state; also the checkpoint unit for transfer.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Agent {
    features: FeatureMap,
    rewards: RewardModel,
    dynamics: Dynamics,
    gamma: f64,
    policy: PolicyKind,
    /// Largest one-step reward-prediction residual this episode.
    max_reward_residual: f64,
    /// Largest one-step feature-prediction residual norm this episode.
    max_transition_residual: f64,
}

impl Agent {
    pub fn new(
        features: FeatureMap,
        rewards: RewardModel,
        dynamics: Dynamics,
        gamma: f64,
        policy: PolicyKind,
    ) -> Result<Self> {
        if !(0.0 < gamma && gamma < 1.0) {
            return Err(Error::Config(format!(
                "discount must lie in (0, 1), got {gamma}"
            )));
        }
        let l = features.len();
        if rewards.dim() != l {
            return Err(Error::Dimension {
                context: "agent reward model",
                expected: l,
                actual: rewards.dim(),
            });
        }
        match &dynamics {
            Dynamics::Model(tm) => {
                if tm.dim() != l {
                    return Err(Error::Dimension {
                        context: "agent transition model",
                        expected: l,
                        actual: tm.dim(),
                    });
                }
                if tm.num_actions() != rewards.num_actions() {
                    return Err(Error::Config(
                        "reward and transition models disagree on the action count".into(),
                    ));
                }
                if matches!(policy, PolicyKind::TdSuccessor) {
                    return Err(Error::Config(
                        "the TD-successor policy needs TD-successor dynamics".into(),
                    ));
                }
            }
            Dynamics::TdSuccessor(psi) => {
                if psi.dim() != l {
                    return Err(Error::Dimension {
                        context: "agent successor map",
                        expected: l,
                        actual: psi.dim(),
                    });
                }
                if !matches!(policy, PolicyKind::TdSuccessor) {
                    return Err(Error::Config(
                        "TD-successor dynamics require the TD-successor policy".into(),
                    ));
                }
            }
        }
        if let PolicyKind::EpsilonGreedy { epsilon } = policy {
            if !(0.0..=1.0).contains(&epsilon) {
                return Err(Error::Config(format!(
                    "epsilon must lie in [0, 1], got {epsilon}"
                )));
            }
        }
        Ok(Self {
            features,
            rewards,
            dynamics,
            gamma,
            policy,
            max_reward_residual: 0.0,
            max_transition_residual: 0.0,
        })
    }

    pub fn features(&self) -> &FeatureMap {
        &self.features
    }

    pub fn rewards(&self) -> &RewardModel {
        &self.rewards
    }

    pub fn dynamics(&self) -> &Dynamics {
        &self.dynamics
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn policy(&self) -> PolicyKind {
        self.policy
    }

    pub fn num_actions(&self) -> usize {
        self.rewards.num_actions()
    }

    /// Running residual maxima `(e_r, e_p)` for the current episode.
    pub fn residual_maxima(&self) -> (f64, f64) {
        (self.max_reward_residual, self.max_transition_residual)
    }

    /// Reset the per-episode residual maxima.
    pub fn begin_episode(&mut self) {
        self.max_reward_residual = 0.0;
        self.max_transition_residual = 0.0;
    }

    /// Value weights of the current model through the guarded solve.
    fn current_value_weights(&self, diag: &mut Diagnostics) -> Result<DVector<f64>> {
        match &self.dynamics {
            Dynamics::Model(tm) => {
                let solved =
                    guarded_value_weights(self.rewards.theta_pi(), tm.f_pi(), self.gamma)?;
                if solved.shrunk {
                    diag.resolvent_shrinks += 1;
                }
                Ok(solved.v_weights)
            }
            // V(s) = theta_pi^T Psi phi(s), so the weights are Psi^T theta_pi.
            Dynamics::TdSuccessor(psi) => Ok(psi.mean().transpose() * self.rewards.theta_pi()),
        }
    }

    /// Q estimates for every action at the given observation.
    pub fn q_values(&self, obs: &DVector<f64>, diag: &mut Diagnostics) -> Result<Vec<f64>> {
        let phi = self.features.featurize(obs);
        match &self.dynamics {
            Dynamics::Model(tm) => {
                let v = self.current_value_weights(diag)?;
                Ok((0..self.num_actions())
                    .map(|a| {
                        let q_a = self.rewards.theta(a) + tm.f(a).transpose() * &v * self.gamma;
                        q_a.dot(&phi)
                    })
                    .collect())
            }
            Dynamics::TdSuccessor(psi) => {
                // Without a per-action transition model the value estimate is
                // action-independent: theta_pi^T Psi phi(s).
                let value = self.rewards.theta_pi().dot(&(psi.mean() * &phi));
                Ok(vec![value; self.num_actions()])
            }
        }
    }

    /// Selection scores: Q plus the policy's exploration term.
    pub fn action_scores(&self, obs: &DVector<f64>, diag: &mut Diagnostics) -> Result<Vec<f64>> {
        let q = self.q_values(obs, diag)?;
        Ok(match (&self.policy, &self.dynamics) {
            (PolicyKind::UncertaintyAware, Dynamics::Model(tm)) => (0..q.len())
                .map(|a| q[a] + exploration_bonus(&self.rewards, tm, a))
                .collect(),
            (PolicyKind::TdSuccessor, Dynamics::TdSuccessor(psi)) => {
                let shared = psi.covariance_trace();
                (0..q.len())
                    .map(|a| q[a] + self.rewards.covariance_trace(a) + shared)
                    .collect()
            }
            // Epsilon-greedy scores carry no bonus; exploration is the
            // random branch in `select_action_epsilon`.
            _ => q,
        })
    }

    /// Deterministic argmax over scores, ties broken by lowest action index.
    pub fn select_action(&self, obs: &DVector<f64>, diag: &mut Diagnostics) -> Result<usize> {
        let scores = self.action_scores(obs, diag)?;
        Ok(argmax(&scores))
    }

    /// Epsilon-greedy selection: uniform with probability `epsilon`,
    /// otherwise greedy on Q alone.
    pub fn select_action_epsilon(
        &self,
        obs: &DVector<f64>,
        epsilon: f64,
        rng: &mut ChaCha8Rng,
        diag: &mut Diagnostics,
    ) -> Result<usize> {
        if !(0.0..=1.0).contains(&epsilon) {
            return Err(Error::Config(format!(
                "epsilon must lie in [0, 1], got {epsilon}"
            )));
        }
        if rng.random_bool(epsilon) {
            return Ok(rng.random_range(0..self.num_actions()));
        }
        let q = self.q_values(obs, diag)?;
        Ok(argmax(&q))
    }

    /// Process one transition: reward filter, dynamics estimate, feature
    /// gradient — in that order.
    pub fn step(&mut self, sample: Sample<'_>, diag: &mut Diagnostics) -> Result<()> {
        if sample.action >= self.num_actions() {
            return Err(Error::Validation(format!(
                "unknown action {}",
                sample.action
            )));
        }
        let phi_s = self.features.featurize(sample.obs);
        let phi_next = self.features.featurize(sample.next_obs);

        let reward_step = self.rewards.observe(&phi_s, sample.action, sample.reward)?;
        if reward_step.underflow {
            diag.likelihood_underflows += 1;
        }
        self.max_reward_residual = self.max_reward_residual.max(reward_step.residual.abs());

        match &mut self.dynamics {
            Dynamics::Model(tm) => {
                let transition_step = tm.observe(&phi_s, sample.action, &phi_next)?;
                self.max_transition_residual = self
                    .max_transition_residual
                    .max(transition_step.residual_norm);

                let feature_sample = FeatureSample {
                    s: sample.obs,
                    s_next: sample.next_obs,
                    reward: sample.reward,
                };
                let theta_a = self.rewards.theta(sample.action).clone();
                let f_a = tm.f(sample.action).clone();
                let sgd = self.features.sgd_step(&feature_sample, &theta_a, &f_a);
                if sgd.skipped {
                    diag.sgd_skips += 1;
                }
            }
            Dynamics::TdSuccessor(psi) => {
                // Measurement phi(s) = Psi (phi(s) - gamma phi(s')) + noise;
                // the sampled next state stands in for the expectation. The
                // feature map is left untouched on this path.
                let regressor = &phi_s - &phi_next * self.gamma;
                let out = psi.update(&regressor, &phi_s)?;
                self.max_transition_residual =
                    self.max_transition_residual.max(out.residual_norm);
            }
        }
        Ok(())
    }

    /// Current error-bound value from the episode's residual maxima.
    pub fn error_bound_trace(&self, diag: &mut Diagnostics) -> Result<f64> {
        let v = self.current_value_weights(diag)?;
        error_bound(
            self.max_reward_residual,
            self.max_transition_residual,
            &v,
            self.gamma,
        )
    }

    /// Play one episode against a task: select, step the environment,
    /// learn — until the goal or the step cap.
    pub fn run_episode(
        &mut self,
        task: &TaskSpec,
        max_steps: usize,
        rng: &mut ChaCha8Rng,
        diag: &mut Diagnostics,
        track_bound: bool,
    ) -> Result<EpisodeRecord> {
        self.begin_episode();
        let mut state: TaskState = task.reset(rng);
        let mut obs = task.observe(&state);
        let mut total_return = 0.0;
        let mut length = 0;
        let mut reached_goal = false;
        let mut bound_trace = if track_bound { Some(Vec::new()) } else { None };

        for _ in 0..max_steps {
            let action = match self.policy {
                PolicyKind::EpsilonGreedy { epsilon } => {
                    self.select_action_epsilon(&obs, epsilon, rng, diag)?
                }
                _ => self.select_action(&obs, diag)?,
            };
            let transition = task.step(&state, action, rng)?;
            let next_obs = task.observe(&transition.next);
            self.step(
                Sample {
                    obs: &obs,
                    action,
                    next_obs: &next_obs,
                    reward: transition.reward,
                },
                diag,
            )?;
            if let Some(trace) = bound_trace.as_mut() {
                trace.push(self.error_bound_trace(diag)?);
            }
            total_return += transition.reward;
            length += 1;
            state = transition.next;
            obs = next_obs;
            if transition.done {
                reached_goal = true;
                break;
            }
        }

        Ok(EpisodeRecord {
            length,
            total_return,
            reached_goal,
            bound_trace,
        })
    }
}

fn argmax(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] {
            best = i;
        }
    }
    best
}
