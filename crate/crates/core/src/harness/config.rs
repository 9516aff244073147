//! Experiment configuration with per-family defaults.
//!
//! Every hyperparameter has a default keyed to the task family (navigation
//! or lock); a TOML file can override any subset. Noise covariances are
//! scalars applied as `scalar * I` of the appropriate size.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::agent::{Agent, Dynamics, PolicyKind};
use crate::envmodel::{PiAggregation, RewardModel, TransitionModel};
use crate::envs::{TaskFamily, TaskSpec};
use crate::error::{Error, Result};
use crate::features::FeatureMap;
use crate::kalman::{GaussianBelief, KfConfig, MatrixBelief, MmaeBank};

pub const CONFIG_FORMAT_VERSION: u32 = 1;

/// Which agent variant to train.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum PolicyChoice {
    #[default]
    UncertaintyAware,
    EpsilonGreedy,
    TdSuccessor,
}

/// Agent hyperparameters; all noise fields are `scalar * identity`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentConfig {
    pub policy: PolicyChoice,
    pub epsilon: f64,
    pub gamma: f64,
    /// RBF grid points per input dimension; `L = rbf_order ^ D`.
    pub rbf_order: usize,
    /// Parallel filters per reward bank. Members beyond the first differ by
    /// a geometric measurement-noise ladder around `reward_measurement_noise`.
    pub m_kf: usize,
    pub pi_aggregation: PiAggregation,
    pub reward_process_noise: f64,
    pub reward_measurement_noise: f64,
    pub reward_prior_cov: f64,
    /// Initial transition estimate `F_0 = f0 * I`.
    pub transition_prior_mean: f64,
    pub transition_prior_cov: f64,
    pub transition_decay: f64,
    pub transition_process_noise: f64,
    pub transition_measurement_noise: f64,
    pub lr_mu: f64,
    pub lr_sigma: f64,
}

impl AgentConfig {
    /// Canonical navigation-family hyperparameters.
    pub fn nav_defaults() -> Self {
        Self {
            policy: PolicyChoice::UncertaintyAware,
            epsilon: 0.2,
            gamma: 0.95,
            rbf_order: 4,
            m_kf: 1,
            pi_aggregation: PiAggregation::LastAction,
            reward_process_noise: 0.01,
            reward_measurement_noise: 0.2,
            reward_prior_cov: 0.1,
            transition_prior_mean: 0.02,
            transition_prior_cov: 5.0,
            transition_decay: 0.9,
            transition_process_noise: 0.6,
            transition_measurement_noise: 1.0,
            lr_mu: 0.001,
            lr_sigma: 0.001,
        }
    }

    /// Canonical lock-family hyperparameters.
    pub fn lock_defaults() -> Self {
        Self {
            policy: PolicyChoice::UncertaintyAware,
            epsilon: 0.02,
            gamma: 0.99,
            rbf_order: 5,
            m_kf: 1,
            pi_aggregation: PiAggregation::LastAction,
            reward_process_noise: 0.01,
            reward_measurement_noise: 0.5,
            reward_prior_cov: 1.0,
            transition_prior_mean: 0.5,
            transition_prior_cov: 3.0,
            transition_decay: 0.9,
            transition_process_noise: 0.5,
            transition_measurement_noise: 1.0,
            lr_mu: 0.01,
            lr_sigma: 0.005,
        }
    }

    pub fn defaults_for(family: TaskFamily) -> Self {
        match family {
            TaskFamily::Nav => Self::nav_defaults(),
            TaskFamily::Lock => Self::lock_defaults(),
        }
    }

    fn validate(&self) -> Result<()> {
        if !(0.0 < self.gamma && self.gamma < 1.0) {
            return Err(Error::Config(format!("gamma must lie in (0, 1), got {}", self.gamma)));
        }
        if self.rbf_order < 2 {
            return Err(Error::Config("rbf_order must be at least 2".into()));
        }
        if self.m_kf == 0 {
            return Err(Error::Config("m_kf must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.epsilon) {
            return Err(Error::Config("epsilon must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

/// Where transfer runs take their initial parameters from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum CheckpointSource {
    /// Fresh initialization from the agent config.
    #[default]
    None,
    /// Every seed starts from the same checkpoint file.
    Shared(PathBuf),
    /// Seed `s` starts from `<dir>/seed_<s>.json` (matched-seed transfer).
    PerSeed(PathBuf),
}

impl CheckpointSource {
    /// Interpret a filesystem path: directories mean matched per-seed
    /// checkpoints, files mean one shared checkpoint.
    pub fn from_path(path: &Path) -> Result<Self> {
        if path.is_dir() {
            Ok(Self::PerSeed(path.to_path_buf()))
        } else if path.is_file() {
            Ok(Self::Shared(path.to_path_buf()))
        } else {
            Err(Error::Validation(format!(
                "checkpoint path {} does not exist",
                path.display()
            )))
        }
    }
}

/// Episode protocol and execution knobs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunProtocol {
    pub episodes: usize,
    pub episode_cap: usize,
    pub seeds: Vec<u64>,
    /// Worker cap for per-seed parallelism; 0 means all cores.
    pub jobs: usize,
    /// Record the per-step error-bound trace in episode records.
    pub track_bound: bool,
    pub checkpoint_in: CheckpointSource,
}

impl RunProtocol {
    pub fn defaults_for(task: &TaskSpec) -> Self {
        Self {
            episodes: task.episodes,
            episode_cap: task.episode_cap,
            seeds: (0..20).collect(),
            jobs: 0,
            track_bound: false,
            checkpoint_in: CheckpointSource::None,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.episodes == 0 || self.episode_cap == 0 {
            return Err(Error::Config("episodes and episode_cap must be positive".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("at least one seed is required".into()));
        }
        let mut sorted = self.seeds.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != self.seeds.len() {
            return Err(Error::Config("seeds must be distinct".into()));
        }
        Ok(())
    }
}

/// A fully resolved experiment: task, agent hyperparameters, protocol.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub task: TaskSpec,
    pub agent: AgentConfig,
    pub run: RunProtocol,
}

impl ExperimentConfig {
    /// Family defaults for a task.
    pub fn for_task(task: TaskSpec) -> Self {
        let agent = AgentConfig::defaults_for(task.family());
        let run = RunProtocol::defaults_for(&task);
        Self { task, agent, run }
    }

    /// Apply a TOML override document on top of the defaults.
    pub fn apply_overrides_str(&mut self, text: &str) -> Result<()> {
        let file: OverrideFile =
            toml::from_str(text).map_err(|e| Error::Parse(format!("config file: {e}")))?;
        if let Some(v) = file.format_version {
            if v != CONFIG_FORMAT_VERSION {
                return Err(Error::Parse(format!(
                    "unsupported config format version {v} (expected {CONFIG_FORMAT_VERSION})"
                )));
            }
        }
        if let Some(agent) = file.agent {
            agent.apply(&mut self.agent);
        }
        if let Some(run) = file.run {
            run.apply(&mut self.run)?;
        }
        self.validate()
    }

    pub fn apply_overrides_path(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path)?;
        self.apply_overrides_str(&text)
    }

    pub fn validate(&self) -> Result<()> {
        self.agent.validate()?;
        self.run.validate()?;
        Ok(())
    }

    /// Number of basis functions implied by the grid order.
    pub fn feature_count(&self) -> usize {
        self.agent.rbf_order.pow(self.task.input_dim() as u32)
    }
}

// Optional-field mirror of the configurable keys; unknown keys are errors.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct OverrideFile {
    format_version: Option<u32>,
    agent: Option<AgentOverrides>,
    run: Option<RunOverrides>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct AgentOverrides {
    policy: Option<PolicyChoice>,
    epsilon: Option<f64>,
    gamma: Option<f64>,
    rbf_order: Option<usize>,
    m_kf: Option<usize>,
    pi_aggregation: Option<PiAggregation>,
    reward_process_noise: Option<f64>,
    reward_measurement_noise: Option<f64>,
    reward_prior_cov: Option<f64>,
    transition_prior_mean: Option<f64>,
    transition_prior_cov: Option<f64>,
    transition_decay: Option<f64>,
    transition_process_noise: Option<f64>,
    transition_measurement_noise: Option<f64>,
    lr_mu: Option<f64>,
    lr_sigma: Option<f64>,
}

macro_rules! apply_fields {
    ($src:expr, $dst:expr, [$($field:ident),* $(,)?]) => {
        $(if let Some(v) = $src.$field { $dst.$field = v; })*
    };
}

impl AgentOverrides {
    fn apply(self, cfg: &mut AgentConfig) {
        apply_fields!(
            self,
            cfg,
            [
                policy,
                epsilon,
                gamma,
                rbf_order,
                m_kf,
                pi_aggregation,
                reward_process_noise,
                reward_measurement_noise,
                reward_prior_cov,
                transition_prior_mean,
                transition_prior_cov,
                transition_decay,
                transition_process_noise,
                transition_measurement_noise,
                lr_mu,
                lr_sigma,
            ]
        );
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RunOverrides {
    episodes: Option<usize>,
    episode_cap: Option<usize>,
    seeds: Option<Vec<u64>>,
    jobs: Option<usize>,
    track_bound: Option<bool>,
    checkpoint_in: Option<PathBuf>,
}

impl RunOverrides {
    fn apply(self, run: &mut RunProtocol) -> Result<()> {
        apply_fields!(self, run, [episodes, episode_cap, seeds, jobs, track_bound]);
        if let Some(path) = self.checkpoint_in {
            run.checkpoint_in = CheckpointSource::from_path(&path)?;
        }
        Ok(())
    }
}

/// Build the initial (untrained) agent an experiment starts from.
pub fn build_initial_agent(cfg: &ExperimentConfig) -> Result<Agent> {
    cfg.validate()?;
    let task = &cfg.task;
    let a = &cfg.agent;
    let d = task.input_dim();
    let features = FeatureMap::grid(
        d,
        a.rbf_order,
        &task.feature_lo,
        &task.feature_hi,
        task.feature_placement,
        a.lr_mu,
        a.lr_sigma,
    )?;
    let l = features.len();
    let actions = task.num_actions();

    let mut banks = Vec::with_capacity(actions);
    for _ in 0..actions {
        let members = (0..a.m_kf)
            .map(|i| {
                // Geometric noise ladder centered on the configured variance;
                // a single filter uses it unchanged.
                let offset = i as f64 - (a.m_kf - 1) as f64 / 2.0;
                let noise = a.reward_measurement_noise * 2.0f64.powf(offset);
                Ok((
                    GaussianBelief::isotropic(l, a.reward_prior_cov),
                    KfConfig::random_walk(l, a.reward_process_noise, noise)?,
                ))
            })
            .collect::<Result<Vec<_>>>()?;
        banks.push(MmaeBank::new(members)?);
    }
    let rewards = RewardModel::new(banks, a.pi_aggregation)?;

    let make_belief = || {
        MatrixBelief::isotropic(
            l,
            a.transition_prior_mean,
            a.transition_prior_cov,
            a.transition_decay,
            a.transition_process_noise,
            a.transition_measurement_noise,
        )
    };

    let (dynamics, policy) = match a.policy {
        PolicyChoice::UncertaintyAware => {
            let beliefs = (0..actions).map(|_| make_belief()).collect::<Result<Vec<_>>>()?;
            (
                Dynamics::Model(TransitionModel::new(beliefs, a.pi_aggregation)?),
                PolicyKind::UncertaintyAware,
            )
        }
        PolicyChoice::EpsilonGreedy => {
            let beliefs = (0..actions).map(|_| make_belief()).collect::<Result<Vec<_>>>()?;
            (
                Dynamics::Model(TransitionModel::new(beliefs, a.pi_aggregation)?),
                PolicyKind::EpsilonGreedy { epsilon: a.epsilon },
            )
        }
        PolicyChoice::TdSuccessor => (
            Dynamics::TdSuccessor(make_belief()?),
            PolicyKind::TdSuccessor,
        ),
    };

    Agent::new(features, rewards, dynamics, a.gamma, policy)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn family_defaults_pick_the_documented_values() {
        let nav = AgentConfig::nav_defaults();
        assert_eq!(nav.gamma, 0.95);
        assert_eq!(nav.rbf_order, 4);
        assert_eq!(nav.reward_measurement_noise, 0.2);
        assert_eq!(nav.epsilon, 0.2);
        let lock = AgentConfig::lock_defaults();
        assert_eq!(lock.gamma, 0.99);
        assert_eq!(lock.rbf_order, 5);
        assert_eq!(lock.reward_measurement_noise, 0.5);
        assert_eq!(lock.epsilon, 0.02);
    }

    #[test]
    fn overrides_replace_only_named_fields() {
        let task = TaskSpec::builtin("A").unwrap();
        let mut cfg = ExperimentConfig::for_task(task);
        cfg.apply_overrides_str(
            r#"
format_version = 1
[agent]
gamma = 0.9
rbf_order = 3
[run]
episodes = 7
seeds = [1, 2, 3]
"#,
        )
        .unwrap();
        assert_eq!(cfg.agent.gamma, 0.9);
        assert_eq!(cfg.agent.rbf_order, 3);
        assert_eq!(cfg.agent.reward_measurement_noise, 0.2); // untouched
        assert_eq!(cfg.run.episodes, 7);
        assert_eq!(cfg.run.episode_cap, 200); // untouched
        assert_eq!(cfg.run.seeds, vec![1, 2, 3]);
        assert_eq!(cfg.feature_count(), 9);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let task = TaskSpec::builtin("A").unwrap();
        let mut cfg = ExperimentConfig::for_task(task);
        let err = cfg.apply_overrides_str("[agent]\nlearning_rate = 0.1\n");
        assert!(err.is_err());
    }

    #[test]
    fn invalid_values_fail_validation() {
        let task = TaskSpec::builtin("A").unwrap();
        let mut cfg = ExperimentConfig::for_task(task);
        assert!(cfg.apply_overrides_str("[agent]\ngamma = 1.5\n").is_err());
        let task = TaskSpec::builtin("A").unwrap();
        let mut cfg = ExperimentConfig::for_task(task);
        assert!(cfg.apply_overrides_str("[run]\nseeds = [1, 1]\n").is_err());
    }

    #[test]
    fn initial_agent_matches_the_task_shape() {
        let task = TaskSpec::builtin("A").unwrap();
        let cfg = ExperimentConfig::for_task(task);
        let agent = build_initial_agent(&cfg).unwrap();
        assert_eq!(agent.num_actions(), 4);
        assert_eq!(agent.features().len(), 16);
        assert_eq!(agent.features().input_dim(), 2);

        let lock = TaskSpec::builtin("lock1").unwrap();
        let cfg = ExperimentConfig::for_task(lock);
        let agent = build_initial_agent(&cfg).unwrap();
        assert_eq!(agent.num_actions(), 2);
        assert_eq!(agent.features().len(), 25);
    }
}
