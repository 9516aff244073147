//! Seeded multi-run execution.
//!
//! Each seed owns an independent agent, environment stream and RNG, so runs
//! are reproducible one by one and can execute in any order. With the
//! `parallel` feature the seed loop is data-parallel over a rayon pool;
//! results are sorted by seed afterwards, so parallel and sequential
//! execution produce identical records.

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::checkpoint::load_checkpoint;
use super::config::{build_initial_agent, CheckpointSource, ExperimentConfig};
use crate::agent::{Agent, Diagnostics, EpisodeRecord};
use crate::error::{Error, Result};

/// Seed-loop execution mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parallelism {
    Sequential,
    /// Rayon pool capped at `jobs` workers (0 = all cores).
    #[cfg(feature = "parallel")]
    Rayon { jobs: usize },
}

impl Parallelism {
    /// Default mode: parallel when compiled in, honoring the config's cap.
    pub fn default_for(cfg: &ExperimentConfig) -> Self {
        #[cfg(feature = "parallel")]
        {
            Parallelism::Rayon { jobs: cfg.run.jobs }
        }
        #[cfg(not(feature = "parallel"))]
        {
            let _ = cfg;
            Parallelism::Sequential
        }
    }
}

/// Everything one seeded run produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub seed: u64,
    pub episodes: Vec<EpisodeRecord>,
    /// Total environment steps taken.
    pub steps: u64,
    /// Mean wall-clock per step in microseconds (not part of any
    /// deterministic output file).
    pub mean_step_micros: f64,
    pub diagnostics: Diagnostics,
}

/// Final agent of a run, kept alongside the record for checkpointing.
#[derive(Debug, Clone)]
pub struct SeedOutcome {
    pub record: RunRecord,
    pub agent: Agent,
}

fn initial_agent_for_seed(cfg: &ExperimentConfig, seed: u64) -> Result<Agent> {
    match &cfg.run.checkpoint_in {
        CheckpointSource::None => build_initial_agent(cfg),
        CheckpointSource::Shared(path) => load_checkpoint(path)?.into_agent_for(&cfg.task),
        CheckpointSource::PerSeed(dir) => {
            let path = dir.join(format!("seed_{seed}.json"));
            if !path.is_file() {
                return Err(Error::Validation(format!(
                    "missing per-seed checkpoint {}",
                    path.display()
                )));
            }
            load_checkpoint(&path)?.into_agent_for(&cfg.task)
        }
    }
}

fn run_seed(cfg: &ExperimentConfig, seed: u64) -> Result<SeedOutcome> {
    let mut agent = initial_agent_for_seed(cfg, seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut diagnostics = Diagnostics::default();
    let mut episodes = Vec::with_capacity(cfg.run.episodes);
    let mut steps = 0u64;
    let started = Instant::now();
    for _ in 0..cfg.run.episodes {
        let record = agent.run_episode(
            &cfg.task,
            cfg.run.episode_cap,
            &mut rng,
            &mut diagnostics,
            cfg.run.track_bound,
        )?;
        steps += record.length as u64;
        episodes.push(record);
    }
    let elapsed = started.elapsed();
    let mean_step_micros = if steps == 0 {
        0.0
    } else {
        elapsed.as_secs_f64() * 1e6 / steps as f64
    };
    Ok(SeedOutcome {
        record: RunRecord {
            seed,
            episodes,
            steps,
            mean_step_micros,
            diagnostics,
        },
        agent,
    })
}

/// Run every seed and return the outcomes sorted by seed.
pub fn run_experiment_with(
    cfg: &ExperimentConfig,
    mode: Parallelism,
) -> Result<Vec<SeedOutcome>> {
    cfg.validate()?;
    let seeds = cfg.run.seeds.clone();
    let mut outcomes: Vec<SeedOutcome> = match mode {
        Parallelism::Sequential => seeds
            .iter()
            .map(|&seed| run_seed(cfg, seed))
            .collect::<Result<_>>()?,
        #[cfg(feature = "parallel")]
        Parallelism::Rayon { jobs } => {
            use rayon::prelude::*;
            let work = || -> Result<Vec<SeedOutcome>> {
                seeds
                    .par_iter()
                    .map(|&seed| run_seed(cfg, seed))
                    .collect::<Result<_>>()
            };
            if jobs > 0 {
                let pool = rayon::ThreadPoolBuilder::new()
                    .num_threads(jobs)
                    .build()
                    .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
                pool.install(work)?
            } else {
                work()?
            }
        }
    };
    outcomes.sort_by_key(|o| o.record.seed);
    Ok(outcomes)
}

/// Run with the default execution mode.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<SeedOutcome>> {
    run_experiment_with(cfg, Parallelism::default_for(cfg))
}

/// Mean wall-clock per agent step over a fixed budget of environment steps,
/// in microseconds. Used by the complexity smoke checks.
pub fn measure_step_micros(cfg: &ExperimentConfig, step_budget: u64, seed: u64) -> Result<f64> {
    let mut agent = build_initial_agent(cfg)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut diagnostics = Diagnostics::default();
    let mut steps = 0u64;
    let started = Instant::now();
    while steps < step_budget {
        let record = agent.run_episode(
            &cfg.task,
            cfg.run.episode_cap,
            &mut rng,
            &mut diagnostics,
            false,
        )?;
        steps += record.length as u64;
    }
    Ok(started.elapsed().as_secs_f64() * 1e6 / steps as f64)
}
