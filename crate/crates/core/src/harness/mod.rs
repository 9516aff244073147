//! Experiment orchestration: configs, seeded multi-run execution, transfer
//! checkpoints, aggregation and CSV output.

mod checkpoint;
mod config;
mod oracle;
mod report;
mod run;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, CHECKPOINT_FORMAT_VERSION};
pub use config::{
    build_initial_agent, AgentConfig, CheckpointSource, ExperimentConfig, PolicyChoice,
    RunProtocol, CONFIG_FORMAT_VERSION,
};
pub use oracle::{oracle_suite, OracleReport};
pub use report::{aggregate, emit_csv, emit_plotdata, write_csv, write_plotdata, EpisodeStat, Summary};
pub use run::{
    measure_step_micros, run_experiment, run_experiment_with, Parallelism, RunRecord, SeedOutcome,
};
