//! Agent checkpoints: the trained parameters of a source task, saved so a
//! test task can start from them instead of from scratch.
//!
//! The file is versioned JSON carrying the full agent (feature map, reward
//! banks, transition or successor-map beliefs, policy aggregates) plus the
//! shape metadata needed to check a transfer target for compatibility.
//! Serialization is lossless for finite floats, so save -> load -> save is
//! byte-identical.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::agent::Agent;
use crate::envs::{TaskFamily, TaskSpec};
use crate::error::{Error, Result};

pub const CHECKPOINT_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format_version: u32,
    pub task_family: String,
    pub num_actions: usize,
    pub input_dim: usize,
    pub feature_count: usize,
    pub agent: Agent,
}

impl Checkpoint {
    pub fn of(agent: &Agent, family: TaskFamily) -> Self {
        Self {
            format_version: CHECKPOINT_FORMAT_VERSION,
            task_family: match family {
                TaskFamily::Nav => "nav".into(),
                TaskFamily::Lock => "lock".into(),
            },
            num_actions: agent.num_actions(),
            input_dim: agent.features().input_dim(),
            feature_count: agent.features().len(),
            agent: agent.clone(),
        }
    }

    /// Validate against a transfer target and hand out the agent.
    ///
    /// Only shapes are checked: a checkpoint whose feature map fits the
    /// target dimensionally loads fine even when its features are no longer
    /// predictive there — that mismatch is exactly what negative-transfer
    /// experiments measure.
    pub fn into_agent_for(self, task: &TaskSpec) -> Result<Agent> {
        if self.num_actions != task.num_actions() {
            return Err(Error::IncompatibleCheckpoint(format!(
                "checkpoint has {} actions, task {} has {}",
                self.num_actions,
                task.name,
                task.num_actions()
            )));
        }
        if self.input_dim != task.input_dim() {
            return Err(Error::IncompatibleCheckpoint(format!(
                "checkpoint featurizes {} inputs, task {} provides {}",
                self.input_dim,
                task.name,
                task.input_dim()
            )));
        }
        Ok(self.agent)
    }
}

pub fn save_checkpoint(agent: &Agent, family: TaskFamily, path: &Path) -> Result<()> {
    let checkpoint = Checkpoint::of(agent, family);
    let bytes = serde_json::to_vec(&checkpoint)
        .map_err(|e| Error::Parse(format!("checkpoint encode: {e}")))?;
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::write(path, bytes)?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let bytes = std::fs::read(path)?;
    let checkpoint: Checkpoint = serde_json::from_slice(&bytes)
        .map_err(|e| Error::Parse(format!("checkpoint {}: {e}", path.display())))?;
    if checkpoint.format_version != CHECKPOINT_FORMAT_VERSION {
        return Err(Error::Parse(format!(
            "unsupported checkpoint format version {} (expected {CHECKPOINT_FORMAT_VERSION})",
            checkpoint.format_version
        )));
    }
    Ok(checkpoint)
}
