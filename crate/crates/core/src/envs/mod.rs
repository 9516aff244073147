//! Benchmark environments: continuous 2-D navigation and the combination
//! lock, both described by declarative task files.

mod lock;
mod nav;
mod taskspec;

pub use lock::{Dial, LockTask};
pub use nav::{NavTask, Rect};
pub use taskspec::{TaskFamily, TaskSpec, FEATURE_BOUNDS_DIM};

use nalgebra::DVector;
use rand_chacha::ChaCha8Rng;

use crate::error::Result;

/// Raw environment state for either task family.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TaskState {
    Nav([f64; 2]),
    Lock([u8; 3]),
}

/// One environment transition.
#[derive(Debug, Clone, Copy)]
pub struct Transition {
    pub next: TaskState,
    pub reward: f64,
    pub done: bool,
}

impl TaskSpec {
    /// Sample a start state.
    pub fn reset(&self, rng: &mut ChaCha8Rng) -> TaskState {
        match &self.kind {
            taskspec::TaskKind::Nav(task) => TaskState::Nav(task.sample_start(rng)),
            taskspec::TaskKind::Lock(task) => TaskState::Lock(task.sample_start(rng)),
        }
    }

    /// Apply one action.
    pub fn step(&self, state: &TaskState, action: usize, rng: &mut ChaCha8Rng) -> Result<Transition> {
        match (&self.kind, state) {
            (taskspec::TaskKind::Nav(task), TaskState::Nav(s)) => {
                let (next, reward, done) = task.step(*s, action, rng)?;
                Ok(Transition {
                    next: TaskState::Nav(next),
                    reward,
                    done,
                })
            }
            (taskspec::TaskKind::Lock(task), TaskState::Lock(s)) => {
                let (next, reward, done) = task.step(*s, action, rng)?;
                Ok(Transition {
                    next: TaskState::Lock(next),
                    reward,
                    done,
                })
            }
            _ => Err(crate::error::Error::Validation(
                "state does not belong to this task".into(),
            )),
        }
    }

    /// Map the raw state into the feature-map input space.
    pub fn observe(&self, state: &TaskState) -> DVector<f64> {
        match (&self.kind, state) {
            (taskspec::TaskKind::Nav(_), TaskState::Nav(s)) => DVector::from_vec(vec![s[0], s[1]]),
            (taskspec::TaskKind::Lock(task), TaskState::Lock(s)) => task.observe(s),
            _ => panic!("state does not belong to this task"),
        }
    }
}
