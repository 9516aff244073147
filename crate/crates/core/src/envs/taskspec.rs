//! Declarative task descriptions.
//!
//! A task file is a versioned TOML document that validates into exactly one
//! of the two task families. The canonical tasks ship in `tasks/` at the
//! repository root (editable without recompiling) and are also embedded as
//! fallbacks, so `TaskSpec::builtin("A")` always works.

use std::collections::BTreeMap;
use std::path::Path;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::lock::{Dial, LockTask};
use super::nav::{NavTask, Rect, NAV_ACTIONS};
use crate::error::{Error, Result};
use crate::features::GridPlacement;

pub const TASK_FORMAT_VERSION: u32 = 1;

/// Feature bounds are per input dimension; both families use two inputs.
pub const FEATURE_BOUNDS_DIM: usize = 2;

const BUILTIN_TASKS: &[(&str, &str)] = &[
    ("A", include_str!("../../../../tasks/a.toml")),
    ("B", include_str!("../../../../tasks/b.toml")),
    ("C", include_str!("../../../../tasks/c.toml")),
    ("lock1", include_str!("../../../../tasks/lock1.toml")),
    ("lock2", include_str!("../../../../tasks/lock2.toml")),
    ("lock3", include_str!("../../../../tasks/lock3.toml")),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TaskFamily {
    Nav,
    Lock,
}

#[derive(Debug, Clone, PartialEq)]
pub enum TaskKind {
    Nav(NavTask),
    Lock(LockTask),
}

/// Validated task: dynamics, featurization space and episode protocol.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskSpec {
    pub name: String,
    pub kind: TaskKind,
    pub feature_lo: DVector<f64>,
    pub feature_hi: DVector<f64>,
    pub feature_placement: GridPlacement,
    pub episodes: usize,
    pub episode_cap: usize,
}

// ---- on-disk schema --------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TaskFile {
    format_version: u32,
    name: String,
    family: String,
    #[serde(default)]
    nav: Option<NavSection>,
    #[serde(default)]
    lock: Option<LockSection>,
    features: FeatureSection,
    episodes: EpisodeSection,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NavSection {
    step_size: f64,
    slip_prob: f64,
    goal_center: [f64; 2],
    goal_radius: f64,
    barriers: Vec<[f64; 4]>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LockSection {
    controllable: Vec<Dial>,
    random: Vec<Dial>,
    featurized: Vec<Dial>,
    directions: BTreeMap<String, i8>,
    reward: BTreeMap<String, u8>,
    start: BTreeMap<String, u8>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FeatureSection {
    lo: Vec<f64>,
    hi: Vec<f64>,
    placement: GridPlacement,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EpisodeSection {
    count: usize,
    cap: usize,
}

fn dial_by_name(name: &str) -> Result<Dial> {
    match name {
        "left" => Ok(Dial::Left),
        "middle" => Ok(Dial::Middle),
        "right" => Ok(Dial::Right),
        other => Err(Error::Parse(format!("unknown dial name '{other}'"))),
    }
}

impl TaskSpec {
    /// Parse and validate a task document.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let file: TaskFile =
            toml::from_str(text).map_err(|e| Error::Parse(format!("task file: {e}")))?;
        if file.format_version != TASK_FORMAT_VERSION {
            return Err(Error::Parse(format!(
                "unsupported task format version {} (expected {TASK_FORMAT_VERSION})",
                file.format_version
            )));
        }
        let kind = match file.family.as_str() {
            "nav" => {
                let section = file
                    .nav
                    .ok_or_else(|| Error::Parse("family 'nav' needs a [nav] section".into()))?;
                if file.lock.is_some() {
                    return Err(Error::Parse("nav task must not carry a [lock] section".into()));
                }
                let task = NavTask {
                    step_size: section.step_size,
                    slip_prob: section.slip_prob,
                    goal_center: section.goal_center,
                    goal_radius: section.goal_radius,
                    barriers: section
                        .barriers
                        .iter()
                        .map(|b| Rect {
                            x_min: b[0],
                            y_min: b[1],
                            x_max: b[2],
                            y_max: b[3],
                        })
                        .collect(),
                };
                task.validate()?;
                TaskKind::Nav(task)
            }
            "lock" => {
                let section = file
                    .lock
                    .ok_or_else(|| Error::Parse("family 'lock' needs a [lock] section".into()))?;
                if file.nav.is_some() {
                    return Err(Error::Parse("lock task must not carry a [nav] section".into()));
                }
                let mut directions = Vec::with_capacity(section.controllable.len());
                for dial in &section.controllable {
                    let dir = section.directions.get(dial.name()).ok_or_else(|| {
                        Error::Parse(format!("missing direction for dial {}", dial.name()))
                    })?;
                    directions.push(*dir);
                }
                let combo = |map: &BTreeMap<String, u8>| -> Result<Vec<(Dial, u8)>> {
                    map.iter()
                        .map(|(name, digit)| Ok((dial_by_name(name)?, *digit)))
                        .collect()
                };
                let task = LockTask {
                    controllable: section.controllable,
                    directions,
                    random: section.random,
                    reward_combo: combo(&section.reward)?,
                    start: combo(&section.start)?,
                    featurized: section.featurized,
                };
                task.validate()?;
                TaskKind::Lock(task)
            }
            other => return Err(Error::Parse(format!("unknown task family '{other}'"))),
        };

        if file.features.lo.len() != FEATURE_BOUNDS_DIM
            || file.features.hi.len() != FEATURE_BOUNDS_DIM
        {
            return Err(Error::Parse(format!(
                "feature bounds must have {FEATURE_BOUNDS_DIM} entries"
            )));
        }
        if file.episodes.count == 0 || file.episodes.cap == 0 {
            return Err(Error::Validation(
                "episode count and cap must be positive".into(),
            ));
        }
        let spec = Self {
            name: file.name,
            kind,
            feature_lo: DVector::from_vec(file.features.lo),
            feature_hi: DVector::from_vec(file.features.hi),
            feature_placement: file.features.placement,
            episodes: file.episodes.count,
            episode_cap: file.episodes.cap,
        };
        if spec.input_dim() != spec.feature_lo.len() {
            return Err(Error::Validation(format!(
                "feature bounds dimension {} does not match task input dimension {}",
                spec.feature_lo.len(),
                spec.input_dim()
            )));
        }
        Ok(spec)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    /// Canonical embedded task by name (case-insensitive).
    pub fn builtin(name: &str) -> Result<Self> {
        for (key, text) in BUILTIN_TASKS {
            if key.eq_ignore_ascii_case(name) {
                return Self::from_toml_str(text);
            }
        }
        Err(Error::Validation(format!(
            "unknown task '{name}' (known: A, B, C, lock1, lock2, lock3)"
        )))
    }

    /// Resolve a CLI-style reference: an existing file path, a name shadowed
    /// by `tasks/<name>.toml` under the current directory, or a builtin.
    pub fn resolve(reference: &str) -> Result<Self> {
        let as_path = Path::new(reference);
        if as_path.is_file() {
            return Self::from_path(as_path);
        }
        let local = Path::new("tasks").join(format!("{}.toml", reference.to_lowercase()));
        if local.is_file() {
            return Self::from_path(&local);
        }
        Self::builtin(reference)
    }

    pub fn family(&self) -> TaskFamily {
        match self.kind {
            TaskKind::Nav(_) => TaskFamily::Nav,
            TaskKind::Lock(_) => TaskFamily::Lock,
        }
    }

    pub fn num_actions(&self) -> usize {
        match &self.kind {
            TaskKind::Nav(t) => t.num_actions(),
            TaskKind::Lock(t) => t.num_actions(),
        }
    }

    /// Dimension of the feature-map input.
    pub fn input_dim(&self) -> usize {
        match &self.kind {
            TaskKind::Nav(_) => 2,
            TaskKind::Lock(t) => t.featurized.len(),
        }
    }

    pub fn action_label(&self, action: usize) -> String {
        match &self.kind {
            TaskKind::Nav(_) => NAV_ACTIONS
                .get(action)
                .map(|s| s.to_string())
                .unwrap_or_else(|| format!("action{action}")),
            TaskKind::Lock(t) => t
                .controllable
                .get(action)
                .map(|d| format!("rotate-{}", d.name()))
                .unwrap_or_else(|| format!("action{action}")),
        }
    }
}
