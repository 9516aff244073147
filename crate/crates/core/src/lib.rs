//! Successor-feature reinforcement learning from Kalman-filter model
//! estimates.
//!
//! The crate learns a linear model of an MDP online — reward weights through
//! a bank of Kalman filters, transition matrices through a matrix-variate
//! filter — and turns that model into values in closed form:
//! `V(s) = theta_pi^T (I - gamma F_pi)^-1 phi(s)`. Posterior covariance
//! traces double as an exploration bonus, so the agent prefers actions it
//! knows least about. Because the transition model is explicit, a change in
//! the environment propagates to every state's value through one linear
//! solve instead of waiting on new trajectories.
//!
//! Modules:
//! * [`kalman`] — recursive estimators (vector, bank, matrix).
//! * [`features`] — radial-basis featurization and its SGD refinement.
//! * [`envmodel`] — per-action reward/transition models and the bonus.
//! * [`successor`] — closed-form successor features, values, Q weights.
//! * [`agent`] — the training loop and its ablation variants.
//! * [`envs`] — navigation and combination-lock benchmark tasks.
//! * [`harness`] — seeded experiment runner, checkpoints, CSV reports.

pub mod agent;
pub mod envmodel;
pub mod envs;
pub mod error;
pub mod features;
pub mod harness;
pub mod kalman;
pub mod numeric;
pub mod successor;

pub use error::{Error, Result};
