//! Combination-lock task: three dials over digits 0..5.
//!
//! Each action rotates one controllable dial by its fixed direction
//! (mod 6); every broken dial then respins uniformly. The reward
//! combination is a partial assignment over non-random dials worth +1.

use nalgebra::DVector;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DIAL_MODULUS: u8 = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dial {
    Left,
    Middle,
    Right,
}

impl Dial {
    pub fn index(self) -> usize {
        match self {
            Dial::Left => 0,
            Dial::Middle => 1,
            Dial::Right => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Dial::Left => "left",
            Dial::Middle => "middle",
            Dial::Right => "right",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LockTask {
    /// Action index i rotates `controllable[i]`.
    pub controllable: Vec<Dial>,
    /// Per-controllable-dial rotation direction, +1 or -1.
    pub directions: Vec<i8>,
    /// Dials that respin uniformly every step.
    pub random: Vec<Dial>,
    /// Digits that pay +1 when all match.
    pub reward_combo: Vec<(Dial, u8)>,
    /// Fixed start digits; unlisted dials start uniformly at random.
    pub start: Vec<(Dial, u8)>,
    /// Dials fed to the feature map, in order.
    pub featurized: Vec<Dial>,
}

impl LockTask {
    pub fn validate(&self) -> Result<()> {
        if self.controllable.is_empty() {
            return Err(Error::Validation("lock needs a controllable dial".into()));
        }
        if self.directions.len() != self.controllable.len() {
            return Err(Error::Validation(
                "one direction per controllable dial required".into(),
            ));
        }
        if self.directions.iter().any(|&d| d != 1 && d != -1) {
            return Err(Error::Validation("dial directions must be +1 or -1".into()));
        }
        for dial in &self.controllable {
            if self.random.contains(dial) {
                return Err(Error::Validation(format!(
                    "dial {} cannot be both controllable and random",
                    dial.name()
                )));
            }
        }
        for (dial, digit) in &self.reward_combo {
            if self.random.contains(dial) {
                return Err(Error::Validation(format!(
                    "reward combination may not reference the random dial {}",
                    dial.name()
                )));
            }
            if *digit >= DIAL_MODULUS {
                return Err(Error::Validation(format!("digit {digit} out of range")));
            }
        }
        for (_, digit) in &self.start {
            if *digit >= DIAL_MODULUS {
                return Err(Error::Validation(format!("digit {digit} out of range")));
            }
        }
        if self.featurized.is_empty() {
            return Err(Error::Validation("at least one dial must be featurized".into()));
        }
        Ok(())
    }

    pub fn num_actions(&self) -> usize {
        self.controllable.len()
    }

    /// Total number of dial configurations (6^3).
    pub fn state_count(&self) -> usize {
        (DIAL_MODULUS as usize).pow(3)
    }

    pub fn sample_start(&self, rng: &mut ChaCha8Rng) -> [u8; 3] {
        let mut s = [0u8; 3];
        let mut fixed = [false; 3];
        for (dial, digit) in &self.start {
            s[dial.index()] = *digit;
            fixed[dial.index()] = true;
        }
        for (i, was_fixed) in fixed.iter().enumerate() {
            if !was_fixed {
                s[i] = rng.random_range(0..DIAL_MODULUS);
            }
        }
        s
    }

    fn reward_satisfied(&self, s: &[u8; 3]) -> bool {
        self.reward_combo
            .iter()
            .all(|(dial, digit)| s[dial.index()] == *digit)
    }

    pub fn step(
        &self,
        s: [u8; 3],
        action: usize,
        rng: &mut ChaCha8Rng,
    ) -> Result<([u8; 3], f64, bool)> {
        let dial = *self
            .controllable
            .get(action)
            .ok_or_else(|| Error::Validation(format!("unknown lock action {action}")))?;
        if s.iter().any(|&d| d >= DIAL_MODULUS) {
            return Err(Error::Validation("dial digit out of range".into()));
        }
        let mut next = s;
        let dir = self.directions[action];
        let idx = dial.index();
        next[idx] = (next[idx] as i16 + dir as i16).rem_euclid(DIAL_MODULUS as i16) as u8;
        for random_dial in &self.random {
            next[random_dial.index()] = rng.random_range(0..DIAL_MODULUS);
        }
        let done = self.reward_satisfied(&next);
        Ok((next, if done { 1.0 } else { 0.0 }, done))
    }

    /// Featurized dials as raw digit values.
    pub fn observe(&self, s: &[u8; 3]) -> DVector<f64> {
        DVector::from_fn(self.featurized.len(), |i, _| {
            s[self.featurized[i].index()] as f64
        })
    }
}
