//! Continuous 2-D navigation on the unit square.
//!
//! Four actions move the agent a fixed step left/right/up/down, clamped to
//! the bounds. Each move no-ops with the slip probability, and any move
//! whose path would cross a barrier rectangle is blocked in place. Reaching
//! the goal disc pays +1 and ends the episode.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Axis-aligned barrier rectangle; the blocking region is the open interior.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
}

impl Rect {
    pub fn contains(&self, p: [f64; 2]) -> bool {
        p[0] > self.x_min && p[0] < self.x_max && p[1] > self.y_min && p[1] < self.y_max
    }

    /// Liang-Barsky clip: true when the segment passes through the interior.
    fn blocks(&self, p: [f64; 2], q: [f64; 2]) -> bool {
        let d = [q[0] - p[0], q[1] - p[1]];
        let lo = [self.x_min, self.y_min];
        let hi = [self.x_max, self.y_max];
        let mut t0 = 0.0f64;
        let mut t1 = 1.0f64;
        for axis in 0..2 {
            if d[axis].abs() < 1e-15 {
                if p[axis] <= lo[axis] || p[axis] >= hi[axis] {
                    return false;
                }
            } else {
                let mut ta = (lo[axis] - p[axis]) / d[axis];
                let mut tb = (hi[axis] - p[axis]) / d[axis];
                if ta > tb {
                    std::mem::swap(&mut ta, &mut tb);
                }
                t0 = t0.max(ta);
                t1 = t1.min(tb);
                if t0 >= t1 {
                    return false;
                }
            }
        }
        t0 < t1
    }
}

/// Actions in index order.
pub const NAV_ACTIONS: [&str; 4] = ["left", "right", "up", "down"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NavTask {
    pub step_size: f64,
    pub slip_prob: f64,
    pub goal_center: [f64; 2],
    pub goal_radius: f64,
    pub barriers: Vec<Rect>,
}

impl NavTask {
    pub fn validate(&self) -> Result<()> {
        if !(self.step_size > 0.0) {
            return Err(Error::Validation("step size must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.slip_prob) {
            return Err(Error::Validation("slip probability must lie in [0, 1]".into()));
        }
        if !(self.goal_radius > 0.0) {
            return Err(Error::Validation("goal radius must be positive".into()));
        }
        let inside = |v: f64| (0.0..=1.0).contains(&v);
        if !inside(self.goal_center[0]) || !inside(self.goal_center[1]) {
            return Err(Error::Validation("goal center must lie inside [0,1]^2".into()));
        }
        for r in &self.barriers {
            if r.x_min >= r.x_max || r.y_min >= r.y_max {
                return Err(Error::Validation("degenerate barrier rectangle".into()));
            }
            if !inside(r.x_min) || !inside(r.x_max) || !inside(r.y_min) || !inside(r.y_max) {
                return Err(Error::Validation("barrier must lie inside [0,1]^2".into()));
            }
        }
        Ok(())
    }

    pub fn num_actions(&self) -> usize {
        NAV_ACTIONS.len()
    }

    pub fn in_barrier(&self, p: [f64; 2]) -> bool {
        self.barriers.iter().any(|r| r.contains(p))
    }

    pub fn in_goal(&self, p: [f64; 2]) -> bool {
        let dx = p[0] - self.goal_center[0];
        let dy = p[1] - self.goal_center[1];
        (dx * dx + dy * dy).sqrt() <= self.goal_radius
    }

    /// Uniform start over the square, rejecting barrier and goal points.
    pub fn sample_start(&self, rng: &mut ChaCha8Rng) -> [f64; 2] {
        loop {
            let p = [rng.random_range(0.0..1.0), rng.random_range(0.0..1.0)];
            if !self.in_barrier(p) && !self.in_goal(p) {
                return p;
            }
        }
    }

    pub fn step(
        &self,
        s: [f64; 2],
        action: usize,
        rng: &mut ChaCha8Rng,
    ) -> Result<([f64; 2], f64, bool)> {
        if action >= self.num_actions() {
            return Err(Error::Validation(format!("unknown nav action {action}")));
        }
        if !(0.0..=1.0).contains(&s[0]) || !(0.0..=1.0).contains(&s[1]) || self.in_barrier(s) {
            return Err(Error::Validation(format!(
                "state ({}, {}) is outside the walkable region",
                s[0], s[1]
            )));
        }

        let slipped = rng.random_bool(self.slip_prob);
        let next = if slipped {
            s
        } else {
            let delta = match action {
                0 => [-self.step_size, 0.0],
                1 => [self.step_size, 0.0],
                2 => [0.0, self.step_size],
                _ => [0.0, -self.step_size],
            };
            let target = [
                (s[0] + delta[0]).clamp(0.0, 1.0),
                (s[1] + delta[1]).clamp(0.0, 1.0),
            ];
            if self.barriers.iter().any(|r| r.blocks(s, target)) {
                s
            } else {
                target
            }
        };

        let done = self.in_goal(next);
        Ok((next, if done { 1.0 } else { 0.0 }, done))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn task() -> NavTask {
        NavTask {
            step_size: 0.05,
            slip_prob: 0.0,
            goal_center: [0.85, 0.85],
            goal_radius: 0.1,
            barriers: vec![Rect {
                x_min: 0.47,
                y_min: 0.25,
                x_max: 0.53,
                y_max: 1.0,
            }],
        }
    }

    #[test]
    fn plain_move_covers_one_step() {
        let t = task();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let (next, r, done) = t.step([0.5, 0.1], 1, &mut rng).unwrap();
        assert!((next[0] - 0.55).abs() < 1e-12);
        assert!((next[1] - 0.1).abs() < 1e-12);
        assert_eq!(r, 0.0);
        assert!(!done);
    }

    #[test]
    fn moves_clamp_at_the_boundary() {
        let t = task();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let (next, _, _) = t.step([0.98, 0.1], 1, &mut rng).unwrap();
        assert_eq!(next[0], 1.0);
        let (next, _, _) = t.step([0.02, 0.1], 0, &mut rng).unwrap();
        assert_eq!(next[0], 0.0);
    }

    #[test]
    fn barrier_blocks_the_crossing_move() {
        let t = task();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        // Moving right from just left of the wall, at wall height.
        let (next, _, _) = t.step([0.45, 0.5], 1, &mut rng).unwrap();
        assert_eq!(next, [0.45, 0.5]);
        // Below the gap the same move passes.
        let (next, _, _) = t.step([0.45, 0.1], 1, &mut rng).unwrap();
        assert!((next[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn goal_pays_one_and_terminates() {
        let t = task();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let (_, r, done) = t.step([0.85, 0.76], 2, &mut rng).unwrap();
        assert_eq!(r, 1.0);
        assert!(done);
    }

    #[test]
    fn invalid_states_are_rejected() {
        let t = task();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(t.step([1.2, 0.5], 0, &mut rng).is_err());
        assert!(t.step([0.5, 0.5], 0, &mut rng).is_err()); // inside the wall
        assert!(t.step([0.5, 0.1], 7, &mut rng).is_err());
    }

    #[test]
    fn random_walk_never_enters_barriers_or_leaves_bounds() {
        let mut t = task();
        t.slip_prob = 0.05;
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let mut s = t.sample_start(&mut rng);
        for _ in 0..1_000_000 {
            let a = rng.random_range(0..4);
            let (next, _, done) = t.step(s, a, &mut rng).unwrap();
            assert!(!t.in_barrier(next));
            assert!((0.0..=1.0).contains(&next[0]) && (0.0..=1.0).contains(&next[1]));
            s = if done { t.sample_start(&mut rng) } else { next };
        }
    }

    #[test]
    fn empirical_slip_rate_matches_configuration() {
        let mut t = task();
        t.slip_prob = 0.05;
        t.barriers.clear();
        t.goal_center = [2.0, 2.0]; // unreachable: validate() not used here
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut slips = 0usize;
        let n = 100_000;
        for _ in 0..n {
            // From the center a right-move either lands at 0.55 (no slip) or stays.
            let (next, _, _) = t.step([0.5, 0.5], 1, &mut rng).unwrap();
            if next == [0.5, 0.5] {
                slips += 1;
            }
        }
        let rate = slips as f64 / n as f64;
        assert!((rate - 0.05).abs() <= 0.005, "slip rate {rate}");
    }

    #[test]
    fn start_sampling_avoids_barriers_and_goal() {
        let t = task();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10_000 {
            let p = t.sample_start(&mut rng);
            assert!(!t.in_barrier(p));
            assert!(!t.in_goal(p));
        }
    }
}
