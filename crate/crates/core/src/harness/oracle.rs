//! Self-contained oracle checks runnable from the command line.
//!
//! Each check recomputes a closed-form quantity by an independent route
//! (fixed-point iteration, Neumann series, brute-force policy evaluation)
//! and compares. The CLI `oracle` subcommand prints one line per check.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::successor;

/// Outcome of one oracle check.
#[derive(Debug, Clone)]
pub struct OracleReport {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn random_stochastic(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    let mut t = DMatrix::from_fn(n, n, |_, _| rng.random_range(0.0..1.0));
    for i in 0..n {
        let sum: f64 = t.row(i).iter().sum();
        for j in 0..n {
            t[(i, j)] /= sum;
        }
    }
    t
}

fn check_tabular_sr_against_iteration() -> Result<OracleReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let n = rng.random_range(2..=30);
        let gamma = rng.random_range(0.3..0.95);
        let t = random_stochastic(&mut rng, n);
        let sr = successor::tabular_sr(&t, gamma)?;
        let mut m = DMatrix::identity(n, n);
        loop {
            let next = DMatrix::identity(n, n) + &t * &m * gamma;
            let delta = (&next - &m).amax();
            m = next;
            if delta < 1e-13 {
                break;
            }
        }
        worst = worst.max((&sr.sr - &m).amax());
    }
    Ok(OracleReport {
        name: "tabular-sr-fixed-point",
        passed: worst <= 1e-6,
        detail: format!("max closed-form vs iteration gap {worst:.3e}"),
    })
}

fn check_two_state_chain() -> Result<OracleReport> {
    let t = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 1.0]);
    let sr = successor::tabular_sr(&t, 0.5)?;
    let expected = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 2.0]);
    let gap = (&sr.sr - expected).amax();
    Ok(OracleReport {
        name: "tabular-sr-two-state-chain",
        passed: gap == 0.0,
        detail: format!("max entry gap {gap:.3e}"),
    })
}

fn check_barrier_adaptation() -> Result<OracleReport> {
    let n = 6;
    let mut t = DMatrix::zeros(n, n);
    for i in 0..n - 1 {
        t[(i, i + 1)] = 1.0;
    }
    t[(n - 1, n - 1)] = 1.0;
    let before = successor::tabular_sr(&t, 0.9)?;
    let mut blocked = t.clone();
    blocked[(3, 4)] = 0.0;
    blocked[(3, 3)] = 1.0;
    let after = successor::tabular_sr(&blocked, 0.9)?;
    let upstream_changed = (0..=3).all(|i| (after.sr.row(i) - before.sr.row(i)).amax() > 0.0);
    let downstream_stable = (4..n).all(|i| (after.sr.row(i) - before.sr.row(i)).amax() < 1e-12);
    Ok(OracleReport {
        name: "tabular-sr-barrier-adaptation",
        passed: upstream_changed && downstream_stable,
        detail: format!(
            "upstream rows changed: {upstream_changed}, downstream rows stable: {downstream_stable}"
        ),
    })
}

fn check_sf_fixed_point() -> Result<OracleReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let l = rng.random_range(2..=12);
        let gamma = [0.9, 0.95, 0.99][rng.random_range(0..3)];
        let raw = DMatrix::from_fn(l, l, |_, _| rng.random_range(-1.0..1.0));
        let rho = crate::numeric::spectral_radius(&raw);
        let f = raw * (rng.random_range(0.1..0.95) / (gamma * rho.max(1e-12)));
        let phi = DVector::from_fn(l, |_, _| rng.random_range(-1.0..1.0));
        let m = successor::successor_features(&f, &phi, gamma)?;
        worst = worst.max((&m - &phi - &f * &m * gamma).amax());
    }
    Ok(OracleReport {
        name: "successor-feature-fixed-point",
        passed: worst <= 1e-9,
        detail: format!("max fixed-point defect {worst:.3e}"),
    })
}

/// Brute-force policy evaluation on random finite MDPs embedded in one-hot
/// features; the analytic bound must dominate the measured error.
pub fn check_error_bound(trials: usize, seed: u64) -> Result<OracleReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = 20;
    let actions = 3;
    let gamma = 0.9;
    let mut violations = 0usize;
    let mut max_ratio = 0.0f64;
    for _ in 0..trials {
        // True model.
        let ps: Vec<DMatrix<f64>> = (0..actions).map(|_| random_stochastic(&mut rng, n)).collect();
        let rs: Vec<DVector<f64>> = (0..actions)
            .map(|_| DVector::from_fn(n, |_, _| rng.random_range(0.0..1.0)))
            .collect();
        // Uniform policy over actions.
        let t_pi = ps.iter().fold(DMatrix::zeros(n, n), |acc, p| acc + p) / actions as f64;
        let r_pi = rs.iter().fold(DVector::zeros(n), |acc, r| acc + r) / actions as f64;

        // Brute-force policy evaluation: V = r_pi + gamma T V iterated.
        let mut v_true = DVector::zeros(n);
        loop {
            let next = &r_pi + &t_pi * &v_true * gamma;
            let delta = (&next - &v_true).amax();
            v_true = next;
            if delta < 1e-13 {
                break;
            }
        }
        // Q(s, a) = R(s, a) + gamma P_a(s, :) V.
        let q_true: Vec<DVector<f64>> = (0..actions)
            .map(|a| &rs[a] + ps[a].clone() * &v_true * gamma)
            .collect();

        // Perturbed learned model in the one-hot basis: F_a = P_a^T + noise.
        let eps = rng.random_range(0.0..0.05);
        let f_learned: Vec<DMatrix<f64>> = (0..actions)
            .map(|a| {
                ps[a].transpose()
                    + DMatrix::from_fn(n, n, |_, _| rng.random_range(-eps..=eps))
            })
            .collect();
        let theta_learned: Vec<DVector<f64>> = (0..actions)
            .map(|a| &rs[a] + DVector::from_fn(n, |_, _| rng.random_range(-eps..=eps)))
            .collect();
        let f_pi = f_learned
            .iter()
            .fold(DMatrix::zeros(n, n), |acc, f| acc + f)
            / actions as f64;
        let theta_pi = theta_learned
            .iter()
            .fold(DVector::zeros(n), |acc, t| acc + t)
            / actions as f64;

        // Exact residual suprema of the perturbed model.
        let mut e_r = 0.0f64;
        let mut e_p = 0.0f64;
        for a in 0..actions {
            for s in 0..n {
                e_r = e_r.max((rs[a][s] - theta_learned[a][s]).abs());
                let mut one_hot = DVector::zeros(n);
                one_hot[s] = 1.0;
                let expected_phi = ps[a].transpose() * &one_hot;
                e_p = e_p.max((expected_phi - &f_learned[a] * &one_hot).norm());
            }
        }

        let v_weights = successor::value_weights(&theta_pi, &f_pi, gamma)?;
        let bound = successor::error_bound(e_r, e_p, &v_weights, gamma)?;
        let mut measured = 0.0f64;
        for a in 0..actions {
            let q_w =
                successor::q_weights(&theta_learned[a], &theta_pi, &f_learned[a], &f_pi, gamma)?;
            for s in 0..n {
                measured = measured.max((q_true[a][s] - q_w[s]).abs());
            }
        }
        if measured > bound {
            violations += 1;
        }
        if bound > 0.0 {
            max_ratio = max_ratio.max(measured / bound);
        }
    }
    Ok(OracleReport {
        name: "error-bound-dominates-brute-force",
        passed: violations == 0,
        detail: format!("{violations} violations, worst measured/bound ratio {max_ratio:.3}"),
    })
}

/// Run the full oracle suite.
pub fn oracle_suite() -> Result<Vec<OracleReport>> {
    Ok(vec![
        check_two_state_chain()?,
        check_tabular_sr_against_iteration()?,
        check_barrier_adaptation()?,
        check_sf_fixed_point()?,
        check_error_bound(100, 3)?,
    ])
}
