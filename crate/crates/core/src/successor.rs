//! Closed-form successor features, value and Q weights, and the tabular
//! successor representation.
//!
//! Everything here is a pure function of its inputs. Discounted feature
//! occupancies follow from one linear solve: `m(s) = (I - g F)^-1 phi(s)`,
//! value weights from the transposed system `(I - g F)^T v = theta`, and
//! per-action Q weights from `q_a = theta_a + g F_a^T v`. Tabular variants
//! operate on row-stochastic transition matrices.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::numeric;

/// Condition-number ceiling past which solves are refused (or shrunk by the
/// guarded path).
pub const MAX_CONDITION: f64 = 1e12;

fn check_square(f: &DMatrix<f64>, context: &'static str) -> Result<usize> {
    let l = f.nrows();
    if f.ncols() != l {
        return Err(Error::Dimension {
            context,
            expected: l,
            actual: f.ncols(),
        });
    }
    Ok(l)
}

/// `I - gamma * F`.
fn system_matrix(f: &DMatrix<f64>, gamma: f64) -> DMatrix<f64> {
    let l = f.nrows();
    DMatrix::identity(l, l) - f * gamma
}

fn solve_checked(a: &DMatrix<f64>, rhs: &DVector<f64>) -> Result<DVector<f64>> {
    let cond = numeric::condition_estimate(a);
    if !cond.is_finite() || cond > MAX_CONDITION {
        return Err(Error::Solver { condition: cond });
    }
    a.clone()
        .lu()
        .solve(rhs)
        .ok_or(Error::Solver { condition: cond })
}

/// Discounted successor features `m = (I - gamma F_pi)^-1 phi`.
///
/// The returned vector satisfies the fixed point `m = phi + gamma F_pi m`.
pub fn successor_features(
    f_pi: &DMatrix<f64>,
    phi: &DVector<f64>,
    gamma: f64,
) -> Result<DVector<f64>> {
    let l = check_square(f_pi, "successor_features transition")?;
    if phi.len() != l {
        return Err(Error::Dimension {
            context: "successor_features features",
            expected: l,
            actual: phi.len(),
        });
    }
    solve_checked(&system_matrix(f_pi, gamma), phi)
}

/// Value weights `v` with `V(s) = v^T phi(s)`: solves `(I - gamma F_pi)^T v = theta_pi`.
pub fn value_weights(
    theta_pi: &DVector<f64>,
    f_pi: &DMatrix<f64>,
    gamma: f64,
) -> Result<DVector<f64>> {
    let l = check_square(f_pi, "value_weights transition")?;
    if theta_pi.len() != l {
        return Err(Error::Dimension {
            context: "value_weights reward weights",
            expected: l,
            actual: theta_pi.len(),
        });
    }
    solve_checked(&system_matrix(f_pi, gamma).transpose(), theta_pi)
}

/// Per-action Q weights `q_a = theta_a + gamma F_a^T v`.
pub fn q_weights(
    theta_a: &DVector<f64>,
    theta_pi: &DVector<f64>,
    f_a: &DMatrix<f64>,
    f_pi: &DMatrix<f64>,
    gamma: f64,
) -> Result<DVector<f64>> {
    let v = value_weights(theta_pi, f_pi, gamma)?;
    Ok(theta_a + f_a.transpose() * v * gamma)
}

/// Value and Q weights for a whole action set, factored through one solve.
#[derive(Debug, Clone)]
pub struct SfSolution {
    pub v_weights: DVector<f64>,
    pub q_weights: Vec<DVector<f64>>,
    /// `(I - gamma F_pi)^-1`, materialized for diagnostics.
    pub resolvent: DMatrix<f64>,
    pub gamma: f64,
}

impl SfSolution {
    pub fn compute(
        theta_pi: &DVector<f64>,
        f_pi: &DMatrix<f64>,
        theta_as: &[DVector<f64>],
        f_as: &[DMatrix<f64>],
        gamma: f64,
    ) -> Result<Self> {
        if theta_as.len() != f_as.len() {
            return Err(Error::Dimension {
                context: "SfSolution action set",
                expected: theta_as.len(),
                actual: f_as.len(),
            });
        }
        let a = system_matrix(f_pi, gamma);
        let cond = numeric::condition_estimate(&a);
        if !cond.is_finite() || cond > MAX_CONDITION {
            return Err(Error::Solver { condition: cond });
        }
        let resolvent = a
            .clone()
            .lu()
            .try_inverse()
            .ok_or(Error::Solver { condition: cond })?;
        let v_weights = resolvent.transpose() * theta_pi;
        let q_weights = theta_as
            .iter()
            .zip(f_as.iter())
            .map(|(theta_a, f_a)| theta_a + f_a.transpose() * &v_weights * gamma)
            .collect();
        Ok(Self {
            v_weights,
            q_weights,
            resolvent,
            gamma,
        })
    }

    /// Max-abs residual of `resolvent * (I - gamma F_pi) - I`.
    pub fn residual(&self, f_pi: &DMatrix<f64>) -> f64 {
        let l = f_pi.nrows();
        let product = &self.resolvent * system_matrix(f_pi, self.gamma);
        (&product - DMatrix::identity(l, l)).amax()
    }
}

/// Value weights via the guarded path used inside the training loop.
///
/// Invertibility of `I - gamma F` is not guaranteed for a learned `F`. When
/// the spectral radius of `gamma F` reaches one, or the system is too
/// ill-conditioned, `F` is shrunk by `0.99 / (gamma rho(F))` for this solve
/// only and the event is reported so runs can count occurrences.
#[derive(Debug, Clone)]
pub struct GuardedValues {
    pub v_weights: DVector<f64>,
    /// True when the transition matrix had to be shrunk for the solve.
    pub shrunk: bool,
}

pub fn guarded_value_weights(
    theta_pi: &DVector<f64>,
    f_pi: &DMatrix<f64>,
    gamma: f64,
) -> Result<GuardedValues> {
    let l = check_square(f_pi, "guarded_value_weights transition")?;
    if theta_pi.len() != l {
        return Err(Error::Dimension {
            context: "guarded_value_weights reward weights",
            expected: l,
            actual: theta_pi.len(),
        });
    }

    // Fast path: a cheap norm bound certifies rho(gamma F) < 1 and the LU
    // factors look well scaled, so no eigenvalue computation is needed.
    let bound = numeric::spectral_radius_bound(f_pi);
    if gamma * bound < 0.999 {
        let a = system_matrix(f_pi, gamma).transpose();
        let lu = a.lu();
        if lu_diag_healthy(&lu) {
            if let Some(v) = lu.solve(theta_pi) {
                return Ok(GuardedValues {
                    v_weights: v,
                    shrunk: false,
                });
            }
        }
    }

    let rho = numeric::spectral_radius(f_pi);
    let mut shrunk = false;
    let mut scale = 1.0;
    if gamma * rho >= 0.999 {
        scale = 0.99 / (gamma * rho);
        shrunk = true;
    }
    loop {
        let a = system_matrix(&(f_pi * scale), gamma).transpose();
        let lu = a.lu();
        if lu_diag_healthy(&lu) {
            if let Some(v) = lu.solve(theta_pi) {
                return Ok(GuardedValues {
                    v_weights: v,
                    shrunk,
                });
            }
        }
        // Still degenerate (highly non-normal F); shrink harder.
        scale *= 0.5;
        shrunk = true;
        if scale < 1e-8 {
            return Err(Error::Solver {
                condition: f64::INFINITY,
            });
        }
    }
}

fn lu_diag_healthy(lu: &nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>) -> bool {
    let u = lu.u();
    let n = u.nrows();
    let mut min = f64::INFINITY;
    let mut max = 0.0f64;
    for i in 0..n {
        let d = u[(i, i)].abs();
        min = min.min(d);
        max = max.max(d);
    }
    min > 0.0 && min >= max * 1e-14
}

/// Upper bound on the Q prediction error,
/// `E <= (e_r + gamma ||v|| e_p) / (1 - gamma)`.
pub fn error_bound(e_r: f64, e_p: f64, v: &DVector<f64>, gamma: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&gamma) {
        return Err(Error::Config(format!(
            "error bound needs gamma in [0, 1), got {gamma}"
        )));
    }
    if e_r < 0.0 || e_p < 0.0 {
        return Err(Error::Config("residual maxima must be nonnegative".into()));
    }
    Ok((e_r + gamma * v.norm() * e_p) / (1.0 - gamma))
}

// ---- tabular successor representation -------------------------------------

/// Max row-sum deviation accepted for a stochastic matrix.
const STOCHASTIC_TOL: f64 = 1e-12;

/// Successor representation of a finite chain: `sr = (I - gamma T)^-1`.
#[derive(Debug, Clone)]
pub struct TabularSr {
    pub transition: DMatrix<f64>,
    pub sr: DMatrix<f64>,
    pub gamma: f64,
}

fn validate_stochastic(t: &DMatrix<f64>) -> Result<()> {
    let n = check_square(t, "tabular transition")?;
    for i in 0..n {
        let mut sum = 0.0;
        for j in 0..n {
            let p = t[(i, j)];
            if p < 0.0 {
                return Err(Error::Validation(format!(
                    "transition matrix has negative entry at ({i}, {j})"
                )));
            }
            sum += p;
        }
        if (sum - 1.0).abs() > STOCHASTIC_TOL {
            return Err(Error::Validation(format!(
                "row {i} sums to {sum}, not 1"
            )));
        }
    }
    Ok(())
}

/// Closed-form successor representation of a row-stochastic matrix.
pub fn tabular_sr(t: &DMatrix<f64>, gamma: f64) -> Result<TabularSr> {
    validate_stochastic(t)?;
    if !(gamma > 0.0 && gamma <= 1.0) && gamma != 0.0 {
        return Err(Error::Config(format!(
            "discount must lie in [0, 1], got {gamma}"
        )));
    }
    let a = system_matrix(t, gamma);
    let cond = numeric::condition_estimate(&a);
    if !cond.is_finite() || cond > MAX_CONDITION {
        // gamma = 1 lands here: every stochastic matrix has eigenvalue 1.
        return Err(Error::Solver { condition: cond });
    }
    let sr = a
        .clone()
        .lu()
        .try_inverse()
        .ok_or(Error::Solver { condition: cond })?;
    Ok(TabularSr {
        transition: t.clone(),
        sr,
        gamma,
    })
}

impl TabularSr {
    /// Expected per-state values `V = sr * r`.
    pub fn values(&self, rewards: &DVector<f64>) -> Result<DVector<f64>> {
        if rewards.len() != self.sr.nrows() {
            return Err(Error::Dimension {
                context: "tabular values rewards",
                expected: self.sr.nrows(),
                actual: rewards.len(),
            });
        }
        Ok(&self.sr * rewards)
    }

    /// Max-abs residual of `sr * (I - gamma T) - I`.
    pub fn residual(&self) -> f64 {
        let n = self.sr.nrows();
        ((&self.sr * system_matrix(&self.transition, self.gamma)) - DMatrix::identity(n, n)).amax()
    }
}
