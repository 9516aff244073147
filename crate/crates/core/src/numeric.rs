//! Small dense linear-algebra helpers shared by the estimator modules.

use nalgebra::{DMatrix, DVector};

/// Force exact symmetry: `C <- (C + C^T) / 2`.
pub fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    debug_assert_eq!(n, m.ncols());
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

/// Largest absolute asymmetry `max_ij |C_ij - C_ji|`.
pub fn max_asymmetry(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in (i + 1)..n {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_symmetric_eigenvalue(m: &DMatrix<f64>) -> f64 {
    m.clone()
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .fold(f64::INFINITY, |a, &b| a.min(b))
}

/// Spectral radius `max_i |lambda_i|` of a general square matrix, estimated
/// by normalized power iteration with a fixed budget.
///
/// The estimate is the geometric mean of the growth factors over the final
/// window, which also converges for complex-conjugate dominant pairs where
/// the per-step growth oscillates. A fixed budget keeps the guard paths
/// total; iterative Schur decompositions are not (they can stall on the
/// dense positive matrices the transition filter produces).
pub fn spectral_radius(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    debug_assert_eq!(n, m.ncols());
    if n == 0 {
        return 0.0;
    }
    const TOTAL: usize = 160;
    const WINDOW: usize = 48;
    let mut x = DVector::from_fn(n, |i, _| 1.0 + 0.3 * ((i as f64) * 0.7).sin());
    x /= x.norm();
    let mut log_sum = 0.0;
    for k in 0..TOTAL {
        let y = m * &x;
        let growth = y.norm();
        if growth == 0.0 {
            return 0.0;
        }
        if !growth.is_finite() {
            return f64::INFINITY;
        }
        x = y / growth;
        if k >= TOTAL - WINDOW {
            log_sum += growth.ln();
        }
    }
    (log_sum / WINDOW as f64).exp()
}

/// Cheap upper bound on the spectral radius: `min(||M||_1, ||M||_inf)`.
pub fn spectral_radius_bound(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    let mut col_max = 0.0f64;
    for j in 0..n {
        col_max = col_max.max(m.column(j).iter().map(|v| v.abs()).sum());
    }
    let mut row_max = 0.0f64;
    for i in 0..n {
        row_max = row_max.max(m.row(i).iter().map(|v| v.abs()).sum());
    }
    col_max.min(row_max)
}

/// 2-norm condition estimate via singular values; `inf` when singular or
/// when the decomposition fails to converge in its budget.
pub fn condition_estimate(m: &DMatrix<f64>) -> f64 {
    let Some(svd) = m.clone().try_svd(false, false, f64::EPSILON, 1000) else {
        return f64::INFINITY;
    };
    let max = svd.singular_values.iter().fold(0.0f64, |a, &b| a.max(b));
    let min = svd
        .singular_values
        .iter()
        .fold(f64::INFINITY, |a, &b| a.min(b));
    if min <= 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// True when every entry is finite.
pub fn all_finite_mat(m: &DMatrix<f64>) -> bool {
    m.iter().all(|v| v.is_finite())
}

/// True when every entry is finite.
pub fn all_finite_vec(v: &DVector<f64>) -> bool {
    v.iter().all(|x| x.is_finite())
}
