use faer::{Mat, Side};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::lu::{lu_factor, LuFactor};
use crate::discretize::SparseOperator;
use crate::{Error, Result, C64};

/// Conditioning of `A - lambda I` at one point of the complex plane.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub lambda: C64,
    pub sigma_min: Option<f64>,
    /// `+inf` when the shifted operator is singular to working precision.
    pub log10_kappa: Option<f64>,
    pub method: String,
}

fn norm2(x: &[C64]) -> f64 {
    x.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
}

fn dot(x: &[C64], y: &[C64]) -> C64 {
    x.iter().zip(y).map(|(a, b)| a.conj() * b).sum()
}

/// Smallest singular value of `A - lambda I` by Lanczos iteration on
/// `(A - lambda)^{-1} (A - lambda)^{-H}`, whose largest eigenvalue is
/// `sigma_min^{-2}`. Both solves reuse one LU factorization.
pub fn min_singular_value(a: &SparseOperator, lambda: C64, tol: f64) -> Result<ConditionReport> {
    let shifted = a.shifted(lambda);
    let method = "lanczos on (A-l)^-1 (A-l)^-H".to_string();
    let lu = match lu_factor(&shifted) {
        Ok(lu) => lu,
        Err(Error::Singular { .. }) => {
            return Ok(ConditionReport { lambda, sigma_min: Some(0.0), log10_kappa: None, method })
        }
        Err(e) => return Err(e),
    };
    let sigma = sigma_min_from_lu(&lu, a.dim(), tol, 0)?;
    Ok(ConditionReport { lambda, sigma_min: Some(sigma), log10_kappa: None, method })
}

/// Lanczos with full reorthogonalization; restarts from the current Ritz
/// vector when the basis is exhausted.
pub fn sigma_min_from_lu(lu: &LuFactor, n: usize, tol: f64, seed: u64) -> Result<f64> {
    let max_dim = n.min(80);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let mut start: Vec<C64> = (0..n).map(|_| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)).collect();
    let mut last_mu = 0.0;
    for _restart in 0..50 {
        let ns = norm2(&start);
        let mut q: Vec<Vec<C64>> = vec![start.iter().map(|v| v / ns).collect()];
        let mut alpha: Vec<f64> = Vec::new();
        let mut beta: Vec<f64> = Vec::new();
        for j in 0..max_dim {
            let mut w = q[j].clone();
            lu.solve_adjoint(&mut w);
            lu.solve(&mut w);
            if w.iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
                return Ok(0.0);
            }
            alpha.push(dot(&q[j], &w).re);
            for _pass in 0..2 {
                for qi in &q {
                    let c = dot(qi, &w);
                    w.iter_mut().zip(qi).for_each(|(x, y)| *x -= c * y);
                }
            }
            let b = norm2(&w);
            let k = alpha.len();
            let t = Mat::<f64>::from_fn(k, k, |r, c| {
                if r == c {
                    alpha[r]
                } else if r == c + 1 {
                    beta[c]
                } else if c == r + 1 {
                    beta[r]
                } else {
                    0.0
                }
            });
            let eig = t.self_adjoint_eigen(Side::Lower).map_err(|_| Error::Eigen("tridiagonal eigensolver failed".into()))?;
            let mu = eig.S().column_vector()[k - 1];
            let y_last = eig.U()[(k - 1, k - 1)];
            last_mu = mu;
            let converged = b * y_last.abs() <= tol * mu.abs() || b <= f64::EPSILON * mu.abs();
            if converged || j + 1 == max_dim {
                if converged {
                    return Ok(if mu > 0.0 { 1.0 / mu.sqrt() } else { 0.0 });
                }
                // restart from the Ritz vector
                let u = eig.U();
                start = vec![C64::new(0.0, 0.0); n];
                for (i, qi) in q.iter().enumerate() {
                    let c = u[(i, k - 1)];
                    start.iter_mut().zip(qi).for_each(|(s, v)| *s += v * c);
                }
                break;
            }
            beta.push(b);
            q.push(w.iter().map(|v| v / b).collect());
        }
    }
    Err(Error::NoConvergence { what: "minimum singular value", iterations: 50 * max_dim, residual: last_mu })
}

/// Hager-Higham estimate of `||M^{-1}||_1` from an LU factorization of `M`.
pub fn inverse_norm1_estimate(lu: &LuFactor, n: usize) -> f64 {
    let sign = |v: C64| if v.norm() == 0.0 { C64::new(1.0, 0.0) } else { v / v.norm() };
    let mut x = vec![C64::new(1.0 / n as f64, 0.0); n];
    let mut est = 0.0f64;
    let mut last_j = usize::MAX;
    for iter in 0..5 {
        let mut y = x.clone();
        lu.solve(&mut y);
        let new_est: f64 = y.iter().map(|v| v.norm()).sum();
        if !new_est.is_finite() {
            return f64::INFINITY;
        }
        if iter > 0 && new_est <= est {
            break;
        }
        est = new_est;
        let mut z: Vec<C64> = y.iter().map(|&v| sign(v)).collect();
        lu.solve_adjoint(&mut z);
        let (j, zmax) = z.iter().enumerate().fold((0, -1.0), |(bj, bm), (i, v)| if v.norm() > bm { (i, v.norm()) } else { (bj, bm) });
        if !zmax.is_finite() {
            return f64::INFINITY;
        }
        if iter > 0 && (zmax <= dot(&z, &x).re || j == last_j) {
            break;
        }
        last_j = j;
        x = vec![C64::new(0.0, 0.0); n];
        x[j] = C64::new(1.0, 0.0);
    }
    // alternating test vector guards against the estimator's blind spots
    let mut alt: Vec<C64> = (0..n)
        .map(|i| {
            let s = if i % 2 == 0 { 1.0 } else { -1.0 };
            C64::new(s * (1.0 + i as f64 / (n.max(2) - 1) as f64), 0.0)
        })
        .collect();
    lu.solve(&mut alt);
    let alt_est = 2.0 * alt.iter().map(|v| v.norm()).sum::<f64>() / (3.0 * n as f64);
    if !alt_est.is_finite() {
        return f64::INFINITY;
    }
    est.max(alt_est)
}

/// `log10` of the 1-norm condition number of `A - lambda I`, with the
/// inverse norm estimated. Singular shifts give `+inf`.
pub fn condest_1norm(a: &SparseOperator, lambda: C64) -> Result<ConditionReport> {
    let shifted = a.shifted(lambda);
    let method = "hager-higham 1-norm estimate".to_string();
    let norm = shifted.norm_1();
    let log10_kappa = match lu_factor(&shifted) {
        Ok(lu) => {
            let inv = inverse_norm1_estimate(&lu, a.dim());
            (norm * inv).log10().max(0.0)
        }
        Err(Error::Singular { .. }) => f64::INFINITY,
        Err(e) => return Err(e),
    };
    let log10_kappa = if log10_kappa.is_finite() { log10_kappa } else { f64::INFINITY };
    Ok(ConditionReport { lambda, sigma_min: None, log10_kappa: Some(log10_kappa), method })
}
