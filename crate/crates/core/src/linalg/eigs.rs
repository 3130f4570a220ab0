use faer::{Col, Mat, Scale};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::lu::{lu_factor, LuFactor};
use super::schur::{schur, sort_schur};
use crate::discretize::SparseOperator;
use crate::{Error, Result, C64};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EigsOptions {
    pub k: usize,
    pub shift: C64,
    pub tol: f64,
    /// Krylov subspace dimension; `None` means `max(2k + 1, 60)`.
    pub subspace: Option<usize>,
    pub max_restarts: usize,
    pub seed: u64,
    /// Number of leading eigenvectors to return.
    pub vectors: usize,
}

impl Default for EigsOptions {
    fn default() -> Self {
        Self { k: 400, shift: C64::new(0.0, 0.0), tol: 1e-10, subspace: None, max_restarts: 300, seed: 0, vectors: 0 }
    }
}

#[derive(Clone, Debug)]
pub struct EigenResult {
    /// Sorted by ascending distance to the shift.
    pub eigenvalues: Vec<C64>,
    /// Unit-norm eigenvectors of the leading `vectors` eigenvalues, as columns.
    pub eigenvectors: Option<Mat<C64>>,
    /// `||A v - lambda v|| / ||v||`, recomputed with one matrix-vector product.
    pub residuals: Vec<f64>,
    pub operator_applications: usize,
    pub restarts: usize,
    /// False when the restart limit was hit before all `k` pairs converged;
    /// the result then holds the converged subset.
    pub converged: bool,
    pub shift: C64,
    /// `||A||_1`, the scale for residual tolerances.
    pub norm_1: f64,
}

/// `k` eigenvalues of `A` closest to `shift`, by Krylov-Schur iteration on
/// `(A - shift)^{-1}`.
pub fn eigs_shift_invert(a: &SparseOperator, k: usize, shift: C64, tol: f64) -> Result<EigenResult> {
    eigs_shift_invert_with(a, &EigsOptions { k, shift, tol, ..Default::default() })
}

pub fn eigs_shift_invert_with(a: &SparseOperator, opts: &EigsOptions) -> Result<EigenResult> {
    let n = a.dim();
    if opts.k == 0 || opts.k >= n {
        return Err(Error::InvalidParameter(format!("need 0 < k < dimension, got k = {} for n = {n}", opts.k)));
    }
    let lu = lu_factor(&a.shifted(opts.shift)).map_err(|e| match e {
        Error::Singular { pivot } => Error::Eigen(format!(
            "shift {} is (numerically) an eigenvalue, singular pivot {pivot}; perturb the shift",
            opts.shift
        )),
        other => other,
    })?;
    krylov_schur(a, &lu, opts)
}

struct Basis {
    v: Mat<C64>,
}

impl Basis {
    /// Orthogonalizes `w` against the first `j` columns (two passes of
    /// classical Gram-Schmidt); returns the coefficients.
    fn orthogonalize(&self, j: usize, w: &mut Col<C64>) -> Col<C64> {
        let vj = self.v.as_ref().subcols(0, j);
        let mut h = vj.adjoint() * &*w;
        *w -= vj * &h;
        let h2 = vj.adjoint() * &*w;
        *w -= vj * &h2;
        h += &h2;
        h
    }
}

fn krylov_schur(a: &SparseOperator, lu: &LuFactor, opts: &EigsOptions) -> Result<EigenResult> {
    let n = a.dim();
    let k = opts.k;
    let m = opts.subspace.unwrap_or((2 * k + 1).max(60)).max(k + 2).min(n);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let random_vec = |rng: &mut ChaCha8Rng| Col::<C64>::from_fn(n, |_| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));

    let mut basis = Basis { v: Mat::<C64>::zeros(n, m + 1) };
    let mut h = Mat::<C64>::zeros(m + 1, m);
    let v0 = random_vec(&mut rng);
    let nv0 = v0.norm_l2();
    basis.v.col_mut(0).copy_from(v0 * Scale(C64::new(1.0 / nv0, 0.0)));

    let mut p = 0;
    let mut applications = 0;
    let mut restarts = 0;
    let mut buf = vec![C64::new(0.0, 0.0); n];
    let keep = (k + (m - k) / 2).min(m - 1).max(k);

    loop {
        for j in p..m {
            for (i, b) in buf.iter_mut().enumerate() {
                *b = basis.v[(i, j)];
            }
            lu.solve(&mut buf);
            applications += 1;
            let mut w = Col::<C64>::from_fn(n, |i| buf[i]);
            let coeffs = basis.orthogonalize(j + 1, &mut w);
            for i in 0..=j {
                h[(i, j)] += coeffs[i];
            }
            let beta = w.norm_l2();
            let hnorm = coeffs.norm_l2();
            if beta > 1e-12 * hnorm.max(f64::MIN_POSITIVE) {
                h[(j + 1, j)] = C64::new(beta, 0.0);
                basis.v.col_mut(j + 1).copy_from(w * Scale(C64::new(1.0 / beta, 0.0)));
            } else {
                h[(j + 1, j)] = C64::new(0.0, 0.0);
                if j + 1 < n {
                    let mut r = random_vec(&mut rng);
                    basis.orthogonalize(j + 1, &mut r);
                    let nr = r.norm_l2();
                    basis.v.col_mut(j + 1).copy_from(r * Scale(C64::new(1.0 / nr, 0.0)));
                } else {
                    basis.v.col_mut(j + 1).fill(C64::new(0.0, 0.0));
                }
            }
        }

        let (mut t, mut q) = schur(h.as_ref().submatrix(0, 0, m, m))?;
        sort_schur(&mut t, &mut q, |x| -x.norm());
        let b: Col<C64> = (h.as_ref().row(m) * &q).transpose().to_owned();

        // Residual estimates |b^H s_i| / ||s_i|| with s_i the eigenvector of T.
        let mut nconv = 0;
        let mut estimates = vec![f64::INFINITY; k];
        for i in 0..k {
            let y = triangular_eigvec(&t, i);
            let ny = y.norm_l2();
            let r: C64 = (0..=i).map(|l| b[l] * y[l]).sum();
            estimates[i] = r.norm() / ny;
            let theta = t[(i, i)].norm();
            if estimates[i] <= opts.tol * theta {
                nconv += 1;
            } else {
                break;
            }
        }
        let done = nconv >= k;
        if done || restarts >= opts.max_restarts {
            let count = if done { k } else { nconv };
            return finish(a, &basis, &t, &q, m, count, done, applications, restarts, opts);
        }

        // Truncate to the leading `keep` Schur vectors.
        restarts += 1;
        const CHUNK: usize = 4096;
        let qk = q.as_ref().subcols(0, keep);
        let mut row0 = 0;
        while row0 < n {
            let rows = CHUNK.min(n - row0);
            let block = basis.v.as_ref().submatrix(row0, 0, rows, m) * qk;
            basis.v.as_mut().submatrix_mut(row0, 0, rows, keep).copy_from(&block);
            row0 += rows;
        }
        let vm = basis.v.col(m).to_owned();
        basis.v.col_mut(keep).copy_from(&vm);
        h.fill(C64::new(0.0, 0.0));
        h.as_mut().submatrix_mut(0, 0, keep, keep).copy_from(t.as_ref().submatrix(0, 0, keep, keep));
        for j in 0..keep {
            h[(keep, j)] = b[j];
        }
        p = keep;
    }
}

/// Eigenvector of the leading `(i+1) x (i+1)` block of upper triangular `t`
/// for eigenvalue `t[i, i]`, normalized so that its last entry is one.
fn triangular_eigvec(t: &Mat<C64>, i: usize) -> Col<C64> {
    let mut y = Col::<C64>::zeros(i + 1);
    y[i] = C64::new(1.0, 0.0);
    let lam = t[(i, i)];
    let small = f64::EPSILON * t.norm_max().max(f64::MIN_POSITIVE);
    for l in (0..i).rev() {
        let s: C64 = (l + 1..=i).map(|c| t[(l, c)] * y[c]).sum();
        let mut d = t[(l, l)] - lam;
        if d.norm() < small {
            d = C64::new(small, 0.0);
        }
        y[l] = -s / d;
    }
    y
}

#[allow(clippy::too_many_arguments)]
fn finish(
    a: &SparseOperator,
    basis: &Basis,
    t: &Mat<C64>,
    q: &Mat<C64>,
    m: usize,
    count: usize,
    converged: bool,
    applications: usize,
    restarts: usize,
    opts: &EigsOptions,
) -> Result<EigenResult> {
    let n = a.dim();
    let norm_1 = a.norm_1();
    let mut eigenvalues = Vec::with_capacity(count);
    let mut residuals = Vec::with_capacity(count);
    let mut kept: Vec<Vec<C64>> = Vec::new();
    let mut converged = converged;
    let vm = basis.v.as_ref().subcols(0, m);
    let mut ax = vec![C64::new(0.0, 0.0); n];
    for i in 0..count {
        let theta = t[(i, i)];
        let lambda = opts.shift + C64::new(1.0, 0.0) / theta;
        let y = triangular_eigvec(t, i);
        let s = q.as_ref().subcols(0, i + 1) * &y;
        let x = vm * &s;
        let nx = x.norm_l2();
        let xs: Vec<C64> = (0..n).map(|r| x[r] / nx).collect();
        a.apply(&xs, &mut ax);
        let res = ax.iter().zip(&xs).map(|(p, v)| (p - lambda * v).norm_sqr()).sum::<f64>().sqrt();
        if !res.is_finite() {
            return Err(Error::Eigen("non-finite Ritz residual".into()));
        }
        // The Krylov estimate lives in the inverted operator; for strongly
        // non-normal A it can pass while A x - lambda x is far from small.
        if res > opts.tol * norm_1 {
            converged = false;
            continue;
        }
        eigenvalues.push(lambda);
        residuals.push(res);
        if kept.len() < opts.vectors {
            kept.push(xs);
        }
    }
    let eigenvectors = (!kept.is_empty()).then(|| Mat::<C64>::from_fn(n, kept.len(), |r, c| kept[c][r]));
    Ok(EigenResult {
        eigenvalues,
        eigenvectors,
        residuals,
        operator_applications: applications,
        restarts,
        converged,
        shift: opts.shift,
        norm_1,
    })
}
