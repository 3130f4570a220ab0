//! Complex Schur decomposition of small dense matrices and reordering of the
//! Schur form, as needed by the Krylov-Schur restart.

use faer::dyn_stack::{MemBuffer, MemStack};
use faer::linalg::evd::hessenberg;
use faer::linalg::householder;
use faer::linalg::qr::no_pivoting::factor::recommended_block_size;
use faer::{Conj, Mat, MatRef, Par};

use crate::{Error, Result, C64};

/// Rotation `[[c, s], [-conj(s), c]]` with `c` real mapping `(f, g)` to `(r, 0)`.
fn givens(f: C64, g: C64) -> (f64, C64) {
    let (af, ag) = (f.norm(), g.norm());
    if ag == 0.0 {
        return (1.0, C64::new(0.0, 0.0));
    }
    if af == 0.0 {
        return (0.0, g.conj() / ag);
    }
    let norm = af.hypot(ag);
    (af / norm, (f / af) * g.conj() / norm)
}

fn rotate_rows(a: &mut Mat<C64>, k: usize, c: f64, s: C64, cols: std::ops::Range<usize>) {
    for j in cols {
        let (x, y) = (a[(k, j)], a[(k + 1, j)]);
        a[(k, j)] = x * c + s * y;
        a[(k + 1, j)] = y * c - s.conj() * x;
    }
}

/// Right-multiplies columns `k, k+1` by the adjoint rotation.
fn rotate_cols(a: &mut Mat<C64>, k: usize, c: f64, s: C64, rows: std::ops::Range<usize>) {
    for i in rows {
        let (x, y) = (a[(i, k)], a[(i, k + 1)]);
        a[(i, k)] = x * c + y * s.conj();
        a[(i, k + 1)] = y * c - x * s;
    }
}

fn hessenberg_with_basis(a: MatRef<'_, C64>) -> (Mat<C64>, Mat<C64>) {
    let n = a.nrows();
    let mut h = a.to_owned();
    let mut z = Mat::<C64>::identity(n, n);
    if n < 3 {
        return (h, z);
    }
    let bs = recommended_block_size::<C64>(n - 1, n - 1);
    let req = hessenberg::hessenberg_in_place_scratch::<C64>(n, bs, Par::Seq, Default::default()).or(
        householder::apply_block_householder_sequence_on_the_right_in_place_scratch::<C64>(n - 1, bs, n - 1),
    );
    let mut mem = MemBuffer::new(req);
    let stack = MemStack::new(&mut mem);
    let mut hh = Mat::<C64>::zeros(bs, n - 1);
    hessenberg::hessenberg_in_place(h.as_mut(), hh.as_mut(), Par::Seq, stack, Default::default());
    householder::apply_block_householder_sequence_on_the_right_in_place_with_conj(
        h.as_ref().submatrix(1, 0, n - 1, n - 1),
        hh.as_ref(),
        Conj::No,
        z.as_mut().submatrix_mut(1, 1, n - 1, n - 1),
        Par::Seq,
        stack,
    );
    for j in 0..n {
        for i in j + 2..n {
            h[(i, j)] = C64::new(0.0, 0.0);
        }
    }
    (h, z)
}

/// Complex Schur form `A = Z T Z^H` with `T` upper triangular and `Z` unitary.
pub fn schur(a: MatRef<'_, C64>) -> Result<(Mat<C64>, Mat<C64>)> {
    let n = a.nrows();
    assert_eq!(n, a.ncols());
    for j in 0..n {
        for i in 0..n {
            let v = a[(i, j)];
            if !(v.re.is_finite() && v.im.is_finite()) {
                return Err(Error::Eigen("Schur input has non-finite entries".into()));
            }
        }
    }
    let (mut h, mut z) = hessenberg_with_basis(a);
    let eps = f64::EPSILON;
    let mut hi = n;
    let mut iter = 0usize;
    let max_iter = 60 * n.max(1);
    while hi > 1 {
        let top = hi - 1;
        // deflation scan
        let mut l = top;
        while l > 0 {
            let sub = h[(l, l - 1)].norm();
            let mut scale = h[(l - 1, l - 1)].norm() + h[(l, l)].norm();
            if scale == 0.0 {
                scale = (0..n).map(|j| h[(l.min(j), j)].norm()).sum::<f64>();
            }
            if sub <= eps * scale || sub < f64::MIN_POSITIVE {
                h[(l, l - 1)] = C64::new(0.0, 0.0);
                break;
            }
            l -= 1;
        }
        if l == top {
            hi -= 1;
            iter = 0;
            continue;
        }
        iter += 1;
        if iter > max_iter {
            return Err(Error::NoConvergence { what: "complex Schur QR", iterations: iter, residual: h[(top, top - 1)].norm() });
        }
        let shift = if iter % 11 == 0 {
            // exceptional shift
            h[(top, top)] + C64::new(0.75 * h[(top, top - 1)].norm(), 0.0)
        } else {
            let (a11, a12, a21, a22) = (h[(top - 1, top - 1)], h[(top - 1, top)], h[(top, top - 1)], h[(top, top)]);
            let half_tr = (a11 + a22) * 0.5;
            let det = a11 * a22 - a12 * a21;
            let disc = (half_tr * half_tr - det).sqrt();
            let (e1, e2) = (half_tr + disc, half_tr - disc);
            if (e1 - a22).norm() < (e2 - a22).norm() { e1 } else { e2 }
        };
        let mut x = h[(l, l)] - shift;
        let mut y = h[(l + 1, l)];
        for k in l..top {
            if k > l {
                x = h[(k, k - 1)];
                y = h[(k + 1, k - 1)];
            }
            let (c, s) = givens(x, y);
            let c0 = if k > l { k - 1 } else { k };
            rotate_rows(&mut h, k, c, s, c0..n);
            rotate_cols(&mut h, k, c, s, 0..(k + 3).min(hi));
            rotate_cols(&mut z, k, c, s, 0..n);
            if k > l {
                h[(k + 1, k - 1)] = C64::new(0.0, 0.0);
            }
        }
    }
    for j in 0..n {
        for i in j + 1..n {
            h[(i, j)] = C64::new(0.0, 0.0);
        }
    }
    Ok((h, z))
}

/// Swaps the adjacent diagonal entries `k` and `k + 1` of an upper triangular
/// Schur factor, updating the basis.
pub fn swap_adjacent(t: &mut Mat<C64>, z: &mut Mat<C64>, k: usize) {
    let n = t.nrows();
    let (t11, t22) = (t[(k, k)], t[(k + 1, k + 1)]);
    let (c, s) = givens(t[(k, k + 1)], t22 - t11);
    rotate_rows(t, k, c, s, k + 2..n);
    rotate_cols(t, k, c, s, 0..k);
    t[(k, k)] = t22;
    t[(k + 1, k + 1)] = t11;
    rotate_cols(z, k, c, s, 0..z.nrows());
}

/// Reorders the Schur form so that diagonal entries appear in the order given
/// by `key` (ascending), using adjacent swaps.
pub fn sort_schur(t: &mut Mat<C64>, z: &mut Mat<C64>, key: impl Fn(C64) -> f64) {
    let n = t.nrows();
    for target in 0..n {
        let mut best = target;
        for i in target + 1..n {
            if key(t[(i, i)]) < key(t[(best, best)]) {
                best = i;
            }
        }
        for k in (target..best).rev() {
            swap_adjacent(t, z, k);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(n: usize, seed: u64) -> Mat<C64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Mat::from_fn(n, n, |_, _| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
    }

    fn check(a: &Mat<C64>, t: &Mat<C64>, z: &Mat<C64>) {
        let n = a.nrows();
        let recon = z * t * z.adjoint();
        assert!((&recon - a).norm_l2() < 1e-12 * n as f64 * a.norm_l2().max(1.0));
        let eye = Mat::<C64>::identity(n, n);
        assert!((z.adjoint() * z - eye).norm_l2() < 1e-12 * n as f64);
        for j in 0..n {
            for i in j + 1..n {
                assert_eq!(t[(i, j)], C64::new(0.0, 0.0));
            }
        }
    }

    #[test]
    fn schur_reconstructs() {
        for (n, seed) in [(1, 0), (2, 1), (5, 2), (40, 3), (90, 4)] {
            let a = random(n, seed);
            let (t, z) = schur(a.as_ref()).unwrap();
            check(&a, &t, &z);
        }
    }

    #[test]
    fn schur_of_normal_and_defective_matrices() {
        let n = 12;
        let a = Mat::from_fn(n, n, |i, j| if j == (i + 1) % n { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) });
        let (t, z) = schur(a.as_ref()).unwrap();
        check(&a, &t, &z);
        let jordan = Mat::from_fn(n, n, |i, j| {
            if i == j { C64::new(2.0, 0.0) } else if j == i + 1 { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) }
        });
        let (t, z) = schur(jordan.as_ref()).unwrap();
        check(&jordan, &t, &z);
    }

    #[test]
    fn sorting_preserves_similarity() {
        let a = random(30, 9);
        let (mut t, mut z) = schur(a.as_ref()).unwrap();
        sort_schur(&mut t, &mut z, |x| -x.norm());
        for i in 1..30 {
            assert!(t[(i - 1, i - 1)].norm() >= t[(i, i)].norm());
        }
        let recon = &z * &t * z.adjoint();
        assert!((&recon - &a).norm_l2() < 1e-11);
    }
}
