use faer::reborrow::{Reborrow, ReborrowMut};
use faer::{Mat, MatMut, MatRef};

use super::dense::DenseLu;
use crate::discretize::{BlockLayout, SparseOperator};
use crate::{Error, Result, C64};

/// Dense border appended to a block-tridiagonal matrix:
/// `[[A, cols], [rows, corner]]`.
#[derive(Clone, Debug)]
pub struct Border {
    pub cols: Mat<C64>,
    pub rows: Mat<C64>,
    pub corner: Mat<C64>,
}

impl Border {
    pub fn width(&self) -> usize {
        self.corner.nrows()
    }
}

type Coupling = Vec<(u32, u32, C64)>;

/// Block LU of a block-tridiagonal matrix (optionally bordered), without
/// pivoting across blocks.
///
/// Diagonal blocks are replaced by Schur complements and factored densely
/// with partial pivoting; the off-diagonal couplings stay sparse. The border
/// is merged into the last block, so a rank-deficient `A` with a
/// regularizing border factors stably.
pub struct BlockLu {
    layout: BlockLayout,
    width: usize,
    diag: Vec<DenseLu>,
    /// `A_{i+1,i}`, local (row in block i+1, col in block i)
    sub: Vec<Coupling>,
    /// `A_{i,i+1}`, local (row in block i, col in block i+1)
    sup: Vec<Coupling>,
    /// Reduced border columns per block (rows of block i, `width` columns).
    bcols: Vec<Mat<C64>>,
    /// Reduced border rows per block (`width` rows, columns of block i).
    brows: Vec<Mat<C64>>,
}

fn dense_block(a: &SparseOperator, rows: std::ops::Range<usize>, cols: std::ops::Range<usize>) -> Mat<C64> {
    let mut m = Mat::<C64>::zeros(rows.len(), cols.len());
    for (li, i) in rows.clone().enumerate() {
        let (c, v) = a.row(i);
        let lo = c.partition_point(|&j| j < cols.start);
        let hi = c.partition_point(|&j| j < cols.end);
        for k in lo..hi {
            m[(li, c[k] - cols.start)] = v[k];
        }
    }
    m
}

fn sparse_block(a: &SparseOperator, rows: std::ops::Range<usize>, cols: std::ops::Range<usize>) -> Coupling {
    let mut out = Vec::new();
    for (li, i) in rows.clone().enumerate() {
        let (c, v) = a.row(i);
        let lo = c.partition_point(|&j| j < cols.start);
        let hi = c.partition_point(|&j| j < cols.end);
        for k in lo..hi {
            out.push((li as u32, (c[k] - cols.start) as u32, v[k]));
        }
    }
    out
}

/// `y -= S x` with S sparse (local indices).
fn sub_sparse(y: MatMut<'_, C64>, s: &Coupling, x: MatRef<'_, C64>) {
    let mut y = y;
    for &(r, c, v) in s {
        for col in 0..x.ncols() {
            y[(r as usize, col)] -= v * x[(c as usize, col)];
        }
    }
}

/// `y -= S^H x` with S sparse (local indices).
fn sub_sparse_adjoint(y: MatMut<'_, C64>, s: &Coupling, x: MatRef<'_, C64>) {
    let mut y = y;
    for &(r, c, v) in s {
        let vc = v.conj();
        for col in 0..x.ncols() {
            y[(c as usize, col)] -= vc * x[(r as usize, col)];
        }
    }
}

impl BlockLu {
    pub fn factor(a: &SparseOperator) -> Result<Self> {
        Self::factor_bordered(a, None)
    }

    pub fn factor_bordered(a: &SparseOperator, border: Option<&Border>) -> Result<Self> {
        let layout = a
            .layout()
            .cloned()
            .ok_or_else(|| Error::Assembly("block LU needs a block layout".into()))?;
        let n = a.dim();
        let w = border.map_or(0, |b| b.width());
        if let Some(b) = border {
            if b.cols.nrows() != n || b.cols.ncols() != w || b.rows.nrows() != w || b.rows.ncols() != n {
                return Err(Error::DimensionMismatch { expected: n, found: b.cols.nrows() });
            }
        }
        let nb = layout.n_blocks();
        let mut diag = Vec::with_capacity(nb);
        let mut sub = Vec::with_capacity(nb.saturating_sub(1));
        let mut sup = Vec::with_capacity(nb.saturating_sub(1));
        let mut bcols = Vec::new();
        let mut brows = Vec::new();

        let r0 = layout.range(0);
        let mut s = dense_block(a, r0.clone(), r0.clone());
        let mut bt = match border {
            Some(b) => b.cols.subrows(r0.start, r0.len()).to_owned(),
            None => Mat::zeros(r0.len(), 0),
        };
        let mut ct = match border {
            Some(b) => b.rows.subcols(r0.start, r0.len()).to_owned(),
            None => Mat::zeros(0, r0.len()),
        };
        let mut e = match border {
            Some(b) => b.corner.clone(),
            None => Mat::zeros(0, 0),
        };

        for i in 0..nb - 1 {
            let ri = layout.range(i);
            let rn = layout.range(i + 1);
            let bn = rn.len();
            let lu = DenseLu::factor(std::mem::replace(&mut s, Mat::zeros(0, 0)), ri.start)?;
            let up = sparse_block(a, ri.clone(), rn.clone());
            let low = sparse_block(a, rn.clone(), ri.clone());

            // X = S_i^{-1} [A_{i,i+1} | B_i]
            let mut x = Mat::<C64>::zeros(ri.len(), bn + w);
            for &(r, c, v) in &up {
                x[(r as usize, c as usize)] = v;
            }
            if w > 0 {
                x.as_mut().subcols_mut(bn, w).copy_from(&bt);
            }
            lu.solve(x.as_mut());

            s = dense_block(a, rn.clone(), rn.clone());
            sub_sparse(s.as_mut(), &low, x.as_ref().subcols(0, bn));
            if w > 0 {
                let b = border.expect("width > 0");
                let mut bt_next = b.cols.subrows(rn.start, bn).to_owned();
                sub_sparse(bt_next.as_mut(), &low, x.as_ref().subcols(bn, w));
                let ct_next = b.rows.subcols(rn.start, bn).to_owned() - &ct * x.as_ref().subcols(0, bn);
                e -= &ct * x.as_ref().subcols(bn, w);
                bcols.push(std::mem::replace(&mut bt, bt_next));
                brows.push(std::mem::replace(&mut ct, ct_next));
            }
            diag.push(lu);
            sub.push(low);
            sup.push(up);
        }

        let rl = layout.range(nb - 1);
        let bl = rl.len();
        let mut k = Mat::<C64>::zeros(bl + w, bl + w);
        k.as_mut().submatrix_mut(0, 0, bl, bl).copy_from(&s);
        if w > 0 {
            k.as_mut().submatrix_mut(0, bl, bl, w).copy_from(&bt);
            k.as_mut().submatrix_mut(bl, 0, w, bl).copy_from(&ct);
            k.as_mut().submatrix_mut(bl, bl, w, w).copy_from(&e);
        }
        diag.push(DenseLu::factor(k, rl.start)?);
        Ok(Self { layout, width: w, diag, sub, sup, bcols, brows })
    }

    /// Total dimension including the border.
    pub fn dim(&self) -> usize {
        self.layout.dim() + self.width
    }

    /// Ratio of smallest to largest pivot over all blocks; a cheap
    /// near-singularity indicator.
    pub fn pivot_ratio(&self) -> f64 {
        let (lo, hi) = self
            .diag
            .iter()
            .map(|d| d.pivot_range())
            .fold((f64::INFINITY, 0.0f64), |(a, b), (c, d)| (a.min(c), b.max(d)));
        lo / hi
    }

    fn split(&self, rhs: MatRef<'_, C64>) -> Vec<Mat<C64>> {
        let nb = self.layout.n_blocks();
        let mut segs: Vec<Mat<C64>> =
            (0..nb - 1).map(|i| { let r = self.layout.range(i); rhs.subrows(r.start, r.len()).to_owned() }).collect();
        let rl = self.layout.range(nb - 1);
        segs.push(rhs.subrows(rl.start, rl.len() + self.width).to_owned());
        segs
    }

    fn join(&self, segs: &[Mat<C64>], rhs: MatMut<'_, C64>) {
        let mut rhs = rhs;
        let mut start = 0;
        for s in segs {
            rhs.rb_mut().subrows_mut(start, s.nrows()).copy_from(s);
            start += s.nrows();
        }
    }

    pub fn solve(&self, rhs: MatMut<'_, C64>) {
        assert_eq!(rhs.nrows(), self.dim());
        let nb = self.layout.n_blocks();
        let w = self.width;
        let mut g = self.split(rhs.rb());
        let bl = g[nb - 1].nrows() - w;
        for i in 0..nb - 1 {
            let mut z = g[i].clone();
            self.diag[i].solve(z.as_mut());
            sub_sparse(g[i + 1].as_mut(), &self.sub[i], z.as_ref());
            if w > 0 {
                let last = g.last_mut().expect("non-empty");
                let upd = &self.brows[i] * &z;
                let mut tailw = last.as_mut().subrows_mut(bl, w);
                tailw -= &upd;
            }
        }
        self.diag[nb - 1].solve(g[nb - 1].as_mut());
        for i in (0..nb - 1).rev() {
            let (head, tail) = g.split_at_mut(i + 1);
            let gi = &mut head[i];
            let xn = &tail[0];
            // x_i = S_i^{-1} (g_i - A_{i,i+1} x_{i+1} - B_i x_W)
            sub_sparse(gi.as_mut(), &self.sup[i], xn.as_ref());
            if w > 0 {
                let xw = g_last_border(tail, bl, w);
                *gi -= &self.bcols[i] * xw;
            }
            self.diag[i].solve(gi.as_mut());
        }
        self.join(&g, rhs);
    }

    /// Solves with the conjugate transpose of the (bordered) matrix.
    pub fn solve_adjoint(&self, rhs: MatMut<'_, C64>) {
        assert_eq!(rhs.nrows(), self.dim());
        let nb = self.layout.n_blocks();
        let w = self.width;
        let m = rhs.ncols();
        let mut y = self.split(rhs.rb());
        let bl = y[nb - 1].nrows() - w;
        // U^H y = b
        for i in 0..nb - 1 {
            if i > 0 {
                let (head, tail) = y.split_at_mut(i);
                sub_sparse_adjoint(tail[0].as_mut(), &self.sup[i - 1], head[i - 1].as_ref());
            }
            self.diag[i].solve_adjoint(y[i].as_mut());
        }
        if nb > 1 {
            let (head, tail) = y.split_at_mut(nb - 1);
            sub_sparse_adjoint(tail[0].as_mut().subrows_mut(0, bl), &self.sup[nb - 2], head[nb - 2].as_ref());
            if w > 0 {
                let mut acc = Mat::<C64>::zeros(w, m);
                for (i, yi) in head.iter().enumerate() {
                    acc += self.bcols[i].adjoint() * yi;
                }
                let mut tw = tail[0].as_mut().subrows_mut(bl, w);
                tw -= &acc;
            }
        }
        self.diag[nb - 1].solve_adjoint(y[nb - 1].as_mut());
        // L^H x = y
        for i in (0..nb - 1).rev() {
            let (head, tail) = y.split_at_mut(i + 1);
            let mut t = Mat::<C64>::zeros(head[i].nrows(), m);
            let xn = &tail[0];
            for &(r, c, v) in &self.sub[i] {
                let vc = v.conj();
                for col in 0..m {
                    t[(c as usize, col)] += vc * xn[(r as usize, col)];
                }
            }
            if w > 0 {
                let xw = g_last_border(tail, bl, w);
                t += self.brows[i].adjoint() * xw;
            }
            self.diag[i].solve_adjoint(t.as_mut());
            head[i] -= &t;
        }
        self.join(&y, rhs);
    }
}

fn g_last_border(tail: &[Mat<C64>], bl: usize, w: usize) -> MatRef<'_, C64> {
    tail.last().expect("non-empty").as_ref().subrows(bl, w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_block_tridiagonal(sizes: &[usize], seed: u64) -> SparseOperator {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut starts = vec![0];
        for s in sizes {
            starts.push(starts.last().unwrap() + s);
        }
        let layout = BlockLayout::new(starts).unwrap();
        let n = layout.dim();
        let mut t = Vec::new();
        for i in 0..n {
            let bi = layout.block_of(i);
            for j in 0..n {
                let bj = layout.block_of(j);
                if bi.abs_diff(bj) <= 1 && rng.random::<f64>() < 0.4 {
                    t.push((i, j, C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)));
                }
            }
            t.push((i, i, C64::new(3.0, 0.0)));
        }
        SparseOperator::from_triplets(n, t).with_layout(layout).unwrap()
    }

    #[test]
    fn matches_dense_solution() {
        let a = random_block_tridiagonal(&[3, 5, 4, 2, 6], 7);
        let lu = BlockLu::factor(&a).unwrap();
        let n = a.dim();
        let b = Mat::from_fn(n, 2, |i, j| C64::new(i as f64 - 3.0, j as f64 + 0.5));
        let dense = a.to_dense();
        let mut x = b.clone();
        lu.solve(x.as_mut());
        assert!((&dense * &x - &b).norm_l2() < 1e-11 * b.norm_l2());
        let mut y = b.clone();
        lu.solve_adjoint(y.as_mut());
        assert!((dense.adjoint() * &y - &b).norm_l2() < 1e-11 * b.norm_l2());
    }

    #[test]
    fn bordered_singular_core() {
        // A has a null vector; the border removes it.
        let n = 12;
        let layout = BlockLayout::new(vec![0, 4, 8, 12]).unwrap();
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, C64::new(-2.0, 0.0)));
            if i > 0 {
                t.push((i, i - 1, C64::new(1.0, 0.0)));
            }
            if i + 1 < n {
                t.push((i, i + 1, C64::new(1.0, 0.0)));
            }
        }
        t.push((0, 0, C64::new(1.0, 0.0)));
        t.push((n - 1, n - 1, C64::new(1.0, 0.0)));
        // Neumann Laplacian: constants are in the kernel
        let a = SparseOperator::from_triplets(n, t).with_layout(layout).unwrap();
        assert!(BlockLu::factor(&a).is_err() || BlockLu::factor(&a).unwrap().pivot_ratio() < 1e-12);
        let border = Border {
            cols: Mat::from_fn(n, 1, |_, _| C64::new(1.0, 0.0)),
            rows: Mat::from_fn(1, n, |_, _| C64::new(1.0, 0.0)),
            corner: Mat::zeros(1, 1),
        };
        let lu = BlockLu::factor_bordered(&a, Some(&border)).unwrap();
        let mut full = Mat::<C64>::zeros(n + 1, n + 1);
        full.as_mut().submatrix_mut(0, 0, n, n).copy_from(a.to_dense());
        full.as_mut().submatrix_mut(0, n, n, 1).copy_from(&border.cols);
        full.as_mut().submatrix_mut(n, 0, 1, n).copy_from(&border.rows);
        let b = Mat::from_fn(n + 1, 1, |i, _| C64::new((i as f64).sin(), (i as f64).cos()));
        let mut x = b.clone();
        lu.solve(x.as_mut());
        assert!((&full * &x - &b).norm_l2() < 1e-10);
        let mut y = b.clone();
        lu.solve_adjoint(y.as_mut());
        assert!((full.adjoint() * &y - &b).norm_l2() < 1e-10);
    }

    #[test]
    fn random_bordered_matches_dense() {
        let a = random_block_tridiagonal(&[4, 3, 5, 3], 11);
        let n = a.dim();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut rnd = || C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5);
        let border = Border {
            cols: Mat::from_fn(n, 2, |_, _| rnd()),
            rows: Mat::from_fn(2, n, |_, _| rnd()),
            corner: Mat::from_fn(2, 2, |_, _| rnd()),
        };
        let lu = BlockLu::factor_bordered(&a, Some(&border)).unwrap();
        let mut full = Mat::<C64>::zeros(n + 2, n + 2);
        full.as_mut().submatrix_mut(0, 0, n, n).copy_from(a.to_dense());
        full.as_mut().submatrix_mut(0, n, n, 2).copy_from(&border.cols);
        full.as_mut().submatrix_mut(n, 0, 2, n).copy_from(&border.rows);
        full.as_mut().submatrix_mut(n, n, 2, 2).copy_from(&border.corner);
        let b = Mat::from_fn(n + 2, 3, |i, j| C64::new(i as f64 * 0.1, j as f64 - 1.0));
        let mut x = b.clone();
        lu.solve(x.as_mut());
        assert!((&full * &x - &b).norm_l2() < 1e-10 * b.norm_l2());
        let mut y = b.clone();
        lu.solve_adjoint(y.as_mut());
        assert!((full.adjoint() * &y - &b).norm_l2() < 1e-10 * b.norm_l2());
    }
}
