use faer::dyn_stack::{MemBuffer, MemStack};
use faer::linalg::lu::partial_pivoting::{factor, solve};
use faer::perm::PermRef;
use faer::{Conj, Mat, MatMut, Par};

use crate::{Error, Result, C64};

/// Dense LU with partial pivoting, `L` and `U` stored in one matrix.
pub(crate) struct DenseLu {
    lu: Mat<C64>,
    fwd: Vec<usize>,
    inv: Vec<usize>,
}

impl DenseLu {
    /// Factors `a` in place; `offset` only shifts the pivot index reported on
    /// failure.
    pub fn factor(mut a: Mat<C64>, offset: usize) -> Result<Self> {
        let n = a.nrows();
        assert_eq!(n, a.ncols());
        let mut fwd = vec![0usize; n];
        let mut inv = vec![0usize; n];
        let mut mem = MemBuffer::new(factor::lu_in_place_scratch::<usize, C64>(
            n,
            n,
            Par::Seq,
            Default::default(),
        ));
        factor::lu_in_place(
            a.as_mut(),
            &mut fwd,
            &mut inv,
            Par::Seq,
            MemStack::new(&mut mem),
            Default::default(),
        );
        for i in 0..n {
            let d = a[(i, i)];
            if d == C64::new(0.0, 0.0) || !d.re.is_finite() || !d.im.is_finite() {
                return Err(Error::Singular { pivot: offset + i });
            }
        }
        Ok(Self { lu: a, fwd, inv })
    }

    pub fn dim(&self) -> usize {
        self.lu.nrows()
    }

    /// Smallest and largest pivot moduli.
    pub fn pivot_range(&self) -> (f64, f64) {
        (0..self.dim()).fold((f64::INFINITY, 0.0f64), |(lo, hi), i| {
            let d = self.lu[(i, i)].norm();
            (lo.min(d), hi.max(d))
        })
    }

    fn perm(&self) -> PermRef<'_, usize> {
        PermRef::new_checked(&self.fwd, &self.inv, self.dim())
    }

    pub fn solve(&self, rhs: MatMut<'_, C64>) {
        let mut mem =
            MemBuffer::new(solve::solve_in_place_scratch::<usize, C64>(self.dim(), rhs.ncols(), Par::Seq));
        solve::solve_in_place_with_conj(
            self.lu.as_ref(),
            self.lu.as_ref(),
            self.perm(),
            Conj::No,
            rhs,
            Par::Seq,
            MemStack::new(&mut mem),
        );
    }

    /// Solves with the conjugate transpose.
    pub fn solve_adjoint(&self, rhs: MatMut<'_, C64>) {
        let mut mem = MemBuffer::new(solve::solve_transpose_in_place_scratch::<usize, C64>(
            self.dim(),
            rhs.ncols(),
            Par::Seq,
        ));
        solve::solve_transpose_in_place_with_conj(
            self.lu.as_ref(),
            self.lu.as_ref(),
            self.perm(),
            Conj::Yes,
            rhs,
            Par::Seq,
            MemStack::new(&mut mem),
        );
    }
}
