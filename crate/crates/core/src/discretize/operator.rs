use faer::sparse::{SparseColMat, Triplet};
use faer::Mat;

use crate::{Error, Result, C64};

/// Partition of the unknowns into consecutive blocks such that the operator
/// is block tridiagonal: entries of block row `i` only touch block columns
/// `i - 1`, `i`, `i + 1`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BlockLayout {
    starts: Vec<usize>,
}

impl BlockLayout {
    /// `starts` holds the first index of every block followed by the total
    /// dimension.
    pub fn new(starts: Vec<usize>) -> Result<Self> {
        if starts.len() < 2 || starts[0] != 0 || starts.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Assembly("block layout must be strictly increasing from 0".into()));
        }
        Ok(Self { starts })
    }

    pub fn n_blocks(&self) -> usize {
        self.starts.len() - 1
    }

    pub fn dim(&self) -> usize {
        *self.starts.last().expect("non-empty")
    }

    pub fn range(&self, block: usize) -> std::ops::Range<usize> {
        self.starts[block]..self.starts[block + 1]
    }

    pub fn block_of(&self, index: usize) -> usize {
        self.starts.partition_point(|&s| s <= index) - 1
    }
}

/// Square sparse matrix with complex entries in compressed-row storage.
///
/// Exact zeros are dropped at assembly. Real operators are stored with zero
/// imaginary parts so that complex shifts need no reassembly.
#[derive(Clone, Debug)]
pub struct SparseOperator {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<C64>,
    layout: Option<BlockLayout>,
}

/// Row-by-row assembly. Rows must be pushed in order; duplicate columns
/// within a row are summed.
pub struct RowBuilder {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<C64>,
    scratch: Vec<(usize, C64)>,
}

impl RowBuilder {
    pub fn new(n: usize) -> Self {
        let mut row_ptr = Vec::with_capacity(n + 1);
        row_ptr.push(0);
        Self { n, row_ptr, cols: Vec::new(), vals: Vec::new(), scratch: Vec::new() }
    }

    pub fn reserve(&mut self, nnz: usize) {
        self.cols.reserve(nnz);
        self.vals.reserve(nnz);
    }

    pub fn add(&mut self, col: usize, val: C64) {
        debug_assert!(col < self.n);
        self.scratch.push((col, val));
    }

    pub fn add_real(&mut self, col: usize, val: f64) {
        self.add(col, C64::new(val, 0.0));
    }

    pub fn finish_row(&mut self) {
        self.scratch.sort_unstable_by_key(|e| e.0);
        let mut k = 0;
        while k < self.scratch.len() {
            let col = self.scratch[k].0;
            let mut acc = C64::new(0.0, 0.0);
            while k < self.scratch.len() && self.scratch[k].0 == col {
                acc += self.scratch[k].1;
                k += 1;
            }
            if acc != C64::new(0.0, 0.0) {
                self.cols.push(col);
                self.vals.push(acc);
            }
        }
        self.scratch.clear();
        self.row_ptr.push(self.cols.len());
    }

    pub fn finish(self) -> Result<SparseOperator> {
        if self.row_ptr.len() != self.n + 1 {
            return Err(Error::Assembly(format!(
                "expected {} rows, assembled {}",
                self.n,
                self.row_ptr.len() - 1
            )));
        }
        Ok(SparseOperator {
            n: self.n,
            row_ptr: self.row_ptr,
            cols: self.cols,
            vals: self.vals,
            layout: None,
        })
    }
}

impl SparseOperator {
    pub fn from_triplets(n: usize, triplets: impl IntoIterator<Item = (usize, usize, C64)>) -> Self {
        let mut rows: Vec<Vec<(usize, C64)>> = vec![Vec::new(); n];
        for (i, j, v) in triplets {
            assert!(i < n && j < n, "triplet ({i}, {j}) outside {n}x{n}");
            rows[i].push((j, v));
        }
        let mut b = RowBuilder::new(n);
        for row in rows {
            for (j, v) in row {
                b.add(j, v);
            }
            b.finish_row();
        }
        b.finish().expect("all rows pushed")
    }

    pub fn from_real_triplets(n: usize, triplets: impl IntoIterator<Item = (usize, usize, f64)>) -> Self {
        Self::from_triplets(n, triplets.into_iter().map(|(i, j, v)| (i, j, C64::new(v, 0.0))))
    }

    pub fn identity(n: usize) -> Self {
        Self::from_triplets(n, (0..n).map(|i| (i, i, C64::new(1.0, 0.0))))
    }

    pub fn from_dense(a: &Mat<C64>) -> Self {
        assert_eq!(a.nrows(), a.ncols());
        let n = a.nrows();
        let mut b = RowBuilder::new(n);
        for i in 0..n {
            for j in 0..n {
                b.add(j, a[(i, j)]);
            }
            b.finish_row();
        }
        b.finish().expect("all rows pushed")
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn layout(&self) -> Option<&BlockLayout> {
        self.layout.as_ref()
    }

    /// Attaches a block-tridiagonal partition after checking that every
    /// stored entry respects it.
    pub fn with_layout(mut self, layout: BlockLayout) -> Result<Self> {
        if layout.dim() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, found: layout.dim() });
        }
        for i in 0..self.n {
            let bi = layout.block_of(i);
            for &j in self.row(i).0 {
                let bj = layout.block_of(j);
                if bj + 1 < bi || bi + 1 < bj {
                    return Err(Error::Assembly(format!(
                        "entry ({i}, {j}) couples blocks {bi} and {bj}"
                    )));
                }
            }
        }
        self.layout = Some(layout);
        Ok(self)
    }

    pub fn row(&self, i: usize) -> (&[usize], &[C64]) {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.cols[r.clone()], &self.vals[r])
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        let (cols, vals) = self.row(i);
        match cols.binary_search(&j) {
            Ok(k) => vals[k],
            Err(_) => C64::new(0.0, 0.0),
        }
    }

    /// Iterates over stored entries in row-major order.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, C64)> + '_ {
        (0..self.n).flat_map(move |i| {
            let (c, v) = self.row(i);
            c.iter().zip(v).map(move |(&j, &x)| (i, j, x))
        })
    }

    /// `y = A x`
    pub fn apply(&self, x: &[C64], y: &mut [C64]) {
        assert_eq!(x.len(), self.n);
        assert_eq!(y.len(), self.n);
        for (i, yi) in y.iter_mut().enumerate() {
            let (c, v) = self.row(i);
            *yi = c.iter().zip(v).map(|(&j, &a)| a * x[j]).sum();
        }
    }

    pub fn apply_vec(&self, x: &[C64]) -> Vec<C64> {
        let mut y = vec![C64::new(0.0, 0.0); self.n];
        self.apply(x, &mut y);
        y
    }

    /// `y = A^H x`
    pub fn apply_adjoint(&self, x: &[C64], y: &mut [C64]) {
        assert_eq!(x.len(), self.n);
        y.iter_mut().for_each(|v| *v = C64::new(0.0, 0.0));
        for (i, xi) in x.iter().enumerate() {
            let (c, v) = self.row(i);
            for (&j, &a) in c.iter().zip(v) {
                y[j] += a.conj() * xi;
            }
        }
    }

    /// Maximum absolute column sum.
    pub fn norm_1(&self) -> f64 {
        let mut sums = vec![0.0; self.n];
        for (_, j, v) in self.entries() {
            sums[j] += v.norm();
        }
        sums.into_iter().fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.vals.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// `A - shift I`, keeping the block layout.
    pub fn shifted(&self, shift: C64) -> Self {
        let mut b = RowBuilder::new(self.n);
        b.reserve(self.nnz() + self.n);
        for i in 0..self.n {
            let (c, v) = self.row(i);
            for (&j, &x) in c.iter().zip(v) {
                b.add(j, x);
            }
            b.add(i, -shift);
            b.finish_row();
        }
        let mut out = b.finish().expect("all rows pushed");
        out.layout = self.layout.clone();
        out
    }

    /// Rewrites every stored entry through `f(row, col, value)`.
    pub fn map_entries(&self, f: impl Fn(usize, usize, C64) -> C64) -> Self {
        let mut out = self.clone();
        for i in 0..self.n {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                out.vals[k] = f(i, self.cols[k], self.vals[k]);
            }
        }
        out
    }

    pub fn to_dense(&self) -> Mat<C64> {
        let mut a = Mat::<C64>::zeros(self.n, self.n);
        for (i, j, v) in self.entries() {
            a[(i, j)] = v;
        }
        a
    }

    pub fn to_faer(&self) -> SparseColMat<usize, C64> {
        let t: Vec<_> = self.entries().map(|(i, j, v)| Triplet::new(i, j, v)).collect();
        SparseColMat::try_new_from_triplets(self.n, self.n, &t).expect("indices in range")
    }

    pub fn is_finite(&self) -> bool {
        self.vals.iter().all(|v| v.re.is_finite() && v.im.is_finite())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    #[test]
    fn duplicates_sum_and_zeros_drop() {
        let a = SparseOperator::from_triplets(
            3,
            vec![(0, 1, c(1.0)), (0, 1, c(2.0)), (1, 1, c(1.0)), (1, 1, c(-1.0)), (2, 0, c(5.0))],
        );
        assert_eq!(a.nnz(), 2);
        assert_eq!(a.get(0, 1), c(3.0));
        assert_eq!(a.get(1, 1), c(0.0));
    }

    #[test]
    fn adjoint_is_consistent_with_apply() {
        let a = SparseOperator::from_triplets(
            3,
            vec![(0, 1, C64::new(1.0, 2.0)), (2, 0, C64::new(-3.0, 0.5)), (1, 1, c(4.0))],
        );
        let x = vec![C64::new(1.0, -1.0), C64::new(0.5, 2.0), C64::new(-2.0, 0.0)];
        let y = vec![C64::new(0.0, 1.0), C64::new(3.0, -1.0), C64::new(1.0, 1.0)];
        let ax = a.apply_vec(&x);
        let mut ahy = vec![c(0.0); 3];
        a.apply_adjoint(&y, &mut ahy);
        let lhs: C64 = y.iter().zip(&ax).map(|(u, v)| u.conj() * v).sum();
        let rhs: C64 = ahy.iter().zip(&x).map(|(u, v)| u.conj() * v).sum();
        assert!((lhs - rhs).norm() < 1e-14);
    }

    #[test]
    fn layout_rejects_long_range_coupling() {
        let a = SparseOperator::from_triplets(4, vec![(0, 3, c(1.0)), (1, 1, c(1.0))]);
        let layout = BlockLayout::new(vec![0, 1, 2, 3, 4]).unwrap();
        assert!(a.clone().with_layout(layout).is_err());
        let layout = BlockLayout::new(vec![0, 2, 4]).unwrap();
        assert!(a.with_layout(layout).is_ok());
    }

    #[test]
    fn shift_adds_missing_diagonal() {
        let a = SparseOperator::from_triplets(2, vec![(0, 1, c(1.0))]);
        let s = a.shifted(C64::new(1.0, 1.0));
        assert_eq!(s.get(0, 0), C64::new(-1.0, -1.0));
        assert_eq!(s.get(1, 1), C64::new(-1.0, -1.0));
        assert_eq!(a.norm_1(), 1.0);
    }
}
