use faer::linalg::solvers::SolveCore;
use faer::sparse::linalg::solvers::Lu;
use faer::{Conj, Mat, MatMut};

use super::block_lu::{BlockLu, Border};
use crate::discretize::SparseOperator;
use crate::{Error, Result, C64};

/// LU factorization of a sparse operator. Operators carrying a block layout
/// use the block-tridiagonal solver, everything else the general sparse LU.
pub enum LuFactor {
    Block(BlockLu),
    Sparse { lu: Lu<usize, C64>, n: usize },
}

impl LuFactor {
    pub fn dim(&self) -> usize {
        match self {
            LuFactor::Block(b) => b.dim(),
            LuFactor::Sparse { n, .. } => *n,
        }
    }

    pub fn solve_mat(&self, rhs: MatMut<'_, C64>) {
        match self {
            LuFactor::Block(b) => b.solve(rhs),
            LuFactor::Sparse { lu, .. } => lu.solve_in_place_with_conj(Conj::No, rhs),
        }
    }

    /// Solves `A^H x = b` in place.
    pub fn solve_adjoint_mat(&self, rhs: MatMut<'_, C64>) {
        match self {
            LuFactor::Block(b) => b.solve_adjoint(rhs),
            LuFactor::Sparse { lu, .. } => lu.solve_transpose_in_place_with_conj(Conj::Yes, rhs),
        }
    }

    pub fn solve(&self, x: &mut [C64]) {
        let n = x.len();
        self.solve_mat(MatMut::from_column_major_slice_mut(x, n, 1));
    }

    pub fn solve_adjoint(&self, x: &mut [C64]) {
        let n = x.len();
        self.solve_adjoint_mat(MatMut::from_column_major_slice_mut(x, n, 1));
    }
}

pub fn lu_factor(a: &SparseOperator) -> Result<LuFactor> {
    if !a.is_finite() {
        return Err(Error::InvalidParameter("matrix has non-finite entries".into()));
    }
    if a.layout().is_some() {
        return Ok(LuFactor::Block(BlockLu::factor(a)?));
    }
    let n = a.dim();
    let lu = a.to_faer().sp_lu().map_err(|_| Error::Singular { pivot: first_empty_row(a).unwrap_or(0) })?;
    let f = LuFactor::Sparse { lu, n };
    // numerically singular pivots surface as non-finite solutions
    let mut probe = Mat::<C64>::from_fn(n, 1, |i, _| C64::new(1.0 + (i % 7) as f64, 0.5));
    f.solve_mat(probe.as_mut());
    if (0..n).any(|i| !(probe[(i, 0)].re.is_finite() && probe[(i, 0)].im.is_finite())) {
        return Err(Error::Singular { pivot: first_empty_row(a).unwrap_or(0) });
    }
    Ok(f)
}

/// Factors `[[A, border.cols], [border.rows, border.corner]]`; `A` must carry
/// a block layout.
pub fn lu_factor_bordered(a: &SparseOperator, border: &Border) -> Result<LuFactor> {
    Ok(LuFactor::Block(BlockLu::factor_bordered(a, Some(border))?))
}

fn first_empty_row(a: &SparseOperator) -> Option<usize> {
    (0..a.dim()).find(|&i| a.row(i).0.is_empty())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretize::{fd_derivative_1d, Boundary1d, BlockLayout, IntervalGrid};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn residual(a: &SparseOperator, x: &[C64], b: &[C64]) -> f64 {
        let ax = a.apply_vec(x);
        let r: f64 = ax.iter().zip(b).map(|(p, q)| (p - q).norm_sqr()).sum::<f64>().sqrt();
        r / b.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
    }

    #[test]
    fn identity_solves_exactly() {
        let a = SparseOperator::identity(10);
        let lu = lu_factor(&a).unwrap();
        let b: Vec<C64> = (0..10).map(|i| C64::new(i as f64, -(i as f64))).collect();
        let mut x = b.clone();
        lu.solve(&mut x);
        assert_eq!(x, b);
    }

    #[test]
    fn dirichlet_laplacian_residual() {
        let g = IntervalGrid::new(0.0, 1.0, 1e-3).unwrap();
        let a = fd_derivative_1d(&g, 2, 2, Boundary1d::Dirichlet).unwrap();
        let n = a.dim();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let b: Vec<C64> = (0..n).map(|_| C64::new(rng.random(), rng.random())).collect();
        for a in [a.clone(), a.clone().with_layout(BlockLayout::new((0..n).step_by(37).chain([n]).collect()).unwrap()).unwrap()] {
            let lu = lu_factor(&a).unwrap();
            let mut x = b.clone();
            lu.solve(&mut x);
            assert!(residual(&a, &x, &b) <= 1e-10);
        }
    }

    #[test]
    fn zero_row_is_singular() {
        let t = vec![(0, 0, C64::new(1.0, 0.0)), (2, 2, C64::new(1.0, 0.0)), (2, 1, C64::new(1.0, 0.0))];
        let a = SparseOperator::from_triplets(3, t);
        assert!(matches!(lu_factor(&a), Err(Error::Singular { .. })));
        let a = a.with_layout(BlockLayout::new(vec![0, 1, 2, 3]).unwrap()).unwrap();
        assert!(matches!(lu_factor(&a), Err(Error::Singular { pivot: 1 })));
    }

    proptest::proptest! {
        #[test]
        fn dominant_random_systems_solve(seed in 0u64..1000, n in 2usize..60, per_row in 1usize..5) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut t = Vec::new();
            for i in 0..n {
                let mut off = 0.0;
                for _ in 0..per_row {
                    let j = rng.random_range(0..n);
                    if j != i {
                        let v = C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
                        off += v.norm();
                        t.push((i, j, v));
                    }
                }
                t.push((i, i, C64::new(1.0 + off, rng.random_range(-1.0..1.0))));
            }
            let a = SparseOperator::from_triplets(n, t);
            let b: Vec<C64> = (0..n).map(|_| C64::new(rng.random(), rng.random())).collect();
            let lu = lu_factor(&a).unwrap();
            let mut x = b.clone();
            lu.solve(&mut x);
            proptest::prop_assert!(residual(&a, &x, &b) <= 1e-12);
        }
    }
}
