//! Sparse linear algebra: LU factorizations, shift-invert eigenvalues,
//! smallest singular values and condition estimates.

mod block_lu;
mod condition;
mod dense;
mod eigs;
mod lu;
pub mod schur;

pub use block_lu::{BlockLu, Border};
pub use condition::{condest_1norm, inverse_norm1_estimate, min_singular_value, sigma_min_from_lu, ConditionReport};
pub use eigs::{eigs_shift_invert, eigs_shift_invert_with, EigenResult, EigsOptions};
pub use lu::{lu_factor, lu_factor_bordered, LuFactor};
