//! Grids and sparse differentiation operators.

mod fd;
mod fourier;
mod grid;
mod operator;
mod polar;

pub use fd::{fd_derivative_1d, Boundary1d, Robin};
pub use fourier::fourier_diff;
pub use grid::{IntervalGrid, PolarGrid};
pub use operator::{BlockLayout, RowBuilder, SparseOperator};
pub use polar::{
    angular_derivative, apply_real, assemble_system_operator, assemble_transport, polar_block_layout,
    polar_laplacian, PolarBc, PolarField,
};
