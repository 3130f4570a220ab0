//! Spectral computations for spiral waves of reaction-diffusion systems on
//! bounded disks.
//!
//! The linearization about a spiral wave on a disk of radius `R` is strongly
//! non-normal: its resolvent grows exponentially in `R` to the left of the
//! Fredholm boundary of the asymptotic wave train, and sparse eigenvalue
//! solvers then return eigenvalues that trace pseudospectral contours
//! rather than the absolute spectrum. Conjugating the operator with an
//! exponential weight `e^{eta r}`, where `eta` lies in the spatial spectral
//! gap of the far-field wave train, restores uniformly bounded resolvents.
//!
//! The crate is organized bottom-up:
//!
//! * [`kinetics`]: reaction models (Barkley built in),
//! * [`discretize`]: grids and differentiation operators (finite differences,
//!   Fourier, polar Laplacian with origin and Robin closures),
//! * [`linalg`]: block and general sparse LU, shift-invert Krylov-Schur,
//!   smallest singular values and 1-norm condition estimates,
//! * [`convdiff`]: the exactly solvable convection-diffusion reference problem,
//! * [`wavetrain`]: periodic wave trains, dispersion relation, admissibility,
//! * [`spatial`]: spatial eigenvalues, spectral gaps, weight selection,
//!   Fredholm boundaries and absolute spectra,
//! * [`spiral`]: spiral waves on disks and their weighted spectra,
//! * [`cli`]: run configurations, the task pipeline, CSV/JSON/SVG export.

pub mod cli;
pub mod convdiff;
pub mod discretize;
pub mod error;
pub mod kinetics;
pub mod linalg;
pub mod spatial;
pub mod spiral;
pub mod wavetrain;

pub use error::{Error, Result};

/// Complex scalar used throughout.
pub type C64 = num_complex::Complex64;
