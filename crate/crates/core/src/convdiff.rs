//! The convection-diffusion operator `u_xx + c u_x` on `(-R/2, R/2)` with
//! Dirichlet data: closed-form spectra, spatial eigenvalues and weighted
//! Fredholm boundaries, plus the finite-difference operator they validate.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::discretize::{IntervalGrid, RowBuilder, SparseOperator};
use crate::linalg::{eigs_shift_invert, min_singular_value, EigenResult};
use crate::{Error, Result, C64};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvDiffProblem {
    pub c: f64,
    #[serde(rename = "R")]
    pub r: f64,
    pub h: f64,
    pub eta: f64,
}

impl ConvDiffProblem {
    pub fn new(c: f64, r: f64, h: f64, eta: f64) -> Result<Self> {
        let p = Self { c, r, h, eta };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0) {
            return Err(Error::InvalidParameter(format!("drift c must be positive, got {}", self.c)));
        }
        if !(0.0..=self.c).contains(&self.eta) {
            return Err(Error::InvalidParameter(format!("weight eta = {} outside [0, c]", self.eta)));
        }
        IntervalGrid::centered(self.r, self.h).map(|_| ())
    }

    /// Weights past `c/2` shift the drift sign and re-expand the spectrum.
    pub fn over_weighted(&self) -> bool {
        self.eta > 0.5 * self.c
    }
}

/// `-c^2/4 - n^2 pi^2 / R^2` for `n = 1..=n_max`.
pub fn cd_analytic_spectrum(c: f64, r: f64, n_max: usize) -> Vec<f64> {
    (1..=n_max).map(|n| -0.25 * c * c - (n as f64 * PI / r).powi(2)).collect()
}

/// Roots of `nu^2 + c nu = lambda` ordered by real part, with the gap of
/// admissible weights between them.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConvDiffSpatial {
    pub nu_minus1: C64,
    pub nu_0: C64,
}

impl ConvDiffSpatial {
    /// `(-Re nu_0, -Re nu_-1)`, `None` when empty.
    pub fn gap(&self) -> Option<(f64, f64)> {
        let (lo, hi) = (-self.nu_0.re, -self.nu_minus1.re);
        (lo < hi).then_some((lo, hi))
    }
}

pub fn cd_spatial_eigs(c: f64, lambda: C64) -> ConvDiffSpatial {
    let root = (C64::new(0.25 * c * c, 0.0) + lambda).sqrt();
    let mid = C64::new(-0.5 * c, 0.0);
    ConvDiffSpatial { nu_minus1: mid - root, nu_0: mid + root }
}

/// `lambda(l) = -l^2 + i l (c - 2 eta) + eta^2 - c eta`.
pub fn cd_fredholm_boundary(c: f64, eta: f64, ells: &[f64]) -> Vec<C64> {
    ells.iter().map(|&l| C64::new(-l * l + eta * eta - c * eta, l * (c - 2.0 * eta))).collect()
}

/// Real roots of `t^3 + p t + q = 0`.
fn depressed_cubic_roots(p: f64, q: f64) -> Vec<f64> {
    let disc = (q / 2.0).powi(2) + (p / 3.0).powi(3);
    if disc > 0.0 {
        let s = disc.sqrt();
        vec![(-q / 2.0 + s).cbrt() + (-q / 2.0 - s).cbrt()]
    } else if p == 0.0 {
        vec![0.0]
    } else {
        let m = 2.0 * (-p / 3.0).sqrt();
        let arg = (3.0 * q / (p * m)).clamp(-1.0, 1.0);
        let theta = arg.acos() / 3.0;
        (0..3).map(|k| m * (theta - 2.0 * PI * k as f64 / 3.0).cos()).collect()
    }
}

/// Euclidean distance from `z` to the parabola `cd_fredholm_boundary(c, eta, R)`.
pub fn distance_to_fredholm_boundary(c: f64, eta: f64, z: C64) -> f64 {
    let a = eta * eta - c * eta;
    let b = c - 2.0 * eta;
    // d/dl |a - l^2 + i b l - z|^2 = 0  <=>  l^3 + (b^2/2 - (a - x)) l - b y / 2 = 0
    let roots = depressed_cubic_roots(0.5 * b * b - (a - z.re), -0.5 * b * z.im);
    roots
        .into_iter()
        .map(|l| (C64::new(a - l * l, b * l) - z).norm())
        .fold(f64::INFINITY, f64::min)
}

/// Distance to the half-line `(-inf, -c^2/4]`.
pub fn distance_to_absolute_spectrum(c: f64, z: C64) -> f64 {
    let end = -0.25 * c * c;
    if z.re <= end {
        z.im.abs()
    } else {
        (z - C64::new(end, 0.0)).norm()
    }
}

/// Second-order finite differences for `d_xx + (c - 2 eta) d_x + eta^2 - c eta`,
/// the operator conjugated by `e^{eta x}` and expanded in closed form.
pub fn cd_assemble(p: &ConvDiffProblem) -> Result<SparseOperator> {
    p.validate()?;
    let grid = IntervalGrid::centered(p.r, p.h)?;
    let n = grid.len() - 2;
    let h = grid.spacing();
    let drift = p.c - 2.0 * p.eta;
    let lower = 1.0 / (h * h) - drift / (2.0 * h);
    let upper = 1.0 / (h * h) + drift / (2.0 * h);
    let diag = -2.0 / (h * h) + p.eta * p.eta - p.c * p.eta;
    let mut b = RowBuilder::new(n);
    b.reserve(3 * n);
    for i in 0..n {
        if i > 0 {
            b.add_real(i - 1, lower);
        }
        b.add_real(i, diag);
        if i + 1 < n {
            b.add_real(i + 1, upper);
        }
        b.finish_row();
    }
    b.finish()
}

/// `k` eigenvalues of the discretized operator closest to `shift`.
pub fn cd_eigs(p: &ConvDiffProblem, k: usize, shift: C64, tol: f64) -> Result<EigenResult> {
    eigs_shift_invert(&cd_assemble(p)?, k, shift, tol)
}

/// `sigma_min(L_{R,eta} - lambda)`.
pub fn cd_sigma_min(p: &ConvDiffProblem, lambda: C64) -> Result<f64> {
    let report = min_singular_value(&cd_assemble(p)?, lambda, 1e-10)?;
    Ok(report.sigma_min.unwrap_or(0.0))
}

/// Least-squares slope of `y` against `x`.
pub fn fit_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn analytic_spectrum_values() {
        assert!((cd_analytic_spectrum(0.0, PI, 1)[0] + 1.0).abs() < 1e-15);
        assert!((cd_analytic_spectrum(1.0, PI, 2)[1] + 4.25).abs() < 1e-14);
        assert!((cd_analytic_spectrum(1.0, 1e8, 1)[0] + 0.25).abs() < 1e-12);
    }

    #[test]
    fn spatial_eigenvalues() {
        let s = cd_spatial_eigs(1.0, C64::new(0.0, 0.0));
        assert!((s.nu_minus1 + 1.0).norm() < 1e-15 && s.nu_0.norm() < 1e-15);
        let s = cd_spatial_eigs(1.0, C64::new(-0.25, 0.0));
        assert!((s.nu_minus1 - s.nu_0).norm() < 1e-15 && s.gap().is_none());
        let s = cd_spatial_eigs(1.0, C64::new(-0.15, 0.0));
        assert!((s.nu_0.re - (-0.5 + 0.1f64.sqrt())).abs() < 1e-14);
        assert!((s.nu_0.re + 0.18377).abs() < 1e-5);
        let s = cd_spatial_eigs(1.0, C64::new(0.7, 0.0));
        assert!(s.nu_minus1.re < 0.0 && s.nu_0.re > 0.0);
        // both roots satisfy the dispersion relation
        for lam in [C64::new(-1.0, 2.0), C64::new(0.3, -0.4)] {
            let s = cd_spatial_eigs(2.0, lam);
            for nu in [s.nu_minus1, s.nu_0] {
                assert!((nu * nu + 2.0 * nu - lam).norm() < 1e-13);
            }
        }
    }

    #[test]
    fn fredholm_boundary_samples() {
        let b = cd_fredholm_boundary(1.0, 0.0, &[0.0, 1.0]);
        assert_eq!(b[0], C64::new(0.0, 0.0));
        assert!((b[1] - C64::new(-1.0, 1.0)).norm() < 1e-15);
        for l in [0.0, 0.5, 3.0] {
            let z = cd_fredholm_boundary(1.0, 0.5, &[l])[0];
            assert!((z - C64::new(-l * l - 0.25, 0.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn distance_to_parabola() {
        for l in [-2.0, -0.3, 0.0, 0.8, 4.0] {
            let z = cd_fredholm_boundary(1.0, 0.2, &[l])[0];
            assert!(distance_to_fredholm_boundary(1.0, 0.2, z) < 1e-12);
        }
        // brute force oracle
        let z = C64::new(-0.7, 0.2);
        let ells: Vec<f64> = (-40000..=40000).map(|i| i as f64 * 1e-4).collect();
        let brute = cd_fredholm_boundary(1.0, 0.0, &ells).iter().map(|p| (p - z).norm()).fold(f64::INFINITY, f64::min);
        assert!((distance_to_fredholm_boundary(1.0, 0.0, z) - brute).abs() < 1e-7);
    }

    #[test]
    fn symmetric_weight_kills_drift() {
        let p = ConvDiffProblem::new(1.0, 10.0, 0.1, 0.5).unwrap();
        let a = cd_assemble(&p).unwrap();
        for i in 1..a.dim() - 1 {
            assert_eq!(a.get(i, i - 1), a.get(i, i + 1));
        }
        assert!(!p.over_weighted());
        assert!(ConvDiffProblem::new(1.0, 10.0, 0.1, 0.6).unwrap().over_weighted());
        assert!(ConvDiffProblem::new(1.0, 10.0, 0.1, 1.5).is_err());
        assert!(ConvDiffProblem::new(0.0, 10.0, 0.1, 0.0).is_err());
    }

    #[test]
    fn weighted_spectrum_matches_closed_form() {
        let p = ConvDiffProblem::new(1.0, 40.0, 0.05, 0.5).unwrap();
        let r = cd_eigs(&p, 8, C64::new(0.0, 0.0), 1e-10).unwrap();
        let exact = cd_analytic_spectrum(1.0, 40.0, 8);
        for (l, e) in r.eigenvalues.iter().zip(&exact) {
            assert!((l - C64::new(*e, 0.0)).norm() < 1e-4, "{l} vs {e}");
        }
    }

    proptest::proptest! {
        #[test]
        fn spatial_roots_solve_the_dispersion_relation(c in 0.1f64..3.0, re in -3.0f64..1.0, im in -3.0f64..3.0) {
            let lambda = C64::new(re, im);
            let s = cd_spatial_eigs(c, lambda);
            for nu in [s.nu_minus1, s.nu_0] {
                proptest::prop_assert!((nu * nu + nu * c - lambda).norm() <= 1e-12 * (1.0 + lambda.norm()));
            }
            proptest::prop_assert!(s.nu_0.re >= s.nu_minus1.re);
        }

        #[test]
        fn boundary_points_are_at_distance_zero(c in 0.1f64..3.0, t in 0.0f64..1.0, l in -4.0f64..4.0) {
            let eta = t * c;
            let z = cd_fredholm_boundary(c, eta, &[l])[0];
            proptest::prop_assert!(distance_to_fredholm_boundary(c, eta, z) <= 1e-9 * (1.0 + z.norm()));
        }

        #[test]
        fn parabola_distance_is_the_minimum(c in 0.1f64..3.0, t in 0.0f64..1.0, re in -4.0f64..1.0, im in -3.0f64..3.0) {
            let eta = t * c;
            let z = C64::new(re, im);
            let d = distance_to_fredholm_boundary(c, eta, z);
            let ells: Vec<f64> = (0..=800).map(|i| -6.0 + 0.015 * i as f64).collect();
            let sampled = cd_fredholm_boundary(c, eta, &ells).iter().map(|p| (p - z).norm()).fold(f64::INFINITY, f64::min);
            // never above any boundary point, and the sampling is fine enough to come close
            proptest::prop_assert!(d <= sampled + 1e-12);
            proptest::prop_assert!(d >= sampled - 0.05);
        }
    }
}
