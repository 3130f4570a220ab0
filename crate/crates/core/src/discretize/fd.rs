use serde::{Deserialize, Serialize};

use super::{IntervalGrid, RowBuilder, SparseOperator};
use crate::{Error, Result};

/// Coefficients of `a u + b du/dn = 0`, `n` the outward normal.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Robin {
    pub a: f64,
    pub b: f64,
}

impl Robin {
    pub const NEUMANN: Robin = Robin { a: 0.0, b: 1.0 };

    /// Slope `du/dn = rho u` imposed by the condition.
    pub fn slope(&self) -> Result<f64> {
        if self.b == 0.0 {
            return Err(Error::InvalidParameter(
                "Robin closure needs b != 0; use Dirichlet elimination instead".into(),
            ));
        }
        Ok(-self.a / self.b)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Boundary1d {
    /// Homogeneous Dirichlet data; the endpoints are eliminated and the
    /// unknowns are the interior points.
    Dirichlet,
    /// Ghost-point closure at both ends; all grid points are unknowns.
    Robin { left: Robin, right: Robin },
}

const C1_2: [f64; 3] = [-0.5, 0.0, 0.5];
const C2_2: [f64; 3] = [1.0, -2.0, 1.0];
const C1_4: [f64; 5] = [1.0 / 12.0, -8.0 / 12.0, 0.0, 8.0 / 12.0, -1.0 / 12.0];
const C2_4: [f64; 5] = [-1.0 / 12.0, 16.0 / 12.0, -30.0 / 12.0, 16.0 / 12.0, -1.0 / 12.0];

/// Centered stencil weights (offsets `-m..=m`) before division by `h^order`.
pub(crate) fn centered_stencil(order: usize, accuracy: usize) -> Result<&'static [f64]> {
    match (order, accuracy) {
        (1, 2) => Ok(&C1_2),
        (2, 2) => Ok(&C2_2),
        (1, 4) => Ok(&C1_4),
        (2, 4) => Ok(&C2_4),
        _ => Err(Error::InvalidParameter(format!(
            "unsupported derivative order {order} with accuracy {accuracy}"
        ))),
    }
}

/// Finite-difference derivative on a uniform interval grid.
///
/// Interior rows use the centered stencil of the requested accuracy; rows
/// whose wide stencil would leave the grid fall back to second order.
pub fn fd_derivative_1d(
    grid: &IntervalGrid,
    order: usize,
    accuracy: usize,
    bc: Boundary1d,
) -> Result<SparseOperator> {
    let wide = centered_stencil(order, accuracy)?;
    let narrow = centered_stencil(order, 2)?;
    let np = grid.len();
    if accuracy == 4 && np < 7 {
        return Err(Error::InvalidParameter("fourth-order stencils need at least 7 points".into()));
    }
    if np < 3 {
        return Err(Error::InvalidParameter("grid needs at least 3 points".into()));
    }
    let last = np - 1;
    let h = grid.spacing();
    let scale = 1.0 / h.powi(order as i32);

    // Grid index i -> coefficient list over grid indices (possibly ghost -1 or np).
    let stencil_at = |i: usize| -> Vec<(isize, f64)> {
        let m_wide = (wide.len() / 2) as isize;
        let ii = i as isize;
        let fits = ii - m_wide >= 0 && ii + m_wide <= last as isize;
        let w = if fits { wide } else { narrow };
        let m = (w.len() / 2) as isize;
        w.iter().enumerate().map(|(k, &c)| (ii + k as isize - m, c * scale)).collect()
    };

    match bc {
        Boundary1d::Dirichlet => {
            let n = np - 2;
            let mut b = RowBuilder::new(n);
            for i in 1..last {
                for (t, c) in stencil_at(i) {
                    if t >= 1 && t < last as isize {
                        b.add_real(t as usize - 1, c);
                    }
                }
                b.finish_row();
            }
            b.finish()
        }
        Boundary1d::Robin { left, right } => {
            let rho_l = left.slope()?;
            let rho_r = right.slope()?;
            let mut b = RowBuilder::new(np);
            for i in 0..np {
                for (t, c) in stencil_at(i) {
                    if t < 0 {
                        // u_{-1} = u_1 + 2 h rho_l u_0 (outward normal points to -x)
                        b.add_real(1, c);
                        b.add_real(0, 2.0 * h * rho_l * c);
                    } else if t > last as isize {
                        b.add_real(last - 1, c);
                        b.add_real(last, 2.0 * h * rho_r * c);
                    } else {
                        b.add_real(t as usize, c);
                    }
                }
                b.finish_row();
            }
            b.finish()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::C64;

    fn apply_real(op: &SparseOperator, x: &[f64]) -> Vec<f64> {
        let xc: Vec<C64> = x.iter().map(|&v| C64::new(v, 0.0)).collect();
        op.apply_vec(&xc).iter().map(|v| v.re).collect()
    }

    #[test]
    fn second_derivative_of_square_is_two() {
        let g = IntervalGrid::new(0.0, 1.0, 0.05).unwrap();
        for acc in [2, 4] {
            let d2 = fd_derivative_1d(&g, 2, acc, Boundary1d::Dirichlet).unwrap();
            let u: Vec<f64> = g.interior().iter().map(|x| x * x).collect();
            let out = apply_real(&d2, &u);
            // rows touching the eliminated endpoints see zero boundary data
            for v in &out[2..out.len() - 2] {
                assert!((v - 2.0).abs() < 1e-10, "{v}");
            }
        }
    }

    #[test]
    fn fourth_order_first_derivative_exact_on_quartic() {
        let g = IntervalGrid::new(-1.0, 2.0, 0.1).unwrap();
        let neumann = Boundary1d::Robin { left: Robin::NEUMANN, right: Robin::NEUMANN };
        let d1 = fd_derivative_1d(&g, 1, 4, neumann).unwrap();
        let u: Vec<f64> = g.points().iter().map(|x| x.powi(4)).collect();
        let out = apply_real(&d1, &u);
        for i in 2..g.len() - 2 {
            let x = g.points()[i];
            assert!((out[i] - 4.0 * x.powi(3)).abs() < 1e-10);
        }
    }

    #[test]
    fn ghost_closure_keeps_constants_harmonic() {
        let g = IntervalGrid::new(0.0, 1.0, 0.1).unwrap();
        let neumann = Boundary1d::Robin { left: Robin::NEUMANN, right: Robin::NEUMANN };
        let d2 = fd_derivative_1d(&g, 2, 4, neumann).unwrap();
        let out = apply_real(&d2, &vec![1.0; g.len()]);
        assert!(out.iter().all(|v| v.abs() < 1e-10));
    }

    #[test]
    fn robin_ghost_matches_linear_profile() {
        // u = 1 + x on [0,1]: du/dn = -u at x = 0 and du/dn = u/2 at x = 1
        let g = IntervalGrid::new(0.0, 1.0, 0.1).unwrap();
        let bc = Boundary1d::Robin { left: Robin { a: 1.0, b: 1.0 }, right: Robin { a: -0.5, b: 1.0 } };
        let d1 = fd_derivative_1d(&g, 1, 2, bc).unwrap();
        let u: Vec<f64> = g.points().iter().map(|x| 1.0 + x).collect();
        let out = apply_real(&d1, &u);
        assert!(out.iter().all(|v| (v - 1.0).abs() < 1e-12), "{out:?}");
    }

    #[test]
    fn rejects_unsupported() {
        let g = IntervalGrid::new(0.0, 1.0, 0.25).unwrap();
        assert!(fd_derivative_1d(&g, 3, 2, Boundary1d::Dirichlet).is_err());
        assert!(fd_derivative_1d(&g, 2, 6, Boundary1d::Dirichlet).is_err());
        assert!(fd_derivative_1d(&g, 2, 4, Boundary1d::Dirichlet).is_err());
    }
}
