use std::f64::consts::PI;

use faer::Mat;

use crate::{Error, Result};

/// Spectral differentiation matrix for `n` equispaced samples of a
/// 2π-periodic function, `order` 1 or 2.
///
/// The second-order matrix is the exact second derivative of the trigonometric
/// interpolant, not the square of the first-order one (they differ on the
/// Nyquist mode).
pub fn fourier_diff(n: usize, order: usize) -> Result<Mat<f64>> {
    if n % 2 != 0 || n < 8 {
        return Err(Error::InvalidParameter(format!(
            "Fourier differentiation needs an even sample count >= 8, got {n}"
        )));
    }
    let h = 2.0 * PI / n as f64;
    let sign = |k: usize| if k % 2 == 0 { 1.0 } else { -1.0 };
    match order {
        1 => Ok(Mat::from_fn(n, n, |i, j| {
            if i == j {
                0.0
            } else {
                let k = (i + n - j) % n;
                0.5 * sign(k) / (0.5 * k as f64 * h).tan()
            }
        })),
        2 => Ok(Mat::from_fn(n, n, |i, j| {
            if i == j {
                -PI * PI / (3.0 * h * h) - 1.0 / 6.0
            } else {
                let k = (i + n - j) % n;
                let s = (0.5 * k as f64 * h).sin();
                -0.5 * sign(k) / (s * s)
            }
        })),
        _ => Err(Error::InvalidParameter(format!("Fourier derivative order {order} unsupported"))),
    }
}
