use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

fn integer_ratio(length: f64, h: f64) -> Result<usize> {
    if !(length > 0.0 && h > 0.0 && length.is_finite() && h.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "grid length {length} and spacing {h} must be positive"
        )));
    }
    let ratio = length / h;
    let n = ratio.round();
    if (ratio - n).abs() > 1e-9 * ratio.max(1.0) {
        return Err(Error::InvalidParameter(format!(
            "length {length} is not an integer multiple of spacing {h}"
        )));
    }
    Ok(n as usize)
}

/// Uniform grid on `[left, left + length]`, endpoints included.
#[derive(Clone, Debug, PartialEq)]
pub struct IntervalGrid {
    left: f64,
    length: f64,
    h: f64,
    points: Vec<f64>,
}

impl IntervalGrid {
    pub fn new(left: f64, length: f64, h: f64) -> Result<Self> {
        let n = integer_ratio(length, h)?;
        let h = length / n as f64;
        let points = (0..=n).map(|i| left + i as f64 * h).collect();
        Ok(Self { left, length, h, points })
    }

    /// Grid on `(-R/2, R/2)`.
    pub fn centered(length: f64, h: f64) -> Result<Self> {
        Self::new(-0.5 * length, length, h)
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn spacing(&self) -> f64 {
        self.h
    }

    pub fn left(&self) -> f64 {
        self.left
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn interior(&self) -> &[f64] {
        &self.points[1..self.points.len() - 1]
    }
}

/// Polar grid on the disk of radius `R`: one node at the origin plus
/// `N_r - 1` rings of `N_theta` equispaced angles.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolarGrid {
    radius: f64,
    h_r: f64,
    n_r: usize,
    n_theta: usize,
}

impl PolarGrid {
    pub const DEFAULT_H_R: f64 = 0.05;
    pub const DEFAULT_N_THETA: usize = 64;

    pub fn new(radius: f64, h_r: f64, n_theta: usize) -> Result<Self> {
        let rings = integer_ratio(radius, h_r)?;
        if rings < 4 {
            return Err(Error::InvalidParameter(format!(
                "polar grid needs at least 4 rings, got {rings}"
            )));
        }
        if n_theta < 8 || !n_theta.is_power_of_two() {
            return Err(Error::InvalidParameter(format!(
                "N_theta must be a power of two >= 8, got {n_theta}"
            )));
        }
        Ok(Self { radius, h_r: radius / rings as f64, n_r: rings + 1, n_theta })
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn h_r(&self) -> f64 {
        self.h_r
    }

    /// Radial count including the origin.
    pub fn n_r(&self) -> usize {
        self.n_r
    }

    pub fn n_theta(&self) -> usize {
        self.n_theta
    }

    pub fn n_rings(&self) -> usize {
        self.n_r - 1
    }

    /// Scalar unknowns per component, `N_theta (N_r - 1) + 1`.
    pub fn n_nodes(&self) -> usize {
        self.n_theta * (self.n_r - 1) + 1
    }

    /// Node index of ring `i >= 1`, angle `j`.
    pub fn node(&self, i: usize, j: usize) -> usize {
        debug_assert!(i >= 1 && i < self.n_r && j < self.n_theta);
        1 + (i - 1) * self.n_theta + j
    }

    /// Ring index and angle index of a node; the origin is ring 0.
    pub fn ring_angle(&self, node: usize) -> (usize, usize) {
        if node == 0 {
            (0, 0)
        } else {
            (1 + (node - 1) / self.n_theta, (node - 1) % self.n_theta)
        }
    }

    pub fn r(&self, i: usize) -> f64 {
        i as f64 * self.h_r
    }

    pub fn phi(&self, j: usize) -> f64 {
        2.0 * PI * j as f64 / self.n_theta as f64
    }

    pub fn node_r(&self, node: usize) -> f64 {
        self.r(self.ring_angle(node).0)
    }

    pub fn node_phi(&self, node: usize) -> f64 {
        self.phi(self.ring_angle(node).1)
    }

    /// Cartesian coordinates of every node, in node order.
    pub fn coordinates(&self) -> Vec<(f64, f64)> {
        (0..self.n_nodes())
            .map(|p| {
                let (r, phi) = (self.node_r(p), self.node_phi(p));
                (r * phi.cos(), r * phi.sin())
            })
            .collect()
    }

    /// Samples `f(r, phi)` at every node.
    pub fn sample(&self, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
        (0..self.n_nodes()).map(|p| f(self.node_r(p), self.node_phi(p))).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interval_points_uniform() {
        let g = IntervalGrid::centered(10.0, 0.1).unwrap();
        assert_eq!(g.len(), 101);
        assert!((g.points()[0] + 5.0).abs() < 1e-12);
        assert!((g.points()[100] - 5.0).abs() < 1e-12);
        for w in g.points().windows(2) {
            assert!((w[1] - w[0] - 0.1).abs() < 1e-12);
        }
    }

    #[test]
    fn polar_counts() {
        let g = PolarGrid::new(75.0, 0.05, 64).unwrap();
        assert_eq!(g.n_r(), 1501);
        assert_eq!(g.n_nodes(), 64 * 1500 + 1);
        assert_eq!(g.ring_angle(g.node(7, 3)), (7, 3));
    }

    #[test]
    fn polar_rejects_bad_input() {
        assert!(PolarGrid::new(1.03, 0.05, 64).is_err());
        assert!(PolarGrid::new(5.0, 0.05, 60).is_err());
        assert!(IntervalGrid::new(0.0, 1.0, 0.3).is_err());
    }
}
