use faer::Mat;
use serde::{Deserialize, Serialize};

use super::{fourier_diff, BlockLayout, PolarGrid, Robin, RowBuilder, SparseOperator};
use crate::kinetics::ReactionModel;
use crate::{Error, Result, C64};

/// Field sampled on a polar grid, stored node-major with components
/// interleaved: entry `node * n_components + c`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolarField {
    n_components: usize,
    values: Vec<f64>,
}

impl PolarField {
    pub fn new(grid: &PolarGrid, n_components: usize, values: Vec<f64>) -> Result<Self> {
        let expected = grid.n_nodes() * n_components;
        if values.len() != expected {
            return Err(Error::DimensionMismatch { expected, found: values.len() });
        }
        Ok(Self { n_components, values })
    }

    pub fn zeros(grid: &PolarGrid, n_components: usize) -> Self {
        Self { n_components, values: vec![0.0; grid.n_nodes() * n_components] }
    }

    /// Interleaves one scalar array per component.
    pub fn from_components(grid: &PolarGrid, components: &[Vec<f64>]) -> Result<Self> {
        let nc = components.len();
        let nn = grid.n_nodes();
        if let Some(bad) = components.iter().find(|c| c.len() != nn) {
            return Err(Error::DimensionMismatch { expected: nn, found: bad.len() });
        }
        let mut values = vec![0.0; nn * nc];
        for (c, comp) in components.iter().enumerate() {
            for (p, v) in comp.iter().enumerate() {
                values[p * nc + c] = *v;
            }
        }
        Ok(Self { n_components: nc, values })
    }

    pub fn n_components(&self) -> usize {
        self.n_components
    }

    pub fn n_nodes(&self) -> usize {
        self.values.len() / self.n_components
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn node(&self, p: usize) -> &[f64] {
        &self.values[p * self.n_components..(p + 1) * self.n_components]
    }

    pub fn component(&self, c: usize) -> Vec<f64> {
        self.values.iter().skip(c).step_by(self.n_components).copied().collect()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

/// Radial closure `du/dr = slope * u` at `r = R`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum PolarBc {
    Neumann,
    Robin(f64),
}

impl PolarBc {
    fn slope(self) -> f64 {
        match self {
            PolarBc::Neumann => 0.0,
            PolarBc::Robin(eta) => eta,
        }
    }
}

/// Dense angular matrices shared by every ring.
pub(crate) struct AngularMatrices {
    pub d1: Mat<f64>,
    pub d2: Mat<f64>,
}

impl AngularMatrices {
    pub fn new(grid: &PolarGrid) -> Result<Self> {
        Ok(Self { d1: fourier_diff(grid.n_theta(), 1)?, d2: fourier_diff(grid.n_theta(), 2)? })
    }
}

const RADIAL1_4: [f64; 5] = [1.0 / 12.0, -8.0 / 12.0, 0.0, 8.0 / 12.0, -1.0 / 12.0];
const RADIAL2_4: [f64; 5] = [-1.0 / 12.0, 16.0 / 12.0, -30.0 / 12.0, 16.0 / 12.0, -1.0 / 12.0];

/// Node reached from ring `i`, angle `j` by a radial offset. Offsets below the
/// origin continue through it: `u(-r, phi) = u(r, phi + pi)`.
fn radial_neighbor(grid: &PolarGrid, i: usize, j: usize, offset: isize) -> usize {
    let t = i as isize + offset;
    match t {
        0 => 0,
        -1 => grid.node(1, (j + grid.n_theta() / 2) % grid.n_theta()),
        t if t >= 1 => grid.node(t as usize, j),
        _ => unreachable!("radial stencil reaches below r = -h"),
    }
}

/// Row of `d * Laplacian + omega * d/dphi` at `node`, closure `du/dr = slope u`.
pub(crate) fn scalar_row(
    grid: &PolarGrid,
    ang: &AngularMatrices,
    node: usize,
    slope: f64,
    d: f64,
    omega: f64,
    out: &mut Vec<(usize, f64)>,
) {
    out.clear();
    let h = grid.h_r();
    let nt = grid.n_theta();
    if node == 0 {
        // Cartesian five-point Laplacian on the four ring-1 nodes at 0, pi/2, pi, 3pi/2.
        let w = d / (h * h);
        for q in 0..4 {
            out.push((grid.node(1, q * nt / 4), w));
        }
        out.push((0, -4.0 * w));
        return;
    }
    let (i, j) = grid.ring_angle(node);
    let r = grid.r(i);
    let last = grid.n_r() - 1;
    if i + 2 <= last {
        for k in 0..5 {
            let off = k as isize - 2;
            let c = d * (RADIAL2_4[k] / (h * h) + RADIAL1_4[k] / (h * r));
            if c != 0.0 {
                out.push((radial_neighbor(grid, i, j, off), c));
            }
        }
    } else if i + 1 == last {
        out.push((grid.node(i - 1, j), d * (1.0 / (h * h) - 0.5 / (h * r))));
        out.push((node, -2.0 * d / (h * h)));
        out.push((grid.node(i + 1, j), d * (1.0 / (h * h) + 0.5 / (h * r))));
    } else {
        // ghost u_{N+1} = u_{N-1} + 2 h slope u_N
        out.push((grid.node(i - 1, j), 2.0 * d / (h * h)));
        out.push((node, d * ((2.0 * h * slope - 2.0) / (h * h) + slope / r)));
    }
    let inv_r2 = d / (r * r);
    for jj in 0..nt {
        let c = inv_r2 * ang.d2[(j, jj)] + omega * ang.d1[(j, jj)];
        if c != 0.0 {
            out.push((grid.node(i, jj), c));
        }
    }
}

/// Block partition used by the block-tridiagonal factorization: the origin
/// with rings 1-2, then pairs of rings.
pub fn polar_block_layout(grid: &PolarGrid, n_components: usize) -> BlockLayout {
    let nt = grid.n_theta();
    let rings = grid.n_rings();
    let mut starts = vec![0];
    let mut ring = 2.min(rings);
    starts.push((1 + ring * nt) * n_components);
    while ring < rings {
        ring = (ring + 2).min(rings);
        starts.push((1 + ring * nt) * n_components);
    }
    BlockLayout::new(starts).expect("monotone starts")
}

/// Polar Laplacian with fourth-order radial stencils, Fourier angular blocks,
/// a five-point origin row and a ghost-point closure at `r = R`.
pub fn polar_laplacian(grid: &PolarGrid, bc: PolarBc) -> Result<SparseOperator> {
    let ang = AngularMatrices::new(grid)?;
    let n = grid.n_nodes();
    let slope = bc.slope();
    let mut b = RowBuilder::new(n);
    let mut row = Vec::new();
    for p in 0..n {
        scalar_row(grid, &ang, p, slope, 1.0, 0.0, &mut row);
        if p == 0 {
            let sum: f64 = row.iter().map(|e| e.1).sum();
            if sum.abs() > 1e-9 / (grid.h_r() * grid.h_r()) {
                return Err(Error::Assembly(format!("origin row sum {sum} is not zero")));
            }
        }
        for &(q, c) in &row {
            b.add_real(q, c);
        }
        b.finish_row();
    }
    b.finish()?.with_layout(polar_block_layout(grid, 1))
}

/// Assembles `D Laplacian + omega d/dphi + jac(node)` for a system and
/// conjugates it by `exp(eta r)`.
///
/// The weight acts entrywise as `A_pq exp(eta (r_p - r_q))`, i.e. exact
/// diagonal similarity of the discrete unweighted operator. This is a
/// consistent discretization of `L + D[eta^2 - eta/r - 2 eta d/dr]` with the
/// boundary closure shifted by `eta`, and it keeps every entry bounded.
fn assemble_polar(
    model: &ReactionModel,
    grid: &PolarGrid,
    jac: Option<&PolarField>,
    omega: f64,
    eta: f64,
    bc: Robin,
) -> Result<SparseOperator> {
    let slope = bc.slope()?;
    let nc = model.n_components();
    let ang = AngularMatrices::new(grid)?;
    let nn = grid.n_nodes();
    let mut b = RowBuilder::new(nn * nc);
    b.reserve(nn * nc * (grid.n_theta() + 5 + nc));
    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); nc];
    let mut jbuf = vec![0.0; nc * nc];
    let diffusion = model.diffusion().to_vec();
    for p in 0..nn {
        for c in 0..nc {
            scalar_row(grid, &ang, p, slope, diffusion[c], omega, &mut rows[c]);
        }
        if let Some(base) = jac {
            model.jacobian_into(base.node(p), &mut jbuf);
        }
        let rp = grid.node_r(p);
        for c in 0..nc {
            for &(q, v) in &rows[c] {
                let w = if eta == 0.0 { 1.0 } else { (eta * (rp - grid.node_r(q))).exp() };
                b.add_real(q * nc + c, v * w);
            }
            if jac.is_some() {
                for cc in 0..nc {
                    b.add_real(p * nc + cc, jbuf[c * nc + cc]);
                }
            }
            b.finish_row();
        }
    }
    b.finish()?.with_layout(polar_block_layout(grid, nc))
}

/// Linearization `L^eta = D Laplacian + omega d/dphi + f_u(base)` in the
/// weighted frame, with boundary condition `a u + b du/dr = 0` for the
/// unweighted problem.
pub fn assemble_system_operator(
    model: &ReactionModel,
    grid: &PolarGrid,
    base_state: &PolarField,
    omega: f64,
    eta: f64,
    bc: Robin,
) -> Result<SparseOperator> {
    if base_state.n_components() != model.n_components() {
        return Err(Error::DimensionMismatch {
            expected: model.n_components(),
            found: base_state.n_components(),
        });
    }
    if base_state.n_nodes() != grid.n_nodes() {
        return Err(Error::DimensionMismatch { expected: grid.n_nodes(), found: base_state.n_nodes() });
    }
    if !base_state.is_finite() {
        return Err(Error::InvalidParameter("base state contains non-finite values".into()));
    }
    if !(omega.is_finite() && eta.is_finite()) {
        return Err(Error::InvalidParameter("omega and eta must be finite".into()));
    }
    assemble_polar(model, grid, Some(base_state), omega, eta, bc)
}

/// The linear part `D Laplacian + omega d/dphi` without reaction terms.
pub fn assemble_transport(
    model: &ReactionModel,
    grid: &PolarGrid,
    omega: f64,
    bc: Robin,
) -> Result<SparseOperator> {
    assemble_polar(model, grid, None, omega, 0.0, bc)
}

/// Angular derivative of every component, ring by ring (zero at the origin).
pub fn angular_derivative(grid: &PolarGrid, field: &PolarField) -> Result<PolarField> {
    let d1 = fourier_diff(grid.n_theta(), 1)?;
    let nc = field.n_components();
    let nt = grid.n_theta();
    let mut out = PolarField::zeros(grid, nc);
    let v = field.values();
    for i in 1..grid.n_r() {
        let base = grid.node(i, 0);
        for j in 0..nt {
            for c in 0..nc {
                let mut acc = 0.0;
                for jj in 0..nt {
                    acc += d1[(j, jj)] * v[(base + jj) * nc + c];
                }
                out.values[(base + j) * nc + c] = acc;
            }
        }
    }
    Ok(out)
}

/// Real part of `op * x` for a real vector.
pub fn apply_real(op: &SparseOperator, x: &[f64]) -> Vec<f64> {
    let xc: Vec<C64> = x.iter().map(|&v| C64::new(v, 0.0)).collect();
    op.apply_vec(&xc).into_iter().map(|v| v.re).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinetics::{barkley_model, BarkleyParams};

    fn interior_nodes(grid: &PolarGrid) -> impl Iterator<Item = usize> + '_ {
        (0..grid.n_nodes()).filter(|&p| grid.ring_angle(p).0 + 2 < grid.n_r())
    }

    #[test]
    fn constants_are_harmonic() {
        let g = PolarGrid::new(2.0, 0.1, 32).unwrap();
        let lap = polar_laplacian(&g, PolarBc::Neumann).unwrap();
        let out = apply_real(&lap, &vec![1.0; g.n_nodes()]);
        assert!(out.iter().all(|v| v.abs() <= 1e-8), "{:e}", out.iter().fold(0.0f64, |a, b| a.max(b.abs())));
    }

    #[test]
    fn radial_quadratic() {
        let g = PolarGrid::new(3.0, 0.05, 16).unwrap();
        let lap = polar_laplacian(&g, PolarBc::Neumann).unwrap();
        let out = apply_real(&lap, &g.sample(|r, _| r * r));
        for p in interior_nodes(&g) {
            assert!((out[p] - 4.0).abs() < 1e-6, "node {p}: {}", out[p]);
        }
    }

    #[test]
    fn harmonic_quadratic() {
        let g = PolarGrid::new(3.0, 0.05, 16).unwrap();
        let lap = polar_laplacian(&g, PolarBc::Neumann).unwrap();
        let out = apply_real(&lap, &g.sample(|r, phi| r * r * (2.0 * phi).cos()));
        for p in interior_nodes(&g) {
            assert!(out[p].abs() < 1e-5, "node {p}: {}", out[p]);
        }
    }

    #[test]
    fn robin_closure_on_exponential_profile() {
        // u = exp(r) has du/dr = u everywhere; the ghost row is consistent to O(h).
        let g = PolarGrid::new(2.0, 0.01, 8).unwrap();
        let lap = polar_laplacian(&g, PolarBc::Robin(1.0)).unwrap();
        let out = apply_real(&lap, &g.sample(|r, _| r.exp()));
        let p = g.node(g.n_r() - 1, 0);
        let r = g.radius();
        let exact = r.exp() * (1.0 + 1.0 / r);
        assert!((out[p] - exact).abs() < 5e-3 * exact, "{} vs {exact}", out[p]);
    }

    #[test]
    fn unweighted_operator_matches_parts() {
        let model = barkley_model(BarkleyParams::default()).unwrap();
        let g = PolarGrid::new(1.0, 0.1, 8).unwrap();
        let u = g.sample(|r, phi| 0.5 + 0.3 * r * phi.cos());
        let v = g.sample(|r, phi| 0.1 * r * phi.sin());
        let base = PolarField::from_components(&g, &[u, v]).unwrap();
        let a = assemble_system_operator(&model, &g, &base, 1.3, 0.0, Robin::NEUMANN).unwrap();
        let t = assemble_transport(&model, &g, 1.3, Robin::NEUMANN).unwrap();
        let mut jac = [0.0; 4];
        for p in 0..g.n_nodes() {
            model.jacobian_into(base.node(p), &mut jac);
            for c in 0..2 {
                for cc in 0..2 {
                    let (i, j) = (2 * p + c, 2 * p + cc);
                    let diff = a.get(i, j) - t.get(i, j);
                    assert!((diff.re - jac[2 * c + cc]).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn omega_terms_vanish_on_radial_fields() {
        let model = barkley_model(BarkleyParams::default()).unwrap();
        let g = PolarGrid::new(1.0, 0.1, 16).unwrap();
        let a0 = assemble_transport(&model, &g, 0.0, Robin::NEUMANN).unwrap();
        let a1 = assemble_transport(&model, &g, 2.5, Robin::NEUMANN).unwrap();
        let radial = g.sample(|r, _| (r * 2.0).cos());
        let x = PolarField::from_components(&g, &[radial.clone(), radial]).unwrap();
        let y0 = apply_real(&a0, x.values());
        let y1 = apply_real(&a1, x.values());
        for (p, q) in y0.iter().zip(&y1) {
            assert!((p - q).abs() < 1e-9);
        }
    }

    #[test]
    fn nan_base_state_rejected() {
        let model = barkley_model(BarkleyParams::default()).unwrap();
        let g = PolarGrid::new(1.0, 0.1, 8).unwrap();
        let mut base = PolarField::zeros(&g, 2);
        base.values_mut()[3] = f64::NAN;
        assert!(assemble_system_operator(&model, &g, &base, 1.0, 0.0, Robin::NEUMANN).is_err());
    }

    #[test]
    fn block_layout_is_tridiagonal() {
        let g = PolarGrid::new(1.0, 0.1, 8).unwrap();
        let layout = polar_block_layout(&g, 2);
        assert_eq!(layout.dim(), 2 * g.n_nodes());
        assert_eq!(layout.range(0), 0..2 * (1 + 16));
        // with_layout inside polar_laplacian checks the coupling pattern
        polar_laplacian(&g, PolarBc::Neumann).unwrap();
    }
}
