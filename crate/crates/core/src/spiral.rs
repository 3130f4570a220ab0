//! Rigidly rotating spiral waves on a disk: a time-stepping bootstrap, the
//! Newton solve in the co-rotating frame, and the weighted linearization
//! with its spectra, pseudospectra and condition numbers.

use std::f64::consts::PI;

use faer::Mat;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::discretize::{
    angular_derivative, apply_real, assemble_system_operator, assemble_transport, PolarField, PolarGrid, Robin,
    RowBuilder, SparseOperator,
};
use crate::kinetics::ReactionModel;
use crate::linalg::{
    eigs_shift_invert_with, inverse_norm1_estimate, lu_factor, lu_factor_bordered, sigma_min_from_lu, Border,
    EigenResult, EigsOptions,
};
use crate::spatial::SpectralCurve;
use crate::wavetrain::{resample_periodic, translate_profile, WaveTrain};
use crate::{Error, Result, C64};

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

/// Eigenvalues this close to the origin are candidates for the rotation mode.
pub const ROTATION_TOL: f64 = 1e-3;

/// States recorded during a time evolution.
#[derive(Clone, Debug)]
pub struct TimeEvolution {
    pub field: PolarField,
    pub times: Vec<f64>,
    /// State at the probe node (ring `n_rings / 2`, angle 0) at every time.
    pub probe: Vec<Vec<f64>>,
    /// First angular Fourier coefficient of component 0 on the probe ring.
    pub ring_mode: Vec<C64>,
}

fn probe_ring(grid: &PolarGrid) -> usize {
    (grid.n_rings() / 2).max(1)
}

fn ring_mode(grid: &PolarGrid, values: &[f64], nc: usize, ring: usize) -> C64 {
    (0..grid.n_theta()).map(|j| C64::from_polar(values[grid.node(ring, j) * nc], -grid.phi(j))).sum()
}

/// Second-order five-point polar Laplacian with a Neumann ghost ring and the
/// finite-volume origin row `4 (mean(ring 1) - u_0) / h^2`.
///
/// All off-diagonal entries are nonnegative, so implicit diffusion obeys a
/// maximum principle. The spectral angular derivative does not, and fronts
/// far below angular resolution (straight initial fronts at large `r`)
/// would otherwise overshoot into the explicit reaction's unstable range.
pub fn monotone_laplacian(grid: &PolarGrid) -> Result<SparseOperator> {
    let h = grid.h_r();
    let nt = grid.n_theta();
    let dphi = 2.0 * PI / nt as f64;
    let last = grid.n_r() - 1;
    let mut b = RowBuilder::new(grid.n_nodes());
    b.add_real(0, -4.0 / (h * h));
    for j in 0..nt {
        b.add_real(grid.node(1, j), 4.0 / (h * h * nt as f64));
    }
    b.finish_row();
    for p in 1..grid.n_nodes() {
        let (i, j) = grid.ring_angle(p);
        let r = grid.r(i);
        let (inner, outer) = (1.0 / (h * h) - 0.5 / (h * r), 1.0 / (h * h) + 0.5 / (h * r));
        let ang = 1.0 / (r * r * dphi * dphi);
        let inner_node = if i == 1 { 0 } else { grid.node(i - 1, j) };
        if i == last {
            b.add_real(inner_node, inner + outer);
        } else {
            b.add_real(inner_node, inner);
            b.add_real(grid.node(i + 1, j), outer);
        }
        b.add_real(grid.node(i, (j + nt - 1) % nt), ang);
        b.add_real(grid.node(i, (j + 1) % nt), ang);
        b.add_real(p, -2.0 / (h * h) - 2.0 * ang);
        b.finish_row();
    }
    b.finish()
}

/// Semi-implicit Euler steps on `monotone_laplacian`: diffusion implicit
/// through one frozen factorization per component, reaction explicit.
pub fn time_evolve(
    model: &ReactionModel,
    grid: &PolarGrid,
    initial: &PolarField,
    steps: usize,
    dt: f64,
) -> Result<TimeEvolution> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidParameter(format!("time step must be positive, got {dt}")));
    }
    let nc = model.n_components();
    let nn = grid.n_nodes();
    if initial.n_components() != nc || initial.n_nodes() != nn {
        return Err(Error::DimensionMismatch { expected: nn * nc, found: initial.values().len() });
    }
    let lap = monotone_laplacian(grid)?;
    let factors = model
        .diffusion()
        .iter()
        .map(|&d| lu_factor(&lap.map_entries(|_, _, v| v * (-dt * d)).shifted(C64::new(-1.0, 0.0))))
        .collect::<Result<Vec<_>>>()?;
    let ring = probe_ring(grid);
    let probe_node = grid.node(ring, 0);
    let mut values = initial.values().to_vec();
    let mut comp = vec![vec![ZERO; nn]; nc];
    let mut rate = vec![0.0; nc];
    let mut out = TimeEvolution {
        field: initial.clone(),
        times: Vec::with_capacity(steps + 1),
        probe: Vec::with_capacity(steps + 1),
        ring_mode: Vec::with_capacity(steps + 1),
    };
    let record = |values: &[f64], t: f64, out: &mut TimeEvolution| {
        out.times.push(t);
        out.probe.push(values[probe_node * nc..(probe_node + 1) * nc].to_vec());
        out.ring_mode.push(ring_mode(grid, values, nc, ring));
    };
    record(&values, 0.0, &mut out);
    for step in 1..=steps {
        for p in 0..nn {
            let s = &values[p * nc..(p + 1) * nc];
            model.rate_into(s, &mut rate);
            for c in 0..nc {
                comp[c][p] = C64::new(s[c] + dt * rate[c], 0.0);
            }
        }
        for c in 0..nc {
            factors[c].solve(&mut comp[c]);
            for p in 0..nn {
                values[p * nc + c] = comp[c][p].re;
            }
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!("time stepping blew up at step {step}; reduce dt = {dt}")));
        }
        record(&values, step as f64 * dt, &mut out);
    }
    out.field = PolarField::new(grid, nc, values)?;
    Ok(out)
}

/// Excited first component on `x > 0`, a refractory second component on
/// `y > 0`: the broken front curls into a spiral around the origin.
pub fn cross_gradient(model: &ReactionModel, grid: &PolarGrid) -> PolarField {
    let nc = model.n_components();
    let mut values = vec![0.0; grid.n_nodes() * nc];
    for (p, (x, y)) in grid.coordinates().into_iter().enumerate() {
        if x > 0.0 {
            values[p * nc] = 1.0;
        }
        if nc > 1 && y > 0.0 {
            values[p * nc + 1] = 0.5;
        }
    }
    PolarField::new(grid, nc, values).expect("sized from the grid")
}

/// `(slope, intercept, r^2)` of the least-squares line.
fn fit_line(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    let slope = sxy / sxx;
    let r2 = if syy > 0.0 { sxy * sxy / (sxx * syy) } else { 1.0 };
    (slope, my - slope * mx, r2)
}

fn unwrap(phases: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut out: Vec<f64> = Vec::new();
    for p in phases {
        match out.last() {
            None => out.push(p),
            Some(&prev) => {
                let mut d = p - prev.rem_euclid(2.0 * PI);
                d = (d + PI).rem_euclid(2.0 * PI) - PI;
                out.push(prev + d);
            }
        }
    }
    out
}

/// Output of the time-stepping bootstrap.
#[derive(Clone, Debug)]
pub struct Bootstrap {
    pub grid: PolarGrid,
    pub field: PolarField,
    /// Rotation frequency, positive after orientation.
    pub omega: f64,
    /// Coefficient of determination of the linear probe-phase fit.
    pub phase_fit_r2: f64,
    /// The pattern turned the other way and was mirrored `phi -> -phi`.
    pub reflected: bool,
}

fn reflect(grid: &PolarGrid, field: &PolarField) -> PolarField {
    let nc = field.n_components();
    let nt = grid.n_theta();
    let mut out = field.clone();
    let v = field.values();
    for i in 1..grid.n_r() {
        for j in 0..nt {
            let src = grid.node(i, (nt - j) % nt);
            let dst = grid.node(i, j);
            out.values_mut()[dst * nc..(dst + 1) * nc].copy_from_slice(&v[src * nc..(src + 1) * nc]);
        }
    }
    out
}

/// Cells of the polar mesh around which the phase `atan2(v - <v>, u - <u>)`
/// winds once: the spiral tips, in Cartesian coordinates.
pub fn phase_singularities(grid: &PolarGrid, field: &PolarField) -> Vec<(f64, f64)> {
    let nc = field.n_components();
    if nc < 2 {
        return Vec::new();
    }
    let v = field.values();
    let nn = grid.n_nodes() as f64;
    let mu = field.component(0).iter().sum::<f64>() / nn;
    let mv = field.component(1).iter().sum::<f64>() / nn;
    let phase = |p: usize| (v[p * nc + 1] - mv).atan2(v[p * nc] - mu);
    let wrap = |d: f64| (d + PI).rem_euclid(2.0 * PI) - PI;
    let winds = |loop_: &[usize]| {
        let w: f64 = (0..loop_.len()).map(|a| wrap(phase(loop_[(a + 1) % loop_.len()]) - phase(loop_[a]))).sum();
        (w / (2.0 * PI)).round() != 0.0
    };
    let nt = grid.n_theta();
    let xy = grid.coordinates();
    let mut tips = Vec::new();
    for i in 0..grid.n_r() - 1 {
        for j in 0..nt {
            let jn = (j + 1) % nt;
            let cell: Vec<usize> = if i == 0 {
                vec![0, grid.node(1, j), grid.node(1, jn)]
            } else {
                vec![grid.node(i, j), grid.node(i + 1, j), grid.node(i + 1, jn), grid.node(i, jn)]
            };
            if winds(&cell) {
                let m = cell.len() as f64;
                tips.push((
                    cell.iter().map(|&p| xy[p].0).sum::<f64>() / m,
                    cell.iter().map(|&p| xy[p].1).sum::<f64>() / m,
                ));
            }
        }
    }
    tips
}

/// `field(x + dx, y + dy)` sampled bilinearly in `(r, phi)`; points beyond
/// the disk take the outermost ring.
pub fn shift_field(grid: &PolarGrid, field: &PolarField, dx: f64, dy: f64) -> PolarField {
    let nc = field.n_components();
    let nt = grid.n_theta();
    let last = grid.n_r() - 1;
    let v = field.values();
    let at = |i: usize, j: usize, c: usize| if i == 0 { v[c] } else { v[grid.node(i, j % nt) * nc + c] };
    let mut out = field.clone();
    for (p, (x, y)) in grid.coordinates().into_iter().enumerate() {
        let (xs, ys) = (x + dx, y + dy);
        let r = (xs.hypot(ys) / grid.h_r()).min(last as f64);
        let a = ys.atan2(xs).rem_euclid(2.0 * PI) * nt as f64 / (2.0 * PI);
        let (i0, j0) = ((r.floor() as usize).min(last - 1), a.floor() as usize);
        let (tr, ta) = (r - i0 as f64, a - j0 as f64);
        for c in 0..nc {
            let lo = (1.0 - ta) * at(i0, j0, c) + ta * at(i0, j0 + 1, c);
            let hi = (1.0 - ta) * at(i0 + 1, j0, c) + ta * at(i0 + 1, j0 + 1, c);
            out.values_mut()[p * nc + c] = (1.0 - tr) * lo + tr * hi;
        }
    }
    out
}

/// `(omega, r^2, reflected)` from the trailing `1/tail` of a run.
fn fit_rotation(run: &TimeEvolution, tail: usize) -> Result<(f64, f64, bool)> {
    let start = run.times.len() - run.times.len() / tail;
    let t = &run.times[start..];
    let tail = &run.probe[start..];
    let mean = |c: usize| tail.iter().map(|s| s[c]).sum::<f64>() / tail.len() as f64;
    let (mu, mv) = (mean(0), mean(1));
    let phase = unwrap(tail.iter().map(|s| (s[1] - mv).atan2(s[0] - mu)));
    let (slope, _, r2) = fit_line(t, &phase);
    if !(slope.abs() > 0.0 && slope.is_finite()) {
        return Err(Error::Decayed("the probe state is stationary; no rotating pattern".into()));
    }
    // u(r, phi - omega t) makes the first angular mode turn like exp(-i omega t)
    let mode_phase = unwrap(run.ring_mode[start..].iter().map(|z| z.arg()));
    let turned = mode_phase.last().expect("nonempty") - mode_phase[0];
    let omega = period_frequency(t, &phase).unwrap_or(slope.abs());
    Ok((omega, r2, turned > 0.0))
}

/// Frequency from the times at which the unwrapped phase first reaches
/// successive multiples of `2 pi`. The phase of a relaxation oscillation is
/// far from linear within one period, so a line fit over a few periods is
/// biased; level crossings are exactly one period apart.
fn period_frequency(t: &[f64], phase: &[f64]) -> Option<f64> {
    let sign = (phase.last()? - phase[0]).signum();
    let q: Vec<f64> = phase.iter().map(|p| sign * p).collect();
    let mut level = (q[0] / (2.0 * PI)).floor() + 1.0;
    let mut crossings = Vec::new();
    for i in 1..q.len() {
        if q[i] >= level * 2.0 * PI && q[i - 1] < level * 2.0 * PI {
            let s = (level * 2.0 * PI - q[i - 1]) / (q[i] - q[i - 1]);
            crossings.push(t[i - 1] + s * (t[i] - t[i - 1]));
            level += 1.0;
        }
    }
    let (first, last) = (*crossings.first()?, *crossings.last()?);
    Some(2.0 * PI * (crossings.len() - 1) as f64 / (last - first)).filter(|w| w.is_finite() && *w > 0.0)
}

/// Mean tip position over one rotation period, following the tip nearest
/// the previous one.
fn rotation_center(
    model: &ReactionModel,
    grid: &PolarGrid,
    field: &PolarField,
    omega: f64,
    dt: f64,
) -> Result<(Option<(f64, f64)>, PolarField)> {
    const SAMPLES: usize = 12;
    let chunk = ((2.0 * PI / omega / dt / SAMPLES as f64).round() as usize).max(1);
    let mut field = field.clone();
    let mut prev = (0.0, 0.0);
    let (mut sx, mut sy) = (0.0, 0.0);
    for _ in 0..SAMPLES {
        let Some(&tip) = phase_singularities(grid, &field)
            .iter()
            .min_by(|a, b| (a.0 - prev.0).hypot(a.1 - prev.1).total_cmp(&(b.0 - prev.0).hypot(b.1 - prev.1)))
        else {
            return Ok((None, field));
        };
        prev = tip;
        sx += tip.0;
        sy += tip.1;
        field = time_evolve(model, grid, &field, chunk, dt)?.field;
    }
    Ok((Some((sx / SAMPLES as f64, sy / SAMPLES as f64)), field))
}

/// Runs `time_evolve` from `cross_gradient` and estimates the rotation
/// frequency from the phase drift of the probe state over the last quarter
/// of the nominal `steps`.
///
/// The core settles wherever the transient leaves it, so halfway through
/// the pattern is re-centred on its mean tip position (`steps / 8` of
/// relaxation per round, at most `RECENTER_ROUNDS` rounds) before the
/// second half runs.
///
/// The result is oriented so that the frame equation `D Δu + omega u_phi +
/// f(u) = 0` holds with `omega > 0`, i.e. far-field phase `k r + phi`.
pub fn bootstrap_time_evolution(model: &ReactionModel, grid: &PolarGrid, steps: usize, dt: f64) -> Result<Bootstrap> {
    const RECENTER_ROUNDS: usize = 3;
    if model.n_components() < 2 {
        return Err(Error::InvalidParameter("the bootstrap needs at least two components".into()));
    }
    if steps < 8 {
        return Err(Error::InvalidParameter(format!("need at least 8 time steps, got {steps}")));
    }
    let first = time_evolve(model, grid, &cross_gradient(model, grid), steps / 2, dt)?;
    let u = first.field.component(0);
    let spread = u.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b)) - u.iter().fold(f64::INFINITY, |a, &b| a.min(b));
    if spread < 1e-3 {
        return Err(Error::Decayed(format!(
            "no rotating pattern after t = {}; try a larger disk, a longer run or more excitable kinetics",
            (steps / 2) as f64 * dt
        )));
    }
    let mut omega = fit_rotation(&first, 2)?.0;
    let mut field = first.field;
    for _ in 0..RECENTER_ROUNDS {
        let (center, later) = rotation_center(model, grid, &field, omega, dt)?;
        field = later;
        let Some((cx, cy)) = center else { break };
        if cx.hypot(cy) <= grid.h_r() {
            break;
        }
        let healed = time_evolve(model, grid, &shift_field(grid, &field, cx, cy), (steps / 8).max(8), dt)?;
        omega = fit_rotation(&healed, 2)?.0;
        field = healed.field;
    }
    let run = time_evolve(model, grid, &field, steps - steps / 2, dt)?;
    let fit = fit_rotation(&run, 2)?;
    let (omega, phase_fit_r2, reflected) = fit;
    let field = if reflected { reflect(grid, &run.field) } else { run.field };
    Ok(Bootstrap { grid: grid.clone(), field, omega, phase_fit_r2, reflected })
}

/// Polar grid for the bootstrap: same disk and angular count, radial spacing
/// `h_r` (coarser than the Newton grid keeps the time stepping cheap).
pub fn bootstrap_grid(target: &PolarGrid, h_r: f64) -> Result<PolarGrid> {
    PolarGrid::new(target.radius(), h_r.max(target.h_r()), target.n_theta())
}

/// Moves a field between polar grids: linear in `r`, trigonometric in `phi`.
///
/// Radii past `0.9 R` of the source are filled by periodic continuation of
/// the far field with radial period `2 pi / k` when `k` is given (this also
/// replaces the boundary layer), otherwise by the outermost ring.
pub fn transfer_field(field: &PolarField, from: &PolarGrid, to: &PolarGrid, k: Option<f64>) -> Result<PolarField> {
    let nc = field.n_components();
    if field.n_nodes() != from.n_nodes() {
        return Err(Error::DimensionMismatch { expected: from.n_nodes(), found: field.n_nodes() });
    }
    let nt = to.n_theta();
    let v = field.values();
    // rings[i][c] sampled on the target angles; ring 0 is the origin
    let mut rings: Vec<Vec<Vec<f64>>> = Vec::with_capacity(from.n_r());
    rings.push((0..nc).map(|c| vec![v[c]; nt]).collect());
    for i in 1..from.n_r() {
        rings.push(
            (0..nc)
                .map(|c| {
                    let ring: Vec<f64> = (0..from.n_theta()).map(|j| v[from.node(i, j) * nc + c]).collect();
                    if from.n_theta() == nt {
                        ring
                    } else {
                        resample_periodic(&ring, nt)
                    }
                })
                .collect(),
        );
    }
    let r_src = from.radius();
    let keep = match k {
        Some(k) if k.is_finite() && k.abs() > 0.0 => Some((0.9 * r_src, 2.0 * PI / k.abs())),
        _ => None,
    };
    let map_r = |r: f64| -> f64 {
        match keep {
            Some((edge, period)) if r > edge => (r - ((r - edge) / period).ceil() * period).max(0.0),
            _ => r.min(r_src),
        }
    };
    let hs = from.h_r();
    let last = from.n_r() - 1;
    let mut out = PolarField::zeros(to, nc);
    for p in 0..to.n_nodes() {
        let (i, j) = to.ring_angle(p);
        let x = map_r(to.r(i)) / hs;
        let i0 = (x.floor() as usize).min(last.saturating_sub(1));
        let t = (x - i0 as f64).clamp(0.0, 1.0);
        for c in 0..nc {
            let a = rings[i0][c][j];
            let b = rings[(i0 + 1).min(last)][c][j];
            out.values_mut()[p * nc + c] = (1.0 - t) * a + t * b;
        }
    }
    Ok(out)
}

/// Starting point for `solve_spiral`, on any polar grid.
#[derive(Clone, Debug)]
pub struct SpiralGuess {
    pub grid: PolarGrid,
    pub field: PolarField,
    pub omega: f64,
    /// Far-field wavenumber used when the guess must be extended outward.
    pub k: Option<f64>,
}

impl From<Bootstrap> for SpiralGuess {
    fn from(b: Bootstrap) -> Self {
        let k = far_field_wavenumber(&b.grid, &b.field);
        SpiralGuess { grid: b.grid, field: b.field, omega: b.omega, k: Some(k) }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NewtonOptions {
    /// Max-norm of the steady residual.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self { tol: 1e-8, max_iter: 30 }
    }
}

/// A rigidly rotating spiral `0 = D Δu + omega u_phi + f(u)` on the disk.
///
/// The boundary condition enters through the ghost-point closure of the
/// discrete Laplacian, so it holds exactly at the discrete level.
#[derive(Clone, Debug)]
pub struct SpiralSolution {
    pub model: ReactionModel,
    pub grid: PolarGrid,
    pub omega: f64,
    pub profile: PolarField,
    pub bc: Robin,
    /// Max-norm of the steady residual.
    pub residual: f64,
    /// Far-field wavenumber from the ring fit at `0.7 R .. 0.9 R`.
    pub k_far: f64,
    pub newton_iterations: usize,
}

impl SpiralSolution {
    pub fn guess(&self) -> SpiralGuess {
        SpiralGuess { grid: self.grid.clone(), field: self.profile.clone(), omega: self.omega, k: Some(self.k_far) }
    }

    /// Guess on the disk of radius `radius` with the same spacing, filled by
    /// periodic continuation of the far field.
    pub fn extended(&self, radius: f64) -> Result<SpiralGuess> {
        let grid = PolarGrid::new(radius, self.grid.h_r(), self.grid.n_theta())?;
        let field = transfer_field(&self.profile, &self.grid, &grid, Some(self.k_far))?;
        Ok(SpiralGuess { grid, field, omega: self.omega, k: Some(self.k_far) })
    }

    /// The profile rotated by `cells` angular grid cells.
    pub fn rotated(&self, cells: usize) -> PolarField {
        let nc = self.profile.n_components();
        let nt = self.grid.n_theta();
        let mut out = self.profile.clone();
        for i in 1..self.grid.n_r() {
            for j in 0..nt {
                let src = self.grid.node(i, (j + cells) % nt);
                let dst = self.grid.node(i, j);
                out.values_mut()[dst * nc..(dst + 1) * nc]
                    .copy_from_slice(&self.profile.values()[src * nc..(src + 1) * nc]);
            }
        }
        out
    }
}

/// `D Δu + omega u_phi + f(u)` at every unknown; `transport` is
/// `assemble_transport(model, grid, 0, bc)`.
pub fn steady_residual(
    model: &ReactionModel,
    grid: &PolarGrid,
    transport: &SparseOperator,
    field: &PolarField,
    omega: f64,
) -> Result<Vec<f64>> {
    let nc = model.n_components();
    let mut out = apply_real(transport, field.values());
    let dphi = angular_derivative(grid, field)?;
    let mut rate = vec![0.0; nc];
    for p in 0..grid.n_nodes() {
        model.rate_into(field.node(p), &mut rate);
        for c in 0..nc {
            out[p * nc + c] += omega * dphi.values()[p * nc + c] + rate[c];
        }
    }
    Ok(out)
}

fn max_abs(x: &[f64]) -> f64 {
    x.iter().fold(0.0, |a, b| a.max(b.abs()))
}

pub fn solve_spiral(model: &ReactionModel, grid: &PolarGrid, guess: &SpiralGuess, bc: Robin) -> Result<SpiralSolution> {
    solve_spiral_with(model, grid, guess, bc, &NewtonOptions::default())
}

/// Newton on `(u, omega)` with the phase condition `<d_phi u_guess, u - u_guess> = 0`.
///
/// The Jacobian is the unweighted linearization bordered by the column
/// `u_phi` and the phase row, factored by the block-tridiagonal LU.
pub fn solve_spiral_with(
    model: &ReactionModel,
    grid: &PolarGrid,
    guess: &SpiralGuess,
    bc: Robin,
    opts: &NewtonOptions,
) -> Result<SpiralSolution> {
    bc.slope()?;
    let nc = model.n_components();
    if guess.field.n_components() != nc {
        return Err(Error::DimensionMismatch { expected: nc, found: guess.field.n_components() });
    }
    let start = if guess.grid == *grid {
        guess.field.clone()
    } else {
        transfer_field(&guess.field, &guess.grid, grid, guess.k)?
    };
    let transport = assemble_transport(model, grid, 0.0, bc)?;
    let mut reference = angular_derivative(grid, &start)?.into_values();
    let rn = reference.iter().map(|v| v * v).sum::<f64>().sqrt();
    if !(rn > 0.0) {
        return Err(Error::InvalidParameter("guess has no angular structure; the phase condition is void".into()));
    }
    reference.iter_mut().for_each(|v| *v /= rn);
    let n = start.values().len();
    let phase = |u: &[f64]| -> f64 { reference.iter().zip(u.iter().zip(start.values())).map(|(r, (a, b))| r * (a - b)).sum() };

    let mut u = start.clone();
    let mut omega = guess.omega;
    let mut f = steady_residual(model, grid, &transport, &u, omega)?;
    let mut res = max_abs(&f);
    for it in 0..=opts.max_iter {
        if res <= opts.tol {
            let k_far = far_field_wavenumber(grid, &u);
            return Ok(SpiralSolution {
                model: model.clone(),
                grid: grid.clone(),
                omega,
                profile: u,
                bc,
                residual: res,
                k_far,
                newton_iterations: it,
            });
        }
        if it == opts.max_iter {
            break;
        }
        let jac = assemble_system_operator(model, grid, &u, omega, 0.0, bc)?;
        let dphi = angular_derivative(grid, &u)?;
        let border = Border {
            cols: Mat::from_fn(n, 1, |i, _| C64::new(dphi.values()[i], 0.0)),
            rows: Mat::from_fn(1, n, |_, j| C64::new(reference[j], 0.0)),
            corner: Mat::zeros(1, 1),
        };
        let lu = lu_factor_bordered(&jac, &border)?;
        let mut rhs: Vec<C64> = f.iter().map(|v| C64::new(-v, 0.0)).collect();
        rhs.push(C64::new(-phase(u.values()), 0.0));
        lu.solve(&mut rhs);
        if rhs.iter().any(|v| !v.re.is_finite()) {
            return Err(Error::Singular { pivot: n });
        }
        // backtracking on the max-norm
        let mut step = 1.0;
        loop {
            let trial: Vec<f64> = u.values().iter().zip(&rhs).map(|(a, d)| a + step * d.re).collect();
            let trial = PolarField::new(grid, nc, trial)?;
            let w = omega + step * rhs[n].re;
            let ft = steady_residual(model, grid, &transport, &trial, w)?;
            let rt = max_abs(&ft);
            if (rt < res && rt.is_finite()) || step < 1.0 / 32.0 {
                u = trial;
                omega = w;
                f = ft;
                res = rt;
                break;
            }
            step *= 0.5;
        }
    }
    Err(Error::NoConvergence { what: "spiral Newton iteration", iterations: opts.max_iter, residual: res })
}

/// `<u_r, u_phi> / |u_phi|^2` of the first component over rings in
/// `0.7 R .. 0.9 R`; for `u ~ u_wt(k r + phi)` this is `k`.
pub fn far_field_wavenumber(grid: &PolarGrid, field: &PolarField) -> f64 {
    let nc = field.n_components();
    let dphi = angular_derivative(grid, field).expect("field sized for the grid");
    let v = field.values();
    let h = grid.h_r();
    let (mut num, mut den) = (0.0, 0.0);
    for i in 1..grid.n_r() - 1 {
        let r = grid.r(i);
        if r < 0.7 * grid.radius() || r > 0.9 * grid.radius() {
            continue;
        }
        for j in 0..grid.n_theta() {
            let dr = (v[grid.node(i + 1, j) * nc] - v[grid.node(i - 1, j) * nc]) / (2.0 * h);
            let dp = dphi.values()[grid.node(i, j) * nc];
            num += dr * dp;
            den += dp * dp;
        }
    }
    num / den
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let sab: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let saa: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let sbb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    sab / (saa * sbb).sqrt()
}

/// Best correlation, over phase shifts, between the first component on the
/// ring nearest `r` and the wave-train profile `u_wt(phi + s)`.
pub fn far_field_correlation(spiral: &SpiralSolution, wt: &WaveTrain, r: f64) -> f64 {
    let g = &spiral.grid;
    let nc = spiral.profile.n_components();
    let i = ((r / g.h_r()).round() as usize).clamp(1, g.n_r() - 1);
    let ring: Vec<f64> = (0..g.n_theta()).map(|j| spiral.profile.values()[g.node(i, j) * nc]).collect();
    let base = resample_periodic(wt.component(0), g.n_theta());
    let shifts = 8 * g.n_theta();
    (0..shifts)
        .map(|s| pearson(&ring, &translate_profile(&base, 1, 2.0 * PI * s as f64 / shifts as f64)))
        .fold(f64::NEG_INFINITY, f64::max)
}

/// `L_R^eta = D Δ + omega d_phi + f_u(u_R)` conjugated by `exp(eta r)`; the
/// closure becomes `d_r w = eta w` for Neumann data.
pub fn linearization(spiral: &SpiralSolution, eta: f64) -> Result<SparseOperator> {
    assemble_system_operator(&spiral.model, &spiral.grid, &spiral.profile, spiral.omega, eta, spiral.bc)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RotationMode {
    pub index: usize,
    pub lambda: C64,
    /// `|<w, e^{eta r} u_phi>| / (|w| |e^{eta r} u_phi|)`.
    pub correlation: f64,
}

#[derive(Clone, Debug)]
pub struct SpectrumReport {
    pub eta: f64,
    pub eigen: EigenResult,
    pub dist_abs: Option<Vec<f64>>,
    pub dist_fb: Option<Vec<f64>>,
    pub rotation_mode: Option<RotationMode>,
}

impl SpectrumReport {
    fn median(v: &Option<Vec<f64>>) -> Option<f64> {
        let mut v = v.clone()?;
        if v.is_empty() {
            return None;
        }
        v.sort_by(f64::total_cmp);
        let n = v.len();
        Some(if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) })
    }

    pub fn median_dist_abs(&self) -> Option<f64> {
        Self::median(&self.dist_abs)
    }

    pub fn median_dist_fb(&self) -> Option<f64> {
        Self::median(&self.dist_fb)
    }
}

fn weighted_rotation_field(spiral: &SpiralSolution, eta: f64) -> Result<Vec<f64>> {
    let nc = spiral.profile.n_components();
    let d = angular_derivative(&spiral.grid, &spiral.profile)?.into_values();
    Ok(d.iter().enumerate().map(|(i, v)| v * (eta * spiral.grid.node_r(i / nc)).exp()).collect())
}

/// Eigenvalues of `L_R^eta` nearest `opts.shift`, annotated with distances
/// to the traced curves and with the rotation mode when it is resolved.
pub fn spiral_spectrum(
    spiral: &SpiralSolution,
    eta: f64,
    opts: &EigsOptions,
    abs: Option<&SpectralCurve>,
    fb: Option<&SpectralCurve>,
) -> Result<SpectrumReport> {
    let op = linearization(spiral, eta)?;
    let mut o = opts.clone();
    if o.shift.norm() <= ROTATION_TOL {
        o.vectors = o.vectors.max(1);
    }
    let eigen = eigs_shift_invert_with(&op, &o)?;
    let dist = |c: Option<&SpectralCurve>| c.map(|c| eigen.eigenvalues.iter().map(|&z| c.distance(z)).collect());
    let dist_abs = dist(abs);
    let dist_fb = dist(fb);
    let mut rotation_mode = None;
    if let Some((index, &lambda)) =
        eigen.eigenvalues.iter().enumerate().min_by(|a, b| a.1.norm().total_cmp(&b.1.norm()))
    {
        if let Some(vecs) = eigen.eigenvectors.as_ref().filter(|v| lambda.norm() <= ROTATION_TOL && index < v.ncols()) {
            let g = weighted_rotation_field(spiral, eta)?;
            let col = vecs.col(index);
            let inner: C64 = (0..g.len()).map(|i| col[i].conj() * g[i]).sum();
            let nw = (0..g.len()).map(|i| col[i].norm_sqr()).sum::<f64>().sqrt();
            let ng = g.iter().map(|v| v * v).sum::<f64>().sqrt();
            rotation_mode = Some(RotationMode { index, lambda, correlation: inner.norm() / (nw * ng) });
        }
    }
    Ok(SpectrumReport { eta, eigen, dist_abs, dist_fb, rotation_mode })
}

/// Rectangle of spectral parameters, sampled with endpoints included.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Window {
    pub re_min: f64,
    pub re_max: f64,
    pub im_min: f64,
    pub im_max: f64,
    pub n_re: usize,
    pub n_im: usize,
}

impl Window {
    /// `Re in [-2, 0.5]`, `Im in [-omega/2, 5 omega/2]`, 81 x 81: one vertical
    /// period of the absolute spectrum with margins.
    pub fn around_period(omega: f64) -> Self {
        Self { re_min: -2.0, re_max: 0.5, im_min: -0.5 * omega, im_max: 2.5 * omega, n_re: 81, n_im: 81 }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.re_min, self.re_max, self.im_min, self.im_max].iter().all(|v| v.is_finite());
        if !finite || self.re_min >= self.re_max || self.im_min >= self.im_max || self.n_re < 2 || self.n_im < 2 {
            return Err(Error::InvalidParameter(format!("degenerate spectral window {self:?}")));
        }
        Ok(())
    }

    fn axis(lo: f64, hi: f64, n: usize) -> Vec<f64> {
        (0..n).map(|i| if i + 1 == n { hi } else { lo + (hi - lo) * i as f64 / (n - 1) as f64 }).collect()
    }

    pub fn re_values(&self) -> Vec<f64> {
        Self::axis(self.re_min, self.re_max, self.n_re)
    }

    pub fn im_values(&self) -> Vec<f64> {
        Self::axis(self.im_min, self.im_max, self.n_im)
    }

    /// Row-major points, imaginary part outer.
    pub fn points(&self) -> Vec<C64> {
        let re = self.re_values();
        self.im_values().into_iter().flat_map(|y| re.iter().map(move |&x| C64::new(x, y))).collect()
    }
}

/// Level-set segments of one contour level.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Contour {
    /// `log10 epsilon`.
    pub level: f64,
    pub segments: Vec<[C64; 2]>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PseudospectrumField {
    pub window: Window,
    pub eta: f64,
    /// Row-major over `window.points()`; `None` where the point failed.
    pub sigma_min: Vec<Option<f64>>,
    pub log10_kappa: Option<Vec<Option<f64>>>,
    pub contours: Vec<Contour>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PseudoOptions {
    /// Also estimate `log10 kappa_1` from the same factorization.
    pub condition: bool,
    /// Contour levels as `log10 epsilon`.
    pub levels: Vec<f64>,
    /// Concurrent factorizations; each holds one LU in memory.
    pub workers: usize,
    pub tol: f64,
}

impl Default for PseudoOptions {
    fn default() -> Self {
        Self { condition: false, levels: vec![-1.0, -2.0, -4.0, -6.0, -8.0], workers: 1, tol: 1e-8 }
    }
}

/// `sigma_min` and `log10 kappa_1` of `A - lambda I` from one factorization.
/// A singular shift gives `(0, inf)`; other failures give `None`.
pub fn condition_point(op: &SparseOperator, lambda: C64, tol: f64, with_kappa: bool) -> (Option<f64>, Option<f64>) {
    let shifted = op.shifted(lambda);
    match lu_factor(&shifted) {
        Ok(lu) => {
            let sigma = sigma_min_from_lu(&lu, op.dim(), tol, 0).ok();
            let kappa = with_kappa.then(|| {
                let k = (shifted.norm_1() * inverse_norm1_estimate(&lu, op.dim())).log10();
                if k.is_finite() {
                    k.max(0.0)
                } else {
                    f64::INFINITY
                }
            });
            (sigma, kappa)
        }
        Err(Error::Singular { .. }) => (Some(0.0), with_kappa.then_some(f64::INFINITY)),
        Err(_) => (None, None),
    }
}

pub(crate) fn with_workers<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

/// `sigma_min(A - lambda)` over a window, parallel over points.
pub fn pseudospectrum(op: &SparseOperator, eta: f64, window: &Window, opts: &PseudoOptions) -> Result<PseudospectrumField> {
    window.validate()?;
    let points = window.points();
    let vals: Vec<(Option<f64>, Option<f64>)> = with_workers(opts.workers, || {
        points.par_iter().map(|&z| condition_point(op, z, opts.tol, opts.condition)).collect()
    })?;
    let sigma_min: Vec<Option<f64>> = vals.iter().map(|v| v.0).collect();
    let log10_kappa = opts.condition.then(|| vals.iter().map(|v| v.1).collect());
    let logs: Vec<f64> = sigma_min.iter().map(|s| s.map_or(f64::NAN, |s| s.log10())).collect();
    let contours = opts
        .levels
        .iter()
        .map(|&level| Contour { level, segments: contour_segments(&logs, &window.re_values(), &window.im_values(), level) })
        .collect();
    Ok(PseudospectrumField { window: *window, eta, sigma_min, log10_kappa, contours })
}

pub fn pseudospectrum_field(
    spiral: &SpiralSolution,
    eta: f64,
    window: &Window,
    opts: &PseudoOptions,
) -> Result<PseudospectrumField> {
    pseudospectrum(&linearization(spiral, eta)?, eta, window, opts)
}

/// Marching squares on a row-major `ys.len() x xs.len()` grid. Cells with a
/// non-finite corner are skipped.
pub fn contour_segments(values: &[f64], xs: &[f64], ys: &[f64], level: f64) -> Vec<[C64; 2]> {
    let nx = xs.len();
    let at = |i: usize, j: usize| values[j * nx + i];
    let mut out = Vec::new();
    for j in 0..ys.len().saturating_sub(1) {
        for i in 0..nx.saturating_sub(1) {
            // corners counter-clockwise from (i, j)
            let c = [(i, j), (i + 1, j), (i + 1, j + 1), (i, j + 1)];
            let v: Vec<f64> = c.iter().map(|&(a, b)| at(a, b)).collect();
            if v.iter().any(|x| !x.is_finite()) {
                continue;
            }
            let mut cuts = Vec::with_capacity(4);
            for e in 0..4 {
                let (a, b) = (e, (e + 1) % 4);
                if (v[a] < level) != (v[b] < level) {
                    let t = (level - v[a]) / (v[b] - v[a]);
                    let (pa, pb) = (c[a], c[b]);
                    let x = xs[pa.0] + t * (xs[pb.0] - xs[pa.0]);
                    let y = ys[pa.1] + t * (ys[pb.1] - ys[pa.1]);
                    cuts.push(C64::new(x, y));
                }
            }
            match cuts.len() {
                2 => out.push([cuts[0], cuts[1]]),
                // saddle: pair the cuts around the lower corners
                4 => {
                    out.push([cuts[0], cuts[1]]);
                    out.push([cuts[2], cuts[3]]);
                }
                _ => {}
            }
        }
    }
    out
}

/// One row of a condition table; `NaN` marks a singular or failed pair.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionEntry {
    pub eta: f64,
    pub lambda: C64,
    pub log10_kappa: f64,
    pub sigma_min: f64,
}

/// `log10 kappa_1` and `sigma_min` of `L_R^eta - lambda` for every pair.
pub fn condition_map(spiral: &SpiralSolution, etas: &[f64], lambdas: &[C64], workers: usize) -> Result<Vec<ConditionEntry>> {
    let mut out = Vec::with_capacity(etas.len() * lambdas.len());
    for &eta in etas {
        let op = linearization(spiral, eta)?;
        out.extend(condition_table(&op, eta, lambdas, workers)?);
    }
    Ok(out)
}

/// Condition entries for one operator.
pub fn condition_table(op: &SparseOperator, eta: f64, lambdas: &[C64], workers: usize) -> Result<Vec<ConditionEntry>> {
    with_workers(workers, || {
        lambdas
            .par_iter()
            .map(|&lambda| {
                let (s, k) = condition_point(op, lambda, 1e-8, true);
                let sigma = s.filter(|s| *s > 0.0).unwrap_or(f64::NAN);
                let log10_kappa = k.filter(|k| k.is_finite()).unwrap_or(f64::NAN);
                ConditionEntry { eta, lambda, log10_kappa, sigma_min: sigma }
            })
            .collect()
    })
}
