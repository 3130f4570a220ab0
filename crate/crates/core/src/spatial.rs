//! Spatial eigenvalues of wave trains and the sets they define in the
//! temporal-eigenvalue plane: spectral gaps, weights, Fredholm boundaries and
//! the absolute spectrum.
//!
//! Labels follow a Morse-index convention: at the anchor `lambda = 1` the
//! spatial spectrum splits into `n_s` eigenvalues with negative real part and
//! the rest with positive real part. At any `lambda`, `nu_{-1}` is the `n_s`-th
//! eigenvalue in order of increasing real part and `nu_0` the next one. This
//! keeps `Re nu_{-1} <= Re nu_0` everywhere, with equality exactly on the
//! absolute spectrum.

use faer::linalg::solvers::Solve;
use faer::Mat;
use serde::{Deserialize, Serialize};

use crate::wavetrain::{resample_periodic, Spectral, WaveTrain};
use crate::{Error, Result, C64};

const ZERO: C64 = C64::new(0.0, 0.0);
pub const ANCHOR_LAMBDA: f64 = 1.0;
pub const DEFAULT_N_KEEP: usize = 20;

/// Everything needed to assemble `A_wt(lambda)` and the Bloch operators of one
/// wave train at a given resolution.
#[derive(Clone, Debug)]
pub struct AwtContext {
    pub k: f64,
    pub omega: f64,
    /// Drift `c u_x` in the underlying PDE; zero for wave trains of
    /// `u_t = D u_xx + f(u)`, nonzero only for comoving-frame reference problems.
    pub drift: f64,
    pub m: usize,
    pub nc: usize,
    diffusion: Vec<f64>,
    d1: Mat<f64>,
    d2: Mat<f64>,
    /// `D2 - D1^2`, nonzero only on the Nyquist mode.
    nyquist: Mat<f64>,
    /// `f_u` at each grid point, row-major `nc x nc` blocks.
    jac: Vec<f64>,
    n_stable: usize,
}

impl AwtContext {
    pub fn new(wt: &WaveTrain) -> Result<Self> {
        let nc = wt.n_components();
        let mut jac = vec![0.0; wt.m * nc * nc];
        for j in 0..wt.m {
            wt.model.jacobian_into(&wt.state(j), &mut jac[j * nc * nc..(j + 1) * nc * nc]);
        }
        Self::from_parts(wt.k, wt.omega, 0.0, wt.model.diffusion().to_vec(), jac, wt.m)
    }

    /// The same wave train sampled on `m` points (spectral interpolation).
    pub fn with_resolution(wt: &WaveTrain, m: usize) -> Result<Self> {
        let nc = wt.n_components();
        let profile: Vec<f64> = (0..nc).flat_map(|c| resample_periodic(wt.component(c), m)).collect();
        let mut jac = vec![0.0; m * nc * nc];
        let mut state = vec![0.0; nc];
        for j in 0..m {
            for c in 0..nc {
                state[c] = profile[c * m + j];
            }
            wt.model.jacobian_into(&state, &mut jac[j * nc * nc..(j + 1) * nc * nc]);
        }
        Self::from_parts(wt.k, wt.omega, 0.0, wt.model.diffusion().to_vec(), jac, m)
    }

    /// Constant coefficients `f_u = jac` (row-major `nc x nc`) at every point.
    pub fn constant(k: f64, omega: f64, drift: f64, diffusion: Vec<f64>, jac: &[f64], m: usize) -> Result<Self> {
        let samples = jac.iter().copied().cycle().take(m * jac.len()).collect();
        Self::from_parts(k, omega, drift, diffusion, samples, m)
    }

    fn from_parts(k: f64, omega: f64, drift: f64, diffusion: Vec<f64>, jac: Vec<f64>, m: usize) -> Result<Self> {
        let nc = diffusion.len();
        if jac.len() != m * nc * nc {
            return Err(Error::DimensionMismatch { expected: m * nc * nc, found: jac.len() });
        }
        let sp = Spectral::new(m)?;
        // D1 annihilates the Nyquist mode of an even grid, so D1^2 alone would
        // leave that mode undamped and seed a spurious family of spatial
        // eigenvalues; the correction restores the spectral second derivative.
        let nyquist = &sp.d2 - &sp.d1 * &sp.d1;
        let mut ctx = Self { k, omega, drift, m, nc, diffusion, d1: sp.d1, d2: sp.d2, nyquist, jac, n_stable: 0 };
        let anchor = ctx.eigenvalues(C64::new(ANCHOR_LAMBDA, 0.0), 0.0)?;
        ctx.n_stable = anchor.iter().filter(|v| v.re < 0.0).count();
        if anchor.iter().any(|v| v.re.abs() < 1e-10) {
            return Err(Error::Eigen(format!("spatial spectrum touches the imaginary axis at lambda = {ANCHOR_LAMBDA}")));
        }
        Ok(ctx)
    }

    /// Number of eigenvalues with negative real part at the anchor.
    pub fn n_stable(&self) -> usize {
        self.n_stable
    }

    pub fn dim(&self) -> usize {
        2 * self.nc * self.m
    }

    /// Dense `A_wt(lambda) + eta I` on the unknowns `(u, v)`, component-major.
    pub fn matrix(&self, lambda: C64, eta: f64) -> Mat<C64> {
        let (m, nc) = (self.m, self.nc);
        let n = nc * m;
        let mut a = Mat::<C64>::zeros(2 * n, 2 * n);
        for c in 0..nc {
            let inv_d = 1.0 / self.diffusion[c];
            for i in 0..m {
                for j in 0..m {
                    let kd = C64::new(-self.k * self.d1[(i, j)], 0.0);
                    a[(c * m + i, c * m + j)] = kd;
                    a[(n + c * m + i, n + c * m + j)] = kd;
                    a[(n + c * m + i, c * m + j)] = C64::new(
                        -inv_d * self.omega * self.d1[(i, j)] - self.k * self.k * self.nyquist[(i, j)],
                        0.0,
                    );
                }
                a[(c * m + i, n + c * m + i)] = C64::new(1.0, 0.0);
                a[(n + c * m + i, c * m + i)] += inv_d * lambda;
                a[(n + c * m + i, n + c * m + i)] -= inv_d * self.drift;
                for cc in 0..nc {
                    a[(n + c * m + i, cc * m + i)] -= inv_d * self.jac[i * nc * nc + c * nc + cc];
                }
            }
        }
        if eta != 0.0 {
            for i in 0..2 * n {
                a[(i, i)] += eta;
            }
        }
        a
    }

    /// All spatial eigenvalues of `A_wt(lambda) + eta`, by increasing real part.
    pub fn eigenvalues(&self, lambda: C64, eta: f64) -> Result<Vec<C64>> {
        let mut ev = self.matrix(lambda, eta).eigenvalues().map_err(|e| Error::Eigen(format!("{e:?}")))?;
        ev.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
        Ok(ev)
    }

    /// Eigenvector of `A_wt(lambda)` for the eigenvalue near `nu`, by inverse iteration.
    pub fn eigenvector(&self, lambda: C64, nu: C64) -> Result<Vec<C64>> {
        let mut a = self.matrix(lambda, 0.0);
        let n = a.nrows();
        // a tiny offset keeps the shifted matrix invertible
        let shift = nu + C64::new(1e-10 * (1.0 + nu.norm()), 0.0);
        for i in 0..n {
            a[(i, i)] -= shift;
        }
        inverse_iteration(&a)
    }

    /// Bloch operator `D (nu + k d)^2 + c (nu + k d) + omega d + f_u`, with the
    /// `k^2 d^2` term taken as the spectral second derivative.
    pub fn bloch(&self, nu: C64) -> Mat<C64> {
        let (m, nc) = (self.m, self.nc);
        let mut b = Mat::<C64>::zeros(nc * m, nc * m);
        for c in 0..nc {
            let d = self.diffusion[c];
            for i in 0..m {
                for j in 0..m {
                    b[(c * m + i, c * m + j)] = C64::new(
                        d * self.k * self.k * self.d2[(i, j)] + (self.omega + self.drift * self.k) * self.d1[(i, j)],
                        0.0,
                    ) + nu * (2.0 * d * self.k * self.d1[(i, j)]);
                }
                b[(c * m + i, c * m + i)] += nu * nu * d + nu * self.drift;
                for cc in 0..nc {
                    b[(c * m + i, cc * m + i)] += self.jac[i * nc * nc + c * nc + cc];
                }
            }
        }
        b
    }

    /// `d/dnu` of the Bloch operator applied to `x`.
    fn bloch_derivative_apply(&self, nu: C64, x: &[C64]) -> Vec<C64> {
        let m = self.m;
        let mut out = vec![ZERO; x.len()];
        for c in 0..self.nc {
            let d = self.diffusion[c];
            for i in 0..m {
                let mut s = (2.0 * d * nu + self.drift) * x[c * m + i];
                for j in 0..m {
                    s += 2.0 * d * self.k * self.d1[(i, j)] * x[c * m + j];
                }
                out[c * m + i] = s;
            }
        }
        out
    }

    /// Temporal eigenvalues `lambda` of the Bloch operator at `nu`, by decreasing real part.
    pub fn bloch_eigenvalues(&self, nu: C64) -> Result<Vec<C64>> {
        let mut ev = self.bloch(nu).eigenvalues().map_err(|e| Error::Eigen(format!("{e:?}")))?;
        ev.sort_by(|a, b| b.re.total_cmp(&a.re));
        Ok(ev)
    }

    /// Morse-labelled spectrum keeping `n_keep` eigenvalues on each side of the split.
    pub fn spectrum(&self, lambda: C64, n_keep: usize) -> Result<SpatialSpectrum> {
        let all = self.eigenvalues(lambda, 0.0)?;
        let ns = self.n_stable;
        let lo = ns.saturating_sub(n_keep);
        let hi = (ns + n_keep).min(all.len());
        let nus = all[lo..hi].to_vec();
        let labels = (lo..hi).map(|i| i as i64 - ns as i64).collect();
        Ok(SpatialSpectrum { lambda, nus, labels, n_total: all.len(), n_keep })
    }
}

fn inverse_iteration(a: &Mat<C64>) -> Result<Vec<C64>> {
    let n = a.nrows();
    let lu = a.partial_piv_lu();
    let mut x = Mat::<C64>::from_fn(n, 1, |i, _| C64::new(1.0 + (i % 7) as f64 * 0.1, 0.3 - (i % 5) as f64 * 0.05));
    for _ in 0..3 {
        x = lu.solve(&x);
        let nrm = x.norm_l2();
        if !nrm.is_finite() || nrm == 0.0 {
            return Err(Error::Singular { pivot: 0 });
        }
        x = x * faer::Scale(C64::new(1.0 / nrm, 0.0));
    }
    Ok((0..n).map(|i| x[(i, 0)]).collect())
}

/// `A_wt(lambda) + eta I` for a wave train at its own resolution.
pub fn assemble_awt(wt: &WaveTrain, lambda: C64, eta: f64) -> Result<Mat<C64>> {
    Ok(AwtContext::new(wt)?.matrix(lambda, eta))
}

/// Central part of the spatial spectrum, sorted by real part, with labels
/// `-n_keep..n_keep`; label `-1` is `nu_{-1}` and label `0` is `nu_0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpatialSpectrum {
    pub lambda: C64,
    pub nus: Vec<C64>,
    pub labels: Vec<i64>,
    pub n_total: usize,
    pub n_keep: usize,
}

impl SpatialSpectrum {
    pub fn by_label(&self, label: i64) -> Option<C64> {
        self.labels.iter().position(|&l| l == label).map(|i| self.nus[i])
    }

    pub fn nu_minus1(&self) -> C64 {
        self.by_label(-1).expect("label -1 is always kept")
    }

    pub fn nu_0(&self) -> C64 {
        self.by_label(0).expect("label 0 is always kept")
    }
}

pub fn spatial_spectrum(wt: &WaveTrain, lambda: C64) -> Result<SpatialSpectrum> {
    AwtContext::new(wt)?.spectrum(lambda, DEFAULT_N_KEEP)
}

/// Gap `J_0(lambda)` and, once chosen, the weight.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightPlan {
    pub lambda: C64,
    pub j0: Option<(f64, f64)>,
    pub eta: Option<f64>,
    /// Set when a fixed weight lies outside the gap.
    pub warning: Option<String>,
}

impl WeightPlan {
    /// `lambda` lies on the absolute spectrum.
    pub fn empty(&self) -> bool {
        self.j0.is_none()
    }
}

/// Relative widths below this count as empty: rounding splits a double
/// spatial eigenvalue by `O(sqrt(eps))`.
pub const GAP_TOL: f64 = 1e-6;

/// The gap between `-Re nu_0` and `-Re nu_{-1}`; empty when the two real parts
/// agree to `GAP_TOL`.
pub fn spectral_gap(spectrum: &SpatialSpectrum) -> WeightPlan {
    let (lo, hi) = (-spectrum.nu_0().re, -spectrum.nu_minus1().re);
    let j0 = (hi - lo > GAP_TOL * (1.0 + hi.abs().max(lo.abs()))).then_some((lo, hi));
    WeightPlan { lambda: spectrum.lambda, j0, eta: None, warning: None }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightPolicy {
    /// Center of the gap.
    Midpoint,
    /// A user-chosen weight, checked for membership.
    Fixed(f64),
    /// The given weight clamped into the central fraction `theta` of the gap.
    SafetyFraction { eta: f64, theta: f64 },
}

impl Default for WeightPolicy {
    fn default() -> Self {
        WeightPolicy::Midpoint
    }
}

pub const DEFAULT_SAFETY_FRACTION: f64 = 0.9;

pub fn select_weight(plan: &WeightPlan, policy: WeightPolicy) -> Result<WeightPlan> {
    let mut out = plan.clone();
    match policy {
        WeightPolicy::Midpoint => {
            let (lo, hi) = plan.j0.ok_or(Error::EmptyGap(plan.lambda))?;
            out.eta = Some(0.5 * (lo + hi));
        }
        WeightPolicy::Fixed(eta) => {
            out.eta = Some(eta);
            let inside = plan.j0.is_some_and(|(lo, hi)| lo < eta && eta < hi);
            if !inside {
                out.warning = Some(format!("eta = {eta} lies outside J0 = {:?} at lambda = {}", plan.j0, plan.lambda));
            }
        }
        WeightPolicy::SafetyFraction { eta, theta } => {
            if !(0.0..1.0).contains(&theta) {
                return Err(Error::InvalidParameter(format!("safety fraction must lie in [0, 1), got {theta}")));
            }
            let (lo, hi) = plan.j0.ok_or(Error::EmptyGap(plan.lambda))?;
            let (mid, half) = (0.5 * (lo + hi), 0.5 * (hi - lo) * theta);
            out.eta = Some(eta.clamp(mid - half, mid + half));
        }
    }
    Ok(out)
}

/// Labelled spatial eigenvalues along a path.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrackedPoint {
    pub lambda: C64,
    pub nu_minus1: C64,
    pub nu_0: C64,
}

const MIN_PATH_STEP: f64 = 1e-6;
const TRACK_STEP: f64 = 0.05;

/// Continues `nu_{-1}` and `nu_0` from the anchor `lambda = 1` to `path[0]`
/// along a straight segment and then along `path`, matching nearest neighbours
/// and bisecting steps where the matching is ambiguous.
pub fn track_labels(ctx: &AwtContext, path: &[C64]) -> Result<Vec<TrackedPoint>> {
    if path.is_empty() {
        return Ok(Vec::new());
    }
    let anchor = C64::new(ANCHOR_LAMBDA, 0.0);
    let start = ctx.spectrum(anchor, DEFAULT_N_KEEP)?;
    let mut tracked = [start.nu_minus1(), start.nu_0()];
    let mut cur = anchor;
    let mut out = Vec::with_capacity(path.len());
    for &target in path {
        tracked = advance(ctx, cur, target, tracked)?;
        cur = target;
        out.push(TrackedPoint { lambda: target, nu_minus1: tracked[0], nu_0: tracked[1] });
    }
    Ok(out)
}

fn advance(ctx: &AwtContext, from: C64, to: C64, mut tracked: [C64; 2]) -> Result<[C64; 2]> {
    let len = (to - from).norm();
    if len == 0.0 {
        return Ok(tracked);
    }
    let n_steps = (len / TRACK_STEP).ceil().max(1.0) as usize;
    let mut a = from;
    for s in 1..=n_steps {
        let b = from + (to - from) * (s as f64 / n_steps as f64);
        tracked = match_step(ctx, a, b, tracked)?;
        a = b;
    }
    Ok(tracked)
}

fn match_step(ctx: &AwtContext, a: C64, b: C64, tracked: [C64; 2]) -> Result<[C64; 2]> {
    let ev = ctx.eigenvalues(b, 0.0)?;
    let mut next = tracked;
    let mut used = [usize::MAX; 2];
    let mut ambiguous = false;
    for (t, nu) in tracked.iter().enumerate() {
        let mut best = (usize::MAX, f64::INFINITY);
        let mut second = f64::INFINITY;
        for (i, v) in ev.iter().enumerate() {
            let d = (v - nu).norm();
            if d < best.1 {
                second = best.1;
                best = (i, d);
            } else if d < second {
                second = d;
            }
        }
        ambiguous |= best.1 > 0.3 * second;
        used[t] = best.0;
        next[t] = ev[best.0];
    }
    ambiguous |= used[0] == used[1];
    if !ambiguous {
        return Ok(next);
    }
    if (b - a).norm() <= MIN_PATH_STEP {
        return Err(Error::LabelCollision { from: a, to: b });
    }
    let mid = (a + b) * 0.5;
    let half = match_step(ctx, a, mid, tracked)?;
    match_step(ctx, mid, b, half)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurveKind {
    FredholmBoundary,
    AbsoluteSpectrum,
}

/// One connected polyline with its continuation parameter per point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurveBranch {
    pub points: Vec<C64>,
    pub params: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralCurve {
    pub kind: CurveKind,
    pub branches: Vec<CurveBranch>,
}

impl SpectralCurve {
    /// Euclidean distance from `z` to the nearest polyline segment.
    pub fn distance(&self, z: C64) -> f64 {
        self.branches.iter().map(|b| polyline_distance(&b.points, z)).fold(f64::INFINITY, f64::min)
    }

    pub fn n_points(&self) -> usize {
        self.branches.iter().map(|b| b.points.len()).sum()
    }
}

pub fn polyline_distance(points: &[C64], z: C64) -> f64 {
    match points.len() {
        0 => f64::INFINITY,
        1 => (points[0] - z).norm(),
        _ => points
            .windows(2)
            .map(|w| {
                let (a, b) = (w[0], w[1]);
                let ab = b - a;
                let len2 = ab.norm_sqr();
                let t = if len2 == 0.0 { 0.0 } else { ((z - a) * ab.conj()).re / len2 };
                (a + ab * t.clamp(0.0, 1.0) - z).norm()
            })
            .fold(f64::INFINITY, f64::min),
    }
}

/// Branches `lambda_j(gamma)` of Bloch eigenvalues at `nu = -eta + i gamma`,
/// keeping the `branch_count` rightmost per `gamma`. Consecutive samples are
/// matched by nearest neighbour; a jump larger than `jump_tol` triggers
/// refinement of the `gamma` interval.
pub fn fredholm_curves(ctx: &AwtContext, eta: f64, gamma_grid: &[f64], branch_count: usize) -> Result<SpectralCurve> {
    if gamma_grid.len() < 2 || branch_count == 0 {
        return Err(Error::InvalidParameter("need at least two gamma samples and one branch".into()));
    }
    let eval = |g: f64| -> Result<Vec<C64>> {
        let mut ev = ctx.bloch_eigenvalues(C64::new(-eta, g))?;
        ev.truncate(branch_count);
        Ok(ev)
    };
    let span = gamma_grid[gamma_grid.len() - 1] - gamma_grid[0];
    let mut branches: Vec<CurveBranch> = Vec::new();
    let mut prev_g = gamma_grid[0];
    let mut prev = eval(prev_g)?;
    for (j, v) in prev.iter().enumerate() {
        branches.push(CurveBranch { points: vec![*v], params: vec![prev_g] });
        let _ = j;
    }
    let mut typical = f64::INFINITY;
    for &g in &gamma_grid[1..] {
        let mut pending = vec![g];
        while let Some(target) = pending.pop() {
            let cur = eval(target)?;
            let matched = match_sets(&prev, &cur);
            let jump = matched.iter().enumerate().map(|(j, &i)| (cur[i] - prev[j]).norm()).fold(0.0, f64::max);
            let tol = if typical.is_finite() { 8.0 * typical } else { f64::INFINITY };
            if jump > tol && (target - prev_g).abs() > 1e-6 * span {
                pending.push(target);
                pending.push(0.5 * (prev_g + target));
                continue;
            }
            typical = if typical.is_finite() { 0.8 * typical + 0.2 * jump.max(1e-12) } else { jump.max(1e-12) };
            let reordered: Vec<C64> = matched.iter().map(|&i| cur[i]).collect();
            for (j, v) in reordered.iter().enumerate() {
                branches[j].points.push(*v);
                branches[j].params.push(target);
            }
            prev = reordered;
            prev_g = target;
        }
    }
    Ok(SpectralCurve { kind: CurveKind::FredholmBoundary, branches })
}

/// Greedy nearest-neighbour assignment of `prev[j]` to distinct entries of `cur`.
fn match_sets(prev: &[C64], cur: &[C64]) -> Vec<usize> {
    let mut pairs: Vec<(f64, usize, usize)> =
        prev.iter().enumerate().flat_map(|(j, p)| cur.iter().enumerate().map(move |(i, c)| ((p - c).norm(), j, i))).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out = vec![usize::MAX; prev.len()];
    let mut taken = vec![false; cur.len()];
    for (_, j, i) in pairs {
        if out[j] == usize::MAX && !taken[i] {
            out[j] = i;
            taken[i] = true;
        }
    }
    out
}

/// A double spatial root: `nu` is a double eigenvalue of `A_wt(lambda)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BranchPoint {
    pub lambda: C64,
    pub nu: C64,
    pub residual: f64,
}

fn vec_norm(x: &[C64]) -> f64 {
    x.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
}

fn mat_vec(a: &Mat<C64>, x: &[C64]) -> Vec<C64> {
    (0..a.nrows()).map(|i| (0..a.ncols()).map(|j| a[(i, j)] * x[j]).sum()).collect()
}

/// Null vector of `L_B(nu) - lambda`, normalized.
fn bloch_null_vector(ctx: &AwtContext, nu: C64, lambda: C64) -> Result<Vec<C64>> {
    let mut b = ctx.bloch(nu);
    let shift = lambda + C64::new(1e-10 * (1.0 + lambda.norm()), 0.0);
    for i in 0..b.nrows() {
        b[(i, i)] -= shift;
    }
    inverse_iteration(&b)
}

/// Newton on the Jordan-chain system
/// `(L_B(nu) - lambda) u = 0`, `(L_B(nu) - lambda) w + L_B'(nu) u = 0`,
/// `<e, u> = 1`, `<e, w> = 0`, which is the double-root condition for
/// `A_wt(lambda)` after eliminating the second component.
pub fn find_branch_point(ctx: &AwtContext, lambda0: C64, nu0: C64) -> Result<BranchPoint> {
    let n = ctx.nc * ctx.m;
    let mut u = bloch_null_vector(ctx, nu0, lambda0)?;
    let e: Vec<C64> = u.clone();
    let mut w = vec![ZERO; n];
    let (mut nu, mut lambda) = (nu0, lambda0);
    let dim = 2 * n + 2;
    for iter in 0..40 {
        let mut lb = ctx.bloch(nu);
        for i in 0..n {
            lb[(i, i)] -= lambda;
        }
        let lu_ = mat_vec(&lb, &u);
        let dlu = ctx.bloch_derivative_apply(nu, &u);
        let lw = mat_vec(&lb, &w);
        let r1: Vec<C64> = lu_.clone();
        let r2: Vec<C64> = lw.iter().zip(&dlu).map(|(a, b)| a + b).collect();
        let n1: C64 = e.iter().zip(&u).map(|(a, b)| a.conj() * b).sum::<C64>() - 1.0;
        let n2: C64 = e.iter().zip(&w).map(|(a, b)| a.conj() * b).sum();
        let res = vec_norm(&r1).max(vec_norm(&r2)).max(n1.norm()).max(n2.norm());
        if res < 1e-10 * (1.0 + lambda.norm()) {
            return Ok(BranchPoint { lambda, nu, residual: res });
        }
        if !res.is_finite() || iter == 39 {
            break;
        }
        let dlw = ctx.bloch_derivative_apply(nu, &w);
        // d^2/dnu^2 L_B = 2 D
        let d2u: Vec<C64> = (0..n).map(|i| u[i] * (2.0 * ctx.diffusion[i / ctx.m])).collect();
        let mut jac = Mat::<C64>::zeros(dim, dim);
        let dl = {
            let mut m = Mat::<C64>::zeros(n, n);
            for j in 0..n {
                let mut col = vec![ZERO; n];
                col[j] = C64::new(1.0, 0.0);
                let v = ctx.bloch_derivative_apply(nu, &col);
                for i in 0..n {
                    m[(i, j)] = v[i];
                }
            }
            m
        };
        for i in 0..n {
            for j in 0..n {
                jac[(i, j)] = lb[(i, j)];
                jac[(n + i, n + j)] = lb[(i, j)];
                jac[(n + i, j)] = dl[(i, j)];
            }
            jac[(i, 2 * n)] = dlu[i];
            jac[(i, 2 * n + 1)] = -u[i];
            jac[(n + i, 2 * n)] = dlw[i] + d2u[i];
            jac[(n + i, 2 * n + 1)] = -w[i];
        }
        for j in 0..n {
            jac[(2 * n, j)] = e[j].conj();
            jac[(2 * n + 1, n + j)] = e[j].conj();
        }
        let mut rhs = Mat::<C64>::zeros(dim, 1);
        for i in 0..n {
            rhs[(i, 0)] = -r1[i];
            rhs[(n + i, 0)] = -r2[i];
        }
        rhs[(2 * n, 0)] = -n1;
        rhs[(2 * n + 1, 0)] = -n2;
        let step = jac.partial_piv_lu().solve(&rhs);
        for i in 0..n {
            u[i] += step[(i, 0)];
            w[i] += step[(n + i, 0)];
        }
        nu += step[(2 * n, 0)];
        lambda += step[(2 * n + 1, 0)];
    }
    Err(Error::NoConvergence { what: "branch-point Newton", iterations: 40, residual: f64::NAN })
}

/// A point of the absolute spectrum: `nu` and `nu + i gamma` are both spatial
/// eigenvalues at `lambda`, and hence have equal real parts.
#[derive(Clone, Debug, PartialEq)]
pub struct AbsPoint {
    pub lambda: C64,
    pub nu: C64,
    pub gamma: f64,
    u1: Vec<C64>,
    u2: Vec<C64>,
}

/// Newton on `(L_B(nu) - lambda) u1 = 0`, `(L_B(nu + i gamma) - lambda) u2 = 0`
/// with two normalizations, at fixed `gamma`. The system is complex-analytic
/// in `(u1, u2, nu, lambda)`.
fn correct_abs(ctx: &AwtContext, guess: &AbsPoint) -> Result<AbsPoint> {
    let n = ctx.nc * ctx.m;
    let ig = C64::new(0.0, guess.gamma);
    let e1: Vec<C64> = {
        let s = vec_norm(&guess.u1).powi(2);
        guess.u1.iter().map(|v| v / s).collect()
    };
    let e2: Vec<C64> = {
        let s = vec_norm(&guess.u2).powi(2);
        guess.u2.iter().map(|v| v / s).collect()
    };
    let (mut u1, mut u2, mut nu, mut lambda) = (guess.u1.clone(), guess.u2.clone(), guess.nu, guess.lambda);
    let dim = 2 * n + 2;
    for iter in 0..12 {
        let mut b1 = ctx.bloch(nu);
        let mut b2 = ctx.bloch(nu + ig);
        for i in 0..n {
            b1[(i, i)] -= lambda;
            b2[(i, i)] -= lambda;
        }
        let r1 = mat_vec(&b1, &u1);
        let r2 = mat_vec(&b2, &u2);
        let n1: C64 = e1.iter().zip(&u1).map(|(a, b)| a.conj() * b).sum::<C64>() - 1.0;
        let n2: C64 = e2.iter().zip(&u2).map(|(a, b)| a.conj() * b).sum::<C64>() - 1.0;
        let res = (vec_norm(&r1) / vec_norm(&u1)).max(vec_norm(&r2) / vec_norm(&u2)).max(n1.norm()).max(n2.norm());
        if res < 1e-10 {
            return Ok(AbsPoint { lambda, nu, gamma: guess.gamma, u1, u2 });
        }
        if !res.is_finite() || res > 1e3 || iter == 11 {
            break;
        }
        let d1 = ctx.bloch_derivative_apply(nu, &u1);
        let d2 = ctx.bloch_derivative_apply(nu + ig, &u2);
        let mut jac = Mat::<C64>::zeros(dim, dim);
        for i in 0..n {
            for j in 0..n {
                jac[(i, j)] = b1[(i, j)];
                jac[(n + i, n + j)] = b2[(i, j)];
            }
            jac[(i, 2 * n)] = d1[i];
            jac[(i, 2 * n + 1)] = -u1[i];
            jac[(n + i, 2 * n)] = d2[i];
            jac[(n + i, 2 * n + 1)] = -u2[i];
        }
        for j in 0..n {
            jac[(2 * n, j)] = e1[j].conj();
            jac[(2 * n + 1, n + j)] = e2[j].conj();
        }
        let mut rhs = Mat::<C64>::zeros(dim, 1);
        for i in 0..n {
            rhs[(i, 0)] = -r1[i];
            rhs[(n + i, 0)] = -r2[i];
        }
        rhs[(2 * n, 0)] = -n1;
        rhs[(2 * n + 1, 0)] = -n2;
        let step = jac.partial_piv_lu().solve(&rhs);
        for i in 0..n {
            u1[i] += step[(i, 0)];
            u2[i] += step[(n + i, 0)];
        }
        nu += step[(2 * n, 0)];
        lambda += step[(2 * n + 1, 0)];
    }
    Err(Error::NoConvergence { what: "absolute-spectrum corrector", iterations: 12, residual: f64::NAN })
}

/// Where a trace starts.
#[derive(Clone, Debug, PartialEq)]
pub enum AbsSeed {
    /// Double root; the trace leaves it along small `gamma`.
    Branch(BranchPoint),
    /// A point on the curve with `nu_{-1}`, `nu_0` and their gap `gamma > 0`,
    /// traced in both directions.
    OnCurve { lambda: C64, nu_minus1: C64, nu_0: C64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TraceOptions {
    pub steps: usize,
    /// Upper bound on `|Delta lambda|` per step.
    pub max_step: f64,
    pub gamma_min: f64,
    /// Trace stops once it leaves this window.
    pub re_min: f64,
    pub re_max: f64,
    pub im_min: f64,
    pub im_max: f64,
    /// Re-verify the Morse labels every this many steps.
    pub check_every: usize,
}

impl Default for TraceOptions {
    fn default() -> Self {
        Self { steps: 400, max_step: 0.04, gamma_min: 0.02, re_min: -3.0, re_max: 1.0, im_min: -4.0, im_max: 8.0, check_every: 4 }
    }
}

/// Continuation of the absolute spectrum in `gamma = Im(nu_0 - nu_{-1})`.
/// Stops at the window edge, at the step limit, when `gamma` drops below
/// `gamma_min` (a branch point, refined by Newton and appended), or when the
/// traced pair stops being `(nu_{-1}, nu_0)` (a triple junction).
pub fn absolute_spectrum_trace(ctx: &AwtContext, seed: &AbsSeed, opts: &TraceOptions) -> Result<SpectralCurve> {
    let start = match seed {
        AbsSeed::Branch(bp) => {
            let g = 2.0 * opts.gamma_min;
            let nu = bp.nu - C64::new(0.0, 0.5 * g);
            let u1 = bloch_null_vector(ctx, nu, bp.lambda)?;
            let u2 = bloch_null_vector(ctx, nu + C64::new(0.0, g), bp.lambda)?;
            correct_abs(ctx, &AbsPoint { lambda: bp.lambda, nu, gamma: g, u1, u2 })?
        }
        AbsSeed::OnCurve { lambda, nu_minus1, nu_0 } => {
            let (lo, hi) = if nu_minus1.im <= nu_0.im { (*nu_minus1, *nu_0) } else { (*nu_0, *nu_minus1) };
            let nu = C64::new(0.5 * (lo.re + hi.re), lo.im);
            let gamma = hi.im - lo.im;
            let u1 = bloch_null_vector(ctx, nu, *lambda)?;
            let u2 = bloch_null_vector(ctx, nu + C64::new(0.0, gamma), *lambda)?;
            correct_abs(ctx, &AbsPoint { lambda: *lambda, nu, gamma, u1, u2 })?
        }
    };
    let (up, _) = trace_direction(ctx, &start, 1.0, opts)?;
    let mut points: Vec<(C64, f64)> = Vec::new();
    let mut head: Vec<(C64, f64)> = Vec::new();
    if let AbsSeed::Branch(bp) = seed {
        head.push((bp.lambda, 0.0));
    } else {
        let (down, end) = trace_direction(ctx, &start, -1.0, opts)?;
        if let Some(last) = end {
            // close in on the double root from the small-gamma end
            if let Ok(bp) = find_branch_point(ctx, last.lambda, last.nu + C64::new(0.0, 0.5 * last.gamma)) {
                if (bp.lambda - last.lambda).norm() < 4.0 * opts.max_step {
                    head.push((bp.lambda, 0.0));
                }
            }
        }
        head.extend(down.into_iter().rev());
    }
    points.extend(head);
    points.push((start.lambda, start.gamma));
    points.extend(up);
    let branch = CurveBranch { points: points.iter().map(|p| p.0).collect(), params: points.iter().map(|p| p.1).collect() };
    Ok(SpectralCurve { kind: CurveKind::AbsoluteSpectrum, branches: vec![branch] })
}

/// Returns the accepted points (excluding the start) and, when the trace ended
/// at small `gamma`, the last point.
fn trace_direction(ctx: &AwtContext, start: &AbsPoint, dir: f64, opts: &TraceOptions) -> Result<(Vec<(C64, f64)>, Option<AbsPoint>)> {
    let mut out = Vec::new();
    let mut prev: Option<AbsPoint> = None;
    let mut cur = start.clone();
    let mut dg = dir * 0.25 * opts.max_step.max(1e-3);
    let inside = |z: C64| z.re >= opts.re_min && z.re <= opts.re_max && z.im >= opts.im_min && z.im <= opts.im_max;
    for step in 0..opts.steps {
        if !inside(cur.lambda) {
            break;
        }
        if dir < 0.0 && cur.gamma + dg <= opts.gamma_min {
            return Ok((out, Some(cur)));
        }
        // secant predictor in gamma
        let mut guess = cur.clone();
        guess.gamma = cur.gamma + dg;
        if let Some(p) = &prev {
            let s = dg / (cur.gamma - p.gamma);
            guess.lambda = cur.lambda + (cur.lambda - p.lambda) * s;
            guess.nu = cur.nu + (cur.nu - p.nu) * s;
        }
        match correct_abs(ctx, &guess) {
            Ok(next) if (next.lambda - cur.lambda).norm() <= opts.max_step => {
                if opts.check_every > 0 && (step + 1) % opts.check_every == 0 && !is_central_pair(ctx, &next)? {
                    break;
                }
                out.push((next.lambda, next.gamma));
                prev = Some(cur);
                cur = next;
                dg *= 1.25;
            }
            _ => {
                dg *= 0.5;
                if dg.abs() < 1e-7 {
                    break;
                }
            }
        }
    }
    Ok((out, None))
}

/// Whether `nu` and `nu + i gamma` are the labelled pair `nu_{-1}, nu_0`.
fn is_central_pair(ctx: &AwtContext, p: &AbsPoint) -> Result<bool> {
    let ev = ctx.eigenvalues(p.lambda, 0.0)?;
    let re = p.nu.re;
    let tol = 1e-6 * (1.0 + re.abs());
    let below = ev.iter().filter(|v| v.re < re - tol).count();
    let above = ev.iter().filter(|v| v.re > re + tol).count();
    Ok(below + 1 == ctx.n_stable() && above + ctx.n_stable() + 1 == ev.len())
}

/// Locates absolute-spectrum points by scanning vertical lines `Re lambda = x`
/// for minima of `Re nu_0 - Re nu_{-1}` and correcting them with Newton.
/// `coarse` is used for the scan; `fine` for the correction.
pub fn scan_absolute_spectrum(
    coarse: &AwtContext,
    fine: &AwtContext,
    re_lines: &[f64],
    im_range: (f64, f64),
    im_step: f64,
) -> Result<Vec<AbsSeed>> {
    let mut seeds = Vec::new();
    for &x in re_lines {
        let n = ((im_range.1 - im_range.0) / im_step).ceil() as usize + 1;
        let mut gaps = Vec::with_capacity(n);
        for i in 0..n {
            let lambda = C64::new(x, im_range.0 + i as f64 * im_step);
            let s = coarse.spectrum(lambda, 2)?;
            gaps.push((lambda, s.nu_0().re - s.nu_minus1().re));
        }
        for i in 1..n.saturating_sub(1) {
            if gaps[i].1 <= gaps[i - 1].1 && gaps[i].1 < gaps[i + 1].1 && gaps[i].1 < 0.2 {
                let lambda = gaps[i].0;
                let s = fine.spectrum(lambda, 2)?;
                seeds.push(AbsSeed::OnCurve { lambda, nu_minus1: s.nu_minus1(), nu_0: s.nu_0() });
            }
        }
    }
    Ok(seeds)
}

/// `scan_absolute_spectrum` followed by a trace from every seed that does
/// not already lie on a traced branch; all branches in one curve.
pub fn absolute_spectrum(
    coarse: &AwtContext,
    fine: &AwtContext,
    re_lines: &[f64],
    im_range: (f64, f64),
    im_step: f64,
    opts: &TraceOptions,
) -> Result<SpectralCurve> {
    let mut curve = SpectralCurve { kind: CurveKind::AbsoluteSpectrum, branches: Vec::new() };
    for seed in scan_absolute_spectrum(coarse, fine, re_lines, im_range, im_step)? {
        let AbsSeed::OnCurve { lambda, .. } = &seed else { continue };
        if curve.distance(*lambda) < 2.0 * opts.max_step {
            continue;
        }
        curve.branches.extend(absolute_spectrum_trace(fine, &seed, opts)?.branches);
    }
    if curve.branches.is_empty() {
        return Err(Error::NoConvergence { what: "absolute-spectrum scan", iterations: re_lines.len(), residual: f64::NAN });
    }
    Ok(curve)
}

/// Symmetric Hausdorff distance between two point sets.
pub fn hausdorff(a: &[C64], b: &[C64]) -> f64 {
    let one_sided = |x: &[C64], y: &[C64]| x.iter().map(|p| y.iter().map(|q| (p - q).norm()).fold(f64::INFINITY, f64::min)).fold(0.0, f64::max);
    one_sided(a, b).max(one_sided(b, a))
}
