//! Periodic wave trains `u(x, t) = u_wt(k x - omega t)` of the one-dimensional
//! system, their nonlinear dispersion relation and group velocity.
//!
//! Profiles live on a uniform grid of `M` points over `[0, 2 pi)` and are stored
//! component-major: entry `c * M + j` is component `c` at `phi_j = 2 pi j / M`.

use std::f64::consts::PI;

use faer::linalg::solvers::Solve;
use faer::Mat;
use serde::{Deserialize, Serialize};

use crate::discretize::fourier_diff;
use crate::kinetics::ReactionModel;
use crate::spatial::AwtContext;
use crate::{Error, Result, C64};

pub const DEFAULT_M: usize = 128;
pub const NEWTON_TOL: f64 = 1e-10;
pub const NEWTON_MAX_ITER: usize = 50;

/// Spectral differentiation matrices on `M` points.
#[derive(Clone, Debug)]
pub(crate) struct Spectral {
    pub m: usize,
    pub d1: Mat<f64>,
    pub d2: Mat<f64>,
}

impl Spectral {
    pub fn new(m: usize) -> Result<Self> {
        Ok(Self { m, d1: fourier_diff(m, 1)?, d2: fourier_diff(m, 2)? })
    }

    pub fn apply(mat: &Mat<f64>, x: &[f64]) -> Vec<f64> {
        let m = mat.nrows();
        (0..m).map(|i| (0..m).map(|j| mat[(i, j)] * x[j]).sum()).collect()
    }
}

/// A converged wave train.
#[derive(Clone, Debug)]
pub struct WaveTrain {
    pub model: ReactionModel,
    pub k: f64,
    pub omega: f64,
    pub m: usize,
    pub profile: Vec<f64>,
    /// Max-norm of the steady residual at convergence.
    pub residual: f64,
    pub newton_iterations: usize,
}

impl WaveTrain {
    pub fn n_components(&self) -> usize {
        self.model.n_components()
    }

    pub fn component(&self, c: usize) -> &[f64] {
        &self.profile[c * self.m..(c + 1) * self.m]
    }

    /// State vector at grid point `j`.
    pub fn state(&self, j: usize) -> Vec<f64> {
        (0..self.n_components()).map(|c| self.profile[c * self.m + j]).collect()
    }

    /// `d/dphi` of the profile, spectrally.
    pub fn derivative(&self) -> Result<Vec<f64>> {
        let sp = Spectral::new(self.m)?;
        Ok(differentiate(&sp, &self.profile, self.n_components()))
    }

    /// Residual max-norm after spectral interpolation onto `m_fine` points.
    pub fn refined_residual(&self, m_fine: usize) -> Result<f64> {
        let nc = self.n_components();
        let fine: Vec<f64> = (0..nc).flat_map(|c| resample_periodic(self.component(c), m_fine)).collect();
        let sp = Spectral::new(m_fine)?;
        Ok(max_abs(&steady_residual(&self.model, &sp, self.k, self.omega, &fine)))
    }

    /// The profile translated by `shift` in `phi`, i.e. `u(phi + shift)`.
    pub fn translated(&self, shift: f64) -> Vec<f64> {
        translate_profile(&self.profile, self.n_components(), shift)
    }

    pub fn guess(&self) -> WaveGuess {
        WaveGuess { profile: self.profile.clone(), omega: self.omega, k: self.k }
    }
}

/// Starting point for Newton: a profile on the `M`-point grid plus the
/// current estimates of frequency and wavenumber.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WaveGuess {
    pub profile: Vec<f64>,
    pub omega: f64,
    pub k: f64,
}

fn max_abs(x: &[f64]) -> f64 {
    x.iter().fold(0.0, |m, v| m.max(v.abs()))
}

fn differentiate(sp: &Spectral, profile: &[f64], nc: usize) -> Vec<f64> {
    (0..nc).flat_map(|c| Spectral::apply(&sp.d1, &profile[c * sp.m..(c + 1) * sp.m])).collect()
}

/// Trigonometric interpolation of one periodic component onto `m_new` points.
pub fn resample_periodic(values: &[f64], m_new: usize) -> Vec<f64> {
    let m = values.len();
    let half = m / 2;
    let coeffs: Vec<C64> = (0..=half)
        .map(|q| {
            values
                .iter()
                .enumerate()
                .map(|(j, v)| C64::from_polar(*v, -2.0 * PI * (q * j) as f64 / m as f64))
                .sum::<C64>()
                / m as f64
        })
        .collect();
    (0..m_new)
        .map(|i| {
            let phi = 2.0 * PI * i as f64 / m_new as f64;
            let mut s = coeffs[0].re;
            for (q, cq) in coeffs.iter().enumerate().skip(1) {
                // the Nyquist mode of an even grid is split evenly between +-q
                let w = if m % 2 == 0 && q == half { 1.0 } else { 2.0 };
                s += w * (cq * C64::from_polar(1.0, q as f64 * phi)).re;
            }
            s
        })
        .collect()
}

/// `u(phi + shift)` for each component, by trigonometric interpolation.
pub fn translate_profile(profile: &[f64], nc: usize, shift: f64) -> Vec<f64> {
    let m = profile.len() / nc;
    let half = m / 2;
    let mut out = Vec::with_capacity(profile.len());
    for c in 0..nc {
        let values = &profile[c * m..(c + 1) * m];
        let coeffs: Vec<C64> = (0..=half)
            .map(|q| {
                values
                    .iter()
                    .enumerate()
                    .map(|(j, v)| C64::from_polar(*v, -2.0 * PI * (q * j) as f64 / m as f64))
                    .sum::<C64>()
                    / m as f64
            })
            .collect();
        for i in 0..m {
            let phi = 2.0 * PI * i as f64 / m as f64 + shift;
            let mut s = coeffs[0].re;
            for (q, cq) in coeffs.iter().enumerate().skip(1) {
                let mode = cq * C64::from_polar(1.0, q as f64 * phi);
                s += if m % 2 == 0 && q == half { (cq * (q as f64 * phi).cos()).re } else { 2.0 * mode.re };
            }
            out.push(s);
        }
    }
    out
}

/// `k^2 D u'' + omega u' + f(u)` at the grid points.
pub(crate) fn steady_residual(model: &ReactionModel, sp: &Spectral, k: f64, omega: f64, u: &[f64]) -> Vec<f64> {
    let nc = model.n_components();
    let m = sp.m;
    let d = model.diffusion();
    let mut out = vec![0.0; nc * m];
    for c in 0..nc {
        let uc = &u[c * m..(c + 1) * m];
        let u2 = Spectral::apply(&sp.d2, uc);
        let u1 = Spectral::apply(&sp.d1, uc);
        for i in 0..m {
            out[c * m + i] = k * k * d[c] * u2[i] + omega * u1[i];
        }
    }
    let mut state = vec![0.0; nc];
    let mut rate = vec![0.0; nc];
    for i in 0..m {
        for c in 0..nc {
            state[c] = u[c * m + i];
        }
        model.rate_into(&state, &mut rate);
        for c in 0..nc {
            out[c * m + i] += rate[c];
        }
    }
    out
}

/// `<d_phi reference, candidate - reference>` with trapezoid weights `2 pi / M`.
pub fn phase_condition(reference: &[f64], candidate: &[f64], n_components: usize) -> Result<f64> {
    if reference.len() != candidate.len() {
        return Err(Error::DimensionMismatch { expected: reference.len(), found: candidate.len() });
    }
    let m = reference.len() / n_components;
    let sp = Spectral::new(m)?;
    let dref = differentiate(&sp, reference, n_components);
    Ok(phase_with(&dref, reference, candidate, m))
}

fn phase_with(dref: &[f64], reference: &[f64], candidate: &[f64], m: usize) -> f64 {
    let w = 2.0 * PI / m as f64;
    dref.iter().zip(candidate.iter().zip(reference)).map(|(d, (c, r))| d * (c - r)).sum::<f64>() * w
}

fn is_nonconstant(profile: &[f64], nc: usize) -> bool {
    let m = profile.len() / nc;
    (0..nc).any(|c| {
        let s = &profile[c * m..(c + 1) * m];
        let (lo, hi) = s.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(*v), b.max(*v)));
        hi - lo > 1e-3
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Free {
    Omega,
    K,
}

/// Newton on `(u, omega)` at fixed `k`, with the phase condition pinned to the guess.
pub fn solve_wavetrain(model: &ReactionModel, k: f64, guess: &WaveGuess) -> Result<WaveTrain> {
    newton(model, WaveGuess { k, ..guess.clone() }, Free::Omega)
}

/// Newton on `(u, k)` at fixed `omega`. Spirals select the frequency, and the
/// far-field wavenumber follows from the dispersion relation.
pub fn solve_wavetrain_at_frequency(model: &ReactionModel, omega: f64, guess: &WaveGuess) -> Result<WaveTrain> {
    newton(model, WaveGuess { omega, ..guess.clone() }, Free::K)
}

fn newton(model: &ReactionModel, guess: WaveGuess, free: Free) -> Result<WaveTrain> {
    let nc = model.n_components();
    if guess.profile.is_empty() || guess.profile.len() % nc != 0 {
        return Err(Error::DimensionMismatch { expected: nc * DEFAULT_M, found: guess.profile.len() });
    }
    if guess.k == 0.0 || !guess.k.is_finite() {
        return Err(Error::InvalidParameter("wavenumber must be nonzero".into()));
    }
    let m = guess.profile.len() / nc;
    let sp = Spectral::new(m)?;
    let n = nc * m;
    let d = model.diffusion().to_vec();
    let reference = guess.profile.clone();
    let dref = differentiate(&sp, &reference, nc);
    let (mut u, mut k, mut omega) = (guess.profile, guess.k, guess.omega);

    let eval = |u: &[f64], k: f64, omega: f64| -> (Vec<f64>, f64) {
        let f = steady_residual(model, &sp, k, omega, u);
        let p = phase_with(&dref, &reference, u, m);
        (f, p)
    };
    let (mut f, mut p) = eval(&u, k, omega);
    let mut norm = max_abs(&f).max(p.abs());
    let mut iterations = 0;
    let mut jac_local = vec![0.0; nc * nc];
    while norm > NEWTON_TOL {
        if iterations == NEWTON_MAX_ITER || !norm.is_finite() {
            return Err(Error::NoConvergence { what: "wave-train Newton", iterations, residual: norm });
        }
        iterations += 1;
        let mut jac = Mat::<f64>::zeros(n + 1, n + 1);
        for c in 0..nc {
            let coeff = k * k * d[c];
            for i in 0..m {
                for j in 0..m {
                    jac[(c * m + i, c * m + j)] = coeff * sp.d2[(i, j)] + omega * sp.d1[(i, j)];
                }
            }
        }
        let mut state = vec![0.0; nc];
        for i in 0..m {
            for c in 0..nc {
                state[c] = u[c * m + i];
            }
            model.jacobian_into(&state, &mut jac_local);
            for c in 0..nc {
                for cc in 0..nc {
                    jac[(c * m + i, cc * m + i)] += jac_local[c * nc + cc];
                }
            }
        }
        let param_col: Vec<f64> = match free {
            Free::Omega => differentiate(&sp, &u, nc),
            Free::K => (0..nc)
                .flat_map(|c| {
                    let dc = d[c];
                    Spectral::apply(&sp.d2, &u[c * m..(c + 1) * m]).into_iter().map(move |v| 2.0 * k * dc * v)
                })
                .collect(),
        };
        for r in 0..n {
            jac[(r, n)] = param_col[r];
            jac[(n, r)] = dref[r] * 2.0 * PI / m as f64;
        }
        let mut rhs = Mat::<f64>::zeros(n + 1, 1);
        for r in 0..n {
            rhs[(r, 0)] = -f[r];
        }
        rhs[(n, 0)] = -p;
        let step = jac.partial_piv_lu().solve(&rhs);
        if (0..=n).any(|r| !step[(r, 0)].is_finite()) {
            return Err(Error::Singular { pivot: 0 });
        }
        // backtracking keeps Newton from wandering off when the guess is rough
        let mut t = 1.0;
        loop {
            let trial_u: Vec<f64> = (0..n).map(|r| u[r] + t * step[(r, 0)]).collect();
            let (tk, tw) = match free {
                Free::Omega => (k, omega + t * step[(n, 0)]),
                Free::K => (k + t * step[(n, 0)], omega),
            };
            let (tf, tp) = eval(&trial_u, tk, tw);
            let tnorm = max_abs(&tf).max(tp.abs());
            if tnorm < norm || t < 1.0 / 64.0 {
                u = trial_u;
                k = tk;
                omega = tw;
                f = tf;
                p = tp;
                norm = tnorm;
                break;
            }
            t *= 0.5;
        }
    }
    if !is_nonconstant(&u, nc) {
        return Err(Error::Equilibrium);
    }
    Ok(WaveTrain { model: model.clone(), k, omega, m, profile: u, residual: max_abs(&f), newton_iterations: iterations })
}

/// Settings for generating a wave-train guess by direct simulation on a ring.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RingSimulation {
    pub m: usize,
    pub dt: f64,
    pub t_end: f64,
}

impl Default for RingSimulation {
    fn default() -> Self {
        Self { m: DEFAULT_M, dt: 0.005, t_end: 150.0 }
    }
}

/// Evolves `u_t = k^2 D u_phiphi + f(u)` on the periodic `phi`-ring from a
/// one-sided pulse (excited patch with a refractory tail behind it) until a
/// travelling pulse settles, then estimates `omega` from the drift of the
/// first Fourier phase over the last quarter of the run.
pub fn ring_guess(model: &ReactionModel, k: f64, sim: &RingSimulation) -> Result<WaveGuess> {
    let nc = model.n_components();
    let m = sim.m;
    let sp = Spectral::new(m)?;
    let d = model.diffusion();
    let steps = (sim.t_end / sim.dt).round() as usize;
    if steps < 8 || !(sim.dt > 0.0) {
        return Err(Error::InvalidParameter("ring simulation needs dt > 0 and t_end >> dt".into()));
    }
    // implicit diffusion: (I - dt k^2 d_c D2)^{-1}, one dense inverse per component
    let inverses: Vec<Mat<f64>> = (0..nc)
        .map(|c| {
            let a = Mat::<f64>::from_fn(m, m, |i, j| (if i == j { 1.0 } else { 0.0 }) - sim.dt * k * k * d[c] * sp.d2[(i, j)]);
            a.partial_piv_lu().solve(Mat::<f64>::identity(m, m))
        })
        .collect();
    let phi = |j: usize| 2.0 * PI * j as f64 / m as f64;
    let mut u = vec![0.0; nc * m];
    for j in 0..m {
        let x = phi(j);
        if (PI..PI + 0.6).contains(&x) {
            u[j] = 1.0;
        }
        if nc > 1 && (PI - 2.0..PI).contains(&x) {
            u[m + j] = 1.0;
        }
    }
    let mut times = Vec::new();
    let mut phases = Vec::new();
    let record_from = steps - steps / 4;
    let mut state = vec![0.0; nc];
    let mut rate = vec![0.0; nc];
    let mut rhs = vec![0.0; nc * m];
    let mut last_phase: Option<f64> = None;
    let mut unwrapped = 0.0;
    for step in 0..steps {
        for j in 0..m {
            for c in 0..nc {
                state[c] = u[c * m + j];
            }
            model.rate_into(&state, &mut rate);
            for c in 0..nc {
                rhs[c * m + j] = u[c * m + j] + sim.dt * rate[c];
            }
        }
        for c in 0..nc {
            let inv = &inverses[c];
            let src = &rhs[c * m..(c + 1) * m];
            for i in 0..m {
                u[c * m + i] = (0..m).map(|j| inv[(i, j)] * src[j]).sum();
            }
        }
        if u.iter().any(|v| !v.is_finite()) {
            return Err(Error::NoConvergence { what: "ring simulation", iterations: step, residual: f64::NAN });
        }
        if step >= record_from {
            let z: C64 = (0..m).map(|j| C64::from_polar(u[j], phi(j))).sum();
            let ph = z.arg();
            if let Some(prev) = last_phase {
                let mut dphi = ph - prev;
                while dphi > PI {
                    dphi -= 2.0 * PI;
                }
                while dphi < -PI {
                    dphi += 2.0 * PI;
                }
                unwrapped += dphi;
            }
            last_phase = Some(ph);
            times.push(step as f64 * sim.dt);
            phases.push(unwrapped);
        }
    }
    if !is_nonconstant(&u, nc) {
        return Err(Error::Equilibrium);
    }
    let omega = crate::convdiff::fit_slope(&times, &phases);
    Ok(WaveGuess { profile: u, omega, k })
}

/// Samples of the nonlinear dispersion relation and the group velocity at the seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DispersionCurve {
    /// `(k, omega_nl(k))`, strictly increasing in `k`.
    pub samples: Vec<(f64, f64)>,
    pub k_star: f64,
    pub omega_star: f64,
    /// Centered difference of `omega_nl` at `k_star` with step `dk / 2`.
    pub group_velocity: f64,
    /// Difference between the `dk` and `dk / 2` estimates divided by three.
    pub group_velocity_error: f64,
    /// Set when continuation hit a fold in `k` and the curve was cut there.
    pub truncated_at_fold: bool,
}

/// Centered-difference group velocity with steps `dk` and `dk / 2`.
pub fn group_velocity(seed: &WaveTrain, dk: f64) -> Result<(f64, f64, f64)> {
    let slope = |h: f64| -> Result<f64> {
        let plus = solve_wavetrain(&seed.model, seed.k + h, &seed.guess())?;
        let minus = solve_wavetrain(&seed.model, seed.k - h, &seed.guess())?;
        Ok((plus.omega - minus.omega) / (2.0 * h))
    };
    let coarse = slope(dk)?;
    let fine = slope(0.5 * dk)?;
    Ok((fine, coarse, (coarse - fine).abs() / 3.0))
}

/// Pseudo-arclength continuation of the wave-train family in `(u, omega, k)`
/// over `k_range`, starting from `seed`; each accepted point solves the full
/// augmented system to the Newton tolerance.
pub fn dispersion_curve(seed: &WaveTrain, k_range: (f64, f64), ds: f64) -> Result<DispersionCurve> {
    let (k_lo, k_hi) = k_range;
    if !(k_lo < seed.k && seed.k < k_hi) {
        return Err(Error::InvalidParameter(format!("seed k = {} outside ({k_lo}, {k_hi})", seed.k)));
    }
    let mut samples = vec![(seed.k, seed.omega)];
    let mut fold = false;
    for dir in [-1.0, 1.0] {
        let (branch, hit_fold) = continue_branch(seed, dir, k_range, ds)?;
        fold |= hit_fold;
        samples.extend(branch);
    }
    samples.sort_by(|a, b| a.0.total_cmp(&b.0));
    samples.dedup_by(|a, b| (a.0 - b.0).abs() < 1e-12);
    let dk = 2e-3 * seed.k.abs();
    let (cg, _, err) = group_velocity(seed, dk)?;
    Ok(DispersionCurve {
        samples,
        k_star: seed.k,
        omega_star: seed.omega,
        group_velocity: cg,
        group_velocity_error: err,
        truncated_at_fold: fold,
    })
}

fn continue_branch(seed: &WaveTrain, dir: f64, (k_lo, k_hi): (f64, f64), ds: f64) -> Result<(Vec<(f64, f64)>, bool)> {
    let mut out = Vec::new();
    // first step by natural parameter to get a secant
    let h0 = dir * ds.min(0.5 * (k_hi - k_lo));
    let mut prev = seed.clone();
    let mut cur = match solve_wavetrain(&seed.model, seed.k + h0, &seed.guess()) {
        Ok(w) => w,
        Err(_) => return Ok((out, false)),
    };
    let mut step = ds;
    while cur.k > k_lo && cur.k < k_hi {
        out.push((cur.k, cur.omega));
        let tangent = secant(&prev, &cur);
        match arclength_step(&cur, &tangent, step) {
            Ok(next) => {
                if (next.k - cur.k) * dir <= 0.0 {
                    return Ok((out, true));
                }
                prev = cur;
                cur = next;
                step = (step * 1.3).min(4.0 * ds);
            }
            Err(_) if step > 1e-3 * ds => step *= 0.5,
            Err(e) => return Err(e),
        }
    }
    Ok((out, false))
}

/// Unit secant in `(u, omega, k)`.
fn secant(a: &WaveTrain, b: &WaveTrain) -> Vec<f64> {
    let mut t: Vec<f64> = b.profile.iter().zip(&a.profile).map(|(x, y)| x - y).collect();
    t.push(b.omega - a.omega);
    t.push(b.k - a.k);
    let n = t.iter().map(|v| v * v).sum::<f64>().sqrt();
    t.iter().map(|v| v / n).collect()
}

fn arclength_step(cur: &WaveTrain, tangent: &[f64], ds: f64) -> Result<WaveTrain> {
    let model = &cur.model;
    let nc = model.n_components();
    let m = cur.m;
    let n = nc * m;
    let sp = Spectral::new(m)?;
    let d = model.diffusion().to_vec();
    let dref = differentiate(&sp, &cur.profile, nc);
    let mut x: Vec<f64> = cur.profile.iter().copied().chain([cur.omega, cur.k]).collect();
    let base = x.clone();
    for (xi, ti) in x.iter_mut().zip(tangent) {
        *xi += ds * ti;
    }
    let mut jac_local = vec![0.0; nc * nc];
    for _ in 0..NEWTON_MAX_ITER {
        let (u, omega, k) = (&x[..n], x[n], x[n + 1]);
        let f = steady_residual(model, &sp, k, omega, u);
        let p = phase_with(&dref, &cur.profile, u, m);
        let arc: f64 = x.iter().zip(&base).zip(tangent).map(|((a, b), t)| (a - b) * t).sum::<f64>() - ds;
        let norm = max_abs(&f).max(p.abs()).max(arc.abs());
        if norm <= NEWTON_TOL {
            if !is_nonconstant(u, nc) {
                return Err(Error::Equilibrium);
            }
            return Ok(WaveTrain {
                model: model.clone(),
                k,
                omega,
                m,
                profile: u.to_vec(),
                residual: max_abs(&f),
                newton_iterations: 0,
            });
        }
        if !norm.is_finite() || norm > 1e6 {
            break;
        }
        let mut jac = Mat::<f64>::zeros(n + 2, n + 2);
        for c in 0..nc {
            for i in 0..m {
                for j in 0..m {
                    jac[(c * m + i, c * m + j)] = k * k * d[c] * sp.d2[(i, j)] + omega * sp.d1[(i, j)];
                }
            }
        }
        let mut state = vec![0.0; nc];
        for i in 0..m {
            for c in 0..nc {
                state[c] = u[c * m + i];
            }
            model.jacobian_into(&state, &mut jac_local);
            for c in 0..nc {
                for cc in 0..nc {
                    jac[(c * m + i, cc * m + i)] += jac_local[c * nc + cc];
                }
            }
        }
        let du = differentiate(&sp, u, nc);
        for c in 0..nc {
            let u2 = Spectral::apply(&sp.d2, &u[c * m..(c + 1) * m]);
            for i in 0..m {
                jac[(c * m + i, n)] = du[c * m + i];
                jac[(c * m + i, n + 1)] = 2.0 * k * d[c] * u2[i];
            }
        }
        for r in 0..n {
            jac[(n, r)] = dref[r] * 2.0 * PI / m as f64;
        }
        for r in 0..n + 2 {
            jac[(n + 1, r)] = tangent[r];
        }
        let mut rhs = Mat::<f64>::zeros(n + 2, 1);
        for r in 0..n {
            rhs[(r, 0)] = -f[r];
        }
        rhs[(n, 0)] = -p;
        rhs[(n + 1, 0)] = -arc;
        let step = jac.partial_piv_lu().solve(&rhs);
        for r in 0..n + 2 {
            x[r] += step[(r, 0)];
        }
    }
    Err(Error::NoConvergence { what: "arclength corrector", iterations: NEWTON_MAX_ITER, residual: f64::NAN })
}

/// Outcome of the admissibility checks, one flag per clause.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdmissibilityReport {
    /// `nu = 0` is a simple spatial eigenvalue at `lambda = 0` with eigenfunction `(u', k u'')`.
    pub clause_i: bool,
    pub nu_star: C64,
    pub alignment: f64,
    /// `d nu_* / d lambda (0) < 0`.
    pub clause_ii: bool,
    pub dnu_dlambda: C64,
    /// No other imaginary-axis spatial eigenvalue at `lambda = 0`.
    pub clause_iii: bool,
    /// No imaginary-axis spatial eigenvalues at the positive probes.
    pub clause_iv: bool,
    pub failures: Vec<String>,
}

impl AdmissibilityReport {
    pub fn admissible(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Checks the admissibility clauses on the spatial eigenvalue problem.
pub fn check_admissibility(wt: &WaveTrain, lambda_probes: &[f64]) -> Result<AdmissibilityReport> {
    const AXIS_TOL: f64 = 1e-8;
    const NU_ZERO_TOL: f64 = 1e-6;
    let ctx = AwtContext::new(wt)?;
    let nus = ctx.eigenvalues(C64::new(0.0, 0.0), 0.0)?;
    let (idx, nu_star) = nus
        .iter()
        .copied()
        .enumerate()
        .min_by(|a, b| a.1.norm().total_cmp(&b.1.norm()))
        .ok_or_else(|| Error::Eigen("empty spatial spectrum".into()))?;
    let mut failures = Vec::new();

    // (i) simplicity and eigenfunction
    let second = nus.iter().enumerate().filter(|(i, _)| *i != idx).map(|(_, v)| v.norm()).fold(f64::INFINITY, f64::min);
    let (alignment, simple) = if nu_star.norm() <= NU_ZERO_TOL && second > 1e3 * NU_ZERO_TOL {
        let vec = ctx.eigenvector(C64::new(0.0, 0.0), nu_star)?;
        let sp = Spectral::new(wt.m)?;
        let nc = wt.n_components();
        let du = differentiate(&sp, &wt.profile, nc);
        let ddu = differentiate(&sp, &du, nc);
        let expected: Vec<C64> = du.iter().chain(ddu.iter().map(|v| v * wt.k).collect::<Vec<_>>().iter()).map(|v| C64::new(*v, 0.0)).collect();
        (alignment(&vec, &expected), true)
    } else {
        (0.0, false)
    };
    let clause_i = simple && alignment >= 1.0 - 1e-6;
    if !clause_i {
        failures.push(format!("clause (i): nu = 0 not a simple eigenvalue with eigenfunction (u', k u''), |nu_*| = {:.3e}, alignment = {alignment:.8}", nu_star.norm()));
    }

    // (ii) finite difference in lambda
    let delta = 1e-4;
    let near = |lambda: f64| -> Result<C64> {
        let s = ctx.eigenvalues(C64::new(lambda, 0.0), 0.0)?;
        Ok(s.into_iter().min_by(|a, b| (a - nu_star).norm().total_cmp(&(b - nu_star).norm())).expect("nonempty"))
    };
    let dnu = (near(delta)? - near(-delta)?) / (2.0 * delta);
    let clause_ii = dnu.re < 0.0 && dnu.im.abs() < 1e-6 * dnu.norm().max(1.0);
    if !clause_ii {
        failures.push(format!("clause (ii): d nu_*/d lambda (0) = {dnu} is not negative"));
    }

    // (iii)
    let clause_iii = nus.iter().enumerate().all(|(i, v)| i == idx || v.re.abs() > AXIS_TOL);
    if !clause_iii {
        failures.push("clause (iii): further spatial eigenvalues on the imaginary axis at lambda = 0".into());
    }

    // (iv)
    let mut clause_iv = true;
    for &lam in lambda_probes {
        if !(lam > 0.0) {
            return Err(Error::InvalidParameter(format!("admissibility probes must be positive, got {lam}")));
        }
        let s = ctx.eigenvalues(C64::new(lam, 0.0), 0.0)?;
        if s.iter().any(|v| v.re.abs() <= AXIS_TOL) {
            clause_iv = false;
            failures.push(format!("clause (iv): imaginary-axis spatial eigenvalue at lambda = {lam}"));
        }
    }
    Ok(AdmissibilityReport { clause_i, nu_star, alignment, clause_ii, dnu_dlambda: dnu, clause_iii, clause_iv, failures })
}

/// `|<a, b>| / (|a| |b|)`.
pub fn alignment(a: &[C64], b: &[C64]) -> f64 {
    let dot: C64 = a.iter().zip(b).map(|(x, y)| x.conj() * y).sum();
    let na = a.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
    let nb = b.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
    dot.norm() / (na * nb)
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::kinetics::{barkley_model, BarkleyParams};
    use std::sync::OnceLock;

    pub const TEST_K: f64 = 0.6;

    /// A Barkley wave train shared across the test suite.
    pub fn barkley_train() -> &'static WaveTrain {
        static WT: OnceLock<WaveTrain> = OnceLock::new();
        WT.get_or_init(|| {
            let model = barkley_model(BarkleyParams::default()).unwrap();
            let guess = ring_guess(&model, TEST_K, &RingSimulation::default()).unwrap();
            solve_wavetrain(&model, TEST_K, &guess).unwrap()
        })
    }

    #[test]
    fn resample_is_exact_for_trig_polynomials() {
        let m = 16;
        let f = |x: f64| 1.0 + (2.0 * x).sin() - 0.5 * (3.0 * x).cos();
        let v: Vec<f64> = (0..m).map(|j| f(2.0 * PI * j as f64 / m as f64)).collect();
        let fine = resample_periodic(&v, 40);
        for (i, y) in fine.iter().enumerate() {
            assert!((y - f(2.0 * PI * i as f64 / 40.0)).abs() < 1e-13);
        }
        let shifted = translate_profile(&v, 1, 0.3);
        for (j, y) in shifted.iter().enumerate() {
            assert!((y - f(2.0 * PI * j as f64 / m as f64 + 0.3)).abs() < 1e-13);
        }
    }

    #[test]
    fn phase_condition_examples() {
        let m = 64;
        let r: Vec<f64> = (0..m).map(|j| (2.0 * PI * j as f64 / m as f64).sin()).collect();
        assert_eq!(phase_condition(&r, &r, 1).unwrap(), 0.0);
        let dphi = 1e-4;
        let shifted = translate_profile(&r, 1, dphi);
        // ||r_phi||^2 with trapezoid weights is pi for sin
        let p = phase_condition(&r, &shifted, 1).unwrap();
        assert!((p - dphi * PI).abs() < 1e-7, "{p}");
        assert!(phase_condition(&r, &r[..10], 1).is_err());
    }

    #[test]
    fn barkley_wavetrain_converges() {
        let wt = barkley_train();
        assert!(wt.residual <= NEWTON_TOL);
        assert!(wt.omega > 0.0);
        assert!(is_nonconstant(&wt.profile, 2));
        assert!(wt.refined_residual(256).unwrap() <= 1e-6, "{}", wt.refined_residual(256).unwrap());
    }

    #[test]
    fn exact_solution_needs_no_newton_steps() {
        let wt = barkley_train();
        let again = solve_wavetrain(&wt.model, wt.k, &wt.guess()).unwrap();
        assert_eq!(again.newton_iterations, 0);
        assert_eq!(again.profile, wt.profile);
    }

    #[test]
    fn translated_guess_gives_same_frequency() {
        let wt = barkley_train();
        let guess = WaveGuess { profile: wt.translated(0.7), ..wt.guess() };
        let moved = solve_wavetrain(&wt.model, wt.k, &guess).unwrap();
        assert!((moved.omega - wt.omega).abs() < 1e-9);
        let by_frequency = solve_wavetrain_at_frequency(&wt.model, wt.omega, &guess).unwrap();
        assert!((by_frequency.k - wt.k).abs() < 1e-9);
    }

    #[test]
    fn constant_state_is_reported() {
        let model = barkley_model(BarkleyParams::default()).unwrap();
        let guess = WaveGuess { profile: vec![0.0; 2 * 32], omega: 1.0, k: 1.0 };
        assert!(matches!(solve_wavetrain(&model, 1.0, &guess), Err(Error::Equilibrium)));
    }

    #[test]
    fn group_velocity_is_richardson_consistent() {
        let wt = barkley_train();
        let dk = 4e-3;
        let (fine, coarse, _) = group_velocity(wt, dk).unwrap();
        let (finer, _, _) = group_velocity(wt, 0.25 * dk).unwrap();
        // errors shrink by four per halving; compare against the dk/4 estimate
        let e1 = (coarse - finer).abs();
        let e2 = (fine - finer).abs();
        assert!(fine > 0.0);
        assert!(e2 < 0.5 * e1 || e1 < 1e-8, "{e1} {e2}");
    }

    #[test]
    fn admissibility_of_barkley_train() {
        let wt = barkley_train();
        let rep = check_admissibility(wt, &[0.1, 1.0]).unwrap();
        assert!(rep.admissible(), "{:?}", rep.failures);
        let (cg, _, _) = group_velocity(wt, 2e-3).unwrap();
        let rel = ((rep.dnu_dlambda.re + 1.0 / cg) * cg).abs();
        assert!(rel < 1e-3, "dnu/dlambda {} vs -1/cg {}", rep.dnu_dlambda, -1.0 / cg);
    }

    proptest::proptest! {
        #[test]
        fn translation_is_a_group_action(a in -1.0f64..1.0, b in -1.0f64..1.0, s in -7.0f64..7.0, t in -7.0f64..7.0) {
            let m = 24;
            let f = |x: f64| a * (2.0 * x).sin() + b * (5.0 * x).cos() + 0.3;
            let v: Vec<f64> = (0..m).map(|j| f(2.0 * PI * j as f64 / m as f64)).collect();
            let twice = translate_profile(&translate_profile(&v, 1, s), 1, t);
            let once = translate_profile(&v, 1, s + t);
            let exact: Vec<f64> = (0..m).map(|j| f(2.0 * PI * j as f64 / m as f64 + s + t)).collect();
            for j in 0..m {
                proptest::prop_assert!((twice[j] - once[j]).abs() <= 1e-12);
                proptest::prop_assert!((once[j] - exact[j]).abs() <= 1e-12);
            }
        }
    }
}
