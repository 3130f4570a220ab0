//! C ABI over `spiralspec`.
//!
//! Models, wave trains and spirals are opaque heap handles released with
//! their `*_free` function. Every fallible call returns an [`SsStatus`];
//! on failure the message is kept per thread and read with
//! [`ss_last_error`]. Spectra are written into caller buffers of real and
//! imaginary parts. Panics never cross the boundary: they are reported as
//! `SS_STATUS_INTERNAL`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use spiralspec::cli::{self, RunConfig};
use spiralspec::convdiff::{cd_eigs, cd_sigma_min, ConvDiffProblem};
use spiralspec::discretize::{PolarGrid, Robin};
use spiralspec::kinetics::{barkley_model, BarkleyParams, ReactionModel};
use spiralspec::linalg::EigsOptions;
use spiralspec::spiral::{
    bootstrap_grid, bootstrap_time_evolution, condition_point, linearization, solve_spiral_with, spiral_spectrum,
    NewtonOptions, SpiralGuess, SpiralSolution,
};
use spiralspec::wavetrain::{ring_guess, solve_wavetrain, RingSimulation, WaveTrain};
use spiralspec::{Error, C64};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Singular = 3,
    NoConvergence = 4,
    /// Time stepping relaxed to a homogeneous state instead of a pattern.
    Decayed = 5,
    EmptyGap = 6,
    Config = 7,
    Io = 8,
    /// The output buffer is shorter than the result; the count is still set.
    BufferTooSmall = 9,
    /// One or more pipeline tasks failed; see the run manifest.
    TaskFailed = 10,
    Internal = 99,
}

pub struct SsModel(ReactionModel);
pub struct SsWaveTrain(WaveTrain);
pub struct SsSpiral(SpiralSolution);

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(e: &Error) -> SsStatus {
    match e {
        Error::InvalidParameter(_) | Error::DimensionMismatch { .. } => SsStatus::InvalidArgument,
        Error::Singular { .. } => SsStatus::Singular,
        Error::NoConvergence { .. } | Error::Equilibrium | Error::Eigen(_) | Error::LabelCollision { .. } => {
            SsStatus::NoConvergence
        }
        Error::Decayed(_) => SsStatus::Decayed,
        Error::EmptyGap(_) => SsStatus::EmptyGap,
        Error::Config(_) | Error::Json(_) => SsStatus::Config,
        Error::Io(_) => SsStatus::Io,
        Error::Assembly(_) => SsStatus::Internal,
    }
}

/// Runs `f`, recording its error or panic.
fn guard(f: impl FnOnce() -> Result<(), SsStatusError>) -> SsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error(String::new());
            SsStatus::Ok
        }
        Ok(Err(e)) => {
            set_error(e.message);
            e.status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("internal error: {msg}"));
            SsStatus::Internal
        }
    }
}

struct SsStatusError {
    status: SsStatus,
    message: String,
}

impl From<Error> for SsStatusError {
    fn from(e: Error) -> Self {
        Self { status: status_of(&e), message: e.to_string() }
    }
}

fn fail(status: SsStatus, message: &str) -> SsStatusError {
    SsStatusError { status, message: message.into() }
}

fn null() -> SsStatusError {
    fail(SsStatus::NullPointer, "null pointer argument")
}

unsafe fn deref<'a, T>(p: *const T) -> Result<&'a T, SsStatusError> {
    p.as_ref().ok_or_else(null)
}

unsafe fn put<T>(out: *mut T, value: T) -> Result<(), SsStatusError> {
    if out.is_null() {
        return Err(null());
    }
    out.write(value);
    Ok(())
}

/// Writes `values` as split real and imaginary parts. `count` always
/// receives the full length.
unsafe fn write_spectrum(
    values: &[C64],
    re: *mut f64,
    im: *mut f64,
    capacity: usize,
    count: *mut usize,
) -> Result<(), SsStatusError> {
    put(count, values.len())?;
    if values.len() > capacity {
        return Err(fail(SsStatus::BufferTooSmall, &format!("{} eigenvalues, buffer holds {capacity}", values.len())));
    }
    if values.is_empty() {
        return Ok(());
    }
    if re.is_null() || im.is_null() {
        return Err(null());
    }
    for (i, z) in values.iter().enumerate() {
        re.add(i).write(z.re);
        im.add(i).write(z.im);
    }
    Ok(())
}

/// Copies the calling thread's last error message into `buf` as a
/// NUL-terminated string, truncating to `len`. Returns the length the full
/// message needs, including the terminator; an empty message means the
/// last call succeeded.
///
/// # Safety
/// `buf` must be null or valid for `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn ss_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        let bytes = msg.as_bytes();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            std::ptr::copy_nonoverlapping(bytes.as_ptr(), buf as *mut u8, n);
            *buf.add(n) = 0;
        }
        bytes.len() + 1
    })
}

/// Barkley kinetics `u_t = Δu + u(1-u)(u-(v+b)/a)/eps`, `v_t = delta Δv + u - v`.
///
/// # Safety
/// `out` must be valid for one pointer write.
#[no_mangle]
pub unsafe extern "C" fn ss_model_barkley(a: f64, b: f64, eps: f64, delta: f64, out: *mut *mut SsModel) -> SsStatus {
    guard(|| {
        let model = barkley_model(BarkleyParams { a, b, eps, delta })?;
        put(out, Box::into_raw(Box::new(SsModel(model))))
    })
}

/// # Safety
/// `model` must come from `ss_model_barkley` and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn ss_model_free(model: *mut SsModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Eigenvalues nearest `shift` of the weighted convection-diffusion
/// operator on an interval of length `r` with Dirichlet ends, finite
/// differences of step `h`.
///
/// # Safety
/// `re` and `im` must hold `capacity` doubles; `count` one `size_t`.
#[no_mangle]
pub unsafe extern "C" fn ss_convdiff_eigenvalues(
    c: f64,
    r: f64,
    h: f64,
    eta: f64,
    k: usize,
    shift_re: f64,
    shift_im: f64,
    tol: f64,
    re: *mut f64,
    im: *mut f64,
    capacity: usize,
    count: *mut usize,
) -> SsStatus {
    guard(|| {
        let p = ConvDiffProblem::new(c, r, h, eta)?;
        let eig = cd_eigs(&p, k, C64::new(shift_re, shift_im), tol)?;
        write_spectrum(&eig.eigenvalues, re, im, capacity, count)
    })
}

/// Smallest singular value of the weighted convection-diffusion operator
/// minus `lambda`.
///
/// # Safety
/// `sigma` must be valid for one write.
#[no_mangle]
pub unsafe extern "C" fn ss_convdiff_sigma_min(
    c: f64,
    r: f64,
    h: f64,
    eta: f64,
    lambda_re: f64,
    lambda_im: f64,
    sigma: *mut f64,
) -> SsStatus {
    guard(|| {
        let p = ConvDiffProblem::new(c, r, h, eta)?;
        put(sigma, cd_sigma_min(&p, C64::new(lambda_re, lambda_im))?)
    })
}

/// Periodic wave train of wavenumber `k`, started from a ring simulation.
///
/// # Safety
/// `model` must be a live handle and `out` valid for one pointer write.
#[no_mangle]
pub unsafe extern "C" fn ss_wavetrain_solve(model: *const SsModel, k: f64, out: *mut *mut SsWaveTrain) -> SsStatus {
    guard(|| {
        let model = &deref(model)?.0;
        let guess = ring_guess(model, k, &RingSimulation::default())?;
        let wt = solve_wavetrain(model, k, &guess)?;
        put(out, Box::into_raw(Box::new(SsWaveTrain(wt))))
    })
}

/// # Safety
/// `wt` must be a live handle and `omega` valid for one write.
#[no_mangle]
pub unsafe extern "C" fn ss_wavetrain_omega(wt: *const SsWaveTrain, omega: *mut f64) -> SsStatus {
    guard(|| put(omega, deref(wt)?.0.omega))
}

/// # Safety
/// `wt` must come from `ss_wavetrain_solve` and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn ss_wavetrain_free(wt: *mut SsWaveTrain) {
    if !wt.is_null() {
        drop(Box::from_raw(wt));
    }
}

/// Rigidly rotating spiral on the disk of radius `radius` with Neumann
/// boundary: time stepping from a broken front (`steps` of size `dt` on a
/// grid of radial spacing `bootstrap_h_r`), then Newton on the grid
/// `h_r x n_theta`. Returns `SS_STATUS_DECAYED` when the disk is too small
/// to sustain rotation.
///
/// # Safety
/// `model` must be a live handle and `out` valid for one pointer write.
#[no_mangle]
pub unsafe extern "C" fn ss_spiral_solve(
    model: *const SsModel,
    radius: f64,
    h_r: f64,
    n_theta: usize,
    bootstrap_h_r: f64,
    steps: usize,
    dt: f64,
    out: *mut *mut SsSpiral,
) -> SsStatus {
    guard(|| {
        let model = &deref(model)?.0;
        let grid = PolarGrid::new(radius, h_r, n_theta)?;
        let coarse = bootstrap_grid(&grid, bootstrap_h_r)?;
        let guess: SpiralGuess = bootstrap_time_evolution(model, &coarse, steps, dt)?.into();
        let s = solve_spiral_with(model, &grid, &guess, Robin::NEUMANN, &NewtonOptions::default())?;
        put(out, Box::into_raw(Box::new(SsSpiral(s))))
    })
}

/// Continues `spiral` to a disk of radius `radius` with the same grid spacing.
///
/// # Safety
/// `spiral` must be a live handle and `out` valid for one pointer write.
#[no_mangle]
pub unsafe extern "C" fn ss_spiral_extend(spiral: *const SsSpiral, radius: f64, out: *mut *mut SsSpiral) -> SsStatus {
    guard(|| {
        let s = &deref(spiral)?.0;
        let guess = s.extended(radius)?;
        let next = solve_spiral_with(&s.model, &guess.grid, &guess, s.bc, &NewtonOptions::default())?;
        put(out, Box::into_raw(Box::new(SsSpiral(next))))
    })
}

/// Rotation frequency and far-field wavenumber. Either output may be null.
///
/// # Safety
/// `spiral` must be a live handle; non-null outputs valid for one write.
#[no_mangle]
pub unsafe extern "C" fn ss_spiral_info(spiral: *const SsSpiral, omega: *mut f64, k_far: *mut f64) -> SsStatus {
    guard(|| {
        let s = &deref(spiral)?.0;
        if !omega.is_null() {
            omega.write(s.omega);
        }
        if !k_far.is_null() {
            k_far.write(s.k_far);
        }
        Ok(())
    })
}

/// # Safety
/// `spiral` must come from a spiral constructor and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn ss_spiral_free(spiral: *mut SsSpiral) {
    if !spiral.is_null() {
        drop(Box::from_raw(spiral));
    }
}

/// `k` eigenvalues nearest `shift` of the linearization about `spiral`,
/// conjugated by `exp(eta r)`.
///
/// # Safety
/// `spiral` must be a live handle; `re` and `im` must hold `capacity`
/// doubles and `count` one `size_t`.
#[no_mangle]
pub unsafe extern "C" fn ss_spiral_eigenvalues(
    spiral: *const SsSpiral,
    eta: f64,
    k: usize,
    shift_re: f64,
    shift_im: f64,
    tol: f64,
    re: *mut f64,
    im: *mut f64,
    capacity: usize,
    count: *mut usize,
) -> SsStatus {
    guard(|| {
        let s = &deref(spiral)?.0;
        let opts = EigsOptions { k, shift: C64::new(shift_re, shift_im), tol, ..Default::default() };
        let report = spiral_spectrum(s, eta, &opts, None, None)?;
        write_spectrum(&report.eigen.eigenvalues, re, im, capacity, count)
    })
}

/// `log10` of the 1-norm condition number and the smallest singular value
/// of the weighted linearization minus `lambda`. Either output may be null.
///
/// # Safety
/// `spiral` must be a live handle; non-null outputs valid for one write.
#[no_mangle]
pub unsafe extern "C" fn ss_spiral_condition(
    spiral: *const SsSpiral,
    eta: f64,
    lambda_re: f64,
    lambda_im: f64,
    log10_kappa: *mut f64,
    sigma_min: *mut f64,
) -> SsStatus {
    guard(|| {
        let s = &deref(spiral)?.0;
        let op = linearization(s, eta)?;
        let (sigma, kappa) = condition_point(&op, C64::new(lambda_re, lambda_im), 1e-8, !log10_kappa.is_null());
        let sigma = sigma.filter(|v| *v > 0.0).ok_or_else(|| fail(SsStatus::Singular, "operator is singular at lambda"))?;
        if !sigma_min.is_null() {
            sigma_min.write(sigma);
        }
        if !log10_kappa.is_null() {
            log10_kappa.write(kappa.unwrap_or(f64::NAN));
        }
        Ok(())
    })
}

/// Runs the task pipeline of a JSON run config, writing into the config's
/// output directory, or into `output_dir` when it is non-null. Returns
/// `SS_STATUS_TASK_FAILED` when the run finished but some task failed.
///
/// # Safety
/// `config_json` must be a NUL-terminated UTF-8 string; `output_dir` null
/// or NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn ss_run_config(config_json: *const c_char, output_dir: *const c_char) -> SsStatus {
    guard(|| {
        if config_json.is_null() {
            return Err(null());
        }
        let text = CStr::from_ptr(config_json).to_str().map_err(|_| fail(SsStatus::InvalidArgument, "config is not UTF-8"))?;
        let mut cfg = RunConfig::from_json(text)?;
        if !output_dir.is_null() {
            let dir = CStr::from_ptr(output_dir).to_str().map_err(|_| fail(SsStatus::InvalidArgument, "path is not UTF-8"))?;
            cfg.output = Path::new(dir).to_path_buf();
        }
        let outcome = cli::run(&cfg)?;
        if outcome.exit_code == cli::EXIT_OK {
            Ok(())
        } else {
            let failed: Vec<_> = outcome.manifest.tasks.iter().filter(|t| t.status != cli::TaskStatus::Ok).map(|t| t.task.as_str()).collect();
            Err(fail(SsStatus::TaskFailed, &format!("tasks not completed: {}", failed.join(", "))))
        }
    })
}
