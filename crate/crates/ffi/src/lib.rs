//! C interface to `rwa-control`.
//!
//! Objects are opaque handles owned by the caller and released with the
//! matching `*_free` function. Every fallible call returns an [`RwaStatus`];
//! on failure, [`rwa_last_error`] returns a description for the calling thread.
//! Strings returned through out-parameters must be released with
//! [`rwa_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use nalgebra::DVector;
use num_complex::Complex64;

use rwa_control::analytic::{star_evolve, two_level_solve, TwoLevelGoal};
use rwa_control::dynamics::{frame_transform, propagate_exact, ExactOptions, Frame, StateVector};
use rwa_control::graph::{assign_gamma, build_graph, Coupling, LevelSystem};
use rwa_control::io::{analyze, SolutionFile, SystemFile};
use rwa_control::optimize::{
    detuned_drives, double_check, optimize_transfer, TransferConfig, TransferProblem, TransferSolution,
};
use rwa_control::rwa::{default_window, Drive, DriveSet};
use rwa_control::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RwaStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidSystem = 3,
    /// The coupling graph is cyclic or disconnected.
    GraphNotTree = 4,
    /// Drive assignment or residual failure.
    InvalidDrives = 5,
    Unreachable = 6,
    /// Integrator or optimizer failure.
    Numerical = 7,
    Io = 8,
    BufferTooSmall = 9,
    Panic = 10,
}

/// A level system with optional drive fields.
pub struct RwaSystem {
    system: LevelSystem,
    drives: Option<DriveSet>,
}

/// An optimized transfer together with its problem.
pub struct RwaSolution {
    problem: TransferProblem,
    solution: TransferSolution,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).expect("interior nul removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> RwaStatus {
    match e {
        Error::InvalidSystem(_) | Error::DimensionMismatch(..) => RwaStatus::InvalidSystem,
        Error::CyclicGraph | Error::DisconnectedGraph => RwaStatus::GraphNotTree,
        Error::NoResonantTransition { .. }
        | Error::AmbiguousResonance { .. }
        | Error::DuplicateDrive { .. }
        | Error::UnassignedEdge { .. }
        | Error::NonvanishingResiduals { .. } => RwaStatus::InvalidDrives,
        Error::Unreachable { .. } | Error::InconsistentGoal(_) => RwaStatus::Unreachable,
        Error::NonHermitianGenerator { .. }
        | Error::StepSizeUnderflow { .. }
        | Error::Cancelled { .. }
        | Error::ObjectiveNonFinite { .. }
        | Error::ResampleExhausted { .. } => RwaStatus::Numerical,
        Error::Io(_) | Error::Json(_) | Error::Csv(_) => RwaStatus::Io,
        _ => RwaStatus::InvalidArgument,
    }
}

struct Fail(RwaStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(RwaStatus::NullPointer, format!("{what} is null"))
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> RwaStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => RwaStatus::Ok,
        Ok(Err(Fail(status, message))) => {
            set_error(message);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            RwaStatus::Panic
        }
    }
}

unsafe fn slice<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn slice_mut<'a, T>(p: *mut T, len: usize, what: &str) -> Result<&'a mut [T], Fail> {
    if len == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts_mut(p, len))
}

unsafe fn complex_vector(re: *const f64, im: *const f64, len: usize) -> Result<DVector<Complex64>, Fail> {
    let re = slice(re, len, "real parts")?;
    let im = slice(im, len, "imaginary parts")?;
    Ok(DVector::from_iterator(len, re.iter().zip(im).map(|(&a, &b)| Complex64::new(a, b))))
}

unsafe fn write_complex(v: &DVector<Complex64>, re: *mut f64, im: *mut f64) -> Result<(), Fail> {
    let re = slice_mut(re, v.len(), "output real parts")?;
    let im = slice_mut(im, v.len(), "output imaginary parts")?;
    for (i, z) in v.iter().enumerate() {
        re[i] = z.re;
        im[i] = z.im;
    }
    Ok(())
}

fn into_c_string(s: String, out: *mut *mut c_char) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null("output string"));
    }
    let c = CString::new(s).map_err(|e| Fail(RwaStatus::InvalidArgument, e.to_string()))?;
    unsafe { *out = c.into_raw() };
    Ok(())
}

fn json<T: serde::Serialize>(value: &T) -> Result<String, Fail> {
    serde_json::to_string(value).map_err(|e| Fail(RwaStatus::Io, e.to_string()))
}

unsafe fn system_ref<'a>(p: *const RwaSystem) -> Result<&'a RwaSystem, Fail> {
    p.as_ref().ok_or_else(|| null("system handle"))
}

unsafe fn solution_ref<'a>(p: *const RwaSolution) -> Result<&'a RwaSolution, Fail> {
    p.as_ref().ok_or_else(|| null("solution handle"))
}

fn drives_of(sys: &RwaSystem) -> Result<&DriveSet, Fail> {
    sys.drives
        .as_ref()
        .ok_or_else(|| Fail(RwaStatus::InvalidDrives, "system has no drive fields".into()))
}

/// Message of the last failed call on this thread, or null. Valid until the
/// next failing call on the same thread; do not free.
#[no_mangle]
pub extern "C" fn rwa_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Releases a string returned by this library.
///
/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn rwa_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Creates a system from `n` energies and `m` couplings `(k[i], j[i], re[i] + i im[i])`.
///
/// # Safety
/// Array arguments must hold the stated number of elements.
#[no_mangle]
pub unsafe extern "C" fn rwa_system_new(
    n: usize,
    energies: *const f64,
    m: usize,
    k: *const usize,
    j: *const usize,
    re: *const f64,
    im: *const f64,
    out: *mut *mut RwaSystem,
) -> RwaStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("output handle"));
        }
        let energies = slice(energies, n, "energies")?.to_vec();
        let (k, j) = (slice(k, m, "upper levels")?, slice(j, m, "lower levels")?);
        let values = complex_vector(re, im, m)?;
        let couplings = (0..m).map(|i| Coupling::new(k[i], j[i], values[i])).collect();
        let system = LevelSystem::new(energies, couplings)?;
        *out = Box::into_raw(Box::new(RwaSystem { system, drives: None }));
        Ok(())
    })
}

/// Creates a system from the JSON system format (drives optional).
///
/// # Safety
/// `text` must be a nul-terminated string.
#[no_mangle]
pub unsafe extern "C" fn rwa_system_from_json(text: *const c_char, out: *mut *mut RwaSystem) -> RwaStatus {
    guard(|| {
        if text.is_null() || out.is_null() {
            return Err(null("argument"));
        }
        let text = CStr::from_ptr(text)
            .to_str()
            .map_err(|e| Fail(RwaStatus::InvalidArgument, e.to_string()))?;
        let file: SystemFile = serde_json::from_str(text).map_err(|e| Fail(RwaStatus::Io, e.to_string()))?;
        let system = file.system()?;
        let drives = match &file.drives {
            Some(d) => Some(d.drives(&system)?),
            None => None,
        };
        *out = Box::into_raw(Box::new(RwaSystem { system, drives }));
        Ok(())
    })
}

/// # Safety
/// `sys` must be null or a live handle from this library.
#[no_mangle]
pub unsafe extern "C" fn rwa_system_free(sys: *mut RwaSystem) {
    if !sys.is_null() {
        drop(Box::from_raw(sys));
    }
}

/// Number of levels, or 0 for a null handle.
///
/// # Safety
/// `sys` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn rwa_system_dim(sys: *const RwaSystem) -> usize {
    sys.as_ref().map_or(0, |s| s.system.dim())
}

/// Sets `f` drive fields, each matched to its resonant transition.
///
/// # Safety
/// Arrays must hold `f` elements; `sys` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn rwa_system_set_drives(
    sys: *mut RwaSystem,
    f: usize,
    re: *const f64,
    im: *const f64,
    omega: *const f64,
) -> RwaStatus {
    guard(|| {
        let sys = sys.as_mut().ok_or_else(|| null("system handle"))?;
        let amps = complex_vector(re, im, f)?;
        let omega = slice(omega, f, "frequencies")?;
        let fields = amps.iter().zip(omega).map(|(&a, &w)| Drive::new(a, w)).collect();
        sys.drives = Some(DriveSet::auto(&sys.system, fields, default_window(&sys.system))?);
        Ok(())
    })
}

/// Sets one zero-amplitude field per coupled edge at `transition - detuning`.
///
/// # Safety
/// `sys` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn rwa_system_set_detuned_drives(sys: *mut RwaSystem, detuning: f64) -> RwaStatus {
    guard(|| {
        let sys = sys.as_mut().ok_or_else(|| null("system handle"))?;
        sys.drives = Some(detuned_drives(&sys.system, detuning)?);
        Ok(())
    })
}

/// Writes the structural and RWA report as a JSON string.
///
/// # Safety
/// `sys` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rwa_system_analyze(sys: *const RwaSystem, out: *mut *mut c_char) -> RwaStatus {
    guard(|| {
        let sys = system_ref(sys)?;
        let report = analyze(&SystemFile::from_system(&sys.system, sys.drives.as_ref()))?;
        into_c_string(json(&report)?, out)
    })
}

/// Writes the rotating-frame weights (root level 0 at zero) into `gamma[0..dim]`.
/// Without drives, all detunings are taken as zero.
///
/// # Safety
/// `gamma` must hold `len` elements.
#[no_mangle]
pub unsafe extern "C" fn rwa_system_gamma(sys: *const RwaSystem, gamma: *mut f64, len: usize) -> RwaStatus {
    guard(|| {
        let sys = system_ref(sys)?;
        if len < sys.system.dim() {
            return Err(Fail(RwaStatus::BufferTooSmall, format!("need {} entries", sys.system.dim())));
        }
        let graph = build_graph(&sys.system);
        let detunings = match &sys.drives {
            Some(d) => d.detunings(&sys.system),
            None => rwa_control::graph::Detunings::zero_on(&graph),
        };
        let g = assign_gamma(&graph, &detunings, 0.0)?;
        slice_mut(gamma, len, "gamma")?[..g.gamma.len()].copy_from_slice(&g.gamma);
        Ok(())
    })
}

/// Drive magnitude, phase and duration for a two-level target with polar
/// angle `theta` and relative phase `phi`, at Rabi magnitude `amplitude`.
///
/// # Safety
/// Output pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn rwa_two_level_solve(
    theta: f64,
    phi: f64,
    amplitude: f64,
    detuning: f64,
    out_amplitude: *mut f64,
    out_phase: *mut f64,
    out_duration: *mut f64,
) -> RwaStatus {
    guard(|| {
        if out_amplitude.is_null() || out_phase.is_null() || out_duration.is_null() {
            return Err(null("output"));
        }
        let goal = TwoLevelGoal::new(theta, phi)?;
        let s = two_level_solve(&goal, amplitude, detuning)?;
        *out_amplitude = s.amplitudes[0];
        *out_phase = s.phases[0];
        *out_duration = s.duration;
        Ok(())
    })
}

/// Interaction-frame amplitudes of a star driven from its center for time `t`.
/// Writes `leaves + 1` entries, center first.
///
/// # Safety
/// Inputs hold `leaves` entries, outputs `leaves + 1`.
#[no_mangle]
pub unsafe extern "C" fn rwa_star_evolve(
    leaves: usize,
    re: *const f64,
    im: *const f64,
    detuning: f64,
    t: f64,
    out_re: *mut f64,
    out_im: *mut f64,
) -> RwaStatus {
    guard(|| {
        let amps: Vec<Complex64> = complex_vector(re, im, leaves)?.iter().copied().collect();
        let c = star_evolve(&amps, detuning, t);
        write_complex(&c, out_re, out_im)
    })
}

/// Evolves a lab-frame state for `duration` under the full time-dependent
/// Hamiltonian of the system's drives and writes the lab-frame result.
///
/// # Safety
/// State arrays must hold `rwa_system_dim(sys)` elements.
#[no_mangle]
pub unsafe extern "C" fn rwa_propagate_exact(
    sys: *const RwaSystem,
    re: *const f64,
    im: *const f64,
    duration: f64,
    tol: f64,
    out_re: *mut f64,
    out_im: *mut f64,
) -> RwaStatus {
    guard(|| {
        let sys = system_ref(sys)?;
        let psi = StateVector::new(complex_vector(re, im, sys.system.dim())?, Frame::Lab, 0.0);
        let options = ExactOptions {
            tol,
            ..Default::default()
        };
        let r = propagate_exact(&sys.system, drives_of(sys)?, &psi, duration, &options)?;
        write_complex(&r.state.amplitudes, out_re, out_im)
    })
}

/// Converts a lab-frame state at time `t` to the interaction frame.
///
/// # Safety
/// State arrays must hold `rwa_system_dim(sys)` elements.
#[no_mangle]
pub unsafe extern "C" fn rwa_to_interaction_frame(
    sys: *const RwaSystem,
    re: *const f64,
    im: *const f64,
    t: f64,
    out_re: *mut f64,
    out_im: *mut f64,
) -> RwaStatus {
    guard(|| {
        let sys = system_ref(sys)?;
        let psi = StateVector::new(complex_vector(re, im, sys.system.dim())?, Frame::Lab, t);
        let c = frame_transform(&psi, Frame::Interaction, &sys.system, &[])?;
        write_complex(&c.amplitudes, out_re, out_im)
    })
}

/// Optimizes the system's drives to take the lowest level to `goal`.
/// A non-positive `cap` selects the default magnitude bound.
///
/// # Safety
/// Goal arrays must hold `rwa_system_dim(sys)` elements.
#[no_mangle]
pub unsafe extern "C" fn rwa_optimize(
    sys: *const RwaSystem,
    goal_re: *const f64,
    goal_im: *const f64,
    epsilon: f64,
    cap: f64,
    seed: u64,
    out: *mut *mut RwaSolution,
) -> RwaStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("output handle"));
        }
        let sys = system_ref(sys)?;
        let n = sys.system.dim();
        let goal = complex_vector(goal_re, goal_im, n)?;
        let mut initial = DVector::zeros(n);
        initial[0] = Complex64::new(1.0, 0.0);
        let problem = TransferProblem::new(sys.system.clone(), drives_of(sys)?.clone(), initial, goal, epsilon)?;
        let config = TransferConfig {
            amplitude_cap: (cap > 0.0).then_some(cap),
            seed,
            ..TransferConfig::default()
        };
        let solution = optimize_transfer(&problem, &config)?;
        *out = Box::into_raw(Box::new(RwaSolution { problem, solution }));
        Ok(())
    })
}

/// # Safety
/// `sol` must be null or a live handle from this library.
#[no_mangle]
pub unsafe extern "C" fn rwa_solution_free(sol: *mut RwaSolution) {
    if !sol.is_null() {
        drop(Box::from_raw(sol));
    }
}

/// Duration, RWA infidelity and field count of a solution.
///
/// # Safety
/// Output pointers may be null to skip them.
#[no_mangle]
pub unsafe extern "C" fn rwa_solution_summary(
    sol: *const RwaSolution,
    duration: *mut f64,
    rwa_infidelity: *mut f64,
    fields: *mut usize,
) -> RwaStatus {
    guard(|| {
        let s = solution_ref(sol)?;
        if let Some(d) = duration.as_mut() {
            *d = s.solution.duration;
        }
        if let Some(i) = rwa_infidelity.as_mut() {
            *i = s.solution.rwa_infidelity;
        }
        if let Some(f) = fields.as_mut() {
            *f = s.solution.amplitudes.len();
        }
        Ok(())
    })
}

/// Copies drive magnitudes and phases into arrays of length `len`.
///
/// # Safety
/// Arrays must hold `len` elements.
#[no_mangle]
pub unsafe extern "C" fn rwa_solution_parameters(
    sol: *const RwaSolution,
    amplitudes: *mut f64,
    phases: *mut f64,
    len: usize,
) -> RwaStatus {
    guard(|| {
        let s = solution_ref(sol)?;
        let f = s.solution.amplitudes.len();
        if len < f {
            return Err(Fail(RwaStatus::BufferTooSmall, format!("need {f} entries")));
        }
        slice_mut(amplitudes, len, "amplitudes")?[..f].copy_from_slice(&s.solution.amplitudes);
        slice_mut(phases, len, "phases")?[..f].copy_from_slice(&s.solution.phases);
        Ok(())
    })
}

/// Re-simulates the solution without the RWA and writes the infidelity.
///
/// # Safety
/// `infidelity` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rwa_solution_double_check(
    sol: *mut RwaSolution,
    tol: f64,
    infidelity: *mut f64,
) -> RwaStatus {
    guard(|| {
        let s = sol.as_mut().ok_or_else(|| null("solution handle"))?;
        if infidelity.is_null() {
            return Err(null("output"));
        }
        let options = ExactOptions {
            tol,
            ..Default::default()
        };
        s.solution = double_check(&s.problem, &s.solution, &options)?;
        *infidelity = s.solution.exact_infidelity.unwrap_or(f64::NAN);
        Ok(())
    })
}

/// Serializes the solution and its problem in the solution file format.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rwa_solution_to_json(sol: *const RwaSolution, out: *mut *mut c_char) -> RwaStatus {
    guard(|| {
        let s = solution_ref(sol)?;
        into_c_string(json(&SolutionFile::new(&s.problem, &s.solution, "optimized"))?, out)
    })
}
