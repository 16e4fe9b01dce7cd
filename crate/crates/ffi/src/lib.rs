//! C ABI over the `schrodingerizer` crate.
//!
//! Every entry point returns a [`SchroStatus`]; on failure the message is
//! kept per thread and read back with [`schro_last_error_message`]. Objects
//! that outlive a call are opaque handles released by their `_free`
//! function. Complex arrays are `SchroComplex` pairs, matrices row-major.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use schrodingerizer::dilation::{ladder_evolve, DilationVariant};
use schrodingerizer::evolve::{evolve_exact, Engine, EvolutionPlan};
use schrodingerizer::linalg::{c64, CMatrix, C64};
use schrodingerizer::ode::{
    assemble_schrodingerised, augment_inhomogeneous, default_pgrid, hermitian_split,
    HermitianSplit, LinearSystem,
};
use schrodingerizer::resources::{estimate, CostQuery};
use schrodingerizer::runner::{parse_config, run_experiment, validate, ExperimentConfig, RunError};
use schrodingerizer::warp::{estimate_domain, recover, RecoveryMethod};
use schrodingerizer::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SchroStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DimensionMismatch = 3,
    Numerical = 4,
    Unsupported = 5,
    Config = 6,
    Io = 7,
    BlowUp = 8,
    Panic = 9,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchroComplex {
    pub re: f64,
    pub im: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SchroRecovery {
    IntegrateP = 0,
    PointP = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SchroDilationVariant {
    ExactExp = 0,
    TheoremArccos = 1,
}

/// A parsed and validated experiment configuration.
pub struct SchroExperiment {
    config: ExperimentConfig,
}

/// A linear system `du/dt = Au + b` split into `A = H1 + iH2`.
pub struct SchroOdeSystem {
    split: HermitianSplit,
    u0: Vec<C64>,
    /// Size of the caller's system before augmentation.
    n: usize,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

type Failure = (SchroStatus, String);

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn core_failure(e: Error) -> Failure {
    let status = match e {
        Error::DimensionMismatch { .. } | Error::NotSquare { .. } => SchroStatus::DimensionMismatch,
        Error::Numerical(_) => SchroStatus::Numerical,
        Error::Unsupported(_) | Error::TooLarge { .. } => SchroStatus::Unsupported,
        _ => SchroStatus::InvalidArgument,
    };
    (status, e.to_string())
}

fn run_failure(e: RunError) -> Failure {
    let msg = e.to_string();
    match e {
        RunError::Config(_) => (SchroStatus::Config, msg),
        RunError::Core(inner) => (core_failure(inner).0, msg),
        RunError::BlowUp { .. } => (SchroStatus::BlowUp, msg),
        RunError::Io { .. } => (SchroStatus::Io, msg),
    }
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> SchroStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SchroStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(&msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            SchroStatus::Panic
        }
    }
}

fn null(what: &str) -> Failure {
    (SchroStatus::NullPointer, format!("{what} is null"))
}

fn invalid(msg: impl Into<String>) -> Failure {
    (SchroStatus::InvalidArgument, msg.into())
}

unsafe fn read_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| invalid(format!("{what} is not valid UTF-8")))
}

unsafe fn read_vec(p: *const SchroComplex, len: usize, what: &str) -> Result<Vec<C64>, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len)
        .iter()
        .map(|z| c64(z.re, z.im))
        .collect())
}

unsafe fn read_matrix(p: *const SchroComplex, n: usize, what: &str) -> Result<CMatrix, Failure> {
    let v = read_vec(p, n * n, what)?;
    Ok(CMatrix::from_row_slice(n, n, &v))
}

unsafe fn write_vec(p: *mut SchroComplex, v: &[C64], what: &str) -> Result<(), Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    let out = std::slice::from_raw_parts_mut(p, v.len());
    for (o, z) in out.iter_mut().zip(v) {
        *o = SchroComplex { re: z.re, im: z.im };
    }
    Ok(())
}

/// Message of the last failed call on this thread, or null. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn schro_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

#[no_mangle]
pub extern "C" fn schro_clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn schro_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Left edge `L = l0 − t·s_max` of a `p` domain that keeps the fastest
/// left-moving wave inside up to time `t`.
#[no_mangle]
pub extern "C" fn schro_estimate_domain(t: f64, s_max: f64, l0: f64) -> f64 {
    estimate_domain(t, s_max, l0)
}

/// Parses a JSON experiment config (or a run manifest) and validates it.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn schro_experiment_from_json(
    json: *const c_char,
    out: *mut *mut SchroExperiment,
) -> SchroStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let text = read_str(json, "json")?;
        let config = parse_config(text).map_err(run_failure)?;
        validate(&config).map_err(run_failure)?;
        *out = Box::into_raw(Box::new(SchroExperiment { config }));
        Ok(())
    })
}

/// Runs the experiment, writing its CSV files and manifest into `out_dir`
/// (or the config's `out_dir` when null). `n_files` receives the number of
/// files written and may be null.
///
/// # Safety
/// `exp` must come from [`schro_experiment_from_json`]; `out_dir` is null or
/// a NUL-terminated path.
#[no_mangle]
pub unsafe extern "C" fn schro_experiment_run(
    exp: *const SchroExperiment,
    out_dir: *const c_char,
    n_files: *mut usize,
) -> SchroStatus {
    guard(|| {
        let exp = exp.as_ref().ok_or_else(|| null("experiment"))?;
        let dir = if out_dir.is_null() {
            None
        } else {
            Some(Path::new(read_str(out_dir, "out_dir")?))
        };
        let report = run_experiment(&exp.config, dir).map_err(run_failure)?;
        if !n_files.is_null() {
            *n_files = report.files.len();
        }
        Ok(())
    })
}

/// # Safety
/// `exp` is null or a handle from [`schro_experiment_from_json`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn schro_experiment_free(exp: *mut SchroExperiment) {
    if !exp.is_null() {
        drop(Box::from_raw(exp));
    }
}

/// Builds `du/dt = Au + b` from an `n × n` row-major `a`, an optional `b`
/// (null for a homogeneous system) and `u0`. A nonzero `b` is absorbed by
/// augmenting the state with a constant trailing component.
///
/// # Safety
/// `a` holds `n·n` values, `b` (if not null) and `u0` hold `n`; `out` must
/// be writable.
#[no_mangle]
pub unsafe extern "C" fn schro_ode_new(
    n: usize,
    a: *const SchroComplex,
    b: *const SchroComplex,
    u0: *const SchroComplex,
    out: *mut *mut SchroOdeSystem,
) -> SchroStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        if n == 0 {
            return Err(invalid("system size must be positive"));
        }
        let a = read_matrix(a, n, "a")?;
        let b = if b.is_null() { None } else { Some(read_vec(b, n, "b")?) };
        let u0 = read_vec(u0, n, "u0")?;
        let sys = augment_inhomogeneous(&LinearSystem::new(a, b, u0).map_err(core_failure)?);
        let split = hermitian_split(&sys.a).map_err(core_failure)?;
        *out = Box::into_raw(Box::new(SchroOdeSystem {
            split,
            u0: sys.u0,
            n,
        }));
        Ok(())
    })
}

/// Size of the caller's system (before any augmentation).
///
/// # Safety
/// `sys` is null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn schro_ode_dimension(sys: *const SchroOdeSystem) -> usize {
    sys.as_ref().map_or(0, |s| s.n)
}

/// Largest eigenvalue of `H1 = (A + A†)/2`; positive values mean the lifted
/// wave moves right and need a `p*` beyond `λ·t`.
///
/// # Safety
/// `sys` is a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn schro_ode_lambda_max(sys: *const SchroOdeSystem, out: *mut f64) -> SchroStatus {
    guard(|| {
        let sys = sys.as_ref().ok_or_else(|| null("system"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = sys.split.lambda_max_h1;
        Ok(())
    })
}

/// Evolves the lifted system exactly to `t_final` on an `n_p`-point `p`
/// lattice ending at `right` (left edge and support from the spectral
/// radius of `H1`), then recovers `u(t_final)` into `out` (`n` values).
/// With [`SchroRecovery::PointP`] a `p_star` of `0` picks the default node.
///
/// # Safety
/// `sys` is a live handle; `out` holds `n` values.
#[no_mangle]
pub unsafe extern "C" fn schro_ode_evolve(
    sys: *const SchroOdeSystem,
    t_final: f64,
    n_p: usize,
    alpha_neg: f64,
    right: f64,
    recovery: SchroRecovery,
    p_star: f64,
    out: *mut SchroComplex,
) -> SchroStatus {
    guard(|| {
        let sys = sys.as_ref().ok_or_else(|| null("system"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let pgrid = default_pgrid(&sys.split, t_final, n_p, alpha_neg, right).map_err(core_failure)?;
        let lifted = assemble_schrodingerised(&sys.split, &pgrid, &sys.u0).map_err(core_failure)?;
        let plan = EvolutionPlan::new(Engine::ExactDiagonal, t_final, t_final, vec![]).map_err(core_failure)?;
        let tr = evolve_exact(&lifted, &plan).map_err(core_failure)?;
        let w = lifted.w0.with_values(tr.last().to_vec(), t_final);
        let method = match recovery {
            SchroRecovery::IntegrateP => RecoveryMethod::IntegrateP,
            SchroRecovery::PointP if p_star == 0.0 => RecoveryMethod::default_for(&pgrid),
            SchroRecovery::PointP => RecoveryMethod::PointP { p_star },
        };
        let u = recover(&w, method).map_err(core_failure)?;
        write_vec(out, &u[..sys.n], "out")
    })
}

/// # Safety
/// `sys` is null or a handle from [`schro_ode_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn schro_ode_free(sys: *mut SchroOdeSystem) {
    if !sys.is_null() {
        drop(Box::from_raw(sys));
    }
}

/// Runs `n_steps` steps of the parity-dilating ladder for `dψ/dt = (H1 +
/// iH2)ψ`. `out_top` receives the unnormalised success block (`n` values)
/// and `out_success` its probability `‖top‖²/‖ψ0‖²`.
///
/// # Safety
/// `h1`, `h2` hold `n·n` values, `psi0` and `out_top` hold `n`;
/// `out_success` must be writable.
#[no_mangle]
pub unsafe extern "C" fn schro_dilation_evolve(
    n: usize,
    h1: *const SchroComplex,
    h2: *const SchroComplex,
    dt: f64,
    n_steps: usize,
    psi0: *const SchroComplex,
    variant: SchroDilationVariant,
    out_top: *mut SchroComplex,
    out_success: *mut f64,
) -> SchroStatus {
    guard(|| {
        if out_success.is_null() {
            return Err(null("out_success"));
        }
        if n == 0 {
            return Err(invalid("system size must be positive"));
        }
        let h1 = read_matrix(h1, n, "h1")?;
        let h2 = read_matrix(h2, n, "h2")?;
        let psi0 = read_vec(psi0, n, "psi0")?;
        let variant = match variant {
            SchroDilationVariant::ExactExp => DilationVariant::ExactExp,
            SchroDilationVariant::TheoremArccos => DilationVariant::TheoremArccos,
        };
        let (top, p) = ladder_evolve(&h1, &h2, dt, n_steps, &psi0, variant).map_err(core_failure)?;
        write_vec(out_top, &top, "out_top")?;
        *out_success = p;
        Ok(())
    })
}

/// Evaluates a cost query given as JSON (same schema as the CLI). The
/// polylog factor is written as NaN when the query does not produce one;
/// `out_polylog` may be null.
///
/// # Safety
/// `query_json` is NUL-terminated; `out_leading` must be writable.
#[no_mangle]
pub unsafe extern "C" fn schro_estimate(
    query_json: *const c_char,
    out_leading: *mut f64,
    out_polylog: *mut f64,
) -> SchroStatus {
    guard(|| {
        if out_leading.is_null() {
            return Err(null("out_leading"));
        }
        let text = read_str(query_json, "query_json")?;
        let q: CostQuery =
            serde_json::from_str(text).map_err(|e| (SchroStatus::Config, e.to_string()))?;
        let e = estimate(&q).map_err(core_failure)?;
        *out_leading = e.leading;
        if !out_polylog.is_null() {
            *out_polylog = e.polylog.unwrap_or(f64::NAN);
        }
        Ok(())
    })
}
