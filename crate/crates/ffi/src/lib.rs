//! C interface to the transport solver.
//!
//! Every function returns a [`CsdaStatus`]. On failure the message is kept per
//! thread and can be read with [`csda_last_error`]. Handles are opaque and must
//! be released with their `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use csda_transport::angular::hg_phase;
use csda_transport::benchmark::{solve, Setup, Solved};
use csda_transport::config::{parse_config, ExperimentSpec, RunConfig};
use csda_transport::physics::{bk_stopping, BraggKleemanModel};
use csda_transport::run::execute;
use csda_transport::Error;

/// Result codes of the C interface.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CsdaStatus {
    Ok = 0,
    /// A null pointer, bad UTF-8 or an undersized buffer.
    InvalidArgument = 1,
    /// Rejected configuration or physical input.
    InvalidInput = 2,
    /// The solve diverged or produced non-finite values.
    Numerical = 3,
    /// File system or CSV failure.
    Io = 4,
    /// The handle is in the wrong state for the call.
    State = 5,
    /// A Rust panic was caught at the boundary.
    Panic = 6,
}

/// Parsed run configuration.
pub struct CsdaConfig {
    inner: RunConfig,
}

/// A single-species problem and, once solved, its solution.
pub struct CsdaProblem {
    setup: Setup,
    solved: Option<Solved>,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> CsdaStatus {
    match e.exit_code() {
        1 => CsdaStatus::InvalidInput,
        2 => CsdaStatus::Numerical,
        _ => CsdaStatus::Io,
    }
}

fn fail(status: CsdaStatus, msg: impl Into<String>) -> CsdaStatus {
    set_error(msg.into());
    status
}

fn guard(f: impl FnOnce() -> Result<(), CsdaStatus>) -> CsdaStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => CsdaStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => fail(CsdaStatus::Panic, "internal panic"),
    }
}

fn lib<T>(r: csda_transport::Result<T>) -> Result<T, CsdaStatus> {
    r.map_err(|e| fail(status_of(&e), e.to_string()))
}

fn arg<'a, T>(p: *const T, name: &str) -> Result<&'a T, CsdaStatus> {
    // SAFETY: callers pass either null or a pointer obtained from this library.
    unsafe { p.as_ref() }
        .ok_or_else(|| fail(CsdaStatus::InvalidArgument, format!("`{name}` is null")))
}

fn arg_mut<'a, T>(p: *mut T, name: &str) -> Result<&'a mut T, CsdaStatus> {
    // SAFETY: as for `arg`, and the caller holds no other reference.
    unsafe { p.as_mut() }
        .ok_or_else(|| fail(CsdaStatus::InvalidArgument, format!("`{name}` is null")))
}

fn out<T>(p: *mut T, value: T, name: &str) -> Result<(), CsdaStatus> {
    if p.is_null() {
        return Err(fail(
            CsdaStatus::InvalidArgument,
            format!("`{name}` is null"),
        ));
    }
    // SAFETY: non-null and points to writable storage per the contract.
    unsafe { p.write(value) };
    Ok(())
}

fn c_str<'a>(p: *const c_char, name: &str) -> Result<&'a str, CsdaStatus> {
    if p.is_null() {
        return Err(fail(
            CsdaStatus::InvalidArgument,
            format!("`{name}` is null"),
        ));
    }
    // SAFETY: non-null, NUL-terminated per the contract.
    unsafe { CStr::from_ptr(p) }.to_str().map_err(|_| {
        fail(
            CsdaStatus::InvalidArgument,
            format!("`{name}` is not UTF-8"),
        )
    })
}

/// Message of the last failed call on this thread, or null. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn csda_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn csda_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Bragg-Kleeman stopping power `S(E) = E^(1-p) / (alpha p)`.
#[no_mangle]
pub extern "C" fn csda_bk_stopping(
    alpha: f64,
    p: f64,
    energy: f64,
    result: *mut f64,
) -> CsdaStatus {
    guard(|| {
        let model = lib(BraggKleemanModel::new(alpha, p))?;
        let s = lib(bk_stopping(&model, energy))?;
        out(result, s, "result")
    })
}

/// Henyey-Greenstein phase function on the circle.
#[no_mangle]
pub extern "C" fn csda_hg_phase(gamma: f64, theta: f64, result: *mut f64) -> CsdaStatus {
    guard(|| out(result, lib(hg_phase(gamma, theta))?, "result"))
}

/// Parse and validate a TOML configuration file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `config` writable.
#[no_mangle]
pub unsafe extern "C" fn csda_config_from_file(
    path: *const c_char,
    config: *mut *mut CsdaConfig,
) -> CsdaStatus {
    guard(|| {
        let path = c_str(path, "path")?;
        let inner = lib(parse_config(Path::new(path)))?;
        out(
            config,
            Box::into_raw(Box::new(CsdaConfig { inner })),
            "config",
        )
    })
}

/// Release a configuration. Null is ignored.
///
/// # Safety
/// `config` must come from [`csda_config_from_file`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn csda_config_free(config: *mut CsdaConfig) {
    if !config.is_null() {
        drop(Box::from_raw(config));
    }
}

/// Run the configured study. `out_dir` overrides the output directory when
/// non-null; `threads` overrides the worker count when positive.
///
/// # Safety
/// `config` must be a live handle and `out_dir` null or NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn csda_run(
    config: *const CsdaConfig,
    out_dir: *const c_char,
    threads: usize,
) -> CsdaStatus {
    guard(|| {
        let mut cfg = arg(config, "config")?.inner.clone();
        if !out_dir.is_null() {
            cfg.out_dir = c_str(out_dir, "out_dir")?.into();
        }
        if threads > 0 {
            cfg.threads = Some(threads);
        }
        lib(execute(&cfg)).map(|_| ())
    })
}

/// Build a problem from a single-species configuration.
///
/// # Safety
/// `config` must be a live handle and `problem` writable.
#[no_mangle]
pub unsafe extern "C" fn csda_problem_new(
    config: *const CsdaConfig,
    problem: *mut *mut CsdaProblem,
) -> CsdaStatus {
    guard(|| {
        let cfg = arg(config, "config")?;
        let setup = match &cfg.inner.spec {
            ExperimentSpec::Study(s) => s.setup.clone(),
            ExperimentSpec::Carbon(_) => {
                return Err(fail(
                    CsdaStatus::InvalidInput,
                    "carbon configurations run only through csda_run",
                ))
            }
        };
        out(
            problem,
            Box::into_raw(Box::new(CsdaProblem {
                setup,
                solved: None,
            })),
            "problem",
        )
    })
}

/// Solve the problem by source iteration.
///
/// # Safety
/// `problem` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn csda_problem_solve(problem: *mut CsdaProblem) -> CsdaStatus {
    guard(|| {
        let p = arg_mut(problem, "problem")?;
        p.solved = Some(lib(solve(&p.setup))?);
        Ok(())
    })
}

fn solved<'a>(problem: *const CsdaProblem) -> Result<&'a Solved, CsdaStatus> {
    arg(problem, "problem")?
        .solved
        .as_ref()
        .ok_or_else(|| fail(CsdaStatus::State, "problem has not been solved"))
}

/// Spatial dimensions of the dose array.
///
/// # Safety
/// `problem` must be a live handle, `nx` and `ny` writable.
#[no_mangle]
pub unsafe extern "C" fn csda_problem_dose_dims(
    problem: *const CsdaProblem,
    nx: *mut usize,
    ny: *mut usize,
) -> CsdaStatus {
    guard(|| {
        let s = solved(problem)?;
        out(nx, s.dose.nx(), "nx")?;
        out(ny, s.dose.ny(), "ny")
    })
}

/// Copy the dose into `buffer` in x-major order, `buffer[k * ny + l]`.
///
/// # Safety
/// `buffer` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn csda_problem_dose(
    problem: *const CsdaProblem,
    buffer: *mut f64,
    len: usize,
) -> CsdaStatus {
    guard(|| {
        let s = solved(problem)?;
        let v = &s.dose.values;
        if buffer.is_null() || len < v.len() {
            return Err(fail(
                CsdaStatus::InvalidArgument,
                format!("dose buffer needs {} entries, got {len}", v.len()),
            ));
        }
        std::slice::from_raw_parts_mut(buffer, v.len()).copy_from_slice(v);
        Ok(())
    })
}

/// Number of source iterations performed and whether the tolerance was met.
///
/// # Safety
/// `problem` must be a live handle, `iterations` and `converged` writable.
#[no_mangle]
pub unsafe extern "C" fn csda_problem_iterations(
    problem: *const CsdaProblem,
    iterations: *mut usize,
    converged: *mut bool,
) -> CsdaStatus {
    guard(|| {
        let s = solved(problem)?;
        out(iterations, s.report.iterations(), "iterations")?;
        out(converged, s.report.converged, "converged")
    })
}

/// Release a problem. Null is ignored.
///
/// # Safety
/// `problem` must come from [`csda_problem_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn csda_problem_free(problem: *mut CsdaProblem) {
    if !problem.is_null() {
        drop(Box::from_raw(problem));
    }
}
