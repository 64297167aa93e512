//! C ABI over the fracdiff solver.
//!
//! Every entry point returns an [`FdStatus`]. Handles are opaque and owned by
//! the caller until released with the matching `*_free`. Results are written
//! through out-pointers; on failure the message is kept per thread and can be
//! read with [`fd_last_error`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use fracdiff::config::RunConfig;
use fracdiff::laplace::laplace_coeffs;
use fracdiff::mild_solver::{solve, MildSolution, Model};
use fracdiff::specfun::{MLParams, MittagLeffler};
use fracdiff::Error;
use num_complex::Complex64;

/// Status codes shared by every function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FdStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Config = 3,
    NonContraction = 4,
    Numerical = 5,
    Io = 6,
    BufferTooSmall = 7,
    Panic = 8,
}

/// A configured problem: discretized operator, eigenbasis and time grid.
pub struct FdModel {
    config: RunConfig,
    model: Model,
}

/// A mild solution on the model's time grid.
pub struct FdSolution {
    sol: MildSolution,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(e: &Error) -> FdStatus {
    match e {
        Error::Config(_) => FdStatus::Config,
        Error::InvalidParameter(_) | Error::Domain(_) | Error::SignViolation { .. } => FdStatus::InvalidArgument,
        Error::NonContraction { .. } | Error::IterationCap { .. } => FdStatus::NonContraction,
        Error::Io(_) => FdStatus::Io,
        _ => FdStatus::Numerical,
    }
}

fn guard(f: impl FnOnce() -> Result<(), (FdStatus, String)>) -> FdStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error(String::new());
            FdStatus::Ok
        }
        Ok(Err((s, msg))) => {
            set_error(msg);
            s
        }
        Err(_) => {
            set_error("internal panic".into());
            FdStatus::Panic
        }
    }
}

fn lift<T>(r: fracdiff::Result<T>) -> Result<T, (FdStatus, String)> {
    r.map_err(|e| (status_of(&e), e.to_string()))
}

fn null(what: &str) -> (FdStatus, String) {
    (FdStatus::NullPointer, format!("{what} is null"))
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, (FdStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| (FdStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

unsafe fn fill(values: &[f64], out: *mut f64, len: usize) -> Result<(), (FdStatus, String)> {
    if out.is_null() {
        return Err(null("output buffer"));
    }
    if len < values.len() {
        return Err((FdStatus::BufferTooSmall, format!("buffer holds {len}, need {}", values.len())));
    }
    ptr::copy_nonoverlapping(values.as_ptr(), out, values.len());
    Ok(())
}

fn build(config: RunConfig) -> Result<Box<FdModel>, (FdStatus, String)> {
    let model = lift(Model::new(config.problem.clone(), config.m, config.n_modes))?;
    Ok(Box::new(FdModel { config, model }))
}

/// Copy the last error message of this thread into `buf` (NUL terminated,
/// truncated to `len`). Returns the full message length in bytes.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn fd_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            ptr::copy_nonoverlapping(msg.as_ptr() as *const c_char, buf, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// `E_{α,β}(z)` for complex `z = re + i im`.
///
/// # Safety
/// `out_re` and `out_im` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn fd_ml_eval(
    alpha: f64,
    beta: f64,
    re: f64,
    im: f64,
    out_re: *mut f64,
    out_im: *mut f64,
) -> FdStatus {
    guard(|| {
        if out_re.is_null() || out_im.is_null() {
            return Err(null("output"));
        }
        let ml = MittagLeffler::new(lift(MLParams::new(alpha, beta))?);
        let v = lift(ml.eval(Complex64::new(re, im)))?;
        *out_re = v.re;
        *out_im = v.im;
        Ok(())
    })
}

/// Build a model from a configuration file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn fd_model_from_file(path: *const c_char, out: *mut *mut FdModel) -> FdStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let path = text(path, "path")?;
        let m = build(lift(RunConfig::load(Path::new(path)))?)?;
        *out = Box::into_raw(m);
        Ok(())
    })
}

/// Build a model from configuration text in the same format as the files.
///
/// # Safety
/// `config` must be a NUL-terminated string and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn fd_model_from_str(config: *const c_char, out: *mut *mut FdModel) -> FdStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let m = build(lift(RunConfig::parse(text(config, "config")?))?)?;
        *out = Box::into_raw(m);
        Ok(())
    })
}

/// # Safety
/// `model` must be null or a handle from `fd_model_from_*` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn fd_model_free(model: *mut FdModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Number of retained modes.
///
/// # Safety
/// `model` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn fd_model_modes(model: *const FdModel) -> usize {
    model.as_ref().map_or(0, |m| m.model.modes())
}

/// Number of spatial nodes (intervals plus one).
///
/// # Safety
/// `model` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn fd_model_nodes(model: *const FdModel) -> usize {
    model.as_ref().map_or(0, |m| m.config.m + 1)
}

/// The first `fd_model_modes` eigenvalues in increasing order.
///
/// # Safety
/// `model` must be a live handle and `out` point to `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn fd_model_eigenvalues(model: *const FdModel, out: *mut f64, len: usize) -> FdStatus {
    guard(|| {
        let m = model.as_ref().ok_or_else(|| null("model"))?;
        fill(&m.model.basis.lambdas, out, len)
    })
}

/// Mode coefficients at time `t` by Laplace inversion (constant `q` only).
///
/// # Safety
/// `model` must be a live handle and `out` point to `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn fd_laplace_coeffs(model: *const FdModel, t: f64, out: *mut f64, len: usize) -> FdStatus {
    guard(|| {
        let m = model.as_ref().ok_or_else(|| null("model"))?;
        fill(&lift(laplace_coeffs(&m.model, t))?, out, len)
    })
}

/// Run the windowed Picard solver with the options of the configuration.
///
/// # Safety
/// `model` must be a live handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn fd_solve(model: *const FdModel, out: *mut *mut FdSolution) -> FdStatus {
    guard(|| {
        let m = model.as_ref().ok_or_else(|| null("model"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let grid = lift(m.config.time_grid())?;
        let sol = lift(solve(&m.model, &grid, m.config.windows, &m.config.solver))?;
        *out = Box::into_raw(Box::new(FdSolution { sol }));
        Ok(())
    })
}

/// # Safety
/// `sol` must be null or a handle from `fd_solve` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn fd_solution_free(sol: *mut FdSolution) {
    if !sol.is_null() {
        drop(Box::from_raw(sol));
    }
}

/// Number of time nodes, including `t = 0`.
///
/// # Safety
/// `sol` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn fd_solution_times_len(sol: *const FdSolution) -> usize {
    sol.as_ref().map_or(0, |s| s.sol.grid.len())
}

/// # Safety
/// `sol` must be a live handle and `out` point to `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn fd_solution_times(sol: *const FdSolution, out: *mut f64, len: usize) -> FdStatus {
    guard(|| {
        let s = sol.as_ref().ok_or_else(|| null("solution"))?;
        fill(&s.sol.grid.nodes, out, len)
    })
}

/// Mode coefficients at time node `k`.
///
/// # Safety
/// `sol` must be a live handle and `out` point to `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn fd_solution_coeffs(sol: *const FdSolution, k: usize, out: *mut f64, len: usize) -> FdStatus {
    guard(|| {
        let s = sol.as_ref().ok_or_else(|| null("solution"))?;
        if k >= s.sol.grid.len() {
            return Err((FdStatus::InvalidArgument, format!("time index {k} out of range")));
        }
        fill(&s.sol.at(k), out, len)
    })
}

/// `u(x_j, t_k)` at the spatial nodes.
///
/// # Safety
/// `sol` must be a live handle and `out` point to `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn fd_solution_field(sol: *const FdSolution, k: usize, out: *mut f64, len: usize) -> FdStatus {
    guard(|| {
        let s = sol.as_ref().ok_or_else(|| null("solution"))?;
        if k >= s.sol.grid.len() {
            return Err((FdStatus::InvalidArgument, format!("time index {k} out of range")));
        }
        fill(&s.sol.field_at(k), out, len)
    })
}
