//! C interface: configs and solutions are opaque handles, every call returns an
//! [`ObstaklStatus`], and the message of the last failure on the calling thread
//! is available from [`obstakl_last_error`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::ptr;

use obstakl::cli::{analyze, prepare, Level, RunConfig};
use obstakl::error::Error;

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObstaklStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Config = 3,
    Solver = 4,
    Analysis = 5,
    Io = 6,
    BufferTooSmall = 7,
    Panic = 8,
}

/// A validated run configuration.
pub struct ObstaklConfig {
    cfg: RunConfig,
    base: PathBuf,
}

/// A solved (or loaded) discrete solution on one refinement level.
pub struct ObstaklSolution {
    level: Level,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> ObstaklStatus {
    match e {
        _ if e.is_solver_failure() => ObstaklStatus::Solver,
        Error::Analysis(_) | Error::Precondition(_) => ObstaklStatus::Analysis,
        Error::Io(_) | Error::Csv(_) => ObstaklStatus::Io,
        _ => ObstaklStatus::Config,
    }
}

fn fail(status: ObstaklStatus, msg: impl Into<String>) -> ObstaklStatus {
    set_error(msg.into());
    status
}

fn guard(f: impl FnOnce() -> ObstaklStatus) -> ObstaklStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(_) => fail(ObstaklStatus::Panic, "internal panic"),
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, ObstaklStatus> {
    if p.is_null() {
        return Err(fail(ObstaklStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(ObstaklStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

fn finish_config(
    res: obstakl::error::Result<RunConfig>,
    base: PathBuf,
    out: *mut *mut ObstaklConfig,
) -> ObstaklStatus {
    let cfg = match res.and_then(|c| c.validate().map(|_| c)) {
        Ok(c) => c,
        Err(e) => return fail(status_of(&e), e.to_string()),
    };
    unsafe { *out = Box::into_raw(Box::new(ObstaklConfig { cfg, base })) };
    ObstaklStatus::Ok
}

/// Parses a JSON config. Relative paths inside it resolve against the working directory.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn obstakl_config_from_json(json: *const c_char, out: *mut *mut ObstaklConfig) -> ObstaklStatus {
    guard(|| {
        if out.is_null() {
            return fail(ObstaklStatus::NullPointer, "out is null");
        }
        let text = match str_arg(json, "json") {
            Ok(s) => s,
            Err(s) => return s,
        };
        finish_config(RunConfig::from_json(text), PathBuf::from("."), out)
    })
}

/// Reads a JSON config file. Relative paths inside it resolve against its directory.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn obstakl_config_from_file(path: *const c_char, out: *mut *mut ObstaklConfig) -> ObstaklStatus {
    guard(|| {
        if out.is_null() {
            return fail(ObstaklStatus::NullPointer, "out is null");
        }
        let p = match str_arg(path, "path") {
            Ok(s) => Path::new(s),
            Err(s) => return s,
        };
        let base = p.parent().map(Path::to_path_buf).unwrap_or_default();
        finish_config(RunConfig::from_file(p), base, out)
    })
}

/// Loads a built-in preset by name.
///
/// # Safety
/// `name` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn obstakl_config_from_preset(name: *const c_char, out: *mut *mut ObstaklConfig) -> ObstaklStatus {
    guard(|| {
        if out.is_null() {
            return fail(ObstaklStatus::NullPointer, "out is null");
        }
        let n = match str_arg(name, "name") {
            Ok(s) => s,
            Err(s) => return s,
        };
        finish_config(RunConfig::preset(n), PathBuf::from("."), out)
    })
}

/// # Safety
/// `cfg` must come from one of the `obstakl_config_from_*` calls, or be null.
#[no_mangle]
pub unsafe extern "C" fn obstakl_config_free(cfg: *mut ObstaklConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

/// Solves the configured problem on refinement level `level`.
///
/// # Safety
/// `cfg` must be a live config handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn obstakl_solve(
    cfg: *const ObstaklConfig,
    level: usize,
    out: *mut *mut ObstaklSolution,
) -> ObstaklStatus {
    guard(|| {
        if cfg.is_null() || out.is_null() {
            return fail(ObstaklStatus::NullPointer, "cfg or out is null");
        }
        let c = &*cfg;
        match prepare(&c.cfg, level, &c.base, false) {
            Ok(level) => {
                *out = Box::into_raw(Box::new(ObstaklSolution { level }));
                ObstaklStatus::Ok
            }
            Err(e) => fail(status_of(&e), e.to_string()),
        }
    })
}

/// # Safety
/// `sol` must come from [`obstakl_solve`], or be null.
#[no_mangle]
pub unsafe extern "C" fn obstakl_solution_free(sol: *mut ObstaklSolution) {
    if !sol.is_null() {
        drop(Box::from_raw(sol));
    }
}

/// Node count, spacing and dimension of the solution grid. Any output may be null.
///
/// # Safety
/// `sol` must be a live solution handle.
#[no_mangle]
pub unsafe extern "C" fn obstakl_solution_shape(
    sol: *const ObstaklSolution,
    nodes: *mut usize,
    h: *mut f64,
    dim: *mut usize,
) -> ObstaklStatus {
    guard(|| {
        if sol.is_null() {
            return fail(ObstaklStatus::NullPointer, "sol is null");
        }
        let g = (*sol).level.grid();
        if !nodes.is_null() {
            *nodes = g.node_count();
        }
        if !h.is_null() {
            *h = g.h(0);
        }
        if !dim.is_null() {
            *dim = g.dim();
        }
        ObstaklStatus::Ok
    })
}

/// Copies nodal values (x fastest) into `buf`, which must hold at least `len` doubles.
///
/// # Safety
/// `sol` must be a live solution handle and `buf` valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn obstakl_solution_values(sol: *const ObstaklSolution, buf: *mut f64, len: usize) -> ObstaklStatus {
    guard(|| {
        if sol.is_null() || buf.is_null() {
            return fail(ObstaklStatus::NullPointer, "sol or buf is null");
        }
        let v = (*sol).level.solution.u.values();
        if len < v.len() {
            return fail(
                ObstaklStatus::BufferTooSmall,
                format!("buffer holds {len} values, {} needed", v.len()),
            );
        }
        ptr::copy_nonoverlapping(v.as_ptr(), buf, v.len());
        ObstaklStatus::Ok
    })
}

/// Final solver residual and sup-norm error against the exact solution
/// (NaN when the problem has none). Either output may be null.
///
/// # Safety
/// `sol` must be a live solution handle.
#[no_mangle]
pub unsafe extern "C" fn obstakl_solution_errors(
    sol: *const ObstaklSolution,
    residual: *mut f64,
    error_inf: *mut f64,
) -> ObstaklStatus {
    guard(|| {
        if sol.is_null() {
            return fail(ObstaklStatus::NullPointer, "sol is null");
        }
        let l = &(*sol).level;
        if !residual.is_null() {
            *residual = l.solution.final_residual();
        }
        if !error_inf.is_null() {
            *error_inf = l.record.u_error_inf.unwrap_or(f64::NAN);
        }
        ObstaklStatus::Ok
    })
}

/// Runs the configured analyses and returns the report as a JSON string,
/// to be released with [`obstakl_string_free`]. Fails with
/// `OBSTAKL_STATUS_ANALYSIS` only when every analysis failed; the report is
/// still returned in that case.
///
/// # Safety
/// `cfg` and `sol` must be live handles and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn obstakl_analyze(
    cfg: *const ObstaklConfig,
    sol: *const ObstaklSolution,
    out: *mut *mut c_char,
) -> ObstaklStatus {
    guard(|| {
        if cfg.is_null() || sol.is_null() || out.is_null() {
            return fail(ObstaklStatus::NullPointer, "cfg, sol or out is null");
        }
        let report = analyze(&(*cfg).cfg, &(*sol).level);
        let json = match serde_json::to_string(&report) {
            Ok(s) => s,
            Err(e) => return fail(ObstaklStatus::Analysis, e.to_string()),
        };
        *out = CString::new(json).unwrap_or_default().into_raw();
        if report.all_failed() {
            let msgs: Vec<String> = report
                .errors
                .iter()
                .map(|f| format!("{}: {}", f.analysis, f.message))
                .collect();
            return fail(ObstaklStatus::Analysis, msgs.join("; "));
        }
        ObstaklStatus::Ok
    })
}

/// # Safety
/// `s` must come from this library, or be null.
#[no_mangle]
pub unsafe extern "C" fn obstakl_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Message of the last failed call on this thread, or null. Valid until the
/// next failing call on the same thread.
#[no_mangle]
pub extern "C" fn obstakl_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn obstakl_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn status_mapping() {
        assert_eq!(status_of(&Error::Config("x".into())), ObstaklStatus::Config);
        assert_eq!(status_of(&Error::Analysis("x".into())), ObstaklStatus::Analysis);
        let stall = Error::Stagnation {
            eps: 0.1,
            detail: String::new(),
        };
        assert_eq!(status_of(&stall), ObstaklStatus::Solver);
    }

    #[test]
    fn last_error_is_per_call() {
        set_error("first".into());
        let s = unsafe { CStr::from_ptr(obstakl_last_error()) };
        assert_eq!(s.to_str().unwrap(), "first");
    }
}
