//! C ABI over `fpr_core`.
//!
//! Handles are opaque pointers owned by the caller and released with the
//! matching `*_free` function. Every entry point returns an [`FprStatus`];
//! on failure the message is available from [`fpr_last_error`] on the same
//! thread. Strings returned through out-parameters are freed with
//! [`fpr_string_free`]. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use fpr_core::for_engine::{self, ForPolygon, SweepConfig};
use fpr_core::grid_model::{load_network, EquipmentCatalog, Network};
use fpr_core::lp::{self, LinearProgram, LpStatus};
use fpr_core::{cep, Error};

/// Result code of every call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FprStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    Io = 3,
    Schema = 4,
    Topology = 5,
    Catalog = 6,
    Invalid = 7,
    Unplannable = 8,
    Divergence = 9,
    Infeasible = 10,
    Internal = 11,
    Panic = 12,
}

impl From<&Error> for FprStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::Io { .. } => FprStatus::Io,
            Error::Schema { .. } | Error::Json(_) => FprStatus::Schema,
            Error::Topology(_) => FprStatus::Topology,
            Error::Catalog(_) => FprStatus::Catalog,
            Error::Invalid(_) => FprStatus::Invalid,
            Error::Unplannable { .. } => FprStatus::Unplannable,
            Error::Divergence(_) => FprStatus::Divergence,
            Error::Infeasible(_) => FprStatus::Infeasible,
            Error::Contract(_) => FprStatus::Internal,
        }
    }
}

/// Outcome of an LP solve, mirrors the core status.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FprLpStatus {
    Optimal = 0,
    Infeasible = 1,
    Unbounded = 2,
    Failed = 3,
}

/// Opaque grid model.
pub struct FprNetwork(Network);

/// Opaque feasible operation region.
pub struct FprPolygon(ForPolygon);

struct Failure(FprStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure((&e).into(), e.to_string())
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> FprStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            FprStatus::Ok
        }
        Ok(Err(Failure(code, msg))) => {
            set_error(msg);
            code
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            FprStatus::Panic
        }
    }
}

fn null(what: &str) -> Failure {
    Failure(FprStatus::NullArgument, format!("{what} is null"))
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(FprStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

unsafe fn out<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

fn c_string(s: String) -> Result<*mut c_char, Failure> {
    CString::new(s)
        .map(CString::into_raw)
        .map_err(|_| Failure(FprStatus::Internal, "string contains NUL".into()))
}

/// Message of the last failed call on this thread, or null after a success.
/// Valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn fpr_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn fpr_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn fpr_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Loads a grid JSON file resolved against an equipment catalog.
///
/// # Safety
/// Paths must be NUL-terminated; `out_net` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fpr_network_load(
    grid_path: *const c_char,
    catalog_path: *const c_char,
    out_net: *mut *mut FprNetwork,
) -> FprStatus {
    guard(|| {
        let slot = out(out_net, "out_net")?;
        let catalog = EquipmentCatalog::load(text(catalog_path, "catalog_path")?)?;
        let net = load_network(text(grid_path, "grid_path")?, &catalog)?;
        *slot = Box::into_raw(Box::new(FprNetwork(net)));
        Ok(())
    })
}

/// # Safety
/// `net` must come from [`fpr_network_load`] or be null.
#[no_mangle]
pub unsafe extern "C" fn fpr_network_free(net: *mut FprNetwork) {
    if !net.is_null() {
        drop(Box::from_raw(net));
    }
}

/// Number of buses in the grid.
///
/// # Safety
/// `net` must be a live handle; `out_count` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fpr_network_bus_count(
    net: *const FprNetwork,
    out_count: *mut usize,
) -> FprStatus {
    guard(|| {
        *out(out_count, "out_count")? = handle(net, "net")?.0.buses.len();
        Ok(())
    })
}

/// Feasible operation region at the PCC, swept over `n_directions` directions.
///
/// # Safety
/// `net` must be a live handle; `out_poly` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fpr_for_compute(
    net: *const FprNetwork,
    n_directions: usize,
    out_poly: *mut *mut FprPolygon,
) -> FprStatus {
    guard(|| {
        let slot = out(out_poly, "out_poly")?;
        let poly = for_engine::compute_for(
            &handle(net, "net")?.0,
            &SweepConfig::with_directions(n_directions),
        )?;
        *slot = Box::into_raw(Box::new(FprPolygon(poly)));
        Ok(())
    })
}

/// # Safety
/// `poly` must come from [`fpr_for_compute`] or be null.
#[no_mangle]
pub unsafe extern "C" fn fpr_polygon_free(poly: *mut FprPolygon) {
    if !poly.is_null() {
        drop(Box::from_raw(poly));
    }
}

/// Vertex count and enclosed area (MW x Mvar).
///
/// # Safety
/// `poly` must be a live handle; outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn fpr_polygon_info(
    poly: *const FprPolygon,
    out_vertices: *mut usize,
    out_area: *mut f64,
) -> FprStatus {
    guard(|| {
        let p = &handle(poly, "poly")?.0;
        *out(out_vertices, "out_vertices")? = p.vertices.len();
        *out(out_area, "out_area")? = p.area;
        Ok(())
    })
}

/// Copies up to `len` vertices into `p_mw` and `q_mvar`.
///
/// # Safety
/// Both buffers must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn fpr_polygon_vertices(
    poly: *const FprPolygon,
    p_mw: *mut f64,
    q_mvar: *mut f64,
    len: usize,
) -> FprStatus {
    guard(|| {
        let p = &handle(poly, "poly")?.0;
        if p_mw.is_null() || q_mvar.is_null() {
            return Err(null("vertex buffer"));
        }
        for (k, v) in p.vertices.iter().take(len).enumerate() {
            *p_mw.add(k) = v.p_mw;
            *q_mvar.add(k) = v.q_mvar;
        }
        Ok(())
    })
}

/// Region as JSON; free the result with [`fpr_string_free`].
///
/// # Safety
/// `poly` must be a live handle; `out_json` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fpr_polygon_to_json(
    poly: *const FprPolygon,
    out_json: *mut *mut c_char,
) -> FprStatus {
    guard(|| {
        let slot = out(out_json, "out_json")?;
        *slot = c_string(handle(poly, "poly")?.0.to_json()?)?;
        Ok(())
    })
}

/// Solves an LP given in LP text format.
///
/// # Safety
/// `lp_text` must be NUL-terminated; outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn fpr_lp_solve(
    lp_text: *const c_char,
    out_status: *mut FprLpStatus,
    out_objective: *mut f64,
) -> FprStatus {
    guard(|| {
        let status = out(out_status, "out_status")?;
        let objective = out(out_objective, "out_objective")?;
        let prog = LinearProgram::from_lp_text(text(lp_text, "lp_text")?)?;
        let sol = lp::solve(&prog)?;
        *status = match sol.status {
            LpStatus::Optimal => FprLpStatus::Optimal,
            LpStatus::Infeasible => FprLpStatus::Infeasible,
            LpStatus::Unbounded => FprLpStatus::Unbounded,
            LpStatus::Failed => FprLpStatus::Failed,
        };
        *objective = sol.objective;
        Ok(())
    })
}

/// Runs the A/B study of a capacity expansion model file and returns the
/// report as JSON; free it with [`fpr_string_free`].
///
/// # Safety
/// `model_path` must be NUL-terminated; `out_json` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fpr_cep_study(
    model_path: *const c_char,
    out_json: *mut *mut c_char,
) -> FprStatus {
    guard(|| {
        let slot = out(out_json, "out_json")?;
        let model = cep::CepModel::load(text(model_path, "model_path")?)?;
        let report = cep::run_study(&cep::scenario_a(&model), &cep::scenario_b(&model))?;
        let json = serde_json::to_string_pretty(&report).map_err(Error::from)?;
        *slot = c_string(json)?;
        Ok(())
    })
}
