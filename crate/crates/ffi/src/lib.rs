//! C ABI over `fot-core`.
//!
//! A problem handle bundles the forward model, measurement data and energy
//! parameters described by a run configuration. Every call returns a
//! [`FotStatus`]; on failure [`fot_last_error`] describes the cause. Nodal
//! arrays use the grid's row-major order (axis 0 fastest); complex traces
//! are interleaved `re, im` pairs in the node order of the measurement set.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use fot_core::adjoint::ReducedProblem;
use fot_core::cli::RunInputs;
use fot_core::functionals::{energy_terms, EnergyParams, MeasurementData};
use fot_core::grid::ScalarField;
use fot_core::robin::ForwardModel;
use fot_core::Error;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FotStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Config = 3,
    Solver = 4,
    Io = 5,
    Panic = 6,
}

/// Opaque problem handle.
pub struct FotProblem {
    model: ForwardModel,
    data: MeasurementData,
    params: EnergyParams,
    xi_true: Option<ScalarField>,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> FotStatus {
    match e {
        _ if e.is_solver_failure() => FotStatus::Solver,
        Error::Io(_) => FotStatus::Io,
        Error::Config(_) | Error::Parse { .. } => FotStatus::Config,
        _ => FotStatus::InvalidArgument,
    }
}

fn guard(f: impl FnOnce() -> Result<(), (FotStatus, String)>) -> FotStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => FotStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            FotStatus::Panic
        }
    }
}

fn core(e: Error) -> (FotStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (FotStatus, String) {
    (FotStatus::NullPointer, format!("`{what}` is null"))
}

fn invalid(msg: String) -> (FotStatus, String) {
    (FotStatus::InvalidArgument, msg)
}

unsafe fn handle<'a>(p: *const FotProblem) -> Result<&'a FotProblem, (FotStatus, String)> {
    p.as_ref().ok_or_else(|| null("problem"))
}

unsafe fn write_out<T>(out: *mut T, value: T, what: &str) -> Result<(), (FotStatus, String)> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(value);
    Ok(())
}

unsafe fn read_xi(p: &FotProblem, xi: *const f64, len: usize) -> Result<ScalarField, (FotStatus, String)> {
    if xi.is_null() {
        return Err(null("xi"));
    }
    let n = p.model.grid.num_nodes();
    if len != n {
        return Err(invalid(format!("xi has {len} entries, grid has {n} nodes")));
    }
    let values = std::slice::from_raw_parts(xi, len).to_vec();
    let box_m = p.params.box_m;
    if values.iter().any(|v| !(0.0..=box_m).contains(v)) {
        return Err(invalid(format!("xi must lie in [0, {box_m}]")));
    }
    Ok(ScalarField::new(values))
}

unsafe fn out_slice<'a>(out: *mut f64, len: usize, want: usize, what: &str) -> Result<&'a mut [f64], (FotStatus, String)> {
    if out.is_null() {
        return Err(null(what));
    }
    if len != want {
        return Err(invalid(format!("`{what}` has room for {len} values, {want} needed")));
    }
    Ok(std::slice::from_raw_parts_mut(out, len))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn fot_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread, or NULL. The pointer
/// stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn fot_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |c| c.as_ptr()))
}

/// Loads a run configuration and builds the forward model and data
/// (synthetic from the configured phantom, or from trace files). The
/// energy parameters use the first exponent of the configured schedule.
///
/// # Safety
/// `config_path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fot_problem_load(config_path: *const c_char, out: *mut *mut FotProblem) -> FotStatus {
    guard(|| {
        if config_path.is_null() {
            return Err(null("config_path"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let path = CStr::from_ptr(config_path)
            .to_str()
            .map_err(|_| invalid("config path is not UTF-8".into()))?;
        let inputs = RunInputs::load(Path::new(path)).map_err(core)?;
        let model = inputs.model_on(&inputs.setup.grid).map_err(core)?;
        let (data, xi_true) = inputs.data(&model).map_err(core)?;
        let problem = FotProblem {
            model,
            data,
            params: inputs.setup.params,
            xi_true,
        };
        out.write(Box::into_raw(Box::new(problem)));
        Ok(())
    })
}

/// Releases a handle from [`fot_problem_load`]; NULL is ignored.
///
/// # Safety
/// `problem` must be NULL or a live handle, and is invalid afterwards.
#[no_mangle]
pub unsafe extern "C" fn fot_problem_free(problem: *mut FotProblem) {
    if !problem.is_null() {
        drop(Box::from_raw(problem));
    }
}

/// # Safety
/// `problem` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn fot_problem_num_nodes(problem: *const FotProblem, out: *mut usize) -> FotStatus {
    guard(|| write_out(out, handle(problem)?.model.grid.num_nodes(), "out"))
}

/// # Safety
/// `problem` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn fot_problem_num_sources(problem: *const FotProblem, out: *mut usize) -> FotStatus {
    guard(|| write_out(out, handle(problem)?.model.num_sources(), "out"))
}

/// Number of measurement nodes of `source`.
///
/// # Safety
/// `problem` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn fot_problem_trace_len(problem: *const FotProblem, source: usize, out: *mut usize) -> FotStatus {
    guard(|| {
        let p = handle(problem)?;
        let t = p.data.traces.get(source).ok_or_else(|| invalid(format!("no source {source}")))?;
        write_out(out, t.nodes.len(), "out")
    })
}

/// Copies the configured phantom (synthetic-data runs only).
///
/// # Safety
/// `out` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn fot_problem_phantom(problem: *const FotProblem, out: *mut f64, len: usize) -> FotStatus {
    guard(|| {
        let p = handle(problem)?;
        let xi = p.xi_true.as_ref().ok_or_else(|| invalid("problem uses measured data; no phantom".into()))?;
        out_slice(out, len, xi.len(), "out")?.copy_from_slice(&xi.values);
        Ok(())
    })
}

/// Copies the measured traces of `source` (`2 * trace_len` values).
///
/// # Safety
/// `out` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn fot_problem_data(problem: *const FotProblem, source: usize, out: *mut f64, len: usize) -> FotStatus {
    guard(|| {
        let p = handle(problem)?;
        let t = p.data.traces.get(source).ok_or_else(|| invalid(format!("no source {source}")))?;
        let dst = out_slice(out, len, 2 * t.values.len(), "out")?;
        for (d, v) in dst.chunks_exact_mut(2).zip(&t.values) {
            d.copy_from_slice(v);
        }
        Ok(())
    })
}

/// Emission traces of the forward solution at `xi` for `source`.
///
/// # Safety
/// `xi` must point to `xi_len` doubles and `out` to `out_len` writable ones.
#[no_mangle]
pub unsafe extern "C" fn fot_forward_trace(
    problem: *const FotProblem,
    xi: *const f64,
    xi_len: usize,
    source: usize,
    out: *mut f64,
    out_len: usize,
) -> FotStatus {
    guard(|| {
        let p = handle(problem)?;
        let xi = read_xi(p, xi, xi_len)?;
        if source >= p.model.num_sources() {
            return Err(invalid(format!("no source {source}")));
        }
        let state = p.model.forward(&xi).map_err(core)?;
        let t = &state.traces[source];
        let dst = out_slice(out, out_len, 2 * t.values.len(), "out")?;
        for (d, v) in dst.chunks_exact_mut(2).zip(&t.values) {
            d.copy_from_slice(v);
        }
        Ok(())
    })
}

/// Energy `E_p(xi)`; pass `INFINITY` as `p` for `E_inf`.
///
/// # Safety
/// `xi` must point to `xi_len` doubles and `out` be writable.
#[no_mangle]
pub unsafe extern "C" fn fot_energy(problem: *const FotProblem, xi: *const f64, xi_len: usize, p: f64, out: *mut f64) -> FotStatus {
    guard(|| {
        let h = handle(problem)?;
        let xi = read_xi(h, xi, xi_len)?;
        let params = h.params.with_p(p);
        let traces = h.model.forward(&xi).map_err(core)?.traces;
        let e = energy_terms(&h.model.grid, &traces, &xi, &h.data, &params).map_err(core)?;
        write_out(out, e.total(), "out")
    })
}

/// Reduced gradient of `E_p` at `xi` (finite `p`). `energy` may be NULL.
///
/// # Safety
/// `xi` must point to `xi_len` doubles, `gradient` to `gradient_len`
/// writable doubles, and `energy` must be NULL or writable.
#[no_mangle]
pub unsafe extern "C" fn fot_gradient(
    problem: *const FotProblem,
    xi: *const f64,
    xi_len: usize,
    p: f64,
    gradient: *mut f64,
    gradient_len: usize,
    energy: *mut f64,
) -> FotStatus {
    guard(|| {
        let h = handle(problem)?;
        let xi = read_xi(h, xi, xi_len)?;
        let dst = out_slice(gradient, gradient_len, xi_len, "gradient")?;
        let reduced = ReducedProblem::new(&h.model, &h.data, h.params.with_p(p)).map_err(core)?;
        let eval = reduced.evaluate(&xi).map_err(core)?;
        dst.copy_from_slice(&eval.gradient.values);
        if !energy.is_null() {
            energy.write(eval.lin.value());
        }
        Ok(())
    })
}
