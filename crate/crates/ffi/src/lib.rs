//! C ABI for oscillab.
//!
//! Objects are opaque handles created by `*_new`/`*_from_json` functions and
//! released by the matching `*_free`. Every call returns an [`OscStatus`];
//! on failure the message is available from [`osc_last_error`] on the same
//! thread. Panics never cross the boundary.
//!
//! Output strings are written into caller buffers. When the buffer is too
//! small the call returns `OSC_STATUS_BUFFER_TOO_SMALL` and stores the required
//! size (including the terminating NUL) in `*needed`.

use oscillab::dyadic::GridFunction;
use oscillab::metric::{doubling_constants, jn_ptr_norm, Ball, MetricSpace, SearchOptions, DEFAULT_D_GRID};
use oscillab::oscillations::{mean_oscillation_family, polynomial_oscillation_family, OscillationFamily};
use oscillab::{czmax, goodlambda, selfimprove, Error};
use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;

/// Result of every call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OscStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    ParseError = 3,
    Precondition = 4,
    Numerical = 5,
    Panic = 6,
    BufferTooSmall = 7,
}

/// A function sampled on the leaves of a dyadic grid.
pub struct OscGrid(GridFunction);

/// A local oscillation family (mean or polynomial projections).
pub struct OscFamily(Arc<dyn OscillationFamily>);

/// A finite metric measure space.
pub struct OscSpace(MetricSpace);

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(e: &Error) -> OscStatus {
    match e {
        Error::Json(_) => OscStatus::ParseError,
        Error::Precondition(_) => OscStatus::Precondition,
        Error::Numerical(_) => OscStatus::Numerical,
        _ => OscStatus::InvalidArgument,
    }
}

struct Fail(OscStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(OscStatus::NullPointer, format!("{what} is null"))
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> OscStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error(String::new());
            OscStatus::Ok
        }
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("internal panic: {msg}"));
            OscStatus::Panic
        }
    }
}

unsafe fn slice<'a, T>(ptr: *const T, len: usize, what: &str) -> Result<&'a [T], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if ptr.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(ptr, len))
}

unsafe fn str_arg<'a>(ptr: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if ptr.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(ptr)
        .to_str()
        .map_err(|_| Fail(OscStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

unsafe fn out<'a, T>(ptr: *mut T, what: &str) -> Result<&'a mut T, Fail> {
    ptr.as_mut().ok_or_else(|| null(what))
}

unsafe fn handle<'a, T>(ptr: *const T, what: &str) -> Result<&'a T, Fail> {
    ptr.as_ref().ok_or_else(|| null(what))
}

unsafe fn write_str(s: &str, buf: *mut c_char, len: usize, needed: *mut usize) -> Result<(), Fail> {
    let bytes = s.as_bytes();
    if !needed.is_null() {
        *needed = bytes.len() + 1;
    }
    if buf.is_null() || len < bytes.len() + 1 {
        return Err(Fail(
            OscStatus::BufferTooSmall,
            format!("buffer of {len} bytes, {} needed", bytes.len() + 1),
        ));
    }
    std::ptr::copy_nonoverlapping(bytes.as_ptr(), buf as *mut u8, bytes.len());
    *buf.add(bytes.len()) = 0;
    Ok(())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn osc_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Copies the message of the last failed call on this thread into `buf`.
/// The message is empty after a successful call.
///
/// # Safety
/// `buf` must point to `len` writable bytes (or be null with `len == 0`);
/// `needed` may be null.
#[no_mangle]
pub unsafe extern "C" fn osc_last_error(buf: *mut c_char, len: usize, needed: *mut usize) -> OscStatus {
    let msg = LAST_ERROR.with(|e| e.borrow().clone());
    // not routed through guard: that would clear the message
    match write_str(&msg, buf, len, needed) {
        Ok(()) => OscStatus::Ok,
        Err(Fail(s, _)) => s,
    }
}

// ---- grids ----

/// Grid function on the unit cube from `2^{dim·depth}` leaf values in
/// row-major order (first coordinate most significant).
///
/// # Safety
/// `values` must point to `len` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn osc_grid_new(
    dim: usize,
    depth: u32,
    values: *const f64,
    len: usize,
    out_grid: *mut *mut OscGrid,
) -> OscStatus {
    guard(|| {
        let o = out(out_grid, "out_grid")?;
        let v = slice(values, len, "values")?.to_vec();
        let g = GridFunction::on_unit_cube(dim, depth, v)?;
        *o = Box::into_raw(Box::new(OscGrid(g)));
        Ok(())
    })
}

/// Grid function from the JSON accepted by the command-line tool.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out_grid` must be writable.
#[no_mangle]
pub unsafe extern "C" fn osc_grid_from_json(json: *const c_char, out_grid: *mut *mut OscGrid) -> OscStatus {
    guard(|| {
        let o = out(out_grid, "out_grid")?;
        let g = GridFunction::from_json_str(str_arg(json, "json")?)?;
        *o = Box::into_raw(Box::new(OscGrid(g)));
        Ok(())
    })
}

/// # Safety
/// `grid` must come from this library and not be used afterwards. Null is a no-op.
#[no_mangle]
pub unsafe extern "C" fn osc_grid_free(grid: *mut OscGrid) {
    if !grid.is_null() {
        drop(Box::from_raw(grid));
    }
}

/// Number of leaves.
///
/// # Safety
/// `grid` must be a live handle; `out_len` must be writable.
#[no_mangle]
pub unsafe extern "C" fn osc_grid_len(grid: *const OscGrid, out_len: *mut usize) -> OscStatus {
    guard(|| {
        *out(out_len, "out_len")? = handle(grid, "grid")?.0.values().len();
        Ok(())
    })
}

// ---- oscillation families ----

/// The mean family `A_Q f = f_Q`.
///
/// # Safety
/// `out_family` must be writable.
#[no_mangle]
pub unsafe extern "C" fn osc_family_mean(out_family: *mut *mut OscFamily) -> OscStatus {
    guard(|| {
        *out(out_family, "out_family")? = Box::into_raw(Box::new(OscFamily(Arc::new(mean_oscillation_family()))));
        Ok(())
    })
}

/// Projections onto cell-averaged polynomials of total degree ≤ `degree`
/// for grids of the given dimension and depth.
///
/// # Safety
/// `out_family` must be writable.
#[no_mangle]
pub unsafe extern "C" fn osc_family_polynomial(
    dim: usize,
    depth: u32,
    degree: u32,
    out_family: *mut *mut OscFamily,
) -> OscStatus {
    guard(|| {
        let o = out(out_family, "out_family")?;
        let fam = polynomial_oscillation_family(dim, depth, degree)?;
        *o = Box::into_raw(Box::new(OscFamily(Arc::new(fam))));
        Ok(())
    })
}

/// # Safety
/// `family` must come from this library and not be used afterwards. Null is a no-op.
#[no_mangle]
pub unsafe extern "C" fn osc_family_free(family: *mut OscFamily) {
    if !family.is_null() {
        drop(Box::from_raw(family));
    }
}

// ---- dyadic computations ----

/// Dyadic maximal function of `|f|` on the whole grid, one value per leaf.
///
/// # Safety
/// `grid` must be live; `out_values` must hold `len` doubles, with `len`
/// equal to the leaf count.
#[no_mangle]
pub unsafe extern "C" fn osc_dyadic_maximal(grid: *const OscGrid, out_values: *mut f64, len: usize) -> OscStatus {
    guard(|| {
        let g = &handle(grid, "grid")?.0;
        let m = czmax::dyadic_maximal(g, &g.root())?;
        let n = m.values().len();
        if len < n {
            return Err(Fail(
                OscStatus::BufferTooSmall,
                format!("{n} values needed, buffer holds {len}"),
            ));
        }
        if out_values.is_null() {
            return Err(null("out_values"));
        }
        std::ptr::copy_nonoverlapping(m.values().as_ptr(), out_values, n);
        Ok(())
    })
}

/// `‖f‖_{JN_p}` on the whole grid. A null `family` means the mean family.
///
/// # Safety
/// `grid` must be live, `family` live or null, `out_value` writable.
#[no_mangle]
pub unsafe extern "C" fn osc_jn_norm(
    grid: *const OscGrid,
    family: *const OscFamily,
    p: f64,
    out_value: *mut f64,
) -> OscStatus {
    guard(|| {
        let g = &handle(grid, "grid")?.0;
        let o = out(out_value, "out_value")?;
        let mean = mean_oscillation_family();
        let fam: &dyn OscillationFamily = match family.as_ref() {
            Some(f) => f.0.as_ref(),
            None => &mean,
        };
        *o = selfimprove::jn_norm(g, p, &g.root(), fam)?;
        Ok(())
    })
}

/// Dyadic BMO norm on the whole grid.
///
/// # Safety
/// `grid` must be live; `out_value` writable.
#[no_mangle]
pub unsafe extern "C" fn osc_bmo_norm(grid: *const OscGrid, out_value: *mut f64) -> OscStatus {
    guard(|| {
        let g = &handle(grid, "grid")?.0;
        *out(out_value, "out_value")? = selfimprove::bmo_dyadic_norm(g, &g.root())?;
        Ok(())
    })
}

/// Smallest `ε` for which the weight is in the Gurov–Reshetnyak class
/// (mean family), and the exponent `p(ε)` (`+∞` when `ε = 0`).
///
/// # Safety
/// `grid` must be live; outputs writable.
#[no_mangle]
pub unsafe extern "C" fn osc_gr_epsilon(grid: *const OscGrid, out_epsilon: *mut f64, out_p: *mut f64) -> OscStatus {
    guard(|| {
        let g = &handle(grid, "grid")?.0;
        let e = out(out_epsilon, "out_epsilon")?;
        let p = out(out_p, "out_p")?;
        let eps = goodlambda::gr_epsilon(g, None)?.epsilon;
        *e = eps;
        *p = goodlambda::gr_exponent_classical(g.dim(), eps);
        Ok(())
    })
}

/// Level-set inequality for the John–Nirenberg decomposition of `f` at one
/// `(K, γ, λ)`. `out_pass` is 1 when it holds (or the point is skipped
/// because `λ < F_{Q0}` or `K ≤ Θ`), else 0. `out_ratio` is the observed
/// ratio, at most 1 when the inequality holds.
///
/// # Safety
/// `grid` must be live; outputs writable.
#[no_mangle]
pub unsafe extern "C" fn osc_levelset_jn(
    grid: *const OscGrid,
    k: f64,
    gamma: f64,
    lambda: f64,
    out_pass: *mut i32,
    out_ratio: *mut f64,
) -> OscStatus {
    guard(|| {
        let g = &handle(grid, "grid")?.0;
        let pass = out(out_pass, "out_pass")?;
        let ratio = out(out_ratio, "out_ratio")?;
        let d = goodlambda::Decomposition::jn(g.tree(), g.values())?;
        let r = goodlambda::verify_levelset_inequality(&d, &[k], &[gamma], &[lambda]);
        *pass = r.pass as i32;
        *ratio = r.points.first().map_or(0.0, |p| p.ratio);
        Ok(())
    })
}

// ---- metric spaces ----

/// Metric space from a row-major `n × n` distance matrix and `n` weights.
///
/// # Safety
/// `dist` must hold `n*n` doubles and `weights` `n`; `out_space` writable.
#[no_mangle]
pub unsafe extern "C" fn osc_space_new(
    dist: *const f64,
    weights: *const f64,
    n: usize,
    out_space: *mut *mut OscSpace,
) -> OscStatus {
    guard(|| {
        let o = out(out_space, "out_space")?;
        let nn = n
            .checked_mul(n)
            .ok_or_else(|| Fail(OscStatus::InvalidArgument, "n too large".into()))?;
        let d = slice(dist, nn, "dist")?;
        let w = slice(weights, n, "weights")?.to_vec();
        let rows = (0..n).map(|i| d[i * n..(i + 1) * n].to_vec()).collect();
        *o = Box::into_raw(Box::new(OscSpace(MetricSpace::new(rows, w)?)));
        Ok(())
    })
}

/// Metric space from the JSON accepted by the command-line tool.
///
/// # Safety
/// `json` must be NUL-terminated; `out_space` writable.
#[no_mangle]
pub unsafe extern "C" fn osc_space_from_json(json: *const c_char, out_space: *mut *mut OscSpace) -> OscStatus {
    guard(|| {
        let o = out(out_space, "out_space")?;
        let s = MetricSpace::from_json_str(str_arg(json, "json")?)?;
        *o = Box::into_raw(Box::new(OscSpace(s)));
        Ok(())
    })
}

/// # Safety
/// `space` must come from this library and not be used afterwards. Null is a no-op.
#[no_mangle]
pub unsafe extern "C" fn osc_space_free(space: *mut OscSpace) {
    if !space.is_null() {
        drop(Box::from_raw(space));
    }
}

/// Doubling profile `(c_μ, D)` chosen over the default `D` grid.
///
/// # Safety
/// `space` must be live; outputs writable.
#[no_mangle]
pub unsafe extern "C" fn osc_space_doubling(space: *const OscSpace, out_c: *mut f64, out_d: *mut f64) -> OscStatus {
    guard(|| {
        let s = &handle(space, "space")?.0;
        let c = out(out_c, "out_c")?;
        let d = out(out_d, "out_d")?;
        let prof = doubling_constants(s, &DEFAULT_D_GRID)?.profile;
        *c = prof.c_mu;
        *d = prof.dim;
        Ok(())
    })
}

/// `ρ`-oscillation John–Nirenberg norm of `f` on the ball `B(center, radius)`.
/// `out_exact` is 1 when the disjoint-family search finished, else 0 (the
/// value is then a lower bound).
///
/// # Safety
/// `space` must be live; `f` must hold as many doubles as the space has
/// points; outputs writable.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn osc_metric_jn_norm(
    space: *const OscSpace,
    f: *const f64,
    len: usize,
    p: f64,
    rho: f64,
    tau: f64,
    center: usize,
    radius: f64,
    out_value: *mut f64,
    out_exact: *mut i32,
) -> OscStatus {
    guard(|| {
        let s = &handle(space, "space")?.0;
        let vals = slice(f, len, "f")?;
        let v = out(out_value, "out_value")?;
        let e = out(out_exact, "out_exact")?;
        let r = jn_ptr_norm(
            s,
            vals,
            p,
            rho,
            tau,
            &Ball::new(center, radius),
            &SearchOptions::default(),
        )?;
        *v = r.value;
        *e = r.exact as i32;
        Ok(())
    })
}

// ---- command interface ----

/// Runs a command-line subcommand and writes its JSON report into `buf`.
/// `argv` holds the arguments after the program name, e.g.
/// `{"jn-norm", "--p", "2", "--input", "f.json"}`. `out_pass` receives 1
/// when every checked inequality held, else 0.
///
/// # Safety
/// `argv` must hold `argc` NUL-terminated strings; `buf` must point to `len`
/// writable bytes; `needed` and `out_pass` may be null.
#[no_mangle]
pub unsafe extern "C" fn osc_run(
    argv: *const *const c_char,
    argc: usize,
    buf: *mut c_char,
    len: usize,
    needed: *mut usize,
    out_pass: *mut i32,
) -> OscStatus {
    guard(|| {
        let ptrs = slice(argv, argc, "argv")?;
        let args = ptrs
            .iter()
            .enumerate()
            .map(|(i, &p)| str_arg(p, &format!("argv[{i}]")).map(str::to_string))
            .collect::<Result<Vec<_>, _>>()?;
        let outcome = oscillab::cli::execute_args(args)?;
        let text = serde_json::to_string(&outcome.report).map_err(Error::from)?;
        if let Some(p) = out_pass.as_mut() {
            *p = outcome.pass as i32;
        }
        write_str(&text, buf, len, needed)
    })
}
