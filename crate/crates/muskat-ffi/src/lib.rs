//! C ABI over `muskat`.
//!
//! Every fallible call returns a [`MuskatStatus`]; on failure the message is
//! available from [`muskat_last_error`] until the next call on the same thread.
//! Handles are heap objects owned by the caller and released with the matching
//! `*_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, c_int, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use muskat::certificates::MonitorSet;
use muskat::evolve::{self, SimError, StepperConfig};
use muskat::grid::{self, BoundaryMode, DiffScheme, Grid, InterfaceState, Params};
use muskat::modulus::{self, ModulusSpec};
use muskat::nonlocal;
use muskat::quadrature::QuadratureSpec;
use muskat::{cli, Error};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MuskatStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidConfig = 3,
    Numerical = 4,
    BlowUp = 5,
    Infeasible = 6,
    Io = 7,
    BufferTooSmall = 8,
    Panic = 9,
}

/// Sampled interface f(x, t) on a uniform grid.
pub struct MuskatState {
    inner: InterfaceState,
}

/// Modulus ω together with its rescaling ρ(h) = ω(Ch).
pub struct MuskatModulus {
    spec: ModulusSpec,
    binding: CString,
}

/// Slope statistics of a state.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct MuskatBounds {
    pub beta: f64,
    pub slope_sup: f64,
    pub lambda: f64,
    pub big_lambda: f64,
    pub sup_fx: f64,
    pub inf_fx: f64,
}

/// Margin decomposition at one ξ.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct MuskatMargin {
    pub xi: f64,
    pub m: f64,
    pub t1: f64,
    pub t2: f64,
    pub t3: f64,
    pub t4: f64,
    pub t5: f64,
    pub target: f64,
    pub total_margin: f64,
    pub quad_error: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn cstring(s: String) -> CString {
    CString::new(s.replace('\0', " ")).unwrap_or_default()
}

fn set_error(msg: String) {
    let c = cstring(msg);
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

struct Fail(MuskatStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::NonFinite(_) | Error::Quadrature { .. } | Error::OmegaRange { .. } => {
                MuskatStatus::Numerical
            }
            Error::Config(_) | Error::InvalidStepper(_) | Error::InvalidQuadrature(_) => {
                MuskatStatus::InvalidConfig
            }
            Error::Io(_) => MuskatStatus::Io,
            _ => MuskatStatus::InvalidArgument,
        };
        Fail(code, e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(MuskatStatus::NullPointer, format!("`{what}` is null"))
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> MuskatStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => MuskatStatus::Ok,
        Ok(Err(Fail(code, msg))) => {
            set_error(msg);
            code
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("internal panic: {msg}"));
            MuskatStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| {
        Fail(
            MuskatStatus::InvalidArgument,
            format!("`{what}` is not UTF-8"),
        )
    })
}

unsafe fn state_ref<'a>(p: *const MuskatState) -> Result<&'a InterfaceState, Fail> {
    p.as_ref().map(|s| &s.inner).ok_or_else(|| null("state"))
}

unsafe fn modulus_ref<'a>(p: *const MuskatModulus) -> Result<&'a MuskatModulus, Fail> {
    p.as_ref().ok_or_else(|| null("modulus"))
}

unsafe fn out_slice<'a>(p: *mut f64, len: usize, need: usize) -> Result<&'a mut [f64], Fail> {
    if p.is_null() {
        return Err(null("out"));
    }
    if len < need {
        return Err(Fail(
            MuskatStatus::BufferTooSmall,
            format!("buffer holds {len}, need {need}"),
        ));
    }
    Ok(std::slice::from_raw_parts_mut(p, need))
}

unsafe fn put<T>(out: *mut T, v: T) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null("out"));
    }
    out.write(v);
    Ok(())
}

fn boxed<T>(v: T) -> *mut T {
    Box::into_raw(Box::new(v))
}

fn mode(periodic: c_int) -> BoundaryMode {
    if periodic != 0 {
        BoundaryMode::Periodic
    } else {
        BoundaryMode::Compact
    }
}

/// Message of the last failed call on this thread, or NULL. Valid until the
/// next call into the library from the same thread.
#[no_mangle]
pub extern "C" fn muskat_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn muskat_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Sample a named scenario at t = 0 on the grid x_i = x0 + i·dx.
/// `params_json` is a JSON object of scenario parameters, or NULL for defaults.
///
/// # Safety
/// String arguments must be NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn muskat_state_from_scenario(
    name: *const c_char,
    params_json: *const c_char,
    n: usize,
    x0: f64,
    dx: f64,
    periodic: c_int,
    out: *mut *mut MuskatState,
) -> MuskatStatus {
    guard(|| {
        let name = str_arg(name, "name")?;
        let params: Params = if params_json.is_null() {
            Params::new()
        } else {
            serde_json::from_str(str_arg(params_json, "params_json")?)
                .map_err(|e| Fail(MuskatStatus::InvalidArgument, format!("params_json: {e}")))?
        };
        let g = Grid::new(n, dx, x0, mode(periodic))?;
        let s = grid::sample_scenario(name, &params, &g)?;
        put(out, boxed(MuskatState { inner: s }))
    })
}

/// State from explicit node values. Compact states take their far-field limits
/// from the end values.
///
/// # Safety
/// `f` must point to `n` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn muskat_state_new(
    f: *const f64,
    n: usize,
    x0: f64,
    dx: f64,
    periodic: c_int,
    t: f64,
    out: *mut *mut MuskatState,
) -> MuskatStatus {
    guard(|| {
        if f.is_null() {
            return Err(null("f"));
        }
        let vals = std::slice::from_raw_parts(f, n).to_vec();
        let g = Grid::new(n, dx, x0, mode(periodic))?;
        let s = InterfaceState::new(g, vals, t)?;
        put(out, boxed(MuskatState { inner: s }))
    })
}

/// Read a state CSV written by the `muskat` CLI.
///
/// # Safety
/// `path` must be NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn muskat_state_read(
    path: *const c_char,
    out: *mut *mut MuskatState,
) -> MuskatStatus {
    guard(|| {
        let path = str_arg(path, "path")?;
        let s = muskat::io::read_state_csv(Path::new(path))?;
        put(out, boxed(MuskatState { inner: s }))
    })
}

/// # Safety
/// `state` must come from this library or be NULL.
#[no_mangle]
pub unsafe extern "C" fn muskat_state_free(state: *mut MuskatState) {
    if !state.is_null() {
        drop(Box::from_raw(state));
    }
}

/// Number of nodes, or 0 for NULL.
///
/// # Safety
/// `state` must be a live handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn muskat_state_len(state: *const MuskatState) -> usize {
    state.as_ref().map_or(0, |s| s.inner.grid().n())
}

/// Time of the state, NaN for NULL.
///
/// # Safety
/// `state` must be a live handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn muskat_state_time(state: *const MuskatState) -> f64 {
    state.as_ref().map_or(f64::NAN, |s| s.inner.t())
}

/// Copy the node values into `out[0..n]`.
///
/// # Safety
/// `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn muskat_state_values(
    state: *const MuskatState,
    out: *mut f64,
    len: usize,
) -> MuskatStatus {
    guard(|| {
        let s = state_ref(state)?;
        out_slice(out, len, s.f().len())?.copy_from_slice(s.f());
        Ok(())
    })
}

/// Slope extrema, β = sup f′·(−inf f′) and the ellipticity constants.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn muskat_state_bounds(
    state: *const MuskatState,
    out: *mut MuskatBounds,
) -> MuskatStatus {
    guard(|| {
        let s = state_ref(state)?;
        let sl = grid::slope(s, DiffScheme::default_for(s.grid().mode()))?;
        let b = grid::beta_of(&sl);
        put(
            out,
            MuskatBounds {
                beta: b.beta,
                slope_sup: b.slope_sup,
                lambda: b.lambda,
                big_lambda: b.big_lambda,
                sup_fx: b.sup_fx,
                inf_fx: b.inf_fx,
            },
        )
    })
}

/// f_t at every node with the default quadrature.
///
/// # Safety
/// `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn muskat_rhs(
    state: *const MuskatState,
    out: *mut f64,
    len: usize,
) -> MuskatStatus {
    guard(|| {
        let s = state_ref(state)?;
        let r = nonlocal::muskat_rhs(s, &QuadratureSpec::default())?;
        out_slice(out, len, r.len())?.copy_from_slice(&r);
        Ok(())
    })
}

/// Evolve to `t_end` with the default RK4 stepper at the given CFL number
/// (≤ 0 selects the default) and return the final state.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn muskat_simulate(
    state: *const MuskatState,
    t_end: f64,
    cfl: f64,
    out: *mut *mut MuskatState,
) -> MuskatStatus {
    guard(|| {
        let s = state_ref(state)?;
        let mut cfg = StepperConfig::new(t_end);
        if cfl > 0.0 {
            cfg.cfl = cfl;
        }
        match evolve::simulate(s, &cfg, &QuadratureSpec::default(), &MonitorSet::none()) {
            Ok(traj) => put(
                out,
                boxed(MuskatState {
                    inner: traj.last().state.clone(),
                }),
            ),
            Err(SimError::Invalid(e)) => Err(e.into()),
            Err(SimError::BlowUp { t, reason, .. }) => Err(Fail(
                MuskatStatus::BlowUp,
                format!("blow-up at t = {t}: {reason}"),
            )),
        }
    })
}

/// Run `muskat simulate` on a config file; `exit_code` receives the CLI exit code.
///
/// # Safety
/// `config_path` must be NUL-terminated; `exit_code` must be writable.
#[no_mangle]
pub unsafe extern "C" fn muskat_simulate_config(
    config_path: *const c_char,
    exit_code: *mut c_int,
) -> MuskatStatus {
    guard(|| {
        let p = str_arg(config_path, "config_path")?;
        put(exit_code, cli::cmd_simulate(Path::new(p)))
    })
}

/// Run `muskat certify-modulus` on a config file; `exit_code` receives the CLI exit code.
///
/// # Safety
/// `config_path` must be NUL-terminated; `exit_code` must be writable.
#[no_mangle]
pub unsafe extern "C" fn muskat_certify_config(
    config_path: *const c_char,
    exit_code: *mut c_int,
) -> MuskatStatus {
    guard(|| {
        let p = str_arg(config_path, "config_path")?;
        put(exit_code, cli::cmd_certify_modulus(Path::new(p)))
    })
}

fn with_rho(spec: ModulusSpec) -> Result<ModulusSpec, Fail> {
    if spec.rescale.is_some() {
        return Ok(spec);
    }
    Ok(modulus::rho_from_omega(&spec)?)
}

/// Search (δ, γ) for the Kiselev modulus. Returns `Infeasible` when no pair passes;
/// the reason is in the last error.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn muskat_modulus_search(
    a: f64,
    lambda: f64,
    big_lambda: f64,
    slope_sup: f64,
    out: *mut *mut MuskatModulus,
) -> MuskatStatus {
    guard(|| {
        let rep = modulus::feasibility_search(a, lambda, big_lambda, slope_sup)?;
        let spec = rep.spec.ok_or_else(|| {
            Fail(
                MuskatStatus::Infeasible,
                format!("no feasible (δ, γ): {}", rep.binding),
            )
        })?;
        put(
            out,
            boxed(MuskatModulus {
                spec: with_rho(spec)?,
                binding: cstring(rep.binding),
            }),
        )
    })
}

/// Kiselev modulus with fixed δ and γ.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn muskat_modulus_new(
    delta: f64,
    gamma: f64,
    a: f64,
    lambda: f64,
    big_lambda: f64,
    slope_sup: f64,
    out: *mut *mut MuskatModulus,
) -> MuskatStatus {
    guard(|| {
        let spec = ModulusSpec::kiselev(delta, gamma, a, lambda, big_lambda, slope_sup);
        spec.validate()?;
        put(
            out,
            boxed(MuskatModulus {
                spec: with_rho(spec)?,
                binding: CString::default(),
            }),
        )
    })
}

/// # Safety
/// `m` must come from this library or be NULL.
#[no_mangle]
pub unsafe extern "C" fn muskat_modulus_free(m: *mut MuskatModulus) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// δ, γ and the rescaling constant C (infinite in the extreme regime).
/// Any output pointer may be NULL.
///
/// # Safety
/// Non-null outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn muskat_modulus_params(
    m: *const MuskatModulus,
    delta: *mut f64,
    gamma: *mut f64,
    c: *mut f64,
) -> MuskatStatus {
    guard(|| {
        let m = modulus_ref(m)?;
        for (p, v) in [
            (delta, m.spec.delta),
            (gamma, m.spec.gamma),
            (c, m.spec.c()),
        ] {
            if !p.is_null() {
                p.write(v);
            }
        }
        Ok(())
    })
}

/// Name of the constraint that bounds γ, empty for fixed moduli. Owned by the
/// handle.
///
/// # Safety
/// `m` must be a live handle. The returned pointer is valid until `m` is freed.
#[no_mangle]
pub unsafe extern "C" fn muskat_modulus_binding(
    m: *const MuskatModulus,
    out: *mut *const c_char,
) -> MuskatStatus {
    guard(|| put(out, modulus_ref(m)?.binding.as_ptr()))
}

/// ω(ξ) for ξ ≥ 0.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn muskat_omega(
    m: *const MuskatModulus,
    xi: f64,
    out: *mut f64,
) -> MuskatStatus {
    guard(|| {
        let m = modulus_ref(m)?;
        put(out, modulus::omega(&m.spec, xi)?)
    })
}

/// ρ(h) = ω(Ch) for h ≥ 0.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn muskat_rho(
    m: *const MuskatModulus,
    h: f64,
    out: *mut f64,
) -> MuskatStatus {
    guard(|| {
        let m = modulus_ref(m)?;
        if h.is_nan() || h < 0.0 {
            return Err(Fail(
                MuskatStatus::InvalidArgument,
                format!("h must be ≥ 0, got {h}"),
            ));
        }
        put(out, m.spec.rho(h))
    })
}

/// Margin decomposition of the modulus inequality at ξ.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn muskat_modulus_margin(
    m: *const MuskatModulus,
    xi: f64,
    out: *mut MuskatMargin,
) -> MuskatStatus {
    guard(|| {
        let m = modulus_ref(m)?;
        let b = modulus::margin_at(&m.spec, xi)?;
        put(
            out,
            MuskatMargin {
                xi: b.xi,
                m: b.m,
                t1: b.t1,
                t2: b.t2,
                t3: b.t3,
                t4: b.t4,
                t5: b.t5,
                target: b.target,
                total_margin: b.total_margin,
                quad_error: b.quad_error,
            },
        )
    })
}
