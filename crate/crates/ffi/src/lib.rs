//! C ABI for `fk_ground`.
//!
//! Objects cross the boundary as opaque handles created by `fk_*_load`,
//! `fk_*_from_toml` or `fk_hull_solve` and released by the matching
//! `fk_*_free`. Every fallible call returns an [`FkStatus`]; on failure the
//! message is kept per thread and read back with [`fk_last_error_message`].
//! Panics are caught and reported as [`FkStatus::Panic`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::sync::Arc;

use fk_ground::error::Error;
use fk_ground::foliation::Generator;
use fk_ground::groundstate::{minimize_window, verify_theorem, MinimizeOptions, VerifyOptions};
use fk_ground::hull::solver::{solve_hull, EpsilonSchedule, SolverOptions};
use fk_ground::hull::HullFunction;
use fk_ground::model::file::Model;
use fk_ground::model::Medium;
use fk_ground::site::{Site, SiteSet};

/// Result of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FkStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullPointer = 1,
    /// Malformed argument: bad UTF-8, empty window, mismatched dimension.
    InvalidArgument = 2,
    Io = 3,
    Format = 4,
    InvalidModel = 5,
    /// A hypothesis or precondition of the check does not hold.
    Hypothesis = 6,
    /// The hull solver hit a resonance or did not converge.
    Solver = 7,
    /// A minimization did not converge or produced non-finite values.
    Search = 8,
    /// A contact certificate failed.
    Counterexample = 9,
    Panic = 10,
}

impl FkStatus {
    fn of(e: &Error) -> FkStatus {
        match e {
            Error::Contract(_) => FkStatus::InvalidArgument,
            Error::Io(_) | Error::MissingInput(_) => FkStatus::Io,
            Error::Format(_) => FkStatus::Format,
            Error::InvalidModel(_) => FkStatus::InvalidModel,
            Error::Hypothesis { .. } | Error::Precondition(_) | Error::MemberRejected { .. } => FkStatus::Hypothesis,
            Error::Resonance { .. } | Error::Convergence { .. } => FkStatus::Solver,
            Error::Search { .. } | Error::NonFinite { .. } => FkStatus::Search,
            Error::Counterexample { .. } | Error::Stall { .. } | Error::Unreachable { .. } => {
                FkStatus::Counterexample
            }
        }
    }
}

/// A loaded interaction model.
pub struct FkModel {
    inner: Model,
}

/// A hull function of a quasi-periodic family.
pub struct FkHull {
    inner: Arc<HullFunction>,
}

/// Convergence data of [`fk_hull_solve`].
#[repr(C)]
#[derive(Clone, Copy, Debug, Default)]
pub struct FkHullStats {
    pub residual: f64,
    pub refined_residual: f64,
    /// `min (1 + ∂_α h)`; positive for a monotone hull.
    pub margin: f64,
    pub sup_norm: f64,
    pub newton_steps: usize,
}

/// Outcome of one window minimization.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default)]
pub struct FkWindowResult {
    /// `Γ(φ*)`; nonpositive for a ground state.
    pub gamma: f64,
    /// `max |E_i(u+φ*)|` over the window.
    pub stationarity: f64,
    pub iterations: usize,
}

/// Parameters of [`fk_verify`]. Start from [`fk_verify_params_default`].
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct FkVerifyParams {
    pub beta_min: f64,
    pub beta_max: f64,
    pub beta_count: usize,
    pub max_window: usize,
    pub gamma_tol: f64,
    pub stationarity_tol: f64,
    pub seed: u64,
}

/// Aggregate outcome of [`fk_verify`].
#[repr(C)]
#[derive(Clone, Copy, Debug, Default)]
pub struct FkVerifySummary {
    pub pass: bool,
    pub minimizations: usize,
    pub violations: usize,
    pub max_gamma: f64,
    pub max_stationarity: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<(FkStatus, CString)>> = const { RefCell::new(None) };
}

fn set_error(status: FkStatus, msg: String) -> FkStatus {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some((status, c)));
    status
}

fn guard(f: impl FnOnce() -> Result<(), FkStatus>) -> FkStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => FkStatus::Ok,
        Ok(Err(s)) => s,
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(FkStatus::Panic, msg)
        }
    }
}

fn fail(e: Error) -> FkStatus {
    set_error(FkStatus::of(&e), e.to_string())
}

fn invalid(msg: &str) -> FkStatus {
    set_error(FkStatus::InvalidArgument, msg.into())
}

unsafe fn deref<'a, T>(p: *const T, name: &str) -> Result<&'a T, FkStatus> {
    p.as_ref()
        .ok_or_else(|| set_error(FkStatus::NullPointer, format!("{name} is null")))
}

unsafe fn out<'a, T>(p: *mut T, name: &str) -> Result<&'a mut T, FkStatus> {
    p.as_mut()
        .ok_or_else(|| set_error(FkStatus::NullPointer, format!("{name} is null")))
}

unsafe fn text<'a>(p: *const c_char, name: &str) -> Result<&'a str, FkStatus> {
    if p.is_null() {
        return Err(set_error(FkStatus::NullPointer, format!("{name} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| invalid(&format!("{name} is not valid UTF-8")))
}

unsafe fn site(coords: *const i64, dim: usize) -> Result<Site, FkStatus> {
    if coords.is_null() {
        return Err(set_error(FkStatus::NullPointer, "coords is null".into()));
    }
    Site::new(std::slice::from_raw_parts(coords, dim)).map_err(fail)
}

unsafe fn generator(model: &FkModel, hull: *const FkHull) -> Result<Generator, FkStatus> {
    let h = hull.as_ref().map(|h| h.inner.clone());
    Generator::for_model(&model.inner, h).map_err(fail)
}

/// Message of the last failed call on this thread, or null when none
/// failed. Valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn fk_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |(_, m)| m.as_ptr()))
}

/// Status of the last failed call on this thread; `Ok` when none failed.
#[no_mangle]
pub extern "C" fn fk_last_error_status() -> FkStatus {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(FkStatus::Ok, |(s, _)| *s))
}

#[no_mangle]
pub extern "C" fn fk_clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn fk_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Loads a model file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out_model` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fk_model_load(path: *const c_char, out_model: *mut *mut FkModel) -> FkStatus {
    guard(|| {
        let slot = out(out_model, "out_model")?;
        let m = Model::load(Path::new(text(path, "path")?)).map_err(fail)?;
        *slot = Box::into_raw(Box::new(FkModel { inner: m }));
        Ok(())
    })
}

/// Parses a model from TOML text.
///
/// # Safety
/// `toml` must be a NUL-terminated string; `out_model` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fk_model_from_toml(toml: *const c_char, out_model: *mut *mut FkModel) -> FkStatus {
    guard(|| {
        let slot = out(out_model, "out_model")?;
        let m = Model::from_toml(text(toml, "toml")?).map_err(fail)?;
        *slot = Box::into_raw(Box::new(FkModel { inner: m }));
        Ok(())
    })
}

/// # Safety
/// `model` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn fk_model_free(model: *mut FkModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Lattice dimension of the model; 0 for a null handle.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn fk_model_dim(model: *const FkModel) -> usize {
    model.as_ref().map_or(0, |m| m.inner.spec.dim())
}

/// Strict upper bound on the range of every term; 0 for a null handle.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn fk_model_range(model: *const FkModel) -> u64 {
    model.as_ref().map_or(0, |m| m.inner.spec.range_bound())
}

/// Solves the hull equation of a quasi-periodic model with `n_trunc` modes
/// per axis, continuing in ε from `epsilon_start` (the target when not
/// positive). `stats` may be null.
///
/// # Safety
/// `model` must be a live handle; `out_hull` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fk_hull_solve(
    model: *const FkModel,
    n_trunc: usize,
    epsilon_start: f64,
    out_hull: *mut *mut FkHull,
    stats: *mut FkHullStats,
) -> FkStatus {
    guard(|| {
        let m = deref(model, "model")?;
        let slot = out(out_hull, "out_hull")?;
        let v = match m.inner.spec.medium() {
            Medium::QuasiPeriodic(v) => v.clone(),
            _ => return Err(set_error(FkStatus::InvalidModel, "model has no quasi-periodic medium".into())),
        };
        let omega = m
            .inner
            .omega
            .ok_or_else(|| set_error(FkStatus::InvalidModel, "model declares no omega".into()))?;
        let target = v.epsilon();
        let schedule = EpsilonSchedule {
            initial: if epsilon_start > 0.0 { epsilon_start } else { target },
            ..EpsilonSchedule::direct(target)
        };
        let opts = SolverOptions {
            n_trunc,
            ..SolverOptions::default()
        };
        let sol = solve_hull(&v, omega, schedule, &opts).map_err(fail)?;
        if let Some(s) = stats.as_mut() {
            *s = FkHullStats {
                residual: sol.residual,
                refined_residual: sol.refined_residual,
                margin: sol.margin,
                sup_norm: sol.sup_norm,
                newton_steps: sol.newton_steps(),
            };
        }
        *slot = Box::into_raw(Box::new(FkHull {
            inner: Arc::new(sol.hull),
        }));
        Ok(())
    })
}

/// Loads a hull file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out_hull` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fk_hull_load(path: *const c_char, out_hull: *mut *mut FkHull) -> FkStatus {
    guard(|| {
        let slot = out(out_hull, "out_hull")?;
        let h = HullFunction::load(Path::new(text(path, "path")?)).map_err(fail)?;
        *slot = Box::into_raw(Box::new(FkHull { inner: Arc::new(h) }));
        Ok(())
    })
}

/// Writes a hull file.
///
/// # Safety
/// `hull` must be a live handle; `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn fk_hull_save(hull: *const FkHull, path: *const c_char) -> FkStatus {
    guard(|| {
        let h = deref(hull, "hull")?;
        h.inner.save(Path::new(text(path, "path")?)).map_err(fail)
    })
}

/// # Safety
/// `hull` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn fk_hull_free(hull: *mut FkHull) {
    if !hull.is_null() {
        drop(Box::from_raw(hull));
    }
}

/// Evaluates `h(θ)` and `∂_α h(θ)` at a torus point of the hull's dimension.
/// `d_alpha` may be null.
///
/// # Safety
/// `theta` must point to `len` doubles; `value` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fk_hull_eval(
    hull: *const FkHull,
    theta: *const f64,
    len: usize,
    value: *mut f64,
    d_alpha: *mut f64,
) -> FkStatus {
    guard(|| {
        let h = deref(hull, "hull")?;
        let v = out(value, "value")?;
        if theta.is_null() {
            return Err(set_error(FkStatus::NullPointer, "theta is null".into()));
        }
        if len != h.inner.dim() {
            return Err(invalid(&format!("theta has length {len}, the hull needs {}", h.inner.dim())));
        }
        let th = std::slice::from_raw_parts(theta, len);
        *v = h.inner.eval(th);
        if let Some(d) = d_alpha.as_mut() {
            *d = h.inner.d_alpha(th);
        }
        Ok(())
    })
}

/// Value `u_i^β` of the family member at a site. `hull` may be null for
/// models whose family is linear.
///
/// # Safety
/// `model` must be live, `coords` must point to `dim` integers and `value`
/// must be writable.
#[no_mangle]
pub unsafe extern "C" fn fk_member_value(
    model: *const FkModel,
    hull: *const FkHull,
    beta: f64,
    coords: *const i64,
    dim: usize,
    value: *mut f64,
) -> FkStatus {
    guard(|| {
        let m = deref(model, "model")?;
        let v = out(value, "value")?;
        let s = site(coords, dim)?;
        *v = generator(m, hull)?.value(&s, beta);
        Ok(())
    })
}

/// Equilibrium residual `E_i` of the family member at a site.
///
/// # Safety
/// As for [`fk_member_value`].
#[no_mangle]
pub unsafe extern "C" fn fk_member_residual(
    model: *const FkModel,
    hull: *const FkHull,
    beta: f64,
    coords: *const i64,
    dim: usize,
    residual: *mut f64,
) -> FkStatus {
    guard(|| {
        let m = deref(model, "model")?;
        let r = out(residual, "residual")?;
        let s = site(coords, dim)?;
        let u = generator(m, hull)?.member(beta);
        *r = m.inner.spec.residual(&u, &s).map_err(fail)?;
        Ok(())
    })
}

/// Minimizes the relative energy of the member at `beta` over perturbations
/// supported on a window of `n_sites` sites, given as `n_sites * dim`
/// row-major coordinates.
///
/// # Safety
/// `coords` must point to `n_sites * dim` integers; `result` must be
/// writable.
#[no_mangle]
pub unsafe extern "C" fn fk_minimize_window(
    model: *const FkModel,
    hull: *const FkHull,
    beta: f64,
    coords: *const i64,
    n_sites: usize,
    dim: usize,
    result: *mut FkWindowResult,
) -> FkStatus {
    guard(|| {
        let m = deref(model, "model")?;
        let r = out(result, "result")?;
        if dim == 0 || n_sites == 0 {
            return Err(invalid("window must be nonempty"));
        }
        if coords.is_null() {
            return Err(set_error(FkStatus::NullPointer, "coords is null".into()));
        }
        let flat = std::slice::from_raw_parts(coords, n_sites * dim);
        let window = flat
            .chunks_exact(dim)
            .map(Site::new)
            .collect::<Result<SiteSet, _>>()
            .map_err(fail)?;
        let u = generator(m, hull)?.member(beta);
        let w = minimize_window(&m.inner.spec, &u, &window, &MinimizeOptions::default()).map_err(fail)?;
        *r = FkWindowResult {
            gamma: w.gamma_star,
            stationarity: w.stationarity,
            iterations: w.iterations,
        };
        Ok(())
    })
}

/// Defaults: 21 values of β on `[-1, 1]`, windows up to 15 sites, both
/// tolerances `1e-8`, seed 0.
#[no_mangle]
pub extern "C" fn fk_verify_params_default() -> FkVerifyParams {
    let d = VerifyOptions::default();
    FkVerifyParams {
        beta_min: -1.0,
        beta_max: 1.0,
        beta_count: d.betas.len(),
        max_window: d.max_window,
        gamma_tol: d.gamma_tol,
        stationarity_tol: d.stationarity_tol,
        seed: d.seed,
    }
}

/// Checks the hypotheses on the model and its family, then minimizes over
/// nested windows at every β. Returns `Ok` with `summary.pass` set to the
/// verdict, or `Hypothesis` when a hypothesis fails.
///
/// # Safety
/// `model` and `params` must be live; `hull` may be null; `summary` must be
/// writable.
#[no_mangle]
pub unsafe extern "C" fn fk_verify(
    model: *const FkModel,
    hull: *const FkHull,
    params: *const FkVerifyParams,
    summary: *mut FkVerifySummary,
) -> FkStatus {
    guard(|| {
        let m = deref(model, "model")?;
        let p = deref(params, "params")?;
        let s = out(summary, "summary")?;
        let tol = m.inner.tolerances;
        let opts = VerifyOptions {
            betas: fk_ground::foliation::uniform_grid(p.beta_min, p.beta_max, p.beta_count),
            max_window: p.max_window,
            gamma_tol: p.gamma_tol,
            stationarity_tol: p.stationarity_tol,
            seed: p.seed,
            sign_tol: tol.sign,
            edge_threshold: tol.edge_threshold,
            minimize: MinimizeOptions {
                stationarity_tol: p.stationarity_tol,
                ..MinimizeOptions::default()
            },
            ..VerifyOptions::default()
        };
        let r = verify_theorem(&m.inner.spec, generator(m, hull)?, &opts).map_err(fail)?;
        *s = FkVerifySummary {
            pass: r.pass,
            minimizations: r.reports.len(),
            violations: r.violations,
            max_gamma: r.worst.map_or(f64::NEG_INFINITY, |w| w.2),
            max_stationarity: r.max_stationarity,
        };
        Ok(())
    })
}
