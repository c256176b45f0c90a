//! C ABI over `priorrm`.
//!
//! Every function returns a [`PrmStatus`] and writes results through out
//! pointers. On failure the out pointers are left untouched and
//! [`prm_last_error_message`] describes the problem. Priors are opaque
//! handles created by the `prm_prior_*` constructors and released with
//! [`prm_prior_free`]. A handle may be shared across threads for reading.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use priorrm::experiments::{self, Algorithm, Scenario, StartMode};
use priorrm::priors::{
    kde_from_samples, silverman_bandwidth, GaussianMixturePrior, GaussianPrior, MixtureComponent, Prior,
    SlopeBound, TabulatedPrior, UniformPrior,
};
use priorrm::solver::{self, ArgmaxOptions, Observation, RmState};
use priorrm::tuning::{recommend_c0, C0Regression};
use priorrm::{Error, SpreadSchedule, StepSchedule};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PrmStatus {
    Ok = 0,
    NullPointer = 1,
    Domain = 2,
    Precondition = 3,
    Convergence = 4,
    Parse = 5,
    Io = 6,
    /// A Rust panic was caught at the boundary; this is a bug.
    Internal = 7,
}

/// Opaque prior handle.
pub struct PrmPrior(Prior);

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PrmStartMode {
    Prior = 0,
    Uniform = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PrmAlgorithm {
    Standard = 0,
    Prior = 1,
}

/// Controls for the numeric argmax paths.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrmArgmaxOptions {
    pub abs_tol: f64,
    pub max_evals: usize,
}

/// Ensemble description; fill with [`prm_scenario_default`] and adjust.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrmScenario {
    pub prior_mean: f64,
    pub prior_sd: f64,
    pub slope_log_mean: f64,
    pub slope_log_sd: f64,
    pub s1_log10_low: f64,
    pub s1_log10_high: f64,
    pub noise_sd: f64,
    pub c0: f64,
    pub iterations: usize,
    pub runs: usize,
    pub batches: usize,
    pub start_mode: PrmStartMode,
    pub algorithm: PrmAlgorithm,
    pub seed: u64,
    pub argmax: PrmArgmaxOptions,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(err: &Error) -> PrmStatus {
    match err {
        Error::Domain(_) => PrmStatus::Domain,
        Error::Precondition(_) => PrmStatus::Precondition,
        Error::Convergence { .. } => PrmStatus::Convergence,
        Error::Parse(_) => PrmStatus::Parse,
        Error::Io(_) => PrmStatus::Io,
    }
}

enum Fail {
    Null(&'static str),
    Lib(Error),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Lib(e)
    }
}

/// Runs `body`, mapping errors and panics to a status code.
fn guard(body: impl FnOnce() -> Result<(), Fail>) -> PrmStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => PrmStatus::Ok,
        Ok(Err(Fail::Null(what))) => {
            set_last_error(&format!("null pointer: {what}"));
            PrmStatus::NullPointer
        }
        Ok(Err(Fail::Lib(e))) => {
            set_last_error(&e.to_string());
            status_of(&e)
        }
        Err(_) => {
            set_last_error("internal panic");
            PrmStatus::Internal
        }
    }
}

unsafe fn out<'a, T>(p: *mut T, what: &'static str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or(Fail::Null(what))
}

unsafe fn input<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or(Fail::Null(what))
}

unsafe fn array<'a>(p: *const f64, len: usize, what: &'static str) -> Result<&'a [f64], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Fail::Null(what));
    }
    Ok(slice::from_raw_parts(p, len))
}

unsafe fn emit(handle: *mut *mut PrmPrior, prior: impl FnOnce() -> Result<Prior, Fail>) -> PrmStatus {
    guard(|| {
        let slot = out(handle, "out handle")?;
        *slot = Box::into_raw(Box::new(PrmPrior(prior()?)));
        Ok(())
    })
}

/// Message for the most recent failure on the calling thread. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn prm_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// # Safety
/// `out_prior` must be a valid pointer to writable storage for a handle.
#[no_mangle]
pub unsafe extern "C" fn prm_prior_gaussian(mu: f64, sigma: f64, out_prior: *mut *mut PrmPrior) -> PrmStatus {
    emit(out_prior, || Ok(Prior::Gaussian(GaussianPrior::new(mu, sigma)?)))
}

/// Mixture of `len` Gaussians sharing `sigma`. Weights must sum to 1.
///
/// # Safety
/// `weights` and `means` must point to `len` readable doubles.
#[no_mangle]
pub unsafe extern "C" fn prm_prior_mixture(
    weights: *const f64,
    means: *const f64,
    len: usize,
    sigma: f64,
    out_prior: *mut *mut PrmPrior,
) -> PrmStatus {
    emit(out_prior, || {
        let w = array(weights, len, "weights")?;
        let m = array(means, len, "means")?;
        let comps = w
            .iter()
            .zip(m)
            .map(|(&weight, &mean)| MixtureComponent { weight, mean })
            .collect();
        Ok(Prior::Mixture(GaussianMixturePrior::new(comps, sigma)?))
    })
}

/// Equal-weight mixture centred on `samples`. A non-positive or NaN
/// `bandwidth` selects the normal-reference rule.
///
/// # Safety
/// `samples` must point to `len` readable doubles.
#[no_mangle]
pub unsafe extern "C" fn prm_prior_kde(
    samples: *const f64,
    len: usize,
    bandwidth: f64,
    out_prior: *mut *mut PrmPrior,
) -> PrmStatus {
    emit(out_prior, || {
        let xs = array(samples, len, "samples")?;
        let h = if bandwidth > 0.0 { bandwidth } else { silverman_bandwidth(xs)? };
        Ok(Prior::Mixture(kde_from_samples(xs, h)?))
    })
}

/// Improper flat prior; prior steps then equal standard steps.
///
/// # Safety
/// `out_prior` must be a valid pointer to writable storage for a handle.
#[no_mangle]
pub unsafe extern "C" fn prm_prior_uniform(out_prior: *mut *mut PrmPrior) -> PrmStatus {
    emit(out_prior, || Ok(Prior::Uniform(UniformPrior)))
}

/// Piecewise-linear log-density on a strictly increasing grid. A NaN
/// `slope_bound` derives the bound from the table itself.
///
/// # Safety
/// `grid` and `log_density` must point to `len` readable doubles.
#[no_mangle]
pub unsafe extern "C" fn prm_prior_tabulated(
    grid: *const f64,
    log_density: *const f64,
    len: usize,
    slope_bound: f64,
    out_prior: *mut *mut PrmPrior,
) -> PrmStatus {
    emit(out_prior, || {
        let g = array(grid, len, "grid")?.to_vec();
        let l = array(log_density, len, "log_density")?.to_vec();
        let t = if slope_bound.is_nan() {
            TabulatedPrior::with_certified_bound(g, l)?
        } else {
            TabulatedPrior::new(g, l, slope_bound)?
        };
        Ok(Prior::Tabulated(t))
    })
}

/// # Safety
/// `prior` must be null or a handle from a `prm_prior_*` constructor that
/// has not been freed.
#[no_mangle]
pub unsafe extern "C" fn prm_prior_free(prior: *mut PrmPrior) {
    if !prior.is_null() {
        drop(Box::from_raw(prior));
    }
}

/// # Safety
/// `prior` must be a live handle; `out_value` must be writable.
#[no_mangle]
pub unsafe extern "C" fn prm_prior_log_density(prior: *const PrmPrior, x: f64, out_value: *mut f64) -> PrmStatus {
    guard(|| {
        let v = input(prior, "prior")?.0.log_density(x)?;
        *out(out_value, "out_value")? = v;
        Ok(())
    })
}

/// # Safety
/// `prior` must be a live handle; `out_value` must be writable.
#[no_mangle]
pub unsafe extern "C" fn prm_prior_log_density_slope(
    prior: *const PrmPrior,
    x: f64,
    out_value: *mut f64,
) -> PrmStatus {
    guard(|| {
        let v = input(prior, "prior")?.0.log_density_slope(x)?;
        *out(out_value, "out_value")? = v;
        Ok(())
    })
}

/// Writes the certified bound on `|d/dx log P|`, or `+inf` if the prior has
/// none.
///
/// # Safety
/// `prior` must be a live handle; `out_value` must be writable.
#[no_mangle]
pub unsafe extern "C" fn prm_prior_slope_bound(prior: *const PrmPrior, out_value: *mut f64) -> PrmStatus {
    guard(|| {
        let v = match input(prior, "prior")?.0.slope_bound() {
            SlopeBound::Finite(j) => j,
            SlopeBound::Unbounded => f64::INFINITY,
        };
        *out(out_value, "out_value")? = v;
        Ok(())
    })
}

/// Default argmax controls.
#[no_mangle]
pub extern "C" fn prm_argmax_options_default() -> PrmArgmaxOptions {
    let d = ArgmaxOptions::default();
    PrmArgmaxOptions {
        abs_tol: d.abs_tol,
        max_evals: d.max_evals,
    }
}

fn step_inputs(i: u64, x: f64, y: f64, y_target: f64, s1: f64) -> Result<(RmState, Observation, StepSchedule), Error> {
    Ok((RmState::new(i, x)?, Observation::new(y, y_target)?, StepSchedule::new(s1)?))
}

/// Proposal `x - (s1 / i) (y - y_target)`.
///
/// # Safety
/// `out_x` must be writable.
#[no_mangle]
pub unsafe extern "C" fn prm_rm_proposal(
    i: u64,
    x: f64,
    y: f64,
    y_target: f64,
    s1: f64,
    out_x: *mut f64,
) -> PrmStatus {
    guard(|| {
        let (st, obs, step) = step_inputs(i, x, y, y_target, s1)?;
        *out(out_x, "out_x")? = solver::rm_proposal(&st, &obs, &step);
        Ok(())
    })
}

/// One standard step from iterate `x` at 1-based index `i`.
///
/// # Safety
/// `out_x` must be writable.
#[no_mangle]
pub unsafe extern "C" fn prm_standard_step(
    i: u64,
    x: f64,
    y: f64,
    y_target: f64,
    s1: f64,
    out_x: *mut f64,
) -> PrmStatus {
    guard(|| {
        let (st, obs, step) = step_inputs(i, x, y, y_target, s1)?;
        *out(out_x, "out_x")? = solver::standard_rm_step(&st, &obs, &step)?.x();
        Ok(())
    })
}

/// One prior-information step. `options` may be null for the defaults.
///
/// # Safety
/// `prior` must be a live handle, `options` null or readable, `out_x`
/// writable.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn prm_prior_step(
    prior: *const PrmPrior,
    i: u64,
    x: f64,
    y: f64,
    y_target: f64,
    s1: f64,
    c0: f64,
    options: *const PrmArgmaxOptions,
    out_x: *mut f64,
) -> PrmStatus {
    guard(|| {
        let p = &input(prior, "prior")?.0;
        let opts = options.as_ref().map_or_else(ArgmaxOptions::default, |o| ArgmaxOptions {
            abs_tol: o.abs_tol,
            max_evals: o.max_evals,
        });
        let (st, obs, step) = step_inputs(i, x, y, y_target, s1)?;
        let next = solver::prior_rm_step(&st, &obs, &step, &SpreadSchedule::new(c0)?, p, &opts)?;
        *out(out_x, "out_x")? = next.x();
        Ok(())
    })
}

/// Recommended `c0` from the shipped linear rule.
///
/// # Safety
/// `out_c0` must be writable.
#[no_mangle]
pub unsafe extern "C" fn prm_recommend_c0(noise_sd: f64, planned_iterations: u64, out_c0: *mut f64) -> PrmStatus {
    guard(|| {
        let c0 = recommend_c0(&C0Regression::PUBLISHED, noise_sd, planned_iterations)?;
        *out(out_c0, "out_c0")? = c0;
        Ok(())
    })
}

/// Fills `out_scenario` with the library defaults.
///
/// # Safety
/// `out_scenario` must be writable.
#[no_mangle]
pub unsafe extern "C" fn prm_scenario_default(out_scenario: *mut PrmScenario) -> PrmStatus {
    guard(|| {
        let d = Scenario::default();
        *out(out_scenario, "out_scenario")? = PrmScenario {
            prior_mean: d.prior_mean,
            prior_sd: d.prior_sd,
            slope_log_mean: d.slope_log_mean,
            slope_log_sd: d.slope_log_sd,
            s1_log10_low: d.s1_log10_low,
            s1_log10_high: d.s1_log10_high,
            noise_sd: d.noise_sd,
            c0: d.c0,
            iterations: d.iterations,
            runs: d.runs,
            batches: d.batches,
            start_mode: PrmStartMode::Prior,
            algorithm: PrmAlgorithm::Prior,
            seed: d.seed,
            argmax: prm_argmax_options_default(),
        };
        Ok(())
    })
}

fn to_scenario(s: &PrmScenario, prior: Option<&PrmPrior>) -> Scenario {
    Scenario {
        prior_mean: s.prior_mean,
        prior_sd: s.prior_sd,
        slope_log_mean: s.slope_log_mean,
        slope_log_sd: s.slope_log_sd,
        s1_log10_low: s.s1_log10_low,
        s1_log10_high: s.s1_log10_high,
        noise_sd: s.noise_sd,
        c0: s.c0,
        iterations: s.iterations,
        runs: s.runs,
        batches: s.batches,
        start_mode: match s.start_mode {
            PrmStartMode::Prior => StartMode::Prior,
            PrmStartMode::Uniform => StartMode::Uniform,
        },
        algorithm: match s.algorithm {
            PrmAlgorithm::Standard => Algorithm::Standard,
            PrmAlgorithm::Prior => Algorithm::Prior,
        },
        seed: s.seed,
        prior: prior.map(|p| p.0.clone()),
        argmax: ArgmaxOptions {
            abs_tol: s.argmax.abs_tol,
            max_evals: s.argmax.max_evals,
        },
    }
}

/// Runs an ensemble and writes the per-iteration median deviations into
/// `out_medians`, which must hold `scenario.iterations` doubles. `prior`
/// may be null to use `N(prior_mean, prior_sd^2)`. `out_runs` and
/// `out_divergent` may be null.
///
/// # Safety
/// Pointers must be valid for the documented sizes.
#[no_mangle]
pub unsafe extern "C" fn prm_run_ensemble(
    scenario: *const PrmScenario,
    prior: *const PrmPrior,
    out_medians: *mut f64,
    medians_len: usize,
    out_runs: *mut usize,
    out_divergent: *mut usize,
) -> PrmStatus {
    guard(|| {
        let sc = to_scenario(input(scenario, "scenario")?, prior.as_ref());
        if medians_len != sc.iterations {
            return Err(Fail::Lib(Error::Domain(format!(
                "medians buffer holds {medians_len} values, scenario has {} iterations",
                sc.iterations
            ))));
        }
        if out_medians.is_null() {
            return Err(Fail::Null("out_medians"));
        }
        let stats = experiments::run_ensemble(&sc)?;
        ptr::copy_nonoverlapping(stats.median_abs_dev.as_ptr(), out_medians, medians_len);
        if let Some(r) = out_runs.as_mut() {
            *r = stats.runs;
        }
        if let Some(d) = out_divergent.as_mut() {
            *d = stats.divergent;
        }
        Ok(())
    })
}
