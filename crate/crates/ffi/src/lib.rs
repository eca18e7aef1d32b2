//! C interface to the sleepnet model.
//!
//! Every entry point returns a [`SleepnetStatus`]. On failure the message is
//! kept per thread and can be read with [`sleepnet_last_error`]. Handles are
//! opaque and must be released with their `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use rand_chacha::ChaCha8Rng;
use sleepnet::analytic::{
    baseline_power_saved, AnalyticError, ChGapDistribution, EnergyFigures, Fidelity, ModelParams, Speed,
};
use sleepnet::simulate::{CycleAccumulator, CycleSampler, RngSpec, SimulateError};
use thiserror::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SleepnetStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    NoSleep = 3,
    NumericFailure = 4,
    TooFewSamples = 5,
    Panic = 6,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SleepnetFidelity {
    Paper = 0,
    Corrected = 1,
}

/// Fidelity arguments are plain integers so that out-of-range values from C
/// are rejected instead of being undefined behaviour.
fn parse_fidelity(raw: u32) -> Result<Fidelity, FfiError> {
    match raw {
        x if x == SleepnetFidelity::Paper as u32 => Ok(Fidelity::Paper),
        x if x == SleepnetFidelity::Corrected as u32 => Ok(Fidelity::Corrected),
        _ => Err(FfiError::InvalidArgument(format!(
            "fidelity {raw} is not a SleepnetFidelity"
        ))),
    }
}

/// Analytic figures of one parameter set. Lengths in m, times in s, powers in W.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SleepnetFigures {
    pub expected_gap: f64,
    pub prob_sleep: f64,
    /// NaN when the base station never sleeps.
    pub expected_sleep_time: f64,
    pub expected_power_saved: f64,
    pub expected_power_saved_clamped: f64,
    pub baseline_power_saved: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SleepnetEstimate {
    pub value: f64,
    pub std_error: f64,
}

/// Monte Carlo figures; `expected_sleep_time` is NaN when no cycle slept.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SleepnetSimulationFigures {
    pub n_cycles: u64,
    pub expected_gap: SleepnetEstimate,
    pub prob_sleep: SleepnetEstimate,
    pub expected_sleep_time: SleepnetEstimate,
    pub expected_power_saved: SleepnetEstimate,
    pub expected_power_saved_clamped: SleepnetEstimate,
}

/// Opaque parameter set.
pub struct SleepnetParams(ModelParams);

/// Opaque analytic model built from a parameter set.
pub struct SleepnetModel {
    dist: ChGapDistribution,
    figures: SleepnetFigures,
}

/// Opaque renewal-cycle sampler with running totals.
pub struct SleepnetSimulation {
    sampler: CycleSampler,
    rng: ChaCha8Rng,
    acc: CycleAccumulator,
}

#[derive(Debug, Error)]
enum FfiError {
    #[error("null pointer: {0}")]
    Null(&'static str),
    #[error(transparent)]
    Analytic(#[from] AnalyticError),
    #[error(transparent)]
    Simulate(#[from] SimulateError),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("panic: {0}")]
    Panic(String),
}

impl FfiError {
    fn status(&self) -> SleepnetStatus {
        match self {
            FfiError::Null(_) => SleepnetStatus::NullPointer,
            FfiError::InvalidArgument(_) => SleepnetStatus::InvalidArgument,
            FfiError::Analytic(e) | FfiError::Simulate(SimulateError::Analytic(e)) => analytic_status(e),
            FfiError::Simulate(SimulateError::TooFewSamples { .. }) => SleepnetStatus::TooFewSamples,
            FfiError::Simulate(SimulateError::WindowTooSmall { .. }) => SleepnetStatus::InvalidArgument,
            FfiError::Simulate(SimulateError::Domain(_)) => SleepnetStatus::NumericFailure,
            FfiError::Panic(_) => SleepnetStatus::Panic,
        }
    }
}

fn analytic_status(e: &AnalyticError) -> SleepnetStatus {
    match e {
        AnalyticError::InvalidParams { .. } => SleepnetStatus::InvalidArgument,
        AnalyticError::NoSleepOpportunity { .. } => SleepnetStatus::NoSleep,
        AnalyticError::Domain(_) | AnalyticError::Numerics(_) => SleepnetStatus::NumericFailure,
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn guard<F: FnOnce() -> Result<(), FfiError>>(f: F) -> SleepnetStatus {
    let err = match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            return SleepnetStatus::Ok;
        }
        Ok(Err(e)) => e,
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown".into());
            FfiError::Panic(msg)
        }
    };
    let status = err.status();
    set_last_error(err.to_string());
    status
}

unsafe fn deref<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, FfiError> {
    p.as_ref().ok_or(FfiError::Null(what))
}

unsafe fn deref_mut<'a, T>(p: *mut T, what: &'static str) -> Result<&'a mut T, FfiError> {
    p.as_mut().ok_or(FfiError::Null(what))
}

fn estimate(e: sleepnet::simulate::Estimate) -> SleepnetEstimate {
    SleepnetEstimate {
        value: e.value,
        std_error: e.std_error,
    }
}

/// Message of the last failed call on this thread, or NULL after a success.
/// The pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn sleepnet_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn sleepnet_version() -> *const c_char {
    const VERSION: &CStr = match CStr::from_bytes_with_nul(concat!(env!("CARGO_PKG_VERSION"), "\0").as_bytes()) {
        Ok(v) => v,
        Err(_) => panic!("version string"),
    };
    VERSION.as_ptr()
}

/// Creates a parameter set. Speeds in m/s; `fidelity` is a `SleepnetFidelity`.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn sleepnet_params_new(
    rho: f64,
    r0: f64,
    d: f64,
    a_mps: f64,
    b_mps: f64,
    p0: f64,
    ec: f64,
    fidelity: u32,
    out: *mut *mut SleepnetParams,
) -> SleepnetStatus {
    guard(|| {
        let out = deref_mut(out, "out")?;
        let p = ModelParams::new(
            rho,
            r0,
            d,
            Speed::mps(a_mps),
            Speed::mps(b_mps),
            p0,
            ec,
            parse_fidelity(fidelity)?,
        )?;
        *out = Box::into_raw(Box::new(SleepnetParams(p)));
        Ok(())
    })
}

/// Canonical parameters (D = 800 m, r0 = 200 m, 40 to 80 km/h, P0 = 1 kW,
/// Ec = 10 J) at density `rho`.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn sleepnet_params_canonical(
    rho: f64,
    fidelity: u32,
    out: *mut *mut SleepnetParams,
) -> SleepnetStatus {
    guard(|| {
        let out = deref_mut(out, "out")?;
        let p = ModelParams::canonical(rho)?.with_fidelity(parse_fidelity(fidelity)?);
        *out = Box::into_raw(Box::new(SleepnetParams(p)));
        Ok(())
    })
}

/// # Safety
/// `params` must come from this library and not be used afterwards. NULL is ignored.
#[no_mangle]
pub unsafe extern "C" fn sleepnet_params_free(params: *mut SleepnetParams) {
    if !params.is_null() {
        drop(Box::from_raw(params));
    }
}

/// Builds the head-gap law and its energy figures.
///
/// # Safety
/// `params` must be a live handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn sleepnet_model_new(
    params: *const SleepnetParams,
    out: *mut *mut SleepnetModel,
) -> SleepnetStatus {
    guard(|| {
        let p = deref(params, "params")?.0;
        let out = deref_mut(out, "out")?;
        let dist = ChGapDistribution::new(&p)?;
        let EnergyFigures {
            expected_gap,
            prob_sleep,
            expected_sleep_time,
            expected_power_saved,
            ..
        } = dist.energy_figures()?;
        let figures = SleepnetFigures {
            expected_gap,
            prob_sleep,
            expected_sleep_time: expected_sleep_time.unwrap_or(f64::NAN),
            expected_power_saved,
            expected_power_saved_clamped: dist.expected_power_saved_clamped()?,
            baseline_power_saved: baseline_power_saved(&p)?,
        };
        *out = Box::into_raw(Box::new(SleepnetModel { dist, figures }));
        Ok(())
    })
}

/// # Safety
/// `model` must come from this library and not be used afterwards. NULL is ignored.
#[no_mangle]
pub unsafe extern "C" fn sleepnet_model_free(model: *mut SleepnetModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// # Safety
/// `model` must be a live handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn sleepnet_model_figures(
    model: *const SleepnetModel,
    out: *mut SleepnetFigures,
) -> SleepnetStatus {
    guard(|| {
        let m = deref(model, "model")?;
        *deref_mut(out, "out")? = m.figures;
        Ok(())
    })
}

/// Head-gap density at `x` metres.
///
/// # Safety
/// `model` must be a live handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn sleepnet_model_pdf(model: *const SleepnetModel, x: f64, out: *mut f64) -> SleepnetStatus {
    guard(|| {
        let m = deref(model, "model")?;
        *deref_mut(out, "out")? = m.dist.pdf(x);
        Ok(())
    })
}

/// Head-gap distribution function at `x` metres.
///
/// # Safety
/// `model` must be a live handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn sleepnet_model_cdf(model: *const SleepnetModel, x: f64, out: *mut f64) -> SleepnetStatus {
    guard(|| {
        let m = deref(model, "model")?;
        *deref_mut(out, "out")? = m.dist.cdf(x);
        Ok(())
    })
}

/// Renewal-cycle sampler drawing from stream `stream` of `seed`.
///
/// # Safety
/// `params` must be a live handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn sleepnet_simulation_new(
    params: *const SleepnetParams,
    fidelity: u32,
    seed: u64,
    stream: u64,
    out: *mut *mut SleepnetSimulation,
) -> SleepnetStatus {
    guard(|| {
        let p = deref(params, "params")?.0;
        let out = deref_mut(out, "out")?;
        p.validate()?;
        let sim = SleepnetSimulation {
            sampler: CycleSampler::new(&p, parse_fidelity(fidelity)?),
            rng: RngSpec::new(seed, stream).rng(),
            acc: CycleAccumulator::new(),
        };
        *out = Box::into_raw(Box::new(sim));
        Ok(())
    })
}

/// # Safety
/// `sim` must come from this library and not be used afterwards. NULL is ignored.
#[no_mangle]
pub unsafe extern "C" fn sleepnet_simulation_free(sim: *mut SleepnetSimulation) {
    if !sim.is_null() {
        drop(Box::from_raw(sim));
    }
}

/// Draws `n_cycles` more cycles into the running totals.
///
/// # Safety
/// `sim` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn sleepnet_simulation_run(sim: *mut SleepnetSimulation, n_cycles: u64) -> SleepnetStatus {
    guard(|| {
        let s = deref_mut(sim, "sim")?;
        for _ in 0..n_cycles {
            let c = s.sampler.sample(&mut s.rng);
            s.acc.push(&c);
        }
        Ok(())
    })
}

/// Estimates from every cycle drawn so far.
///
/// # Safety
/// `sim` must be a live handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn sleepnet_simulation_figures(
    sim: *const SleepnetSimulation,
    out: *mut SleepnetSimulationFigures,
) -> SleepnetStatus {
    guard(|| {
        let s = deref(sim, "sim")?;
        let out = deref_mut(out, "out")?;
        let e = s.acc.finish()?;
        *out = SleepnetSimulationFigures {
            n_cycles: e.n_cycles,
            expected_gap: estimate(e.expected_gap),
            prob_sleep: estimate(e.prob_sleep),
            expected_sleep_time: e.expected_sleep_time.map_or(
                SleepnetEstimate {
                    value: f64::NAN,
                    std_error: f64::NAN,
                },
                estimate,
            ),
            expected_power_saved: estimate(e.expected_power_saved),
            expected_power_saved_clamped: estimate(e.expected_power_saved_clamped),
        };
        Ok(())
    })
}
