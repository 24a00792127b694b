//! C interface to `byzcode`.
//!
//! Every fallible call returns a [`BzStatus`]; on anything but `BZ_STATUS_OK`
//! a message is kept per thread and read with [`bz_last_error`]. Sensor
//! sets are 0-based bitmasks. Strings handed out by the library are freed
//! with [`bz_string_free`], distributions with [`bz_pmf_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use byzcode::maxent::{closed_form_t1, sum_rate_star};
use byzcode::regions::{check_region, min_sum_rate, RatePoint, RegionMode};
use byzcode::sim::{run_session, SimParams, Strategy};
use byzcode::{Error, JointPmf, SensorSet};

/// Status codes.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BzStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    ZeroProbabilityContext = 3,
    ConvergenceFailure = 4,
    NumericFailure = 5,
    PreconditionViolation = 6,
    InvalidUtf8 = 7,
    InvalidJson = 8,
    Panic = 9,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BzRegionMode {
    Dfr = 0,
    Rfr = 1,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BzStrategy {
    Honest = 0,
    Gibberish = 1,
    Fabricate = 2,
    Collide = 3,
}

/// Protocol parameters. A `typicality_eps` of zero or less selects the
/// default tolerance.
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct BzSimParams {
    pub k: usize,
    pub rounds: usize,
    pub epsilon: f64,
    pub functions: usize,
    pub seed: u64,
    pub t: usize,
    pub typicality_eps: f64,
}

/// Opaque joint distribution.
pub struct BzPmf {
    inner: JointPmf,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure(BzStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match e {
            Error::InvalidArgument(_) => BzStatus::InvalidArgument,
            Error::ZeroProbabilityContext => BzStatus::ZeroProbabilityContext,
            Error::ConvergenceFailure { .. } => BzStatus::ConvergenceFailure,
            Error::NumericFailure(_) => BzStatus::NumericFailure,
            Error::PreconditionViolation(_) => BzStatus::PreconditionViolation,
        };
        Failure(status, e.to_string())
    }
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> BzStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            BzStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            BzStatus::Panic
        }
    }
}

fn null(what: &str) -> Failure {
    Failure(BzStatus::NullPointer, format!("{what} is null"))
}

unsafe fn pmf_ref<'a>(p: *const BzPmf) -> Result<&'a JointPmf, Failure> {
    p.as_ref()
        .map(|h| &h.inner)
        .ok_or_else(|| null("distribution"))
}

unsafe fn write_out<T>(out: *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("output pointer"));
    }
    out.write(value);
    Ok(())
}

fn mask(bits: u32, m: usize) -> Result<SensorSet, Failure> {
    let s = SensorSet::from_bits(bits);
    if !s.within(m) {
        return Err(Failure(
            BzStatus::InvalidArgument,
            format!("sensor mask {bits:#x} has bits beyond m = {m}"),
        ));
    }
    Ok(s)
}

/// Message for the last failed call on this thread, or null. Valid until
/// the next call on the same thread.
#[no_mangle]
pub extern "C" fn bz_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version, static storage.
#[no_mangle]
pub extern "C" fn bz_version() -> *const c_char {
    static V: &str = concat!(env!("CARGO_PKG_VERSION"), "\0");
    V.as_ptr().cast()
}

/// # Safety
/// `s` must be null or a string returned by this library, freed once.
#[no_mangle]
pub unsafe extern "C" fn bz_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Builds a distribution from alphabet sizes and row-major probabilities
/// (last sensor fastest).
///
/// # Safety
/// `sizes` must point to `m` values and `probs` to `n` values.
#[no_mangle]
pub unsafe extern "C" fn bz_pmf_new(
    sizes: *const usize,
    m: usize,
    probs: *const f64,
    n: usize,
    out: *mut *mut BzPmf,
) -> BzStatus {
    guard(|| {
        if sizes.is_null() || probs.is_null() {
            return Err(null("input array"));
        }
        let sizes = std::slice::from_raw_parts(sizes, m).to_vec();
        let probs = std::slice::from_raw_parts(probs, n).to_vec();
        let inner = JointPmf::new(sizes, probs)?;
        write_out(out, Box::into_raw(Box::new(BzPmf { inner })))
    })
}

/// Parses the JSON distribution format used by the command line tool.
///
/// # Safety
/// `json` must be a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn bz_pmf_from_json(json: *const c_char, out: *mut *mut BzPmf) -> BzStatus {
    guard(|| {
        if json.is_null() {
            return Err(null("json"));
        }
        let text = CStr::from_ptr(json)
            .to_str()
            .map_err(|e| Failure(BzStatus::InvalidUtf8, e.to_string()))?;
        let inner: JointPmf = serde_json::from_str(text)
            .map_err(|e| Failure(BzStatus::InvalidJson, e.to_string()))?;
        write_out(out, Box::into_raw(Box::new(BzPmf { inner })))
    })
}

/// # Safety
/// `p` must be null or a handle from this library, freed once.
#[no_mangle]
pub unsafe extern "C" fn bz_pmf_free(p: *mut BzPmf) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Number of sensors, 0 for a null handle.
///
/// # Safety
/// `p` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn bz_pmf_num_sensors(p: *const BzPmf) -> usize {
    p.as_ref().map_or(0, |h| h.inner.num_sensors())
}

/// `H(X_S)` in bits.
///
/// # Safety
/// `p` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn bz_entropy(p: *const BzPmf, set: u32, out: *mut f64) -> BzStatus {
    guard(|| {
        let p = pmf_ref(p)?;
        let s = mask(set, p.num_sensors())?;
        write_out(out, p.entropy(s)?)
    })
}

/// `I(X_A; X_B | X_C)` in bits.
///
/// # Safety
/// `p` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn bz_conditional_mutual_information(
    p: *const BzPmf,
    a: u32,
    b: u32,
    given: u32,
    out: *mut f64,
) -> BzStatus {
    guard(|| {
        let p = pmf_ref(p)?;
        let m = p.num_sensors();
        let v = p.conditional_mutual_information(mask(a, m)?, mask(b, m)?, mask(given, m)?)?;
        write_out(out, v)
    })
}

/// Minimum variable-rate sum rate with up to `t` traitors.
///
/// # Safety
/// `p` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn bz_sum_rate_star(p: *const BzPmf, t: usize, out: *mut f64) -> BzStatus {
    guard(|| write_out(out, sum_rate_star(pmf_ref(p)?, t)?))
}

/// Closed form for a single traitor.
///
/// # Safety
/// `p` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn bz_closed_form_t1(p: *const BzPmf, out: *mut f64) -> BzStatus {
    guard(|| write_out(out, closed_form_t1(pmf_ref(p)?)?))
}

/// Minimum sum rate over `R_k`.
///
/// # Safety
/// `p` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn bz_min_sum_rate(p: *const BzPmf, k: usize, out: *mut f64) -> BzStatus {
    guard(|| write_out(out, min_sum_rate(pmf_ref(p)?, k)?.value))
}

/// Whether the `n` rates are achievable with fixed-rate coding.
///
/// # Safety
/// `rates` must point to `n` values and `out` be writable.
#[no_mangle]
pub unsafe extern "C" fn bz_region_check(
    p: *const BzPmf,
    rates: *const f64,
    n: usize,
    t: usize,
    mode: BzRegionMode,
    out: *mut bool,
) -> BzStatus {
    guard(|| {
        let p = pmf_ref(p)?;
        if rates.is_null() {
            return Err(null("rates"));
        }
        let rates = RatePoint::new(std::slice::from_raw_parts(rates, n).to_vec())?;
        let mode = match mode {
            BzRegionMode::Dfr => RegionMode::Dfr,
            BzRegionMode::Rfr => RegionMode::Rfr,
        };
        write_out(out, check_region(&rates, p, t, mode)?.achievable)
    })
}

/// Runs one protocol session and writes its report as a JSON string.
/// `q_tilde` may be null unless the strategy is fabricate.
///
/// # Safety
/// Handles must be live, `params` readable and `out_json` writable.
#[no_mangle]
pub unsafe extern "C" fn bz_simulate_session(
    p: *const BzPmf,
    params: *const BzSimParams,
    traitors: u32,
    strategy: BzStrategy,
    q_tilde: *const BzPmf,
    out_json: *mut *mut c_char,
) -> BzStatus {
    guard(|| {
        let p = pmf_ref(p)?;
        let raw = params.as_ref().ok_or_else(|| null("params"))?;
        let mut sim = SimParams::new(
            raw.k,
            raw.rounds,
            raw.epsilon,
            raw.functions,
            raw.seed,
            raw.t,
        );
        if raw.typicality_eps > 0.0 {
            sim.typicality_eps = Some(raw.typicality_eps);
        }
        let strategy = match strategy {
            BzStrategy::Honest => Strategy::Honest,
            BzStrategy::Gibberish => Strategy::Gibberish,
            BzStrategy::Fabricate => Strategy::Fabricate,
            BzStrategy::Collide => Strategy::Collide,
        };
        let q = q_tilde.as_ref().map(|h| &h.inner);
        let traitors = mask(traitors, p.num_sensors())?;
        let report = run_session(p, &sim, traitors, strategy, q)?;
        let json = serde_json::to_string(&report)
            .map_err(|e| Failure(BzStatus::InvalidJson, e.to_string()))?;
        let c = CString::new(json).map_err(|e| Failure(BzStatus::InvalidJson, e.to_string()))?;
        write_out(out_json, c.into_raw())
    })
}
