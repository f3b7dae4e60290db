//! C ABI over the experiment harness.
//!
//! Every fallible call returns a [`CmStatus`]; on failure the message is
//! kept per thread and read with [`cm_last_error_message`]. Handles are
//! opaque and must be released with their `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use cyclemimo::detectors::DetectorKind;
use cyclemimo::harness::{self, ExperimentConfig, MetricsRecord};
use cyclemimo::Error;

/// Result codes shared by all functions.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CmStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Config = 3,
    Dimension = 4,
    InsufficientData = 5,
    Numeric = 6,
    Io = 7,
    OutOfRange = 8,
    Panic = 99,
}

/// Detector identifiers used in [`CmRecord`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CmDetector {
    Lmmse = 0,
    Dnn = 1,
    CycleDnn = 2,
    CycleGan = 3,
}

impl From<DetectorKind> for CmDetector {
    fn from(k: DetectorKind) -> Self {
        match k {
            DetectorKind::Lmmse => CmDetector::Lmmse,
            DetectorKind::Dnn => CmDetector::Dnn,
            DetectorKind::CycleDnn => CmDetector::CycleDnn,
            DetectorKind::CycleGan => CmDetector::CycleGan,
        }
    }
}

/// One results row.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CmRecord {
    pub ebn0_db: f64,
    pub block_index: u64,
    pub detector: CmDetector,
    pub ber: f64,
    pub achievable_rate_bits_per_use: f64,
    pub epochs_run: u64,
    pub used_previous_pilots: bool,
    pub pseudo_label_refreshes: u64,
    pub wallclock_s: f64,
    pub seed: u64,
}

impl From<&MetricsRecord> for CmRecord {
    fn from(r: &MetricsRecord) -> Self {
        Self {
            ebn0_db: r.ebn0_db,
            block_index: r.block_index as u64,
            detector: r.detector.into(),
            ber: r.ber,
            achievable_rate_bits_per_use: r.achievable_rate_bits_per_use,
            epochs_run: r.epochs_run as u64,
            used_previous_pilots: r.used_previous_pilots,
            pseudo_label_refreshes: r.pseudo_label_refreshes as u64,
            wallclock_s: r.wallclock_s,
            seed: r.seed,
        }
    }
}

/// Opaque experiment configuration.
pub struct CmConfig {
    inner: ExperimentConfig,
}

/// Opaque list of results rows.
pub struct CmResults {
    records: Vec<MetricsRecord>,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> CmStatus {
    match e {
        Error::Config { .. } => CmStatus::Config,
        Error::Dimension { .. } | Error::Framing(_) => CmStatus::Dimension,
        Error::InsufficientData(_) => CmStatus::InsufficientData,
        Error::NonFinite { .. } | Error::ZeroScale { .. } => CmStatus::Numeric,
        Error::Io(_) | Error::Checkpoint(_) => CmStatus::Io,
        Error::Domain(_) | Error::State(_) => CmStatus::InvalidArgument,
        Error::Context { source, .. } => status_of(source),
    }
}

/// Runs `f`, recording any error or panic for [`cm_last_error_message`].
fn guard(f: impl FnOnce() -> Result<(), (CmStatus, String)>) -> CmStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => CmStatus::Ok,
        Ok(Err((status, msg))) => {
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
            CmStatus::Panic
        }
    }
}

fn lib_err(e: Error) -> (CmStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (CmStatus, String) {
    (CmStatus::NullPointer, format!("{what} is null"))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, (CmStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| (CmStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

unsafe fn cfg_mut<'a>(cfg: *mut CmConfig) -> Result<&'a mut ExperimentConfig, (CmStatus, String)> {
    cfg.as_mut().map(|c| &mut c.inner).ok_or_else(|| null("config"))
}

/// Message of the last failed call on this thread, or null. Valid until the
/// next failing call on the same thread.
#[no_mangle]
pub extern "C" fn cm_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |c| c.as_ptr()))
}

/// New config from a profile: 0 = paper, 1 = smoke.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn cm_config_new(profile: u32, out: *mut *mut CmConfig) -> CmStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let inner = match profile {
            0 => ExperimentConfig::paper(),
            1 => ExperimentConfig::smoke(),
            p => return Err((CmStatus::InvalidArgument, format!("unknown profile {p}"))),
        };
        *out = Box::into_raw(Box::new(CmConfig { inner }));
        Ok(())
    })
}

/// Parses TOML config text. The result is validated.
///
/// # Safety
/// `text` must be a NUL-terminated string; `out` as in [`cm_config_new`].
#[no_mangle]
pub unsafe extern "C" fn cm_config_from_toml(text: *const c_char, out: *mut *mut CmConfig) -> CmStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let text = str_arg(text, "text")?;
        let inner = harness::parse_config_str(text, None).map_err(lib_err)?;
        inner.validate().map_err(lib_err)?;
        *out = Box::into_raw(Box::new(CmConfig { inner }));
        Ok(())
    })
}

/// # Safety
/// `cfg` must come from this library and not be used afterwards. Null is a no-op.
#[no_mangle]
pub unsafe extern "C" fn cm_config_free(cfg: *mut CmConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

/// # Safety
/// `cfg` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn cm_config_set_seed(cfg: *mut CmConfig, seed: u64) -> CmStatus {
    guard(|| {
        cfg_mut(cfg)?.seed = seed;
        Ok(())
    })
}

/// # Safety
/// `cfg` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn cm_config_set_blocks(cfg: *mut CmConfig, blocks: u64) -> CmStatus {
    guard(|| {
        cfg_mut(cfg)?.blocks_per_point = blocks as usize;
        Ok(())
    })
}

/// Sets the pilot count and gives the rest of the block to the payload.
///
/// # Safety
/// `cfg` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn cm_config_set_pilots(cfg: *mut CmConfig, pilots: u64) -> CmStatus {
    guard(|| {
        let c = cfg_mut(cfg)?;
        c.pilots = pilots as usize;
        c.payload = c.block_len.saturating_sub(c.pilots);
        Ok(())
    })
}

/// # Safety
/// `cfg` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn cm_config_set_pa(cfg: *mut CmConfig, enabled: bool) -> CmStatus {
    guard(|| {
        cfg_mut(cfg)?.pa.enabled = enabled;
        Ok(())
    })
}

/// # Safety
/// `cfg` must be a live handle and `values` must point to `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn cm_config_set_ebn0(cfg: *mut CmConfig, values: *const f64, len: usize) -> CmStatus {
    guard(|| {
        let c = cfg_mut(cfg)?;
        if values.is_null() {
            return Err(null("values"));
        }
        c.ebn0_db = std::slice::from_raw_parts(values, len).to_vec();
        Ok(())
    })
}

/// Comma-separated detector names, e.g. `"lmmse,cyclegan"`.
///
/// # Safety
/// `cfg` must be a live handle and `list` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn cm_config_set_detectors(cfg: *mut CmConfig, list: *const c_char) -> CmStatus {
    guard(|| {
        let c = cfg_mut(cfg)?;
        c.detectors = harness::parse_detector_list(str_arg(list, "list")?).map_err(lib_err)?;
        Ok(())
    })
}

/// Checks the config without running anything.
///
/// # Safety
/// `cfg` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn cm_config_validate(cfg: *const CmConfig) -> CmStatus {
    guard(|| cfg.as_ref().ok_or_else(|| null("config"))?.inner.validate().map_err(lib_err))
}

/// Runs the full sweep. Blocks until done.
///
/// # Safety
/// `cfg` must be a live handle; `out` as in [`cm_config_new`].
#[no_mangle]
pub unsafe extern "C" fn cm_run(cfg: *const CmConfig, out: *mut *mut CmResults) -> CmStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let c = cfg.as_ref().ok_or_else(|| null("config"))?;
        let records = harness::run_experiment(&c.inner).map_err(lib_err)?;
        *out = Box::into_raw(Box::new(CmResults { records }));
        Ok(())
    })
}

/// Number of rows, or 0 for a null handle.
///
/// # Safety
/// `res` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn cm_results_len(res: *const CmResults) -> usize {
    res.as_ref().map_or(0, |r| r.records.len())
}

/// # Safety
/// `res` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn cm_results_get(res: *const CmResults, index: usize, out: *mut CmRecord) -> CmStatus {
    guard(|| {
        let r = res.as_ref().ok_or_else(|| null("results"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let rec = r
            .records
            .get(index)
            .ok_or_else(|| (CmStatus::OutOfRange, format!("index {index} out of {}", r.records.len())))?;
        *out = rec.into();
        Ok(())
    })
}

/// Writes the rows as the harness CSV.
///
/// # Safety
/// `res` must be a live handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn cm_results_write_csv(res: *const CmResults, path: *const c_char) -> CmStatus {
    guard(|| {
        let r = res.as_ref().ok_or_else(|| null("results"))?;
        let path = str_arg(path, "path")?;
        harness::write_csv(&r.records, Path::new(path)).map_err(lib_err)
    })
}

/// # Safety
/// `res` must come from [`cm_run`] and not be used afterwards. Null is a no-op.
#[no_mangle]
pub unsafe extern "C" fn cm_results_free(res: *mut CmResults) {
    if !res.is_null() {
        drop(Box::from_raw(res));
    }
}

/// Fraction of differing bytes between two bit arrays of length `len`.
///
/// # Safety
/// `detected` and `truth` must point to `len` bytes; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cm_ber(detected: *const u8, truth: *const u8, len: usize, out: *mut f64) -> CmStatus {
    guard(|| {
        if detected.is_null() || truth.is_null() {
            return Err(null("bits"));
        }
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let a = std::slice::from_raw_parts(detected, len);
        let b = std::slice::from_raw_parts(truth, len);
        *out = harness::ber(a, b).map_err(lib_err)?;
        Ok(())
    })
}

/// Hard-decision rate in bits per channel use.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cm_achievable_rate(
    ber: f64,
    bits_per_symbol: u32,
    streams: u32,
    payload_fraction: f64,
    out: *mut f64,
) -> CmStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = harness::achievable_rate(ber, bits_per_symbol as usize, streams as usize, payload_fraction)
            .map_err(lib_err)?;
        Ok(())
    })
}
