//! C interface: opaque model and identifier handles, status codes, and a
//! per-thread last-error message.
//!
//! Every function returns a [`HotrStatus`]. Output buffers are caller-owned;
//! when one is too short the call fails with `HOTR_STATUS_BUFFER_TOO_SMALL`
//! and reports the required length through `written`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;

use hotr_core::config::ExperimentConfig;
use hotr_core::error::Error;
use hotr_core::fe::{eigenmodes, Beam, Structure};
use hotr_core::hbm::solve_mhb_with;
use hotr_core::hotr::{tr_nonlinear, tr_surrogate, upper_pairs, Method, TransmissibilityRecord};
use hotr_core::identify::{run_ga, ForwardModel, GaConfig, ParameterSpace, IDENTIFICATION_ORDER};
use hotr_core::linalg::C64;
use hotr_core::rom::{rb_model, SubBuilder};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HotrStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidInput = 2,
    NotConverged = 3,
    Numerical = 4,
    BufferTooSmall = 5,
    Panic = 6,
    Undefined = 7,
}

/// Values of the `kind` argument of [`hotr_model_new`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HotrModelKind {
    Full = 0,
    Rb = 1,
    Sub = 2,
}

impl HotrModelKind {
    fn from_raw(v: i32) -> Option<Self> {
        [Self::Full, Self::Rb, Self::Sub]
            .into_iter()
            .find(|k| *k as i32 == v)
    }
}

/// Values of the `method` argument of [`hotr_model_transmissibility`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HotrMethod {
    Nonlinear = 0,
    Surrogate = 1,
}

impl HotrMethod {
    fn from_raw(v: i32) -> Option<Self> {
        [Self::Nonlinear, Self::Surrogate]
            .into_iter()
            .find(|k| *k as i32 == v)
    }
}

/// A cracked (or healthy) beam model.
pub struct HotrModel {
    config: ExperimentConfig,
    structure: Structure,
}

/// Surrogate forward model and search space for crack identification.
pub struct HotrIdentifier {
    config: ExperimentConfig,
    space: ParameterSpace,
    forward: ForwardModel,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct HotrIdentification {
    pub location_index: usize,
    pub depth_percent: u32,
    /// Objective at the best candidate, percent.
    pub j: f64,
    pub generations: usize,
    pub evaluations: usize,
    pub reached_threshold: bool,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_last_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(e: &Error) -> HotrStatus {
    match e {
        Error::AtFrequency { source, .. } => status_of(source),
        Error::InvalidInput(_) | Error::Config { .. } | Error::Json(_) => HotrStatus::InvalidInput,
        Error::NotConverged { .. } => HotrStatus::NotConverged,
        Error::UndefinedTransmissibility { .. } => HotrStatus::Undefined,
        Error::Singular { .. } | Error::Integration(_) | Error::Cache(_) | Error::Io(_) => {
            HotrStatus::Numerical
        }
    }
}

enum Fail {
    Status(HotrStatus, String),
    Core(Error),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Core(e)
    }
}

fn null() -> Fail {
    Fail::Status(HotrStatus::NullPointer, "null pointer argument".into())
}

fn invalid(msg: &str) -> Fail {
    Fail::Status(HotrStatus::InvalidInput, msg.into())
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> HotrStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_last_error(String::new());
            HotrStatus::Ok
        }
        Ok(Err(Fail::Status(s, msg))) => {
            set_last_error(msg);
            s
        }
        Ok(Err(Fail::Core(e))) => {
            set_last_error(e.to_string());
            status_of(&e)
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_last_error(format!("panic: {msg}"));
            HotrStatus::Panic
        }
    }
}

/// # Safety
/// `json` is null or a NUL-terminated string.
unsafe fn read_config(json: *const c_char) -> Result<ExperimentConfig, Fail> {
    if json.is_null() {
        return Ok(ExperimentConfig::default());
    }
    let text = CStr::from_ptr(json)
        .to_str()
        .map_err(|_| invalid("configuration is not UTF-8"))?;
    Ok(ExperimentConfig::from_json(text)?)
}

/// # Safety
/// `buf` is valid for `cap` writes unless `cap` is zero; `written` is valid.
unsafe fn write_out(
    values: &[f64],
    buf: *mut f64,
    cap: usize,
    written: *mut usize,
) -> Result<(), Fail> {
    if written.is_null() || (buf.is_null() && cap > 0) {
        return Err(null());
    }
    *written = values.len();
    if cap < values.len() {
        return Err(Fail::Status(
            HotrStatus::BufferTooSmall,
            format!("buffer holds {cap} values, {} needed", values.len()),
        ));
    }
    if !values.is_empty() {
        std::ptr::copy_nonoverlapping(values.as_ptr(), buf, values.len());
    }
    Ok(())
}

fn omega(freq_hz: f64) -> Result<f64, Fail> {
    if !(freq_hz > 0.0 && freq_hz.is_finite()) {
        return Err(invalid("frequency must be positive"));
    }
    Ok(2.0 * std::f64::consts::PI * freq_hz)
}

/// Library version, NUL-terminated, static.
#[no_mangle]
pub extern "C" fn hotr_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copy the calling thread's last error message (NUL-terminated) into
/// `buf`. `written` receives the length including the terminator.
///
/// # Safety
/// `buf` is valid for `cap` bytes unless `cap` is zero; `written` is valid.
#[no_mangle]
pub unsafe extern "C" fn hotr_last_error_message(
    buf: *mut c_char,
    cap: usize,
    written: *mut usize,
) -> HotrStatus {
    if written.is_null() || (buf.is_null() && cap > 0) {
        return HotrStatus::NullPointer;
    }
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        let bytes = msg.as_bytes();
        *written = bytes.len() + 1;
        if cap < bytes.len() + 1 {
            return HotrStatus::BufferTooSmall;
        }
        std::ptr::copy_nonoverlapping(bytes.as_ptr(), buf.cast::<u8>(), bytes.len());
        *buf.add(bytes.len()) = 0;
        HotrStatus::Ok
    })
}

/// Build a model from a JSON configuration (null for defaults). The crack
/// is the configured one.
///
/// # Safety
/// `config_json` is null or NUL-terminated; `out` is valid.
#[no_mangle]
pub unsafe extern "C" fn hotr_model_new(
    config_json: *const c_char,
    kind: i32,
    out: *mut *mut HotrModel,
) -> HotrStatus {
    guard(|| {
        if out.is_null() {
            return Err(null());
        }
        *out = std::ptr::null_mut();
        let kind = HotrModelKind::from_raw(kind).ok_or_else(|| invalid("unknown model kind"))?;
        let config = read_config(config_json)?;
        let beam = Arc::new(Beam::new(config.beam.clone())?);
        let crack = config.crack.as_ref();
        let structure = match kind {
            HotrModelKind::Full => beam.structure(crack)?,
            HotrModelKind::Rb => rb_model(&beam, crack, config.rom.modes)?.structure,
            HotrModelKind::Sub => {
                let sb = SubBuilder::new(
                    beam.clone(),
                    config.rom.split,
                    config.rom.modes,
                    ExperimentConfig::cache_dir(),
                )?;
                sb.model(crack)?.structure
            }
        };
        *out = Box::into_raw(Box::new(HotrModel { config, structure }));
        Ok(())
    })
}

/// # Safety
/// `model` is null or a handle from [`hotr_model_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn hotr_model_free(model: *mut HotrModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Coordinate, gauge and contact-pair counts.
///
/// # Safety
/// `model` is a live handle; the output pointers are valid.
#[no_mangle]
pub unsafe extern "C" fn hotr_model_size(
    model: *const HotrModel,
    dofs: *mut usize,
    sensors: *mut usize,
    contact_pairs: *mut usize,
) -> HotrStatus {
    guard(|| {
        let m = model.as_ref().ok_or_else(null)?;
        if dofs.is_null() || sensors.is_null() || contact_pairs.is_null() {
            return Err(null());
        }
        *dofs = m.structure.system.n();
        *sensors = m.structure.sensors.len();
        *contact_pairs = m.structure.system.nc();
        Ok(())
    })
}

/// Lowest `count` natural frequencies in Hz, crack held closed.
///
/// # Safety
/// `model` is a live handle; `buf` is valid for `cap` values; `written` is
/// valid.
#[no_mangle]
pub unsafe extern "C" fn hotr_model_eigenfrequencies(
    model: *const HotrModel,
    count: usize,
    buf: *mut f64,
    cap: usize,
    written: *mut usize,
) -> HotrStatus {
    guard(|| {
        let m = model.as_ref().ok_or_else(null)?;
        if count == 0 {
            return Err(invalid("count must be positive"));
        }
        if written.is_null() {
            return Err(null());
        }
        if cap < count {
            *written = count;
            return Err(Fail::Status(
                HotrStatus::BufferTooSmall,
                format!("{count} values needed"),
            ));
        }
        let f = eigenmodes(&m.structure.system, count)?.freqs_hz();
        write_out(&f, buf, cap, written)
    })
}

/// Harmonic-balance gauge strains at `freq_hz` with the configured AFT
/// settings. Layout: gauge-major, orders 0..=h, interleaved (re, im).
///
/// # Safety
/// `model` is a live handle; `buf` is valid for `cap` values; `written` is
/// valid.
#[no_mangle]
pub unsafe extern "C" fn hotr_model_solve_hbm(
    model: *const HotrModel,
    freq_hz: f64,
    buf: *mut f64,
    cap: usize,
    written: *mut usize,
) -> HotrStatus {
    guard(|| {
        let m = model.as_ref().ok_or_else(null)?;
        let w = omega(freq_hz)?;
        let h = m.config.aft.harmonics;
        let needed = 2 * (h + 1) * m.structure.sensors.len();
        if written.is_null() {
            return Err(null());
        }
        if cap < needed {
            *written = needed;
            return Err(Fail::Status(
                HotrStatus::BufferTooSmall,
                format!("{needed} values needed"),
            ));
        }
        let sol = solve_mhb_with(&m.structure.system, w, m.config.aft, None, &m.config.newton)?;
        let mut v = Vec::with_capacity(needed);
        for row in &m.structure.sensors {
            for p in 0..=h {
                let c = sol.output(row, p);
                v.extend([c.re, c.im]);
            }
        }
        write_out(&v, buf, cap, written)
    })
}

/// Order-`order` transmissibility over the gauge pairs (m, n), m < n, in
/// lexicographic order, interleaved (re, im).
///
/// # Safety
/// `model` is a live handle; `buf` is valid for `cap` values; `written` is
/// valid.
#[no_mangle]
pub unsafe extern "C" fn hotr_model_transmissibility(
    model: *const HotrModel,
    freq_hz: f64,
    order: usize,
    method: i32,
    buf: *mut f64,
    cap: usize,
    written: *mut usize,
) -> HotrStatus {
    guard(|| {
        let m = model.as_ref().ok_or_else(null)?;
        let method = HotrMethod::from_raw(method).ok_or_else(|| invalid("unknown method"))?;
        let w = omega(freq_hz)?;
        if order == 0 || order > m.config.aft.harmonics {
            return Err(invalid("order must lie in 1..=harmonics"));
        }
        let s = &m.structure;
        let pairs = upper_pairs(s.sensors.len());
        let records = match method {
            HotrMethod::Nonlinear => {
                let sol = solve_mhb_with(&s.system, w, m.config.aft, None, &m.config.newton)?;
                tr_nonlinear(&sol, &s.sensors, &pairs, order)?
            }
            HotrMethod::Surrogate => tr_surrogate(&s.system, w, &s.sensors, &pairs, order)?,
        };
        let v: Vec<f64> = records
            .iter()
            .flat_map(|r| [r.value.re, r.value.im])
            .collect();
        write_out(&v, buf, cap, written)
    })
}

/// Build the substructured forward model at the configured measurement
/// frequency and the configured search space.
///
/// # Safety
/// `config_json` is null or NUL-terminated; `out` is valid.
#[no_mangle]
pub unsafe extern "C" fn hotr_identifier_new(
    config_json: *const c_char,
    out: *mut *mut HotrIdentifier,
) -> HotrStatus {
    guard(|| {
        if out.is_null() {
            return Err(null());
        }
        *out = std::ptr::null_mut();
        let config = read_config(config_json)?;
        let beam = Arc::new(Beam::new(config.beam.clone())?);
        let sb = SubBuilder::new(
            beam,
            config.rom.split,
            config.rom.modes,
            ExperimentConfig::cache_dir(),
        )?;
        let forward = ForwardModel::new(Arc::new(sb), omega(config.frequency.freq_hz)?)?;
        let space = ParameterSpace::new(
            config.rom.split.crack_lines().collect(),
            config.identification.depths.clone(),
        )?;
        *out = Box::into_raw(Box::new(HotrIdentifier {
            config,
            space,
            forward,
        }));
        Ok(())
    })
}

/// # Safety
/// `ident` is null or a handle from [`hotr_identifier_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn hotr_identifier_free(ident: *mut HotrIdentifier) {
    if !ident.is_null() {
        drop(Box::from_raw(ident));
    }
}

/// Number of (re, im) values a measurement holds: one per ordered gauge
/// pair (m, n), m ≠ n, lexicographic.
///
/// # Safety
/// `ident` is a live handle; `len` is valid.
#[no_mangle]
pub unsafe extern "C" fn hotr_identifier_measurement_len(
    ident: *const HotrIdentifier,
    len: *mut usize,
) -> HotrStatus {
    guard(|| {
        let id = ident.as_ref().ok_or_else(null)?;
        if len.is_null() {
            return Err(null());
        }
        *len = 2 * id.forward.pairs().len();
        Ok(())
    })
}

/// Second-order transmissibility of a hypothetical crack from the
/// surrogate, in the measurement layout.
///
/// # Safety
/// `ident` is a live handle; `buf` is valid for `cap` values; `written` is
/// valid.
#[no_mangle]
pub unsafe extern "C" fn hotr_identifier_simulate(
    ident: *const HotrIdentifier,
    location_index: usize,
    depth_percent: u32,
    buf: *mut f64,
    cap: usize,
    written: *mut usize,
) -> HotrStatus {
    guard(|| {
        let id = ident.as_ref().ok_or_else(null)?;
        let crack = hotr_core::fe::CrackSpec::new(location_index, depth_percent);
        let entry = id.forward.simulate(&crack);
        let records = entry.as_ref().as_ref().map_err(|e| invalid(e))?;
        let v: Vec<f64> = records
            .iter()
            .flat_map(|r| [r.value.re, r.value.im])
            .collect();
        write_out(&v, buf, cap, written)
    })
}

/// Run the genetic search against a measured transmissibility set.
///
/// # Safety
/// `ident` is a live handle; `measured` is valid for `len` values; `out`
/// is valid.
#[no_mangle]
pub unsafe extern "C" fn hotr_identifier_run(
    ident: *const HotrIdentifier,
    measured: *const f64,
    len: usize,
    seed: u64,
    out: *mut HotrIdentification,
) -> HotrStatus {
    guard(|| {
        let id = ident.as_ref().ok_or_else(null)?;
        if measured.is_null() || out.is_null() {
            return Err(null());
        }
        let pairs = id.forward.pairs();
        if len != 2 * pairs.len() {
            return Err(invalid("measurement length does not match the gauge pairs"));
        }
        let values = std::slice::from_raw_parts(measured, len);
        if values.iter().any(|v| !v.is_finite()) {
            return Err(invalid("measurement contains non-finite values"));
        }
        let records: Vec<TransmissibilityRecord> = pairs
            .iter()
            .zip(values.chunks_exact(2))
            .map(|(&(m, n), c)| TransmissibilityRecord {
                order: IDENTIFICATION_ORDER,
                m,
                n,
                omega: id.forward.omega(),
                value: C64::new(c[0], c[1]),
                method: Method::Measured,
            })
            .collect();
        let cfg = GaConfig {
            seed,
            stop_below: id
                .config
                .ga
                .stop_below
                .or(Some(GaConfig::threshold_for_noise(
                    id.config.identification.noise_percent,
                ))),
            ..id.config.ga
        };
        let space = &id.space;
        let r = run_ga(space, &cfg, |t| {
            id.forward.objective(&space.crack(t), &records)
        })?;
        *out = HotrIdentification {
            location_index: r.crack.location_index,
            depth_percent: r.crack.depth_percent,
            j: r.j,
            generations: r.trace.len(),
            evaluations: r.evaluations,
            reached_threshold: r.reached_threshold,
        };
        Ok(())
    })
}
