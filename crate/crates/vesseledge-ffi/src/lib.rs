//! C ABI over the VesselEdge pipeline.
//!
//! Conventions: every fallible call returns a [`VeStatus`]; results travel
//! through out-parameters. Handles ([`VeModel`]) are opaque and owned by
//! the caller until freed with the matching `*_free`. Strings are
//! NUL-terminated UTF-8. A textual description of the most recent error on
//! the current thread is available from [`ve_last_error_message`].

use std::cell::RefCell;
use std::collections::BTreeSet;
use std::ffi::{c_char, CStr, CString};
use std::path::Path;

use vesseledge::anomaly::{self, ModelConfig, ModelError, PrototypeModel};
use vesseledge::compress::{bwc_dr_with_boost, BudgetSpec, WindowBatch};
use vesseledge::core_model::{haversine_m, AisRecord, GeoPoint, TimeWindow, VesselId};
use vesseledge::ingest;
use vesseledge::wire;

/// Status code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VeStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    IoError = 3,
    FormatError = 4,
    /// Operation needs state the handle does not have (e.g. an
    /// uncalibrated model asked to flag).
    StateError = 5,
    BufferTooSmall = 6,
    Internal = 7,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::new("").unwrap());
}

fn set_error(message: &str) {
    let owned = CString::new(message.replace('\0', "?")).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = owned);
}

fn fail(status: VeStatus, message: &str) -> VeStatus {
    set_error(message);
    status
}

/// Empty slices may arrive as (null, 0); `from_raw_parts` must not see
/// the null.
unsafe fn slice_or_empty<'a, T>(ptr: *const T, len: usize) -> &'a [T] {
    if len == 0 {
        &[]
    } else {
        unsafe { std::slice::from_raw_parts(ptr, len) }
    }
}

fn model_error_status(e: &ModelError) -> VeStatus {
    match e {
        ModelError::Uncalibrated => VeStatus::StateError,
        ModelError::Format(_) => VeStatus::FormatError,
        ModelError::EmptyTrainingSet
        | ModelError::EmptyHoldout
        | ModelError::InvalidQuantile(_)
        | ModelError::ConfigMismatch(_)
        | ModelError::InvalidRecord(_) => VeStatus::InvalidArgument,
    }
}

/// Message describing the most recent error on this thread. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn ve_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Crate version as a static string.
#[no_mangle]
pub extern "C" fn ve_version() -> *const c_char {
    static VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), "\0");
    VERSION.as_ptr() as *const c_char
}

// --- movement model --------------------------------------------------------

/// Opaque handle to a movement-anomaly model.
pub struct VeModel {
    inner: PrototypeModel,
}

unsafe fn path_from(ptr: *const c_char) -> Result<&'static Path, VeStatus> {
    if ptr.is_null() {
        return Err(fail(VeStatus::NullPointer, "path is null"));
    }
    match unsafe { CStr::from_ptr(ptr) }.to_str() {
        Ok(s) => Ok(Path::new(s)),
        Err(_) => Err(fail(VeStatus::InvalidArgument, "path is not valid utf-8")),
    }
}

fn read_clean_csv(path: &Path) -> Result<Vec<AisRecord>, VeStatus> {
    let (records, _) = ingest::read_dma_csv(path).map_err(|e| match e {
        ingest::IngestError::Io(_) => fail(VeStatus::IoError, &e.to_string()),
        _ => fail(VeStatus::FormatError, &e.to_string()),
    })?;
    let (cleaned, _) = ingest::clean(records, ingest::CleanParams::default());
    Ok(cleaned)
}

/// Trains a model from a DMA-schema CSV. On success `*out_model` owns the
/// new handle.
///
/// # Safety
/// `csv_path` must be a NUL-terminated string and `out_model` a valid
/// pointer.
#[no_mangle]
pub unsafe extern "C" fn ve_model_train_csv(
    csv_path: *const c_char,
    cell_size_deg: f64,
    max_components: u32,
    seed: u64,
    out_model: *mut *mut VeModel,
) -> VeStatus {
    if out_model.is_null() {
        return fail(VeStatus::NullPointer, "out_model is null");
    }
    let path = match unsafe { path_from(csv_path) } {
        Ok(p) => p,
        Err(s) => return s,
    };
    if cell_size_deg.is_nan() || cell_size_deg <= 0.0 || max_components == 0 {
        return fail(VeStatus::InvalidArgument, "bad model parameters");
    }
    let records = match read_clean_csv(path) {
        Ok(r) => r,
        Err(s) => return s,
    };
    let config = ModelConfig {
        cell_size_deg,
        max_components: max_components as usize,
        seed,
        ..Default::default()
    };
    match anomaly::train(records.iter(), &config) {
        Ok(model) => {
            unsafe { *out_model = Box::into_raw(Box::new(VeModel { inner: model })) };
            VeStatus::Ok
        }
        Err(e) => fail(model_error_status(&e), &e.to_string()),
    }
}

/// Loads a model file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out_model` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ve_model_load(
    path: *const c_char,
    out_model: *mut *mut VeModel,
) -> VeStatus {
    if out_model.is_null() {
        return fail(VeStatus::NullPointer, "out_model is null");
    }
    let path = match unsafe { path_from(path) } {
        Ok(p) => p,
        Err(s) => return s,
    };
    let bytes = match std::fs::read(path) {
        Ok(b) => b,
        Err(e) => return fail(VeStatus::IoError, &e.to_string()),
    };
    match anomaly::deserialize(&bytes) {
        Ok(model) => {
            unsafe { *out_model = Box::into_raw(Box::new(VeModel { inner: model })) };
            VeStatus::Ok
        }
        Err(e) => fail(model_error_status(&e), &e.to_string()),
    }
}

/// Writes the model file (statistical content; calibration is re-run after
/// loading).
///
/// # Safety
/// `model` must be a live handle; `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn ve_model_save(model: *const VeModel, path: *const c_char) -> VeStatus {
    let Some(model) = (unsafe { model.as_ref() }) else {
        return fail(VeStatus::NullPointer, "model is null");
    };
    let path = match unsafe { path_from(path) } {
        Ok(p) => p,
        Err(s) => return s,
    };
    match std::fs::write(path, anomaly::serialize(&model.inner)) {
        Ok(()) => VeStatus::Ok,
        Err(e) => fail(VeStatus::IoError, &e.to_string()),
    }
}

/// Calibrates the flagging threshold to the q-th percentile of the holdout
/// CSV's scores.
///
/// # Safety
/// `model` must be a live handle; `csv_path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn ve_model_calibrate_csv(
    model: *mut VeModel,
    csv_path: *const c_char,
    quantile: f64,
) -> VeStatus {
    let Some(model) = (unsafe { model.as_mut() }) else {
        return fail(VeStatus::NullPointer, "model is null");
    };
    let path = match unsafe { path_from(csv_path) } {
        Ok(p) => p,
        Err(s) => return s,
    };
    let records = match read_clean_csv(path) {
        Ok(r) => r,
        Err(s) => return s,
    };
    match anomaly::calibrate_threshold(&mut model.inner, records.iter(), quantile) {
        Ok(()) => VeStatus::Ok,
        Err(e) => fail(model_error_status(&e), &e.to_string()),
    }
}

fn record_for_features(
    lat: f64,
    lon: f64,
    sog_kn: f64,
    cog_deg: f64,
) -> Result<AisRecord, VeStatus> {
    AisRecord::new(
        VesselId::new(0).expect("zero mmsi valid"),
        0,
        lat,
        lon,
        sog_kn,
        cog_deg,
        None,
    )
    .map_err(|e| fail(VeStatus::InvalidArgument, &e.to_string()))
}

/// Log density of the movement under the model's cell prototype; very
/// negative for cells the model has never seen.
///
/// # Safety
/// `model` must be a live handle and `out_score` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ve_model_score(
    model: *const VeModel,
    lat: f64,
    lon: f64,
    sog_kn: f64,
    cog_deg: f64,
    out_score: *mut f64,
) -> VeStatus {
    let Some(model) = (unsafe { model.as_ref() }) else {
        return fail(VeStatus::NullPointer, "model is null");
    };
    if out_score.is_null() {
        return fail(VeStatus::NullPointer, "out_score is null");
    }
    let rec = match record_for_features(lat, lon, sog_kn, cog_deg) {
        Ok(r) => r,
        Err(s) => return s,
    };
    unsafe { *out_score = anomaly::score(&model.inner, &rec) };
    VeStatus::Ok
}

/// True iff the movement scores strictly below the calibrated threshold.
/// Fails with `StateError` on an uncalibrated model.
///
/// # Safety
/// `model` must be a live handle and `out_flag` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ve_model_flag(
    model: *const VeModel,
    lat: f64,
    lon: f64,
    sog_kn: f64,
    cog_deg: f64,
    out_flag: *mut bool,
) -> VeStatus {
    let Some(model) = (unsafe { model.as_ref() }) else {
        return fail(VeStatus::NullPointer, "model is null");
    };
    if out_flag.is_null() {
        return fail(VeStatus::NullPointer, "out_flag is null");
    }
    let rec = match record_for_features(lat, lon, sog_kn, cog_deg) {
        Ok(r) => r,
        Err(s) => return s,
    };
    match anomaly::flag(&model.inner, &rec) {
        Ok(v) => {
            unsafe { *out_flag = v };
            VeStatus::Ok
        }
        Err(e) => fail(model_error_status(&e), &e.to_string()),
    }
}

/// Records absorbed by the model; 0 for a null handle.
///
/// # Safety
/// `model` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn ve_model_trained_count(model: *const VeModel) -> u64 {
    unsafe { model.as_ref() }.map_or(0, |m| m.inner.trained_count)
}

/// Merges models cell-wise, weighting shared cells by `weights` (typically
/// the per-model trained counts). The result is uncalibrated.
///
/// # Safety
/// `models` must point to `count` live handles, `weights` to `count`
/// values, and `out_model` must be valid.
#[no_mangle]
pub unsafe extern "C" fn ve_model_federate(
    models: *const *const VeModel,
    weights: *const u64,
    count: usize,
    out_model: *mut *mut VeModel,
) -> VeStatus {
    if models.is_null() || weights.is_null() || out_model.is_null() {
        return fail(VeStatus::NullPointer, "null argument");
    }
    if count == 0 {
        return fail(VeStatus::InvalidArgument, "no models to federate");
    }
    let handles = unsafe { std::slice::from_raw_parts(models, count) };
    let weights = unsafe { std::slice::from_raw_parts(weights, count) };
    let mut owned = Vec::with_capacity(count);
    for &h in handles {
        match unsafe { h.as_ref() } {
            Some(m) => owned.push(m.inner.clone()),
            None => return fail(VeStatus::NullPointer, "model handle is null"),
        }
    }
    match anomaly::federate(&owned, weights) {
        Ok(merged) => {
            unsafe { *out_model = Box::into_raw(Box::new(VeModel { inner: merged })) };
            VeStatus::Ok
        }
        Err(e) => fail(model_error_status(&e), &e.to_string()),
    }
}

/// Frees a model handle; null is a no-op.
///
/// # Safety
/// `model` must be a handle produced by this library, freed at most once.
#[no_mangle]
pub unsafe extern "C" fn ve_model_free(model: *mut VeModel) {
    if !model.is_null() {
        drop(unsafe { Box::from_raw(model) });
    }
}

// --- wire codec -------------------------------------------------------------

/// One fixed-width wire point (18 bytes on the wire).
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VeWirePoint {
    pub mmsi: u32,
    /// Seconds after the window start.
    pub time_offset_s: u8,
    /// Latitude in 1e-6 degree units.
    pub lat_e6: i32,
    /// Longitude in 1e-6 degree units.
    pub lon_e6: i32,
    /// Speed over ground in tenths of knots.
    pub sog_dkn: u16,
    /// Course over ground in tenths of degrees.
    pub cog_ddeg: u16,
    /// Bit 0: anomaly flag.
    pub flags: u8,
}

impl From<&VeWirePoint> for wire::WirePoint {
    fn from(p: &VeWirePoint) -> Self {
        wire::WirePoint {
            mmsi: p.mmsi,
            time_offset_s: p.time_offset_s,
            lat_e6: p.lat_e6,
            lon_e6: p.lon_e6,
            sog_dkn: p.sog_dkn,
            cog_ddeg: p.cog_ddeg,
            flags: p.flags,
        }
    }
}

impl From<&wire::WirePoint> for VeWirePoint {
    fn from(p: &wire::WirePoint) -> Self {
        VeWirePoint {
            mmsi: p.mmsi,
            time_offset_s: p.time_offset_s,
            lat_e6: p.lat_e6,
            lon_e6: p.lon_e6,
            sog_dkn: p.sog_dkn,
            cog_ddeg: p.cog_ddeg,
            flags: p.flags,
        }
    }
}

/// Exact byte size of a packet carrying `point_count` points.
#[no_mangle]
pub extern "C" fn ve_packet_size(point_count: usize) -> usize {
    wire::packet_size(point_count)
}

/// Encodes points into `out`; `*out_written` receives the packet size.
/// Fails with `BufferTooSmall` when `out_capacity` is insufficient.
///
/// # Safety
/// `points` must reference `count` elements; `out` must have
/// `out_capacity` writable bytes; `out_written` must be valid.
#[no_mangle]
pub unsafe extern "C" fn ve_packet_encode(
    window_index: u32,
    edge_id: u16,
    points: *const VeWirePoint,
    count: usize,
    out: *mut u8,
    out_capacity: usize,
    out_written: *mut usize,
) -> VeStatus {
    if (points.is_null() && count > 0) || out.is_null() || out_written.is_null() {
        return fail(VeStatus::NullPointer, "null argument");
    }
    let points = unsafe { slice_or_empty(points, count) };
    let wire_points: Vec<wire::WirePoint> = points.iter().map(Into::into).collect();
    let bytes = match wire::encode_points(window_index, edge_id, &wire_points) {
        Ok(b) => b,
        Err(e) => return fail(VeStatus::InvalidArgument, &e.to_string()),
    };
    if bytes.len() > out_capacity {
        return fail(
            VeStatus::BufferTooSmall,
            &format!("need {} bytes, have {}", bytes.len(), out_capacity),
        );
    }
    unsafe {
        std::ptr::copy_nonoverlapping(bytes.as_ptr(), out, bytes.len());
        *out_written = bytes.len();
    }
    VeStatus::Ok
}

/// Decodes and CRC-checks a packet into `out_points`.
///
/// # Safety
/// `bytes` must reference `len` readable bytes; `out_points` must have
/// room for `out_capacity` elements; the remaining out-pointers must be
/// valid.
#[no_mangle]
pub unsafe extern "C" fn ve_packet_decode(
    bytes: *const u8,
    len: usize,
    out_window_index: *mut u32,
    out_edge_id: *mut u16,
    out_points: *mut VeWirePoint,
    out_capacity: usize,
    out_count: *mut usize,
) -> VeStatus {
    if bytes.is_null()
        || out_window_index.is_null()
        || out_edge_id.is_null()
        || out_count.is_null()
        || (out_points.is_null() && out_capacity > 0)
    {
        return fail(VeStatus::NullPointer, "null argument");
    }
    let data = unsafe { std::slice::from_raw_parts(bytes, len) };
    // any positive duration works here: the caller gets the raw index
    let packet = match wire::decode(data, 30) {
        Ok(p) => p,
        Err(e) => {
            let status = match e {
                wire::WireError::Corrupt { .. }
                | wire::WireError::Truncated { .. }
                | wire::WireError::Version(_) => VeStatus::FormatError,
                _ => VeStatus::InvalidArgument,
            };
            return fail(status, &e.to_string());
        }
    };
    if packet.points.len() > out_capacity {
        unsafe { *out_count = packet.points.len() };
        return fail(
            VeStatus::BufferTooSmall,
            &format!(
                "need room for {} points, have {}",
                packet.points.len(),
                out_capacity
            ),
        );
    }
    unsafe {
        *out_window_index = packet.window.index as u32;
        *out_edge_id = packet.edge_id;
        for (i, p) in packet.points.iter().enumerate() {
            *out_points.add(i) = p.into();
        }
        *out_count = packet.points.len();
    }
    VeStatus::Ok
}

// --- window compression ------------------------------------------------------

/// One position report handed to the compressor.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VeAisPoint {
    pub mmsi: u32,
    /// UTC seconds since the epoch.
    pub timestamp: i64,
    pub lat: f64,
    pub lon: f64,
    pub sog_kn: f64,
    pub cog_deg: f64,
    pub anomaly: bool,
}

/// Budget-constrained selection over one window of points.
///
/// `kept_mask[i]` is set iff input point i survives. The budget keeps
/// `max(round(fraction * count), vessels * floor)` points, never more than
/// the input. Vessels listed in `boosted_mmsi` (or flagged via `anomaly`)
/// have their finite priorities multiplied by `boost_factor`. Points must
/// lie inside the window and carry unique (mmsi, timestamp) pairs.
///
/// # Safety
/// `points` must reference `count` elements and `kept_mask` must have room
/// for `count` booleans; `boosted_mmsi` must reference `boosted_count`
/// values (it may be null when `boosted_count` is 0); `out_kept_count`
/// must be valid.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn ve_window_compress(
    points: *const VeAisPoint,
    count: usize,
    window_index: i64,
    window_seconds: u32,
    fraction: f64,
    floor: u32,
    boost_factor: f64,
    boosted_mmsi: *const u32,
    boosted_count: usize,
    kept_mask: *mut bool,
    out_kept_count: *mut usize,
) -> VeStatus {
    if (points.is_null() && count > 0)
        || kept_mask.is_null()
        || out_kept_count.is_null()
        || (boosted_mmsi.is_null() && boosted_count > 0)
    {
        return fail(VeStatus::NullPointer, "null argument");
    }
    if boost_factor.is_nan() || boost_factor <= 0.0 {
        return fail(VeStatus::InvalidArgument, "boost factor must be positive");
    }
    let window = match TimeWindow::from_index(window_index, window_seconds) {
        Ok(w) => w,
        Err(e) => return fail(VeStatus::InvalidArgument, &e.to_string()),
    };
    let budget = match BudgetSpec::with_floor(fraction, floor as usize) {
        Ok(b) => b,
        Err(e) => return fail(VeStatus::InvalidArgument, &e.to_string()),
    };

    let raw = unsafe { slice_or_empty(points, count) };
    let mut records = Vec::with_capacity(count);
    for p in raw {
        let vessel = match VesselId::new(p.mmsi) {
            Ok(v) => v,
            Err(e) => return fail(VeStatus::InvalidArgument, &e.to_string()),
        };
        let mut rec =
            match AisRecord::new(vessel, p.timestamp, p.lat, p.lon, p.sog_kn, p.cog_deg, None) {
                Ok(r) => r,
                Err(e) => return fail(VeStatus::InvalidArgument, &e.to_string()),
            };
        rec.anomaly = p.anomaly;
        records.push(rec);
    }
    let mut boosted: BTreeSet<VesselId> = BTreeSet::new();
    if boosted_count > 0 {
        for &mmsi in unsafe { slice_or_empty(boosted_mmsi, boosted_count) } {
            match VesselId::new(mmsi) {
                Ok(v) => {
                    boosted.insert(v);
                }
                Err(e) => return fail(VeStatus::InvalidArgument, &e.to_string()),
            }
        }
    }
    let batch = match WindowBatch::new(window, records.iter().copied()) {
        Ok(b) => b,
        Err(e) => return fail(VeStatus::InvalidArgument, &e.to_string()),
    };
    boosted.extend(batch.flagged_vessels());

    let selection = match bwc_dr_with_boost(&batch, &budget, &boosted, boost_factor) {
        Ok(s) => s,
        Err(e) => return fail(VeStatus::InvalidArgument, &e.to_string()),
    };
    let kept: std::collections::HashSet<(u32, i64)> = selection
        .kept_flat()
        .map(|r| (r.vessel.mmsi(), r.timestamp))
        .collect();
    let mut kept_count = 0;
    for (i, p) in raw.iter().enumerate() {
        let keep = kept.contains(&(p.mmsi, p.timestamp));
        unsafe { *kept_mask.add(i) = keep };
        if keep {
            kept_count += 1;
        }
    }
    unsafe { *out_kept_count = kept_count };
    VeStatus::Ok
}

// --- geodesy -----------------------------------------------------------------

/// Great-circle distance in meters; negative when a coordinate is out of
/// range.
#[no_mangle]
pub extern "C" fn ve_haversine_m(lat1: f64, lon1: f64, lat2: f64, lon2: f64) -> f64 {
    let (Ok(a), Ok(b)) = (GeoPoint::new(lat1, lon1), GeoPoint::new(lat2, lon2)) else {
        set_error("coordinate out of range");
        return -1.0;
    };
    haversine_m(a, b).unwrap_or(-1.0)
}
