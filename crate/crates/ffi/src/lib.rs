//! C ABI over the oceanflow library.
//!
//! Every object crosses the boundary as an opaque handle created by an
//! `of_*_open`/`of_*_detect`-style constructor and released by the matching
//! `of_*_free`. Functions return an [`OfStatus`]; on failure a message is
//! available from [`of_last_error`] on the same thread. Array getters copy
//! into caller buffers and report the required length, so callers can query
//! with a null buffer first.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use oceanflow::eddy::{detect_eddies_3d, EddyParams, EddyProfile, Rotation};
use oceanflow::fields::{self, DerivedFieldKind};
use oceanflow::fronts::{build_track_graph, extract_tracks, Track, TrackGraph};
use oceanflow::grid::{Position, ScalarField};
use oceanflow::ingest::{open_dataset, Dataset, VariableMap, VariableRole};
use oceanflow::synth::OceanSpec;
use oceanflow::tracer::{integrate_many, Direction, FieldLine, IntegrationParams, Seed};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OfStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    /// The dataset could not be read or is malformed.
    Data = 3,
    OutOfRange = 4,
    /// The caller buffer is too small; the required length was written.
    BufferTooSmall = 5,
    /// A Rust panic was caught at the boundary.
    Internal = 6,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OfRole {
    Salinity = 0,
    Temperature = 1,
    U = 2,
    V = 3,
    W = 4,
}

impl From<OfRole> for VariableRole {
    fn from(r: OfRole) -> Self {
        match r {
            OfRole::Salinity => Self::Salinity,
            OfRole::Temperature => Self::Temperature,
            OfRole::U => Self::U,
            OfRole::V => Self::V,
            OfRole::W => Self::W,
        }
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OfFieldKind {
    Speed = 0,
    SpeedHorizontal = 1,
    VorticityZ = 2,
    CurlMagnitude = 3,
    OkuboWeiss = 4,
}

impl From<OfFieldKind> for DerivedFieldKind {
    fn from(k: OfFieldKind) -> Self {
        match k {
            OfFieldKind::Speed => Self::Speed,
            OfFieldKind::SpeedHorizontal => Self::SpeedHorizontal,
            OfFieldKind::VorticityZ => Self::VorticityZ,
            OfFieldKind::CurlMagnitude => Self::CurlMagnitude,
            OfFieldKind::OkuboWeiss => Self::OkuboWeiss,
        }
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OfAxis {
    Lon = 0,
    Lat = 1,
    Depth = 2,
    Time = 3,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OfPosition {
    pub lon: f64,
    pub lat: f64,
    /// Meters, positive down.
    pub depth: f64,
}

impl From<Position> for OfPosition {
    fn from(p: Position) -> Self {
        Self {
            lon: p.lon,
            lat: p.lat,
            depth: p.depth,
        }
    }
}

/// Streamline settings. `direction` is 0 forward, 1 backward, 2 both.
/// `max_time` is ignored unless positive.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OfTraceParams {
    pub step_length: f64,
    pub max_steps: usize,
    pub min_speed: f64,
    pub include_vertical: bool,
    pub direction: i32,
    pub max_time: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OfEddyInfo {
    /// Centre of the shallowest layer.
    pub centre: OfPosition,
    pub level_first: usize,
    pub level_last: usize,
    /// +1 cyclonic, -1 anticyclonic.
    pub rotation: i32,
    /// NaN when infinite.
    pub persistence: f64,
    pub vorticity: f64,
    pub radius_east: f64,
    pub radius_west: f64,
    pub radius_north: f64,
    pub radius_south: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OfFrontInfo {
    pub t: usize,
    pub index: usize,
    pub centroid: OfPosition,
    pub size: usize,
}

pub struct OfDataset(Dataset);
pub struct OfField(ScalarField);
pub struct OfLines(Vec<FieldLine>);
pub struct OfEddies(Vec<EddyProfile>);
pub struct OfTracks {
    graph: TrackGraph,
    tracks: Vec<Track>,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl ToString) {
    let s = msg.to_string().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(s).unwrap_or_default());
}

struct Fail(OfStatus, String);

impl Fail {
    fn data(e: impl ToString) -> Self {
        Self(OfStatus::Data, e.to_string())
    }

    fn arg(e: impl ToString) -> Self {
        Self(OfStatus::InvalidArgument, e.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> OfStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            OfStatus::Ok
        }
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            OfStatus::Internal
        }
    }
}

unsafe fn deref<'a, T>(p: *const T) -> Result<&'a T, Fail> {
    p.as_ref()
        .ok_or_else(|| Fail(OfStatus::NullPointer, "null handle".into()))
}

unsafe fn out<'a, T>(p: *mut T) -> Result<&'a mut T, Fail> {
    p.as_mut()
        .ok_or_else(|| Fail(OfStatus::NullPointer, "null output pointer".into()))
}

unsafe fn c_str<'a>(p: *const c_char) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(Fail(OfStatus::NullPointer, "null string".into()));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail::arg("string is not UTF-8"))
}

/// Copies `src` into `buf` when it fits; always stores the length in `len`.
unsafe fn copy_out<T: Copy>(
    src: &[T],
    buf: *mut T,
    cap: usize,
    len: *mut usize,
) -> Result<(), Fail> {
    *out(len)? = src.len();
    if buf.is_null() {
        return Ok(());
    }
    if cap < src.len() {
        return Err(Fail(
            OfStatus::BufferTooSmall,
            format!("need {} elements, got {cap}", src.len()),
        ));
    }
    ptr::copy_nonoverlapping(src.as_ptr(), buf, src.len());
    Ok(())
}

fn check_t(d: &Dataset, t: usize) -> Result<(), Fail> {
    if t >= d.time().len() {
        return Err(Fail(
            OfStatus::OutOfRange,
            format!("timestep {t} out of range"),
        ));
    }
    Ok(())
}

fn boxed<T>(v: T) -> *mut T {
    Box::into_raw(Box::new(v))
}

unsafe fn free<T>(p: *mut T) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Message for the last failed call on this thread; empty after success.
/// The pointer stays valid until the next call on this thread.
#[no_mangle]
pub extern "C" fn of_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

#[no_mangle]
pub extern "C" fn of_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Opens a NetCDF file or raw header. `map_toml` may be null for the
/// default variable names.
///
/// # Safety
/// `path` and a non-null `map_toml` must be NUL-terminated strings; `out`
/// must be writable.
#[no_mangle]
pub unsafe extern "C" fn of_dataset_open(
    path: *const c_char,
    map_toml: *const c_char,
    out_ds: *mut *mut OfDataset,
) -> OfStatus {
    guard(|| {
        let slot = out(out_ds)?;
        let path = c_str(path)?;
        let map = if map_toml.is_null() {
            VariableMap::default()
        } else {
            VariableMap::from_toml_str(c_str(map_toml)?).map_err(Fail::arg)?
        };
        let d = open_dataset(Path::new(path), &map).map_err(Fail::data)?;
        *slot = boxed(OfDataset(d));
        Ok(())
    })
}

/// Builds the analytic demo ocean in memory.
///
/// # Safety
/// `out_ds` must be writable.
#[no_mangle]
pub unsafe extern "C" fn of_dataset_synthetic(
    nx: usize,
    ny: usize,
    nz: usize,
    nt: usize,
    out_ds: *mut *mut OfDataset,
) -> OfStatus {
    guard(|| {
        let slot = out(out_ds)?;
        let spec = OceanSpec {
            nx,
            ny,
            nz,
            nt,
            ..OceanSpec::default()
        };
        *slot = boxed(OfDataset(spec.dataset().map_err(Fail::arg)?));
        Ok(())
    })
}

/// # Safety
/// `ds` must be null or a handle from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn of_dataset_free(ds: *mut OfDataset) {
    free(ds)
}

/// # Safety
/// `ds` must be a live handle; output pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn of_dataset_dims(
    ds: *const OfDataset,
    nlon: *mut usize,
    nlat: *mut usize,
    ndepth: *mut usize,
    ntime: *mut usize,
) -> OfStatus {
    guard(|| {
        let d = &deref(ds)?.0;
        let (x, y, z) = d.grid().dims();
        *out(nlon)? = x;
        *out(nlat)? = y;
        *out(ndepth)? = z;
        *out(ntime)? = d.time().len();
        Ok(())
    })
}

/// Copies an axis into `buf` (time in the file's units).
///
/// # Safety
/// `ds` must be a live handle; `buf` null or valid for `cap` doubles.
#[no_mangle]
pub unsafe extern "C" fn of_dataset_axis(
    ds: *const OfDataset,
    axis: OfAxis,
    buf: *mut f64,
    cap: usize,
    len: *mut usize,
) -> OfStatus {
    guard(|| {
        let d = &deref(ds)?.0;
        let g = d.grid();
        let values = match axis {
            OfAxis::Lon => g.lon().values(),
            OfAxis::Lat => g.lat().values(),
            OfAxis::Depth => g.depth().values(),
            OfAxis::Time => d.time().values(),
        };
        copy_out(values, buf, cap, len)
    })
}

/// # Safety
/// `ds` must be a live handle; `out_field` writable.
#[no_mangle]
pub unsafe extern "C" fn of_field_load(
    ds: *const OfDataset,
    role: OfRole,
    t: usize,
    out_field: *mut *mut OfField,
) -> OfStatus {
    guard(|| {
        let slot = out(out_field)?;
        let d = &deref(ds)?.0;
        check_t(d, t)?;
        *slot = boxed(OfField(d.load_scalar(role.into(), t).map_err(Fail::data)?));
        Ok(())
    })
}

/// # Safety
/// `ds` must be a live handle; `out_field` writable.
#[no_mangle]
pub unsafe extern "C" fn of_field_derive(
    ds: *const OfDataset,
    kind: OfFieldKind,
    t: usize,
    out_field: *mut *mut OfField,
) -> OfStatus {
    guard(|| {
        let slot = out(out_field)?;
        let d = &deref(ds)?.0;
        check_t(d, t)?;
        let vf = d.load_vector(t).map_err(Fail::data)?;
        *slot = boxed(OfField(
            fields::derive(&vf, kind.into()).map_err(Fail::data)?,
        ));
        Ok(())
    })
}

/// # Safety
/// `f` must be null or a live field handle.
#[no_mangle]
pub unsafe extern "C" fn of_field_free(f: *mut OfField) {
    free(f)
}

/// Copies node values in `(k * nlat + j) * nlon + i` order; land and
/// invalid nodes are NaN.
///
/// # Safety
/// `f` must be a live handle; `buf` null or valid for `cap` doubles.
#[no_mangle]
pub unsafe extern "C" fn of_field_values(
    f: *const OfField,
    buf: *mut f64,
    cap: usize,
    len: *mut usize,
) -> OfStatus {
    guard(|| {
        let f = &deref(f)?.0;
        let values: Vec<f64> = f
            .values()
            .iter()
            .zip(f.valid())
            .map(|(&v, &ok)| if ok { v } else { f64::NAN })
            .collect();
        copy_out(&values, buf, cap, len)
    })
}

/// Trilinear interpolation at a point.
///
/// # Safety
/// `f` must be a live handle; `value` writable.
#[no_mangle]
pub unsafe extern "C" fn of_field_interpolate(
    f: *const OfField,
    p: OfPosition,
    value: *mut f64,
) -> OfStatus {
    guard(|| {
        let f = &deref(f)?.0;
        let slot = out(value)?;
        *slot = f
            .interpolate(&Position::new(p.lon, p.lat, p.depth))
            .map_err(|e| Fail(OfStatus::OutOfRange, e.to_string()))?;
        Ok(())
    })
}

#[no_mangle]
pub extern "C" fn of_trace_params_default() -> OfTraceParams {
    let p = IntegrationParams::default();
    OfTraceParams {
        step_length: p.step_length,
        max_steps: p.max_steps,
        min_speed: p.min_speed,
        include_vertical: p.include_vertical,
        direction: 0,
        max_time: 0.0,
    }
}

/// Integrates one streamline per seed in the velocity at timestep `t`.
///
/// # Safety
/// `ds` must be a live handle, `seeds` valid for `n` positions, `params`
/// readable and `out_lines` writable.
#[no_mangle]
pub unsafe extern "C" fn of_streamlines(
    ds: *const OfDataset,
    t: usize,
    seeds: *const OfPosition,
    n: usize,
    params: *const OfTraceParams,
    out_lines: *mut *mut OfLines,
) -> OfStatus {
    guard(|| {
        let slot = out(out_lines)?;
        let d = &deref(ds)?.0;
        let p = deref(params)?;
        if seeds.is_null() && n > 0 {
            return Err(Fail(OfStatus::NullPointer, "null seed array".into()));
        }
        check_t(d, t)?;
        let params = IntegrationParams {
            step_length: p.step_length,
            max_steps: p.max_steps,
            min_speed: p.min_speed,
            include_vertical: p.include_vertical,
            direction: match p.direction {
                0 => Direction::Forward,
                1 => Direction::Backward,
                2 => Direction::Both,
                other => return Err(Fail::arg(format!("unknown direction {other}"))),
            },
            max_time: Some(p.max_time).filter(|&m| m > 0.0),
        };
        params.validate().map_err(Fail::arg)?;
        let seeds: Vec<Seed> = if n == 0 {
            Vec::new()
        } else {
            std::slice::from_raw_parts(seeds, n)
                .iter()
                .map(|s| Seed::new(Position::new(s.lon, s.lat, s.depth)))
                .collect()
        };
        let vf = d.load_vector(t).map_err(Fail::data)?;
        *slot = boxed(OfLines(integrate_many(&vf, &seeds, &params)));
        Ok(())
    })
}

/// # Safety
/// `lines` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn of_lines_free(lines: *mut OfLines) {
    free(lines)
}

/// # Safety
/// `lines` must be a live handle; `count` writable.
#[no_mangle]
pub unsafe extern "C" fn of_lines_count(lines: *const OfLines, count: *mut usize) -> OfStatus {
    guard(|| {
        *out(count)? = deref(lines)?.0.len();
        Ok(())
    })
}

unsafe fn line<'a>(lines: *const OfLines, i: usize) -> Result<&'a FieldLine, Fail> {
    deref(lines)?
        .0
        .get(i)
        .ok_or_else(|| Fail(OfStatus::OutOfRange, format!("no line {i}")))
}

/// Vertices of line `i`.
///
/// # Safety
/// `lines` must be a live handle; `buf` null or valid for `cap` positions.
#[no_mangle]
pub unsafe extern "C" fn of_line_vertices(
    lines: *const OfLines,
    i: usize,
    buf: *mut OfPosition,
    cap: usize,
    len: *mut usize,
) -> OfStatus {
    guard(|| {
        let v: Vec<OfPosition> = line(lines, i)?
            .vertices()
            .iter()
            .map(|&p| p.into())
            .collect();
        copy_out(&v, buf, cap, len)
    })
}

/// Termination reason of line `i`: 0 out of domain, 1 masked, 2 max steps,
/// 3 stagnation, 4 time exhausted.
///
/// # Safety
/// `lines` must be a live handle; `reason` writable.
#[no_mangle]
pub unsafe extern "C" fn of_line_termination(
    lines: *const OfLines,
    i: usize,
    reason: *mut i32,
) -> OfStatus {
    guard(|| {
        let l = line(lines, i)?;
        *out(reason)? = l.termination() as i32;
        Ok(())
    })
}

/// Detects eddies at timestep `t`. Non-positive `persistence` or `r_max`
/// select the defaults.
///
/// # Safety
/// `ds` must be a live handle; `out_eddies` writable.
#[no_mangle]
pub unsafe extern "C" fn of_eddies_detect(
    ds: *const OfDataset,
    t: usize,
    persistence: f64,
    r_max: f64,
    out_eddies: *mut *mut OfEddies,
) -> OfStatus {
    guard(|| {
        let slot = out(out_eddies)?;
        let d = &deref(ds)?.0;
        check_t(d, t)?;
        let base = EddyParams::default();
        let params = EddyParams {
            persistence_threshold: if persistence > 0.0 {
                persistence
            } else {
                base.persistence_threshold
            },
            r_max: if r_max > 0.0 { r_max } else { base.r_max },
            ring_fractions: Vec::new(),
            ..base
        };
        let vf = d.load_vector(t).map_err(Fail::data)?;
        *slot = boxed(OfEddies(detect_eddies_3d(&vf, &params)));
        Ok(())
    })
}

/// # Safety
/// `e` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn of_eddies_free(e: *mut OfEddies) {
    free(e)
}

/// # Safety
/// `e` must be a live handle; `count` writable.
#[no_mangle]
pub unsafe extern "C" fn of_eddies_count(e: *const OfEddies, count: *mut usize) -> OfStatus {
    guard(|| {
        *out(count)? = deref(e)?.0.len();
        Ok(())
    })
}

/// # Safety
/// `e` must be a live handle; `info` writable.
#[no_mangle]
pub unsafe extern "C" fn of_eddy_get(
    e: *const OfEddies,
    i: usize,
    info: *mut OfEddyInfo,
) -> OfStatus {
    guard(|| {
        let slot = out(info)?;
        let eddy = deref(e)?
            .0
            .get(i)
            .ok_or_else(|| Fail(OfStatus::OutOfRange, format!("no eddy {i}")))?;
        let top = &eddy.layers[0];
        let (first, last) = eddy.level_range();
        let r = eddy.boundary_radii();
        *slot = OfEddyInfo {
            centre: top.centre.position.into(),
            level_first: first,
            level_last: last,
            rotation: match eddy.rotation() {
                Rotation::Cyclonic => 1,
                Rotation::Anticyclonic => -1,
            },
            persistence: Some(top.centre.persistence)
                .filter(|p| p.is_finite())
                .unwrap_or(f64::NAN),
            vorticity: top.vorticity,
            radius_east: r.east,
            radius_west: r.west,
            radius_north: r.north,
            radius_south: r.south,
        };
        Ok(())
    })
}

/// Tracks surface fronts of `lo <= role <= hi` over timesteps
/// `t_first..=t_last`. A negative `min_jaccard` keeps every overlap link.
///
/// # Safety
/// `ds` must be a live handle; `out_tracks` writable.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn of_fronts_track(
    ds: *const OfDataset,
    role: OfRole,
    lo: f64,
    hi: f64,
    t_first: usize,
    t_last: usize,
    min_length: usize,
    min_jaccard: f64,
    out_tracks: *mut *mut OfTracks,
) -> OfStatus {
    guard(|| {
        let slot = out(out_tracks)?;
        let d = &deref(ds)?.0;
        check_t(d, t_first)?;
        check_t(d, t_last)?;
        let jaccard = Some(min_jaccard).filter(|&j| j >= 0.0);
        let graph = build_track_graph(d, role.into(), (lo, hi), Some((t_first, t_last)), jaccard)
            .map_err(Fail::arg)?;
        let tracks = extract_tracks(&graph, min_length);
        *slot = boxed(OfTracks { graph, tracks });
        Ok(())
    })
}

/// # Safety
/// `t` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn of_tracks_free(t: *mut OfTracks) {
    free(t)
}

/// Number of tracks, and of fronts and links in the underlying graph.
///
/// # Safety
/// `t` must be a live handle; non-null outputs writable.
#[no_mangle]
pub unsafe extern "C" fn of_tracks_count(
    t: *const OfTracks,
    tracks: *mut usize,
    fronts: *mut usize,
    links: *mut usize,
) -> OfStatus {
    guard(|| {
        let t = deref(t)?;
        *out(tracks)? = t.tracks.len();
        if let Some(f) = fronts.as_mut() {
            *f = t.graph.node_count();
        }
        if let Some(l) = links.as_mut() {
            *l = t.graph.edges().len();
        }
        Ok(())
    })
}

/// Fronts along track `i`, in time order.
///
/// # Safety
/// `t` must be a live handle; `buf` null or valid for `cap` entries.
#[no_mangle]
pub unsafe extern "C" fn of_track_fronts(
    t: *const OfTracks,
    i: usize,
    buf: *mut OfFrontInfo,
    cap: usize,
    len: *mut usize,
) -> OfStatus {
    guard(|| {
        let t = deref(t)?;
        let track = t
            .tracks
            .get(i)
            .ok_or_else(|| Fail(OfStatus::OutOfRange, format!("no track {i}")))?;
        let infos: Vec<OfFrontInfo> = track
            .fronts
            .iter()
            .filter_map(|&id| t.graph.front(id))
            .map(|f| OfFrontInfo {
                t: f.id.t,
                index: f.id.index,
                centroid: f.centroid.into(),
                size: f.size,
            })
            .collect();
        copy_out(&infos, buf, cap, len)
    })
}
