//! Dataset loading: variable-name mapping, the raw test format, classic
//! NetCDF files, per-timestep field loading and region subsetting.
//!
//! Every reader normalizes its data to the canonical in-memory layout
//! (ascending lon/lat/depth, depth positive-down, longitude fastest).

mod netcdf;
mod raw;
mod varmap;

use std::collections::HashMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::Serialize;
use thiserror::Error;

use crate::grid::{Axis, GridError, RectilinearGrid3D, ScalarField, VectorField};

pub use raw::{write_raw, RAW_FORMAT};
pub use varmap::{VariableMap, VariableRole, MAP_KEYS};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("variable `{0}` not found")]
    MissingVariable(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("axis `{0}` is not monotonic")]
    UnsortedAxis(String),
    #[error("timestep {t} out of range (dataset has {len})")]
    TimestepOutOfRange { t: usize, len: usize },
    #[error("subset selects no data along {0}")]
    EmptySubset(&'static str),
    #[error("invalid variable map: {0}")]
    InvalidMap(String),
    #[error("malformed file {path}: {message}")]
    Format { path: PathBuf, message: String },
    #[error(transparent)]
    Grid(#[from] GridError),
}

impl IngestError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub(crate) fn format(path: &Path, message: impl Into<String>) -> Self {
        Self::Format {
            path: path.to_path_buf(),
            message: message.into(),
        }
    }
}

/// Time coordinate. Unlike spatial axes a single timestep is allowed.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimeAxis {
    name: String,
    units: String,
    values: Vec<f64>,
}

impl TimeAxis {
    pub fn new(
        name: impl Into<String>,
        units: impl Into<String>,
        values: Vec<f64>,
    ) -> Result<Self, IngestError> {
        let name = name.into();
        if values.is_empty() {
            return Err(IngestError::DimensionMismatch(format!(
                "time axis `{name}` is empty"
            )));
        }
        if values.iter().any(|v| !v.is_finite()) || values.windows(2).any(|w| w[1] <= w[0]) {
            return Err(IngestError::UnsortedAxis(name));
        }
        Ok(Self {
            name,
            units: units.into(),
            values,
        })
    }

    /// Steps `0, 1, .., n-1` in days; used when a file has no time coordinate.
    pub fn indices(name: impl Into<String>, n: usize) -> Self {
        Self {
            name: name.into(),
            units: "days".into(),
            values: (0..n).map(|t| t as f64).collect(),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn units(&self) -> &str {
        &self.units
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Seconds per unit of the time coordinate, parsed from CF-style
    /// `"<unit> since <epoch>"` strings. Unrecognized units count as seconds.
    pub fn seconds_per_unit(&self) -> f64 {
        let unit = self
            .units
            .split_whitespace()
            .next()
            .unwrap_or("")
            .to_ascii_lowercase();
        match unit.as_str() {
            "d" | "day" | "days" => 86_400.0,
            "h" | "hr" | "hour" | "hours" => 3_600.0,
            "min" | "minute" | "minutes" => 60.0,
            _ => 1.0,
        }
    }

    /// Elapsed seconds from the first timestep to timestep `t`.
    pub fn elapsed_seconds(&self, t: usize) -> f64 {
        (self.values[t] - self.values[0]) * self.seconds_per_unit()
    }

    fn slice(&self, start: usize, end: usize) -> Self {
        Self {
            name: self.name.clone(),
            units: self.units.clone(),
            values: self.values[start..end].to_vec(),
        }
    }
}

/// A variable available in a dataset.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CatalogEntry {
    pub role: VariableRole,
    pub name: String,
    pub units: String,
}

/// Storage behind a dataset. `read` returns one full timestep of a variable
/// in canonical order with fill values replaced by NaN.
pub(crate) trait Source: Send + Sync + fmt::Debug {
    fn read(&self, name: &str, t: usize) -> Result<Vec<f64>, IngestError>;
    fn location(&self) -> Option<&Path>;
}

#[derive(Debug)]
struct MemorySource {
    vars: HashMap<String, Vec<Vec<f64>>>,
}

impl Source for MemorySource {
    fn read(&self, name: &str, t: usize) -> Result<Vec<f64>, IngestError> {
        self.vars
            .get(name)
            .and_then(|steps| steps.get(t))
            .cloned()
            .ok_or_else(|| IngestError::MissingVariable(name.to_string()))
    }

    fn location(&self) -> Option<&Path> {
        None
    }
}

/// In-memory variable used to build a dataset programmatically. `steps[t]`
/// holds one timestep in canonical order; NaN marks missing data.
#[derive(Debug, Clone)]
pub struct MemoryVariable {
    pub role: VariableRole,
    pub name: String,
    pub units: String,
    pub steps: Vec<Vec<f64>>,
}

impl MemoryVariable {
    pub fn new(
        role: VariableRole,
        name: impl Into<String>,
        units: impl Into<String>,
        steps: Vec<Vec<f64>>,
    ) -> Self {
        Self {
            role,
            name: name.into(),
            units: units.into(),
            steps,
        }
    }
}

/// Handle to a gridded, time-varying dataset. Cheap to clone; loads are
/// lazy and independent, so one dataset can serve many workers.
#[derive(Debug, Clone)]
pub struct Dataset {
    grid: Arc<RectilinearGrid3D>,
    time: TimeAxis,
    catalog: Vec<CatalogEntry>,
    source: Arc<dyn Source>,
    /// Full canonical dims of the source (nx, ny, nz).
    source_dims: (usize, usize, usize),
    /// Window origin (i, j, k, t) within the source.
    origin: [usize; 4],
}

impl Dataset {
    pub(crate) fn assemble(
        lon: Axis,
        lat: Axis,
        depth: Axis,
        time: TimeAxis,
        catalog: Vec<CatalogEntry>,
        source: Arc<dyn Source>,
    ) -> Result<Self, IngestError> {
        let first = catalog
            .first()
            .ok_or_else(|| IngestError::InvalidMap("no variables mapped".into()))?;
        let probe = source.read(&first.name, 0)?;
        let land: Vec<bool> = probe.iter().map(|v| !v.is_finite()).collect();
        let source_dims = (lon.len(), lat.len(), depth.len());
        let grid = RectilinearGrid3D::new(lon, lat, depth, land)?;
        Ok(Self {
            grid: Arc::new(grid),
            time,
            catalog,
            source,
            source_dims,
            origin: [0; 4],
        })
    }

    /// Builds a dataset from in-memory arrays. The land mask is taken from
    /// the non-finite entries of the first variable at timestep 0.
    pub fn from_memory(
        lon: Axis,
        lat: Axis,
        depth: Axis,
        time: TimeAxis,
        variables: Vec<MemoryVariable>,
    ) -> Result<Self, IngestError> {
        let n = lon.len() * lat.len() * depth.len();
        let mut vars = HashMap::new();
        let mut catalog = Vec::new();
        for var in variables {
            if var.steps.len() != time.len() {
                return Err(IngestError::DimensionMismatch(format!(
                    "variable `{}` has {} timesteps, time axis has {}",
                    var.name,
                    var.steps.len(),
                    time.len()
                )));
            }
            if let Some(step) = var.steps.iter().find(|s| s.len() != n) {
                return Err(IngestError::DimensionMismatch(format!(
                    "variable `{}` has {} values per timestep, grid has {n}",
                    var.name,
                    step.len()
                )));
            }
            if catalog
                .iter()
                .any(|c: &CatalogEntry| c.role == var.role || c.name == var.name)
            {
                return Err(IngestError::InvalidMap(format!(
                    "duplicate variable `{}`",
                    var.name
                )));
            }
            catalog.push(CatalogEntry {
                role: var.role,
                name: var.name.clone(),
                units: var.units,
            });
            vars.insert(var.name, var.steps);
        }
        catalog.sort_by_key(|c| c.role);
        Self::assemble(
            lon,
            lat,
            depth,
            time,
            catalog,
            Arc::new(MemorySource { vars }),
        )
    }

    pub fn grid(&self) -> &Arc<RectilinearGrid3D> {
        &self.grid
    }

    pub fn time(&self) -> &TimeAxis {
        &self.time
    }

    pub fn catalog(&self) -> &[CatalogEntry] {
        &self.catalog
    }

    pub fn variable(&self, role: VariableRole) -> Option<&CatalogEntry> {
        self.catalog.iter().find(|c| c.role == role)
    }

    pub fn has(&self, role: VariableRole) -> bool {
        self.variable(role).is_some()
    }

    /// Whether vertical velocity is available; when false, vector loads
    /// carry no `w` and integration treats it as zero.
    pub fn has_vertical_velocity(&self) -> bool {
        self.has(VariableRole::W)
    }

    /// File backing the dataset, if any.
    pub fn path(&self) -> Option<&Path> {
        self.source.location()
    }

    fn check_t(&self, t: usize) -> Result<(), IngestError> {
        if t >= self.time.len() {
            return Err(IngestError::TimestepOutOfRange {
                t,
                len: self.time.len(),
            });
        }
        Ok(())
    }

    /// Raw values of a variable at timestep `t` (NaN where missing).
    pub fn load_values(&self, role: VariableRole, t: usize) -> Result<Vec<f64>, IngestError> {
        self.check_t(t)?;
        let entry = self
            .variable(role)
            .ok_or_else(|| IngestError::MissingVariable(role.name().to_string()))?;
        let full = self.source.read(&entry.name, self.origin[3] + t)?;
        Ok(self.crop(full))
    }

    fn crop(&self, full: Vec<f64>) -> Vec<f64> {
        let (sx, sy, _) = self.source_dims;
        let (nx, ny, nz) = self.grid.dims();
        if (nx, ny, nz) == self.source_dims {
            return full;
        }
        let [i0, j0, k0, _] = self.origin;
        let mut out = Vec::with_capacity(nx * ny * nz);
        for k in 0..nz {
            for j in 0..ny {
                let start = ((k0 + k) * sy + j0 + j) * sx + i0;
                out.extend_from_slice(&full[start..start + nx]);
            }
        }
        out
    }

    pub fn load_scalar(&self, role: VariableRole, t: usize) -> Result<ScalarField, IngestError> {
        let values = self.load_values(role, t)?;
        let entry = self.variable(role).expect("checked by load_values");
        Ok(ScalarField::from_values(
            self.grid.clone(),
            entry.name.clone(),
            entry.units.clone(),
            values,
        )?)
    }

    /// Velocity at timestep `t`; `u` and `v` are required, `w` is included
    /// when catalogued.
    pub fn load_vector(&self, t: usize) -> Result<VectorField, IngestError> {
        let u = self.load_values(VariableRole::U, t)?;
        let v = self.load_values(VariableRole::V, t)?;
        let w = if self.has_vertical_velocity() {
            Some(self.load_values(VariableRole::W, t)?)
        } else {
            log::debug!("no vertical velocity mapped; w treated as zero");
            None
        };
        let n = u.len();
        Ok(VectorField::new(self.grid.clone(), u, v, w, vec![true; n])?)
    }

    /// Crops to closed coordinate ranges and a closed timestep range. `None`
    /// keeps an axis whole. At least two nodes must remain on each spatial
    /// axis and one timestep.
    pub fn subset(
        &self,
        lon: Option<(f64, f64)>,
        lat: Option<(f64, f64)>,
        depth: Option<(f64, f64)>,
        time: Option<(usize, usize)>,
    ) -> Result<Self, IngestError> {
        fn window(
            axis: &Axis,
            range: Option<(f64, f64)>,
            label: &'static str,
        ) -> Result<(usize, usize), IngestError> {
            let Some((lo, hi)) = range else {
                return Ok((0, axis.len()));
            };
            let values = axis.values();
            let start = values.partition_point(|&v| v < lo);
            let end = values.partition_point(|&v| v <= hi);
            if end < start + 2 {
                return Err(IngestError::EmptySubset(label));
            }
            Ok((start, end))
        }
        let g = &self.grid;
        let (i0, i1) = window(g.lon(), lon, "longitude")?;
        let (j0, j1) = window(g.lat(), lat, "latitude")?;
        let (k0, k1) = window(g.depth(), depth, "depth")?;
        let (t0, t1) = match time {
            None => (0, self.time.len()),
            Some((a, b)) => {
                let b = b.min(self.time.len().saturating_sub(1));
                if a > b {
                    return Err(IngestError::EmptySubset("time"));
                }
                (a, b + 1)
            }
        };
        let (nx, ny) = (g.lon().len(), g.lat().len());
        let mut land = Vec::with_capacity((i1 - i0) * (j1 - j0) * (k1 - k0));
        for k in k0..k1 {
            for j in j0..j1 {
                let row = (k * ny + j) * nx;
                land.extend_from_slice(&g.land_mask()[row + i0..row + i1]);
            }
        }
        let grid = RectilinearGrid3D::new(
            g.lon().slice(i0, i1 - 1)?,
            g.lat().slice(j0, j1 - 1)?,
            g.depth().slice(k0, k1 - 1)?,
            land,
        )?;
        Ok(Self {
            grid: Arc::new(grid),
            time: self.time.slice(t0, t1),
            catalog: self.catalog.clone(),
            source: self.source.clone(),
            source_dims: self.source_dims,
            origin: [
                self.origin[0] + i0,
                self.origin[1] + j0,
                self.origin[2] + k0,
                self.origin[3] + t0,
            ],
        })
    }
}

/// Opens a dataset, choosing the reader from the file contents: a JSON
/// header for the raw format, otherwise classic NetCDF.
pub fn open_dataset(path: impl AsRef<Path>, map: &VariableMap) -> Result<Dataset, IngestError> {
    let path = path.as_ref();
    map.validate()?;
    let mut magic = [0u8; 4];
    {
        use std::io::Read;
        let mut f = std::fs::File::open(path).map_err(|e| IngestError::io(path, e))?;
        let n = f.read(&mut magic).map_err(|e| IngestError::io(path, e))?;
        if n < 3 {
            return Err(IngestError::format(path, "file too short"));
        }
    }
    if &magic[..3] == b"CDF" {
        netcdf::open(path, map)
    } else if magic.iter().find(|b| !b.is_ascii_whitespace()) == Some(&b'{') {
        raw::open(path, map)
    } else {
        Err(IngestError::format(
            path,
            "neither a NetCDF nor a raw-format header",
        ))
    }
}

/// How one timestep of a file variable maps onto the canonical layout.
#[derive(Debug, Clone)]
pub(crate) struct Layout {
    /// Node counts (nx, ny, nz).
    pub dims: (usize, usize, usize),
    /// Element strides of the lon, lat and depth dimensions in file order.
    pub strides: [usize; 3],
    /// Whether each axis is stored descending.
    pub reversed: [bool; 3],
}

impl Layout {
    /// Standard `(depth, lat, lon)` storage.
    pub fn standard(dims: (usize, usize, usize), reversed: [bool; 3]) -> Self {
        let (nx, ny, _) = dims;
        Self {
            dims,
            strides: [1, nx, nx * ny],
            reversed,
        }
    }

    pub fn is_identity(&self) -> bool {
        let (nx, ny, _) = self.dims;
        self.strides == [1, nx, nx * ny] && self.reversed == [false; 3]
    }

    pub fn canonicalize(&self, src: &[f64]) -> Vec<f64> {
        if self.is_identity() {
            return src.to_vec();
        }
        let (nx, ny, nz) = self.dims;
        let src_index = |n: usize, len: usize, rev: bool| if rev { len - 1 - n } else { n };
        let mut out = Vec::with_capacity(nx * ny * nz);
        for k in 0..nz {
            let ok = src_index(k, nz, self.reversed[2]) * self.strides[2];
            for j in 0..ny {
                let oj = ok + src_index(j, ny, self.reversed[1]) * self.strides[1];
                for i in 0..nx {
                    out.push(src[oj + src_index(i, nx, self.reversed[0]) * self.strides[0]]);
                }
            }
        }
        out
    }
}

/// Normalizes coordinate values to strictly ascending order, returning
/// whether they were stored descending.
pub(crate) fn normalize_axis(
    name: &str,
    mut values: Vec<f64>,
) -> Result<(Vec<f64>, bool), IngestError> {
    if values.windows(2).all(|w| w[1] > w[0]) {
        return Ok((values, false));
    }
    if values.windows(2).all(|w| w[1] < w[0]) {
        values.reverse();
        return Ok((values, true));
    }
    Err(IngestError::UnsortedAxis(name.to_string()))
}

/// Depth coordinates are stored positive-down; a file declaring
/// `positive = "up"` or holding only non-positive depths is negated.
pub(crate) fn normalize_depth_sign(values: &mut [f64], positive: Option<&str>) {
    let up = match positive {
        Some(p) => p.trim().eq_ignore_ascii_case("up"),
        None => values.iter().all(|&z| z <= 0.0) && values.iter().any(|&z| z < 0.0),
    };
    if up {
        for z in values.iter_mut() {
            *z = -*z;
        }
    }
}
