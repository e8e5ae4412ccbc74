//! Classic (CDF-1/CDF-2) NetCDF reader for CF-style gridded output.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use netcdf3::{DataSet, DataVector, FileReader, Variable};

use super::{
    normalize_axis, normalize_depth_sign, CatalogEntry, Dataset, IngestError, Layout, Source,
    TimeAxis, VariableMap,
};
use crate::grid::Axis;

fn nc_err(path: &Path, e: impl std::fmt::Display) -> IngestError {
    IngestError::format(path, e.to_string())
}

fn to_f64(data: DataVector) -> Vec<f64> {
    match data {
        DataVector::I8(v) => v.into_iter().map(f64::from).collect(),
        DataVector::U8(v) => v.into_iter().map(f64::from).collect(),
        DataVector::I16(v) => v.into_iter().map(f64::from).collect(),
        DataVector::I32(v) => v.into_iter().map(f64::from).collect(),
        DataVector::F32(v) => v.into_iter().map(f64::from).collect(),
        DataVector::F64(v) => v,
    }
}

/// First element of a numeric attribute, widened to f64.
fn attr_f64(var: &Variable, name: &str) -> Option<f64> {
    var.get_attr_f64(name)
        .and_then(|a| a.first().copied())
        .or_else(|| {
            var.get_attr_f32(name)
                .and_then(|a| a.first().map(|&x| f64::from(x)))
        })
        .or_else(|| {
            var.get_attr_i32(name)
                .and_then(|a| a.first().map(|&x| f64::from(x)))
        })
        .or_else(|| {
            var.get_attr_i16(name)
                .and_then(|a| a.first().map(|&x| f64::from(x)))
        })
        .or_else(|| {
            var.get_attr_i8(name)
                .and_then(|a| a.first().map(|&x| f64::from(x)))
        })
}

/// Per-variable decoding: fill detection happens on the stored value, then
/// CF packing (`scale_factor`, `add_offset`) is applied.
#[derive(Debug, Clone)]
struct Decode {
    fill: Option<f64>,
    missing: Option<f64>,
    scale: f64,
    offset: f64,
}

impl Decode {
    fn new(var: &Variable, fill_override: Option<f64>) -> Self {
        Self {
            fill: fill_override.or_else(|| attr_f64(var, "_FillValue")),
            missing: attr_f64(var, "missing_value"),
            scale: attr_f64(var, "scale_factor").unwrap_or(1.0),
            offset: attr_f64(var, "add_offset").unwrap_or(0.0),
        }
    }

    fn apply(&self, raw: Vec<f64>, is_f32: bool) -> Vec<f64> {
        // Compare f32 data against an f32-rounded fill so a double attribute
        // still matches.
        let same = |a: f64, b: f64| if is_f32 { a as f32 == b as f32 } else { a == b };
        raw.into_iter()
            .map(|x| {
                if !x.is_finite()
                    || self.fill.is_some_and(|f| same(x, f))
                    || self.missing.is_some_and(|m| same(x, m))
                {
                    f64::NAN
                } else {
                    x * self.scale + self.offset
                }
            })
            .collect()
    }
}

#[derive(Debug)]
struct VarInfo {
    name: String,
    layout: Layout,
    /// Position of the time dimension in the variable's dimension list.
    time_pos: usize,
    shape: Vec<usize>,
    record: bool,
    decode: Decode,
    is_f32: bool,
}

#[derive(Debug)]
struct NcSource {
    path: PathBuf,
    vars: Vec<VarInfo>,
}

impl NcSource {
    fn read_var(&self, info: &VarInfo, t: usize) -> Result<Vec<f64>, IngestError> {
        let mut reader = FileReader::open(&self.path).map_err(|e| nc_err(&self.path, e))?;
        let raw = if info.record {
            to_f64(
                reader
                    .read_record(&info.name, t)
                    .map_err(|e| nc_err(&self.path, e))?,
            )
        } else {
            let all = to_f64(
                reader
                    .read_var(&info.name)
                    .map_err(|e| nc_err(&self.path, e))?,
            );
            // Gather the hyperslab at time index t from a non-record array.
            let outer: usize = info.shape[..info.time_pos].iter().product();
            let inner: usize = info.shape[info.time_pos + 1..].iter().product();
            let nt = info.shape[info.time_pos];
            let mut out = Vec::with_capacity(outer * inner);
            for o in 0..outer {
                let start = (o * nt + t) * inner;
                out.extend_from_slice(&all[start..start + inner]);
            }
            out
        };
        Ok(info
            .layout
            .canonicalize(&info.decode.apply(raw, info.is_f32)))
    }
}

impl Source for NcSource {
    fn read(&self, name: &str, t: usize) -> Result<Vec<f64>, IngestError> {
        let info = self
            .vars
            .iter()
            .find(|v| v.name == name)
            .ok_or_else(|| IngestError::MissingVariable(name.to_string()))?;
        self.read_var(info, t)
    }

    fn location(&self) -> Option<&Path> {
        Some(&self.path)
    }
}

fn read_coordinate(
    path: &Path,
    reader: &mut FileReader,
    name: &str,
) -> Result<Option<Vec<f64>>, IngestError> {
    if reader.data_set().get_var(name).is_none() {
        return Ok(None);
    }
    let data = reader.read_var(name).map_err(|e| nc_err(path, e))?;
    Ok(Some(to_f64(data)))
}

pub(super) fn open(path: &Path, map: &VariableMap) -> Result<Dataset, IngestError> {
    let mut reader = FileReader::open(path).map_err(|e| nc_err(path, e))?;
    for dim in [&map.lon, &map.lat, &map.depth, &map.time] {
        if !reader.data_set().has_dim(dim) {
            return Err(IngestError::DimensionMismatch(format!(
                "dimension `{dim}` not found"
            )));
        }
    }
    let coord = |reader: &mut FileReader, name: &str| -> Result<Vec<f64>, IngestError> {
        read_coordinate(path, reader, name)?
            .ok_or_else(|| IngestError::MissingVariable(name.to_string()))
    };
    let lon = coord(&mut reader, &map.lon)?;
    let lat = coord(&mut reader, &map.lat)?;
    let mut depth = coord(&mut reader, &map.depth)?;
    let time_values = read_coordinate(path, &mut reader, &map.time)?;

    let ds: &DataSet = reader.data_set();
    let units = |name: &str| {
        ds.get_var(name)
            .and_then(|v| v.get_attr_as_string("units"))
            .unwrap_or_default()
    };
    let (lon, rev_lon) = normalize_axis(&map.lon, lon)?;
    let (lat, rev_lat) = normalize_axis(&map.lat, lat)?;
    let positive = ds
        .get_var(&map.depth)
        .and_then(|v| v.get_attr_as_string("positive"));
    normalize_depth_sign(&mut depth, positive.as_deref());
    let (depth, rev_depth) = normalize_axis(&map.depth, depth)?;
    let nt = ds.dim_size(&map.time).unwrap_or(0);
    let time = match time_values {
        Some(values) => TimeAxis::new(map.time.clone(), units(&map.time), values)?,
        None => TimeAxis::indices(map.time.clone(), nt),
    };
    if time.len() != nt || nt == 0 {
        return Err(IngestError::DimensionMismatch(format!(
            "time dimension has {nt} steps, coordinate has {}",
            time.len()
        )));
    }
    let lon = Axis::new(map.lon.clone(), lon, units(&map.lon))?;
    let lat = Axis::new(map.lat.clone(), lat, units(&map.lat))?;
    let depth = Axis::new(map.depth.clone(), depth, units(&map.depth))?;
    let dims = (lon.len(), lat.len(), depth.len());
    let reversed = [rev_lon, rev_lat, rev_depth];

    let mut catalog = Vec::new();
    let mut vars = Vec::new();
    for (role, name) in map.mapped() {
        let var = ds
            .get_var(name)
            .ok_or_else(|| IngestError::MissingVariable(name.to_string()))?;
        let dim_names = var.dim_names();
        let shape: Vec<usize> = var.get_dims().iter().map(|d| d.size()).collect();
        let find = |d: &str| dim_names.iter().position(|n| n == d);
        let (Some(ti), Some(xi), Some(yi), Some(zi)) = (
            find(&map.time),
            find(&map.lon),
            find(&map.lat),
            find(&map.depth),
        ) else {
            return Err(IngestError::DimensionMismatch(format!(
                "variable `{name}` has dimensions {dim_names:?}, expected time, depth, latitude and longitude"
            )));
        };
        if dim_names.len() != 4 || (var.is_record_var() && ti != 0) {
            return Err(IngestError::DimensionMismatch(format!(
                "variable `{name}` has dimensions {dim_names:?}; expected 4 with time first if it is the record dimension"
            )));
        }
        // Strides of the per-timestep block (time dimension removed).
        let spatial: Vec<usize> = (0..4).filter(|&d| d != ti).collect();
        let stride_of = |d: usize| -> usize {
            let p = spatial.iter().position(|&s| s == d).expect("spatial dim");
            spatial[p + 1..].iter().map(|&s| shape[s]).product()
        };
        let layout = Layout {
            dims,
            strides: [stride_of(xi), stride_of(yi), stride_of(zi)],
            reversed,
        };
        vars.push(VarInfo {
            name: name.to_string(),
            layout,
            time_pos: ti,
            shape,
            record: var.is_record_var(),
            decode: Decode::new(var, map.fill_value),
            is_f32: var.data_type() == netcdf3::DataType::F32,
        });
        catalog.push(CatalogEntry {
            role,
            name: name.to_string(),
            units: var.get_attr_as_string("units").unwrap_or_default(),
        });
    }
    let source = NcSource {
        path: path.to_path_buf(),
        vars,
    };
    Dataset::assemble(lon, lat, depth, time, catalog, Arc::new(source))
}
