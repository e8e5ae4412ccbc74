//! Raw test format: a JSON header describing axes and variables, plus one
//! little-endian `f32` file per variable in `(time, depth, lat, lon)` order.
//!
//! ```json
//! {
//!   "format": "oceanflow-raw",
//!   "version": 1,
//!   "dims": ["time", "depth", "latitude", "longitude"],
//!   "axes": {"depth": {"units": "m", "values": [0.5, 10.0]}, ...},
//!   "fill_value": 1e20,
//!   "variables": [{"name": "so", "units": "psu", "file": "so.f32"}]
//! }
//! ```

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{
    normalize_axis, normalize_depth_sign, CatalogEntry, Dataset, IngestError, Layout, Source,
    TimeAxis, VariableMap,
};
use crate::grid::Axis;

pub const RAW_FORMAT: &str = "oceanflow-raw";
const RAW_VERSION: u32 = 1;
const DEFAULT_FILL: f64 = 1e20;

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawHeader {
    format: String,
    version: u32,
    dims: [String; 4],
    axes: BTreeMap<String, RawAxis>,
    fill_value: f64,
    variables: Vec<RawVariable>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAxis {
    #[serde(default)]
    units: String,
    values: Vec<f64>,
    /// `"up"` marks depth stored as negative-down heights.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    positive: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawVariable {
    name: String,
    #[serde(default)]
    units: String,
    file: String,
}

#[derive(Debug)]
struct RawSource {
    header_path: PathBuf,
    files: BTreeMap<String, PathBuf>,
    layout: Layout,
    fill: f32,
}

impl Source for RawSource {
    fn read(&self, name: &str, t: usize) -> Result<Vec<f64>, IngestError> {
        let path = self
            .files
            .get(name)
            .ok_or_else(|| IngestError::MissingVariable(name.to_string()))?;
        let (nx, ny, nz) = self.layout.dims;
        let n = nx * ny * nz;
        let mut bytes = vec![0u8; n * 4];
        let mut f = File::open(path).map_err(|e| IngestError::io(path, e))?;
        f.seek(SeekFrom::Start((t * n * 4) as u64))
            .and_then(|_| f.read_exact(&mut bytes))
            .map_err(|e| IngestError::io(path, e))?;
        let fill = self.fill;
        let values: Vec<f64> = bytes
            .chunks_exact(4)
            .map(|c| {
                let v = f32::from_le_bytes([c[0], c[1], c[2], c[3]]);
                if v == fill || !v.is_finite() {
                    f64::NAN
                } else {
                    f64::from(v)
                }
            })
            .collect();
        Ok(self.layout.canonicalize(&values))
    }

    fn location(&self) -> Option<&Path> {
        Some(&self.header_path)
    }
}

pub(super) fn open(path: &Path, map: &VariableMap) -> Result<Dataset, IngestError> {
    let text = std::fs::read_to_string(path).map_err(|e| IngestError::io(path, e))?;
    let header: RawHeader =
        serde_json::from_str(&text).map_err(|e| IngestError::format(path, e.to_string()))?;
    if header.format != RAW_FORMAT || header.version != RAW_VERSION {
        return Err(IngestError::format(
            path,
            format!("expected format `{RAW_FORMAT}` version {RAW_VERSION}"),
        ));
    }
    let expected = [&map.time, &map.depth, &map.lat, &map.lon];
    for (slot, (found, want)) in header.dims.iter().zip(expected).enumerate() {
        if found != want {
            return Err(IngestError::DimensionMismatch(format!(
                "raw dimension {slot} is `{found}`, variable map expects `{want}`"
            )));
        }
    }
    let axis = |name: &str| {
        header
            .axes
            .get(name)
            .ok_or_else(|| IngestError::MissingVariable(name.to_string()))
    };
    let (lon, rev_lon) = normalize_axis(&map.lon, axis(&map.lon)?.values.clone())?;
    let (lat, rev_lat) = normalize_axis(&map.lat, axis(&map.lat)?.values.clone())?;
    let depth_axis = axis(&map.depth)?;
    let mut depth_values = depth_axis.values.clone();
    normalize_depth_sign(&mut depth_values, depth_axis.positive.as_deref());
    let (depth, rev_depth) = normalize_axis(&map.depth, depth_values)?;
    let time = match header.axes.get(&map.time) {
        Some(a) => TimeAxis::new(map.time.clone(), a.units.clone(), a.values.clone())?,
        None => return Err(IngestError::MissingVariable(map.time.clone())),
    };
    let lon = Axis::new(map.lon.clone(), lon, axis(&map.lon)?.units.clone())?;
    let lat = Axis::new(map.lat.clone(), lat, axis(&map.lat)?.units.clone())?;
    let depth = Axis::new(map.depth.clone(), depth, depth_axis.units.clone())?;
    let dims = (lon.len(), lat.len(), depth.len());
    let expected_bytes = (time.len() * dims.0 * dims.1 * dims.2 * 4) as u64;

    let dir = path.parent().unwrap_or(Path::new("."));
    let mut catalog = Vec::new();
    let mut files = BTreeMap::new();
    for (role, name) in map.mapped() {
        let var = header
            .variables
            .iter()
            .find(|v| v.name == name)
            .ok_or_else(|| IngestError::MissingVariable(name.to_string()))?;
        let file = dir.join(&var.file);
        let len = std::fs::metadata(&file)
            .map_err(|e| IngestError::io(&file, e))?
            .len();
        if len != expected_bytes {
            return Err(IngestError::DimensionMismatch(format!(
                "{}: {len} bytes, expected {expected_bytes}",
                file.display()
            )));
        }
        catalog.push(CatalogEntry {
            role,
            name: name.to_string(),
            units: var.units.clone(),
        });
        files.insert(name.to_string(), file);
    }
    let fill = map.fill_value.unwrap_or(header.fill_value) as f32;
    let source = RawSource {
        header_path: path.to_path_buf(),
        files,
        layout: Layout::standard(dims, [rev_lon, rev_lat, rev_depth]),
        fill,
    };
    Dataset::assemble(lon, lat, depth, time, catalog, Arc::new(source))
}

/// Writes every catalogued variable of `dataset` in the raw format.
/// Variable files are placed next to the header as `<stem>.<name>.f32`.
/// Values are stored as `f32`; missing values are written as the fill value.
pub fn write_raw(dataset: &Dataset, header_path: impl AsRef<Path>) -> Result<(), IngestError> {
    let header_path = header_path.as_ref();
    let dir = header_path.parent().unwrap_or(Path::new("."));
    let stem = header_path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("dataset")
        .to_string();
    let grid = dataset.grid();
    let time = dataset.time();
    let mut axes = BTreeMap::new();
    for a in [grid.lon(), grid.lat(), grid.depth()] {
        axes.insert(
            a.name().to_string(),
            RawAxis {
                units: a.units().to_string(),
                values: a.values().to_vec(),
                positive: None,
            },
        );
    }
    axes.insert(
        time.name().to_string(),
        RawAxis {
            units: time.units().to_string(),
            values: time.values().to_vec(),
            positive: None,
        },
    );
    let mut variables = Vec::new();
    let fill = DEFAULT_FILL as f32;
    for entry in dataset.catalog() {
        let file = format!("{stem}.{}.f32", entry.name);
        let path = dir.join(&file);
        let out = File::create(&path).map_err(|e| IngestError::io(&path, e))?;
        let mut out = BufWriter::new(out);
        for t in 0..time.len() {
            let values = dataset.load_values(entry.role, t)?;
            for v in values {
                let x = if v.is_finite() { v as f32 } else { fill };
                out.write_all(&x.to_le_bytes())
                    .map_err(|e| IngestError::io(&path, e))?;
            }
        }
        out.flush().map_err(|e| IngestError::io(&path, e))?;
        variables.push(RawVariable {
            name: entry.name.clone(),
            units: entry.units.clone(),
            file,
        });
    }
    let header = RawHeader {
        format: RAW_FORMAT.into(),
        version: RAW_VERSION,
        dims: [
            time.name().to_string(),
            grid.depth().name().to_string(),
            grid.lat().name().to_string(),
            grid.lon().name().to_string(),
        ],
        axes,
        fill_value: DEFAULT_FILL,
        variables,
    };
    let text = serde_json::to_string_pretty(&header).expect("header serializes");
    std::fs::write(header_path, text + "\n").map_err(|e| IngestError::io(header_path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{open_dataset, MemoryVariable, VariableRole};

    fn dataset() -> Dataset {
        let lon = Axis::new("longitude", vec![0.0, 0.5, 1.0, 2.0, 4.0], "degrees_east").unwrap();
        let lat = Axis::new("latitude", vec![-1.0, 0.0, 1.0, 2.0], "degrees_north").unwrap();
        let depth = Axis::new("depth", vec![0.5, 4.0, 12.0], "m").unwrap();
        let time = TimeAxis::new("time", "days since 2020-07-01", vec![0.0, 1.0]).unwrap();
        let steps = |scale: f64| -> Vec<Vec<f64>> {
            (0..2)
                .map(|t| {
                    (0..60)
                        .map(|i| {
                            if i % 13 == 5 {
                                f64::NAN
                            } else {
                                scale * (i + 100 * t) as f64 + 0.25
                            }
                        })
                        .collect()
                })
                .collect()
        };
        Dataset::from_memory(
            lon,
            lat,
            depth,
            time,
            vec![
                MemoryVariable::new(VariableRole::Salinity, "so", "psu", steps(1.0)),
                MemoryVariable::new(VariableRole::U, "uo", "m/s", steps(0.5)),
                MemoryVariable::new(VariableRole::V, "vo", "m/s", steps(-0.5)),
            ],
        )
        .unwrap()
    }

    #[test]
    fn round_trip_is_bit_identical() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("fixture.json");
        let d = dataset();
        write_raw(&d, &path).unwrap();
        let map = VariableMap {
            temperature: None,
            ..VariableMap::default()
        };
        let r = open_dataset(&path, &map).unwrap();
        assert_eq!(**r.grid(), **d.grid());
        assert_eq!(r.time(), d.time());
        for role in [VariableRole::Salinity, VariableRole::U, VariableRole::V] {
            for t in 0..2 {
                let a = d.load_values(role, t).unwrap();
                let b = r.load_values(role, t).unwrap();
                let bits = |v: &[f64]| {
                    v.iter()
                        .map(|x| if x.is_nan() { u64::MAX } else { x.to_bits() })
                        .collect::<Vec<_>>()
                };
                assert_eq!(bits(&a), bits(&b));
            }
        }
    }

    #[test]
    fn missing_mapped_variable() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("fixture.json");
        write_raw(&dataset(), &path).unwrap();
        let err = open_dataset(&path, &VariableMap::default()).unwrap_err();
        assert!(matches!(err, IngestError::MissingVariable(ref n) if n == "thetao"));
    }

    #[test]
    fn descending_depth_is_reordered() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("desc.json");
        // depth stored bottom-up: levels 20, 10, 0 m
        let (nx, ny, nz) = (2, 2, 3);
        let stored: Vec<f32> = (0..nx * ny * nz).map(|i| i as f32).collect();
        let bytes: Vec<u8> = stored.iter().flat_map(|v| v.to_le_bytes()).collect();
        std::fs::write(dir.path().join("desc.so.f32"), bytes).unwrap();
        let header = serde_json::json!({
            "format": RAW_FORMAT, "version": 1,
            "dims": ["time", "depth", "latitude", "longitude"],
            "axes": {
                "time": {"units": "days", "values": [0.0]},
                "depth": {"units": "m", "values": [20.0, 10.0, 0.0]},
                "latitude": {"units": "degrees_north", "values": [0.0, 1.0]},
                "longitude": {"units": "degrees_east", "values": [0.0, 1.0]}
            },
            "fill_value": 1e20,
            "variables": [{"name": "so", "units": "psu", "file": "desc.so.f32"}]
        });
        std::fs::write(&path, header.to_string()).unwrap();
        let map = VariableMap {
            salinity: Some("so".into()),
            ..VariableMap::dims_only("longitude", "latitude", "depth", "time")
        };
        let d = open_dataset(&path, &map).unwrap();
        assert_eq!(d.grid().depth().values(), &[0.0, 10.0, 20.0]);
        let v = d.load_values(VariableRole::Salinity, 0).unwrap();
        // direct read oracle: canonical level k is stored level nz-1-k
        for k in 0..nz {
            for n in 0..nx * ny {
                assert_eq!(
                    v[k * nx * ny + n],
                    f64::from(stored[(nz - 1 - k) * nx * ny + n])
                );
            }
        }
    }
}
