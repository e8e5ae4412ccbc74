//! Output writers: legacy VTK for geometry and grids, CSV tables and JSON
//! records.

pub mod vtk;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;

use crate::eddy::EddyProfile;
use crate::fronts::{Track, TrackGraph};
use crate::profile::DepthProfile;

pub use vtk::{PolyData, RectilinearData};

#[derive(Debug, Error)]
pub enum ExportError {
    #[error("cannot write {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("write failed: {0}")]
    Stream(#[from] io::Error),
    #[error("CSV encoding failed: {0}")]
    Csv(#[from] csv::Error),
    #[error("JSON encoding failed: {0}")]
    Json(#[from] serde_json::Error),
}

/// Creates `path` and hands a buffered writer to `f`, attaching the path to
/// any I/O error.
pub fn write_file<F>(path: impl AsRef<Path>, f: F) -> Result<(), ExportError>
where
    F: FnOnce(&mut BufWriter<File>) -> Result<(), ExportError>,
{
    let path = path.as_ref();
    let io_err = |source| ExportError::Io {
        path: path.to_path_buf(),
        source,
    };
    let file = File::create(path).map_err(io_err)?;
    let mut w = BufWriter::new(file);
    f(&mut w)?;
    w.flush().map_err(io_err)
}

pub fn write_json<T: Serialize + ?Sized>(w: &mut impl Write, value: &T) -> Result<(), ExportError> {
    serde_json::to_writer_pretty(&mut *w, value)?;
    writeln!(w)?;
    Ok(())
}

fn cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Tidy table with one row per (timestep, level): `t, time, depth`, one
/// column per variable (empty when masked) and a `masked` flag.
pub fn write_profile_csv(w: impl Write, profiles: &[DepthProfile]) -> Result<(), ExportError> {
    let mut out = csv::Writer::from_writer(w);
    if let Some(first) = profiles.first() {
        let mut header = vec!["t".to_string(), "time".into(), "depth".into()];
        header.extend(first.columns.iter().map(|(v, _)| v.name().to_string()));
        header.push("masked".into());
        out.write_record(&header)?;
    }
    for p in profiles {
        for (k, z) in p.depths.iter().enumerate() {
            let mut row = vec![p.t.to_string(), p.time.to_string(), z.to_string()];
            row.extend(p.columns.iter().map(|(_, c)| cell(c[k])));
            row.push(u8::from(p.is_masked(k)).to_string());
            out.write_record(&row)?;
        }
    }
    out.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct EddyRow<'a> {
    eddy_id: usize,
    t: usize,
    time: f64,
    level: usize,
    depth: f64,
    lon: f64,
    lat: f64,
    persistence: Option<f64>,
    rotation: &'a str,
    vorticity: f64,
    radius_east: f64,
    radius_west: f64,
    radius_north: f64,
    radius_south: f64,
}

/// One row per eddy layer; infinite persistence is left empty.
pub fn write_eddy_csv(
    w: impl Write,
    t: usize,
    time: f64,
    eddies: &[EddyProfile],
) -> Result<(), ExportError> {
    let mut out = csv::Writer::from_writer(w);
    for (eddy_id, e) in eddies.iter().enumerate() {
        for layer in &e.layers {
            let c = &layer.centre;
            out.serialize(EddyRow {
                eddy_id,
                t,
                time,
                level: c.level,
                depth: c.position.depth,
                lon: c.position.lon,
                lat: c.position.lat,
                persistence: Some(c.persistence).filter(|p| p.is_finite()),
                rotation: match layer.rotation {
                    crate::eddy::Rotation::Cyclonic => "cyclonic",
                    crate::eddy::Rotation::Anticyclonic => "anticyclonic",
                },
                vorticity: layer.vorticity,
                radius_east: layer.radii.east,
                radius_west: layer.radii.west,
                radius_north: layer.radii.north,
                radius_south: layer.radii.south,
            })?;
        }
    }
    if eddies.is_empty() {
        out.write_record([
            "eddy_id",
            "t",
            "time",
            "level",
            "depth",
            "lon",
            "lat",
            "persistence",
            "rotation",
            "vorticity",
            "radius_east",
            "radius_west",
            "radius_north",
            "radius_south",
        ])?;
    }
    out.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct TrackRow {
    track_id: usize,
    t: usize,
    front: usize,
    lon: f64,
    lat: f64,
    depth: f64,
    size: usize,
}

/// One row per front along each track.
pub fn write_tracks_csv(
    w: impl Write,
    graph: &TrackGraph,
    tracks: &[Track],
) -> Result<(), ExportError> {
    let mut out = csv::Writer::from_writer(w);
    let mut any = false;
    for (track_id, track) in tracks.iter().enumerate() {
        for f in track.fronts.iter().filter_map(|&id| graph.front(id)) {
            any = true;
            out.serialize(TrackRow {
                track_id,
                t: f.id.t,
                front: f.id.index,
                lon: f.centroid.lon,
                lat: f.centroid.lat,
                depth: f.centroid.depth,
                size: f.size,
            })?;
        }
    }
    if !any {
        out.write_record(["track_id", "t", "front", "lon", "lat", "depth", "size"])?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fronts::{FrontId, SurfaceFront};
    use crate::grid::Position;
    use crate::profile::ProfileVariable;

    #[test]
    fn profile_table() {
        let p = DepthProfile {
            lon: 1.0,
            lat: 2.0,
            t: 3,
            time: 1.5,
            depths: vec![0.0, 10.0],
            columns: vec![(ProfileVariable::Speed, vec![Some(0.25), None])],
        };
        let mut buf = Vec::new();
        write_profile_csv(&mut buf, &[p]).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "t,time,depth,speed,masked\n3,1.5,0,0.25,0\n3,1.5,10,,1\n"
        );
    }

    #[test]
    fn track_table() {
        let front = |t| SurfaceFront {
            id: FrontId { t, index: 0 },
            nodes: vec![t, t + 1],
            centroid: Position::new(t as f64, 0.5, 2.0),
            size: 2,
        };
        let g = TrackGraph::from_fronts(vec![(0, vec![front(0)]), (1, vec![front(1)])], None);
        let tracks = crate::fronts::extract_tracks(&g, 1);
        let mut buf = Vec::new();
        write_tracks_csv(&mut buf, &g, &tracks).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "track_id,t,front,lon,lat,depth,size\n0,0,0,0.0,0.5,2.0,2\n0,1,0,1.0,0.5,2.0,2\n"
        );
        let mut buf = Vec::new();
        write_tracks_csv(&mut buf, &g, &[]).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "track_id,t,front,lon,lat,depth,size\n"
        );
    }
}
