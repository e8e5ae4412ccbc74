//! Legacy ASCII VTK writers.
//!
//! Coordinates are written as `x = lon`, `y = lat`, `z = -depth` so that z
//! points up in a viewer. Missing values are written as `nan`.

use std::io::{self, Write};
use std::ops::Range;

use crate::eddy::{EddyProfile, LineShape};
use crate::fronts::{Track, TrackGraph};
use crate::grid::{Position, ScalarField};
use crate::profile::{IsoDepthMap, VerticalSlice};
use crate::tracer::FieldLine;

/// Shortest round-trip text for a float, with `nan`/`inf` spelled the way
/// VTK readers accept them.
pub(crate) fn num(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.into()
    } else if x == 0.0 {
        "0".into()
    } else if (1e-5..1e16).contains(&x.abs()) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

fn write_array(w: &mut impl Write, values: &[f64]) -> io::Result<()> {
    for chunk in values.chunks(9) {
        let line: Vec<String> = chunk.iter().map(|&v| num(v)).collect();
        writeln!(w, "{}", line.join(" "))?;
    }
    Ok(())
}

fn write_scalars(w: &mut impl Write, name: &str, values: &[f64]) -> io::Result<()> {
    writeln!(w, "SCALARS {} double 1", sanitize(name))?;
    writeln!(w, "LOOKUP_TABLE default")?;
    write_array(w, values)
}

/// VTK array names cannot contain whitespace.
fn sanitize(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_whitespace() { '_' } else { c })
        .collect()
}

fn point(p: &Position) -> [f64; 3] {
    [p.lon, p.lat, -p.depth]
}

/// Polylines with per-point and per-line attributes.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PolyData {
    pub points: Vec<[f64; 3]>,
    pub lines: Vec<Range<usize>>,
    pub point_arrays: Vec<(String, Vec<f64>)>,
    pub cell_arrays: Vec<(String, Vec<f64>)>,
}

impl PolyData {
    /// Field lines with `time`, `speed` and any sampled scalars per point
    /// and `line_id`, `termination` per line (termination as the index in
    /// out_of_domain, masked, max_steps, stagnation, time_exhausted).
    pub fn from_field_lines(lines: &[FieldLine]) -> Self {
        let mut pd = Self::default();
        let scalar_names: Vec<String> = lines
            .first()
            .map(|l| l.scalars().iter().map(|(n, _)| n.clone()).collect())
            .unwrap_or_default();
        let mut time = Vec::new();
        let mut speed = Vec::new();
        let mut scalars = vec![Vec::new(); scalar_names.len()];
        let mut ids = Vec::new();
        let mut term = Vec::new();
        for (id, line) in lines.iter().enumerate() {
            let start = pd.points.len();
            pd.points.extend(line.vertices().iter().map(point));
            pd.lines.push(start..pd.points.len());
            time.extend_from_slice(line.times());
            speed.extend_from_slice(line.speeds());
            for (slot, name) in scalars.iter_mut().zip(&scalar_names) {
                match line.scalars().iter().find(|(n, _)| n == name) {
                    Some((_, v)) => slot.extend_from_slice(v),
                    None => slot.extend(std::iter::repeat_n(f64::NAN, line.len())),
                }
            }
            ids.push(id as f64);
            term.push(line.termination() as u8 as f64);
        }
        pd.point_arrays.push(("time".into(), time));
        pd.point_arrays.push(("speed".into(), speed));
        pd.point_arrays
            .extend(scalar_names.into_iter().zip(scalars));
        pd.cell_arrays.push(("line_id".into(), ids));
        pd.cell_arrays.push(("termination".into(), term));
        pd
    }

    /// Profile lines of every eddy, tagged with the eddy index, level,
    /// radial axis (0..4 for E, W, N, S), ring fraction and shape
    /// (0 closed, 1 spiral, 2 open).
    pub fn from_eddies(eddies: &[EddyProfile]) -> Self {
        let mut pd = Self::default();
        let mut speed = Vec::new();
        let mut cells: [Vec<f64>; 5] = Default::default();
        for (id, eddy) in eddies.iter().enumerate() {
            for layer in &eddy.layers {
                for pl in &layer.lines {
                    let start = pd.points.len();
                    pd.points.extend(pl.line.vertices().iter().map(point));
                    pd.lines.push(start..pd.points.len());
                    speed.extend_from_slice(pl.line.speeds());
                    let shape = match pl.shape {
                        LineShape::Closed => 0.0,
                        LineShape::Spiral => 1.0,
                        LineShape::Open => 2.0,
                    };
                    let row = [
                        id as f64,
                        layer.centre.level as f64,
                        pl.axis as u8 as f64,
                        pl.ring_fraction,
                        shape,
                    ];
                    for (c, v) in cells.iter_mut().zip(row) {
                        c.push(v);
                    }
                }
            }
        }
        pd.point_arrays.push(("speed".into(), speed));
        for (name, values) in ["eddy_id", "level", "axis", "ring_fraction", "shape"]
            .into_iter()
            .zip(cells)
        {
            pd.cell_arrays.push((name.into(), values));
        }
        pd
    }

    /// One polyline per track through the front centroids.
    pub fn from_tracks(graph: &TrackGraph, tracks: &[Track]) -> Self {
        let mut pd = Self::default();
        let mut t = Vec::new();
        let mut size = Vec::new();
        let mut ids = Vec::new();
        for (id, track) in tracks.iter().enumerate() {
            let start = pd.points.len();
            for f in track.fronts.iter().filter_map(|&fid| graph.front(fid)) {
                pd.points.push(point(&f.centroid));
                t.push(f.id.t as f64);
                size.push(f.size as f64);
            }
            pd.lines.push(start..pd.points.len());
            ids.push(id as f64);
        }
        pd.point_arrays.push(("timestep".into(), t));
        pd.point_arrays.push(("size".into(), size));
        pd.cell_arrays.push(("track_id".into(), ids));
        pd
    }

    pub fn write(&self, w: &mut impl Write, title: &str) -> io::Result<()> {
        writeln!(w, "# vtk DataFile Version 3.0")?;
        writeln!(w, "{}", title.lines().next().unwrap_or(""))?;
        writeln!(w, "ASCII")?;
        writeln!(w, "DATASET POLYDATA")?;
        writeln!(w, "POINTS {} double", self.points.len())?;
        for p in &self.points {
            writeln!(w, "{} {} {}", num(p[0]), num(p[1]), num(p[2]))?;
        }
        let entries: usize = self.lines.iter().map(|r| r.len() + 1).sum();
        writeln!(w, "LINES {} {}", self.lines.len(), entries)?;
        for r in &self.lines {
            let ids: Vec<String> = r.clone().map(|i| i.to_string()).collect();
            writeln!(w, "{} {}", r.len(), ids.join(" "))?;
        }
        if !self.cell_arrays.is_empty() && !self.lines.is_empty() {
            writeln!(w, "CELL_DATA {}", self.lines.len())?;
            for (name, values) in &self.cell_arrays {
                write_scalars(w, name, values)?;
            }
        }
        if !self.point_arrays.is_empty() && !self.points.is_empty() {
            writeln!(w, "POINT_DATA {}", self.points.len())?;
            for (name, values) in &self.point_arrays {
                write_scalars(w, name, values)?;
            }
        }
        Ok(())
    }
}

/// Rectilinear grid with point arrays in x-fastest order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RectilinearData {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub z: Vec<f64>,
    pub arrays: Vec<(String, Vec<f64>)>,
}

/// Depth levels flipped so `z = -depth` ascends, with the layer order of
/// `values` (layer size `layer`) reversed to match.
fn flip_depth(depth: &[f64], layer: usize, values: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let z = depth.iter().rev().map(|d| -d).collect();
    let v = values.chunks(layer).rev().flatten().copied().collect();
    (z, v)
}

impl RectilinearData {
    /// Fields sharing one grid; invalid nodes become NaN.
    pub fn from_fields(fields: &[&ScalarField]) -> Self {
        let Some(first) = fields.first() else {
            return Self::default();
        };
        let g = first.grid();
        let layer = g.layer_len();
        let mut out = Self {
            x: g.lon().values().to_vec(),
            y: g.lat().values().to_vec(),
            z: Vec::new(),
            arrays: Vec::new(),
        };
        for f in fields {
            let masked: Vec<f64> = f
                .values()
                .iter()
                .zip(f.valid())
                .map(|(&v, &ok)| if ok { v } else { f64::NAN })
                .collect();
            let (z, v) = flip_depth(g.depth().values(), layer, &masked);
            out.z = z;
            out.arrays.push((f.name().to_string(), v));
        }
        out
    }

    /// A latitude-depth section as a one-column grid at its longitude.
    pub fn from_section(s: &VerticalSlice) -> Self {
        let values: Vec<f64> = s.values.iter().map(|v| v.unwrap_or(f64::NAN)).collect();
        let (z, v) = flip_depth(&s.depth, s.lat.len(), &values);
        Self {
            x: vec![s.lon],
            y: s.lat.clone(),
            z,
            arrays: vec![(s.variable.name().to_string(), v)],
        }
    }

    /// An isosurface depth map as a single-layer grid at z = 0.
    pub fn from_iso_depth(m: &IsoDepthMap) -> Self {
        Self {
            x: m.lon.clone(),
            y: m.lat.clone(),
            z: vec![0.0],
            arrays: vec![(
                format!("{}_iso_depth", m.variable.name()),
                m.depths.iter().map(|v| v.unwrap_or(f64::NAN)).collect(),
            )],
        }
    }

    pub fn write(&self, w: &mut impl Write, title: &str) -> io::Result<()> {
        let n = self.x.len() * self.y.len() * self.z.len();
        writeln!(w, "# vtk DataFile Version 3.0")?;
        writeln!(w, "{}", title.lines().next().unwrap_or(""))?;
        writeln!(w, "ASCII")?;
        writeln!(w, "DATASET RECTILINEAR_GRID")?;
        writeln!(
            w,
            "DIMENSIONS {} {} {}",
            self.x.len(),
            self.y.len(),
            self.z.len()
        )?;
        for (label, coords) in [("X", &self.x), ("Y", &self.y), ("Z", &self.z)] {
            writeln!(w, "{label}_COORDINATES {} double", coords.len())?;
            write_array(w, coords)?;
        }
        writeln!(w, "POINT_DATA {n}")?;
        for (name, values) in &self.arrays {
            debug_assert_eq!(values.len(), n);
            write_scalars(w, name, values)?;
        }
        Ok(())
    }
}
