//! Analytic ocean used for demos, benchmarks and end-to-end tests.
//!
//! Values are generated on demand per timestep, so large grids cost no more
//! memory than one loaded field. The scene holds an anticyclone and a
//! cyclone drifting west over a weak eastward current, a warm-water bowl that
//! depresses isotherms under the anticyclone, a salty blob moving east one
//! cell per step and an optional island in the north-east corner.

use std::path::Path;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::grid::{metric_at_lat, Axis};
use crate::ingest::{CatalogEntry, Dataset, IngestError, Source, TimeAxis, VariableRole};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OceanSpec {
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
    pub nt: usize,
    pub lon: (f64, f64),
    pub lat: (f64, f64),
    /// Depth of the deepest level, meters. Levels are stretched towards the
    /// surface.
    pub max_depth: f64,
    pub island: bool,
    pub vertical_velocity: bool,
}

impl Default for OceanSpec {
    fn default() -> Self {
        Self {
            nx: 64,
            ny: 64,
            nz: 12,
            nt: 6,
            lon: (80.0, 92.0),
            lat: (8.0, 20.0),
            max_depth: 1000.0,
            island: true,
            vertical_velocity: true,
        }
    }
}

/// Eastward background current, m/s.
pub const BACKGROUND_U: f64 = 0.03;
/// Isotherm depression at the bowl centre, meters.
pub const BOWL_DEPTH: f64 = 60.0;
/// Vertical temperature gradient, degC per meter.
pub const LAPSE: f64 = 0.04;
pub const SURFACE_TEMPERATURE: f64 = 29.5;

#[derive(Debug, Clone, Copy)]
struct Vortex {
    /// Centre at t = 0, degrees.
    lon: f64,
    lat: f64,
    /// Radius of maximum speed, meters.
    radius: f64,
    /// Peak azimuthal speed, m/s; positive is counter-clockwise.
    speed: f64,
}

impl OceanSpec {
    fn check(&self) -> Result<(), IngestError> {
        if self.nx < 2 || self.ny < 2 || self.nz < 2 || self.nt == 0 {
            return Err(IngestError::DimensionMismatch(
                "synthetic grid needs at least 2 nodes per axis and 1 timestep".into(),
            ));
        }
        if !(self.lon.1 > self.lon.0 && self.lat.1 > self.lat.0 && self.max_depth > 0.0) {
            return Err(IngestError::InvalidMap(
                "synthetic extents must be increasing".into(),
            ));
        }
        Ok(())
    }

    pub fn lon_axis(&self) -> Axis {
        let step = (self.lon.1 - self.lon.0) / (self.nx - 1) as f64;
        Axis::uniform("longitude", self.lon.0, step, self.nx, "degrees_east").expect("increasing")
    }

    pub fn lat_axis(&self) -> Axis {
        let step = (self.lat.1 - self.lat.0) / (self.ny - 1) as f64;
        Axis::uniform("latitude", self.lat.0, step, self.ny, "degrees_north").expect("increasing")
    }

    pub fn depth_axis(&self) -> Axis {
        let n = (self.nz - 1) as f64;
        let values = (0..self.nz)
            .map(|k| self.max_depth * (k as f64 / n).powf(1.5))
            .collect();
        Axis::new("depth", values, "m").expect("increasing")
    }

    fn cell_lon(&self) -> f64 {
        (self.lon.1 - self.lon.0) / (self.nx - 1) as f64
    }

    /// Anticyclone first, then cyclone, at timestep `t`. Northern hemisphere
    /// orientation is assumed when choosing the rotation sense.
    fn vortices(&self, t: usize) -> [Vortex; 2] {
        let (w, h) = (self.lon.1 - self.lon.0, self.lat.1 - self.lat.0);
        let drift = -0.25 * self.cell_lon() * t as f64;
        let (_, dy) = metric_at_lat(0.0);
        let radius = 0.08 * h * dy;
        let sign = if self.lat.0 + 0.5 * h >= 0.0 {
            1.0
        } else {
            -1.0
        };
        [
            Vortex {
                lon: self.lon.0 + 0.32 * w + drift,
                lat: self.lat.0 + 0.55 * h,
                radius,
                speed: -0.6 * sign,
            },
            Vortex {
                lon: self.lon.0 + 0.7 * w + drift,
                lat: self.lat.0 + 0.35 * h,
                radius: 0.8 * radius,
                speed: 0.5 * sign,
            },
        ]
    }

    /// Centres of the two vortices at timestep `t`, anticyclone first.
    pub fn vortex_centres(&self, t: usize) -> [(f64, f64); 2] {
        self.vortices(t).map(|v| (v.lon, v.lat))
    }

    /// Isotherm depression under the anticyclone, meters.
    pub fn bowl(&self, lon: f64, lat: f64, t: usize) -> f64 {
        let a = self.vortices(t)[0];
        let (dx, dy) = offsets(lon, lat, a.lon, a.lat);
        let r2 = (dx * dx + dy * dy) / (a.radius * a.radius);
        BOWL_DEPTH * (-0.5 * r2).exp()
    }

    /// Index-space centre of the salty blob at timestep `t`.
    pub fn blob_centre(&self, t: usize) -> [f64; 3] {
        [
            0.25 * self.nx as f64 + t as f64,
            0.3 * self.ny as f64,
            0.3 * (self.nz - 1) as f64,
        ]
    }

    fn is_land(&self, i: usize, j: usize) -> bool {
        self.island && i * 100 >= self.nx * 88 && j * 100 >= self.ny * 88
    }

    pub fn dataset(&self) -> Result<Dataset, IngestError> {
        self.check()?;
        let time = TimeAxis::new(
            "time",
            "days since 2000-01-01 00:00:00",
            (0..self.nt).map(|t| t as f64).collect(),
        )?;
        let mut catalog = vec![
            entry(VariableRole::Salinity, "so", "1e-3"),
            entry(VariableRole::Temperature, "thetao", "degC"),
            entry(VariableRole::U, "uo", "m s-1"),
            entry(VariableRole::V, "vo", "m s-1"),
        ];
        if self.vertical_velocity {
            catalog.push(entry(VariableRole::W, "wo", "m s-1"));
        }
        let source = SynthSource {
            spec: self.clone(),
            lon: self.lon_axis().values().to_vec(),
            lat: self.lat_axis().values().to_vec(),
            depth: self.depth_axis().values().to_vec(),
        };
        Dataset::assemble(
            self.lon_axis(),
            self.lat_axis(),
            self.depth_axis(),
            time,
            catalog,
            Arc::new(source),
        )
    }
}

fn entry(role: VariableRole, name: &str, units: &str) -> CatalogEntry {
    CatalogEntry {
        role,
        name: name.into(),
        units: units.into(),
    }
}

/// Local tangent-plane offsets in meters of (lon, lat) from a centre.
fn offsets(lon: f64, lat: f64, clon: f64, clat: f64) -> (f64, f64) {
    let (mx, my) = metric_at_lat(clat);
    ((lon - clon) * mx, (lat - clat) * my)
}

#[derive(Debug)]
struct SynthSource {
    spec: OceanSpec,
    lon: Vec<f64>,
    lat: Vec<f64>,
    depth: Vec<f64>,
}

impl SynthSource {
    fn value(
        &self,
        name: &str,
        t: usize,
        i: usize,
        j: usize,
        k: usize,
        vortices: &[Vortex; 2],
    ) -> f64 {
        let s = &self.spec;
        if s.is_land(i, j) {
            return f64::NAN;
        }
        let (x, y, z) = (self.lon[i], self.lat[j], self.depth[k]);
        let decay = (-z / 800.0).exp();
        let swirl = |v: &Vortex| {
            let (dx, dy) = offsets(x, y, v.lon, v.lat);
            let r2 = (dx * dx + dy * dy) / (v.radius * v.radius);
            // Gaussian vortex: azimuthal speed peaks at r = radius.
            let g = v.speed / v.radius * (0.5 * (1.0 - r2)).exp();
            [-g * dy * decay, g * dx * decay, r2]
        };
        match name {
            "uo" | "vo" => {
                let c = usize::from(name == "vo");
                let base = if c == 0 { BACKGROUND_U * decay } else { 0.0 };
                base + vortices.iter().map(|v| swirl(v)[c]).sum::<f64>()
            }
            "wo" => {
                let r2 = swirl(&vortices[0])[2];
                -2e-5 * (-0.5 * r2).exp() * (std::f64::consts::PI * z / s.max_depth).sin()
            }
            "thetao" => SURFACE_TEMPERATURE - LAPSE * (z - s.bowl(x, y, t)),
            "so" => {
                let c = s.blob_centre(t);
                let sig = [
                    s.nx as f64 / 16.0,
                    s.ny as f64 / 16.0,
                    (s.nz as f64 / 6.0).max(1.0),
                ];
                let d2: f64 = [i as f64, j as f64, k as f64]
                    .iter()
                    .zip(c.iter().zip(sig))
                    .map(|(p, (c, s))| ((p - c) / s).powi(2))
                    .sum();
                34.5 + 1.2 * (-0.5 * d2).exp()
            }
            _ => unreachable!("catalog names are fixed"),
        }
    }
}

impl Source for SynthSource {
    fn read(&self, name: &str, t: usize) -> Result<Vec<f64>, IngestError> {
        if !["so", "thetao", "uo", "vo", "wo"].contains(&name)
            || (name == "wo" && !self.spec.vertical_velocity)
        {
            return Err(IngestError::MissingVariable(name.to_string()));
        }
        if t >= self.spec.nt {
            return Err(IngestError::TimestepOutOfRange {
                t,
                len: self.spec.nt,
            });
        }
        let (nx, ny) = (self.spec.nx, self.spec.ny);
        let vortices = self.spec.vortices(t);
        let mut out = vec![0.0; nx * ny * self.spec.nz];
        out.par_chunks_mut(nx * ny)
            .enumerate()
            .for_each(|(k, layer)| {
                for j in 0..ny {
                    for i in 0..nx {
                        layer[j * nx + i] = self.value(name, t, i, j, k, &vortices);
                    }
                }
            });
        Ok(out)
    }

    fn location(&self) -> Option<&Path> {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shapes_and_land() {
        let spec = OceanSpec {
            nx: 20,
            ny: 16,
            nz: 5,
            nt: 3,
            ..Default::default()
        };
        let d = spec.dataset().unwrap();
        assert_eq!(d.grid().dims(), (20, 16, 5));
        assert_eq!(d.time().len(), 3);
        assert!(d.has_vertical_velocity());
        assert!(d.grid().is_land(19, 15, 4));
        assert!(!d.grid().is_land(0, 0, 0));
        let depth = d.grid().depth().values();
        assert_eq!(depth[0], 0.0);
        assert_eq!(depth[4], 1000.0);
        assert!(depth[1] - depth[0] < depth[4] - depth[3]);
    }

    #[test]
    fn isotherm_follows_bowl() {
        let spec = OceanSpec::default();
        let d = spec.dataset().unwrap();
        let t = d.load_scalar(VariableRole::Temperature, 1).unwrap();
        let g = d.grid();
        let (i, j, k) = (10, 20, 3);
        let p = g.node_position(i, j, k);
        let expected = SURFACE_TEMPERATURE - LAPSE * (p.depth - spec.bowl(p.lon, p.lat, 1));
        assert!((t.value_at(i, j, k).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn anticyclone_turns_clockwise() {
        let spec = OceanSpec {
            island: false,
            ..Default::default()
        };
        let d = spec.dataset().unwrap();
        let vf = d.load_vector(0).unwrap();
        let [(clon, clat), _] = spec.vortex_centres(0);
        let r = 0.5;
        // North of the centre the flow is eastward (clockwise) beyond the
        // background current.
        let north = vf
            .interpolate(&crate::grid::Position::new(clon, clat + r, 0.0), false)
            .unwrap();
        assert!(north[0] > BACKGROUND_U);
        assert!(spec
            .dataset()
            .unwrap()
            .load_values(VariableRole::W, 0)
            .is_ok());
    }
}
