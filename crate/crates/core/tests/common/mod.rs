//! NEMO-style classic NetCDF fixture shared by the integration tests.
//!
//! Values are analytic functions of (t, lon, lat, depth) so readers can be
//! checked node by node. The file stores latitude descending, depth as f32
//! with `positive = "down"`, salinity packed into i16 and land as fill.

#![allow(dead_code)]

use std::path::Path;

use netcdf3::{DataSet, FileWriter, Version};

pub const SALT_FILL: i16 = -32767;
pub const TEMP_FILL: f32 = 1.0e20;
pub const SALT_SCALE: f64 = 0.001;
pub const SALT_OFFSET: f64 = 30.0;

#[derive(Debug, Clone)]
pub struct Nemo {
    pub lon: Vec<f64>,
    pub lat: Vec<f64>,
    pub depth: Vec<f64>,
    pub nt: usize,
}

fn range(start: f64, step: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| start + step * i as f64).collect()
}

impl Nemo {
    pub fn small() -> Self {
        Self {
            lon: range(80.0, 0.5, 6),
            lat: range(10.0, 0.5, 5),
            depth: vec![0.5, 10.0, 30.0, 80.0],
            nt: 3,
        }
    }

    /// Northern Indian Ocean box wide enough to crop the Bay of Bengal.
    pub fn indian_ocean() -> Self {
        Self {
            lon: range(60.0, 1.0, 46),
            lat: range(-5.0, 1.0, 31),
            depth: vec![0.5, 10.0, 50.0, 100.0, 200.0, 500.0, 1000.0],
            nt: 3,
        }
    }

    pub fn time_hours(&self, t: usize) -> f64 {
        438_000.0 + 24.0 * t as f64
    }

    pub fn is_land(&self, lon: f64, lat: f64, depth: f64) -> bool {
        (lon >= self.lon[self.lon.len() - 2] && lat >= self.lat[self.lat.len() - 2])
            || (depth > 300.0 && lon < 70.0)
    }

    pub fn temperature(&self, t: usize, lon: f64, lat: f64, depth: f64) -> f64 {
        28.0 + 0.25 * t as f64 - 0.02 * depth + 0.1 * (lon - 80.0) - 0.05 * (lat - 10.0)
    }

    pub fn salinity(&self, t: usize, lon: f64, lat: f64, depth: f64) -> f64 {
        34.0 + 0.1 * t as f64 + 0.001 * depth + 0.02 * (lat - 10.0) - 0.01 * (lon - 80.0)
    }

    /// Linear shear flow: no closed streamlines anywhere.
    pub fn velocity(&self, t: usize, lon: f64, lat: f64, depth: f64) -> [f64; 2] {
        let decay = 1.0 - depth / 2000.0;
        [
            (0.2 + 0.01 * (lat - 10.0) + 0.01 * t as f64) * decay,
            (0.05 + 0.005 * (lon - 80.0)) * decay,
        ]
    }

    /// Node values in file order (time, depth, lat descending, lon).
    fn gather(&self, f: impl Fn(usize, f64, f64, f64) -> Option<f64>) -> Vec<Option<f64>> {
        let mut out = Vec::new();
        for t in 0..self.nt {
            for &z in &self.depth {
                for &y in self.lat.iter().rev() {
                    for &x in &self.lon {
                        out.push(if self.is_land(x, y, z) {
                            None
                        } else {
                            f(t, x, y, z)
                        });
                    }
                }
            }
        }
        out
    }

    pub fn write(&self, path: &Path) {
        let mut ds = DataSet::new();
        ds.set_unlimited_dim("time", self.nt).unwrap();
        ds.add_fixed_dim("depth", self.depth.len()).unwrap();
        ds.add_fixed_dim("latitude", self.lat.len()).unwrap();
        ds.add_fixed_dim("longitude", self.lon.len()).unwrap();
        ds.add_var_f64("time", &["time"]).unwrap();
        ds.add_var_attr_string("time", "units", "hours since 1950-01-01 00:00:00")
            .unwrap();
        ds.add_var_f32("depth", &["depth"]).unwrap();
        ds.add_var_attr_string("depth", "units", "m").unwrap();
        ds.add_var_attr_string("depth", "positive", "down").unwrap();
        ds.add_var_f32("latitude", &["latitude"]).unwrap();
        ds.add_var_attr_string("latitude", "units", "degrees_north")
            .unwrap();
        ds.add_var_f64("longitude", &["longitude"]).unwrap();
        ds.add_var_attr_string("longitude", "units", "degrees_east")
            .unwrap();
        let dims4 = ["time", "depth", "latitude", "longitude"];
        ds.add_var_i16("so", &dims4).unwrap();
        ds.add_var_attr_string("so", "units", "1e-3").unwrap();
        // The netcdf3 writer pads a lone i16 attribute with non-zero bytes,
        // which its reader rejects; an i32 fill decodes the same way.
        ds.add_var_attr_i32("so", "_FillValue", vec![i32::from(SALT_FILL)])
            .unwrap();
        ds.add_var_attr_f64("so", "scale_factor", vec![SALT_SCALE])
            .unwrap();
        ds.add_var_attr_f64("so", "add_offset", vec![SALT_OFFSET])
            .unwrap();
        ds.add_var_f32("thetao", &dims4).unwrap();
        ds.add_var_attr_string("thetao", "units", "degrees_C")
            .unwrap();
        ds.add_var_attr_f32("thetao", "_FillValue", vec![TEMP_FILL])
            .unwrap();
        for name in ["uo", "vo"] {
            ds.add_var_f32(name, &dims4).unwrap();
            ds.add_var_attr_string(name, "units", "m s-1").unwrap();
            ds.add_var_attr_f32(name, "missing_value", vec![TEMP_FILL])
                .unwrap();
        }

        let mut w = FileWriter::create_new(path).unwrap();
        w.set_def(&ds, Version::Offset64Bit, 0).unwrap();
        let times: Vec<f64> = (0..self.nt).map(|t| self.time_hours(t)).collect();
        w.write_var_f64("time", &times).unwrap();
        w.write_var_f32(
            "depth",
            &self.depth.iter().map(|&z| z as f32).collect::<Vec<_>>(),
        )
        .unwrap();
        w.write_var_f32(
            "latitude",
            &self.lat.iter().rev().map(|&y| y as f32).collect::<Vec<_>>(),
        )
        .unwrap();
        w.write_var_f64("longitude", &self.lon).unwrap();
        let so: Vec<i16> = self
            .gather(|t, x, y, z| Some(self.salinity(t, x, y, z)))
            .into_iter()
            .map(|v| {
                v.map_or(SALT_FILL, |s| {
                    ((s - SALT_OFFSET) / SALT_SCALE).round() as i16
                })
            })
            .collect();
        w.write_var_i16("so", &so).unwrap();
        let f32s = |v: Vec<Option<f64>>| {
            v.into_iter()
                .map(|x| x.map_or(TEMP_FILL, |x| x as f32))
                .collect::<Vec<_>>()
        };
        w.write_var_f32(
            "thetao",
            &f32s(self.gather(|t, x, y, z| Some(self.temperature(t, x, y, z)))),
        )
        .unwrap();
        w.write_var_f32(
            "uo",
            &f32s(self.gather(|t, x, y, z| Some(self.velocity(t, x, y, z)[0]))),
        )
        .unwrap();
        w.write_var_f32(
            "vo",
            &f32s(self.gather(|t, x, y, z| Some(self.velocity(t, x, y, z)[1]))),
        )
        .unwrap();
        w.close().unwrap();
    }
}
