//! Derived scalar fields: speed, vertical vorticity, curl magnitude and the
//! Okubo-Weiss parameter.
//!
//! Horizontal derivatives are taken in meters: a derivative with respect to
//! longitude (degrees) is divided by the row's meters-per-degree. Interior
//! nodes use the centred non-uniform difference `(f[i+1] - f[i-1]) /
//! (x[i+1] - x[i-1])`; where one neighbour is missing (domain edge or
//! masked) the one-sided first-order difference is used instead. A node
//! whose derivative has no usable neighbour at all is invalid.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

use crate::grid::{metric_at_lat, Axis, GridError, ScalarField, VectorField, VelocitySlice};

#[derive(Debug, Error)]
pub enum FieldError {
    #[error("axis `{0}` has fewer than two nodes; cannot differentiate")]
    DegenerateAxis(String),
    #[error(transparent)]
    Grid(#[from] GridError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DerivedFieldKind {
    /// `sqrt(u² + v² + w²)` (w omitted when absent).
    Speed,
    /// `sqrt(u² + v²)`.
    SpeedHorizontal,
    /// `∂v/∂x − ∂u/∂y`.
    VorticityZ,
    /// `|∇×V|`; equals `|ω|` when the field has no vertical component.
    CurlMagnitude,
    /// `s_n² + s_s² − ω²`.
    OkuboWeiss,
}

impl DerivedFieldKind {
    pub const ALL: [DerivedFieldKind; 5] = [
        Self::Speed,
        Self::SpeedHorizontal,
        Self::VorticityZ,
        Self::CurlMagnitude,
        Self::OkuboWeiss,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Speed => "speed",
            Self::SpeedHorizontal => "speed-horizontal",
            Self::VorticityZ => "vorticity-z",
            Self::CurlMagnitude => "curl-magnitude",
            Self::OkuboWeiss => "okubo-weiss",
        }
    }

    pub fn units(self) -> &'static str {
        match self {
            Self::Speed | Self::SpeedHorizontal => "m/s",
            Self::VorticityZ | Self::CurlMagnitude => "1/s",
            Self::OkuboWeiss => "1/s^2",
        }
    }
}

impl fmt::Display for DerivedFieldKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DerivedFieldKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.to_ascii_lowercase().replace('_', "-");
        Self::ALL
            .into_iter()
            .find(|k| k.name() == norm)
            .or(match norm.as_str() {
                "vorticity" | "omega" => Some(Self::VorticityZ),
                "curl" => Some(Self::CurlMagnitude),
                "ow" => Some(Self::OkuboWeiss),
                _ => None,
            })
            .ok_or_else(|| format!("unknown derived field `{s}`"))
    }
}

pub fn derive(vf: &VectorField, kind: DerivedFieldKind) -> Result<ScalarField, FieldError> {
    match kind {
        DerivedFieldKind::Speed => Ok(speed(vf, true)),
        DerivedFieldKind::SpeedHorizontal => Ok(speed(vf, false)),
        DerivedFieldKind::VorticityZ => vorticity_z(vf),
        DerivedFieldKind::CurlMagnitude => curl_magnitude(vf),
        DerivedFieldKind::OkuboWeiss => okubo_weiss(vf),
    }
}

pub fn speed(vf: &VectorField, include_vertical: bool) -> ScalarField {
    let w = vf.w().filter(|_| include_vertical);
    let values: Vec<f64> = (0..vf.u().len())
        .into_par_iter()
        .map(|n| {
            if !vf.valid()[n] {
                return f64::NAN;
            }
            let h = vf.u()[n] * vf.u()[n] + vf.v()[n] * vf.v()[n];
            let wz = w.map_or(0.0, |w| w[n] * w[n]);
            (h + wz).sqrt()
        })
        .collect();
    let kind = if include_vertical {
        DerivedFieldKind::Speed
    } else {
        DerivedFieldKind::SpeedHorizontal
    };
    ScalarField::new(
        vf.grid().clone(),
        kind.name(),
        kind.units(),
        values,
        vf.valid().to_vec(),
    )
    .expect("same grid")
}

/// Derivative of `values` along one axis at node `idx`, which sits at
/// position `pos` on an axis of `coords.len()` nodes with memory `stride`.
#[inline]
fn axis_derivative(
    values: &[f64],
    valid: &[bool],
    idx: usize,
    pos: usize,
    stride: usize,
    coords: &[f64],
) -> Option<f64> {
    let n = coords.len();
    let left = pos > 0 && valid[idx - stride];
    let right = pos + 1 < n && valid[idx + stride];
    match (left, right) {
        (true, true) => Some(
            (values[idx + stride] - values[idx - stride]) / (coords[pos + 1] - coords[pos - 1]),
        ),
        (false, true) => {
            Some((values[idx + stride] - values[idx]) / (coords[pos + 1] - coords[pos]))
        }
        (true, false) => {
            Some((values[idx] - values[idx - stride]) / (coords[pos] - coords[pos - 1]))
        }
        (false, false) => None,
    }
}

/// Horizontal velocity gradient in SI units at one node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HorizontalGradient {
    pub dudx: f64,
    pub dudy: f64,
    pub dvdx: f64,
    pub dvdy: f64,
}

impl HorizontalGradient {
    pub fn vorticity(&self) -> f64 {
        self.dvdx - self.dudy
    }

    pub fn normal_strain(&self) -> f64 {
        self.dudx - self.dvdy
    }

    pub fn shear_strain(&self) -> f64 {
        self.dvdx + self.dudy
    }

    pub fn okubo_weiss(&self) -> f64 {
        let sn = self.normal_strain();
        let ss = self.shear_strain();
        let w = self.vorticity();
        sn * sn + ss * ss - w * w
    }
}

/// Borrowed horizontal layer: `u`, `v`, validity on `lon × lat`.
struct Layer<'a> {
    lon: &'a [f64],
    lat: &'a [f64],
    u: &'a [f64],
    v: &'a [f64],
    valid: &'a [bool],
}

impl Layer<'_> {
    fn gradient(&self, i: usize, j: usize) -> Option<HorizontalGradient> {
        let nx = self.lon.len();
        let idx = j * nx + i;
        if !self.valid[idx] {
            return None;
        }
        let (mx, my) = metric_at_lat(self.lat[j]);
        if mx <= 0.0 {
            return None;
        }
        let ddx = |f: &[f64]| axis_derivative(f, self.valid, idx, i, 1, self.lon).map(|d| d / mx);
        let ddy = |f: &[f64]| axis_derivative(f, self.valid, idx, j, nx, self.lat).map(|d| d / my);
        Some(HorizontalGradient {
            dudx: ddx(self.u)?,
            dudy: ddy(self.u)?,
            dvdx: ddx(self.v)?,
            dvdy: ddy(self.v)?,
        })
    }
}

fn check_axes(lon: &Axis, lat: &Axis) -> Result<(), FieldError> {
    for ax in [lon, lat] {
        if ax.len() < 2 {
            return Err(FieldError::DegenerateAxis(ax.name().to_string()));
        }
    }
    Ok(())
}

/// Evaluates `f` on the horizontal gradient of every node, level by level.
fn map_gradients(
    vf: &VectorField,
    kind: DerivedFieldKind,
    f: impl Fn(&HorizontalGradient) -> f64 + Sync,
) -> Result<ScalarField, FieldError> {
    let grid = vf.grid();
    check_axes(grid.lon(), grid.lat())?;
    let (nx, _, _) = grid.dims();
    let layer_len = grid.layer_len();
    let mut values = vec![f64::NAN; grid.node_count()];
    let mut valid = vec![false; grid.node_count()];
    values
        .par_chunks_mut(layer_len)
        .zip(valid.par_chunks_mut(layer_len))
        .enumerate()
        .for_each(|(k, (vals, oks))| {
            let range = k * layer_len..(k + 1) * layer_len;
            let layer = Layer {
                lon: grid.lon().values(),
                lat: grid.lat().values(),
                u: &vf.u()[range.clone()],
                v: &vf.v()[range.clone()],
                valid: &vf.valid()[range],
            };
            for (n, (val, ok)) in vals.iter_mut().zip(oks.iter_mut()).enumerate() {
                if let Some(g) = layer.gradient(n % nx, n / nx) {
                    *val = f(&g);
                    *ok = true;
                }
            }
        });
    Ok(ScalarField::new(
        grid.clone(),
        kind.name(),
        kind.units(),
        values,
        valid,
    )?)
}

pub fn vorticity_z(vf: &VectorField) -> Result<ScalarField, FieldError> {
    map_gradients(
        vf,
        DerivedFieldKind::VorticityZ,
        HorizontalGradient::vorticity,
    )
}

pub fn okubo_weiss(vf: &VectorField) -> Result<ScalarField, FieldError> {
    map_gradients(
        vf,
        DerivedFieldKind::OkuboWeiss,
        HorizontalGradient::okubo_weiss,
    )
}

pub fn curl_magnitude(vf: &VectorField) -> Result<ScalarField, FieldError> {
    let Some(w) = vf.w() else {
        return map_gradients(vf, DerivedFieldKind::CurlMagnitude, |g| g.vorticity().abs());
    };
    let grid = vf.grid();
    check_axes(grid.lon(), grid.lat())?;
    let (nx, ny, _) = grid.dims();
    let layer_len = grid.layer_len();
    let lon = grid.lon().values();
    let lat = grid.lat().values();
    let depth = grid.depth().values();
    let valid_all = vf.valid();
    let mut values = vec![f64::NAN; grid.node_count()];
    let mut valid = vec![false; grid.node_count()];
    values
        .par_chunks_mut(layer_len)
        .zip(valid.par_chunks_mut(layer_len))
        .enumerate()
        .for_each(|(k, (vals, oks))| {
            for n in 0..layer_len {
                let (i, j) = (n % nx, n / nx);
                let idx = k * layer_len + n;
                if !valid_all[idx] {
                    continue;
                }
                let (mx, my) = metric_at_lat(lat[j]);
                if mx <= 0.0 {
                    continue;
                }
                let ddx = |f: &[f64]| axis_derivative(f, valid_all, idx, i, 1, lon).map(|d| d / mx);
                let ddy =
                    |f: &[f64]| axis_derivative(f, valid_all, idx, j, nx, lat).map(|d| d / my);
                // z points up; depth points down
                let ddz =
                    |f: &[f64]| axis_derivative(f, valid_all, idx, k, nx * ny, depth).map(|d| -d);
                let comps = (|| {
                    let cx = ddy(w)? - ddz(vf.v())?;
                    let cy = ddz(vf.u())? - ddx(w)?;
                    let cz = ddx(vf.v())? - ddy(vf.u())?;
                    Some((cx * cx + cy * cy + cz * cz).sqrt())
                })();
                if let Some(c) = comps {
                    vals[n] = c;
                    oks[n] = true;
                }
            }
        });
    Ok(ScalarField::new(
        grid.clone(),
        DerivedFieldKind::CurlMagnitude.name(),
        DerivedFieldKind::CurlMagnitude.units(),
        values,
        valid,
    )?)
}

/// Horizontal gradient at node `(i, j)` of a velocity slice.
pub fn slice_gradient(slice: &VelocitySlice, i: usize, j: usize) -> Option<HorizontalGradient> {
    Layer {
        lon: slice.lon().values(),
        lat: slice.lat().values(),
        u: slice.u(),
        v: slice.v(),
        valid: slice.valid(),
    }
    .gradient(i, j)
}

/// Okubo-Weiss parameter on every node of a slice (NaN where undefined).
pub fn slice_okubo_weiss(slice: &VelocitySlice) -> Vec<f64> {
    let (nx, ny) = slice.dims();
    (0..nx * ny)
        .map(|n| slice_gradient(slice, n % nx, n / nx).map_or(f64::NAN, |g| g.okubo_weiss()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{RectilinearGrid3D, EARTH_RADIUS_M};
    use std::sync::Arc;

    const DEG: f64 = std::f64::consts::PI / 180.0;

    /// Small equatorial grid where metres are nearly Cartesian.
    fn grid(n: usize, spacing_deg: f64) -> Arc<RectilinearGrid3D> {
        let half = spacing_deg * (n as f64 - 1.0) / 2.0;
        Arc::new(RectilinearGrid3D::ocean(
            Axis::uniform("lon", -half, spacing_deg, n, "degrees_east").unwrap(),
            Axis::uniform("lat", -half, spacing_deg, n, "degrees_north").unwrap(),
            Axis::new("depth", vec![0.0, 10.0, 25.0], "m").unwrap(),
        ))
    }

    /// Local east/north offsets in metres using the row metric.
    fn xy(lon: f64, lat: f64) -> (f64, f64) {
        (
            EARTH_RADIUS_M * lat.to_radians().cos() * lon * DEG,
            EARTH_RADIUS_M * lat * DEG,
        )
    }

    #[test]
    fn speed_examples() {
        let g = grid(4, 0.1);
        let vf = VectorField::from_fn(g, true, |_, _, _| [3.0, 4.0, 12.0]);
        assert!(speed(&vf, false)
            .values()
            .iter()
            .all(|&s| (s - 5.0).abs() < 1e-12));
        assert!(speed(&vf, true)
            .values()
            .iter()
            .all(|&s| (s - 13.0).abs() < 1e-12));
    }

    #[test]
    fn vorticity_solid_body_and_shear() {
        let g = grid(16, 0.01);
        let vf = VectorField::from_fn(g.clone(), false, |lon, lat, _| {
            let (x, y) = xy(lon, lat);
            [-y, x, 0.0]
        });
        let om = vorticity_z(&vf).unwrap();
        assert!(om.values().iter().all(|&w| (w - 2.0).abs() < 1e-6));

        let vf = VectorField::from_fn(g, false, |lon, lat, _| [xy(lon, lat).1, 0.0, 0.0]);
        let om = vorticity_z(&vf).unwrap();
        assert!(om.values().iter().all(|&w| (w + 1.0).abs() < 1e-6));
    }

    #[test]
    fn okubo_weiss_rotation_and_strain() {
        let g = grid(16, 0.01);
        let omega = 1e-5;
        let rot = VectorField::from_fn(g.clone(), false, |lon, lat, _| {
            let (x, y) = xy(lon, lat);
            [-omega * y, omega * x, 0.0]
        });
        let w = okubo_weiss(&rot).unwrap();
        let expected = -4.0 * omega * omega;
        assert!(w
            .values()
            .iter()
            .all(|&v| ((v - expected) / expected).abs() < 1e-6));

        let alpha = 2e-5;
        let strain = VectorField::from_fn(g, false, |lon, lat, _| {
            let (x, y) = xy(lon, lat);
            [alpha * x, -alpha * y, 0.0]
        });
        let w = okubo_weiss(&strain).unwrap();
        let expected = 4.0 * alpha * alpha;
        assert!(w
            .values()
            .iter()
            .all(|&v| ((v - expected) / expected).abs() < 1e-6));
    }

    #[test]
    fn masked_neighbours_fall_back_to_one_sided() {
        let lon = Axis::uniform("lon", 0.0, 0.01, 5, "").unwrap();
        let lat = Axis::uniform("lat", 0.0, 0.01, 5, "").unwrap();
        let depth = Axis::new("depth", vec![0.0, 5.0], "").unwrap();
        let mut mask = vec![false; 50];
        mask[2 * 5 + 1] = true; // (1, 2, 0)
        mask[2 * 5 + 3] = true; // (3, 2, 0): node (2,2,0) has no x-neighbour
        let g = Arc::new(RectilinearGrid3D::new(lon, lat, depth, mask).unwrap());
        let vf = VectorField::from_fn(g.clone(), false, |lon, lat, _| {
            let (x, y) = xy(lon, lat);
            [-y, x, 0.0]
        });
        let om = vorticity_z(&vf).unwrap();
        assert!(!om.valid()[g.index(1, 2, 0)]);
        // no usable x-neighbour on either side
        for i in [0, 2, 4] {
            assert!(!om.valid()[g.index(i, 2, 0)]);
        }
        // row above is untouched
        assert!((om.value_at(2, 3, 0).unwrap() - 2.0).abs() < 1e-6);
        // one-sided at the domain edge is exact for linear fields
        assert!((om.value_at(0, 0, 0).unwrap() - 2.0).abs() < 1e-6);
    }

    #[test]
    fn curl_reduces_to_abs_vorticity_without_w() {
        let g = grid(8, 0.01);
        let vf = VectorField::from_fn(g, false, |lon, lat, _| {
            let (x, y) = xy(lon, lat);
            [y, -x, 0.0]
        });
        let c = curl_magnitude(&vf).unwrap();
        assert!(c.values().iter().all(|&v| (v - 2.0).abs() < 1e-6));
    }

    #[test]
    fn curl_with_vertical_shear() {
        // u = a * z_up  => curl_y = du/dz = a ; depth = -z_up so u = -a * depth
        let g = grid(6, 0.01);
        let a = 0.01;
        let vf = VectorField::from_fn(g, true, |_, _, d| [-a * d, 0.0, 0.0]);
        let c = curl_magnitude(&vf).unwrap();
        assert!(c.values().iter().all(|&v| (v - a).abs() < 1e-12));
    }

    #[test]
    fn vorticity_second_order_convergence() {
        // Richardson-style check: smooth field, halve the spacing, error
        // at a fixed interior point drops by ~4.
        let omega_exact = |lon: f64, lat: f64| {
            // u = sin(ky y), v = sin(kx x) => w = kx cos(kx x) - ky cos(ky y)
            let (x, y) = xy(lon, lat);
            let k = 2.0 * std::f64::consts::PI / 50_000.0;
            k * (k * x).cos() - k * (k * y).cos()
        };
        let mut errs = Vec::new();
        for &(n, sp) in &[(21usize, 0.02), (41, 0.01), (81, 0.005)] {
            let g = grid(n, sp);
            let k = 2.0 * std::f64::consts::PI / 50_000.0;
            let vf = VectorField::from_fn(g.clone(), false, |lon, lat, _| {
                let (x, y) = xy(lon, lat);
                [(k * y).sin(), (k * x).sin(), 0.0]
            });
            let om = vorticity_z(&vf).unwrap();
            let c = n / 2 + n / 8;
            let p = g.node_position(c, c, 0);
            errs.push((om.value_at(c, c, 0).unwrap() - omega_exact(p.lon, p.lat)).abs());
        }
        let r1 = errs[0] / errs[1];
        let r2 = errs[1] / errs[2];
        assert!((3.0..5.0).contains(&r1), "ratios {r1} {r2} errs {errs:?}");
        assert!((3.0..5.0).contains(&r2), "ratios {r1} {r2} errs {errs:?}");
    }

    #[test]
    fn kind_parsing() {
        assert_eq!(
            "okubo-weiss".parse::<DerivedFieldKind>().unwrap(),
            DerivedFieldKind::OkuboWeiss
        );
        assert_eq!(
            "vorticity_z".parse::<DerivedFieldKind>().unwrap(),
            DerivedFieldKind::VorticityZ
        );
        assert!("nope".parse::<DerivedFieldKind>().is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(24))]
            #[test]
            fn scaling_laws(c in 0.1f64..5.0, a in -1.0f64..1.0, b in -1.0f64..1.0) {
                let g = grid(10, 0.02);
                let field = |s: f64| VectorField::from_fn(g.clone(), false, move |lon, lat, _| {
                    let (x, y) = xy(lon, lat);
                    [s * (a * (x * 1e-4).sin() + y * 1e-5), s * (b * (y * 2e-4).cos() - x * 3e-5), 0.0]
                });
                let (base, scaled) = (field(1.0), field(c));
                let (w0, w1) = (vorticity_z(&base).unwrap(), vorticity_z(&scaled).unwrap());
                let (o0, o1) = (okubo_weiss(&base).unwrap(), okubo_weiss(&scaled).unwrap());
                for n in 0..w0.values().len() {
                    let (x0, x1) = (w0.values()[n], w1.values()[n]);
                    prop_assert!((x1 - c * x0).abs() <= 1e-10 * (c * x0).abs().max(1e-20));
                    let (y0, y1) = (o0.values()[n], o1.values()[n]);
                    prop_assert!((y1 - c * c * y0).abs() <= 1e-10 * (c * c * y0).abs().max(1e-30));
                }
                prop_assert!(speed(&scaled, false).values().iter().all(|&s| s >= 0.0));
            }
        }
    }
}
