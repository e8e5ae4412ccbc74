//! Rectilinear spatial model shared by every analysis: non-uniform axes, a
//! land mask, masked scalar/vector fields and trilinear interpolation.
//!
//! Node storage order is depth-major, then latitude, then longitude
//! (longitude varies fastest), matching the on-disk `(time, depth, lat, lon)`
//! layout of one timestep.

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Spherical Earth radius used for all degree/meter conversions.
pub const EARTH_RADIUS_M: f64 = 6_371_000.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("axis `{0}` needs at least two coordinates")]
    AxisTooShort(String),
    #[error("axis `{name}` is not strictly increasing at index {index}")]
    UnsortedAxis { name: String, index: usize },
    #[error("axis `{name}` has a non-finite coordinate at index {index}")]
    NonFiniteAxis { name: String, index: usize },
    #[error("expected {expected} values, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("position (lon {lon}, lat {lat}, depth {depth}) is outside the grid")]
    OutOfDomain { lon: f64, lat: f64, depth: f64 },
    #[error("interpolation stencil touches masked nodes")]
    MaskedRegion,
    #[error("fields are defined on different grids")]
    GridMismatch,
}

/// One coordinate axis. Longitudes/latitudes are degrees, depth is meters
/// positive-down.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    name: String,
    values: Vec<f64>,
    units: String,
}

impl Axis {
    pub fn new(
        name: impl Into<String>,
        values: Vec<f64>,
        units: impl Into<String>,
    ) -> Result<Self, GridError> {
        let name = name.into();
        if values.len() < 2 {
            return Err(GridError::AxisTooShort(name));
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(GridError::NonFiniteAxis { name, index });
        }
        if let Some(index) = values.windows(2).position(|w| w[1] <= w[0]) {
            return Err(GridError::UnsortedAxis {
                name,
                index: index + 1,
            });
        }
        Ok(Self {
            name,
            values,
            units: units.into(),
        })
    }

    /// Evenly spaced axis from `start` with `n` nodes.
    pub fn uniform(
        name: impl Into<String>,
        start: f64,
        step: f64,
        n: usize,
        units: impl Into<String>,
    ) -> Result<Self, GridError> {
        let values = (0..n).map(|i| start + step * i as f64).collect();
        Self::new(name, values, units)
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

    pub fn first(&self) -> f64 {
        self.values[0]
    }

    pub fn last(&self) -> f64 {
        self.values[self.values.len() - 1]
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.first() && x <= self.last()
    }

    /// Cell index `i` and fraction in `[0, 1]` such that
    /// `x = values[i] + frac * (values[i + 1] - values[i])`.
    ///
    /// The last node maps to the last cell with fraction 1.
    pub fn locate(&self, x: f64) -> Option<(usize, f64)> {
        if !self.contains(x) {
            return None;
        }
        let n = self.values.len();
        // first index with values[idx] > x
        let upper = self.values.partition_point(|&v| v <= x);
        let i = upper.saturating_sub(1).min(n - 2);
        let (a, b) = (self.values[i], self.values[i + 1]);
        let frac = ((x - a) / (b - a)).clamp(0.0, 1.0);
        Some((i, frac))
    }

    /// Index of the node closest to `x` (ties go to the lower index).
    pub fn nearest(&self, x: f64) -> usize {
        let n = self.values.len();
        let upper = self.values.partition_point(|&v| v < x);
        if upper == 0 {
            return 0;
        }
        if upper >= n {
            return n - 1;
        }
        if (x - self.values[upper - 1]) <= (self.values[upper] - x) {
            upper - 1
        } else {
            upper
        }
    }

    /// Mean spacing between nodes.
    pub fn mean_spacing(&self) -> f64 {
        (self.last() - self.first()) / (self.len() - 1) as f64
    }

    /// Sub-axis covering node indices `start..=end`.
    pub fn slice(&self, start: usize, end: usize) -> Result<Self, GridError> {
        Self::new(
            self.name.clone(),
            self.values[start..=end].to_vec(),
            self.units.clone(),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Position {
    pub lon: f64,
    pub lat: f64,
    pub depth: f64,
}

impl Position {
    pub const fn new(lon: f64, lat: f64, depth: f64) -> Self {
        Self { lon, lat, depth }
    }
}

/// Result of [`RectilinearGrid3D::locate`]: the lower corner of the
/// enclosing cell and fractional offsets inside it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellLocation {
    pub cell: (usize, usize, usize),
    pub frac: (f64, f64, f64),
}

/// How interpolation treats masked (invalid) corners that carry weight.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MaskPolicy {
    /// Fail with [`GridError::MaskedRegion`].
    #[default]
    Reject,
    /// Use the valid corner with the largest interpolation weight.
    NearestValid,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RectilinearGrid3D {
    lon: Axis,
    lat: Axis,
    depth: Axis,
    land_mask: Vec<bool>,
}

impl RectilinearGrid3D {
    pub fn new(lon: Axis, lat: Axis, depth: Axis, land_mask: Vec<bool>) -> Result<Self, GridError> {
        let expected = lon.len() * lat.len() * depth.len();
        if land_mask.len() != expected {
            return Err(GridError::LengthMismatch {
                expected,
                actual: land_mask.len(),
            });
        }
        Ok(Self {
            lon,
            lat,
            depth,
            land_mask,
        })
    }

    /// Grid with no land.
    pub fn ocean(lon: Axis, lat: Axis, depth: Axis) -> Self {
        let n = lon.len() * lat.len() * depth.len();
        Self {
            lon,
            lat,
            depth,
            land_mask: vec![false; n],
        }
    }

    pub fn lon(&self) -> &Axis {
        &self.lon
    }

    pub fn lat(&self) -> &Axis {
        &self.lat
    }

    pub fn depth(&self) -> &Axis {
        &self.depth
    }

    pub fn land_mask(&self) -> &[bool] {
        &self.land_mask
    }

    /// `(nlon, nlat, ndepth)`.
    pub fn dims(&self) -> (usize, usize, usize) {
        (self.lon.len(), self.lat.len(), self.depth.len())
    }

    pub fn node_count(&self) -> usize {
        self.land_mask.len()
    }

    /// Nodes per depth level.
    pub fn layer_len(&self) -> usize {
        self.lon.len() * self.lat.len()
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        (k * self.lat.len() + j) * self.lon.len() + i
    }

    #[inline]
    pub fn unravel(&self, idx: usize) -> (usize, usize, usize) {
        let nx = self.lon.len();
        let ny = self.lat.len();
        (idx % nx, (idx / nx) % ny, idx / (nx * ny))
    }

    pub fn is_land(&self, i: usize, j: usize, k: usize) -> bool {
        self.land_mask[self.index(i, j, k)]
    }

    pub fn node_position(&self, i: usize, j: usize, k: usize) -> Position {
        Position::new(self.lon.values[i], self.lat.values[j], self.depth.values[k])
    }

    pub fn contains(&self, p: &Position) -> bool {
        self.lon.contains(p.lon) && self.lat.contains(p.lat) && self.depth.contains(p.depth)
    }

    pub fn locate(&self, p: &Position) -> Result<CellLocation, GridError> {
        let out = || GridError::OutOfDomain {
            lon: p.lon,
            lat: p.lat,
            depth: p.depth,
        };
        let (i, fx) = self.lon.locate(p.lon).ok_or_else(out)?;
        let (j, fy) = self.lat.locate(p.lat).ok_or_else(out)?;
        let (k, fz) = self.depth.locate(p.depth).ok_or_else(out)?;
        Ok(CellLocation {
            cell: (i, j, k),
            frac: (fx, fy, fz),
        })
    }

    /// Meters per degree of longitude and latitude on row `j`.
    pub fn horizontal_metric(&self, j: usize) -> (f64, f64) {
        metric_at_lat(self.lat.values[j])
    }

    /// Fraction of nodes flagged as land.
    pub fn land_fraction(&self) -> f64 {
        let land = self.land_mask.iter().filter(|&&m| m).count();
        land as f64 / self.land_mask.len() as f64
    }
}

/// `(dx, dy)` meters per degree at latitude `lat_deg` on the spherical Earth.
#[inline]
pub fn metric_at_lat(lat_deg: f64) -> (f64, f64) {
    let dy = EARTH_RADIUS_M * std::f64::consts::PI / 180.0;
    let dx = dy * lat_deg.to_radians().cos();
    (dx.max(0.0), dy)
}

/// Eight corner indices and trilinear weights of a located cell.
fn corner_weights(grid: &RectilinearGrid3D, loc: &CellLocation) -> [(usize, f64); 8] {
    let (i, j, k) = loc.cell;
    let (fx, fy, fz) = loc.frac;
    let mut out = [(0usize, 0.0f64); 8];
    let mut n = 0;
    for (dk, wz) in [(0, 1.0 - fz), (1, fz)] {
        for (dj, wy) in [(0, 1.0 - fy), (1, fy)] {
            for (di, wx) in [(0, 1.0 - fx), (1, fx)] {
                out[n] = (grid.index(i + di, j + dj, k + dk), wx * wy * wz);
                n += 1;
            }
        }
    }
    out
}

/// `a + f (b - a)`, returning an endpoint exactly when `f` is 0 or 1 so a
/// zero-weight corner never contributes (it may hold a masked value).
#[inline]
fn lerp(a: f64, b: f64, f: f64) -> f64 {
    if f == 0.0 {
        a
    } else if f == 1.0 {
        b
    } else {
        a + f * (b - a)
    }
}

/// Trilinear blend of corner values ordered as in [`corner_weights`].
#[inline]
fn trilerp(c: [f64; 8], (fx, fy, fz): (f64, f64, f64)) -> f64 {
    let y0 = lerp(lerp(c[0], c[1], fx), lerp(c[2], c[3], fx), fy);
    let y1 = lerp(lerp(c[4], c[5], fx), lerp(c[6], c[7], fx), fy);
    lerp(y0, y1, fz)
}

/// Resolve which corners participate under `policy`. Corners with zero
/// weight never participate, so evaluating exactly on a node or face only
/// depends on the nodes of that node or face.
fn resolve_corners(
    corners: &[(usize, f64); 8],
    valid: &[bool],
    policy: MaskPolicy,
) -> Result<Option<usize>, GridError> {
    let touches_invalid = corners.iter().any(|&(idx, w)| w > 0.0 && !valid[idx]);
    if !touches_invalid {
        return Ok(None);
    }
    match policy {
        MaskPolicy::Reject => Err(GridError::MaskedRegion),
        MaskPolicy::NearestValid => corners
            .iter()
            .filter(|(idx, _)| valid[*idx])
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .map(|&(idx, _)| Some(idx))
            .ok_or(GridError::MaskedRegion),
    }
}

/// Scalar samples on the nodes of a grid with a validity mask.
#[derive(Debug, Clone)]
pub struct ScalarField {
    grid: Arc<RectilinearGrid3D>,
    name: String,
    units: String,
    values: Vec<f64>,
    valid: Vec<bool>,
}

impl ScalarField {
    /// Builds a field; nodes that are land or carry a non-finite value are
    /// marked invalid.
    pub fn new(
        grid: Arc<RectilinearGrid3D>,
        name: impl Into<String>,
        units: impl Into<String>,
        values: Vec<f64>,
        valid: Vec<bool>,
    ) -> Result<Self, GridError> {
        let expected = grid.node_count();
        for len in [values.len(), valid.len()] {
            if len != expected {
                return Err(GridError::LengthMismatch {
                    expected,
                    actual: len,
                });
            }
        }
        let valid = valid
            .iter()
            .zip(&values)
            .zip(grid.land_mask())
            .map(|((&ok, v), &land)| ok && !land && v.is_finite())
            .collect();
        Ok(Self {
            grid,
            name: name.into(),
            units: units.into(),
            values,
            valid,
        })
    }

    /// Field whose validity comes from the grid mask and value finiteness.
    pub fn from_values(
        grid: Arc<RectilinearGrid3D>,
        name: impl Into<String>,
        units: impl Into<String>,
        values: Vec<f64>,
    ) -> Result<Self, GridError> {
        let n = values.len();
        Self::new(grid, name, units, values, vec![true; n])
    }

    /// Samples `f(lon, lat, depth)` at every node.
    pub fn from_fn(
        grid: Arc<RectilinearGrid3D>,
        name: impl Into<String>,
        units: impl Into<String>,
        f: impl Fn(f64, f64, f64) -> f64,
    ) -> Self {
        let (nx, ny, nz) = grid.dims();
        let mut values = Vec::with_capacity(grid.node_count());
        for k in 0..nz {
            let z = grid.depth().values()[k];
            for j in 0..ny {
                let y = grid.lat().values()[j];
                for i in 0..nx {
                    values.push(f(grid.lon().values()[i], y, z));
                }
            }
        }
        Self::from_values(grid, name, units, values).expect("sized from grid")
    }

    pub fn grid(&self) -> &Arc<RectilinearGrid3D> {
        &self.grid
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

    pub fn valid(&self) -> &[bool] {
        &self.valid
    }

    pub fn value_at(&self, i: usize, j: usize, k: usize) -> Option<f64> {
        let idx = self.grid.index(i, j, k);
        self.valid[idx].then(|| self.values[idx])
    }

    pub fn interpolate(&self, p: &Position) -> Result<f64, GridError> {
        self.interpolate_with(p, MaskPolicy::Reject)
    }

    pub fn interpolate_with(&self, p: &Position, policy: MaskPolicy) -> Result<f64, GridError> {
        let loc = self.grid.locate(p)?;
        let corners = corner_weights(&self.grid, &loc);
        match resolve_corners(&corners, &self.valid, policy)? {
            Some(idx) => Ok(self.values[idx]),
            None => Ok(trilerp(corners.map(|(idx, _)| self.values[idx]), loc.frac)),
        }
    }

    /// `(min, max)` over valid nodes.
    pub fn range(&self) -> Option<(f64, f64)> {
        self.values
            .iter()
            .zip(&self.valid)
            .filter(|(_, &ok)| ok)
            .fold(None, |acc, (&v, _)| match acc {
                None => Some((v, v)),
                Some((lo, hi)) => Some((lo.min(v), hi.max(v))),
            })
    }
}

/// Velocity components `u` (east), `v` (north) and optional `w` (up), m/s.
#[derive(Debug, Clone)]
pub struct VectorField {
    grid: Arc<RectilinearGrid3D>,
    u: Vec<f64>,
    v: Vec<f64>,
    w: Option<Vec<f64>>,
    valid: Vec<bool>,
}

impl VectorField {
    pub fn new(
        grid: Arc<RectilinearGrid3D>,
        u: Vec<f64>,
        v: Vec<f64>,
        w: Option<Vec<f64>>,
        valid: Vec<bool>,
    ) -> Result<Self, GridError> {
        let expected = grid.node_count();
        let lens = [
            Some(u.len()),
            Some(v.len()),
            w.as_ref().map(Vec::len),
            Some(valid.len()),
        ];
        for len in lens.into_iter().flatten() {
            if len != expected {
                return Err(GridError::LengthMismatch {
                    expected,
                    actual: len,
                });
            }
        }
        let valid = (0..expected)
            .map(|n| {
                valid[n]
                    && !grid.land_mask()[n]
                    && u[n].is_finite()
                    && v[n].is_finite()
                    && w.as_ref().is_none_or(|w| w[n].is_finite())
            })
            .collect();
        Ok(Self {
            grid,
            u,
            v,
            w,
            valid,
        })
    }

    /// Combines per-component scalar fields; validity is the intersection.
    pub fn from_components(
        u: &ScalarField,
        v: &ScalarField,
        w: Option<&ScalarField>,
    ) -> Result<Self, GridError> {
        if !Arc::ptr_eq(u.grid(), v.grid()) && u.grid() != v.grid() {
            return Err(GridError::GridMismatch);
        }
        if let Some(w) = w {
            if !Arc::ptr_eq(u.grid(), w.grid()) && u.grid() != w.grid() {
                return Err(GridError::GridMismatch);
            }
        }
        let valid = (0..u.values.len())
            .map(|n| u.valid[n] && v.valid[n] && w.is_none_or(|w| w.valid[n]))
            .collect();
        Self::new(
            u.grid.clone(),
            u.values.clone(),
            v.values.clone(),
            w.map(|w| w.values.clone()),
            valid,
        )
    }

    /// Samples `f(lon, lat, depth) -> (u, v, w)` at every node.
    pub fn from_fn(
        grid: Arc<RectilinearGrid3D>,
        with_vertical: bool,
        f: impl Fn(f64, f64, f64) -> [f64; 3],
    ) -> Self {
        let n = grid.node_count();
        let (nx, ny, nz) = grid.dims();
        let mut u = Vec::with_capacity(n);
        let mut v = Vec::with_capacity(n);
        let mut w = Vec::with_capacity(if with_vertical { n } else { 0 });
        for k in 0..nz {
            let z = grid.depth().values()[k];
            for j in 0..ny {
                let y = grid.lat().values()[j];
                for i in 0..nx {
                    let vel = f(grid.lon().values()[i], y, z);
                    u.push(vel[0]);
                    v.push(vel[1]);
                    if with_vertical {
                        w.push(vel[2]);
                    }
                }
            }
        }
        let w = with_vertical.then_some(w);
        Self::new(grid, u, v, w, vec![true; n]).expect("sized from grid")
    }

    pub fn grid(&self) -> &Arc<RectilinearGrid3D> {
        &self.grid
    }

    pub fn u(&self) -> &[f64] {
        &self.u
    }

    pub fn v(&self) -> &[f64] {
        &self.v
    }

    pub fn w(&self) -> Option<&[f64]> {
        self.w.as_deref()
    }

    pub fn has_vertical(&self) -> bool {
        self.w.is_some()
    }

    pub fn valid(&self) -> &[bool] {
        &self.valid
    }

    /// Interpolated `(u, v, w)`; `w` is zero when `include_vertical` is off
    /// or the field has no vertical component.
    pub fn interpolate(&self, p: &Position, include_vertical: bool) -> Result<[f64; 3], GridError> {
        self.interpolate_with(p, include_vertical, MaskPolicy::Reject)
    }

    pub fn interpolate_with(
        &self,
        p: &Position,
        include_vertical: bool,
        policy: MaskPolicy,
    ) -> Result<[f64; 3], GridError> {
        let loc = self.grid.locate(p)?;
        let corners = corner_weights(&self.grid, &loc);
        let w = self.w.as_deref().filter(|_| include_vertical);
        if let Some(idx) = resolve_corners(&corners, &self.valid, policy)? {
            return Ok([self.u[idx], self.v[idx], w.map_or(0.0, |w| w[idx])]);
        }
        Ok([
            trilerp(corners.map(|(idx, _)| self.u[idx]), loc.frac),
            trilerp(corners.map(|(idx, _)| self.v[idx]), loc.frac),
            w.map_or(0.0, |w| trilerp(corners.map(|(idx, _)| w[idx]), loc.frac)),
        ])
    }

    /// Single-component view as a scalar field (0 = u, 1 = v, 2 = w).
    pub fn component(&self, c: usize) -> Option<ScalarField> {
        let (name, values) = match c {
            0 => ("u", self.u.clone()),
            1 => ("v", self.v.clone()),
            2 => ("w", self.w.clone()?),
            _ => return None,
        };
        Some(ScalarField {
            grid: self.grid.clone(),
            name: name.into(),
            units: "m/s".into(),
            values,
            valid: self.valid.clone(),
        })
    }

    /// Horizontal velocity on depth level `k`.
    pub fn level(&self, k: usize) -> VelocitySlice {
        let grid = &self.grid;
        let n = grid.layer_len();
        let range = k * n..(k + 1) * n;
        VelocitySlice {
            lon: grid.lon().clone(),
            lat: grid.lat().clone(),
            depth: grid.depth().values()[k],
            level: k,
            u: self.u[range.clone()].to_vec(),
            v: self.v[range.clone()].to_vec(),
            valid: self.valid[range].to_vec(),
        }
    }
}

/// Horizontal velocity on a single depth level, with bilinear interpolation.
#[derive(Debug, Clone)]
pub struct VelocitySlice {
    lon: Axis,
    lat: Axis,
    depth: f64,
    level: usize,
    u: Vec<f64>,
    v: Vec<f64>,
    valid: Vec<bool>,
}

impl VelocitySlice {
    pub fn new(
        lon: Axis,
        lat: Axis,
        depth: f64,
        u: Vec<f64>,
        v: Vec<f64>,
        valid: Vec<bool>,
    ) -> Result<Self, GridError> {
        let expected = lon.len() * lat.len();
        for len in [u.len(), v.len(), valid.len()] {
            if len != expected {
                return Err(GridError::LengthMismatch {
                    expected,
                    actual: len,
                });
            }
        }
        let valid = (0..expected)
            .map(|n| valid[n] && u[n].is_finite() && v[n].is_finite())
            .collect();
        Ok(Self {
            lon,
            lat,
            depth,
            level: 0,
            u,
            v,
            valid,
        })
    }

    /// Samples `f(lon, lat) -> (u, v)` on the given axes.
    pub fn from_fn(lon: Axis, lat: Axis, depth: f64, f: impl Fn(f64, f64) -> [f64; 2]) -> Self {
        let n = lon.len() * lat.len();
        let mut u = Vec::with_capacity(n);
        let mut v = Vec::with_capacity(n);
        for &y in lat.values() {
            for &x in lon.values() {
                let vel = f(x, y);
                u.push(vel[0]);
                v.push(vel[1]);
            }
        }
        Self::new(lon, lat, depth, u, v, vec![true; n]).expect("sized from axes")
    }

    pub fn lon(&self) -> &Axis {
        &self.lon
    }

    pub fn lat(&self) -> &Axis {
        &self.lat
    }

    pub fn depth(&self) -> f64 {
        self.depth
    }

    /// Depth level index this slice was taken from (0 for standalone slices).
    pub fn level(&self) -> usize {
        self.level
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.lon.len(), self.lat.len())
    }

    pub fn u(&self) -> &[f64] {
        &self.u
    }

    pub fn v(&self) -> &[f64] {
        &self.v
    }

    pub fn valid(&self) -> &[bool] {
        &self.valid
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.lon.len() + i
    }

    pub fn contains(&self, lon: f64, lat: f64) -> bool {
        self.lon.contains(lon) && self.lat.contains(lat)
    }

    pub fn interpolate(&self, lon: f64, lat: f64) -> Result<[f64; 2], GridError> {
        let out = || GridError::OutOfDomain {
            lon,
            lat,
            depth: self.depth,
        };
        let (i, fx) = self.lon.locate(lon).ok_or_else(out)?;
        let (j, fy) = self.lat.locate(lat).ok_or_else(out)?;
        let corners = [(0, 0), (1, 0), (0, 1), (1, 1)].map(|(di, dj)| self.index(i + di, j + dj));
        let weights = [
            (1.0 - fx) * (1.0 - fy),
            fx * (1.0 - fy),
            (1.0 - fx) * fy,
            fx * fy,
        ];
        if corners
            .iter()
            .zip(weights)
            .any(|(&idx, w)| w > 0.0 && !self.valid[idx])
        {
            return Err(GridError::MaskedRegion);
        }
        let bilerp = |c: [f64; 4]| lerp(lerp(c[0], c[1], fx), lerp(c[2], c[3], fx), fy);
        Ok([
            bilerp(corners.map(|idx| self.u[idx])),
            bilerp(corners.map(|idx| self.v[idx])),
        ])
    }

    /// Horizontal speed per node (NaN where invalid).
    pub fn speed(&self) -> Vec<f64> {
        self.u
            .iter()
            .zip(&self.v)
            .zip(&self.valid)
            .map(|((u, v), &ok)| if ok { u.hypot(*v) } else { f64::NAN })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn axis(name: &str, v: &[f64]) -> Axis {
        Axis::new(name, v.to_vec(), "").unwrap()
    }

    fn grid(lon: &[f64], lat: &[f64], depth: &[f64]) -> Arc<RectilinearGrid3D> {
        Arc::new(RectilinearGrid3D::ocean(
            axis("lon", lon),
            axis("lat", lat),
            axis("depth", depth),
        ))
    }

    #[test]
    fn axis_rejects_short_and_unsorted() {
        assert!(matches!(
            Axis::new("x", vec![1.0], ""),
            Err(GridError::AxisTooShort(_))
        ));
        assert!(matches!(
            Axis::new("x", vec![0.0, 2.0, 2.0], ""),
            Err(GridError::UnsortedAxis { index: 2, .. })
        ));
    }

    #[test]
    fn locate_node_and_midpoint() {
        let g = grid(&[0.0, 1.0, 3.0], &[0.0, 2.0, 5.0], &[0.0, 4.0, 10.0]);
        let loc = g.locate(&Position::new(1.0, 2.0, 4.0)).unwrap();
        assert_eq!(loc.cell, (1, 1, 1));
        assert_eq!(loc.frac, (0.0, 0.0, 0.0));

        let g = grid(&[0.0, 2.0], &[0.0, 4.0], &[0.0, 8.0]);
        let loc = g.locate(&Position::new(1.0, 2.0, 4.0)).unwrap();
        assert_eq!(loc.cell, (0, 0, 0));
        assert_eq!(loc.frac, (0.5, 0.5, 0.5));
    }

    #[test]
    fn locate_out_of_domain() {
        let g = grid(&[0.0, 2.0], &[0.0, 4.0], &[0.0, 8.0]);
        assert!(matches!(
            g.locate(&Position::new(2.5, 1.0, 1.0)),
            Err(GridError::OutOfDomain { .. })
        ));
    }

    #[test]
    fn locate_matches_linear_scan() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let mut coords = vec![0.0];
        for _ in 0..30 {
            let last = *coords.last().unwrap();
            coords.push(last + rng.random_range(0.1..3.0));
        }
        let ax = axis("x", &coords);
        for _ in 0..2000 {
            let x = rng.random_range(ax.first()..=ax.last());
            let (i, frac) = ax.locate(x).unwrap();
            let scan = (0..coords.len() - 1)
                .find(|&c| coords[c] <= x && x < coords[c + 1])
                .unwrap_or(coords.len() - 2);
            assert_eq!(i, scan);
            assert!((0.0..=1.0).contains(&frac));
        }
    }

    #[test]
    fn metric_values() {
        let (dx, dy) = metric_at_lat(0.0);
        assert!((dx - 111_194.93).abs() < 0.01);
        assert_eq!(dx, dy);
        let (dx, dy) = metric_at_lat(60.0);
        assert!((dx - dy / 2.0).abs() < 1e-9);
        let (dx, _) = metric_at_lat(90.0);
        assert!(dx.abs() < 1e-9);
    }

    #[test]
    fn interpolation_exact_on_multilinear() {
        let g = grid(&[0.0, 0.5, 2.0, 2.2], &[-1.0, 0.3, 1.0], &[0.0, 4.0, 30.0]);
        let f = ScalarField::from_fn(g.clone(), "f", "", |x, y, z| {
            1.0 + x + 2.0 * y + 3.0 * z + 0.5 * x * y - 0.25 * y * z + 0.1 * x * y * z
        });
        for &(x, y, z) in &[(0.1, 0.2, 1.0), (1.9, -0.7, 25.0), (2.2, 1.0, 30.0)] {
            let exact = 1.0 + x + 2.0 * y + 3.0 * z + 0.5 * x * y - 0.25 * y * z + 0.1 * x * y * z;
            let got = f.interpolate(&Position::new(x, y, z)).unwrap();
            assert!((got - exact).abs() <= 1e-12 * exact.abs().max(1.0));
        }
        assert_eq!(
            f.interpolate(&Position::new(0.5, 0.3, 4.0)).unwrap(),
            f.value_at(1, 1, 1).unwrap()
        );
    }

    #[test]
    fn masked_corner_policy() {
        let lon = axis("lon", &[0.0, 1.0, 2.0]);
        let lat = axis("lat", &[0.0, 1.0]);
        let depth = axis("depth", &[0.0, 1.0]);
        let mut mask = vec![false; 12];
        mask[0] = true;
        let g = Arc::new(RectilinearGrid3D::new(lon, lat, depth, mask).unwrap());
        let f = ScalarField::from_fn(g, "f", "", |x, _, _| x);
        assert!(!f.valid()[0]);
        let p = Position::new(0.25, 0.5, 0.5);
        assert_eq!(f.interpolate(&p), Err(GridError::MaskedRegion));
        // nearest valid corner with the largest weight: (0,1,*) or (1,*,*)
        let v = f
            .interpolate_with(&Position::new(0.2, 0.1, 0.1), MaskPolicy::NearestValid)
            .unwrap();
        assert!(v == 0.0 || v == 1.0);
        // a cell away from the masked node is unaffected
        assert!((f.interpolate(&Position::new(1.5, 0.5, 0.5)).unwrap() - 1.5).abs() < 1e-15);
        // evaluating on the valid face shared with the masked cell succeeds
        assert_eq!(f.interpolate(&Position::new(1.0, 0.5, 0.5)).unwrap(), 1.0);
    }

    #[test]
    fn vector_interpolation_vertical_flag() {
        let g = grid(&[0.0, 1.0], &[0.0, 1.0], &[0.0, 10.0]);
        let vf = VectorField::from_fn(g, true, |_, _, _| [1.0, 0.0, 0.5]);
        let p = Position::new(0.3, 0.3, 3.0);
        assert_eq!(vf.interpolate(&p, false).unwrap(), [1.0, 0.0, 0.0]);
        assert_eq!(vf.interpolate(&p, true).unwrap(), [1.0, 0.0, 0.5]);
    }

    #[test]
    fn vector_interpolation_matches_components() {
        let g = grid(&[0.0, 1.0, 2.5], &[0.0, 1.0, 1.5], &[0.0, 10.0, 50.0]);
        let vf = VectorField::from_fn(g, true, |x, y, z| [x + y, 2.0 * y - z, x * z]);
        let p = Position::new(1.7, 0.4, 33.0);
        let got = vf.interpolate(&p, true).unwrap();
        for (c, want) in got.iter().enumerate() {
            let comp = vf.component(c).unwrap().interpolate(&p).unwrap();
            assert!((want - comp).abs() < 1e-12);
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn locate_of_node_is_identity(i in 0usize..4, j in 0usize..3, k in 0usize..3) {
                let g = grid(&[0.0, 0.5, 2.0, 2.2, 7.0], &[-1.0, 0.3, 1.0, 4.0], &[0.0, 4.0, 30.0, 31.0]);
                let loc = g.locate(&g.node_position(i, j, k)).unwrap();
                prop_assert_eq!(loc.cell, (i, j, k));
                prop_assert_eq!(loc.frac, (0.0, 0.0, 0.0));
            }

            #[test]
            fn continuity_across_faces(y in -1.0f64..4.0, z in 0.0f64..31.0, seed in 0u64..1000) {
                let g = grid(&[0.0, 0.5, 2.0, 2.2], &[-1.0, 0.3, 1.0, 4.0], &[0.0, 4.0, 30.0, 31.0]);
                let f = ScalarField::from_fn(g.clone(), "f", "", |x, yy, zz| {
                    ((x * 3.1 + seed as f64).sin() + yy * yy - zz.sqrt()) * 2.0
                });
                let face = Position::new(0.5, y, z);
                let eps = 1e-14;
                let left = f.interpolate(&Position::new(0.5 - eps, y, z)).unwrap();
                let right = f.interpolate(&Position::new(0.5 + eps, y, z)).unwrap();
                let at = f.interpolate(&face).unwrap();
                prop_assert!((left - at).abs() < 1e-12);
                prop_assert!((right - at).abs() < 1e-12);
            }
        }
    }
}
