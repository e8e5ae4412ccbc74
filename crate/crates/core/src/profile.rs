//! Vertical sampling: needle profiles at a point, latitude-depth sections at
//! a fixed longitude and the depth of an isosurface per water column.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fields::speed;
use crate::grid::{MaskPolicy, Position, ScalarField};
use crate::ingest::{Dataset, IngestError, VariableRole};

#[derive(Debug, Error)]
pub enum ProfileError {
    #[error("point ({lon}, {lat}) lies outside the grid")]
    OutOfBounds { lon: f64, lat: f64 },
    #[error("longitude {0} lies outside the grid")]
    LongitudeOutOfBounds(f64),
    #[error("no variables requested")]
    NoVariables,
    #[error(transparent)]
    Ingest(#[from] IngestError),
}

/// A mapped dataset variable or the horizontal speed derived from U and V.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProfileVariable {
    Role(VariableRole),
    Speed,
}

impl ProfileVariable {
    pub fn name(self) -> &'static str {
        match self {
            Self::Role(r) => r.name(),
            Self::Speed => "speed",
        }
    }

    fn load(self, d: &Dataset, t: usize) -> Result<ScalarField, IngestError> {
        match self {
            Self::Role(r) => d.load_scalar(r, t),
            Self::Speed => Ok(speed(&d.load_vector(t)?, false)),
        }
    }
}

impl fmt::Display for ProfileVariable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ProfileVariable {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.eq_ignore_ascii_case("speed") {
            return Ok(Self::Speed);
        }
        s.parse::<VariableRole>().map(Self::Role)
    }
}

/// Horizontal sampling of a needle or section.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sampling {
    /// Bilinear between the surrounding columns.
    #[default]
    Interpolated,
    /// Values of the nearest grid column.
    Nearest,
}

fn sample(field: &ScalarField, p: Position, mode: Sampling) -> Option<f64> {
    match mode {
        Sampling::Interpolated => field.interpolate_with(&p, MaskPolicy::Reject).ok(),
        Sampling::Nearest => {
            let g = field.grid();
            let (i, j, k) = (
                g.lon().nearest(p.lon),
                g.lat().nearest(p.lat),
                g.depth().nearest(p.depth),
            );
            field.value_at(i, j, k)
        }
    }
}

/// Values along a vertical needle at the native depth levels. `None`
/// marks a masked level.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DepthProfile {
    pub lon: f64,
    pub lat: f64,
    pub t: usize,
    /// Dataset time coordinate of `t`.
    pub time: f64,
    pub depths: Vec<f64>,
    pub columns: Vec<(ProfileVariable, Vec<Option<f64>>)>,
}

impl DepthProfile {
    pub fn column(&self, var: ProfileVariable) -> Option<&[Option<f64>]> {
        self.columns
            .iter()
            .find(|(v, _)| *v == var)
            .map(|(_, c)| c.as_slice())
    }

    /// True when any requested variable is missing at level `k`.
    pub fn is_masked(&self, k: usize) -> bool {
        self.columns.iter().any(|(_, c)| c[k].is_none())
    }
}

pub fn depth_profile(
    d: &Dataset,
    lon: f64,
    lat: f64,
    t: usize,
    variables: &[ProfileVariable],
    mode: Sampling,
) -> Result<DepthProfile, ProfileError> {
    if variables.is_empty() {
        return Err(ProfileError::NoVariables);
    }
    let g = d.grid();
    if !(g.lon().contains(lon) && g.lat().contains(lat)) {
        return Err(ProfileError::OutOfBounds { lon, lat });
    }
    let depths = g.depth().values().to_vec();
    let columns = variables
        .iter()
        .map(|&var| {
            let field = var.load(d, t)?;
            let col = depths
                .iter()
                .map(|&z| sample(&field, Position::new(lon, lat, z), mode))
                .collect();
            Ok((var, col))
        })
        .collect::<Result<Vec<_>, IngestError>>()?;
    Ok(DepthProfile {
        lon,
        lat,
        t,
        time: d.time().values()[t],
        depths,
        columns,
    })
}

/// One profile per timestep in `times`, computed in parallel.
pub fn depth_profiles(
    d: &Dataset,
    lon: f64,
    lat: f64,
    times: &[usize],
    variables: &[ProfileVariable],
    mode: Sampling,
) -> Result<Vec<DepthProfile>, ProfileError> {
    times
        .par_iter()
        .map(|&t| depth_profile(d, lon, lat, t, variables, mode))
        .collect()
}

/// A latitude-depth section; `values[k * lat.len() + j]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerticalSlice {
    pub variable: ProfileVariable,
    /// Longitude actually sampled (the grid column in nearest mode).
    pub lon: f64,
    pub t: usize,
    pub lat: Vec<f64>,
    pub depth: Vec<f64>,
    pub values: Vec<Option<f64>>,
}

impl VerticalSlice {
    pub fn get(&self, j: usize, k: usize) -> Option<f64> {
        self.values[k * self.lat.len() + j]
    }
}

pub fn vertical_slice(
    d: &Dataset,
    lon: f64,
    t: usize,
    variable: ProfileVariable,
    mode: Sampling,
) -> Result<VerticalSlice, ProfileError> {
    let g = d.grid();
    if !g.lon().contains(lon) {
        return Err(ProfileError::LongitudeOutOfBounds(lon));
    }
    let lon = match mode {
        Sampling::Interpolated => lon,
        Sampling::Nearest => g.lon().values()[g.lon().nearest(lon)],
    };
    let field = variable.load(d, t)?;
    let lat = g.lat().values().to_vec();
    let depth = g.depth().values().to_vec();
    let values = depth
        .iter()
        .flat_map(|&z| lat.iter().map(move |&y| Position::new(lon, y, z)))
        .map(|p| sample(&field, p, mode))
        .collect();
    Ok(VerticalSlice {
        variable,
        lon,
        t,
        lat,
        depth,
        values,
    })
}

/// Depth of an isosurface per column; `depths[j * lon.len() + i]`, `None`
/// where the column never reaches the iso value.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IsoDepthMap {
    pub variable: ProfileVariable,
    pub iso: f64,
    pub t: usize,
    pub lon: Vec<f64>,
    pub lat: Vec<f64>,
    pub depths: Vec<Option<f64>>,
}

impl IsoDepthMap {
    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        self.depths[j * self.lon.len() + i]
    }
}

/// Shallowest depth at which the column crosses `iso`, linearly
/// interpolated between levels. The scan stops at the first masked level.
pub fn column_crossing(
    depths: &[f64],
    values: impl IntoIterator<Item = Option<f64>>,
    iso: f64,
) -> Option<f64> {
    let mut prev: Option<(f64, f64)> = None;
    for (&z, v) in depths.iter().zip(values) {
        let v = v?;
        if v == iso {
            return Some(z);
        }
        if let Some((z0, v0)) = prev {
            if (v0 < iso) != (v < iso) {
                return Some(z0 + (iso - v0) / (v - v0) * (z - z0));
            }
        }
        prev = Some((z, v));
    }
    None
}

pub fn isosurface_depth(
    d: &Dataset,
    variable: ProfileVariable,
    iso: f64,
    t: usize,
) -> Result<IsoDepthMap, ProfileError> {
    let field = variable.load(d, t)?;
    let g = d.grid();
    let (nx, ny, nz) = g.dims();
    let levels = g.depth().values();
    let depths = (0..nx * ny)
        .into_par_iter()
        .map(|col| {
            let (i, j) = (col % nx, col / nx);
            column_crossing(levels, (0..nz).map(|k| field.value_at(i, j, k)), iso)
        })
        .collect();
    Ok(IsoDepthMap {
        variable,
        iso,
        t,
        lon: g.lon().values().to_vec(),
        lat: g.lat().values().to_vec(),
        depths,
    })
}
