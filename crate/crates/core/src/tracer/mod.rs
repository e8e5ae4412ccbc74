//! Streamline and pathline integration plus seed placement.

mod integrate;
mod seeding;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{GridError, Position, ScalarField};

pub use integrate::{
    integrate, integrate_many, integrate_pathline, integrate_streamline, FlowField, SampleError,
    TimeSeriesFlow,
};
pub use seeding::{
    seed_in_isovolume, seed_uniform, seed_weighted, WeightTransform, ISOVOLUME_CANDIDATE_CAP,
};

#[derive(Debug, Error)]
pub enum TracerError {
    #[error("invalid integration parameters: {0}")]
    InvalidParams(String),
    #[error("no node has a positive seeding weight")]
    AllZeroWeights,
    #[error("no candidate seed satisfied the range constraints")]
    EmptySelection,
    #[error("grid has no fully valid cell to seed")]
    NoValidCell,
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Ingest(#[from] crate::ingest::IngestError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    #[default]
    Forward,
    Backward,
    Both,
}

impl FromStr for Direction {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "forward" => Ok(Self::Forward),
            "backward" => Ok(Self::Backward),
            "both" => Ok(Self::Both),
            other => Err(format!(
                "unknown direction `{other}` (expected forward, backward or both)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntegrationParams {
    /// Arc length per RK4 step, meters.
    pub step_length: f64,
    pub max_steps: usize,
    /// Integration stops once the speed falls below this (m/s).
    pub min_speed: f64,
    pub include_vertical: bool,
    pub direction: Direction,
    /// Optional cap on integrated time per leg, seconds. The last step is
    /// shortened to land exactly on it.
    pub max_time: Option<f64>,
}

impl Default for IntegrationParams {
    fn default() -> Self {
        Self {
            step_length: 1000.0,
            max_steps: 1000,
            min_speed: 1e-6,
            include_vertical: false,
            direction: Direction::Forward,
            max_time: None,
        }
    }
}

impl IntegrationParams {
    pub fn validate(&self) -> Result<(), TracerError> {
        if !(self.step_length > 0.0 && self.step_length.is_finite()) {
            return Err(TracerError::InvalidParams(
                "step_length must be positive".into(),
            ));
        }
        if self.max_steps == 0 {
            return Err(TracerError::InvalidParams(
                "max_steps must be at least 1".into(),
            ));
        }
        if self.min_speed.is_nan() || self.min_speed < 0.0 {
            return Err(TracerError::InvalidParams(
                "min_speed must be non-negative".into(),
            ));
        }
        if self.max_time.is_some_and(|t| t.is_nan() || t <= 0.0) {
            return Err(TracerError::InvalidParams(
                "max_time must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Integration start point. `birth_time` is a (fractional) timestep index
/// and only matters for pathlines.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Seed {
    pub position: Position,
    pub birth_time: f64,
}

impl Seed {
    pub fn new(position: Position) -> Self {
        Self {
            position,
            birth_time: 0.0,
        }
    }

    pub fn at_time(position: Position, birth_time: f64) -> Self {
        Self {
            position,
            birth_time,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    OutOfDomain,
    Masked,
    MaxSteps,
    Stagnation,
    TimeExhausted,
}

impl Termination {
    pub fn name(self) -> &'static str {
        match self {
            Self::OutOfDomain => "out_of_domain",
            Self::Masked => "masked",
            Self::MaxSteps => "max_steps",
            Self::Stagnation => "stagnation",
            Self::TimeExhausted => "time_exhausted",
        }
    }
}

impl fmt::Display for Termination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Integrated polyline with per-vertex attributes.
///
/// `times` are seconds (integration time for streamlines, dataset time for
/// pathlines) and `speeds` are m/s (NaN where the velocity could not be
/// sampled, which only happens for a seed outside the valid domain). For
/// bidirectional lines `termination` is the reason the forward leg ended.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FieldLine {
    vertices: Vec<Position>,
    times: Vec<f64>,
    speeds: Vec<f64>,
    scalars: Vec<(String, Vec<f64>)>,
    termination: Termination,
}

impl FieldLine {
    pub(crate) fn from_parts(
        vertices: Vec<Position>,
        times: Vec<f64>,
        speeds: Vec<f64>,
        termination: Termination,
    ) -> Self {
        debug_assert!(!vertices.is_empty());
        debug_assert_eq!(vertices.len(), times.len());
        debug_assert_eq!(vertices.len(), speeds.len());
        Self {
            vertices,
            times,
            speeds,
            scalars: Vec::new(),
            termination,
        }
    }

    pub fn vertices(&self) -> &[Position] {
        &self.vertices
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn speeds(&self) -> &[f64] {
        &self.speeds
    }

    pub fn scalars(&self) -> &[(String, Vec<f64>)] {
        &self.scalars
    }

    pub fn termination(&self) -> Termination {
        self.termination
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn first(&self) -> Position {
        self.vertices[0]
    }

    pub fn last(&self) -> Position {
        *self
            .vertices
            .last()
            .expect("field lines have at least one vertex")
    }

    /// Samples `field` at every vertex (NaN where interpolation fails) and
    /// stores it under the field's name.
    pub fn sample_scalar(&mut self, field: &ScalarField) {
        let values = self
            .vertices
            .iter()
            .map(|p| field.interpolate(p).unwrap_or(f64::NAN))
            .collect();
        self.scalars.push((field.name().to_string(), values));
    }
}
