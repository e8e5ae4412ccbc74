//! Eddy detection: speed minima filtered by persistence, a quadrant winding
//! check, a radial bisection search for the boundary and stacking of
//! per-slice detections into 3D profiles.
//!
//! All geometry is measured in the local tangent plane of the candidate
//! centre: `x = Δlon · dx(lat_c)`, `y = Δlat · dy`.

use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::fmt;

use rayon::prelude::*;
use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::fields::slice_gradient;
use crate::grid::{metric_at_lat, Position, VectorField, VelocitySlice};
use crate::topology::{persistence_of_minima, simplify_minima, Slice2D};
use crate::tracer::{integrate, Direction, FieldLine, IntegrationParams};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EddyError {
    #[error("no closed streamline around ({lon}, {lat}) even at the innermost probe")]
    NoClosedStreamline { lon: f64, lat: f64 },
}

fn finite_or_null<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
    if v.is_finite() {
        s.serialize_some(v)
    } else {
        s.serialize_none()
    }
}

/// Rotation sense relative to the local hemisphere.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Rotation {
    Cyclonic,
    Anticyclonic,
}

impl Rotation {
    /// Cyclonic means counter-clockwise in the northern hemisphere and
    /// clockwise in the southern one.
    pub fn from_vorticity(omega: f64, lat: f64) -> Self {
        if (omega >= 0.0) == (lat >= 0.0) {
            Self::Cyclonic
        } else {
            Self::Anticyclonic
        }
    }
}

/// A speed minimum on one depth level. `persistence` is infinite for the
/// global minimum of a connected region (serialized as `null`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EddyCentre {
    pub position: Position,
    pub i: usize,
    pub j: usize,
    pub level: usize,
    #[serde(serialize_with = "finite_or_null")]
    pub persistence: f64,
    pub speed_at_centre: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum RadialAxis {
    East,
    West,
    North,
    South,
}

impl RadialAxis {
    pub const ALL: [RadialAxis; 4] = [Self::East, Self::West, Self::North, Self::South];

    pub fn name(self) -> &'static str {
        match self {
            Self::East => "east",
            Self::West => "west",
            Self::North => "north",
            Self::South => "south",
        }
    }

    fn unit(self) -> (f64, f64) {
        match self {
            Self::East => (1.0, 0.0),
            Self::West => (-1.0, 0.0),
            Self::North => (0.0, 1.0),
            Self::South => (0.0, -1.0),
        }
    }
}

impl fmt::Display for RadialAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Boundary distance along each radial axis, meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundaryRadii {
    pub east: f64,
    pub west: f64,
    pub north: f64,
    pub south: f64,
}

impl BoundaryRadii {
    pub fn get(&self, axis: RadialAxis) -> f64 {
        match axis {
            RadialAxis::East => self.east,
            RadialAxis::West => self.west,
            RadialAxis::North => self.north,
            RadialAxis::South => self.south,
        }
    }

    fn set(&mut self, axis: RadialAxis, r: f64) {
        match axis {
            RadialAxis::East => self.east = r,
            RadialAxis::West => self.west = r,
            RadialAxis::North => self.north = r,
            RadialAxis::South => self.south = r,
        }
    }

    pub fn mean(&self) -> f64 {
        (self.east + self.west + self.north + self.south) / 4.0
    }
}

/// Streamline settings shared by the winding check and the boundary search.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrbitParams {
    /// Target number of RK4 steps per circle of the seed radius.
    pub steps_per_rev: usize,
    /// Upper bound on the step length, meters. `None` uses one grid cell.
    pub max_step: Option<f64>,
    /// Streamlines are integrated for at most this many circle lengths.
    pub max_revolutions: f64,
}

impl Default for OrbitParams {
    fn default() -> Self {
        Self {
            steps_per_rev: 64,
            max_step: None,
            max_revolutions: 4.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EddyParams {
    /// Minimum persistence of a speed minimum, m/s.
    pub persistence_threshold: f64,
    /// Largest boundary radius probed, meters.
    pub r_max: f64,
    pub bisection_iterations: usize,
    /// A streamline is nearly closed when it comes back within this
    /// fraction of the seed radius after half a winding.
    pub closure_fraction: f64,
    /// Extra probes beyond the bisected boundary used to detect a
    /// non-monotone closedness predicate.
    pub verification_probes: usize,
    /// Maximum horizontal distance, in cells, between stacked centres of
    /// adjacent slices.
    pub stacking_cells: f64,
    /// Ring fractions of each boundary radius at which profile lines are
    /// seeded; empty disables profile lines.
    pub ring_fractions: Vec<f64>,
    pub orbit: OrbitParams,
}

impl Default for EddyParams {
    fn default() -> Self {
        Self {
            persistence_threshold: 0.05,
            r_max: 250_000.0,
            bisection_iterations: 12,
            closure_fraction: 0.25,
            verification_probes: 3,
            stacking_cells: 2.0,
            ring_fractions: vec![1.0 / 3.0, 2.0 / 3.0, 1.0],
            orbit: OrbitParams::default(),
        }
    }
}

/// Geometry of a streamline relative to a centre.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrbitSummary {
    /// Net signed turning angle about the centre, radians (positive is
    /// counter-clockwise).
    pub winding: f64,
    /// Bitmask of visited quadrants (bit q for quadrant q, counter-clockwise
    /// from `x > 0, y > 0`).
    pub quadrants: u8,
    /// Closest approach to the seed after half a winding, meters; infinite
    /// if half a winding was never reached.
    pub return_distance: f64,
}

impl OrbitSummary {
    pub fn visits_all_quadrants(&self) -> bool {
        self.quadrants == 0b1111
    }

    pub fn full_winding(&self) -> bool {
        self.winding.abs() >= TAU
    }

    pub fn nearly_closed(&self, seed_radius: f64, fraction: f64) -> bool {
        self.full_winding() && self.return_distance < fraction * seed_radius
    }
}

/// Local tangent-plane frame at a centre.
#[derive(Debug, Clone, Copy)]
struct Frame {
    lon: f64,
    lat: f64,
    mx: f64,
    my: f64,
}

impl Frame {
    fn new(lon: f64, lat: f64) -> Self {
        let (mx, my) = metric_at_lat(lat);
        Self { lon, lat, mx, my }
    }

    fn local(&self, p: &Position) -> (f64, f64) {
        ((p.lon - self.lon) * self.mx, (p.lat - self.lat) * self.my)
    }

    fn at(&self, x: f64, y: f64, depth: f64) -> Position {
        Position::new(self.lon + x / self.mx, self.lat + y / self.my, depth)
    }
}

fn quadrant(x: f64, y: f64) -> Option<u8> {
    match (x.partial_cmp(&0.0)?, y.partial_cmp(&0.0)?) {
        (std::cmp::Ordering::Greater, std::cmp::Ordering::Greater) => Some(0),
        (std::cmp::Ordering::Less, std::cmp::Ordering::Greater) => Some(1),
        (std::cmp::Ordering::Less, std::cmp::Ordering::Less) => Some(2),
        (std::cmp::Ordering::Greater, std::cmp::Ordering::Less) => Some(3),
        _ => None,
    }
}

fn point_segment_distance(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let len2 = dx * dx + dy * dy;
    let t = if len2 > 0.0 {
        (((p.0 - a.0) * dx + (p.1 - a.1) * dy) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    (p.0 - a.0 - t * dx).hypot(p.1 - a.1 - t * dy)
}

/// Winding, quadrant and return statistics of `line` about `frame`,
/// truncated once it has turned five quarter turns.
fn summarize(line: &FieldLine, frame: &Frame) -> OrbitSummary {
    let pts: Vec<(f64, f64)> = line.vertices().iter().map(|p| frame.local(p)).collect();
    let seed = pts[0];
    let mut summary = OrbitSummary {
        winding: 0.0,
        quadrants: 0,
        return_distance: f64::INFINITY,
    };
    let mut angle = seed.1.atan2(seed.0);
    if let Some(q) = quadrant(seed.0, seed.1) {
        summary.quadrants |= 1 << q;
    }
    for w in pts.windows(2) {
        let (a, b) = (w[0], w[1]);
        if let Some(q) = quadrant(b.0, b.1) {
            summary.quadrants |= 1 << q;
        }
        if b.0 != 0.0 || b.1 != 0.0 {
            let next = b.1.atan2(b.0);
            let mut d = next - angle;
            if d > PI {
                d -= TAU;
            } else if d <= -PI {
                d += TAU;
            }
            summary.winding += d;
            angle = next;
        }
        if summary.winding.abs() >= PI {
            summary.return_distance = summary
                .return_distance
                .min(point_segment_distance(seed, a, b));
        }
        if summary.winding.abs() >= 5.0 * FRAC_PI_2 {
            break;
        }
    }
    summary
}

/// Mean grid spacing around node `(i, j)` in meters.
fn cell_size(slice: &VelocitySlice, i: usize, j: usize) -> f64 {
    let (dx, dy) = neighbour_offsets(slice, i, j);
    let (mx, my) = metric_at_lat(slice.lat().values()[j]);
    let avg = |a: (f64, f64)| 0.5 * (a.0.abs() + a.1.abs());
    0.5 * (avg(dx) * mx + avg(dy) * my)
}

/// Degree offsets to the (east, west) and (north, south) neighbours, with
/// mirrored spacing at the domain border.
fn neighbour_offsets(slice: &VelocitySlice, i: usize, j: usize) -> ((f64, f64), (f64, f64)) {
    fn pair(v: &[f64], i: usize) -> (f64, f64) {
        let n = v.len();
        let fwd = if i + 1 < n {
            v[i + 1] - v[i]
        } else {
            v[i] - v[i - 1]
        };
        let back = if i > 0 {
            v[i] - v[i - 1]
        } else {
            v[i + 1] - v[i]
        };
        (fwd, -back)
    }
    (pair(slice.lon().values(), i), pair(slice.lat().values(), j))
}

/// Distance to the adjacent node along `axis`, meters.
fn inner_probe(slice: &VelocitySlice, centre: &EddyCentre, axis: RadialAxis) -> f64 {
    let ((east, west), (north, south)) = neighbour_offsets(slice, centre.i, centre.j);
    let (mx, my) = metric_at_lat(centre.position.lat);
    match axis {
        RadialAxis::East => east * mx,
        RadialAxis::West => -west * mx,
        RadialAxis::North => north * my,
        RadialAxis::South => -south * my,
    }
}

/// Integrates the streamline seeded at distance `r` from the centre along
/// `axis` and summarizes its orbit.
fn probe(
    slice: &VelocitySlice,
    centre: &EddyCentre,
    axis: RadialAxis,
    r: f64,
    orbit: &OrbitParams,
) -> (FieldLine, OrbitSummary) {
    let frame = Frame::new(centre.position.lon, centre.position.lat);
    let (ux, uy) = axis.unit();
    let seed = frame.at(ux * r, uy * r, slice.depth());
    let cell = cell_size(slice, centre.i, centre.j);
    let circle = TAU * r;
    let step = (circle / orbit.steps_per_rev as f64).min(orbit.max_step.unwrap_or(cell));
    let params = IntegrationParams {
        step_length: step,
        max_steps: (orbit.max_revolutions * circle / step).ceil() as usize + 1,
        min_speed: 1e-9,
        include_vertical: false,
        direction: Direction::Forward,
        max_time: None,
    };
    let line = integrate(slice, seed, 0.0, &params);
    let summary = summarize(&line, &frame);
    (line, summary)
}

fn centre_at(slice: &VelocitySlice, i: usize, j: usize, persistence: f64) -> EddyCentre {
    let idx = slice.index(i, j);
    EddyCentre {
        position: Position::new(
            slice.lon().values()[i],
            slice.lat().values()[j],
            slice.depth(),
        ),
        i,
        j,
        level: slice.level(),
        persistence,
        speed_at_centre: slice.u()[idx].hypot(slice.v()[idx]),
    }
}

/// Speed minima of a slice that survive persistence simplification, in
/// linear-index order. Candidates are not yet winding-verified.
pub fn detect_centres(slice: &VelocitySlice, persistence_threshold: f64) -> Vec<EddyCentre> {
    let (nx, ny) = slice.dims();
    let speed =
        Slice2D::new(nx, ny, slice.speed(), slice.valid().to_vec()).expect("sized from slice");
    let Ok(minima) = persistence_of_minima(&speed) else {
        return Vec::new();
    };
    simplify_minima(&minima, persistence_threshold)
        .into_iter()
        .map(|m| centre_at(slice, m.i, m.j, m.persistence.unwrap_or(f64::INFINITY)))
        .collect()
}

/// True when the streamline seeded one cell east of the centre visits all
/// four quadrants around it.
pub fn winding_check(slice: &VelocitySlice, centre: &EddyCentre, orbit: &OrbitParams) -> bool {
    let r = inner_probe(slice, centre, RadialAxis::East);
    probe(slice, centre, RadialAxis::East, r, orbit)
        .1
        .visits_all_quadrants()
}

/// One closedness evaluation made during a boundary search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Probe {
    pub axis: RadialAxis,
    pub radius: f64,
    pub closed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundarySearch {
    pub radii: BoundaryRadii,
    pub probes: Vec<Probe>,
    /// Non-monotone predicate warnings.
    pub diagnostics: Vec<String>,
}

/// Largest nearly-closed seed distance along each radial axis, found by
/// bisection between the adjacent node and `r_max`.
pub fn eddy_boundary(
    slice: &VelocitySlice,
    centre: &EddyCentre,
    params: &EddyParams,
) -> Result<BoundarySearch, EddyError> {
    let mut out = BoundarySearch {
        radii: BoundaryRadii {
            east: 0.0,
            west: 0.0,
            north: 0.0,
            south: 0.0,
        },
        probes: Vec::new(),
        diagnostics: Vec::new(),
    };
    for axis in RadialAxis::ALL {
        let closed = |r: f64, probes: &mut Vec<Probe>| {
            let c = probe(slice, centre, axis, r, &params.orbit)
                .1
                .nearly_closed(r, params.closure_fraction);
            probes.push(Probe {
                axis,
                radius: r,
                closed: c,
            });
            c
        };
        let inner = inner_probe(slice, centre, axis);
        if !closed(inner, &mut out.probes) {
            return Err(EddyError::NoClosedStreamline {
                lon: centre.position.lon,
                lat: centre.position.lat,
            });
        }
        let r_max = params.r_max.max(inner);
        let radius = if closed(r_max, &mut out.probes) {
            r_max
        } else {
            let (mut lo, mut hi) = (inner, r_max);
            for _ in 0..params.bisection_iterations {
                let mid = 0.5 * (lo + hi);
                if closed(mid, &mut out.probes) {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let n = params.verification_probes;
            for k in 1..=n {
                let r = hi + (r_max - hi) * k as f64 / (n + 1) as f64;
                if closed(r, &mut out.probes) {
                    let msg = format!(
                        "non-monotone boundary predicate on {axis} axis of centre ({:.4}, {:.4}) level {}: \
                         closed streamline at {:.0} m beyond open probe at {:.0} m",
                        centre.position.lon, centre.position.lat, centre.level, r, hi
                    );
                    log::warn!("{msg}");
                    out.diagnostics.push(msg);
                    break;
                }
            }
            lo
        };
        out.radii.set(axis, radius);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum LineShape {
    Closed,
    Spiral,
    Open,
}

/// Streamline seeded on a boundary ring, for visualization.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProfileLine {
    pub axis: RadialAxis,
    pub ring_fraction: f64,
    pub seed_radius: f64,
    pub shape: LineShape,
    pub line: FieldLine,
}

/// A verified eddy on one depth level.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EddyLayer {
    pub centre: EddyCentre,
    pub vorticity: f64,
    pub rotation: Rotation,
    pub radii: BoundaryRadii,
    #[serde(skip)]
    pub lines: Vec<ProfileLine>,
    pub diagnostics: Vec<String>,
}

/// An eddy stacked across adjacent depth levels, shallowest first.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EddyProfile {
    pub layers: Vec<EddyLayer>,
}

impl EddyProfile {
    /// Shallowest centre.
    pub fn centre(&self) -> &EddyCentre {
        &self.layers[0].centre
    }

    pub fn boundary_radii(&self) -> &BoundaryRadii {
        &self.layers[0].radii
    }

    pub fn rotation(&self) -> Rotation {
        self.layers[0].rotation
    }

    /// First and last level index.
    pub fn level_range(&self) -> (usize, usize) {
        (
            self.layers[0].centre.level,
            self.layers[self.layers.len() - 1].centre.level,
        )
    }

    pub fn profile_lines(&self) -> impl Iterator<Item = &ProfileLine> {
        self.layers.iter().flat_map(|l| l.lines.iter())
    }
}

fn profile_lines(
    slice: &VelocitySlice,
    centre: &EddyCentre,
    radii: &BoundaryRadii,
    params: &EddyParams,
) -> Vec<ProfileLine> {
    let mut lines = Vec::new();
    for axis in RadialAxis::ALL {
        for &f in &params.ring_fractions {
            let r = f * radii.get(axis);
            if r <= 0.0 {
                continue;
            }
            let (line, s) = probe(slice, centre, axis, r, &params.orbit);
            let shape = if s.nearly_closed(r, params.closure_fraction) {
                LineShape::Closed
            } else if s.full_winding() {
                LineShape::Spiral
            } else {
                LineShape::Open
            };
            lines.push(ProfileLine {
                axis,
                ring_fraction: f,
                seed_radius: r,
                shape,
                line,
            });
        }
    }
    lines
}

/// Full per-slice pipeline: candidates, winding check, boundary search and
/// profile lines. Candidates without a closed streamline are dropped.
pub fn detect_slice(slice: &VelocitySlice, params: &EddyParams) -> Vec<EddyLayer> {
    detect_centres(slice, params.persistence_threshold)
        .into_iter()
        .filter(|c| winding_check(slice, c, &params.orbit))
        .filter_map(|c| {
            let search = eddy_boundary(slice, &c, params).ok()?;
            let orbit = probe(
                slice,
                &c,
                RadialAxis::East,
                inner_probe(slice, &c, RadialAxis::East),
                &params.orbit,
            )
            .1;
            let vorticity = slice_gradient(slice, c.i, c.j)
                .map(|g| g.vorticity())
                .filter(|w| w.is_finite() && *w != 0.0)
                .unwrap_or(orbit.winding.signum());
            Some(EddyLayer {
                centre: c,
                vorticity,
                rotation: Rotation::from_vorticity(vorticity, c.position.lat),
                lines: profile_lines(slice, &c, &search.radii, params),
                radii: search.radii,
                diagnostics: search.diagnostics,
            })
        })
        .collect()
}

/// Runs [`detect_slice`] on every depth level in parallel and stacks
/// detections of adjacent levels whose centres are closer than
/// `stacking_cells` grid cells.
pub fn detect_eddies_3d(vf: &VectorField, params: &EddyParams) -> Vec<EddyProfile> {
    let nz = vf.grid().depth().len();
    let per_level: Vec<Vec<EddyLayer>> = (0..nz)
        .into_par_iter()
        .map(|k| detect_slice(&vf.level(k), params))
        .collect();
    stack_layers(per_level, params.stacking_cells)
}

/// Greedy nearest-first association of detections on consecutive levels.
pub fn stack_layers(per_level: Vec<Vec<EddyLayer>>, stacking_cells: f64) -> Vec<EddyProfile> {
    let mut profiles: Vec<EddyProfile> = Vec::new();
    // Profiles whose last layer sits on the previous level.
    let mut open: Vec<usize> = Vec::new();
    for layers in per_level {
        let mut pairs = Vec::new();
        for (li, layer) in layers.iter().enumerate() {
            for &pi in &open {
                let last = &profiles[pi].layers[profiles[pi].layers.len() - 1].centre;
                let d = (layer.centre.i as f64 - last.i as f64)
                    .hypot(layer.centre.j as f64 - last.j as f64);
                if d < stacking_cells {
                    pairs.push((d, pi, li));
                }
            }
        }
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
        let mut taken_profile = vec![false; profiles.len()];
        let mut assigned: Vec<Option<usize>> = vec![None; layers.len()];
        for (_, pi, li) in pairs {
            if !taken_profile[pi] && assigned[li].is_none() {
                taken_profile[pi] = true;
                assigned[li] = Some(pi);
            }
        }
        let mut next_open = Vec::new();
        for (layer, target) in layers.into_iter().zip(assigned) {
            match target {
                Some(pi) => {
                    profiles[pi].layers.push(layer);
                    next_open.push(pi);
                }
                None => {
                    profiles.push(EddyProfile {
                        layers: vec![layer],
                    });
                    next_open.push(profiles.len() - 1);
                }
            }
        }
        next_open.sort_unstable();
        open = next_open;
    }
    profiles
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::grid::{Axis, RectilinearGrid3D, EARTH_RADIUS_M};

    const DEG: f64 = EARTH_RADIUS_M * PI / 180.0;

    fn axis(name: &str, n: usize, step: f64) -> Axis {
        let start = -step * (n - 1) as f64 / 2.0;
        Axis::uniform(name, start, step, n, "degrees").unwrap()
    }

    fn slice(n: usize, step: f64, f: impl Fn(f64, f64) -> [f64; 2]) -> VelocitySlice {
        VelocitySlice::from_fn(axis("lon", n, step), axis("lat", n, step), 0.0, |x, y| {
            f(x * DEG, y * DEG)
        })
    }

    fn params() -> EddyParams {
        EddyParams {
            persistence_threshold: 0.01,
            r_max: 40_000.0,
            ..Default::default()
        }
    }

    /// Rankine vortex of core radius `r0` and peak speed `v0` at (cx, cy).
    fn rankine(x: f64, y: f64, cx: f64, cy: f64, r0: f64, v0: f64) -> [f64; 2] {
        let (dx, dy) = (x - cx, y - cy);
        let r = dx.hypot(dy);
        if r == 0.0 {
            return [0.0, 0.0];
        }
        let vt = if r <= r0 { v0 * r / r0 } else { v0 * r0 / r };
        [-vt * dy / r, vt * dx / r]
    }

    #[test]
    fn solid_body_passes_winding_and_saturates() {
        let s = slice(41, 0.01, |x, y| [-1e-4 * y, 1e-4 * x]);
        let centres = detect_centres(&s, 0.01);
        assert_eq!(centres.len(), 1);
        let c = centres[0];
        assert_eq!((c.i, c.j), (20, 20));
        assert!(winding_check(&s, &c, &OrbitParams::default()));
        // The domain spans 22 km; r_max inside it is closed everywhere.
        let p = EddyParams {
            r_max: 8_000.0,
            ..params()
        };
        let b = eddy_boundary(&s, &c, &p).unwrap();
        for axis in RadialAxis::ALL {
            assert_eq!(b.radii.get(axis), 8_000.0);
        }
    }

    #[test]
    fn uniform_and_saddle_fail_winding() {
        let s = slice(21, 0.01, |_, _| [0.3, 0.0]);
        let centres = detect_centres(&s, 0.01);
        assert_eq!(centres.len(), 1);
        assert!(centres[0].persistence.is_infinite());
        assert!(!winding_check(&s, &centres[0], &OrbitParams::default()));
        assert!(detect_slice(&s, &params()).is_empty());

        let saddle = slice(21, 0.01, |x, y| [1e-4 * x, -1e-4 * y]);
        let c = centre_at(&saddle, 10, 10, f64::INFINITY);
        assert!(!winding_check(&saddle, &c, &OrbitParams::default()));
        // Seeds off the axes still sweep at most two quadrants.
        let frame = Frame::new(0.0, 0.0);
        let line = integrate(
            &saddle,
            Position::new(0.001, 0.0005, 0.0),
            0.0,
            &IntegrationParams {
                step_length: 50.0,
                max_steps: 400,
                ..Default::default()
            },
        );
        assert!(summarize(&line, &frame).quadrants.count_ones() <= 2);
    }

    #[test]
    fn no_closed_streamline_for_non_eddy() {
        let s = slice(21, 0.01, |_, _| [0.3, 0.0]);
        let c = centre_at(&s, 10, 10, f64::INFINITY);
        assert!(matches!(
            eddy_boundary(&s, &c, &params()),
            Err(EddyError::NoClosedStreamline { .. })
        ));
    }

    #[test]
    fn rankine_single_centre() {
        let r0 = 8_000.0;
        let s = slice(101, 0.005, |x, y| rankine(x, y, 1_000.0, -500.0, r0, 0.5));
        let centres: Vec<_> = detect_centres(&s, 0.05)
            .into_iter()
            .filter(|c| winding_check(&s, c, &OrbitParams::default()))
            .collect();
        assert_eq!(centres.len(), 1);
        let c = centres[0];
        let cell = 0.005 * DEG;
        assert!((c.position.lon * DEG - 1_000.0).abs() <= cell);
        assert!((c.position.lat * DEG + 500.0).abs() <= cell);
    }

    #[test]
    fn two_vortices_with_noise() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let noise: Vec<f64> = (0..2 * 121 * 121)
            .map(|_| rng.random_range(-0.01..0.01))
            .collect();
        let lon = axis("lon", 121, 0.005);
        let lat = axis("lat", 121, 0.005);
        let centres = [(-15_000.0, 0.0, 1.0), (15_000.0, 5_000.0, -1.0)];
        let mut u = Vec::new();
        let mut v = Vec::new();
        for &y in lat.values() {
            for &x in lon.values() {
                let (x, y) = (x * DEG, y * DEG);
                let &(cx, cy, sense) = centres
                    .iter()
                    .min_by(|a, b| {
                        (x - a.0)
                            .hypot(y - a.1)
                            .total_cmp(&(x - b.0).hypot(y - b.1))
                    })
                    .unwrap();
                let omega = sense * 5e-5;
                u.push(-omega * (y - cy));
                v.push(omega * (x - cx));
            }
        }
        for (n, (a, b)) in u.iter_mut().zip(v.iter_mut()).enumerate() {
            *a *= 1.0 + noise[2 * n];
            *b *= 1.0 + noise[2 * n + 1];
        }
        let n = u.len();
        let s = VelocitySlice::new(lon, lat, 0.0, u, v, vec![true; n]).unwrap();
        let found: Vec<_> = detect_centres(&s, 0.05);
        assert_eq!(found.len(), 2, "{found:?}");
        let layers = detect_slice(&s, &params());
        assert_eq!(layers.len(), 2);
        assert_eq!(layers[0].rotation, Rotation::Cyclonic);
        assert_eq!(layers[1].rotation, Rotation::Anticyclonic);
    }

    fn column_field(levels: usize, active: usize) -> VectorField {
        let step = 0.01;
        let grid = Arc::new(RectilinearGrid3D::ocean(
            axis("lon", 41, step),
            axis("lat", 41, step),
            Axis::new(
                "depth",
                (0..levels).map(|k| 5.0 + 10.0 * k as f64).collect(),
                "m",
            )
            .unwrap(),
        ));
        let active_depth = 5.0 + 10.0 * active as f64;
        VectorField::from_fn(grid, false, move |x, y, z| {
            if z < active_depth {
                let [u, v] = rankine(x * DEG, y * DEG, 0.0, 0.0, 10_000.0, 0.5);
                [u, v, 0.0]
            } else {
                [0.2, 0.0, 0.0]
            }
        })
    }

    #[test]
    fn columnar_and_shallow_vortices() {
        let p = EddyParams {
            r_max: 15_000.0,
            ..params()
        };
        let all = detect_eddies_3d(&column_field(4, 4), &p);
        assert_eq!(all.len(), 1);
        assert_eq!(all[0].level_range(), (0, 3));
        let top = detect_eddies_3d(&column_field(6, 3), &p);
        assert_eq!(top.len(), 1);
        assert_eq!(top[0].layers.len(), 3);
        for layer in &top[0].layers {
            for pl in &layer.lines {
                assert!(pl.seed_radius <= layer.radii.get(pl.axis) + 1e-9);
            }
        }
        let none = detect_eddies_3d(&column_field(3, 0), &p);
        assert!(none.is_empty());
    }

    #[test]
    fn stacking_respects_distance() {
        let s = slice(41, 0.01, |x, y| [-1e-4 * y, 1e-4 * x]);
        let make = |i: usize, level: usize| EddyLayer {
            centre: EddyCentre {
                level,
                ..centre_at(&s, i, 20, 1.0)
            },
            vorticity: 1.0,
            rotation: Rotation::Cyclonic,
            radii: BoundaryRadii {
                east: 1.0,
                west: 1.0,
                north: 1.0,
                south: 1.0,
            },
            lines: Vec::new(),
            diagnostics: Vec::new(),
        };
        let profiles = stack_layers(
            vec![
                vec![make(10, 0), make(30, 0)],
                vec![make(11, 1), make(32, 1)],
                vec![make(12, 2)],
            ],
            2.0,
        );
        assert_eq!(profiles.len(), 3);
        assert_eq!(profiles[0].layers.len(), 3);
        assert_eq!(profiles[1].layers.len(), 1);
        assert_eq!(profiles[2].centre().i, 32);
    }

    #[test]
    fn persistence_serializes_as_null_when_infinite() {
        let s = slice(11, 0.01, |_, _| [0.1, 0.0]);
        let c = centre_at(&s, 0, 0, f64::INFINITY);
        let json = serde_json::to_value(c).unwrap();
        assert!(json["persistence"].is_null());
    }
}
