use rayon::prelude::*;

use super::{Direction, FieldLine, IntegrationParams, Seed, Termination, TracerError};
use crate::grid::{metric_at_lat, GridError, Position, VectorField, VelocitySlice};
use crate::ingest::Dataset;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleError {
    OutOfDomain,
    Masked,
    OutOfTime,
}

impl SampleError {
    fn termination(self) -> Termination {
        match self {
            Self::OutOfDomain => Termination::OutOfDomain,
            Self::Masked => Termination::Masked,
            Self::OutOfTime => Termination::TimeExhausted,
        }
    }
}

impl From<GridError> for SampleError {
    fn from(e: GridError) -> Self {
        match e {
            GridError::OutOfDomain { .. } => Self::OutOfDomain,
            _ => Self::Masked,
        }
    }
}

/// A velocity field that can be sampled in space and time.
///
/// Velocities are `(u, v, w)` in m/s with `w` positive up; `t` is seconds.
pub trait FlowField: Sync {
    fn velocity(&self, p: &Position, t: f64) -> Result<[f64; 3], SampleError>;
}

impl FlowField for VectorField {
    fn velocity(&self, p: &Position, _t: f64) -> Result<[f64; 3], SampleError> {
        Ok(self.interpolate(p, true)?)
    }
}

impl FlowField for VelocitySlice {
    fn velocity(&self, p: &Position, _t: f64) -> Result<[f64; 3], SampleError> {
        let [u, v] = self.interpolate(p.lon, p.lat)?;
        Ok([u, v, 0.0])
    }
}

/// Sequence of velocity snapshots with linear interpolation in time.
#[derive(Debug, Clone)]
pub struct TimeSeriesFlow {
    fields: Vec<VectorField>,
    /// Snapshot times, seconds.
    times: Vec<f64>,
    /// Dataset timestep index of the first snapshot.
    first_step: usize,
}

impl TimeSeriesFlow {
    pub fn new(fields: Vec<VectorField>, times: Vec<f64>) -> Result<Self, TracerError> {
        if fields.is_empty() || fields.len() != times.len() {
            return Err(TracerError::InvalidParams(
                "need one snapshot time per velocity field".into(),
            ));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(TracerError::InvalidParams(
                "snapshot times must increase".into(),
            ));
        }
        if fields.iter().any(|f| f.grid() != fields[0].grid()) {
            return Err(GridError::GridMismatch.into());
        }
        Ok(Self {
            fields,
            times,
            first_step: 0,
        })
    }

    /// Loads the velocity snapshots for dataset timesteps `first..=last`.
    pub fn from_dataset(d: &Dataset, first: usize, last: usize) -> Result<Self, TracerError> {
        let fields = (first..=last)
            .into_par_iter()
            .map(|t| d.load_vector(t))
            .collect::<Result<Vec<_>, _>>()?;
        let times = (first..=last)
            .map(|t| d.time().elapsed_seconds(t))
            .collect();
        let mut flow = Self::new(fields, times)?;
        flow.first_step = first;
        Ok(flow)
    }

    pub fn fields(&self) -> &[VectorField] {
        &self.fields
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    /// Seconds corresponding to a fractional dataset timestep index, if it
    /// lies within the loaded snapshots.
    pub fn time_of_step(&self, step: f64) -> Option<f64> {
        let s = step - self.first_step as f64;
        let last = (self.times.len() - 1) as f64;
        if !(0.0..=last).contains(&s) {
            return None;
        }
        let i = (s.floor() as usize).min(self.times.len().saturating_sub(2));
        let frac = s - i as f64;
        if frac == 0.0 {
            return Some(self.times[i]);
        }
        Some(self.times[i] + frac * (self.times[i + 1] - self.times[i]))
    }
}

impl FlowField for TimeSeriesFlow {
    fn velocity(&self, p: &Position, t: f64) -> Result<[f64; 3], SampleError> {
        let n = self.times.len();
        if !(self.times[0] <= t && t <= self.times[n - 1]) {
            return Err(SampleError::OutOfTime);
        }
        let i = self.times.partition_point(|&x| x <= t).saturating_sub(1);
        let a = self.fields[i].interpolate(p, true)?;
        if self.times[i] == t {
            return Ok(a);
        }
        let b = self.fields[i + 1].interpolate(p, true)?;
        let alpha = (t - self.times[i]) / (self.times[i + 1] - self.times[i]);
        // a + alpha (b - a) reproduces `a` exactly for steady snapshots.
        Ok([0, 1, 2].map(|c| a[c] + alpha * (b[c] - a[c])))
    }
}

fn norm(v: &[f64; 3]) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

/// Rate of change of (lon, lat, depth) in degrees/s, degrees/s and m/s.
fn rate(p: &Position, vel: &[f64; 3]) -> Result<[f64; 3], SampleError> {
    let (mx, my) = metric_at_lat(p.lat);
    if mx < 1e-6 {
        return Err(SampleError::OutOfDomain);
    }
    Ok([vel[0] / mx, vel[1] / my, -vel[2]])
}

fn offset(p: &Position, k: &[f64; 3], h: f64) -> Position {
    Position::new(p.lon + h * k[0], p.lat + h * k[1], p.depth + h * k[2])
}

struct Leg {
    vertices: Vec<Position>,
    times: Vec<f64>,
    speeds: Vec<f64>,
    termination: Termination,
}

fn integrate_leg<F: FlowField + ?Sized>(
    flow: &F,
    start: Position,
    t0: f64,
    sign: f64,
    params: &IntegrationParams,
) -> Leg {
    let sample = |p: &Position, t: f64| -> Result<[f64; 3], SampleError> {
        let mut v = flow.velocity(p, t)?;
        if !params.include_vertical {
            v[2] = 0.0;
        }
        Ok(v)
    };
    let mut leg = Leg {
        vertices: vec![start],
        times: vec![t0],
        speeds: Vec::new(),
        termination: Termination::MaxSteps,
    };
    let mut vel = match sample(&start, t0) {
        Ok(v) => v,
        Err(e) => {
            leg.speeds.push(f64::NAN);
            leg.termination = e.termination();
            return leg;
        }
    };
    leg.speeds.push(norm(&vel));
    let (mut p, mut t) = (start, t0);
    for _ in 0..params.max_steps {
        let speed = norm(&vel);
        if speed < params.min_speed || speed == 0.0 {
            leg.termination = Termination::Stagnation;
            return leg;
        }
        let mut dt = params.step_length / speed;
        let mut clipped = false;
        if let Some(max_time) = params.max_time {
            let remaining = max_time - (t - t0).abs();
            if remaining <= 0.0 {
                leg.termination = Termination::TimeExhausted;
                return leg;
            }
            if dt >= remaining {
                dt = remaining;
                clipped = true;
            }
        }
        let h = sign * dt;
        let step = (|| -> Result<(Position, f64, [f64; 3]), SampleError> {
            let k1 = rate(&p, &vel)?;
            let p2 = offset(&p, &k1, h / 2.0);
            let k2 = rate(&p2, &sample(&p2, t + h / 2.0)?)?;
            let p3 = offset(&p, &k2, h / 2.0);
            let k3 = rate(&p3, &sample(&p3, t + h / 2.0)?)?;
            let p4 = offset(&p, &k3, h);
            let k4 = rate(&p4, &sample(&p4, t + h)?)?;
            let k = [0, 1, 2].map(|c| (k1[c] + 2.0 * k2[c] + 2.0 * k3[c] + k4[c]) / 6.0);
            let next = offset(&p, &k, h);
            let t_next = if clipped {
                t0 + sign * params.max_time.unwrap_or_default()
            } else {
                t + h
            };
            let v_next = sample(&next, t_next)?;
            Ok((next, t_next, v_next))
        })();
        match step {
            Ok((next, t_next, v_next)) => {
                leg.vertices.push(next);
                leg.times.push(t_next);
                leg.speeds.push(norm(&v_next));
                p = next;
                t = t_next;
                vel = v_next;
                if clipped {
                    leg.termination = Termination::TimeExhausted;
                    return leg;
                }
            }
            Err(e) => {
                leg.termination = e.termination();
                return leg;
            }
        }
    }
    leg.termination = Termination::MaxSteps;
    leg
}

/// Integrates a field line from `start` at time `t0` (seconds) with RK4.
///
/// Each step advances `step_length` meters of arc at the current speed; the
/// degree/meter conversion is evaluated at every stage position. Vertices
/// whose velocity cannot be sampled are not appended.
pub fn integrate<F: FlowField + ?Sized>(
    flow: &F,
    start: Position,
    t0: f64,
    params: &IntegrationParams,
) -> FieldLine {
    match params.direction {
        Direction::Forward => {
            let l = integrate_leg(flow, start, t0, 1.0, params);
            FieldLine::from_parts(l.vertices, l.times, l.speeds, l.termination)
        }
        Direction::Backward => {
            let l = integrate_leg(flow, start, t0, -1.0, params);
            FieldLine::from_parts(l.vertices, l.times, l.speeds, l.termination)
        }
        Direction::Both => {
            let mut back = integrate_leg(flow, start, t0, -1.0, params);
            let fwd = integrate_leg(flow, start, t0, 1.0, params);
            back.vertices.reverse();
            back.times.reverse();
            back.speeds.reverse();
            back.vertices.extend_from_slice(&fwd.vertices[1..]);
            back.times.extend_from_slice(&fwd.times[1..]);
            back.speeds.extend_from_slice(&fwd.speeds[1..]);
            FieldLine::from_parts(back.vertices, back.times, back.speeds, fwd.termination)
        }
    }
}

/// Streamline of a steady field; vertex times are integration seconds.
pub fn integrate_streamline<F: FlowField + ?Sized>(
    flow: &F,
    seed: &Seed,
    params: &IntegrationParams,
) -> FieldLine {
    integrate(flow, seed.position, 0.0, params)
}

/// Pathline through time-varying snapshots starting at the seed's birth
/// timestep; vertex times are seconds since the dataset's first timestep.
pub fn integrate_pathline(
    flow: &TimeSeriesFlow,
    seed: &Seed,
    params: &IntegrationParams,
) -> Result<FieldLine, TracerError> {
    let t0 = flow.time_of_step(seed.birth_time).ok_or_else(|| {
        TracerError::InvalidParams(format!(
            "birth time {} outside the loaded timesteps",
            seed.birth_time
        ))
    })?;
    Ok(integrate(flow, seed.position, t0, params))
}

/// Streamlines for many seeds, integrated in parallel; output order
/// follows `seeds`.
pub fn integrate_many<F: FlowField + ?Sized>(
    flow: &F,
    seeds: &[Seed],
    params: &IntegrationParams,
) -> Vec<FieldLine> {
    seeds
        .par_iter()
        .map(|s| integrate_streamline(flow, s, params))
        .collect()
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::grid::{Axis, RectilinearGrid3D, EARTH_RADIUS_M};

    const DEG: f64 = EARTH_RADIUS_M * std::f64::consts::PI / 180.0;

    fn grid(span: f64, n: usize, with_land: bool) -> Arc<RectilinearGrid3D> {
        let step = 2.0 * span / (n - 1) as f64;
        let lon = Axis::uniform("lon", -span, step, n, "degrees_east").unwrap();
        let lat = Axis::uniform("lat", -span, step, n, "degrees_north").unwrap();
        let depth = Axis::new("depth", vec![0.0, 10.0, 20.0], "m").unwrap();
        let mut g = RectilinearGrid3D::ocean(lon, lat, depth);
        if with_land {
            let mut mask = g.land_mask().to_vec();
            for k in 0..3 {
                mask[g.index(0, 0, k)] = true;
            }
            g = RectilinearGrid3D::new(g.lon().clone(), g.lat().clone(), g.depth().clone(), mask)
                .unwrap();
        }
        Arc::new(g)
    }

    fn params(step: f64, max_steps: usize) -> IntegrationParams {
        IntegrationParams {
            step_length: step,
            max_steps,
            ..Default::default()
        }
    }

    #[test]
    fn uniform_flow_steps() {
        let g = grid(1.0, 11, false);
        let vf = VectorField::from_fn(g, false, |_, _, _| [1.0, 0.0, 0.0]);
        let seed = Seed::new(Position::new(0.0, 0.0, 5.0));
        let line = integrate_streamline(&vf, &seed, &params(100.0, 10));
        assert_eq!(line.len(), 11);
        assert_eq!(line.termination(), Termination::MaxSteps);
        for (n, p) in line.vertices().iter().enumerate() {
            assert!((p.lon * DEG - 100.0 * n as f64).abs() < 1e-6);
            assert_eq!(p.lat, 0.0);
            assert_eq!(p.depth, 5.0);
        }
        assert!((line.times()[10] - 1000.0).abs() < 1e-9);
    }

    #[test]
    fn masked_seed_gives_single_vertex() {
        let g = grid(1.0, 11, true);
        let vf = VectorField::from_fn(g.clone(), false, |_, _, _| [1.0, 0.0, 0.0]);
        let seed = Seed::new(Position::new(-0.95, -0.95, 5.0));
        let line = integrate_streamline(&vf, &seed, &params(100.0, 10));
        assert_eq!(line.len(), 1);
        assert_eq!(line.termination(), Termination::Masked);
    }

    #[test]
    fn leaves_domain_and_stagnates() {
        let g = grid(0.01, 11, false);
        let vf = VectorField::from_fn(g.clone(), false, |_, _, _| [1.0, 0.0, 0.0]);
        let line = integrate_streamline(
            &vf,
            &Seed::new(Position::new(0.0, 0.0, 5.0)),
            &params(200.0, 100),
        );
        assert_eq!(line.termination(), Termination::OutOfDomain);
        assert!(line.vertices().iter().all(|p| g.contains(p)));
        let still = VectorField::from_fn(g, false, |_, _, _| [0.0, 0.0, 0.0]);
        let line = integrate_streamline(
            &still,
            &Seed::new(Position::new(0.0, 0.0, 5.0)),
            &params(200.0, 100),
        );
        assert_eq!(line.termination(), Termination::Stagnation);
        assert_eq!(line.len(), 1);
    }

    #[test]
    fn vertical_component_flag() {
        let g = grid(0.05, 11, false);
        let vf = VectorField::from_fn(g, true, |_, _, _| [1.0, 0.0, 0.01]);
        let seed = Seed::new(Position::new(0.0, 0.0, 15.0));
        let flat = integrate_streamline(&vf, &seed, &params(100.0, 20));
        assert!(flat
            .vertices()
            .iter()
            .all(|p| (p.depth - 15.0).abs() < 1e-9));
        let mut p3 = params(100.0, 20);
        p3.include_vertical = true;
        let rising = integrate_streamline(&vf, &seed, &p3);
        assert!(rising.last().depth < 15.0);
    }

    #[test]
    fn solid_body_revolution_closes() {
        // Small equatorial circle so the sphere is locally flat.
        let g = grid(0.05, 101, false);
        let omega = 1e-3;
        let vf = VectorField::from_fn(g, false, |x, y, _| [-omega * y * DEG, omega * x * DEG, 0.0]);
        let radius = 0.02 * DEG;
        let seed = Seed::new(Position::new(0.02, 0.0, 5.0));
        let mut p = params(radius / 100.0, 10_000);
        p.max_time = Some(2.0 * std::f64::consts::PI / omega);
        let line = integrate_streamline(&vf, &seed, &p);
        assert_eq!(line.termination(), Termination::TimeExhausted);
        let end = line.last();
        let err = ((end.lon - 0.02).hypot(end.lat) * DEG) / radius;
        assert!(err < 1e-3, "relative closure error {err}");
    }

    #[test]
    fn both_directions_concatenate() {
        let g = grid(0.05, 11, false);
        let vf = VectorField::from_fn(g, false, |_, _, _| [1.0, 0.0, 0.0]);
        let mut p = params(100.0, 5);
        p.direction = Direction::Both;
        let line = integrate_streamline(&vf, &Seed::new(Position::new(0.0, 0.0, 5.0)), &p);
        assert_eq!(line.len(), 11);
        assert!(line.vertices().windows(2).all(|w| w[1].lon > w[0].lon));
        assert!(line.times()[0] < 0.0 && line.times()[5] == 0.0);
    }

    #[test]
    fn time_blend_and_pathlines() {
        let g = grid(0.05, 11, false);
        let a = VectorField::from_fn(g.clone(), false, |_, _, _| [1.0, 0.0, 0.0]);
        let b = VectorField::from_fn(g.clone(), false, |_, _, _| [0.0, 1.0, 0.0]);
        let flow = TimeSeriesFlow::new(vec![a.clone(), b], vec![0.0, 1.0]).unwrap();
        let mid = flow.velocity(&Position::new(0.0, 0.0, 5.0), 0.5).unwrap();
        assert_eq!(mid, [0.5, 0.5, 0.0]);
        assert_eq!(
            flow.velocity(&Position::new(0.0, 0.0, 5.0), 1.5),
            Err(SampleError::OutOfTime)
        );

        // Steady snapshots reproduce the streamline.
        let steady = TimeSeriesFlow::new(
            vec![a.clone(), a.clone(), a.clone()],
            vec![0.0, 3000.0, 6000.0],
        )
        .unwrap();
        let seed = Seed::new(Position::new(-0.04, 0.01, 5.0));
        let p = params(100.0, 50);
        let path = integrate_pathline(&steady, &seed, &p).unwrap();
        let stream = integrate_streamline(&a, &seed, &p);
        assert_eq!(path.len(), stream.len());
        for (x, y) in path.vertices().iter().zip(stream.vertices()) {
            assert!((x.lon - y.lon).abs() < 1e-10 && (x.lat - y.lat).abs() < 1e-10);
        }
        // Running past the last snapshot ends the pathline.
        let long = integrate_pathline(&steady, &seed, &params(1000.0, 1000)).unwrap();
        assert!(matches!(
            long.termination(),
            Termination::TimeExhausted | Termination::OutOfDomain
        ));
        assert_eq!(steady.time_of_step(1.5), Some(4500.0));
        assert_eq!(steady.time_of_step(2.5), None);
    }

    #[test]
    fn rotating_direction_is_monotone() {
        // u, v blend from east to north over 1000 s; heading angle must
        // increase monotonically.
        let g = grid(0.05, 11, false);
        let a = VectorField::from_fn(g.clone(), false, |_, _, _| [1.0, 0.0, 0.0]);
        let b = VectorField::from_fn(g, false, |_, _, _| [0.0, 1.0, 0.0]);
        let flow = TimeSeriesFlow::new(vec![a, b], vec![0.0, 1000.0]).unwrap();
        let line = integrate_pathline(
            &flow,
            &Seed::new(Position::new(-0.03, -0.03, 5.0)),
            &params(20.0, 1000),
        )
        .unwrap();
        assert_eq!(line.termination(), Termination::TimeExhausted);
        let headings: Vec<f64> = line
            .vertices()
            .windows(2)
            .map(|w| (w[1].lat - w[0].lat).atan2(w[1].lon - w[0].lon))
            .collect();
        assert!(headings.windows(2).all(|h| h[1] >= h[0] - 1e-12));
        assert!(headings[0] < 0.1 && *headings.last().unwrap() > 1.4);
    }

    #[test]
    fn parallel_matches_serial() {
        let g = grid(0.05, 21, false);
        let vf = VectorField::from_fn(g, false, |x, y, _| [-y * DEG * 1e-3, x * DEG * 1e-3, 0.0]);
        let seeds: Vec<Seed> = (1..8)
            .map(|i| Seed::new(Position::new(0.005 * i as f64, 0.0, 5.0)))
            .collect();
        let p = params(50.0, 200);
        let many = integrate_many(&vf, &seeds, &p);
        for (s, line) in seeds.iter().zip(&many) {
            assert_eq!(*line, integrate_streamline(&vf, s, &p));
        }
    }
}
