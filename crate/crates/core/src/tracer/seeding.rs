use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Seed, TracerError};
use crate::grid::{Position, RectilinearGrid3D, ScalarField};

/// Maximum number of uniform candidates drawn by [`seed_in_isovolume`].
pub const ISOVOLUME_CANDIDATE_CAP: usize = 1_000_000;

/// How signed weights become sampling densities.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WeightTransform {
    PositivePart,
    /// Useful with Okubo-Weiss, whose negative values mark eddy cores.
    NegativePart,
    #[default]
    Absolute,
}

impl WeightTransform {
    pub fn apply(self, w: f64) -> f64 {
        match self {
            Self::PositivePart => w.max(0.0),
            Self::NegativePart => (-w).max(0.0),
            Self::Absolute => w.abs(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::PositivePart => "positive-part",
            Self::NegativePart => "negative-part",
            Self::Absolute => "absolute",
        }
    }
}

impl fmt::Display for WeightTransform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for WeightTransform {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "positive-part" | "positive" => Ok(Self::PositivePart),
            "negative-part" | "negative" => Ok(Self::NegativePart),
            "absolute" | "abs" => Ok(Self::Absolute),
            other => Err(format!(
                "unknown weight transform `{other}` (expected positive-part, negative-part or absolute)"
            )),
        }
    }
}

/// Axis-aligned box in (lon, lat, depth) sampled uniformly by volume.
#[derive(Debug, Clone, Copy)]
struct Box3 {
    lon: (f64, f64),
    lat: (f64, f64),
    depth: (f64, f64),
}

impl Box3 {
    /// Spherical shell-sector volume up to the constant R²: Δλ (sin φ₂ − sin φ₁) Δz.
    fn volume(&self) -> f64 {
        let dl = (self.lon.1 - self.lon.0).to_radians();
        let ds = self.lat.1.to_radians().sin() - self.lat.0.to_radians().sin();
        dl * ds * (self.depth.1 - self.depth.0)
    }

    /// Uniform point by area on the sphere (equal-area in sin φ).
    fn sample(&self, rng: &mut ChaCha8Rng) -> Position {
        let (a, b, c): (f64, f64, f64) = (rng.random(), rng.random(), rng.random());
        let lon = self.lon.0 + a * (self.lon.1 - self.lon.0);
        let (s0, s1) = (self.lat.0.to_radians().sin(), self.lat.1.to_radians().sin());
        let lat = (s0 + b * (s1 - s0)).clamp(-1.0, 1.0).asin().to_degrees();
        let lat = lat.clamp(self.lat.0, self.lat.1);
        let depth = self.depth.0 + c * (self.depth.1 - self.depth.0);
        Position::new(lon, lat, depth)
    }
}

/// Draws boxes with probability proportional to their mass.
struct BoxSampler {
    boxes: Vec<Box3>,
    cdf: Vec<f64>,
}

impl BoxSampler {
    fn new(items: impl Iterator<Item = (Box3, f64)>) -> Option<Self> {
        let mut boxes = Vec::new();
        let mut cdf = Vec::new();
        let mut total = 0.0;
        for (b, mass) in items {
            if mass > 0.0 && mass.is_finite() {
                total += mass;
                boxes.push(b);
                cdf.push(total);
            }
        }
        (total > 0.0).then_some(Self { boxes, cdf })
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> Position {
        let total = *self.cdf.last().expect("non-empty");
        let r: f64 = rng.random::<f64>() * total;
        let i = self
            .cdf
            .partition_point(|&c| c <= r)
            .min(self.boxes.len() - 1);
        self.boxes[i].sample(rng)
    }

    /// Uniform sampler over cells whose eight corners are all ocean.
    fn ocean_cells(grid: &RectilinearGrid3D) -> Option<Self> {
        let (nx, ny, nz) = grid.dims();
        let (x, y, z) = (
            grid.lon().values(),
            grid.lat().values(),
            grid.depth().values(),
        );
        let land = grid.land_mask();
        let cells = (0..nz - 1).flat_map(move |k| {
            (0..ny - 1).flat_map(move |j| {
                (0..nx - 1).filter_map(move |i| {
                    let open = (0..8).all(|c| {
                        let (di, dj, dk) = (c & 1, (c >> 1) & 1, (c >> 2) & 1);
                        !land[((k + dk) * ny + j + dj) * nx + i + di]
                    });
                    open.then(|| {
                        let b = Box3 {
                            lon: (x[i], x[i + 1]),
                            lat: (y[j], y[j + 1]),
                            depth: (z[k], z[k + 1]),
                        };
                        (b, b.volume())
                    })
                })
            })
        });
        Self::new(cells)
    }
}

fn rng_for(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `n` seeds uniformly distributed by volume over the cells whose eight
/// corners are ocean. Deterministic for a given `rng_seed`.
pub fn seed_uniform(
    grid: &RectilinearGrid3D,
    n: usize,
    rng_seed: u64,
) -> Result<Vec<Seed>, TracerError> {
    let sampler = BoxSampler::ocean_cells(grid).ok_or(TracerError::NoValidCell)?;
    let mut rng = rng_for(rng_seed);
    Ok((0..n)
        .map(|_| Seed::new(sampler.sample(&mut rng)))
        .collect())
}

/// Midpoints bounding the dual cell of node `i` on an axis.
fn dual_extent(v: &[f64], i: usize) -> (f64, f64) {
    let lo = if i == 0 {
        v[0]
    } else {
        0.5 * (v[i - 1] + v[i])
    };
    let hi = if i + 1 == v.len() {
        v[i]
    } else {
        0.5 * (v[i] + v[i + 1])
    };
    (lo, hi)
}

/// `n` seeds distributed with density proportional to the transformed
/// weight. Each valid node owns its dual cell (the box between midpoints to
/// its neighbours); a node is chosen with probability proportional to
/// weight × dual-cell volume and the seed is placed uniformly inside it.
pub fn seed_weighted(
    weight: &ScalarField,
    transform: WeightTransform,
    n: usize,
    rng_seed: u64,
) -> Result<Vec<Seed>, TracerError> {
    let grid = weight.grid();
    let (x, y, z) = (
        grid.lon().values(),
        grid.lat().values(),
        grid.depth().values(),
    );
    let items = weight
        .values()
        .iter()
        .zip(weight.valid())
        .enumerate()
        .filter(|(_, (_, &ok))| ok)
        .map(|(idx, (&w, _))| {
            let (i, j, k) = grid.unravel(idx);
            let b = Box3 {
                lon: dual_extent(x, i),
                lat: dual_extent(y, j),
                depth: dual_extent(z, k),
            };
            (b, transform.apply(w) * b.volume())
        });
    let sampler = BoxSampler::new(items).ok_or(TracerError::AllZeroWeights)?;
    let mut rng = rng_for(rng_seed);
    Ok((0..n)
        .map(|_| Seed::new(sampler.sample(&mut rng)))
        .collect())
}

/// Rejection sampling: uniform candidates (the same stream as
/// [`seed_uniform`]) are kept when every field interpolates into its closed
/// range. Fails after [`ISOVOLUME_CANDIDATE_CAP`] candidates without
/// collecting `n` seeds.
pub fn seed_in_isovolume(
    constraints: &[(&ScalarField, (f64, f64))],
    n: usize,
    rng_seed: u64,
) -> Result<Vec<Seed>, TracerError> {
    let Some((first, _)) = constraints.first() else {
        return Err(TracerError::InvalidParams(
            "at least one range constraint is required".into(),
        ));
    };
    let grid = first.grid();
    if constraints.iter().any(|(f, _)| f.grid() != grid) {
        return Err(crate::grid::GridError::GridMismatch.into());
    }
    let sampler = BoxSampler::ocean_cells(grid).ok_or(TracerError::NoValidCell)?;
    let mut rng = rng_for(rng_seed);
    let mut seeds = Vec::with_capacity(n);
    let mut drawn = 0;
    while seeds.len() < n {
        if drawn == ISOVOLUME_CANDIDATE_CAP {
            return Err(TracerError::EmptySelection);
        }
        drawn += 1;
        let p = sampler.sample(&mut rng);
        let inside = constraints
            .iter()
            .all(|(f, (lo, hi))| f.interpolate(&p).is_ok_and(|v| *lo <= v && v <= *hi));
        if inside {
            seeds.push(Seed::new(p));
        }
    }
    Ok(seeds)
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::grid::Axis;

    fn unit_grid(n: usize) -> Arc<RectilinearGrid3D> {
        let s = 1.0 / (n - 1) as f64;
        Arc::new(RectilinearGrid3D::ocean(
            Axis::uniform("lon", 0.0, s, n, "").unwrap(),
            Axis::uniform("lat", 0.0, s, n, "").unwrap(),
            Axis::uniform("depth", 0.0, s, n, "").unwrap(),
        ))
    }

    #[test]
    fn uniform_is_deterministic_and_inside() {
        let g = unit_grid(5);
        let a = seed_uniform(&g, 500, 7).unwrap();
        assert_eq!(a, seed_uniform(&g, 500, 7).unwrap());
        assert_ne!(a, seed_uniform(&g, 500, 8).unwrap());
        assert!(a.iter().all(|s| g.contains(&s.position)));
    }

    #[test]
    fn uniform_skips_land_cells() {
        let lon = Axis::uniform("lon", 0.0, 1.0, 3, "").unwrap();
        let lat = Axis::uniform("lat", 0.0, 1.0, 2, "").unwrap();
        let depth = Axis::uniform("depth", 0.0, 1.0, 2, "").unwrap();
        let mut mask = vec![false; 12];
        // land at i = 2 (both rows and levels): only the first cell is open
        for idx in [2, 5, 8, 11] {
            mask[idx] = true;
        }
        let g = RectilinearGrid3D::new(lon, lat, depth, mask).unwrap();
        let seeds = seed_uniform(&g, 200, 1).unwrap();
        assert!(seeds.iter().all(|s| s.position.lon <= 1.0));
        let all_land = RectilinearGrid3D::new(
            g.lon().clone(),
            g.lat().clone(),
            g.depth().clone(),
            vec![true; 12],
        )
        .unwrap();
        assert!(matches!(
            seed_uniform(&all_land, 1, 0),
            Err(TracerError::NoValidCell)
        ));
    }

    #[test]
    fn single_positive_node() {
        let g = unit_grid(5);
        let target = g.index(2, 3, 1);
        let w = ScalarField::from_values(
            g.clone(),
            "w",
            "",
            (0..g.node_count())
                .map(|i| if i == target { 2.0 } else { -1.0 })
                .collect(),
        )
        .unwrap();
        let seeds = seed_weighted(&w, WeightTransform::PositivePart, 1000, 3).unwrap();
        let c = g.node_position(2, 3, 1);
        assert!(seeds.iter().all(|s| {
            (s.position.lon - c.lon).abs() <= 0.125
                && (s.position.lat - c.lat).abs() <= 0.125
                && (s.position.depth - c.depth).abs() <= 0.125
        }));
        let zero =
            ScalarField::from_values(g.clone(), "w", "", vec![-1.0; g.node_count()]).unwrap();
        assert!(matches!(
            seed_weighted(&zero, WeightTransform::PositivePart, 10, 0),
            Err(TracerError::AllZeroWeights)
        ));
        assert!(seed_weighted(&zero, WeightTransform::NegativePart, 10, 0).is_ok());
    }

    #[test]
    fn isovolume_constraints() {
        let g = unit_grid(5);
        let f = ScalarField::from_fn(g.clone(), "x", "", |x, _, _| x);
        let half = seed_in_isovolume(&[(&f, (0.5, 1.0))], 300, 4).unwrap();
        assert!(half.iter().all(|s| s.position.lon >= 0.5));
        let full = seed_in_isovolume(&[(&f, (0.0, 1.0))], 300, 4).unwrap();
        assert_eq!(full, seed_uniform(&g, 300, 4).unwrap());
        assert!(matches!(
            seed_in_isovolume(&[(&f, (2.0, 3.0))], 1, 4),
            Err(TracerError::EmptySelection)
        ));
    }

    #[test]
    fn transform_parse() {
        assert_eq!(
            "negative_part".parse::<WeightTransform>().unwrap(),
            WeightTransform::NegativePart
        );
        assert_eq!(WeightTransform::default().apply(-2.0), 2.0);
        assert!("sqrt".parse::<WeightTransform>().is_err());
    }
}
