//! Isovolumes, their boundary components ("surface fronts") and a temporal
//! track graph linking fronts by node overlap.

use std::collections::{HashMap, HashSet};
use std::sync::Arc;

use rayon::prelude::*;
use serde::ser::SerializeStruct;
use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::grid::{Position, RectilinearGrid3D, ScalarField};
use crate::ingest::{Dataset, IngestError, VariableRole};
use crate::topology::DisjointSet;

#[derive(Debug, Error)]
pub enum FrontError {
    #[error("invalid value range [{lo}, {hi}]")]
    InvalidRange { lo: f64, hi: f64 },
    #[error("invalid Jaccard threshold {0} (expected a value in [0, 1])")]
    InvalidJaccard(f64),
    #[error(transparent)]
    Ingest(#[from] IngestError),
}

/// Nodes whose value lies in a closed range.
#[derive(Debug, Clone)]
pub struct IsoVolume {
    grid: Arc<RectilinearGrid3D>,
    member: Vec<bool>,
    range: (f64, f64),
}

impl IsoVolume {
    pub fn from_mask(grid: Arc<RectilinearGrid3D>, member: Vec<bool>) -> Self {
        assert_eq!(member.len(), grid.node_count(), "member mask length");
        Self {
            grid,
            member,
            range: (f64::NEG_INFINITY, f64::INFINITY),
        }
    }

    pub fn grid(&self) -> &Arc<RectilinearGrid3D> {
        &self.grid
    }

    pub fn member(&self) -> &[bool] {
        &self.member
    }

    pub fn range(&self) -> (f64, f64) {
        self.range
    }

    pub fn count(&self) -> usize {
        self.member.iter().filter(|&&m| m).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.member.iter().any(|&m| m)
    }
}

/// Members are valid nodes with `lo <= value <= hi`.
pub fn extract_isovolume(f: &ScalarField, lo: f64, hi: f64) -> Result<IsoVolume, FrontError> {
    if lo.is_nan() || hi.is_nan() || lo > hi {
        return Err(FrontError::InvalidRange { lo, hi });
    }
    let member = f
        .values()
        .iter()
        .zip(f.valid())
        .map(|(&v, &ok)| ok && v >= lo && v <= hi)
        .collect();
    Ok(IsoVolume {
        grid: f.grid().clone(),
        member,
        range: (lo, hi),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct FrontId {
    pub t: usize,
    pub index: usize,
}

/// One 26-connected component of an isovolume boundary.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SurfaceFront {
    pub id: FrontId,
    /// Sorted linear node indices.
    #[serde(skip)]
    pub nodes: Vec<usize>,
    pub centroid: Position,
    pub size: usize,
}

/// Member nodes with at least one non-member face neighbour; nodes on the
/// domain border always qualify.
pub fn boundary_mask(v: &IsoVolume) -> Vec<bool> {
    let (nx, ny, nz) = v.grid.dims();
    let m = &v.member;
    let mut out = vec![false; m.len()];
    for k in 0..nz {
        for j in 0..ny {
            for i in 0..nx {
                let idx = (k * ny + j) * nx + i;
                if !m[idx] {
                    continue;
                }
                out[idx] = i == 0
                    || j == 0
                    || k == 0
                    || i + 1 == nx
                    || j + 1 == ny
                    || k + 1 == nz
                    || !m[idx - 1]
                    || !m[idx + 1]
                    || !m[idx - nx]
                    || !m[idx + nx]
                    || !m[idx - nx * ny]
                    || !m[idx + nx * ny];
            }
        }
    }
    out
}

/// The 13 offsets that precede a node in linear order among its 26
/// neighbours; visiting only these still sees every adjacent pair once.
const BACKWARD_26: [(isize, isize, isize); 13] = [
    (-1, 0, 0),
    (-1, -1, 0),
    (0, -1, 0),
    (1, -1, 0),
    (-1, -1, -1),
    (0, -1, -1),
    (1, -1, -1),
    (-1, 0, -1),
    (0, 0, -1),
    (1, 0, -1),
    (-1, 1, -1),
    (0, 1, -1),
    (1, 1, -1),
];

/// Boundary components of `v`, indexed in order of their smallest node.
pub fn surface_fronts(v: &IsoVolume, t: usize) -> Vec<SurfaceFront> {
    let (nx, ny, nz) = v.grid.dims();
    let boundary = boundary_mask(v);
    let mut sets = DisjointSet::new(boundary.len());
    for k in 0..nz {
        for j in 0..ny {
            for i in 0..nx {
                let idx = (k * ny + j) * nx + i;
                if !boundary[idx] {
                    continue;
                }
                for (di, dj, dk) in BACKWARD_26 {
                    let (Some(a), Some(b), Some(c)) = (
                        i.checked_add_signed(di).filter(|&a| a < nx),
                        j.checked_add_signed(dj).filter(|&b| b < ny),
                        k.checked_add_signed(dk),
                    ) else {
                        continue;
                    };
                    let other = (c * ny + b) * nx + a;
                    if boundary[other] {
                        sets.union(idx, other);
                    }
                }
            }
        }
    }

    let mut slot: HashMap<usize, usize> = HashMap::new();
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for idx in (0..boundary.len()).filter(|&i| boundary[i]) {
        let root = sets.find(idx);
        let s = *slot.entry(root).or_insert_with(|| {
            groups.push(Vec::new());
            groups.len() - 1
        });
        groups[s].push(idx);
    }

    groups
        .into_iter()
        .enumerate()
        .map(|(index, nodes)| {
            let mut sum = [0.0; 3];
            for &n in &nodes {
                let (i, j, k) = v.grid.unravel(n);
                let p = v.grid.node_position(i, j, k);
                sum[0] += p.lon;
                sum[1] += p.lat;
                sum[2] += p.depth;
            }
            let size = nodes.len();
            let c = size as f64;
            SurfaceFront {
                id: FrontId { t, index },
                nodes,
                centroid: Position::new(sum[0] / c, sum[1] / c, sum[2] / c),
                size,
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct TrackEdge {
    pub from: FrontId,
    pub to: FrontId,
    /// Number of shared node indices.
    pub weight: usize,
}

/// Edges between every pair of fronts that share nodes. With
/// `min_jaccard`, pairs whose overlap over union falls below the threshold
/// are dropped. Edges are ordered by source then target index.
pub fn link_fronts(
    a: &[SurfaceFront],
    b: &[SurfaceFront],
    min_jaccard: Option<f64>,
) -> Vec<TrackEdge> {
    let owner: HashMap<usize, usize> = b
        .iter()
        .enumerate()
        .flat_map(|(fi, f)| f.nodes.iter().map(move |&n| (n, fi)))
        .collect();
    let mut edges = Vec::new();
    for fa in a {
        let mut counts: HashMap<usize, usize> = HashMap::new();
        for n in &fa.nodes {
            if let Some(&fb) = owner.get(n) {
                *counts.entry(fb).or_default() += 1;
            }
        }
        let mut targets: Vec<_> = counts.into_iter().collect();
        targets.sort_unstable();
        for (fb, weight) in targets {
            let to = &b[fb];
            if let Some(th) = min_jaccard {
                let union = fa.size + to.size - weight;
                if (weight as f64) < th * union as f64 {
                    continue;
                }
            }
            edges.push(TrackEdge {
                from: fa.id,
                to: to.id,
                weight,
            });
        }
    }
    edges
}

/// Fronts per timestep plus overlap edges between consecutive steps.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackGraph {
    steps: Vec<(usize, Vec<SurfaceFront>)>,
    edges: Vec<TrackEdge>,
}

impl TrackGraph {
    /// `steps` must be ordered by increasing timestep; edges are computed
    /// between neighbouring entries.
    pub fn from_fronts(steps: Vec<(usize, Vec<SurfaceFront>)>, min_jaccard: Option<f64>) -> Self {
        debug_assert!(steps.windows(2).all(|w| w[0].0 < w[1].0));
        let edges = steps
            .par_windows(2)
            .map(|w| link_fronts(&w[0].1, &w[1].1, min_jaccard))
            .collect::<Vec<_>>()
            .concat();
        Self { steps, edges }
    }

    pub fn timesteps(&self) -> impl Iterator<Item = usize> + '_ {
        self.steps.iter().map(|(t, _)| *t)
    }

    pub fn fronts_at(&self, t: usize) -> &[SurfaceFront] {
        self.step_slot(t).map_or(&[], |s| &self.steps[s].1)
    }

    pub fn fronts(&self) -> impl Iterator<Item = &SurfaceFront> {
        self.steps.iter().flat_map(|(_, f)| f)
    }

    pub fn front(&self, id: FrontId) -> Option<&SurfaceFront> {
        self.fronts_at(id.t).get(id.index)
    }

    pub fn node_count(&self) -> usize {
        self.steps.iter().map(|(_, f)| f.len()).sum()
    }

    pub fn edges(&self) -> &[TrackEdge] {
        &self.edges
    }

    pub fn outgoing(&self, id: FrontId) -> impl Iterator<Item = &TrackEdge> {
        let start = self.edges.partition_point(|e| e.from < id);
        self.edges[start..].iter().take_while(move |e| e.from == id)
    }

    fn step_slot(&self, t: usize) -> Option<usize> {
        self.steps.binary_search_by_key(&t, |(s, _)| *s).ok()
    }
}

impl Serialize for TrackGraph {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut st = s.serialize_struct("TrackGraph", 3)?;
        st.serialize_field("timesteps", &self.timesteps().collect::<Vec<_>>())?;
        st.serialize_field("nodes", &self.fronts().collect::<Vec<_>>())?;
        st.serialize_field("edges", &self.edges)?;
        st.end()
    }
}

/// Fronts of `role` in `[lo, hi]` over the closed timestep range
/// `time_range` (whole series when `None`).
pub fn build_track_graph(
    d: &Dataset,
    role: VariableRole,
    range: (f64, f64),
    time_range: Option<(usize, usize)>,
    min_jaccard: Option<f64>,
) -> Result<TrackGraph, FrontError> {
    if range.0.is_nan() || range.1.is_nan() || range.0 > range.1 {
        return Err(FrontError::InvalidRange {
            lo: range.0,
            hi: range.1,
        });
    }
    if let Some(j) = min_jaccard {
        if !(0.0..=1.0).contains(&j) {
            return Err(FrontError::InvalidJaccard(j));
        }
    }
    let nt = d.time().len();
    let (t0, t1) = time_range.unwrap_or((0, nt.saturating_sub(1)));
    if t0 > t1 || t1 >= nt {
        return Err(IngestError::TimestepOutOfRange {
            t: t1.max(t0),
            len: nt,
        }
        .into());
    }
    let steps = (t0..=t1)
        .into_par_iter()
        .map(|t| -> Result<_, FrontError> {
            let field = d.load_scalar(role, t)?;
            let volume = extract_isovolume(&field, range.0, range.1)?;
            Ok((t, surface_fronts(&volume, t)))
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(TrackGraph::from_fronts(steps, min_jaccard))
}

/// A path through the track graph, one front per consecutive timestep.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Track {
    pub fronts: Vec<FrontId>,
}

impl Track {
    /// Number of timesteps spanned.
    pub fn length(&self) -> usize {
        self.fronts.len()
    }
}

/// Greedy node-disjoint path cover. Each unvisited front, in (timestep,
/// index) order, starts a path that repeatedly follows the heaviest edge to
/// an unvisited front; ties prefer the larger target, then the lower index.
/// Paths shorter than `min_length` are dropped and the rest are returned
/// longest first (stable in start order).
pub fn extract_tracks(g: &TrackGraph, min_length: usize) -> Vec<Track> {
    let mut visited: HashSet<FrontId> = HashSet::with_capacity(g.node_count());
    let mut tracks = Vec::new();
    for start in g.fronts().map(|f| f.id) {
        if !visited.insert(start) {
            continue;
        }
        let mut path = vec![start];
        let mut cur = start;
        loop {
            let next = g
                .outgoing(cur)
                .filter(|e| !visited.contains(&e.to))
                .max_by(|a, b| {
                    let size = |id| g.front(id).map_or(0, |f| f.size);
                    a.weight
                        .cmp(&b.weight)
                        .then(size(a.to).cmp(&size(b.to)))
                        .then(b.to.index.cmp(&a.to.index))
                });
            let Some(e) = next else { break };
            cur = e.to;
            visited.insert(cur);
            path.push(cur);
        }
        if path.len() >= min_length {
            tracks.push(Track { fronts: path });
        }
    }
    tracks.sort_by_key(|t| std::cmp::Reverse(t.length()));
    tracks
}
