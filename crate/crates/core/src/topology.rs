//! Local minima of 2D scalar slices and their sublevel-set persistence.
//!
//! Nodes are totally ordered by `(value, linear index)`, which breaks ties on
//! plateaus deterministically. Neighbourhoods and the filtration both use
//! 8-connectivity, and invalid nodes are removed from the domain entirely.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum TopologyError {
    #[error("slice has {actual} values but dimensions {nx}x{ny}")]
    LengthMismatch { nx: usize, ny: usize, actual: usize },
    #[error("slice has no valid node")]
    NoValidNode,
}

/// A 2D scalar slice with a validity mask; `i` runs fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct Slice2D {
    nx: usize,
    ny: usize,
    values: Vec<f64>,
    valid: Vec<bool>,
}

impl Slice2D {
    /// Non-finite values are treated as invalid.
    pub fn new(
        nx: usize,
        ny: usize,
        values: Vec<f64>,
        valid: Vec<bool>,
    ) -> Result<Self, TopologyError> {
        if values.len() != nx * ny || valid.len() != nx * ny {
            return Err(TopologyError::LengthMismatch {
                nx,
                ny,
                actual: values.len().min(valid.len()),
            });
        }
        let valid = valid
            .iter()
            .zip(&values)
            .map(|(&ok, v)| ok && v.is_finite())
            .collect();
        Ok(Self {
            nx,
            ny,
            values,
            valid,
        })
    }

    pub fn from_values(nx: usize, ny: usize, values: Vec<f64>) -> Result<Self, TopologyError> {
        let n = values.len();
        Self::new(nx, ny, values, vec![true; n])
    }

    /// Row-major matrix with `rows[j][i]`.
    pub fn from_rows(rows: &[&[f64]]) -> Result<Self, TopologyError> {
        let ny = rows.len();
        let nx = rows.first().map_or(0, |r| r.len());
        let values: Vec<f64> = rows.iter().flat_map(|r| r.iter().copied()).collect();
        Self::from_values(nx, ny, values)
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.nx, self.ny)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn valid(&self) -> &[bool] {
        &self.valid
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    /// `a` strictly precedes `b` in the simulation-of-simplicity order.
    #[inline]
    pub fn precedes(&self, a: usize, b: usize) -> bool {
        let (va, vb) = (self.values[a], self.values[b]);
        va < vb || (va == vb && a < b)
    }

    /// Valid 8-neighbours of linear index `idx`.
    pub fn neighbours(&self, idx: usize) -> impl Iterator<Item = usize> + '_ {
        let (i, j) = ((idx % self.nx) as isize, (idx / self.nx) as isize);
        let (nx, ny) = (self.nx as isize, self.ny as isize);
        (-1isize..=1)
            .flat_map(move |dj| (-1isize..=1).map(move |di| (di, dj)))
            .filter(|&(di, dj)| di != 0 || dj != 0)
            .filter_map(move |(di, dj)| {
                let (a, b) = (i + di, j + dj);
                (a >= 0 && a < nx && b >= 0 && b < ny).then(|| (b * nx + a) as usize)
            })
            .filter(|&n| self.valid[n])
    }

    fn sorted_valid(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.values.len()).filter(|&n| self.valid[n]).collect();
        order.sort_unstable_by(|&a, &b| self.values[a].total_cmp(&self.values[b]).then(a.cmp(&b)));
        order
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Minimum2D {
    pub i: usize,
    pub j: usize,
    pub value: f64,
    /// `None` until computed by [`persistence_of_minima`]; infinite for the
    /// surviving minimum of each connected valid region.
    pub persistence: Option<f64>,
}

impl Minimum2D {
    pub fn is_essential(&self) -> bool {
        self.persistence.is_some_and(f64::is_infinite)
    }
}

/// Nodes that precede every valid 8-neighbour, in linear-index order.
pub fn local_minima(slice: &Slice2D) -> Result<Vec<Minimum2D>, TopologyError> {
    if !slice.valid.iter().any(|&v| v) {
        return Err(TopologyError::NoValidNode);
    }
    Ok((0..slice.values.len())
        .filter(|&n| slice.valid[n] && slice.neighbours(n).all(|m| slice.precedes(n, m)))
        .map(|n| Minimum2D {
            i: n % slice.nx,
            j: n / slice.nx,
            value: slice.values[n],
            persistence: None,
        })
        .collect())
}

/// Union-find over node indices with path halving and union by size.
#[derive(Debug, Clone)]
pub struct DisjointSet {
    parent: Vec<usize>,
    size: Vec<u32>,
}

impl DisjointSet {
    pub fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
            size: vec![1; n],
        }
    }

    pub fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    /// Merges the sets of `a` and `b`, returning the new root.
    pub fn union(&mut self, a: usize, b: usize) -> usize {
        let (mut ra, mut rb) = (self.find(a), self.find(b));
        if ra == rb {
            return ra;
        }
        if self.size[ra] < self.size[rb] {
            std::mem::swap(&mut ra, &mut rb);
        }
        self.parent[rb] = ra;
        self.size[ra] += self.size[rb];
        ra
    }
}

/// Every local minimum with its persistence in the sublevel-set filtration.
///
/// Nodes are added in total order; when a node joins several components the
/// one with the oldest minimum survives and each other dies with
/// persistence `value(node) − value(its minimum)`. Minima that never die
/// get infinite persistence. Output is in linear-index order.
pub fn persistence_of_minima(slice: &Slice2D) -> Result<Vec<Minimum2D>, TopologyError> {
    if !slice.valid.iter().any(|&v| v) {
        return Err(TopologyError::NoValidNode);
    }
    let n = slice.values.len();
    let mut ds = DisjointSet::new(n);
    let mut added = vec![false; n];
    // minimum (birth node) of each component, indexed by root
    let mut birth = vec![usize::MAX; n];
    let mut death = vec![f64::INFINITY; n];
    let mut is_min = vec![false; n];
    let mut roots: Vec<usize> = Vec::with_capacity(8);

    for s in slice.sorted_valid() {
        roots.clear();
        for m in slice.neighbours(s) {
            if added[m] {
                let r = ds.find(m);
                if !roots.contains(&r) {
                    roots.push(r);
                }
            }
        }
        added[s] = true;
        if roots.is_empty() {
            is_min[s] = true;
            birth[s] = s;
            continue;
        }
        // oldest minimum survives
        let elder = *roots
            .iter()
            .min_by(|&&a, &&b| {
                let (ba, bb) = (birth[a], birth[b]);
                if slice.precedes(ba, bb) {
                    std::cmp::Ordering::Less
                } else {
                    std::cmp::Ordering::Greater
                }
            })
            .expect("non-empty");
        let survivor_birth = birth[elder];
        for &r in &roots {
            if r != elder {
                let b = birth[r];
                death[b] = slice.values[s] - slice.values[b];
            }
        }
        let mut root = ds.union(s, elder);
        for &r in &roots {
            root = ds.union(root, r);
        }
        birth[root] = survivor_birth;
    }

    Ok((0..n)
        .filter(|&s| is_min[s])
        .map(|s| Minimum2D {
            i: s % slice.nx,
            j: s / slice.nx,
            value: slice.values[s],
            persistence: Some(death[s]),
        })
        .collect())
}

/// Keeps minima whose persistence is at least `threshold`; infinite
/// persistence always survives. Minima without a persistence are dropped.
pub fn simplify_minima(minima: &[Minimum2D], threshold: f64) -> Vec<Minimum2D> {
    minima
        .iter()
        .filter(|m| {
            m.persistence
                .is_some_and(|p| p.is_infinite() || p >= threshold)
        })
        .copied()
        .collect()
}

/// Number of 8-connected components of valid nodes.
pub fn count_components(slice: &Slice2D) -> usize {
    let n = slice.values.len();
    let mut ds = DisjointSet::new(n);
    for s in 0..n {
        if slice.valid[s] {
            for m in slice.neighbours(s) {
                ds.union(s, m);
            }
        }
    }
    (0..n)
        .filter(|&s| slice.valid[s] && ds.find(s) == s)
        .count()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Brute-force neighbourhood scan, independent of [`Slice2D::neighbours`].
    fn brute_minima(nx: usize, ny: usize, v: &[f64], valid: &[bool]) -> Vec<usize> {
        let mut out = Vec::new();
        for j in 0..ny {
            for i in 0..nx {
                let a = j * nx + i;
                if !valid[a] {
                    continue;
                }
                let mut is_min = true;
                for jj in j.saturating_sub(1)..=(j + 1).min(ny - 1) {
                    for ii in i.saturating_sub(1)..=(i + 1).min(nx - 1) {
                        let b = jj * nx + ii;
                        if b != a && valid[b] && !(v[a] < v[b] || (v[a] == v[b] && a < b)) {
                            is_min = false;
                        }
                    }
                }
                if is_min {
                    out.push(a);
                }
            }
        }
        out
    }

    #[test]
    fn ramp_has_single_minimum() {
        let v: Vec<f64> = (0..25).map(|n| ((n % 5) + (n / 5)) as f64).collect();
        let s = Slice2D::from_values(5, 5, v).unwrap();
        let m = local_minima(&s).unwrap();
        assert_eq!(m.len(), 1);
        assert_eq!((m[0].i, m[0].j), (0, 0));
        let p = persistence_of_minima(&s).unwrap();
        assert_eq!(p.len(), 1);
        assert!(p[0].is_essential());
    }

    #[test]
    fn constant_slice_tie_break() {
        let s = Slice2D::from_values(4, 3, vec![2.5; 12]).unwrap();
        let m = local_minima(&s).unwrap();
        assert_eq!(m.len(), 1);
        assert_eq!((m[0].i, m[0].j), (0, 0));
    }

    #[test]
    fn three_by_three_example() {
        let s =
            Slice2D::from_rows(&[&[0.0, 5.0, 1.0], &[6.0, 7.0, 6.0], &[8.0, 9.0, 8.0]]).unwrap();
        let p = persistence_of_minima(&s).unwrap();
        assert_eq!(p.len(), 2);
        // row 0, column 0
        assert_eq!((p[0].i, p[0].j), (0, 0));
        assert!(p[0].is_essential());
        // row 0, column 2: born at 1, dies at the saddle 5
        assert_eq!((p[1].i, p[1].j), (2, 0));
        assert_eq!(p[1].persistence, Some(4.0));

        assert_eq!(simplify_minima(&p, 0.0), p);
        let kept = simplify_minima(&p, 4.5);
        assert_eq!(kept.len(), 1);
        assert_eq!((kept[0].i, kept[0].j), (0, 0));
        assert_eq!(simplify_minima(&p, 1e300).len(), 1);
    }

    #[test]
    fn invalid_nodes_split_regions() {
        // a masked column splits the slice into two regions, each with an
        // essential minimum
        let mut valid = vec![true; 15];
        for j in 0..3 {
            valid[j * 5 + 2] = false;
        }
        let v = vec![
            3.0, 1.0, 0.0, 2.0, 4.0, 3.0, 2.0, 0.0, 1.0, 5.0, 4.0, 3.0, 0.0, 2.0, 6.0,
        ];
        let s = Slice2D::new(5, 3, v, valid).unwrap();
        let p = persistence_of_minima(&s).unwrap();
        assert_eq!(p.iter().filter(|m| m.is_essential()).count(), 2);
        assert_eq!(count_components(&s), 2);
    }

    #[test]
    fn no_valid_node_is_an_error() {
        let s = Slice2D::new(2, 2, vec![1.0; 4], vec![false; 4]).unwrap();
        assert_eq!(local_minima(&s), Err(TopologyError::NoValidNode));
    }

    #[test]
    fn random_minima_match_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let v: Vec<f64> = (0..256).map(|_| rng.random_range(0..6) as f64).collect();
            let valid: Vec<bool> = (0..256).map(|_| rng.random_bool(0.9)).collect();
            let s = Slice2D::new(16, 16, v.clone(), valid.clone()).unwrap();
            let got: Vec<usize> = local_minima(&s)
                .unwrap()
                .iter()
                .map(|m| m.j * 16 + m.i)
                .collect();
            assert_eq!(got, brute_minima(16, 16, &v, &valid));
            let from_pers: Vec<usize> = persistence_of_minima(&s)
                .unwrap()
                .iter()
                .map(|m| m.j * 16 + m.i)
                .collect();
            assert_eq!(from_pers, got);
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn slice_strategy() -> impl Strategy<Value = Slice2D> {
            (2usize..12, 2usize..12).prop_flat_map(|(nx, ny)| {
                (
                    proptest::collection::vec(-100.0f64..100.0, nx * ny),
                    proptest::collection::vec(proptest::bool::weighted(0.85), nx * ny),
                )
                    .prop_map(move |(v, ok)| Slice2D::new(nx, ny, v, ok).unwrap())
            })
        }

        proptest! {
            #[test]
            fn nested_under_threshold(s in slice_strategy(), t1 in 0.0f64..50.0, dt in 0.0f64..50.0) {
                prop_assume!(s.valid().iter().any(|&v| v));
                let p = persistence_of_minima(&s).unwrap();
                let a = simplify_minima(&p, t1);
                let b = simplify_minima(&p, t1 + dt);
                prop_assert!(b.iter().all(|m| a.contains(m)));
            }

            #[test]
            fn pair_count(s in slice_strategy()) {
                prop_assume!(s.valid().iter().any(|&v| v));
                let p = persistence_of_minima(&s).unwrap();
                let finite = p.iter().filter(|m| !m.is_essential()).count();
                prop_assert_eq!(finite, p.len() - count_components(&s));
                prop_assert!(p.iter().all(|m| m.persistence.unwrap() >= 0.0));
            }

            #[test]
            fn shift_and_scale(s in slice_strategy(), c in -50.0f64..50.0, k in 0.1f64..10.0) {
                prop_assume!(s.valid().iter().any(|&v| v));
                let (nx, ny) = s.dims();
                let p = persistence_of_minima(&s).unwrap();
                let shifted = Slice2D::new(nx, ny, s.values().iter().map(|v| v + c).collect(), s.valid().to_vec()).unwrap();
                let ps = persistence_of_minima(&shifted).unwrap();
                prop_assert_eq!(p.len(), ps.len());
                for (a, b) in p.iter().zip(&ps) {
                    prop_assert_eq!((a.i, a.j), (b.i, b.j));
                    let (x, y) = (a.persistence.unwrap(), b.persistence.unwrap());
                    prop_assert!(x == y || (x - y).abs() <= 1e-9 * x.abs().max(1.0));
                }
                let scaled = Slice2D::new(nx, ny, s.values().iter().map(|v| v * k).collect(), s.valid().to_vec()).unwrap();
                let pk = persistence_of_minima(&scaled).unwrap();
                for (a, b) in p.iter().zip(&pk) {
                    prop_assert_eq!((a.i, a.j), (b.i, b.j));
                    let (x, y) = (a.persistence.unwrap(), b.persistence.unwrap());
                    prop_assert!(x == y || (y - k * x).abs() <= 1e-9 * (k * x).abs().max(1.0));
                }
            }
        }
    }
}
