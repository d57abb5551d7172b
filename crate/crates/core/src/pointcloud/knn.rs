//! Exact k-nearest-neighbor search over a static kd-tree.
//!
//! Results are ordered by ascending distance with ties broken by the lowest
//! point index, so every query matches a brute-force scan exactly.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::cloud::Point;
use crate::error::{Error, Result};

const LEAF_SIZE: usize = 12;

#[derive(Clone, Debug)]
enum Node {
    Leaf {
        start: u32,
        end: u32,
    },
    Split {
        axis: u8,
        value: f64,
        left: u32,
        right: u32,
    },
}

/// A queryable spatial index over a fixed set of points.
#[derive(Clone, Debug)]
pub struct NeighborIndex {
    points: Vec<Point>,
    order: Vec<u32>,
    nodes: Vec<Node>,
}

/// Heap entry ordered by `(squared distance, index)`.
#[derive(Clone, Copy, Debug, PartialEq)]
struct Candidate {
    dist2: f64,
    index: u32,
}

impl Eq for Candidate {}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.dist2
            .total_cmp(&other.dist2)
            .then(self.index.cmp(&other.index))
    }
}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl NeighborIndex {
    pub fn new(points: &[Point]) -> Self {
        assert!(points.len() < u32::MAX as usize, "too many points");
        let mut index = NeighborIndex {
            points: points.to_vec(),
            order: (0..points.len() as u32).collect(),
            nodes: Vec::new(),
        };
        if !points.is_empty() {
            index.build(0, points.len());
        }
        index
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    fn build(&mut self, start: usize, end: usize) -> u32 {
        let id = self.nodes.len() as u32;
        if end - start <= LEAF_SIZE {
            self.nodes.push(Node::Leaf {
                start: start as u32,
                end: end as u32,
            });
            return id;
        }
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for &i in &self.order[start..end] {
            let p = &self.points[i as usize];
            for a in 0..3 {
                lo[a] = lo[a].min(p[a]);
                hi[a] = hi[a].max(p[a]);
            }
        }
        let axis = (0..3)
            .max_by(|&a, &b| (hi[a] - lo[a]).total_cmp(&(hi[b] - lo[b])))
            .unwrap();
        if hi[axis] - lo[axis] <= 0.0 {
            // All points coincide; nothing to split on.
            self.nodes.push(Node::Leaf {
                start: start as u32,
                end: end as u32,
            });
            return id;
        }
        let mid = start + (end - start) / 2;
        let points = &self.points;
        self.order[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
            points[a as usize][axis].total_cmp(&points[b as usize][axis])
        });
        let value = self.points[self.order[mid] as usize][axis];
        self.nodes.push(Node::Split {
            axis: axis as u8,
            value,
            left: 0,
            right: 0,
        });
        // Left holds coordinates <= value, right holds >= value.
        let left = self.build(start, mid);
        let right = self.build(mid, end);
        if let Node::Split {
            left: l, right: r, ..
        } = &mut self.nodes[id as usize]
        {
            *l = left;
            *r = right;
        }
        id
    }

    /// The `k` nearest points to `query` as `(index, distance)` pairs.
    pub fn knn(&self, query: &Point, k: usize) -> Result<Vec<(usize, f64)>> {
        if k > self.points.len() {
            return Err(Error::invalid(format!(
                "k = {k} exceeds the number of points ({})",
                self.points.len()
            )));
        }
        Ok(self
            .knn_sq(query, k)
            .into_iter()
            .map(|(i, d2)| (i, d2.sqrt()))
            .collect())
    }

    /// Like [`NeighborIndex::knn`] but returns squared distances and clamps
    /// `k` to the number of points.
    pub fn knn_sq(&self, query: &Point, k: usize) -> Vec<(usize, f64)> {
        let k = k.min(self.points.len());
        if k == 0 {
            return Vec::new();
        }
        let mut heap = BinaryHeap::with_capacity(k + 1);
        self.search(0, query, k, &mut heap);
        let mut out: Vec<_> = heap
            .into_vec()
            .into_iter()
            .map(|c| (c.index as usize, c.dist2))
            .collect();
        out.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        out
    }

    /// Nearest point as `(index, squared distance)`.
    pub fn nearest_sq(&self, query: &Point) -> (usize, f64) {
        self.knn_sq(query, 1)[0]
    }

    fn search(&self, node: u32, q: &Point, k: usize, heap: &mut BinaryHeap<Candidate>) {
        match self.nodes[node as usize] {
            Node::Leaf { start, end } => {
                for &i in &self.order[start as usize..end as usize] {
                    let c = Candidate {
                        dist2: (self.points[i as usize] - q).norm_squared(),
                        index: i,
                    };
                    if heap.len() < k {
                        heap.push(c);
                    } else if c < *heap.peek().unwrap() {
                        heap.pop();
                        heap.push(c);
                    }
                }
            }
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let diff = q[axis as usize] - value;
                let (near, far) = if diff <= 0.0 {
                    (left, right)
                } else {
                    (right, left)
                };
                self.search(near, q, k, heap);
                // Equality must still be explored: a tied point may carry a lower index.
                if heap.len() < k || diff * diff <= heap.peek().unwrap().dist2 {
                    self.search(far, q, k, heap);
                }
            }
        }
    }

    /// All points within `radius` of `query` (inclusive), sorted like `knn`.
    pub fn within_radius(&self, query: &Point, radius: f64) -> Vec<(usize, f64)> {
        let mut out = Vec::new();
        if !self.points.is_empty() {
            self.radius_search(0, query, radius * radius, &mut out);
        }
        out.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        out.into_iter().map(|(i, d2)| (i, d2.sqrt())).collect()
    }

    fn radius_search(&self, node: u32, q: &Point, r2: f64, out: &mut Vec<(usize, f64)>) {
        match self.nodes[node as usize] {
            Node::Leaf { start, end } => {
                for &i in &self.order[start as usize..end as usize] {
                    let d2 = (self.points[i as usize] - q).norm_squared();
                    if d2 <= r2 {
                        out.push((i as usize, d2));
                    }
                }
            }
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let diff = q[axis as usize] - value;
                let (near, far) = if diff <= 0.0 {
                    (left, right)
                } else {
                    (right, left)
                };
                self.radius_search(near, q, r2, out);
                if diff * diff <= r2 {
                    self.radius_search(far, q, r2, out);
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn brute_force(points: &[Point], q: &Point, k: usize) -> Vec<(usize, f64)> {
        let mut all: Vec<_> = points
            .iter()
            .enumerate()
            .map(|(i, p)| (i, (p - q).norm_squared()))
            .collect();
        all.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        all.truncate(k);
        all
    }

    fn line() -> Vec<Point> {
        (0..4).map(|i| Point::new(i as f64, 0.0, 0.0)).collect()
    }

    #[test]
    fn coincident_query() {
        let idx = NeighborIndex::new(&line());
        assert_eq!(idx.knn(&Point::new(2.0, 0.0, 0.0), 1).unwrap(), vec![(2, 0.0)]);
    }

    #[test]
    fn collinear_two_nearest() {
        let idx = NeighborIndex::new(&line());
        let res = idx.knn(&Point::new(0.9, 0.0, 0.0), 2).unwrap();
        assert_eq!(res[0].0, 1);
        assert_eq!(res[1].0, 0);
        assert!((res[0].1 - 0.1).abs() < 1e-12);
        assert!((res[1].1 - 0.9).abs() < 1e-12);
    }

    #[test]
    fn k_equals_n_returns_everything_sorted() {
        let pts = line();
        let idx = NeighborIndex::new(&pts);
        let res = idx.knn(&Point::new(1.4, 0.0, 0.0), 4).unwrap();
        let order: Vec<_> = res.iter().map(|r| r.0).collect();
        assert_eq!(order, vec![1, 2, 0, 3]);
    }

    #[test]
    fn k_too_large_is_error() {
        let idx = NeighborIndex::new(&line());
        assert!(idx.knn(&Point::origin(), 5).is_err());
    }

    #[test]
    fn ties_resolve_to_lowest_index() {
        // Many duplicates straddle split planes.
        let mut pts = Vec::new();
        for i in 0..100 {
            pts.push(Point::new((i % 3) as f64, ((i / 3) % 2) as f64, 0.0));
        }
        let idx = NeighborIndex::new(&pts);
        for k in [1, 5, 17, 40, 100] {
            let q = Point::new(1.0, 0.5, 0.0);
            let got = idx.knn_sq(&q, k);
            assert_eq!(got, brute_force(&pts, &q, k));
        }
    }

    #[test]
    fn radius_query_matches_scan() {
        let pts: Vec<_> = (0..200)
            .map(|i| {
                let t = i as f64 * 0.37;
                Point::new(t.sin(), (1.3 * t).cos(), (0.7 * t).sin())
            })
            .collect();
        let idx = NeighborIndex::new(&pts);
        let q = Point::new(0.1, 0.2, -0.1);
        let got = idx.within_radius(&q, 0.6);
        let expected: Vec<_> = brute_force(&pts, &q, pts.len())
            .into_iter()
            .filter(|(_, d2)| *d2 <= 0.36)
            .map(|(i, d2)| (i, d2.sqrt()))
            .collect();
        assert_eq!(got, expected);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]
        #[test]
        fn knn_matches_brute_force(
            coords in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0), 1..400),
            q in (-1.2f64..1.2, -1.2f64..1.2, -1.2f64..1.2),
            k in 1usize..32,
        ) {
            let pts: Vec<Point> = coords.iter().map(|&(x, y, z)| Point::new(x, y, z)).collect();
            let idx = NeighborIndex::new(&pts);
            let q = Point::new(q.0, q.1, q.2);
            let k = k.min(pts.len());
            prop_assert_eq!(idx.knn_sq(&q, k), brute_force(&pts, &q, k));
        }
    }
}
