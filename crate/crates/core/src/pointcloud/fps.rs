//! Farthest point sampling.
//!
//! The greedy loop keeps, for every point, its distance to the selected set
//! and picks the largest score each round. Ties always go to the lowest index.
//! Large inputs are scanned in parallel; the reduction is order-independent so
//! the result does not depend on the thread count.

use rayon::prelude::*;

use super::cloud::{Point, PointCloud};
use crate::error::{Error, Result};

const PARALLEL_THRESHOLD: usize = 8192;

/// Selection order of `m` points by farthest point sampling.
///
/// The first point is the one nearest the centroid.
pub fn farthest_point_sampling(cloud: &PointCloud, m: usize) -> Result<Vec<usize>> {
    if m == 0 || m > cloud.len() {
        return Err(Error::invalid(format!(
            "fps sample count {m} outside 1..={}",
            cloud.len()
        )));
    }
    let start = nearest_to(cloud.points(), &cloud.centroid());
    Ok(greedy_farthest(cloud.points(), Score::Plain, start, m))
}

pub(crate) fn nearest_to(points: &[Point], target: &Point) -> usize {
    let mut best = 0;
    let mut best_d2 = f64::INFINITY;
    for (i, p) in points.iter().enumerate() {
        let d2 = (p - target).norm_squared();
        if d2 < best_d2 {
            best_d2 = d2;
            best = i;
        }
    }
    best
}

/// How a candidate's distance to the selected set is turned into a score.
#[derive(Clone, Copy)]
pub(crate) enum Score<'a> {
    /// Plain squared distance.
    Plain,
    /// `weight * distance`.
    Weighted(&'a [f64]),
}

/// Greedy farthest-point order starting from `start`. `m` must not exceed
/// `points.len()`.
pub(crate) fn greedy_farthest(
    points: &[Point],
    score: Score<'_>,
    start: usize,
    m: usize,
) -> Vec<usize> {
    let n = points.len();
    debug_assert!(m <= n && start < n);
    let mut min_d2 = vec![f64::INFINITY; n];
    let mut selected = vec![false; n];
    let mut order = Vec::with_capacity(m);
    let mut last = start;
    selected[start] = true;
    order.push(start);

    let eval = |i: usize, d2: f64| -> f64 {
        match score {
            Score::Plain => d2,
            Score::Weighted(w) => w[i] * d2.sqrt(),
        }
    };

    while order.len() < m {
        let anchor = points[last];
        let update = |(offset, d): (usize, &mut f64), base: usize| -> (f64, usize) {
            let i = base + offset;
            let d2 = (points[i] - anchor).norm_squared();
            if d2 < *d {
                *d = d2;
            }
            if selected[i] {
                (f64::NEG_INFINITY, i)
            } else {
                (eval(i, *d), i)
            }
        };
        let best = if n >= PARALLEL_THRESHOLD {
            min_d2
                .par_chunks_mut(2048)
                .enumerate()
                .map(|(c, chunk)| {
                    let base = c * 2048;
                    chunk
                        .iter_mut()
                        .enumerate()
                        .map(|e| update(e, base))
                        .fold((f64::NEG_INFINITY, usize::MAX), better)
                })
                .reduce(|| (f64::NEG_INFINITY, usize::MAX), better)
        } else {
            min_d2
                .iter_mut()
                .enumerate()
                .map(|e| update(e, 0))
                .fold((f64::NEG_INFINITY, usize::MAX), better)
        };
        last = best.1;
        selected[last] = true;
        order.push(last);
    }
    order
}

/// Larger score wins; equal scores go to the lower index.
fn better(a: (f64, usize), b: (f64, usize)) -> (f64, usize) {
    if b.0 > a.0 || (b.0 == a.0 && b.1 < a.1) {
        b
    } else {
        a
    }
}
