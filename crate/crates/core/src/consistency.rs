//! Latent geometric consistency between upsampled points and a target surface.
//!
//! Each upsampled point `p` is treated as a seed. The real patch `S` holds its
//! `k` nearest target points; the mimic patch `S'` is the same patch with the
//! nearest point replaced by `p`. Both are encoded by a fixed edge-feature
//! network `φ`, and the loss is the mean of `‖φ(S) − φ(S')‖` over all seeds.

use std::path::Path;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::pointcloud::{NeighborIndex, Point, PointCloud};
use crate::rng::seeded_rng;

/// Patch size used by the loss unless configured otherwise.
pub const DEFAULT_PATCH_SIZE: usize = 16;
/// Default code dimension `D`.
pub const DEFAULT_CODE_DIM: usize = 128;
/// Seed of the default encoder weights.
pub const ENCODER_SEED: u64 = 0x5055_4743;
/// Upper bound on in-patch neighbors per point.
const MAX_EDGE_NEIGHBORS: usize = 8;
const HIDDEN_DIM: usize = 32;

const WEIGHTS_MAGIC: &[u8; 4] = b"PUGC";
const WEIGHTS_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct SurfacePatchPair {
    pub seed: Point,
    /// Nearest target points, ordered by distance to the seed.
    pub real: Vec<Point>,
    /// `real` with its first point replaced by the seed.
    pub mimic: Vec<Point>,
}

/// Builds `(S, S')` for `seed` from the target points held by `index`.
/// Targets with fewer than `k` points are padded with the nearest one.
pub fn build_patch_pair(seed: &Point, index: &NeighborIndex, k: usize) -> Result<SurfacePatchPair> {
    if index.is_empty() {
        return Err(Error::EmptyCloud);
    }
    if k < 2 {
        return Err(Error::invalid(format!("patch size must be at least 2, got {k}")));
    }
    let mut real: Vec<Point> = index
        .knn_sq(seed, k)
        .into_iter()
        .map(|(i, _)| index.points()[i])
        .collect();
    let nearest = real[0];
    real.resize(k, nearest);
    let mut mimic = real.clone();
    mimic[0] = *seed;
    Ok(SurfacePatchPair {
        seed: *seed,
        real,
        mimic,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct SurfaceCode(pub Vec<f64>);

impl SurfaceCode {
    pub fn distance(&self, other: &SurfaceCode) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }
}

/// One edge-convolution layer: `h_i ← max_j ReLU(W [h_i, h_j − h_i] + b)`.
#[derive(Clone, Debug, PartialEq)]
struct EdgeLayer {
    input: usize,
    output: usize,
    /// Row-major `output × input`.
    weights: Vec<f32>,
    bias: Vec<f32>,
}

impl EdgeLayer {
    fn apply(&self, features: &[Vec<f64>], graph: &[Vec<usize>]) -> Vec<Vec<f64>> {
        let half = self.input / 2;
        let mut edge = vec![0.0; self.input];
        features
            .iter()
            .zip(graph)
            .map(|(hi, nbrs)| {
                let mut out = vec![f64::NEG_INFINITY; self.output];
                for &j in nbrs {
                    let hj = &features[j];
                    for c in 0..half {
                        edge[c] = hi[c];
                        edge[half + c] = hj[c] - hi[c];
                    }
                    for (o, slot) in out.iter_mut().enumerate() {
                        let row = &self.weights[o * self.input..(o + 1) * self.input];
                        let z = row
                            .iter()
                            .zip(&edge)
                            .fold(self.bias[o] as f64, |acc, (w, e)| acc + *w as f64 * e);
                        *slot = slot.max(z.max(0.0));
                    }
                }
                out
            })
            .collect()
    }
}

/// A deterministic permutation- and translation-invariant patch encoder.
#[derive(Clone, Debug, PartialEq)]
pub struct SurfaceEncoder {
    layers: Vec<EdgeLayer>,
}

impl Default for SurfaceEncoder {
    fn default() -> Self {
        Self::new(ENCODER_SEED, DEFAULT_CODE_DIM)
    }
}

impl SurfaceEncoder {
    /// Two edge layers (6 → 32 → `dim`) with standard normal weights scaled
    /// by `1/√fan_in` and zero biases.
    pub fn new(seed: u64, dim: usize) -> Self {
        let mut rng = seeded_rng(seed);
        let mut layer = |input: usize, output: usize| {
            let scale = 1.0 / (input as f32).sqrt();
            EdgeLayer {
                input,
                output,
                weights: (0..input * output)
                    .map(|_| rng.sample::<f32, _>(StandardNormal) * scale)
                    .collect(),
                bias: vec![0.0; output],
            }
        };
        let first = layer(6, HIDDEN_DIM);
        let second = layer(2 * HIDDEN_DIM, dim);
        Self {
            layers: vec![first, second],
        }
    }

    pub fn code_dim(&self) -> usize {
        self.layers.last().map_or(0, |l| l.output)
    }

    /// Encodes a patch. Points are sorted and centered on their centroid, so
    /// the code does not depend on point order or position.
    pub fn encode(&self, patch: &[Point]) -> SurfaceCode {
        let mut pts = patch.to_vec();
        pts.sort_by(|a, b| {
            a.x.total_cmp(&b.x)
                .then(a.y.total_cmp(&b.y))
                .then(a.z.total_cmp(&b.z))
        });
        let n = pts.len();
        let centroid = pts.iter().fold(Point::origin().coords, |acc, p| acc + p.coords) / n as f64;
        let centered: Vec<Point> = pts.iter().map(|p| p - centroid).collect();

        let k = (n.saturating_sub(1)).min(MAX_EDGE_NEIGHBORS);
        let graph: Vec<Vec<usize>> = if k == 0 {
            (0..n).map(|i| vec![i]).collect()
        } else {
            let index = NeighborIndex::new(&centered);
            (0..n)
                .map(|i| {
                    index
                        .knn_sq(&centered[i], k + 1)
                        .into_iter()
                        .map(|(j, _)| j)
                        .filter(|&j| j != i)
                        .take(k)
                        .collect()
                })
                .collect()
        };

        let mut features: Vec<Vec<f64>> = centered.iter().map(|p| vec![p.x, p.y, p.z]).collect();
        for layer in &self.layers {
            features = layer.apply(&features, &graph);
        }
        let mut code = vec![f64::NEG_INFINITY; self.code_dim()];
        for f in &features {
            for (c, v) in code.iter_mut().zip(f) {
                *c = c.max(*v);
            }
        }
        SurfaceCode(code)
    }

    /// Serializes the weights: `"PUGC"`, `u32` version, `u32` code dimension,
    /// `u32` layer count, per-layer `u32` input and output sizes, then every
    /// layer's weights followed by its biases as little-endian `f32`.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(WEIGHTS_MAGIC);
        for v in [WEIGHTS_VERSION, self.code_dim() as u32, self.layers.len() as u32] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        for l in &self.layers {
            out.extend_from_slice(&(l.input as u32).to_le_bytes());
            out.extend_from_slice(&(l.output as u32).to_le_bytes());
        }
        for l in &self.layers {
            for w in l.weights.iter().chain(&l.bias) {
                out.extend_from_slice(&w.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |m: &str| Error::invalid(format!("encoder weights: {m}"));
        let mut words = bytes.chunks_exact(4).map(|c| c.try_into().unwrap());
        let mut next_u32 = || words.next().map(u32::from_le_bytes).ok_or_else(|| bad("truncated"));
        if bytes.get(..4) != Some(WEIGHTS_MAGIC.as_slice()) {
            return Err(bad("bad magic"));
        }
        next_u32()?;
        if next_u32()? != WEIGHTS_VERSION {
            return Err(bad("unsupported version"));
        }
        let dim = next_u32()? as usize;
        let count = next_u32()? as usize;
        if count == 0 || count > 16 {
            return Err(bad("implausible layer count"));
        }
        let mut shapes = Vec::with_capacity(count);
        for _ in 0..count {
            shapes.push((next_u32()? as usize, next_u32()? as usize));
        }
        let mut expected_input = 6;
        for &(input, output) in &shapes {
            if input != expected_input || output == 0 {
                return Err(bad("inconsistent layer sizes"));
            }
            expected_input = 2 * output;
        }
        if shapes.last().unwrap().1 != dim {
            return Err(bad("code dimension does not match the last layer"));
        }
        let mut floats = bytes[4 * (4 + 2 * count)..]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()));
        let mut layers = Vec::with_capacity(count);
        for (input, output) in shapes {
            let weights: Vec<f32> = floats.by_ref().take(input * output).collect();
            let bias: Vec<f32> = floats.by_ref().take(output).collect();
            if weights.len() != input * output || bias.len() != output {
                return Err(bad("truncated"));
            }
            if weights.iter().chain(&bias).any(|w| !w.is_finite()) {
                return Err(bad("non-finite weight"));
            }
            layers.push(EdgeLayer {
                input,
                output,
                weights,
                bias,
            });
        }
        if floats.next().is_some() || bytes.len() % 4 != 0 {
            return Err(bad("trailing data"));
        }
        Ok(Self { layers })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_bytes()).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_bytes(&bytes).map_err(|e| Error::Format {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }
}

pub fn encode_patch(patch: &[Point], encoder: &SurfaceEncoder) -> SurfaceCode {
    encoder.encode(patch)
}

/// Mean code distance between real and mimic patches over all seeds in `p`.
pub fn gc_loss(p: &PointCloud, q: &PointCloud, encoder: &SurfaceEncoder, k: usize) -> Result<f64> {
    if p.is_empty() || q.is_empty() {
        return Err(Error::EmptyCloud);
    }
    let index = NeighborIndex::new(q.points());
    let per_seed: Vec<f64> = p
        .points()
        .par_iter()
        .map(|seed| {
            let pair = build_patch_pair(seed, &index, k)?;
            if pair.real == pair.mimic {
                return Ok(0.0);
            }
            Ok(encoder.encode(&pair.real).distance(&encoder.encode(&pair.mimic)))
        })
        .collect::<Result<_>>()?;
    Ok(per_seed.iter().sum::<f64>() / per_seed.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Vector;

    fn patch() -> Vec<Point> {
        (0..16)
            .map(|i| {
                let t = i as f64;
                Point::new(0.03 * (t * 1.7).sin(), 0.03 * (t * 0.9).cos(), 0.004 * (t * 2.3).sin())
            })
            .collect()
    }

    #[test]
    fn pair_examples() {
        let q = [Point::new(0.0, 0.0, 0.0), Point::new(1.0, 0.0, 0.0)];
        let index = NeighborIndex::new(&q);
        let pair = build_patch_pair(&Point::new(0.1, 0.0, 0.0), &index, 2).unwrap();
        assert_eq!(pair.real, q.to_vec());
        assert_eq!(pair.mimic, vec![Point::new(0.1, 0.0, 0.0), q[1]]);

        let exact = build_patch_pair(&q[1], &index, 2).unwrap();
        assert_eq!(exact.real, exact.mimic);

        let single = NeighborIndex::new(&q[..1]);
        let padded = build_patch_pair(&Point::new(0.0, 1.0, 0.0), &single, 4).unwrap();
        assert_eq!(padded.real, vec![q[0]; 4]);

        assert!(build_patch_pair(&q[0], &index, 1).is_err());
        assert!(build_patch_pair(&q[0], &NeighborIndex::new(&[]), 2).is_err());
    }

    #[test]
    fn code_is_permutation_invariant() {
        let enc = SurfaceEncoder::default();
        let p = patch();
        let mut rev = p.clone();
        rev.reverse();
        rev.swap(3, 11);
        let a = enc.encode(&p);
        assert_eq!(a.0.len(), DEFAULT_CODE_DIM);
        assert_eq!(a, enc.encode(&rev));
    }

    #[test]
    fn code_is_translation_invariant() {
        let enc = SurfaceEncoder::default();
        let p = patch();
        let shifted: Vec<Point> = p.iter().map(|x| x + Vector::new(0.25, -0.125, 0.5)).collect();
        let a = enc.encode(&p);
        assert!(a.distance(&enc.encode(&shifted)) < 1e-12);
    }

    #[test]
    fn rotation_changes_code() {
        let enc = SurfaceEncoder::default();
        let p = patch();
        let rotated: Vec<Point> = p.iter().map(|x| Point::new(-x.y, x.x, x.z)).collect();
        assert!(enc.encode(&p).distance(&enc.encode(&rotated)) > 1e-6);
    }

    #[test]
    fn weights_round_trip() {
        let enc = SurfaceEncoder::new(3, 64);
        let bytes = enc.to_bytes();
        assert_eq!(&bytes[..4], b"PUGC");
        let back = SurfaceEncoder::from_bytes(&bytes).unwrap();
        assert_eq!(back, enc);
        assert_eq!(back.code_dim(), 64);
        assert!(SurfaceEncoder::from_bytes(&bytes[..bytes.len() - 4]).is_err());
        let mut wrong = bytes.clone();
        wrong[0] = b'X';
        assert!(SurfaceEncoder::from_bytes(&wrong).is_err());
    }

    #[test]
    fn encoder_is_reproducible() {
        assert_eq!(SurfaceEncoder::default(), SurfaceEncoder::default());
        assert_ne!(SurfaceEncoder::new(1, 128), SurfaceEncoder::new(2, 128));
    }

    #[test]
    fn loss_zero_on_subset_and_positive_off_surface() {
        let q: Vec<[f64; 3]> = (0..200)
            .map(|i| {
                let t = i as f64 * 0.1;
                [t.sin() * 0.4, t.cos() * 0.4, (t * 0.37).sin() * 0.1]
            })
            .collect();
        let q = PointCloud::from_xyz(&q).unwrap();
        let p = PointCloud::new(q.points()[..50].to_vec()).unwrap();
        let enc = SurfaceEncoder::default();
        assert_eq!(gc_loss(&p, &q, &enc, DEFAULT_PATCH_SIZE).unwrap(), 0.0);
        let moved = PointCloud::new(p.points().iter().map(|x| x + Vector::z() * 0.01).collect()).unwrap();
        assert!(gc_loss(&moved, &q, &enc, DEFAULT_PATCH_SIZE).unwrap() > 0.0);
    }
}
