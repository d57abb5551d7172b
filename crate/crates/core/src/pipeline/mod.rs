//! Patch-based upsampling of whole clouds, sampling diagnostics and
//! synthetic test shapes.
//!
//! A cloud is split into overlapping k-NN patches around FPS seeds. Each patch
//! is normalized, voxelized, resampled and reconstructed independently; the
//! results are merged and reduced to the exact target count by FPS.

mod diagnostics;
mod synthetic;

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

pub use diagnostics::{
    diagnose_cells, planted_benchmark, sampling_diagnostics, PlantedBenchmark, SamplingDiagnostics,
};
pub use synthetic::{
    generate_synthetic, icosphere, ideal_area, Shape, CREASE_SLOPE, SPHERE_MESH_LEVEL,
    TORUS_MAJOR, TORUS_MINOR,
};

use crate::error::{Error, Result};
use crate::io::read_density_grid;
use crate::pointcloud::{farthest_point_sampling, NeighborIndex, PointCloud};
use crate::reconstruct::{place_coarse, refine, RefineConfig};
use crate::rng::stream_key;
use crate::sampler::{sample_cells, target_count, SamplerConfig};
use crate::voxel::{splat_density, DensityField, VoxelGrid};

#[derive(Clone, Debug, PartialEq)]
pub enum DensityBackend {
    /// Trilinear splatting of the input points.
    Analytic,
    /// A precomputed density grid for the whole (normalized) cloud.
    File(PathBuf),
}

impl std::str::FromStr for DensityBackend {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "analytic" => Ok(DensityBackend::Analytic),
            _ => match s.strip_prefix("file:") {
                Some(path) if !path.is_empty() => Ok(DensityBackend::File(PathBuf::from(path))),
                _ => Err(Error::invalid(format!(
                    "unknown backend `{s}` (expected analytic or file:PATH)"
                ))),
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PipelineConfig {
    /// Points per patch.
    pub patch_size: usize,
    /// Number of FPS patch seeds; `None` uses `⌈2N / patch_size⌉`.
    pub patch_seeds: Option<usize>,
    pub resolution: usize,
    /// Box-smoothing radius of the analytic backend, in cells.
    pub smoothing_radius: usize,
    pub sampler: SamplerConfig,
    pub backend: DensityBackend,
    pub refine: bool,
    /// Neighborhood size of the coarse and refinement surface fits.
    pub refine_neighbors: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            patch_size: 256,
            patch_seeds: None,
            resolution: 32,
            smoothing_radius: 0,
            sampler: SamplerConfig::default(),
            backend: DensityBackend::Analytic,
            refine: true,
            refine_neighbors: RefineConfig::DEFAULT_NEIGHBORS,
        }
    }
}

fn parse_value<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::invalid(format!("invalid value `{value}` for `{key}`")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        _ => Err(Error::invalid(format!("invalid boolean `{value}` for `{key}`"))),
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        self.sampler.validate()?;
        VoxelGrid::new(self.resolution)?;
        if self.refine_neighbors < 3 {
            return Err(Error::invalid("refine neighborhood must hold at least 3 points"));
        }
        if self.patch_size < self.refine_neighbors {
            return Err(Error::invalid(format!(
                "patch size {} is smaller than the neighborhood size {}",
                self.patch_size, self.refine_neighbors
            )));
        }
        if self.patch_seeds == Some(0) {
            return Err(Error::invalid("patch seed count must be positive"));
        }
        Ok(())
    }

    /// Applies one `key=value` setting. Returns `false` for keys that are not
    /// pipeline settings, so callers can handle them.
    pub fn set(&mut self, key: &str, value: &str) -> Result<bool> {
        match key {
            "rate" => self.sampler.upsample_rate = parse_value(key, value)?,
            "multiplier" => self.sampler.resample_multiplier = parse_value(key, value)?,
            "seed" => self.sampler.seed = parse_value(key, value)?,
            "sampler" => self.sampler.method = value.parse()?,
            "resolution" => self.resolution = parse_value(key, value)?,
            "backend" => self.backend = value.parse()?,
            "refine" => self.refine = parse_bool(key, value)?,
            "no-refine" => self.refine = !parse_bool(key, value)?,
            "patch-size" => self.patch_size = parse_value(key, value)?,
            "patch-seeds" => self.patch_seeds = Some(parse_value(key, value)?),
            "smoothing" => self.smoothing_radius = parse_value(key, value)?,
            "neighbors" => self.refine_neighbors = parse_value(key, value)?,
            _ => return Ok(false),
        }
        Ok(true)
    }

    fn refine_config(&self, grid: &VoxelGrid) -> RefineConfig {
        RefineConfig {
            neighbors: self.refine_neighbors,
            enabled: self.refine,
            ..RefineConfig::for_grid(grid)
        }
    }
}

/// Reads `key=value` lines (`#` comments, blank lines ignored). Keys may be
/// written with or without a leading `--`.
pub fn read_config_file(path: impl AsRef<Path>) -> Result<Vec<(String, String)>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: n + 1,
                message: "expected key=value".into(),
            });
        };
        let key = key.trim().trim_start_matches("--").replace('_', "-");
        out.push((key, value.trim().to_string()));
    }
    Ok(out)
}

/// Index sets of overlapping patches covering every point of `cloud`.
///
/// Seeds are chosen by FPS; each patch holds the `patch_size` nearest points
/// of its seed. Duplicate index sets are dropped, and points left uncovered
/// seed extra patches. Clouds no larger than one patch yield a single patch.
pub fn patch_indices(
    cloud: &PointCloud,
    patch_size: usize,
    seeds: Option<usize>,
) -> Result<Vec<Vec<usize>>> {
    let n = cloud.len();
    if patch_size == 0 {
        return Err(Error::invalid("patch size must be positive"));
    }
    if n <= patch_size {
        if n < patch_size {
            log::warn!("cloud has {n} points, fewer than the patch size {patch_size}; using one patch");
        }
        return Ok(vec![(0..n).collect()]);
    }
    let seed_count = seeds.unwrap_or_else(|| (2 * n).div_ceil(patch_size)).min(n);
    let index = NeighborIndex::new(cloud.points());
    let mut seen: HashSet<Vec<usize>> = HashSet::new();
    let mut covered = vec![false; n];
    let mut patches = Vec::new();
    let mut add = |seed: usize, patches: &mut Vec<Vec<usize>>, covered: &mut Vec<bool>| {
        let members: Vec<usize> = index
            .knn_sq(&cloud.points()[seed], patch_size)
            .into_iter()
            .map(|(i, _)| i)
            .collect();
        let mut key = members.clone();
        key.sort_unstable();
        if seen.insert(key) {
            for &i in &members {
                covered[i] = true;
            }
            patches.push(members);
        }
    };
    for seed in farthest_point_sampling(cloud, seed_count)? {
        add(seed, &mut patches, &mut covered);
    }
    while let Some(seed) = covered.iter().position(|c| !c) {
        add(seed, &mut patches, &mut covered);
    }
    Ok(patches)
}

/// Patches of `cloud` as separate clouds in source units.
pub fn extract_patches(cloud: &PointCloud, config: &PipelineConfig) -> Result<Vec<PointCloud>> {
    patch_indices(cloud, config.patch_size, config.patch_seeds)?
        .into_iter()
        .map(|idx| PointCloud::new(idx.into_iter().map(|i| cloud.points()[i]).collect()))
        .collect()
}

/// Concatenates patch outputs (source units), drops exact duplicates and
/// reduces the result to `target` points by FPS. Points keep their
/// concatenation order.
pub fn merge_and_downsample(patches: &[PointCloud], target: usize) -> Result<PointCloud> {
    let mut seen = HashSet::new();
    let merged: Vec<_> = patches
        .iter()
        .flat_map(|p| p.denormalize().into_points())
        .filter(|p| seen.insert([p.x.to_bits(), p.y.to_bits(), p.z.to_bits()]))
        .collect();
    if merged.len() < target || target == 0 {
        return Err(Error::InsufficientPoints {
            needed: target,
            available: merged.len(),
        });
    }
    let merged = PointCloud::new(merged)?;
    if merged.len() == target {
        return Ok(merged);
    }
    let mut keep = farthest_point_sampling(&merged, target)?;
    keep.sort_unstable();
    PointCloud::new(keep.into_iter().map(|i| merged.points()[i]).collect())
}

/// Upsamples one normalized patch with the given density field. Returns
/// points in the patch's source units.
fn upsample_patch(
    normalized: &PointCloud,
    field: &DensityField,
    sampler: &SamplerConfig,
    config: &PipelineConfig,
) -> Result<PointCloud> {
    let grid = field.grid();
    let samples = sample_cells(field, sampler, normalized.len())?;
    let refine_cfg = config.refine_config(&grid);
    let coarse = place_coarse(&samples, &grid, normalized, &refine_cfg)?;
    let refined = refine(&coarse, normalized, &refine_cfg)?;
    Ok(refined.denormalize())
}

/// Upsamples `cloud` to exactly `⌈r · N⌋` points.
pub fn upsample_cloud(cloud: &PointCloud, config: &PipelineConfig) -> Result<PointCloud> {
    upsample_cloud_at_rate(cloud, config, config.sampler.upsample_rate)
}

/// Like [`upsample_cloud`] with the configured rate replaced by `rate`.
pub fn upsample_cloud_at_rate(
    cloud: &PointCloud,
    config: &PipelineConfig,
    rate: f64,
) -> Result<PointCloud> {
    let config = &PipelineConfig {
        sampler: SamplerConfig {
            upsample_rate: rate,
            ..config.sampler.clone()
        },
        ..config.clone()
    };
    config.validate()?;
    let source = cloud.denormalize();
    let target = target_count(rate, source.len());

    let outputs: Vec<PointCloud> = match &config.backend {
        DensityBackend::File(path) => {
            // A precomputed grid describes the whole cloud, so there is one patch.
            let field = read_density_grid(path)?;
            if field.grid().resolution() != config.resolution {
                log::warn!(
                    "density grid resolution {} overrides configured {}",
                    field.grid().resolution(),
                    config.resolution
                );
            }
            let normalized = source.normalize()?;
            vec![upsample_patch(&normalized, &field, &config.sampler, config)?]
        }
        DensityBackend::Analytic => {
            let grid = VoxelGrid::new(config.resolution)?;
            let patches = extract_patches(&source, config)?;
            log::info!("upsampling {} patches to {target} points", patches.len());
            patches
                .par_iter()
                .enumerate()
                .map(|(i, patch)| {
                    let normalized = patch.normalize()?;
                    let field = splat_density(&normalized, &grid, config.smoothing_radius)?;
                    let sampler = SamplerConfig {
                        seed: stream_key(config.sampler.seed, "patch", i as u64),
                        ..config.sampler.clone()
                    };
                    upsample_patch(&normalized, &field, &sampler, config)
                })
                .collect::<Result<_>>()?
        }
    };
    merge_and_downsample(&outputs, target)
}
