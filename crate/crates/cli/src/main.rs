//! Command-line front end for voxel-based point cloud upsampling.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand};

use voxup::consistency::{gc_loss, SurfaceEncoder, DEFAULT_PATCH_SIZE};
use voxup::io::{read_mesh, read_pointcloud, write_density_grid, write_obj, write_pointcloud, PointFormat};
use voxup::metrics::MetricsReport;
use voxup::pipeline::{
    generate_synthetic, planted_benchmark, read_config_file, sampling_diagnostics, upsample_cloud,
    PipelineConfig, SamplingDiagnostics, Shape,
};
use voxup::sampler::SamplerMethod;
use voxup::voxel::{density_ground_truth, splat_density, VoxelGrid};
use voxup::{Point, PointCloud};

#[derive(Parser, Debug)]
#[command(name = "voxup", version, about = "Voxel-based point cloud upsampling")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Upsample a point cloud by an arbitrary rate.
    Upsample(UpsampleArgs),
    /// Compare a point cloud with a reference (CD, HD, optional P2F).
    Evaluate(EvaluateArgs),
    /// Report sampling precision, missing rate and cell CD per sampler.
    Diagnose(DiagnoseArgs),
    /// Generate a synthetic point cloud and its mesh.
    Gen(GenArgs),
    /// Latent geometric-consistency loss between two clouds.
    GcLoss(GcLossArgs),
    /// Write the density grid of a point cloud.
    Density(DensityArgs),
}

/// Pipeline settings shared by several subcommands. Unset flags fall back to
/// the config file, then to the defaults.
#[derive(Args, Debug, Default)]
struct PipelineFlags {
    /// Upsampling rate r (any positive real).
    #[arg(long)]
    rate: Option<f64>,
    /// Voxel grid resolution R.
    #[arg(long)]
    resolution: Option<usize>,
    /// Cell sampler: topk, multinomial, mfps or mdfps.
    #[arg(long)]
    sampler: Option<String>,
    /// Candidate oversampling multiplier.
    #[arg(long)]
    multiplier: Option<f64>,
    /// Density backend: analytic or file:PATH.
    #[arg(long)]
    backend: Option<String>,
    /// Skip surface refinement.
    #[arg(long)]
    no_refine: bool,
    #[arg(long)]
    seed: Option<u64>,
    /// Points per patch.
    #[arg(long)]
    patch_size: Option<usize>,
    /// Key=value settings file mirroring the flags.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct UpsampleArgs {
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    output: Option<PathBuf>,
    /// Output format (defaults to the output file extension).
    #[arg(long)]
    format: Option<String>,
    #[command(flatten)]
    pipeline: PipelineFlags,
}

#[derive(Args, Debug)]
struct EvaluateArgs {
    /// Point cloud to evaluate.
    #[arg(long)]
    input: PathBuf,
    /// Ground-truth point cloud.
    #[arg(long)]
    reference: PathBuf,
    /// Ground-truth mesh (OBJ or PLY) for point-to-surface distances.
    #[arg(long)]
    mesh: Option<PathBuf>,
    /// Split polygons of the mesh into triangle fans instead of rejecting them.
    #[arg(long)]
    fan_triangulate: bool,
    /// Print key=value lines instead of a table.
    #[arg(long)]
    key_value: bool,
}

#[derive(Args, Debug)]
struct DiagnoseArgs {
    /// Use the built-in planted-outlier benchmark.
    #[arg(long, conflicts_with_all = ["input", "truth"])]
    planted: bool,
    /// Sparse input cloud whose density field is sampled.
    #[arg(long, requires = "truth")]
    input: Option<PathBuf>,
    /// Dense ground-truth cloud.
    #[arg(long)]
    truth: Option<PathBuf>,
    /// Comma-separated resampling multipliers.
    #[arg(long, value_delimiter = ',', default_value = "1,2,3,4")]
    multipliers: Vec<f64>,
    /// Comma-separated sampler methods (default: all).
    #[arg(long, value_delimiter = ',')]
    methods: Vec<String>,
    #[arg(long)]
    rate: Option<f64>,
    #[arg(long)]
    resolution: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Debug)]
struct GenArgs {
    /// sphere, torus or crease.
    #[arg(long)]
    shape: String,
    #[arg(long, default_value_t = 2048)]
    points: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Gaussian noise standard deviation (absolute units).
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    #[arg(long)]
    output: PathBuf,
    /// Also write the shape's mesh as OBJ.
    #[arg(long)]
    mesh: Option<PathBuf>,
    #[arg(long)]
    format: Option<String>,
}

#[derive(Args, Debug)]
struct GcLossArgs {
    /// Seed points (e.g. an upsampled cloud).
    #[arg(long)]
    input: PathBuf,
    /// Target surface points.
    #[arg(long)]
    reference: PathBuf,
    /// Patch size k.
    #[arg(long, default_value_t = DEFAULT_PATCH_SIZE)]
    k: usize,
    /// Encoder weights to load instead of the built-in ones.
    #[arg(long)]
    weights: Option<PathBuf>,
    /// Write the encoder weights used to this file.
    #[arg(long)]
    export_weights: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct DensityArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
    #[arg(long, default_value_t = 32)]
    resolution: usize,
    /// Box-smoothing radius in cells.
    #[arg(long, default_value_t = 0)]
    smoothing: usize,
    /// Point-count densities with hard occupancy instead of splatting.
    #[arg(long)]
    ground_truth: bool,
}

/// Maps an error to the process exit code: 2 for bad data, 1 for usage.
fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<voxup::Error>() {
        Some(e) if e.is_data_error() => 2,
        _ => 1,
    }
}

fn output_format(flag: Option<&str>, path: &Path) -> anyhow::Result<PointFormat> {
    Ok(match flag {
        Some(f) => f.parse()?,
        None => PointFormat::from_path(path),
    })
}

fn upsample(args: UpsampleArgs) -> anyhow::Result<()> {
    let mut cfg = PipelineConfig::default();
    let mut input = None;
    let mut output = None;
    let mut format = None;
    if let Some(path) = &args.pipeline.config {
        for (key, value) in read_config_file(path)? {
            match key.as_str() {
                "input" => input = Some(PathBuf::from(&value)),
                "output" => output = Some(PathBuf::from(&value)),
                "format" => format = Some(value),
                _ => {
                    if !cfg.set(&key, &value)? {
                        bail!("unknown config key `{key}` in {}", path.display());
                    }
                }
            }
        }
    }
    apply_flags(&mut cfg, &args.pipeline)?;
    let input = args.input.or(input).ok_or_else(|| anyhow!("missing --input"))?;
    let output = args.output.or(output).ok_or_else(|| anyhow!("missing --output"))?;
    let format = output_format(args.format.as_deref().or(format.as_deref()), &output)?;
    cfg.validate()?;

    let cloud = read_pointcloud(&input)?;
    let out = upsample_cloud(&cloud, &cfg)?;
    write_pointcloud(&output, &out, format)?;
    log::info!("wrote {} points to {}", out.len(), output.display());
    println!("{} -> {} points", cloud.len(), out.len());
    Ok(())
}

fn apply_flags(cfg: &mut PipelineConfig, f: &PipelineFlags) -> anyhow::Result<()> {
    let pairs = [
        ("rate", f.rate.map(|v| v.to_string())),
        ("resolution", f.resolution.map(|v| v.to_string())),
        ("sampler", f.sampler.clone()),
        ("multiplier", f.multiplier.map(|v| v.to_string())),
        ("backend", f.backend.clone()),
        ("seed", f.seed.map(|v| v.to_string())),
        ("patch-size", f.patch_size.map(|v| v.to_string())),
        ("no-refine", f.no_refine.then(|| "true".to_string())),
    ];
    for (key, value) in pairs {
        if let Some(v) = value {
            cfg.set(key, &v)?;
        }
    }
    Ok(())
}

fn evaluate(args: EvaluateArgs) -> anyhow::Result<()> {
    let pred = read_pointcloud(&args.input)?;
    let truth = read_pointcloud(&args.reference)?;
    let mesh = args
        .mesh
        .as_ref()
        .map(|m| read_mesh(m, args.fan_triangulate))
        .transpose()?;
    let report = MetricsReport::evaluate(&pred, &truth, mesh.as_ref())?;
    if args.key_value {
        print!("{}", report.to_key_values());
    } else {
        print!("{}", report.to_table());
    }
    Ok(())
}

fn print_diagnostics(rows: &[SamplingDiagnostics], methods: &[SamplerMethod]) {
    for method in methods {
        println!("method {method}");
        println!("  multiplier  precision  missing_rate  cell_cd(x1e3)");
        for d in rows.iter().filter(|d| d.method == *method) {
            println!(
                "  {:>10.3}  {:>9.4}  {:>12.4}  {:>13.4}",
                d.multiplier,
                d.precision,
                d.missing_rate,
                d.cell_cd * 1e3
            );
        }
    }
}

fn diagnose(args: DiagnoseArgs) -> anyhow::Result<()> {
    let methods: Vec<SamplerMethod> = if args.methods.is_empty() {
        SamplerMethod::ALL.to_vec()
    } else {
        args.methods.iter().map(|m| m.parse()).collect::<Result<_, _>>()?
    };
    if args.multipliers.is_empty() {
        bail!("no multipliers given");
    }
    let rows = if args.planted {
        let b = planted_benchmark(args.seed)?;
        let mut base = b.sampler_config(methods[0], 1.0, args.seed);
        if let Some(r) = args.rate {
            base.upsample_rate = r;
        }
        sampling_diagnostics(&b.field, &b.truth_points, b.n_input, &base, &methods, &args.multipliers)?
    } else {
        let (Some(input), Some(truth)) = (&args.input, &args.truth) else {
            bail!("diagnose needs --planted or both --input and --truth");
        };
        let input = read_pointcloud(input)?;
        let truth = read_pointcloud(truth)?.normalize()?;
        // Both clouds share the ground truth's frame.
        let frame = truth.normalization();
        let input = PointCloud::new(
            input
                .points()
                .iter()
                .map(|p| {
                    let q = frame.apply(p);
                    Point::new(q.x.clamp(-0.5, 0.5), q.y.clamp(-0.5, 0.5), q.z.clamp(-0.5, 0.5))
                })
                .collect(),
        )?;
        let grid = VoxelGrid::new(args.resolution.unwrap_or(32))?;
        let field = splat_density(&input, &grid, 0)?;
        let mut base = PipelineConfig::default().sampler;
        base.seed = args.seed;
        if let Some(r) = args.rate {
            base.upsample_rate = r;
        }
        sampling_diagnostics(&field, &truth, input.len(), &base, &methods, &args.multipliers)?
    };
    print_diagnostics(&rows, &methods);
    Ok(())
}

fn generate(args: GenArgs) -> anyhow::Result<()> {
    let shape: Shape = args.shape.parse()?;
    let (cloud, mesh) = generate_synthetic(shape, args.points, args.seed, args.noise)?;
    let format = output_format(args.format.as_deref(), &args.output)?;
    write_pointcloud(&args.output, &cloud, format)?;
    if let Some(path) = &args.mesh {
        write_obj(path, &mesh)?;
    }
    Ok(())
}

fn gc(args: GcLossArgs) -> anyhow::Result<()> {
    let encoder = match &args.weights {
        Some(path) => SurfaceEncoder::load(path)?,
        None => SurfaceEncoder::default(),
    };
    if let Some(path) = &args.export_weights {
        encoder.save(path)?;
    }
    let p = read_pointcloud(&args.input)?;
    let q = read_pointcloud(&args.reference)?;
    println!("gc_loss={:.9}", gc_loss(&p, &q, &encoder, args.k)?);
    Ok(())
}

fn density(args: DensityArgs) -> anyhow::Result<()> {
    let grid = VoxelGrid::new(args.resolution)?;
    let cloud = read_pointcloud(&args.input)?.normalize()?;
    let field = if args.ground_truth {
        density_ground_truth(&cloud, &grid)?
    } else {
        splat_density(&cloud, &grid, args.smoothing)?
    };
    write_density_grid(&args.output, &field)?;
    Ok(())
}

fn configure_threads() -> anyhow::Result<()> {
    let Ok(value) = std::env::var("VOXUP_THREADS") else {
        return Ok(());
    };
    let threads: usize = value
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| anyhow!("VOXUP_THREADS must be a positive integer, got `{value}`"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .context("configuring the thread pool")
}

fn run(cli: Cli) -> anyhow::Result<()> {
    configure_threads()?;
    match cli.command {
        Command::Upsample(a) => upsample(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Diagnose(a) => diagnose(a),
        Command::Gen(a) => generate(a),
        Command::GcLoss(a) => gc(a),
        Command::Density(a) => density(a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
