use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;

use contactgrasp::config::{parse_gammas, PipelineConfig};
use contactgrasp::decode::{propose, Representation};
use contactgrasp::geometry::RigidTransform;
use contactgrasp::mesh::{primitives, write_obj};
use contactgrasp::model::{oracle_predict, perturbed_oracle, PerturbParams, Tensor, TENSOR_MAGIC};
use contactgrasp::pipeline::{self, prepare_objects, ObjectAsset, CONFIG_FILE};
use contactgrasp::render::{read_sample, CameraIntrinsics, DepthImage, SampleMeta};
use contactgrasp::sim::{self, Predictor};
use contactgrasp::{Error, Result};

const EXIT_USAGE: u8 = 1;
const EXIT_IO: u8 = 2;
const EXIT_FORMAT: u8 = 3;

#[derive(Parser, Debug)]
#[command(
    name = "contactgrasp",
    version,
    about = "Grasp dataset generation, decoding and evaluation"
)]
struct Cli {
    /// Worker threads (default: all cores). Outputs do not depend on it.
    #[arg(long, global = true)]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Render a labeled dataset from a directory of meshes.
    Generate(GenerateArgs),
    /// Turn an output tensor into grasp proposals (JSON on stdout).
    Decode(DecodeArgs),
    /// Closed-loop evaluation at a single threshold.
    Eval(EvalArgs),
    /// Closed-loop evaluation over a list of thresholds.
    Sweep(SweepArgs),
    /// Write the ground-truth tensor of a dataset sample.
    Oracle(OracleArgs),
    /// Write the bundled primitive meshes as OBJ files.
    Primitives(PrimitivesArgs),
}

#[derive(Args, Debug)]
struct CommonArgs {
    /// TOML configuration file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args, Debug)]
struct GenerateArgs {
    #[arg(long)]
    meshes: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    images_per_pose: Option<usize>,
    #[arg(long)]
    max_poses: Option<usize>,
    #[arg(long)]
    max_grasps: Option<usize>,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args, Debug)]
struct DecodeArgs {
    /// Output tensor (GPTN file).
    #[arg(long)]
    tensor: PathBuf,
    /// Depth image: raw little-endian f32 or a one-channel GPTN tensor.
    #[arg(long)]
    depth: PathBuf,
    /// Intrinsics JSON, or a sample's meta.json.
    #[arg(long)]
    intrinsics: PathBuf,
    /// Camera-to-base transform JSON, or a sample's meta.json.
    #[arg(long)]
    extrinsics: PathBuf,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    peak_distance: Option<u32>,
    #[arg(long)]
    max_proposals: Option<usize>,
    #[arg(long)]
    representation: Option<Representation>,
    #[arg(long)]
    max_width: Option<f64>,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct EvalSource {
    /// Generated dataset; its config.toml is the base configuration.
    #[arg(long, conflicts_with = "meshes", required_unless_present = "meshes")]
    dataset: Option<PathBuf>,
    /// Mesh directory prepared on the fly.
    #[arg(long)]
    meshes: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// oracle, perturbed:SIGMA or file:DIR
    #[arg(long, default_value = "oracle")]
    predictor: Predictor,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    representation: Option<Representation>,
    /// Also write SVG charts.
    #[arg(long)]
    svg: bool,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[command(flatten)]
    source: EvalSource,
    #[arg(long)]
    gamma: Option<f64>,
    /// Write every trial's network input, depth and camera files below DIR.
    #[arg(long)]
    export_inputs: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[command(flatten)]
    source: EvalSource,
    /// start:stop:step or a comma-separated list.
    #[arg(long)]
    gammas: Option<String>,
}

#[derive(Args, Debug)]
struct OracleArgs {
    /// Sample directory of a generated dataset.
    #[arg(long)]
    sample: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Add Gaussian noise of this standard deviation to the quality channel.
    #[arg(long)]
    perturb: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Debug)]
struct PrimitivesArgs {
    #[arg(long)]
    out: PathBuf,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Io { .. } => EXIT_IO,
        Error::InvalidArgument(_) | Error::Config(_) => EXIT_USAGE,
        Error::Format { .. }
        | Error::Checksum { .. }
        | Error::NotWatertight { .. }
        | Error::Degenerate(_)
        | Error::DimensionMismatch { .. } => EXIT_FORMAT,
    }
}

fn base_config(file: Option<&Path>, fallback: Option<&Path>) -> Result<PipelineConfig> {
    match (file, fallback) {
        (Some(f), _) => PipelineConfig::load(f),
        (None, Some(f)) if f.exists() => PipelineConfig::load(f),
        _ => Ok(PipelineConfig::default()),
    }
}

fn finish(mut config: PipelineConfig, seed: Option<u64>) -> Result<PipelineConfig> {
    if let Some(s) = seed {
        config.seed = s;
    }
    config.validate()?;
    Ok(config)
}

fn cmd_generate(a: GenerateArgs) -> Result<()> {
    let mut c = base_config(a.common.config.as_deref(), None)?;
    if let Some(n) = a.images_per_pose {
        c.render.images_per_pose = n;
    }
    if let Some(n) = a.max_poses {
        c.stable.max_poses = n;
    }
    if let Some(n) = a.max_grasps {
        c.sampler.max_grasps = n;
    }
    let c = finish(c, a.common.seed)?;
    let m = pipeline::generate(&c, &a.meshes, &a.out)?;
    let t = &m.totals;
    println!(
        "{} objects, {} poses, {} images, {} grasp entries ({} positive), {} failed",
        t.objects,
        t.poses,
        t.images,
        t.grasp_entries,
        t.positive_entries,
        m.failures.len()
    );
    Ok(())
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let bytes = fs::read(path).map_err(|e| Error::Io {
        path: path.into(),
        source: e,
    })?;
    serde_json::from_slice(&bytes).map_err(|e| Error::Format {
        path: path.into(),
        offset: json_offset(&bytes, &e),
        message: e.to_string(),
    })
}

/// Byte offset of a serde_json error position.
fn json_offset(bytes: &[u8], e: &serde_json::Error) -> u64 {
    let line_start: usize = bytes
        .split_inclusive(|b| *b == b'\n')
        .take(e.line().saturating_sub(1))
        .map(<[u8]>::len)
        .sum();
    (line_start + e.column().saturating_sub(1)) as u64
}

fn sample_meta(path: &Path) -> Option<SampleMeta> {
    let bytes = fs::read(path).ok()?;
    serde_json::from_slice(&bytes).ok()
}

fn read_intrinsics(path: &Path) -> Result<CameraIntrinsics> {
    let k = match sample_meta(path) {
        Some(meta) => meta.intrinsics,
        None => read_json(path)?,
    };
    k.validate()?;
    Ok(k)
}

fn read_extrinsics(path: &Path) -> Result<RigidTransform> {
    match sample_meta(path) {
        Some(meta) => Ok(RigidTransform::from(&meta.camera_pose.pose)),
        None => read_json(path),
    }
}

fn read_depth(path: &Path, k: &CameraIntrinsics) -> Result<DepthImage> {
    let bytes = fs::read(path).map_err(|e| Error::Io {
        path: path.into(),
        source: e,
    })?;
    let data: Vec<f32> = if bytes.starts_with(TENSOR_MAGIC) {
        let t = Tensor::from_bytes(&bytes, path)?;
        if t.channels != 1 {
            return Err(Error::Format {
                path: path.into(),
                offset: 4,
                message: format!("depth tensor has {} channels, expected 1", t.channels),
            });
        }
        t.data.iter().map(|v| *v as f32).collect()
    } else {
        let expected = 4 * k.pixel_count();
        if bytes.len() != expected {
            return Err(Error::Format {
                path: path.into(),
                offset: bytes.len().min(expected) as u64,
                message: format!("expected {expected} bytes of f32 depth, found {}", bytes.len()),
            });
        }
        bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect()
    };
    DepthImage::new(k.width, k.height, data)
}

fn cmd_decode(a: DecodeArgs) -> Result<()> {
    let mut c = base_config(a.config.as_deref(), None)?;
    if let Some(g) = a.gamma {
        c.decode.gamma = g;
    }
    if let Some(d) = a.peak_distance {
        c.decode.peak_distance = d;
    }
    if let Some(j) = a.max_proposals {
        c.decode.max_proposals = j;
    }
    if let Some(r) = a.representation {
        c.decode.representation = r;
    }
    if let Some(w) = a.max_width {
        c.gripper.max_width = w;
    }
    let c = finish(c, None)?;
    let k = read_intrinsics(&a.intrinsics)?;
    let extrinsics = read_extrinsics(&a.extrinsics)?.to_pose()?;
    let tensor = Tensor::read(&a.tensor)?;
    let depth = read_depth(&a.depth, &k)?;
    let report = propose(
        &tensor,
        &k,
        &depth,
        &extrinsics,
        &c.decode.nms(),
        c.gripper.max_width,
        c.decode.representation,
    )?;
    for s in &report.skipped {
        log::warn!("pixel ({}, {}) skipped: {}", s.pixel[0], s.pixel[1], s.reason);
    }
    let json = serde_json::to_string_pretty(&report.proposals).expect("proposals serialize");
    let mut stdout = std::io::stdout().lock();
    match writeln!(stdout, "{json}") {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(Error::Io {
            path: PathBuf::from("<stdout>"),
            source: e,
        }),
        _ => Ok(()),
    }
}

fn eval_setup(s: &EvalSource) -> Result<(PipelineConfig, Vec<ObjectAsset>)> {
    let dataset_config = s.dataset.as_ref().map(|d| d.join(CONFIG_FILE));
    let mut c = base_config(s.common.config.as_deref(), dataset_config.as_deref())?;
    if let Some(t) = s.trials {
        c.eval.trials_per_object = t;
    }
    if let Some(r) = s.representation {
        c.decode.representation = r;
    }
    let c = finish(c, s.common.seed)?;
    let objects = match (&s.dataset, &s.meshes) {
        (Some(d), _) => pipeline::load_dataset_objects(d)?,
        (None, Some(m)) => prepare_objects(m, &c)?.0,
        (None, None) => unreachable!("clap requires a source"),
    };
    Ok((c, objects))
}

fn cmd_eval(a: EvalArgs) -> Result<()> {
    let (mut c, objects) = eval_setup(&a.source)?;
    if let Some(g) = a.gamma {
        c.decode.gamma = g;
        c.validate()?;
    }
    let out = &a.source.out;
    sim::emit_config(&c, out)?;
    let (report, timing) = sim::run_trials(&objects, &a.source.predictor, &c, a.export_inputs.as_deref())?;
    sim::emit_report(&report, out, a.source.svg)?;
    sim::emit_timing(&timing, out)?;
    let o = &report.overall;
    println!(
        "{} trials, {} successes, success rate {:.4}, {} errors",
        o.trials, o.successes, o.success_rate, o.errors
    );
    Ok(())
}

fn cmd_sweep(a: SweepArgs) -> Result<()> {
    let (mut c, objects) = eval_setup(&a.source)?;
    if let Some(g) = &a.gammas {
        c.eval.gammas = parse_gammas(g)?;
        c.validate()?;
    }
    let out = &a.source.out;
    sim::emit_config(&c, out)?;
    let start = Instant::now();
    let sweep = sim::threshold_sweep(&objects, &a.source.predictor, &c, &c.eval.gammas)?;
    sim::emit_sweep(&sweep, out, a.source.svg)?;
    let timing = sim::Timing {
        trials: sweep.trials.len(),
        wall_s: start.elapsed().as_secs_f64(),
        ..sim::Timing::default()
    };
    sim::emit_timing(&timing, out)?;
    for r in &sweep.rows {
        println!(
            "gamma {:.2}: object success {:.4}, mean proposals {:.2}",
            r.gamma, r.object_success, r.mean_proposals
        );
    }
    Ok(())
}

fn cmd_oracle(a: OracleArgs) -> Result<()> {
    let sample = read_sample(&a.sample)?;
    let tensor = match a.perturb {
        None => oracle_predict(&sample.map),
        Some(sigma) => {
            let p = PerturbParams {
                quality_sigma: sigma,
                ..PerturbParams::default()
            };
            perturbed_oracle(&sample.map, &p, a.seed, false)?
        }
    };
    tensor.write(&a.out)
}

fn cmd_primitives(a: PrimitivesArgs) -> Result<()> {
    fs::create_dir_all(&a.out).map_err(|e| Error::Io {
        path: a.out.clone(),
        source: e,
    })?;
    for (name, data) in primitives::bundled() {
        write_obj(&data.build()?, a.out.join(format!("{name}.obj")))?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate(a) => cmd_generate(a),
        Command::Decode(a) => cmd_decode(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Oracle(a) => cmd_oracle(a),
        Command::Primitives(a) => cmd_primitives(a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.jobs {
        if n == 0 {
            eprintln!("error: --jobs must be at least 1");
            return ExitCode::from(EXIT_USAGE);
        }
        pool = pool.num_threads(n);
    }
    let pool = match pool.build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_USAGE);
        }
    };
    match pool.install(|| run(cli)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
