use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::info;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use curvereg::bench::{self, diameter, ExperimentConfig};
use curvereg::differential::{Curve, SurfaceSamples};
use curvereg::error::{BenchError, IoError, MatchingError, RegistrationError};
use curvereg::io::{self, load_curve, load_index, load_model, save_index, save_result, write_curve, write_ply};
use curvereg::matching::{build_pair_index, PairIndex, PairIndexConfig};
use curvereg::registration::{
    register_curve_to_curve, register_curve_to_surface, register_surface_to_surface, RansacParams,
    RegistrationResult,
};
use curvereg::synth::{blob_mesh, trace_curves, BlobKind};

#[derive(Parser)]
#[command(name = "curvereg", version, about = "Global registration of curves and surfaces")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build the pair index of a surface.
    Prep(PrepArgs),
    /// Register a curve onto a surface.
    Register(RegisterArgs),
    /// Register a curve onto another curve.
    RegisterCc(SameKindArgs),
    /// Register two point clouds through estimated normals.
    RegisterSs(SameKindArgs),
    /// Run a synthetic benchmark and write one CSV row per trial.
    Bench {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Write a procedural model and curves traced on it.
    Synth {
        #[arg(long, value_parser = parse_kind, default_value = "bumpy")]
        kind: BlobKind,
        #[arg(long, default_value_t = 36)]
        frequency: usize,
        #[arg(long, default_value_t = 6)]
        segments: usize,
        #[arg(long, default_value_t = 50.0)]
        length: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        mesh: PathBuf,
        #[arg(long)]
        curve: PathBuf,
    },
}

#[derive(Args)]
struct PrepArgs {
    surface: PathBuf,
    #[arg(short, long)]
    output: PathBuf,
    #[arg(long, default_value_t = curvereg::matching::DEFAULT_SUBSAMPLE_SIZE)]
    subsample: usize,
    /// Shortest indexed baseline; 5% of the diameter by default.
    #[arg(long)]
    dmin: Option<f64>,
    #[arg(long)]
    dmax: Option<f64>,
    /// Neighbourhood for normal estimation when the file has none.
    #[arg(long, default_value_t = curvereg::differential::DEFAULT_NORMAL_NEIGHBORS)]
    neighbors: usize,
}

#[derive(Args)]
struct SearchArgs {
    #[arg(long, default_value_t = 5.0)]
    max_time: f64,
    #[arg(long, default_value_t = 0.95)]
    target_inliers: f64,
    /// Expected point noise; widens the matching tolerances.
    #[arg(long, default_value_t = 0.0)]
    sigma: f64,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Half-width of the tangent smoothing window, in samples.
    #[arg(long, default_value_t = 0)]
    window: usize,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Args)]
struct RegisterArgs {
    #[arg(long)]
    curve: PathBuf,
    #[arg(long, conflicts_with = "surface", required_unless_present = "surface")]
    index: Option<PathBuf>,
    #[arg(long)]
    surface: Option<PathBuf>,
    #[arg(long, default_value_t = curvereg::differential::DEFAULT_NORMAL_NEIGHBORS)]
    neighbors: usize,
    #[command(flatten)]
    search: SearchArgs,
}

#[derive(Args)]
struct SameKindArgs {
    #[arg(long)]
    source: PathBuf,
    #[arg(long)]
    target: PathBuf,
    #[arg(long, default_value_t = curvereg::differential::DEFAULT_NORMAL_NEIGHBORS)]
    neighbors: usize,
    #[command(flatten)]
    search: SearchArgs,
}

fn parse_kind(s: &str) -> Result<BlobKind, String> {
    match s {
        "bumpy" => Ok(BlobKind::Bumpy),
        "knobby" => Ok(BlobKind::Knobby),
        _ => Err(format!("unknown model kind {s:?} (bumpy, knobby)")),
    }
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error(transparent)]
    Io(#[from] IoError),
    #[error(transparent)]
    Bench(#[from] BenchError),
    #[error(transparent)]
    Matching(#[from] MatchingError),
    #[error(transparent)]
    Registration(#[from] RegistrationError),
    #[error("{0}")]
    Other(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Io(e) | CliError::Bench(BenchError::Io(e)) if e.is_parse() => 2,
            CliError::Registration(RegistrationError::NoHypothesisFound)
            | CliError::Bench(BenchError::Registration(RegistrationError::NoHypothesisFound)) => 3,
            _ => 1,
        }
    }
}

fn other(e: impl std::fmt::Display) -> CliError {
    CliError::Other(e.to_string())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("curvereg: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::Prep(a) => prep(a),
        Command::Register(a) => register(a),
        Command::RegisterCc(a) => {
            let source = oriented_curve(&a.source, a.search.window)?;
            let target = oriented_curve(&a.target, a.search.window)?;
            let d = diameter(&target.points);
            let res = register_curve_to_curve(&source, &target, &search_params(&a.search, d)?)?;
            report(&a.search.output, &res)
        }
        Command::RegisterSs(a) => {
            let source = oriented_surface(&a.source, a.neighbors)?;
            let target = oriented_surface(&a.target, a.neighbors)?;
            let d = diameter(&target.points);
            let res = register_surface_to_surface(&source, &target, &search_params(&a.search, d)?)?;
            report(&a.search.output, &res)
        }
        Command::Bench { config, output } => {
            let cfg = match config {
                Some(p) => ExperimentConfig::load(&p)?,
                None => ExperimentConfig::default(),
            };
            let report = bench::run_benchmark(&cfg)?;
            let file = File::create(&output).map_err(other)?;
            bench::write_csv(BufWriter::new(file), &report.records)?;
            let failed = report.records.iter().filter(|r| r.failed()).count();
            info!("{} trials, {failed} without a pose", report.records.len());
            Ok(())
        }
        Command::Synth {
            kind,
            frequency,
            segments,
            length,
            seed,
            mesh,
            curve,
        } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut model = blob_mesh(kind, frequency, &mut rng);
            model.points = bench::normalize_diameter(&model.points, bench::DEFAULT_DIAMETER)?;
            let curves = trace_curves(&model, segments, length, &mut rng);
            write_ply(&mesh, &model)?;
            write_curve(&curve, &curves)?;
            Ok(())
        }
    }
}

fn surface_with_normals(path: &Path, k: usize) -> Result<SurfaceSamples, CliError> {
    let mut s = load_model(path)?;
    if s.normals.is_none() {
        s.estimate_normals(k).map_err(other)?;
    }
    Ok(s)
}

fn prep(a: PrepArgs) -> Result<(), CliError> {
    let surface = surface_with_normals(&a.surface, a.neighbors)?;
    let mut cfg = PairIndexConfig::for_diameter(diameter(&surface.points));
    cfg.subsample_size = a.subsample;
    cfg.d_min = a.dmin.unwrap_or(cfg.d_min);
    cfg.d_max = a.dmax.unwrap_or(cfg.d_max);
    let index = build_pair_index(&surface, &cfg)?;
    info!("{} records over {} points", index.records().len(), index.points.len());
    save_index(&a.output, &index)?;
    Ok(())
}

fn register(a: RegisterArgs) -> Result<(), CliError> {
    let index: PairIndex = match (&a.index, &a.surface) {
        (Some(p), _) => load_index(p)?,
        (None, Some(p)) => {
            let surface = surface_with_normals(p, a.neighbors)?;
            let mut index = build_pair_index(&surface, &PairIndexConfig::for_diameter(diameter(&surface.points)))?;
            if let Ok(mesh) = io::load_mesh(p) {
                index.scoring_points = mesh.points;
            }
            index
        }
        (None, None) => return Err(other("either --index or --surface is required")),
    };
    let curve = oriented_curve(&a.curve, a.search.window)?;
    let d = diameter(&index.scoring_points);
    let res = register_curve_to_surface(&curve, &index, &search_params(&a.search, d)?)?;
    report(&a.search.output, &res)
}

fn oriented_curve(path: &Path, window: usize) -> Result<curvereg::differential::OrientedCloud, CliError> {
    let mut c: Curve = load_curve(path)?;
    c.estimate_tangents(window).map_err(other)?;
    c.oriented().ok_or_else(|| other("curve has no tangents"))
}

fn oriented_surface(path: &Path, k: usize) -> Result<curvereg::differential::OrientedCloud, CliError> {
    surface_with_normals(path, k)?
        .oriented()
        .ok_or_else(|| other("surface has no normals"))
}

fn search_params(a: &SearchArgs, diameter: f64) -> Result<RansacParams, CliError> {
    let mut p = RansacParams::for_diameter(diameter, a.sigma);
    p.max_time = a.max_time;
    p.target_inlier_ratio = a.target_inliers;
    p.seed = a.seed;
    if let Some(eps) = a.eps {
        p.tolerances.eps = eps;
    }
    if let Some(t) = a.threshold {
        p.inlier_threshold = t;
    } else if a.sigma > 0.0 {
        p.inlier_threshold = p.inlier_threshold.max(1.5 * a.sigma);
    }
    Ok(p)
}

fn report(path: &Path, res: &RegistrationResult) -> Result<(), CliError> {
    save_result(path, res)?;
    println!(
        "{} after {} hypotheses, inlier ratio {:.3}, {:.3} s",
        res.terminated_by, res.hypotheses_tested, res.inlier_ratio, res.elapsed
    );
    Ok(())
}
