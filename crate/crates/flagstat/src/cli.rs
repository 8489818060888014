//! Command-line surface over the library.
//!
//! Every subcommand is a thin shell: parse files, call the library, print or
//! write the result. Exit codes: `0` success, `2` input or configuration
//! error, `3` numerical failure.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::averaging::{
    flag_mean, flag_median, AverageReport, IrlsConfig, MeanConfig, MeanInit, MedianInit, Method,
};
use crate::error::{Error, Result};
use crate::flag::{chordal_distance, FlagPoint, FlagSignature, WeightVector};
use crate::io::{read_flag_set, read_motion_set, read_weights, write_flag_set, write_motion_set, write_text_atomic};
use crate::motion::{
    average_motions, average_rotations, pose_error, seeded_motion_config, ContractionParam,
    PoseErrorConfig, RigidMotion,
};
use crate::numerics::RngStream;
use crate::plot::{line_chart, Series};
use crate::stiefel::TrustRegionConfig;
use crate::synth::{run_experiment, ExperimentConfig, ExperimentKind};

#[derive(Parser)]
#[command(
    name = "flagstat",
    version,
    about = "Averaging on flag manifolds: chordal flag-mean/-median and SE(3) motion averaging"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Average a flag set with the chordal flag-mean.
    Mean(MeanArgs),
    /// Average a flag set with the outlier-robust chordal flag-median.
    Median(MedianArgs),
    /// Print the chordal distance between two single-point flag files.
    Dist(DistArgs),
    /// Average a motion set through the flag embedding.
    MotionAvg(MotionAvgArgs),
    /// Average the rotation parts of a motion set (translations ignored).
    RotationAvg(RotationAvgArgs),
    /// Run a benchmark sweep and write its result table as CSV.
    Bench(BenchArgs),
    /// Check that a data file parses and validates.
    Validate(ValidateArgs),
}

#[derive(Args)]
struct MeanArgs {
    /// Flag-set JSON file.
    input: PathBuf,
    /// Weights file: a bare JSON array, one positive weight per point.
    #[arg(long)]
    weights: Option<PathBuf>,
    /// Seed of the random initialization and solver streams.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Gradient-norm stopping tolerance.
    #[arg(long)]
    tol: Option<f64>,
    /// Outer iteration cap.
    #[arg(long = "max-iter")]
    max_iter: Option<usize>,
    /// Output path of the centroid flag-set file.
    #[arg(long, default_value = "centroid.json")]
    out: PathBuf,
}

#[derive(Args)]
struct MedianArgs {
    /// Flag-set JSON file.
    input: PathBuf,
    /// Weights file: a bare JSON array, one positive weight per point.
    #[arg(long)]
    weights: Option<PathBuf>,
    /// Seed of the random initialization and solver streams.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Weight clamp of the reweighting loop.
    #[arg(long)]
    epsilon: Option<f64>,
    /// Objective-change stopping tolerance.
    #[arg(long)]
    tol: Option<f64>,
    /// Reweighting iteration cap.
    #[arg(long = "max-iter")]
    max_iter: Option<usize>,
    /// Output path of the centroid flag-set file.
    #[arg(long, default_value = "centroid.json")]
    out: PathBuf,
}

#[derive(Args)]
struct DistArgs {
    /// Flag-set JSON file holding exactly one point.
    a: PathBuf,
    /// Flag-set JSON file holding exactly one point.
    b: PathBuf,
}

#[derive(Args)]
struct MotionAvgArgs {
    /// Motion-set JSON file.
    input: PathBuf,
    /// Weights file: a bare JSON array, one positive weight per motion.
    #[arg(long)]
    weights: Option<PathBuf>,
    /// Distance exponent: 2 averages squared distances, 1 is the robust median.
    #[arg(long, default_value_t = 2)]
    q: u8,
    /// Contraction scale: how many scene units of translation weigh as much
    /// as a radian of rotation.
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    /// Translation weight of the reported pose errors.
    #[arg(long = "lambda-t", default_value_t = 1.0)]
    lambda_t: f64,
    /// Seed of the solver streams.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output path of the averaged motion (a one-motion set).
    #[arg(long, default_value = "motion-centroid.json")]
    out: PathBuf,
}

#[derive(Args)]
struct RotationAvgArgs {
    /// Motion-set JSON file; only the rotation blocks are used.
    input: PathBuf,
    /// Weights file: a bare JSON array, one positive weight per motion.
    #[arg(long)]
    weights: Option<PathBuf>,
    /// Distance exponent: 2 averages squared distances, 1 is the robust median.
    #[arg(long, default_value_t = 2)]
    q: u8,
    /// Seed of the solver streams.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output path of the averaged rotation (a one-motion set, zero translation).
    #[arg(long, default_value = "rotation-centroid.json")]
    out: PathBuf,
}

#[derive(Args)]
struct BenchArgs {
    /// Experiment configuration JSON file.
    #[arg(long, conflicts_with = "kind")]
    config: Option<PathBuf>,
    /// Built-in sweep: flag-noise-sweep, flag-outlier-sweep, init-ablation,
    /// motion-noise-sweep, motion-outlier-sweep, lambda-ablation or
    /// rotation-noise-sweep.
    #[arg(long)]
    kind: Option<String>,
    /// Trials per grid cell.
    #[arg(long)]
    trials: Option<usize>,
    /// Base seed of all experiment streams.
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated methods: flag-mean, flag-median, euclidean-mean, gr-mean.
    #[arg(long, value_delimiter = ',')]
    methods: Option<Vec<String>>,
    /// Record wall-clock per solve (makes the CSV non-reproducible).
    #[arg(long)]
    timing: bool,
    /// Output path of the CSV result table.
    #[arg(long, default_value = "results.csv")]
    out: PathBuf,
    /// Also render the mean-error curves (one series per method) as SVG.
    #[arg(long)]
    plot: Option<PathBuf>,
}

#[derive(Args)]
struct ValidateArgs {
    /// A flag-set, motion-set or weights JSON file; the format is detected.
    input: PathBuf,
    /// Expected flag signature as `d1,d2,...:ambient`, e.g. `1,2,3:10`.
    #[arg(long)]
    signature: Option<String>,
}

/// Parse arguments from the process environment, run, and return the exit
/// code: `0` success, `2` input error, `3` numerical failure.
pub fn run() -> i32 {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_input_error() {
                2
            } else {
                3
            }
        }
    }
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Mean(args) => cmd_mean(args),
        Command::Median(args) => cmd_median(args),
        Command::Dist(args) => cmd_dist(args),
        Command::MotionAvg(args) => cmd_motion_avg(args),
        Command::RotationAvg(args) => cmd_rotation_avg(args),
        Command::Bench(args) => cmd_bench(args),
        Command::Validate(args) => cmd_validate(args),
    }
}

/// Report printed to stdout by the averaging subcommands.
#[derive(Serialize)]
struct SolveReport {
    method: String,
    objective: f64,
    iterations: usize,
}

impl SolveReport {
    fn from_average(report: &AverageReport) -> Self {
        SolveReport {
            method: report.method.to_string(),
            objective: report.final_objective(),
            iterations: report.iterations,
        }
    }
}

/// Report printed to stdout by the motion subcommands.
#[derive(Serialize)]
struct MotionReport {
    method: String,
    objective: f64,
    iterations: usize,
    lambda: f64,
    lambda_t: f64,
    /// Pose error of every input motion to the centroid.
    pose_errors: Vec<f64>,
}

fn print_json<T: Serialize>(value: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn load_weights(path: &Option<PathBuf>, n: usize) -> Result<WeightVector> {
    match path {
        Some(p) => {
            let weights = read_weights(p)?;
            if weights.len() != n {
                return Err(Error::WeightLengthMismatch { points: n, weights: weights.len() });
            }
            Ok(weights)
        }
        None => WeightVector::uniform(n),
    }
}

fn cmd_mean(args: MeanArgs) -> Result<()> {
    let points = read_flag_set(&args.input)?;
    let weights = load_weights(&args.weights, points.len())?;
    let mut trust_region = TrustRegionConfig {
        rng: RngStream::new(args.seed, 0),
        ..TrustRegionConfig::default()
    };
    if let Some(tol) = args.tol {
        trust_region.gradient_norm_tolerance = tol;
    }
    if let Some(max) = args.max_iter {
        trust_region.max_outer_iterations = max;
    }
    let report = flag_mean(&points, &weights, &MeanConfig { init: MeanInit::Random, trust_region })?;
    write_flag_set(&args.out, std::slice::from_ref(&report.centroid))?;
    print_json(&SolveReport::from_average(&report))
}

fn cmd_median(args: MedianArgs) -> Result<()> {
    let points = read_flag_set(&args.input)?;
    let weights = load_weights(&args.weights, points.len())?;
    let mut config = IrlsConfig {
        init: MedianInit::UnweightedMean,
        trust_region: TrustRegionConfig {
            rng: RngStream::new(args.seed, 0),
            ..TrustRegionConfig::default()
        },
        ..IrlsConfig::default()
    };
    if let Some(epsilon) = args.epsilon {
        config.epsilon = epsilon;
    }
    if let Some(tol) = args.tol {
        config.tolerance = tol;
    }
    if let Some(max) = args.max_iter {
        config.max_iterations = max;
    }
    let report = flag_median(&points, &weights, &config)?;
    write_flag_set(&args.out, std::slice::from_ref(&report.centroid))?;
    print_json(&SolveReport::from_average(&report))
}

fn single_point(path: &Path) -> Result<FlagPoint> {
    let mut points = read_flag_set(path)?;
    if points.len() != 1 {
        return Err(Error::InvalidInput(format!(
            "{} holds {} points, expected exactly one",
            path.display(),
            points.len()
        )));
    }
    Ok(points.remove(0))
}

fn cmd_dist(args: DistArgs) -> Result<()> {
    let a = single_point(&args.a)?;
    let b = single_point(&args.b)?;
    println!("{:.16e}", chordal_distance(&a, &b)?);
    Ok(())
}

fn cmd_motion_avg(args: MotionAvgArgs) -> Result<()> {
    let motions = read_motion_set(&args.input)?;
    let weights = load_weights(&args.weights, motions.len())?;
    let lambda = ContractionParam::new(args.lambda)?;
    let score = PoseErrorConfig::new(args.lambda_t)?;
    let config = seeded_motion_config(args.q, lambda, RngStream::new(args.seed, 0));
    let average = average_motions(&motions, &weights, &config)?;
    write_motion_set(&args.out, std::slice::from_ref(&average.motion))?;
    print_json(&MotionReport {
        method: average.report.method.to_string(),
        objective: average.report.final_objective(),
        iterations: average.report.iterations,
        lambda: args.lambda,
        lambda_t: args.lambda_t,
        pose_errors: motions.iter().map(|m| pose_error(m, &average.motion, score)).collect(),
    })
}

fn cmd_rotation_avg(args: RotationAvgArgs) -> Result<()> {
    let motions = read_motion_set(&args.input)?;
    let weights = load_weights(&args.weights, motions.len())?;
    let rotations: Vec<_> = motions.iter().map(|m| *m.rotation()).collect();
    let config = seeded_motion_config(
        args.q,
        ContractionParam::default(),
        RngStream::new(args.seed, 0),
    );
    let average = average_rotations(&rotations, &weights, &config)?;
    let centroid = RigidMotion::new(average.rotation, nalgebra::Vector3::zeros())?;
    write_motion_set(&args.out, std::slice::from_ref(&centroid))?;
    let score = PoseErrorConfig::default();
    print_json(&MotionReport {
        method: average.report.method.to_string(),
        objective: average.report.final_objective(),
        iterations: average.report.iterations,
        lambda: 1.0,
        lambda_t: 1.0,
        pose_errors: rotations
            .iter()
            .map(|r| {
                let motion = RigidMotion::new(*r, nalgebra::Vector3::zeros())
                    .expect("inputs were validated on read");
                pose_error(&motion, &centroid, score)
            })
            .collect(),
    })
}

fn parse_method(name: &str) -> Result<Method> {
    serde_json::from_value(serde_json::Value::String(name.to_string())).map_err(|_| {
        Error::Config(format!(
            "unknown method {name:?}; expected flag-mean, flag-median, euclidean-mean or gr-mean"
        ))
    })
}

fn bench_config(args: &BenchArgs) -> Result<ExperimentConfig> {
    let mut config = match (&args.config, &args.kind) {
        (Some(path), _) => {
            let text = std::fs::read_to_string(path)?;
            serde_json::from_str::<ExperimentConfig>(&text)?
        }
        (None, Some(name)) => {
            let kind = ExperimentKind::preset(name).ok_or_else(|| {
                Error::Config(format!("unknown sweep kind {name:?}; see --help for the list"))
            })?;
            ExperimentConfig {
                methods: kind.default_methods(),
                kind,
                trials: 10,
                base_seed: 0,
                timing: false,
            }
        }
        (None, None) => {
            return Err(Error::Config("either --config or --kind is required".into()));
        }
    };
    if let Some(trials) = args.trials {
        config.trials = trials;
    }
    if let Some(seed) = args.seed {
        config.base_seed = seed;
    }
    if let Some(names) = &args.methods {
        config.methods = names.iter().map(|n| parse_method(n)).collect::<Result<_>>()?;
    }
    if args.timing {
        config.timing = true;
    }
    Ok(config)
}

/// Thread cap from `FLAGSTAT_THREADS`; unset means the rayon default.
fn thread_cap() -> Result<Option<usize>> {
    match std::env::var("FLAGSTAT_THREADS") {
        Ok(raw) => match raw.parse::<usize>() {
            Ok(n) if n >= 1 => Ok(Some(n)),
            _ => Err(Error::Config(format!(
                "FLAGSTAT_THREADS must be a positive integer, got {raw:?}"
            ))),
        },
        Err(_) => Ok(None),
    }
}

fn cmd_bench(args: BenchArgs) -> Result<()> {
    let config = bench_config(&args)?;
    let table = match thread_cap()? {
        Some(threads) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .map_err(|e| Error::Config(format!("cannot build thread pool: {e}")))?;
            pool.install(|| run_experiment(&config))?
        }
        None => run_experiment(&config)?,
    };
    write_text_atomic(&args.out, &table.to_csv())?;

    let summary = table.aggregate();
    for group in &summary {
        println!(
            "{} {} mean_error={:.16e} std_error={:.16e} trials={} failures={}",
            group.cell, group.method, group.mean_error, group.std_error, group.trials,
            group.failures
        );
    }

    if let Some(plot_path) = &args.plot {
        let mut series: Vec<Series> = Vec::new();
        for group in &summary {
            let label = group.method.to_string();
            let position = series.iter().position(|s| s.label == label);
            let entry = match position {
                Some(i) => &mut series[i],
                None => {
                    series.push(Series { label, points: Vec::new() });
                    let last = series.len() - 1;
                    &mut series[last]
                }
            };
            entry.points.push((group.cell_index as f64, group.mean_error));
        }
        let svg = line_chart(config.kind.name(), "grid cell", "mean error", &series);
        write_text_atomic(plot_path, &svg)?;
    }
    Ok(())
}

fn parse_signature(text: &str) -> Result<FlagSignature> {
    let (dims_part, ambient_part) = text.split_once(':').ok_or_else(|| {
        Error::InvalidInput(format!("signature {text:?} is not of the form d1,d2,...:ambient"))
    })?;
    let dims = dims_part
        .split(',')
        .map(|d| d.trim().parse::<usize>())
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|_| Error::InvalidInput(format!("cannot parse dimensions in {text:?}")))?;
    let ambient = ambient_part
        .trim()
        .parse::<usize>()
        .map_err(|_| Error::InvalidInput(format!("cannot parse ambient dimension in {text:?}")))?;
    FlagSignature::new(dims, ambient)
}

fn cmd_validate(args: ValidateArgs) -> Result<()> {
    let text = std::fs::read_to_string(&args.input)?;
    let value: serde_json::Value = serde_json::from_str(&text)?;
    let expected = args.signature.as_deref().map(parse_signature).transpose()?;
    match &value {
        serde_json::Value::Object(map) if map.contains_key("motions") => {
            if expected.is_some() {
                return Err(Error::InvalidInput(
                    "--signature applies to flag sets, not motion sets".into(),
                ));
            }
            let motions = read_motion_set(&args.input)?;
            println!("ok: motion set with {} motions", motions.len());
        }
        serde_json::Value::Object(_) => {
            let points = read_flag_set(&args.input)?;
            let signature = points[0].signature();
            if let Some(expected) = expected {
                if signature != &expected {
                    return Err(Error::SignatureMismatch(format!(
                        "file is on {signature}, expected {expected}"
                    )));
                }
            }
            println!("ok: flag set with {} points on {signature}", points.len());
        }
        serde_json::Value::Array(_) => {
            let weights = read_weights(&args.input)?;
            println!("ok: weights for {} points", weights.len());
        }
        _ => {
            return Err(Error::InvalidInput(
                "file is neither a flag set, a motion set nor a weights array".into(),
            ));
        }
    }
    Ok(())
}
