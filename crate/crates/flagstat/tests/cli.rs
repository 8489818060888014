//! End-to-end tests of the `flagstat` binary: every subcommand is exercised
//! through real files and its output values are compared against direct
//! library calls.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use flagstat::averaging::{flag_mean, MeanConfig, MeanInit};
use flagstat::error::Error;
use flagstat::flag::{chordal_distance, FlagPoint, FlagSignature, WeightVector};
use flagstat::io::{read_flag_set, read_motion_set, write_flag_set, write_motion_set, write_text_atomic};
use flagstat::motion::RigidMotion;
use flagstat::numerics::{normal_matrix, thin_qr, Matrix, RngStream};
use flagstat::stiefel::{flag_mean_problem, StiefelProblem, TrustRegionConfig};
use flagstat::synth::{gen_flag_cluster, gen_motion_cluster, FlagClusterSpec, MotionClusterSpec};
use nalgebra::{Matrix3, Vector3};
use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_flagstat"))
}

/// Run the binary inside `dir` so default output paths stay in the sandbox.
fn run_in(dir: &Path, args: &[&str]) -> Output {
    let mut cmd = bin();
    cmd.current_dir(dir).args(args);
    cmd.output().expect("binary spawns")
}

fn code(output: &Output) -> i32 {
    output.status.code().expect("no signal")
}

fn stdout(output: &Output) -> String {
    String::from_utf8(output.stdout.clone()).expect("stdout is UTF-8")
}

fn stderr(output: &Output) -> String {
    String::from_utf8(output.stderr.clone()).expect("stderr is UTF-8")
}

fn report_json(output: &Output) -> serde_json::Value {
    serde_json::from_str(&stdout(output)).expect("stdout is one JSON report")
}

fn write_cluster(dir: &Path, name: &str, count: usize, outliers: usize) -> (PathBuf, Vec<FlagPoint>) {
    let (_, points) = gen_flag_cluster(&FlagClusterSpec {
        signature: FlagSignature::new(vec![1, 3], 8).unwrap(),
        count,
        noise: 0.01,
        outlier_count: outliers,
        outlier_noise: 1.0,
        rng: RngStream::new(77, 0),
    })
    .unwrap();
    let path = dir.join(name);
    write_flag_set(&path, &points).unwrap();
    (path, points)
}

fn write_line(dir: &Path, name: &str, angle: f64) -> PathBuf {
    let rep = Matrix::from_column_slice(2, 1, &[angle.cos(), angle.sin()]);
    let point = FlagPoint::new(rep, FlagSignature::new(vec![1], 2).unwrap()).unwrap();
    let path = dir.join(name);
    write_flag_set(&path, std::slice::from_ref(&point)).unwrap();
    path
}

#[test]
fn mean_matches_an_in_process_solve_bit_for_bit() {
    let dir = TempDir::new().unwrap();
    let (input, points) = write_cluster(dir.path(), "set.json", 30, 0);
    let out = dir.path().join("centroid.json");
    let output = run_in(
        dir.path(),
        &["mean", input.to_str().unwrap(), "--seed", "7", "--out", out.to_str().unwrap()],
    );
    assert_eq!(code(&output), 0, "stderr: {}", stderr(&output));

    let weights = WeightVector::uniform(points.len()).unwrap();
    let config = MeanConfig {
        init: MeanInit::Random,
        trust_region: TrustRegionConfig { rng: RngStream::new(7, 0), ..TrustRegionConfig::default() },
    };
    let direct = flag_mean(&points, &weights, &config).unwrap();

    let written = read_flag_set(&out).unwrap();
    assert_eq!(written.len(), 1);
    assert_eq!(written[0].rep(), direct.centroid.rep(), "file differs from library result");

    let report = report_json(&output);
    assert_eq!(report["method"], "flag-mean");
    assert_eq!(report["objective"].as_f64().unwrap(), direct.final_objective());
    assert_eq!(report["iterations"].as_u64().unwrap() as usize, direct.iterations);

    // The reported objective must also be recomputable from the files alone.
    let problem = flag_mean_problem(&written[0..0].iter().chain(&points).cloned().collect::<Vec<_>>(), &weights);
    drop(problem);
    let problem = flag_mean_problem(&points, &weights).unwrap();
    let recomputed = problem.cost(written[0].rep());
    assert!(
        (recomputed - report["objective"].as_f64().unwrap()).abs() <= 1e-9,
        "recomputed {recomputed} vs reported {}",
        report["objective"]
    );
}

#[test]
fn median_report_objective_is_recomputable_from_files() {
    let dir = TempDir::new().unwrap();
    let (input, points) = write_cluster(dir.path(), "set.json", 24, 6);
    let out = dir.path().join("centroid.json");
    let output = run_in(
        dir.path(),
        &["median", input.to_str().unwrap(), "--seed", "3", "--out", out.to_str().unwrap()],
    );
    assert_eq!(code(&output), 0, "stderr: {}", stderr(&output));

    let report = report_json(&output);
    assert_eq!(report["method"], "flag-median");
    assert!(report["iterations"].as_u64().unwrap() <= 50);

    let centroid = read_flag_set(&out).unwrap().remove(0);
    let recomputed: f64 =
        points.iter().map(|p| chordal_distance(p, &centroid).unwrap() / points.len() as f64).sum();
    let reported = report["objective"].as_f64().unwrap();
    assert!(
        (recomputed - reported).abs() <= 1e-9,
        "recomputed {recomputed} vs reported {reported}"
    );
}

#[test]
fn single_point_sets_average_to_themselves() {
    let dir = TempDir::new().unwrap();
    let (_, points) = write_cluster(dir.path(), "unused.json", 1, 0);
    let input = dir.path().join("one.json");
    write_flag_set(&input, &points).unwrap();

    for sub in ["mean", "median"] {
        let out = dir.path().join(format!("{sub}.json"));
        let output =
            run_in(dir.path(), &[sub, input.to_str().unwrap(), "--out", out.to_str().unwrap()]);
        assert_eq!(code(&output), 0, "{sub} stderr: {}", stderr(&output));
        let centroid = read_flag_set(&out).unwrap().remove(0);
        let gap = chordal_distance(&centroid, &points[0]).unwrap();
        assert!(gap <= 1e-8, "{sub} moved a single point by {gap:.3e}");
    }
}

#[test]
fn malformed_input_exits_two_and_names_the_problem() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("bad.json");

    write_text_atomic(&path, r#"{"signature": {"dims": [1], "ambient": 2}}"#).unwrap();
    let output = run_in(dir.path(), &["mean", path.to_str().unwrap()]);
    assert_eq!(code(&output), 2);
    let message = stderr(&output);
    assert!(message.contains("points"), "message does not name the missing field: {message}");

    write_text_atomic(&path, "{\"signature\": {\"dims\": [1], \"ambient\": 2},\n  \"points\": [[1.0,]]}")
        .unwrap();
    let output = run_in(dir.path(), &["mean", path.to_str().unwrap()]);
    assert_eq!(code(&output), 2);
    let message = stderr(&output);
    assert!(message.contains("line"), "message has no location: {message}");

    let output = run_in(dir.path(), &["mean", dir.path().join("absent.json").to_str().unwrap()]);
    assert_eq!(code(&output), 2);
}

#[test]
fn weight_file_length_must_match_the_point_count() {
    let dir = TempDir::new().unwrap();
    let (input, _) = write_cluster(dir.path(), "set.json", 4, 0);
    let weights = dir.path().join("w.json");
    write_text_atomic(&weights, "[1.0, 1.0, 1.0]").unwrap();
    let output = run_in(
        dir.path(),
        &["mean", input.to_str().unwrap(), "--weights", weights.to_str().unwrap()],
    );
    assert_eq!(code(&output), 2);
    assert!(stderr(&output).contains("weight length mismatch"));
}

#[test]
fn dist_prints_library_values_at_full_precision() {
    let dir = TempDir::new().unwrap();
    let e1 = write_line(dir.path(), "e1.json", 0.0);
    let e2 = write_line(dir.path(), "e2.json", std::f64::consts::FRAC_PI_2);

    let output = run_in(dir.path(), &["dist", e1.to_str().unwrap(), e1.to_str().unwrap()]);
    assert_eq!(code(&output), 0);
    assert_eq!(stdout(&output).trim().parse::<f64>().unwrap(), 0.0);

    let output = run_in(dir.path(), &["dist", e1.to_str().unwrap(), e2.to_str().unwrap()]);
    assert_eq!(code(&output), 0);
    assert_eq!(stdout(&output).trim().parse::<f64>().unwrap(), 1.0);

    // A random pair must reproduce the library value exactly: 17 significant
    // digits identify a double uniquely.
    let signature = FlagSignature::new(vec![2, 3], 7).unwrap();
    let mut rng = RngStream::new(5, 0).rng();
    let a = FlagPoint::new(thin_qr(&normal_matrix(&mut rng, 7, 3)).unwrap().q, signature.clone())
        .unwrap();
    let b = FlagPoint::new(thin_qr(&normal_matrix(&mut rng, 7, 3)).unwrap().q, signature).unwrap();
    let pa = dir.path().join("a.json");
    let pb = dir.path().join("b.json");
    write_flag_set(&pa, std::slice::from_ref(&a)).unwrap();
    write_flag_set(&pb, std::slice::from_ref(&b)).unwrap();
    let output = run_in(dir.path(), &["dist", pa.to_str().unwrap(), pb.to_str().unwrap()]);
    assert_eq!(code(&output), 0);
    let printed = stdout(&output);
    let printed = printed.trim();
    assert_eq!(printed.parse::<f64>().unwrap(), chordal_distance(&a, &b).unwrap());
    let mantissa: String = printed.chars().filter(|c| c.is_ascii_digit()).take_while(|_| true).collect();
    assert!(mantissa.len() >= 17, "expected 17 significant digits, got {printed:?}");
}

#[test]
fn dist_rejects_mismatched_signatures() {
    let dir = TempDir::new().unwrap();
    let a = write_line(dir.path(), "a.json", 0.3);
    let rep = Matrix::from_column_slice(3, 1, &[1.0, 0.0, 0.0]);
    let point = FlagPoint::new(rep, FlagSignature::new(vec![1], 3).unwrap()).unwrap();
    let b = dir.path().join("b.json");
    write_flag_set(&b, std::slice::from_ref(&point)).unwrap();

    let output = run_in(dir.path(), &["dist", a.to_str().unwrap(), b.to_str().unwrap()]);
    assert_eq!(code(&output), 2);
    assert!(stderr(&output).contains("signature mismatch"));

    let (two_points, _) = write_cluster(dir.path(), "two.json", 2, 0);
    let output =
        run_in(dir.path(), &["dist", two_points.to_str().unwrap(), two_points.to_str().unwrap()]);
    assert_eq!(code(&output), 2, "multi-point files must be rejected");
}

#[test]
fn identity_motions_average_to_the_identity() {
    let dir = TempDir::new().unwrap();
    let motions = vec![RigidMotion::identity(); 10];
    let input = dir.path().join("motions.json");
    write_motion_set(&input, &motions).unwrap();
    let out = dir.path().join("avg.json");
    let output = run_in(
        dir.path(),
        &["motion-avg", input.to_str().unwrap(), "--out", out.to_str().unwrap()],
    );
    assert_eq!(code(&output), 0, "stderr: {}", stderr(&output));

    let average = read_motion_set(&out).unwrap().remove(0);
    assert!((average.rotation() - Matrix3::identity()).amax() <= 1e-9);
    assert!(average.translation().norm() <= 1e-9);

    let report = report_json(&output);
    let errors = report["pose_errors"].as_array().unwrap();
    assert_eq!(errors.len(), 10);
    assert!(errors.iter().all(|e| e.as_f64().unwrap() <= 1e-9));
}

#[test]
fn a_single_motion_averages_to_itself() {
    let dir = TempDir::new().unwrap();
    let (_, motions) = gen_motion_cluster(&MotionClusterSpec {
        count: 1,
        axis_noise_deg: 0.0,
        translation_noise: 0.0,
        outlier_fraction: 0.0,
        scene_radius: 0.5,
        rng: RngStream::new(11, 0),
    })
    .unwrap();
    let input = dir.path().join("one.json");
    write_motion_set(&input, &motions).unwrap();
    let out = dir.path().join("avg.json");
    let output = run_in(
        dir.path(),
        &["motion-avg", input.to_str().unwrap(), "--q", "1", "--out", out.to_str().unwrap()],
    );
    assert_eq!(code(&output), 0, "stderr: {}", stderr(&output));
    let average = read_motion_set(&out).unwrap().remove(0);
    assert!((average.rotation() - motions[0].rotation()).amax() <= 1e-8);
    assert!((average.translation() - motions[0].translation()).norm() <= 1e-8);
}

#[test]
fn motion_files_with_bad_rotation_blocks_exit_two() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("skewed.json");
    write_text_atomic(
        &path,
        r#"{"motions": [{"rotation": [1.1, 0, 0, 0, 1, 0, 0, 0, 1], "translation": [0, 0, 0]}]}"#,
    )
    .unwrap();
    let output = run_in(dir.path(), &["motion-avg", path.to_str().unwrap()]);
    assert_eq!(code(&output), 2);
    assert!(stderr(&output).contains("motion 0"), "stderr: {}", stderr(&output));

    let output = run_in(dir.path(), &["motion-avg", path.to_str().unwrap(), "--q", "3"]);
    assert_eq!(code(&output), 2, "bad q must be a config error");
}

#[test]
fn rotation_avg_reports_a_translation_free_centroid() {
    let dir = TempDir::new().unwrap();
    let (_, motions) = gen_motion_cluster(&MotionClusterSpec {
        count: 8,
        axis_noise_deg: 4.0,
        translation_noise: 0.1,
        outlier_fraction: 0.0,
        scene_radius: 1.0,
        rng: RngStream::new(12, 0),
    })
    .unwrap();
    let input = dir.path().join("motions.json");
    write_motion_set(&input, &motions).unwrap();
    let out = dir.path().join("rot.json");
    let output = run_in(
        dir.path(),
        &["rotation-avg", input.to_str().unwrap(), "--seed", "2", "--out", out.to_str().unwrap()],
    );
    assert_eq!(code(&output), 0, "stderr: {}", stderr(&output));
    let centroid = read_motion_set(&out).unwrap().remove(0);
    assert_eq!(centroid.translation(), &Vector3::zeros());
    let report = report_json(&output);
    assert_eq!(report["pose_errors"].as_array().unwrap().len(), 8);
}

fn tiny_bench_config() -> serde_json::Value {
    serde_json::json!({
        "kind": "flag-noise-sweep",
        "signature": {"dims": [1, 2], "ambient": 6},
        "points": 12,
        "noise_grid": [0.01],
        "trials": 2,
        "base_seed": 5,
        "methods": ["flag-mean", "euclidean-mean"]
    })
}

#[test]
fn bench_writes_one_row_per_trial_and_method() {
    let dir = TempDir::new().unwrap();
    let config = dir.path().join("config.json");
    write_text_atomic(&config, &tiny_bench_config().to_string()).unwrap();
    let out = dir.path().join("results.csv");
    let output = run_in(
        dir.path(),
        &["bench", "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()],
    );
    assert_eq!(code(&output), 0, "stderr: {}", stderr(&output));

    let csv = std::fs::read_to_string(&out).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "experiment,cell,trial,seed,method,error,objective,iterations,wall_time_ms");
    assert_eq!(lines.len(), 1 + 2 * 2, "one row per (trial, method)");
    assert!(lines[1].starts_with("flag-noise-sweep,noise=0.01,0,"));

    // The summary on stdout has one line per (cell, method).
    let printed = stdout(&output);
    assert_eq!(printed.lines().count(), 2, "stdout was: {printed}");
    assert!(printed.contains("mean_error="));
}

#[test]
fn bench_reruns_and_thread_caps_produce_identical_csv() {
    let dir = TempDir::new().unwrap();
    let config = dir.path().join("config.json");
    write_text_atomic(&config, &tiny_bench_config().to_string()).unwrap();

    let mut variants = Vec::new();
    for (name, threads) in [("a.csv", None), ("b.csv", None), ("c.csv", Some("1")), ("d.csv", Some("3"))] {
        let out = dir.path().join(name);
        let mut cmd = bin();
        cmd.current_dir(dir.path())
            .args(["bench", "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()])
            .env_remove("FLAGSTAT_THREADS");
        if let Some(n) = threads {
            cmd.env("FLAGSTAT_THREADS", n);
        }
        let output = cmd.output().unwrap();
        assert_eq!(code(&output), 0, "stderr: {}", stderr(&output));
        variants.push(std::fs::read(&out).unwrap());
    }
    assert_eq!(variants[0], variants[1], "rerun changed the CSV");
    assert_eq!(variants[0], variants[2], "one worker changed the CSV");
    assert_eq!(variants[0], variants[3], "three workers changed the CSV");
}

#[test]
fn bench_rejects_bad_configuration() {
    let dir = TempDir::new().unwrap();

    let output = run_in(dir.path(), &["bench"]);
    assert_eq!(code(&output), 2);
    assert!(stderr(&output).contains("--config or --kind"));

    let output = run_in(dir.path(), &["bench", "--kind", "flagg-sweep"]);
    assert_eq!(code(&output), 2);
    assert!(stderr(&output).contains("flagg-sweep"));

    let output = run_in(dir.path(), &["bench", "--kind", "flag-noise-sweep", "--methods", "meen"]);
    assert_eq!(code(&output), 2);
    assert!(stderr(&output).contains("meen"));

    let config = dir.path().join("config.json");
    write_text_atomic(&config, &tiny_bench_config().to_string()).unwrap();
    let mut cmd = bin();
    cmd.current_dir(dir.path())
        .args(["bench", "--config", config.to_str().unwrap()])
        .env("FLAGSTAT_THREADS", "zero");
    let output = cmd.output().unwrap();
    assert_eq!(code(&output), 2);
    assert!(stderr(&output).contains("FLAGSTAT_THREADS"));
}

#[test]
fn bench_preset_runs_and_renders_a_plot() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("motion.csv");
    let plot = dir.path().join("motion.svg");
    let output = run_in(
        dir.path(),
        &[
            "bench",
            "--kind",
            "motion-noise-sweep",
            "--trials",
            "1",
            "--seed",
            "9",
            "--out",
            out.to_str().unwrap(),
            "--plot",
            plot.to_str().unwrap(),
        ],
    );
    assert_eq!(code(&output), 0, "stderr: {}", stderr(&output));
    let csv = std::fs::read_to_string(&out).unwrap();
    assert!(csv.lines().count() > 1, "no data rows in {csv:?}");
    let svg = std::fs::read_to_string(&plot).unwrap();
    assert!(svg.starts_with("<svg"), "plot is not an SVG: {}", &svg[..svg.len().min(40)]);
    assert!(svg.contains("flag-median"), "plot has no series labels");
}

#[test]
fn validate_detects_every_file_kind() {
    let dir = TempDir::new().unwrap();
    let (flags, _) = write_cluster(dir.path(), "flags.json", 3, 0);

    let output = run_in(dir.path(), &["validate", flags.to_str().unwrap()]);
    assert_eq!(code(&output), 0);
    assert!(stdout(&output).contains("flag set with 3 points"));

    let output =
        run_in(dir.path(), &["validate", flags.to_str().unwrap(), "--signature", "1,3:8"]);
    assert_eq!(code(&output), 0);

    let output =
        run_in(dir.path(), &["validate", flags.to_str().unwrap(), "--signature", "1,2:8"]);
    assert_eq!(code(&output), 2);
    assert!(stderr(&output).contains("signature mismatch"));

    let output = run_in(dir.path(), &["validate", flags.to_str().unwrap(), "--signature", "1-2-8"]);
    assert_eq!(code(&output), 2);

    let motions = dir.path().join("motions.json");
    write_motion_set(&motions, &[RigidMotion::identity()]).unwrap();
    let output = run_in(dir.path(), &["validate", motions.to_str().unwrap()]);
    assert_eq!(code(&output), 0);
    assert!(stdout(&output).contains("motion set with 1 motions"));

    let output =
        run_in(dir.path(), &["validate", motions.to_str().unwrap(), "--signature", "1:2"]);
    assert_eq!(code(&output), 2, "--signature makes no sense for motion sets");

    let weights = dir.path().join("weights.json");
    write_text_atomic(&weights, "[0.5, 0.5]").unwrap();
    let output = run_in(dir.path(), &["validate", weights.to_str().unwrap()]);
    assert_eq!(code(&output), 0);
    assert!(stdout(&output).contains("weights for 2 points"));

    let scalar = dir.path().join("scalar.json");
    write_text_atomic(&scalar, "3.5").unwrap();
    let output = run_in(dir.path(), &["validate", scalar.to_str().unwrap()]);
    assert_eq!(code(&output), 2);
}

#[test]
fn numerical_failures_classify_for_exit_code_three() {
    // The binary maps input errors to exit 2 and everything else to exit 3;
    // the solver-side variants must therefore never classify as input errors.
    assert!(!Error::ContractionSingularity { m44: 0.0 }.is_input_error());
    assert!(!Error::NumericalFailure("diverged".into()).is_input_error());
    assert!(!Error::RankDeficient { column: 2 }.is_input_error());
    assert!(Error::InvalidInput("bad".into()).is_input_error());
    assert!(Error::Config("bad".into()).is_input_error());
}
