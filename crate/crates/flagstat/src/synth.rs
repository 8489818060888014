//! Seeded synthetic data and experiment sweeps.
//!
//! Two generators build clustered datasets (flags around a random center,
//! rigid motions around a random pose), and [`run_experiment`] drives the
//! benchmark sweeps: noise ladders, outlier ladders, initialization and
//! scale ablations. Every random draw flows from [`RngStream`]s derived
//! purely from `(base_seed, cell, trial)`, so a sweep is deterministic,
//! trials can run in any order (they are parallelized with rayon), and a
//! rerun reproduces the result table byte for byte.

use std::time::Instant;

use nalgebra::{Matrix3, Rotation3, Unit, Vector3};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::averaging::{
    euclidean_mean_baseline, flag_mean, flag_median, gr_mean_baseline, AverageReport, IrlsConfig,
    MeanConfig, MeanInit, MedianInit, Method,
};
use crate::error::{Error, Result};
use crate::flag::{chordal_distance, FlagPoint, FlagSignature, WeightVector};
use crate::motion::{
    average_motions, average_rotations, pose_error, ContractionParam, MotionAverageConfig,
    PoseErrorConfig, RigidMotion,
};
use crate::numerics::{normal_matrix, normal_sample, thin_qr, uniform_matrix, uniform_sample, Matrix, RngStream};
use crate::stiefel::TrustRegionConfig;

/// Attempts before a rank-deficient draw is reported instead of redrawn.
const QR_RETRIES: usize = 8;

/// A cluster of flags: orthonormalized uniform noise around a random center.
#[derive(Debug, Clone)]
pub struct FlagClusterSpec {
    pub signature: FlagSignature,
    /// Total number of points, outliers included.
    pub count: usize,
    /// Inlier noise scale `δ`.
    pub noise: f64,
    /// How many of the points are outliers.
    pub outlier_count: usize,
    /// Outlier noise scale, typically far above `noise`.
    pub outlier_noise: f64,
    pub rng: RngStream,
}

impl FlagClusterSpec {
    pub fn validate(&self) -> Result<()> {
        if self.count == 0 {
            return Err(Error::EmptyInput("cluster needs at least one point".into()));
        }
        if self.outlier_count > self.count {
            return Err(Error::InvalidInput(format!(
                "{} outliers exceed {} points",
                self.outlier_count, self.count
            )));
        }
        if !(self.noise >= 0.0 && self.outlier_noise >= 0.0) {
            return Err(Error::InvalidInput("noise scales must be nonnegative".into()));
        }
        Ok(())
    }
}

/// Draw `thin_qr(base + δ·Z).Q` with `Z` uniform in `[-0.5, 0.5)`, redrawing
/// `Z` on rank deficiency; without a base the candidate is `Z` itself.
fn qr_cluster_draw(
    rng: &mut ChaCha8Rng,
    base: Option<&Matrix>,
    delta: f64,
    rows: usize,
    cols: usize,
) -> Result<Matrix> {
    let mut last_err = None;
    for _ in 0..QR_RETRIES {
        let z = uniform_matrix(rng, rows, cols, -0.5, 0.5);
        let candidate = match base {
            Some(c) => c + z * delta,
            None => z,
        };
        match thin_qr(&candidate) {
            Ok(f) => return Ok(f.q),
            Err(e @ Error::RankDeficient { .. }) => last_err = Some(e),
            Err(e) => return Err(e),
        }
    }
    Err(last_err.expect("loop ran at least once"))
}

/// Generate a flag cluster: the center is the Q factor of a uniform random
/// matrix, each point the Q factor of `center + δ·Z_i` (outliers use the
/// outlier scale). Deterministic in `spec.rng`.
pub fn gen_flag_cluster(spec: &FlagClusterSpec) -> Result<(FlagPoint, Vec<FlagPoint>)> {
    spec.validate()?;
    let (d, d_k) = (spec.signature.ambient(), spec.signature.sub_dim());
    let mut rng = spec.rng.rng();
    let center_rep = qr_cluster_draw(&mut rng, None, 0.0, d, d_k)?;
    let mut points = Vec::with_capacity(spec.count);
    for i in 0..spec.count {
        let delta = if i < spec.count - spec.outlier_count {
            spec.noise
        } else {
            spec.outlier_noise
        };
        let rep = qr_cluster_draw(&mut rng, Some(&center_rep), delta, d, d_k)?;
        points.push(FlagPoint::new(rep, spec.signature.clone())?);
    }
    let center = FlagPoint::new(center_rep, spec.signature.clone())?;
    Ok((center, points))
}

/// A cluster of rigid motions around a random pose.
#[derive(Debug, Clone)]
pub struct MotionClusterSpec {
    /// Total number of motions, outliers included.
    pub count: usize,
    /// Standard deviation of the inlier rotation perturbation angle, degrees.
    pub axis_noise_deg: f64,
    /// Standard deviation of the isotropic inlier translation noise.
    pub translation_noise: f64,
    /// Fraction of the motions replaced by fresh uniform random motions.
    pub outlier_fraction: f64,
    /// Translations live in the ball of this radius.
    pub scene_radius: f64,
    pub rng: RngStream,
}

impl MotionClusterSpec {
    pub fn validate(&self) -> Result<()> {
        if self.count == 0 {
            return Err(Error::EmptyInput("cluster needs at least one motion".into()));
        }
        if !(self.axis_noise_deg >= 0.0
            && self.translation_noise >= 0.0
            && self.scene_radius >= 0.0)
        {
            return Err(Error::InvalidInput("noise levels must be nonnegative".into()));
        }
        if !(0.0..1.0).contains(&self.outlier_fraction) {
            return Err(Error::InvalidInput(format!(
                "outlier fraction must lie in [0, 1), got {}",
                self.outlier_fraction
            )));
        }
        Ok(())
    }
}

/// Rotation distributed uniformly over SO(3): Q factor of a Gaussian matrix
/// with the determinant sign fixed.
fn haar_rotation(rng: &mut ChaCha8Rng) -> Matrix3<f64> {
    loop {
        let gauss = normal_matrix(rng, 3, 3);
        let Ok(f) = thin_qr(&gauss) else { continue };
        let mut r = Matrix3::from_iterator(f.q.iter().copied());
        if r.determinant() < 0.0 {
            let negated = r.column(2) * -1.0;
            r.set_column(2, &negated);
        }
        return r;
    }
}

fn ball_sample(rng: &mut ChaCha8Rng, radius: f64) -> Vector3<f64> {
    if radius == 0.0 {
        return Vector3::zeros();
    }
    loop {
        let v = Vector3::new(
            uniform_sample(rng, -radius, radius),
            uniform_sample(rng, -radius, radius),
            uniform_sample(rng, -radius, radius),
        );
        if v.norm() <= radius {
            return v;
        }
    }
}

fn random_unit_axis(rng: &mut ChaCha8Rng) -> Unit<Vector3<f64>> {
    loop {
        let v = Vector3::new(normal_sample(rng), normal_sample(rng), normal_sample(rng));
        if v.norm() > 1e-12 {
            return Unit::new_normalize(v);
        }
    }
}

fn uniform_motion(rng: &mut ChaCha8Rng, scene_radius: f64) -> Result<RigidMotion> {
    RigidMotion::new(haar_rotation(rng), ball_sample(rng, scene_radius))
}

/// Generate a motion cluster: a uniform random center pose, inliers that
/// perturb its rotation about a random axis (angle `~ N(0, σ²)` with `σ` the
/// axis noise, converted to radians) and jitter its translation, and
/// `round(count · outlier_fraction)` trailing outliers drawn as fresh uniform
/// motions. Deterministic in `spec.rng`.
pub fn gen_motion_cluster(spec: &MotionClusterSpec) -> Result<(RigidMotion, Vec<RigidMotion>)> {
    spec.validate()?;
    let mut rng = spec.rng.rng();
    let center = uniform_motion(&mut rng, spec.scene_radius)?;
    let outliers = ((spec.count as f64) * spec.outlier_fraction).round() as usize;
    let sigma = spec.axis_noise_deg.to_radians();
    let mut motions = Vec::with_capacity(spec.count);
    for _ in 0..spec.count - outliers {
        let axis = random_unit_axis(&mut rng);
        let angle = normal_sample(&mut rng) * sigma;
        let wobble = Rotation3::from_axis_angle(&axis, angle).into_inner();
        let jitter = Vector3::new(
            normal_sample(&mut rng),
            normal_sample(&mut rng),
            normal_sample(&mut rng),
        ) * spec.translation_noise;
        motions.push(RigidMotion::new(
            wobble * center.rotation(),
            center.translation() + jitter,
        )?);
    }
    for _ in 0..outliers {
        motions.push(uniform_motion(&mut rng, spec.scene_radius)?);
    }
    Ok((center, motions))
}

/// A benchmark sweep: which quantity is laddered and over which grid.
///
/// Grids are embedded per kind because their types differ. The serialized
/// form tags the variant with a `kind` field in kebab-case.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", rename_all_fields = "snake_case")]
pub enum ExperimentKind {
    /// Flag clusters at increasing inlier noise, no outliers.
    FlagNoiseSweep {
        signature: FlagSignature,
        points: usize,
        noise_grid: Vec<f64>,
    },
    /// Flag clusters at fixed noise with an increasing outlier count.
    FlagOutlierSweep {
        signature: FlagSignature,
        points: usize,
        inlier_noise: f64,
        outlier_noise: f64,
        outlier_grid: Vec<usize>,
    },
    /// One fixed flag cluster, solved repeatedly from varied starts. A grid
    /// entry of `None` starts each trial at a random point; `Some(δ)` starts
    /// at the Q factor of `center + δ·Z` with fresh uniform `Z` per trial.
    InitAblation {
        signature: FlagSignature,
        points: usize,
        noise: f64,
        init_grid: Vec<Option<f64>>,
    },
    /// Motion clusters along paired rotation/translation noise ladders
    /// (`axis_noise_deg[i]` with `translation_noise[i]` form cell `i`).
    MotionNoiseSweep {
        points: usize,
        axis_noise_deg: Vec<f64>,
        translation_noise: Vec<f64>,
        scene_radius: f64,
    },
    /// Motion clusters at fixed noise with an increasing outlier fraction.
    MotionOutlierSweep {
        points: usize,
        axis_noise_deg: f64,
        translation_noise: f64,
        scene_radius: f64,
        outlier_grid: Vec<f64>,
    },
    /// Fixed per-trial motion clusters averaged at each scale of the grid;
    /// the error is always scored at unit scale. Axis noise in radians here,
    /// matching the sub-degree levels this ablation probes.
    LambdaAblation {
        points: usize,
        axis_noise_rad: f64,
        translation_noise: f64,
        scene_radius: f64,
        lambda_grid: Vec<f64>,
    },
    /// Rotation-only clusters at increasing axis noise.
    RotationNoiseSweep {
        points: usize,
        axis_noise_deg: Vec<f64>,
    },
}

impl ExperimentKind {
    pub fn name(&self) -> &'static str {
        match self {
            ExperimentKind::FlagNoiseSweep { .. } => "flag-noise-sweep",
            ExperimentKind::FlagOutlierSweep { .. } => "flag-outlier-sweep",
            ExperimentKind::InitAblation { .. } => "init-ablation",
            ExperimentKind::MotionNoiseSweep { .. } => "motion-noise-sweep",
            ExperimentKind::MotionOutlierSweep { .. } => "motion-outlier-sweep",
            ExperimentKind::LambdaAblation { .. } => "lambda-ablation",
            ExperimentKind::RotationNoiseSweep { .. } => "rotation-noise-sweep",
        }
    }

    pub fn cells(&self) -> usize {
        match self {
            ExperimentKind::FlagNoiseSweep { noise_grid, .. } => noise_grid.len(),
            ExperimentKind::FlagOutlierSweep { outlier_grid, .. } => outlier_grid.len(),
            ExperimentKind::InitAblation { init_grid, .. } => init_grid.len(),
            ExperimentKind::MotionNoiseSweep { axis_noise_deg, .. } => axis_noise_deg.len(),
            ExperimentKind::MotionOutlierSweep { outlier_grid, .. } => outlier_grid.len(),
            ExperimentKind::LambdaAblation { lambda_grid, .. } => lambda_grid.len(),
            ExperimentKind::RotationNoiseSweep { axis_noise_deg, .. } => axis_noise_deg.len(),
        }
    }

    /// Flattened `key=value` cell parameters, the `cell` column of the table.
    pub fn cell_label(&self, cell: usize) -> String {
        match self {
            ExperimentKind::FlagNoiseSweep { noise_grid, .. } => {
                format!("noise={}", noise_grid[cell])
            }
            ExperimentKind::FlagOutlierSweep { outlier_grid, .. } => {
                format!("outliers={}", outlier_grid[cell])
            }
            ExperimentKind::InitAblation { init_grid, .. } => match init_grid[cell] {
                None => "init=random".to_string(),
                Some(delta) => format!("init_noise={delta}"),
            },
            ExperimentKind::MotionNoiseSweep { axis_noise_deg, translation_noise, .. } => {
                format!(
                    "axis_deg={};translation={}",
                    axis_noise_deg[cell], translation_noise[cell]
                )
            }
            ExperimentKind::MotionOutlierSweep { outlier_grid, .. } => {
                format!("outlier_fraction={}", outlier_grid[cell])
            }
            ExperimentKind::LambdaAblation { lambda_grid, .. } => {
                format!("lambda={}", lambda_grid[cell])
            }
            ExperimentKind::RotationNoiseSweep { axis_noise_deg, .. } => {
                format!("axis_deg={}", axis_noise_deg[cell])
            }
        }
    }

    /// Built-in desk-scale sweep of the given name, with the grids the
    /// bundled studies use; `None` for an unknown name.
    pub fn preset(name: &str) -> Option<ExperimentKind> {
        let fl13 = FlagSignature::new(vec![1, 3], 10).expect("static signature");
        Some(match name {
            "flag-noise-sweep" => ExperimentKind::FlagNoiseSweep {
                signature: fl13,
                points: 100,
                noise_grid: vec![0.001, 0.01, 0.1, 1.0],
            },
            "flag-outlier-sweep" => ExperimentKind::FlagOutlierSweep {
                signature: fl13,
                points: 100,
                inlier_noise: 0.001,
                outlier_noise: 1.0,
                outlier_grid: vec![0, 10, 20, 30, 40],
            },
            "init-ablation" => ExperimentKind::InitAblation {
                signature: FlagSignature::new(vec![1, 2, 3], 10).expect("static signature"),
                points: 100,
                noise: 0.001,
                init_grid: vec![None],
            },
            "motion-noise-sweep" => ExperimentKind::MotionNoiseSweep {
                points: 50,
                axis_noise_deg: vec![0.0, 5.0, 10.0, 15.0, 20.0, 25.0],
                translation_noise: vec![0.0, 0.02, 0.05, 0.1, 0.2, 0.3],
                scene_radius: 1.0,
            },
            "motion-outlier-sweep" => ExperimentKind::MotionOutlierSweep {
                points: 50,
                axis_noise_deg: 5.0,
                translation_noise: 0.02,
                scene_radius: 1.0,
                outlier_grid: vec![0.0, 0.1, 0.2, 0.3, 0.4],
            },
            "lambda-ablation" => ExperimentKind::LambdaAblation {
                points: 250,
                axis_noise_rad: 0.075,
                translation_noise: 0.15,
                scene_radius: 1.0,
                lambda_grid: vec![
                    0.002, 0.025, 0.1, 0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 1.8, 2.0, 2.25, 2.5,
                ],
            },
            "rotation-noise-sweep" => ExperimentKind::RotationNoiseSweep {
                points: 50,
                axis_noise_deg: vec![0.0, 5.0, 10.0, 15.0, 20.0, 25.0],
            },
            _ => return None,
        })
    }

    /// Every method meaningful for this kind, robust estimators first.
    pub fn default_methods(&self) -> Vec<Method> {
        if self.is_motion() {
            vec![Method::FlagMedian, Method::FlagMean]
        } else {
            vec![
                Method::FlagMedian,
                Method::FlagMean,
                Method::EuclideanMean,
                Method::GrMean,
            ]
        }
    }

    fn is_motion(&self) -> bool {
        matches!(
            self,
            ExperimentKind::MotionNoiseSweep { .. }
                | ExperimentKind::MotionOutlierSweep { .. }
                | ExperimentKind::LambdaAblation { .. }
                | ExperimentKind::RotationNoiseSweep { .. }
        )
    }

    fn salt(&self) -> u64 {
        match self {
            ExperimentKind::FlagNoiseSweep { .. } => 1,
            ExperimentKind::FlagOutlierSweep { .. } => 2,
            ExperimentKind::InitAblation { .. } => 3,
            ExperimentKind::MotionNoiseSweep { .. } => 4,
            ExperimentKind::MotionOutlierSweep { .. } => 5,
            ExperimentKind::LambdaAblation { .. } => 6,
            ExperimentKind::RotationNoiseSweep { .. } => 7,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.cells() == 0 {
            return Err(Error::Config("experiment grid is empty".into()));
        }
        match self {
            ExperimentKind::FlagNoiseSweep { points, noise_grid, .. } => {
                require_points(*points)?;
                require_nonnegative(noise_grid, "noise grid")?;
            }
            ExperimentKind::FlagOutlierSweep {
                points, inlier_noise, outlier_noise, outlier_grid, ..
            } => {
                require_points(*points)?;
                require_nonnegative(&[*inlier_noise, *outlier_noise], "noise scales")?;
                if let Some(&m) = outlier_grid.iter().find(|&&m| m > *points) {
                    return Err(Error::Config(format!("{m} outliers exceed {points} points")));
                }
            }
            ExperimentKind::InitAblation { points, noise, init_grid, .. } => {
                require_points(*points)?;
                require_nonnegative(&[*noise], "noise")?;
                let init_noises: Vec<f64> = init_grid.iter().flatten().copied().collect();
                require_nonnegative(&init_noises, "init noise grid")?;
            }
            ExperimentKind::MotionNoiseSweep {
                points, axis_noise_deg, translation_noise, scene_radius,
            } => {
                require_points(*points)?;
                if axis_noise_deg.len() != translation_noise.len() {
                    return Err(Error::Config(format!(
                        "paired noise grids differ in length: {} rotation vs {} translation",
                        axis_noise_deg.len(),
                        translation_noise.len()
                    )));
                }
                require_nonnegative(axis_noise_deg, "rotation noise grid")?;
                require_nonnegative(translation_noise, "translation noise grid")?;
                require_nonnegative(&[*scene_radius], "scene radius")?;
            }
            ExperimentKind::MotionOutlierSweep {
                points, axis_noise_deg, translation_noise, scene_radius, outlier_grid,
            } => {
                require_points(*points)?;
                require_nonnegative(
                    &[*axis_noise_deg, *translation_noise, *scene_radius],
                    "noise levels",
                )?;
                if let Some(&f) = outlier_grid.iter().find(|&&f| !(0.0..1.0).contains(&f)) {
                    return Err(Error::Config(format!(
                        "outlier fraction {f} outside [0, 1)"
                    )));
                }
            }
            ExperimentKind::LambdaAblation {
                points, axis_noise_rad, translation_noise, scene_radius, lambda_grid,
            } => {
                require_points(*points)?;
                require_nonnegative(
                    &[*axis_noise_rad, *translation_noise, *scene_radius],
                    "noise levels",
                )?;
                if let Some(&l) = lambda_grid.iter().find(|&&l| !(l.is_finite() && l > 0.0)) {
                    return Err(Error::Config(format!("scale {l} must be positive")));
                }
            }
            ExperimentKind::RotationNoiseSweep { points, axis_noise_deg } => {
                require_points(*points)?;
                require_nonnegative(axis_noise_deg, "rotation noise grid")?;
            }
        }
        Ok(())
    }
}

fn require_points(points: usize) -> Result<()> {
    if points == 0 {
        return Err(Error::Config("experiments need at least one data point".into()));
    }
    Ok(())
}

fn require_nonnegative(values: &[f64], what: &str) -> Result<()> {
    if let Some(&v) = values.iter().find(|&&v| !(v >= 0.0 && v.is_finite())) {
        return Err(Error::Config(format!("{what} contains invalid value {v}")));
    }
    Ok(())
}

/// A full sweep: kind plus grid, trial count, seed and methods.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    #[serde(flatten)]
    pub kind: ExperimentKind,
    /// Trials per grid cell.
    pub trials: usize,
    pub base_seed: u64,
    pub methods: Vec<Method>,
    /// Record wall-clock per solve. Off by default: timing varies between
    /// runs, and the default table must be byte-reproducible.
    #[serde(default)]
    pub timing: bool,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.kind.validate()?;
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::Config("no methods requested".into()));
        }
        if self.kind.is_motion() {
            if let Some(&m) = self
                .methods
                .iter()
                .find(|m| !matches!(m, Method::FlagMean | Method::FlagMedian))
            {
                return Err(Error::Config(format!(
                    "method {m} is not defined for motion experiments"
                )));
            }
        }
        Ok(())
    }

    /// Stream of all randomness specific to this experiment kind.
    fn kind_stream(&self) -> RngStream {
        RngStream::new(self.base_seed, 0).derive(self.kind.salt())
    }

    /// Stream feeding the data generator of `(cell, trial)`.
    ///
    /// Ladder sweeps give every `(cell, trial)` its own data. The scale
    /// ablation shares data across cells (every scale averages the same
    /// per-trial point sets), and the initialization ablation fixes one
    /// dataset for the whole experiment.
    fn data_stream(&self, cell: usize, trial: usize) -> RngStream {
        let data = self.kind_stream().derive(0xDA7A);
        match self.kind {
            ExperimentKind::InitAblation { .. } => data,
            ExperimentKind::LambdaAblation { .. } => data.derive(trial as u64),
            _ => data.derive(cell as u64).derive(trial as u64),
        }
    }

    /// Stream feeding initial-point draws of `(cell, trial)`, shared by all
    /// methods so they start from the same point where that applies.
    fn init_stream(&self, cell: usize, trial: usize) -> RngStream {
        self.kind_stream().derive(0x1217).derive(cell as u64).derive(trial as u64)
    }

    /// Stream feeding the solver internals of one method at `(cell, trial)`.
    fn method_stream(&self, cell: usize, trial: usize, method_index: usize) -> RngStream {
        self.kind_stream()
            .derive(0x5074)
            .derive(cell as u64)
            .derive(trial as u64)
            .derive(method_index as u64)
    }
}

/// One solve of one method on one generated dataset.
#[derive(Debug, Clone)]
pub struct ResultRow {
    pub experiment: &'static str,
    pub cell: String,
    pub cell_index: usize,
    pub trial: usize,
    /// Stream id of the data stream that generated this trial's dataset.
    pub seed: u64,
    pub method: Method,
    /// Distance of the estimate to the generating center (chordal for flags,
    /// pose error for motions); `None` when the solve failed.
    pub error: Option<f64>,
    /// The method's own objective at its estimate.
    pub objective: Option<f64>,
    pub iterations: Option<usize>,
    pub wall_time_ms: Option<u64>,
    /// Error message of a failed solve; kept out of the CSV.
    pub failure: Option<String>,
    /// Objective value per outer iteration; kept out of the CSV.
    pub objective_history: Vec<f64>,
}

/// Mean ± sample standard deviation of one `(cell, method)` group.
#[derive(Debug, Clone)]
pub struct AggregateCell {
    pub cell: String,
    pub cell_index: usize,
    pub method: Method,
    /// Successful trials entering the means.
    pub trials: usize,
    pub failures: usize,
    pub mean_error: f64,
    pub std_error: f64,
    pub mean_objective: f64,
    pub std_objective: f64,
    pub mean_iterations: f64,
}

/// All rows of a sweep, in canonical `(cell, trial, method)` order.
#[derive(Debug, Clone)]
pub struct ResultTable {
    pub rows: Vec<ResultRow>,
}

impl ResultTable {
    /// Render the table as CSV. Reals carry 17 significant digits so parsing
    /// them back is lossless; failed solves leave their numeric fields empty.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("experiment,cell,trial,seed,method,error,objective,iterations,wall_time_ms\n");
        for row in &self.rows {
            let error = row.error.map_or(String::new(), |v| format!("{v:.16e}"));
            let objective = row.objective.map_or(String::new(), |v| format!("{v:.16e}"));
            let iterations = row.iterations.map_or(String::new(), |v| v.to_string());
            let wall = row.wall_time_ms.map_or(String::new(), |v| v.to_string());
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{}\n",
                row.experiment, row.cell, row.trial, row.seed, row.method, error, objective,
                iterations, wall
            ));
        }
        out
    }

    /// Mean ± sample std over the trials of each `(cell, method)`, failures
    /// counted separately. Groups with no successful trial report NaN means.
    pub fn aggregate(&self) -> Vec<AggregateCell> {
        let mut order: Vec<(usize, Method)> = Vec::new();
        for row in &self.rows {
            if !order.contains(&(row.cell_index, row.method)) {
                order.push((row.cell_index, row.method));
            }
        }
        order
            .into_iter()
            .map(|(cell_index, method)| {
                let group: Vec<&ResultRow> = self
                    .rows
                    .iter()
                    .filter(|r| r.cell_index == cell_index && r.method == method)
                    .collect();
                let ok: Vec<&&ResultRow> = group.iter().filter(|r| r.error.is_some()).collect();
                let errors: Vec<f64> = ok.iter().filter_map(|r| r.error).collect();
                let objectives: Vec<f64> = ok.iter().filter_map(|r| r.objective).collect();
                let iterations: Vec<f64> =
                    ok.iter().filter_map(|r| r.iterations).map(|n| n as f64).collect();
                let (mean_error, std_error) = mean_std(&errors);
                let (mean_objective, std_objective) = mean_std(&objectives);
                let (mean_iterations, _) = mean_std(&iterations);
                AggregateCell {
                    cell: group[0].cell.clone(),
                    cell_index,
                    method,
                    trials: ok.len(),
                    failures: group.len() - ok.len(),
                    mean_error,
                    std_error,
                    mean_objective,
                    std_objective,
                    mean_iterations,
                }
            })
            .collect()
    }
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    if values.len() == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>()
        / (values.len() - 1) as f64;
    (mean, var.sqrt())
}

/// Run a sweep: for every grid cell and trial, generate a dataset from the
/// trial's own stream, solve it with every requested method, and record one
/// row per solve. Failures become rows with empty numeric fields instead of
/// aborting the sweep. Trials run in parallel on the current rayon pool;
/// the row order and every value are independent of the schedule.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ResultTable> {
    config.validate()?;
    let jobs: Vec<(usize, usize)> = (0..config.kind.cells())
        .flat_map(|cell| (0..config.trials).map(move |trial| (cell, trial)))
        .collect();
    let rows: Vec<Vec<ResultRow>> = jobs
        .par_iter()
        .map(|&(cell, trial)| run_trial(config, cell, trial))
        .collect();
    Ok(ResultTable { rows: rows.into_iter().flatten().collect() })
}

fn run_trial(config: &ExperimentConfig, cell: usize, trial: usize) -> Vec<ResultRow> {
    let blank = |method: Method| ResultRow {
        experiment: config.kind.name(),
        cell: config.kind.cell_label(cell),
        cell_index: cell,
        trial,
        seed: config.data_stream(cell, trial).stream,
        method,
        error: None,
        objective: None,
        iterations: None,
        wall_time_ms: None,
        failure: None,
        objective_history: Vec::new(),
    };
    let solves = match prepare_trial(config, cell, trial) {
        Ok(solves) => solves,
        Err(e) => {
            // Data generation failed: every requested method gets an error row.
            return config
                .methods
                .iter()
                .map(|&m| {
                    let mut row = blank(m);
                    row.failure = Some(e.to_string());
                    row
                })
                .collect();
        }
    };
    config
        .methods
        .iter()
        .enumerate()
        .map(|(index, &method)| {
            let mut row = blank(method);
            let started = Instant::now();
            match solves.run(config, cell, trial, index, method) {
                Ok((error, report)) => {
                    row.error = Some(error);
                    row.objective = Some(report.final_objective());
                    row.iterations = Some(report.iterations);
                    row.objective_history = report.objective;
                }
                Err(e) => row.failure = Some(e.to_string()),
            }
            if config.timing {
                row.wall_time_ms = Some(started.elapsed().as_millis() as u64);
            }
            row
        })
        .collect()
}

/// A generated dataset, ready to be solved by each method in turn.
enum TrialData {
    Flag {
        center: FlagPoint,
        points: Vec<FlagPoint>,
        weights: WeightVector,
        /// Fixed starting point shared by all methods, when the cell asks
        /// for one.
        init: Option<FlagPoint>,
        /// Trust-region schedule for the mean solves.
        mean_profile: TrustRegionConfig,
    },
    Motion {
        center: RigidMotion,
        motions: Vec<RigidMotion>,
        weights: WeightVector,
        lambda: ContractionParam,
        rotations_only: bool,
    },
}

fn prepare_trial(config: &ExperimentConfig, cell: usize, trial: usize) -> Result<TrialData> {
    let data = config.data_stream(cell, trial);
    match &config.kind {
        ExperimentKind::FlagNoiseSweep { signature, points, noise_grid } => {
            let (center, pts) = gen_flag_cluster(&FlagClusterSpec {
                signature: signature.clone(),
                count: *points,
                noise: noise_grid[cell],
                outlier_count: 0,
                outlier_noise: 0.0,
                rng: data,
            })?;
            Ok(TrialData::Flag {
                center,
                weights: WeightVector::uniform(*points)?,
                points: pts,
                init: None,
                mean_profile: TrustRegionConfig::default(),
            })
        }
        ExperimentKind::FlagOutlierSweep {
            signature, points, inlier_noise, outlier_noise, outlier_grid,
        } => {
            let (center, pts) = gen_flag_cluster(&FlagClusterSpec {
                signature: signature.clone(),
                count: *points,
                noise: *inlier_noise,
                outlier_count: outlier_grid[cell],
                outlier_noise: *outlier_noise,
                rng: data,
            })?;
            Ok(TrialData::Flag {
                center,
                weights: WeightVector::uniform(*points)?,
                points: pts,
                init: None,
                mean_profile: TrustRegionConfig::default(),
            })
        }
        ExperimentKind::InitAblation { signature, points, noise, init_grid } => {
            let (center, pts) = gen_flag_cluster(&FlagClusterSpec {
                signature: signature.clone(),
                count: *points,
                noise: *noise,
                outlier_count: 0,
                outlier_noise: 0.0,
                rng: data,
            })?;
            let init = match init_grid[cell] {
                None => None,
                Some(delta) => {
                    let mut rng = config.init_stream(cell, trial).rng();
                    let rep = qr_cluster_draw(
                        &mut rng,
                        Some(center.rep()),
                        delta,
                        signature.ambient(),
                        signature.sub_dim(),
                    )?;
                    Some(FlagPoint::new(rep, signature.clone())?)
                }
            };
            Ok(TrialData::Flag {
                weights: WeightVector::uniform(*points)?,
                points: pts,
                init,
                mean_profile: TrustRegionConfig::clustered_data_profile(signature.sub_dim()),
                center,
            })
        }
        ExperimentKind::MotionNoiseSweep {
            points, axis_noise_deg, translation_noise, scene_radius,
        } => {
            let (center, motions) = gen_motion_cluster(&MotionClusterSpec {
                count: *points,
                axis_noise_deg: axis_noise_deg[cell],
                translation_noise: translation_noise[cell],
                outlier_fraction: 0.0,
                scene_radius: *scene_radius,
                rng: data,
            })?;
            Ok(TrialData::Motion {
                center,
                weights: WeightVector::uniform(motions.len())?,
                motions,
                lambda: ContractionParam::default(),
                rotations_only: false,
            })
        }
        ExperimentKind::MotionOutlierSweep {
            points, axis_noise_deg, translation_noise, scene_radius, outlier_grid,
        } => {
            let (center, motions) = gen_motion_cluster(&MotionClusterSpec {
                count: *points,
                axis_noise_deg: *axis_noise_deg,
                translation_noise: *translation_noise,
                outlier_fraction: outlier_grid[cell],
                scene_radius: *scene_radius,
                rng: data,
            })?;
            Ok(TrialData::Motion {
                center,
                weights: WeightVector::uniform(motions.len())?,
                motions,
                lambda: ContractionParam::default(),
                rotations_only: false,
            })
        }
        ExperimentKind::LambdaAblation {
            points, axis_noise_rad, translation_noise, scene_radius, lambda_grid,
        } => {
            let (center, motions) = gen_motion_cluster(&MotionClusterSpec {
                count: *points,
                axis_noise_deg: axis_noise_rad.to_degrees(),
                translation_noise: *translation_noise,
                outlier_fraction: 0.0,
                scene_radius: *scene_radius,
                rng: data,
            })?;
            Ok(TrialData::Motion {
                center,
                weights: WeightVector::uniform(motions.len())?,
                motions,
                lambda: ContractionParam::new(lambda_grid[cell])?,
                rotations_only: false,
            })
        }
        ExperimentKind::RotationNoiseSweep { points, axis_noise_deg } => {
            let (center, motions) = gen_motion_cluster(&MotionClusterSpec {
                count: *points,
                axis_noise_deg: axis_noise_deg[cell],
                translation_noise: 0.0,
                outlier_fraction: 0.0,
                scene_radius: 0.0,
                rng: data,
            })?;
            Ok(TrialData::Motion {
                center,
                weights: WeightVector::uniform(motions.len())?,
                motions,
                lambda: ContractionParam::default(),
                rotations_only: true,
            })
        }
    }
}

impl TrialData {
    fn run(
        &self,
        config: &ExperimentConfig,
        cell: usize,
        trial: usize,
        method_index: usize,
        method: Method,
    ) -> Result<(f64, AverageReport)> {
        let stream = config.method_stream(cell, trial, method_index);
        match self {
            TrialData::Flag { center, points, weights, init, mean_profile } => {
                let report = match method {
                    Method::FlagMean => {
                        let mean_init = match init {
                            Some(point) => MeanInit::At(point.clone()),
                            None => MeanInit::Random,
                        };
                        flag_mean(points, weights, &MeanConfig {
                            init: mean_init,
                            trust_region: TrustRegionConfig { rng: stream, ..mean_profile.clone() },
                        })?
                    }
                    Method::FlagMedian => {
                        let median_init = match init {
                            Some(point) => MedianInit::At(point.clone()),
                            None => MedianInit::UnweightedMean,
                        };
                        flag_median(points, weights, &IrlsConfig {
                            init: median_init,
                            trust_region: TrustRegionConfig {
                                rng: stream,
                                ..TrustRegionConfig::default()
                            },
                            ..IrlsConfig::default()
                        })?
                    }
                    Method::EuclideanMean => euclidean_mean_baseline(points, weights)?,
                    Method::GrMean => gr_mean_baseline(points, weights)?,
                };
                // The Grassmannian baseline reports its centroid in eigenvalue
                // order; score it under the dataset's signature like the rest.
                let scored = report.centroid.with_signature(center.signature().clone())?;
                let error = chordal_distance(&scored, center)?;
                Ok((error, report))
            }
            TrialData::Motion { center, motions, weights, lambda, rotations_only } => {
                let q = if method == Method::FlagMean { 2 } else { 1 };
                let solver = crate::motion::seeded_motion_config(q, *lambda, stream);
                // Scoring always happens at unit translation weight so error
                // curves stay comparable across averaging scales.
                let score = PoseErrorConfig::default();
                if *rotations_only {
                    let rotations: Vec<Matrix3<f64>> =
                        motions.iter().map(|m| *m.rotation()).collect();
                    let avg = average_rotations(&rotations, weights, &solver)?;
                    let estimate = RigidMotion::new(avg.rotation, Vector3::zeros())?;
                    Ok((pose_error(&estimate, center, score), avg.report))
                } else {
                    let avg = average_motions(motions, weights, &solver)?;
                    Ok((pose_error(&avg.motion, center, score), avg.report))
                }
            }
        }
    }
}

/// The `MotionAverageConfig` used by the sweeps, exposed so callers can
/// reproduce a sweep's individual solves exactly.
pub fn sweep_motion_config(q: u8, lambda: ContractionParam, stream: RngStream) -> MotionAverageConfig {
    crate::motion::seeded_motion_config(q, lambda, stream)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_flag_kind() -> ExperimentKind {
        ExperimentKind::FlagNoiseSweep {
            signature: FlagSignature::new(vec![1, 2], 5).unwrap(),
            points: 12,
            noise_grid: vec![0.0, 0.01],
        }
    }

    #[test]
    fn flag_cluster_is_deterministic_and_valid() {
        let spec = FlagClusterSpec {
            signature: FlagSignature::new(vec![1, 3], 10).unwrap(),
            count: 20,
            noise: 0.05,
            outlier_count: 4,
            outlier_noise: 1.0,
            rng: RngStream::new(3, 1),
        };
        let (center, points) = gen_flag_cluster(&spec).unwrap();
        let (center2, points2) = gen_flag_cluster(&spec).unwrap();
        assert_eq!(center.rep(), center2.rep());
        assert_eq!(points.len(), 20);
        for (a, b) in points.iter().zip(&points2) {
            assert_eq!(a.rep(), b.rep());
        }
    }

    #[test]
    fn zero_noise_flag_cluster_sits_on_center() {
        let spec = FlagClusterSpec {
            signature: FlagSignature::new(vec![1, 2, 3], 10).unwrap(),
            count: 5,
            noise: 0.0,
            outlier_count: 0,
            outlier_noise: 0.0,
            rng: RngStream::new(4, 0),
        };
        let (center, points) = gen_flag_cluster(&spec).unwrap();
        for p in &points {
            assert!(chordal_distance(p, &center).unwrap() <= 1e-10);
        }
    }

    #[test]
    fn flag_cluster_spread_grows_with_noise() {
        let signature = FlagSignature::new(vec![1, 3], 10).unwrap();
        let mut previous = 0.0;
        for (level, &noise) in [0.001, 0.01, 0.1, 1.0].iter().enumerate() {
            let mut total = 0.0;
            let mut samples = 0;
            for seed in 0..20 {
                let (center, points) = gen_flag_cluster(&FlagClusterSpec {
                    signature: signature.clone(),
                    count: 10,
                    noise,
                    outlier_count: 0,
                    outlier_noise: 0.0,
                    rng: RngStream::new(100 + seed, level as u64),
                })
                .unwrap();
                for p in &points {
                    total += chordal_distance(p, &center).unwrap();
                    samples += 1;
                }
            }
            let mean = total / samples as f64;
            assert!(
                mean > previous,
                "mean distance {mean:.3e} did not grow past {previous:.3e} at noise {noise}"
            );
            previous = mean;
        }
    }

    #[test]
    fn zero_noise_motion_cluster_sits_on_center() {
        let spec = MotionClusterSpec {
            count: 8,
            axis_noise_deg: 0.0,
            translation_noise: 0.0,
            outlier_fraction: 0.0,
            scene_radius: 1.0,
            rng: RngStream::new(5, 0),
        };
        let (center, motions) = gen_motion_cluster(&spec).unwrap();
        for m in &motions {
            assert!(pose_error(m, &center, PoseErrorConfig::default()) <= 1e-10);
        }
    }

    #[test]
    fn motion_cluster_spread_grows_with_noise() {
        let axis = [0.0, 5.0, 10.0, 15.0, 20.0, 25.0];
        let translation = [0.0, 0.02, 0.05, 0.1, 0.2, 0.3];
        let mut previous = -1.0;
        for level in 0..axis.len() {
            let mut total = 0.0;
            let mut samples = 0;
            for seed in 0..20 {
                let (center, motions) = gen_motion_cluster(&MotionClusterSpec {
                    count: 10,
                    axis_noise_deg: axis[level],
                    translation_noise: translation[level],
                    outlier_fraction: 0.0,
                    scene_radius: 1.0,
                    rng: RngStream::new(200 + seed, level as u64),
                })
                .unwrap();
                for m in &motions {
                    total += pose_error(m, &center, PoseErrorConfig::default());
                    samples += 1;
                }
            }
            let mean = total / samples as f64;
            assert!(
                mean > previous,
                "mean pose error {mean:.3e} did not grow past {previous:.3e} at level {level}"
            );
            previous = mean;
        }
    }

    #[test]
    fn motion_cluster_outlier_count_rounds() {
        let spec = MotionClusterSpec {
            count: 10,
            axis_noise_deg: 0.0,
            translation_noise: 0.0,
            outlier_fraction: 0.25,
            scene_radius: 1.0,
            rng: RngStream::new(6, 0),
        };
        let (center, motions) = gen_motion_cluster(&spec).unwrap();
        let off_center = motions
            .iter()
            .filter(|m| pose_error(m, &center, PoseErrorConfig::default()) > 1e-8)
            .count();
        assert_eq!(off_center, 3, "expected round(10 · 0.25) = 3 outliers");
    }

    #[test]
    fn experiment_rows_are_canonical_and_deterministic() {
        let config = ExperimentConfig {
            kind: small_flag_kind(),
            trials: 3,
            base_seed: 11,
            methods: vec![Method::FlagMean, Method::EuclideanMean],
            timing: false,
        };
        let table = run_experiment(&config).unwrap();
        assert_eq!(table.rows.len(), 2 * 3 * 2);
        let mut expected = Vec::new();
        for cell in 0..2 {
            for trial in 0..3 {
                for method in [Method::FlagMean, Method::EuclideanMean] {
                    expected.push((cell, trial, method));
                }
            }
        }
        let got: Vec<(usize, usize, Method)> = table
            .rows
            .iter()
            .map(|r| (r.cell_index, r.trial, r.method))
            .collect();
        assert_eq!(got, expected);

        let again = run_experiment(&config).unwrap();
        assert_eq!(table.to_csv(), again.to_csv());
    }

    #[test]
    fn zero_noise_cell_recovers_center() {
        let config = ExperimentConfig {
            kind: small_flag_kind(),
            trials: 1,
            base_seed: 12,
            methods: vec![Method::FlagMean],
            timing: false,
        };
        let table = run_experiment(&config).unwrap();
        let zero_noise = &table.rows[0];
        assert!(zero_noise.error.unwrap() <= 1e-8);
    }

    #[test]
    fn aggregate_groups_by_cell_and_method() {
        let config = ExperimentConfig {
            kind: small_flag_kind(),
            trials: 4,
            base_seed: 13,
            methods: vec![Method::FlagMean, Method::GrMean],
            timing: false,
        };
        let table = run_experiment(&config).unwrap();
        let summary = table.aggregate();
        assert_eq!(summary.len(), 4);
        for group in &summary {
            assert_eq!(group.trials, 4);
            assert_eq!(group.failures, 0);
            assert!(group.mean_error.is_finite());
            assert!(group.std_error >= 0.0);
        }
    }

    #[test]
    fn gr_baseline_scores_under_dataset_signature() {
        let config = ExperimentConfig {
            kind: ExperimentKind::FlagNoiseSweep {
                signature: FlagSignature::new(vec![1, 3], 10).unwrap(),
                points: 20,
                noise_grid: vec![0.01],
            },
            trials: 2,
            base_seed: 16,
            methods: vec![Method::GrMean],
            timing: false,
        };
        let table = run_experiment(&config).unwrap();
        for row in &table.rows {
            assert!(row.failure.is_none(), "gr-mean failed: {:?}", row.failure);
            assert!(row.error.unwrap().is_finite());
        }
    }

    #[test]
    fn csv_headers_match_schema() {
        let table = ResultTable { rows: Vec::new() };
        assert_eq!(
            table.to_csv(),
            "experiment,cell,trial,seed,method,error,objective,iterations,wall_time_ms\n"
        );
    }

    #[test]
    fn motion_experiments_reject_baseline_methods() {
        let config = ExperimentConfig {
            kind: ExperimentKind::MotionNoiseSweep {
                points: 5,
                axis_noise_deg: vec![0.0],
                translation_noise: vec![0.0],
                scene_radius: 1.0,
            },
            trials: 1,
            base_seed: 14,
            methods: vec![Method::EuclideanMean],
            timing: false,
        };
        assert!(matches!(run_experiment(&config), Err(Error::Config(_))));
    }

    #[test]
    fn lambda_cells_share_per_trial_data() {
        let config = ExperimentConfig {
            kind: ExperimentKind::LambdaAblation {
                points: 6,
                axis_noise_rad: 0.05,
                translation_noise: 0.1,
                scene_radius: 1.0,
                lambda_grid: vec![0.5, 1.0],
            },
            trials: 2,
            base_seed: 15,
            methods: vec![Method::FlagMean],
            timing: false,
        };
        assert_eq!(config.data_stream(0, 1), config.data_stream(1, 1));
        assert_ne!(config.data_stream(0, 0), config.data_stream(0, 1));
    }

    #[test]
    fn experiment_config_round_trips_as_json() {
        let config = ExperimentConfig {
            kind: ExperimentKind::FlagOutlierSweep {
                signature: FlagSignature::new(vec![1, 3], 10).unwrap(),
                points: 100,
                inlier_noise: 0.001,
                outlier_noise: 1.0,
                outlier_grid: vec![0, 10, 20, 30, 40],
            },
            trials: 10,
            base_seed: 21,
            methods: vec![
                Method::FlagMedian,
                Method::FlagMean,
                Method::EuclideanMean,
                Method::GrMean,
            ],
            timing: false,
        };
        let json = serde_json::to_string_pretty(&config).unwrap();
        let back: ExperimentConfig = serde_json::from_str(&json).unwrap();
        assert_eq!(json, serde_json::to_string_pretty(&back).unwrap());
        assert!(json.contains("\"kind\": \"flag-outlier-sweep\""));
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let mut config = ExperimentConfig {
            kind: small_flag_kind(),
            trials: 0,
            base_seed: 0,
            methods: vec![Method::FlagMean],
            timing: false,
        };
        assert!(matches!(run_experiment(&config), Err(Error::Config(_))));
        config.trials = 1;
        config.methods.clear();
        assert!(matches!(run_experiment(&config), Err(Error::Config(_))));
        config.methods.push(Method::FlagMean);
        config.kind = ExperimentKind::MotionNoiseSweep {
            points: 5,
            axis_noise_deg: vec![0.0, 5.0],
            translation_noise: vec![0.0],
            scene_radius: 1.0,
        };
        assert!(matches!(run_experiment(&config), Err(Error::Config(_))));
    }
}
