//! Weighted averages of flag collections.
//!
//! Four estimators share one report type:
//!
//! * [`flag_mean`]: minimizes `Σ_i α_i d_c(X^(i), Y)²` via the Stiefel
//!   trust-region solver,
//! * [`flag_median`]: minimizes `Σ_i α_i d_c(X^(i), Y)` by iteratively
//!   reweighted least squares (each iteration is a weighted flag-mean with
//!   weights `α_i / max{d_c(X^(i), Y), ε}`),
//! * [`euclidean_mean_baseline`]: orthonormalized entrywise average,
//! * [`gr_mean_baseline`]: dominant eigenvectors of the weighted sum of
//!   largest-subspace projectors, ignoring the nesting structure.
//!
//! Reported objective values are always `Σ_i α_i d_c^q` with `q = 2` for the
//! mean-flavored methods and `q = 1` for the median, evaluated against the
//! dataset's own signature, so the methods are directly comparable.

use serde::{Deserialize, Serialize};
use std::fmt;

use crate::error::{Error, Result};
use crate::flag::{
    chordal_distance, chordal_distance_squared, FlagPoint, FlagSignature, WeightVector,
};
use crate::numerics::sym_eig;
use crate::stiefel::{flag_mean_problem, rtr_solve, StiefelInit, TrustRegionConfig};

/// Which averaging estimator produced a report.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "flag-mean")]
    FlagMean,
    #[serde(rename = "flag-median")]
    FlagMedian,
    #[serde(rename = "euclidean-mean")]
    EuclideanMean,
    #[serde(rename = "gr-mean")]
    GrMean,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Method::FlagMean => "flag-mean",
            Method::FlagMedian => "flag-median",
            Method::EuclideanMean => "euclidean-mean",
            Method::GrMean => "gr-mean",
        };
        f.write_str(name)
    }
}

/// Starting point for the mean solver.
#[derive(Debug, Clone)]
pub enum MeanInit {
    /// Random orthonormal start drawn from the trust-region config stream.
    Random,
    /// Start from a given flag point (must share the data signature).
    At(FlagPoint),
}

/// Configuration of [`flag_mean`].
#[derive(Debug, Clone)]
pub struct MeanConfig {
    pub init: MeanInit,
    pub trust_region: TrustRegionConfig,
}

impl Default for MeanConfig {
    fn default() -> Self {
        MeanConfig { init: MeanInit::Random, trust_region: TrustRegionConfig::default() }
    }
}

/// Starting point for the median iteration.
#[derive(Debug, Clone, Default)]
pub enum MedianInit {
    /// Use the unweighted flag-mean of the data (random inner start).
    #[default]
    UnweightedMean,
    /// Start directly at a given flag point.
    At(FlagPoint),
}

/// Configuration of [`flag_median`].
#[derive(Debug, Clone)]
pub struct IrlsConfig {
    /// Weight clamp: `w_i = α_i / max{d_c, ε}`. Bounds the objective drift
    /// per iteration by `p·ε/2`.
    pub epsilon: f64,
    pub max_iterations: usize,
    /// Stop once the objective changes by less than this between iterations.
    pub tolerance: f64,
    pub init: MedianInit,
    /// Inner solver configuration; every inner mean is warm-started at the
    /// previous iterate.
    pub trust_region: TrustRegionConfig,
}

impl Default for IrlsConfig {
    fn default() -> Self {
        IrlsConfig {
            epsilon: 1e-10,
            max_iterations: 50,
            tolerance: 1e-9,
            init: MedianInit::UnweightedMean,
            trust_region: TrustRegionConfig::default(),
        }
    }
}

impl IrlsConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return Err(Error::Config("epsilon must be positive".into()));
        }
        if !(self.tolerance.is_finite() && self.tolerance > 0.0) {
            return Err(Error::Config("tolerance must be positive".into()));
        }
        if self.max_iterations == 0 {
            return Err(Error::Config("max_iterations must be at least 1".into()));
        }
        self.trust_region.validate()
    }
}

/// Result of an averaging run.
#[derive(Debug, Clone)]
pub struct AverageReport {
    pub centroid: FlagPoint,
    /// Objective value per outer iteration; the first entry is the value at
    /// the initial point, the last the value at the centroid.
    pub objective: Vec<f64>,
    /// Outer iterations performed (trust-region steps for the mean, IRLS
    /// updates for the median, 1 for the one-shot baselines).
    pub iterations: usize,
    pub method: Method,
}

impl AverageReport {
    pub fn final_objective(&self) -> f64 {
        *self.objective.last().expect("objective history is never empty")
    }
}

fn common_signature<'a>(
    points: &'a [FlagPoint],
    weights: &WeightVector,
) -> Result<&'a FlagSignature> {
    if points.is_empty() {
        return Err(Error::EmptyInput("averaging needs at least one point".into()));
    }
    if weights.len() != points.len() {
        return Err(Error::WeightLengthMismatch { points: points.len(), weights: weights.len() });
    }
    let signature = points[0].signature();
    for point in &points[1..] {
        if point.signature() != signature {
            return Err(Error::SignatureMismatch(format!(
                "point has signature {}, expected {}",
                point.signature(),
                signature
            )));
        }
    }
    Ok(signature)
}

/// `Σ_i α_i d_c(X^(i), y)²`.
fn weighted_sq_objective(
    points: &[FlagPoint],
    weights: &WeightVector,
    y: &FlagPoint,
) -> Result<f64> {
    let mut total = 0.0;
    for (point, &alpha) in points.iter().zip(weights.as_slice()) {
        total += alpha * chordal_distance_squared(point, y)?;
    }
    Ok(total)
}

/// `Σ_i α_i d_c(X^(i), y)`.
fn weighted_abs_objective(
    points: &[FlagPoint],
    weights: &WeightVector,
    y: &FlagPoint,
) -> Result<f64> {
    let mut total = 0.0;
    for (point, &alpha) in points.iter().zip(weights.as_slice()) {
        total += alpha * chordal_distance(point, y)?;
    }
    Ok(total)
}

fn single_point_report(point: &FlagPoint, method: Method) -> AverageReport {
    AverageReport {
        centroid: point.clone(),
        objective: vec![0.0],
        iterations: 0,
        method,
    }
}

/// Weighted chordal flag-mean.
///
/// Solves the trust-region problem assembled by
/// [`flag_mean_problem`](crate::stiefel::flag_mean_problem); the objective
/// history mirrors the solver's accepted iterates, shifted so every entry
/// equals `Σ_i α_i d_c(X^(i), ·)²` (the two differ by the constant
/// `(Σ_i α_i - 1) d_k`).
pub fn flag_mean(
    points: &[FlagPoint],
    weights: &WeightVector,
    config: &MeanConfig,
) -> Result<AverageReport> {
    let signature = common_signature(points, weights)?.clone();
    if points.len() == 1 {
        return Ok(single_point_report(&points[0], Method::FlagMean));
    }

    let init = match &config.init {
        MeanInit::Random => StiefelInit::Random,
        MeanInit::At(point) => {
            if point.signature() != &signature {
                return Err(Error::SignatureMismatch(format!(
                    "initial point has signature {}, expected {}",
                    point.signature(),
                    signature
                )));
            }
            StiefelInit::At(point.rep().clone())
        }
    };

    let problem = flag_mean_problem(points, weights)?;
    let report = rtr_solve(&problem, init, &config.trust_region)?;
    let centroid = FlagPoint::new(report.point, signature.clone())?;

    let shift = (weights.sum() - 1.0) * signature.sub_dim() as f64;
    let objective: Vec<f64> = report.cost_history.iter().map(|c| c + shift).collect();

    Ok(AverageReport {
        centroid,
        objective,
        iterations: report.outer_iterations,
        method: Method::FlagMean,
    })
}

/// Median reweighting: `w_i = α_i / max{d_c(X^(i), y), ε}`.
pub fn irls_weights(
    points: &[FlagPoint],
    y: &FlagPoint,
    base_weights: &WeightVector,
    epsilon: f64,
) -> Result<WeightVector> {
    if !(epsilon.is_finite() && epsilon > 0.0) {
        return Err(Error::Config("epsilon must be positive".into()));
    }
    if base_weights.len() != points.len() {
        return Err(Error::WeightLengthMismatch {
            points: points.len(),
            weights: base_weights.len(),
        });
    }
    let mut weights = Vec::with_capacity(points.len());
    for (point, &alpha) in points.iter().zip(base_weights.as_slice()) {
        let distance = chordal_distance(point, y)?;
        weights.push(alpha / distance.max(epsilon));
    }
    WeightVector::new(weights)
}

/// Weighted chordal flag-median via iteratively reweighted least squares.
///
/// Each outer iteration replaces the iterate with the weighted flag-mean
/// under the current IRLS weights, warm-starting the inner solver at the
/// previous iterate. The objective `Σ_i α_i d_c` can increase by at most
/// `p·ε/2` per iteration and the loop stops once successive objective values
/// differ by less than the tolerance.
pub fn flag_median(
    points: &[FlagPoint],
    weights: &WeightVector,
    config: &IrlsConfig,
) -> Result<AverageReport> {
    config.validate()?;
    let signature = common_signature(points, weights)?.clone();
    if points.len() == 1 {
        return Ok(single_point_report(&points[0], Method::FlagMedian));
    }

    let mut current = match &config.init {
        MedianInit::UnweightedMean => {
            let uniform = WeightVector::uniform(points.len())?;
            let mean_config = MeanConfig {
                init: MeanInit::Random,
                trust_region: config.trust_region.clone(),
            };
            flag_mean(points, &uniform, &mean_config)?.centroid
        }
        MedianInit::At(point) => {
            if point.signature() != &signature {
                return Err(Error::SignatureMismatch(format!(
                    "initial point has signature {}, expected {}",
                    point.signature(),
                    signature
                )));
            }
            point.clone()
        }
    };

    let mut objective = vec![weighted_abs_objective(points, weights, &current)?];
    let mut iterations = 0;

    for _ in 0..config.max_iterations {
        let reweighted = irls_weights(points, &current, weights, config.epsilon)?;
        let mean_config = MeanConfig {
            init: MeanInit::At(current.clone()),
            trust_region: config.trust_region.clone(),
        };
        current = flag_mean(points, &reweighted, &mean_config)?.centroid;

        let value = weighted_abs_objective(points, weights, &current)?;
        let previous = *objective.last().expect("nonempty");
        objective.push(value);
        iterations += 1;
        if (previous - value).abs() < config.tolerance {
            break;
        }
    }

    Ok(AverageReport { centroid: current, objective, iterations, method: Method::FlagMedian })
}

/// Entrywise weighted average of the representatives, orthonormalized by QR.
///
/// Fails with `RankDeficient` when the average loses rank (e.g. two antipodal
/// representatives with equal weights).
pub fn euclidean_mean_baseline(
    points: &[FlagPoint],
    weights: &WeightVector,
) -> Result<AverageReport> {
    let signature = common_signature(points, weights)?.clone();
    if points.len() == 1 {
        return Ok(single_point_report(&points[0], Method::EuclideanMean));
    }

    let mut avg = crate::numerics::Matrix::zeros(signature.ambient(), signature.sub_dim());
    for (point, &alpha) in points.iter().zip(weights.as_slice()) {
        avg += point.rep() * alpha;
    }
    avg /= weights.sum();

    let q = crate::numerics::thin_qr(&avg)?.q;
    let centroid = FlagPoint::new(q, signature)?;
    let objective = vec![weighted_sq_objective(points, weights, &centroid)?];
    Ok(AverageReport { centroid, objective, iterations: 1, method: Method::EuclideanMean })
}

/// Grassmannian-style baseline: the span average of the largest subspaces.
///
/// Diagonalizes `P = Σ_i α_i X^(i) X^(i)ᵀ` (full representatives) and keeps
/// the top `d_k` eigenvectors. The result carries the signature
/// `(1, 2, ..., d_k; d)` in eigenvalue order; the reported objective is still
/// evaluated under the dataset's signature so it can be compared with the
/// other methods.
pub fn gr_mean_baseline(points: &[FlagPoint], weights: &WeightVector) -> Result<AverageReport> {
    let signature = common_signature(points, weights)?.clone();
    if points.len() == 1 {
        return Ok(single_point_report(&points[0], Method::GrMean));
    }

    let d = signature.ambient();
    let sub = signature.sub_dim();
    let mut p = crate::numerics::Matrix::zeros(d, d);
    for (point, &alpha) in points.iter().zip(weights.as_slice()) {
        if alpha == 0.0 {
            continue;
        }
        p += point.rep() * point.rep().transpose() * alpha;
    }

    let eig = sym_eig(&p)?;
    let top = eig.vectors.columns(0, sub).into_owned();
    let out_signature = FlagSignature::new((1..=sub).collect(), d)?;
    let centroid = FlagPoint::new(top, out_signature)?;

    let in_data_signature = centroid.with_signature(signature)?;
    let objective = vec![weighted_sq_objective(points, weights, &in_data_signature)?];
    Ok(AverageReport { centroid, objective, iterations: 1, method: Method::GrMean })
}
