//! Rigid-motion averaging through the flag manifold.
//!
//! An SE(3) motion contracts to a 4×4 special orthogonal matrix (the polar
//! factor of its homogeneous form with the translation scaled by `1/λ`),
//! which embeds on the complete flag `(1,2,3;4)` as its first three columns.
//! Averaging happens there with the flag mean or median, and the chain runs
//! backwards: re-orient, complete to SO(4), expand to SE(3). The expansion
//! has a closed form, so the only genuinely iterative stage is the flag
//! averaging itself.

use nalgebra::{Matrix3, Matrix4, Vector3};

use crate::averaging::{
    flag_mean, flag_median, AverageReport, IrlsConfig, MeanConfig, MeanInit, MedianInit,
};
use crate::error::{Error, Result};
use crate::flag::{orient_complete_flag, FlagPoint, FlagSignature, WeightVector};
use crate::numerics::{svd, Matrix};

/// Orthonormality / determinant tolerance of the strict constructors.
const STRICT_TOL: f64 = 1e-10;
/// Largest drift the lenient paths repair by polar projection.
const REPROJECT_TOL: f64 = 1e-6;

fn max_abs_dev_from_identity(g: &Matrix3<f64>) -> f64 {
    let mut dev: f64 = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            let target = if i == j { 1.0 } else { 0.0 };
            dev = dev.max((g[(i, j)] - target).abs());
        }
    }
    dev
}

/// Closest rotation in the Frobenius sense (polar factor, sign-corrected).
fn nearest_rotation(m: &Matrix3<f64>) -> Result<Matrix3<f64>> {
    let dm = Matrix::from_column_slice(3, 3, m.as_slice());
    let f = svd(&dm)?;
    let mut u = f.u;
    if (&u * &f.v_t).determinant() < 0.0 {
        // Flip the weakest direction so the result lands on SO(3), not O(3).
        let last = u.ncols() - 1;
        u.column_mut(last).neg_mut();
    }
    let q = u * f.v_t;
    Ok(Matrix3::from_iterator(q.iter().copied()))
}

/// A rigid transformation of 3-space: rotation plus translation.
#[derive(Debug, Clone, PartialEq)]
pub struct RigidMotion {
    rotation: Matrix3<f64>,
    translation: Vector3<f64>,
}

impl RigidMotion {
    /// Requires `RᵀR = I` and `det R = 1`, both within `1e-10`.
    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self> {
        if rotation.iter().any(|x| !x.is_finite()) || translation.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput("motion has non-finite entries".into()));
        }
        let dev = max_abs_dev_from_identity(&(rotation.transpose() * rotation));
        if dev > STRICT_TOL {
            return Err(Error::NotOrthonormal { deviation: dev, tolerance: STRICT_TOL });
        }
        let det = rotation.determinant();
        if (det - 1.0).abs() > STRICT_TOL {
            return Err(Error::InvalidInput(format!(
                "rotation determinant {det:.12} is not +1"
            )));
        }
        Ok(RigidMotion { rotation, translation })
    }

    /// Accepts a rotation drifted up to `1e-6` off SO(3) and snaps it back by
    /// polar projection; within `1e-10` the matrix is taken as given.
    /// Reflections and larger drifts are rejected rather than repaired.
    pub fn reprojected(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self> {
        if rotation.iter().any(|x| !x.is_finite()) || translation.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput("motion has non-finite entries".into()));
        }
        let dev = max_abs_dev_from_identity(&(rotation.transpose() * rotation));
        if dev <= STRICT_TOL && (rotation.determinant() - 1.0).abs() <= STRICT_TOL {
            return Ok(RigidMotion { rotation, translation });
        }
        if dev > REPROJECT_TOL {
            return Err(Error::NotOrthonormal { deviation: dev, tolerance: REPROJECT_TOL });
        }
        if rotation.determinant() < 0.0 {
            return Err(Error::InvalidInput(
                "matrix is a reflection, not a drifted rotation".into(),
            ));
        }
        RigidMotion::new(nearest_rotation(&rotation)?, translation)
    }

    pub fn identity() -> Self {
        RigidMotion { rotation: Matrix3::identity(), translation: Vector3::zeros() }
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vector3<f64> {
        &self.translation
    }
}

/// A 4×4 orthogonal matrix with determinant `+1`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpecialOrthogonal4 {
    m: Matrix4<f64>,
}

impl SpecialOrthogonal4 {
    /// Requires `MᵀM = I` and `det M = 1`, both within `1e-10`.
    pub fn new(m: Matrix4<f64>) -> Result<Self> {
        if m.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput("matrix has non-finite entries".into()));
        }
        let gram = m.transpose() * m;
        let mut dev: f64 = 0.0;
        for i in 0..4 {
            for j in 0..4 {
                let target = if i == j { 1.0 } else { 0.0 };
                dev = dev.max((gram[(i, j)] - target).abs());
            }
        }
        if dev > STRICT_TOL {
            return Err(Error::NotOrthonormal { deviation: dev, tolerance: STRICT_TOL });
        }
        let det = m.determinant();
        if (det - 1.0).abs() > STRICT_TOL {
            return Err(Error::InvalidInput(format!("determinant {det:.12} is not +1")));
        }
        Ok(SpecialOrthogonal4 { m })
    }

    pub fn matrix(&self) -> &Matrix4<f64> {
        &self.m
    }
}

/// Scene scale `λ > 0` of the contraction: translations enter the orthogonal
/// form as `t/λ`, so `λ` decides how many scene units of translation weigh as
/// much as a radian of rotation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContractionParam {
    lambda: f64,
}

impl ContractionParam {
    pub fn new(lambda: f64) -> Result<Self> {
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(Error::InvalidInput(format!(
                "contraction scale must be positive, got {lambda}"
            )));
        }
        Ok(ContractionParam { lambda })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }
}

impl Default for ContractionParam {
    fn default() -> Self {
        ContractionParam { lambda: 1.0 }
    }
}

/// Weight of a scene unit of translation against rotation in [`pose_error`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoseErrorConfig {
    lambda_t: f64,
}

impl PoseErrorConfig {
    pub fn new(lambda_t: f64) -> Result<Self> {
        if !(lambda_t.is_finite() && lambda_t > 0.0) {
            return Err(Error::InvalidInput(format!(
                "translation weight must be positive, got {lambda_t}"
            )));
        }
        Ok(PoseErrorConfig { lambda_t })
    }

    pub fn lambda_t(&self) -> f64 {
        self.lambda_t
    }
}

impl Default for PoseErrorConfig {
    fn default() -> Self {
        PoseErrorConfig { lambda_t: 1.0 }
    }
}

/// Contract a rigid motion to SO(4): the polar factor `UVᵀ` of
///
/// ```text
/// [ R  t/λ ]
/// [ 0   1  ]
/// ```
///
/// Pure rotations are fixed points up to the block embedding: `t = 0` gives
/// `diag(R, 1)` exactly.
pub fn contract(motion: &RigidMotion, lam: ContractionParam) -> Result<SpecialOrthogonal4> {
    let mut a = Matrix::zeros(4, 4);
    for i in 0..3 {
        for j in 0..3 {
            a[(i, j)] = motion.rotation[(i, j)];
        }
        a[(i, 3)] = motion.translation[i] / lam.lambda();
    }
    a[(3, 3)] = 1.0;
    let f = svd(&a)?;
    let polar = f.u * f.v_t;
    SpecialOrthogonal4::new(Matrix4::from_iterator(polar.iter().copied()))
}

/// Default small-translation threshold of [`expand`], relative to `λ`.
const SMALL_T_REL: f64 = 1e-9;

/// Invert the contraction with the default small-translation threshold
/// `1e-9·λ`.
pub fn expand(m: &SpecialOrthogonal4, lam: ContractionParam) -> Result<RigidMotion> {
    expand_with_threshold(m, lam, SMALL_T_REL * lam.lambda())
}

/// Invert the contraction:
///
/// ```text
/// t = (2λ / M₄₄) · M₁:₃,₄
/// R = M₁:₃,₁:₃                                  if ‖t‖ < threshold
/// R = (M₄₄ t̂t̂ᵀ + (I - t̂t̂ᵀ))⁻¹ · M₁:₃,₁:₃        otherwise, t̂ = t/‖t‖
/// ```
///
/// The correction factor inverts in closed form (`t̂t̂ᵀ/M₄₄ + I - t̂t̂ᵀ`), and
/// the recovered rotation is snapped back to SO(3) by polar projection when
/// roundoff has pushed it off by more than `1e-10` but less than `1e-6`.
///
/// Fails with [`Error::ContractionSingularity`] when `|M₄₄| < 1e-12`: such
/// matrices sit at the horizon of the contraction and correspond to no finite
/// motion.
pub fn expand_with_threshold(
    m: &SpecialOrthogonal4,
    lam: ContractionParam,
    small_t_threshold: f64,
) -> Result<RigidMotion> {
    let mat = m.matrix();
    let m44 = mat[(3, 3)];
    if m44.abs() < 1e-12 {
        return Err(Error::ContractionSingularity { m44 });
    }
    let t = Vector3::new(mat[(0, 3)], mat[(1, 3)], mat[(2, 3)]) * (2.0 * lam.lambda() / m44);
    let block = mat.fixed_view::<3, 3>(0, 0).into_owned();
    let rotation = if t.norm() < small_t_threshold {
        block
    } else {
        let t_hat = t / t.norm();
        let outer = t_hat * t_hat.transpose();
        let k_inv = outer / m44 + (Matrix3::identity() - outer);
        k_inv * block
    };
    if rotation.iter().any(|x| !x.is_finite()) {
        return Err(Error::NumericalFailure("expanded rotation is not finite".into()));
    }
    RigidMotion::reprojected(rotation, t)
}

/// Embed an SO(4) point on the complete flag `(1,2,3;4)`: the representative
/// is the first three columns, and the column order carries the nesting.
pub fn so4_to_flag(m: &SpecialOrthogonal4) -> Result<FlagPoint> {
    let mat = m.matrix();
    let mut rep = Matrix::zeros(4, 3);
    for i in 0..4 {
        for j in 0..3 {
            rep[(i, j)] = mat[(i, j)];
        }
    }
    FlagPoint::new(rep, FlagSignature::new(vec![1, 2, 3], 4)?)
}

/// Complete a flag on `(1,2,3;4)` to SO(4).
///
/// The fourth column is the unit vector spanning the orthogonal complement,
/// computed as `(I - BBᵀ)z` for a deterministic seed (`e₄`, falling back
/// through `e₃, e₂, e₁` if a projection degenerates), with its sign fixed so
/// the determinant is `+1`. That sign rule makes this a function: composed
/// with [`so4_to_flag`] in either order it is the identity.
pub fn flag_to_so4(x: &FlagPoint) -> Result<SpecialOrthogonal4> {
    let expected = FlagSignature::new(vec![1, 2, 3], 4)?;
    if x.signature() != &expected {
        return Err(Error::SignatureMismatch(format!(
            "motion flags live on {expected}, got {}",
            x.signature()
        )));
    }
    let b = x.rep();
    let mut completion = None;
    for seed in (0..4).rev() {
        let mut z = Matrix::zeros(4, 1);
        z[(seed, 0)] = 1.0;
        let projected = &z - b * (b.transpose() * &z);
        let norm = projected.norm();
        if norm >= 1e-12 {
            completion = Some(projected / norm);
            break;
        }
    }
    let z_hat = completion.ok_or_else(|| {
        Error::NumericalFailure("no seed survives projection onto the complement".into())
    })?;

    let mut m = Matrix4::zeros();
    for i in 0..4 {
        for j in 0..3 {
            m[(i, j)] = b[(i, j)];
        }
        m[(i, 3)] = z_hat[(i, 0)];
    }
    if m.determinant() < 0.0 {
        for i in 0..4 {
            m[(i, 3)] = -m[(i, 3)];
        }
    }
    SpecialOrthogonal4::new(m)
}

/// Rotation angle `θ ∈ [0, π]` (radians) between two rotations: the angle of
/// `Q = aᵀb`, computed as `atan2(‖(Q - Qᵀ)∨‖/2, (tr Q - 1)/2)`.
///
/// The two-argument arctangent stays accurate across the whole range, where
/// `arccos` of the trace alone cannot resolve angles below `√ε ≈ 1.5e-8`.
pub fn rotation_angle(a: &Matrix3<f64>, b: &Matrix3<f64>) -> f64 {
    let q = a.transpose() * b;
    let sin = Vector3::new(
        q[(2, 1)] - q[(1, 2)],
        q[(0, 2)] - q[(2, 0)],
        q[(1, 0)] - q[(0, 1)],
    )
    .norm()
        / 2.0;
    let cos = (q.trace() - 1.0) / 2.0;
    sin.atan2(cos)
}

/// Pose distance `θ/π + λ_T · ‖t_a - t_b‖` where `θ` is the rotation angle
/// between the two rotations. The rotation term lies in `[0, 1]`.
pub fn pose_error(a: &RigidMotion, b: &RigidMotion, cfg: PoseErrorConfig) -> f64 {
    let rot = rotation_angle(&a.rotation, &b.rotation) / std::f64::consts::PI;
    rot + cfg.lambda_t() * (a.translation - b.translation).norm()
}

/// Configuration of [`average_motions`].
#[derive(Debug, Clone)]
pub struct MotionAverageConfig {
    /// Exponent of the per-point distance in the objective: `2` averages
    /// squared distances (flag mean), `1` absolute distances (flag median).
    pub q: u8,
    pub lambda: ContractionParam,
    /// Solver for `q = 2`; also drives the inner solves for `q = 1`.
    pub mean: MeanConfig,
    /// Reweighting loop for `q = 1`.
    pub irls: IrlsConfig,
}

impl Default for MotionAverageConfig {
    fn default() -> Self {
        MotionAverageConfig {
            q: 2,
            lambda: ContractionParam::default(),
            mean: MeanConfig::default(),
            irls: IrlsConfig::default(),
        }
    }
}

/// An averaged motion together with the flag-stage solve report.
#[derive(Debug, Clone)]
pub struct MotionAverage {
    pub motion: RigidMotion,
    /// Report of the flag mean or median that produced the estimate.
    pub report: AverageReport,
}

/// Average rigid motions robustly through the flag manifold.
///
/// Every motion is contracted to SO(4) and embedded on `(1,2,3;4)`; the flag
/// mean (`q = 2`) or median (`q = 1`) of the embeddings is re-oriented
/// against them, completed to SO(4), and expanded back to a motion. With
/// `q = 1` the estimate tolerates a substantial fraction of gross outliers.
pub fn average_motions(
    motions: &[RigidMotion],
    weights: &WeightVector,
    config: &MotionAverageConfig,
) -> Result<MotionAverage> {
    if motions.is_empty() {
        return Err(Error::EmptyInput("no motions to average".into()));
    }
    if config.q != 1 && config.q != 2 {
        return Err(Error::Config(format!("q must be 1 or 2, got {}", config.q)));
    }
    let flags: Vec<FlagPoint> = motions
        .iter()
        .map(|g| so4_to_flag(&contract(g, config.lambda)?))
        .collect::<Result<_>>()?;
    let report = match config.q {
        2 => flag_mean(&flags, weights, &config.mean)?,
        _ => flag_median(&flags, weights, &config.irls)?,
    };
    let oriented = orient_complete_flag(&report.centroid, &flags)?;
    let motion = expand(&flag_to_so4(&oriented)?, config.lambda)?;
    Ok(MotionAverage { motion, report })
}

/// An averaged rotation together with the flag-stage solve report.
#[derive(Debug, Clone)]
pub struct RotationAverage {
    pub rotation: Matrix3<f64>,
    pub report: AverageReport,
}

/// Average rotations by running [`average_motions`] with zero translations
/// and unit scale. The translation of the result must vanish (norm at most
/// `1e-8`); anything larger is reported as a numerical failure rather than
/// silently dropped.
pub fn average_rotations(
    rotations: &[Matrix3<f64>],
    weights: &WeightVector,
    config: &MotionAverageConfig,
) -> Result<RotationAverage> {
    let motions: Vec<RigidMotion> = rotations
        .iter()
        .map(|r| RigidMotion::new(*r, Vector3::zeros()))
        .collect::<Result<_>>()?;
    let config = MotionAverageConfig {
        lambda: ContractionParam::default(),
        ..config.clone()
    };
    let average = average_motions(&motions, weights, &config)?;
    let drift = average.motion.translation().norm();
    if drift > 1e-8 {
        return Err(Error::NumericalFailure(format!(
            "rotation average picked up translation of norm {drift:.3e}"
        )));
    }
    Ok(RotationAverage { rotation: *average.motion.rotation(), report: average.report })
}

/// `MeanConfig`/`IrlsConfig` pair whose inner random streams derive from one
/// stream, convenient for seeded experiment loops.
pub fn seeded_motion_config(q: u8, lambda: ContractionParam, rng: crate::numerics::RngStream) -> MotionAverageConfig {
    MotionAverageConfig {
        q,
        lambda,
        mean: MeanConfig {
            init: MeanInit::Random,
            trust_region: crate::stiefel::TrustRegionConfig {
                rng,
                ..crate::stiefel::TrustRegionConfig::default()
            },
        },
        irls: IrlsConfig {
            init: MedianInit::UnweightedMean,
            trust_region: crate::stiefel::TrustRegionConfig {
                rng: rng.derive(1),
                ..crate::stiefel::TrustRegionConfig::default()
            },
            ..IrlsConfig::default()
        },
    }
}
