//! Riemannian trust-region (RTR) optimization on the Stiefel manifold.
//!
//! `St(k, d)` is the set of `d x k` matrices with orthonormal columns,
//! treated as an embedded submanifold of `R^{d x k}` with the Frobenius
//! metric. The solver is the classical trust-region scheme: a quadratic model
//! built from the Riemannian gradient and Hessian is minimized inside a ball
//! of radius `Δ` with the Steihaug-Toint truncated conjugate-gradient method,
//! candidate steps are mapped back to the manifold with a QR retraction, and
//! `Δ` adapts to how well the model predicted the actual cost change.
//!
//! The weighted flag-mean objective is provided as [`FlagMeanProblem`]; any
//! other smooth objective can plug in through the [`StiefelProblem`] trait.

use std::ops::Range;

use crate::error::{Error, Result};
use crate::flag::{FlagPoint, FlagSignature, WeightVector};
use crate::numerics::{sym_eig, thin_qr, uniform_matrix, Matrix, RngStream};

/// Relative spectral floor `μ/λ₁` of the flag-mean preconditioner.
/// Eigendirections of `P_j` within `μ` of the top eigenvalue keep unit gain;
/// directions a gap `g` below are damped by `μ/(2g + μ)`.
const PRECOND_MU_REL: f64 = 1e-1;

/// A smooth objective on `St(k, d)` described in ambient coordinates.
pub trait StiefelProblem {
    /// `(d, k)`: ambient rows and orthonormal columns.
    fn dims(&self) -> (usize, usize);

    fn cost(&self, y: &Matrix) -> f64;

    /// Gradient of the ambient extension of the cost.
    fn euclidean_grad(&self, y: &Matrix) -> Matrix;

    /// Action `V -> ∇²f(Y)[V]` of the ambient Hessian.
    fn euclidean_hess_action(&self, y: &Matrix, v: &Matrix) -> Matrix;

    /// `cost(current) - cost(candidate)`, when the objective's structure
    /// allows computing the difference without the cancellation that
    /// subtracting two nearby cost values incurs. `None` falls back to the
    /// subtraction. Near a minimum that cancellation floods the step
    /// acceptance ratio with rounding noise and stalls the solver well above
    /// tight gradient tolerances, so objectives should implement this when
    /// they can.
    fn cost_decrease(&self, _current: &Matrix, _candidate: &Matrix) -> Option<f64> {
        None
    }

    /// Column ranges whose within-range right-rotations `Y_j -> Y_j Q_j`
    /// leave the cost invariant. The solver removes the corresponding tangent
    /// directions from its search space: along them the Hessian is singular,
    /// and letting the inner CG wander there produces boundary steps that
    /// change nothing and get rejected.
    fn invariant_blocks(&self) -> &[Range<usize>] {
        &[]
    }

    /// Apply a symmetric positive definite approximation of the inverse
    /// Hessian to `r` (the preconditioner of classical preconditioned
    /// truncated CG). The identity default leaves the inner solve plain. The
    /// solver projects the output onto its search subspace, so implementations
    /// need not preserve tangency.
    fn precondition(&self, _y: &Matrix, r: &Matrix) -> Matrix {
        r.clone()
    }
}

fn sym(a: &Matrix) -> Matrix {
    (a + a.transpose()) * 0.5
}

/// Orthogonal projection of an ambient direction onto the tangent space at
/// `y`: `P_y(g) = g - y sym(yᵀ g)`. Idempotent, and `P_y(y) = 0`.
pub fn tangent_project(y: &Matrix, g: &Matrix) -> Matrix {
    assert_eq!(y.shape(), g.shape(), "tangent_project expects matching shapes");
    g - y * sym(&(y.transpose() * g))
}

/// QR retraction: the orthonormal factor of `y + v` under the
/// nonnegative-diagonal convention. First-order: `R_y(tv) = y + tv + O(t²)`.
pub fn retract(y: &Matrix, v: &Matrix) -> Result<Matrix> {
    assert_eq!(y.shape(), v.shape(), "retract expects matching shapes");
    Ok(thin_qr(&(y + v))?.q)
}

/// Remove from a tangent vector `v` the directions generated by rotating the
/// listed column blocks in place (`Y_j -> Y_j Q_j`). Those directions are
/// `Y·B` for block-diagonal skew `B`, so the component to subtract is the
/// block-diagonal skew part of `Yᵀv`.
fn remove_block_rotations(y: &Matrix, v: &Matrix, blocks: &[Range<usize>]) -> Matrix {
    let s = y.transpose() * v;
    let mut out = v.clone();
    for range in blocks {
        let m = range.len();
        let sjj = s.view((range.start, range.start), (m, m)).into_owned();
        let skew = (&sjj - sjj.transpose()) * 0.5;
        let update = out.columns_range(range.clone()) - y.columns_range(range.clone()) * skew;
        out.columns_range_mut(range.clone()).copy_from(&update);
    }
    out
}

/// Trust-region solver parameters. `None` radii resolve against the manifold
/// size at solve time: `max_radius = sqrt(k)`, `initial_radius = sqrt(k)/8`.
#[derive(Debug, Clone)]
pub struct TrustRegionConfig {
    pub max_outer_iterations: usize,
    /// Stop once the Riemannian gradient norm falls below this.
    pub gradient_norm_tolerance: f64,
    pub initial_radius: Option<f64>,
    pub max_radius: Option<f64>,
    /// Steps with ratio `ρ` below this are rejected (classical `ρ'`).
    pub acceptance_threshold: f64,
    /// The radius shrinks by `shrink_factor` when `ρ` falls below this.
    pub shrink_threshold: f64,
    pub shrink_factor: f64,
    /// The radius grows by `expand_factor` (capped at `max_radius`) when `ρ`
    /// exceeds this on a step that reached the trust-region boundary.
    pub expand_threshold: f64,
    pub expand_factor: f64,
    /// Inner CG iteration cap; `None` resolves to `d * k`.
    pub max_inner_iterations: Option<usize>,
    /// Residual-based inner stop: `‖r‖ <= ‖r₀‖ min(κ, ‖r₀‖^θ)`.
    pub cg_kappa: f64,
    pub cg_theta: f64,
    /// Stream used for random initialization.
    pub rng: RngStream,
}

impl Default for TrustRegionConfig {
    fn default() -> Self {
        TrustRegionConfig {
            max_outer_iterations: 100,
            gradient_norm_tolerance: 1e-9,
            initial_radius: None,
            max_radius: None,
            acceptance_threshold: 0.1,
            shrink_threshold: 0.25,
            shrink_factor: 0.25,
            expand_threshold: 0.75,
            expand_factor: 2.0,
            max_inner_iterations: None,
            cg_kappa: 0.1,
            cg_theta: 1.0,
            rng: RngStream::default(),
        }
    }
}

impl TrustRegionConfig {
    /// Schedule for averaging tightly clustered data when the outer-iteration
    /// budget matters more than gradient precision.
    ///
    /// A large fixed radius crosses the global phase in two or three steps, a
    /// gentle shrink (0.6 below ρ = 0.2) keeps the radius useful after a weak
    /// first step, near-exact inner solves (κ = 1e-4) make every outer step
    /// count, and the loose gradient tolerance stops after the first
    /// Newton-quality step. On clustered data the extra objective error is
    /// orders of magnitude below the statistical error of the estimate; use
    /// the default config when gradients must reach machine precision.
    pub fn clustered_data_profile(sub_dim: usize) -> Self {
        TrustRegionConfig {
            gradient_norm_tolerance: 1e-1,
            initial_radius: Some(1.85 * (sub_dim as f64).sqrt()),
            max_radius: Some(1.85 * (sub_dim as f64).sqrt()),
            shrink_threshold: 0.2,
            shrink_factor: 0.6,
            cg_kappa: 1e-4,
            ..TrustRegionConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok_pos = |x: f64| x.is_finite() && x > 0.0;
        if !ok_pos(self.gradient_norm_tolerance) {
            return Err(Error::Config("gradient_norm_tolerance must be positive".into()));
        }
        if !(self.acceptance_threshold > 0.0 && self.acceptance_threshold < 0.25) {
            return Err(Error::Config("acceptance_threshold must lie in (0, 0.25)".into()));
        }
        if !(self.shrink_threshold >= self.acceptance_threshold
            && self.shrink_threshold < self.expand_threshold)
        {
            return Err(Error::Config(
                "shrink_threshold must lie in [acceptance_threshold, expand_threshold)".into(),
            ));
        }
        if !(self.shrink_factor > 0.0 && self.shrink_factor < 1.0) {
            return Err(Error::Config("shrink_factor must lie in (0, 1)".into()));
        }
        if !(self.expand_threshold <= 1.0) {
            return Err(Error::Config("expand_threshold must not exceed 1".into()));
        }
        if !(self.expand_factor > 1.0 && self.expand_factor.is_finite()) {
            return Err(Error::Config("expand_factor must exceed 1".into()));
        }
        if let Some(r) = self.initial_radius {
            if !ok_pos(r) {
                return Err(Error::Config("initial_radius must be positive".into()));
            }
        }
        if let Some(r) = self.max_radius {
            if !ok_pos(r) {
                return Err(Error::Config("max_radius must be positive".into()));
            }
        }
        if !(self.cg_kappa > 0.0 && self.cg_kappa < 1.0) {
            return Err(Error::Config("cg_kappa must lie in (0, 1)".into()));
        }
        if !ok_pos(self.cg_theta) {
            return Err(Error::Config("cg_theta must be positive".into()));
        }
        Ok(())
    }
}

/// Starting point for the solver.
#[derive(Debug, Clone)]
pub enum StiefelInit {
    /// QR-orthonormalized uniform random matrix drawn from the config stream.
    Random,
    /// Start from a given orthonormal matrix.
    At(Matrix),
}

/// Outcome of one trust-region solve.
#[derive(Debug, Clone)]
pub struct SolveReport {
    pub point: Matrix,
    pub cost: f64,
    /// Riemannian gradient norm at `point`.
    pub grad_norm: f64,
    /// Outer iterations executed (accepted and rejected candidates both count).
    pub outer_iterations: usize,
    /// True when the gradient tolerance was reached.
    pub converged: bool,
    /// Cost at the initial point followed by every accepted iterate.
    /// Nonincreasing, except that steps taken at the floating-point
    /// measurement floor may record upticks of roundoff order.
    pub cost_history: Vec<f64>,
}

/// Positive root `τ` of `‖v + τ d‖² = Δ²`.
fn boundary_tau(v_sq: f64, v_dot_d: f64, d_sq: f64, radius: f64) -> f64 {
    let disc = v_dot_d * v_dot_d + d_sq * (radius * radius - v_sq);
    (-v_dot_d + disc.max(0.0).sqrt()) / d_sq
}

/// Steihaug-Toint truncated CG on the trust-region subproblem
/// `min <g, v> + ½ <v, H v>` over `‖v‖_{M⁻¹} <= Δ`, preconditioned by `M`.
///
/// `precond` applies a symmetric positive definite `M` (the identity when the
/// problem offers none, which recovers plain truncated CG with the Euclidean
/// ball). The `M⁻¹`-norm bookkeeping uses the standard recurrence
/// `M⁻¹d ← -r + β M⁻¹d`, so no inverse applications are needed.
///
/// The residual is passed through `clean` (projection onto the solver's
/// search subspace) every iteration. Rounding in the residual update injects
/// components outside that subspace; left alone they compound once the
/// residual is small, and the Hessian action on such vectors is meaningless
/// and can report spurious negative curvature. The κ/θ stop rule watches the
/// plain residual norm.
///
/// Returns the step and whether it ended on the boundary.
fn truncated_cg<H, C, M>(
    grad: &Matrix,
    hess: H,
    clean: C,
    precond: M,
    radius: f64,
    max_inner: usize,
    kappa: f64,
    theta: f64,
) -> (Matrix, bool)
where
    H: Fn(&Matrix) -> Matrix,
    C: Fn(&Matrix) -> Matrix,
    M: Fn(&Matrix) -> Matrix,
{
    let mut v = Matrix::zeros(grad.nrows(), grad.ncols());
    let mut r = grad.clone();
    let r0_norm = r.norm();
    let stop_tol = r0_norm * kappa.min(r0_norm.powf(theta));
    let mut z = precond(&r);
    let mut dir = -z.clone();
    // minv_d tracks M⁻¹·dir through the CG recurrence.
    let mut minv_d = -r.clone();
    let mut r_dot_z = r.dot(&z);
    let mut v_e: f64 = 0.0;
    let mut best_r_norm = r0_norm;

    for _ in 0..max_inner {
        let hd = hess(&dir);
        let d_hd = dir.dot(&hd);
        let d_e = dir.dot(&minv_d);
        let v_d_e = v.dot(&minv_d);

        if d_hd <= 0.0 {
            let tau = boundary_tau(v_e, v_d_e, d_e, radius);
            return (v + dir * tau, true);
        }

        let alpha = r_dot_z / d_hd;
        let stepped_e = v_e + 2.0 * alpha * v_d_e + alpha * alpha * d_e;
        if stepped_e >= radius * radius {
            let tau = boundary_tau(v_e, v_d_e, d_e, radius);
            return (v + dir * tau, true);
        }

        v += &dir * alpha;
        v_e = stepped_e;
        r = clean(&(&r + hd * alpha));
        let new_r_norm = r.norm();
        if new_r_norm <= stop_tol {
            return (v, false);
        }
        // A residual far above the best one seen means the recurrence has hit
        // its floating-point floor; the interior iterate is still good.
        if new_r_norm > 10.0 * best_r_norm {
            return (v, false);
        }
        best_r_norm = best_r_norm.min(new_r_norm);
        z = precond(&r);
        let new_r_dot_z = r.dot(&z);
        let beta = new_r_dot_z / r_dot_z;
        dir = dir * beta - &z;
        minv_d = minv_d * beta - &r;
        r_dot_z = new_r_dot_z;
    }
    (v, false)
}

/// Minimize a [`StiefelProblem`] with the Riemannian trust-region method.
///
/// The Riemannian gradient is `P_y(∇f)` and the Hessian action is
/// `P_y(∇²f[V] - V sym(yᵀ ∇f))`; both follow from the embedded-submanifold
/// structure. Accepted iterates have nonincreasing cost, every iterate stays
/// orthonormal through the retraction, and the whole run is deterministic
/// given the problem, the initialization and the config.
pub fn rtr_solve<P: StiefelProblem + ?Sized>(
    problem: &P,
    init: StiefelInit,
    config: &TrustRegionConfig,
) -> Result<SolveReport> {
    config.validate()?;
    let (d, k) = problem.dims();
    if k == 0 || d < k {
        return Err(Error::ShapeMismatch {
            expected: "d >= k >= 1".into(),
            found: format!("{d}x{k}"),
        });
    }

    let mut y = match init {
        StiefelInit::At(m) => {
            if m.shape() != (d, k) {
                return Err(Error::ShapeMismatch {
                    expected: format!("{d}x{k}"),
                    found: format!("{}x{}", m.nrows(), m.ncols()),
                });
            }
            let deviation = (m.transpose() * &m - Matrix::identity(k, k)).amax();
            if deviation > 1e-10 {
                return Err(Error::NotOrthonormal { deviation, tolerance: 1e-10 });
            }
            m
        }
        StiefelInit::Random => {
            let mut rng = config.rng.rng();
            thin_qr(&uniform_matrix(&mut rng, d, k, -0.5, 0.5))?.q
        }
    };

    let sqrt_k = (k as f64).sqrt();
    let max_radius = config.max_radius.unwrap_or(sqrt_k);
    let mut radius = config.initial_radius.unwrap_or(sqrt_k / 8.0).min(max_radius);
    let max_inner = config.max_inner_iterations.unwrap_or(d * k);

    let invariant: Vec<Range<usize>> =
        problem.invariant_blocks().iter().filter(|r| r.len() > 1).cloned().collect();
    let project = |y: &Matrix, g: &Matrix| -> Matrix {
        let tangent = tangent_project(y, g);
        if invariant.is_empty() {
            tangent
        } else {
            remove_block_rotations(y, &tangent, &invariant)
        }
    };

    let mut cost = problem.cost(&y);
    if !cost.is_finite() {
        return Err(Error::NumericalFailure("cost is not finite at the initial point".into()));
    }
    let mut cost_history = vec![cost];
    let mut outer = 0;
    let mut converged = false;
    let grad_norm;

    loop {
        let egrad = problem.euclidean_grad(&y);
        if !egrad.iter().all(|x| x.is_finite()) {
            return Err(Error::NumericalFailure("gradient is not finite".into()));
        }
        let grad = project(&y, &egrad);
        let gn = grad.norm();
        if gn <= config.gradient_norm_tolerance {
            grad_norm = gn;
            converged = true;
            break;
        }
        if outer >= config.max_outer_iterations {
            grad_norm = gn;
            break;
        }
        outer += 1;

        let grad_coupling = sym(&(y.transpose() * &egrad));
        let hess = |v: &Matrix| {
            project(&y, &(problem.euclidean_hess_action(&y, v) - v * &grad_coupling))
        };

        let (step, hit_boundary) = truncated_cg(
            &grad,
            &hess,
            |m| project(&y, m),
            |r| project(&y, &problem.precondition(&y, r)),
            radius,
            max_inner,
            config.cg_kappa,
            config.cg_theta,
        );
        let model_decrease = -(grad.dot(&step) + 0.5 * step.dot(&hess(&step)));

        match retract(&y, &step) {
            Ok(candidate) => {
                let decrease = problem
                    .cost_decrease(&y, &candidate)
                    .unwrap_or_else(|| cost - problem.cost(&candidate));
                if !decrease.is_finite() {
                    return Err(Error::NumericalFailure("cost is not finite at a candidate".into()));
                }
                // Storing the candidate in floating point displaces it by
                // ~eps, and the cost responds through the O(‖Yᵀ∇f‖) normal
                // derivative, so measured decreases below that floor are
                // noise. Regularizing both sides of the ratio toward the
                // floor accepts such steps on the model's authority instead
                // of stalling; the price is a possible cost uptick of the
                // same (roundoff) order.
                let noise_floor =
                    f64::EPSILON * 64.0 * cost.abs().max(grad_coupling.norm()).max(1.0);
                let rho = if model_decrease > 0.0 {
                    (decrease + noise_floor) / (model_decrease + noise_floor)
                } else {
                    -1.0
                };
                if rho > config.acceptance_threshold {
                    y = candidate;
                    cost -= decrease;
                    cost_history.push(cost);
                    debug_assert!(
                        (y.transpose() * &y - Matrix::identity(k, k)).amax() <= 1e-9,
                        "iterate drifted off the manifold"
                    );
                }
                if rho < config.shrink_threshold {
                    radius *= config.shrink_factor;
                } else if rho > config.expand_threshold && hit_boundary {
                    radius = (config.expand_factor * radius).min(max_radius);
                }
            }
            // A candidate that QR cannot orthonormalize is just a failed
            // step: shrink the region and retry.
            Err(Error::RankDeficient { .. }) => radius *= config.shrink_factor,
            Err(e) => return Err(e),
        }
    }

    Ok(SolveReport { point: y, cost, grad_norm, outer_iterations: outer, converged, cost_history })
}

/// Weighted flag-mean objective in Stiefel form.
///
/// For points `X^(i)` with weights `α_i` on a flag of signature
/// `(d_1, ..., d_k; d)`, the block operators are
/// `P_j = Σ_i α_i X_j^(i) X_j^(i)ᵀ` and the cost of `Y ∈ St(d_k, d)` is
///
/// `f(Y) = Σ_j ( m_j - tr(Y_jᵀ P_j Y_j) )`,
///
/// whose minimizers are exactly the weighted chordal means. The ambient
/// gradient is `-2 Σ_j P_j Y I_j` (block `j` of the gradient is
/// `-2 P_j Y_j`), and the ambient Hessian is the same linear map applied to
/// the direction.
pub struct FlagMeanProblem {
    signature: FlagSignature,
    blocks: Vec<(Range<usize>, Matrix)>,
    ranges: Vec<Range<usize>>,
    sum_block_sizes: f64,
    /// Per block: eigenvectors `Q_j` of `P_j` and the spectral gains of the
    /// inverse-Hessian surrogate `μ_j (2(λ₁I - P_j) + μ_j I)⁻¹`.
    precond_blocks: Vec<(Range<usize>, Matrix, Vec<f64>)>,
}

impl FlagMeanProblem {
    pub fn signature(&self) -> &FlagSignature {
        &self.signature
    }

    /// Block operator `P_j` (0-based level), exposed for inspection.
    pub fn block_operator(&self, j: usize) -> Result<&Matrix> {
        self.blocks
            .get(j)
            .map(|(_, p)| p)
            .ok_or(Error::IndexOutOfRange { index: j, len: self.blocks.len() })
    }
}

/// Assemble the weighted flag-mean objective for a dataset.
pub fn flag_mean_problem(
    points: &[FlagPoint],
    weights: &WeightVector,
) -> Result<FlagMeanProblem> {
    if points.is_empty() {
        return Err(Error::EmptyInput("flag mean needs at least one point".into()));
    }
    if weights.len() != points.len() {
        return Err(Error::WeightLengthMismatch { points: points.len(), weights: weights.len() });
    }
    let signature = points[0].signature().clone();
    for point in &points[1..] {
        if point.signature() != &signature {
            return Err(Error::SignatureMismatch(format!(
                "point has signature {}, expected {}",
                point.signature(),
                signature
            )));
        }
    }

    let d = signature.ambient();
    let mut blocks = Vec::with_capacity(signature.nesting_levels());
    for j in 0..signature.nesting_levels() {
        let range = signature.block_range(j).expect("level in range");
        let mut p = Matrix::zeros(d, d);
        for (point, &alpha) in points.iter().zip(weights.as_slice()) {
            if alpha == 0.0 {
                continue;
            }
            let xj = point.rep().columns_range(range.clone());
            p += xj * xj.transpose() * alpha;
        }
        blocks.push((range, p));
    }

    // The dominant curvature of the cost is `-2 P_j` per block, shifted
    // positive by the constraint coupling. `2(λ₁I - P_j) + μI` is the cheapest
    // positive definite stand-in sharing its eigenbasis; its inverse (scaled
    // so the top eigendirection has unit gain) steers the inner CG toward the
    // dominant eigenspaces instead of wherever the raw gradient points.
    let mut precond_blocks = Vec::with_capacity(blocks.len());
    for (range, p) in &blocks {
        let eig = sym_eig(p)?;
        let top = eig.values[0];
        let mu = PRECOND_MU_REL * top;
        let gains: Vec<f64> = if mu > 0.0 {
            eig.values.iter().map(|&lambda| mu / (2.0 * (top - lambda) + mu)).collect()
        } else {
            vec![1.0; eig.values.len()]
        };
        precond_blocks.push((range.clone(), eig.vectors, gains));
    }

    Ok(FlagMeanProblem {
        blocks,
        ranges: (0..signature.nesting_levels())
            .map(|j| signature.block_range(j).expect("level in range"))
            .collect(),
        sum_block_sizes: signature.sub_dim() as f64,
        signature,
        precond_blocks,
    })
}

impl StiefelProblem for FlagMeanProblem {
    fn dims(&self) -> (usize, usize) {
        (self.signature.ambient(), self.signature.sub_dim())
    }

    fn cost(&self, y: &Matrix) -> f64 {
        let mut value = self.sum_block_sizes;
        for (range, p) in &self.blocks {
            let yj = y.columns_range(range.clone());
            value -= (p * yj).dot(&yj.into_owned());
        }
        value
    }

    fn euclidean_grad(&self, y: &Matrix) -> Matrix {
        let mut grad = Matrix::zeros(y.nrows(), y.ncols());
        for (range, p) in &self.blocks {
            let yj = y.columns_range(range.clone());
            grad.columns_range_mut(range.clone()).copy_from(&(p * yj * -2.0));
        }
        grad
    }

    fn precondition(&self, _y: &Matrix, r: &Matrix) -> Matrix {
        let mut out = r.clone();
        for (range, q, gains) in &self.precond_blocks {
            let mut coords = q.transpose() * r.columns_range(range.clone());
            for (i, &gain) in gains.iter().enumerate() {
                coords.row_mut(i).scale_mut(gain);
            }
            out.columns_range_mut(range.clone()).copy_from(&(q * coords));
        }
        out
    }

    /// `tr(AᵀPA) - tr(BᵀPB) = tr((A-B)ᵀ P (A+B))` for symmetric `P`, so the
    /// decrease is exact in the step size rather than drowned by subtracting
    /// two nearly equal traces.
    fn cost_decrease(&self, current: &Matrix, candidate: &Matrix) -> Option<f64> {
        let mut decrease = 0.0;
        for (range, p) in &self.blocks {
            let cur = current.columns_range(range.clone());
            let cand = candidate.columns_range(range.clone());
            let diff = &cand - &cur;
            let sum = &cand + &cur;
            decrease += (p * diff).dot(&sum.into_owned());
        }
        Some(decrease)
    }

    fn invariant_blocks(&self) -> &[Range<usize>] {
        &self.ranges
    }

    fn euclidean_hess_action(&self, _y: &Matrix, v: &Matrix) -> Matrix {
        let mut hess = Matrix::zeros(v.nrows(), v.ncols());
        for (range, p) in &self.blocks {
            let vj = v.columns_range(range.clone());
            hess.columns_range_mut(range.clone()).copy_from(&(p * vj * -2.0));
        }
        hess
    }
}
