//! Flag manifold points, signatures and the chordal distance.
//!
//! A flag of signature `(d_1, ..., d_k; d)` is a nested chain of subspaces
//! `V_1 ⊂ V_2 ⊂ ... ⊂ V_k` of `R^d` with `dim V_j = d_j`. We represent a flag
//! by a `d x d_k` matrix with orthonormal columns: columns `1..=d_1` span
//! `V_1`, columns `d_1+1..=d_2` extend it to `V_2`, and so on. Block `j`
//! (`m_j = d_j - d_{j-1}` columns) is only determined up to right
//! multiplication by an `m_j x m_j` orthogonal matrix; every operation in this
//! module is invariant under that ambiguity.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use std::fmt;

use crate::error::{Error, Result};
use crate::numerics::Matrix;

/// Orthonormality tolerance admitted at construction, `max |XᵀX - I|`.
pub const FLAG_ORTHONORMALITY_TOL: f64 = 1e-10;

/// Radicand slack for the chordal distance: tiny negative values are rounding,
/// anything below `-CHORDAL_RADICAND_TOL` is a genuine inconsistency.
pub const CHORDAL_RADICAND_TOL: f64 = 1e-12;

/// Subspace dimensions `(d_1, ..., d_k)` inside an ambient dimension `d`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawFlagSignature", into = "RawFlagSignature")]
pub struct FlagSignature {
    dims: Vec<usize>,
    ambient: usize,
}

/// Wire form of [`FlagSignature`]; conversion re-runs validation.
#[derive(Serialize, Deserialize)]
struct RawFlagSignature {
    dims: Vec<usize>,
    ambient: usize,
}

impl TryFrom<RawFlagSignature> for FlagSignature {
    type Error = Error;

    fn try_from(raw: RawFlagSignature) -> Result<Self> {
        FlagSignature::new(raw.dims, raw.ambient)
    }
}

impl From<FlagSignature> for RawFlagSignature {
    fn from(signature: FlagSignature) -> Self {
        RawFlagSignature { dims: signature.dims, ambient: signature.ambient }
    }
}

impl FlagSignature {
    /// Validated signature: `0 < d_1 < ... < d_k <= d`.
    pub fn new(dims: Vec<usize>, ambient: usize) -> Result<Self> {
        if dims.is_empty() {
            return Err(Error::EmptyInput("signature needs at least one dimension".into()));
        }
        if dims[0] == 0 {
            return Err(Error::InvalidInput("signature dimensions must be positive".into()));
        }
        if dims.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidInput(format!(
                "signature dimensions must be strictly increasing, got {dims:?}"
            )));
        }
        let last = *dims.last().expect("nonempty");
        if last > ambient {
            return Err(Error::InvalidInput(format!(
                "largest dimension {last} exceeds ambient dimension {ambient}"
            )));
        }
        Ok(FlagSignature { dims, ambient })
    }

    /// The Grassmannian `Gr(k, d)` seen as the one-level flag `(k; d)`.
    pub fn grassmannian(k: usize, d: usize) -> Result<Self> {
        FlagSignature::new(vec![k], d)
    }

    /// The complete signature `(1, 2, ..., d-1; d)`.
    pub fn complete(d: usize) -> Result<Self> {
        if d < 2 {
            return Err(Error::InvalidInput("complete signature needs ambient >= 2".into()));
        }
        FlagSignature::new((1..d).collect(), d)
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn ambient(&self) -> usize {
        self.ambient
    }

    /// Number of nesting levels `k`.
    pub fn nesting_levels(&self) -> usize {
        self.dims.len()
    }

    /// Total number of representative columns, `d_k`.
    pub fn sub_dim(&self) -> usize {
        *self.dims.last().expect("nonempty")
    }

    /// Block sizes `m_j = d_j - d_{j-1}`.
    pub fn block_sizes(&self) -> Vec<usize> {
        let mut sizes = Vec::with_capacity(self.dims.len());
        let mut prev = 0;
        for &d in &self.dims {
            sizes.push(d - prev);
            prev = d;
        }
        sizes
    }

    /// Column range of block `j` (0-based) in the representative.
    pub fn block_range(&self, j: usize) -> Result<std::ops::Range<usize>> {
        if j >= self.dims.len() {
            return Err(Error::IndexOutOfRange { index: j, len: self.dims.len() });
        }
        let start = if j == 0 { 0 } else { self.dims[j - 1] };
        Ok(start..self.dims[j])
    }

    /// True for `(1, 2, ..., d-1; d)`: all blocks are single columns and the
    /// chain stops one short of the ambient dimension.
    pub fn is_complete(&self) -> bool {
        self.dims.len() + 1 == self.ambient
            && self.dims.iter().enumerate().all(|(i, &d)| d == i + 1)
    }
}

impl fmt::Display for FlagSignature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let dims: Vec<String> = self.dims.iter().map(|d| d.to_string()).collect();
        write!(f, "({};{})", dims.join(","), self.ambient)
    }
}

/// Indicator matrix of block `j`: a `d_k x d_k` diagonal 0/1 matrix with ones
/// exactly at the columns of block `j`.
pub fn indicator(signature: &FlagSignature, j: usize) -> Result<Matrix> {
    let range = signature.block_range(j)?;
    let n = signature.sub_dim();
    let mut m = Matrix::zeros(n, n);
    for i in range {
        m[(i, i)] = 1.0;
    }
    Ok(m)
}

/// A point on a flag manifold: a signature plus an orthonormal representative.
#[derive(Debug, Clone, PartialEq)]
pub struct FlagPoint {
    signature: FlagSignature,
    rep: Matrix,
}

impl FlagPoint {
    /// Wrap a representative after checking shape, finiteness and
    /// orthonormality (`max |XᵀX - I| <= 1e-10`).
    pub fn new(rep: Matrix, signature: FlagSignature) -> Result<Self> {
        let (rows, cols) = rep.shape();
        if rows != signature.ambient() || cols != signature.sub_dim() {
            return Err(Error::ShapeMismatch {
                expected: format!("{}x{}", signature.ambient(), signature.sub_dim()),
                found: format!("{rows}x{cols}"),
            });
        }
        if !rep.iter().all(|x| x.is_finite()) {
            return Err(Error::InvalidInput("representative contains non-finite entries".into()));
        }
        let deviation = (rep.transpose() * &rep - Matrix::identity(cols, cols)).amax();
        if deviation > FLAG_ORTHONORMALITY_TOL {
            return Err(Error::NotOrthonormal { deviation, tolerance: FLAG_ORTHONORMALITY_TOL });
        }
        Ok(FlagPoint { signature, rep })
    }

    pub fn signature(&self) -> &FlagSignature {
        &self.signature
    }

    /// The full `d x d_k` representative.
    pub fn rep(&self) -> &Matrix {
        &self.rep
    }

    /// Columns of block `j` (0-based), copied verbatim.
    pub fn block(&self, j: usize) -> Result<Matrix> {
        let range = self.signature.block_range(j)?;
        Ok(self.rep.columns_range(range).into_owned())
    }

    /// Reinterpret the representative under another signature with the same
    /// shape (used to compare centroids produced under different signatures).
    pub fn with_signature(&self, signature: FlagSignature) -> Result<Self> {
        FlagPoint::new(self.rep.clone(), signature)
    }
}

/// Chordal distance between two flags of the same signature:
///
/// `d_c(x, y) = sqrt( Σ_j ( m_j - ‖X_jᵀ Y_j‖_F² ) )`.
///
/// The distance ranges over `[0, sqrt(d_k)]` and does not depend on the
/// representatives chosen for either flag.
pub fn chordal_distance(x: &FlagPoint, y: &FlagPoint) -> Result<f64> {
    chordal_distance_squared(x, y).map(f64::sqrt)
}

/// Squared chordal distance; same guards as [`chordal_distance`].
pub fn chordal_distance_squared(x: &FlagPoint, y: &FlagPoint) -> Result<f64> {
    if x.signature != y.signature {
        return Err(Error::SignatureMismatch(format!(
            "cannot compare {} with {}",
            x.signature, y.signature
        )));
    }
    let mut radicand = x.signature.sub_dim() as f64;
    for j in 0..x.signature.nesting_levels() {
        let range = x.signature.block_range(j).expect("level in range");
        let xj = x.rep.columns_range(range.clone());
        let yj = y.rep.columns_range(range);
        radicand -= (xj.transpose() * yj).norm_squared();
    }
    if radicand < -CHORDAL_RADICAND_TOL {
        return Err(Error::NumericalFailure(format!(
            "chordal distance radicand {radicand:.3e} below -{CHORDAL_RADICAND_TOL:.0e}"
        )));
    }
    Ok(radicand.max(0.0))
}

/// Nonnegative per-point weights; at least one must be strictly positive.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector(Vec<f64>);

impl WeightVector {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::EmptyInput("weight vector is empty".into()));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidInput(
                "weights must be finite and nonnegative".into(),
            ));
        }
        if weights.iter().all(|w| *w == 0.0) {
            return Err(Error::InvalidInput("at least one weight must be positive".into()));
        }
        Ok(WeightVector(weights))
    }

    /// `n` unit weights.
    pub fn uniform(n: usize) -> Result<Self> {
        WeightVector::new(vec![1.0; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn sum(&self) -> f64 {
        self.0.iter().sum()
    }
}

/// Resolve the per-column sign ambiguity of a complete flag against a dataset.
///
/// Only complete signatures `(1, ..., d-1; d)` qualify: every block is a
/// single column, so the quotient ambiguity is exactly one sign per column.
/// Column `j` of `mu` is flipped whenever it points away from the Euclidean
/// mean of the dataset's `j`-th columns. Chordal distances are unaffected.
pub fn orient_complete_flag(mu: &FlagPoint, data: &[FlagPoint]) -> Result<FlagPoint> {
    if !mu.signature.is_complete() {
        return Err(Error::UnsupportedSignature(format!(
            "orientation needs a complete signature, got {}",
            mu.signature
        )));
    }
    if data.is_empty() {
        return Err(Error::EmptyInput("orientation needs at least one data point".into()));
    }
    for point in data {
        if point.signature != mu.signature {
            return Err(Error::SignatureMismatch(format!(
                "data point has signature {}, expected {}",
                point.signature, mu.signature
            )));
        }
    }

    let d = mu.signature.ambient();
    let k = mu.signature.nesting_levels();
    let mut rep = mu.rep.clone();
    for j in 0..k {
        let mut z = DVector::zeros(d);
        for point in data {
            z += point.rep.column(j);
        }
        z /= data.len() as f64;
        if z.dot(&rep.column(j).into_owned()) < 0.0 {
            rep.column_mut(j).neg_mut();
        }
    }
    FlagPoint::new(rep, mu.signature.clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{thin_qr, uniform_matrix, RngStream};

    fn random_flag(rng: &mut rand_chacha::ChaCha8Rng, sig: &FlagSignature) -> FlagPoint {
        let raw = uniform_matrix(rng, sig.ambient(), sig.sub_dim(), -0.5, 0.5);
        FlagPoint::new(thin_qr(&raw).unwrap().q, sig.clone()).unwrap()
    }

    /// Independent elementwise route to the distance, explicit loops only.
    fn chordal_by_loops(x: &FlagPoint, y: &FlagPoint) -> f64 {
        let sig = x.signature();
        let mut radicand = sig.sub_dim() as f64;
        for j in 0..sig.nesting_levels() {
            let range = sig.block_range(j).unwrap();
            for a in range.clone() {
                for b in range.clone() {
                    let mut dot = 0.0;
                    for r in 0..sig.ambient() {
                        dot += x.rep()[(r, a)] * y.rep()[(r, b)];
                    }
                    radicand -= dot * dot;
                }
            }
        }
        radicand.max(0.0).sqrt()
    }

    #[test]
    fn signature_validation() {
        assert!(FlagSignature::new(vec![1, 3], 10).is_ok());
        assert!(FlagSignature::new(vec![], 10).is_err());
        assert!(FlagSignature::new(vec![0, 2], 10).is_err());
        assert!(FlagSignature::new(vec![2, 2], 10).is_err());
        assert!(FlagSignature::new(vec![3, 1], 10).is_err());
        assert!(FlagSignature::new(vec![11], 10).is_err());
        assert_eq!(FlagSignature::new(vec![1, 3], 10).unwrap().block_sizes(), vec![1, 2]);
        assert_eq!(FlagSignature::grassmannian(3, 8).unwrap().dims(), &[3]);
        let complete = FlagSignature::complete(4).unwrap();
        assert_eq!(complete.dims(), &[1, 2, 3]);
        assert!(complete.is_complete());
        assert!(!FlagSignature::new(vec![1, 3], 4).unwrap().is_complete());
        assert!(!FlagSignature::new(vec![1, 2], 4).unwrap().is_complete());
    }

    #[test]
    fn flag_point_accepts_identity_columns() {
        let sig = FlagSignature::new(vec![1, 3], 10).unwrap();
        let rep = Matrix::identity(10, 3);
        let x = FlagPoint::new(rep, sig).unwrap();
        assert_eq!(x.block(0).unwrap().shape(), (10, 1));
        assert_eq!(x.block(1).unwrap().shape(), (10, 2));
    }

    #[test]
    fn flag_point_rejects_duplicate_column() {
        let sig = FlagSignature::new(vec![1, 2], 10).unwrap();
        let mut rep = Matrix::zeros(10, 2);
        rep[(0, 0)] = 1.0;
        rep[(0, 1)] = 1.0;
        match FlagPoint::new(rep, sig) {
            Err(Error::NotOrthonormal { deviation, .. }) => assert!(deviation > 0.5),
            other => panic!("expected NotOrthonormal, got {other:?}"),
        }
    }

    #[test]
    fn flag_point_rejects_wrong_shape() {
        let sig = FlagSignature::new(vec![1, 3], 10).unwrap();
        assert!(matches!(
            FlagPoint::new(Matrix::identity(10, 2), sig),
            Err(Error::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn blocks_partition_the_representative() {
        let mut rng = RngStream::new(21, 0).rng();
        let sig = FlagSignature::new(vec![2, 3, 5], 9).unwrap();
        let x = random_flag(&mut rng, &sig);
        let mut rebuilt = Matrix::zeros(9, 5);
        let mut col = 0;
        for j in 0..sig.nesting_levels() {
            let block = x.block(j).unwrap();
            for c in 0..block.ncols() {
                rebuilt.set_column(col, &block.column(c));
                col += 1;
            }
        }
        assert_eq!(rebuilt, *x.rep());
        assert!(matches!(x.block(3), Err(Error::IndexOutOfRange { index: 3, len: 3 })));
    }

    #[test]
    fn indicator_examples() {
        let sig = FlagSignature::new(vec![1, 3], 4).unwrap();
        let i1 = indicator(&sig, 0).unwrap();
        let i2 = indicator(&sig, 1).unwrap();
        assert_eq!(i1.diagonal().as_slice(), &[1.0, 0.0, 0.0]);
        assert_eq!(i2.diagonal().as_slice(), &[0.0, 1.0, 1.0]);
        assert_eq!(&i1 + &i2, Matrix::identity(3, 3));

        let gr = FlagSignature::grassmannian(4, 9).unwrap();
        assert_eq!(indicator(&gr, 0).unwrap(), Matrix::identity(4, 4));
        assert!(indicator(&gr, 1).is_err());
    }

    #[test]
    fn indicator_selects_block_projector() {
        let mut rng = RngStream::new(22, 0).rng();
        let sig = FlagSignature::new(vec![1, 3, 4], 7).unwrap();
        let x = random_flag(&mut rng, &sig);
        for j in 0..sig.nesting_levels() {
            let ij = indicator(&sig, j).unwrap();
            let via_indicator = x.rep() * &ij * x.rep().transpose();
            let block = x.block(j).unwrap();
            let direct = &block * block.transpose();
            assert!((via_indicator - direct).amax() < 1e-14);
        }
    }

    #[test]
    fn distance_to_self_is_zero() {
        let mut rng = RngStream::new(23, 0).rng();
        let sig = FlagSignature::new(vec![1, 3], 10).unwrap();
        let x = random_flag(&mut rng, &sig);
        assert!(chordal_distance(&x, &x).unwrap() < 1e-12);
    }

    #[test]
    fn orthogonal_lines_have_distance_one() {
        let sig = FlagSignature::grassmannian(1, 2).unwrap();
        let e1 = FlagPoint::new(Matrix::from_column_slice(2, 1, &[1.0, 0.0]), sig.clone()).unwrap();
        let e2 = FlagPoint::new(Matrix::from_column_slice(2, 1, &[0.0, 1.0]), sig).unwrap();
        assert!((chordal_distance(&e1, &e2).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn distance_matches_elementwise_loops() {
        let mut rng = RngStream::new(24, 0).rng();
        for sig in [
            FlagSignature::new(vec![1, 3], 10).unwrap(),
            FlagSignature::new(vec![2, 4, 5], 8).unwrap(),
            FlagSignature::grassmannian(3, 6).unwrap(),
        ] {
            for _ in 0..20 {
                let x = random_flag(&mut rng, &sig);
                let y = random_flag(&mut rng, &sig);
                let fast = chordal_distance(&x, &y).unwrap();
                let slow = chordal_by_loops(&x, &y);
                assert!((fast - slow).abs() < 1e-12);
                assert!((fast - chordal_distance(&y, &x).unwrap()).abs() < 1e-13);
                assert!((0.0..=(sig.sub_dim() as f64).sqrt() + 1e-12).contains(&fast));
            }
        }
    }

    #[test]
    fn distance_ignores_block_rotations() {
        let mut rng = RngStream::new(25, 0).rng();
        let sig = FlagSignature::new(vec![1, 3, 6], 9).unwrap();
        for _ in 0..20 {
            let x = random_flag(&mut rng, &sig);
            let y = random_flag(&mut rng, &sig);
            let mut rotated = x.rep().clone();
            for j in 0..sig.nesting_levels() {
                let range = sig.block_range(j).unwrap();
                let m = range.len();
                let q = thin_qr(&uniform_matrix(&mut rng, m, m, -1.0, 1.0)).unwrap().q;
                let block = rotated.columns_range(range.clone()).into_owned() * q;
                rotated.columns_range_mut(range).copy_from(&block);
            }
            let x_rot = FlagPoint::new(rotated, sig.clone()).unwrap();
            let d1 = chordal_distance(&x, &y).unwrap();
            let d2 = chordal_distance(&x_rot, &y).unwrap();
            assert!((d1 - d2).abs() < 1e-10);
            assert!(chordal_distance(&x, &x_rot).unwrap() < 1e-7);
        }
    }

    #[test]
    fn distance_rejects_signature_mismatch() {
        let mut rng = RngStream::new(26, 0).rng();
        let a = random_flag(&mut rng, &FlagSignature::new(vec![1, 3], 10).unwrap());
        let b = random_flag(&mut rng, &FlagSignature::new(vec![2, 3], 10).unwrap());
        assert!(matches!(chordal_distance(&a, &b), Err(Error::SignatureMismatch(_))));
    }

    #[test]
    fn weight_vector_validation() {
        assert!(WeightVector::new(vec![1.0, 0.0, 2.0]).is_ok());
        assert!(WeightVector::new(vec![]).is_err());
        assert!(WeightVector::new(vec![0.0, 0.0]).is_err());
        assert!(WeightVector::new(vec![1.0, -0.1]).is_err());
        assert!(WeightVector::new(vec![1.0, f64::NAN]).is_err());
        assert_eq!(WeightVector::uniform(3).unwrap().sum(), 3.0);
    }

    #[test]
    fn orientation_flips_toward_data() {
        let mut rng = RngStream::new(27, 0).rng();
        let sig = FlagSignature::complete(4).unwrap();
        let x = random_flag(&mut rng, &sig);
        let data = vec![x.clone()];

        let mut flipped_rep = x.rep().clone();
        flipped_rep.column_mut(0).neg_mut();
        flipped_rep.column_mut(2).neg_mut();
        let flipped = FlagPoint::new(flipped_rep, sig.clone()).unwrap();

        let oriented = orient_complete_flag(&flipped, &data).unwrap();
        assert!((oriented.rep() - x.rep()).amax() < 1e-14);

        // Already aligned input is returned unchanged.
        let same = orient_complete_flag(&x, &data).unwrap();
        assert_eq!(same.rep(), x.rep());
    }

    #[test]
    fn orientation_preserves_distances() {
        let mut rng = RngStream::new(28, 0).rng();
        let sig = FlagSignature::complete(5).unwrap();
        let x = random_flag(&mut rng, &sig);
        let y = random_flag(&mut rng, &sig);
        let data: Vec<FlagPoint> = (0..4).map(|_| random_flag(&mut rng, &sig)).collect();
        let oriented = orient_complete_flag(&x, &data).unwrap();
        let before = chordal_distance(&x, &y).unwrap();
        let after = chordal_distance(&oriented, &y).unwrap();
        assert!((before - after).abs() < 1e-13);
    }

    #[test]
    fn orientation_rejects_incomplete_signatures() {
        let mut rng = RngStream::new(29, 0).rng();
        let sig = FlagSignature::new(vec![1, 3], 10).unwrap();
        let x = random_flag(&mut rng, &sig);
        assert!(matches!(
            orient_complete_flag(&x, &[x.clone()]),
            Err(Error::UnsupportedSignature(_))
        ));
    }
}
