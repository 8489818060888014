//! Dense linear-algebra kernels and reproducible random streams.
//!
//! Everything downstream works with `f64` matrices in column-major
//! [`nalgebra`] storage. The factorization wrappers pin down the sign and
//! ordering conventions the rest of the crate relies on:
//!
//! * [`thin_qr`]: thin factors with a nonnegative diagonal of `R`,
//! * [`svd`]: nonnegative singular values, sorted nonincreasing,
//! * [`sym_eig`]: eigenvalues sorted nonincreasing with matching columns.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub type Matrix = DMatrix<f64>;

/// Numerical rank tolerance: a diagonal entry of `R` below this (relative to
/// the magnitude of the input) marks the column as linearly dependent.
pub const RANK_TOL: f64 = 1e-12;

/// Orthonormality slack granted to factorization outputs, `max |QᵀQ - I|`.
pub const QR_ORTHONORMALITY_TOL: f64 = 1e-12;

fn check_finite(a: &Matrix, what: &str) -> Result<()> {
    if a.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("{what} contains non-finite entries")))
    }
}

/// Thin QR factors of a tall matrix.
#[derive(Debug, Clone)]
pub struct QrFactors {
    /// `rows x cols`, orthonormal columns.
    pub q: Matrix,
    /// `cols x cols`, upper triangular with nonnegative diagonal.
    pub r: Matrix,
}

/// Thin QR factorization of `a` (`rows >= cols`) with the sign convention
/// `diag(R) >= 0`, which makes the factorization unique for full-rank input.
///
/// Orthonormal input is reproduced: `thin_qr(Q).q == Q` up to roundoff.
pub fn thin_qr(a: &Matrix) -> Result<QrFactors> {
    let (rows, cols) = a.shape();
    if cols == 0 || rows < cols {
        return Err(Error::ShapeMismatch {
            expected: "rows >= cols >= 1".into(),
            found: format!("{rows}x{cols}"),
        });
    }
    check_finite(a, "matrix")?;

    let qr = a.clone().qr();
    let mut q = qr.q();
    let mut r = qr.r();

    // Column scale used for the relative rank test; exact zero input still
    // gets a positive threshold so it is reported as rank deficient.
    let scale = a.amax();
    let tol = if scale > 0.0 { RANK_TOL * scale } else { f64::MIN_POSITIVE };
    for j in 0..cols {
        if r[(j, j)].abs() < tol {
            return Err(Error::RankDeficient { column: j });
        }
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
            r.row_mut(j).neg_mut();
        }
    }
    Ok(QrFactors { q, r })
}

/// Singular value decomposition factors, `a = u * diag(s) * v_t`.
#[derive(Debug, Clone)]
pub struct SvdFactors {
    pub u: Matrix,
    /// Nonnegative, sorted nonincreasing.
    pub singular_values: DVector<f64>,
    pub v_t: Matrix,
}

/// Thin SVD of an arbitrary matrix.
pub fn svd(a: &Matrix) -> Result<SvdFactors> {
    let (rows, cols) = a.shape();
    if rows == 0 || cols == 0 {
        return Err(Error::ShapeMismatch {
            expected: "nonempty matrix".into(),
            found: format!("{rows}x{cols}"),
        });
    }
    check_finite(a, "matrix")?;

    let svd = nalgebra::SVD::try_new(a.clone(), true, true, f64::EPSILON, 1000)
        .ok_or_else(|| Error::NumericalFailure("SVD did not converge".into()))?;
    Ok(SvdFactors {
        u: svd.u.expect("u requested"),
        singular_values: svd.singular_values,
        v_t: svd.v_t.expect("v_t requested"),
    })
}

/// Symmetric eigendecomposition factors, `s = vectors * diag(values) * vectorsᵀ`.
#[derive(Debug, Clone)]
pub struct EigFactors {
    /// Sorted nonincreasing.
    pub values: Vec<f64>,
    /// Orthonormal; column `i` pairs with `values[i]`.
    pub vectors: Matrix,
}

/// Eigendecomposition of a symmetric matrix, eigenvalues sorted nonincreasing.
///
/// Symmetry is checked up to `1e-10 * max|S|`; anything beyond that is
/// rejected rather than silently symmetrized.
pub fn sym_eig(s: &Matrix) -> Result<EigFactors> {
    let (rows, cols) = s.shape();
    if rows != cols || rows == 0 {
        return Err(Error::ShapeMismatch {
            expected: "square nonempty matrix".into(),
            found: format!("{rows}x{cols}"),
        });
    }
    check_finite(s, "matrix")?;

    let scale = s.amax();
    let asym = (s - s.transpose()).amax();
    if asym > 1e-10 * scale.max(f64::MIN_POSITIVE) {
        return Err(Error::InvalidInput(format!(
            "matrix is not symmetric: max |S - Sᵀ| = {asym:.3e}"
        )));
    }

    let eig = nalgebra::SymmetricEigen::try_new(s.clone(), f64::EPSILON, 10_000)
        .ok_or_else(|| Error::NumericalFailure("eigendecomposition did not converge".into()))?;

    let n = rows;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        eig.eigenvalues[j]
            .partial_cmp(&eig.eigenvalues[i])
            .expect("finite eigenvalues")
            .then(i.cmp(&j))
    });
    let values: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = Matrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    Ok(EigFactors { values, vectors })
}

/// Identity of a reproducible random stream: a base seed plus a stream id.
///
/// Streams with distinct ids are statistically independent, and a stream's
/// output depends on nothing but `(seed, stream)`, so trials can run in any
/// order (or in parallel) without changing any draw.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RngStream {
    pub seed: u64,
    pub stream: u64,
}

/// splitmix64 finalizer; bijective on u64.
fn mix(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl RngStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        RngStream { seed, stream }
    }

    /// Child stream for a sub-task; distinct salts give distinct streams.
    pub fn derive(self, salt: u64) -> Self {
        RngStream { seed: self.seed, stream: mix(self.stream ^ mix(salt)) }
    }

    /// Instantiate the generator positioned at the start of this stream.
    pub fn rng(self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream);
        rng
    }
}

impl Default for RngStream {
    fn default() -> Self {
        RngStream::new(0, 0)
    }
}

/// One draw from the half-open interval `[lo, hi)`.
pub fn uniform_sample(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    assert!(lo < hi && lo.is_finite() && hi.is_finite(), "invalid interval [{lo}, {hi})");
    lo + (hi - lo) * rng.gen::<f64>()
}

/// Matrix with i.i.d. entries from `[lo, hi)`, filled row by row.
pub fn uniform_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, lo: f64, hi: f64) -> Matrix {
    let mut m = Matrix::zeros(rows, cols);
    for i in 0..rows {
        for j in 0..cols {
            m[(i, j)] = uniform_sample(rng, lo, hi);
        }
    }
    m
}

/// One standard normal draw.
pub fn normal_sample(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(rand_distr::StandardNormal)
}

/// Matrix with i.i.d. standard normal entries, filled row by row.
pub fn normal_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix {
    let mut m = Matrix::zeros(rows, cols);
    for i in 0..rows {
        for j in 0..cols {
            m[(i, j)] = normal_sample(rng);
        }
    }
    m
}
