//! Build flag points by hand and measure chordal distances.
//!
//! A flag of signature `(1, 3; 6)` is a line nested inside a 3-dimensional
//! subspace of `R^6`, represented by a 6x3 matrix with orthonormal columns:
//! column 1 spans the line, columns 1..3 span the subspace. The chordal
//! distance compares the two flags block by block, so it sees more structure
//! than the plain subspace (Grassmannian) distance.
//!
//! Run with `cargo run --example chordal_distance`.

use flagstat::numerics::{thin_qr, uniform_matrix, Matrix, RngStream};
use flagstat::{chordal_distance, FlagPoint, FlagSignature, Result};

fn main() -> Result<()> {
    let signature = FlagSignature::new(vec![1, 3], 6)?;
    println!("signature {signature}");

    // Coordinate flags: span{e1} in span{e1,e2,e3} versus span{e4} in
    // span{e4,e5,e6}. Completely orthogonal, so the distance is maximal:
    // sqrt(sum of block dimensions) = sqrt(1 + 2).
    let a = FlagPoint::new(coordinate_columns(6, &[0, 1, 2]), signature.clone())?;
    let b = FlagPoint::new(coordinate_columns(6, &[3, 4, 5]), signature.clone())?;
    println!("orthogonal flags   d = {:.6}  (max = {:.6})", chordal_distance(&a, &b)?, 3f64.sqrt());

    // Same chain of subspaces, different representative: rotating the basis
    // of the second block does not move the flag.
    let mut rotated = a.rep().clone();
    let (c, s) = (0.3f64.cos(), 0.3f64.sin());
    let col1 = rotated.column(1).into_owned();
    let col2 = rotated.column(2).into_owned();
    rotated.set_column(1, &(&col1 * c + &col2 * s));
    rotated.set_column(2, &(&col2 * c - &col1 * s));
    let a_rotated = FlagPoint::new(rotated, signature.clone())?;
    println!("block rotation     d = {:.2e}", chordal_distance(&a, &a_rotated)?);

    // Swapping which column spans the line keeps the outer subspace but
    // changes the nested line, so the flags differ even though their spans
    // are identical.
    let mut swapped = a.rep().clone();
    swapped.swap_columns(0, 1);
    let a_swapped = FlagPoint::new(swapped, signature.clone())?;
    println!("swapped line       d = {:.6}", chordal_distance(&a, &a_swapped)?);

    // Random flags are drawn as QR factors of a uniform matrix.
    let mut rng = RngStream::new(7, 0).rng();
    let raw = uniform_matrix(&mut rng, 6, 3, -0.5, 0.5);
    let random = FlagPoint::new(thin_qr(&raw)?.q, signature)?;
    println!("random vs e-flag   d = {:.6}", chordal_distance(&a, &random)?);
    Ok(())
}

fn coordinate_columns(rows: usize, picks: &[usize]) -> Matrix {
    let mut m = Matrix::zeros(rows, picks.len());
    for (j, &i) in picks.iter().enumerate() {
        m[(i, j)] = 1.0;
    }
    m
}
