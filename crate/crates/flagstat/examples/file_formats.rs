//! The JSON file formats shared by the library and the `flagstat` CLI.
//!
//! Flag sets carry their signature and row-major representatives; motion
//! sets carry row-major rotations and translations; weights are a bare
//! array. Writes go through a temp file and an atomic rename, reads
//! re-validate orthonormality, so a file that loads is a file that is valid.
//!
//! Run with `cargo run --example file_formats`.

use flagstat::io::{read_flag_set, read_motion_set, write_flag_set, write_motion_set};
use flagstat::motion::RigidMotion;
use flagstat::numerics::{thin_qr, uniform_matrix, RngStream};
use flagstat::{chordal_distance, FlagPoint, FlagSignature, Result};
use nalgebra::{Matrix3, Vector3};

fn main() -> Result<()> {
    let dir = std::env::temp_dir().join("flagstat-formats");
    std::fs::create_dir_all(&dir)?;

    let signature = FlagSignature::new(vec![1, 2], 5)?;
    let mut rng = RngStream::new(11, 0).rng();
    let points: Vec<FlagPoint> = (0..3)
        .map(|_| {
            let raw = uniform_matrix(&mut rng, 5, 2, -0.5, 0.5);
            FlagPoint::new(thin_qr(&raw)?.q, signature.clone())
        })
        .collect::<Result<_>>()?;

    let flag_path = dir.join("points.json");
    write_flag_set(&flag_path, &points)?;
    let loaded = read_flag_set(&flag_path)?;
    println!("flag set: wrote {} points, read {} back", points.len(), loaded.len());
    for (a, b) in points.iter().zip(&loaded) {
        assert_eq!(a.rep(), b.rep(), "round trip is bit-exact");
        assert!(chordal_distance(a, b)? < 1e-7);
    }
    println!("--- {} ---", flag_path.display());
    print!("{}", std::fs::read_to_string(&flag_path)?);

    let angle = 0.4f64;
    let rotation = Matrix3::new(
        angle.cos(), -angle.sin(), 0.0,
        angle.sin(), angle.cos(), 0.0,
        0.0, 0.0, 1.0,
    );
    let motions = vec![
        RigidMotion::identity(),
        RigidMotion::new(rotation, Vector3::new(0.1, -0.2, 0.05))?,
    ];
    let motion_path = dir.join("motions.json");
    write_motion_set(&motion_path, &motions)?;
    let loaded = read_motion_set(&motion_path)?;
    println!("\nmotion set: read {} motions back", loaded.len());
    println!("--- {} ---", motion_path.display());
    print!("{}", std::fs::read_to_string(&motion_path)?);
    Ok(())
}
