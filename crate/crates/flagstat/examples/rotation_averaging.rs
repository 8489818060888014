//! Single rotation averaging with the flag median.
//!
//! Rotation averaging is motion averaging with zero translations: the SO(3)
//! block embeds into SO(4) unchanged and the flag machinery applies as-is.
//! Here 40 noisy measurements of one rotation, a quarter of them uniformly
//! random, are reduced to a single estimate.
//!
//! Run with `cargo run --release --example rotation_averaging`.

use flagstat::motion::{
    average_rotations, rotation_angle, seeded_motion_config, ContractionParam,
};
use flagstat::numerics::RngStream;
use flagstat::synth::{gen_motion_cluster, MotionClusterSpec};
use flagstat::{Result, WeightVector};

fn main() -> Result<()> {
    let (center, motions) = gen_motion_cluster(&MotionClusterSpec {
        count: 40,
        axis_noise_deg: 5.0,
        translation_noise: 0.0,
        outlier_fraction: 0.25,
        scene_radius: 0.0,
        rng: RngStream::new(314, 0),
    })?;
    let rotations: Vec<_> = motions.iter().map(|m| *m.rotation()).collect();
    let weights = WeightVector::uniform(rotations.len())?;

    println!("40 rotations, 5 deg axis noise, 25% uniform outliers");
    for q in [2u8, 1u8] {
        let config = seeded_motion_config(q, ContractionParam::default(), RngStream::new(8, q as u64));
        let avg = average_rotations(&rotations, &weights, &config)?;
        let err_deg = rotation_angle(&avg.rotation, center.rotation()).to_degrees();
        let name = if q == 2 { "mean  " } else { "median" };
        println!("  {name}: geodesic error {err_deg:.4} deg");
    }
    Ok(())
}
