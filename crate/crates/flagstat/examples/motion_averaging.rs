//! Average noisy rigid motions through the flag manifold.
//!
//! Each SE(3) motion is contracted to an SO(4) matrix (exactly invertible
//! while `|t| <= lambda`), read as a flag on `(1, 2, 3; 4)`, averaged there,
//! and expanded back. The median variant (`q = 1`) stays put when a third of
//! the motions are replaced by garbage.
//!
//! Run with `cargo run --release --example motion_averaging`.

use flagstat::motion::{
    average_motions, contract, expand, pose_error, seeded_motion_config, ContractionParam,
    PoseErrorConfig,
};
use flagstat::numerics::RngStream;
use flagstat::synth::{gen_motion_cluster, MotionClusterSpec};
use flagstat::{Result, WeightVector};

fn main() -> Result<()> {
    // Round trip first: contraction then expansion is the identity up to
    // floating point, so no information is lost on the way to the flag.
    let (motion, _) = gen_motion_cluster(&MotionClusterSpec {
        count: 1,
        axis_noise_deg: 0.0,
        translation_noise: 0.0,
        outlier_fraction: 0.0,
        scene_radius: 0.9,
        rng: RngStream::new(1, 0),
    })?;
    let lambda = ContractionParam::default();
    let back = expand(&contract(&motion, lambda)?, lambda)?;
    println!("contract/expand round trip error: {:.3e}", pose_error(&motion, &back, PoseErrorConfig::default()));

    // 20 motions around a common pose, 6 of them outliers.
    let (center, motions) = gen_motion_cluster(&MotionClusterSpec {
        count: 20,
        axis_noise_deg: 3.0,
        translation_noise: 0.01,
        outlier_fraction: 0.3,
        scene_radius: 1.0,
        rng: RngStream::new(42, 0),
    })?;
    let weights = WeightVector::uniform(motions.len())?;

    println!("\n20 motions, axis noise 3 deg, translation noise 0.01, 30% outliers");
    for q in [2u8, 1u8] {
        let config = seeded_motion_config(q, lambda, RngStream::new(7, q as u64));
        let avg = average_motions(&motions, &weights, &config)?;
        let err = pose_error(&avg.motion, &center, PoseErrorConfig::default());
        let name = if q == 2 { "flag mean  (q=2)" } else { "flag median(q=1)" };
        println!("  {name}: pose error {err:.6}, {} flag iterations", avg.report.iterations);
    }
    Ok(())
}
