//! Robustness of the flag median under gross contamination.
//!
//! A cluster of 100 points on `(1, 3; 10)` is polluted with 30 far-away
//! outliers. The IRLS median shrugs them off while the mean and the two
//! non-flag baselines are dragged away from the true center.
//!
//! Run with `cargo run --release --example flag_median_outliers`.

use flagstat::averaging::{
    euclidean_mean_baseline, flag_mean, flag_median, gr_mean_baseline, IrlsConfig, MeanConfig,
};
use flagstat::numerics::RngStream;
use flagstat::synth::{gen_flag_cluster, FlagClusterSpec};
use flagstat::{chordal_distance, FlagPoint, FlagSignature, Result, WeightVector};

fn main() -> Result<()> {
    let signature = FlagSignature::new(vec![1, 3], 10)?;
    let spec = FlagClusterSpec {
        signature: signature.clone(),
        count: 100,
        noise: 0.001,
        outlier_count: 30,
        outlier_noise: 1.0,
        rng: RngStream::new(5150, 0),
    };
    let (center, points) = gen_flag_cluster(&spec)?;
    let weights = WeightVector::uniform(points.len())?;

    println!("70 inliers (noise 0.001) + 30 outliers (noise 1.0) on {signature}");
    println!("{:<16} {:>14} {:>12} {:>6}", "method", "dist to center", "objective", "iters");

    let median = flag_median(&points, &weights, &IrlsConfig::default())?;
    report("flag median", &median.centroid, &center, median.final_objective(), median.iterations)?;

    let mean = flag_mean(&points, &weights, &MeanConfig::default())?;
    report("flag mean", &mean.centroid, &center, mean.final_objective(), mean.iterations)?;

    let euclid = euclidean_mean_baseline(&points, &weights)?;
    report("euclidean mean", &euclid.centroid, &center, euclid.final_objective(), 1)?;

    let gr = gr_mean_baseline(&points, &weights)?;
    let gr_scored = gr.centroid.with_signature(signature)?;
    report("gr mean", &gr_scored, &center, gr.final_objective(), 1)?;

    println!("\nIRLS objective trace (sum of absolute distances):");
    for (i, value) in median.objective.iter().enumerate() {
        println!("  outer {i}: {value:.6}");
    }
    Ok(())
}

fn report(
    name: &str,
    estimate: &FlagPoint,
    center: &FlagPoint,
    objective: f64,
    iterations: usize,
) -> Result<()> {
    let d = chordal_distance(estimate, center)?;
    println!("{name:<16} {d:>14.6e} {objective:>12.4} {iterations:>6}");
    Ok(())
}
