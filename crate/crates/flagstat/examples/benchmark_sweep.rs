//! Run a seeded benchmark sweep and render the result as CSV and SVG.
//!
//! Presets mirror the synthetic setups used throughout the crate's test
//! suite; here the flag-outlier sweep is trimmed to 5 trials so it finishes
//! quickly. Rows are generated in a canonical order and every trial derives
//! its randomness from `base_seed`, so reruns reproduce the files byte for
//! byte (`flagstat bench` is a thin wrapper around the same calls).
//!
//! Run with `cargo run --release --example benchmark_sweep`.

use flagstat::io::write_text_atomic;
use flagstat::plot::{line_chart, Series};
use flagstat::synth::{run_experiment, ExperimentConfig, ExperimentKind};
use flagstat::Result;

fn main() -> Result<()> {
    let kind = ExperimentKind::preset("flag-outlier-sweep").expect("preset exists");
    let methods = kind.default_methods();
    let config = ExperimentConfig { kind, trials: 5, base_seed: 1000, methods, timing: false };

    let table = run_experiment(&config)?;
    let summary = table.aggregate();

    println!("{:<16} {:<16} {:>12} {:>12}", "cell", "method", "mean error", "std");
    for cell in &summary {
        println!(
            "{:<16} {:<16} {:>12.4e} {:>12.4e}",
            cell.cell, cell.method, cell.mean_error, cell.std_error
        );
    }

    // One series per method, x = grid cell index, y = mean error.
    let mut series: Vec<Series> = Vec::new();
    for cell in &summary {
        let label = cell.method.to_string();
        let entry = match series.iter_mut().find(|s| s.label == label) {
            Some(entry) => entry,
            None => {
                series.push(Series { label, points: Vec::new() });
                series.last_mut().expect("just pushed")
            }
        };
        entry.points.push((cell.cell_index as f64, cell.mean_error));
    }

    write_text_atomic("outlier-sweep.csv".as_ref(), &table.to_csv())?;
    let chart = line_chart("flag-outlier-sweep", "grid cell", "mean error", &series);
    write_text_atomic("outlier-sweep.svg".as_ref(), &chart)?;
    println!("\nwrote outlier-sweep.csv and outlier-sweep.svg");
    Ok(())
}
