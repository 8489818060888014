//! Averaging on flag manifolds.
//!
//! A flag is a nested chain of subspaces of `R^d`; flags of a fixed signature
//! form a smooth manifold that generalizes Grassmannians. This crate computes
//! weighted chordal means and medians of flag collections and applies them to
//! rigid-motion (SE(3)) and rotation averaging:
//!
//! * [`flag`]: signatures, orthonormal representatives, chordal distance,
//! * [`stiefel`]: Riemannian trust-region solver for the mean objective,
//! * [`averaging`]: flag-mean, IRLS flag-median and the Euclidean /
//!   eigenvector baselines,
//! * [`motion`]: SE(3) <-> SO(4) contraction and robust motion averaging,
//! * [`synth`]: synthetic data generators and reproducible experiment sweeps,
//! * [`io`] / [`plot`] / [`cli`]: file formats, SVG charts and the `flagstat`
//!   command-line tool.
//!
//! The `examples/` directory is the best entry point: each file is a small,
//! runnable walkthrough of one capability (`cargo run --release --example
//! flag_mean`, etc.).

pub mod averaging;
pub mod cli;
pub mod error;
pub mod flag;
pub mod io;
pub mod motion;
pub mod numerics;
pub mod plot;
pub mod stiefel;
pub mod synth;

pub use error::{Error, Result};
pub use flag::{chordal_distance, FlagPoint, FlagSignature, WeightVector};
pub use numerics::{Matrix, RngStream};
