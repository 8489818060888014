//! File formats: flag sets, motion sets and weights as JSON, tables as CSV.
//!
//! JSON is used for structured inputs because it is human-inspectable and
//! diff-friendly; numbers serialize in shortest-round-trip form, so reading
//! a written file reproduces every double bit for bit. All writes go through
//! a temp-file-and-rename so a crash never leaves a half-written file.
//!
//! A flag set stores one signature and the row-major representative of each
//! point:
//!
//! ```json
//! {"signature": {"dims": [1, 2], "ambient": 4}, "points": [[...], [...]]}
//! ```
//!
//! A motion set stores row-major rotations with their translations:
//!
//! ```json
//! {"motions": [{"rotation": [9 reals], "translation": [3 reals]}]}
//! ```
//!
//! A weights file is a bare JSON array of positive reals.

use std::fs;
use std::io::Write;
use std::path::Path;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flag::{FlagPoint, FlagSignature, WeightVector};
use crate::motion::RigidMotion;
use crate::numerics::Matrix;

#[derive(Serialize, Deserialize)]
struct FlagSetFile {
    signature: FlagSignature,
    points: Vec<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
struct MotionSetFile {
    motions: Vec<MotionEntry>,
}

#[derive(Serialize, Deserialize)]
struct MotionEntry {
    rotation: Vec<f64>,
    translation: Vec<f64>,
}

/// Write `contents` to `path` atomically: a temp file in the same directory
/// is filled, flushed and renamed over the target.
pub fn write_text_atomic(path: &Path, contents: &str) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut file = tempfile::NamedTempFile::new_in(dir)?;
    file.write_all(contents.as_bytes())?;
    file.flush()?;
    file.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

/// Write a flag set. All points must share one signature.
pub fn write_flag_set(path: &Path, points: &[FlagPoint]) -> Result<()> {
    let first = points
        .first()
        .ok_or_else(|| Error::EmptyInput("cannot write a flag set with no points".into()))?;
    let signature = first.signature();
    for (i, p) in points.iter().enumerate() {
        if p.signature() != signature {
            return Err(Error::SignatureMismatch(format!(
                "point {i} has signature {}, expected {signature}",
                p.signature()
            )));
        }
    }
    let file = FlagSetFile {
        signature: signature.clone(),
        points: points.iter().map(|p| p.rep().transpose().as_slice().to_vec()).collect(),
    };
    write_text_atomic(path, &serde_json::to_string_pretty(&file)?)
}

/// Read a flag set, validating every point against the file's signature.
pub fn read_flag_set(path: &Path) -> Result<Vec<FlagPoint>> {
    let file: FlagSetFile = serde_json::from_str(&fs::read_to_string(path)?)?;
    if file.points.is_empty() {
        return Err(Error::EmptyInput("flag set has no points".into()));
    }
    let (d, d_k) = (file.signature.ambient(), file.signature.sub_dim());
    file.points
        .iter()
        .enumerate()
        .map(|(i, flat)| {
            if flat.len() != d * d_k {
                return Err(Error::InvalidInput(format!(
                    "point {i} has {} entries, expected {d}×{d_k} = {}",
                    flat.len(),
                    d * d_k
                )));
            }
            let rep = Matrix::from_row_slice(d, d_k, flat);
            FlagPoint::new(rep, file.signature.clone())
                .map_err(|e| Error::InvalidInput(format!("point {i}: {e}")))
        })
        .collect()
}

/// Write a motion set.
pub fn write_motion_set(path: &Path, motions: &[RigidMotion]) -> Result<()> {
    if motions.is_empty() {
        return Err(Error::EmptyInput("cannot write a motion set with no motions".into()));
    }
    let file = MotionSetFile {
        motions: motions
            .iter()
            .map(|m| MotionEntry {
                rotation: m.rotation().transpose().as_slice().to_vec(),
                translation: m.translation().as_slice().to_vec(),
            })
            .collect(),
    };
    write_text_atomic(path, &serde_json::to_string_pretty(&file)?)
}

/// Read a motion set. Rotation blocks may drift off SO(3) by up to `1e-6`
/// (they are reprojected); anything worse is rejected with the motion index.
pub fn read_motion_set(path: &Path) -> Result<Vec<RigidMotion>> {
    let file: MotionSetFile = serde_json::from_str(&fs::read_to_string(path)?)?;
    if file.motions.is_empty() {
        return Err(Error::EmptyInput("motion set has no motions".into()));
    }
    file.motions
        .iter()
        .enumerate()
        .map(|(i, entry)| {
            if entry.rotation.len() != 9 {
                return Err(Error::InvalidInput(format!(
                    "motion {i} rotation has {} entries, expected 9",
                    entry.rotation.len()
                )));
            }
            if entry.translation.len() != 3 {
                return Err(Error::InvalidInput(format!(
                    "motion {i} translation has {} entries, expected 3",
                    entry.translation.len()
                )));
            }
            let rotation = Matrix3::from_row_slice(&entry.rotation);
            let translation = Vector3::from_row_slice(&entry.translation);
            RigidMotion::reprojected(rotation, translation)
                .map_err(|e| Error::InvalidInput(format!("motion {i}: {e}")))
        })
        .collect()
}

/// Read a weights file: a bare JSON array of positive reals.
pub fn read_weights(path: &Path) -> Result<WeightVector> {
    let values: Vec<f64> = serde_json::from_str(&fs::read_to_string(path)?)?;
    WeightVector::new(values)
}
