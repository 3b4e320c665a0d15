//! Versioned JSON checkpoints.

use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::jet::Dense;
use super::{FourierFeatureMap, ModelConfig, TimeFieldModel};
use crate::error::{Error, Result};
use crate::speed::SpeedParams;

pub const CHECKPOINT_VERSION: u32 = 1;

/// Provenance stored next to the weights.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub speed_params: SpeedParams,
    pub scene_hash: String,
}

#[derive(Serialize, Deserialize)]
struct LayerRecord {
    rows: usize,
    cols: usize,
    weights: Vec<f64>,
    bias: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct CheckpointFile {
    version: u32,
    config: ModelConfig,
    meta: CheckpointMeta,
    /// Row-major `F × 6`.
    fourier: Vec<f64>,
    layers: Vec<LayerRecord>,
}

pub fn save_checkpoint(model: &TimeFieldModel, meta: &CheckpointMeta, path: &Path) -> Result<()> {
    let file = CheckpointFile {
        version: CHECKPOINT_VERSION,
        config: model.config.clone(),
        meta: meta.clone(),
        fourier: model.fourier.frequency_matrix().iter().copied().collect(),
        layers: model
            .layers
            .iter()
            .map(|l| LayerRecord {
                rows: l.w.nrows(),
                cols: l.w.ncols(),
                weights: l.w.iter().copied().collect(),
                bias: l.b.to_vec(),
            })
            .collect(),
    };
    fs::write(path, serde_json::to_string(&file)?)?;
    Ok(())
}

/// Loads a checkpoint, refusing a different format version, or a scene hash
/// other than `expected_scene_hash` unless `allow_scene_mismatch` is set.
pub fn load_checkpoint(
    path: &Path,
    expected_scene_hash: Option<&str>,
    allow_scene_mismatch: bool,
) -> Result<(TimeFieldModel, CheckpointMeta)> {
    let text = fs::read_to_string(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::FileNotFound(path.to_path_buf()),
        _ => Error::Io(e),
    })?;
    let file: CheckpointFile = serde_json::from_str(&text)?;
    if file.version != CHECKPOINT_VERSION {
        return Err(Error::VersionMismatch {
            expected: CHECKPOINT_VERSION,
            found: file.version,
        });
    }
    if let Some(expected) = expected_scene_hash {
        if expected != file.meta.scene_hash && !allow_scene_mismatch {
            return Err(Error::SceneHashMismatch {
                expected: expected.to_string(),
                found: file.meta.scene_hash.clone(),
            });
        }
    }
    let f = file.config.fourier_features;
    let b = Array2::from_shape_vec((f, 6), file.fourier)
        .map_err(|_| Error::invalid("frequency matrix has the wrong size"))?;
    let layers = file
        .layers
        .into_iter()
        .map(|r| {
            let w = Array2::from_shape_vec((r.rows, r.cols), r.weights)
                .map_err(|_| Error::invalid("layer weights have the wrong size"))?;
            Ok(Dense {
                w,
                b: Array1::from(r.bias),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let model =
        TimeFieldModel::from_parts(file.config, FourierFeatureMap::from_matrix(b)?, layers)?;
    if !model.parameters_finite() {
        return Err(Error::invalid("checkpoint contains non-finite parameters"));
    }
    Ok((model, file.meta))
}
