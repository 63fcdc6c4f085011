//! Model persistence.
//!
//! Models are written as versioned JSON: trainer kind, training config, the
//! trees as flat node arrays, the feature cost vector, and a fingerprint of
//! the training data. Floats serialize in shortest-round-trip form, so
//! save → load → save is byte-identical and a loaded model predicts
//! bit-for-bit like the one that was saved.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::boosting::{Ensemble, TrainConfig, TrainerKind};
use crate::error::{Error, Result};
use crate::trees::{Node, RegressionTree};

/// Format version written by this crate; loads reject anything newer or
/// unknown.
pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct ModelFile {
    format_version: u32,
    trainer: TrainerKind,
    config: TrainConfig,
    bias: f64,
    num_features: usize,
    feature_costs: Vec<f64>,
    data_fingerprint: String,
    /// One flat node array per tree; node 0 is the root.
    trees: Vec<Vec<Node>>,
}

/// A model read back from disk, with its training metadata.
#[derive(Debug)]
pub struct LoadedModel {
    pub ensemble: Ensemble,
    pub config: TrainConfig,
    pub data_fingerprint: String,
}

/// Writes `ensemble` (plus the config that produced it and the training-data
/// fingerprint) to `path`.
pub fn save_model(
    path: &Path,
    ensemble: &Ensemble,
    config: &TrainConfig,
    data_fingerprint: &str,
) -> Result<()> {
    let file = ModelFile {
        format_version: MODEL_FORMAT_VERSION,
        trainer: ensemble.trainer(),
        config: config.clone(),
        bias: ensemble.bias(),
        num_features: ensemble.num_features(),
        feature_costs: ensemble.feature_costs().to_vec(),
        data_fingerprint: data_fingerprint.to_string(),
        trees: ensemble
            .trees()
            .iter()
            .map(|t| t.nodes().to_vec())
            .collect(),
    };
    let json = serde_json::to_string_pretty(&file)
        .map_err(|e| Error::Model(format!("could not serialize model: {}", e)))?;
    std::fs::write(path, json + "\n").map_err(|e| Error::io(path, e))
}

/// Reads a model back. Validates the format version and every tree's node
/// structure before handing out an ensemble.
pub fn load_model(path: &Path) -> Result<LoadedModel> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let file: ModelFile = serde_json::from_str(&text)
        .map_err(|e| Error::Model(format!("{}: {}", path.display(), e)))?;
    if file.format_version != MODEL_FORMAT_VERSION {
        return Err(Error::Model(format!(
            "{}: format version {} is not supported (this build reads version {})",
            path.display(),
            file.format_version,
            MODEL_FORMAT_VERSION
        )));
    }
    let trees = file
        .trees
        .into_iter()
        .map(RegressionTree::from_nodes)
        .collect::<Result<Vec<_>>>()?;
    let ensemble = Ensemble::from_parts(
        trees,
        file.config.learning_rate,
        file.bias,
        file.trainer,
        file.num_features,
        file.feature_costs,
    )?;
    Ok(LoadedModel {
        ensemble,
        config: file.config,
        data_fingerprint: file.data_fingerprint,
    })
}
