//! Versioned JSON checkpoints.

use std::fs;
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::text::Vocab;

use super::{ModelConfig, ModelError, ModelParams};

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedTensor {
    pub name: String,
    pub shape: [usize; 2],
    pub data: Vec<f64>,
}

/// Model parameters, architecture and vocabulary in one file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format_version: u32,
    pub config: ModelConfig,
    pub vocab: Vocab,
    /// Free-form metadata (training settings, satisfaction mode, ...).
    #[serde(default)]
    pub metadata: serde_json::Value,
    pub tensors: Vec<NamedTensor>,
}

impl Checkpoint {
    pub fn new(params: &ModelParams, vocab: &Vocab, metadata: serde_json::Value) -> Self {
        let tensors = params
            .tensors()
            .into_iter()
            .map(|(name, t)| NamedTensor {
                name,
                shape: [t.nrows(), t.ncols()],
                data: t.iter().copied().collect(),
            })
            .collect();
        Checkpoint {
            format_version: CHECKPOINT_VERSION,
            config: params.config.clone(),
            vocab: vocab.clone(),
            metadata,
            tensors,
        }
    }

    pub fn params(&self) -> Result<ModelParams, ModelError> {
        if self.format_version != CHECKPOINT_VERSION {
            return Err(ModelError::CheckpointVersion {
                found: self.format_version,
                expected: CHECKPOINT_VERSION,
            });
        }
        let mut params = ModelParams::init(self.config.clone(), 0)?;
        let names: Vec<String> = params.tensors().into_iter().map(|(n, _)| n).collect();
        if names.len() != self.tensors.len() {
            return Err(ModelError::Checkpoint(format!(
                "expected {} tensors, found {}",
                names.len(),
                self.tensors.len()
            )));
        }
        for ((dst, name), src) in params
            .tensors_mut()
            .into_iter()
            .zip(&names)
            .zip(&self.tensors)
        {
            if &src.name != name {
                return Err(ModelError::Checkpoint(format!(
                    "expected tensor `{name}`, found `{}`",
                    src.name
                )));
            }
            let [r, c] = src.shape;
            if dst.dim() != (r, c) || src.data.len() != r * c {
                return Err(ModelError::Checkpoint(format!(
                    "tensor `{name}` has the wrong shape"
                )));
            }
            *dst = Array2::from_shape_vec((r, c), src.data.clone()).expect("checked shape");
        }
        if !params.all_finite() {
            return Err(ModelError::Checkpoint("non-finite parameter values".into()));
        }
        Ok(params)
    }

    pub fn save(&self, path: &Path) -> Result<(), ModelError> {
        fs::write(path, serde_json::to_string(self)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, ModelError> {
        let mut ck: Checkpoint = serde_json::from_str(&fs::read_to_string(path)?)?;
        ck.vocab.reindex();
        Ok(ck)
    }
}
