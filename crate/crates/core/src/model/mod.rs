//! Encoder-decoder transformer with mention-flag cross-attention.
//!
//! Parameters are plain `f64` matrices with hand-written backward passes.
//! Every decoder layer's cross-attention adds `E_k[m]` to the keys and
//! `E_v[m]` to the values, where `m` is the flag of the attended input
//! position at the current decoding step. The two 3 × dim tables are shared
//! by all decoder layers and split across heads in contiguous slices, the
//! same way as the projected keys and values.

mod attention;
mod checkpoint;
mod embedder;
mod incremental;
mod layers;
mod network;
mod params;
mod train;

use ndarray::Array2;
use thiserror::Error;

pub use attention::{cross_attention, cross_attention_flagged};
pub use checkpoint::{Checkpoint, NamedTensor, CHECKPOINT_VERSION};
pub use embedder::EncoderMeanEmbedder;
pub use incremental::{DecoderState, EncodedSource};
pub use params::{
    AttentionParams, DecoderLayerParams, EncoderLayerParams, FeedForwardParams, LayerNormParams,
    ModelConfig, ModelParams, FLAG_STATES,
};
pub use train::{train, LossRecord, Optimizer, TrainExample, TrainReport, TrainingConfig};

/// Dense row-major matrix used for all parameters and activations.
pub type Mat = Array2<f64>;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid model config: {0}")]
    BadConfig(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("token id {0} is outside the vocabulary")]
    TokenOutOfVocab(usize),
    #[error("sequence of length {len} exceeds the maximum length {max}")]
    LengthOverflow { len: usize, max: usize },
    #[error("empty {0}")]
    EmptySequence(String),
    #[error("non-finite loss {0}")]
    NonFiniteLoss(f64),
    #[error("training diverged at epoch {epoch}, step {step}: {detail}")]
    Diverged {
        epoch: usize,
        step: usize,
        detail: String,
    },
    #[error("empty training corpus")]
    EmptyCorpus,
    #[error("checkpoint format version {found} is not supported (expected {expected})")]
    CheckpointVersion { found: u32, expected: u32 },
    #[error("malformed checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
