use std::sync::Arc;

use crate::similarity::{Backend, SentenceEmbedder, SimilarityError};
use crate::text::Vocab;

use super::ModelParams;

/// Mean of the encoder output states over a token sequence.
///
/// Unknown tokens map to `<unk>`; sequences longer than the model's
/// maximum length are truncated.
#[derive(Debug, Clone)]
pub struct EncoderMeanEmbedder {
    params: Arc<ModelParams>,
    vocab: Arc<Vocab>,
}

impl EncoderMeanEmbedder {
    pub fn new(params: Arc<ModelParams>, vocab: Arc<Vocab>) -> Self {
        EncoderMeanEmbedder { params, vocab }
    }
}

impl SentenceEmbedder for EncoderMeanEmbedder {
    fn dim(&self) -> usize {
        self.params.config.dim
    }

    fn backend(&self) -> Backend {
        Backend::EncoderMean
    }

    fn embed(&self, tokens: &[String]) -> Result<Vec<f64>, SimilarityError> {
        if tokens.is_empty() {
            return Err(SimilarityError::EmptyInput);
        }
        let n = tokens.len().min(self.params.config.max_len);
        let ids = self.vocab.encode(&tokens[..n]);
        let states = self
            .params
            .encode(&ids)
            .map_err(|e| SimilarityError::Backend(e.to_string()))?;
        Ok(states
            .mean_axis(ndarray::Axis(0))
            .expect("non-empty")
            .to_vec())
    }
}
