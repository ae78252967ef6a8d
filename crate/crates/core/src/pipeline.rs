//! Glue from corpus instances to training examples and decoded rewrites.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::datagen::{DatagenError, PQAInstance, FUNCTION_WORDS};
use crate::decode::{
    beam_decode, cbs_decode, greedy_decode, DecodeError, DecodeOptions, FlagContext, Hypothesis,
    ModelScorer,
};
use crate::flags::{FlagError, FlagUpdater, MentionFlagMatrix, SatisfierConfig};
use crate::model::{ModelParams, TrainExample};
use crate::similarity::SimilaritySource;
use crate::text::{detokenize, SourceInput, Vocab};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("instance {id}: token {token:?} is not in the vocabulary")]
    UnknownToken { id: String, token: String },
    #[error("instance {id}: needs {needed} positions but the model allows {max}")]
    TooLong {
        id: String,
        needed: usize,
        max: usize,
    },
    #[error(transparent)]
    Datagen(#[from] DatagenError),
    #[error(transparent)]
    Flags(#[from] FlagError),
    #[error(transparent)]
    Decode(#[from] DecodeError),
}

pub type Result<T> = std::result::Result<T, PipelineError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Decoder {
    Greedy,
    #[default]
    Beam,
    Cbs,
}

/// Input tokens of every instance plus the fixed function words.
///
/// Targets draw only from these, so the vocabulary covers every split.
pub fn build_vocab(corpus: &[PQAInstance]) -> Vocab {
    let mut words: BTreeSet<String> = FUNCTION_WORDS.iter().map(|s| s.to_string()).collect();
    for x in corpus {
        words.extend(x.source().tokens);
        words.extend(x.target_tokens());
    }
    Vocab::from_tokens(words)
}

/// Encoder input and constraints of one instance.
#[derive(Debug, Clone, PartialEq)]
pub struct Prepared {
    pub id: String,
    pub source: SourceInput,
    pub src_ids: Vec<usize>,
    /// Lowercased constraint tokens.
    pub constraints: Vec<Vec<String>>,
    /// Input positions of each constraint.
    pub rows: Vec<Vec<usize>>,
}

fn ids(vocab: &Vocab, id: &str, tokens: &[String]) -> Result<Vec<usize>> {
    tokens
        .iter()
        .map(|t| {
            vocab.get(t).ok_or_else(|| PipelineError::UnknownToken {
                id: id.to_string(),
                token: t.clone(),
            })
        })
        .collect()
}

impl Prepared {
    pub fn new(instance: &PQAInstance, vocab: &Vocab) -> Result<Self> {
        let source = instance.source();
        let src_ids = ids(vocab, &instance.id, &source.tokens)?;
        let constraints = instance
            .gold()
            .iter()
            .map(|c| c.normalized_tokens())
            .collect();
        let rows = instance.constraint_rows()?;
        Ok(Prepared {
            id: instance.id.clone(),
            source,
            src_ids,
            constraints,
            rows,
        })
    }

    pub fn initial_flags(&self, config: &SatisfierConfig) -> Result<MentionFlagMatrix> {
        Ok(MentionFlagMatrix::init(
            &self.source.tokens,
            &self.rows,
            config,
        )?)
    }

    pub fn constraint_ids(&self, vocab: &Vocab) -> Result<Vec<Vec<usize>>> {
        self.constraints
            .iter()
            .map(|c| ids(vocab, &self.id, c))
            .collect()
    }
}

/// Teacher-forcing example with the flag columns of the gold target.
///
/// `with_flags = false` builds examples for a model without flag input.
pub fn training_example(
    instance: &PQAInstance,
    vocab: &Vocab,
    config: &SatisfierConfig,
    source: &dyn SimilaritySource,
    with_flags: bool,
    max_len: usize,
) -> Result<TrainExample> {
    let prep = Prepared::new(instance, vocab)?;
    let target = instance.target_tokens();
    let needed = prep.src_ids.len().max(target.len() + 1);
    if needed > max_len {
        return Err(PipelineError::TooLong {
            id: instance.id.clone(),
            needed,
            max: max_len,
        });
    }
    let target_ids = ids(vocab, &instance.id, &target)?;
    let flags = if with_flags {
        let m = FlagUpdater::new(config, source, &prep.constraints)
            .replay(prep.initial_flags(config)?, &target)?;
        Some(m.columns().to_vec())
    } else {
        None
    };
    Ok(TrainExample::new(prep.src_ids, &target_ids, flags))
}

pub fn training_examples(
    corpus: &[PQAInstance],
    vocab: &Vocab,
    config: &SatisfierConfig,
    source: &dyn SimilaritySource,
    with_flags: bool,
    max_len: usize,
) -> Result<Vec<TrainExample>> {
    corpus
        .iter()
        .map(|x| training_example(x, vocab, config, source, with_flags, max_len))
        .collect()
}

/// Decoded output of one instance.
#[derive(Debug, Clone, PartialEq)]
pub struct Rewrite {
    pub id: String,
    pub hypothesis: Hypothesis,
    /// False only when constrained search had to return a partial
    /// hypothesis.
    pub constraints_met: bool,
}

impl Rewrite {
    pub fn text(&self) -> String {
        detokenize(&self.hypothesis.words)
    }
}

/// Decodes one instance with live flag updates.
pub fn rewrite(
    params: &ModelParams,
    vocab: &Vocab,
    instance: &PQAInstance,
    config: &SatisfierConfig,
    source: &dyn SimilaritySource,
    decoder: Decoder,
    opts: &DecodeOptions,
) -> Result<Rewrite> {
    let prep = Prepared::new(instance, vocab)?;
    if prep.src_ids.len() > params.config.max_len {
        return Err(PipelineError::TooLong {
            id: prep.id,
            needed: prep.src_ids.len(),
            max: params.config.max_len,
        });
    }
    let scorer = ModelScorer::new(params, &prep.src_ids)?;
    let ctx = FlagContext {
        vocab,
        updater: FlagUpdater::new(config, source, &prep.constraints),
        initial: prep.initial_flags(config)?,
    };
    let (hypothesis, constraints_met) = match decoder {
        Decoder::Greedy => (greedy_decode(&scorer, &ctx, opts.max_len)?, true),
        Decoder::Beam => (beam_decode(&scorer, &ctx, opts)?, true),
        Decoder::Cbs => {
            let r = cbs_decode(&scorer, &ctx, &prep.constraint_ids(vocab)?, opts)?;
            (r.best, r.constraints_met)
        }
    };
    Ok(Rewrite {
        id: prep.id,
        hypothesis,
        constraints_met,
    })
}
