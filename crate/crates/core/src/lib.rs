//! Controllable rewriting of polar question/answer pairs into standalone
//! statements.
//!
//! The pipeline extracts constraints from constituency parses
//! ([`treebank`]), tracks whether each constraint has been mentioned in the
//! output with a mention flag matrix ([`flags`]) and feeds those flags into
//! the cross-attention of a small encoder-decoder transformer ([`model`]).
//! [`decode`] provides greedy, beam and constrained beam search, [`datagen`]
//! a synthetic corpus and [`eval`] the metrics.

pub mod datagen;
pub mod decode;
pub mod eval;
pub mod flags;
pub mod model;
pub mod pipeline;
pub mod similarity;
pub mod text;
pub mod treebank;

pub use flags::{
    FlagTrace, FlagUpdater, MentionFlagMatrix, SatisfactionMode, SatisfierConfig, StyleTrigger,
};
pub use similarity::{
    cosine, HashedNgramEmbedder, InjectedTable, SentenceEmbedder, SimilaritySource,
    WindowedSimilarity,
};
pub use text::{tokenize, InputLayout, SourceInput, Vocab};
pub use treebank::{
    extract_constraints, parse_bracketed, Constraint, ExtractOptions, ParseTree, PhraseLabel, Side,
};
