//! Benchmark fixtures.

use polar_rewrite::datagen::{generate, split_of, GenerateOptions, PQAInstance, Split};
use polar_rewrite::flags::SatisfierConfig;
use polar_rewrite::model::{ModelConfig, ModelParams, TrainExample};
use polar_rewrite::pipeline::{build_vocab, training_examples};
use polar_rewrite::similarity::{HashedNgramEmbedder, WindowedSimilarity};
use polar_rewrite::text::Vocab;

pub const MAX_LEN: usize = 48;

/// A small corpus with an untrained flag-aware model.
pub struct Fixture {
    pub train: Vec<PQAInstance>,
    pub test: Vec<PQAInstance>,
    pub vocab: Vocab,
    pub params: ModelParams,
    pub examples: Vec<TrainExample>,
    pub config: SatisfierConfig,
}

pub fn similarity() -> WindowedSimilarity<HashedNgramEmbedder> {
    WindowedSimilarity::new(HashedNgramEmbedder::default())
}

impl Fixture {
    pub fn new(n: usize) -> Fixture {
        let corpus = generate(&GenerateOptions {
            n,
            ..GenerateOptions::default()
        })
        .expect("corpus");
        let vocab = build_vocab(&corpus);
        let train = split_of(&corpus, Split::Train);
        let test = split_of(&corpus, Split::Test);
        let config = SatisfierConfig::default();
        let examples = training_examples(&train, &vocab, &config, &similarity(), true, MAX_LEN)
            .expect("examples");
        let mut cfg = ModelConfig::small(vocab.len());
        cfg.max_len = MAX_LEN;
        let params = ModelParams::init(cfg, 1).expect("model");
        Fixture {
            train,
            test,
            vocab,
            params,
            examples,
            config,
        }
    }
}
