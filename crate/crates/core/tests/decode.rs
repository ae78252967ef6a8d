use polar_rewrite::decode::{
    beam_decode, cbs_decode, greedy_decode, DecodeError, DecodeOptions, DecodeReport, FlagContext,
    ModelScorer, StepModel,
};
use polar_rewrite::flags::{FlagUpdater, MentionFlagMatrix, SatisfactionMode, SatisfierConfig};
use polar_rewrite::model::{train, ModelConfig, ModelParams, TrainExample, TrainingConfig};
use polar_rewrite::similarity::{HashedNgramEmbedder, WindowedSimilarity};
use polar_rewrite::text::{Vocab, BOS_ID, EOS_ID};

fn toks(s: &str) -> Vec<String> {
    s.split_whitespace().map(str::to_string).collect()
}

/// Language model given by a function from the fed prefix to probabilities.
struct ToyLm<F> {
    vocab: usize,
    probs: F,
}

impl<F: Fn(&[usize]) -> Vec<(usize, f64)>> StepModel for ToyLm<F> {
    type State = Vec<usize>;

    fn vocab_size(&self) -> usize {
        self.vocab
    }

    fn start(&self) -> Vec<usize> {
        Vec::new()
    }

    fn step(
        &self,
        state: &mut Vec<usize>,
        token: usize,
        _flags: &[u8],
    ) -> Result<Vec<f64>, DecodeError> {
        if token != BOS_ID {
            state.push(token);
        }
        let mut out = vec![f64::NEG_INFINITY; self.vocab];
        for (t, p) in (self.probs)(state) {
            out[t] = p.ln();
        }
        Ok(out)
    }
}

struct Fixture {
    vocab: Vocab,
    config: SatisfierConfig,
    sim: WindowedSimilarity<HashedNgramEmbedder>,
    constraints: Vec<Vec<String>>,
    x: Vec<String>,
    rows: Vec<Vec<usize>>,
}

impl Fixture {
    fn new(words: &[&str], mode: SatisfactionMode) -> Self {
        Fixture {
            vocab: Vocab::from_tokens(words.iter().map(|s| s.to_string())),
            config: SatisfierConfig::with_mode(mode),
            sim: WindowedSimilarity::new(HashedNgramEmbedder::new(256)),
            constraints: Vec::new(),
            x: toks("can you ship to brazil"),
            rows: Vec::new(),
        }
    }

    fn ctx(&self) -> FlagContext<'_> {
        FlagContext {
            vocab: &self.vocab,
            updater: FlagUpdater::new(&self.config, &self.sim, &self.constraints),
            initial: MentionFlagMatrix::init(&self.x, &self.rows, &self.config).unwrap(),
        }
    }
}

// a=5 b=6 c=7
fn trap_lm() -> ToyLm<impl Fn(&[usize]) -> Vec<(usize, f64)>> {
    ToyLm {
        vocab: 8,
        probs: |prefix: &[usize]| match prefix {
            [] => vec![(5, 0.5), (6, 0.4), (7, 0.1)],
            [5] => vec![(5, 0.3), (6, 0.3), (7, 0.2), (EOS_ID, 0.2)],
            [6] => vec![(7, 0.9), (EOS_ID, 0.1)],
            [6, 7] => vec![(EOS_ID, 0.95), (5, 0.05)],
            _ => vec![(5, 0.25), (6, 0.25), (7, 0.25), (EOS_ID, 0.25)],
        },
    }
}

fn exhaustive_best(
    lm: &ToyLm<impl Fn(&[usize]) -> Vec<(usize, f64)>>,
    max_len: usize,
    alpha: f64,
) -> (Vec<usize>, f64) {
    let mut best = (Vec::new(), f64::NEG_INFINITY);
    let mut frontier = vec![(Vec::<usize>::new(), 0.0)];
    for len in 1..=max_len {
        let mut next = Vec::new();
        for (prefix, score) in &frontier {
            let mut st = Vec::new();
            let mut lp = lm.step(&mut st, BOS_ID, &[]).unwrap();
            for &t in prefix {
                lp = lm.step(&mut st, t, &[]).unwrap();
            }
            for (t, &l) in lp.iter().enumerate() {
                if !l.is_finite() {
                    continue;
                }
                let s = score + l;
                if t == EOS_ID {
                    let norm = s / (len as f64).powf(alpha);
                    if norm > best.1 {
                        best = (prefix.clone(), norm);
                    }
                } else {
                    let mut p = prefix.clone();
                    p.push(t);
                    next.push((p, s));
                }
            }
        }
        frontier = next;
    }
    best
}

#[test]
fn beam_two_finds_the_exhaustive_optimum_that_greedy_misses() {
    let fx = Fixture::new(&["a", "b", "c"], SatisfactionMode::Off);
    let lm = trap_lm();
    let opts = DecodeOptions {
        beam: 2,
        max_len: 3,
        length_penalty: 0.7,
    };
    let (oracle, oracle_score) = exhaustive_best(&lm, 3, 0.7);
    assert_eq!(oracle, vec![6, 7]);
    let beam = beam_decode(&lm, &fx.ctx(), &opts).unwrap();
    assert_eq!(beam.tokens, oracle);
    assert!(beam.finished);
    assert!((beam.normalized_score(0.7) - oracle_score).abs() < 1e-12);
    let expected = 0.4f64.ln() + 0.9f64.ln() + 0.95f64.ln();
    assert!((beam.score - expected).abs() < 1e-12);

    let greedy = greedy_decode(&lm, &fx.ctx(), 3).unwrap();
    assert_eq!(greedy.tokens[0], 5);
    assert!(beam.normalized_score(0.7) >= greedy.normalized_score(0.7));
}

#[test]
fn beam_one_is_greedy_and_greedy_respects_max_len() {
    let fx = Fixture::new(&["a", "b", "c"], SatisfactionMode::Off);
    let lm = trap_lm();
    for max_len in 1..6 {
        let g = greedy_decode(&lm, &fx.ctx(), max_len).unwrap();
        let b = beam_decode(
            &lm,
            &fx.ctx(),
            &DecodeOptions {
                beam: 1,
                max_len,
                length_penalty: 0.7,
            },
        )
        .unwrap();
        assert_eq!(g, b);
        assert!(g.length() <= max_len);
    }
    assert_eq!(greedy_decode(&lm, &fx.ctx(), 1).unwrap().length(), 1);
    let ties = ToyLm {
        vocab: 8,
        probs: |_: &[usize]| vec![(7, 0.4), (6, 0.4), (EOS_ID, 0.2)],
    };
    assert_eq!(greedy_decode(&ties, &fx.ctx(), 1).unwrap().tokens, vec![6]);
}

/// Never puts more than 1e-6 on "brazil" (id 9).
fn reluctant_lm() -> ToyLm<impl Fn(&[usize]) -> Vec<(usize, f64)>> {
    ToyLm {
        vocab: 10,
        probs: |prefix: &[usize]| {
            let eos = if prefix.len() >= 2 { 0.6 } else { 0.05 };
            let rest = 1.0 - eos - 1e-6;
            vec![
                (5, rest * 0.4),
                (6, rest * 0.3),
                (7, rest * 0.2),
                (8, rest * 0.1),
                (9, 1e-6),
                (EOS_ID, eos),
            ]
        },
    }
}

#[test]
fn constrained_search_forces_an_unlikely_token() {
    let fx = Fixture::new(
        &["we", "ship", "to", "you", "brazil"],
        SatisfactionMode::Off,
    );
    let lm = reluctant_lm();
    let opts = DecodeOptions {
        beam: 3,
        max_len: 8,
        length_penalty: 0.7,
    };
    let plain = beam_decode(&lm, &fx.ctx(), &opts).unwrap();
    assert!(!plain.words.contains(&"brazil".to_string()));
    let res = cbs_decode(&lm, &fx.ctx(), &[vec![9]], &opts).unwrap();
    assert!(res.constraints_met);
    assert!(res.best.finished);
    assert!(
        res.best.words.contains(&"brazil".to_string()),
        "{:?}",
        res.best.words
    );

    let two = cbs_decode(&lm, &fx.ctx(), &[vec![7, 9], vec![8]], &opts).unwrap();
    assert!(two.constraints_met);
    let w = &two.best.tokens;
    assert!(w.windows(2).any(|p| p == [7, 9]), "{w:?}");
    assert!(w.contains(&8));
}

#[test]
fn empty_constraints_collapse_to_beam_search() {
    let fx = Fixture::new(
        &["we", "ship", "to", "you", "brazil"],
        SatisfactionMode::Off,
    );
    let lm = reluctant_lm();
    for beam in [1, 2, 4] {
        let opts = DecodeOptions {
            beam,
            max_len: 6,
            length_penalty: 0.7,
        };
        let a = beam_decode(&lm, &fx.ctx(), &opts).unwrap();
        let b = cbs_decode(&lm, &fx.ctx(), &[], &opts).unwrap();
        assert!(b.constraints_met);
        assert_eq!(a, b.best);
    }
}

#[test]
fn unsatisfiable_constraints_return_the_best_partial() {
    let fx = Fixture::new(
        &["we", "ship", "to", "you", "brazil"],
        SatisfactionMode::Off,
    );
    let lm = reluctant_lm();
    let opts = DecodeOptions {
        beam: 2,
        max_len: 1,
        length_penalty: 0.7,
    };
    let res = cbs_decode(&lm, &fx.ctx(), &[vec![9], vec![8]], &opts).unwrap();
    assert!(!res.constraints_met);
    assert!(!res.best.finished);
    assert_eq!(res.best.bank, 1);
    assert!(matches!(
        cbs_decode(&lm, &fx.ctx(), &[vec![]], &opts),
        Err(DecodeError::EmptyConstraint)
    ));
    let zero = DecodeOptions { beam: 0, ..opts };
    assert!(matches!(
        beam_decode(&lm, &fx.ctx(), &zero),
        Err(DecodeError::ZeroBeam)
    ));
}

fn model_fixture() -> (Fixture, ModelParams, Vec<usize>) {
    let words = ["can", "you", "ship", "to", "brazil", "yes", "we", ",", "."];
    let mut fx = Fixture::new(&words, SatisfactionMode::Semantic);
    fx.constraints = vec![toks("ship to brazil")];
    fx.rows = vec![vec![2, 3, 4]];
    fx.config.style_enabled = true;
    let mut cfg = ModelConfig::small(fx.vocab.len());
    cfg.dim = 16;
    cfg.heads = 2;
    cfg.ff_dim = 32;
    cfg.max_len = 12;
    let params = ModelParams::init(cfg, 17).unwrap();
    let src = fx.vocab.encode(&fx.x);
    (fx, params, src)
}

#[test]
fn decoded_flags_match_an_offline_replay() {
    let (fx, params, src) = model_fixture();
    let scorer = ModelScorer::new(&params, &src).unwrap();
    for beam in [1, 3] {
        let opts = DecodeOptions {
            beam,
            max_len: 10,
            length_penalty: 0.7,
        };
        let hyp = beam_decode(&scorer, &fx.ctx(), &opts).unwrap();
        let ctx = fx.ctx();
        let replayed = ctx.updater.replay(ctx.initial.clone(), &hyp.words).unwrap();
        assert_eq!(replayed, hyp.flags);
        assert_eq!(hyp.flags.columns().len(), hyp.tokens.len() + 1);
    }
}

#[test]
fn model_decoding_is_deterministic_and_beam_one_matches_greedy() {
    let (fx, params, src) = model_fixture();
    let scorer = ModelScorer::new(&params, &src).unwrap();
    let g1 = greedy_decode(&scorer, &fx.ctx(), 10).unwrap();
    let g2 = greedy_decode(&scorer, &fx.ctx(), 10).unwrap();
    assert_eq!(g1, g2);
    let b1 = beam_decode(
        &scorer,
        &fx.ctx(),
        &DecodeOptions {
            beam: 1,
            max_len: 10,
            length_penalty: 0.7,
        },
    )
    .unwrap();
    assert_eq!(g1, b1);
}

#[test]
fn beam_scores_do_not_decrease_with_width() {
    let (fx, _, src) = model_fixture();
    for seed in 0..6 {
        let mut cfg = ModelConfig::small(fx.vocab.len());
        cfg.dim = 16;
        cfg.heads = 2;
        cfg.ff_dim = 32;
        cfg.max_len = 12;
        let params = ModelParams::init(cfg, seed).unwrap();
        let scorer = ModelScorer::new(&params, &src).unwrap();
        let mut prev = f64::NEG_INFINITY;
        for beam in [1, 2, 4] {
            let opts = DecodeOptions {
                beam,
                max_len: 10,
                length_penalty: 0.7,
            };
            let s = beam_decode(&scorer, &fx.ctx(), &opts)
                .unwrap()
                .normalized_score(0.7);
            assert!(s >= prev - 1e-12, "seed {seed}, beam {beam}: {s} < {prev}");
            prev = s;
        }
    }
}

#[test]
fn overfit_model_emits_its_memorized_target() {
    let (fx, params, src) = model_fixture();
    let target = fx.vocab.encode(&toks("yes , we ship to brazil ."));
    let words = toks("yes , we ship to brazil .");
    let ctx = fx.ctx();
    let flags = ctx.updater.replay(ctx.initial.clone(), &words).unwrap();
    let ex = TrainExample::new(src.clone(), &target, Some(flags.columns().to_vec()));
    let cfg = TrainingConfig {
        learning_rate: 3e-3,
        batch_size: 1,
        epochs: 200,
        ..Default::default()
    };
    let (trained, _) = train(params, &[ex], &cfg).unwrap();
    let scorer = ModelScorer::new(&trained, &src).unwrap();
    let out = greedy_decode(&scorer, &fx.ctx(), 12).unwrap();
    assert_eq!(out.words, words);
    assert!(out.finished);
    assert_eq!(out.satisfied, 1);

    let report = DecodeReport::new(&out, None);
    let json: serde_json::Value = serde_json::from_str(&report.to_json()).unwrap();
    assert_eq!(json["constraints_satisfied"], 1);
    assert_eq!(json["output_tokens"][3], "ship");
    assert!(json["flag_trace_path"].is_null());
}
