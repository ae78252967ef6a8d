mod common;

use common::metric_oracle::{CORPUS_BLEU, CORPUS_BLEU_SMOOTHED, PAIRS};
use polar_rewrite::datagen::{
    generate, Category, Domain, GenerateOptions, PQAInstance, Polarity, Split,
};
use polar_rewrite::eval::{
    bleu, bleu_text, corpus_rouge_l, correctness_audit, coverage_audit, evaluate, render_table,
    rouge_l, EvalError, Smoothing, SystemOutput, ROUGE_BETA,
};
use polar_rewrite::flags::SatisfierConfig;
use polar_rewrite::similarity::{HashedNgramEmbedder, SimilaritySource, WindowedSimilarity};
use polar_rewrite::text::tokenize;
use polar_rewrite::treebank::{extract_constraints, parse_bracketed, Constraint, ExtractOptions};
use proptest::prelude::*;

fn t(s: &str) -> Vec<String> {
    s.split_whitespace().map(str::to_string).collect()
}

fn hand_instance(
    id: &str,
    question: &str,
    answer: &str,
    context: &str,
    target: &str,
) -> PQAInstance {
    let q = parse_bracketed(question).unwrap();
    let a = parse_bracketed(answer).unwrap();
    let render = |tree: &polar_rewrite::ParseTree| polar_rewrite::text::detokenize(&tree.leaves());
    PQAInstance {
        id: id.into(),
        question: render(&q),
        answer: render(&a),
        context: context.into(),
        category: Category::Complement,
        polarity: Polarity::Yes,
        target: target.into(),
        question_parse: q.to_string(),
        answer_parse: a.to_string(),
        constraints: extract_constraints(&q, Some(&a), ExtractOptions::default())
            .iter()
            .map(Constraint::to_record)
            .collect(),
        domain: Domain::Electronics,
        split: Split::Test,
    }
}

fn laptop() -> PQAInstance {
    hand_instance(
        "x1",
        "(SQ (VBZ Does) (NP (DT the) (NN laptop)) (VP (VB have) (NP (DT a) (JJ backlit) (NN keyboard))) (. ?))",
        "(S (INTJ (UH Yes)) (, ,) (CC and) (NP (PRP it)) (ADVP (RB also)) (VP (VBZ has) (NP (DT a) (NN webcam))) (. .))",
        "Dell XPS 13 laptop",
        "Yes, the Dell XPS 13 laptop does have a backlit keyboard. Also, it has a webcam.",
    )
}

fn out(id: &str, s: &str) -> SystemOutput {
    SystemOutput {
        id: id.into(),
        output: s.into(),
    }
}

#[test]
fn bleu_and_rouge_match_reference_scorers() {
    let mut hyps = Vec::new();
    let mut refs = Vec::new();
    for (i, p) in PAIRS.iter().enumerate() {
        let h = t(p.hyp);
        let r = t(p.reference);
        assert_eq!(tokenize(p.hyp), h, "pair {i} is not in tokenizer form");
        let b = bleu(
            std::slice::from_ref(&h),
            std::slice::from_ref(&r),
            Smoothing::None,
        )
        .unwrap();
        assert!((b - p.bleu).abs() < 0.1, "pair {i}: bleu {b} vs {}", p.bleu);
        let bs = bleu(
            std::slice::from_ref(&h),
            std::slice::from_ref(&r),
            Smoothing::AddOneOnZero,
        )
        .unwrap();
        assert!(
            (bs - p.bleu_smoothed).abs() < 0.1,
            "pair {i}: smoothed {bs} vs {}",
            p.bleu_smoothed
        );
        let rl = rouge_l(&h, &r, ROUGE_BETA).unwrap();
        assert!((rl.precision - p.rouge_p).abs() < 1e-3, "pair {i}");
        assert!((rl.recall - p.rouge_r).abs() < 1e-3, "pair {i}");
        assert!(
            (rl.f - p.rouge_f).abs() < 1e-3,
            "pair {i}: rouge {} vs {}",
            rl.f,
            p.rouge_f
        );
        hyps.push(h);
        refs.push(r);
    }
    let corpus = bleu(&hyps, &refs, Smoothing::None).unwrap();
    assert!((corpus - CORPUS_BLEU).abs() < 0.1);
    let corpus = bleu(&hyps, &refs, Smoothing::AddOneOnZero).unwrap();
    assert!((corpus - CORPUS_BLEU_SMOOTHED).abs() < 0.1);
}

#[test]
fn bleu_worked_examples() {
    let x = t("yes , the tent does have a hood .");
    assert_eq!(
        bleu(
            std::slice::from_ref(&x),
            std::slice::from_ref(&x),
            Smoothing::None
        )
        .unwrap(),
        100.0
    );
    let disjoint = bleu(&[t("a b c d e")], &[t("v w x y z")], Smoothing::None).unwrap();
    assert_eq!(disjoint, 0.0);
    // precisions 3/3, 2/2, 1/1 and a smoothed 1/1 for the missing 4-gram
    let b = bleu(
        &[t("the cat sat")],
        &[t("the cat sat down")],
        Smoothing::AddOneOnZero,
    )
    .unwrap();
    let expected = 100.0 * (1.0f64 - 4.0 / 3.0).exp();
    assert!((b - expected).abs() < 1e-9);
    assert_eq!(
        bleu(
            &[t("the cat sat")],
            &[t("the cat sat down")],
            Smoothing::None
        )
        .unwrap(),
        0.0
    );
    assert_eq!(
        bleu(&[vec![]], &[t("a b")], Smoothing::AddOneOnZero).unwrap(),
        0.0
    );
    assert_eq!(
        bleu_text(&["Yes, it does."], &["yes , it does ."], Smoothing::None).unwrap(),
        100.0
    );
}

#[test]
fn rouge_worked_examples() {
    let r = rouge_l(&t("a b c d"), &t("a c d e"), ROUGE_BETA).unwrap();
    assert_eq!((r.precision, r.recall), (0.75, 0.75));
    assert!((r.f - 0.75).abs() < 1e-12);
    // beta weights recall: P = 1, R = 0.5
    let r = rouge_l(&t("a b"), &t("a b c d"), 1.2).unwrap();
    let expected = (1.0 + 1.44) * 0.5 / (0.5 + 1.44);
    assert!((r.f - expected).abs() < 1e-12);
    assert_eq!(rouge_l(&t("a b"), &t("c d"), 1.2).unwrap().f, 0.0);
    assert_eq!(rouge_l(&t("a b"), &t("a b"), 1.2).unwrap().f, 1.0);
}

#[test]
fn metric_errors() {
    assert!(matches!(
        bleu(&[], &[], Smoothing::None),
        Err(EvalError::EmptyCorpus)
    ));
    assert!(matches!(
        bleu(&[t("a")], &[], Smoothing::None),
        Err(EvalError::LengthMismatch { .. })
    ));
    assert!(matches!(
        rouge_l(&[], &t("a"), 1.2),
        Err(EvalError::EmptyInput)
    ));
    assert!(matches!(
        corpus_rouge_l(&[t("a")], &[vec![]], 1.2),
        Err(EvalError::EmptyInput)
    ));
}

#[test]
fn corpus_metrics_ignore_order() {
    let mut hyps: Vec<Vec<String>> = PAIRS.iter().map(|p| t(p.hyp)).collect();
    let mut refs: Vec<Vec<String>> = PAIRS.iter().map(|p| t(p.reference)).collect();
    let b0 = bleu(&hyps, &refs, Smoothing::AddOneOnZero).unwrap();
    let r0 = corpus_rouge_l(&hyps, &refs, ROUGE_BETA).unwrap();
    hyps.reverse();
    refs.reverse();
    hyps.rotate_left(7);
    refs.rotate_left(7);
    assert!((bleu(&hyps, &refs, Smoothing::AddOneOnZero).unwrap() - b0).abs() < 1e-9);
    assert!((corpus_rouge_l(&hyps, &refs, ROUGE_BETA).unwrap() - r0).abs() < 1e-9);
}

proptest! {
    #[test]
    fn self_scores_are_perfect(words in prop::collection::vec("[a-e]{1,3}", 1..20)) {
        prop_assert!((rouge_l(&words, &words, ROUGE_BETA).unwrap().f - 1.0).abs() < 1e-12);
        if words.len() >= 4 {
            prop_assert!((bleu(std::slice::from_ref(&words), std::slice::from_ref(&words), Smoothing::None).unwrap() - 100.0).abs() < 1e-9);
        }
        prop_assert!((bleu(std::slice::from_ref(&words), std::slice::from_ref(&words), Smoothing::AddOneOnZero).unwrap() - 100.0).abs() < 1e-9);
    }
}

#[test]
fn verbatim_and_empty_coverage() {
    let x = laptop();
    assert_eq!(x.constraints.len(), 2);
    let sim = WindowedSimilarity::new(HashedNgramEmbedder::default());
    let cfg = SatisfierConfig::default();
    let full = coverage_audit(
        &[out("x1", &x.target)],
        std::slice::from_ref(&x),
        &sim,
        &cfg,
    )
    .unwrap();
    assert_eq!(full.lexical, 1.0);
    assert_eq!(full.semantic, 1.0);
    let empty = coverage_audit(&[out("x1", "")], std::slice::from_ref(&x), &sim, &cfg).unwrap();
    assert_eq!((empty.lexical, empty.semantic), (0.0, 0.0));
}

#[test]
fn paraphrase_counts_only_semantically() {
    let x = laptop();
    let sim = WindowedSimilarity::new(HashedNgramEmbedder::default());
    let cfg = SatisfierConfig::default();
    let output =
        "Yes, the Dell XPS 13 laptop does have the backlit keyboard. Also, it has a webcam.";
    let toks = tokenize(output);

    // the similarity gate opens for "have a backlit keyboard" at some step
    let c = t("have a backlit keyboard");
    let mut prev = 0.0;
    let mut opened = false;
    for step in 1..=toks.len() {
        let s = sim.similarity(0, &c, &toks[..step]).unwrap();
        if s >= cfg.threshold_a && s - prev >= cfg.threshold_b {
            opened = true;
        }
        prev = s;
    }
    assert!(opened);

    let report = coverage_audit(&[out("x1", output)], &[x], &sim, &cfg).unwrap();
    assert_eq!(report.semantic, 1.0);
    assert_eq!(report.lexical, 0.5);
    assert_eq!(report.items[0].lexical, 1);
}

#[test]
fn lexical_never_exceeds_semantic_on_generated_outputs() {
    let corpus = generate(&GenerateOptions {
        n: 120,
        ..Default::default()
    })
    .unwrap();
    let sim = WindowedSimilarity::new(HashedNgramEmbedder::default());
    // truncated and answer-copy outputs give partial coverage
    let outputs: Vec<SystemOutput> = corpus
        .iter()
        .enumerate()
        .map(|(i, x)| {
            let o = match i % 3 {
                0 => x.target.clone(),
                1 => x.answer.clone(),
                _ => x.target[..x.target.len() / 2].to_string(),
            };
            out(&x.id, &o)
        })
        .collect();
    let r = coverage_audit(&outputs, &corpus, &sim, &SatisfierConfig::default()).unwrap();
    assert!(r.lexical <= r.semantic);
    for item in &r.items {
        assert!(item.lexical <= item.semantic, "{}", item.id);
    }
    assert!(r.lexical > 0.0 && r.lexical < 1.0);
}

#[test]
fn correctness_on_table_three_shape() {
    let mut x = laptop();
    x.id = "s3".into();
    x.polarity = Polarity::No;
    x.context = "Dell 27-inch monitor".into();
    let good = out("s3", "No, the Dell 27-inch monitor doesn't have a camera.");
    let r = correctness_audit(&[good], &[x.clone()]).unwrap();
    assert_eq!((r.polarity, r.style, r.context), (1.0, 1.0, 1.0));

    let wrong = out("s3", "Yes, the Dell 27-inch monitor has a camera.");
    assert_eq!(
        correctness_audit(&[wrong], &[x.clone()]).unwrap().polarity,
        0.0
    );
    let first = out(
        "s3",
        "No, I've been using the Dell 27-inch monitor without one.",
    );
    let r = correctness_audit(&[first], &[x.clone()]).unwrap();
    assert_eq!((r.polarity, r.style), (1.0, 0.0));
    let bare = out("s3", "the monitor lacks a camera");
    let r = correctness_audit(&[bare], &[x]).unwrap();
    assert_eq!((r.polarity, r.context), (0.0, 0.0));
}

#[test]
fn shuffled_ids_are_rejected() {
    let corpus = generate(&GenerateOptions {
        n: 4,
        ..Default::default()
    })
    .unwrap();
    let mut outputs: Vec<SystemOutput> = corpus.iter().map(|x| out(&x.id, &x.target)).collect();
    outputs.swap(1, 2);
    let err = correctness_audit(&outputs, &corpus).unwrap_err();
    assert!(
        matches!(err, EvalError::IdMismatch { position: 1, .. }),
        "{err}"
    );
    let sim = WindowedSimilarity::new(HashedNgramEmbedder::default());
    assert!(matches!(
        coverage_audit(&outputs, &corpus, &sim, &SatisfierConfig::default()),
        Err(EvalError::IdMismatch { .. })
    ));
    assert!(matches!(
        correctness_audit(&outputs[..2], &corpus),
        Err(EvalError::LengthMismatch { .. })
    ));
}

#[test]
fn gold_outputs_score_perfectly() {
    let corpus = generate(&GenerateOptions {
        n: 80,
        first_person_rate: 0.5,
        ..Default::default()
    })
    .unwrap();
    let outputs: Vec<SystemOutput> = corpus.iter().map(|x| out(&x.id, &x.target)).collect();
    let sim = WindowedSimilarity::new(HashedNgramEmbedder::default());
    let r = evaluate("gold", &outputs, &corpus, &sim, &SatisfierConfig::default()).unwrap();
    assert!((r.bleu - 100.0).abs() < 1e-9);
    assert!((r.rouge_l - 1.0).abs() < 1e-12);
    assert_eq!(
        (
            r.coverage_lexical,
            r.coverage_semantic,
            r.style_accuracy,
            r.polarity_accuracy,
            r.context_accuracy
        ),
        (1.0, 1.0, 1.0, 1.0, 1.0)
    );
    assert_eq!(r.per_category.len(), 4);
    assert_eq!(r.per_category.iter().map(|c| c.n).sum::<usize>(), 80);
    let json: serde_json::Value = serde_json::from_str(&r.to_json()).unwrap();
    assert!(json["bertscore"].is_null());
    assert_eq!(json["rouge_beta"], 1.2);

    let table = render_table(std::slice::from_ref(&r));
    assert!(table.lines().next().unwrap().contains("BLEU"));
    assert!(table.contains("gold"));
    assert_eq!(r.category_table().lines().count(), 5);

    let answers: Vec<SystemOutput> = corpus.iter().map(|x| out(&x.id, &x.answer)).collect();
    let a = evaluate(
        "copy-answer",
        &answers,
        &corpus,
        &sim,
        &SatisfierConfig::default(),
    )
    .unwrap();
    assert!(a.bleu < r.bleu);
    assert!(a.style_accuracy < 1.0);
    assert!(a.context_accuracy == 0.0);
}

#[test]
fn one_category_row_per_present_category() {
    let corpus: Vec<PQAInstance> = generate(&GenerateOptions {
        n: 40,
        ..Default::default()
    })
    .unwrap()
    .into_iter()
    .filter(|x| matches!(x.category, Category::Condition | Category::Alternative))
    .collect();
    let outputs: Vec<SystemOutput> = corpus.iter().map(|x| out(&x.id, &x.target)).collect();
    let sim = WindowedSimilarity::new(HashedNgramEmbedder::default());
    let r = evaluate("s", &outputs, &corpus, &sim, &SatisfierConfig::default()).unwrap();
    let cats: Vec<Category> = r.per_category.iter().map(|c| c.category).collect();
    assert_eq!(cats, vec![Category::Condition, Category::Alternative]);
}
