//! BLEU, ROUGE-L, constraint coverage and correctness audits.
//!
//! All metrics work on the shared tokenizer output (lowercased, punctuation
//! split off).

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::datagen::{Category, DatagenError, PQAInstance, Polarity};
use crate::flags::{flags_for_output, FlagError, SatisfactionMode, SatisfierConfig};
use crate::similarity::SimilaritySource;
use crate::text::{in_lexicon, tokenize, FIRST_PERSON};

pub const MAX_ORDER: usize = 4;

/// Recall weight of the ROUGE-L F-measure.
pub const ROUGE_BETA: f64 = 1.2;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("empty corpus")]
    EmptyCorpus,
    #[error("{hypotheses} hypotheses but {references} references")]
    LengthMismatch {
        hypotheses: usize,
        references: usize,
    },
    #[error("empty input sequence")]
    EmptyInput,
    #[error("id mismatch at position {position}: expected {expected}, found {found}")]
    IdMismatch {
        position: usize,
        expected: String,
        found: String,
    },
    #[error("bootstrap needs at least one sample")]
    NoSamples,
    #[error(transparent)]
    Flags(#[from] FlagError),
    #[error(transparent)]
    Datagen(#[from] DatagenError),
}

pub type Result<T> = std::result::Result<T, EvalError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Smoothing {
    None,
    /// Orders 2..4 with zero matches use `1 / (total + 1)`.
    #[default]
    AddOneOnZero,
}

/// Sufficient statistics of corpus BLEU.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct BleuStats {
    pub matches: [usize; MAX_ORDER],
    pub totals: [usize; MAX_ORDER],
    pub hyp_len: usize,
    pub ref_len: usize,
}

impl BleuStats {
    pub fn of(hyp: &[String], reference: &[String]) -> Self {
        let mut s = BleuStats {
            hyp_len: hyp.len(),
            ref_len: reference.len(),
            ..Default::default()
        };
        for n in 1..=MAX_ORDER {
            let mut ref_counts: HashMap<&[String], usize> = HashMap::new();
            for g in reference.windows(n) {
                *ref_counts.entry(g).or_insert(0) += 1;
            }
            let mut hyp_counts: HashMap<&[String], usize> = HashMap::new();
            for g in hyp.windows(n) {
                *hyp_counts.entry(g).or_insert(0) += 1;
            }
            s.totals[n - 1] = hyp.len().saturating_sub(n - 1);
            s.matches[n - 1] = hyp_counts
                .iter()
                .map(|(g, &c)| c.min(ref_counts.get(g).copied().unwrap_or(0)))
                .sum();
        }
        s
    }

    pub fn add(&mut self, other: &BleuStats) {
        for n in 0..MAX_ORDER {
            self.matches[n] += other.matches[n];
            self.totals[n] += other.totals[n];
        }
        self.hyp_len += other.hyp_len;
        self.ref_len += other.ref_len;
    }

    pub fn precisions(&self, smoothing: Smoothing) -> [f64; MAX_ORDER] {
        let mut p = [0.0; MAX_ORDER];
        for n in 0..MAX_ORDER {
            let (m, t) = (self.matches[n], self.totals[n]);
            p[n] = match smoothing {
                Smoothing::AddOneOnZero if n > 0 && m == 0 => 1.0 / (t as f64 + 1.0),
                _ if t == 0 => 0.0,
                _ => m as f64 / t as f64,
            };
        }
        p
    }

    pub fn brevity_penalty(&self) -> f64 {
        if self.hyp_len == 0 {
            0.0
        } else if self.hyp_len < self.ref_len {
            (1.0 - self.ref_len as f64 / self.hyp_len as f64).exp()
        } else {
            1.0
        }
    }

    /// BLEU on the 0-100 scale.
    pub fn score(&self, smoothing: Smoothing) -> f64 {
        let p = self.precisions(smoothing);
        if p.contains(&0.0) {
            return 0.0;
        }
        let log_mean = p.iter().map(|v| v.ln()).sum::<f64>() / MAX_ORDER as f64;
        100.0 * self.brevity_penalty() * log_mean.exp()
    }
}

fn check_pairs<A, B>(hyps: &[A], refs: &[B]) -> Result<()> {
    if hyps.len() != refs.len() {
        return Err(EvalError::LengthMismatch {
            hypotheses: hyps.len(),
            references: refs.len(),
        });
    }
    if hyps.is_empty() {
        return Err(EvalError::EmptyCorpus);
    }
    Ok(())
}

/// Corpus BLEU over tokenized hypotheses and single references.
pub fn bleu(hyps: &[Vec<String>], refs: &[Vec<String>], smoothing: Smoothing) -> Result<f64> {
    check_pairs(hyps, refs)?;
    let mut stats = BleuStats::default();
    for (h, r) in hyps.iter().zip(refs) {
        stats.add(&BleuStats::of(h, r));
    }
    Ok(stats.score(smoothing))
}

/// Corpus BLEU on raw strings.
pub fn bleu_text<S: AsRef<str>, T: AsRef<str>>(
    hyps: &[S],
    refs: &[T],
    smoothing: Smoothing,
) -> Result<f64> {
    let h: Vec<Vec<String>> = hyps.iter().map(|s| tokenize(s.as_ref())).collect();
    let r: Vec<Vec<String>> = refs.iter().map(|s| tokenize(s.as_ref())).collect();
    bleu(&h, &r, smoothing)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RougeScore {
    pub precision: f64,
    pub recall: f64,
    pub f: f64,
}

pub fn lcs_len<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y {
                prev[j] + 1
            } else {
                prev[j + 1].max(cur[j])
            };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// LCS precision, recall and `F_beta = (1 + b²)PR / (R + b²P)`.
pub fn rouge_l(hyp: &[String], reference: &[String], beta: f64) -> Result<RougeScore> {
    if hyp.is_empty() || reference.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    let lcs = lcs_len(hyp, reference) as f64;
    let precision = lcs / hyp.len() as f64;
    let recall = lcs / reference.len() as f64;
    let b2 = beta * beta;
    let f = if lcs == 0.0 {
        0.0
    } else {
        (1.0 + b2) * precision * recall / (recall + b2 * precision)
    };
    Ok(RougeScore {
        precision,
        recall,
        f,
    })
}

/// Mean ROUGE-L F over pairs; an empty hypothesis scores 0.
pub fn corpus_rouge_l(hyps: &[Vec<String>], refs: &[Vec<String>], beta: f64) -> Result<f64> {
    check_pairs(hyps, refs)?;
    let mut total = 0.0;
    for (h, r) in hyps.iter().zip(refs) {
        if r.is_empty() {
            return Err(EvalError::EmptyInput);
        }
        if !h.is_empty() {
            total += rouge_l(h, r, beta)?.f;
        }
    }
    Ok(total / hyps.len() as f64)
}

/// One system output, keyed by instance id.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SystemOutput {
    pub id: String,
    pub output: String,
}

fn align(outputs: &[SystemOutput], instances: &[PQAInstance]) -> Result<()> {
    if outputs.len() != instances.len() {
        return Err(EvalError::LengthMismatch {
            hypotheses: outputs.len(),
            references: instances.len(),
        });
    }
    for (position, (o, x)) in outputs.iter().zip(instances).enumerate() {
        if o.id != x.id {
            return Err(EvalError::IdMismatch {
                position,
                expected: x.id.clone(),
                found: o.id.clone(),
            });
        }
    }
    Ok(())
}

/// Satisfied gold constraints of one output.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoverageItem {
    pub id: String,
    pub category: Category,
    pub constraints: usize,
    pub lexical: usize,
    pub semantic: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    /// Fraction of all gold constraints satisfied.
    pub lexical: f64,
    pub semantic: f64,
    pub items: Vec<CoverageItem>,
}

fn rate(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

impl CoverageReport {
    fn from_items(items: Vec<CoverageItem>) -> Self {
        let total: usize = items.iter().map(|i| i.constraints).sum();
        CoverageReport {
            lexical: rate(items.iter().map(|i| i.lexical).sum(), total),
            semantic: rate(items.iter().map(|i| i.semantic).sum(), total),
            items,
        }
    }

    pub fn for_category(&self, category: Category) -> CoverageReport {
        CoverageReport::from_items(
            self.items
                .iter()
                .filter(|i| i.category == category)
                .cloned()
                .collect(),
        )
    }
}

fn satisfied(
    instance: &PQAInstance,
    output: &[String],
    config: &SatisfierConfig,
    source: &dyn SimilaritySource,
) -> Result<usize> {
    let src = instance.source();
    let rows = instance.constraint_rows()?;
    let constraints: Vec<Vec<String>> = instance
        .gold()
        .iter()
        .map(|c| c.normalized_tokens())
        .collect();
    let m = flags_for_output(&src.tokens, &rows, &constraints, output, config, source)?;
    Ok(m.satisfied_count())
}

/// Replays the flag state machine over each output in lexical and
/// semantic mode and counts satisfied gold constraints.
pub fn coverage_audit(
    outputs: &[SystemOutput],
    instances: &[PQAInstance],
    source: &dyn SimilaritySource,
    config: &SatisfierConfig,
) -> Result<CoverageReport> {
    align(outputs, instances)?;
    let lexical = SatisfierConfig {
        mode: SatisfactionMode::Lexical,
        style_enabled: false,
        ..config.clone()
    };
    let semantic = SatisfierConfig {
        mode: SatisfactionMode::Semantic,
        style_enabled: false,
        ..config.clone()
    };
    let mut items = Vec::with_capacity(outputs.len());
    for (o, x) in outputs.iter().zip(instances) {
        let toks = tokenize(&o.output);
        items.push(CoverageItem {
            id: x.id.clone(),
            category: x.category,
            constraints: x.constraints.len(),
            lexical: satisfied(x, &toks, &lexical, source)?,
            semantic: satisfied(x, &toks, &semantic, source)?,
        });
    }
    Ok(CoverageReport::from_items(items))
}

/// Leading "yes"/"no" of a statement.
pub fn leading_polarity(tokens: &[String]) -> Option<Polarity> {
    match tokens.first().map(String::as_str) {
        Some("yes") => Some(Polarity::Yes),
        Some("no") => Some(Polarity::No),
        _ => None,
    }
}

pub fn has_first_person(tokens: &[String]) -> bool {
    tokens.iter().any(|t| in_lexicon(FIRST_PERSON, t))
}

pub fn mentions_context(tokens: &[String], context: &str) -> bool {
    let needle = tokenize(context);
    !needle.is_empty() && tokens.windows(needle.len()).any(|w| w == needle.as_slice())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorrectnessItem {
    pub id: String,
    pub category: Category,
    pub polarity: bool,
    pub style: bool,
    pub context: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrectnessReport {
    pub polarity: f64,
    /// Fraction of outputs free of first-person tokens.
    pub style: f64,
    pub context: f64,
    pub items: Vec<CorrectnessItem>,
}

impl CorrectnessReport {
    fn from_items(items: Vec<CorrectnessItem>) -> Self {
        let n = items.len();
        CorrectnessReport {
            polarity: rate(items.iter().filter(|i| i.polarity).count(), n),
            style: rate(items.iter().filter(|i| i.style).count(), n),
            context: rate(items.iter().filter(|i| i.context).count(), n),
            items,
        }
    }

    pub fn for_category(&self, category: Category) -> CorrectnessReport {
        CorrectnessReport::from_items(
            self.items
                .iter()
                .filter(|i| i.category == category)
                .cloned()
                .collect(),
        )
    }
}

pub fn correctness_audit(
    outputs: &[SystemOutput],
    instances: &[PQAInstance],
) -> Result<CorrectnessReport> {
    align(outputs, instances)?;
    let items = outputs
        .iter()
        .zip(instances)
        .map(|(o, x)| {
            let toks = tokenize(&o.output);
            CorrectnessItem {
                id: x.id.clone(),
                category: x.category,
                polarity: leading_polarity(&toks) == Some(x.polarity),
                style: !has_first_person(&toks),
                context: mentions_context(&toks, &x.context),
            }
        })
        .collect();
    Ok(CorrectnessReport::from_items(items))
}

/// Percentile interval of a resampled statistic.
///
/// `metric` receives the indices of one bootstrap sample.
pub fn bootstrap_interval(
    n: usize,
    samples: usize,
    seed: u64,
    confidence: f64,
    mut metric: impl FnMut(&[usize]) -> f64,
) -> Result<(f64, f64)> {
    if n == 0 {
        return Err(EvalError::EmptyCorpus);
    }
    if samples == 0 {
        return Err(EvalError::NoSamples);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values: Vec<f64> = (0..samples)
        .map(|_| {
            let idx: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
            metric(&idx)
        })
        .collect();
    values.sort_by(f64::total_cmp);
    let tail = (1.0 - confidence.clamp(0.0, 1.0)) / 2.0;
    let pick = |q: f64| values[((q * (samples - 1) as f64).round() as usize).min(samples - 1)];
    Ok((pick(tail), pick(1.0 - tail)))
}

/// Metric row of one category.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryRow {
    pub category: Category,
    pub n: usize,
    pub bleu: f64,
    pub rouge_l: f64,
    pub coverage_semantic: f64,
    pub coverage_lexical: f64,
    pub style_accuracy: f64,
    pub polarity_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub system: String,
    pub n: usize,
    /// Corpus BLEU with add-one smoothing on zero higher-order counts.
    pub bleu: f64,
    pub bleu_unsmoothed: f64,
    pub rouge_l: f64,
    pub rouge_beta: f64,
    /// Reserved for an external BERTScore; never computed here.
    pub bertscore: Option<f64>,
    pub coverage_semantic: f64,
    pub coverage_lexical: f64,
    pub style_accuracy: f64,
    pub polarity_accuracy: f64,
    pub context_accuracy: f64,
    pub per_category: Vec<CategoryRow>,
}

/// Scores one system against the gold targets of `instances`.
pub fn evaluate(
    system: &str,
    outputs: &[SystemOutput],
    instances: &[PQAInstance],
    source: &dyn SimilaritySource,
    config: &SatisfierConfig,
) -> Result<EvalReport> {
    align(outputs, instances)?;
    if outputs.is_empty() {
        return Err(EvalError::EmptyCorpus);
    }
    let hyps: Vec<Vec<String>> = outputs.iter().map(|o| tokenize(&o.output)).collect();
    let refs: Vec<Vec<String>> = instances.iter().map(|x| x.target_tokens()).collect();
    let coverage = coverage_audit(outputs, instances, source, config)?;
    let correctness = correctness_audit(outputs, instances)?;

    let mut groups: BTreeMap<Category, Vec<usize>> = BTreeMap::new();
    for (i, x) in instances.iter().enumerate() {
        groups.entry(x.category).or_default().push(i);
    }
    let mut per_category = Vec::new();
    for (category, idx) in groups {
        let h: Vec<Vec<String>> = idx.iter().map(|&i| hyps[i].clone()).collect();
        let r: Vec<Vec<String>> = idx.iter().map(|&i| refs[i].clone()).collect();
        let cov = coverage.for_category(category);
        let cor = correctness.for_category(category);
        per_category.push(CategoryRow {
            category,
            n: idx.len(),
            bleu: bleu(&h, &r, Smoothing::AddOneOnZero)?,
            rouge_l: corpus_rouge_l(&h, &r, ROUGE_BETA)?,
            coverage_semantic: cov.semantic,
            coverage_lexical: cov.lexical,
            style_accuracy: cor.style,
            polarity_accuracy: cor.polarity,
        });
    }

    Ok(EvalReport {
        system: system.to_string(),
        n: outputs.len(),
        bleu: bleu(&hyps, &refs, Smoothing::AddOneOnZero)?,
        bleu_unsmoothed: bleu(&hyps, &refs, Smoothing::None)?,
        rouge_l: corpus_rouge_l(&hyps, &refs, ROUGE_BETA)?,
        rouge_beta: ROUGE_BETA,
        bertscore: None,
        coverage_semantic: coverage.semantic,
        coverage_lexical: coverage.lexical,
        style_accuracy: correctness.style,
        polarity_accuracy: correctness.polarity,
        context_accuracy: correctness.context,
        per_category,
    })
}

impl EvalReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// One row per category present.
    pub fn category_table(&self) -> String {
        let mut out = format!(
            "{:<12} {:>5} {:>7} {:>8} {:>8} {:>8} {:>7} {:>8}\n",
            "category", "n", "BLEU", "ROUGE-L", "cov-sem", "cov-lex", "style", "polarity"
        );
        for r in &self.per_category {
            let _ = writeln!(
                out,
                "{:<12} {:>5} {:>7.1} {:>8.1} {:>8.3} {:>8.3} {:>7.3} {:>8.3}",
                r.category.name(),
                r.n,
                r.bleu,
                100.0 * r.rouge_l,
                r.coverage_semantic,
                r.coverage_lexical,
                r.style_accuracy,
                r.polarity_accuracy
            );
        }
        out
    }
}

/// Systems as rows, metrics as columns; ROUGE-L is shown on the 0-100 scale.
pub fn render_table(reports: &[EvalReport]) -> String {
    let width = reports
        .iter()
        .map(|r| r.system.len())
        .max()
        .unwrap_or(6)
        .max(6);
    let mut out = format!(
        "{:<width$} {:>7} {:>8} {:>9} {:>8} {:>8} {:>7} {:>8}\n",
        "system", "BLEU", "ROUGE-L", "BertScore", "cov-sem", "cov-lex", "style", "polarity"
    );
    for r in reports {
        let bert = r
            .bertscore
            .map_or_else(|| "-".to_string(), |v| format!("{v:.1}"));
        let _ = writeln!(
            out,
            "{:<width$} {:>7.1} {:>8.1} {:>9} {:>8.3} {:>8.3} {:>7.3} {:>8.3}",
            r.system,
            r.bleu,
            100.0 * r.rouge_l,
            bert,
            r.coverage_semantic,
            r.coverage_lexical,
            r.style_accuracy,
            r.polarity_accuracy
        );
    }
    out
}
