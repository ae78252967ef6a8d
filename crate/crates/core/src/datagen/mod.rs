//! Synthetic polar question/answer corpus with gold parses and targets.
//!
//! Every instance is built from a template that emits its own bracketed
//! parse, so gold constraints come from running the extractor on parses
//! that are correct by construction. Targets mention the product by name,
//! use second-person framing and contain every gold constraint verbatim.

mod grammar;

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, Write as _};
use std::path::Path;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::text::{detokenize, tokenize, SourceInput};
use crate::treebank::{
    constraint_token_rows, extract_constraints, parse_bracketed, Constraint, ConstraintRecord,
    ExtractOptions, LayoutError, ParseTree, TreeError,
};

pub use grammar::{Domain, FUNCTION_WORDS};

#[derive(Debug, Error)]
pub enum DatagenError {
    #[error("invalid category mix {0:?}: weights must be non-negative and sum to 1")]
    InvalidMix([f64; 4]),
    #[error("corpus size must be at least 1")]
    EmptyCorpus,
    #[error("first-person rate {0} outside [0, 1]")]
    InvalidRate(f64),
    #[error("no domains selected")]
    NoDomains,
    #[error("split sizes {0:?} do not add up to {1}")]
    BadSplit([usize; 3], usize),
    #[error("bad parse in instance {id}: {source}")]
    Parse {
        id: String,
        #[source]
        source: TreeError,
    },
    #[error(transparent)]
    Layout(#[from] LayoutError),
    #[error("line {line}: {source}")]
    Json {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Category {
    Explanation,
    Complement,
    Condition,
    Alternative,
}

impl Category {
    pub const ALL: [Category; 4] = [
        Category::Explanation,
        Category::Complement,
        Category::Condition,
        Category::Alternative,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Category::Explanation => "explanation",
            Category::Complement => "complement",
            Category::Condition => "condition",
            Category::Alternative => "alternative",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Polarity {
    Yes,
    No,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Dev,
    Test,
}

/// One synthetic polar question/answer pair with its rewrite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PQAInstance {
    pub id: String,
    pub question: String,
    pub answer: String,
    pub context: String,
    pub category: Category,
    pub polarity: Polarity,
    pub target: String,
    pub question_parse: String,
    pub answer_parse: String,
    pub constraints: Vec<ConstraintRecord>,
    pub domain: Domain,
    pub split: Split,
}

impl PQAInstance {
    pub fn question_tree(&self) -> Result<ParseTree, DatagenError> {
        parse_bracketed(&self.question_parse).map_err(|source| DatagenError::Parse {
            id: self.id.clone(),
            source,
        })
    }

    pub fn answer_tree(&self) -> Result<ParseTree, DatagenError> {
        parse_bracketed(&self.answer_parse).map_err(|source| DatagenError::Parse {
            id: self.id.clone(),
            source,
        })
    }

    /// Model input `[q; SEP; a; SEP; c]`.
    pub fn source(&self) -> SourceInput {
        SourceInput::from_text(&self.question, &self.answer, &self.context)
    }

    pub fn target_tokens(&self) -> Vec<String> {
        tokenize(&self.target)
    }

    pub fn gold(&self) -> Vec<Constraint> {
        self.constraints
            .iter()
            .map(Constraint::from_record)
            .collect()
    }

    /// Input positions of every gold constraint.
    pub fn constraint_rows(&self) -> Result<Vec<Vec<usize>>, DatagenError> {
        Ok(constraint_token_rows(&self.gold(), &self.source().layout)?)
    }
}

/// Category weights in the order explanation, complement, condition,
/// alternative.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CategoryMix(pub [f64; 4]);

impl Default for CategoryMix {
    fn default() -> Self {
        CategoryMix([0.25; 4])
    }
}

impl CategoryMix {
    pub fn validate(&self) -> Result<(), DatagenError> {
        let sum: f64 = self.0.iter().sum();
        if self.0.iter().any(|w| !w.is_finite() || *w < 0.0) || (sum - 1.0).abs() > 1e-9 {
            return Err(DatagenError::InvalidMix(self.0));
        }
        Ok(())
    }

    /// Exact category counts for `n` items (largest remainder, ties to the
    /// earlier category).
    pub fn counts(&self, n: usize) -> [usize; 4] {
        let quotas: Vec<f64> = self.0.iter().map(|w| w * n as f64).collect();
        let mut counts = [0usize; 4];
        for (c, q) in counts.iter_mut().zip(&quotas) {
            *c = q.floor() as usize;
        }
        let mut rest = n - counts.iter().sum::<usize>();
        let mut order: Vec<usize> = (0..4).collect();
        order.sort_by(|&a, &b| {
            let fa = quotas[a] - quotas[a].floor();
            let fb = quotas[b] - quotas[b].floor();
            fb.partial_cmp(&fa).expect("finite").then(a.cmp(&b))
        });
        for i in order {
            if rest == 0 {
                break;
            }
            if self.0[i] > 0.0 {
                counts[i] += 1;
                rest -= 1;
            }
        }
        counts
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenerateOptions {
    pub seed: u64,
    pub n: usize,
    pub mix: CategoryMix,
    /// Probability of adding a first-person sentence to the answer.
    pub first_person_rate: f64,
    pub domains: Vec<Domain>,
    /// Domain reserved for the test split.
    pub holdout: Option<Domain>,
    /// Train/dev/test sizes; proportional to 1000/100/400 when unset.
    pub split_sizes: Option<[usize; 3]>,
}

impl Default for GenerateOptions {
    fn default() -> Self {
        GenerateOptions {
            seed: 13,
            n: 1500,
            mix: CategoryMix::default(),
            first_person_rate: 0.2,
            domains: Domain::ALL.to_vec(),
            holdout: None,
            split_sizes: None,
        }
    }
}

fn leaf(tag: &str, word: &str) -> ParseTree {
    ParseTree::leaf(tag, word)
}

fn node(label: &str, children: Vec<ParseTree>) -> ParseTree {
    ParseTree::node(label, children)
}

fn phrase_leaves(spec: &str) -> Vec<ParseTree> {
    spec.split_whitespace()
        .map(|p| {
            let (tag, word) = p.split_once(':').expect("inventory entries are TAG:word");
            leaf(tag, word)
        })
        .collect()
}

fn phrase_words(spec: &str) -> Vec<String> {
    spec.split_whitespace()
        .map(|p| {
            p.split_once(':')
                .expect("inventory entries are TAG:word")
                .1
                .to_string()
        })
        .collect()
}

fn np(spec: &str) -> ParseTree {
    node("NP", phrase_leaves(spec))
}

fn pronoun(word: &str) -> ParseTree {
    node("NP", vec![leaf("PRP", word)])
}

fn intj(word: &str) -> ParseTree {
    node("INTJ", vec![leaf("UH", word)])
}

fn words(s: &str) -> Vec<String> {
    s.split_whitespace().map(str::to_string).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum QuestionKind {
    Have,
    ComeWith,
    UseWith,
    Usage,
}

const KINDS: [QuestionKind; 4] = [
    QuestionKind::Have,
    QuestionKind::ComeWith,
    QuestionKind::UseWith,
    QuestionKind::Usage,
];

struct Draft {
    question: ParseTree,
    answer: ParseTree,
    context: Vec<String>,
    target: Vec<String>,
}

fn pick_other<'a>(items: &[&'a str], not: &str, rng: &mut ChaCha8Rng) -> &'a str {
    let rest: Vec<&str> = items.iter().copied().filter(|s| *s != not).collect();
    rest.choose(rng)
        .copied()
        .expect("inventories have at least two entries")
}

fn draft(domain: Domain, category: Category, polarity: Polarity, rng: &mut ChaCha8Rng) -> Draft {
    let inv = domain.inventory();
    let product = *inv.products.choose(rng).expect("non-empty");
    let context = phrase_words(product);
    let noun = context.last().expect("product has a noun").clone();
    let kind = *KINDS.choose(rng).expect("non-empty");
    let yes = polarity == Polarity::Yes;

    let mut subject = vec!["the".to_string()];
    subject.extend(context.iter().cloned());
    let mut target = words(if yes { "Yes ," } else { "No ," });

    // question and main clause
    let (question, feature) = match kind {
        QuestionKind::Have => {
            let f = *inv.features.choose(rng).expect("non-empty");
            let q = node(
                "SQ",
                vec![
                    leaf("VBZ", "Does"),
                    node("NP", vec![leaf("DT", "the"), leaf("NN", &noun)]),
                    node("VP", vec![leaf("VB", "have"), np(f)]),
                    leaf(".", "?"),
                ],
            );
            target.extend(subject.iter().cloned());
            target.extend(words(if yes { "does have" } else { "does not have" }));
            target.extend(phrase_words(f));
            (q, f)
        }
        QuestionKind::ComeWith => {
            let a = *inv.accessories.choose(rng).expect("non-empty");
            let q = node(
                "SQ",
                vec![
                    leaf("VBZ", "Does"),
                    pronoun("it"),
                    node(
                        "VP",
                        vec![
                            leaf("VB", "come"),
                            node("PP", vec![leaf("IN", "with"), np(a)]),
                        ],
                    ),
                    leaf(".", "?"),
                ],
            );
            target.extend(subject.iter().cloned());
            target.extend(words(if yes {
                "comes with"
            } else {
                "does not come with"
            }));
            target.extend(phrase_words(a));
            (q, a)
        }
        QuestionKind::UseWith => {
            let d = *inv.devices.choose(rng).expect("non-empty");
            let q = node(
                "SQ",
                vec![
                    leaf("MD", "Can"),
                    pronoun("I"),
                    node(
                        "VP",
                        vec![
                            leaf("VB", "use"),
                            pronoun("it"),
                            node("PP", vec![leaf("IN", "with"), np(d)]),
                        ],
                    ),
                    leaf(".", "?"),
                ],
            );
            target.extend(words(if yes { "you can use" } else { "you cannot use" }));
            target.extend(subject.iter().cloned());
            target.push("with".into());
            target.extend(phrase_words(d));
            (q, d)
        }
        QuestionKind::Usage => {
            let (verb, prep, place) = *inv.usages.choose(rng).expect("non-empty");
            let q = node(
                "SQ",
                vec![
                    leaf("MD", "Can"),
                    pronoun("you"),
                    node(
                        "VP",
                        vec![
                            leaf("VB", verb),
                            pronoun("it"),
                            node("PP", vec![leaf("IN", prep), np(place)]),
                        ],
                    ),
                    leaf(".", "?"),
                ],
            );
            target.extend(words(if yes { "you can" } else { "you cannot" }));
            target.push(verb.into());
            target.extend(subject.iter().cloned());
            target.push(prep.into());
            target.extend(phrase_words(place));
            (q, place)
        }
    };

    let particle = intj(if yes { "Yes" } else { "No" });
    let comma = || leaf(",", ",");
    let period = || leaf(".", ".");
    let answer = match category {
        Category::Explanation => {
            let vp = match (kind, yes) {
                (QuestionKind::Have | QuestionKind::ComeWith, true) => {
                    node("VP", vec![leaf("VBZ", "does")])
                }
                (QuestionKind::Have | QuestionKind::ComeWith, false) => {
                    node("VP", vec![leaf("VBZ", "does"), leaf("RB", "not")])
                }
                (_, true) => node("VP", vec![leaf("MD", "can")]),
                (_, false) => node("VP", vec![leaf("MD", "cannot")]),
            };
            let subj = match kind {
                QuestionKind::Have | QuestionKind::ComeWith => "it",
                _ => "you",
            };
            target.push(".".into());
            node("S", vec![particle, comma(), pronoun(subj), vp, period()])
        }
        Category::Complement => {
            target.extend(words(". Also , it"));
            let vp = if kind == QuestionKind::ComeWith {
                let a2 = pick_other(inv.accessories, feature, rng);
                let pp = node("PP", vec![leaf("IN", "with"), np(a2)]);
                let vp = if yes {
                    target.extend(words("comes with"));
                    node("VP", vec![leaf("VBZ", "comes"), pp])
                } else {
                    target.extend(words("does not come with"));
                    node(
                        "VP",
                        vec![
                            leaf("VBZ", "does"),
                            leaf("RB", "not"),
                            node("VP", vec![leaf("VB", "come"), pp]),
                        ],
                    )
                };
                target.extend(phrase_words(a2));
                vp
            } else {
                let f2 = pick_other(inv.features, feature, rng);
                let vp = if yes {
                    target.push("has".into());
                    node("VP", vec![leaf("VBZ", "has"), np(f2)])
                } else {
                    target.extend(words("does not have"));
                    node(
                        "VP",
                        vec![
                            leaf("VBZ", "does"),
                            leaf("RB", "not"),
                            node("VP", vec![leaf("VB", "have"), np(f2)]),
                        ],
                    )
                };
                target.extend(phrase_words(f2));
                vp
            };
            target.push(".".into());
            node(
                "S",
                vec![
                    particle,
                    comma(),
                    leaf("CC", "and"),
                    pronoun("it"),
                    node("ADVP", vec![leaf("RB", "also")]),
                    vp,
                    period(),
                ],
            )
        }
        Category::Condition => {
            let pool = if yes {
                inv.conditions_yes
            } else {
                inv.conditions_no
            };
            let cond = *pool.choose(rng).expect("non-empty");
            let mut cond_leaves = phrase_leaves(cond);
            let verb = cond_leaves.remove(0);
            let clause = node(
                "SBAR",
                vec![
                    leaf("IN", "if"),
                    node(
                        "S",
                        vec![
                            pronoun("you"),
                            node("VP", vec![verb, node("NP", cond_leaves)]),
                        ],
                    ),
                ],
            );
            target.extend(words("if you"));
            target.extend(phrase_words(cond));
            target.push(".".into());
            let mut kids = vec![particle, comma()];
            if !yes {
                kids.push(leaf("RB", "not"));
            }
            kids.extend([clause, period()]);
            node("S", kids)
        }
        Category::Alternative => {
            target.extend(words(". But"));
            let (subj, vp) = match kind {
                QuestionKind::Have => {
                    let f2 = pick_other(inv.features, feature, rng);
                    target.extend(words("it has"));
                    target.extend(phrase_words(f2));
                    (
                        "it",
                        node(
                            "VP",
                            vec![
                                leaf("VBZ", "has"),
                                np(f2),
                                node("ADVP", vec![leaf("RB", "instead")]),
                            ],
                        ),
                    )
                }
                QuestionKind::ComeWith => {
                    let a2 = pick_other(inv.accessories, feature, rng);
                    target.extend(words("it comes with"));
                    target.extend(phrase_words(a2));
                    (
                        "it",
                        node(
                            "VP",
                            vec![
                                leaf("VBZ", "comes"),
                                node("PP", vec![leaf("IN", "with"), np(a2)]),
                                node("ADVP", vec![leaf("RB", "instead")]),
                            ],
                        ),
                    )
                }
                QuestionKind::UseWith | QuestionKind::Usage => {
                    let d2 = pick_other(inv.devices, feature, rng);
                    target.extend(words("you can use it with"));
                    target.extend(phrase_words(d2));
                    (
                        "you",
                        node(
                            "VP",
                            vec![
                                leaf("MD", "can"),
                                node(
                                    "VP",
                                    vec![
                                        leaf("VB", "use"),
                                        pronoun("it"),
                                        node("PP", vec![leaf("IN", "with"), np(d2)]),
                                        node("ADVP", vec![leaf("RB", "instead")]),
                                    ],
                                ),
                            ],
                        ),
                    )
                }
            };
            target.extend(words("instead ."));
            node(
                "S",
                vec![
                    particle,
                    comma(),
                    leaf("CC", "but"),
                    pronoun(subj),
                    vp,
                    period(),
                ],
            )
        }
    };
    Draft {
        question,
        answer,
        context,
        target,
    }
}

fn render(tree: &ParseTree) -> String {
    detokenize(&tree.leaves())
}

const FIRST_PERSON_SENTENCES: [&str; 3] = [
    "(S (NP (PRP I)) (VP (VBP love) (NP (PRP it))) (. .))",
    "(S (NP (PRP I)) (ADVP (RB really)) (VP (VBP like) (NP (PRP it))) (. .))",
    "(S (NP (PRP$ My) (NN family)) (VP (VBZ likes) (NP (PRP it))) (. .))",
];

fn finish(
    id: String,
    question: &ParseTree,
    answer: &ParseTree,
    context: &[String],
    target: &[String],
    category: Category,
    polarity: Polarity,
    domain: Domain,
) -> PQAInstance {
    let constraints = extract_constraints(question, Some(answer), ExtractOptions::default())
        .iter()
        .map(Constraint::to_record)
        .collect();
    PQAInstance {
        id,
        question: render(question),
        answer: render(answer),
        context: detokenize(context),
        category,
        polarity,
        target: detokenize(target),
        question_parse: question.to_string(),
        answer_parse: answer.to_string(),
        constraints,
        domain,
        split: Split::Train,
    }
}

/// Re-extracts the constraints of an instance from its gold parses.
pub fn gold_constraints(instance: &PQAInstance) -> Result<Vec<Constraint>, DatagenError> {
    let q = instance.question_tree()?;
    let a = instance.answer_tree()?;
    Ok(extract_constraints(&q, Some(&a), ExtractOptions::default()))
}

/// With probability `rate`, appends a first-person sentence to the answer.
/// The target is left untouched.
pub fn first_person_variants(
    instance: &PQAInstance,
    rate: f64,
    rng: &mut impl Rng,
) -> Result<PQAInstance, DatagenError> {
    if !(0.0..=1.0).contains(&rate) {
        return Err(DatagenError::InvalidRate(rate));
    }
    if rate == 0.0 || !rng.random_bool(rate) {
        return Ok(instance.clone());
    }
    let extra = parse_bracketed(FIRST_PERSON_SENTENCES.choose(rng).expect("non-empty"))
        .expect("valid literal");
    let answer = instance.answer_tree()?;
    let mut sentences = if answer.label.is_empty() {
        answer.children
    } else {
        vec![answer]
    };
    sentences.push(extra);
    let answer = node("", sentences);
    let question = instance.question_tree()?;
    let constraints = extract_constraints(&question, Some(&answer), ExtractOptions::default());
    Ok(PQAInstance {
        answer: render(&answer),
        answer_parse: answer.to_string(),
        constraints: constraints.iter().map(Constraint::to_record).collect(),
        ..instance.clone()
    })
}

fn split_sizes(opts: &GenerateOptions, n: usize) -> Result<[usize; 3], DatagenError> {
    if let Some(sizes) = opts.split_sizes {
        if sizes.iter().sum::<usize>() != n {
            return Err(DatagenError::BadSplit(sizes, n));
        }
        return Ok(sizes);
    }
    let train = (n as f64 * 1000.0 / 1500.0).round() as usize;
    let dev = ((n as f64 * 100.0 / 1500.0).round() as usize).min(n - train);
    Ok([train, dev, n - train - dev])
}

/// Generates a seeded corpus with exact category proportions.
pub fn generate(opts: &GenerateOptions) -> Result<Vec<PQAInstance>, DatagenError> {
    opts.mix.validate()?;
    if opts.n == 0 {
        return Err(DatagenError::EmptyCorpus);
    }
    if !(0.0..=1.0).contains(&opts.first_person_rate) {
        return Err(DatagenError::InvalidRate(opts.first_person_rate));
    }
    if opts.domains.is_empty() {
        return Err(DatagenError::NoDomains);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let counts = opts.mix.counts(opts.n);
    let mut categories: Vec<Category> = Category::ALL
        .iter()
        .zip(counts)
        .flat_map(|(&c, k)| std::iter::repeat_n(c, k))
        .collect();
    categories.shuffle(&mut rng);

    let mut out = Vec::with_capacity(opts.n);
    for (i, &category) in categories.iter().enumerate() {
        let domain = *opts.domains.choose(&mut rng).expect("non-empty");
        let polarity = if category == Category::Alternative || !rng.random_bool(0.5) {
            Polarity::No
        } else {
            Polarity::Yes
        };
        let d = draft(domain, category, polarity, &mut rng);
        let inst = finish(
            format!("pqa-{:05}", i + 1),
            &d.question,
            &d.answer,
            &d.context,
            &d.target,
            category,
            polarity,
            domain,
        );
        out.push(first_person_variants(
            &inst,
            opts.first_person_rate,
            &mut rng,
        )?);
    }
    assign_splits(&mut out, opts)?;
    Ok(out)
}

fn assign_splits(corpus: &mut [PQAInstance], opts: &GenerateOptions) -> Result<(), DatagenError> {
    match opts.holdout {
        Some(held) => {
            let in_domain = corpus.iter().filter(|x| x.domain != held).count();
            let dev = (in_domain as f64 / 11.0).round() as usize;
            let mut seen = 0;
            for inst in corpus.iter_mut() {
                inst.split = if inst.domain == held {
                    Split::Test
                } else {
                    seen += 1;
                    if seen <= in_domain - dev {
                        Split::Train
                    } else {
                        Split::Dev
                    }
                };
            }
        }
        None => {
            let [train, dev, _] = split_sizes(opts, corpus.len())?;
            for (i, inst) in corpus.iter_mut().enumerate() {
                inst.split = if i < train {
                    Split::Train
                } else if i < train + dev {
                    Split::Dev
                } else {
                    Split::Test
                };
            }
        }
    }
    Ok(())
}

pub fn split_of(corpus: &[PQAInstance], split: Split) -> Vec<PQAInstance> {
    corpus
        .iter()
        .filter(|x| x.split == split)
        .cloned()
        .collect()
}

pub fn to_jsonl(corpus: &[PQAInstance]) -> String {
    let mut out = String::new();
    for inst in corpus {
        out.push_str(&serde_json::to_string(inst).expect("instance serializes"));
        out.push('\n');
    }
    out
}

pub fn write_jsonl(path: &Path, corpus: &[PQAInstance]) -> Result<(), DatagenError> {
    let mut f = fs::File::create(path)?;
    f.write_all(to_jsonl(corpus).as_bytes())?;
    Ok(())
}

pub fn read_jsonl(path: &Path) -> Result<Vec<PQAInstance>, DatagenError> {
    let reader = BufReader::new(fs::File::open(path)?);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line).map_err(|source| DatagenError::Json {
                line: i + 1,
                source,
            })?,
        );
    }
    Ok(out)
}

/// Counts written next to a generated corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub options: GenerateOptions,
    pub total: usize,
    pub splits: BTreeMap<Split, usize>,
    pub categories: BTreeMap<Category, usize>,
    pub domains: BTreeMap<Domain, usize>,
}

impl Manifest {
    pub fn new(options: &GenerateOptions, corpus: &[PQAInstance]) -> Self {
        let mut splits = BTreeMap::new();
        let mut categories = BTreeMap::new();
        let mut domains = BTreeMap::new();
        for x in corpus {
            *splits.entry(x.split).or_insert(0) += 1;
            *categories.entry(x.category).or_insert(0) += 1;
            *domains.entry(x.domain).or_insert(0) += 1;
        }
        Manifest {
            options: options.clone(),
            total: corpus.len(),
            splits,
            categories,
            domains,
        }
    }
}
