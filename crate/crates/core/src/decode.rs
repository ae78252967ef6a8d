//! Greedy, beam and constrained beam search with live flag updates.
//!
//! Every hypothesis carries its own [`MentionFlagMatrix`]. The flag column
//! fed to the model at a decoder position is the matrix's latest column, so
//! position `j` sees the flags after `j` output tokens, exactly as during
//! teacher-forced training.

use std::cmp::Ordering;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::flags::{FlagError, FlagUpdater, MentionFlagMatrix};
use crate::model::{DecoderState, EncodedSource, ModelError, ModelParams};
use crate::text::{Vocab, BOS_ID, EOS_ID, PAD_ID, SEP_ID};

/// Tokens that are never emitted.
fn blocked(token: usize) -> bool {
    token == PAD_ID || token == BOS_ID || token == SEP_ID
}

#[derive(Debug, Error)]
pub enum DecodeError {
    #[error("beam width must be at least 1")]
    ZeroBeam,
    #[error("constraint contains an empty token sequence")]
    EmptyConstraint,
    #[error("scorer returned {got} log-probabilities for a vocabulary of {expected}")]
    BadScores { got: usize, expected: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Flags(#[from] FlagError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Anything that can score the next token given the tokens fed so far.
pub trait StepModel {
    type State: Clone;

    fn vocab_size(&self) -> usize;

    fn start(&self) -> Self::State;

    /// Feeds `token` (with the flag column of its position) and returns
    /// log-probabilities of the next token.
    fn step(
        &self,
        state: &mut Self::State,
        token: usize,
        flags: &[u8],
    ) -> Result<Vec<f64>, DecodeError>;

    /// Longest decoder input the scorer accepts, BOS included.
    fn max_positions(&self) -> usize {
        usize::MAX
    }
}

/// A trained model bound to one encoded source.
pub struct ModelScorer<'a> {
    params: &'a ModelParams,
    source: EncodedSource,
}

impl<'a> ModelScorer<'a> {
    pub fn new(params: &'a ModelParams, src: &[usize]) -> Result<Self, DecodeError> {
        Ok(ModelScorer {
            params,
            source: params.encode_source(src)?,
        })
    }
}

impl StepModel for ModelScorer<'_> {
    type State = DecoderState;

    fn vocab_size(&self) -> usize {
        self.params.config.vocab_size
    }

    fn start(&self) -> DecoderState {
        self.params.start_decoder()
    }

    fn step(
        &self,
        state: &mut DecoderState,
        token: usize,
        flags: &[u8],
    ) -> Result<Vec<f64>, DecodeError> {
        Ok(self
            .params
            .decode_step(&self.source, state, token, Some(flags))?)
    }

    fn max_positions(&self) -> usize {
        self.params.config.max_len
    }
}

/// Vocabulary and flag machinery shared by all hypotheses.
pub struct FlagContext<'a> {
    pub vocab: &'a Vocab,
    pub updater: FlagUpdater<'a>,
    pub initial: MentionFlagMatrix,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecodeOptions {
    pub beam: usize,
    /// Maximum number of emitted tokens, end token included.
    pub max_len: usize,
    /// Exponent of the length normalization `score / len^alpha`.
    pub length_penalty: f64,
}

impl Default for DecodeOptions {
    fn default() -> Self {
        DecodeOptions {
            beam: 4,
            max_len: 40,
            length_penalty: 0.7,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Hypothesis {
    /// Emitted token ids, without the end token.
    pub tokens: Vec<usize>,
    pub words: Vec<String>,
    /// Sum of the chosen tokens' log-probabilities (end token included).
    pub score: f64,
    pub flags: MentionFlagMatrix,
    /// Constraints satisfied according to the flag matrix.
    pub satisfied: usize,
    pub finished: bool,
    /// Constraint tokens matched so far (constrained search only).
    pub bank: usize,
    progress: Vec<usize>,
}

impl Hypothesis {
    /// Number of scored tokens.
    pub fn length(&self) -> usize {
        self.tokens.len() + usize::from(self.finished)
    }

    pub fn normalized_score(&self, alpha: f64) -> f64 {
        normalize(self.score, self.length(), alpha)
    }
}

fn normalize(score: f64, len: usize, alpha: f64) -> f64 {
    if len == 0 {
        score
    } else {
        score / (len as f64).powf(alpha)
    }
}

/// Search result with the constrained-search warning.
#[derive(Debug, Clone, PartialEq)]
pub struct DecodeResult {
    pub best: Hypothesis,
    /// False when constrained search found no finished hypothesis
    /// covering every constraint and fell back to the best partial one.
    pub constraints_met: bool,
}

struct Live<S> {
    hyp: Hypothesis,
    state: S,
    next: Vec<f64>,
}

fn check_scores(scores: &[f64], vocab: usize) -> Result<(), DecodeError> {
    if scores.len() != vocab {
        return Err(DecodeError::BadScores {
            got: scores.len(),
            expected: vocab,
        });
    }
    Ok(())
}

/// Advances the per-constraint match automaton by one token.
fn advance(constraints: &[Vec<usize>], progress: &[usize], token: usize) -> Vec<usize> {
    constraints
        .iter()
        .zip(progress)
        .map(|(c, &p)| {
            if p == c.len() {
                p
            } else if c[p] == token {
                p + 1
            } else if c[0] == token {
                1
            } else {
                0
            }
        })
        .collect()
}

fn extend<M: StepModel>(
    model: &M,
    ctx: &FlagContext<'_>,
    parent: &Live<M::State>,
    token: usize,
    logp: f64,
    constraints: &[Vec<usize>],
) -> Result<Live<M::State>, DecodeError> {
    let mut hyp = parent.hyp.clone();
    hyp.score += logp;
    hyp.tokens.push(token);
    hyp.words.push(ctx.vocab.token(token).to_string());
    ctx.updater.step(&mut hyp.flags, &hyp.words)?;
    hyp.satisfied = hyp.flags.satisfied_count();
    hyp.progress = advance(constraints, &hyp.progress, token);
    hyp.bank = hyp.progress.iter().sum();
    let mut state = parent.state.clone();
    let next = model.step(&mut state, token, hyp.flags.current())?;
    check_scores(&next, model.vocab_size())?;
    Ok(Live { hyp, state, next })
}

fn initial<M: StepModel>(
    model: &M,
    ctx: &FlagContext<'_>,
    constraints: &[Vec<usize>],
) -> Result<Live<M::State>, DecodeError> {
    let mut state = model.start();
    let flags = ctx.initial.clone();
    let next = model.step(&mut state, BOS_ID, flags.current())?;
    check_scores(&next, model.vocab_size())?;
    let satisfied = flags.satisfied_count();
    Ok(Live {
        hyp: Hypothesis {
            tokens: Vec::new(),
            words: Vec::new(),
            score: 0.0,
            flags,
            satisfied,
            finished: false,
            bank: 0,
            progress: vec![0; constraints.len()],
        },
        state,
        next,
    })
}

/// Index of the largest value among emittable tokens; the smallest index
/// wins ties.
fn argmax(values: &[f64]) -> usize {
    let mut best = None;
    for (i, &v) in values.iter().enumerate() {
        if blocked(i) {
            continue;
        }
        if best.is_none_or(|b: usize| v > values[b]) {
            best = Some(i);
        }
    }
    best.unwrap_or(EOS_ID)
}

/// Picks the most probable token at every step.
pub fn greedy_decode<M: StepModel>(
    model: &M,
    ctx: &FlagContext<'_>,
    max_len: usize,
) -> Result<Hypothesis, DecodeError> {
    let max_len = max_len.min(model.max_positions());
    let mut live = initial(model, ctx, &[])?;
    for _ in 0..max_len {
        let token = argmax(&live.next);
        let logp = live.next[token];
        let last = live.hyp.tokens.len() + 1 == max_len;
        if token == EOS_ID || last {
            // the last slot cannot feed the model again
            let mut hyp = live.hyp;
            hyp.score += logp;
            if token == EOS_ID {
                hyp.finished = true;
            } else {
                hyp.tokens.push(token);
                hyp.words.push(ctx.vocab.token(token).to_string());
                ctx.updater.step(&mut hyp.flags, &hyp.words)?;
                hyp.satisfied = hyp.flags.satisfied_count();
            }
            return Ok(hyp);
        }
        live = extend(model, ctx, &live, token, logp, &[])?;
    }
    Ok(live.hyp)
}

/// Length-normalized beam search.
pub fn beam_decode<M: StepModel>(
    model: &M,
    ctx: &FlagContext<'_>,
    opts: &DecodeOptions,
) -> Result<Hypothesis, DecodeError> {
    Ok(search(model, ctx, opts, &[])?.best)
}

/// Grid beam search over banks of matched constraint tokens.
///
/// Hypotheses are grouped by the number of constraint tokens matched so
/// far; each bank keeps its own beam, and only hypotheses in the top bank
/// (every constraint matched in order) may emit the end token.
pub fn cbs_decode<M: StepModel>(
    model: &M,
    ctx: &FlagContext<'_>,
    constraints: &[Vec<usize>],
    opts: &DecodeOptions,
) -> Result<DecodeResult, DecodeError> {
    if constraints.iter().any(Vec::is_empty) {
        return Err(DecodeError::EmptyConstraint);
    }
    search(model, ctx, opts, constraints)
}

struct Candidate {
    parent: usize,
    token: usize,
    logp: f64,
    score: f64,
    normalized: f64,
}

fn by_candidate_rank(a: &Candidate, b: &Candidate) -> Ordering {
    b.normalized
        .partial_cmp(&a.normalized)
        .unwrap_or(Ordering::Equal)
        .then(a.parent.cmp(&b.parent))
        .then(a.token.cmp(&b.token))
}

fn search<M: StepModel>(
    model: &M,
    ctx: &FlagContext<'_>,
    opts: &DecodeOptions,
    constraints: &[Vec<usize>],
) -> Result<DecodeResult, DecodeError> {
    if opts.beam == 0 {
        return Err(DecodeError::ZeroBeam);
    }
    let top_bank: usize = constraints.iter().map(Vec::len).sum();
    let max_len = opts.max_len.min(model.max_positions());
    let alpha = opts.length_penalty;
    let mut live = vec![initial(model, ctx, constraints)?];
    let mut finished: Vec<Hypothesis> = Vec::new();
    for step in 0..max_len {
        let len = step + 1;
        let last = len == max_len;
        let mut banks: Vec<Vec<Candidate>> = (0..=top_bank).map(|_| Vec::new()).collect();
        for (p, l) in live.iter().enumerate() {
            for (token, &lp) in l.next.iter().enumerate() {
                if blocked(token) || !lp.is_finite() {
                    continue;
                }
                let bank = if token == EOS_ID {
                    if l.hyp.bank < top_bank {
                        continue;
                    }
                    top_bank
                } else {
                    advance(constraints, &l.hyp.progress, token).iter().sum()
                };
                let score = l.hyp.score + lp;
                banks[bank].push(Candidate {
                    parent: p,
                    token,
                    logp: lp,
                    score,
                    normalized: normalize(score, len, alpha),
                });
            }
        }
        let mut next_live = Vec::new();
        for (b, mut cands) in banks.into_iter().enumerate().rev() {
            cands.sort_by(by_candidate_rank);
            let mut kept = 0;
            for c in cands.into_iter().take(2 * opts.beam) {
                if kept == opts.beam {
                    break;
                }
                let parent = &live[c.parent];
                if c.token == EOS_ID {
                    let mut hyp = parent.hyp.clone();
                    hyp.score = c.score;
                    hyp.finished = true;
                    finished.push(hyp);
                    continue;
                }
                if last {
                    // out of positions: keep the scored prefix without feeding it
                    let mut hyp = parent.hyp.clone();
                    hyp.score = c.score;
                    hyp.tokens.push(c.token);
                    hyp.words.push(ctx.vocab.token(c.token).to_string());
                    ctx.updater.step(&mut hyp.flags, &hyp.words)?;
                    hyp.satisfied = hyp.flags.satisfied_count();
                    hyp.progress = advance(constraints, &hyp.progress, c.token);
                    hyp.bank = hyp.progress.iter().sum();
                    next_live.push(Live {
                        hyp,
                        state: parent.state.clone(),
                        next: Vec::new(),
                    });
                } else {
                    let child = extend(model, ctx, parent, c.token, c.logp, constraints)?;
                    debug_assert_eq!(child.hyp.bank, b);
                    next_live.push(child);
                }
                kept += 1;
            }
        }
        live = next_live;
        if finished.len() >= opts.beam || live.is_empty() {
            break;
        }
    }
    let pick = |hyps: Vec<Hypothesis>| {
        hyps.into_iter().reduce(|best, h| {
            let (a, b) = (h.normalized_score(alpha), best.normalized_score(alpha));
            if (h.bank, a) > (best.bank, b)
                || (h.bank == best.bank && a == b && h.tokens < best.tokens)
            {
                h
            } else {
                best
            }
        })
    };
    if let Some(best) = pick(finished) {
        return Ok(DecodeResult {
            best,
            constraints_met: true,
        });
    }
    let best = pick(live.into_iter().map(|l| l.hyp).collect())
        .expect("beam keeps at least one hypothesis");
    let constraints_met = best.bank == top_bank;
    if !constraints_met {
        log::warn!(
            "constrained search matched {}/{} constraint tokens within {} steps",
            best.bank,
            top_bank,
            max_len
        );
    }
    Ok(DecodeResult {
        best,
        constraints_met,
    })
}

/// Summary written next to a decoded output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecodeReport {
    pub output_tokens: Vec<String>,
    pub score: f64,
    pub constraints_satisfied: usize,
    pub flag_trace_path: Option<String>,
}

impl DecodeReport {
    pub fn new(hyp: &Hypothesis, flag_trace_path: Option<&Path>) -> Self {
        DecodeReport {
            output_tokens: hyp.words.clone(),
            score: hyp.score,
            constraints_satisfied: hyp.satisfied,
            flag_trace_path: flag_trace_path.map(|p| p.display().to_string()),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}
