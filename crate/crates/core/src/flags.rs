//! The mention flag matrix.
//!
//! Rows are encoder input positions, columns are decoding steps. Column 0
//! is the state before any output token; column `t` is the state after the
//! `t`-th output token. Cells hold
//!
//! * `0` for positions outside every constraint,
//! * `1` for constraint positions not yet mentioned in the output,
//! * `2` for constraint positions already mentioned.
//!
//! Style-flagged positions (first-person pronouns in the input) start at
//! `2` and drop to `1` once the configured trigger lexicon shows up in the
//! output.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::similarity::{SimilarityError, SimilaritySource};
use crate::text::{in_lexicon, FIRST_PERSON, SECOND_PERSON, SEP};

pub const ABSENT: u8 = 0;
pub const UNSATISFIED: u8 = 1;
pub const SATISFIED: u8 = 2;

/// Similarity treated as an exact bag match.
const EXACT_SIM: f64 = 1.0 - 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FlagError {
    #[error("constraint position {pos} outside input of length {len}")]
    IndexOutOfRange { pos: usize, len: usize },
    #[error("threshold {name} = {value} outside [0, 1]")]
    InvalidThreshold { name: &'static str, value: f64 },
    #[error("unknown constraint id {0}")]
    UnknownConstraint(usize),
    #[error(transparent)]
    Similarity(#[from] SimilarityError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SatisfactionMode {
    #[default]
    Semantic,
    Lexical,
    Off,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StyleTrigger {
    #[default]
    FirstPerson,
    SecondPerson,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SatisfierConfig {
    /// Absolute similarity floor.
    pub threshold_a: f64,
    /// Floor on the step-to-step similarity increase.
    pub threshold_b: f64,
    pub mode: SatisfactionMode,
    pub style_enabled: bool,
    pub style_trigger: StyleTrigger,
    pub first_person_lexicon: Vec<String>,
    pub second_person_lexicon: Vec<String>,
    /// Flip on an exact bag match (similarity 1) even when the step delta
    /// stays below `threshold_b`.
    pub exact_match_override: bool,
}

impl Default for SatisfierConfig {
    fn default() -> Self {
        SatisfierConfig {
            threshold_a: 0.8,
            threshold_b: 0.3,
            mode: SatisfactionMode::Semantic,
            style_enabled: false,
            style_trigger: StyleTrigger::FirstPerson,
            first_person_lexicon: FIRST_PERSON.iter().map(|s| s.to_string()).collect(),
            second_person_lexicon: SECOND_PERSON.iter().map(|s| s.to_string()).collect(),
            exact_match_override: true,
        }
    }
}

impl SatisfierConfig {
    pub fn with_mode(mode: SatisfactionMode) -> Self {
        SatisfierConfig {
            mode,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), FlagError> {
        for (name, value) in [("a", self.threshold_a), ("b", self.threshold_b)] {
            if !(0.0..=1.0).contains(&value) {
                return Err(FlagError::InvalidThreshold { name, value });
            }
        }
        Ok(())
    }

    fn trigger_lexicon(&self) -> &[String] {
        match self.style_trigger {
            StyleTrigger::FirstPerson => &self.first_person_lexicon,
            StyleTrigger::SecondPerson => &self.second_person_lexicon,
        }
    }
}

/// Flag states of every input position over the decoding steps so far.
#[derive(Debug, Clone, PartialEq)]
pub struct MentionFlagMatrix {
    input_tokens: Vec<String>,
    /// Constraint ids covering each position.
    owners: Vec<Vec<usize>>,
    style_rows: Vec<bool>,
    constraint_rows: Vec<Vec<usize>>,
    satisfied: Vec<bool>,
    style_active: bool,
    last_sim: Vec<f64>,
    state: Vec<u8>,
    columns: Vec<Vec<u8>>,
    outputs: Vec<String>,
}

impl MentionFlagMatrix {
    /// Initial column: constraint positions at 1, style pronouns at 2 when
    /// style flags are enabled, everything else 0.
    ///
    /// A position inside a constraint is never style-flagged. With the
    /// satisfaction mode `off` constraints are ignored entirely.
    pub fn init(
        x_tokens: &[String],
        constraint_rows: &[Vec<usize>],
        config: &SatisfierConfig,
    ) -> Result<Self, FlagError> {
        let len = x_tokens.len();
        let mut owners = vec![Vec::new(); len];
        let constraint_rows: &[Vec<usize>] = match config.mode {
            SatisfactionMode::Off => &[],
            _ => constraint_rows,
        };
        for (cid, rows) in constraint_rows.iter().enumerate() {
            for &pos in rows {
                if pos >= len {
                    return Err(FlagError::IndexOutOfRange { pos, len });
                }
                owners[pos].push(cid);
            }
        }
        let style_rows: Vec<bool> = x_tokens
            .iter()
            .zip(&owners)
            .map(|(tok, own)| {
                config.style_enabled
                    && own.is_empty()
                    && in_lexicon(&config.first_person_lexicon, tok)
            })
            .collect();
        let mut m = MentionFlagMatrix {
            input_tokens: x_tokens.to_vec(),
            owners,
            style_active: style_rows.iter().any(|&s| s),
            style_rows,
            constraint_rows: constraint_rows.to_vec(),
            satisfied: vec![false; constraint_rows.len()],
            last_sim: vec![0.0; constraint_rows.len()],
            state: vec![ABSENT; len],
            columns: Vec::new(),
            outputs: Vec::new(),
        };
        m.refresh_state();
        m.columns.push(m.state.clone());
        Ok(m)
    }

    fn refresh_state(&mut self) {
        for pos in 0..self.state.len() {
            self.state[pos] = if !self.owners[pos].is_empty() {
                // a shared position counts as mentioned once any owner is
                if self.owners[pos].iter().any(|&c| self.satisfied[c]) {
                    SATISFIED
                } else {
                    UNSATISFIED
                }
            } else if self.style_rows[pos] {
                if self.style_active {
                    SATISFIED
                } else {
                    UNSATISFIED
                }
            } else {
                ABSENT
            };
        }
    }

    pub fn input_len(&self) -> usize {
        self.input_tokens.len()
    }

    pub fn input_tokens(&self) -> &[String] {
        &self.input_tokens
    }

    pub fn num_constraints(&self) -> usize {
        self.constraint_rows.len()
    }

    pub fn constraint_rows(&self) -> &[Vec<usize>] {
        &self.constraint_rows
    }

    pub fn style_rows(&self) -> &[bool] {
        &self.style_rows
    }

    /// Working state: the column that the next `push_column` records.
    pub fn current(&self) -> &[u8] {
        &self.state
    }

    /// Latest recorded column.
    pub fn last_column(&self) -> &[u8] {
        self.columns.last().expect("init column")
    }

    pub fn column(&self, t: usize) -> &[u8] {
        &self.columns[t]
    }

    pub fn columns(&self) -> &[Vec<u8>] {
        &self.columns
    }

    pub fn outputs(&self) -> &[String] {
        &self.outputs
    }

    pub fn is_satisfied(&self, constraint_id: usize) -> bool {
        self.satisfied[constraint_id]
    }

    pub fn satisfied_count(&self) -> usize {
        self.satisfied.iter().filter(|&&s| s).count()
    }

    pub fn style_active(&self) -> bool {
        self.style_active
    }

    fn mark_satisfied(&mut self, cid: usize) {
        self.satisfied[cid] = true;
        for &pos in &self.constraint_rows[cid] {
            self.state[pos] = SATISFIED;
        }
    }

    /// Two-threshold semantic gate for one constraint.
    ///
    /// Returns whether the constraint flipped on this call.
    pub fn update_semantic(
        &mut self,
        constraint_id: usize,
        sim_now: f64,
        sim_prev: f64,
        config: &SatisfierConfig,
    ) -> Result<bool, FlagError> {
        if constraint_id >= self.satisfied.len() {
            return Err(FlagError::UnknownConstraint(constraint_id));
        }
        if self.satisfied[constraint_id] {
            return Ok(false);
        }
        let above = sim_now > config.threshold_a;
        let jump = sim_now - sim_prev > config.threshold_b;
        let exact = config.exact_match_override && sim_now >= EXACT_SIM;
        if above && (jump || exact) {
            self.mark_satisfied(constraint_id);
            return Ok(true);
        }
        Ok(false)
    }

    /// Exact contiguous containment of the constraint tokens in the prefix.
    pub fn update_lexical(
        &mut self,
        constraint_id: usize,
        constraint: &[String],
        decoded_prefix: &[String],
    ) -> Result<bool, FlagError> {
        if constraint_id >= self.satisfied.len() {
            return Err(FlagError::UnknownConstraint(constraint_id));
        }
        if self.satisfied[constraint_id] || !contains_verbatim(decoded_prefix, constraint) {
            return Ok(false);
        }
        self.mark_satisfied(constraint_id);
        Ok(true)
    }

    /// Drops active style flags to 1 when the newest token is a trigger.
    pub fn update_style(&mut self, newest_output_token: &str, config: &SatisfierConfig) -> bool {
        if !config.style_enabled
            || !self.style_active
            || !in_lexicon(config.trigger_lexicon(), newest_output_token)
        {
            return false;
        }
        self.style_active = false;
        for pos in 0..self.state.len() {
            if self.style_rows[pos] {
                self.state[pos] = UNSATISFIED;
            }
        }
        true
    }

    /// Records the working state as the column for `output_token`.
    pub fn push_column(&mut self, output_token: &str) {
        self.outputs.push(output_token.to_string());
        self.columns.push(self.state.clone());
    }

    pub fn trace(&self) -> FlagTrace {
        let mut outputs = Vec::with_capacity(self.columns.len());
        outputs.push(SEP.to_string());
        outputs.extend(self.outputs.iter().cloned());
        let cells = (0..self.input_len())
            .map(|i| self.columns.iter().map(|c| c[i]).collect())
            .collect();
        FlagTrace {
            input_tokens: self.input_tokens.clone(),
            output_tokens: outputs,
            cells,
        }
    }
}

/// True when `needle` occurs contiguously in `haystack`.
pub fn contains_verbatim<S: AsRef<str>, T: AsRef<str>>(haystack: &[S], needle: &[T]) -> bool {
    if needle.is_empty() {
        return true;
    }
    haystack.windows(needle.len()).any(|w| {
        w.iter()
            .zip(needle)
            .all(|(a, b)| a.as_ref().eq_ignore_ascii_case(b.as_ref()))
    })
}

/// Input tokens × output columns dump of a flag matrix.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlagTrace {
    pub input_tokens: Vec<String>,
    /// Column headers; the first is the separator that starts decoding.
    pub output_tokens: Vec<String>,
    /// `cells[i][t]` is the flag of input `i` at column `t`.
    pub cells: Vec<Vec<u8>>,
}

impl FlagTrace {
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for tok in &self.output_tokens {
            out.push('\t');
            out.push_str(tok);
        }
        out.push('\n');
        for (tok, row) in self.input_tokens.iter().zip(&self.cells) {
            out.push_str(tok);
            for cell in row {
                let _ = write!(out, "\t{cell}");
            }
            out.push('\n');
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("trace serializes")
    }
}

/// Applies one mode's satisfaction rule and the style rule after each
/// output token.
pub struct FlagUpdater<'a> {
    pub config: &'a SatisfierConfig,
    pub source: &'a dyn SimilaritySource,
    /// Lowercased token sequence of each constraint.
    pub constraints: &'a [Vec<String>],
}

impl<'a> FlagUpdater<'a> {
    pub fn new(
        config: &'a SatisfierConfig,
        source: &'a dyn SimilaritySource,
        constraints: &'a [Vec<String>],
    ) -> Self {
        FlagUpdater {
            config,
            source,
            constraints,
        }
    }

    /// Updates `m` for the newest token of `prefix` and records a column.
    pub fn step(&self, m: &mut MentionFlagMatrix, prefix: &[String]) -> Result<(), FlagError> {
        let newest = prefix.last().map(String::as_str).unwrap_or("");
        match self.config.mode {
            SatisfactionMode::Semantic => {
                for (cid, c) in self.constraints.iter().enumerate() {
                    if m.satisfied[cid] {
                        continue;
                    }
                    let sim_now = self.source.similarity(cid, c, prefix)?;
                    let sim_prev = m.last_sim[cid];
                    m.update_semantic(cid, sim_now, sim_prev, self.config)?;
                    m.last_sim[cid] = sim_now;
                }
            }
            SatisfactionMode::Lexical => {
                for (cid, c) in self.constraints.iter().enumerate() {
                    m.update_lexical(cid, c, prefix)?;
                }
            }
            SatisfactionMode::Off => {}
        }
        m.update_style(newest, self.config);
        m.push_column(newest);
        Ok(())
    }

    /// Runs the updates over a whole output sequence.
    pub fn replay(
        &self,
        mut m: MentionFlagMatrix,
        output: &[String],
    ) -> Result<MentionFlagMatrix, FlagError> {
        for t in 1..=output.len() {
            self.step(&mut m, &output[..t])?;
        }
        Ok(m)
    }
}

/// Builds and replays a flag matrix in one call.
pub fn flags_for_output(
    x_tokens: &[String],
    constraint_rows: &[Vec<usize>],
    constraints: &[Vec<String>],
    output: &[String],
    config: &SatisfierConfig,
    source: &dyn SimilaritySource,
) -> Result<MentionFlagMatrix, FlagError> {
    let m = MentionFlagMatrix::init(x_tokens, constraint_rows, config)?;
    FlagUpdater::new(config, source, constraints).replay(m, output)
}
