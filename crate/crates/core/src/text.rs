//! Tokenization, vocabulary and the `[q; SEP; a; SEP; c]` input layout.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

pub const PAD: &str = "<pad>";
pub const UNK: &str = "<unk>";
pub const BOS: &str = "<s>";
pub const EOS: &str = "</s>";
pub const SEP: &str = "<sep>";

pub const PAD_ID: usize = 0;
pub const UNK_ID: usize = 1;
pub const BOS_ID: usize = 2;
pub const EOS_ID: usize = 3;
pub const SEP_ID: usize = 4;

const SPECIALS: [&str; 5] = [PAD, UNK, BOS, EOS, SEP];

const PUNCT: &[char] = &['.', ',', '?', '!', ';', ':', '"'];

/// Lowercases, splits on whitespace and splits off sentence punctuation.
///
/// Apostrophes and hyphens stay inside words, so `doesn't` and `27-inch`
/// are single tokens.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    for chunk in text.split_whitespace() {
        let mut word = String::new();
        for ch in chunk.chars() {
            if PUNCT.contains(&ch) {
                if !word.is_empty() {
                    out.push(std::mem::take(&mut word));
                }
                out.push(ch.to_string());
            } else {
                word.extend(ch.to_lowercase());
            }
        }
        if !word.is_empty() {
            out.push(word);
        }
    }
    out
}

/// Joins tokens back into display text, attaching punctuation to the left.
pub fn detokenize<S: AsRef<str>>(tokens: &[S]) -> String {
    let mut out = String::new();
    for tok in tokens {
        let tok = tok.as_ref();
        let attach = tok.chars().count() == 1 && tok.chars().all(|c| PUNCT.contains(&c));
        if !out.is_empty() && !attach {
            out.push(' ');
        }
        out.push_str(tok);
    }
    out
}

pub const FIRST_PERSON: &[&str] = &[
    "i",
    "me",
    "my",
    "mine",
    "myself",
    "we",
    "us",
    "our",
    "ours",
    "ourselves",
    "i've",
    "i'm",
    "i'd",
    "i'll",
    "we've",
    "we're",
    "we'd",
    "we'll",
];

pub const SECOND_PERSON: &[&str] = &[
    "you",
    "your",
    "yours",
    "yourself",
    "yourselves",
    "you've",
    "you're",
    "you'd",
    "you'll",
];

/// Case-insensitive membership test against a pronoun lexicon.
pub fn in_lexicon<S: AsRef<str>>(lexicon: &[S], token: &str) -> bool {
    let lower = token.to_lowercase();
    lexicon.iter().any(|w| w.as_ref() == lower)
}

/// Closed token inventory with reserved special ids `0..5`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vocab {
    tokens: Vec<String>,
    #[serde(skip)]
    index: HashMap<String, usize>,
}

impl Vocab {
    pub fn new() -> Self {
        Self::from_tokens(SPECIALS.iter().map(|s| s.to_string()))
    }

    /// Builds a vocabulary from a token list, specials first.
    ///
    /// Order of first appearance is kept so that identical inputs give
    /// identical ids.
    pub fn from_tokens<I: IntoIterator<Item = String>>(tokens: I) -> Self {
        let mut vocab = Vocab {
            tokens: Vec::new(),
            index: HashMap::new(),
        };
        for s in SPECIALS {
            vocab.insert(s);
        }
        for t in tokens {
            vocab.insert(&t);
        }
        vocab
    }

    pub fn insert(&mut self, token: &str) -> usize {
        if let Some(&id) = self.index.get(token) {
            return id;
        }
        let id = self.tokens.len();
        self.tokens.push(token.to_string());
        self.index.insert(token.to_string(), id);
        id
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn get(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn id(&self, token: &str) -> usize {
        self.get(token).unwrap_or(UNK_ID)
    }

    pub fn token(&self, id: usize) -> &str {
        self.tokens.get(id).map(String::as_str).unwrap_or(UNK)
    }

    pub fn encode<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<usize> {
        tokens.iter().map(|t| self.id(t.as_ref())).collect()
    }

    pub fn decode(&self, ids: &[usize]) -> Vec<String> {
        ids.iter().map(|&i| self.token(i).to_string()).collect()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    /// Rebuilds the lookup table after deserialization.
    pub fn reindex(&mut self) {
        self.index = self
            .tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
    }
}

impl Default for Vocab {
    fn default() -> Self {
        Self::new()
    }
}

/// Offset and length of one source side inside the encoder input.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub offset: usize,
    pub len: usize,
}

/// Where question, answer and context sit inside `x`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputLayout {
    pub question: Segment,
    pub answer: Segment,
    pub context: Segment,
}

impl InputLayout {
    /// Layout of `[q; SEP; a; SEP; c]`.
    pub fn concat(question_len: usize, answer_len: usize, context_len: usize) -> Self {
        InputLayout {
            question: Segment {
                offset: 0,
                len: question_len,
            },
            answer: Segment {
                offset: question_len + 1,
                len: answer_len,
            },
            context: Segment {
                offset: question_len + answer_len + 2,
                len: context_len,
            },
        }
    }

    pub fn total_len(&self) -> usize {
        [self.question, self.answer, self.context]
            .iter()
            .map(|s| s.offset + s.len)
            .max()
            .unwrap_or(0)
    }

    pub fn is_separator(&self, pos: usize) -> bool {
        ![self.question, self.answer, self.context]
            .iter()
            .any(|s| pos >= s.offset && pos < s.offset + s.len)
    }
}

/// Encoder input tokens and their layout.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourceInput {
    pub tokens: Vec<String>,
    pub layout: InputLayout,
}

impl SourceInput {
    /// Concatenates already tokenized sides with separator tokens.
    pub fn new(question: &[String], answer: &[String], context: &[String]) -> Self {
        let mut tokens = Vec::with_capacity(question.len() + answer.len() + context.len() + 2);
        tokens.extend(question.iter().cloned());
        tokens.push(SEP.to_string());
        tokens.extend(answer.iter().cloned());
        tokens.push(SEP.to_string());
        tokens.extend(context.iter().cloned());
        SourceInput {
            tokens,
            layout: InputLayout::concat(question.len(), answer.len(), context.len()),
        }
    }

    pub fn from_text(question: &str, answer: &str, context: &str) -> Self {
        Self::new(&tokenize(question), &tokenize(answer), &tokenize(context))
    }
}
