//! Bracketed constituency trees and constraint extraction from them.
//!
//! Trees are read from Penn-Treebank style S-expressions. Constraint
//! extraction walks every `NP` node, skips bare pronouns and emits either
//! the parent phrase (when the parent is a `VP`, `PP`, `ADVP` or `ADJP`) or
//! the NP itself (when the parent is another `NP`).

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::text::{InputLayout, Segment};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TreeError {
    #[error("unbalanced parentheses at byte {0}")]
    UnbalancedParens(usize),
    #[error("empty node `()` at byte {0}")]
    EmptyNode(usize),
    #[error("tag `{tag}` has no token or children at byte {pos}")]
    TagWithoutContent { tag: String, pos: usize },
    #[error("node `{tag}` mixes a token with other content at byte {pos}")]
    MixedContent { tag: String, pos: usize },
    #[error("unexpected input after the tree at byte {0}")]
    TrailingInput(usize),
    #[error("no tree in input")]
    Empty,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LayoutError {
    #[error("constraint `{text}` spans [{start}, {end}) but its side has {len} tokens")]
    OffsetOutOfRange {
        text: String,
        start: usize,
        end: usize,
        len: usize,
    },
}

/// Labeled constituency tree over a token sequence.
///
/// Preterminals carry their surface token in `leaf_token` and have no
/// children. `span` is a half-open interval of leaf indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseTree {
    pub label: String,
    pub children: Vec<ParseTree>,
    pub leaf_token: Option<String>,
    pub span: (usize, usize),
}

impl ParseTree {
    pub fn leaf(label: impl Into<String>, token: impl Into<String>) -> Self {
        ParseTree {
            label: label.into(),
            children: Vec::new(),
            leaf_token: Some(token.into()),
            span: (0, 1),
        }
    }

    /// Builds an internal node and recomputes all spans below it.
    pub fn node(label: impl Into<String>, children: Vec<ParseTree>) -> Self {
        let mut tree = ParseTree {
            label: label.into(),
            children,
            leaf_token: None,
            span: (0, 0),
        };
        tree.reindex(0);
        tree
    }

    fn reindex(&mut self, start: usize) -> usize {
        if self.leaf_token.is_some() {
            self.span = (start, start + 1);
            return start + 1;
        }
        let mut pos = start;
        for child in &mut self.children {
            pos = child.reindex(pos);
        }
        self.span = (start, pos);
        pos
    }

    pub fn is_leaf(&self) -> bool {
        self.leaf_token.is_some()
    }

    /// Tokens under this node, left to right.
    pub fn leaves(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.collect_leaves(&mut out);
        out
    }

    fn collect_leaves<'a>(&'a self, out: &mut Vec<&'a str>) {
        match &self.leaf_token {
            Some(tok) => out.push(tok),
            None => self.children.iter().for_each(|c| c.collect_leaves(out)),
        }
    }

    /// Preterminal tags under this node, left to right.
    pub fn pos_tags(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.walk(&mut |n| {
            if n.is_leaf() {
                out.push(n.label.as_str());
            }
        });
        out
    }

    /// Pre-order traversal.
    pub fn walk<'a>(&'a self, f: &mut dyn FnMut(&'a ParseTree)) {
        f(self);
        for c in &self.children {
            c.walk(f);
        }
    }

    /// Label without function tags or indices (`NP-SBJ-1` → `NP`).
    pub fn base_label(&self) -> &str {
        base_label(&self.label)
    }

    /// Checks the structural invariants; used by tests and after parsing.
    pub fn validate(&self) -> bool {
        self.validate_from(self.span.0) == Some(self.span.1)
    }

    fn validate_from(&self, start: usize) -> Option<usize> {
        if self.span.0 != start {
            return None;
        }
        match (&self.leaf_token, self.children.is_empty()) {
            (Some(_), true) => (self.span.1 == start + 1).then_some(start + 1),
            (None, false) => {
                let mut pos = start;
                for c in &self.children {
                    pos = c.validate_from(pos)?;
                }
                (pos == self.span.1).then_some(pos)
            }
            _ => None,
        }
    }
}

impl fmt::Display for ParseTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}", self.label)?;
        if let Some(tok) = &self.leaf_token {
            write!(f, " {tok}")?;
        }
        for (i, c) in self.children.iter().enumerate() {
            if i > 0 || !self.label.is_empty() {
                write!(f, " ")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

fn base_label(label: &str) -> &str {
    if label.starts_with('-') {
        return label;
    }
    label.split(['-', '=']).next().unwrap_or(label)
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Lexeme<'a> {
    Open(usize),
    Close(usize),
    Atom(&'a str, usize),
}

fn lex(text: &str) -> Vec<Lexeme<'_>> {
    let mut out = Vec::new();
    let mut start: Option<usize> = None;
    for (i, ch) in text.char_indices() {
        if ch == '(' || ch == ')' || ch.is_whitespace() {
            if let Some(s) = start.take() {
                out.push(Lexeme::Atom(&text[s..i], s));
            }
            match ch {
                '(' => out.push(Lexeme::Open(i)),
                ')' => out.push(Lexeme::Close(i)),
                _ => {}
            }
        } else if start.is_none() {
            start = Some(i);
        }
    }
    if let Some(s) = start {
        out.push(Lexeme::Atom(&text[s..], s));
    }
    out
}

/// Parses one Penn-Treebank style bracketed tree.
pub fn parse_bracketed(text: &str) -> Result<ParseTree, TreeError> {
    let lexemes = lex(text);
    if lexemes.is_empty() {
        return Err(TreeError::Empty);
    }
    let mut pos = 0;
    let mut tree = parse_node(&lexemes, &mut pos, text.len())?;
    if let Some(lx) = lexemes.get(pos) {
        let at = match lx {
            Lexeme::Open(p) | Lexeme::Close(p) | Lexeme::Atom(_, p) => *p,
        };
        return Err(match lx {
            Lexeme::Close(_) => TreeError::UnbalancedParens(at),
            _ => TreeError::TrailingInput(at),
        });
    }
    tree.reindex(0);
    Ok(tree)
}

fn parse_node(lx: &[Lexeme<'_>], pos: &mut usize, end: usize) -> Result<ParseTree, TreeError> {
    let open_at = match lx.get(*pos) {
        Some(Lexeme::Open(p)) => *p,
        Some(Lexeme::Close(p)) => return Err(TreeError::UnbalancedParens(*p)),
        Some(Lexeme::Atom(_, p)) => return Err(TreeError::TrailingInput(*p)),
        None => return Err(TreeError::UnbalancedParens(end)),
    };
    *pos += 1;
    let label = match lx.get(*pos) {
        Some(Lexeme::Atom(a, _)) => {
            *pos += 1;
            a.to_string()
        }
        Some(Lexeme::Close(_)) => return Err(TreeError::EmptyNode(open_at)),
        Some(Lexeme::Open(_)) => String::new(),
        None => return Err(TreeError::UnbalancedParens(end)),
    };
    let mut children = Vec::new();
    let mut token: Option<String> = None;
    loop {
        match lx.get(*pos) {
            None => return Err(TreeError::UnbalancedParens(end)),
            Some(Lexeme::Close(_)) => {
                *pos += 1;
                break;
            }
            Some(Lexeme::Atom(a, p)) => {
                if token.is_some() || !children.is_empty() {
                    return Err(TreeError::MixedContent {
                        tag: label,
                        pos: *p,
                    });
                }
                token = Some(a.to_string());
                *pos += 1;
            }
            Some(Lexeme::Open(p)) => {
                if token.is_some() {
                    return Err(TreeError::MixedContent {
                        tag: label,
                        pos: *p,
                    });
                }
                children.push(parse_node(lx, pos, end)?);
            }
        }
    }
    if token.is_none() && children.is_empty() {
        return Err(TreeError::TagWithoutContent {
            tag: label,
            pos: open_at,
        });
    }
    Ok(ParseTree {
        label,
        children,
        leaf_token: token,
        span: (0, 0),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PhraseLabel {
    NP,
    VP,
    PP,
    ADVP,
    ADJP,
}

impl PhraseLabel {
    pub fn parse(label: &str) -> Option<Self> {
        match label {
            "NP" => Some(Self::NP),
            "VP" => Some(Self::VP),
            "PP" => Some(Self::PP),
            "ADVP" => Some(Self::ADVP),
            "ADJP" => Some(Self::ADJP),
            _ => None,
        }
    }

    /// Extraction importance: noun phrases first, then verb phrases.
    pub fn priority(self) -> u8 {
        match self {
            Self::NP => 0,
            Self::VP => 1,
            _ => 2,
        }
    }
}

impl fmt::Display for PhraseLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Question,
    Answer,
}

/// A contiguous span of the question or answer that the output should
/// reflect.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Constraint {
    pub tokens: Vec<String>,
    pub start: usize,
    pub end: usize,
    pub label: PhraseLabel,
    pub source: Side,
}

impl Constraint {
    pub fn text(&self) -> String {
        self.tokens.join(" ")
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn priority(&self) -> u8 {
        self.label.priority()
    }

    /// Tokens lowercased the same way the tokenizer does.
    pub fn normalized_tokens(&self) -> Vec<String> {
        self.tokens.iter().map(|t| t.to_lowercase()).collect()
    }

    pub fn to_record(&self) -> ConstraintRecord {
        ConstraintRecord {
            text: self.text(),
            start: self.start,
            end: self.end,
            label: self.label,
            source: self.source,
        }
    }

    pub fn from_record(rec: &ConstraintRecord) -> Self {
        Constraint {
            tokens: rec.text.split_whitespace().map(str::to_string).collect(),
            start: rec.start,
            end: rec.end,
            label: rec.label,
            source: rec.source,
        }
    }
}

/// Serialized form of a constraint.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConstraintRecord {
    pub text: String,
    pub start: usize,
    pub end: usize,
    pub label: PhraseLabel,
    pub source: Side,
}

/// One line of the constraint JSONL output.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConstraintSet {
    pub id: String,
    pub constraints: Vec<ConstraintRecord>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtractOptions {
    /// Also emit NPs whose parent triggers neither rule (subject NPs under
    /// `S`/`SQ`, or a root NP).
    pub include_toplevel_np: bool,
}

const PRONOUN_TAGS: [&str; 4] = ["PRP", "PRP$", "WP", "WP$"];

fn is_pronoun_np(np: &ParseTree) -> bool {
    let tags = np.pos_tags();
    tags.len() == 1 && PRONOUN_TAGS.contains(&tags[0])
}

fn constraint_from(node: &ParseTree, label: PhraseLabel, source: Side) -> Constraint {
    Constraint {
        tokens: node.leaves().into_iter().map(str::to_string).collect(),
        start: node.span.0,
        end: node.span.1,
        label,
        source,
    }
}

fn extract_side(tree: &ParseTree, source: Side, opts: ExtractOptions, out: &mut Vec<Constraint>) {
    fn visit(
        node: &ParseTree,
        parent: Option<&ParseTree>,
        source: Side,
        opts: ExtractOptions,
        out: &mut Vec<Constraint>,
    ) {
        if !node.is_leaf() && node.base_label() == "NP" && !is_pronoun_np(node) {
            let parent_label = parent.map(|p| p.base_label());
            match parent_label.and_then(PhraseLabel::parse) {
                Some(PhraseLabel::NP) => out.push(constraint_from(node, PhraseLabel::NP, source)),
                Some(label) => out.push(constraint_from(
                    parent.expect("parent label"),
                    label,
                    source,
                )),
                None if opts.include_toplevel_np => {
                    out.push(constraint_from(node, PhraseLabel::NP, source))
                }
                None => {}
            }
        }
        for child in &node.children {
            visit(child, Some(node), source, opts, out);
        }
    }
    visit(tree, None, source, opts, out);
}

/// Extracts rewriting constraints from the question and (optionally) the
/// answer parse.
///
/// Output is deduplicated by span within each side and ordered question
/// first, then by label priority, then by span start.
pub fn extract_constraints(
    question: &ParseTree,
    answer: Option<&ParseTree>,
    opts: ExtractOptions,
) -> Vec<Constraint> {
    let mut found = Vec::new();
    extract_side(question, Side::Question, opts, &mut found);
    if let Some(answer) = answer {
        extract_side(answer, Side::Answer, opts, &mut found);
    }
    found.sort_by_key(|c| (c.source, c.priority(), c.start, c.end));
    let mut seen = HashSet::new();
    found.retain(|c| seen.insert((c.source, c.start, c.end)));
    found
}

/// Maps each constraint onto the positions its tokens occupy in `x`.
pub fn constraint_token_rows(
    constraints: &[Constraint],
    layout: &InputLayout,
) -> Result<Vec<Vec<usize>>, LayoutError> {
    constraints
        .iter()
        .map(|c| {
            let seg: Segment = match c.source {
                Side::Question => layout.question,
                Side::Answer => layout.answer,
            };
            if c.start >= c.end || c.end > seg.len {
                return Err(LayoutError::OffsetOutOfRange {
                    text: c.text(),
                    start: c.start,
                    end: c.end,
                    len: seg.len,
                });
            }
            Ok((c.start..c.end).map(|i| seg.offset + i).collect())
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn texts(cs: &[Constraint]) -> Vec<(String, PhraseLabel)> {
        cs.iter().map(|c| (c.text(), c.label)).collect()
    }

    #[test]
    fn parses_simple_np() {
        let t = parse_bracketed("(NP (DT this) (NN monitor))").unwrap();
        assert_eq!(t.label, "NP");
        assert_eq!(t.leaves(), vec!["this", "monitor"]);
        assert_eq!(t.span, (0, 2));
        assert!(t.validate());
    }

    #[test]
    fn parse_errors() {
        assert!(matches!(
            parse_bracketed("(S (NP"),
            Err(TreeError::UnbalancedParens(_))
        ));
        assert!(matches!(
            parse_bracketed("(NP (DT a)))"),
            Err(TreeError::UnbalancedParens(_))
        ));
        assert!(matches!(
            parse_bracketed("(S ())"),
            Err(TreeError::EmptyNode(_))
        ));
        assert!(matches!(
            parse_bracketed("(S (NN))"),
            Err(TreeError::TagWithoutContent { .. })
        ));
        assert!(matches!(
            parse_bracketed("(NN a b)"),
            Err(TreeError::MixedContent { .. })
        ));
        assert!(matches!(
            parse_bracketed("(NN a) (NN b)"),
            Err(TreeError::TrailingInput(_))
        ));
        assert_eq!(parse_bracketed("   "), Err(TreeError::Empty));
    }

    #[test]
    fn unlabeled_root_round_trips() {
        let t = parse_bracketed("( (S (NP (PRP it)) (VP (VBZ works))))").unwrap();
        assert_eq!(t.label, "");
        assert_eq!(t.to_string(), "((S (NP (PRP it)) (VP (VBZ works))))");
    }

    #[test]
    fn base_label_strips_function_tags() {
        assert_eq!(base_label("NP-SBJ-1"), "NP");
        assert_eq!(base_label("NP=2"), "NP");
        assert_eq!(base_label("-NONE-"), "-NONE-");
    }

    #[test]
    fn question_with_vp_object() {
        let q = parse_bracketed(
            "(SQ (VBZ Does) (NP (DT this) (NN monitor)) (VP (VB have) (NP (DT a) (NN camera))))",
        )
        .unwrap();
        let cs = extract_constraints(&q, None, ExtractOptions::default());
        assert_eq!(texts(&cs), vec![("have a camera".into(), PhraseLabel::VP)]);
        assert_eq!((cs[0].start, cs[0].end), (3, 6));
    }

    #[test]
    fn toplevel_np_flag_adds_subject() {
        let q = parse_bracketed(
            "(SQ (VBZ Does) (NP (DT this) (NN monitor)) (VP (VB have) (NP (DT a) (NN camera))))",
        )
        .unwrap();
        let cs = extract_constraints(
            &q,
            None,
            ExtractOptions {
                include_toplevel_np: true,
            },
        );
        assert_eq!(
            texts(&cs),
            vec![
                ("this monitor".into(), PhraseLabel::NP),
                ("have a camera".into(), PhraseLabel::VP)
            ]
        );
    }

    #[test]
    fn nested_np_and_pp() {
        let t =
            parse_bracketed("(NP (NP (DT the) (NN box)) (PP (IN of) (NP (NNS cables))))").unwrap();
        let cs = extract_constraints(&t, None, ExtractOptions::default());
        assert_eq!(
            texts(&cs),
            vec![
                ("the box".into(), PhraseLabel::NP),
                ("of cables".into(), PhraseLabel::PP)
            ]
        );
    }

    #[test]
    fn pronoun_subject_is_skipped() {
        let t = parse_bracketed("(SQ (VBZ Does) (NP (PRP it)) (VP (VB work)))").unwrap();
        assert!(extract_constraints(&t, None, ExtractOptions::default()).is_empty());
        let t = parse_bracketed("(VP (VB like) (NP (PRP it)))").unwrap();
        assert!(extract_constraints(&t, None, ExtractOptions::default()).is_empty());
    }

    #[test]
    fn answer_constraints_follow_question_constraints() {
        let q =
            parse_bracketed("(SQ (VBZ Does) (NP (PRP it)) (VP (VB have) (NP (NN wifi))))").unwrap();
        let a = parse_bracketed("(S (NP (PRP It)) (VP (VBZ has) (NP (NN bluetooth))))").unwrap();
        let cs = extract_constraints(&q, Some(&a), ExtractOptions::default());
        assert_eq!(cs.len(), 2);
        assert_eq!(cs[0].source, Side::Question);
        assert_eq!(cs[1].source, Side::Answer);
        assert_eq!(cs[1].text(), "has bluetooth");
    }

    #[test]
    fn duplicate_spans_are_merged() {
        // both NPs sit under the same VP, which is emitted once
        let t = parse_bracketed("(VP (VB give) (NP (PRP$ my) (NN dog)) (NP (DT a) (NN bone)))")
            .unwrap();
        let cs = extract_constraints(&t, None, ExtractOptions::default());
        assert_eq!(
            texts(&cs),
            vec![("give my dog a bone".into(), PhraseLabel::VP)]
        );
    }

    #[test]
    fn token_rows_offset_arithmetic() {
        let c = Constraint {
            tokens: vec!["a".into(), "b".into(), "c".into(), "d".into()],
            start: 2,
            end: 6,
            label: PhraseLabel::VP,
            source: Side::Answer,
        };
        let layout = InputLayout {
            question: Segment { offset: 0, len: 7 },
            answer: Segment { offset: 8, len: 10 },
            context: Segment { offset: 19, len: 3 },
        };
        assert_eq!(
            constraint_token_rows(std::slice::from_ref(&c), &layout).unwrap(),
            vec![vec![10, 11, 12, 13]]
        );
        assert!(constraint_token_rows(&[], &layout).unwrap().is_empty());

        let short = InputLayout::concat(7, 4, 3);
        assert!(matches!(
            constraint_token_rows(&[c], &short),
            Err(LayoutError::OffsetOutOfRange { len: 4, .. })
        ));
    }

    #[test]
    fn overlapping_rows_are_not_merged() {
        let mk = |s, e| Constraint {
            tokens: vec!["x".into(); e - s],
            start: s,
            end: e,
            label: PhraseLabel::NP,
            source: Side::Question,
        };
        let layout = InputLayout::concat(6, 2, 2);
        let rows = constraint_token_rows(&[mk(0, 4), mk(2, 6)], &layout).unwrap();
        assert_eq!(rows, vec![vec![0, 1, 2, 3], vec![2, 3, 4, 5]]);
        let inter: Vec<_> = rows[0].iter().filter(|i| rows[1].contains(i)).collect();
        assert_eq!(inter, vec![&2, &3]);
    }

    fn arb_tree() -> impl Strategy<Value = ParseTree> {
        let tags = prop::sample::select(vec!["DT", "NN", "PRP", "VB", "IN", "JJ", "RB"]);
        let words = prop::sample::select(vec!["a", "it", "box", "red", "on", "go", "very"]);
        let leaf = (tags, words).prop_map(|(t, w)| ParseTree::leaf(t, w));
        leaf.prop_recursive(4, 24, 3, |inner| {
            let phrase = prop::sample::select(vec!["NP", "VP", "PP", "ADVP", "ADJP", "S", "SQ"]);
            (phrase, prop::collection::vec(inner, 1..4))
                .prop_map(|(l, kids)| ParseTree::node(l, kids))
        })
    }

    fn normalize(s: &str) -> String {
        let collapsed = s.split_whitespace().collect::<Vec<_>>().join(" ");
        collapsed.replace("( ", "(").replace(" )", ")")
    }

    proptest! {
        #[test]
        fn serialize_parse_round_trip(tree in arb_tree()) {
            let text = tree.to_string();
            let spaced = text.replace('(', " ( ").replace(')', " ) ");
            let parsed = parse_bracketed(&spaced).unwrap();
            prop_assert!(parsed.validate());
            prop_assert_eq!(parsed.to_string(), normalize(&spaced));
            prop_assert_eq!(&parsed, &tree);
        }

        #[test]
        fn extracted_spans_are_node_yields(tree in arb_tree()) {
            let cs = extract_constraints(&tree, None, ExtractOptions::default());
            let mut nodes = Vec::new();
            tree.walk(&mut |n| nodes.push((n.span, n.base_label().to_string())));
            for c in &cs {
                prop_assert!(!c.is_empty());
                prop_assert!(nodes.iter().any(|(span, l)| *span == (c.start, c.end) && *l == c.label.to_string()));
                let leaves = tree.leaves();
                prop_assert_eq!(&c.tokens[..], &leaves[c.start..c.end]);
                let single_pronoun = c.len() == 1 && tree.pos_tags()[c.start] == "PRP";
                prop_assert!(!single_pronoun);
            }
            prop_assert_eq!(cs.clone(), extract_constraints(&tree, None, ExtractOptions::default()));
        }
    }
}
