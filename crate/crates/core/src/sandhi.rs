//! Cyclic Tone-3 sandhi over prosodic word structure.
//!
//! Within every word, a Tone 3 immediately followed by another Tone 3 becomes
//! Tone 2. Words are processed bottom-up; at each word the children's current
//! surface tones are concatenated and scanned left to right, each rewrite
//! being visible to the next comparison. When the structure is unknown,
//! [`enumerate_surface_forms`] returns the outputs of every binary bracketing.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pinyin::{PinyinError, Syllable, SyllableSequence, Tone};

pub const DEFAULT_ENUMERATION_CAP: usize = 12;

#[derive(Debug, Error)]
pub enum SandhiError {
    #[error("unbalanced brackets at byte {0}")]
    Unbalanced(usize),
    #[error("empty word at byte {0}")]
    EmptyWord(usize),
    #[error("bad leaf: {0}")]
    Leaf(#[from] PinyinError),
    #[error("combinatorial limit: {len} syllables exceeds cap {cap}")]
    CombinatorialLimit { len: usize, cap: usize },
    #[error("length mismatch: realized {realized}, oracle {oracle}")]
    LengthMismatch { realized: usize, oracle: usize },
    #[error("structure leaves do not match the syllable sequence")]
    StructureMismatch,
    #[error("empty oracle set")]
    EmptyOracle,
    #[error("line {line}: {message}")]
    Json { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Word bracketing over syllables.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ProsodicTree {
    Leaf(Syllable),
    Word(Vec<ProsodicTree>),
}

impl ProsodicTree {
    /// Flat word over a sequence.
    pub fn flat(seq: &SyllableSequence) -> ProsodicTree {
        ProsodicTree::Word(seq.iter().cloned().map(ProsodicTree::Leaf).collect())
    }

    pub fn leaves(&self) -> SyllableSequence {
        let mut out = Vec::new();
        self.collect_leaves(&mut out);
        SyllableSequence(out)
    }

    fn collect_leaves(&self, out: &mut Vec<Syllable>) {
        match self {
            ProsodicTree::Leaf(s) => out.push(s.clone()),
            ProsodicTree::Word(children) => children.iter().for_each(|c| c.collect_leaves(out)),
        }
    }

    pub fn leaf_count(&self) -> usize {
        match self {
            ProsodicTree::Leaf(_) => 1,
            ProsodicTree::Word(children) => children.iter().map(|c| c.leaf_count()).sum(),
        }
    }

    /// Same shape with leaf tones replaced in order. Panics on length mismatch.
    pub fn with_leaf_tones(&self, tones: &[Tone]) -> ProsodicTree {
        assert_eq!(tones.len(), self.leaf_count());
        let mut it = tones.iter().copied();
        self.relabel(&mut it)
    }

    fn relabel(&self, tones: &mut impl Iterator<Item = Tone>) -> ProsodicTree {
        match self {
            ProsodicTree::Leaf(s) => ProsodicTree::Leaf(s.with_tone(tones.next().unwrap())),
            ProsodicTree::Word(children) => {
                ProsodicTree::Word(children.iter().map(|c| c.relabel(tones)).collect())
            }
        }
    }
}

impl fmt::Display for ProsodicTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProsodicTree::Leaf(s) => write!(f, "{s}"),
            ProsodicTree::Word(children) => {
                f.write_str("[")?;
                for (i, c) in children.iter().enumerate() {
                    if i > 0 {
                        f.write_str(" ")?;
                    }
                    write!(f, "{c}")?;
                }
                f.write_str("]")
            }
        }
    }
}

impl Serialize for ProsodicTree {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for ProsodicTree {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        parse_bracketed(&text).map_err(serde::de::Error::custom)
    }
}

enum Lexeme<'a> {
    Open(usize),
    Close(usize),
    Token(&'a str),
}

fn lex(text: &str) -> Vec<Lexeme<'_>> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, c) in text.char_indices() {
        if c == '[' || c == ']' || c.is_whitespace() {
            if let Some(s) = start.take() {
                out.push(Lexeme::Token(&text[s..i]));
            }
            if c == '[' {
                out.push(Lexeme::Open(i));
            } else if c == ']' {
                out.push(Lexeme::Close(i));
            }
        } else if start.is_none() {
            start = Some(i);
        }
    }
    if let Some(s) = start {
        out.push(Lexeme::Token(&text[s..]));
    }
    out
}

/// Parses bracket notation such as `[[meng3 gu3] yu3]`.
///
/// Unbracketed input is one flat word. Several top-level items are wrapped
/// in an implicit outer word.
pub fn parse_bracketed(text: &str) -> Result<ProsodicTree, SandhiError> {
    let mut stack: Vec<(usize, Vec<ProsodicTree>)> = vec![(0, Vec::new())];
    let mut leaf_index = 0;
    for lexeme in lex(text) {
        match lexeme {
            Lexeme::Open(pos) => stack.push((pos, Vec::new())),
            Lexeme::Close(pos) => {
                if stack.len() < 2 {
                    return Err(SandhiError::Unbalanced(pos));
                }
                let (open, children) = stack.pop().unwrap();
                if children.is_empty() {
                    return Err(SandhiError::EmptyWord(open));
                }
                stack
                    .last_mut()
                    .unwrap()
                    .1
                    .push(ProsodicTree::Word(children));
            }
            Lexeme::Token(tok) => {
                let syl = crate::pinyin::parse_pinyin(tok)
                    .map_err(|e| reindex(e, leaf_index))?
                    .0
                    .remove(0);
                leaf_index += 1;
                stack.last_mut().unwrap().1.push(ProsodicTree::Leaf(syl));
            }
        }
    }
    if stack.len() != 1 {
        return Err(SandhiError::Unbalanced(stack.last().unwrap().0));
    }
    let (_, mut top) = stack.pop().unwrap();
    match top.len() {
        0 => Err(SandhiError::Leaf(PinyinError::Empty)),
        1 if matches!(top[0], ProsodicTree::Word(_)) => Ok(top.remove(0)),
        _ => Ok(ProsodicTree::Word(top)),
    }
}

fn reindex(err: PinyinError, index: usize) -> PinyinError {
    use PinyinError::*;
    match err {
        MissingTone { token, .. } => MissingTone { index, token },
        EmptyRime { token, .. } => EmptyRime { index, token },
        UnknownInitial { token, .. } => UnknownInitial { index, token },
        MalformedRime { token, .. } => MalformedRime { index, token },
        InvalidCharacter { token, .. } => InvalidCharacter { index, token },
        NotInSyllabary { token, .. } => NotInSyllabary { index, token },
        Empty => Empty,
    }
}

/// Surface tones of an utterance, one per syllable.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SurfaceForm(pub Vec<Tone>);

impl SurfaceForm {
    pub fn from_digits(digits: &[u8]) -> Option<SurfaceForm> {
        digits
            .iter()
            .map(|&d| Tone::new(d))
            .collect::<Option<Vec<_>>>()
            .map(SurfaceForm)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn digits(&self) -> Vec<u8> {
        self.0.iter().map(|t| t.value()).collect()
    }
}

impl fmt::Display for SurfaceForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|t| t.to_string()).collect();
        f.write_str(&parts.join("-"))
    }
}

/// Deduplicated, ordered set of equal-length surface forms.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<SurfaceForm>", into = "Vec<SurfaceForm>")]
pub struct SurfaceFormSet(BTreeSet<SurfaceForm>);

impl SurfaceFormSet {
    pub fn new(forms: impl IntoIterator<Item = SurfaceForm>) -> Result<Self, SandhiError> {
        let set: BTreeSet<_> = forms.into_iter().collect();
        let Some(first) = set.iter().next() else {
            return Err(SandhiError::EmptyOracle);
        };
        let len = first.len();
        if let Some(bad) = set.iter().find(|f| f.len() != len) {
            return Err(SandhiError::LengthMismatch {
                realized: bad.len(),
                oracle: len,
            });
        }
        Ok(SurfaceFormSet(set))
    }

    pub fn singleton(form: SurfaceForm) -> Self {
        SurfaceFormSet(BTreeSet::from([form]))
    }

    pub fn contains(&self, form: &SurfaceForm) -> bool {
        self.0.contains(form)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn form_len(&self) -> usize {
        self.0.iter().next().map_or(0, |f| f.len())
    }

    pub fn iter(&self) -> impl Iterator<Item = &SurfaceForm> {
        self.0.iter()
    }
}

impl TryFrom<Vec<SurfaceForm>> for SurfaceFormSet {
    type Error = SandhiError;

    fn try_from(v: Vec<SurfaceForm>) -> Result<Self, Self::Error> {
        SurfaceFormSet::new(v)
    }
}

impl From<SurfaceFormSet> for Vec<SurfaceForm> {
    fn from(s: SurfaceFormSet) -> Self {
        s.0.into_iter().collect()
    }
}

/// One left-to-right sandhi pass over a word's concatenated tones.
fn word_cycle(tones: &mut [Tone]) {
    for i in 1..tones.len() {
        if tones[i - 1] == Tone::T3 && tones[i] == Tone::T3 {
            tones[i - 1] = Tone::T2;
        }
    }
}

fn cycle_tree(tree: &ProsodicTree) -> Vec<Tone> {
    match tree {
        ProsodicTree::Leaf(s) => vec![s.tone],
        ProsodicTree::Word(children) => {
            let mut tones: Vec<Tone> = children.iter().flat_map(cycle_tree).collect();
            word_cycle(&mut tones);
            tones
        }
    }
}

/// Applies Tone-3 sandhi cyclically and returns the surface tones.
pub fn apply_sandhi(tree: &ProsodicTree) -> SurfaceForm {
    SurfaceForm(cycle_tree(tree))
}

/// The utterance with surface tones in place of underlying ones.
pub fn surface_syllables(tree: &ProsodicTree) -> SyllableSequence {
    tree.leaves().with_tones(&apply_sandhi(tree).0)
}

/// All licit surface forms for `seq`.
///
/// With a structure the result is its single sandhi output. Without one,
/// every binary bracketing of the sequence is considered.
pub fn enumerate_surface_forms(
    seq: &SyllableSequence,
    structure: Option<&ProsodicTree>,
    cap: usize,
) -> Result<SurfaceFormSet, SandhiError> {
    if let Some(tree) = structure {
        if tree.leaves() != *seq {
            return Err(SandhiError::StructureMismatch);
        }
        return Ok(SurfaceFormSet::singleton(apply_sandhi(tree)));
    }
    if seq.is_empty() {
        return Err(SandhiError::Leaf(PinyinError::Empty));
    }
    if seq.len() > cap {
        return Err(SandhiError::CombinatorialLimit {
            len: seq.len(),
            cap,
        });
    }
    let tones = seq.tones();
    let n = tones.len();
    // outputs[(i, j)]: distinct outputs of all binary trees over tones[i..j]
    let mut outputs: BTreeMap<(usize, usize), BTreeSet<Vec<Tone>>> = BTreeMap::new();
    for i in 0..n {
        outputs.insert((i, i + 1), BTreeSet::from([vec![tones[i]]]));
    }
    for width in 2..=n {
        for i in 0..=n - width {
            let j = i + width;
            let mut here = BTreeSet::new();
            for k in i + 1..j {
                for left in &outputs[&(i, k)] {
                    for right in &outputs[&(k, j)] {
                        let mut joined = left.clone();
                        joined.extend_from_slice(right);
                        word_cycle(&mut joined);
                        here.insert(joined);
                    }
                }
            }
            outputs.insert((i, j), here);
        }
    }
    SurfaceFormSet::new(
        outputs
            .remove(&(0, n))
            .unwrap()
            .into_iter()
            .map(SurfaceForm),
    )
}

/// Fewest positionwise tone mismatches between `realized` and any oracle form.
pub fn count_sandhi_errors(
    realized: &SurfaceForm,
    oracle: &SurfaceFormSet,
) -> Result<usize, SandhiError> {
    if realized.len() != oracle.form_len() {
        return Err(SandhiError::LengthMismatch {
            realized: realized.len(),
            oracle: oracle.form_len(),
        });
    }
    Ok(oracle
        .iter()
        .map(|form| {
            form.0
                .iter()
                .zip(&realized.0)
                .filter(|(a, b)| a != b)
                .count()
        })
        .min()
        .unwrap_or(0))
}

/// One JSON-lines oracle record: `{"id": ..., "forms": [[2,3], ...]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleEntry {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub category: Option<String>,
    pub forms: SurfaceFormSet,
}

pub fn write_oracle_jsonl<W: Write>(
    entries: &[OracleEntry],
    mut out: W,
) -> Result<(), SandhiError> {
    for e in entries {
        let line = serde_json::to_string(e).expect("oracle entries serialize");
        writeln!(out, "{line}")?;
    }
    Ok(())
}

pub fn read_oracle_jsonl<R: BufRead>(input: R) -> Result<Vec<OracleEntry>, SandhiError> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let entry = serde_json::from_str(&line).map_err(|e| SandhiError::Json {
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(entry);
    }
    Ok(out)
}
