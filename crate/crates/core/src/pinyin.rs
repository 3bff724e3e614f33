//! Tone-digit Pinyin parsing.
//!
//! A syllable is written as an optional initial, a rime and a tone digit,
//! e.g. `zhang1`, `a1`, `lv4`. Parsing is structural: any initial from the
//! canonical inventory may combine with any well-formed rime, so nonsense
//! syllable/tone combinations are accepted. A [`Syllabary`] can be supplied
//! for strict validation against a closed syllable list.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Mandarin initials, two-letter clusters first so matching is longest-first.
///
/// `y` and `w` are orthographic onsets rather than phonemic initials but the
/// parser treats them as initials so that `yu3` splits as `y` + `u`.
pub const INITIALS: [&str; 23] = [
    "zh", "ch", "sh", "b", "p", "m", "f", "d", "t", "n", "l", "g", "k", "h", "j", "q", "x", "r",
    "z", "c", "s", "y", "w",
];

const VOWELS: &[char] = &['a', 'e', 'i', 'o', 'u', 'v'];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PinyinError {
    #[error("token {index} ({token:?}): missing tone digit")]
    MissingTone { index: usize, token: String },
    #[error("token {index} ({token:?}): empty rime")]
    EmptyRime { index: usize, token: String },
    #[error("token {index} ({token:?}): unknown initial cluster")]
    UnknownInitial { index: usize, token: String },
    #[error("token {index} ({token:?}): malformed rime")]
    MalformedRime { index: usize, token: String },
    #[error("token {index} ({token:?}): invalid character")]
    InvalidCharacter { index: usize, token: String },
    #[error("token {index} ({token:?}): not in syllabary")]
    NotInSyllabary { index: usize, token: String },
    #[error("empty syllable sequence")]
    Empty,
}

/// Lexical tone, 0 (neutral) to 4.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct Tone(u8);

impl Tone {
    pub const NEUTRAL: Tone = Tone(0);
    pub const T1: Tone = Tone(1);
    pub const T2: Tone = Tone(2);
    pub const T3: Tone = Tone(3);
    pub const T4: Tone = Tone(4);

    /// Accepts 0..=4, and 5 as an alias of the neutral tone.
    pub fn new(value: u8) -> Option<Tone> {
        match value {
            0..=4 => Some(Tone(value)),
            5 => Some(Tone(0)),
            _ => None,
        }
    }

    pub fn value(self) -> u8 {
        self.0
    }

    pub fn is_lexical(self) -> bool {
        self.0 != 0
    }
}

impl TryFrom<u8> for Tone {
    type Error = String;

    fn try_from(value: u8) -> Result<Self, Self::Error> {
        Tone::new(value).ok_or_else(|| format!("tone out of range: {value}"))
    }
}

impl From<Tone> for u8 {
    fn from(t: Tone) -> u8 {
        t.0
    }
}

impl fmt::Display for Tone {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// One syllable: initial (possibly empty), rime, tone.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Syllable {
    pub initial: String,
    pub rime: String,
    pub tone: Tone,
}

impl Syllable {
    /// Segmental part without the tone, e.g. `"zhang"`.
    pub fn segments(&self) -> String {
        format!("{}{}", self.initial, self.rime)
    }

    /// Same segments carrying a different tone.
    pub fn with_tone(&self, tone: Tone) -> Syllable {
        Syllable {
            initial: self.initial.clone(),
            rime: self.rime.clone(),
            tone,
        }
    }
}

impl fmt::Display for Syllable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}{}", self.initial, self.rime, self.tone)
    }
}

impl FromStr for Syllable {
    type Err = PinyinError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_token(s, 0)
    }
}

/// Ordered syllables of one utterance.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct SyllableSequence(pub Vec<Syllable>);

impl SyllableSequence {
    pub fn new(syllables: Vec<Syllable>) -> Self {
        SyllableSequence(syllables)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Syllable> {
        self.0.iter()
    }

    pub fn tones(&self) -> Vec<Tone> {
        self.0.iter().map(|s| s.tone).collect()
    }

    /// Replaces every tone, keeping segments. Panics if lengths differ.
    pub fn with_tones(&self, tones: &[Tone]) -> SyllableSequence {
        assert_eq!(
            tones.len(),
            self.len(),
            "tone count must match syllable count"
        );
        SyllableSequence(
            self.0
                .iter()
                .zip(tones)
                .map(|(s, &t)| s.with_tone(t))
                .collect(),
        )
    }

    /// Token labels such as `["ma1", "mo2"]`.
    pub fn labels(&self) -> Vec<String> {
        self.0.iter().map(|s| s.to_string()).collect()
    }

    pub fn concat(parts: &[&SyllableSequence]) -> SyllableSequence {
        SyllableSequence(parts.iter().flat_map(|p| p.0.iter().cloned()).collect())
    }
}

impl std::ops::Index<usize> for SyllableSequence {
    type Output = Syllable;

    fn index(&self, i: usize) -> &Syllable {
        &self.0[i]
    }
}

impl<'a> IntoIterator for &'a SyllableSequence {
    type Item = &'a Syllable;
    type IntoIter = std::slice::Iter<'a, Syllable>;

    fn into_iter(self) -> Self::IntoIter {
        self.0.iter()
    }
}

impl fmt::Display for SyllableSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, s) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{s}")?;
        }
        Ok(())
    }
}

// Manifests carry sequences as plain Pinyin strings; an empty string is an
// empty sequence (carrier phrases may have an empty prefix or suffix).
impl Serialize for SyllableSequence {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for SyllableSequence {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        if text.trim().is_empty() {
            return Ok(SyllableSequence::default());
        }
        parse_pinyin(&text).map_err(serde::de::Error::custom)
    }
}

/// Closed list of toneless syllables for strict parsing.
#[derive(Debug, Clone, Default)]
pub struct Syllabary {
    entries: BTreeSet<String>,
}

impl Syllabary {
    /// One syllable per line; blank lines and `#` comments ignored.
    pub fn from_text(text: &str) -> Syllabary {
        let entries = text
            .lines()
            .map(|l| l.trim())
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(|l| l.to_lowercase().replace('ü', "v"))
            .collect();
        Syllabary { entries }
    }

    pub fn contains(&self, segments: &str) -> bool {
        self.entries.contains(segments)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

fn parse_token(raw: &str, index: usize) -> Result<Syllable, PinyinError> {
    let token = raw.to_lowercase().replace('ü', "v");
    let err_token = raw.to_string();

    let Some(last) = token.chars().last() else {
        return Err(PinyinError::EmptyRime {
            index,
            token: err_token,
        });
    };
    let Some(digit) = last.to_digit(10) else {
        return Err(PinyinError::MissingTone {
            index,
            token: err_token,
        });
    };
    let tone = Tone::new(digit as u8).ok_or_else(|| PinyinError::InvalidCharacter {
        index,
        token: err_token.clone(),
    })?;
    let body = &token[..token.len() - 1];
    if !body.chars().all(|c| c.is_ascii_lowercase()) {
        return Err(PinyinError::InvalidCharacter {
            index,
            token: err_token,
        });
    }
    if body.is_empty() {
        return Err(PinyinError::EmptyRime {
            index,
            token: err_token,
        });
    }

    let initial = INITIALS
        .iter()
        .find(|i| body.starts_with(**i))
        .copied()
        .unwrap_or("");
    let rime = &body[initial.len()..];
    if rime.is_empty() {
        return Err(PinyinError::EmptyRime {
            index,
            token: err_token,
        });
    }
    if !rime.starts_with(VOWELS) {
        return Err(PinyinError::UnknownInitial {
            index,
            token: err_token,
        });
    }
    if !is_well_formed_rime(rime) {
        return Err(PinyinError::MalformedRime {
            index,
            token: err_token,
        });
    }

    Ok(Syllable {
        initial: initial.to_string(),
        rime: rime.to_string(),
        tone,
    })
}

/// Vowel nucleus followed by an optional `n`, `ng` or erhua `r` coda.
fn is_well_formed_rime(rime: &str) -> bool {
    let nucleus_end = rime.find(|c| !VOWELS.contains(&c)).unwrap_or(rime.len());
    matches!(&rime[nucleus_end..], "" | "n" | "ng" | "r")
}

/// Parses whitespace-separated tone-digit Pinyin into syllables.
pub fn parse_pinyin(text: &str) -> Result<SyllableSequence, PinyinError> {
    let syllables = text
        .split_whitespace()
        .enumerate()
        .map(|(i, tok)| parse_token(tok, i))
        .collect::<Result<Vec<_>, _>>()?;
    if syllables.is_empty() {
        return Err(PinyinError::Empty);
    }
    Ok(SyllableSequence(syllables))
}

/// Like [`parse_pinyin`] but every syllable must appear in `syllabary`.
pub fn parse_pinyin_strict(
    text: &str,
    syllabary: &Syllabary,
) -> Result<SyllableSequence, PinyinError> {
    let seq = parse_pinyin(text)?;
    for (index, s) in seq.iter().enumerate() {
        if !syllabary.contains(&s.segments()) {
            return Err(PinyinError::NotInSyllabary {
                index,
                token: s.to_string(),
            });
        }
    }
    Ok(seq)
}

/// Renders syllables back to normalized text (lowercase, `v` for ü, single spaces).
pub fn format_pinyin(seq: &SyllableSequence) -> Result<String, PinyinError> {
    if seq.is_empty() {
        return Err(PinyinError::Empty);
    }
    Ok(seq.to_string())
}
