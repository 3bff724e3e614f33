//! Stimulus generation and JSON-lines manifests.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pinyin::{parse_pinyin, PinyinError, Syllable, SyllableSequence, Tone};
use crate::sandhi::ProsodicTree;

/// Six carrier phrases shipped with the crate. These are reconstructions,
/// not a published list.
pub const DEFAULT_CARRIERS_JSON: &str = include_str!("../data/carriers.json");

/// Reconstructed bisyllabic/trisyllabic/phrase Tone-3 items.
pub const DEFAULT_SANDHI_ITEMS_JSONL: &str = include_str!("../data/sandhi_items.jsonl");

pub const DEFAULT_SYLLABLES: [&str; 3] = ["ma", "mo", "mi"];
pub const DEFAULT_TONES: [u8; 4] = [1, 2, 3, 4];

#[derive(Debug, Error)]
pub enum StimulusError {
    #[error("{0}")]
    Invalid(String),
    #[error("line {line}: {message}")]
    Line { line: usize, message: String },
    #[error(transparent)]
    Pinyin(#[from] PinyinError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CarrierPhrase {
    pub id: String,
    #[serde(default)]
    pub prefix: SyllableSequence,
    #[serde(default)]
    pub suffix: SyllableSequence,
}

impl CarrierPhrase {
    pub fn new(id: &str, prefix: &str, suffix: &str) -> Result<CarrierPhrase, StimulusError> {
        let parse = |t: &str| -> Result<SyllableSequence, StimulusError> {
            if t.trim().is_empty() {
                Ok(SyllableSequence::default())
            } else {
                Ok(parse_pinyin(t)?)
            }
        };
        let c = CarrierPhrase {
            id: id.to_string(),
            prefix: parse(prefix)?,
            suffix: parse(suffix)?,
        };
        c.validate()?;
        Ok(c)
    }

    fn validate(&self) -> Result<(), StimulusError> {
        if self.prefix.is_empty() && self.suffix.is_empty() {
            return Err(StimulusError::Invalid(format!(
                "carrier {}: prefix and suffix are both empty",
                self.id
            )));
        }
        Ok(())
    }
}

/// Parses a JSON list of `{id, prefix, suffix}` carriers.
pub fn parse_carriers(json: &str) -> Result<Vec<CarrierPhrase>, StimulusError> {
    let carriers: Vec<CarrierPhrase> = serde_json::from_str(json)
        .map_err(|e| StimulusError::Invalid(format!("carrier file: {e}")))?;
    carriers.iter().try_for_each(|c| c.validate())?;
    Ok(carriers)
}

pub fn default_carriers() -> Vec<CarrierPhrase> {
    parse_carriers(DEFAULT_CARRIERS_JSON).expect("bundled carriers are valid")
}

/// One coarticulation stimulus: two adjacent target syllables inside a carrier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stimulus {
    pub id: String,
    pub carrier_id: String,
    pub text: SyllableSequence,
    pub target_positions: (usize, usize),
    pub underlying_tones: (Tone, Tone),
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub structure: Option<ProsodicTree>,
    #[serde(default)]
    pub sandhi_pair: bool,
}

impl Stimulus {
    pub fn validate(&self) -> Result<(), StimulusError> {
        let (p1, p2) = self.target_positions;
        if p2 != p1 + 1 || p2 >= self.text.len() {
            return Err(StimulusError::Invalid(format!(
                "stimulus {}: target positions ({p1}, {p2}) out of range or not adjacent",
                self.id
            )));
        }
        if (self.text[p1].tone, self.text[p2].tone) != self.underlying_tones {
            return Err(StimulusError::Invalid(format!(
                "stimulus {}: underlying tones disagree with text",
                self.id
            )));
        }
        if let Some(tree) = &self.structure {
            if tree.leaves() != self.text {
                return Err(StimulusError::Invalid(format!(
                    "stimulus {}: structure leaves differ from text",
                    self.id
                )));
            }
        }
        Ok(())
    }

    /// The structure, or a flat word when none was declared.
    pub fn tree(&self) -> ProsodicTree {
        self.structure
            .clone()
            .unwrap_or_else(|| ProsodicTree::flat(&self.text))
    }
}

#[derive(Debug, Clone)]
pub struct StimulusConfig {
    pub syllables: Vec<String>,
    pub tones: Vec<u8>,
    pub carriers: Vec<CarrierPhrase>,
    pub allow_same_syllable: bool,
}

impl Default for StimulusConfig {
    fn default() -> Self {
        StimulusConfig {
            syllables: DEFAULT_SYLLABLES.iter().map(|s| s.to_string()).collect(),
            tones: DEFAULT_TONES.to_vec(),
            carriers: default_carriers(),
            allow_same_syllable: false,
        }
    }
}

/// Ordered target pairs x tone pairs x carriers.
///
/// Ids follow `<carrier>_<s1><t1>_<s2><t2>`. Each carrier contributes the
/// structure `[prefix... [t1 t2] suffix...]`, so the target pair is one word.
pub fn generate_coarticulation_stimuli(
    cfg: &StimulusConfig,
) -> Result<Vec<Stimulus>, StimulusError> {
    if cfg.syllables.len() < 2 {
        return Err(StimulusError::Invalid("need at least two syllables".into()));
    }
    if cfg.tones.is_empty() {
        return Err(StimulusError::Invalid("need at least one tone".into()));
    }
    if cfg.carriers.is_empty() {
        return Err(StimulusError::Invalid("need at least one carrier".into()));
    }
    let tones = cfg
        .tones
        .iter()
        .map(|&t| match Tone::new(t) {
            Some(tone) if tone.is_lexical() => Ok(tone),
            _ => Err(StimulusError::Invalid(format!(
                "tone {t} is not a lexical tone"
            ))),
        })
        .collect::<Result<Vec<_>, _>>()?;
    // validate segment strings by parsing them with a dummy tone
    let bases = cfg
        .syllables
        .iter()
        .map(|s| Ok(parse_pinyin(&format!("{s}1"))?.0.remove(0)))
        .collect::<Result<Vec<Syllable>, StimulusError>>()?;

    let mut out = Vec::new();
    for carrier in &cfg.carriers {
        carrier.validate()?;
        for (i, s1) in bases.iter().enumerate() {
            for (j, s2) in bases.iter().enumerate() {
                if i == j && !cfg.allow_same_syllable {
                    continue;
                }
                for &t1 in &tones {
                    for &t2 in &tones {
                        out.push(build_stimulus(carrier, s1.with_tone(t1), s2.with_tone(t2)));
                    }
                }
            }
        }
    }
    Ok(out)
}

fn build_stimulus(carrier: &CarrierPhrase, a: Syllable, b: Syllable) -> Stimulus {
    let p1 = carrier.prefix.len();
    let mut syllables: Vec<Syllable> = carrier.prefix.0.clone();
    syllables.push(a.clone());
    syllables.push(b.clone());
    syllables.extend(carrier.suffix.0.iter().cloned());

    let mut children: Vec<ProsodicTree> = carrier
        .prefix
        .iter()
        .cloned()
        .map(ProsodicTree::Leaf)
        .collect();
    children.push(ProsodicTree::Word(vec![
        ProsodicTree::Leaf(a.clone()),
        ProsodicTree::Leaf(b.clone()),
    ]));
    children.extend(carrier.suffix.iter().cloned().map(ProsodicTree::Leaf));

    Stimulus {
        id: format!("{}_{}_{}", carrier.id, a, b),
        carrier_id: carrier.id.clone(),
        text: SyllableSequence(syllables),
        target_positions: (p1, p1 + 1),
        underlying_tones: (a.tone, b.tone),
        structure: Some(ProsodicTree::Word(children)),
        sandhi_pair: a.tone == Tone::T3 && b.tone == Tone::T3,
    }
}

pub fn write_stimulus_manifest<W: Write>(
    stimuli: &[Stimulus],
    mut out: W,
) -> Result<(), StimulusError> {
    for s in stimuli {
        writeln!(
            out,
            "{}",
            serde_json::to_string(s).expect("stimuli serialize")
        )?;
    }
    Ok(())
}

pub fn read_stimulus_manifest<R: BufRead>(input: R) -> Result<Vec<Stimulus>, StimulusError> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let stim: Stimulus = serde_json::from_str(&line).map_err(|e| StimulusError::Line {
            line: i + 1,
            message: e.to_string(),
        })?;
        stim.validate().map_err(|e| StimulusError::Line {
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(stim);
    }
    Ok(out)
}

pub fn save_stimulus_manifest(stimuli: &[Stimulus], path: &Path) -> Result<(), StimulusError> {
    let mut w = BufWriter::new(File::create(path)?);
    write_stimulus_manifest(stimuli, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn load_stimulus_manifest(path: &Path) -> Result<Vec<Stimulus>, StimulusError> {
    read_stimulus_manifest(BufReader::new(File::open(path)?))
}

/// A Tone-3 sandhi test item; `structure` absent means enumeration mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SandhiItem {
    pub id: String,
    pub category: String,
    pub text: SyllableSequence,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub structure: Option<ProsodicTree>,
}

pub fn read_sandhi_items<R: BufRead>(input: R) -> Result<Vec<SandhiItem>, StimulusError> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let item: SandhiItem = serde_json::from_str(&line).map_err(|e| StimulusError::Line {
            line: i + 1,
            message: e.to_string(),
        })?;
        if let Some(t) = &item.structure {
            if t.leaves() != item.text {
                return Err(StimulusError::Line {
                    line: i + 1,
                    message: format!("item {}: structure leaves differ from text", item.id),
                });
            }
        }
        out.push(item);
    }
    Ok(out)
}

pub fn default_sandhi_items() -> Vec<SandhiItem> {
    read_sandhi_items(DEFAULT_SANDHI_ITEMS_JSONL.as_bytes())
        .expect("bundled sandhi items are valid")
}
