use std::path::Path;

use super::{read_text, FormatError};

/// 256-sample hop at 22.05 kHz.
pub const DEFAULT_HOP_S: f64 = 256.0 / 22050.0;

/// Decoder-frame x input-symbol attention weights.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionMatrix {
    weights: Vec<Vec<f64>>,
    hop: f64,
}

impl AttentionMatrix {
    pub fn new(weights: Vec<Vec<f64>>, hop: f64) -> Result<AttentionMatrix, FormatError> {
        if !(hop > 0.0 && hop.is_finite()) {
            return Err(FormatError::Invalid(format!(
                "hop must be positive, got {hop}"
            )));
        }
        let symbols = weights.first().map_or(0, |r| r.len());
        for (f, row) in weights.iter().enumerate() {
            if row.len() != symbols {
                return Err(FormatError::Invalid(format!(
                    "frame {f}: {} weights, expected {symbols}",
                    row.len()
                )));
            }
            if row.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
                return Err(FormatError::Invalid(format!(
                    "frame {f}: negative or non-finite weight"
                )));
            }
            if !row.iter().any(|&w| w > 0.0) {
                return Err(FormatError::Invalid(format!(
                    "frame {f}: no positive weight"
                )));
            }
        }
        Ok(AttentionMatrix { weights, hop })
    }

    pub fn frames(&self) -> usize {
        self.weights.len()
    }

    pub fn symbols(&self) -> usize {
        self.weights.first().map_or(0, |r| r.len())
    }

    pub fn hop(&self) -> f64 {
        self.hop
    }

    pub fn row(&self, frame: usize) -> &[f64] {
        &self.weights[frame]
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.weights
    }
}

fn parse_header(line: &str) -> Result<(usize, usize, Option<f64>), FormatError> {
    let body = line.strip_prefix('#').ok_or_else(|| {
        FormatError::parse(1, "missing `# frames=<F> symbols=<S> hop_s=<h>` header")
    })?;
    let (mut frames, mut symbols, mut hop) = (None, None, None);
    for field in body.split_whitespace() {
        let (k, v) = field
            .split_once('=')
            .ok_or_else(|| FormatError::parse(1, format!("bad header field {field:?}")))?;
        let bad = || FormatError::parse(1, format!("bad header value {field:?}"));
        match k {
            "frames" => frames = Some(v.parse::<usize>().map_err(|_| bad())?),
            "symbols" => symbols = Some(v.parse::<usize>().map_err(|_| bad())?),
            "hop_s" => hop = Some(v.parse::<f64>().map_err(|_| bad())?),
            _ => {}
        }
    }
    match (frames, symbols) {
        (Some(f), Some(s)) => Ok((f, s, hop)),
        _ => Err(FormatError::parse(
            1,
            "header must declare frames and symbols",
        )),
    }
}

pub(crate) fn parse_attention(text: &str) -> Result<AttentionMatrix, FormatError> {
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines
        .next()
        .ok_or_else(|| FormatError::parse(1, "empty attention file"))?;
    let (frames, symbols, hop) = parse_header(header.trim())?;
    let hop = hop.unwrap_or(DEFAULT_HOP_S);
    if hop <= 0.0 {
        return Err(FormatError::parse(
            1,
            format!("hop_s must be positive, got {hop}"),
        ));
    }
    let mut weights = Vec::with_capacity(frames);
    for (i, line) in lines {
        let row = line
            .split('\t')
            .map(|v| v.trim().parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|_| FormatError::parse(i + 1, "non-numeric weight"))?;
        if row.len() != symbols {
            return Err(FormatError::parse(
                i + 1,
                format!("{} columns, header declares {symbols}", row.len()),
            ));
        }
        if let Some(w) = row.iter().find(|w| !(**w >= 0.0)) {
            return Err(FormatError::parse(i + 1, format!("negative weight {w}")));
        }
        weights.push(row);
    }
    if weights.len() != frames {
        return Err(FormatError::parse(
            1,
            format!("header declares {frames} frames, found {}", weights.len()),
        ));
    }
    AttentionMatrix::new(weights, hop)
}

pub(crate) fn render_attention(att: &AttentionMatrix) -> String {
    let mut out = format!(
        "# frames={} symbols={} hop_s={}\n",
        att.frames(),
        att.symbols(),
        att.hop
    );
    for row in &att.weights {
        let cells: Vec<String> = row.iter().map(|w| w.to_string()).collect();
        out.push_str(&cells.join("\t"));
        out.push('\n');
    }
    out
}

pub fn read_attention(path: &Path) -> Result<AttentionMatrix, FormatError> {
    parse_attention(&read_text(path)?)
}

pub fn write_attention(att: &AttentionMatrix, path: &Path) -> Result<(), FormatError> {
    std::fs::write(path, render_attention(att))?;
    Ok(())
}
