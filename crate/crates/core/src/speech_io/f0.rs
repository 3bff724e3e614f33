use std::path::Path;

use super::{fmt_num, read_text, FormatError};

/// One analysis frame; `f0` is `None` when unvoiced.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct F0Frame {
    pub time: f64,
    pub f0: Option<f64>,
}

impl F0Frame {
    pub fn voiced(&self) -> bool {
        self.f0.is_some()
    }
}

/// Time-stamped f0 samples in Hz, times strictly increasing.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct F0Track {
    frames: Vec<F0Frame>,
}

impl F0Track {
    pub fn new(frames: Vec<F0Frame>) -> Result<F0Track, FormatError> {
        for (i, w) in frames.windows(2).enumerate() {
            if !(w[1].time > w[0].time) {
                return Err(FormatError::Invalid(format!(
                    "frame {}: time not strictly increasing",
                    i + 1
                )));
            }
        }
        if let Some(f) = frames
            .iter()
            .find(|f| f.f0.is_some_and(|v| !(v > 0.0 && v.is_finite())))
        {
            return Err(FormatError::Invalid(format!(
                "bad f0 {:?} at {}",
                f.f0, f.time
            )));
        }
        Ok(F0Track { frames })
    }

    pub fn frames(&self) -> &[F0Frame] {
        &self.frames
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn voiced_values(&self) -> impl Iterator<Item = f64> + '_ {
        self.frames.iter().filter_map(|f| f.f0)
    }
}

pub(crate) fn render_f0(track: &F0Track, comments: &[String]) -> String {
    let mut out = String::new();
    for c in comments {
        out.push_str("# ");
        out.push_str(c);
        out.push('\n');
    }
    out.push_str("time_s\tf0_hz\tvoiced\n");
    for f in &track.frames {
        let f0 = f.f0.map_or_else(|| "NA".to_string(), fmt_num);
        out.push_str(&format!(
            "{}\t{}\t{}\n",
            fmt_num(f.time),
            f0,
            u8::from(f.voiced())
        ));
    }
    out
}

pub(crate) fn parse_f0(text: &str) -> Result<F0Track, FormatError> {
    let mut frames = Vec::new();
    let mut seen_header = false;
    for (i, line) in text.lines().enumerate() {
        let n = i + 1;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        if !seen_header {
            if line != "time_s\tf0_hz\tvoiced" {
                return Err(FormatError::parse(
                    n,
                    "expected header `time_s<TAB>f0_hz<TAB>voiced`",
                ));
            }
            seen_header = true;
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 3 {
            return Err(FormatError::parse(
                n,
                format!("{} columns, expected 3", cols.len()),
            ));
        }
        let time: f64 = cols[0]
            .parse()
            .map_err(|_| FormatError::parse(n, format!("bad time {:?}", cols[0])))?;
        let voiced = match cols[2] {
            "1" => true,
            "0" => false,
            other => return Err(FormatError::parse(n, format!("bad voicing flag {other:?}"))),
        };
        let f0 = match (cols[1], voiced) {
            ("NA", false) => None,
            ("NA", true) => return Err(FormatError::parse(n, "voiced frame without f0")),
            (_, false) => return Err(FormatError::parse(n, "unvoiced frame with f0")),
            (v, true) => Some(
                v.parse::<f64>()
                    .map_err(|_| FormatError::parse(n, format!("bad f0 {v:?}")))?,
            ),
        };
        if let Some(prev) = frames.last().map(|f: &F0Frame| f.time) {
            if !(time > prev) {
                return Err(FormatError::parse(n, "times must be strictly increasing"));
            }
        }
        frames.push(F0Frame { time, f0 });
    }
    if !seen_header {
        return Err(FormatError::parse(1, "missing header"));
    }
    F0Track::new(frames)
}

pub fn read_f0(path: &Path) -> Result<F0Track, FormatError> {
    parse_f0(&read_text(path)?)
}

/// Writes the TSV; `comments` become leading `# ` lines (e.g. analysis settings).
pub fn write_f0(track: &F0Track, path: &Path, comments: &[String]) -> Result<(), FormatError> {
    std::fs::write(path, render_f0(track, comments))?;
    Ok(())
}
