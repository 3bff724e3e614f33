//! Readers and writers for the on-disk formats: 16-bit PCM WAV, Praat long
//! TextGrid, attention TSV and f0 TSV.

mod attention;
mod f0;
mod textgrid;
mod wav;

pub use attention::{read_attention, write_attention, AttentionMatrix, DEFAULT_HOP_S};
pub use f0::{read_f0, write_f0, F0Frame, F0Track};
pub use textgrid::{
    read_textgrid, write_textgrid, Interval, IntervalTier, TextGrid, TILING_TOLERANCE,
};
pub use wav::{read_wav, write_wav, AudioBuffer};

use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum FormatError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("unsupported format: {0}")]
    Unsupported(String),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid data: {0}")]
    Invalid(String),
}

impl FormatError {
    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        FormatError::Parse {
            line,
            message: message.into(),
        }
    }
}

/// Fixed six-decimal rendering with trailing zeros trimmed (`0.25`, `1`, `-0.000001`).
pub(crate) fn fmt_num(x: f64) -> String {
    let mut s = String::new();
    write!(s, "{x:.6}").unwrap();
    if s.contains('.') {
        while s.ends_with('0') {
            s.pop();
        }
        if s.ends_with('.') {
            s.pop();
        }
    }
    if s == "-0" {
        s = "0".into();
    }
    s
}

pub(crate) fn read_text(path: &Path) -> Result<String, FormatError> {
    let bytes = std::fs::read(path)?;
    String::from_utf8(bytes).map_err(|_| FormatError::Unsupported("file is not UTF-8".into()))
}
