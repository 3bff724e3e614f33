use std::fmt;

use tonekit::align::AlignError;
use tonekit::contour::ContourError;
use tonekit::pinyin::PinyinError;
use tonekit::pitch::PitchError;
use tonekit::sandhi::SandhiError;
use tonekit::simsynth::SynthError;
use tonekit::speech_io::FormatError;
use tonekit::stats::StatsError;
use tonekit::stimuli::StimulusError;

/// Exit 1 for validation and usage problems, exit 2 for I/O failures.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Io(String),
}

impl CliError {
    pub fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }

    pub fn code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Io(_) => 2,
        }
    }

    /// Prefixes the message with some context, keeping the kind.
    pub fn context(self, what: impl fmt::Display) -> Self {
        match self {
            CliError::Usage(m) => CliError::Usage(format!("{what}: {m}")),
            CliError::Io(m) => CliError::Io(format!("{what}: {m}")),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Io(m) => f.write_str(m),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<FormatError> for CliError {
    fn from(e: FormatError) -> Self {
        match e {
            FormatError::Io(io) => io.into(),
            other => CliError::Usage(other.to_string()),
        }
    }
}

impl From<StimulusError> for CliError {
    fn from(e: StimulusError) -> Self {
        match e {
            StimulusError::Io(io) => io.into(),
            other => CliError::Usage(other.to_string()),
        }
    }
}

impl From<SandhiError> for CliError {
    fn from(e: SandhiError) -> Self {
        match e {
            SandhiError::Io(io) => io.into(),
            other => CliError::Usage(other.to_string()),
        }
    }
}

impl From<StatsError> for CliError {
    fn from(e: StatsError) -> Self {
        match e {
            StatsError::Io(io) => io.into(),
            StatsError::Csv(c) if c.is_io_error() => CliError::Io(c.to_string()),
            other => CliError::Usage(other.to_string()),
        }
    }
}

macro_rules! usage_from {
    ($($t:ty),*) => {$(
        impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::Usage(e.to_string())
            }
        }
    )*};
}

usage_from!(
    PinyinError,
    PitchError,
    SynthError,
    AlignError,
    ContourError,
    serde_json::Error
);
