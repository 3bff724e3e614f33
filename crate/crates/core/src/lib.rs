//! Mandarin tone analysis toolkit: pinyin parsing, third-tone sandhi,
//! stimulus generation, speech file formats, attention alignment, pitch
//! tracking, contour analysis, statistics and a contour synthesizer.

pub mod align;
pub mod contour;
pub mod pinyin;
pub mod pipeline;
pub mod pitch;
pub mod sandhi;
pub mod simsynth;
pub mod speech_io;
pub mod stats;
pub mod stimuli;
