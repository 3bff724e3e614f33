//! Glue between modules: stimulus rendering, tone recovery and
//! coarticulation records.

use crate::align::{greedy_alignment, AlignError, Alignment, SYMBOL_TIER};
use crate::contour::{
    classify_tone, normalize_contour, tone_levels, utterance_median, CoartRecord, ContourError,
    ContourFeatures,
};
use crate::pinyin::{SyllableSequence, Tone};
use crate::pitch::f0_for_interval;
use crate::sandhi::surface_syllables;
use crate::simsynth::{
    synth_attention, synth_audio, synth_contour, CoartConfig, SynthConfig, SynthError, SynthOutput,
    ToneTemplate,
};
use crate::speech_io::{AttentionMatrix, AudioBuffer, F0Track, TextGrid};
use crate::stimuli::Stimulus;

pub const DEFAULT_SAMPLE_RATE: u32 = 22050;

/// Surface syllables of a stimulus after sandhi over its structure.
pub fn surface_sequence(stimulus: &Stimulus) -> SyllableSequence {
    surface_syllables(&stimulus.tree())
}

#[derive(Debug, Clone)]
pub struct RenderedStimulus {
    pub surface: SyllableSequence,
    pub synth: SynthOutput,
    pub audio: AudioBuffer,
    pub attention: AttentionMatrix,
}

pub fn render_stimulus(
    stimulus: &Stimulus,
    templates: &ToneTemplate,
    coart: &CoartConfig,
    cfg: &SynthConfig,
    sample_rate: u32,
    hop: f64,
) -> Result<RenderedStimulus, SynthError> {
    let surface = surface_sequence(stimulus);
    let synth = synth_contour(&surface, templates, coart, cfg)?;
    let audio = synth_audio(&synth.track, sample_rate);
    let attention = synth_attention(&synth.grid, hop)?;
    Ok(RenderedStimulus {
        surface,
        synth,
        audio,
        attention,
    })
}

/// Greedy alignment of a synthetic attention matrix against surface labels.
pub fn align_rendered(rendered: &RenderedStimulus) -> Result<Alignment, AlignError> {
    greedy_alignment(&rendered.attention, &rendered.surface.labels())
}

/// Features for every syllable interval, normalized to `reference` Hz.
pub fn interval_features(
    track: &F0Track,
    grid: &TextGrid,
    reference: f64,
    n_points: usize,
) -> Vec<Result<ContourFeatures, ContourError>> {
    match grid.tier(SYMBOL_TIER) {
        Some(tier) => tier
            .intervals
            .iter()
            .map(|iv| {
                normalize_contour(
                    &f0_for_interval(track, iv.xmin, iv.xmax),
                    reference,
                    n_points,
                )
            })
            .collect(),
        None => Vec::new(),
    }
}

/// Classifies every syllable against the utterance median; `None` marks an
/// unmeasurable syllable.
pub fn recover_tones(
    track: &F0Track,
    grid: &TextGrid,
    n_points: usize,
    threshold_st: f64,
) -> Vec<Option<Tone>> {
    let Some(median) = utterance_median(track) else {
        return grid
            .tier(SYMBOL_TIER)
            .map_or(Vec::new(), |t| vec![None; t.intervals.len()]);
    };
    interval_features(track, grid, median, n_points)
        .into_iter()
        .map(|f| f.ok().map(|f| classify_tone(&f, threshold_st)))
        .collect()
}

/// Records for the two target syllables of a stimulus.
///
/// Neighbour contexts come from the onset/offset levels of the neighbours'
/// surface tones.
pub fn coart_records(
    stimulus: &Stimulus,
    surface: &SyllableSequence,
    features: &[Result<ContourFeatures, ContourError>],
) -> Vec<CoartRecord> {
    let tones = surface.tones();
    let (a, b) = stimulus.target_positions;
    [a, b]
        .into_iter()
        .filter_map(|i| {
            let feat = features.get(i)?.as_ref().ok()?.clone();
            let prev_offset = i
                .checked_sub(1)
                .and_then(|p| tone_levels(tones[p]))
                .map(|l| l.1);
            let next_onset = tones.get(i + 1).and_then(|t| tone_levels(*t)).map(|l| l.0);
            Some(CoartRecord {
                stimulus_id: stimulus.id.clone(),
                tone: tones[i],
                features: feat,
                prev_offset,
                next_onset,
                sandhi_pair: stimulus.sandhi_pair,
            })
        })
        .collect()
}
