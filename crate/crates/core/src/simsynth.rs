//! Deterministic tone-contour and audio simulator.
//!
//! Renders surface tones from five-point templates with an assimilatory
//! carry-over onset shift and a dissimilatory raise before Low onsets, and
//! produces the matching f0 track, TextGrid, audio and attention matrix.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

use crate::align::SYMBOL_TIER;
use crate::contour::Level;
use crate::pinyin::{SyllableSequence, Tone};
use crate::speech_io::{
    AttentionMatrix, AudioBuffer, F0Frame, F0Track, Interval, IntervalTier, TextGrid,
};

#[derive(Debug, Error, PartialEq)]
pub enum SynthError {
    #[error("empty syllable sequence")]
    Empty,
    #[error("syllable {0} has no lexical tone to render")]
    NoTemplate(usize),
    #[error("invalid template: {0}")]
    Template(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("grid has no {0:?} tier")]
    MissingTier(String),
}

/// Five evenly spaced points per tone, in semitones re the speaker base.
#[derive(Debug, Clone, PartialEq)]
pub struct ToneTemplate {
    pub points: [[f64; 5]; 4],
}

impl Default for ToneTemplate {
    fn default() -> Self {
        ToneTemplate {
            points: [
                [6.0, 6.0, 6.0, 6.0, 6.0],
                [-2.0, -3.0, -2.0, 1.0, 5.0],
                [-2.0, -5.0, -7.0, -6.0, -4.0],
                [7.0, 6.0, 3.0, -2.0, -6.0],
            ],
        }
    }
}

fn class(v: f64) -> Level {
    if v >= 0.0 {
        Level::High
    } else {
        Level::Low
    }
}

impl ToneTemplate {
    pub fn shape(&self, tone: Tone) -> Option<&[f64; 5]> {
        tone.is_lexical()
            .then(|| &self.points[tone.value() as usize - 1])
    }

    /// High/Low class of the template onset (0 st boundary).
    pub fn onset_level(&self, tone: Tone) -> Option<Level> {
        self.shape(tone).map(|p| class(p[0]))
    }

    pub fn offset_level(&self, tone: Tone) -> Option<Level> {
        self.shape(tone).map(|p| class(p[4]))
    }

    /// Checks the qualitative shape of each tone.
    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: &str| Err(SynthError::Template(m.to_string()));
        if self.points.iter().flatten().any(|v| !v.is_finite()) {
            return bad("non-finite level");
        }
        let [t1, t2, t3, t4] = &self.points;
        if !(t1[0] >= 0.0 && t1[4] >= 0.0) {
            return bad("tone 1 must start and end High");
        }
        if !(t2[0] < 0.0 && t2[4] >= 0.0) {
            return bad("tone 2 must rise from Low to High");
        }
        let dip = t3[1..4].iter().copied().fold(f64::INFINITY, f64::min);
        if !(t3[0] < 0.0 && t3[4] < 0.0 && dip < t3[0] && dip < t3[4]) {
            return bad("tone 3 must stay Low and dip below its endpoints");
        }
        if !(t4[0] >= 0.0 && t4[4] < 0.0) {
            return bad("tone 4 must fall from High to Low");
        }
        Ok(())
    }

    /// Monotone cubic (PCHIP) interpolation at normalized time `t` in [0, 1].
    pub fn value(&self, tone: Tone, t: f64) -> Option<f64> {
        self.shape(tone).map(|p| pchip(p, t))
    }
}

fn pchip(y: &[f64; 5], t: f64) -> f64 {
    const H: f64 = 0.25;
    let d: Vec<f64> = y.windows(2).map(|w| (w[1] - w[0]) / H).collect();
    let mut m = [0.0; 5];
    for k in 1..4 {
        if d[k - 1] * d[k] > 0.0 {
            m[k] = 2.0 / (1.0 / d[k - 1] + 1.0 / d[k]);
        }
    }
    let end = |d0: f64, d1: f64| {
        let e = (3.0 * d0 - d1) / 2.0;
        if e * d0 <= 0.0 {
            0.0
        } else if d0 * d1 < 0.0 && e.abs() > 3.0 * d0.abs() {
            3.0 * d0
        } else {
            e
        }
    };
    m[0] = end(d[0], d[1]);
    m[4] = end(d[3], d[2]);

    let t = t.clamp(0.0, 1.0);
    let k = ((t / H).floor() as usize).min(3);
    let s = (t - k as f64 * H) / H;
    let (s2, s3) = (s * s, s * s * s);
    (2.0 * s3 - 3.0 * s2 + 1.0) * y[k]
        + (s3 - 2.0 * s2 + s) * H * m[k]
        + (-2.0 * s3 + 3.0 * s2) * y[k + 1]
        + (s3 - s2) * H * m[k + 1]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AnticipatoryShape {
    /// The whole syllable is raised by `delta_st`.
    Uniform,
    /// Raise of `delta_st * (1 - t)`, strongest at the syllable start.
    Ramp,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoartConfig {
    pub kappa: f64,
    pub carry_decay_frac: f64,
    pub delta_st: f64,
    pub anticipatory: AnticipatoryShape,
}

impl Default for CoartConfig {
    fn default() -> Self {
        CoartConfig {
            kappa: 0.5,
            carry_decay_frac: 0.6,
            delta_st: 1.0,
            anticipatory: AnticipatoryShape::Uniform,
        }
    }
}

impl CoartConfig {
    pub fn none() -> Self {
        CoartConfig {
            kappa: 0.0,
            delta_st: 0.0,
            ..CoartConfig::default()
        }
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        if !(0.0..=1.0).contains(&self.kappa) {
            return Err(SynthError::Config(format!(
                "kappa must lie in [0, 1], got {}",
                self.kappa
            )));
        }
        if !(self.carry_decay_frac > 0.0 && self.carry_decay_frac <= 1.0) {
            return Err(SynthError::Config(format!(
                "carry_decay_frac must lie in (0, 1], got {}",
                self.carry_decay_frac
            )));
        }
        if !(self.delta_st >= 0.0 && self.delta_st.is_finite()) {
            return Err(SynthError::Config(format!(
                "delta_st must be non-negative, got {}",
                self.delta_st
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub syllable_dur: f64,
    pub base_hz: f64,
    pub frame_step: f64,
    /// Standard deviation of a per-syllable level offset, in semitones.
    pub jitter_st: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            syllable_dur: 0.25,
            base_hz: 220.0,
            frame_step: 0.01,
            jitter_st: 0.0,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        for (name, v) in [
            ("syllable_dur", self.syllable_dur),
            ("base_hz", self.base_hz),
            ("frame_step", self.frame_step),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(SynthError::Config(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        if !(self.jitter_st >= 0.0 && self.jitter_st.is_finite()) {
            return Err(SynthError::Config(format!(
                "jitter_st must be non-negative, got {}",
                self.jitter_st
            )));
        }
        Ok(())
    }
}

/// Realized semitone contour of a tone sequence.
#[derive(Debug, Clone)]
pub struct RealizedContour {
    tones: Vec<Tone>,
    templates: ToneTemplate,
    decay: f64,
    shape: AnticipatoryShape,
    shifts: Vec<f64>,
    raises: Vec<f64>,
    offsets: Vec<f64>,
}

impl RealizedContour {
    pub fn new(
        tones: &[Tone],
        templates: &ToneTemplate,
        coart: &CoartConfig,
    ) -> Result<Self, SynthError> {
        Self::with_offsets(tones, templates, coart, vec![0.0; tones.len()])
    }

    fn with_offsets(
        tones: &[Tone],
        templates: &ToneTemplate,
        coart: &CoartConfig,
        offsets: Vec<f64>,
    ) -> Result<Self, SynthError> {
        if tones.is_empty() {
            return Err(SynthError::Empty);
        }
        if let Some(i) = tones.iter().position(|t| !t.is_lexical()) {
            return Err(SynthError::NoTemplate(i));
        }
        templates.validate()?;
        coart.validate()?;
        let raises = (0..tones.len())
            .map(
                |i| match tones.get(i + 1).and_then(|t| templates.onset_level(*t)) {
                    Some(Level::Low) => coart.delta_st,
                    _ => 0.0,
                },
            )
            .collect();
        let mut contour = RealizedContour {
            tones: tones.to_vec(),
            templates: templates.clone(),
            decay: coart.carry_decay_frac,
            shape: coart.anticipatory,
            shifts: vec![0.0; tones.len()],
            raises,
            offsets,
        };
        for i in 1..tones.len() {
            let prev_offset = contour.value(i - 1, 1.0);
            let intrinsic = templates.points[tones[i].value() as usize - 1][0];
            contour.shifts[i] = coart.kappa * (prev_offset - intrinsic);
        }
        Ok(contour)
    }

    pub fn len(&self) -> usize {
        self.tones.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tones.is_empty()
    }

    /// Semitones re base for syllable `i` at normalized time `t`.
    pub fn value(&self, i: usize, t: f64) -> f64 {
        let t = t.clamp(0.0, 1.0);
        let template = self
            .templates
            .value(self.tones[i], t)
            .expect("lexical tone");
        let carry = self.shifts[i] * (1.0 - t / self.decay).max(0.0);
        let raise = match self.shape {
            AnticipatoryShape::Uniform => self.raises[i],
            AnticipatoryShape::Ramp => self.raises[i] * (1.0 - t),
        };
        template + carry + raise + self.offsets[i]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthOutput {
    pub track: F0Track,
    pub grid: TextGrid,
}

/// Renders surface tones to an f0 track (frames at `(k + 0.5) * step`) and
/// a TextGrid with exact syllable boundaries.
pub fn synth_contour(
    seq: &SyllableSequence,
    templates: &ToneTemplate,
    coart: &CoartConfig,
    cfg: &SynthConfig,
) -> Result<SynthOutput, SynthError> {
    cfg.validate()?;
    let tones = seq.tones();
    let offsets = if cfg.jitter_st > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let normal =
            Normal::new(0.0, cfg.jitter_st).map_err(|e| SynthError::Config(e.to_string()))?;
        (0..tones.len()).map(|_| normal.sample(&mut rng)).collect()
    } else {
        vec![0.0; tones.len()]
    };
    let contour = RealizedContour::with_offsets(&tones, templates, coart, offsets)?;

    let n = tones.len();
    let total = n as f64 * cfg.syllable_dur;
    let n_frames = (total / cfg.frame_step + 1e-9).floor() as usize;
    let frames = (0..n_frames)
        .map(|k| {
            let time = (k as f64 + 0.5) * cfg.frame_step;
            let i = ((time / cfg.syllable_dur).floor() as usize).min(n - 1);
            let t = (time - i as f64 * cfg.syllable_dur) / cfg.syllable_dur;
            let st = contour.value(i, t);
            F0Frame {
                time,
                f0: Some(cfg.base_hz * (st / 12.0).exp2()),
            }
        })
        .collect();
    let intervals = seq
        .iter()
        .enumerate()
        .map(|(i, syl)| {
            Interval::new(
                i as f64 * cfg.syllable_dur,
                (i + 1) as f64 * cfg.syllable_dur,
                syl.to_string(),
            )
        })
        .collect();
    Ok(SynthOutput {
        track: F0Track::new(frames).expect("increasing frame times"),
        grid: TextGrid {
            xmin: 0.0,
            xmax: total,
            tiers: vec![IntervalTier {
                name: SYMBOL_TIER.into(),
                intervals,
            }],
        },
    })
}

const HARMONICS: usize = 6;
const PEAK: f64 = 0.3;

/// Harmonic rendering of an f0 track; unvoiced frames are silent.
///
/// Each frame covers half a frame step on either side of its time. Inside
/// voiced stretches f0 is interpolated linearly between frame centres and
/// phase is accumulated sample by sample.
pub fn synth_audio(track: &F0Track, sample_rate: u32) -> AudioBuffer {
    let frames = track.frames();
    if frames.is_empty() {
        return AudioBuffer::new(Vec::new(), sample_rate).expect("valid rate");
    }
    let step = if frames.len() > 1 {
        frames[1].time - frames[0].time
    } else {
        0.01
    };
    let sr = sample_rate as f64;
    let end = frames[frames.len() - 1].time + step / 2.0;
    let n = (end * sr).round() as usize;
    let nyquist = sr / 2.0;

    let mut samples = vec![0.0; n];
    let mut phase = 0.0f64;
    let mut j = 0;
    for (i, s) in samples.iter_mut().enumerate() {
        let t = (i as f64 + 0.5) / sr;
        while j + 1 < frames.len() && (frames[j].time + frames[j + 1].time) / 2.0 <= t {
            j += 1;
        }
        let Some(f_here) = frames[j].f0 else {
            phase = 0.0;
            continue;
        };
        let neighbour = if t >= frames[j].time {
            j + 1
        } else {
            j.wrapping_sub(1)
        };
        let f = match frames
            .get(neighbour)
            .and_then(|fr| fr.f0.map(|v| (fr.time, v)))
        {
            Some((tn, fn_)) => {
                f_here + (fn_ - f_here) * (t - frames[j].time) / (tn - frames[j].time)
            }
            None => f_here,
        };
        phase += 2.0 * std::f64::consts::PI * f / sr;
        *s = (1..=HARMONICS)
            .filter(|&k| k as f64 * f < nyquist)
            .map(|k| (k as f64 * phase).sin() / k as f64)
            .sum();
    }
    let peak = samples.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if peak > 0.0 {
        for s in samples.iter_mut() {
            *s *= PEAK / peak;
        }
    }
    AudioBuffer::new(samples, sample_rate).expect("valid rate")
}

/// One-hot attention: frame `f` attends to the symbol whose interval holds `f * hop`.
pub fn synth_attention(grid: &TextGrid, hop: f64) -> Result<AttentionMatrix, SynthError> {
    let tier = grid
        .tier(SYMBOL_TIER)
        .ok_or_else(|| SynthError::MissingTier(SYMBOL_TIER.into()))?;
    if !(hop > 0.0) {
        return Err(SynthError::Config(format!(
            "hop must be positive, got {hop}"
        )));
    }
    let symbols = tier.intervals.len();
    let end = tier.intervals.last().map_or(grid.xmin, |iv| iv.xmax);
    let n_frames = ((end - grid.xmin) / hop - 1e-9).ceil().max(0.0) as usize;
    let mut rows = Vec::with_capacity(n_frames);
    let mut k = 0;
    for f in 0..n_frames {
        let t = grid.xmin + f as f64 * hop;
        while k + 1 < symbols && tier.intervals[k].xmax <= t {
            k += 1;
        }
        let mut row = vec![0.0; symbols];
        row[k] = 1.0;
        rows.push(row);
    }
    Ok(AttentionMatrix::new(rows, hop).expect("one-hot rows are valid"))
}
