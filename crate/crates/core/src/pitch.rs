//! Autocorrelation pitch tracking.
//!
//! Follows the classic short-term autocorrelation method: every frame is
//! windowed, its autocorrelation is divided by the window's own
//! autocorrelation, and local maxima (refined by parabolic interpolation)
//! become pitch candidates. An unvoiced candidate scored from the frame's
//! loudness competes with them, and a Viterbi pass picks the cheapest path
//! given octave-jump and voicing-change costs.

use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use thiserror::Error;

use crate::speech_io::{AudioBuffer, F0Frame, F0Track};

#[derive(Debug, Error, PartialEq)]
pub enum PitchError {
    #[error("invalid pitch configuration: {0}")]
    Config(String),
    #[error("audio of {samples} samples is shorter than one {window}-sample analysis window")]
    TooShort { samples: usize, window: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WindowShape {
    Hanning,
    Hamming,
}

impl WindowShape {
    fn coefficients(self, n: usize) -> Vec<f64> {
        let (a0, a1) = match self {
            WindowShape::Hanning => (0.5, 0.5),
            WindowShape::Hamming => (0.54, 0.46),
        };
        let denom = (n.max(2) - 1) as f64;
        (0..n)
            .map(|i| a0 - a1 * (2.0 * std::f64::consts::PI * i as f64 / denom).cos())
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PitchConfig {
    pub time_step: f64,
    pub floor: f64,
    pub ceiling: f64,
    pub silence_threshold: f64,
    pub voicing_threshold: f64,
    pub octave_cost: f64,
    pub octave_jump_cost: f64,
    pub voiced_unvoiced_cost: f64,
    pub max_candidates: usize,
    /// Window length in periods of the floor frequency.
    pub periods_per_window: f64,
    pub window: WindowShape,
}

impl Default for PitchConfig {
    fn default() -> Self {
        PitchConfig {
            time_step: 0.01,
            floor: 75.0,
            ceiling: 600.0,
            silence_threshold: 0.03,
            voicing_threshold: 0.45,
            octave_cost: 0.01,
            octave_jump_cost: 0.35,
            voiced_unvoiced_cost: 0.14,
            max_candidates: 15,
            periods_per_window: 3.0,
            window: WindowShape::Hanning,
        }
    }
}

impl PitchConfig {
    pub fn validate(&self, sample_rate: u32) -> Result<(), PitchError> {
        let nyquist = sample_rate as f64 / 2.0;
        let fail = |m: String| Err(PitchError::Config(m));
        if !(self.floor > 0.0 && self.floor < self.ceiling && self.ceiling < nyquist) {
            return fail(format!(
                "need 0 < floor ({}) < ceiling ({}) < Nyquist ({nyquist})",
                self.floor, self.ceiling
            ));
        }
        if !(self.time_step > 0.0) {
            return fail(format!(
                "time step must be positive, got {}",
                self.time_step
            ));
        }
        for (name, v) in [
            ("silence_threshold", self.silence_threshold),
            ("voicing_threshold", self.voicing_threshold),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return fail(format!("{name} must lie in [0, 1], got {v}"));
            }
        }
        for (name, v) in [
            ("octave_cost", self.octave_cost),
            ("octave_jump_cost", self.octave_jump_cost),
            ("voiced_unvoiced_cost", self.voiced_unvoiced_cost),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return fail(format!("{name} must be non-negative, got {v}"));
            }
        }
        if self.max_candidates < 2 {
            return fail("max_candidates must be at least 2".into());
        }
        if !(self.periods_per_window >= 1.0) {
            return fail("periods_per_window must be at least 1".into());
        }
        Ok(())
    }

    /// `key=value` lines for output headers.
    pub fn describe(&self) -> Vec<String> {
        vec![
            format!("method=autocorrelation window={:?} periods_per_window={}", self.window, self.periods_per_window),
            format!("time_step={} floor={} ceiling={}", self.time_step, self.floor, self.ceiling),
            format!(
                "silence_threshold={} voicing_threshold={} octave_cost={} octave_jump_cost={} voiced_unvoiced_cost={} max_candidates={}",
                self.silence_threshold,
                self.voicing_threshold,
                self.octave_cost,
                self.octave_jump_cost,
                self.voiced_unvoiced_cost,
                self.max_candidates
            ),
        ]
    }
}

/// A frame hypothesis; `frequency` is `None` for the unvoiced candidate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Candidate {
    pub frequency: Option<f64>,
    pub strength: f64,
}

/// Local score of a candidate (higher is better).
fn local_score(c: &Candidate, cfg: &PitchConfig) -> f64 {
    match c.frequency {
        Some(f) => c.strength - cfg.octave_cost * (cfg.ceiling / f).log2(),
        None => c.strength,
    }
}

fn transition_cost(a: &Candidate, b: &Candidate, cfg: &PitchConfig) -> f64 {
    let correction = 0.01 / cfg.time_step;
    let raw = match (a.frequency, b.frequency) {
        (None, None) => 0.0,
        (Some(_), None) | (None, Some(_)) => cfg.voiced_unvoiced_cost,
        (Some(f1), Some(f2)) => cfg.octave_jump_cost * (f1 / f2).log2().abs(),
    };
    raw * correction
}

/// Total cost of a path: transition costs minus local scores.
pub fn path_cost(frames: &[Vec<Candidate>], path: &[usize], cfg: &PitchConfig) -> f64 {
    let mut cost = 0.0;
    for (i, &k) in path.iter().enumerate() {
        cost -= local_score(&frames[i][k], cfg);
        if i > 0 {
            cost += transition_cost(&frames[i - 1][path[i - 1]], &frames[i][k], cfg);
        }
    }
    cost
}

/// Minimum-cost path through per-frame candidates (Viterbi).
pub fn best_path(frames: &[Vec<Candidate>], cfg: &PitchConfig) -> Vec<usize> {
    if frames.is_empty() {
        return Vec::new();
    }
    let mut cost: Vec<f64> = frames[0].iter().map(|c| -local_score(c, cfg)).collect();
    let mut back: Vec<Vec<usize>> = vec![vec![0; frames[0].len()]];
    for i in 1..frames.len() {
        let mut next = Vec::with_capacity(frames[i].len());
        let mut ptr = Vec::with_capacity(frames[i].len());
        for cur in &frames[i] {
            let (best_k, best) = frames[i - 1]
                .iter()
                .enumerate()
                .map(|(k, prev)| (k, cost[k] + transition_cost(prev, cur, cfg)))
                .fold(
                    (0, f64::INFINITY),
                    |acc, x| if x.1 < acc.1 { x } else { acc },
                );
            next.push(best - local_score(cur, cfg));
            ptr.push(best_k);
        }
        cost = next;
        back.push(ptr);
    }
    let mut k = cost
        .iter()
        .enumerate()
        .fold(
            (0, f64::INFINITY),
            |acc, (i, &c)| if c < acc.1 { (i, c) } else { acc },
        )
        .0;
    let mut path = vec![0; frames.len()];
    for i in (0..frames.len()).rev() {
        path[i] = k;
        k = back[i][k];
    }
    path
}

struct FrameAnalyzer {
    cfg: PitchConfig,
    sample_rate: f64,
    window: Vec<f64>,
    window_ac: Vec<f64>,
    min_lag: usize,
    max_lag: usize,
    fft: Arc<dyn Fft<f64>>,
    ifft: Arc<dyn Fft<f64>>,
    nfft: usize,
}

impl FrameAnalyzer {
    fn new(cfg: &PitchConfig, sample_rate: u32, window_len: usize) -> FrameAnalyzer {
        let sr = sample_rate as f64;
        let min_lag = ((sr / cfg.ceiling).floor() as usize).max(2);
        let max_lag = ((sr / cfg.floor).ceil() as usize + 1).min(window_len - 2);
        let nfft = (window_len + max_lag + 2).next_power_of_two();
        let mut planner = FftPlanner::new();
        let fft = planner.plan_fft_forward(nfft);
        let ifft = planner.plan_fft_inverse(nfft);
        let window = cfg.window.coefficients(window_len);
        let mut analyzer = FrameAnalyzer {
            cfg: cfg.clone(),
            sample_rate: sr,
            window: window.clone(),
            window_ac: Vec::new(),
            min_lag,
            max_lag,
            fft,
            ifft,
            nfft,
        };
        analyzer.window_ac = analyzer.autocorrelation(&window);
        analyzer
    }

    /// Raw autocorrelation for lags 0..=max_lag+1 via zero-padded FFT.
    fn autocorrelation(&self, x: &[f64]) -> Vec<f64> {
        let mut buf: Vec<Complex<f64>> = x.iter().map(|&v| Complex::new(v, 0.0)).collect();
        buf.resize(self.nfft, Complex::new(0.0, 0.0));
        self.fft.process(&mut buf);
        for c in buf.iter_mut() {
            *c = Complex::new(c.norm_sqr(), 0.0);
        }
        self.ifft.process(&mut buf);
        let scale = 1.0 / self.nfft as f64;
        buf[..=self.max_lag + 1]
            .iter()
            .map(|c| c.re * scale)
            .collect()
    }

    fn candidates(&self, frame: &[f64], global_peak: f64) -> Vec<Candidate> {
        let cfg = &self.cfg;
        let mean = frame.iter().sum::<f64>() / frame.len() as f64;
        let centered: Vec<f64> = frame.iter().map(|v| v - mean).collect();
        let local_peak = centered.iter().fold(0.0f64, |m, v| m.max(v.abs()));

        let loudness = if global_peak > 0.0 {
            local_peak / global_peak
        } else {
            0.0
        };
        let unvoiced = Candidate {
            frequency: None,
            strength: cfg.voicing_threshold
                + (2.0 - loudness / (cfg.silence_threshold / (1.0 + cfg.voicing_threshold)))
                    .max(0.0),
        };
        if local_peak == 0.0 {
            return vec![unvoiced];
        }

        let windowed: Vec<f64> = centered
            .iter()
            .zip(&self.window)
            .map(|(v, w)| v * w)
            .collect();
        let r = self.autocorrelation(&windowed);
        if !(r[0] > 0.0) {
            return vec![unvoiced];
        }
        let norm: Vec<f64> = r
            .iter()
            .zip(&self.window_ac)
            .map(|(&a, &w)| {
                if w > 0.0 {
                    (a / r[0]) / (w / self.window_ac[0])
                } else {
                    0.0
                }
            })
            .collect();

        let mut voiced = Vec::new();
        for lag in self.min_lag..=self.max_lag {
            let (prev, cur, next) = (norm[lag - 1], norm[lag], norm[lag + 1]);
            if !(cur > prev && cur >= next) || cur <= 0.5 * cfg.voicing_threshold {
                continue;
            }
            let denom = prev - 2.0 * cur + next;
            let (offset, mut strength) = if denom < 0.0 {
                let d = 0.5 * (prev - next) / denom;
                (d, cur - 0.25 * (prev - next) * d)
            } else {
                (0.0, cur)
            };
            if strength > 1.0 {
                strength = 1.0 / strength;
            }
            let f = self.sample_rate / (lag as f64 + offset);
            if f >= cfg.floor && f <= cfg.ceiling {
                voiced.push(Candidate {
                    frequency: Some(f),
                    strength,
                });
            }
        }
        voiced.sort_by(|a, b| b.strength.total_cmp(&a.strength));
        voiced.truncate(cfg.max_candidates - 1);
        voiced.push(unvoiced);
        voiced
    }
}

/// Window length in samples for a configuration.
pub fn window_samples(cfg: &PitchConfig, sample_rate: u32) -> usize {
    (cfg.periods_per_window / cfg.floor * sample_rate as f64).round() as usize
}

/// Candidate lists and centre times for every analysis frame.
pub fn frame_candidates(
    audio: &AudioBuffer,
    cfg: &PitchConfig,
) -> Result<(Vec<f64>, Vec<Vec<Candidate>>), PitchError> {
    cfg.validate(audio.sample_rate)?;
    let n_win = window_samples(cfg, audio.sample_rate);
    let n = audio.samples.len();
    if n < n_win || n_win < 4 {
        return Err(PitchError::TooShort {
            samples: n,
            window: n_win,
        });
    }
    let sr = audio.sample_rate as f64;
    let duration = n as f64 / sr;
    let window_dur = n_win as f64 / sr;
    let n_frames = ((duration - window_dur) / cfg.time_step + 1e-9).floor() as usize + 1;
    let first = (duration - (n_frames - 1) as f64 * cfg.time_step) / 2.0;
    let global_peak = audio.samples.iter().fold(0.0f64, |m, v| m.max(v.abs()));

    let analyzer = FrameAnalyzer::new(cfg, audio.sample_rate, n_win);
    let mut times = Vec::with_capacity(n_frames);
    let mut candidates = Vec::with_capacity(n_frames);
    for i in 0..n_frames {
        let t = first + i as f64 * cfg.time_step;
        let start = ((t * sr - n_win as f64 / 2.0).round().max(0.0) as usize).min(n - n_win);
        times.push(t);
        candidates.push(analyzer.candidates(&audio.samples[start..start + n_win], global_peak));
    }
    Ok((times, candidates))
}

/// Tracks f0 over the whole buffer.
pub fn track_f0(audio: &AudioBuffer, cfg: &PitchConfig) -> Result<F0Track, PitchError> {
    let (times, candidates) = frame_candidates(audio, cfg)?;
    let path = best_path(&candidates, cfg);
    let frames = times
        .iter()
        .zip(&candidates)
        .zip(&path)
        .map(|((&time, cands), &k)| F0Frame {
            time,
            f0: cands[k].frequency,
        })
        .collect();
    Ok(F0Track::new(frames).expect("frame times increase and f0 values are positive"))
}

/// Voiced f0 values with `t0 <= time < t1`, in order.
pub fn f0_for_interval(track: &F0Track, t0: f64, t1: f64) -> Vec<f64> {
    track
        .frames()
        .iter()
        .filter(|f| f.time >= t0 && f.time < t1)
        .filter_map(|f| f.f0)
        .collect()
}
