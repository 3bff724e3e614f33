//! Per-syllable contour features, LOESS smoothing and tone classification.

use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};
use thiserror::Error;

use crate::pinyin::Tone;
use crate::pitch::f0_for_interval;
use crate::speech_io::{F0Track, TextGrid};

pub const DEFAULT_POINTS: usize = 30;
pub const DEFAULT_SPAN: f64 = 0.75;
pub const DEFAULT_DEGREE: usize = 2;

#[derive(Debug, Error, PartialEq)]
pub enum ContourError {
    #[error("unmeasurable syllable: {found} voiced samples, need at least 3")]
    Unmeasurable { found: usize },
    #[error("reference median must be positive, got {0}")]
    BadMedian(f64),
    #[error("need at least 5 normalized points, got {0}")]
    TooFewPoints(usize),
    #[error("f0 sample {0} is not a positive number")]
    BadSample(f64),
    #[error("invalid LOESS input: {0}")]
    LoessInput(String),
    #[error("degenerate local design at x = {0}")]
    Degenerate(f64),
    #[error("grid has no tier named {0:?}")]
    MissingTier(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Level {
    High,
    Low,
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Level::High => "High",
            Level::Low => "Low",
        })
    }
}

/// Onset and offset classes of a lexical tone.
pub fn tone_levels(tone: Tone) -> Option<(Level, Level)> {
    match tone.value() {
        1 => Some((Level::High, Level::High)),
        2 => Some((Level::Low, Level::High)),
        3 => Some((Level::Low, Level::Low)),
        4 => Some((Level::High, Level::Low)),
        _ => None,
    }
}

/// Inverse of [`tone_levels`].
pub fn tone_from_levels(onset: Level, offset: Level) -> Tone {
    match (onset, offset) {
        (Level::High, Level::High) => Tone::T1,
        (Level::Low, Level::High) => Tone::T2,
        (Level::Low, Level::Low) => Tone::T3,
        (Level::High, Level::Low) => Tone::T4,
    }
}

pub fn semitones(f0: f64, reference: f64) -> f64 {
    12.0 * (f0 / reference).log2()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContourFeatures {
    pub normalized_f0: Vec<f64>,
    pub onset_st: f64,
    pub offset_st: f64,
    pub max_st: f64,
    pub min_st: f64,
    pub onset_class: Level,
    pub offset_class: Level,
}

fn level(value: f64, threshold: f64) -> Level {
    if value >= threshold {
        Level::High
    } else {
        Level::Low
    }
}

/// Resamples voiced f0 to `n_points`, converts to semitones re `median` and
/// extracts onset/offset (means of the first/last 20%) and extremes.
pub fn normalize_contour(
    samples: &[f64],
    median: f64,
    n_points: usize,
) -> Result<ContourFeatures, ContourError> {
    if samples.len() < 3 {
        return Err(ContourError::Unmeasurable {
            found: samples.len(),
        });
    }
    if !(median > 0.0 && median.is_finite()) {
        return Err(ContourError::BadMedian(median));
    }
    if n_points < 5 {
        return Err(ContourError::TooFewPoints(n_points));
    }
    if let Some(&bad) = samples.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
        return Err(ContourError::BadSample(bad));
    }
    let last = (samples.len() - 1) as f64;
    let normalized_f0: Vec<f64> = (0..n_points)
        .map(|j| {
            let pos = j as f64 * last / (n_points - 1) as f64;
            let lo = (pos.floor() as usize).min(samples.len() - 2);
            let frac = pos - lo as f64;
            let hz = samples[lo] + frac * (samples[lo + 1] - samples[lo]);
            semitones(hz, median)
        })
        .collect();
    let edge = ((0.2 * n_points as f64).round() as usize).max(1);
    let mean = |s: &[f64]| s.iter().sum::<f64>() / s.len() as f64;
    let onset_st = mean(&normalized_f0[..edge]);
    let offset_st = mean(&normalized_f0[n_points - edge..]);
    let max_st = normalized_f0
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    let min_st = normalized_f0.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(ContourFeatures {
        normalized_f0,
        onset_st,
        offset_st,
        max_st,
        min_st,
        onset_class: level(onset_st, 0.0),
        offset_class: level(offset_st, 0.0),
    })
}

/// Tone from onset/offset levels, High meaning `>= threshold_st`.
pub fn classify_tone(features: &ContourFeatures, threshold_st: f64) -> Tone {
    tone_from_levels(
        level(features.onset_st, threshold_st),
        level(features.offset_st, threshold_st),
    )
}

/// Median of the voiced frames, `None` for a fully unvoiced track.
pub fn utterance_median(track: &F0Track) -> Option<f64> {
    median(track.voiced_values().collect())
}

pub fn median(mut values: Vec<f64>) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let n = values.len();
    Some(if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    })
}

/// Features for every interval of `tier`, in order.
pub fn syllable_features(
    track: &F0Track,
    grid: &TextGrid,
    tier: &str,
    reference: f64,
    n_points: usize,
) -> Result<Vec<Result<ContourFeatures, ContourError>>, ContourError> {
    let tier = grid
        .tier(tier)
        .ok_or_else(|| ContourError::MissingTier(tier.to_string()))?;
    Ok(tier
        .intervals
        .iter()
        .map(|iv| {
            normalize_contour(
                &f0_for_interval(track, iv.xmin, iv.xmax),
                reference,
                n_points,
            )
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoessFit {
    pub grid_x: Vec<f64>,
    pub fitted: Vec<f64>,
    pub ci_low: Vec<f64>,
    pub ci_high: Vec<f64>,
}

struct LocalFit {
    value: f64,
    /// Squared norm of the linear smoother row.
    norm2: f64,
    /// Diagonal smoother entry for a data point sitting at x0.
    self_weight: f64,
}

fn tricube(u: f64) -> f64 {
    if u >= 1.0 {
        0.0
    } else {
        let c = 1.0 - u * u * u;
        c * c * c
    }
}

/// Solves the small symmetric system `m a = e1`.
fn solve_first_column(mut m: Vec<Vec<f64>>) -> Option<Vec<f64>> {
    let k = m.len();
    let mut rhs: Vec<f64> = (0..k).map(|i| if i == 0 { 1.0 } else { 0.0 }).collect();
    let scale = m.iter().flatten().fold(0.0f64, |a, v| a.max(v.abs()));
    for col in 0..k {
        let pivot = (col..k).max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs()))?;
        if m[pivot][col].abs() <= 1e-13 * scale {
            return None;
        }
        m.swap(col, pivot);
        rhs.swap(col, pivot);
        for row in col + 1..k {
            let factor = m[row][col] / m[col][col];
            for c in col..k {
                m[row][c] -= factor * m[col][c];
            }
            rhs[row] -= factor * rhs[col];
        }
    }
    let mut out = vec![0.0; k];
    for row in (0..k).rev() {
        let tail: f64 = (row + 1..k).map(|c| m[row][c] * out[c]).sum();
        out[row] = (rhs[row] - tail) / m[row][row];
    }
    Some(out)
}

fn local_fit(
    x: &[f64],
    y: &[f64],
    x0: f64,
    q: usize,
    span: f64,
    degree: usize,
) -> Result<LocalFit, ContourError> {
    let dist: Vec<f64> = x.iter().map(|xi| (xi - x0).abs()).collect();
    let h = if span > 1.0 {
        dist.iter().copied().fold(0.0, f64::max) * span
    } else {
        let mut sorted = dist.clone();
        let (_, qth, _) = sorted.select_nth_unstable_by(q - 1, f64::total_cmp);
        *qth
    };
    if !(h > 0.0) {
        return Err(ContourError::Degenerate(x0));
    }
    let k = degree + 1;
    let weights: Vec<f64> = dist.iter().map(|d| tricube(d / h)).collect();
    let basis = |xi: f64| {
        let u = (xi - x0) / h;
        let mut v = vec![1.0; k];
        for p in 1..k {
            v[p] = v[p - 1] * u;
        }
        v
    };

    let mut distinct = 0;
    let mut prev = f64::NAN;
    for (xi, w) in x.iter().zip(&weights) {
        if *w > 0.0 && *xi != prev {
            distinct += 1;
            prev = *xi;
        }
    }
    if distinct < k {
        return Err(ContourError::Degenerate(x0));
    }

    let mut m = vec![vec![0.0; k]; k];
    for (xi, &w) in x.iter().zip(&weights) {
        if w == 0.0 {
            continue;
        }
        let v = basis(*xi);
        for r in 0..k {
            for c in 0..k {
                m[r][c] += w * v[r] * v[c];
            }
        }
    }
    let a = solve_first_column(m).ok_or(ContourError::Degenerate(x0))?;
    let mut value = 0.0;
    let mut norm2 = 0.0;
    for ((xi, yi), &w) in x.iter().zip(y).zip(&weights) {
        if w == 0.0 {
            continue;
        }
        let v = basis(*xi);
        let l = w * a.iter().zip(&v).map(|(p, q)| p * q).sum::<f64>();
        value += l * yi;
        norm2 += l * l;
    }
    Ok(LocalFit {
        value,
        norm2,
        self_weight: a[0],
    })
}

/// Local polynomial regression with tricube weights over the
/// `floor(span * n)` nearest neighbours and a t-based 95% band.
pub fn loess_fit(
    x: &[f64],
    y: &[f64],
    span: f64,
    degree: usize,
    grid: &[f64],
) -> Result<LoessFit, ContourError> {
    let n = x.len();
    let bad = |m: String| Err(ContourError::LoessInput(m));
    if y.len() != n {
        return bad(format!("{n} x values but {} y values", y.len()));
    }
    if !(degree == 1 || degree == 2) {
        return bad(format!("degree must be 1 or 2, got {degree}"));
    }
    if n < degree + 2 {
        return bad(format!("need at least {} points, got {n}", degree + 2));
    }
    if !(span > 0.0 && span.is_finite()) {
        return bad(format!("span must be positive, got {span}"));
    }
    let q = ((span * n as f64).floor() as usize).min(n);
    if q < degree + 1 {
        return bad(format!(
            "span {span} keeps {q} of {n} points, need {}",
            degree + 1
        ));
    }
    if x.iter().chain(y).chain(grid).any(|v| !v.is_finite()) {
        return bad("non-finite value".into());
    }

    let mut pairs: Vec<(f64, f64)> = x.iter().copied().zip(y.iter().copied()).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let xs: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = pairs.iter().map(|p| p.1).collect();

    let mut rss = 0.0;
    let mut trace = 0.0;
    let mut i = 0;
    while i < n {
        let u = xs[i];
        let j = xs[i..].iter().position(|&v| v != u).map_or(n, |p| i + p);
        let fit = local_fit(&xs, &ys, u, q, span, degree)?;
        rss += ys[i..j]
            .iter()
            .map(|yv| (yv - fit.value).powi(2))
            .sum::<f64>();
        trace += (j - i) as f64 * fit.self_weight;
        i = j;
    }
    let df = n as f64 - trace;
    let t_sigma = if df > 0.0 {
        let t = StudentsT::new(0.0, 1.0, df)
            .map_err(|e| ContourError::LoessInput(e.to_string()))?
            .inverse_cdf(0.975);
        t * (rss.max(0.0) / df).sqrt()
    } else {
        f64::INFINITY
    };

    let mut out = LoessFit {
        grid_x: grid.to_vec(),
        fitted: Vec::with_capacity(grid.len()),
        ci_low: Vec::with_capacity(grid.len()),
        ci_high: Vec::with_capacity(grid.len()),
    };
    for &g in grid {
        let fit = local_fit(&xs, &ys, g, q, span, degree)?;
        let half = if t_sigma == 0.0 {
            0.0
        } else {
            t_sigma * fit.norm2.sqrt()
        };
        out.fitted.push(fit.value);
        out.ci_low.push(fit.value - half);
        out.ci_high.push(fit.value + half);
    }
    Ok(out)
}

/// One analyzed target syllable with its neighbour context.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoartRecord {
    pub stimulus_id: String,
    pub tone: Tone,
    pub features: ContourFeatures,
    /// Offset class of the preceding syllable's tone.
    pub prev_offset: Option<Level>,
    /// Onset class of the following syllable's tone.
    pub next_onset: Option<Level>,
    /// Tone-3 + Tone-3 targets are left out of the summary.
    pub sandhi_pair: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryConfig {
    pub span: f64,
    pub degree: usize,
    pub grid_points: usize,
}

impl Default for SummaryConfig {
    fn default() -> Self {
        SummaryConfig {
            span: DEFAULT_SPAN,
            degree: DEFAULT_DEGREE,
            grid_points: DEFAULT_POINTS,
        }
    }
}

/// Mean of one feature in two context cells and their difference.
#[derive(Debug, Clone, PartialEq)]
pub struct EffectRow {
    pub tone: Tone,
    pub n_a: usize,
    pub mean_a: Option<f64>,
    pub n_b: usize,
    pub mean_b: Option<f64>,
    /// `mean_a - mean_b` when both cells are filled.
    pub effect: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoessCurve {
    pub tone: Tone,
    pub condition: &'static str,
    pub n_records: usize,
    pub fit: LoessFit,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CoartReport {
    /// Cell a: after a High offset, cell b: after a Low offset (onset_st).
    pub carryover: Vec<EffectRow>,
    /// Cell a: before a Low onset, cell b: before a High onset (max_st).
    pub anticipatory: Vec<EffectRow>,
    pub curves: Vec<LoessCurve>,
    pub warnings: Vec<String>,
}

impl CoartReport {
    pub fn carryover_effect(&self, tone: Tone) -> Option<f64> {
        self.carryover
            .iter()
            .find(|r| r.tone == tone)
            .and_then(|r| r.effect)
    }

    pub fn anticipatory_effect(&self, tone: Tone) -> Option<f64> {
        self.anticipatory
            .iter()
            .find(|r| r.tone == tone)
            .and_then(|r| r.effect)
    }
}

fn mean(values: &[f64]) -> Option<f64> {
    (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
}

pub fn coarticulation_summary(records: &[CoartRecord], cfg: &SummaryConfig) -> CoartReport {
    let mut report = CoartReport::default();
    let kept: Vec<&CoartRecord> = records.iter().filter(|r| !r.sandhi_pair).collect();
    let grid: Vec<f64> = (0..cfg.grid_points)
        .map(|j| j as f64 / (cfg.grid_points.max(2) - 1) as f64)
        .collect();

    for tone in [Tone::T1, Tone::T2, Tone::T3, Tone::T4] {
        let of_tone: Vec<&&CoartRecord> = kept.iter().filter(|r| r.tone == tone).collect();
        let cell = |pick: &dyn Fn(&CoartRecord) -> bool| -> Vec<&CoartRecord> {
            of_tone.iter().filter(|r| pick(r)).map(|r| **r).collect()
        };
        let after_high = cell(&|r| r.prev_offset == Some(Level::High));
        let after_low = cell(&|r| r.prev_offset == Some(Level::Low));
        let before_low = cell(&|r| r.next_onset == Some(Level::Low));
        let before_high = cell(&|r| r.next_onset == Some(Level::High));

        let mut row = |a: &[&CoartRecord],
                       b: &[&CoartRecord],
                       get: fn(&ContourFeatures) -> f64,
                       what: &str,
                       names: (&str, &str)| {
            let va: Vec<f64> = a.iter().map(|r| get(&r.features)).collect();
            let vb: Vec<f64> = b.iter().map(|r| get(&r.features)).collect();
            let (ma, mb) = (mean(&va), mean(&vb));
            for (m, name) in [(ma, names.0), (mb, names.1)] {
                if m.is_none() {
                    report.warnings.push(format!(
                        "tone {tone}: {what} cell '{name}' is empty, effect omitted"
                    ));
                }
            }
            let effect = ma.zip(mb).map(|(x, y)| x - y);
            EffectRow {
                tone,
                n_a: va.len(),
                mean_a: ma,
                n_b: vb.len(),
                mean_b: mb,
                effect,
            }
        };
        let carry = row(
            &after_high,
            &after_low,
            |f| f.onset_st,
            "carry-over",
            ("after_high", "after_low"),
        );
        let antic = row(
            &before_low,
            &before_high,
            |f| f.max_st,
            "anticipatory",
            ("before_low", "before_high"),
        );
        report.carryover.push(carry);
        report.anticipatory.push(antic);

        for (condition, cell) in [
            ("after_high", &after_high),
            ("after_low", &after_low),
            ("before_high", &before_high),
            ("before_low", &before_low),
        ] {
            if cell.is_empty() {
                continue;
            }
            let mut xs = Vec::new();
            let mut ys = Vec::new();
            for r in cell.iter() {
                let pts = &r.features.normalized_f0;
                let last = (pts.len().max(2) - 1) as f64;
                for (j, v) in pts.iter().enumerate() {
                    xs.push(j as f64 / last);
                    ys.push(*v);
                }
            }
            match loess_fit(&xs, &ys, cfg.span, cfg.degree, &grid) {
                Ok(fit) => report.curves.push(LoessCurve {
                    tone,
                    condition,
                    n_records: cell.len(),
                    fit,
                }),
                Err(e) => report
                    .warnings
                    .push(format!("tone {tone} {condition}: LOESS skipped ({e})")),
            }
        }
    }
    report
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.4}")).unwrap_or_default()
}

fn effect_csv<W: Write>(rows: &[EffectRow], names: (&str, &str), out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "tone".to_string(),
        format!("n_{}", names.0),
        format!("mean_{}_st", names.0),
        format!("n_{}", names.1),
        format!("mean_{}_st", names.1),
        "effect_st".to_string(),
    ])?;
    for r in rows {
        w.write_record([
            r.tone.to_string(),
            r.n_a.to_string(),
            opt(r.mean_a),
            r.n_b.to_string(),
            opt(r.mean_b),
            opt(r.effect),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Onset means after High vs Low previous offsets.
pub fn write_carryover_csv<W: Write>(report: &CoartReport, out: W) -> csv::Result<()> {
    effect_csv(&report.carryover, ("after_high", "after_low"), out)
}

/// Maximum means before Low vs High following onsets.
pub fn write_anticipatory_csv<W: Write>(report: &CoartReport, out: W) -> csv::Result<()> {
    effect_csv(&report.anticipatory, ("before_low", "before_high"), out)
}

pub fn write_loess_csv<W: Write>(report: &CoartReport, out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "tone",
        "condition",
        "n_records",
        "x",
        "fitted_st",
        "ci_low_st",
        "ci_high_st",
    ])?;
    for c in &report.curves {
        for i in 0..c.fit.grid_x.len() {
            w.write_record([
                c.tone.to_string(),
                c.condition.to_string(),
                c.n_records.to_string(),
                format!("{:.4}", c.fit.grid_x[i]),
                format!("{:.4}", c.fit.fitted[i]),
                format!("{:.4}", c.fit.ci_low[i]),
                format!("{:.4}", c.fit.ci_high[i]),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}
