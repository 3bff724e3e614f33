//! Listening-test statistics: MOS tables, rank tests, Bonferroni correction
//! and the Tone-3 sandhi scoreboard.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use thiserror::Error;

/// System labels accepted by [`mos_report`].
pub const KNOWN_SYSTEMS: [&str; 3] = ["baseline", "bert", "ground_truth"];

/// Largest pooled sample size that still gets an exact p-value.
pub const EXACT_LIMIT: usize = 12;

#[derive(Debug, Error)]
pub enum StatsError {
    #[error("no records")]
    Empty,
    #[error("unknown system label {0:?}")]
    UnknownSystem(String),
    #[error("sample {0} is empty")]
    EmptySample(char),
    #[error("all paired differences are zero")]
    AllZero,
    #[error("judgments mix categories {0} and {1}")]
    MixedCategories(Category, Category),
    #[error("row {row}: {message}")]
    Row { row: usize, message: String },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Measure {
    Naturalness,
    Prosody,
}

impl fmt::Display for Measure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Measure::Naturalness => "naturalness",
            Measure::Prosody => "prosody",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Category {
    Bisyllabic,
    Trisyllabic,
    Phrase,
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Category::Bisyllabic => "bisyllabic",
            Category::Trisyllabic => "trisyllabic",
            Category::Phrase => "phrase",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RatingRecord {
    pub sample_id: String,
    pub system: String,
    pub rater: String,
    pub measure: Measure,
    pub value: u8,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SandhiJudgment {
    pub sample_id: String,
    pub system: String,
    pub rater: String,
    pub category: Category,
    pub n_errors: u32,
    pub n_target_syllables: u32,
}

fn read_rows<T, R>(input: R, check: impl Fn(&T) -> Result<(), String>) -> Result<Vec<T>, StatsError>
where
    T: for<'de> Deserialize<'de>,
    R: Read,
{
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(input);
    let mut out = Vec::new();
    for (i, row) in reader.deserialize::<T>().enumerate() {
        // Row 1 is the header.
        let row_no = i + 2;
        let rec = row.map_err(|e| StatsError::Row {
            row: row_no,
            message: e.to_string(),
        })?;
        check(&rec).map_err(|message| StatsError::Row {
            row: row_no,
            message,
        })?;
        out.push(rec);
    }
    Ok(out)
}

/// Reads `sample_id,system,rater,measure,value` rows.
pub fn read_ratings<R: Read>(input: R) -> Result<Vec<RatingRecord>, StatsError> {
    read_rows(input, |r: &RatingRecord| {
        if (1..=5).contains(&r.value) {
            Ok(())
        } else {
            Err(format!("rating {} outside 1..5", r.value))
        }
    })
}

/// Reads `sample_id,system,rater,category,n_errors,n_target_syllables` rows.
pub fn read_judgments<R: Read>(input: R) -> Result<Vec<SandhiJudgment>, StatsError> {
    read_rows(input, |j: &SandhiJudgment| {
        if j.n_target_syllables == 0 {
            Err("n_target_syllables must be at least 1".into())
        } else if j.n_errors > j.n_target_syllables {
            Err(format!(
                "{} errors for {} target syllables",
                j.n_errors, j.n_target_syllables
            ))
        } else {
            Ok(())
        }
    })
}

pub fn write_judgments<W: Write>(judgments: &[SandhiJudgment], out: W) -> Result<(), StatsError> {
    let mut w = csv::Writer::from_writer(out);
    for j in judgments {
        w.serialize(j)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct MosRow {
    pub system: String,
    pub measure: Measure,
    pub n: usize,
    pub mean: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MosTable {
    pub rows: Vec<MosRow>,
}

impl MosTable {
    pub fn mean(&self, system: &str, measure: Measure) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.system == system && r.measure == measure)
            .map(|r| r.mean)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("system,measure,n,mean\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{:.2}\n",
                r.system, r.measure, r.n, r.mean
            ));
        }
        out
    }

    /// One line per system with both measures.
    pub fn to_text(&self) -> String {
        let mut out = format!("{:<14}{:>13}{:>9}\n", "system", "naturalness", "prosody");
        let mut systems: Vec<&str> = Vec::new();
        for r in &self.rows {
            if !systems.contains(&r.system.as_str()) {
                systems.push(&r.system);
            }
        }
        for s in systems {
            let cell = |m| {
                self.mean(s, m)
                    .map_or("-".to_string(), |v| format!("{v:.2}"))
            };
            out.push_str(&format!(
                "{:<14}{:>13}{:>9}\n",
                s,
                cell(Measure::Naturalness),
                cell(Measure::Prosody)
            ));
        }
        out
    }
}

/// Mean rating per system and measure, systems in [`KNOWN_SYSTEMS`] order.
pub fn mos_report(records: &[RatingRecord]) -> Result<MosTable, StatsError> {
    if records.is_empty() {
        return Err(StatsError::Empty);
    }
    let mut sums: BTreeMap<(usize, Measure), (u64, usize)> = BTreeMap::new();
    for r in records {
        let idx = KNOWN_SYSTEMS
            .iter()
            .position(|s| *s == r.system)
            .ok_or_else(|| StatsError::UnknownSystem(r.system.clone()))?;
        let e = sums.entry((idx, r.measure)).or_default();
        e.0 += r.value as u64;
        e.1 += 1;
    }
    let rows = sums
        .into_iter()
        .map(|((idx, measure), (sum, n))| MosRow {
            system: KNOWN_SYSTEMS[idx].to_string(),
            measure,
            n,
            mean: sum as f64 / n as f64,
        })
        .collect();
    Ok(MosTable { rows })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PMethod {
    Exact,
    Normal,
}

impl fmt::Display for PMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PMethod::Exact => "exact",
            PMethod::Normal => "normal approximation",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MannWhitney {
    pub u_a: f64,
    pub u_b: f64,
    pub p_two_sided: f64,
    pub method: PMethod,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Wilcoxon {
    pub w_plus: f64,
    pub w_minus: f64,
    /// Nonzero differences kept.
    pub n: usize,
    pub p_two_sided: f64,
    pub method: PMethod,
}

/// Midranks (1-based) and the tie correction sum of `t^3 - t`.
fn midranks(values: &[f64]) -> (Vec<f64>, f64) {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut ties = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && values[order[j]] == values[order[i]] {
            j += 1;
        }
        let rank = (i + j + 1) as f64 / 2.0;
        for &k in &order[i..j] {
            ranks[k] = rank;
        }
        let t = (j - i) as f64;
        ties += t * t * t - t;
        i = j;
    }
    (ranks, ties)
}

fn standard_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("unit normal")
}

/// Two-sided p from a continuity-corrected z statistic.
fn normal_p(deviation: f64, sd: f64) -> f64 {
    if sd <= 0.0 {
        return 1.0;
    }
    let z = (deviation.abs() - 0.5).max(0.0) / sd;
    (2.0 * standard_normal().sf(z)).min(1.0)
}

const EPS: f64 = 1e-9;

fn mwu_statistic(a: &[f64], b: &[f64]) -> Result<(f64, Vec<f64>, f64), StatsError> {
    if a.is_empty() {
        return Err(StatsError::EmptySample('a'));
    }
    if b.is_empty() {
        return Err(StatsError::EmptySample('b'));
    }
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let (ranks, ties) = midranks(&pooled);
    let na = a.len() as f64;
    let ra: f64 = ranks[..a.len()].iter().sum();
    Ok((ra - na * (na + 1.0) / 2.0, ranks, ties))
}

/// Exact permutation p-value over all placements of group `a` among the pooled midranks.
pub fn mann_whitney_exact_p(a: &[f64], b: &[f64]) -> Result<f64, StatsError> {
    let (u, ranks, _) = mwu_statistic(a, b)?;
    let (na, n) = (a.len(), ranks.len());
    let mean = (na * b.len()) as f64 / 2.0;
    let observed = (u - mean).abs();
    let offset = (na * (na + 1)) as f64 / 2.0;
    let (mut hits, mut total) = (0u64, 0u64);
    let mut chosen: Vec<usize> = (0..na).collect();
    loop {
        let r: f64 = chosen.iter().map(|&i| ranks[i]).sum();
        total += 1;
        if (r - offset - mean).abs() >= observed - EPS {
            hits += 1;
        }
        // Next combination in lexicographic order.
        let Some(i) = (0..na).rev().find(|&i| chosen[i] < n - na + i) else {
            break;
        };
        chosen[i] += 1;
        for j in i + 1..na {
            chosen[j] = chosen[j - 1] + 1;
        }
    }
    Ok(hits as f64 / total as f64)
}

/// Normal approximation with tie and continuity correction.
pub fn mann_whitney_normal_p(a: &[f64], b: &[f64]) -> Result<f64, StatsError> {
    let (u, _, ties) = mwu_statistic(a, b)?;
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let n = na + nb;
    let var = na * nb / 12.0 * ((n + 1.0) - ties / (n * (n - 1.0)).max(1.0));
    Ok(normal_p(u - na * nb / 2.0, var.max(0.0).sqrt()))
}

/// Mann-Whitney U for independent samples; exact p when `|a| + |b| <= 12`.
pub fn mann_whitney_u(a: &[f64], b: &[f64]) -> Result<MannWhitney, StatsError> {
    let (u_a, _, _) = mwu_statistic(a, b)?;
    let u_b = (a.len() * b.len()) as f64 - u_a;
    let (p_two_sided, method) = if a.len() + b.len() <= EXACT_LIMIT {
        (mann_whitney_exact_p(a, b)?, PMethod::Exact)
    } else {
        (mann_whitney_normal_p(a, b)?, PMethod::Normal)
    };
    Ok(MannWhitney {
        u_a,
        u_b,
        p_two_sided,
        method,
    })
}

/// Wilcoxon signed-rank test on paired differences (zeros dropped).
pub fn wilcoxon_signed_rank(diffs: &[f64]) -> Result<Wilcoxon, StatsError> {
    let nonzero: Vec<f64> = diffs.iter().copied().filter(|d| *d != 0.0).collect();
    if nonzero.is_empty() {
        return Err(StatsError::AllZero);
    }
    let n = nonzero.len();
    let abs: Vec<f64> = nonzero.iter().map(|d| d.abs()).collect();
    let (ranks, ties) = midranks(&abs);
    let w_plus: f64 = nonzero
        .iter()
        .zip(&ranks)
        .filter(|(d, _)| **d > 0.0)
        .map(|(_, r)| r)
        .sum();
    let total = (n * (n + 1)) as f64 / 2.0;
    let w_minus = total - w_plus;
    let mean = total / 2.0;
    let observed = (w_plus - mean).abs();

    let (p_two_sided, method) = if n <= EXACT_LIMIT {
        let mut hits = 0u64;
        for mask in 0u32..(1 << n) {
            let w: f64 = (0..n)
                .filter(|i| mask >> i & 1 == 1)
                .map(|i| ranks[i])
                .sum();
            if (w - mean).abs() >= observed - EPS {
                hits += 1;
            }
        }
        (hits as f64 / (1u64 << n) as f64, PMethod::Exact)
    } else {
        let nf = n as f64;
        let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - ties / 48.0;
        (
            normal_p(w_plus - mean, var.max(0.0).sqrt()),
            PMethod::Normal,
        )
    };
    Ok(Wilcoxon {
        w_plus,
        w_minus,
        n,
        p_two_sided,
        method,
    })
}

/// `min(1, m * p)` with `m` defaulting to the number of p-values.
pub fn bonferroni(p_values: &[f64], m: Option<usize>) -> Vec<f64> {
    let m = m.unwrap_or(p_values.len()) as f64;
    p_values.iter().map(|p| (p * m).clamp(0.0, 1.0)).collect()
}

/// Pooled two-proportion z-test; returns `(z, p_two_sided)`.
pub fn two_proportion_z(x1: usize, n1: usize, x2: usize, n2: usize) -> (f64, f64) {
    if n1 == 0 || n2 == 0 {
        return (0.0, 1.0);
    }
    let (p1, p2) = (x1 as f64 / n1 as f64, x2 as f64 / n2 as f64);
    let pooled = (x1 + x2) as f64 / (n1 + n2) as f64;
    let se = (pooled * (1.0 - pooled) * (1.0 / n1 as f64 + 1.0 / n2 as f64)).sqrt();
    if se == 0.0 {
        return (0.0, 1.0);
    }
    let z = (p1 - p2) / se;
    (z, (2.0 * standard_normal().sf(z.abs())).min(1.0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SystemScore {
    pub system: String,
    pub n: usize,
    pub n_correct: usize,
    pub accuracy: f64,
    pub errors_per_phrase: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairTest {
    pub system_a: String,
    pub system_b: String,
    pub z: f64,
    pub p_two_sided: f64,
    pub p_bonferroni: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scoreboard {
    pub category: Category,
    pub systems: Vec<SystemScore>,
    pub pairwise: Vec<PairTest>,
}

impl Scoreboard {
    pub fn system(&self, name: &str) -> Option<&SystemScore> {
        self.systems.iter().find(|s| s.system == name)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("category,system,n,n_correct,accuracy,errors_per_phrase\n");
        for s in &self.systems {
            out.push_str(&format!(
                "{},{},{},{},{:.2},{:.2}\n",
                self.category, s.system, s.n, s.n_correct, s.accuracy, s.errors_per_phrase
            ));
        }
        out
    }

    pub fn pairwise_csv(&self) -> String {
        let mut out = String::from("category,system_a,system_b,z,p,p_bonferroni\n");
        for t in &self.pairwise {
            out.push_str(&format!(
                "{},{},{},{:.4},{:.4},{:.4}\n",
                self.category, t.system_a, t.system_b, t.z, t.p_two_sided, t.p_bonferroni
            ));
        }
        out
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("category: {}\n", self.category);
        for s in &self.systems {
            out.push_str(&format!(
                "  {:<14} accuracy {:.2}  errors/phrase {:.2}  (n={})\n",
                s.system, s.accuracy, s.errors_per_phrase, s.n
            ));
        }
        for t in &self.pairwise {
            out.push_str(&format!(
                "  {} vs {}: z = {:.3}, p = {:.4}, Bonferroni p = {:.4}\n",
                t.system_a, t.system_b, t.z, t.p_two_sided, t.p_bonferroni
            ));
        }
        out
    }
}

/// Accuracy and errors per phrase per system for one category, with
/// pairwise two-proportion tests on accuracy.
pub fn sandhi_scoreboard(judgments: &[SandhiJudgment]) -> Result<Scoreboard, StatsError> {
    let first = judgments.first().ok_or(StatsError::Empty)?;
    let category = first.category;
    if let Some(other) = judgments.iter().find(|j| j.category != category) {
        return Err(StatsError::MixedCategories(category, other.category));
    }
    let mut per: BTreeMap<&str, (usize, usize, u64)> = BTreeMap::new();
    for j in judgments {
        let e = per.entry(j.system.as_str()).or_default();
        e.0 += 1;
        e.1 += usize::from(j.n_errors == 0);
        e.2 += j.n_errors as u64;
    }
    let rank = |s: &str| {
        KNOWN_SYSTEMS
            .iter()
            .position(|k| *k == s)
            .unwrap_or(KNOWN_SYSTEMS.len())
    };
    let mut systems: Vec<SystemScore> = per
        .into_iter()
        .map(|(system, (n, n_correct, errors))| SystemScore {
            system: system.to_string(),
            n,
            n_correct,
            accuracy: n_correct as f64 / n as f64,
            errors_per_phrase: errors as f64 / n as f64,
        })
        .collect();
    systems.sort_by(|a, b| {
        rank(&a.system)
            .cmp(&rank(&b.system))
            .then(a.system.cmp(&b.system))
    });

    let mut pairwise = Vec::new();
    for i in 0..systems.len() {
        for k in i + 1..systems.len() {
            let (a, b) = (&systems[i], &systems[k]);
            let (z, p) = two_proportion_z(a.n_correct, a.n, b.n_correct, b.n);
            pairwise.push(PairTest {
                system_a: a.system.clone(),
                system_b: b.system.clone(),
                z,
                p_two_sided: p,
                p_bonferroni: p,
            });
        }
    }
    let adjusted = bonferroni(
        &pairwise.iter().map(|t| t.p_two_sided).collect::<Vec<_>>(),
        None,
    );
    for (t, p) in pairwise.iter_mut().zip(adjusted) {
        t.p_bonferroni = p;
    }
    Ok(Scoreboard {
        category,
        systems,
        pairwise,
    })
}
