//! Greedy segmentation of an attention matrix into a symbol TextGrid.
//!
//! Each decoder frame is assigned its argmax symbol (earliest index on ties),
//! assignments are made monotone with a running maximum, and every symbol
//! spans the frames assigned to it. Symbols that receive no frame become
//! zero-length intervals at the preceding boundary and are reported.

use thiserror::Error;

use crate::speech_io::{AttentionMatrix, Interval, IntervalTier, TextGrid, TILING_TOLERANCE};

pub const SYMBOL_TIER: &str = "symbols";

#[derive(Debug, Error, PartialEq)]
pub enum AlignError {
    #[error("attention matrix has no frames")]
    EmptyMatrix,
    #[error("attention matrix has no symbols")]
    NoSymbols,
    #[error("{labels} labels for {columns} attention columns")]
    SymbolCount { labels: usize, columns: usize },
    #[error("{frames} frames cannot cover {symbols} symbols")]
    TooFewFrames { frames: usize, symbols: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Alignment {
    pub grid: TextGrid,
    /// Per-frame symbol index after monotone repair.
    pub assignment: Vec<usize>,
    /// Symbols that received no frame.
    pub unreached: Vec<usize>,
}

fn argmax_earliest(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &w) in row.iter().enumerate().skip(1) {
        if w > row[best] {
            best = i;
        }
    }
    best
}

/// Per-frame argmax followed by running-max monotone repair.
pub fn monotone_assignment(att: &AttentionMatrix) -> Vec<usize> {
    let mut running = 0;
    att.rows()
        .iter()
        .map(|row| {
            running = running.max(argmax_earliest(row));
            running
        })
        .collect()
}

pub fn greedy_alignment(
    att: &AttentionMatrix,
    symbols: &[String],
) -> Result<Alignment, AlignError> {
    let (frames, columns) = (att.frames(), att.symbols());
    if frames == 0 {
        return Err(AlignError::EmptyMatrix);
    }
    if columns == 0 {
        return Err(AlignError::NoSymbols);
    }
    if symbols.len() != columns {
        return Err(AlignError::SymbolCount {
            labels: symbols.len(),
            columns,
        });
    }
    if frames < columns {
        return Err(AlignError::TooFewFrames {
            frames,
            symbols: columns,
        });
    }

    let assignment = monotone_assignment(att);
    let hop = att.hop();
    let mut first = vec![None; columns];
    let mut last = vec![0usize; columns];
    for (f, &k) in assignment.iter().enumerate() {
        first[k].get_or_insert(f);
        last[k] = f;
    }

    let mut intervals = Vec::with_capacity(columns);
    let mut unreached = Vec::new();
    let mut boundary = 0.0;
    for k in 0..columns {
        match first[k] {
            Some(start) => {
                let end = (last[k] + 1) as f64 * hop;
                intervals.push(Interval::new(start as f64 * hop, end, symbols[k].clone()));
                boundary = end;
            }
            None => {
                unreached.push(k);
                intervals.push(Interval::new(boundary, boundary, symbols[k].clone()));
            }
        }
    }
    let grid = TextGrid {
        xmin: 0.0,
        xmax: frames as f64 * hop,
        tiers: vec![IntervalTier {
            name: SYMBOL_TIER.into(),
            intervals,
        }],
    };
    Ok(Alignment {
        grid,
        assignment,
        unreached,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AlignmentReport {
    pub ok: bool,
    pub issues: Vec<String>,
}

/// Automatic version of a manual alignment check.
///
/// Issues are `missing_tier`, `count:<expected>/<found>`, `label:<pos>`,
/// `unreached:<idx>` (zero-length interval) and `negative:<idx>`.
pub fn validate_alignment(grid: &TextGrid, expected: &[String]) -> AlignmentReport {
    let mut issues = Vec::new();
    match grid.tier(SYMBOL_TIER) {
        None => issues.push("missing_tier".to_string()),
        Some(tier) => {
            if tier.intervals.len() != expected.len() {
                issues.push(format!("count:{}/{}", expected.len(), tier.intervals.len()));
            }
            for (i, (iv, want)) in tier.intervals.iter().zip(expected).enumerate() {
                if &iv.label != want {
                    issues.push(format!("label:{i}"));
                }
            }
            for (i, iv) in tier.intervals.iter().enumerate() {
                let d = iv.duration();
                if d < -TILING_TOLERANCE {
                    issues.push(format!("negative:{i}"));
                } else if d <= TILING_TOLERANCE {
                    issues.push(format!("unreached:{i}"));
                }
            }
        }
    }
    AlignmentReport {
        ok: issues.is_empty(),
        issues,
    }
}
