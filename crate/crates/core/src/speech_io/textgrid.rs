use std::path::Path;

use super::{fmt_num, read_text, FormatError};

/// Interval boundaries must meet within this many seconds.
pub const TILING_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct Interval {
    pub xmin: f64,
    pub xmax: f64,
    pub label: String,
}

impl Interval {
    pub fn new(xmin: f64, xmax: f64, label: impl Into<String>) -> Interval {
        Interval {
            xmin,
            xmax,
            label: label.into(),
        }
    }

    pub fn duration(&self) -> f64 {
        self.xmax - self.xmin
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntervalTier {
    pub name: String,
    pub intervals: Vec<Interval>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TextGrid {
    pub xmin: f64,
    pub xmax: f64,
    pub tiers: Vec<IntervalTier>,
}

impl TextGrid {
    pub fn tier(&self, name: &str) -> Option<&IntervalTier> {
        self.tiers.iter().find(|t| t.name == name)
    }

    /// Checks that every tier tiles `[xmin, xmax]` without gaps or overlaps.
    /// Zero-length intervals are allowed, negative ones are not.
    pub fn validate(&self) -> Result<(), FormatError> {
        if !(self.xmin.is_finite() && self.xmax.is_finite()) || self.xmax < self.xmin {
            return Err(FormatError::Invalid(format!(
                "bad grid extent [{}, {}]",
                self.xmin, self.xmax
            )));
        }
        for tier in &self.tiers {
            let name = &tier.name;
            let (Some(first), Some(last)) = (tier.intervals.first(), tier.intervals.last()) else {
                return Err(FormatError::Invalid(format!(
                    "tier {name:?} has no intervals"
                )));
            };
            if (first.xmin - self.xmin).abs() > TILING_TOLERANCE {
                return Err(FormatError::Invalid(format!(
                    "tier {name:?} starts at {} not {}",
                    first.xmin, self.xmin
                )));
            }
            if (last.xmax - self.xmax).abs() > TILING_TOLERANCE {
                return Err(FormatError::Invalid(format!(
                    "tier {name:?} ends at {} not {}",
                    last.xmax, self.xmax
                )));
            }
            for (i, iv) in tier.intervals.iter().enumerate() {
                if iv.xmax < iv.xmin - TILING_TOLERANCE {
                    return Err(FormatError::Invalid(format!(
                        "tier {name:?} interval {} has negative duration",
                        i + 1
                    )));
                }
            }
            for (i, pair) in tier.intervals.windows(2).enumerate() {
                let gap = pair[1].xmin - pair[0].xmax;
                if gap > TILING_TOLERANCE {
                    return Err(FormatError::Invalid(format!(
                        "tier {name:?}: gap after interval {}",
                        i + 1
                    )));
                }
                if gap < -TILING_TOLERANCE {
                    return Err(FormatError::Invalid(format!(
                        "tier {name:?}: overlap after interval {}",
                        i + 1
                    )));
                }
            }
        }
        Ok(())
    }
}

fn quote(s: &str) -> String {
    format!("\"{}\"", s.replace('"', "\"\""))
}

/// Renders Praat's long text format.
pub(crate) fn render_textgrid(grid: &TextGrid) -> String {
    let mut out = String::new();
    out.push_str("File type = \"ooTextFile\"\nObject class = \"TextGrid\"\n\n");
    out.push_str(&format!(
        "xmin = {} \nxmax = {} \n",
        fmt_num(grid.xmin),
        fmt_num(grid.xmax)
    ));
    if grid.tiers.is_empty() {
        out.push_str("tiers? <absent> \n");
        return out;
    }
    out.push_str(&format!(
        "tiers? <exists> \nsize = {} \nitem []: \n",
        grid.tiers.len()
    ));
    for (t, tier) in grid.tiers.iter().enumerate() {
        out.push_str(&format!("    item [{}]:\n", t + 1));
        out.push_str("        class = \"IntervalTier\" \n");
        out.push_str(&format!("        name = {} \n", quote(&tier.name)));
        out.push_str(&format!("        xmin = {} \n", fmt_num(grid.xmin)));
        out.push_str(&format!("        xmax = {} \n", fmt_num(grid.xmax)));
        out.push_str(&format!(
            "        intervals: size = {} \n",
            tier.intervals.len()
        ));
        for (i, iv) in tier.intervals.iter().enumerate() {
            out.push_str(&format!("        intervals [{}]:\n", i + 1));
            out.push_str(&format!("            xmin = {} \n", fmt_num(iv.xmin)));
            out.push_str(&format!("            xmax = {} \n", fmt_num(iv.xmax)));
            out.push_str(&format!("            text = {} \n", quote(&iv.label)));
        }
    }
    out
}

/// `key = value` lines of a long-format TextGrid, with line numbers.
struct Lines<'a> {
    items: Vec<(usize, &'a str)>,
    pos: usize,
}

impl<'a> Lines<'a> {
    fn new(text: &'a str) -> Lines<'a> {
        let items = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty())
            .collect();
        Lines { items, pos: 0 }
    }

    fn next(&mut self) -> Result<(usize, &'a str), FormatError> {
        let line_no = self.items.last().map_or(1, |l| l.0);
        let item = self
            .items
            .get(self.pos)
            .copied()
            .ok_or_else(|| FormatError::parse(line_no, "unexpected end of file"))?;
        self.pos += 1;
        Ok(item)
    }

    fn value(&mut self, key: &str) -> Result<(usize, &'a str), FormatError> {
        let (n, line) = self.next()?;
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| FormatError::parse(n, format!("expected `{key} = ...`")))?;
        if k.trim() != key {
            return Err(FormatError::parse(
                n,
                format!("expected key {key:?}, found {:?}", k.trim()),
            ));
        }
        Ok((n, v.trim()))
    }

    fn number(&mut self, key: &str) -> Result<f64, FormatError> {
        let (n, v) = self.value(key)?;
        v.parse()
            .map_err(|_| FormatError::parse(n, format!("bad number {v:?}")))
    }

    fn count(&mut self, key: &str) -> Result<usize, FormatError> {
        let (n, v) = self.value(key)?;
        v.parse()
            .map_err(|_| FormatError::parse(n, format!("bad count {v:?}")))
    }

    fn string(&mut self, key: &str) -> Result<String, FormatError> {
        let (n, v) = self.value(key)?;
        unquote(v).ok_or_else(|| FormatError::parse(n, format!("bad string {v:?}")))
    }

    fn expect_prefix(&mut self, prefix: &str) -> Result<(), FormatError> {
        let (n, line) = self.next()?;
        if line.starts_with(prefix) {
            Ok(())
        } else {
            Err(FormatError::parse(n, format!("expected {prefix:?}")))
        }
    }
}

fn unquote(v: &str) -> Option<String> {
    let inner = v.strip_prefix('"')?.strip_suffix('"')?;
    Some(inner.replace("\"\"", "\""))
}

pub(crate) fn parse_textgrid(text: &str) -> Result<TextGrid, FormatError> {
    let text = text.strip_prefix('\u{feff}').unwrap_or(text);
    let mut lines = Lines::new(text);
    if lines.string("File type")? != "ooTextFile" {
        return Err(FormatError::Unsupported("not an ooTextFile".into()));
    }
    if lines.string("Object class")? != "TextGrid" {
        return Err(FormatError::Unsupported(
            "object class is not TextGrid".into(),
        ));
    }
    let xmin = lines.number("xmin")?;
    let xmax = lines.number("xmax")?;
    let (n, tiers_flag) = lines.next()?;
    if tiers_flag.contains("<absent>") {
        let grid = TextGrid {
            xmin,
            xmax,
            tiers: Vec::new(),
        };
        grid.validate()?;
        return Ok(grid);
    }
    if !tiers_flag.starts_with("tiers?") {
        // short text format has no `tiers?` line
        return Err(FormatError::Unsupported(format!(
            "line {n}: only the long TextGrid format is supported"
        )));
    }
    let size = lines.count("size")?;
    lines.expect_prefix("item []:")?;
    let mut tiers = Vec::with_capacity(size);
    for _ in 0..size {
        lines.expect_prefix("item [")?;
        let n = lines.items.get(lines.pos).map_or(0, |l| l.0);
        let class = lines.string("class")?;
        if class != "IntervalTier" {
            return Err(FormatError::Unsupported(format!(
                "line {n}: tier class {class:?}; only IntervalTier is supported"
            )));
        }
        let name = lines.string("name")?;
        let _tier_xmin = lines.number("xmin")?;
        let _tier_xmax = lines.number("xmax")?;
        let count = lines.count("intervals: size")?;
        let mut intervals = Vec::with_capacity(count);
        for _ in 0..count {
            lines.expect_prefix("intervals [")?;
            let a = lines.number("xmin")?;
            let b = lines.number("xmax")?;
            let label = lines.string("text")?;
            intervals.push(Interval::new(a, b, label));
        }
        tiers.push(IntervalTier { name, intervals });
    }
    let grid = TextGrid { xmin, xmax, tiers };
    grid.validate()?;
    Ok(grid)
}

pub fn read_textgrid(path: &Path) -> Result<TextGrid, FormatError> {
    parse_textgrid(&read_text(path)?)
}

pub fn write_textgrid(grid: &TextGrid, path: &Path) -> Result<(), FormatError> {
    grid.validate()?;
    std::fs::write(path, render_textgrid(grid))?;
    Ok(())
}
