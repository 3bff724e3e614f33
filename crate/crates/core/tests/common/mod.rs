//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use std::collections::BTreeSet;

use nalgebra::{DMatrix, DVector};

/// Weighted least squares at one point, solved by QR on the sqrt-weighted system.
pub fn reference_fit(x: &[f64], y: &[f64], x0: f64, span: f64, degree: usize) -> f64 {
    let n = x.len();
    let q = (span * n as f64).floor() as usize;
    let mut d: Vec<f64> = x.iter().map(|v| (v - x0).abs()).collect();
    let mut sorted = d.clone();
    sorted.sort_by(f64::total_cmp);
    let h = sorted[q - 1];
    let rows: Vec<usize> = (0..n).filter(|&i| d[i] < h).collect();
    for v in d.iter_mut() {
        *v /= h;
    }
    let k = degree + 1;
    let a = DMatrix::from_fn(rows.len(), k, |r, c| {
        let i = rows[r];
        let w = (1.0 - d[i].powi(3)).powi(3);
        w.sqrt() * (x[i] - x0).powi(c as i32)
    });
    let b = DVector::from_fn(rows.len(), |r, _| {
        let i = rows[r];
        (1.0 - d[i].powi(3)).powi(3).sqrt() * y[i]
    });
    let beta = a.svd(true, true).solve(&b, 1e-14).unwrap();
    beta[0]
}

#[derive(Debug, Clone)]
pub enum Tree {
    Leaf(usize),
    Node(Box<Tree>, Box<Tree>),
}

pub fn bracketings(lo: usize, hi: usize) -> Vec<Tree> {
    if hi - lo == 1 {
        return vec![Tree::Leaf(lo)];
    }
    let mut out = Vec::new();
    for mid in lo + 1..hi {
        for l in bracketings(lo, mid) {
            for r in bracketings(mid, hi) {
                out.push(Tree::Node(Box::new(l.clone()), Box::new(r)));
            }
        }
    }
    out
}

/// Cyclic rule: inner domains first, then 3 -> 2 at each juncture before a 3.
pub fn realize(tree: &Tree, tones: &[u8]) -> Vec<u8> {
    match tree {
        Tree::Leaf(i) => vec![tones[*i]],
        Tree::Node(l, r) => {
            let mut left = realize(l, tones);
            let right = realize(r, tones);
            if *left.last().unwrap() == 3 && right[0] == 3 {
                *left.last_mut().unwrap() = 2;
            }
            left.extend(right);
            left
        }
    }
}

pub fn render(tree: &Tree, syllables: &[String]) -> String {
    match tree {
        Tree::Leaf(i) => syllables[*i].clone(),
        Tree::Node(l, r) => format!("[{} {}]", render(l, syllables), render(r, syllables)),
    }
}

pub fn oracle(tones: &[u8]) -> BTreeSet<Vec<u8>> {
    bracketings(0, tones.len())
        .iter()
        .map(|t| realize(t, tones))
        .collect()
}

/// A one-tier TextGrid file.
pub fn grid_text(intervals: &[(f64, f64, &str)]) -> String {
    let xmax = intervals.last().unwrap().1;
    let mut s = format!(
        "File type = \"ooTextFile\"\nObject class = \"TextGrid\"\n\nxmin = 0\nxmax = {xmax}\ntiers? <exists>\nsize = 1\nitem []:\n    item [1]:\n        class = \"IntervalTier\"\n        name = \"symbols\"\n        xmin = 0\n        xmax = {xmax}\n        intervals: size = {}\n",
        intervals.len()
    );
    for (i, (a, b, t)) in intervals.iter().enumerate() {
        s.push_str(&format!("        intervals [{}]:\n            xmin = {a}\n            xmax = {b}\n            text = \"{t}\"\n", i + 1));
    }
    s
}
