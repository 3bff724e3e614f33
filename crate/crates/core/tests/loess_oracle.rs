mod common;

use common::reference_fit;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tonekit::contour::loess_fit;

#[test]
fn matches_pointwise_weighted_least_squares() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for case in 0..100 {
        let n = rng.random_range(12..60);
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
        let y: Vec<f64> = x
            .iter()
            .map(|v| (6.0 * v).sin() + rng.random_range(-0.3..0.3))
            .collect();
        let span = rng.random_range(0.4..1.0);
        let degree = 1 + case % 2;
        let grid: Vec<f64> = (0..15).map(|i| 0.05 + 0.9 * i as f64 / 14.0).collect();
        let fit = loess_fit(&x, &y, span, degree, &grid).unwrap();
        for (g, f) in grid.iter().zip(&fit.fitted) {
            let want = reference_fit(&x, &y, *g, span, degree);
            assert!((f - want).abs() < 1e-9, "case {case} at {g}: {f} vs {want}");
        }
    }
}

#[test]
fn affine_data_is_reproduced() {
    let x: Vec<f64> = (0..40).map(|i| i as f64 / 4.0).collect();
    let y: Vec<f64> = x.iter().map(|v| 2.0 * v + 1.0).collect();
    let grid = [0.0, 1.3, 5.0, 9.75];
    for degree in [1, 2] {
        let fit = loess_fit(&x, &y, 0.5, degree, &grid).unwrap();
        for (g, f) in grid.iter().zip(&fit.fitted) {
            assert!((f - (2.0 * g + 1.0)).abs() < 1e-9);
        }
        for (lo, hi) in fit.ci_low.iter().zip(&fit.ci_high) {
            assert!(hi - lo < 1e-6);
        }
    }
}
