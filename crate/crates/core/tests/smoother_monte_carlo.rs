use std::f64::consts::PI;

use tvspec_core::eval::quantile;
use tvspec_core::raw::preperiodogram_modified;
use tvspec_core::sim::{generate, ModelSpec};
use tvspec_core::smoother::smooth_nonadaptive;
use tvspec_core::{EstGrid, RawGrid};

#[test]
fn smoother_on_white_noise() {
    let len = 256;
    let b = 0.12;
    let grid = EstGrid::full(RawGrid::new(len).unwrap());
    let nf = grid.n_freqs();
    let pts: Vec<usize> = (0..grid.n_points())
        .filter(|&p| {
            let (u, l): (f64, f64) = (grid.u(p / nf), grid.lambda(p % nf));
            u >= b && u <= 1.0 - b && l >= 2.0 * PI * b && l <= PI - 2.0 * PI * b
        })
        .collect();
    let truth = 1.0 / (2.0 * PI);
    let mut dev = Vec::new();
    for seed in 0..20 {
        let s = generate::<f64>(&ModelSpec::white_noise(len, 1.0), len, 100 + seed).unwrap();
        let raw = preperiodogram_modified(&s).unwrap();
        let est = smooth_nonadaptive(&raw, b, 2.0 * PI * b, &grid).unwrap();
        dev.extend(pts.iter().map(|&p| (est.values()[p] - truth).abs()));
    }
    let med = quantile(&dev, 0.5);
    println!("smoother on white noise: median |f - 1/2pi| {med:.4} over 20 seeds");
    assert!(med <= 0.05, "{med}");
}
