//! Plane heatmaps as binary PPM (P6).
//!
//! Pixel columns run over time (u increasing to the right), pixel rows over
//! frequency with lambda = pi at the top. Values are scaled linearly from the
//! plane minimum (0) to its maximum (1) before the colour ramp is applied.

use clap::ValueEnum;
use serde::Serialize;
use tvspec_core::Plane;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Ramp {
    /// Black to white.
    Gray,
    /// Black, red, yellow, white in equal steps.
    Heat,
}

fn lerp(a: f64, b: f64, t: f64) -> f64 {
    a + (b - a) * t
}

pub fn colour(ramp: Ramp, t: f64) -> [u8; 3] {
    let t = if t.is_finite() { t.clamp(0.0, 1.0) } else { 0.0 };
    let rgb = match ramp {
        Ramp::Gray => [t, t, t],
        Ramp::Heat => {
            const STOPS: [[f64; 3]; 4] = [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [1.0, 1.0, 0.0], [1.0, 1.0, 1.0]];
            let x = t * 3.0;
            let i = (x.floor() as usize).min(2);
            let f = x - i as f64;
            [0, 1, 2].map(|c| lerp(STOPS[i][c], STOPS[i + 1][c], f))
        }
    };
    rgb.map(|v| (v * 255.0).round() as u8)
}

#[derive(Serialize)]
pub struct Sidecar {
    pub min: f64,
    pub max: f64,
    pub ramp: Ramp,
    pub width: usize,
    pub height: usize,
    pub x_axis: &'static str,
    pub y_axis: &'static str,
}

pub fn render(plane: &Plane<f64>, ramp: Ramp) -> (Vec<u8>, Sidecar) {
    let grid = plane.grid();
    let (w, h) = (grid.n_times(), grid.n_freqs());
    let (min, max) = plane.min_max();
    let span = max - min;
    let mut out = format!("P6\n{w} {h}\n255\n").into_bytes();
    for row in 0..h {
        let b = h - 1 - row;
        for a in 0..w {
            let t = if span > 0.0 { (plane.get(a, b) - min) / span } else { 0.0 };
            out.extend_from_slice(&colour(ramp, t));
        }
    }
    let side = Sidecar {
        min,
        max,
        ramp,
        width: w,
        height: h,
        x_axis: "u, increasing left to right",
        y_axis: "lambda, pi at the top row and 0 at the bottom",
    };
    (out, side)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ramps_hit_their_end_points() {
        assert_eq!(colour(Ramp::Gray, 0.0), [0, 0, 0]);
        assert_eq!(colour(Ramp::Gray, 1.0), [255, 255, 255]);
        assert_eq!(colour(Ramp::Heat, 0.0), [0, 0, 0]);
        assert_eq!(colour(Ramp::Heat, 1.0 / 3.0), [255, 0, 0]);
        assert_eq!(colour(Ramp::Heat, 1.0), [255, 255, 255]);
        assert_eq!(colour(Ramp::Heat, f64::NAN), [0, 0, 0]);
    }
}
