//! Scoring estimates against a known truth.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{EstGrid, Plane, RawPlane};
use crate::sim::{local_autocovariance, true_spectrum, ModelSpec};
use crate::smoother::{check_bandwidths, smooth_nonadaptive};
use crate::Real;

/// Sample quantile with linear interpolation between order statistics
/// (Hyndman-Fan type 7). NaN for an empty slice.
pub fn quantile<T: Real>(values: &[T], q: f64) -> T {
    if values.is_empty() {
        return T::nan();
    }
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    sorted_quantile(&v, q)
}

fn sorted_quantile<T: Real>(v: &[T], q: f64) -> T {
    let h = (v.len() - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(v.len() - 1);
    v[lo] + (v[hi] - v[lo]) * T::lit(h - lo as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ErrorReport<T> {
    pub mse: T,
    /// `(Q0, Q25, Q50, Q75, Q100)` of the pointwise squared errors.
    pub se_quantiles: [T; 5],
    pub n_points: usize,
}

impl<T: Real> ErrorReport<T> {
    pub fn from_squared_errors(se: &[T]) -> Self {
        let mut v = se.to_vec();
        v.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
        let n = v.len();
        let mse = if n == 0 { T::nan() } else { v.iter().copied().sum::<T>() / T::from_usize_lossy(n) };
        let se_quantiles = if n == 0 {
            [T::nan(); 5]
        } else {
            [0.0, 0.25, 0.5, 0.75, 1.0].map(|q| sorted_quantile(&v, q))
        };
        Self { mse, se_quantiles, n_points: n }
    }

    pub fn median(&self) -> T {
        self.se_quantiles[2]
    }
}

/// Boundary margins `(in u, in lambda)` excluded from error statistics.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Margin {
    pub u: f64,
    pub lambda: f64,
}

impl Margin {
    fn keeps(&self, u: f64, lambda: f64) -> bool {
        u >= self.u && u <= 1.0 - self.u && lambda >= self.lambda && lambda <= std::f64::consts::PI - self.lambda
    }
}

/// Pointwise squared errors of `est` against `truth` and their summary,
/// optionally over the points inside a boundary margin only. The returned
/// plane covers the whole grid.
pub fn squared_error<T: Real>(est: &Plane<T>, truth: &Plane<T>, margin: Option<Margin>) -> Result<(ErrorReport<T>, Plane<T>)> {
    let grid = est.grid();
    if grid != truth.grid() || grid.n_times() != truth.grid().n_times() {
        return Err(Error::GridMismatch("estimate and truth live on different grids".into()));
    }
    let se: Vec<T> = est.values().iter().zip(truth.values()).map(|(&a, &b)| (a - b) * (a - b)).collect();
    let nf = grid.n_freqs();
    let kept: Vec<T> = match margin {
        None => se.clone(),
        Some(m) => se
            .iter()
            .enumerate()
            .filter(|(p, _)| m.keeps(grid.u::<f64>(p / nf), grid.lambda::<f64>(p % nf)))
            .map(|(_, &v)| v)
            .collect(),
    };
    Ok((ErrorReport::from_squared_errors(&kept), Plane::new(grid.clone(), se)?))
}

/// The true spectrum of `spec` on an estimation grid.
pub fn truth_plane<T: Real>(spec: &ModelSpec, grid: &EstGrid) -> Result<Plane<T>> {
    let len = grid.raw().len();
    let mut values = Vec::with_capacity(grid.n_points());
    for a in 0..grid.n_times() {
        for b in 0..grid.n_freqs() {
            values.push(true_spectrum(spec, len, grid.u::<T>(a), grid.lambda::<T>(b))?);
        }
    }
    Plane::new(grid.clone(), values)
}

/// Candidate bandwidths `b_t = 0.05 * 1.25^m` and `b_f / 2pi = 0.05 * 1.25^n`
/// for `m, n = 0..=8`, capped at the full plane and restricted to
/// bandwidths usable at length `len`.
pub fn default_bandwidth_grid(len: usize) -> Vec<(f64, f64)> {
    let two_pi = 2.0 * std::f64::consts::PI;
    let steps: Vec<f64> = (0..=8).map(|m| (0.05 * 1.25f64.powi(m)).min(1.0)).collect();
    let mut out = Vec::new();
    for &bt in &steps {
        for &bf in &steps {
            let pair = (bt, two_pi * bf);
            if !out.contains(&pair) && check_bandwidths(pair.0, pair.1, len).is_ok() {
                out.push(pair);
            }
        }
    }
    out
}

#[derive(Clone, Debug)]
pub struct OracleFit<T> {
    pub b_t: T,
    pub b_f: T,
    pub estimate: Plane<T>,
    pub report: ErrorReport<T>,
    /// MSE of every candidate, in candidate order.
    pub candidate_mse: Vec<T>,
}

/// Nonadaptive estimate with the global bandwidth pair minimizing the MSE
/// against `truth`. Ties go to the larger `b_t * b_f`.
pub fn optimal_global_bandwidth<T: Real>(
    raw: &RawPlane<T>,
    truth: &Plane<T>,
    candidates: &[(T, T)],
    margin: Option<Margin>,
) -> Result<OracleFit<T>> {
    if candidates.is_empty() {
        return Err(Error::param("empty bandwidth candidate set"));
    }
    let grid = truth.grid();
    let mse: Vec<T> = candidates
        .par_iter()
        .map(|&(bt, bf)| {
            let est = smooth_nonadaptive(raw, bt, bf, grid)?;
            Ok(squared_error(&est, truth, margin)?.0.mse)
        })
        .collect::<Result<_>>()?;
    let mut best = 0;
    for i in 1..candidates.len() {
        let (pi, pb) = (candidates[i].0 * candidates[i].1, candidates[best].0 * candidates[best].1);
        if mse[i] < mse[best] || (mse[i] == mse[best] && pi > pb) {
            best = i;
        }
    }
    let (b_t, b_f) = candidates[best];
    let estimate = smooth_nonadaptive(raw, b_t, b_f, grid)?;
    let report = squared_error(&estimate, truth, margin)?.0;
    Ok(OracleFit { b_t, b_f, estimate, report, candidate_mse: mse })
}

/// Mean over frequency at every time of the grid.
pub fn freq_average<T: Real>(est: &Plane<T>) -> Vec<T> {
    let n = T::from_usize_lossy(est.grid().n_freqs());
    (0..est.grid().n_times()).map(|a| est.row(a).iter().copied().sum::<T>() / n).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BreakEstimate {
    /// Index of the first curve point after the break.
    pub index: usize,
    /// Midpoint between the two curve points straddling the break.
    pub u_hat: f64,
    pub statistic: f64,
    /// Noise level of the curve, from the median absolute first difference.
    pub noise: f64,
    /// Whether the statistic exceeds three times the noise level.
    pub confident: bool,
}

/// Location of the largest jump in a curve over rescaled time: the split
/// maximizing the absolute difference of means over two adjacent windows of
/// 5% of the curve length (at least two points).
pub fn detect_break(us: &[f64], curve: &[f64]) -> Result<BreakEstimate> {
    let n = curve.len();
    if n < 8 || us.len() != n {
        return Err(Error::param(format!("break detection needs at least 8 points with coordinates, got {n}")));
    }
    let w = ((0.05 * n as f64).round() as usize).max(2);
    let mut prefix = vec![0.0; n + 1];
    for i in 0..n {
        prefix[i + 1] = prefix[i] + curve[i];
    }
    let mean = |a: usize, b: usize| (prefix[b] - prefix[a]) / (b - a) as f64;
    let mut best = (w, f64::NEG_INFINITY);
    for i in w..=n - w {
        let s = (mean(i, i + w) - mean(i - w, i)).abs();
        if s > best.1 {
            best = (i, s);
        }
    }
    let mut diffs: Vec<f64> = curve.windows(2).map(|d| (d[1] - d[0]).abs()).collect();
    diffs.sort_by(f64::total_cmp);
    let mad = sorted_quantile(&diffs, 0.5);
    // |N(0, 2 s^2)| has median 0.6745 * sqrt(2) * s
    let noise = mad / (0.674_489_750_196_081_7 * std::f64::consts::SQRT_2);
    let (i, stat) = best;
    Ok(BreakEstimate { index: i, u_hat: 0.5 * (us[i - 1] + us[i]), statistic: stat, noise, confident: stat > 3.0 * noise })
}

/// Truncated Wigner-Ville sum `(1/2pi) sum_{|k| <= k_max} gamma(u, k) e^{-ik lambda}`.
pub fn wigner_ville_truncated<T: Real>(spec: &ModelSpec, len: usize, u: T, lambda: T, k_max: usize) -> Result<T> {
    let mut acc = local_autocovariance(spec, len, u, 0)?;
    for k in 1..=k_max as i64 {
        // gamma is even in k, so the pair of terms is 2 gamma cos(k lambda)
        let g = local_autocovariance(spec, len, u, k)?;
        acc = acc + (g + g) * (T::from_i64(k).expect("lag fits") * lambda).cos();
    }
    Ok(acc / (T::PI() + T::PI()))
}
