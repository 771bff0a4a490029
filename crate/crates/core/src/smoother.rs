//! Nonadaptive kernel smoothing of the pre-periodogram.
//!
//! Weights are unnormalized products `K_t((u - s/T)/b_t) K_f((lambda - lambda_j)/b_f)`
//! over all raw points. Frequencies wrap evenly around the full circle, so a
//! frequency window is never clipped; time windows are clipped at the ends
//! of the sample and the estimate is renormalized.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{freq_half_width, time_half_width, EstGrid, Plane, RawGrid, RawPlane, Unfolded};
use crate::kernels::kernel_quadratic;
use crate::Real;

/// Kernel values `K_t(d / (2T b_t))` for row offsets `d in [-h, h]`.
pub(crate) fn time_weights<T: Real>(b_t: T, len: usize) -> (usize, Vec<T>) {
    let h = time_half_width(b_t, len);
    let scale = T::from_usize_lossy(2 * len) * b_t;
    let w = (0..=2 * h)
        .map(|c| kernel_quadratic((T::from_usize_lossy(c) - T::from_usize_lossy(h)) / scale))
        .collect();
    (h, w)
}

/// Kernel values `K_f(m pi / (T b_f))` for frequency offsets `m in [-h, h]`.
pub(crate) fn freq_weights<T: Real>(b_f: T, len: usize) -> (usize, Vec<T>) {
    let h = freq_half_width(b_f, len);
    let scale = T::from_usize_lossy(len) * b_f / T::PI();
    let w = (0..=2 * h)
        .map(|c| kernel_quadratic((T::from_usize_lossy(c) - T::from_usize_lossy(h)) / scale))
        .collect();
    (h, w)
}

/// Clipped row range `[lo, hi]` of a time window of half-width `h` at row `i`,
/// and the matching offset into a weight vector centred at `h`.
#[inline]
pub(crate) fn clip_rows(i: usize, h: usize, n_rows: usize) -> (usize, usize, usize) {
    let lo = i.saturating_sub(h);
    let hi = (i + h).min(n_rows - 1);
    (lo, hi, lo + h - i)
}

pub(crate) fn check_bandwidths<T: Real>(b_t: T, b_f: T, len: usize) -> Result<()> {
    let ok = |b: T, max: T| b > T::zero() && b.is_finite() && b <= max * (T::one() + T::epsilon());
    if !ok(b_t, T::one()) {
        return Err(Error::param(format!("time bandwidth must lie in (0, 1], got {b_t}")));
    }
    if !ok(b_f, T::PI() + T::PI()) {
        return Err(Error::param(format!("frequency bandwidth must lie in (0, 2pi], got {b_f}")));
    }
    if time_half_width(b_t, len) == 0 || freq_half_width(b_f, len) == 0 {
        return Err(Error::BandwidthTooSmall(format!(
            "window of (b_t={b_t}, b_f={b_f}) at T={len} holds a single raw row or column"
        )));
    }
    Ok(())
}

#[inline]
pub(crate) fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

/// Sum of unnormalized kernel products over the raw grid for the point at
/// raw row `i` and raw column `j`.
pub fn weight_sum<T: Real>(grid: &RawGrid, b_t: T, b_f: T, i: usize, j: usize) -> Result<T> {
    check_bandwidths(b_t, b_f, grid.len())?;
    if i >= grid.n_times() || j >= grid.n_freqs() {
        return Err(Error::param(format!("raw point ({i}, {j}) outside the grid")));
    }
    let (ht, kt) = time_weights(b_t, grid.len());
    let (_, kf) = freq_weights(b_f, grid.len());
    let (lo, hi, off) = clip_rows(i, ht, grid.n_times());
    let st: T = kt[off..off + hi - lo + 1].iter().copied().sum();
    let sf: T = kf.iter().copied().sum();
    Ok(st * sf)
}

/// [`weight_sum`] at every point of an estimation grid.
pub fn weight_sum_plane<T: Real>(grid: &EstGrid, b_t: T, b_f: T) -> Result<Vec<T>> {
    let raw = grid.raw();
    check_bandwidths(b_t, b_f, raw.len())?;
    let (ht, kt) = time_weights(b_t, raw.len());
    let (_, kf) = freq_weights(b_f, raw.len());
    let sf: T = kf.iter().copied().sum();
    let mut out = Vec::with_capacity(grid.n_points());
    for a in 0..grid.n_times() {
        let (lo, hi, off) = clip_rows(grid.raw_time(a), ht, raw.n_times());
        let st: T = kt[off..off + hi - lo + 1].iter().copied().sum();
        out.extend(std::iter::repeat_n(st * sf, grid.n_freqs()));
    }
    Ok(out)
}

/// Kernel-smoothed pre-periodogram with global bandwidths `b_t` (rescaled
/// time) and `b_f` (radians), evaluated on `grid`.
pub fn smooth_nonadaptive<T: Real>(raw: &RawPlane<T>, b_t: T, b_f: T, grid: &EstGrid) -> Result<Plane<T>> {
    let rg = raw.grid();
    if grid.raw() != rg {
        return Err(Error::GridMismatch(format!(
            "estimation grid for T={} used with raw plane for T={}",
            grid.raw().len(),
            rg.len()
        )));
    }
    check_bandwidths(b_t, b_f, rg.len())?;
    let unfolded = raw.unfolded();
    smooth_separable(&unfolded, rg, b_t, b_f, grid)
}

pub(crate) fn smooth_separable<T: Real>(
    unfolded: &Unfolded<T>,
    rg: RawGrid,
    b_t: T,
    b_f: T,
    grid: &EstGrid,
) -> Result<Plane<T>> {
    let (ht, kt) = time_weights(b_t, rg.len());
    let (hf, kf) = freq_weights(b_f, rg.len());
    let sf: T = kf.iter().copied().sum();
    let nef = grid.n_freqs();

    // frequency pass on every raw row, at the estimation columns
    let mut partial = vec![T::zero(); rg.n_times() * nef];
    partial.par_chunks_mut(nef).enumerate().for_each(|(i, out)| {
        for (b, o) in out.iter_mut().enumerate() {
            *o = dot(&kf, unfolded.window(i, grid.raw_freq(b), hf));
        }
    });

    // time pass at the estimation rows
    let mut values = vec![T::zero(); grid.n_points()];
    values.par_chunks_mut(nef).enumerate().for_each(|(a, out)| {
        let (lo, hi, off) = clip_rows(grid.raw_time(a), ht, rg.n_times());
        let w = &kt[off..off + hi - lo + 1];
        let st: T = w.iter().copied().sum();
        let norm = T::one() / (st * sf);
        for (b, o) in out.iter_mut().enumerate() {
            let mut acc = T::zero();
            for (r, &wt) in (lo..=hi).zip(w) {
                acc = acc + wt * partial[r * nef + b];
            }
            *o = acc * norm;
        }
    });
    Plane::new(grid.clone(), values)
}

/// Nonadaptive estimate where every estimation point has its own
/// bandwidths. Returns the estimate and the weight sum at each point.
pub fn smooth_pointwise<T: Real>(
    raw: &RawPlane<T>,
    grid: &EstGrid,
    b_t: &[T],
    b_f: &[T],
) -> Result<(Plane<T>, Vec<T>)> {
    let rg = raw.grid();
    if grid.raw() != rg || b_t.len() != grid.n_points() || b_f.len() != grid.n_points() {
        return Err(Error::GridMismatch("pointwise bandwidths do not match the grid".into()));
    }
    let unfolded = raw.unfolded();
    let nef = grid.n_freqs();
    let results: Vec<(T, T)> = (0..grid.n_points())
        .into_par_iter()
        .map(|p| {
            let (a, b) = (p / nef, p % nef);
            let (ht, kt) = time_weights(b_t[p], rg.len());
            let (hf, kf) = freq_weights(b_f[p], rg.len());
            let sf: T = kf.iter().copied().sum();
            let (lo, hi, off) = clip_rows(grid.raw_time(a), ht, rg.n_times());
            let (mut num, mut st) = (T::zero(), T::zero());
            for (r, &wt) in (lo..=hi).zip(&kt[off..]) {
                num = num + wt * dot(&kf, unfolded.window(r, grid.raw_freq(b), hf));
                st = st + wt;
            }
            let n = st * sf;
            (num / n, n)
        })
        .collect();
    let (values, sums) = results.into_iter().unzip();
    Ok((Plane::new(grid.clone(), values)?, sums))
}
