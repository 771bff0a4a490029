//! Local level of the current estimate used to normalize penalty and memory
//! statistics: mean of `|f|` over a box plus the root mean squared deviation
//! of `f` from that mean.

use crate::grid::{EstGrid, Plane};
use crate::Real;

/// Lower bound returned for boxes where every estimate is exactly zero.
pub const DENOMINATOR_FLOOR: f64 = 1e-12;

fn combine<T: Real>(n: T, sum_abs: T, sum: T, sum_sq: T) -> T {
    let m = sum_abs / n;
    // sum (f - m)^2 = sum f^2 - 2 m sum f + n m^2
    let dev = ((sum_sq - (m + m) * sum + n * m * m) / n).max(T::zero());
    (m + dev.sqrt()).max(T::lit(DENOMINATOR_FLOOR))
}

/// Raw-index half-widths of a box `|u - u_p| <= b_t`, `|lambda - lambda_p| <= b_f`.
fn box_half_widths<T: Real>(len: usize, b_t: T, b_f: T) -> (usize, usize) {
    let slack = T::one() + T::lit(1e-12);
    let ht = (b_t * T::from_usize_lossy(2 * len) * slack).floor().to_usize().unwrap_or(0);
    let hf = (b_f * T::from_usize_lossy(len) / T::PI() * slack).floor().to_usize().unwrap_or(0);
    (ht, hf)
}

/// Index range of `idx` (sorted) falling inside `[c - h, c + h]`.
fn index_range(idx: &[usize], c: usize, h: usize) -> (usize, usize) {
    let lo = idx.partition_point(|&i| i + h < c);
    let hi = idx.partition_point(|&i| i <= c + h);
    (lo, hi)
}

/// Denominator at grid point `(a, b)` computed by direct summation over the
/// box. The box is clipped at the edges of the plane in both directions.
pub fn denominator_bar_f<T: Real>(plane: &Plane<T>, a: usize, b: usize, b_t: T, b_f: T) -> T {
    let grid = plane.grid();
    let (ht, hf) = box_half_widths(grid.raw().len(), b_t, b_f);
    let (a0, a1) = index_range(grid.raw_times(), grid.raw_time(a), ht);
    let (b0, b1) = index_range(grid.raw_freqs(), grid.raw_freq(b), hf);
    let vals: Vec<T> = (a0..a1).flat_map(|r| (b0..b1).map(move |c| (r, c))).map(|(r, c)| plane.get(r, c)).collect();
    let n = T::from_usize_lossy(vals.len());
    let m = vals.iter().map(|v| v.abs()).sum::<T>() / n;
    let dev = vals.iter().map(|&v| (v - m) * (v - m)).sum::<T>() / n;
    (m + dev.sqrt()).max(T::lit(DENOMINATOR_FLOOR))
}

/// Summed-area tables of `|f|`, `f` and `f^2` for constant-time box queries.
pub struct BoxStats<T> {
    grid: EstGrid,
    stride: usize,
    abs: Vec<T>,
    val: Vec<T>,
    sq: Vec<T>,
}

impl<T: Real> BoxStats<T> {
    pub fn new(plane: &Plane<T>) -> Self {
        let grid = plane.grid().clone();
        let (nt, nf) = (grid.n_times(), grid.n_freqs());
        let stride = nf + 1;
        let mut abs = vec![T::zero(); (nt + 1) * stride];
        let mut val = abs.clone();
        let mut sq = abs.clone();
        for a in 0..nt {
            let (mut ra, mut rv, mut rs) = (T::zero(), T::zero(), T::zero());
            for b in 0..nf {
                let f = plane.get(a, b);
                ra = ra + f.abs();
                rv = rv + f;
                rs = rs + f * f;
                let k = (a + 1) * stride + b + 1;
                abs[k] = abs[k - stride] + ra;
                val[k] = val[k - stride] + rv;
                sq[k] = sq[k - stride] + rs;
            }
        }
        Self { grid, stride, abs, val, sq }
    }

    fn rect(&self, t: &[T], a0: usize, a1: usize, b0: usize, b1: usize) -> T {
        let s = self.stride;
        t[a1 * s + b1] - t[a0 * s + b1] - t[a1 * s + b0] + t[a0 * s + b0]
    }

    /// Same value as [`denominator_bar_f`] up to rounding.
    pub fn bar_f(&self, a: usize, b: usize, b_t: T, b_f: T) -> T {
        let (ht, hf) = box_half_widths(self.grid.raw().len(), b_t, b_f);
        self.bar_f_raw(a, b, ht, hf)
    }

    fn bar_f_raw(&self, a: usize, b: usize, ht: usize, hf: usize) -> T {
        let (a0, a1) = index_range(self.grid.raw_times(), self.grid.raw_time(a), ht);
        let (b0, b1) = index_range(self.grid.raw_freqs(), self.grid.raw_freq(b), hf);
        let n = T::from_usize_lossy((a1 - a0) * (b1 - b0));
        combine(
            n,
            self.rect(&self.abs, a0, a1, b0, b1),
            self.rect(&self.val, a0, a1, b0, b1),
            self.rect(&self.sq, a0, a1, b0, b1),
        )
    }

    /// Denominator at every grid point for one pair of box bandwidths.
    pub fn plane(&self, b_t: T, b_f: T) -> Vec<T> {
        let (ht, hf) = box_half_widths(self.grid.raw().len(), b_t, b_f);
        let nf = self.grid.n_freqs();
        (0..self.grid.n_points()).map(|p| self.bar_f_raw(p / nf, p % nf, ht, hf)).collect()
    }
}

/// Box bandwidths at iteration `k`: the initial ones shrunk by the growth of
/// the `q`-quantile of the effective bandwidth, floored at three raw steps.
pub fn shrink_box<T: Real>(len: usize, b0: (T, T), beff_q_init: T, beff_q_prev: T) -> (T, T) {
    let ratio = (beff_q_init / beff_q_prev).min(T::one());
    let floor_t = T::lit(3.0) / T::from_usize_lossy(2 * len);
    let floor_f = T::lit(3.0) * T::PI() / T::from_usize_lossy(len);
    ((b0.0 * ratio).max(floor_t.min(b0.0)), (b0.1 * ratio).max(floor_f.min(b0.1)))
}
