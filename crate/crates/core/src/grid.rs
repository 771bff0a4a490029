//! Raw and estimation grids over the time-frequency plane.
//!
//! The raw grid has half-integer times `tau = 1, 1.5, ..., T` (index
//! `i = 2 tau - 2`, rescaled time `u = tau / T`) and Fourier frequencies
//! `lambda_j = pi j / T` for `j = 0..=T`. Negative frequencies and the
//! second half of the circle are recovered by evenness and `2 pi`
//! periodicity, see [`fold_freq`].

use crate::error::{Error, Result};
use crate::Real;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RawGrid {
    len: usize,
}

impl RawGrid {
    pub fn new(len: usize) -> Result<Self> {
        if len < 2 {
            return Err(Error::param(format!("series length must be at least 2, got {len}")));
        }
        Ok(Self { len })
    }

    /// Series length `T`.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn n_times(&self) -> usize {
        2 * self.len - 1
    }

    pub fn n_freqs(&self) -> usize {
        self.len + 1
    }

    pub fn n_points(&self) -> usize {
        self.n_times() * self.n_freqs()
    }

    /// Half-integer time of raw row `i`.
    pub fn tau(&self, i: usize) -> f64 {
        1.0 + i as f64 / 2.0
    }

    pub fn u<T: Real>(&self, i: usize) -> T {
        T::from_usize_lossy(i + 2) / T::from_usize_lossy(2 * self.len)
    }

    pub fn lambda<T: Real>(&self, j: usize) -> T {
        T::PI() * T::from_usize_lossy(j) / T::from_usize_lossy(self.len)
    }

    /// Raw row index of half-integer time `tau`, if `tau` lies on the grid.
    pub fn time_index(&self, tau: f64) -> Option<usize> {
        let twice = 2.0 * tau;
        if !twice.is_finite() || twice.fract() != 0.0 || twice < 2.0 || twice > 2.0 * self.len as f64 {
            return None;
        }
        Some(twice as usize - 2)
    }

    /// Time step between raw rows in rescaled time.
    pub fn du<T: Real>(&self) -> T {
        T::one() / T::from_usize_lossy(2 * self.len)
    }

    /// Frequency step between raw columns in radians.
    pub fn dlambda<T: Real>(&self) -> T {
        T::PI() / T::from_usize_lossy(self.len)
    }
}

/// Maps an index on the full frequency circle `m in [-T, 2T]` onto the stored
/// half-circle `j in [0, T]` using evenness and `2 pi` periodicity.
#[inline]
pub fn fold_freq(m: isize, len: usize) -> usize {
    let t = len as isize;
    let period = 2 * t;
    let r = m.rem_euclid(period);
    if r > t {
        (period - r) as usize
    } else {
        r as usize
    }
}

/// Largest raw row offset inside a time kernel of bandwidth `b_t`.
#[inline]
pub(crate) fn time_half_width<T: Real>(b_t: T, len: usize) -> usize {
    let h = (b_t * T::from_usize_lossy(len)).floor();
    h.to_usize().unwrap_or(0).min(2 * len)
}

/// Largest frequency offset (in Fourier steps) inside a frequency kernel of
/// bandwidth `b_f` radians.
#[inline]
pub(crate) fn freq_half_width<T: Real>(b_f: T, len: usize) -> usize {
    let h = (b_f * T::from_usize_lossy(len) / (T::PI() + T::PI())).floor();
    h.to_usize().unwrap_or(0).min(len)
}

/// Estimation grid: the raw grid decimated by `d_t` rows and `d_f` columns.
/// The last raw row and column are always included.
#[derive(Clone, Debug)]
pub struct EstGrid {
    raw: RawGrid,
    d_t: usize,
    d_f: usize,
    times: Vec<usize>,
    freqs: Vec<usize>,
    time_of_raw: Vec<usize>,
    freq_of_raw: Vec<usize>,
}

impl PartialEq for EstGrid {
    fn eq(&self, other: &Self) -> bool {
        self.raw == other.raw && self.times == other.times && self.freqs == other.freqs
    }
}

fn decimate(n: usize, d: usize) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).step_by(d).collect();
    if *idx.last().expect("nonempty axis") != n - 1 {
        idx.push(n - 1);
    }
    let mut nearest = Vec::with_capacity(n);
    let mut e = 0;
    for r in 0..n {
        while e + 1 < idx.len() && idx[e + 1] <= r {
            e += 1;
        }
        // ties go to the lower grid point
        if e + 1 < idx.len() && idx[e + 1] - r < r - idx[e] {
            nearest.push(e + 1);
        } else {
            nearest.push(e);
        }
    }
    (idx, nearest)
}

impl EstGrid {
    pub fn new(raw: RawGrid, d_t: usize, d_f: usize) -> Result<Self> {
        if d_t == 0 || d_f == 0 {
            return Err(Error::param("decimation factors must be positive"));
        }
        let (times, time_of_raw) = decimate(raw.n_times(), d_t);
        let (freqs, freq_of_raw) = decimate(raw.n_freqs(), d_f);
        Ok(Self { raw, d_t, d_f, times, freqs, time_of_raw, freq_of_raw })
    }

    /// The full raw grid, undecimated.
    pub fn full(raw: RawGrid) -> Self {
        Self::new(raw, 1, 1).expect("unit decimation is valid")
    }

    pub fn raw(&self) -> RawGrid {
        self.raw
    }

    pub fn decimation(&self) -> (usize, usize) {
        (self.d_t, self.d_f)
    }

    pub fn n_times(&self) -> usize {
        self.times.len()
    }

    pub fn n_freqs(&self) -> usize {
        self.freqs.len()
    }

    pub fn n_points(&self) -> usize {
        self.times.len() * self.freqs.len()
    }

    /// Raw row index of estimation row `a`.
    pub fn raw_time(&self, a: usize) -> usize {
        self.times[a]
    }

    /// Raw column index of estimation column `b`.
    pub fn raw_freq(&self, b: usize) -> usize {
        self.freqs[b]
    }

    pub fn raw_times(&self) -> &[usize] {
        &self.times
    }

    pub fn raw_freqs(&self) -> &[usize] {
        &self.freqs
    }

    /// Nearest estimation row of raw row `i`.
    pub fn nearest_time(&self, i: usize) -> usize {
        self.time_of_raw[i]
    }

    /// Nearest estimation column of raw column `j`.
    pub fn nearest_freq(&self, j: usize) -> usize {
        self.freq_of_raw[j]
    }

    pub fn u<T: Real>(&self, a: usize) -> T {
        self.raw.u(self.times[a])
    }

    pub fn lambda<T: Real>(&self, b: usize) -> T {
        self.raw.lambda(self.freqs[b])
    }

    pub fn us<T: Real>(&self) -> Vec<T> {
        (0..self.n_times()).map(|a| self.u(a)).collect()
    }

    pub fn lambdas<T: Real>(&self) -> Vec<T> {
        (0..self.n_freqs()).map(|b| self.lambda(b)).collect()
    }

    /// Estimation point nearest to `(u, lambda)`.
    pub fn nearest_point(&self, u: f64, lambda: f64) -> (usize, usize) {
        let t = self.raw.len() as f64;
        let i = ((2.0 * u * t - 2.0).round().max(0.0) as usize).min(self.raw.n_times() - 1);
        let j = ((lambda.abs() * t / std::f64::consts::PI).round() as usize).min(self.raw.n_freqs() - 1);
        (self.time_of_raw[i], self.freq_of_raw[j])
    }

    #[inline]
    pub fn index(&self, a: usize, b: usize) -> usize {
        a * self.freqs.len() + b
    }
}

/// Pre-periodogram values on the raw grid, row-major over (time, frequency).
#[derive(Clone, Debug, PartialEq)]
pub struct RawPlane<T> {
    grid: RawGrid,
    values: Vec<T>,
}

impl<T: Real> RawPlane<T> {
    pub fn new(grid: RawGrid, values: Vec<T>) -> Result<Self> {
        if values.len() != grid.n_points() {
            return Err(Error::GridMismatch(format!(
                "raw plane for T={} needs {} values, got {}",
                grid.len(),
                grid.n_points(),
                values.len()
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn grid(&self) -> RawGrid {
        self.grid
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.values[i * self.grid.n_freqs() + j]
    }

    pub fn row(&self, i: usize) -> &[T] {
        let nf = self.grid.n_freqs();
        &self.values[i * nf..(i + 1) * nf]
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self { grid: self.grid, values: self.values.iter().map(|&v| f(v)).collect() }
    }

    pub fn min_max(&self) -> (T, T) {
        self.values
            .iter()
            .fold((T::infinity(), T::neg_infinity()), |(lo, hi), &v| (lo.min(v), hi.max(v)))
    }

    /// Rows extended over the full frequency circle `m in [-T, 2T]`, so that
    /// any kernel window becomes a contiguous slice.
    pub(crate) fn unfolded(&self) -> Unfolded<T> {
        let len = self.grid.len();
        let width = 3 * len + 1;
        let mut values = Vec::with_capacity(self.grid.n_times() * width);
        for i in 0..self.grid.n_times() {
            let row = self.row(i);
            values.extend((0..width).map(|c| row[fold_freq(c as isize - len as isize, len)]));
        }
        Unfolded { len, width, values }
    }
}

/// Frequency-unfolded copy of a raw plane. Column `c` holds `m = c - T`.
pub(crate) struct Unfolded<T> {
    len: usize,
    width: usize,
    values: Vec<T>,
}

impl<T: Real> Unfolded<T> {
    /// Slice of row `i` for `m` in `[center - half, center + half]`.
    #[inline]
    pub fn window(&self, i: usize, center: usize, half: usize) -> &[T] {
        let start = i * self.width + self.len + center - half;
        &self.values[start..start + 2 * half + 1]
    }
}

/// An estimate on an estimation grid, row-major over (time, frequency).
#[derive(Clone, Debug, PartialEq)]
pub struct Plane<T> {
    grid: EstGrid,
    values: Vec<T>,
}

impl<T: Real> Plane<T> {
    pub fn new(grid: EstGrid, values: Vec<T>) -> Result<Self> {
        if values.len() != grid.n_points() {
            return Err(Error::GridMismatch(format!(
                "plane needs {} values, got {}",
                grid.n_points(),
                values.len()
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn from_fn(grid: EstGrid, f: impl Fn(T, T) -> T) -> Self {
        let mut values = Vec::with_capacity(grid.n_points());
        for a in 0..grid.n_times() {
            let u = grid.u(a);
            for b in 0..grid.n_freqs() {
                values.push(f(u, grid.lambda(b)));
            }
        }
        Self { grid, values }
    }

    pub fn grid(&self) -> &EstGrid {
        &self.grid
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    #[inline]
    pub fn get(&self, a: usize, b: usize) -> T {
        self.values[self.grid.index(a, b)]
    }

    pub fn row(&self, a: usize) -> &[T] {
        let nf = self.grid.n_freqs();
        &self.values[a * nf..(a + 1) * nf]
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self { grid: self.grid.clone(), values: self.values.iter().map(|&v| f(v)).collect() }
    }

    pub fn min_max(&self) -> (T, T) {
        self.values
            .iter()
            .fold((T::infinity(), T::neg_infinity()), |(lo, hi), &v| (lo.min(v), hi.max(v)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn raw_grid_coordinates() {
        let g = RawGrid::new(4).unwrap();
        assert_eq!(g.n_times(), 7);
        assert_eq!(g.n_freqs(), 5);
        assert_eq!(g.tau(0), 1.0);
        assert_eq!(g.tau(6), 4.0);
        assert_eq!(g.u::<f64>(6), 1.0);
        assert_eq!(g.lambda::<f64>(0), 0.0);
        assert!((g.lambda::<f64>(4) - std::f64::consts::PI).abs() < 1e-15);
        assert_eq!(g.time_index(2.5), Some(3));
        assert_eq!(g.time_index(2.25), None);
        assert_eq!(g.time_index(0.5), None);
        assert_eq!(g.time_index(4.5), None);
        assert!(RawGrid::new(1).is_err());
    }

    #[test]
    fn fold_is_even_and_periodic() {
        let t = 8;
        for m in -(t as isize)..=(2 * t as isize) {
            let j = fold_freq(m, t);
            assert!(j <= t);
            assert_eq!(j, fold_freq(-m, t));
            assert_eq!(j, fold_freq(m + 2 * t as isize, t));
        }
        assert_eq!(fold_freq(2 * t as isize, t), 0);
        assert_eq!(fold_freq(t as isize + 1, t), t - 1);
    }

    #[test]
    fn decimated_grid_keeps_endpoints_and_maps_nearest() {
        let raw = RawGrid::new(16).unwrap();
        let g = EstGrid::new(raw, 4, 3).unwrap();
        assert_eq!(g.raw_times().first(), Some(&0));
        assert_eq!(g.raw_times().last(), Some(&30));
        assert_eq!(g.raw_freqs().last(), Some(&16));
        for i in 0..raw.n_times() {
            let a = g.nearest_time(i);
            let d = (g.raw_time(a) as isize - i as isize).unsigned_abs();
            assert!(g.raw_times().iter().all(|&r| (r as isize - i as isize).unsigned_abs() >= d));
        }
        let full = EstGrid::full(raw);
        assert_eq!(full.n_points(), raw.n_points());
        assert!((0..raw.n_times()).all(|i| full.nearest_time(i) == i));
    }

    #[test]
    fn unfolded_window_matches_fold() {
        let raw = RawGrid::new(5).unwrap();
        let vals: Vec<f64> = (0..raw.n_points()).map(|v| v as f64).collect();
        let plane = RawPlane::new(raw, vals).unwrap();
        let un = plane.unfolded();
        let w = un.window(3, 1, 5);
        for (c, &v) in w.iter().enumerate() {
            let m = 1 + c as isize - 5;
            assert_eq!(v, plane.get(3, fold_freq(m, 5)));
        }
    }
}
