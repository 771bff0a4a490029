//! Raw time-frequency estimators: the modified pre-periodogram, plus the
//! classical pre-periodogram and the periodogram used as oracles.

use std::sync::Arc;

use num_traits::Float;
use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftNum, FftPlanner};

use crate::error::{Error, Result};
use crate::grid::{RawGrid, RawPlane};
use crate::sim::TimeSeries;
use crate::Real;

/// Minimum series length accepted by the pre-periodograms.
pub const MIN_LEN: usize = 8;

fn check_series<T: Real>(series: &TimeSeries<T>, min: usize) -> Result<()> {
    if series.len() < min {
        return Err(Error::param(format!("series needs at least {min} samples, got {}", series.len())));
    }
    if let Some(pos) = series.values().iter().position(|v| !Float::is_finite(*v)) {
        return Err(Error::data(format!("non-finite value at sample {}", pos + 1)));
    }
    Ok(())
}

/// Preliminary covariance at raw row `i` (time `tau = 1 + i/2`) and lag `k`.
/// `x` is the 0-based sample vector, sample `t` being `x[t - 1]`.
#[inline]
fn cov_star_at<T: Real>(x: &[T], i: usize, k: usize) -> T {
    let len = x.len() as isize;
    // doubled coordinates: 2 tau = i + 2
    let tau2 = i as isize + 2;
    let k = k as isize;
    let at = |t: isize| x[(t - 1) as usize];
    let inside = |t: isize| (1..=len).contains(&t);
    if (tau2 + k) % 2 == 0 {
        let (lo, hi) = ((tau2 - k) / 2, (tau2 + k) / 2);
        if inside(lo) && inside(hi) {
            at(lo) * at(hi)
        } else {
            T::zero()
        }
    } else {
        let (lo1, hi1) = ((tau2 - k - 1) / 2, (tau2 + k - 1) / 2);
        let (lo2, hi2) = ((tau2 - k + 1) / 2, (tau2 + k + 1) / 2);
        if inside(lo1) && inside(hi1) && inside(lo2) && inside(hi2) {
            T::lit(0.5) * (at(lo1) * at(hi1) + at(lo2) * at(hi2))
        } else {
            T::zero()
        }
    }
}

/// Preliminary covariance estimator at half-integer time `tau` and lag `k`.
///
/// When `tau -+ k/2` are both sample indices the lag product centred at `tau`
/// is returned; otherwise the two lag-`k` products centred at `tau -+ 1/2`
/// are averaged. Lags that leave the sample are zero.
pub fn cov_star<T: Real>(series: &TimeSeries<T>, tau: f64, k: usize) -> Result<T> {
    let grid = RawGrid::new(series.len())?;
    let i = grid
        .time_index(tau)
        .ok_or_else(|| Error::param(format!("tau={tau} is not a half-integer time in [1, {}]", series.len())))?;
    if k >= series.len() {
        return Err(Error::param(format!("lag {k} exceeds T-1={}", series.len() - 1)));
    }
    Ok(cov_star_at(series.values(), i, k))
}

struct RealCosineTransform<T: FftNum> {
    fft: Arc<dyn Fft<T>>,
    n: usize,
}

impl<T: Real + FftNum> RealCosineTransform<T> {
    /// Length `2T` transform: its bins are exactly `lambda_j = pi j / T`.
    fn new(len: usize) -> Self {
        let n = 2 * len;
        Self { fft: FftPlanner::new().plan_fft_forward(n), n }
    }

    /// Evaluates `(1/2pi) sum_{|k|<T} c_|k| e^{-ik lambda_j}` for `j = 0..=T`
    /// given `c_0..c_{T-1}`.
    fn eval(&self, lags: &[T], buf: &mut [Complex<T>], scratch: &mut [Complex<T>], out: &mut [T]) -> Result<()> {
        let len = self.n / 2;
        buf.iter_mut().for_each(|c| *c = Complex::new(T::zero(), T::zero()));
        buf[0] = Complex::new(lags[0], T::zero());
        for k in 1..len {
            buf[k] = Complex::new(lags[k], T::zero());
            buf[self.n - k] = buf[k];
        }
        self.fft.process_with_scratch(buf, scratch);
        let scale = T::one() / (T::PI() + T::PI());
        let mut max_re = T::zero();
        let mut max_im = T::zero();
        for (o, c) in out.iter_mut().zip(buf.iter()) {
            *o = c.re * scale;
            max_re = max_re.max(Float::abs(c.re));
            max_im = max_im.max(Float::abs(c.im));
        }
        // symmetric input: any imaginary part is rounding residue
        let tol = T::lit(1e-9).max(T::epsilon() * T::lit(1e3));
        if max_im > tol * max_re.max(T::min_positive_value()) && max_im > T::epsilon() {
            return Err(Error::data(format!(
                "pre-periodogram transform left imaginary residue {max_im:?} against {max_re:?}"
            )));
        }
        Ok(())
    }
}

fn transform_rows<T, F>(len: usize, rows: usize, lag_fill: F) -> Result<Vec<T>>
where
    T: Real + FftNum,
    F: Fn(usize, &mut [T]) + Sync,
{
    let tr = RealCosineTransform::<T>::new(len);
    let nf = len + 1;
    let mut values = vec![T::zero(); rows * nf];
    let scratch_len = tr.fft.get_inplace_scratch_len();
    values
        .par_chunks_mut(nf)
        .enumerate()
        .map_init(
            || {
                (
                    vec![T::zero(); len],
                    vec![Complex::new(T::zero(), T::zero()); 2 * len],
                    vec![Complex::new(T::zero(), T::zero()); scratch_len],
                )
            },
            |(lags, buf, scratch), (i, out)| {
                lag_fill(i, lags);
                tr.eval(lags, buf, scratch, out)
            },
        )
        .collect::<Result<Vec<()>>>()?;
    Ok(values)
}

/// Modified pre-periodogram on the raw grid: for every half-integer time the
/// symmetric lag sequence of [`cov_star`] is Fourier transformed at
/// `lambda_j = pi j / T`, `j = 0..=T`.
pub fn preperiodogram_modified<T: Real + FftNum>(series: &TimeSeries<T>) -> Result<RawPlane<T>> {
    check_series(series, MIN_LEN)?;
    let x = series.values();
    let grid = RawGrid::new(x.len())?;
    let values = transform_rows(x.len(), grid.n_times(), |i, lags| {
        for (k, c) in lags.iter_mut().enumerate() {
            *c = cov_star_at(x, i, k);
        }
    })?;
    RawPlane::new(grid, values)
}

/// Classical pre-periodogram on integer times `t = 1..=T`, row `t - 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct ClassicPlane<T> {
    len: usize,
    values: Vec<T>,
}

impl<T: Real> ClassicPlane<T> {
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Value at integer time `t` (1-based) and frequency index `j`.
    pub fn get(&self, t: usize, j: usize) -> T {
        self.values[(t - 1) * (self.len + 1) + j]
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    /// Average over `t = 1..=T` for each frequency.
    pub fn time_average(&self) -> Vec<T> {
        let nf = self.len + 1;
        let mut acc = vec![T::zero(); nf];
        for row in self.values.chunks(nf) {
            for (a, &v) in acc.iter_mut().zip(row) {
                *a = *a + v;
            }
        }
        let n = T::from_usize_lossy(self.len);
        acc.into_iter().map(|a| a / n).collect()
    }
}

/// Lag product `X_{floor(t+(k+1)/2)} X_{floor(t-(k-1)/2)}` for `k >= 0`.
#[inline]
fn classic_lag<T: Real>(x: &[T], t: usize, k: usize) -> T {
    let t = t as isize;
    let k = k as isize;
    let (hi, lo) = if k % 2 == 0 { (t + k / 2, t - k / 2) } else { (t + (k + 1) / 2, t - (k - 1) / 2) };
    let len = x.len() as isize;
    if lo >= 1 && hi <= len {
        x[(hi - 1) as usize] * x[(lo - 1) as usize]
    } else {
        T::zero()
    }
}

/// Classical floor-based pre-periodogram. Used as a test oracle: its
/// average over time is exactly the periodogram.
pub fn preperiodogram_classic<T: Real + FftNum>(series: &TimeSeries<T>) -> Result<ClassicPlane<T>> {
    check_series(series, MIN_LEN)?;
    let x = series.values();
    let len = x.len();
    let values = transform_rows(len, len, |row, lags| {
        for (k, c) in lags.iter_mut().enumerate() {
            *c = classic_lag(x, row + 1, k);
        }
    })?;
    Ok(ClassicPlane { len, values })
}

/// Periodogram `I(lambda_j) = |sum_t X_t e^{-i lambda_j t}|^2 / (2 pi T)` at
/// `lambda_j = pi j / T`, `j = 0..=T`.
pub fn periodogram<T: Real + FftNum>(series: &TimeSeries<T>) -> Result<Vec<T>> {
    check_series(series, 2)?;
    let x = series.values();
    let len = x.len();
    let n = 2 * len;
    let fft = FftPlanner::<T>::new().plan_fft_forward(n);
    let mut buf: Vec<Complex<T>> = x.iter().map(|&v| Complex::new(v, T::zero())).collect();
    buf.resize(n, Complex::new(T::zero(), T::zero()));
    fft.process(&mut buf);
    let scale = T::one() / ((T::PI() + T::PI()) * T::from_usize_lossy(len));
    Ok(buf[..=len].iter().map(|c| c.norm_sqr() * scale).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{generate, innovations, ModelSpec};
    use std::f64::consts::PI;

    fn series(v: &[f64]) -> TimeSeries<f64> {
        TimeSeries::from_observed(v.to_vec()).unwrap()
    }

    fn random(len: usize, seed: u64) -> TimeSeries<f64> {
        generate(&ModelSpec::white_noise(len, 1.0), len, seed).unwrap()
    }

    #[test]
    fn cov_star_examples() {
        let s = series(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(cov_star(&s, 2.0, 2).unwrap(), 3.0);
        assert_eq!(cov_star(&s, 2.5, 1).unwrap(), 6.0);
        assert_eq!(cov_star(&s, 2.0, 1).unwrap(), 4.0);
        assert_eq!(cov_star(&s, 2.0, 0).unwrap(), 4.0);
        assert_eq!(cov_star(&s, 1.0, 1).unwrap(), 0.0);
        assert_eq!(cov_star(&s, 2.5, 3).unwrap(), 4.0);
        assert!(matches!(cov_star(&s, 2.25, 1), Err(Error::Parameter(_))));
        assert!(cov_star(&s, 5.0, 1).is_err());
    }

    #[test]
    fn classic_lag_indices() {
        let x = [1.0, 2.0, 3.0, 5.0, 7.0];
        // k = 0: X_t^2; k = 1: X_{t+1} X_t; k = 2: X_{t+1} X_{t-1}; k = 3: X_{t+2} X_{t-1}
        assert_eq!(classic_lag(&x, 3, 0), 9.0);
        assert_eq!(classic_lag(&x, 3, 1), 15.0);
        assert_eq!(classic_lag(&x, 3, 2), 10.0);
        assert_eq!(classic_lag(&x, 3, 3), 14.0);
        assert_eq!(classic_lag(&x, 3, 4), 7.0);
        assert_eq!(classic_lag(&x, 3, 5), 0.0);
        assert_eq!(classic_lag(&x, 5, 1), 0.0);
    }

    #[test]
    fn zero_series_gives_zero_planes() {
        let s = series(&[0.0; 16]);
        assert!(preperiodogram_modified(&s).unwrap().values().iter().all(|&v| v == 0.0));
        assert!(preperiodogram_classic(&s).unwrap().values().iter().all(|&v| v == 0.0));
        assert!(periodogram(&s).unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn rejects_short_or_non_finite() {
        assert!(matches!(preperiodogram_modified(&series(&[1.0; 7])), Err(Error::Parameter(_))));
    }

    fn direct_sum(x: &[f64], i: usize, j: usize) -> f64 {
        let len = x.len();
        let lam = PI * j as f64 / len as f64;
        let mut s = 0.0;
        for k in -(len as i64 - 1)..=(len as i64 - 1) {
            s += cov_star_at(x, i, k.unsigned_abs() as usize) * (k as f64 * lam).cos();
        }
        s / (2.0 * PI)
    }

    #[test]
    fn constant_series_at_zero_frequency() {
        let c = 1.7;
        let x = vec![c; 20];
        let plane = preperiodogram_modified(&series(&x)).unwrap();
        for i in 0..plane.grid().n_times() {
            let admissible = (-19i64..=19).filter(|k| cov_star_at(&x, i, k.unsigned_abs() as usize) != 0.0).count();
            let want = c * c / (2.0 * PI) * admissible as f64;
            assert!((plane.get(i, 0) - want).abs() < 1e-12 * want.max(1.0), "i={i}");
        }
    }

    #[test]
    fn fft_matches_direct_summation() {
        for len in [16, 33, 64] {
            let s = random(len, len as u64);
            let plane = preperiodogram_modified(&s).unwrap();
            let scale = plane.values().iter().fold(0.0f64, |m, v| m.max(v.abs()));
            for i in 0..plane.grid().n_times() {
                for j in 0..plane.grid().n_freqs() {
                    let want = direct_sum(s.values(), i, j);
                    assert!((plane.get(i, j) - want).abs() <= 1e-9 * scale, "T={len} i={i} j={j}");
                }
            }
        }
    }

    #[test]
    fn inverse_transform_recovers_lags() {
        let len = 24;
        let s = random(len, 5);
        let plane = preperiodogram_modified(&s).unwrap();
        let n = 2 * len;
        for i in [0, 7, 23, 46] {
            let row = plane.row(i);
            for k in 0..len {
                // even extension to the 2T-point circle, inverse DFT
                let mut acc = 0.0;
                for m in 0..n {
                    let j = crate::grid::fold_freq(m as isize, len);
                    acc += row[j] * (PI * (m * k) as f64 / len as f64).cos();
                }
                let rec = acc * 2.0 * PI / n as f64;
                assert!((rec - cov_star_at(s.values(), i, k)).abs() < 1e-9, "i={i} k={k}");
            }
        }
    }

    #[test]
    fn classic_averages_to_periodogram() {
        for len in [16, 31] {
            let s = random(len, 3);
            let avg = preperiodogram_classic(&s).unwrap().time_average();
            let per = periodogram(&s).unwrap();
            for (a, p) in avg.iter().zip(&per) {
                assert!((a - p).abs() <= 1e-10 * p.abs().max(1e-300), "{a} vs {p}");
            }
        }
    }

    #[test]
    fn spike_classic_first_row_is_flat() {
        let mut x = vec![0.0; 16];
        x[0] = 1.0;
        let c = preperiodogram_classic(&series(&x)).unwrap();
        for j in 0..=16 {
            assert!((c.get(1, j) - 1.0 / (2.0 * PI)).abs() < 1e-15);
        }
    }

    #[test]
    fn periodogram_concentrates_on_cosine_frequency() {
        let len = 256;
        let j0 = len / 2;
        let x: Vec<f64> = (1..=len).map(|t| (PI * j0 as f64 / len as f64 * t as f64).cos()).collect();
        let per = periodogram(&series(&x)).unwrap();
        let mut others: Vec<f64> = per.iter().enumerate().filter(|(j, _)| *j != j0).map(|(_, v)| *v).collect();
        others.sort_by(f64::total_cmp);
        let median = others[others.len() / 2];
        assert!(per[j0] >= 100.0 * median);
    }

    #[test]
    fn stationary_ma1_is_unbiased_on_average() {
        let len = 64;
        let reps = 200;
        let probes = [(20usize, 10usize), (63, 32), (100, 50)];
        let mut acc = vec![Vec::new(); probes.len()];
        for seed in 0..reps {
            let z = innovations(seed, len + 1);
            let x: Vec<f64> = (1..=len).map(|t| z[t] + 0.5 * z[t - 1]).collect();
            let plane = preperiodogram_modified(&series(&x)).unwrap();
            for (p, &(i, j)) in probes.iter().enumerate() {
                acc[p].push(plane.get(i, j));
            }
        }
        for (p, &(_, j)) in probes.iter().enumerate() {
            let lam = PI * j as f64 / len as f64;
            let truth = (1.25 + lam.cos()) / (2.0 * PI);
            let m = acc[p].iter().sum::<f64>() / reps as f64;
            let sd = (acc[p].iter().map(|v| (v - m).powi(2)).sum::<f64>() / (reps - 1) as f64).sqrt();
            // 4 standard errors keeps this unit check stable; the acceptance
            // suite applies the 3-sigma rule over 9 probes.
            assert!((m - truth).abs() < 4.0 * sd / (reps as f64).sqrt(), "probe {p}: {m} vs {truth}");
        }
    }

    #[test]
    fn works_in_single_precision() {
        let x: Vec<f32> = innovations(1, 32).into_iter().map(|v| v as f32).collect();
        let s = TimeSeries::from_observed(x).unwrap();
        let plane = preperiodogram_modified(&s).unwrap();
        assert_eq!(plane.values().len(), 63 * 33);
        assert!(plane.values().iter().all(|v| v.is_finite()));
    }
}
