//! Benchmark processes and their closed-form time-varying spectra.
//!
//! Innovations are i.i.d. standard Gaussians drawn from `ChaCha8Rng` seeded
//! with `seed_from_u64(seed)`, transformed by the Ziggurat sampler of
//! `rand_distr::StandardNormal` in `f64`. `T + 1` innovations are drawn: the
//! first one is `Z_0`, so that lagged terms at `t = 1` are defined for every
//! model. Sample `t` (1-based) therefore always uses `Z_t = z[t]`.

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::Real;

/// Default rescaled-time shift of the moving average after the break.
pub const DEFAULT_SHIFT: f64 = 0.2;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ModelSpec {
    /// `sigma1 Z_t` up to and including `t0`, `sigma2 Z_t` afterwards.
    WhiteNoiseBreak { t0: usize, sigma1: f64, sigma2: f64 },
    /// `cos(2 pi t/T) Z_t - (t/T)^2 Z_{t-1}`.
    Tvma2,
    /// `sigma Z_t` up to `t0`, then the time-varying MA shifted by `shift`.
    BreakTvma2 { t0: usize, sigma: f64, shift: f64 },
    /// A series read from disk; no generator and no ground truth.
    CustomCsv,
}

impl ModelSpec {
    /// Stationary white noise with standard deviation `sigma`.
    pub fn white_noise(len: usize, sigma: f64) -> Self {
        ModelSpec::WhiteNoiseBreak { t0: len, sigma1: sigma, sigma2: sigma }
    }

    /// Short name used in CSV metadata and on the command line.
    pub fn name(&self) -> &'static str {
        match self {
            ModelSpec::WhiteNoiseBreak { .. } => "wn-break",
            ModelSpec::Tvma2 => "tvma2",
            ModelSpec::BreakTvma2 { .. } => "tvma2-break",
            ModelSpec::CustomCsv => "custom-csv",
        }
    }

    pub fn validate(&self, len: usize) -> Result<()> {
        let check_t0 = |t0: usize| {
            if t0 == 0 || t0 > len {
                Err(Error::param(format!("break index t0={t0} must lie in [1, {len}]")))
            } else {
                Ok(())
            }
        };
        let check_sigma = |name: &str, s: f64| {
            if s > 0.0 && s.is_finite() {
                Ok(())
            } else {
                Err(Error::param(format!("{name} must be positive, got {s}")))
            }
        };
        match *self {
            ModelSpec::WhiteNoiseBreak { t0, sigma1, sigma2 } => {
                check_t0(t0)?;
                check_sigma("sigma1", sigma1)?;
                check_sigma("sigma2", sigma2)
            }
            ModelSpec::BreakTvma2 { t0, sigma, shift } => {
                check_t0(t0)?;
                check_sigma("sigma", sigma)?;
                if shift.is_finite() {
                    Ok(())
                } else {
                    Err(Error::param("shift must be finite"))
                }
            }
            ModelSpec::Tvma2 | ModelSpec::CustomCsv => Ok(()),
        }
    }

    /// Rescaled break location `t0 / T`, for models with a break.
    pub fn break_u(&self, len: usize) -> Option<f64> {
        match *self {
            ModelSpec::WhiteNoiseBreak { t0, .. } | ModelSpec::BreakTvma2 { t0, .. } => {
                Some(t0 as f64 / len as f64)
            }
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TimeSeries<T> {
    values: Vec<T>,
    model: ModelSpec,
    seed: u64,
}

impl<T: Real> TimeSeries<T> {
    /// Wraps observed values. All values must be finite and there must be at
    /// least two of them.
    pub fn new(values: Vec<T>, model: ModelSpec, seed: u64) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::data(format!("series needs at least 2 samples, got {}", values.len())));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::data(format!("non-finite value at sample {}", pos + 1)));
        }
        Ok(Self { values, model, seed })
    }

    pub fn from_observed(values: Vec<T>) -> Result<Self> {
        Self::new(values, ModelSpec::CustomCsv, 0)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn model(&self) -> ModelSpec {
        self.model
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn scaled(&self, alpha: T) -> Self {
        Self { values: self.values.iter().map(|&v| v * alpha).collect(), ..*self }
    }
}

/// `n` independent standard Gaussian draws from the documented generator.
pub fn innovations(seed: u64, n: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
}

/// Simulates `len` samples of `spec`.
pub fn generate<T: Real>(spec: &ModelSpec, len: usize, seed: u64) -> Result<TimeSeries<T>> {
    if matches!(spec, ModelSpec::CustomCsv) {
        return Err(Error::Unavailable("custom series have no generator".into()));
    }
    if len < 2 {
        return Err(Error::param(format!("series length must be at least 2, got {len}")));
    }
    let z = innovations(seed, len + 1);
    let values = generate_from_innovations(spec, &z)?;
    TimeSeries::new(values, *spec, seed)
}

/// Applies the model recursion to given innovations `z[0..=T]`.
pub fn generate_from_innovations<T: Real>(spec: &ModelSpec, z: &[f64]) -> Result<Vec<T>> {
    if z.len() < 3 {
        return Err(Error::param("need at least 3 innovations (Z_0 plus two samples)"));
    }
    let len = z.len() - 1;
    spec.validate(len)?;
    let n = len as f64;
    let tvma = |t: usize, shift: f64| {
        let v = t as f64 / n - shift;
        (2.0 * PI * v).cos() * z[t] - v * v * z[t - 1]
    };
    let values = (1..=len)
        .map(|t| {
            let x = match *spec {
                ModelSpec::WhiteNoiseBreak { t0, sigma1, sigma2 } => {
                    if t <= t0 {
                        sigma1 * z[t]
                    } else {
                        sigma2 * z[t]
                    }
                }
                ModelSpec::Tvma2 => tvma(t, 0.0),
                ModelSpec::BreakTvma2 { t0, sigma, shift } => {
                    if t <= t0 {
                        sigma * z[t]
                    } else {
                        tvma(t, shift)
                    }
                }
                ModelSpec::CustomCsv => unreachable!("rejected above"),
            };
            T::lit(x)
        })
        .collect();
    Ok(values)
}

/// MA(1) coefficients `(a, b)` of `a Z_t - b Z_{t-1}` at rescaled time `u`.
fn ma_coefficients(spec: &ModelSpec, len: usize, u: f64) -> Result<(f64, f64)> {
    let tv = |v: f64| ((2.0 * PI * v).cos(), v * v);
    match *spec {
        ModelSpec::WhiteNoiseBreak { t0, sigma1, sigma2 } => {
            Ok(if u <= t0 as f64 / len as f64 { (sigma1, 0.0) } else { (sigma2, 0.0) })
        }
        ModelSpec::Tvma2 => Ok(tv(u)),
        ModelSpec::BreakTvma2 { t0, sigma, shift } => {
            Ok(if u <= t0 as f64 / len as f64 { (sigma, 0.0) } else { tv(u - shift) })
        }
        ModelSpec::CustomCsv => Err(Error::Unavailable("no ground truth for a custom series".into())),
    }
}

/// Closed-form time-varying spectral density `f(u, lambda)` of a series of
/// length `len` (the length fixes the rescaled break location).
pub fn true_spectrum<T: Real>(spec: &ModelSpec, len: usize, u: T, lambda: T) -> Result<T> {
    let (a, b) = ma_coefficients(spec, len, u.to_f64_lossy())?;
    let (a, b) = (T::lit(a), T::lit(b));
    let two_pi = T::PI() + T::PI();
    Ok((a * a - (a + a) * b * lambda.cos() + b * b) / two_pi)
}

/// Local autocovariance `gamma(u, k) = int f(u, lambda) e^{i lambda k} d lambda`.
pub fn local_autocovariance<T: Real>(spec: &ModelSpec, len: usize, u: T, k: i64) -> Result<T> {
    let (a, b) = ma_coefficients(spec, len, u.to_f64_lossy())?;
    let (a, b) = (T::lit(a), T::lit(b));
    Ok(match k.unsigned_abs() {
        0 => a * a + b * b,
        1 => -(a * b),
        _ => T::zero(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn wn_break(len: usize) -> ModelSpec {
        ModelSpec::WhiteNoiseBreak { t0: len * 576 / 1024, sigma1: 1.0, sigma2: 10f64.sqrt() }
    }

    #[test]
    fn zero_innovations_give_zero_series() {
        let z = vec![0.0; 65];
        let x: Vec<f64> = generate_from_innovations(&ModelSpec::Tvma2, &z).unwrap();
        assert_eq!(x.len(), 64);
        assert!(x.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn tvma2_uses_lagged_innovation() {
        let z: Vec<f64> = (0..=8).map(|v| v as f64).collect();
        let x: Vec<f64> = generate_from_innovations(&ModelSpec::Tvma2, &z).unwrap();
        let t = 3.0f64;
        let want = (2.0 * PI * t / 8.0).cos() * 3.0 - (t / 8.0).powi(2) * 2.0;
        assert!((x[2] - want).abs() < 1e-15);
        // t = 1 reads Z_0
        let want1 = (2.0 * PI / 8.0).cos() * 1.0 - (1.0f64 / 8.0).powi(2) * 0.0;
        assert_eq!(x[0], want1);
    }

    #[test]
    fn generation_is_deterministic() {
        let a: TimeSeries<f64> = generate(&ModelSpec::Tvma2, 300, 11).unwrap();
        let b: TimeSeries<f64> = generate(&ModelSpec::Tvma2, 300, 11).unwrap();
        let c: TimeSeries<f64> = generate(&ModelSpec::Tvma2, 300, 12).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.values(), c.values());
        assert_eq!(a.seed(), 11);
        assert_eq!(a.model(), ModelSpec::Tvma2);
    }

    #[test]
    fn white_noise_break_variances_monte_carlo() {
        // 200 replications; per-segment sample variance of i.i.d. N(0, s^2)
        // has standard error s^2 sqrt(2/(n-1)) for one replication.
        let len = 1024;
        let spec = wn_break(len);
        let reps = 200;
        let (mut v1, mut v2) = (0.0, 0.0);
        for seed in 0..reps {
            let x: TimeSeries<f64> = generate(&spec, len, seed).unwrap();
            let var = |s: &[f64]| {
                let m = s.iter().sum::<f64>() / s.len() as f64;
                s.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (s.len() - 1) as f64
            };
            v1 += var(&x.values()[..576]);
            v2 += var(&x.values()[576..]);
        }
        v1 /= reps as f64;
        v2 /= reps as f64;
        let se1 = (2.0 / 575.0f64).sqrt() / (reps as f64).sqrt();
        let se2 = 10.0 * (2.0 / 447.0f64).sqrt() / (reps as f64).sqrt();
        assert!((v1 - 1.0).abs() < 3.0 * se1, "{v1}");
        assert!((v2 - 10.0).abs() < 3.0 * se2, "{v2}");
    }

    #[test]
    fn invalid_parameters_rejected() {
        let bad = ModelSpec::WhiteNoiseBreak { t0: 0, sigma1: 1.0, sigma2: 1.0 };
        assert!(matches!(generate::<f64>(&bad, 64, 0), Err(Error::Parameter(_))));
        let bad = ModelSpec::WhiteNoiseBreak { t0: 65, sigma1: 1.0, sigma2: 1.0 };
        assert!(generate::<f64>(&bad, 64, 0).is_err());
        let bad = ModelSpec::BreakTvma2 { t0: 10, sigma: -1.0, shift: 0.2 };
        assert!(generate::<f64>(&bad, 64, 0).is_err());
        assert!(matches!(generate::<f64>(&ModelSpec::CustomCsv, 64, 0), Err(Error::Unavailable(_))));
        assert!(TimeSeries::from_observed(vec![1.0, f64::NAN]).is_err());
    }

    #[test]
    fn white_noise_break_levels() {
        let spec = ModelSpec::WhiteNoiseBreak { t0: 576, sigma1: 1.0, sigma2: 10f64.sqrt() };
        let lo: f64 = true_spectrum(&spec, 1024, 0.3, 1.0).unwrap();
        let hi: f64 = true_spectrum(&spec, 1024, 0.7, 1.0).unwrap();
        assert!((lo - 0.159155).abs() < 1e-6);
        assert!((hi - 1.591549).abs() < 1e-6);
    }

    #[test]
    fn tvma2_spectrum_values() {
        for lam in [0.0, 0.5, 2.0, PI] {
            let v = true_spectrum(&ModelSpec::Tvma2, 512, 0.0, lam).unwrap();
            assert!((v - 1.0 / (2.0 * PI)).abs() < 1e-15);
        }
        let v: f64 = true_spectrum(&ModelSpec::Tvma2, 512, 0.5, 0.0).unwrap();
        assert!((v - 0.248680).abs() < 1e-6, "{v}");
    }

    #[test]
    fn local_autocovariance_values() {
        assert_eq!(local_autocovariance(&ModelSpec::Tvma2, 100, 0.0, 0).unwrap(), 1.0);
        for u in [0.1, 0.4, 0.9] {
            for k in [2, 3, -2, -7] {
                assert_eq!(local_autocovariance(&ModelSpec::Tvma2, 100, u, k).unwrap(), 0.0);
            }
        }
        let wn = ModelSpec::white_noise(100, 2.0);
        assert_eq!(local_autocovariance(&wn, 100, 0.5, 0).unwrap(), 4.0);
        assert_eq!(local_autocovariance(&wn, 100, 0.5, 1).unwrap(), 0.0);
        assert!(local_autocovariance::<f64>(&ModelSpec::CustomCsv, 100, 0.5, 0).is_err());
        assert!(true_spectrum::<f64>(&ModelSpec::CustomCsv, 100, 0.5, 0.0).is_err());
    }

    #[test]
    fn quadrature_of_spectrum_matches_autocovariance() {
        let n = 4000;
        let models = [
            ModelSpec::Tvma2,
            ModelSpec::BreakTvma2 { t0: 205, sigma: 3f64.sqrt(), shift: DEFAULT_SHIFT },
            wn_break(1024),
        ];
        for spec in models {
            for u in [0.0, 0.25, 0.5, 0.75, 1.0] {
                for k in -4i64..=4 {
                    // trapezoid on a periodic analytic integrand is spectrally accurate
                    let h = 2.0 * PI / n as f64;
                    let q: f64 = (0..n)
                        .map(|m| {
                            let lam = -PI + m as f64 * h;
                            true_spectrum(&spec, 1024, u, lam).unwrap() * (lam * k as f64).cos()
                        })
                        .sum::<f64>()
                        * h;
                    let g = local_autocovariance(&spec, 1024, u, k).unwrap();
                    assert!((q - g).abs() < 1e-8, "{spec:?} u={u} k={k}: {q} vs {g}");
                }
            }
        }
    }

    proptest! {
        #[test]
        fn spectra_nonnegative_and_even(u in 0.0f64..=1.0, lam in 0.0f64..=PI) {
            for spec in [ModelSpec::Tvma2, wn_break(512), ModelSpec::BreakTvma2 { t0: 205, sigma: 1.0, shift: 0.2 }] {
                let a = true_spectrum(&spec, 512, u, lam).unwrap();
                let b = true_spectrum(&spec, 512, u, -lam).unwrap();
                prop_assert!(a >= -1e-15);
                prop_assert_eq!(a, b);
            }
        }
    }
}
