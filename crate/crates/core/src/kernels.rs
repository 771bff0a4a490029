//! Localization, penalty and memory kernels, plus the chi-square cutoffs they
//! are calibrated with.

use crate::error::{Error, Result};
use crate::Real;

/// Constants shared by the smoothing, penalty and memory kernels.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KernelConstants<T> {
    /// Integral of the squared time kernel.
    pub kappa_t: T,
    /// Integral of the squared frequency kernel.
    pub kappa_f: T,
    /// Penalty kernel cutoff at iteration 0.
    pub c_pen: T,
    /// Memory kernel cutoff at iteration 0.
    pub c_mem: T,
    /// Per-iteration drift of both cutoffs (penalty support grows, memory
    /// support shrinks).
    pub rho: T,
}

/// `int K^2` for [`kernel_quadratic`].
pub const KAPPA_QUADRATIC: f64 = 1.2;

impl<T: Real> KernelConstants<T> {
    /// Quadratic localization kernels with cutoffs `2 chi2_{1,p_pen}` and
    /// `2 chi2_{1,p_mem}`.
    pub fn from_probabilities(p_pen: f64, p_mem: f64, rho: f64) -> Result<Self> {
        Self::new(2.0 * chi2_quantile_1df(p_pen)?, 2.0 * chi2_quantile_1df(p_mem)?, rho)
    }

    pub fn new(c_pen: f64, c_mem: f64, rho: f64) -> Result<Self> {
        if !(c_pen > 0.0 && c_pen.is_finite()) || !(c_mem > 0.0 && c_mem.is_finite()) {
            return Err(Error::param(format!("kernel cutoffs must be positive, got c_pen={c_pen}, c_mem={c_mem}")));
        }
        if !(rho >= 1.0 && rho.is_finite()) {
            return Err(Error::param(format!("rho must be >= 1, got {rho}")));
        }
        Ok(Self {
            kappa_t: T::lit(KAPPA_QUADRATIC),
            kappa_f: T::lit(KAPPA_QUADRATIC),
            c_pen: T::lit(c_pen),
            c_mem: T::lit(c_mem),
            rho: T::lit(rho),
        })
    }

    /// Penalty support `c_pen * rho^k`.
    #[inline]
    pub fn penalty_cutoff(&self, k: usize) -> T {
        self.c_pen * self.rho.powi(k as i32)
    }

    /// Memory support `c_mem * rho^-k`.
    #[inline]
    pub fn memory_cutoff(&self, k: usize) -> T {
        self.c_mem / self.rho.powi(k as i32)
    }
}

impl<T: Real> Default for KernelConstants<T> {
    fn default() -> Self {
        Self::from_probabilities(0.9, 0.75, 1.02).expect("default constants are valid")
    }
}

/// `K(x) = 6 (1/4 - x^2)` on `[-1/2, 1/2]`, zero outside.
#[inline]
pub fn kernel_quadratic<T: Real>(x: T) -> T {
    let half = T::lit(0.5);
    if x.abs() <= half {
        T::lit(6.0) * (T::lit(0.25) - x * x)
    } else {
        T::zero()
    }
}

/// Concave penalty kernel `1 - (x / (c rho^k))^2` on `[0, c rho^k]`.
#[inline]
pub fn kernel_penalty<T: Real>(x: T, k: usize, consts: &KernelConstants<T>) -> T {
    penalty_with_cutoff(x, consts.penalty_cutoff(k))
}

#[inline]
pub(crate) fn penalty_with_cutoff<T: Real>(x: T, cutoff: T) -> T {
    if x <= cutoff {
        let r = x / cutoff;
        T::one() - r * r
    } else {
        T::zero()
    }
}

/// Linear memory kernel `1 - x / (c_mem rho^-k)` on `[0, c_mem rho^-k]`.
#[inline]
pub fn kernel_memory<T: Real>(x: T, k: usize, consts: &KernelConstants<T>) -> T {
    let cutoff = consts.memory_cutoff(k);
    if x <= cutoff {
        T::one() - x / cutoff
    } else {
        T::zero()
    }
}

/// Quantile of the chi-square distribution with one degree of freedom:
/// the square of the standard normal quantile at `(1 + p) / 2`.
pub fn chi2_quantile_1df(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::param(format!("probability must lie in (0, 1), got {p}")));
    }
    let e = statrs::function::erf::erf_inv(p);
    Ok(2.0 * e * e)
}
