use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{chi2_quantile_1df, KernelConstants};
use crate::Real;

/// Tuning parameters of the adaptive estimator. Time bandwidths are on the
/// rescaled-time scale, frequency bandwidths in radians.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimatorConfig {
    pub b_t0: f64,
    pub b_f0: f64,
    pub gamma_t: f64,
    pub gamma_f: f64,
    pub rho: f64,
    pub eta: f64,
    pub q: f64,
    pub b_star_t0: f64,
    pub b_star_f0: f64,
    pub b_sstar_t0: f64,
    pub b_sstar_f0: f64,
    pub c_pen: f64,
    pub c_mem: f64,
    pub penalty_scale: f64,
    pub k_hard: usize,
    pub bias_exponent: f64,
    pub d_t: usize,
    pub d_f: usize,
    pub keep_history: bool,
}

/// A partial configuration, as read from a config file. Missing keys keep
/// the defaults; unknown keys are rejected.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigPatch {
    pub b_t0: Option<f64>,
    pub b_f0: Option<f64>,
    pub gamma_t: Option<f64>,
    pub gamma_f: Option<f64>,
    pub rho: Option<f64>,
    pub eta: Option<f64>,
    pub q: Option<f64>,
    pub b_star_t0: Option<f64>,
    pub b_star_f0: Option<f64>,
    pub b_sstar_t0: Option<f64>,
    pub b_sstar_f0: Option<f64>,
    pub c_pen: Option<f64>,
    pub c_mem: Option<f64>,
    pub penalty_scale: Option<f64>,
    pub k_hard: Option<usize>,
    pub bias_exponent: Option<f64>,
    pub d_t: Option<usize>,
    pub d_f: Option<usize>,
    pub keep_history: Option<bool>,
}

/// Smallest initial bandwidth (as a fraction of the plane in each
/// direction) such that `b_t0 * b_f0 * T >= log^2 T`, but not below 0.1.
pub fn default_initial_bandwidth(len: usize) -> f64 {
    let l = (len as f64).ln();
    (l * l / (2.0 * std::f64::consts::PI * len as f64)).sqrt().max(0.1)
}

impl EstimatorConfig {
    pub fn for_length(len: usize) -> Self {
        let b0 = default_initial_bandwidth(len).min(1.0);
        let bf0 = 2.0 * std::f64::consts::PI * b0;
        Self {
            b_t0: b0,
            b_f0: bf0,
            gamma_t: 1.2,
            gamma_f: 1.2,
            rho: 1.02,
            eta: 0.25,
            q: 0.15,
            b_star_t0: b0,
            b_star_f0: bf0,
            b_sstar_t0: b0,
            b_sstar_f0: bf0,
            c_pen: 2.0 * chi2_quantile_1df(0.9).expect("valid probability"),
            c_mem: 2.0 * chi2_quantile_1df(0.75).expect("valid probability"),
            penalty_scale: 1.0,
            k_hard: 25,
            bias_exponent: -1.0 / 6.0,
            d_t: 1,
            d_f: 1,
            keep_history: true,
        }
    }

    pub fn apply(mut self, patch: &ConfigPatch) -> Self {
        macro_rules! take {
            ($($f:ident),*) => { $(if let Some(v) = patch.$f { self.$f = v; })* };
        }
        take!(
            b_t0, b_f0, gamma_t, gamma_f, rho, eta, q, b_star_t0, b_star_f0, b_sstar_t0, b_sstar_f0, c_pen, c_mem,
            penalty_scale, k_hard, bias_exponent, d_t, d_f, keep_history
        );
        self
    }

    pub fn kernel_constants<T: Real>(&self) -> Result<KernelConstants<T>> {
        KernelConstants::new(self.c_pen, self.c_mem, self.rho)
    }

    /// Hard checks: values for which the procedure is undefined.
    pub fn validate(&self, len: usize) -> Result<()> {
        let two_pi = 2.0 * std::f64::consts::PI;
        let in_range = |name: &str, v: f64, lo: f64, hi: f64| {
            if v > lo && v <= hi && v.is_finite() {
                Ok(())
            } else {
                Err(Error::param(format!("{name} must lie in ({lo}, {hi}], got {v}")))
            }
        };
        in_range("b_t0", self.b_t0, 0.0, 1.0)?;
        in_range("b_star_t0", self.b_star_t0, 0.0, 1.0)?;
        in_range("b_sstar_t0", self.b_sstar_t0, 0.0, 1.0)?;
        in_range("b_f0", self.b_f0, 0.0, two_pi)?;
        in_range("b_star_f0", self.b_star_f0, 0.0, two_pi)?;
        in_range("b_sstar_f0", self.b_sstar_f0, 0.0, two_pi)?;
        if !(self.gamma_t >= 1.0 && self.gamma_f >= 1.0 && self.gamma_t.is_finite() && self.gamma_f.is_finite()) {
            return Err(Error::param(format!(
                "growth rates must be >= 1, got gamma_t={}, gamma_f={}",
                self.gamma_t, self.gamma_f
            )));
        }
        if !(self.eta >= 0.0 && self.eta < 1.0) {
            return Err(Error::param(format!("eta must lie in [0, 1), got {}", self.eta)));
        }
        in_range("q", self.q, 0.0, 1.0)?;
        if !(self.penalty_scale >= 0.0 && self.penalty_scale.is_finite()) {
            return Err(Error::param(format!("penalty_scale must be >= 0, got {}", self.penalty_scale)));
        }
        if !self.bias_exponent.is_finite() {
            return Err(Error::param("bias_exponent must be finite"));
        }
        if self.k_hard == 0 {
            return Err(Error::param("k_hard must be at least 1"));
        }
        if self.d_t == 0 || self.d_f == 0 {
            return Err(Error::param("decimation factors must be at least 1"));
        }
        KernelConstants::<f64>::new(self.c_pen, self.c_mem, self.rho)?;
        crate::smoother::check_bandwidths(self.b_t0, self.b_f0, len)
    }

    /// Soft checks against the recommended parameter ranges.
    pub fn warnings(&self, len: usize) -> Vec<String> {
        let mut out = Vec::new();
        let l = (len as f64).ln();
        if self.b_t0 * self.b_f0 * (len as f64) < l * l * (1.0 - 1e-9) {
            out.push(format!(
                "initial bandwidths are small: b_t0 * b_f0 * T = {:.3} < log^2 T = {:.3}",
                self.b_t0 * self.b_f0 * len as f64,
                l * l
            ));
        }
        let g = self.gamma_t * self.gamma_f;
        if !(1.2..=1.5).contains(&g) {
            out.push(format!("gamma_t * gamma_f = {g:.3} is outside the recommended [1.2, 1.5]"));
        }
        if !(1.01..=1.03).contains(&self.rho) {
            out.push(format!("rho = {} is outside the recommended [1.01, 1.03]", self.rho));
        }
        if self.eta > 0.25 {
            out.push(format!("eta = {} exceeds the recommended 0.25", self.eta));
        }
        if !(0.10..=0.20).contains(&self.q) {
            out.push(format!("q = {} is outside the recommended [0.10, 0.20]", self.q));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid_and_quiet() {
        for len in [64, 256, 512, 1024, 4096] {
            let c = EstimatorConfig::for_length(len);
            c.validate(len).unwrap();
            assert!(c.warnings(len).is_empty(), "T={len}: {:?}", c.warnings(len));
        }
        let c = EstimatorConfig::for_length(512);
        assert!((c.b_t0 - 0.1098).abs() < 1e-3);
        assert!((c.c_pen - 2.0 * 2.705543).abs() < 1e-5);
        assert!((c.c_mem - 2.0 * 1.323304).abs() < 1e-5);
        assert_eq!(EstimatorConfig::for_length(1024).b_t0, 0.1);
    }

    #[test]
    fn patch_overrides_only_given_keys() {
        let base = EstimatorConfig::for_length(256);
        let patch = ConfigPatch { eta: Some(0.0), k_hard: Some(3), ..Default::default() };
        let c = base.clone().apply(&patch);
        assert_eq!(c.eta, 0.0);
        assert_eq!(c.k_hard, 3);
        assert_eq!(c.b_t0, base.b_t0);
    }

    #[test]
    fn invalid_values_are_rejected() {
        let base = EstimatorConfig::for_length(256);
        for patch in [
            ConfigPatch { b_t0: Some(0.0), ..Default::default() },
            ConfigPatch { b_f0: Some(7.0), ..Default::default() },
            ConfigPatch { gamma_t: Some(0.9), ..Default::default() },
            ConfigPatch { eta: Some(1.0), ..Default::default() },
            ConfigPatch { rho: Some(0.5), ..Default::default() },
            ConfigPatch { k_hard: Some(0), ..Default::default() },
            ConfigPatch { d_f: Some(0), ..Default::default() },
            ConfigPatch { penalty_scale: Some(-1.0), ..Default::default() },
        ] {
            assert!(base.clone().apply(&patch).validate(256).is_err(), "{patch:?}");
        }
    }

    #[test]
    fn out_of_range_recommendations_warn() {
        let c = EstimatorConfig::for_length(256).apply(&ConfigPatch {
            gamma_t: Some(1.5),
            rho: Some(1.1),
            eta: Some(0.5),
            q: Some(0.3),
            b_t0: Some(0.02),
            ..Default::default()
        });
        c.validate(256).unwrap();
        assert_eq!(c.warnings(256).len(), 5);
    }
}
