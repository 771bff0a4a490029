//! Iterative adaptive smoothing of the raw plane.
//!
//! Starting from a nonadaptive estimate with small bandwidths, every
//! iteration grows each point's search window, downweights raw points whose
//! current estimate differs significantly from the point's own (penalty
//! step), and mixes the result with the previous estimate (memory step).
//! Windows keep growing in homogeneous regions and get cut off at breaks.

mod config;
mod denominator;
mod kernel;
mod steps;

use std::time::Instant;

use serde::Serialize;

use crate::error::Result;
use crate::eval::quantile;
use crate::grid::{EstGrid, Plane, RawPlane};
use crate::smoother::{smooth_nonadaptive, weight_sum_plane};
use crate::Real;

pub use config::{default_initial_bandwidth, ConfigPatch, EstimatorConfig};
pub use denominator::{denominator_bar_f, shrink_box, BoxStats, DENOMINATOR_FLOOR};
pub use kernel::{reconstruct_kernel, KernelMap};
pub use steps::{
    memory_statistic, memory_step, penalty_statistic, penalty_step, search_bandwidths, stopping_check,
};

/// Per-point state after an iteration.
#[derive(Clone, Debug, PartialEq)]
pub struct AdaptiveState<T> {
    pub grid: EstGrid,
    pub f_hat: Vec<T>,
    pub n_hat: Vec<T>,
    pub b_eff: Vec<T>,
    /// Last memory coefficient; 0 before the first iteration.
    pub theta: Vec<T>,
    /// Set while a point is held in full memory because its update went
    /// further negative.
    pub neg_flag: Vec<bool>,
}

impl<T: Real> AdaptiveState<T> {
    /// Effective bandwidth of a weight sum `n` realized inside a search
    /// window `(b_t, b_f)` whose unpenalized weight sum is `n_free`: the
    /// geometric mean `sqrt(b_t * b_f / 2pi)` of the window, shrunk by
    /// `sqrt(n / n_free)`. Measuring against the clipped window keeps
    /// boundary points on the same scale as interior ones.
    #[inline]
    pub fn effective_bandwidth(n: T, n_free: T, b_t: T, b_f: T) -> T {
        (b_t * b_f / (T::PI() + T::PI()) * n / n_free).sqrt()
    }

    /// Nonadaptive estimate with the initial bandwidths.
    pub fn initial(raw: &RawPlane<T>, grid: &EstGrid, config: &EstimatorConfig) -> Result<Self> {
        let (bt, bf) = (T::lit(config.b_t0), T::lit(config.b_f0));
        let f_hat = smooth_nonadaptive(raw, bt, bf, grid)?.into_values();
        let n_hat = weight_sum_plane(grid, bt, bf)?;
        let b_eff = n_hat.iter().map(|&n| Self::effective_bandwidth(n, n, bt, bf)).collect();
        let n = grid.n_points();
        Ok(Self { grid: grid.clone(), f_hat, n_hat, b_eff, theta: vec![T::zero(); n], neg_flag: vec![false; n] })
    }

    pub fn estimate(&self) -> Plane<T> {
        Plane::new(self.grid.clone(), self.f_hat.clone()).expect("state planes match their grid")
    }
}

/// Output of the penalty step: the penalized estimate and its weight sum,
/// with the search window each point used and that window's unpenalized
/// weight sum.
#[derive(Clone, Debug, PartialEq)]
pub struct Aux<T> {
    pub f_tilde: Vec<T>,
    pub n_tilde: Vec<T>,
    pub n_free: Vec<T>,
    pub b_t: Vec<T>,
    pub b_f: Vec<T>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    None,
    GrowthStall,
    BiasDispersion,
    HardCap,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IterationDiagnostics {
    pub k: usize,
    pub mean_growth: f64,
    /// `(Q25, Q75)` of the per-point growth `N^(k) / N^(k-1)`.
    pub growth_quantiles: (f64, f64),
    /// `(min, Q25, Q50, Q75, max)` of the effective bandwidth.
    pub b_eff_quantiles: [f64; 5],
    pub count_negative: usize,
    pub count_full_memory: usize,
    /// Points whose penalized window was empty and carried their state over.
    pub count_separated: usize,
    pub b_star: (f64, f64),
    pub b_sstar: (f64, f64),
    pub stop_reason: StopReason,
}

/// State planes after one iteration (or the initial estimate).
#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot<T> {
    pub f_hat: Vec<T>,
    pub n_hat: Vec<T>,
    pub b_eff: Vec<T>,
    pub theta: Vec<T>,
    pub neg_flag: Vec<bool>,
    /// Penalty-step output of this iteration; absent for the initial snapshot.
    pub aux: Option<Aux<T>>,
}

#[derive(Clone, Debug)]
pub struct RunResult<T> {
    pub estimate: Plane<T>,
    pub state: AdaptiveState<T>,
    /// Initial snapshot followed by one per iteration; empty unless
    /// `keep_history` is set.
    pub history: Vec<Snapshot<T>>,
    pub diagnostics: Vec<IterationDiagnostics>,
    pub config: EstimatorConfig,
    /// Wall-clock seconds per iteration.
    pub timings: Vec<f64>,
}

impl<T: Real> RunResult<T> {
    pub fn iterations(&self) -> usize {
        self.diagnostics.len()
    }

    /// Final search bandwidths per point, i.e. those the next iteration
    /// would use.
    pub fn final_search_bandwidths(&self) -> (Vec<T>, Vec<T>) {
        self.state
            .b_eff
            .iter()
            .zip(&self.state.neg_flag)
            .map(|(&b, &neg)| search_bandwidths(b, neg, &self.config))
            .unzip()
    }

    /// Search bandwidths used in the last completed iteration.
    pub fn last_search_bandwidths(&self) -> Option<(Vec<T>, Vec<T>)> {
        let aux = self.history.last()?.aux.as_ref()?;
        Some((aux.b_t.clone(), aux.b_f.clone()))
    }
}

fn snapshot<T: Real>(s: &AdaptiveState<T>, aux: Option<Aux<T>>) -> Snapshot<T> {
    Snapshot {
        f_hat: s.f_hat.clone(),
        n_hat: s.n_hat.clone(),
        b_eff: s.b_eff.clone(),
        theta: s.theta.clone(),
        neg_flag: s.neg_flag.clone(),
        aux,
    }
}

/// Runs the adaptive procedure on a raw plane until the stopping rule fires.
pub fn run_adaptive<T: Real>(raw: &RawPlane<T>, config: &EstimatorConfig) -> Result<RunResult<T>> {
    let len = raw.grid().len();
    config.validate(len)?;
    let consts = config.kernel_constants::<T>()?;
    let grid = EstGrid::new(raw.grid(), config.d_t, config.d_f)?;
    let unfolded = raw.unfolded();

    let mut state = AdaptiveState::initial(raw, &grid, config)?;
    let beff_q_init = quantile(&state.b_eff, config.q);
    let star0 = (T::lit(config.b_star_t0), T::lit(config.b_star_f0));
    let sstar0 = (T::lit(config.b_sstar_t0), T::lit(config.b_sstar_f0));

    let mut history = Vec::new();
    if config.keep_history {
        history.push(snapshot(&state, None));
    }
    let mut diagnostics = Vec::new();
    let mut timings = Vec::new();
    let mut n_ref = state.n_hat.clone();

    for k in 0.. {
        let start = Instant::now();
        let beff_q_prev = quantile(&state.b_eff, config.q);
        let b_star = shrink_box(len, star0, beff_q_init, beff_q_prev);
        let b_sstar = shrink_box(len, sstar0, beff_q_init, beff_q_prev);
        let stats = BoxStats::new(&state.estimate());
        let bar_pen = stats.plane(b_star.0, b_star.1);
        let bar_mem = if b_sstar == b_star { bar_pen.clone() } else { stats.plane(b_sstar.0, b_sstar.1) };

        let inputs = steps::PenaltyInputs { raw: &unfolded, prev: &state, n_ref: &n_ref, bar_f: &bar_pen };
        let (aux, separated) = steps::penalty_step_inner(&inputs, config, &consts, k);
        let next = memory_step(&aux, &state, config, k, &bar_mem)?;

        let growth: Vec<T> = next.n_hat.iter().zip(&state.n_hat).map(|(&a, &b)| a / b).collect();
        let stop_reason = stopping_check(&growth, &next.b_eff, config, len, k);
        let d = IterationDiagnostics {
            k,
            mean_growth: growth.iter().map(|g| g.to_f64_lossy()).sum::<f64>() / growth.len() as f64,
            growth_quantiles: (quantile(&growth, 0.25).to_f64_lossy(), quantile(&growth, 0.75).to_f64_lossy()),
            b_eff_quantiles: [0.0, 0.25, 0.5, 0.75, 1.0].map(|q| quantile(&next.b_eff, q).to_f64_lossy()),
            count_negative: next.f_hat.iter().filter(|&&f| f < T::zero()).count(),
            count_full_memory: next.theta.iter().filter(|&&t| t == T::one()).count(),
            count_separated: separated,
            b_star: (b_star.0.to_f64_lossy(), b_star.1.to_f64_lossy()),
            b_sstar: (b_sstar.0.to_f64_lossy(), b_sstar.1.to_f64_lossy()),
            stop_reason,
        };
        log::info!(
            "iteration {k}: mean growth {:.4}, median b_eff {:.4}, {} negative, {} full memory, stop {:?}",
            d.mean_growth,
            d.b_eff_quantiles[2],
            d.count_negative,
            d.count_full_memory,
            stop_reason
        );
        diagnostics.push(d);
        n_ref = aux.n_tilde.clone();
        if config.keep_history {
            history.push(snapshot(&next, Some(aux)));
        }
        state = next;
        timings.push(start.elapsed().as_secs_f64());
        if stop_reason != StopReason::None {
            break;
        }
    }

    Ok(RunResult { estimate: state.estimate(), state, history, diagnostics, config: config.clone(), timings })
}
