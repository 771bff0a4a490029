use rayon::prelude::*;

use super::{AdaptiveState, Aux, EstimatorConfig, StopReason};
use crate::error::{Error, Result};
use crate::eval::quantile;
use crate::grid::{fold_freq, EstGrid, RawPlane, Unfolded};
use crate::kernels::{kernel_memory, penalty_with_cutoff, KernelConstants};
use crate::smoother::{clip_rows, dot, freq_weights, time_weights};
use crate::Real;

/// `scale * n / (2 pi kappa_t kappa_f T) * ((f1 - f2) / bar_f)^2`, the
/// common form of the penalty and memory statistics.
pub fn penalty_statistic<T: Real>(
    scale: T,
    n: T,
    f1: T,
    f2: T,
    bar_f: T,
    len: usize,
    consts: &KernelConstants<T>,
) -> T {
    let d = f1 - f2;
    statistic_coefficient(scale, n, bar_f, len, consts) * d * d
}

/// Factor `c` such that a statistic equals `c * (f1 - f2)^2`.
#[inline]
pub(crate) fn statistic_coefficient<T: Real>(scale: T, n: T, bar_f: T, len: usize, consts: &KernelConstants<T>) -> T {
    let two_pi = T::PI() + T::PI();
    scale * n / (two_pi * consts.kappa_t * consts.kappa_f * T::from_usize_lossy(len) * bar_f * bar_f)
}

/// Memory statistic of the auxiliary update against the previous estimate,
/// normalized by the candidate effective weight sum `n_cand`.
pub fn memory_statistic<T: Real>(
    scale: T,
    n_cand: T,
    f_tilde: T,
    f_prev: T,
    bar_f: T,
    len: usize,
    consts: &KernelConstants<T>,
) -> T {
    penalty_statistic(scale, n_cand, f_tilde, f_prev, bar_f, len, consts)
}

/// Search bandwidths grown from the effective bandwidth, at the slow rate
/// `rho` for points in the negative-value regime.
pub fn search_bandwidths<T: Real>(b_eff: T, neg_flag: bool, config: &EstimatorConfig) -> (T, T) {
    let (gt, gf) = if neg_flag { (config.rho, config.rho) } else { (config.gamma_t, config.gamma_f) };
    let two_pi = T::PI() + T::PI();
    ((b_eff * T::lit(gt)).min(T::one()), (two_pi * b_eff * T::lit(gf)).min(two_pi))
}

/// Previous estimates laid out like the unfolded raw plane: entry
/// `(a, c)` holds the estimate at grid row `a` and the grid column nearest
/// to raw frequency `c - T` folded onto `[0, T]`.
pub(crate) struct ExtendedEstimate<T> {
    len: usize,
    width: usize,
    values: Vec<T>,
}

impl<T: Real> ExtendedEstimate<T> {
    pub fn new(grid: &EstGrid, f: &[T]) -> Self {
        let len = grid.raw().len();
        let width = 3 * len + 1;
        let cols: Vec<usize> = (0..width).map(|c| grid.nearest_freq(fold_freq(c as isize - len as isize, len))).collect();
        let nf = grid.n_freqs();
        let mut values = Vec::with_capacity(grid.n_times() * width);
        for a in 0..grid.n_times() {
            values.extend(cols.iter().map(|&b| f[a * nf + b]));
        }
        Self { len, width, values }
    }

    #[inline]
    pub fn window(&self, a: usize, center: usize, half: usize) -> &[T] {
        let start = a * self.width + self.len + center - half;
        &self.values[start..start + 2 * half + 1]
    }
}

pub(crate) struct PenaltyInputs<'a, T> {
    pub raw: &'a Unfolded<T>,
    pub prev: &'a AdaptiveState<T>,
    pub n_ref: &'a [T],
    pub bar_f: &'a [T],
}

struct PointSums<T> {
    num: T,
    den: T,
    free: T,
    b_t: T,
    b_f: T,
}

/// Penalized sums `sum w J` and `sum w` for one grid point, plus the
/// unpenalized weight sum of its search window.
fn penalized_sums<T: Real>(
    inp: &PenaltyInputs<'_, T>,
    ext: &ExtendedEstimate<T>,
    config: &EstimatorConfig,
    consts: &KernelConstants<T>,
    k: usize,
    p: usize,
    v: &mut Vec<T>,
) -> PointSums<T> {
    let grid = &inp.prev.grid;
    let len = grid.raw().len();
    let n_rows = grid.raw().n_times();
    let nf = grid.n_freqs();
    let (a, b) = (p / nf, p % nf);
    let (bt, bf) = search_bandwidths(inp.prev.b_eff[p], inp.prev.neg_flag[p], config);
    let (ht, kt) = time_weights(bt, len);
    let (hf, kf) = freq_weights(bf, len);
    let coef = statistic_coefficient(T::lit(config.penalty_scale), inp.n_ref[p], inp.bar_f[p], len, consts);
    let cutoff = consts.penalty_cutoff(k);
    let f_p = inp.prev.f_hat[p];
    let (ic, jc) = (grid.raw_time(a), grid.raw_freq(b));
    let (lo, hi, off) = clip_rows(ic, ht, n_rows);
    let free = kt[off..off + hi - lo + 1].iter().copied().sum::<T>() * kf.iter().copied().sum::<T>();

    v.clear();
    v.resize(kf.len(), T::zero());
    let (mut num, mut den) = (T::zero(), T::zero());
    let mut r = lo;
    while r <= hi {
        // raw rows sharing one nearest grid row share the penalty values
        let g = grid.nearest_time(r);
        let mut end = r;
        while end < hi && grid.nearest_time(end + 1) == g {
            end += 1;
        }
        let fs = ext.window(g, jc, hf);
        let mut sv = T::zero();
        for ((vc, &kc), &fq) in v.iter_mut().zip(&kf).zip(fs) {
            let d = f_p - fq;
            let w = kc * penalty_with_cutoff(coef * d * d, cutoff);
            *vc = w;
            sv = sv + w;
        }
        if sv > T::zero() {
            for rr in r..=end {
                let wt = kt[off + rr - lo];
                if wt > T::zero() {
                    num = num + wt * dot(v, inp.raw.window(rr, jc, hf));
                    den = den + wt * sv;
                }
            }
        }
        r = end + 1;
    }
    PointSums { num, den, free, b_t: bt, b_f: bf }
}

pub(crate) fn penalty_step_inner<T: Real>(
    inp: &PenaltyInputs<'_, T>,
    config: &EstimatorConfig,
    consts: &KernelConstants<T>,
    k: usize,
) -> (Aux<T>, usize) {
    let ext = ExtendedEstimate::new(&inp.prev.grid, &inp.prev.f_hat);
    let n = inp.prev.grid.n_points();
    let sums: Vec<PointSums<T>> = (0..n)
        .into_par_iter()
        .map_init(Vec::new, |v, p| penalized_sums(inp, &ext, config, consts, k, p, v))
        .collect();
    let mut aux = Aux {
        f_tilde: Vec::with_capacity(n),
        n_tilde: Vec::with_capacity(n),
        n_free: Vec::with_capacity(n),
        b_t: Vec::with_capacity(n),
        b_f: Vec::with_capacity(n),
    };
    let mut separated = 0;
    for (p, s) in sums.into_iter().enumerate() {
        aux.n_free.push(s.free);
        aux.b_t.push(s.b_t);
        aux.b_f.push(s.b_f);
        if s.den > T::zero() {
            aux.f_tilde.push(s.num / s.den);
            aux.n_tilde.push(s.den);
        } else {
            aux.f_tilde.push(inp.prev.f_hat[p]);
            aux.n_tilde.push(inp.prev.n_hat[p]);
            separated += 1;
        }
    }
    (aux, separated)
}

/// Penalized auxiliary estimate at iteration `k`. `n_ref` is the weight sum
/// entering the penalty statistic and `bar_f` the denominator plane of the
/// previous estimate, both per grid point.
pub fn penalty_step<T: Real>(
    prev: &AdaptiveState<T>,
    raw: &RawPlane<T>,
    config: &EstimatorConfig,
    k: usize,
    n_ref: &[T],
    bar_f: &[T],
) -> Result<Aux<T>> {
    let n = prev.grid.n_points();
    if prev.grid.raw() != raw.grid() || n_ref.len() != n || bar_f.len() != n {
        return Err(Error::GridMismatch("penalty step inputs do not share one grid".into()));
    }
    let consts = config.kernel_constants()?;
    let unfolded = raw.unfolded();
    let inp = PenaltyInputs { raw: &unfolded, prev, n_ref, bar_f };
    Ok(penalty_step_inner(&inp, config, &consts, k).0)
}

/// Combines the auxiliary estimate with the previous state.
#[allow(clippy::needless_range_loop)]
pub fn memory_step<T: Real>(
    aux: &Aux<T>,
    prev: &AdaptiveState<T>,
    config: &EstimatorConfig,
    k: usize,
    bar_f: &[T],
) -> Result<AdaptiveState<T>> {
    let n = prev.grid.n_points();
    if [aux.f_tilde.len(), aux.n_tilde.len(), aux.n_free.len(), aux.b_t.len(), aux.b_f.len(), bar_f.len()]
        .iter()
        .any(|&l| l != n)
    {
        return Err(Error::GridMismatch("memory step inputs do not share one grid".into()));
    }
    let consts = config.kernel_constants::<T>()?;
    let len = prev.grid.raw().len();
    let eta = T::lit(config.eta);
    let scale = T::lit(config.penalty_scale);
    let mut next = prev.clone();
    for p in 0..n {
        let (ft, nt) = (aux.f_tilde[p], aux.n_tilde[p]);
        let (fp, np) = (prev.f_hat[p], prev.n_hat[p]);
        let forced = ft < T::zero() && ft < fp;
        let theta = if forced {
            T::one()
        } else {
            let n_cand = (T::one() - eta) * nt + eta * np;
            let s = memory_statistic(scale, n_cand, ft, fp, bar_f[p], len, &consts);
            T::one() - (T::one() - eta) * kernel_memory(s, k, &consts)
        };
        next.theta[p] = theta;
        if theta == T::one() {
            next.f_hat[p] = fp;
            next.n_hat[p] = np;
        } else if theta == T::zero() {
            next.f_hat[p] = ft;
            next.n_hat[p] = nt;
        } else {
            let nn = (T::one() - theta) * nt + theta * np;
            next.f_hat[p] = ((T::one() - theta) * nt * ft + theta * np * fp) / nn;
            next.n_hat[p] = nn;
        }
        if theta < T::one() {
            next.b_eff[p] = AdaptiveState::effective_bandwidth(next.n_hat[p], aux.n_free[p], aux.b_t[p], aux.b_f[p]);
        }
        if forced {
            next.neg_flag[p] = true;
        } else if next.f_hat[p] >= T::zero() {
            next.neg_flag[p] = false;
        }
    }
    Ok(next)
}

/// Stopping decision after iteration `k` from the per-point growth factors
/// `N^(k) / N^(k-1)` and the current effective bandwidths.
pub fn stopping_check<T: Real>(growth: &[T], b_eff: &[T], config: &EstimatorConfig, len: usize, k: usize) -> StopReason {
    let gg = config.gamma_t * config.gamma_f;
    let mean = growth.iter().map(|g| g.to_f64_lossy()).sum::<f64>() / growth.len() as f64;
    if mean <= gg.powf(0.25) {
        return StopReason::GrowthStall;
    }
    let min_b = b_eff.iter().map(|b| b.to_f64_lossy()).fold(f64::INFINITY, f64::min);
    if min_b >= (len as f64).powf(config.bias_exponent) {
        let spread = quantile(growth, 0.75).to_f64_lossy() - quantile(growth, 0.25).to_f64_lossy();
        if spread > 0.1 * gg {
            return StopReason::BiasDispersion;
        }
    }
    if k + 1 >= config.k_hard {
        return StopReason::HardCap;
    }
    StopReason::None
}
