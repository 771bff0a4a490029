use super::{search_bandwidths, BoxStats, RunResult};
use crate::error::{Error, Result};
use crate::grid::{fold_freq, Plane, RawPlane};
use crate::kernels::penalty_with_cutoff;
use crate::smoother::{clip_rows, freq_weights, time_weights};
use crate::Real;

use super::steps::statistic_coefficient;

/// Final adaptive weights of one grid point over the raw plane, folded onto
/// stored frequencies, with the penalty statistic of the last iteration.
#[derive(Clone, Debug)]
pub struct KernelMap<T> {
    /// Estimation-grid indices of the point.
    pub point: (usize, usize),
    pub u: T,
    pub lambda: T,
    pub weights: RawPlane<T>,
    /// Penalty statistic of the last iteration; NaN outside its search window.
    pub penalty: RawPlane<T>,
    /// Stored effective weight sum and estimate at the point.
    pub n_hat: T,
    pub f_hat: T,
}

impl<T: Real> KernelMap<T> {
    pub fn weight_sum(&self) -> T {
        self.weights.values().iter().copied().sum()
    }

    /// Weighted average of `raw` under the reconstructed weights.
    pub fn apply(&self, raw: &RawPlane<T>) -> T {
        let num: T = self.weights.values().iter().zip(raw.values()).map(|(&w, &j)| w * j).sum();
        num / self.weight_sum()
    }
}

/// Window weights of a product kernel centred on raw point `(ic, jc)`,
/// folded onto the stored half-plane and scaled by `f(row, m)`.
fn accumulate<T: Real>(
    out: &mut [T],
    n_rows: usize,
    len: usize,
    (ic, jc): (usize, usize),
    (bt, bf): (T, T),
    mut f: impl FnMut(usize, isize) -> T,
) {
    let (ht, kt) = time_weights(bt, len);
    let (hf, kf) = freq_weights(bf, len);
    let (lo, hi, off) = clip_rows(ic, ht, n_rows);
    let nf = len + 1;
    for r in lo..=hi {
        let wt = kt[off + r - lo];
        for (c, &wf) in kf.iter().enumerate() {
            let m = jc as isize + c as isize - hf as isize;
            out[r * nf + fold_freq(m, len)] = out[r * nf + fold_freq(m, len)] + wt * wf * f(r, m);
        }
    }
}

/// Replays the weight recursion of a run for the grid point nearest to
/// `(u, lambda)`.
pub fn reconstruct_kernel<T: Real>(result: &RunResult<T>, raw: &RawPlane<T>, u: f64, lambda: f64) -> Result<KernelMap<T>> {
    let history = &result.history;
    if history.len() != result.diagnostics.len() + 1 {
        return Err(Error::Unavailable("run was made without keep_history".into()));
    }
    let grid = &result.state.grid;
    let rg = raw.grid();
    if grid.raw() != rg {
        return Err(Error::GridMismatch("raw plane does not match the run".into()));
    }
    let config = &result.config;
    let consts = config.kernel_constants::<T>()?;
    let len = rg.len();
    let (n_rows, nf_raw) = (rg.n_times(), rg.n_freqs());
    let (a, b) = grid.nearest_point(u, lambda);
    let p = grid.index(a, b);
    let centre = (grid.raw_time(a), grid.raw_freq(b));

    let mut w = vec![T::zero(); rg.n_points()];
    accumulate(&mut w, n_rows, len, centre, (T::lit(config.b_t0), T::lit(config.b_f0)), |_, _| T::one());
    let mut penalty = vec![T::nan(); rg.n_points()];

    let nf = grid.n_freqs();
    for (k, diag) in result.diagnostics.iter().enumerate() {
        let prev = &history[k];
        let cur = &history[k + 1];
        let n_ref = if k == 0 { prev.n_hat[p] } else { prev.aux.as_ref().map(|x| x.n_tilde[p]).unwrap_or(prev.n_hat[p]) };
        let prev_plane = Plane::new(grid.clone(), prev.f_hat.clone())?;
        let bar_f = BoxStats::new(&prev_plane).bar_f(a, b, T::lit(diag.b_star.0), T::lit(diag.b_star.1));
        let coef = statistic_coefficient(T::lit(config.penalty_scale), n_ref, bar_f, len, &consts);
        let cutoff = consts.penalty_cutoff(k);
        let bw = search_bandwidths(prev.b_eff[p], prev.neg_flag[p], config);
        let f_p = prev.f_hat[p];
        let last = k + 1 == result.diagnostics.len();

        let mut wt = vec![T::zero(); rg.n_points()];
        accumulate(&mut wt, n_rows, len, centre, bw, |r, m| {
            let fq = prev.f_hat[grid.nearest_time(r) * nf + grid.nearest_freq(fold_freq(m, len))];
            let s = coef * (f_p - fq) * (f_p - fq);
            if last {
                penalty[r * nf_raw + fold_freq(m, len)] = s;
            }
            penalty_with_cutoff(s, cutoff)
        });
        let total: T = wt.iter().copied().sum();
        let theta = cur.theta[p];
        if total > T::zero() && theta < T::one() {
            for (x, y) in w.iter_mut().zip(&wt) {
                *x = (T::one() - theta) * *y + theta * *x;
            }
        }
    }

    let last = history.last().expect("history is nonempty");
    Ok(KernelMap {
        point: (a, b),
        u: grid.u(a),
        lambda: grid.lambda(b),
        weights: RawPlane::new(rg, w)?,
        penalty: RawPlane::new(rg, penalty)?,
        n_hat: last.n_hat[p],
        f_hat: last.f_hat[p],
    })
}
