//! Packing lower bounds for the unitary orbit of a selfadjoint matrix with eigenvalues `a`.
//!
//! The operator-norm tube `{u diag(s) u* : |s_j - a_j| <= eps}` lies inside the `|.|_2`
//! `eps`-neighbourhood of the orbit, and its volume is `c_k I(eps)` with
//! `I(eps) = int_{sorted s, |s - a|_inf <= eps} Delta(s)^2 ds`. A maximal `2 eps`-separated
//! subset of the orbit has `eps`-neighbourhood inside the union of its `3 eps`-balls, so
//! `P_eps >= c_k I(eps) / V_{k^2}(3 eps)`.
//!
//! Ratios `I(eps') / I(eps)` come from nested sampling under the `Delta^2` density; one
//! absolute value at the smallest scale comes from importance sampling.

use rand::Rng as _;
use rayon::prelude::*;
use serde::Serialize;
use statrs::function::gamma::digamma;

use super::entropy::log_sum_exp;
use crate::error::{Error, Result};
use crate::matrixcore::log_ball_volume;
use crate::rmtformulas::weyl_volume_constant_log;
use crate::rng;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct NestedSamplingOptions {
    pub walkers: usize,
    pub sweeps: usize,
    pub burn_in: usize,
    pub anchor_samples: usize,
    pub seed: u64,
}

impl Default for NestedSamplingOptions {
    fn default() -> Self {
        NestedSamplingOptions { walkers: 200, sweeps: 4, burn_in: 50, anchor_samples: 4000, seed: 0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OrbitProfile {
    pub k: usize,
    /// Strictly decreasing scales.
    pub eps_grid: Vec<f64>,
    /// `log I(eps)`.
    pub log_tube_integral: Vec<f64>,
    /// Lower bound `log c_k + log I(eps) - log V_{k^2}(3 eps)` for `log P_eps`.
    pub log_packing: Vec<f64>,
    /// `k^-2 log_packing`.
    pub normalized: Vec<f64>,
    pub levels: usize,
    pub singleton: bool,
}

/// Packing lower bounds of the orbit of `diag(a)` over a decreasing scale grid.
pub fn orbit_packing_profile(a: &[f64], eps_grid: &[f64], opts: &NestedSamplingOptions) -> Result<OrbitProfile> {
    let k = a.len();
    if k == 0 {
        return Err(Error::InvalidArgument("no eigenvalues".into()));
    }
    if eps_grid.is_empty() || eps_grid.iter().any(|&e| !(e > 0.0)) || eps_grid.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::DegenerateGrid("scales must be positive and strictly decreasing".into()));
    }
    if opts.walkers < 2 || opts.anchor_samples == 0 {
        return Err(Error::InvalidArgument("need at least two walkers and one anchor sample".into()));
    }
    let mut a = a.to_vec();
    a.sort_by(f64::total_cmp);
    let n = eps_grid.len();
    if a[0] == a[k - 1] {
        return Ok(OrbitProfile {
            k,
            eps_grid: eps_grid.to_vec(),
            log_tube_integral: vec![f64::NAN; n],
            log_packing: vec![0.0; n],
            normalized: vec![0.0; n],
            levels: 0,
            singleton: true,
        });
    }
    let (log_x, levels) = nested_log_ratios(&a, eps_grid, opts);
    let anchor = anchor_log_integral(&a, eps_grid[n - 1], opts);
    let log_tube_integral: Vec<f64> = log_x.iter().map(|&lx| anchor + lx - log_x[n - 1]).collect();
    let ck = weyl_volume_constant_log(k);
    let d = k * k;
    let log_packing: Vec<f64> = log_tube_integral
        .iter()
        .zip(eps_grid)
        .map(|(&li, &e)| ck + li - log_ball_volume(d, 3.0 * e))
        .collect();
    let normalized = log_packing.iter().map(|&l| l / d as f64).collect();
    Ok(OrbitProfile { k, eps_grid: eps_grid.to_vec(), log_tube_integral, log_packing, normalized, levels, singleton: false })
}

fn max_dev(s: &[f64], a: &[f64]) -> f64 {
    s.iter().zip(a).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// `log(Delta(s with s_j := x)^2 / Delta(s)^2)`.
fn log_vandermonde_ratio(s: &[f64], j: usize, x: f64) -> f64 {
    let sj = s[j];
    let mut total = 0.0;
    let mut prod = 1.0;
    let mut count = 0;
    for (i, &si) in s.iter().enumerate() {
        if i == j {
            continue;
        }
        prod *= (x - si) / (sj - si);
        count += 1;
        if count == 8 {
            total += prod.abs().ln();
            prod = 1.0;
            count = 0;
        }
    }
    2.0 * (total + prod.abs().ln())
}

fn sweep(s: &mut [f64], a: &[f64], width: f64, sweeps: usize, r: &mut rng::Rng) {
    let k = s.len();
    for _ in 0..sweeps {
        for j in 0..k {
            let lo = if j > 0 { s[j - 1].max(a[j] - width) } else { a[j] - width };
            let hi = if j + 1 < k { s[j + 1].min(a[j] + width) } else { a[j] + width };
            let x = lo + (hi - lo) * r.random::<f64>();
            let lr = log_vandermonde_ratio(s, j, x);
            if lr >= 0.0 || r.random::<f64>().ln() < lr {
                s[j] = x;
            }
        }
    }
}

/// Returns `log I(eps_i) - log I(eps_0)` for each scale and the number of levels used.
fn nested_log_ratios(a: &[f64], eps_grid: &[f64], opts: &NestedSamplingOptions) -> (Vec<f64>, usize) {
    let w = opts.walkers;
    let seed = opts.seed;
    let emax = eps_grid[0];
    let mut walkers: Vec<Vec<f64>> = (0..w)
        .into_par_iter()
        .map(|i| {
            let mut r = rng::stream(seed, rng::stream_id(&[0, i as u64]));
            let mut s: Vec<f64> = a.iter().map(|&x| x + (r.random::<f64>() - 0.5) * 1e-9 * emax).collect();
            s.sort_by(f64::total_cmp);
            for (x, &y) in s.iter_mut().zip(a) {
                *x = x.clamp(y - emax, y + emax);
            }
            sweep(&mut s, a, emax, opts.burn_in, &mut r);
            s
        })
        .collect();

    let keep = w / 2;
    let order_stat_log = digamma(keep as f64) - digamma((w + 1) as f64);
    let mut out = vec![0.0; eps_grid.len()];
    let mut log_x = 0.0;
    let mut next = 1;
    let mut level = 0u64;
    while next < eps_grid.len() {
        level += 1;
        let e: Vec<f64> = walkers.iter().map(|s| max_dev(s, a)).collect();
        let mut sorted = e.clone();
        sorted.sort_by(f64::total_cmp);
        let median = sorted[keep - 1];
        let target = eps_grid[next];
        let threshold = if median <= target {
            let hits = e.iter().filter(|&&x| x <= target).count();
            log_x += (hits as f64 / w as f64).ln();
            out[next] = log_x;
            next += 1;
            target
        } else {
            log_x += order_stat_log;
            median
        };
        let survivors: Vec<usize> = (0..w).filter(|&i| e[i] <= threshold).collect();
        let mut pick = rng::stream(seed, rng::stream_id(&[level, u64::MAX]));
        let chosen: Vec<usize> = (0..w).map(|_| survivors[pick.random_range(0..survivors.len())]).collect();
        walkers = chosen
            .into_par_iter()
            .enumerate()
            .map(|(i, src)| {
                let mut s = walkers[src].clone();
                let mut r = rng::stream(seed, rng::stream_id(&[level, i as u64]));
                sweep(&mut s, a, threshold, opts.sweeps, &mut r);
                s
            })
            .collect();
    }
    (out, level as usize)
}

/// Importance-sampling estimate of `log I(eps)` with sequential order-statistic proposals.
fn anchor_log_integral(a: &[f64], eps: f64, opts: &NestedSamplingOptions) -> f64 {
    let k = a.len();
    let crowd: Vec<usize> = (0..k).map(|j| a[j..].iter().filter(|&&x| x < a[j] + 2.0 * eps).count()).collect();
    let chunks = 64usize;
    let per = opts.anchor_samples.div_ceil(chunks);
    let logs: Vec<f64> = (0..chunks)
        .into_par_iter()
        .flat_map_iter(|c| {
            let mut r = rng::stream(opts.seed, rng::stream_id(&[0x616e_6368, c as u64]));
            let mut s = vec![0.0; k];
            (0..per)
                .map(|_| {
                    let mut lw = 0.0;
                    let mut prev = f64::NEG_INFINITY;
                    for j in 0..k {
                        let lo = prev.max(a[j] - eps);
                        let hi = a[j] + eps;
                        let len = hi - lo;
                        if !(len > 0.0) {
                            return f64::NEG_INFINITY;
                        }
                        let rr = crowd[j] as f64;
                        let x = lo + len * (1.0 - r.random::<f64>().powf(1.0 / rr));
                        lw += rr * len.ln() - rr.ln() - (rr - 1.0) * (hi - x).ln();
                        s[j] = x;
                        prev = x;
                    }
                    lw + crate::rmtformulas::vandermonde_sq_log(&s)
                })
                .collect::<Vec<f64>>()
        })
        .collect();
    log_sum_exp(&logs) - (logs.len() as f64).ln()
}
