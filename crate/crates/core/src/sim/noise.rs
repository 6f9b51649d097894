use std::collections::VecDeque;
use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};

use crate::dynamics::{fmt_sig17, last_index_at_or_before, StepSchedule};
use crate::error::{domain, Result};
use crate::game::{mfp_kernel, MarkovKernel, Player};
use crate::sim::config::MfpConfig;
use crate::sim::run::{NoiseSeq, RunRecord};
use crate::stats::Proportion;

fn full_noise(noise: &NoiseSeq) -> Result<()> {
    if !noise.is_full() {
        return domain("Δ(n,T) needs the full noise sequence, not a thinned one");
    }
    Ok(())
}

/// Last summation index `m(τ_n + T)` of the window after step `n`, or
/// `None` when it lies beyond the `len` available noise terms.
fn window_end(times: &[f64], schedule: &StepSchedule, n: usize, horizon: f64) -> Option<usize> {
    let len = times.len() - 1;
    let t = times[n] + horizon;
    let m = last_index_at_or_before(times, t).unwrap_or(0);
    if m == len && times[len] + schedule.gamma(len + 1) <= t {
        return None;
    }
    Some(m)
}

fn window_sup(noise: &NoiseSeq, schedule: &StepSchedule, n: usize, end: usize) -> f64 {
    let mut acc = vec![0.0; noise.dim()];
    let mut sup = 0.0f64;
    for i in n..end {
        let g = schedule.gamma(i + 1);
        for (a, u) in acc.iter_mut().zip(noise.row(i)) {
            *a += g * u;
        }
        sup = sup.max(acc.iter().fold(0.0, |m, v| m.max(v.abs())));
    }
    sup
}

/// `Δ(n,T) = sup_{n<k≤m(τ_n+T)} ‖Σ_{i=n}^{k−1} γ_{i+1} U_{i+1}‖_∞` by direct
/// summation; `noise.row(i)` is `U_{i+1}`.
pub fn delta_stat(noise: &NoiseSeq, schedule: &StepSchedule, n: usize, horizon: f64) -> Result<f64> {
    full_noise(noise)?;
    if n >= noise.len() {
        return domain(format!("no noise after step {n}"));
    }
    let times = schedule.times(noise.len());
    match window_end(&times, schedule, n, horizon) {
        Some(end) => Ok(window_sup(noise, schedule, n, end)),
        None => domain(format!(
            "window [τ_{n}, τ_{n} + {horizon}] runs past the {} recorded noise terms",
            noise.len()
        )),
    }
}

/// [`delta_stat`] with the window clipped at the end of the sequence.
pub fn delta_stat_truncated(
    noise: &NoiseSeq,
    schedule: &StepSchedule,
    n: usize,
    horizon: f64,
) -> Result<f64> {
    full_noise(noise)?;
    if n >= noise.len() {
        return domain(format!("no noise after step {n}"));
    }
    let times = schedule.times(noise.len());
    let end = window_end(&times, schedule, n, horizon).unwrap_or(noise.len());
    Ok(window_sup(noise, schedule, n, end))
}

/// Truncated `Δ(m,T)` for every `m = 0..len`, in linear time: with prefix
/// sums `S_k`, `Δ(m,T) = max_k ‖S_k − S_m‖_∞` over a window whose two ends
/// only move forward, so per-coordinate monotone deques give the extremes.
pub fn delta_profile(noise: &NoiseSeq, schedule: &StepSchedule, horizon: f64) -> Result<Vec<f64>> {
    full_noise(noise)?;
    let len = noise.len();
    let d = noise.dim();
    let times = schedule.times(len);
    let mut prefix = vec![0.0; (len + 1) * d];
    for k in 1..=len {
        let g = schedule.gamma(k);
        for c in 0..d {
            prefix[k * d + c] = prefix[(k - 1) * d + c] + g * noise.row(k - 1)[c];
        }
    }
    let s = |k: usize, c: usize| prefix[k * d + c];
    let mut hi: Vec<VecDeque<usize>> = vec![VecDeque::new(); d];
    let mut lo: Vec<VecDeque<usize>> = vec![VecDeque::new(); d];
    let mut pushed = 0;
    let mut out = Vec::with_capacity(len);
    for m in 0..len {
        let end = window_end(&times, schedule, m, horizon).unwrap_or(len);
        while pushed < end {
            pushed += 1;
            for c in 0..d {
                let v = s(pushed, c);
                while hi[c].back().is_some_and(|&k| s(k, c) <= v) {
                    hi[c].pop_back();
                }
                hi[c].push_back(pushed);
                while lo[c].back().is_some_and(|&k| s(k, c) >= v) {
                    lo[c].pop_back();
                }
                lo[c].push_back(pushed);
            }
        }
        let mut sup = 0.0f64;
        for c in 0..d {
            while hi[c].front().is_some_and(|&k| k <= m) {
                hi[c].pop_front();
            }
            while lo[c].front().is_some_and(|&k| k <= m) {
                lo[c].pop_front();
            }
            let base = s(m, c);
            if let (Some(&a), Some(&b)) = (hi[c].front(), lo[c].front()) {
                sup = sup.max((s(a, c) - base).abs()).max((s(b, c) - base).abs());
            }
        }
        out.push(sup);
    }
    Ok(out)
}

/// Largest `m` with truncated `Δ(m,T) ≥ eps`.
pub fn last_exceedance(
    noise: &NoiseSeq,
    schedule: &StepSchedule,
    horizon: f64,
    eps: f64,
) -> Result<Option<usize>> {
    Ok(delta_profile(noise, schedule, horizon)?
        .iter()
        .rposition(|&v| v >= eps))
}

/// One line of the tail table: the replica frequency of
/// `sup_{n≤m≤N} Δ(m,T) ≥ ε`, the sup truncated at the horizon `N`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailRow {
    pub n: usize,
    pub estimate: Proportion,
    pub truncated_at: usize,
}

/// Tail table from per-replica last exceedances.
pub fn tail_from_exceedances(last: &[Option<usize>], n_grid: &[usize], horizon_n: usize) -> Vec<TailRow> {
    n_grid
        .iter()
        .map(|&n| {
            let hits = last.iter().filter(|l| l.is_some_and(|m| m >= n)).count();
            TailRow {
                n,
                estimate: Proportion::new(hits, last.len()),
                truncated_at: horizon_n,
            }
        })
        .collect()
}

/// Unconditional replica estimate of `P(sup_{m≥n} Δ(m,T) ≥ ε)` for each `n`
/// in `n_grid`, with `γ_n = 1/n`.
pub fn tail_probability(
    records: &[RunRecord],
    n_grid: &[usize],
    eps: f64,
    horizon: f64,
) -> Result<Vec<TailRow>> {
    if records.len() < 30 {
        return domain(format!("tail estimate needs at least 30 replicas, got {}", records.len()));
    }
    let schedule = StepSchedule::harmonic();
    let mut last = Vec::with_capacity(records.len());
    let mut len = usize::MAX;
    for r in records {
        let Some(noise) = &r.noise else {
            return domain(format!("replica {} has no recorded noise", r.replica));
        };
        len = len.min(noise.len());
        last.push(last_exceedance(noise, &schedule, horizon, eps)?);
    }
    if let Some(&n) = n_grid.iter().find(|&&n| n >= len) {
        return domain(format!("grid point {n} is past the horizon {len}"));
    }
    Ok(tail_from_exceedances(&last, n_grid, len))
}

/// One row per step `n` of the noise decomposition; norms are `∞`-norms of
/// vectors and row-sum norms of matrices, maximized over the two players.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseRow {
    pub n: usize,
    pub delta_stat: f64,
    pub q_norm: f64,
    pub d_pi: f64,
    pub d_q: f64,
    /// `|Q_n|² log n / n`.
    pub q_rate: f64,
    pub zeta_norm: f64,
    pub martingale_norm: f64,
    pub remainder_norm: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseDiagnostics {
    /// Rows for `n = 1..N`.
    pub rows: Vec<NoiseRow>,
    /// `ζ_{n+1} = δ_{X_{n+1}}(I − Π_n)` for both players, `n = 0..N`.
    pub zeta: NoiseSeq,
    /// `δ_{X_{n+1}} Q_n − δ_{X_n} M_n Q_n`, same layout.
    pub martingale: NoiseSeq,
    /// `δ_{X_n} M_n Q_n − δ_{X_{n+1}} M_n Q_n`, same layout.
    pub remainder: NoiseSeq,
    /// `max ‖martingale + remainder − ζ‖_∞`.
    pub identity_error: f64,
}

impl NoiseDiagnostics {
    /// CSV `n,delta_stat,Q_norm,dPi,dQ`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,delta_stat,Q_norm,dPi,dQ\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                r.n,
                fmt_sig17(r.delta_stat),
                fmt_sig17(r.q_norm),
                fmt_sig17(r.d_pi),
                fmt_sig17(r.d_q)
            );
        }
        out
    }
}

fn row_sum_norm(m: &DMatrix<f64>) -> f64 {
    m.row_iter()
        .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Kernels of both players at step `n` against the empirical mixes.
fn kernels_at(cfg: &MfpConfig, n: usize, mix: &[Vec<f64>; 2]) -> Result<[MarkovKernel; 2]> {
    let k = |p: usize, player| {
        mfp_kernel(
            &cfg.exploration[p],
            cfg.beta[p].beta(n),
            &cfg.game.own_payoffs(player),
            &mix[1 - p],
        )
    };
    Ok([k(0, Player::One)?, k(1, Player::Two)?])
}

/// Poisson-equation split of the MFP noise, rebuilt from the recorded
/// actions: `ζ_{n+1} = (δ_{X_{n+1}} Q_n − δ_{X_n} M_n Q_n) + (δ_{X_n} M_n Q_n −
/// δ_{X_{n+1}} M_n Q_n)`, with the kernel drift terms and `Δ(n,T)` alongside.
pub fn noise_decomposition(record: &RunRecord, cfg: &MfpConfig, horizon: f64) -> Result<NoiseDiagnostics> {
    let Some(actions) = &record.actions else {
        return domain("noise decomposition needs every action; rerun with actions retained");
    };
    if actions.len() < 3 {
        return domain("noise decomposition needs at least two steps");
    }
    let steps = actions.len() - 1;
    let (m1, m2) = cfg.game.actions();
    let dim = m1 + m2;
    let sizes = [m1, m2];
    let mut counts = [vec![0u64; m1], vec![0u64; m2]];
    let mut mix = [vec![1.0 / m1 as f64; m1], vec![1.0 / m2 as f64; m2]];
    let mut kernels = kernels_at(cfg, 0, &mix)?;
    let mut zeta = Vec::with_capacity(steps * dim);
    let mut mart = Vec::with_capacity(steps * dim);
    let mut rem = Vec::with_capacity(steps * dim);
    let mut partial = Vec::with_capacity(steps);
    let mut identity_error = 0.0f64;
    for n in 0..steps {
        let (cur, next) = (actions[n], actions[n + 1]);
        let cur = [cur.0, cur.1];
        let next_a = [next.0, next.1];
        let (mut zn, mut mn, mut rn) = (0.0f64, 0.0f64, 0.0f64);
        for p in 0..2 {
            let k = &kernels[p];
            let mq = &k.m * &k.q;
            for j in 0..sizes[p] {
                let z = f64::from(u8::from(j == next_a[p])) - k.pi[j];
                let a = k.q[(next_a[p], j)] - mq[(cur[p], j)];
                let b = mq[(cur[p], j)] - mq[(next_a[p], j)];
                identity_error = identity_error.max((a + b - z).abs());
                zn = zn.max(z.abs());
                mn = mn.max(a.abs());
                rn = rn.max(b.abs());
                zeta.push(z);
                mart.push(a);
                rem.push(b);
            }
        }
        // move to step n + 1
        let m = n + 1;
        for p in 0..2 {
            counts[p][next_a[p]] += 1;
            for (x, &c) in mix[p].iter_mut().zip(&counts[p]) {
                *x = c as f64 / m as f64;
            }
        }
        let following = kernels_at(cfg, m, &mix)?;
        let mut q_norm = 0.0f64;
        let mut d_pi = 0.0f64;
        let mut d_q = 0.0f64;
        for p in 0..2 {
            q_norm = q_norm.max(row_sum_norm(&kernels[p].q));
            let dp: DVector<f64> = &following[p].pi - &kernels[p].pi;
            d_pi = d_pi.max(dp.iter().map(|v| v.abs()).sum());
            d_q = d_q.max(row_sum_norm(&(&following[p].q - &kernels[p].q)));
        }
        let q_rate = if n >= 1 {
            q_norm * q_norm * (n as f64).ln() / n as f64
        } else {
            0.0
        };
        partial.push(NoiseRow {
            n,
            delta_stat: 0.0,
            q_norm,
            d_pi,
            d_q,
            q_rate,
            zeta_norm: zn,
            martingale_norm: mn,
            remainder_norm: rn,
        });
        kernels = following;
    }
    let zeta = NoiseSeq::full(dim, zeta)?;
    let profile = delta_profile(&zeta, &StepSchedule::harmonic(), horizon)?;
    let rows = partial
        .into_iter()
        .skip(1)
        .map(|mut r| {
            r.delta_stat = profile[r.n];
            r
        })
        .collect();
    // the recorded noise, when present, is the same sequence
    if let Some(u) = &record.noise {
        if u.is_full() && u.len() == zeta.len() {
            for j in 0..u.len() {
                let gap = u
                    .row(j)
                    .iter()
                    .zip(zeta.row(j))
                    .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
                if gap > 1e-9 {
                    return Err(crate::Error::Numerical(format!(
                        "recorded noise disagrees with the rebuilt one at step {} ({gap:e})",
                        j + 1
                    )));
                }
            }
        }
    }
    Ok(NoiseDiagnostics {
        rows,
        zeta,
        martingale: NoiseSeq::full(dim, mart)?,
        remainder: NoiseSeq::full(dim, rem)?,
        identity_error,
    })
}
