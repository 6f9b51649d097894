use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::dynamics::{fmt_sig17, Trajectory};
use crate::error::{domain, Result};
use crate::game::{gibbs, kernel_row, Player};
use crate::sim::config::{MfpConfig, NoiseRecording};

/// A sequence of noise vectors `U_i`, either every index `1..=len` or a
/// thinned subset.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSeq {
    dim: usize,
    indices: Option<Vec<usize>>,
    values: Vec<f64>,
}

impl NoiseSeq {
    /// `U_1, U_2, ...` stored row-major in `values`.
    pub fn full(dim: usize, values: Vec<f64>) -> Result<Self> {
        if dim == 0 || values.len() % dim != 0 {
            return domain("noise length is not a multiple of the dimension");
        }
        Ok(Self {
            dim,
            indices: None,
            values,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != dim) {
            return domain("noise rows differ in length");
        }
        Self::full(dim, rows.concat())
    }

    pub fn thinned(dim: usize, indices: Vec<usize>, values: Vec<f64>) -> Result<Self> {
        if dim == 0 || values.len() != dim * indices.len() {
            return domain("thinned noise needs one vector per index");
        }
        Ok(Self {
            dim,
            indices: Some(indices),
            values,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of stored vectors.
    pub fn len(&self) -> usize {
        self.values.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.indices.is_none()
    }

    /// Step index of the `j`-th stored vector.
    pub fn index(&self, j: usize) -> usize {
        self.indices.as_ref().map_or(j + 1, |ix| ix[j])
    }

    /// The `j`-th stored vector (`U_{j+1}` for a full sequence).
    pub fn row(&self, j: usize) -> &[f64] {
        &self.values[j * self.dim..(j + 1) * self.dim]
    }
}

/// Output of one replica.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub seed: u64,
    pub replica: usize,
    /// Steps `n` at which `v_n` was recorded.
    pub recorded_n: Vec<usize>,
    /// `v_n` over `τ_n = Σ_{i≤n} 1/i` at the recorded steps.
    pub path: Trajectory,
    pub noise: Option<NoiseSeq>,
    /// `(X_n, Y_n)` for `n = 0..=N`, when requested.
    pub actions: Option<Vec<(usize, usize)>>,
    pub terminal: Vec<f64>,
}

impl RunRecord {
    /// CSV `n,tau,xbar_1..,ybar_1..` of the recorded path.
    pub fn to_csv(&self, m1: usize) -> String {
        let m2 = self.path.dim() - m1;
        let mut out = String::from("n,tau");
        for i in 1..=m1 {
            let _ = write!(out, ",xbar_{i}");
        }
        for i in 1..=m2 {
            let _ = write!(out, ",ybar_{i}");
        }
        out.push('\n');
        for ((n, t), p) in self.recorded_n.iter().zip(self.path.times()).zip(self.path.points()) {
            let _ = write!(out, "{n},{}", fmt_sig17(*t));
            for c in p {
                out.push(',');
                out.push_str(&fmt_sig17(*c));
            }
            out.push('\n');
        }
        out
    }

    pub fn write_csv(&self, path: &Path, m1: usize) -> std::io::Result<()> {
        std::fs::write(path, self.to_csv(m1))
    }
}

/// State of the MFP process after `n` steps.
#[derive(Debug, Clone)]
pub struct RunState {
    n: usize,
    actions: (usize, usize),
    counts: [Vec<u64>; 2],
    mix: [Vec<f64>; 2],
    own: [DMatrix<f64>; 2],
    rng: ChaCha8Rng,
    payoffs: Vec<f64>,
    row: Vec<f64>,
}

impl RunState {
    /// Fresh state at `n = 0` with the RNG stream of `replica`. The mixes
    /// at `n = 0` are uniform placeholders; they are never used since
    /// `β_0 = 0`.
    pub fn new(cfg: &MfpConfig, replica: usize) -> Self {
        let (m1, m2) = cfg.game.actions();
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(replica as u64);
        Self {
            n: 0,
            actions: cfg.start,
            counts: [vec![0; m1], vec![0; m2]],
            mix: [vec![1.0 / m1 as f64; m1], vec![1.0 / m2 as f64; m2]],
            own: [
                cfg.game.own_payoffs(Player::One),
                cfg.game.own_payoffs(Player::Two),
            ],
            rng,
            payoffs: vec![0.0; m1.max(m2)],
            row: vec![0.0; m1.max(m2)],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn actions(&self) -> (usize, usize) {
        self.actions
    }

    /// Action counts over `X_1..X_n` and `Y_1..Y_n`.
    pub fn counts(&self) -> &[Vec<u64>; 2] {
        &self.counts
    }

    /// `v_n = (x̄_n, ȳ_n)` concatenated.
    pub fn v(&self) -> Vec<f64> {
        [self.mix[0].as_slice(), self.mix[1].as_slice()].concat()
    }

    fn fill_payoffs(&mut self, p: usize) {
        let own = &self.own[p];
        let opp = &self.mix[1 - p];
        for i in 0..own.nrows() {
            self.payoffs[i] = (0..own.ncols()).map(|l| own[(i, l)] * opp[l]).sum();
        }
    }

    /// `θ_n = (π¹_n[ȳ_n], π²_n[x̄_n])` concatenated.
    pub fn theta(&mut self, cfg: &MfpConfig) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.mix[0].len() + self.mix[1].len());
        for p in 0..2 {
            self.fill_payoffs(p);
            let m = self.own[p].nrows();
            let beta = cfg.beta[p].beta(self.n);
            let pi = gibbs(cfg.exploration[p].pi0(), beta, &self.payoffs[..m]);
            out.extend(pi.iter());
        }
        out
    }

    /// One MFP step: each player draws its next action from the current
    /// row of its kernel against the opponent's empirical mix.
    pub fn step(&mut self, cfg: &MfpConfig) {
        let mut next = [0usize; 2];
        let current = [self.actions.0, self.actions.1];
        for p in 0..2 {
            self.fill_payoffs(p);
            let m = self.own[p].nrows();
            let beta = cfg.beta[p].beta(self.n);
            kernel_row(
                &cfg.exploration[p],
                beta,
                &self.payoffs[..m],
                current[p],
                &mut self.row[..m],
            );
            next[p] = sample(&self.row[..m], self.rng.random::<f64>());
        }
        self.n += 1;
        let n = self.n as f64;
        for p in 0..2 {
            self.counts[p][next[p]] += 1;
            for (x, &c) in self.mix[p].iter_mut().zip(&self.counts[p]) {
                *x = c as f64 / n;
            }
        }
        self.actions = (next[0], next[1]);
    }
}

/// Inverse-CDF draw from a probability row.
fn sample(row: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    let mut last = 0;
    for (j, &p) in row.iter().enumerate() {
        if p > 0.0 {
            acc += p;
            last = j;
            if u < acc {
                return j;
            }
        }
    }
    last
}

/// Replica `replica` of `cfg`.
pub fn run_replica(cfg: &MfpConfig, replica: usize) -> Result<RunRecord> {
    cfg.validate()?;
    let (m1, _) = cfg.game.actions();
    let dim = cfg.state_dim();
    let horizon = cfg.horizon;
    let mut state = RunState::new(cfg, replica);
    let mut recorded_n = Vec::new();
    let mut times = Vec::new();
    let mut points = Vec::new();
    let mut noise_idx = Vec::new();
    let mut noise = Vec::new();
    let mut actions = cfg.keep_actions.then(|| {
        let mut a = Vec::with_capacity(horizon + 1);
        a.push(state.actions());
        a
    });
    let mut tau = 0.0;
    for n in 1..=horizon {
        let record = n == 1 || n % cfg.thin == 0 || n == horizon;
        let want_noise = match cfg.noise {
            NoiseRecording::None => false,
            NoiseRecording::Thinned => record,
            NoiseRecording::Full => true,
        };
        let theta = want_noise.then(|| state.theta(cfg));
        state.step(cfg);
        tau += 1.0 / n as f64;
        if let Some(theta) = theta {
            let (x, y) = state.actions();
            noise.extend(theta.iter().enumerate().map(|(k, t)| {
                let hit = if k < m1 { k == x } else { k - m1 == y };
                f64::from(u8::from(hit)) - t
            }));
            noise_idx.push(n);
        }
        if let Some(a) = actions.as_mut() {
            a.push(state.actions());
        }
        if record {
            recorded_n.push(n);
            times.push(tau);
            points.push(state.v());
        }
    }
    let noise = match cfg.noise {
        NoiseRecording::None => None,
        NoiseRecording::Thinned => Some(NoiseSeq::thinned(dim, noise_idx, noise)?),
        NoiseRecording::Full => Some(NoiseSeq::full(dim, noise)?),
    };
    Ok(RunRecord {
        seed: cfg.seed,
        replica,
        recorded_n,
        terminal: state.v(),
        path: Trajectory::new(times, points)?,
        noise,
        actions,
    })
}

/// Replica 0.
pub fn run(cfg: &MfpConfig) -> Result<RunRecord> {
    run_replica(cfg, 0)
}

/// Runs every replica in parallel and applies `f` to each record as soon as
/// it is produced; results come back ordered by replica index.
pub fn map_replicas<T, F>(cfg: &MfpConfig, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(RunRecord) -> Result<T> + Sync,
{
    (0..cfg.replicas)
        .into_par_iter()
        .map(|r| f(run_replica(cfg, r)?))
        .collect()
}

pub fn run_replicas(cfg: &MfpConfig) -> Result<Vec<RunRecord>> {
    map_replicas(cfg, Ok)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::Game;

    fn coordination(a: f64, horizon: usize) -> MfpConfig {
        let u = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        MfpConfig::new(Game::from_rows(&u, &u).unwrap(), a, horizon)
    }

    #[test]
    fn sample_inverse_cdf() {
        let row = [0.25, 0.0, 0.75];
        assert_eq!(sample(&row, 0.0), 0);
        assert_eq!(sample(&row, 0.3), 2);
        assert_eq!(sample(&row, 0.999_999), 2);
        // a zero-probability column is never returned
        assert_eq!(sample(&[0.5, 0.5, 0.0], 1.0), 1);
    }

    #[test]
    fn first_step_average_is_first_play() {
        let cfg = coordination(0.5, 10);
        let mut s = RunState::new(&cfg, 0);
        s.step(&cfg);
        let (x, y) = s.actions();
        let mut v = vec![0.0; 4];
        v[x] = 1.0;
        v[2 + y] = 1.0;
        assert_eq!(s.v(), v);
    }

    #[test]
    fn counts_sum_to_n() {
        let cfg = coordination(1.0, 500);
        let mut s = RunState::new(&cfg, 3);
        for _ in 0..500 {
            s.step(&cfg);
        }
        for c in s.counts() {
            assert_eq!(c.iter().sum::<u64>(), 500);
        }
    }

    #[test]
    fn thinned_recording_keeps_first_and_last() {
        let mut cfg = coordination(0.5, 95);
        cfg.thin = 10;
        cfg.noise = NoiseRecording::Thinned;
        let rec = run(&cfg).unwrap();
        assert_eq!(rec.recorded_n.first(), Some(&1));
        assert_eq!(rec.recorded_n.last(), Some(&95));
        assert_eq!(rec.recorded_n.len(), 11);
        let noise = rec.noise.unwrap();
        assert!(!noise.is_full());
        assert_eq!(noise.len(), 11);
        assert_eq!(noise.index(10), 95);
    }

    #[test]
    fn noise_rows_are_centered_differences() {
        let mut cfg = coordination(0.0, 50);
        cfg.noise = NoiseRecording::Full;
        let rec = run(&cfg).unwrap();
        let noise = rec.noise.unwrap();
        assert_eq!(noise.len(), 50);
        // β ≡ 0: θ_n = π0 = (1/2, 1/2) per player
        for j in 0..noise.len() {
            let u = noise.row(j);
            for pair in u.chunks(2) {
                assert!((pair[0] + pair[1]).abs() < 1e-15);
                assert_eq!(pair[0].abs(), 0.5);
            }
        }
    }

    #[test]
    fn replicas_use_distinct_streams() {
        let mut cfg = coordination(0.5, 200);
        cfg.replicas = 3;
        let recs = run_replicas(&cfg).unwrap();
        assert_ne!(recs[0].path, recs[1].path);
        assert_eq!(recs[2], run_replica(&cfg, 2).unwrap());
    }
}
