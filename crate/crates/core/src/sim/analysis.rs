use crate::dynamics::StepSchedule;
use crate::error::{domain, Result};
use crate::game::{strict_nash, ExplorationMatrix, Game};
use crate::geometry::dist_inf;
use crate::sim::config::MfpConfig;
use crate::sim::run::map_replicas;
use crate::stats::Proportion;

/// A point target for terminal states, e.g. a strict Nash profile.
#[derive(Debug, Clone, PartialEq)]
pub struct Target {
    pub label: String,
    pub point: Vec<f64>,
}

/// Strict Nash profiles `(e_i, e_l)` as targets, labelled one-based.
pub fn strict_nash_targets(game: &Game, tol: f64) -> Vec<Target> {
    let (m1, m2) = game.actions();
    strict_nash(game, tol)
        .into_iter()
        .map(|(i, l)| {
            let mut point = vec![0.0; m1 + m2];
            point[i] = 1.0;
            point[m1 + l] = 1.0;
            Target {
                label: format!("({},{})", i + 1, l + 1),
                point,
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    pub radius: f64,
    /// Replicas ending near any target.
    pub overall: Proportion,
    pub per_target: Vec<(Target, Proportion)>,
}

impl ConvergenceReport {
    /// Every target is reached with an interval excluding 0.
    pub fn all_positive(&self) -> bool {
        !self.per_target.is_empty() && self.per_target.iter().all(|(_, p)| p.excludes_zero())
    }
}

/// Fractions of terminal states within `radius` (sup-norm) of each target.
pub fn convergence_from_terminals(
    terminals: &[Vec<f64>],
    targets: &[Target],
    radius: f64,
) -> Result<ConvergenceReport> {
    if terminals.len() < 30 {
        return domain(format!("need at least 30 replicas, got {}", terminals.len()));
    }
    if targets.is_empty() {
        return domain("no targets");
    }
    let near = |v: &Vec<f64>, t: &Target| dist_inf(v, &t.point) <= radius;
    let r = terminals.len();
    let per_target = targets
        .iter()
        .map(|t| {
            let hits = terminals.iter().filter(|v| near(v, t)).count();
            (t.clone(), Proportion::new(hits, r))
        })
        .collect();
    let any = terminals
        .iter()
        .filter(|v| targets.iter().any(|t| near(v, t)))
        .count();
    Ok(ConvergenceReport {
        radius,
        overall: Proportion::new(any, r),
        per_target,
    })
}

/// Runs the `cfg.replicas` replicas and scores their terminal states.
pub fn convergence_probability(cfg: &MfpConfig, targets: &[Target], radius: f64) -> Result<ConvergenceReport> {
    if cfg.replicas < 30 {
        return domain(format!("need at least 30 replicas, got {}", cfg.replicas));
    }
    let mut cfg = cfg.clone();
    cfg.thin = cfg.horizon;
    cfg.noise = crate::sim::NoiseRecording::None;
    cfg.keep_actions = false;
    let terminals = map_replicas(&cfg, |r| Ok(r.terminal))?;
    convergence_from_terminals(&terminals, targets, radius)
}

/// Positive diagonals in both exploration matrices: every point of the
/// product of simplices is then attainable by the process.
pub fn attainability_flag(expl1: &ExplorationMatrix, expl2: &ExplorationMatrix) -> bool {
    expl1.has_positive_diagonal() && expl2.has_positive_diagonal()
}

/// Noise scale bound `M_n = n^r (log n)^s`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentBound {
    pub r: f64,
    pub s: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScheduleReport {
    /// `p` in `γ_n = a n^{-p}`.
    pub exponent: f64,
    pub q: f64,
    /// `Σ γ_n^{1+q/2} < ∞`.
    pub power_sum_converges: bool,
    /// `Σ e^{−c/γ_n} < ∞` for every `c > 0`.
    pub exp_summable: bool,
    /// `M_n² γ_n log n → 0`.
    pub moment_condition: bool,
    /// `(n, M_n² γ_n log n)` at `n = 10, 10², ..., 10⁸`.
    pub moment_grid: Vec<(usize, f64)>,
}

/// Analytic verdicts on the step-size conditions for `γ_n = a n^{-p}`.
pub fn schedule_checks(schedule: &StepSchedule, q: f64, bound: MomentBound) -> Result<ScheduleReport> {
    if !(schedule.a > 0.0) || !schedule.a.is_finite() || !(q >= 0.0) {
        return domain("schedule checks need a > 0 and q >= 0");
    }
    let p = schedule.exponent();
    // M_n² γ_n log n = a n^{2r−p} (log n)^{2s+1}
    let e = 2.0 * bound.r - p;
    let moment_condition = e < 0.0 || (e == 0.0 && 2.0 * bound.s + 1.0 < 0.0);
    let moment_grid = (1..=8)
        .map(|k| {
            let n = 10usize.pow(k);
            let nf = n as f64;
            let m = nf.powf(bound.r) * nf.ln().powf(bound.s);
            (n, m * m * schedule.gamma(n) * nf.ln())
        })
        .collect();
    Ok(ScheduleReport {
        exponent: p,
        q,
        power_sum_converges: p * (1.0 + q / 2.0) > 1.0,
        exp_summable: schedule.exp_summable(),
        moment_condition,
        moment_grid,
    })
}
