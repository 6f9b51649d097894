use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleKind {
    /// `γ_n = a/n`
    Harmonic,
    /// `γ_n = a/n^p`, `0 < p ≤ 1`
    Power,
    /// `γ_n = a`; fine for solver tests, invalid for stochastic approximation.
    Constant,
}

/// Deterministic step sizes `γ_n`, `n ≥ 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepSchedule {
    pub kind: ScheduleKind,
    pub a: f64,
    #[serde(default = "one")]
    pub p: f64,
}

fn one() -> f64 {
    1.0
}

impl StepSchedule {
    pub fn harmonic() -> Self {
        Self {
            kind: ScheduleKind::Harmonic,
            a: 1.0,
            p: 1.0,
        }
    }

    pub fn power(a: f64, p: f64) -> Result<Self> {
        if !(a > 0.0) || !(p > 0.0 && p <= 1.0) {
            return domain(format!("power schedule needs a > 0 and 0 < p <= 1 (a={a}, p={p})"));
        }
        Ok(Self {
            kind: ScheduleKind::Power,
            a,
            p,
        })
    }

    pub fn constant(a: f64) -> Result<Self> {
        if !(a > 0.0) {
            return domain("constant step must be positive");
        }
        Ok(Self {
            kind: ScheduleKind::Constant,
            a,
            p: 0.0,
        })
    }

    /// Decay exponent: `γ_n = a·n^{-p}` (0 for constant steps).
    pub fn exponent(&self) -> f64 {
        match self.kind {
            ScheduleKind::Harmonic => 1.0,
            ScheduleKind::Power => self.p,
            ScheduleKind::Constant => 0.0,
        }
    }

    /// `γ_n` for `n ≥ 1`.
    pub fn gamma(&self, n: usize) -> f64 {
        debug_assert!(n >= 1);
        match self.kind {
            ScheduleKind::Harmonic => self.a / n as f64,
            ScheduleKind::Power => self.a / (n as f64).powf(self.p),
            ScheduleKind::Constant => self.a,
        }
    }

    /// Partial sums `τ_0 = 0, τ_n = Σ_{i≤n} γ_i` for `n = 0..=last`.
    pub fn times(&self, last: usize) -> Vec<f64> {
        let mut out = Vec::with_capacity(last + 1);
        let mut acc = 0.0;
        out.push(acc);
        for n in 1..=last {
            acc += self.gamma(n);
            out.push(acc);
        }
        out
    }

    /// `Σγ_n = ∞` and `γ_n → 0`: required of a stochastic approximation step.
    pub fn is_valid_for_approximation(&self) -> bool {
        matches!(self.kind, ScheduleKind::Harmonic | ScheduleKind::Power) && self.a > 0.0
    }

    /// `Σ_n e^{−c/γ_n} < ∞` for every `c > 0`, decided by kind.
    pub fn exp_summable(&self) -> bool {
        self.exponent() > 0.0
    }
}

/// `m(t) = max{j | τ_j ≤ t}` over a precomputed partial-sum table.
pub(crate) fn last_index_at_or_before(times: &[f64], t: f64) -> Option<usize> {
    let k = times.partition_point(|&tau| tau <= t);
    k.checked_sub(1)
}
