//! Energy barriers of an exploration graph.
//!
//! `Elev(i, j; y)` is the bottleneck (minimax) value of `−U(k, y)` over
//! admissible paths from `i` to `j`; `U^#(y)` is the largest excess
//! `Elev(i,j;y) + U(i,y) + U(j,y) − max U(·,y)` over ordered pairs `i ≠ j`,
//! and `U^#` its maximum over the opponent simplex (read on a grid).

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::game::kernel::ExplorationMatrix;
use crate::game::normal_form::{check_mix, expected_payoffs, Game, Player};

/// Bottleneck path value for node weights `levels` (`−U(k, y)`).
fn bottleneck(expl: &ExplorationMatrix, levels: &[f64], i: usize, j: usize) -> Option<f64> {
    let m = expl.size();
    let mut cuts: Vec<f64> = levels.to_vec();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let floor = levels[i].max(levels[j]);
    for &cut in cuts.iter().filter(|&&c| c >= floor) {
        let mut seen = vec![false; m];
        let mut stack = vec![i];
        seen[i] = true;
        while let Some(a) = stack.pop() {
            if a == j {
                return Some(cut);
            }
            for b in 0..m {
                if !seen[b] && expl.edge(a, b) && levels[b] <= cut {
                    seen[b] = true;
                    stack.push(b);
                }
            }
        }
    }
    None
}

/// `Elev(i, j; y)` for own × opponent payoffs `own`.
pub fn elevation(
    expl: &ExplorationMatrix,
    own: &DMatrix<f64>,
    opponent_mix: &[f64],
    i: usize,
    j: usize,
) -> Result<f64> {
    let m = expl.size();
    if i >= m || j >= m || own.nrows() != m || own.ncols() != opponent_mix.len() {
        return domain("action index or payoff shape out of range");
    }
    check_mix(opponent_mix)?;
    let levels: Vec<f64> = expected_payoffs(own, opponent_mix).iter().map(|u| -u).collect();
    bottleneck(expl, &levels, i, j)
        .ok_or_else(|| crate::Error::Domain(format!("no admissible path from {} to {}", i + 1, j + 1)))
}

fn barrier_at(expl: &ExplorationMatrix, pay: &[f64]) -> Result<f64> {
    let m = expl.size();
    let levels: Vec<f64> = pay.iter().map(|u| -u).collect();
    let top = pay.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut best = f64::NEG_INFINITY;
    for i in 0..m {
        for j in 0..m {
            if i == j {
                continue;
            }
            let elev = bottleneck(expl, &levels, i, j)
                .ok_or_else(|| crate::Error::Domain("exploration graph disconnected".into()))?;
            best = best.max(elev + pay[i] + pay[j] - top);
        }
    }
    Ok(best)
}

/// Calls `visit` on every point of the simplex grid with `points_per_edge`
/// points along each edge.
fn for_each_grid_point(dim: usize, points_per_edge: usize, mut visit: impl FnMut(&[f64])) {
    let parts = points_per_edge - 1;
    let mut counts = vec![0usize; dim];
    fn rec(k: usize, left: usize, parts: usize, counts: &mut [usize], visit: &mut dyn FnMut(&[f64])) {
        if k + 1 == counts.len() {
            counts[k] = left;
            let y: Vec<f64> = counts.iter().map(|&c| c as f64 / parts as f64).collect();
            visit(&y);
            return;
        }
        for c in 0..=left {
            counts[k] = c;
            rec(k + 1, left - c, parts, counts, visit);
        }
    }
    rec(0, parts, parts, &mut counts, &mut visit);
}

#[derive(Debug, Clone, PartialEq)]
pub struct USharp {
    /// Grid maximum of `U^#(y)`; a lower bound on the true maximum.
    pub value: f64,
    pub argmax: Vec<f64>,
    pub grid_points: usize,
}

/// `U^# = max_y U^#(y)` over a uniform simplex grid of opponent mixes.
pub fn u_sharp(expl: &ExplorationMatrix, own: &DMatrix<f64>, grid_resolution: usize) -> Result<USharp> {
    if grid_resolution < 2 {
        return domain("grid resolution must be at least 2 points per edge");
    }
    if own.nrows() != expl.size() {
        return domain("payoff rows do not match the exploration matrix");
    }
    let mut best = USharp {
        value: f64::NEG_INFINITY,
        argmax: Vec::new(),
        grid_points: 0,
    };
    let mut failure = None;
    for_each_grid_point(own.ncols(), grid_resolution, |y| {
        best.grid_points += 1;
        match barrier_at(expl, &expected_payoffs(own, y)) {
            Ok(v) if v > best.value => {
                best.value = v;
                best.argmax = y.to_vec();
            }
            Ok(_) => {}
            Err(e) => failure = Some(e),
        }
    });
    match failure {
        Some(e) => Err(e),
        None => Ok(best),
    }
}

/// Reading of the threshold `Ã^p` written `1/2 U^{p,#}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Interpretation {
    /// `Ã = 1/(2·U^#)`; `+∞` when `U^# ≤ 0`.
    #[default]
    Ratio,
    /// `Ã = U^#/2`.
    Half,
}

impl Interpretation {
    pub fn apply(self, u_sharp: f64) -> f64 {
        match self {
            Interpretation::Ratio if u_sharp <= 0.0 => f64::INFINITY,
            Interpretation::Ratio => 1.0 / (2.0 * u_sharp),
            Interpretation::Half => u_sharp / 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TildeA {
    pub u_sharp: [USharp; 2],
    pub interpretation: Interpretation,
    pub values: [f64; 2],
    /// Per-player note when `U^# ≤ 0` makes the threshold degenerate.
    pub notes: Vec<String>,
}

/// Thresholds `(Ã¹, Ã²)` under the chosen reading.
pub fn tilde_a(
    game: &Game,
    expl1: &ExplorationMatrix,
    expl2: &ExplorationMatrix,
    grid_resolution: usize,
    interpretation: Interpretation,
) -> Result<TildeA> {
    let s1 = u_sharp(expl1, &game.own_payoffs(Player::One), grid_resolution)?;
    let s2 = u_sharp(expl2, &game.own_payoffs(Player::Two), grid_resolution)?;
    let values = [interpretation.apply(s1.value), interpretation.apply(s2.value)];
    let notes = [&s1, &s2]
        .iter()
        .enumerate()
        .filter(|(_, s)| s.value <= 0.0)
        .map(|(p, s)| {
            format!(
                "player {}: U# = {} <= 0, threshold degenerate ({}); set override_tilde_a in the schedule",
                p + 1,
                s.value,
                match interpretation {
                    Interpretation::Ratio => "ratio reading gives +inf",
                    Interpretation::Half => "half reading gives a nonpositive bound",
                }
            )
        })
        .collect();
    Ok(TildeA {
        u_sharp: [s1, s2],
        interpretation,
        values,
        notes,
    })
}
