use nalgebra::DMatrix;

use crate::error::{domain, Error, Result};
use crate::geometry::{Polytope, SetValuedMap};

pub const DEFAULT_TIE_TOL: f64 = 1e-9;

/// Slack on the simplex constraints of a mixed strategy.
const SIMPLEX_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Player {
    One,
    Two,
}

/// Bimatrix game; `u1[(i, l)]` and `u2[(i, l)]` are the payoffs of the two
/// players under pure profile `(i, l)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Game {
    u1: DMatrix<f64>,
    u2: DMatrix<f64>,
}

impl Game {
    pub fn new(u1: DMatrix<f64>, u2: DMatrix<f64>) -> Result<Self> {
        if u1.shape() != u2.shape() {
            return domain("payoff matrices must have the same shape");
        }
        if u1.nrows() < 2 || u1.ncols() < 2 {
            return domain("each player needs at least two actions");
        }
        if u1.iter().chain(u2.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Numerical("non-finite payoff".into()));
        }
        Ok(Self { u1, u2 })
    }

    pub fn from_rows(u1: &[Vec<f64>], u2: &[Vec<f64>]) -> Result<Self> {
        Self::new(matrix_from_rows(u1)?, matrix_from_rows(u2)?)
    }

    pub fn u1(&self) -> &DMatrix<f64> {
        &self.u1
    }

    pub fn u2(&self) -> &DMatrix<f64> {
        &self.u2
    }

    /// Action counts `(m¹, m²)`.
    pub fn actions(&self) -> (usize, usize) {
        self.u1.shape()
    }

    /// Payoff of `player` arranged as own action × opponent action.
    pub fn own_payoffs(&self, player: Player) -> DMatrix<f64> {
        match player {
            Player::One => self.u1.clone(),
            Player::Two => self.u2.transpose(),
        }
    }
}

pub(crate) fn matrix_from_rows(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, Vec::len);
    if nrows == 0 || ncols == 0 || rows.iter().any(|r| r.len() != ncols) {
        return domain("matrix rows must be nonempty and of equal length");
    }
    Ok(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

pub fn check_mix(mix: &[f64]) -> Result<()> {
    let sum: f64 = mix.iter().sum();
    if mix.iter().any(|&p| !(p >= -SIMPLEX_TOL)) || (sum - 1.0).abs() > SIMPLEX_TOL {
        return domain(format!("{mix:?} is not a probability vector"));
    }
    Ok(())
}

/// `U(i, y) = Σ_l U(i, l) y_l` for an own × opponent payoff matrix.
pub fn expected_payoffs(own: &DMatrix<f64>, opponent_mix: &[f64]) -> Vec<f64> {
    (0..own.nrows())
        .map(|i| (0..own.ncols()).map(|l| own[(i, l)] * opponent_mix[l]).sum())
        .collect()
}

/// Face of the own simplex spanned by pure actions whose expected payoff is
/// within `tie_tol` of the best one.
pub fn best_response(own: &DMatrix<f64>, opponent_mix: &[f64], tie_tol: f64) -> Result<Polytope> {
    if opponent_mix.len() != own.ncols() {
        return domain("opponent mix has the wrong length");
    }
    check_mix(opponent_mix)?;
    let pay = expected_payoffs(own, opponent_mix);
    let best = pay.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let m = own.nrows();
    let verts = pay
        .iter()
        .enumerate()
        .filter(|(_, &u)| u >= best - tie_tol)
        .map(|(i, _)| {
            let mut e = vec![0.0; m];
            e[i] = 1.0;
            e
        })
        .collect();
    Polytope::new(verts)
}

/// Best-response dynamic `(ẋ, ẏ) ∈ (br¹(y), br²(x)) − (x, y)` on
/// `Δ(I) × Δ(L) ⊂ R^{m¹+m²}`.
pub fn br_dynamics_map(game: &Game, tie_tol: f64) -> SetValuedMap {
    let (m1, m2) = game.actions();
    let p1 = game.own_payoffs(Player::One);
    let p2 = game.own_payoffs(Player::Two);
    SetValuedMap::new(m1 + m2, 2.0, move |v| {
        let (x, y) = v.split_at(m1);
        let b1 = best_response(&p1, y, tie_tol)?;
        let b2 = best_response(&p2, x, tie_tol)?;
        let mut verts = Vec::with_capacity(b1.vertices().len() * b2.vertices().len());
        for a in b1.vertices() {
            for b in b2.vertices() {
                let mut w = Vec::with_capacity(m1 + m2);
                w.extend(a.iter().zip(x).map(|(ai, xi)| ai - xi));
                w.extend(b.iter().zip(y).map(|(bi, yi)| bi - yi));
                verts.push(w);
            }
        }
        Polytope::new(verts)
    })
}

/// Pure profiles where each action beats every deviation by more than `tol`.
pub fn strict_nash(game: &Game, tol: f64) -> Vec<(usize, usize)> {
    let (m1, m2) = game.actions();
    let mut out = Vec::new();
    for i in 0..m1 {
        for l in 0..m2 {
            let p1 = (0..m1).all(|k| k == i || game.u1[(i, l)] > game.u1[(k, l)] + tol);
            let p2 = (0..m2).all(|k| k == l || game.u2[(i, l)] > game.u2[(i, k)] + tol);
            if p1 && p2 {
                out.push((i, l));
            }
        }
    }
    out
}
