use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::game::normal_form::{check_mix, expected_payoffs, matrix_from_rows};

const STOCHASTIC_TOL: f64 = 1e-12;
const INVARIANCE_TOL: f64 = 1e-10;

/// Irreducible base kernel `M0`, reversible with respect to `π0`: action `j`
/// may follow `i` only if `M0(i, j) > 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExplorationMatrix {
    m0: DMatrix<f64>,
    pi0: DVector<f64>,
}

impl ExplorationMatrix {
    pub fn new(m0: DMatrix<f64>, pi0: DVector<f64>) -> Result<Self> {
        let m = m0.nrows();
        if m == 0 || m0.ncols() != m || pi0.len() != m {
            return domain("exploration matrix must be square and match pi0");
        }
        if m0.iter().any(|&v| !(v >= 0.0)) {
            return domain("exploration matrix entries must be nonnegative");
        }
        for i in 0..m {
            let s: f64 = m0.row(i).sum();
            if (s - 1.0).abs() > STOCHASTIC_TOL {
                return domain(format!("exploration row {} sums to {s}", i + 1));
            }
        }
        check_mix(pi0.as_slice())?;
        if pi0.iter().any(|&p| p <= 0.0) {
            return domain("pi0 must be strictly positive");
        }
        for i in 0..m {
            for j in 0..m {
                let gap = (pi0[i] * m0[(i, j)] - pi0[j] * m0[(j, i)]).abs();
                if gap > STOCHASTIC_TOL {
                    return domain(format!(
                        "exploration matrix not reversible at ({}, {}): gap {gap:e}",
                        i + 1,
                        j + 1
                    ));
                }
            }
        }
        if !strongly_connected(&m0) {
            return domain("exploration matrix is not irreducible");
        }
        Ok(Self { m0, pi0 })
    }

    pub fn from_rows(m0: &[Vec<f64>], pi0: &[f64]) -> Result<Self> {
        Self::new(matrix_from_rows(m0)?, DVector::from_column_slice(pi0))
    }

    /// `M0(i, j) = 1/m` for every pair; `π0` uniform.
    pub fn uniform(m: usize) -> Self {
        let p = 1.0 / m as f64;
        Self {
            m0: DMatrix::from_element(m, m, p),
            pi0: DVector::from_element(m, p),
        }
    }

    pub fn size(&self) -> usize {
        self.m0.nrows()
    }

    pub fn m0(&self) -> &DMatrix<f64> {
        &self.m0
    }

    pub fn pi0(&self) -> &DVector<f64> {
        &self.pi0
    }

    pub fn has_positive_diagonal(&self) -> bool {
        (0..self.size()).all(|i| self.m0[(i, i)] > 0.0)
    }

    pub fn edge(&self, i: usize, j: usize) -> bool {
        self.m0[(i, j)] > 0.0
    }
}

fn reachable(adj: &DMatrix<f64>, from: usize, transpose: bool) -> Vec<bool> {
    let m = adj.nrows();
    let mut seen = vec![false; m];
    let mut stack = vec![from];
    seen[from] = true;
    while let Some(a) = stack.pop() {
        for b in 0..m {
            let w = if transpose { adj[(b, a)] } else { adj[(a, b)] };
            if w > 0.0 && !seen[b] {
                seen[b] = true;
                stack.push(b);
            }
        }
    }
    seen
}

fn strongly_connected(adj: &DMatrix<f64>) -> bool {
    reachable(adj, 0, false).iter().all(|&s| s) && reachable(adj, 0, true).iter().all(|&s| s)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum BetaForm {
    /// `β_n = A·log(n + 1)`
    #[default]
    Logarithmic,
    /// `β_n = A·log(n + 1)^exponent`, `0 < exponent < 1`, so that
    /// `β_n / (A log n) → 0`.
    SubLogarithmic { exponent: f64 },
}

/// Inverse-temperature schedule of one player.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BetaSchedule {
    pub a: f64,
    pub form: BetaForm,
    /// User-supplied threshold used when the computed one is degenerate.
    pub override_tilde_a: Option<f64>,
}

impl BetaSchedule {
    pub fn logarithmic(a: f64) -> Self {
        Self {
            a,
            form: BetaForm::Logarithmic,
            override_tilde_a: None,
        }
    }

    /// `β_n`; `β_0 = 0`.
    pub fn beta(&self, n: usize) -> f64 {
        let l = ((n + 1) as f64).ln();
        match self.form {
            BetaForm::Logarithmic => self.a * l,
            BetaForm::SubLogarithmic { exponent } => self.a * l.powf(exponent),
        }
    }
}

/// MFP transition matrix together with its invariant law and pseudo-inverse.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkovKernel {
    pub m: DMatrix<f64>,
    pub pi: DVector<f64>,
    pub q: DMatrix<f64>,
}

/// Row `i` of the MFP kernel for own expected payoffs `payoffs`:
/// `M(i,j) = M0(i,j)·exp(−β(U_i − U_j)⁺)` off the diagonal, the diagonal
/// taking the remaining mass.
pub fn kernel_row(expl: &ExplorationMatrix, beta: f64, payoffs: &[f64], i: usize, row: &mut [f64]) {
    let m = expl.size();
    let mut off = 0.0;
    for j in 0..m {
        if j == i {
            continue;
        }
        let base = expl.m0[(i, j)];
        let v = if base > 0.0 {
            base * (-beta * (payoffs[i] - payoffs[j]).max(0.0)).exp()
        } else {
            0.0
        };
        row[j] = v;
        off += v;
    }
    row[i] = 1.0 - off;
}

fn kernel_matrix(expl: &ExplorationMatrix, beta: f64, payoffs: &[f64]) -> DMatrix<f64> {
    let m = expl.size();
    let mut out = DMatrix::zeros(m, m);
    let mut row = vec![0.0; m];
    for i in 0..m {
        kernel_row(expl, beta, payoffs, i, &mut row);
        for j in 0..m {
            out[(i, j)] = row[j];
        }
    }
    out
}

/// Normalized Gibbs vector `π_i ∝ π0_i·exp(β·U_i)`, exponents shifted by
/// their maximum before exponentiation.
pub fn gibbs(pi0: &DVector<f64>, beta: f64, payoffs: &[f64]) -> DVector<f64> {
    let top = payoffs
        .iter()
        .map(|u| beta * u)
        .fold(f64::NEG_INFINITY, f64::max);
    let mut w = DVector::from_fn(pi0.len(), |i, _| pi0[i] * (beta * payoffs[i] - top).exp());
    let total = w.sum();
    w /= total;
    w
}

fn check_kernel_inputs(
    expl: &ExplorationMatrix,
    beta: f64,
    own: &DMatrix<f64>,
    opponent_mix: &[f64],
) -> Result<Vec<f64>> {
    if !(beta >= 0.0) || !beta.is_finite() {
        return domain("beta must be finite and nonnegative");
    }
    if own.nrows() != expl.size() || own.ncols() != opponent_mix.len() {
        return domain("payoff matrix does not match exploration matrix / opponent mix");
    }
    check_mix(opponent_mix)?;
    Ok(expected_payoffs(own, opponent_mix))
}

/// Gibbs invariant law of the MFP kernel against `opponent_mix`.
pub fn invariant_distribution(
    expl: &ExplorationMatrix,
    beta: f64,
    own: &DMatrix<f64>,
    opponent_mix: &[f64],
) -> Result<DVector<f64>> {
    let pay = check_kernel_inputs(expl, beta, own, opponent_mix)?;
    Ok(gibbs(&expl.pi0, beta, &pay))
}

/// Full MFP kernel: transition matrix, Gibbs law and pseudo-inverse.
pub fn mfp_kernel(
    expl: &ExplorationMatrix,
    beta: f64,
    own: &DMatrix<f64>,
    opponent_mix: &[f64],
) -> Result<MarkovKernel> {
    let pay = check_kernel_inputs(expl, beta, own, opponent_mix)?;
    let m = kernel_matrix(expl, beta, &pay);
    let pi = gibbs(&expl.pi0, beta, &pay);
    let q = pseudo_inverse(&m, &pi)?;
    Ok(MarkovKernel { m, pi, q })
}

/// `Q = (I − M + Π)^{-1} − Π`, `Π` having every row equal to `π`; this is
/// the unique solution of `Q(I−M) = (I−M)Q = I − Π`, `Q1 = 0`.
pub fn pseudo_inverse(m: &DMatrix<f64>, pi: &DVector<f64>) -> Result<DMatrix<f64>> {
    let n = m.nrows();
    if m.ncols() != n || pi.len() != n {
        return domain("pseudo-inverse needs a square matrix and matching pi");
    }
    let drift = (pi.transpose() * m - pi.transpose()).amax();
    if drift > INVARIANCE_TOL {
        return domain(format!("pi is not invariant for M (residual {drift:e})"));
    }
    let proj = DMatrix::from_fn(n, n, |_, j| pi[j]);
    let eye = DMatrix::<f64>::identity(n, n);
    let z = &eye - m + &proj;
    let mut inv = z
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Numerical("I − M + Π is singular (reducible chain?)".into()))?;
    // one step of iterative refinement
    let resid = &eye - &z * &inv;
    inv += &inv * resid;
    if inv.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("pseudo-inverse is not finite".into()));
    }
    // ΠQ = QΠ = 0 holds exactly for the true Q; rounding leaves rank-one
    // drift along 1πᵀ that the sandwich removes
    let centre = &eye - &proj;
    Ok(&centre * (inv - &proj) * &centre)
}
