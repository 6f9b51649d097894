//! Two-player normal-form games and the Markovian fictitious play kernels.

mod barrier;
mod kernel;
mod normal_form;

pub use barrier::{elevation, tilde_a, u_sharp, Interpretation, TildeA, USharp};
pub use kernel::{
    gibbs, invariant_distribution, kernel_row, mfp_kernel, pseudo_inverse, BetaForm,
    BetaSchedule, ExplorationMatrix, MarkovKernel,
};
pub use normal_form::{
    best_response, br_dynamics_map, check_mix, expected_payoffs, strict_nash, Game, Player,
    DEFAULT_TIE_TOL,
};
