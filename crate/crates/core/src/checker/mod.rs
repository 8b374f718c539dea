//! Verification of first- and higher-order necessary conditions on a process.

mod classify;
mod first_order;
mod higher_order;
mod linear;
mod multiplier;
mod rank;
mod report;

pub use classify::{classify_fully_impulsive, FullyImpulsiveReport, OptionVerdict};
pub use first_order::{check_complementarity, check_first_order};
pub use higher_order::{check_differentiated, check_higher_order, pairing_derivative, BracketSpec, DifferentiatedTarget};
pub use linear::{linear_chain_conditions, linear_structure};
pub use multiplier::{find_multiplier, Abnormality, MultiplierSearch, SearchConfig, SearchOutcome};
pub use rank::{bracket_pool, kalman_check, kalman_matrix, rank_i1, rank_i2, rank_i2_all};
pub use report::{ConditionRecord, ConditionReport, RankCondition, RankPoint, RankReport, Status};

use alloc::vec::Vec;

use crate::adjoint::Multiplier;
use crate::integrate::SpaceTimeTrajectory;

/// Default tolerances: equalities `eq·(1 + data scale)`, inequalities `ineq` slack.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    pub eq: f64,
    pub ineq: f64,
    /// Blend resolution passed to the Hamiltonian maximization.
    pub resolution: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            eq: 1e-6,
            ineq: 1e-8,
            resolution: 4,
        }
    }
}

/// Singular-value threshold (relative to the largest) used by every rank test.
pub const RANK_TOL: f64 = 1e-9;

/// `(node, piece)` pairs at which a.e. conditions are evaluated: every node with
/// the piece on each side (once when both sides agree).
pub(crate) fn sites(traj: &SpaceTimeTrajectory) -> Vec<(usize, usize)> {
    let steps = traj.steps();
    let mut out = Vec::with_capacity(steps + 2);
    for k in 0..=steps {
        let left = (k > 0).then(|| traj.step_piece[k - 1]);
        let right = (k < steps).then(|| traj.step_piece[k]);
        match (left, right) {
            (Some(l), Some(r)) if l == r => out.push((k, l)),
            (l, r) => {
                if let Some(l) = l {
                    out.push((k, l));
                }
                if let Some(r) = r {
                    out.push((k, r));
                }
            }
        }
    }
    out
}

/// The multiplier scaled to `‖(p0, p(S̄), λ)‖ = 1` (unchanged when that norm vanishes).
pub(crate) fn normalized(mult: &Multiplier) -> (Multiplier, f64) {
    let n = mult.terminal_norm();
    if n > 0.0 {
        (mult.scaled(1.0 / n), n)
    } else {
        (mult.clone(), 0.0)
    }
}
