//! Impulsive (space-time) extension of control-affine optimal control problems.
//!
//! The crate covers the whole numerical pipeline for checking first- and
//! higher-order maximum principles on a space-time process:
//!
//! * [`bracket`]: formal iterated brackets, switch-numbers and smoothness ledgers.
//! * [`expr`] and [`field`]: symbolic expressions, vector fields and Lie brackets.
//! * [`problem`], [`control`] and [`integrate`]: problem data, the strict-sense to
//!   space-time embedding, canonical parameterization and fixed-step integration.
//! * [`hamiltonian`] and [`adjoint`]: Hamiltonians, adjoint paths and the
//!   fundamental matrix of the variational equation.
//! * [`variations`]: needle and bracket-like variations and their asymptotics.
//! * [`checker`]: condition reports, multiplier search, rank conditions and the
//!   fully impulsive classification.
//!
//! The crate is `no_std` (with `alloc`); file formats and the command line live in
//! the companion `impulsive-cli` crate.
#![cfg_attr(not(test), no_std)]
// NaN-rejecting `!(a < b)` tests and index loops over paired arrays are deliberate
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop, clippy::redundant_guards)]

extern crate alloc;

pub mod adjoint;
pub mod bracket;
pub mod checker;
pub mod control;
pub mod error;
pub mod expr;
pub mod field;
pub mod hamiltonian;
pub mod integrate;
pub mod linalg;
pub mod problem;
pub mod sampling;
pub mod variations;

pub use adjoint::{FundamentalRecord, Multiplier};
pub use bracket::{BracketPath, FormalBracket, SmoothnessRequirement};
pub use control::{ControlPiece, SpaceTimeControl, StrictControl, StrictPiece};
pub use error::{Error, Result};
pub use expr::{EvalContext, Expr, Var};
pub use field::{FieldAssignment, Smoothness, VectorField};
pub use integrate::{IntegratorConfig, SpaceTimeTrajectory};
pub use linalg::Matrix;
pub use problem::{ConeSpec, ProblemData, ProblemSpec, Target};
