//! Backward induction for BSDEs with dividend streams on the lattice.
//!
//! At node `(i, j)` the solver finds the fixed point of
//! `y = E[Y(i+1) | node] + g(t_i, y, z) dt + dK(i, j)` with
//! `z = (Y(i+1, j+1) - Y(i+1, j)) / (2 sqrt(dt))`.

mod claim;
mod mechanism;
mod solver;
mod verdicts;

pub use claim::{DividendStream, LognormalMap, TerminalClaim};
pub use mechanism::{
    as_mechanism, paste, price_path_dependent, price_per_origin, LatticeMechanism, MechanismHandle,
    PastedMechanism, PricingMechanism,
};
pub use solver::{implicit_step, price, solve_bsde, solve_range, PricingResult, StepSolution};
pub use verdicts::{
    check_domination, compare, monotone_condition, sign_flip_check, ComparisonVerdict,
    DominationVerdict, NodeRef, SignFlipVerdict, VerdictStatus,
};

/// Picard stopping tolerance on successive iterates.
pub const PICARD_TOL: f64 = 1e-12;
/// Iteration cap for the implicit step.
pub const PICARD_MAX_ITERS: usize = 100;
/// Residual above which a capped iteration is reported as divergent.
pub const PICARD_FAIL_RESIDUAL: f64 = 1e-9;
/// Node-wise tolerance of comparison and domination verdicts.
pub const VERDICT_TOL: f64 = 1e-9;
