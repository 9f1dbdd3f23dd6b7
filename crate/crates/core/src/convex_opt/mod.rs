//! Linear programming, Euclidean projection and fixed-point primitives.

mod fixed_point;
mod lp;
mod projection;

pub use fixed_point::{fixed_point, FixedPointError};
pub use lp::{solve_lp, solve_lp_within, Cmp, LinearProgram, LpError, LpRow, LpSolution, Sense};
pub use projection::{project, projection_accuracy, vi_gap, AffineBoxSet, Projection, ProjectionError};

/// Tolerance ladder shared by every solver call and audit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Primal feasibility of solver outputs.
    pub feasibility: f64,
    /// `‖A x − x‖∞` for fixed points.
    pub fixed_point: f64,
    /// Membership and equivalence audits.
    pub audit: f64,
}

pub const TOLERANCES: Tolerances = Tolerances {
    feasibility: 1e-9,
    fixed_point: 1e-8,
    audit: 1e-7,
};

impl Default for Tolerances {
    fn default() -> Self {
        TOLERANCES
    }
}
