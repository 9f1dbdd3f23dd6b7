//! The polytope M(Q → P) of matrices realizing linear maps from a
//! sequence-form polytope into a bounded standard-form polytope, together
//! with membership checks, canonicalization and trigger deviations.

mod affine;
mod canonical;
mod system;
mod trigger;

pub use affine::{affine_lift, InequalityPolytope, SlackLift};
pub use canonical::{canonicalize, canonicalize_with_cap, terminal_cover};
pub use system::{
    check_membership, compile_linmap_system, compile_self_map_system, ConstraintKind, LinMapSystem,
    MembershipReport, ReducedSystem, SystemRow,
};
pub use trigger::{raw_trigger_matrix, trigger_deviation_matrix, trigger_sequences};

use crate::sequence_form::SeqFormError;
use nalgebra::DMatrix;
use thiserror::Error;

/// Default cap on the number of reduced plans enumerated for vertex checks.
pub const VERTEX_CHECK_CAP: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    CompiledFeasible,
    Canonicalized,
    Trigger,
    External,
}

/// A d×|Σ| matrix together with where it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct DeviationMatrix {
    pub matrix: DMatrix<f64>,
    pub provenance: Provenance,
}

impl DeviationMatrix {
    pub fn new(matrix: DMatrix<f64>, provenance: Provenance) -> Self {
        DeviationMatrix { matrix, provenance }
    }

    pub fn external(matrix: DMatrix<f64>) -> Self {
        Self::new(matrix, Provenance::External)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinMapError {
    #[error("matrix is {rows}x{cols}, expected {expected_rows}x{expected_cols}")]
    Shape {
        rows: usize,
        cols: usize,
        expected_rows: usize,
        expected_cols: usize,
    },
    #[error("plan {plan} is mapped outside the target (residual {residual:e})")]
    NotIntoTarget { plan: String, residual: f64 },
    #[error("result misses the characterization by {residual:e}")]
    Membership { residual: f64 },
    #[error("sequence {0} cannot trigger a deviation")]
    BadTrigger(usize),
    #[error("continuation violates the subtree constraints by {residual:e}")]
    InfeasibleContinuation { residual: f64 },
    #[error(transparent)]
    SeqForm(#[from] SeqFormError),
}
