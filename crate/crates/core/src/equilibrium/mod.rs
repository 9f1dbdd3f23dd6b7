//! Regret measurement for traces and deviation gaps for joint plan
//! distributions, from external deviations up to arbitrary plan swaps.
//!
//! All gaps share one form. With `G = Σ w ℓ xᵀ` and baseline `B = Σ w ⟨ℓ, x⟩`
//! (losses ℓ, played points x, weights w), a deviation φ gains
//! `B − ⟨ℓ, φ(x)⟩` summed the same way, which is linear in the matrix of φ.

pub mod fixtures;
mod gaps;
mod joint;
mod lce;
mod maxpay;
mod regret;

pub use gaps::{external_gap, linear_swap_gap, trigger_gap};
pub use joint::{empirical_joint, sampled_joint, JointDistribution};
pub use lce::{is_linear_swap, lce_gap, swap_gain, Auditor, SwapGain, FULL_SWAP_PLAN_CAP};
pub use maxpay::{maxpay_search, MaxPayResult, MAXPAY_GAP_TOL};
pub use regret::{
    external_regret, linear_swap_regret, matrix_regret, regret_curve, trigger_regret, RegretAccumulator, RegretPoint,
};

use crate::convex_opt::LpError;
use crate::linmap::LinMapError;
use crate::sequence_form::SeqFormError;
use nalgebra::{DMatrix, DVector};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DeviationClass {
    External,
    Trigger,
    LinearSwap,
    FullSwap,
}

impl DeviationClass {
    pub fn name(&self) -> &'static str {
        match self {
            DeviationClass::External => "external",
            DeviationClass::Trigger => "trigger",
            DeviationClass::LinearSwap => "linear-swap",
            DeviationClass::FullSwap => "full-swap",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "external" => Some(DeviationClass::External),
            "trigger" => Some(DeviationClass::Trigger),
            "linear-swap" => Some(DeviationClass::LinearSwap),
            "full-swap" => Some(DeviationClass::FullSwap),
            _ => None,
        }
    }
}

/// The deviation attaining a reported gap.
#[derive(Debug, Clone, PartialEq)]
pub enum Witness {
    /// Constant deviation to a point of Q.
    Point(DVector<f64>),
    /// Trigger sequence and continuation (given over all of Σ).
    Trigger { sequence: usize, continuation: DVector<f64> },
    Matrix(DMatrix<f64>),
    /// Replacement plan index for every plan index.
    SwapTable(Vec<usize>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct GapCertificate {
    pub player: usize,
    pub class: DeviationClass,
    pub gap: f64,
    pub witness: Witness,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EquilibriumError {
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error(transparent)]
    LinMap(#[from] LinMapError),
    #[error(transparent)]
    SeqForm(#[from] SeqFormError),
    #[error("trace has no iterations for player {0}")]
    EmptyTrace(usize),
    #[error("plan {0} is not an enumerated plan of the player")]
    UnknownPlan(String),
    #[error("{count} plans exceed the brute-force limit of {cap}")]
    TooManyPlans { count: usize, cap: usize },
    #[error("invalid joint distribution: {0}")]
    InvalidJoint(String),
}
