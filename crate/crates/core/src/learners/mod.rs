//! Φ-regret learners over sequence-form strategy spaces and self-play.
//!
//! Three learner kinds share one interface: the no-linear-swap-regret
//! learner (projected gradient descent over M(Q → Q) followed by a
//! fixed-point computation), a trigger-deviation learner of the same shape
//! over the hull of trigger maps, and plain projected gradient descent on Q.

mod external;
mod linear_swap;
mod loss;
mod play;
mod trigger;

pub use external::ExternalLearner;
pub use linear_swap::LinearSwapLearner;
pub use loss::{build_loss_vector, LossModel};
pub use play::{self_play, PlayTrace, PlayerTrace};
pub use trigger::{TriggerLearner, TriggerSet};

use crate::convex_opt::{FixedPointError, ProjectionError};
use crate::linmap::LinMapError;
use crate::sequence_form::SequenceIndex;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Step size η^t.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Schedule {
    InvSqrt,
    Constant(f64),
}

impl Schedule {
    pub fn eta(&self, t: usize) -> f64 {
        match *self {
            Schedule::InvSqrt => 1.0 / (t.max(1) as f64).sqrt(),
            Schedule::Constant(eta) => eta,
        }
    }
}

/// Projection accuracy ε^t = t^{-5/2}, floored at 1e-12.
pub fn projection_tolerance(t: usize) -> f64 {
    (t.max(1) as f64).powf(-2.5).max(1e-12)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LearnerKind {
    LinearSwap,
    Trigger,
    External,
}

impl LearnerKind {
    pub fn name(&self) -> &'static str {
        match self {
            LearnerKind::LinearSwap => "linear-swap",
            LearnerKind::Trigger => "trigger",
            LearnerKind::External => "external",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "linear-swap" => Some(LearnerKind::LinearSwap),
            "trigger" => Some(LearnerKind::Trigger),
            "external" => Some(LearnerKind::External),
            _ => None,
        }
    }
}

/// Initial deviation matrix and strategy of the linear-swap learner.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Start {
    /// A^1 = I and x^1 the uniform behavioral strategy.
    #[default]
    Identity,
    /// A^1 the constant map onto the first enumerated plan, x^1 that plan.
    FirstPlan,
}

impl Start {
    pub fn name(&self) -> &'static str {
        match self {
            Start::Identity => "identity",
            Start::FirstPlan => "first-plan",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "identity" => Some(Start::Identity),
            "first-plan" => Some(Start::FirstPlan),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnerConfig {
    pub kind: LearnerKind,
    pub schedule: Schedule,
    /// Ignored by the trigger and external learners.
    #[serde(default)]
    pub start: Start,
    /// Store the deviation matrix every `thin` iterations (0: never).
    pub thin: usize,
    /// Draw a reduced plan from x^t at every iteration.
    pub sample_plans: bool,
}

impl LearnerConfig {
    pub fn new(kind: LearnerKind, schedule: Schedule) -> Self {
        LearnerConfig {
            kind,
            schedule,
            start: Start::Identity,
            thin: 0,
            sample_plans: false,
        }
    }

    /// Diameter and loss bounds D = L = |Σ| used by the regret guarantee.
    pub fn bounds(index: &SequenceIndex) -> (f64, f64) {
        let n = index.num_sequences() as f64;
        (n, n)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LearnerError {
    #[error(transparent)]
    Projection(#[from] ProjectionError),
    #[error(transparent)]
    FixedPoint(#[from] FixedPointError),
    #[error(transparent)]
    LinMap(#[from] LinMapError),
    #[error("loss entry {index} = {value} outside [0, 1]")]
    LossRange { index: usize, value: f64 },
    #[error("loss has length {got}, expected {expected}")]
    LossLength { got: usize, expected: usize },
}

/// Postcondition measurements for one iteration.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct StepAudit {
    /// `⟨ℓ^t, A^t x^t⟩`, the loss of the matrix-level learner.
    pub matrix_loss: f64,
    pub fixed_point_residual: f64,
    pub membership_residual: f64,
}

pub(crate) fn check_loss(loss: &DVector<f64>, n: usize) -> Result<(), LearnerError> {
    if loss.len() != n {
        return Err(LearnerError::LossLength {
            got: loss.len(),
            expected: n,
        });
    }
    for (i, &v) in loss.iter().enumerate() {
        if !(-1e-12..=1.0 + 1e-12).contains(&v) {
            return Err(LearnerError::LossRange { index: i, value: v });
        }
    }
    Ok(())
}

/// A learner of any kind.
#[derive(Debug, Clone)]
pub enum Learner {
    LinearSwap(LinearSwapLearner),
    Trigger(TriggerLearner),
    External(ExternalLearner),
}

impl Learner {
    pub fn new(index: &SequenceIndex, config: &LearnerConfig) -> Result<Self, LearnerError> {
        Ok(match config.kind {
            LearnerKind::LinearSwap => {
                Learner::LinearSwap(LinearSwapLearner::with_start(index, config.schedule, config.start)?)
            }
            LearnerKind::Trigger => Learner::Trigger(TriggerLearner::new(index, config.schedule)?),
            LearnerKind::External => Learner::External(ExternalLearner::new(index, config.schedule)),
        })
    }

    pub fn strategy(&self) -> &DVector<f64> {
        match self {
            Learner::LinearSwap(l) => l.strategy(),
            Learner::Trigger(l) => l.strategy(),
            Learner::External(l) => l.strategy(),
        }
    }

    /// Current deviation matrix; the external learner has none.
    pub fn matrix(&self) -> Option<&DMatrix<f64>> {
        match self {
            Learner::LinearSwap(l) => Some(l.matrix()),
            Learner::Trigger(l) => Some(l.matrix()),
            Learner::External(_) => None,
        }
    }

    /// Feeds ℓ^t and advances; returns the audit of the iterate that was
    /// played at t.
    pub fn observe_loss(&mut self, loss: &DVector<f64>) -> Result<StepAudit, LearnerError> {
        match self {
            Learner::LinearSwap(l) => l.observe_loss(loss),
            Learner::Trigger(l) => l.observe_loss(loss),
            Learner::External(l) => l.observe_loss(loss),
        }
    }
}
