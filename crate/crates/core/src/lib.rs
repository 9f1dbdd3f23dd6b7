//! No-linear-swap-regret learning dynamics for extensive-form games.
//!
//! The crate compiles the polytope of all linear maps from a sequence-form
//! strategy space into a bounded polytope, runs projected-gradient
//! Φ-regret learners over it, and audits joint distributions of play for
//! linear-deviation correlated equilibrium.

pub mod efg_model;
pub mod sequence_form;
pub mod convex_opt;
pub mod linmap;
pub mod learners;
pub mod equilibrium;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
