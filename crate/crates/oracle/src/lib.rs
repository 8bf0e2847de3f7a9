//! Reference solvers for small finite-dimensional friction problems
//!
//! ```text
//! find v ∈ K:  (A v − f)·(u − v) + J(u) − J(v) ≥ 0  for all u ∈ K
//! ```
//!
//! where every constrained coordinate carries one of the four boundary
//! friction laws. Two unrelated methods are provided: proximal gradient
//! iteration ([`proximal_gradient_reference`]) and exhaustive enumeration of
//! stick/slip/contact states ([`active_set_enumeration`]).

mod enumerate;
mod instance;
mod prox;

pub use enumerate::{active_set_enumeration, Enumeration, State};
pub use instance::{random_instance, DofLaw, InstanceParams, SmallInstance};
pub use prox::{proximal_gradient_reference, ProxOptions, ProxResult};

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum OracleError {
    #[error("instance is malformed: {0}")]
    Malformed(String),
    #[error("too many constrained dofs for enumeration: {0} (limit {1})")]
    TooLarge(usize, usize),
    #[error("no consistent stick/slip assignment found")]
    NoConsistentAssignment,
    #[error("consistent assignments disagree by {0:e}")]
    NotUnique(f64),
}

pub type Result<T> = std::result::Result<T, OracleError>;
