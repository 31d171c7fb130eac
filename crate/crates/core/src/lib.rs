//! Adaptive side-channel attack synthesis.
//!
//! Path constraints of a target program are grouped into observation classes,
//! the attacker's knowledge is kept as a constraint over the secret, and the
//! information an input would reveal is measured by counting the models of
//! automata built from those constraints.

pub mod automata;
pub mod constraint;
pub mod count;
pub mod engine;
pub mod error;
pub mod info;
pub mod targets;

pub use error::{Error, Result};

/// Exact model counts.
pub type Count = num_bigint::BigUint;
/// Information quantities in double precision.
pub type Bits = info::Bits<f64>;
/// Annealing schedule in double precision.
pub type SaParams = engine::SaParams<f64>;
