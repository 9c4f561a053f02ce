//! Learning Horn-clause definitions over dirty relational data, guided by matching
//! dependencies and conditional functional dependencies.

pub mod constraints;
pub mod eval;
pub mod generalization;
pub mod learner;
pub mod logic;
pub mod saturation;
pub mod store;
pub mod subsumption;
pub mod textsim;

#[cfg(test)]
mod fixtures;
#[cfg(any(test, feature = "oracle"))]
pub mod oracle;
