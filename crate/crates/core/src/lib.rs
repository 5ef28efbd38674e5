//! Qudit teleportation: Weyl operators, teleportation channels, fidelity
//! analysis, pure-state protocols and resource construction.

// `!(x <= tol)` is used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod cli;
pub mod error;
pub mod fidelity;
pub mod linalg;
pub mod pure;
pub mod resources;
pub mod verify;
pub mod weyl;
