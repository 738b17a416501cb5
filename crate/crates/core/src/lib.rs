//! Bernoulli (n,k)-hyperplane percolation.
//!
//! A site `v` of `Z^n` is open when, for every coordinate `k`-plane `I`, the
//! projection of `v` onto `I` is open in an independent Bernoulli field on
//! that plane. This crate samples that field reproducibly, explores clusters,
//! estimates connectivity decay, and checks the combinatorial constructions
//! used to analyse the model (walk synchronization, crossing lifting, the
//! inclined-plane basis and the renormalized box lattice) against
//! brute-force oracles.

pub mod cluster;
pub mod crossing;
pub mod error;
pub mod field;
pub mod lattice;
pub mod lifting;
pub mod parallel;
pub mod plane;
pub mod renorm;
pub mod rng;
pub mod stats;

pub use error::{Error, Result};
pub use field::{FieldView, HyperplaneField, ParamVector, ViewMode};
pub use lattice::{IndexSet, Lattice, LatticeBox, Site};
