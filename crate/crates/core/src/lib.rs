//! Time-convolutionless (TCL) generators for open quantum systems.
//!
//! The reduced dynamics of a system coupled to a bath through `H_SB = S ⊗ B`
//! obeys `ρ̇_S = 𝒢(t) ρ_S` with `𝒢 = Λ̇ Λ⁻¹`. This crate builds `𝒢` order by order
//! from the moments of the dynamical map, checks the recursion against the
//! cut-diagram (composition) expansion, propagates states, resums the series into a
//! nested time-ordered exponential, and compares everything with an exact
//! system-plus-bath reference for small discrete baths.

pub mod bath;
pub mod error;
pub mod liouville;
pub mod oracle;
pub mod quadrature;
pub mod resummation;
pub mod tcl;

pub use error::{Error, Result};
pub use liouville::{
    anticommutator_superop, commutator_superop, expm, interaction_picture_op, sigma_superop,
    trace_row, unvec, vec, CMatrix, InteractionFrame, Operator, Picture, Sigma, SuperOperator,
    SystemModel, SystemState, C64,
};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
