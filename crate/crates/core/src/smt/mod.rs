//! SMT-LIB encoding and solver interaction.

pub mod encode;
pub mod flatten;
pub mod sexp;
pub mod solver;

pub use encode::{Encoder, Profile};
pub use sexp::Sexp;
pub use solver::{check_validity, Formula, SolverConfig, SolverError, SolverVerdict};
