//! Domain-cutoff analysis and explicit-state verification for replicated
//! processes that coordinate through partition and consensus agreements.
//!
//! The pipeline reads a `.mer` model ([`frontend`]), classifies its integer
//! domains as scalarsets ([`scalarset`]), computes a bounded region and the
//! resulting domain cutoff ([`lts`], [`region`]), rewrites the model to the
//! cutoff size ([`reduction`]) and model checks the result ([`global`]).
//! [`perm`] holds the permutation machinery used to test the reduction.

pub mod frontend;
pub mod scalarset;
pub mod local;
pub mod global;
pub mod lts;
pub mod region;
pub mod reduction;
pub mod perm;
