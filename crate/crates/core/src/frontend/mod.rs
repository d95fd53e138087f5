//! Reading and writing `.mer` model files.
//!
//! A model file holds one replicated process: its variables, message events,
//! locations with guarded action handlers, and an optional
//! `safety agreement <var> in {<loc>, ...}` trailer. Agreement instances
//! (`partition<id>` and `consensus<id>`) are introduced by the handlers that
//! use them rather than in the `events` block.

pub mod ast;
mod diag;
mod lexer;
mod parser;
mod pretty;

pub use ast::*;
pub use diag::{Diagnostic, DiagnosticKind, Diagnostics};
pub use parser::{parse_model, parse_spec};
pub use pretty::{expr_to_string, pretty_print};

#[cfg(test)]
mod tests;
