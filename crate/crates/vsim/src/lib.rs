// SPDX-License-Identifier: Apache-2.0

//! A small four-state simulator for a synthesizable Verilog-2005 subset.
//!
//! Supported: modules with parameters, ANSI and non-ANSI ports, continuous
//! assigns, `always` blocks (combinational and edge-triggered), blocking and
//! nonblocking assignment, `if`/`case`/`casez`/`casex`/`for`, functions,
//! memories, gate primitives and hierarchical instantiation. Vectors are
//! limited to 128 bits. Delays, tasks, `generate` and `inout` are rejected
//! with [`VsimError::Unsupported`].

pub mod ast;
pub mod elab;
pub mod eval;
pub mod lexer;
pub mod parser;
pub mod sim;
pub mod value;

use std::sync::Arc;

pub use elab::Design;
pub use sim::Simulator;
pub use value::Logic;

#[derive(Debug, thiserror::Error, Clone, PartialEq, Eq)]
pub enum VsimError {
    #[error("parse error at line {line}: {msg}")]
    Parse { line: u32, msg: String },
    #[error("unsupported construct: {0}")]
    Unsupported(String),
    #[error("elaboration error: {0}")]
    Elab(String),
    #[error("combinational loop did not settle (last active: {0})")]
    CombLoop(String),
}

impl VsimError {
    pub(crate) fn parse(line: u32, msg: impl Into<String>) -> Self {
        VsimError::Parse { line, msg: msg.into() }
    }
}

/// Parses `src` and elaborates `top`.
pub fn compile(src: &str, top: &str) -> Result<Arc<Design>, VsimError> {
    let file = parser::parse(src)?;
    Ok(Arc::new(elab::elaborate(&file, top)?))
}
