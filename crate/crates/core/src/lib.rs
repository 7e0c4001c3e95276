// SPDX-License-Identifier: Apache-2.0

//! Contrastive rule learning and retrieval-guided beam search for
//! register-transfer-level power, performance and area optimization.

// `!(x > 0.0)` style guards are meant to reject NaN as well
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod corpus;
pub mod equiv;
pub mod error;
pub mod learn;
pub mod library;
pub mod llm;
pub mod metrics;
pub mod model;
pub mod mutate;
pub mod optimize;
pub mod process;
pub mod synth;
pub mod tfidf;
pub mod toolchain;
pub mod verilog;

pub use error::{Error, Result};
