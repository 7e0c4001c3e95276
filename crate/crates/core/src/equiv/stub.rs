// SPDX-License-Identifier: Apache-2.0

//! Scripted simulator for tests and offline demos.
//!
//! ```toml
//! mode = "script"          # or "textual"
//! default = ["PASS"]
//!
//! [[rule]]
//! contains = "q <= q - 1"  # substring of the renamed rewrite
//! lines = ["MISMATCH q 0 1 0", "FAIL"]
//! ```
//!
//! In `textual` mode the stub passes exactly when both designs are the same
//! after comment stripping and whitespace normalization (module suffixes aside).

use std::path::Path;
use std::time::Duration;

use serde::Deserialize;

use super::{SimulationResult, SimulatorAdapter};
use crate::error::{Error, Result};
use crate::model::source_hash;

#[derive(Debug, Clone, Deserialize, PartialEq, Eq)]
pub struct StubRule {
    pub contains: String,
    pub lines: Vec<String>,
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq, Eq, Default)]
#[serde(rename_all = "lowercase")]
pub enum StubMode {
    #[default]
    Script,
    Textual,
}

#[derive(Debug, Clone, Deserialize, PartialEq, Eq)]
pub struct StubSimulator {
    #[serde(default)]
    pub mode: StubMode,
    #[serde(default = "pass_lines")]
    pub default: Vec<String>,
    #[serde(default, rename = "rule")]
    pub rules: Vec<StubRule>,
}

fn pass_lines() -> Vec<String> {
    vec!["PASS".into()]
}

impl StubSimulator {
    pub fn always_pass() -> Self {
        StubSimulator {
            mode: StubMode::Script,
            default: pass_lines(),
            rules: Vec::new(),
        }
    }

    pub fn textual() -> Self {
        StubSimulator {
            mode: StubMode::Textual,
            ..StubSimulator::always_pass()
        }
    }

    pub fn with_rule(mut self, contains: &str, lines: &[&str]) -> Self {
        self.rules.push(StubRule {
            contains: contains.into(),
            lines: lines.iter().map(|s| s.to_string()).collect(),
        });
        self
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Input(format!("stub simulator script: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::Input(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }
}

impl SimulatorAdapter for StubSimulator {
    fn name(&self) -> &str {
        "stub"
    }

    fn run(&self, _testbench: &str, designs: &[String], _timeout: Duration) -> Result<SimulationResult> {
        let rewrite = designs.get(1).map(String::as_str).unwrap_or_default();
        let lines = match self.mode {
            StubMode::Textual => {
                let a = designs.first().map(|s| s.replace("__a", "")).unwrap_or_default();
                let b = rewrite.replace("__b", "");
                if source_hash(&a) == source_hash(&b) {
                    pass_lines()
                } else {
                    vec!["MISMATCH text 0 0 1".into(), "FAIL".into()]
                }
            }
            StubMode::Script => self
                .rules
                .iter()
                .find(|r| rewrite.contains(&r.contains))
                .map_or_else(|| self.default.clone(), |r| r.lines.clone()),
        };
        Ok(SimulationResult::completed(lines))
    }
}
