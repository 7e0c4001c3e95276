// SPDX-License-Identifier: Apache-2.0

//! Simulation-based equivalence checking.
//!
//! Both designs are renamed apart (`__a` / `__b` suffixes), driven from one
//! pseudo-random stimulus stream and compared after every cycle. A verdict of
//! `Equivalent` only means no difference was observed.

mod builtin;
pub mod exhaustive;
mod iverilog;
mod stub;
pub mod testbench;

use std::sync::LazyLock;
use std::time::Duration;

use regex::Regex;
use serde::{Deserialize, Serialize};

pub use builtin::BuiltinSimulator;
pub use iverilog::IverilogSimulator;
pub use stub::{StubRule, StubSimulator};
pub use testbench::{generate_testbench, TestbenchPlan};

use crate::error::{Error, Result};
use crate::model::{EquivalenceVerdict, RtlDesign};
use crate::verilog::{extract_interface, rename_modules};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StimulusConfig {
    pub num_sequences: u32,
    pub cycles_per_sequence: u32,
    pub reset_cycles: u32,
    pub seed: u64,
    /// Delay between driving inputs and sampling outputs, combinational designs only.
    pub settle_time: u32,
    pub timeout_secs: u64,
}

impl Default for StimulusConfig {
    fn default() -> Self {
        StimulusConfig {
            num_sequences: 5,
            cycles_per_sequence: 1000,
            reset_cycles: 5,
            seed: 42,
            settle_time: 10,
            timeout_secs: 120,
        }
    }
}

impl StimulusConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_sequences == 0 || self.cycles_per_sequence == 0 {
            return Err(Error::Domain(
                "stimulus needs at least one sequence and one cycle".into(),
            ));
        }
        if self.settle_time == 0 {
            return Err(Error::Domain("settle time must be positive".into()));
        }
        Ok(())
    }

    pub fn timeout(&self) -> Duration {
        Duration::from_secs(self.timeout_secs)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimStatus {
    Completed,
    CompileFailed,
    TimedOut,
    Crashed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationResult {
    pub status: SimStatus,
    /// Testbench output, one entry per line.
    pub lines: Vec<String>,
    pub log: String,
    pub coverage: Option<f64>,
}

impl SimulationResult {
    pub fn completed(lines: Vec<String>) -> Self {
        SimulationResult {
            status: SimStatus::Completed,
            lines,
            log: String::new(),
            coverage: None,
        }
    }

    pub fn failed(status: SimStatus, log: impl Into<String>) -> Self {
        SimulationResult {
            status,
            lines: Vec::new(),
            log: log.into(),
            coverage: None,
        }
    }
}

/// Runs a generated testbench against two renamed designs. `designs[0]`
/// defines the `dut_a` module and `designs[1]` the `dut_b` module.
pub trait SimulatorAdapter: Send + Sync {
    fn name(&self) -> &str;
    fn run(&self, testbench: &str, designs: &[String], timeout: Duration) -> Result<SimulationResult>;
}

static TOKEN: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^(PASS|FAIL|MISMATCH\s+\S+\s+\d+\s+\S+\s+\S+)$").expect("valid regex"));

/// Maps simulator output onto a verdict. Lines outside the token grammar are ignored.
pub fn verdict_from(result: &SimulationResult) -> EquivalenceVerdict {
    if result.status != SimStatus::Completed {
        let first = result.log.lines().next().unwrap_or_default();
        return EquivalenceVerdict::inconclusive(format!("simulation {:?}: {first}", result.status));
    }
    let tokens: Vec<&str> = result
        .lines
        .iter()
        .map(|l| l.trim())
        .filter(|l| TOKEN.is_match(l))
        .collect();
    if let Some(m) = tokens.iter().find(|t| t.starts_with("MISMATCH")) {
        let f: Vec<&str> = m.split_whitespace().collect();
        return EquivalenceVerdict::inequivalent(format!(
            "output {} differs at cycle {}: original 'h{}, rewrite 'h{}",
            f[1], f[2], f[3], f[4]
        ));
    }
    let pass = tokens.contains(&"PASS");
    let fail = tokens.contains(&"FAIL");
    if pass && !fail {
        EquivalenceVerdict::equivalent("no mismatch observed")
    } else {
        EquivalenceVerdict::inconclusive("testbench output carried no verdict")
    }
}

/// Compares `rewrite` against `original` by co-simulation.
///
/// Problems with the original are errors; problems with the rewrite (parse
/// failure, different interface) yield an `Inconclusive` verdict.
pub fn check_equivalence(
    original: &RtlDesign,
    rewrite: &RtlDesign,
    simulator: &dyn SimulatorAdapter,
    config: &StimulusConfig,
) -> Result<EquivalenceVerdict> {
    let orig_iface = extract_interface(original).map_err(|e| match e {
        Error::Unsupported(_) | Error::Environment(_) => e,
        other => Error::Input(format!("original design: {other}")),
    })?;
    let new_iface = match extract_interface(rewrite) {
        Ok(i) => i,
        Err(e) => return Ok(EquivalenceVerdict::inconclusive(format!("rewrite interface: {e}"))),
    };
    if !orig_iface.same_shape(&new_iface) {
        return Ok(EquivalenceVerdict::inconclusive(format!(
            "interface mismatch: {} vs {}",
            orig_iface.summary(),
            new_iface.summary()
        )));
    }
    let src_a = rename_modules(&original.source, "__a").map_err(|e| Error::Input(format!("original design: {e}")))?;
    let src_b = match rename_modules(&rewrite.source, "__b") {
        Ok(s) => s,
        Err(e) => return Ok(EquivalenceVerdict::inconclusive(format!("rewrite: {e}"))),
    };
    let plan = testbench::plan_for(
        &orig_iface,
        config,
        &format!("{}__a", orig_iface.top_module),
        &format!("{}__b", new_iface.top_module),
    )?;
    let tb = testbench::render(&plan);
    let result = simulator.run(&tb, &[src_a, src_b], config.timeout())?;
    Ok(verdict_from(&result))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::VerdictStatus;

    fn done(lines: &[&str]) -> SimulationResult {
        SimulationResult::completed(lines.iter().map(|s| s.to_string()).collect())
    }

    #[test]
    fn verdict_mapping() {
        assert_eq!(verdict_from(&done(&["PASS"])).status, VerdictStatus::Equivalent);
        assert_eq!(
            verdict_from(&done(&["MISMATCH y 3 0f 0e", "FAIL"])).status,
            VerdictStatus::Inequivalent
        );
        assert_eq!(
            verdict_from(&done(&["MISMATCH y 3 0f 0e", "FAIL"])).detail,
            "output y differs at cycle 3: original 'h0f, rewrite 'h0e"
        );
        assert_eq!(verdict_from(&done(&["FAIL"])).status, VerdictStatus::Inconclusive);
        assert_eq!(
            verdict_from(&done(&["PASS", "FAIL"])).status,
            VerdictStatus::Inconclusive
        );
        assert_eq!(verdict_from(&done(&["hello"])).status, VerdictStatus::Inconclusive);
        assert_eq!(verdict_from(&done(&["PASSED"])).status, VerdictStatus::Inconclusive);
        assert_eq!(
            verdict_from(&SimulationResult::failed(SimStatus::TimedOut, "slow")).status,
            VerdictStatus::Inconclusive
        );
        assert_eq!(
            verdict_from(&SimulationResult::failed(SimStatus::CompileFailed, "syntax")).status,
            VerdictStatus::Inconclusive
        );
    }

    #[test]
    fn config_validation() {
        assert!(StimulusConfig::default().validate().is_ok());
        let bad = StimulusConfig {
            cycles_per_sequence: 0,
            ..StimulusConfig::default()
        };
        assert!(bad.validate().is_err());
    }
}
