// SPDX-License-Identifier: Apache-2.0

//! Synthesis through external tools driven by configurable command templates.
//!
//! Each argument may contain `{design}`, `{top}`, `{liberty}`, `{workdir}` and
//! `{clock_period}`. Every run gets its own directory (named by a hash of the
//! source and constraints) under the configured workspace, and all tool
//! output is kept there in `flow.log`.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::{Condvar, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{is_self_contained, parse_report, Flow, SynthesisAdapter, SynthesisConstraints};
use crate::error::{Error, Result};
use crate::model::{PpaMetrics, RtlDesign};
use crate::process::run_tool;
use crate::verilog::find_top;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowCommands {
    /// Lightweight flow: elaborate and map. Success means synthesizable.
    pub check: Vec<Vec<String>>,
    /// Accurate flow; the combined output plus `reports` feed the parser.
    pub synthesize: Vec<Vec<String>>,
    /// Files (relative to the run directory) appended to the parsed text.
    #[serde(default)]
    pub reports: Vec<String>,
    #[serde(default = "default_schema")]
    pub schema: String,
    pub liberty: String,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
    /// Maximum concurrent tool runs for this adapter.
    #[serde(default = "default_parallel")]
    pub max_parallel: usize,
}

fn default_schema() -> String {
    "open".into()
}

fn default_timeout() -> u64 {
    600
}

fn default_parallel() -> usize {
    2
}

struct Slots {
    free: Mutex<usize>,
    cv: Condvar,
}

struct SlotGuard<'a>(&'a Slots);

impl Slots {
    fn acquire(&self) -> SlotGuard<'_> {
        let mut free = self.free.lock().unwrap_or_else(|p| p.into_inner());
        while *free == 0 {
            free = self.cv.wait(free).unwrap_or_else(|p| p.into_inner());
        }
        *free -= 1;
        SlotGuard(self)
    }
}

impl Drop for SlotGuard<'_> {
    fn drop(&mut self) {
        *self.0.free.lock().unwrap_or_else(|p| p.into_inner()) += 1;
        self.0.cv.notify_one();
    }
}

pub struct CommandSynthesizer {
    commands: FlowCommands,
    workspace: PathBuf,
    slots: Slots,
}

impl CommandSynthesizer {
    pub fn new(commands: FlowCommands, workspace: impl Into<PathBuf>) -> Self {
        let n = commands.max_parallel.max(1);
        CommandSynthesizer {
            commands,
            workspace: workspace.into(),
            slots: Slots {
                free: Mutex::new(n),
                cv: Condvar::new(),
            },
        }
    }

    fn run_dir(&self, design: &RtlDesign, constraints: &SynthesisConstraints, phase: &str) -> Result<PathBuf> {
        let mut h = Sha256::new();
        h.update(design.source.as_bytes());
        h.update(serde_json::to_vec(constraints).unwrap_or_default());
        h.update(phase.as_bytes());
        let tag: String = h.finalize()[..8].iter().map(|b| format!("{b:02x}")).collect();
        let dir = self.workspace.join(format!("synth-{tag}"));
        fs::create_dir_all(&dir)?;
        fs::write(dir.join("design.v"), &design.source)?;
        Ok(dir)
    }

    fn expand(&self, arg: &str, dir: &Path, top: &str, constraints: &SynthesisConstraints) -> String {
        let period = constraints
            .clock_period
            .map_or_else(|| "0".to_string(), |p| p.to_string());
        arg.replace("{design}", &dir.join("design.v").to_string_lossy())
            .replace("{top}", top)
            .replace("{liberty}", &self.commands.liberty)
            .replace("{workdir}", &dir.to_string_lossy())
            .replace("{clock_period}", &period)
    }

    /// Runs `steps` in order; returns the combined log and whether all succeeded.
    fn run_steps(
        &self,
        steps: &[Vec<String>],
        design: &RtlDesign,
        constraints: &SynthesisConstraints,
        phase: &str,
    ) -> Result<(PathBuf, String, bool)> {
        let top = match &design.top_module {
            Some(t) => t.clone(),
            None => find_top(&design.source)?,
        };
        let dir = self.run_dir(design, constraints, phase)?;
        let timeout = Duration::from_secs(self.commands.timeout_secs);
        let _slot = self.slots.acquire();
        let mut log = String::new();
        for step in steps {
            let Some((program, args)) = step.split_first() else {
                continue;
            };
            let args: Vec<String> = args.iter().map(|a| self.expand(a, &dir, &top, constraints)).collect();
            let out = run_tool(program, &args, &dir, timeout)?;
            log.push_str(&out.stdout);
            log.push_str(&out.stderr);
            if out.timed_out {
                fs::write(dir.join("flow.log"), &log)?;
                return Err(Error::Environment(format!("'{program}' timed out after {timeout:?}")));
            }
            if !out.success {
                fs::write(dir.join("flow.log"), &log)?;
                return Ok((dir, log, false));
            }
        }
        fs::write(dir.join("flow.log"), &log)?;
        Ok((dir, log, true))
    }
}

impl SynthesisAdapter for CommandSynthesizer {
    fn name(&self) -> &str {
        "command"
    }

    fn version(&self) -> String {
        let first = self
            .commands
            .synthesize
            .iter()
            .filter_map(|s| s.first())
            .cloned()
            .collect::<Vec<_>>();
        format!("command[{}]", first.join(","))
    }

    fn check_synthesizable(&self, design: &RtlDesign) -> Result<bool> {
        if !is_self_contained(design) {
            return Ok(false);
        }
        let constraints = SynthesisConstraints {
            flow: Flow::Lightweight,
            ..SynthesisConstraints::default()
        };
        let (_, _, ok) = self.run_steps(&self.commands.check, design, &constraints, "check")?;
        Ok(ok)
    }

    fn synthesize(&self, design: &RtlDesign, constraints: &SynthesisConstraints) -> Result<PpaMetrics> {
        constraints.validate()?;
        let steps = match constraints.flow {
            Flow::Lightweight => &self.commands.check,
            Flow::Accurate => &self.commands.synthesize,
        };
        let (dir, mut text, ok) = self.run_steps(steps, design, constraints, "synth")?;
        if !ok {
            return Err(Error::Input(format!(
                "synthesis failed for '{}'; see {}",
                design.design_id,
                dir.join("flow.log").display()
            )));
        }
        for r in &self.commands.reports {
            let path = dir.join(r);
            let body = fs::read_to_string(&path)
                .map_err(|e| Error::Parse(format!("report {} unreadable: {e}", path.display())))?;
            text.push('\n');
            text.push_str(&body);
        }
        parse_report(&text, &self.commands.schema)
    }
}
