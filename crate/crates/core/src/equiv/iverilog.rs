// SPDX-License-Identifier: Apache-2.0

//! Icarus Verilog driver: compiles with `iverilog -g2012` and runs `vvp`.

use std::fs;
use std::path::PathBuf;
use std::time::{Duration, Instant};

use sha2::{Digest, Sha256};

use super::{SimStatus, SimulationResult, SimulatorAdapter};
use crate::error::Result;
use crate::process::run_tool;

#[derive(Debug, Clone)]
pub struct IverilogSimulator {
    /// Per-check directories are created here and kept for inspection.
    pub workdir: PathBuf,
    pub iverilog: String,
    pub vvp: String,
}

impl IverilogSimulator {
    pub fn new(workdir: impl Into<PathBuf>) -> Self {
        IverilogSimulator {
            workdir: workdir.into(),
            iverilog: "iverilog".into(),
            vvp: "vvp".into(),
        }
    }
}

impl SimulatorAdapter for IverilogSimulator {
    fn name(&self) -> &str {
        "iverilog"
    }

    fn run(&self, testbench: &str, designs: &[String], timeout: Duration) -> Result<SimulationResult> {
        let mut hasher = Sha256::new();
        hasher.update(testbench.as_bytes());
        for d in designs {
            hasher.update([0u8]);
            hasher.update(d.as_bytes());
        }
        let digest = hasher.finalize();
        let tag: String = digest[..8].iter().map(|b| format!("{b:02x}")).collect();
        let dir = self.workdir.join(format!("check-{tag}"));
        fs::create_dir_all(&dir)?;
        fs::write(dir.join("tb.v"), testbench)?;
        let mut args: Vec<String> = ["-g2012", "-s", "tb", "-o", "sim.vvp", "tb.v"]
            .map(String::from)
            .to_vec();
        for (i, d) in designs.iter().enumerate() {
            let name = format!("dut_{}.v", (b'a' + i as u8) as char);
            fs::write(dir.join(&name), d)?;
            args.push(name);
        }

        let started = Instant::now();
        let compiled = run_tool(&self.iverilog, &args, &dir, timeout)?;
        let mut log = format!(
            "$ {} {}\n{}{}",
            self.iverilog,
            args.join(" "),
            compiled.stdout,
            compiled.stderr
        );
        if compiled.timed_out || !compiled.success {
            fs::write(dir.join("sim.log"), &log)?;
            let status = if compiled.timed_out {
                SimStatus::TimedOut
            } else {
                SimStatus::CompileFailed
            };
            return Ok(SimulationResult::failed(status, log));
        }
        let left = timeout.saturating_sub(started.elapsed());
        let ran = run_tool(&self.vvp, &["-n".into(), "sim.vvp".into()], &dir, left)?;
        log.push_str(&format!("$ {} -n sim.vvp\n{}{}", self.vvp, ran.stdout, ran.stderr));
        fs::write(dir.join("sim.log"), &log)?;
        let status = if ran.timed_out {
            SimStatus::TimedOut
        } else if !ran.success {
            SimStatus::Crashed
        } else {
            SimStatus::Completed
        };
        Ok(SimulationResult {
            status,
            lines: ran.stdout.lines().map(str::to_string).collect(),
            log,
            coverage: None,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;

    #[test]
    fn missing_binary_is_environment_error() {
        let dir = tempfile::tempdir().unwrap();
        let sim = IverilogSimulator {
            iverilog: "no-such-iverilog-binary".into(),
            ..IverilogSimulator::new(dir.path())
        };
        let r = sim.run(
            "// rtlopt-plan: {}\nmodule tb; endmodule",
            &["".into(), "".into()],
            Duration::from_secs(1),
        );
        assert!(matches!(r, Err(Error::Environment(_))));
    }
}
