// SPDX-License-Identifier: Apache-2.0

//! External tool invocation with a wall-clock limit.

use std::io::{ErrorKind, Read};
use std::path::Path;
use std::process::{Command, Stdio};
use std::thread;
use std::time::{Duration, Instant};

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct ToolOutput {
    pub success: bool,
    pub code: Option<i32>,
    pub stdout: String,
    pub stderr: String,
    pub timed_out: bool,
}

/// Runs `program args…` in `cwd`, killing it after `timeout`. A missing
/// executable is an environment error; every other outcome is reported in
/// the returned [`ToolOutput`].
pub fn run_tool(program: &str, args: &[String], cwd: &Path, timeout: Duration) -> Result<ToolOutput> {
    let mut child = Command::new(program)
        .args(args)
        .current_dir(cwd)
        .stdin(Stdio::null())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .map_err(|e| match e.kind() {
            ErrorKind::NotFound => Error::Environment(format!("'{program}' not found on PATH")),
            _ => Error::Environment(format!("failed to start '{program}': {e}")),
        })?;

    // drain pipes on threads so a chatty tool cannot block on a full buffer
    let mut out_pipe = child.stdout.take().expect("piped stdout");
    let mut err_pipe = child.stderr.take().expect("piped stderr");
    let out_reader = thread::spawn(move || {
        let mut s = Vec::new();
        let _ = out_pipe.read_to_end(&mut s);
        s
    });
    let err_reader = thread::spawn(move || {
        let mut s = Vec::new();
        let _ = err_pipe.read_to_end(&mut s);
        s
    });

    let started = Instant::now();
    let mut timed_out = false;
    let status = loop {
        if let Some(status) = child.try_wait()? {
            break Some(status);
        }
        if started.elapsed() >= timeout {
            let _ = child.kill();
            let _ = child.wait();
            timed_out = true;
            break None;
        }
        thread::sleep(Duration::from_millis(10));
    };
    let stdout = String::from_utf8_lossy(&out_reader.join().unwrap_or_default()).into_owned();
    let stderr = String::from_utf8_lossy(&err_reader.join().unwrap_or_default()).into_owned();
    Ok(ToolOutput {
        success: status.is_some_and(|s| s.success()),
        code: status.and_then(|s| s.code()),
        stdout,
        stderr,
        timed_out,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn missing_tool_is_environment_error() {
        let r = run_tool(
            "definitely-not-a-real-tool-xyz",
            &[],
            Path::new("."),
            Duration::from_secs(1),
        );
        assert!(matches!(r, Err(Error::Environment(_))));
    }

    #[cfg(unix)]
    #[test]
    fn captures_output_and_enforces_timeout() {
        let out = run_tool(
            "sh",
            &["-c".into(), "echo hi; echo err >&2".into()],
            Path::new("."),
            Duration::from_secs(5),
        )
        .unwrap();
        assert!(out.success);
        assert_eq!(out.stdout.trim(), "hi");
        assert_eq!(out.stderr.trim(), "err");
        let slow = run_tool(
            "sh",
            &["-c".into(), "sleep 5".into()],
            Path::new("."),
            Duration::from_millis(100),
        )
        .unwrap();
        assert!(slow.timed_out && !slow.success);
    }
}
