// SPDX-License-Identifier: Apache-2.0

#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub fn repo() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../..")
        .canonicalize()
        .unwrap()
}

pub fn micro(name: &str) -> PathBuf {
    repo().join("corpus/micro").join(format!("{name}.v"))
}

pub fn stub(name: &str) -> PathBuf {
    repo().join("corpus/stubs").join(format!("{name}.toml"))
}

pub struct Run {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

impl From<Output> for Run {
    fn from(o: Output) -> Self {
        Run {
            code: o.status.code().expect("exited normally"),
            stdout: String::from_utf8(o.stdout).unwrap(),
            stderr: String::from_utf8(o.stderr).unwrap(),
        }
    }
}

pub fn rtlopt(cwd: &Path, args: &[&str]) -> Run {
    Command::new(env!("CARGO_BIN_EXE_rtlopt"))
        .args(args)
        .current_dir(cwd)
        .env_remove("RUST_LOG")
        .output()
        .expect("binary runs")
        .into()
}

/// Stub-driven config in `dir` with workspace `dir/work`; `extra` is appended.
pub fn write_config(dir: &Path, script: &Path, extra: &str) -> PathBuf {
    let text = format!(
        r#"workspace = "work"
seed = 42

[adapters]
llm = "stub"
synthesizer = "mock"
simulator = "builtin"
embedder = "tfidf"

[llm]
script = "{}"
{extra}
"#,
        script.display()
    );
    let path = dir.join("rtlopt.toml");
    fs::write(&path, text).unwrap();
    path
}

pub const MICRO_LEARNING: &str = r#"
[learning]
rewrites_per_design = 4
area_band = [0.0, 100.0]
"#;

pub fn search_section(k: u32, m: u32, s: u32) -> String {
    format!("\n[search]\nbeam_width = {k}\nnum_expand = {m}\nmax_steps = {s}\n")
}

/// Every regular file below `dir`, relative, sorted.
pub fn files_below(dir: &Path) -> Vec<PathBuf> {
    fn walk(root: &Path, d: &Path, out: &mut Vec<PathBuf>) {
        for e in fs::read_dir(d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                walk(root, &p, out);
            } else {
                out.push(p.strip_prefix(root).unwrap().to_path_buf());
            }
        }
    }
    let mut out = Vec::new();
    walk(dir, dir, &mut out);
    out.sort();
    out
}
