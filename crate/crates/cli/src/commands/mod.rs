// SPDX-License-Identifier: Apache-2.0

pub mod equiv;
pub mod eval;
pub mod learn;
pub mod optimize;
pub mod rules;
pub mod synth;

use std::fs;
use std::path::Path;

use clap::ValueEnum;
use serde::Serialize;

use crate::exit::{io_at, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
pub enum Format {
    /// Human-readable text.
    #[default]
    Table,
    /// One JSON record per line.
    Json,
}

/// Replaces `path` with one JSON line per record.
pub fn write_jsonl<T: Serialize>(path: &Path, records: impl IntoIterator<Item = T>) -> CliResult<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(io_at(dir))?;
    }
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(&r).expect("record serializes"));
        out.push('\n');
    }
    fs::write(path, out).map_err(io_at(path))
}

pub fn print_json<T: Serialize>(record: &T) {
    println!("{}", serde_json::to_string(record).expect("record serializes"));
}

/// Left-aligned text table with a header row.
pub fn table(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut width: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for r in rows {
        for (w, cell) in width.iter_mut().zip(r) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let line = |cells: &mut dyn Iterator<Item = &str>| {
        let mut s = String::new();
        for (i, (c, w)) in cells.zip(&width).enumerate() {
            if i > 0 {
                s.push_str("  ");
            }
            s.push_str(&format!("{c:<w$}"));
        }
        s.trim_end().to_string()
    };
    let mut out = line(&mut header.iter().copied());
    out.push('\n');
    for r in rows {
        out.push_str(&line(&mut r.iter().map(String::as_str)));
        out.push('\n');
    }
    out
}
