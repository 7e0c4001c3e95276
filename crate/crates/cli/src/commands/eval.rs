// SPDX-License-Identifier: Apache-2.0

use std::fs;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use rtlopt_core::metrics::{impr_at_k, SampleSet};

use super::optimize::{RunHeader, RUN_RECORD};
use super::{print_json, table, write_jsonl, Format};
use crate::adapters::Session;
use crate::exit::{io_at, CliError, CliResult, OK};

#[derive(Debug, clap::Args)]
pub struct EvalArgs {
    /// Run directories written by `optimize`; defaults to every run in the workspace.
    pub runs: Vec<PathBuf>,
    /// Sample budgets to evaluate, e.g. `--k 1,15,50`.
    #[arg(long, value_delimiter = ',')]
    pub k: Vec<usize>,
}

#[derive(Deserialize)]
struct ArchiveLine {
    generation: u64,
    improvement: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ImprRecord {
    pub circuit: String,
    pub k: usize,
    pub samples: usize,
    /// Absent when the run has fewer samples than `k`.
    pub impr: Option<f64>,
}

fn parse_err(path: &Path, n: usize, e: impl std::fmt::Display) -> CliError {
    CliError::Core(rtlopt_core::Error::Parse(format!("{} line {n}: {e}", path.display())))
}

/// Samples of one run: archived improvements, zero-padded to the
/// generation count in the report header.
pub fn load_run(dir: &Path) -> CliResult<SampleSet> {
    let report = dir.join("report.jsonl");
    let text = fs::read_to_string(&report).map_err(|e| {
        CliError::Core(rtlopt_core::Error::Input(format!(
            "cannot read {}: {e}",
            report.display()
        )))
    })?;
    let first = text.lines().next().unwrap_or_default();
    let header: RunHeader = serde_json::from_str(first).map_err(|e| parse_err(&report, 1, e))?;
    if header.record != RUN_RECORD {
        return Err(parse_err(&report, 1, "not a run header"));
    }
    let mut samples = vec![0.0; header.generations as usize];
    let archive = dir.join("archive.jsonl");
    let f = fs::File::open(&archive).map_err(io_at(&archive))?;
    for (n, line) in BufReader::new(f).lines().enumerate() {
        let line = line.map_err(io_at(&archive))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: ArchiveLine = serde_json::from_str(&line).map_err(|e| parse_err(&archive, n + 1, e))?;
        match samples.get_mut(rec.generation as usize) {
            Some(slot) => *slot = rec.improvement,
            None => return Err(parse_err(&archive, n + 1, "generation beyond the run's count")),
        }
    }
    Ok(SampleSet::new(header.design, samples)?)
}

fn run_dirs(session: &Session, args: &EvalArgs) -> CliResult<Vec<PathBuf>> {
    if !args.runs.is_empty() {
        return Ok(args.runs.clone());
    }
    let root = session.config("eval")?.runs_dir();
    let mut dirs = Vec::new();
    if let Ok(entries) = fs::read_dir(&root) {
        for e in entries {
            let p = e.map_err(io_at(&root))?.path();
            if p.join("report.jsonl").is_file() {
                dirs.push(p);
            }
        }
    }
    dirs.sort();
    if dirs.is_empty() {
        return Err(CliError::Usage(format!("no optimizer runs under {}", root.display())));
    }
    Ok(dirs)
}

pub fn evaluate(sets: &[SampleSet], ks: &[usize]) -> CliResult<Vec<ImprRecord>> {
    let mut out = Vec::new();
    for &k in ks {
        for s in sets {
            let impr = if k <= s.len() { Some(impr_at_k(s, k)?) } else { None };
            out.push(ImprRecord {
                circuit: s.circuit.clone(),
                k,
                samples: s.len(),
                impr,
            });
        }
        let each: Option<Vec<f64>> = out[out.len() - sets.len()..].iter().map(|r| r.impr).collect();
        out.push(ImprRecord {
            circuit: "mean".into(),
            k,
            samples: sets.iter().map(SampleSet::len).min().unwrap_or(0),
            impr: each.map(|v| v.iter().sum::<f64>() / v.len() as f64),
        });
    }
    Ok(out)
}

pub fn run(session: &Session, args: &EvalArgs, format: Format) -> CliResult {
    let ks: Vec<usize> = if !args.k.is_empty() {
        args.k.clone()
    } else {
        session
            .config
            .as_ref()
            .map(|c| c.eval.k.clone())
            .unwrap_or_else(|| vec![1, 15, 50, 104, 210])
    };
    if ks.contains(&0) {
        return Err(CliError::Usage("k values must be at least 1".into()));
    }
    let sets = run_dirs(session, args)?
        .iter()
        .map(|d| load_run(d))
        .collect::<CliResult<Vec<_>>>()?;
    let records = evaluate(&sets, &ks)?;
    for r in records.iter().filter(|r| r.impr.is_none() && r.circuit != "mean") {
        log::warn!("{} has {} samples, fewer than k = {}", r.circuit, r.samples, r.k);
    }
    match format {
        Format::Json => records.iter().for_each(print_json),
        Format::Table => print_table(&sets, &ks, &records),
    }
    if let Some(cfg) = &session.config {
        write_jsonl(&cfg.workspace.join("eval").join("impr.jsonl"), &records)?;
    }
    Ok(OK)
}

fn print_table(sets: &[SampleSet], ks: &[usize], records: &[ImprRecord]) {
    let mut header = vec!["circuit".to_string(), "samples".to_string()];
    header.extend(ks.iter().map(|k| format!("impr@{k}")));
    let names = sets
        .iter()
        .map(|s| (s.circuit.as_str(), s.len().to_string()))
        .chain([("mean", String::new())]);
    let rows: Vec<Vec<String>> = names
        .enumerate()
        .map(|(i, (name, n))| {
            let mut row = vec![name.to_string(), n];
            for (j, _) in ks.iter().enumerate() {
                let r = &records[j * (sets.len() + 1) + i];
                row.push(r.impr.map_or("-".into(), |v| format!("{:.2}%", 100.0 * v)));
            }
            row
        })
        .collect();
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    print!("{}", table(&header, &rows));
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn short_runs_leave_gaps() {
        let a = SampleSet::new("a", vec![0.1, 0.0, 0.3]).unwrap();
        let b = SampleSet::new("b", vec![0.2; 5]).unwrap();
        let r = evaluate(&[a, b], &[1, 4]).unwrap();
        assert_eq!(r.len(), 6);
        assert!((r[2].impr.unwrap() - (0.4 / 3.0 + 0.2) / 2.0).abs() < 1e-15);
        assert_eq!(r[3].impr, None);
        assert!((r[4].impr.unwrap() - 0.2).abs() < 1e-15);
        assert_eq!(r[5].impr, None);
    }
}
