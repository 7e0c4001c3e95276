// SPDX-License-Identifier: Apache-2.0

use std::fs;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use rtlopt_core::corpus::load_design;
use rtlopt_core::model::{SearchConfig, Target};
use rtlopt_core::optimize::{beam_search, BeamEntry, SearchOutcome};

use super::{print_json, table, write_jsonl, Format};
use crate::adapters::Session;
use crate::commands::learn::display_rel;
use crate::exit::{io_at, CliResult, OK};

#[derive(Debug, clap::Args)]
pub struct OptimizeArgs {
    /// Verilog file holding the design to optimize.
    pub design: PathBuf,
    /// Rule library; defaults to `rules.jsonl` in the workspace.
    #[arg(long)]
    pub library: Option<PathBuf>,
}

/// First line of a run's `report.jsonl`; `eval` reads it back.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunHeader {
    pub record: String,
    pub design: String,
    pub target: Target,
    pub seed: u64,
    pub search: SearchConfig,
    pub library_rules: usize,
    pub budget: u64,
    pub generations: u64,
    pub root: f64,
    pub best_id: String,
    pub best: f64,
    pub best_improvement: f64,
    pub equivalent: usize,
    pub rejected: usize,
}

#[derive(Serialize)]
struct StepRecord<'a> {
    record: &'static str,
    step: u32,
    generations: u64,
    best_improvement: f64,
    beam: &'a [BeamEntry],
}

#[derive(Serialize)]
#[serde(untagged)]
enum ReportLine<'a> {
    Run(&'a RunHeader),
    Step(StepRecord<'a>),
}

pub const RUN_RECORD: &str = "run";

pub fn run(session: &Session, args: &OptimizeArgs, format: Format) -> CliResult {
    let cfg = session.config("optimize")?;
    let lib_path = session.library_path(args.library.as_deref(), "optimize")?;
    let library = session.open_library(&lib_path)?;
    let design = load_design(&args.design)?;
    let llm = session.llm("optimize")?;
    let tools = session.toolchain(llm.as_ref());

    log::info!(
        "optimizing {} for {} with {} rules, budget {}",
        design.design_id,
        session.target,
        library.len(),
        rtlopt_core::model::total_budget(&cfg.search)?
    );
    let outcome = beam_search(&design, &cfg.search, &library, &tools)?;

    let (equivalent, rejected) = outcome.verdict_counts();
    let header = RunHeader {
        record: RUN_RECORD.into(),
        design: design.design_id.clone(),
        target: session.target,
        seed: cfg.seed,
        search: cfg.search,
        library_rules: library.len(),
        budget: outcome.budget,
        generations: outcome.generations,
        root: metric(&outcome.root),
        best_id: outcome.best.id.clone(),
        best: metric(&outcome.best),
        best_improvement: outcome.best_improvement,
        equivalent,
        rejected,
    };

    let dir = cfg.runs_dir().join(&design.design_id);
    fs::create_dir_all(&dir).map_err(io_at(&dir))?;
    let best_path = dir.join("best.v");
    fs::write(&best_path, &outcome.best.design.source).map_err(io_at(&best_path))?;
    let steps = outcome.steps.iter().map(|s| {
        ReportLine::Step(StepRecord {
            record: "step",
            step: s.step,
            generations: s.generations,
            best_improvement: s.best_improvement,
            beam: &s.beam,
        })
    });
    let report = std::iter::once(ReportLine::Run(&header)).chain(steps);
    write_jsonl(&dir.join("report.jsonl"), report)?;
    write_jsonl(&dir.join("archive.jsonl"), &outcome.archive)?;

    match format {
        Format::Json => print_json(&header),
        Format::Table => print_outcome(&outcome, &header, &display_rel(&dir, &cfg.workspace)),
    }
    Ok(OK)
}

fn metric(c: &rtlopt_core::model::Candidate) -> f64 {
    c.ppa.map_or(f64::NAN, |p| p.scalar())
}

fn print_outcome(outcome: &SearchOutcome, h: &RunHeader, dir: &str) {
    let rows: Vec<Vec<String>> = outcome
        .steps
        .iter()
        .map(|s| {
            vec![
                s.step.to_string(),
                s.generations.to_string(),
                format!("{:.4}", s.best_improvement),
                s.beam.iter().map(|b| b.id.as_str()).collect::<Vec<_>>().join(" "),
            ]
        })
        .collect();
    print!("{}", table(&["step", "generations", "best", "beam"], &rows));
    println!(
        "{}: {} {:.4} -> {:.4} ({:.2}% better) via {}, {} generations ({} equivalent, {} rejected), written to {}",
        h.design,
        h.target,
        h.root,
        h.best,
        100.0 * h.best_improvement,
        h.best_id,
        h.generations,
        h.equivalent,
        h.rejected,
        dir
    );
}
