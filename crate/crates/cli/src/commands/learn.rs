// SPDX-License-Identifier: Apache-2.0

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use rtlopt_core::corpus::load_dir;
use rtlopt_core::learn::{learn, LearnReport};
use rtlopt_core::library::RuleLibrary;
use rtlopt_core::model::relative_difference;

use super::{print_json, table, write_jsonl, Format};
use crate::adapters::Session;
use crate::exit::{io_at, CliError, CliResult, OK};

#[derive(Debug, clap::Args)]
pub struct LearnArgs {
    /// Directory of `.v`/`.sv` designs; defaults to `corpus` from the config.
    pub corpus: Option<PathBuf>,
    /// Reuse finished design evaluations from an earlier interrupted run.
    #[arg(long)]
    pub resume: bool,
}

#[derive(Serialize)]
#[serde(tag = "record", rename_all = "snake_case")]
enum Record<'a> {
    Excluded {
        design: &'a str,
        reason: &'a str,
    },
    Evaluation {
        design: &'a str,
        original: f64,
        entropy: f64,
        rewrites: usize,
        equivalent: usize,
        pairs: usize,
    },
    Pair {
        id: &'a str,
        non_optimized: f64,
        optimized: f64,
        relative_difference: f64,
    },
    Rule {
        pair: &'a str,
        score: f64,
        accepted: Option<&'a str>,
        condition: &'a str,
        action: &'a str,
    },
    Summary(Summary<'a>),
}

#[derive(Serialize)]
struct Summary<'a> {
    designs: usize,
    excluded: usize,
    evaluated: usize,
    selected: &'a [String],
    pairs: usize,
    rules_scored: usize,
    rules_accepted: usize,
    library: String,
}

fn records<'a>(report: &'a LearnReport, summary: Summary<'a>) -> CliResult<Vec<Record<'a>>> {
    let mut out = Vec::new();
    for x in &report.excluded {
        out.push(Record::Excluded {
            design: &x.design_id,
            reason: &x.reason,
        });
    }
    for e in &report.evaluations {
        out.push(Record::Evaluation {
            design: &e.design_id,
            original: e.original_ppa.scalar(),
            entropy: e.entropy,
            rewrites: e.rewrites.len(),
            equivalent: e.rewrites.iter().filter(|r| r.verdict.is_equivalent()).count(),
            pairs: e.pairs.len(),
        });
    }
    for p in report.pairs() {
        out.push(Record::Pair {
            id: &p.id,
            non_optimized: p.ppa_non.scalar(),
            optimized: p.ppa_opt.scalar(),
            relative_difference: relative_difference(&p.ppa_non, &p.ppa_opt)?,
        });
    }
    for r in &report.rules {
        out.push(Record::Rule {
            pair: &r.pair_id,
            score: r.rule.score,
            accepted: r.accepted_id.as_deref(),
            condition: &r.rule.condition,
            action: &r.rule.action,
        });
    }
    out.push(Record::Summary(summary));
    Ok(out)
}

pub fn run(session: &Session, args: &LearnArgs, format: Format) -> CliResult {
    let cfg = session.config("learn")?;
    let corpus_dir = args
        .corpus
        .clone()
        .or_else(|| cfg.corpus.clone())
        .ok_or_else(|| CliError::Usage("no corpus directory given and none configured".into()))?;
    if !corpus_dir.is_dir() {
        return Err(CliError::Usage(format!(
            "corpus directory {} does not exist",
            corpus_dir.display()
        )));
    }
    let corpus = load_dir(&corpus_dir)?;
    if corpus.is_empty() {
        return Err(CliError::Usage(format!(
            "corpus directory {} holds no designs",
            corpus_dir.display()
        )));
    }
    let llm = session.llm("learn")?;
    let tools = session.toolchain(llm.as_ref());

    let learn_dir = cfg.workspace.join("learn");
    fs::create_dir_all(&learn_dir).map_err(io_at(&learn_dir))?;
    let checkpoint = learn_dir.join("evaluations.jsonl");
    if !args.resume && checkpoint.exists() {
        fs::remove_file(&checkpoint).map_err(io_at(&checkpoint))?;
    }
    let lib_path = cfg.library_path();
    let mut library = RuleLibrary::create(&lib_path, session.embedder()?, cfg.learning.accept_threshold)?;

    log::info!("learning from {} designs in {}", corpus.len(), corpus_dir.display());
    let report = learn(&corpus, &cfg.learning, &tools, &mut library, Some(&checkpoint))?;
    if library.is_empty() {
        log::warn!("no rules were accepted; {} is empty", lib_path.display());
    }

    let summary = Summary {
        designs: corpus.len(),
        excluded: report.excluded.len(),
        evaluated: report.evaluations.len(),
        selected: &report.selected,
        pairs: report.pairs().count(),
        rules_scored: report.rules.len(),
        rules_accepted: report.accepted(),
        library: display_rel(&lib_path, &cfg.workspace),
    };
    match format {
        Format::Json => print_json(&summary),
        Format::Table => print_summary(&report, &summary),
    }
    write_jsonl(&learn_dir.join("report.jsonl"), records(&report, summary)?)?;
    Ok(OK)
}

/// `path` relative to the workspace when inside it, so reports do not
/// depend on where the workspace lives.
pub fn display_rel(path: &Path, workspace: &Path) -> String {
    path.strip_prefix(workspace).unwrap_or(path).display().to_string()
}

fn print_summary(report: &LearnReport, s: &Summary<'_>) {
    let rows: Vec<Vec<String>> = report
        .evaluations
        .iter()
        .map(|e| {
            vec![
                e.design_id.clone(),
                format!("{:.4}", e.original_ppa.scalar()),
                format!("{:.4}", e.entropy),
                e.pairs.len().to_string(),
                if report.selected.contains(&e.design_id) {
                    "yes"
                } else {
                    ""
                }
                .to_string(),
            ]
        })
        .collect();
    print!(
        "{}",
        table(&["design", "original", "entropy", "pairs", "selected"], &rows)
    );
    for x in &report.excluded {
        println!("excluded {}: {}", x.design_id, x.reason);
    }
    println!(
        "{} designs, {} evaluated, {} selected, {} pairs, {} of {} rules accepted into {}",
        s.designs,
        s.evaluated,
        s.selected.len(),
        s.pairs,
        s.rules_accepted,
        s.rules_scored,
        s.library
    );
}
