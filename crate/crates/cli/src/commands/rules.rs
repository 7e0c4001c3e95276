// SPDX-License-Identifier: Apache-2.0

use std::path::PathBuf;

use clap::Subcommand;

use rtlopt_core::model::retrieval_text;

use super::{print_json, table, Format};
use crate::adapters::Session;
use crate::exit::{CliError, CliResult, OK};

#[derive(Debug, clap::Args)]
pub struct RulesArgs {
    /// Rule library; defaults to `rules.jsonl` in the workspace.
    #[arg(long, global = true)]
    pub library: Option<PathBuf>,
    #[command(subcommand)]
    pub action: RulesAction,
}

#[derive(Debug, Subcommand)]
pub enum RulesAction {
    /// One line per rule.
    List,
    /// Full text of one rule.
    Show { id: String },
    /// Size and score summary.
    Stats,
    /// Rewrites the library file in canonical form.
    Compact,
    /// Rules most similar to a condition/action query.
    Query {
        condition: String,
        action: String,
        #[arg(long, default_value_t = rtlopt_core::library::DEFAULT_TOP_K)]
        top: usize,
    },
}

fn oneline(s: &str, max: usize) -> String {
    let flat = s.split_whitespace().collect::<Vec<_>>().join(" ");
    if flat.chars().count() <= max {
        flat
    } else {
        flat.chars().take(max - 3).collect::<String>() + "..."
    }
}

pub fn run(session: &Session, args: &RulesArgs, format: Format) -> CliResult {
    let path = session.library_path(args.library.as_deref(), "rules")?;
    let library = session.open_library(&path)?;
    match &args.action {
        RulesAction::List => match format {
            Format::Json => library.rules().iter().for_each(print_json),
            Format::Table => {
                let rows: Vec<Vec<String>> = library
                    .rules()
                    .iter()
                    .map(|r| {
                        vec![
                            r.id.clone(),
                            format!("{:.4}", r.score),
                            r.provenance.pair_id.clone(),
                            oneline(&r.condition, 60),
                        ]
                    })
                    .collect();
                print!("{}", table(&["id", "score", "pair", "condition"], &rows));
            }
        },
        RulesAction::Show { id } => {
            let r =
                library.rules().iter().find(|r| &r.id == id).ok_or_else(|| {
                    CliError::Core(rtlopt_core::Error::Input(format!("no rule '{id}' in the library")))
                })?;
            match format {
                Format::Json => print_json(r),
                Format::Table => {
                    println!(
                        "id: {}\nscore: {:.4}\npair: {} (attempt {})",
                        r.id, r.score, r.provenance.pair_id, r.provenance.attempt
                    );
                    println!(
                        "[SNIPPET]\n{}\n[CONDITION]\n{}\n[ACTION]\n{}",
                        r.snippet, r.condition, r.action
                    );
                }
            }
        }
        RulesAction::Stats => {
            let s = library.stats();
            match format {
                Format::Json => print_json(&s),
                Format::Table => {
                    println!("rules         {}", s.rules);
                    println!("source pairs  {}", s.source_pairs);
                    println!("embedder      {} ({} dims)", s.embedder, s.dim);
                    println!("threshold     {}", s.threshold);
                    println!(
                        "score         mean {:.4}, min {:.4}, max {:.4}",
                        s.mean_score, s.min_score, s.max_score
                    );
                }
            }
        }
        RulesAction::Compact => {
            library.compact()?;
            log::info!("compacted {} rules in {}", library.len(), path.display());
        }
        RulesAction::Query { condition, action, top } => {
            let hits = library.retrieve(condition, action, *top)?;
            log::debug!("query text: {}", retrieval_text(condition, action));
            match format {
                Format::Json => {
                    for h in &hits {
                        print_json(&serde_json::json!({"id": h.rule.id, "similarity": h.similarity}));
                    }
                }
                Format::Table => {
                    let rows: Vec<Vec<String>> = hits
                        .iter()
                        .map(|h| {
                            vec![
                                h.rule.id.clone(),
                                format!("{:.4}", h.similarity),
                                oneline(&h.rule.condition, 60),
                            ]
                        })
                        .collect();
                    print!("{}", table(&["id", "similarity", "condition"], &rows));
                }
            }
        }
    }
    Ok(OK)
}
