// SPDX-License-Identifier: Apache-2.0

use std::path::PathBuf;

use serde::Serialize;

use rtlopt_core::corpus::load_design;
use rtlopt_core::equiv::check_equivalence;
use rtlopt_core::model::VerdictStatus;

use super::{print_json, Format};
use crate::adapters::Session;
use crate::exit::{CliResult, NEGATIVE, OK};

#[derive(Debug, clap::Args)]
pub struct EquivArgs {
    /// Reference design.
    pub original: PathBuf,
    /// Design checked against the reference.
    pub rewrite: PathBuf,
}

#[derive(Serialize)]
struct Record<'a> {
    original: &'a str,
    rewrite: &'a str,
    status: VerdictStatus,
    detail: &'a str,
    simulator: &'a str,
    seed: u64,
}

pub fn run(session: &Session, args: &EquivArgs, format: Format) -> CliResult {
    let a = load_design(&args.original)?;
    let b = load_design(&args.rewrite)?;
    let verdict = check_equivalence(&a, &b, session.sim.as_ref(), &session.stimulus)?;
    let label = match verdict.status {
        VerdictStatus::Equivalent => "EQUIVALENT",
        VerdictStatus::Inequivalent => "INEQUIVALENT",
        VerdictStatus::Inconclusive => "INCONCLUSIVE",
    };
    match format {
        Format::Table if verdict.detail.is_empty() => println!("{label}"),
        Format::Table => println!("{label}: {}", verdict.detail),
        Format::Json => print_json(&Record {
            original: &a.design_id,
            rewrite: &b.design_id,
            status: verdict.status,
            detail: &verdict.detail,
            simulator: session.sim.name(),
            seed: session.stimulus.seed,
        }),
    }
    Ok(if verdict.is_equivalent() { OK } else { NEGATIVE })
}
