// SPDX-License-Identifier: Apache-2.0

use std::path::PathBuf;

use serde::Serialize;

use rtlopt_core::corpus::load_design;
use rtlopt_core::model::Target;

use super::{print_json, Format};
use crate::adapters::Session;
use crate::exit::{CliResult, OK};

#[derive(Debug, clap::Args)]
pub struct SynthArgs {
    /// Verilog file to synthesize.
    pub design: PathBuf,
}

#[derive(Serialize)]
struct Record<'a> {
    design: &'a str,
    synthesizer: &'a str,
    version: String,
    target_library: &'a str,
    area: f64,
    delay: f64,
    power: f64,
    target: Target,
    value: f64,
}

pub fn run(session: &Session, args: &SynthArgs, format: Format) -> CliResult {
    let design = load_design(&args.design)?;
    let ppa = session
        .synth
        .synthesize(&design, &session.constraints)?
        .retarget(session.target);
    let rec = Record {
        design: &design.design_id,
        synthesizer: session.synth.name(),
        version: session.synth.version(),
        target_library: &session.constraints.target_library,
        area: ppa.area,
        delay: ppa.delay,
        power: ppa.power,
        target: ppa.target,
        value: ppa.scalar(),
    };
    match format {
        Format::Json => print_json(&rec),
        Format::Table => {
            println!("design       {}", rec.design);
            println!("synthesizer  {} {}", rec.synthesizer, rec.version);
            println!("library      {}", rec.target_library);
            println!("area         {:.4} um^2", rec.area);
            println!("delay        {:.4} ns", rec.delay);
            println!("power        {:.6} mW", rec.power);
            println!("target       {} = {:.6}", rec.target, rec.value);
        }
    }
    Ok(OK)
}
