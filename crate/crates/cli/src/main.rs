// SPDX-License-Identifier: Apache-2.0

//! `rtlopt`: learn optimization rules from a Verilog corpus, then use them to
//! optimize designs for area, delay or power.

mod adapters;
mod commands;
mod config;
mod exit;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use adapters::Session;
use commands::{equiv, eval, learn, optimize, rules, synth, Format};
use config::RunConfig;
use exit::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(
    name = "rtlopt",
    version,
    about = "Rule-guided RTL power, performance and area optimization"
)]
struct Cli {
    /// Run configuration (TOML). Paths inside are relative to the file.
    #[arg(long, short, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; also caps concurrent synthesis processes.
    #[arg(long, short, global = true)]
    jobs: Option<usize>,
    /// Output format on stdout.
    #[arg(long, value_enum, default_value_t = Format::Table, global = true)]
    format: Format,
    /// More log output (-v info, -vv debug). RUST_LOG takes precedence.
    #[arg(long, short, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Learn a rule library from a design corpus.
    Learn(learn::LearnArgs),
    /// Optimize one design with retrieval-guided beam search.
    Optimize(optimize::OptimizeArgs),
    /// Impr@k over finished optimizer runs.
    Eval(eval::EvalArgs),
    /// Simulation-based equivalence check of two designs.
    Equiv(equiv::EquivArgs),
    /// Synthesize one design and report its metrics.
    Synth(synth::SynthArgs),
    /// Inspect or maintain a rule library.
    Rules(rules::RulesArgs),
}

fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format(|buf, record| writeln!(buf, "[{}] {}", record.level(), record.args()))
        .init();
}

fn run(cli: &Cli) -> CliResult {
    if let Some(j) = cli.jobs {
        if j == 0 {
            return Err(CliError::Usage("--jobs must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(j)
            .build_global()
            .map_err(|e| CliError::Usage(format!("cannot size the worker pool: {e}")))?;
    }
    let mut config = cli.config.as_deref().map(RunConfig::load).transpose()?;
    if let (Some(cfg), Some(seed)) = (config.as_mut(), cli.seed) {
        cfg.seed = seed;
    }
    let mut session = Session::new(config, cli.jobs)?;
    if let (None, Some(seed)) = (&session.config, cli.seed) {
        session.stimulus.seed = seed;
    }
    match &cli.command {
        Command::Learn(a) => learn::run(&session, a, cli.format),
        Command::Optimize(a) => optimize::run(&session, a, cli.format),
        Command::Eval(a) => eval::run(&session, a, cli.format),
        Command::Equiv(a) => equiv::run(&session, a, cli.format),
        Command::Synth(a) => synth::run(&session, a, cli.format),
        Command::Rules(a) => rules::run(&session, a, cli.format),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    init_logging(cli.verbose);
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("rtlopt: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn global_flags_after_subcommand() {
        let cli = Cli::try_parse_from(["rtlopt", "equiv", "a.v", "b.v", "--seed", "7", "--format", "json"]).unwrap();
        assert_eq!(cli.seed, Some(7));
        assert_eq!(cli.format, Format::Json);
    }
}
