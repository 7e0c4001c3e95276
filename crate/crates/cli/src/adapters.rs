// SPDX-License-Identifier: Apache-2.0

//! Builds the named adapters of a run configuration.

use std::path::Path;

use rtlopt_core::equiv::{BuiltinSimulator, IverilogSimulator, SimulatorAdapter, StimulusConfig, StubSimulator};
use rtlopt_core::library::{Embedder, HashedTfIdf, RuleLibrary};
use rtlopt_core::llm::{GenerationConfig, LlmAdapter, RemoteEmbedder, RemoteLlm, StubLlm};
use rtlopt_core::model::Target;
use rtlopt_core::synth::{CommandSynthesizer, MockSynthesizer, SynthesisAdapter, SynthesisConstraints};
use rtlopt_core::toolchain::Toolchain;

use crate::config::{EmbedKind, LlmKind, RunConfig, SimKind, SynthKind};
use crate::exit::{CliError, CliResult};

fn unresolved(what: &str) -> impl FnOnce(rtlopt_core::Error) -> CliError + '_ {
    move |e| CliError::Usage(format!("cannot set up the {what} adapter: {e}"))
}

/// Adapters and settings for one invocation. Without a config file the
/// defaults apply: built-in simulator, mock synthesis, hashed TF-IDF, no LLM.
pub struct Session {
    pub config: Option<RunConfig>,
    pub synth: Box<dyn SynthesisAdapter>,
    pub sim: Box<dyn SimulatorAdapter>,
    pub constraints: SynthesisConstraints,
    pub stimulus: StimulusConfig,
    pub generation: GenerationConfig,
    pub target: Target,
}

impl Session {
    pub fn new(config: Option<RunConfig>, jobs: Option<usize>) -> CliResult<Self> {
        let Some(cfg) = config else {
            return Ok(Session {
                config: None,
                synth: Box::new(MockSynthesizer::new()),
                sim: Box::new(BuiltinSimulator::new()),
                constraints: SynthesisConstraints::default(),
                stimulus: StimulusConfig::default(),
                generation: GenerationConfig::default(),
                target: Target::default(),
            });
        };
        let synth: Box<dyn SynthesisAdapter> = match cfg.adapters.synthesizer {
            SynthKind::Mock => Box::new(MockSynthesizer::new()),
            SynthKind::Command => {
                let mut commands = cfg.synthesis.commands.clone().expect("validated");
                if let Some(j) = jobs {
                    commands.max_parallel = commands.max_parallel.min(j);
                }
                Box::new(CommandSynthesizer::new(commands, cfg.workspace.join("synth")))
            }
        };
        let sim: Box<dyn SimulatorAdapter> = match cfg.adapters.simulator {
            SimKind::Builtin => Box::new(BuiltinSimulator::new()),
            SimKind::Iverilog => {
                let mut s = IverilogSimulator::new(cfg.workspace.join("sim"));
                if let Some(p) = &cfg.simulator.iverilog {
                    s.iverilog.clone_from(p);
                }
                if let Some(p) = &cfg.simulator.vvp {
                    s.vvp.clone_from(p);
                }
                Box::new(s)
            }
            SimKind::Stub => {
                let path = cfg.simulator.script.as_deref().expect("validated");
                Box::new(StubSimulator::load(path).map_err(unresolved("simulator"))?)
            }
        };
        Ok(Session {
            synth,
            sim,
            constraints: cfg.constraints(),
            stimulus: cfg.stimulus_with_seed(),
            generation: cfg.generation(),
            target: cfg.target,
            config: Some(cfg),
        })
    }

    pub fn config(&self, command: &str) -> CliResult<&RunConfig> {
        self.config
            .as_ref()
            .ok_or_else(|| CliError::Usage(format!("`{command}` needs a run configuration (--config)")))
    }

    pub fn llm(&self, command: &str) -> CliResult<Box<dyn LlmAdapter>> {
        let cfg = self.config(command)?;
        Ok(match cfg.adapters.llm {
            LlmKind::Stub => {
                let path = cfg.llm.script.as_deref().expect("validated");
                Box::new(StubLlm::load(path).map_err(unresolved("llm"))?)
            }
            LlmKind::Remote => Box::new(RemoteLlm::from_env().map_err(unresolved("llm"))?),
        })
    }

    pub fn embedder(&self) -> CliResult<Box<dyn Embedder>> {
        match self.config.as_ref().map(|c| c.adapters.embedder) {
            None | Some(EmbedKind::Tfidf) => Ok(Box::new(HashedTfIdf::new())),
            Some(EmbedKind::Remote) => Ok(Box::new(RemoteEmbedder::from_env().map_err(unresolved("embedder"))?)),
        }
    }

    pub fn toolchain<'a>(&'a self, llm: &'a dyn LlmAdapter) -> Toolchain<'a> {
        Toolchain {
            llm,
            synth: self.synth.as_ref(),
            sim: self.sim.as_ref(),
            stimulus: self.stimulus,
            generation: self.generation,
            constraints: &self.constraints,
            target: self.target,
        }
    }

    /// Opens an existing library; a missing file is a usage error.
    pub fn open_library(&self, path: &Path) -> CliResult<RuleLibrary> {
        if !path.is_file() {
            return Err(CliError::Usage(format!(
                "rule library {} does not exist",
                path.display()
            )));
        }
        Ok(RuleLibrary::open(path, self.embedder()?)?)
    }

    /// The `--library` flag, else the workspace library.
    pub fn library_path(&self, flag: Option<&Path>, command: &str) -> CliResult<std::path::PathBuf> {
        match flag {
            Some(p) => Ok(p.to_path_buf()),
            None => Ok(self.config(command)?.library_path()),
        }
    }
}
