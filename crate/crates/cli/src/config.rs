// SPDX-License-Identifier: Apache-2.0

//! Run configuration: one TOML file, paths relative to the file itself.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use rtlopt_core::equiv::StimulusConfig;
use rtlopt_core::learn::LearningConfig;
use rtlopt_core::llm::GenerationConfig;
use rtlopt_core::model::{SearchConfig, Target};
use rtlopt_core::synth::{Flow, FlowCommands, SynthesisConstraints};

use crate::exit::CliError;

pub const REQUIRED_KEYS: &[&str] = &[
    "workspace",
    "adapters.llm",
    "adapters.synthesizer",
    "adapters.simulator",
    "adapters.embedder",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LlmKind {
    Stub,
    Remote,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SynthKind {
    Mock,
    Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SimKind {
    Builtin,
    Iverilog,
    Stub,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmbedKind {
    Tfidf,
    Remote,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Adapters {
    pub llm: LlmKind,
    pub synthesizer: SynthKind,
    pub simulator: SimKind,
    pub embedder: EmbedKind,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LlmSection {
    /// Stub script for `llm = "stub"`.
    pub script: Option<PathBuf>,
    pub temperature: Option<f64>,
    pub max_attempts: Option<u32>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthesisSection {
    pub target_library: Option<String>,
    pub clock_period: Option<f64>,
    pub flow: Option<Flow>,
    /// Tool commands for `synthesizer = "command"`.
    pub commands: Option<FlowCommands>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulatorSection {
    /// Stub script for `simulator = "stub"`.
    pub script: Option<PathBuf>,
    pub iverilog: Option<String>,
    pub vvp: Option<String>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    pub k: Vec<usize>,
}

impl Default for EvalSection {
    fn default() -> Self {
        EvalSection {
            k: vec![1, 15, 50, 104, 210],
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub workspace: PathBuf,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub target: Target,
    /// Corpus directory used by `learn` when none is given on the command line.
    pub corpus: Option<PathBuf>,
    pub adapters: Adapters,
    #[serde(default)]
    pub llm: LlmSection,
    #[serde(default)]
    pub learning: LearningConfig,
    #[serde(default)]
    pub search: SearchConfig,
    #[serde(default)]
    pub stimulus: StimulusConfig,
    #[serde(default)]
    pub synthesis: SynthesisSection,
    #[serde(default)]
    pub simulator: SimulatorSection,
    #[serde(default)]
    pub eval: EvalSection,
}

fn default_seed() -> u64 {
    42
}

fn missing_key(v: &toml::Value, dotted: &str) -> bool {
    let mut cur = v;
    for part in dotted.split('.') {
        match cur.get(part) {
            Some(next) => cur = next,
            None => return true,
        }
    }
    false
}

impl RunConfig {
    pub fn parse(text: &str, base: &Path) -> Result<Self, CliError> {
        let raw: toml::Value =
            toml::from_str(text).map_err(|e| CliError::Usage(format!("config is not valid TOML: {e}")))?;
        if let Some(key) = REQUIRED_KEYS.iter().find(|k| missing_key(&raw, k)) {
            return Err(CliError::Usage(format!("missing config key `{key}`")));
        }
        if !missing_key(&raw, "stimulus.seed") {
            return Err(CliError::Usage(
                "`stimulus.seed` is not accepted; the top-level `seed` drives stimulus generation".into(),
            ));
        }
        let mut cfg: RunConfig = raw
            .try_into()
            .map_err(|e| CliError::Usage(format!("invalid config: {e}")))?;
        cfg.resolve(base);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base)
    }

    fn resolve(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.workspace);
        for p in [&mut self.corpus, &mut self.llm.script, &mut self.simulator.script]
            .into_iter()
            .flatten()
        {
            fix(p);
        }
    }

    fn validate(&self) -> Result<(), CliError> {
        let usage = |e: rtlopt_core::Error| CliError::Usage(format!("invalid config: {e}"));
        self.learning.validate().map_err(usage)?;
        self.search.validate().map_err(usage)?;
        self.stimulus.validate().map_err(usage)?;
        self.generation().validate().map_err(usage)?;
        self.constraints().validate().map_err(usage)?;
        if self.adapters.llm == LlmKind::Stub && self.llm.script.is_none() {
            return Err(CliError::Usage(
                "missing config key `llm.script` (required by the stub LLM)".into(),
            ));
        }
        if self.adapters.synthesizer == SynthKind::Command && self.synthesis.commands.is_none() {
            return Err(CliError::Usage(
                "missing config key `synthesis.commands` (required by the command synthesizer)".into(),
            ));
        }
        if self.adapters.simulator == SimKind::Stub && self.simulator.script.is_none() {
            return Err(CliError::Usage(
                "missing config key `simulator.script` (required by the stub simulator)".into(),
            ));
        }
        if self.eval.k.contains(&0) {
            return Err(CliError::Usage("eval.k values must be at least 1".into()));
        }
        Ok(())
    }

    pub fn generation(&self) -> GenerationConfig {
        let d = GenerationConfig::default();
        GenerationConfig {
            temperature: self.llm.temperature.unwrap_or(d.temperature),
            max_attempts: self.llm.max_attempts.unwrap_or(d.max_attempts),
        }
    }

    pub fn constraints(&self) -> SynthesisConstraints {
        let d = SynthesisConstraints::default();
        SynthesisConstraints {
            target_library: self.synthesis.target_library.clone().unwrap_or(d.target_library),
            clock_period: self.synthesis.clock_period.or(d.clock_period),
            flow: self.synthesis.flow.unwrap_or(d.flow),
        }
    }

    pub fn stimulus_with_seed(&self) -> StimulusConfig {
        StimulusConfig {
            seed: self.seed,
            ..self.stimulus
        }
    }

    pub fn library_path(&self) -> PathBuf {
        self.workspace.join("rules.jsonl")
    }

    pub fn runs_dir(&self) -> PathBuf {
        self.workspace.join("runs")
    }
}
