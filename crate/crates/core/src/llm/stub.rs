// SPDX-License-Identifier: Apache-2.0

//! Scripted language model for offline runs.
//!
//! A script is a TOML file of `[[entry]]` tables. Each entry may restrict
//! `template`, `sample`, `attempt` and `contains` (a substring of the rendered
//! prompt), and answers with exactly one of:
//!
//! * `text`: returned verbatim;
//! * `echo = true`: the prompt's `{code}` variable in a verilog fence;
//! * `replace = [["from", "to"], ...]`: `{code}` with each replacement applied
//!   in order, in a verilog fence. `{sample}` and `{attempt}` inside a
//!   replacement are substituted first.
//!
//! The entry with the most restricting keys wins; ties go to the earlier one.
//! A prompt no entry matches gets an answer without any code fence.

use std::path::Path;

use serde::Deserialize;

use super::{LlmAdapter, Prompt, TemplateId};
use crate::error::{Error, Result};

pub const UNMATCHED: &str = "The stub script has no answer for this prompt.";

#[derive(Debug, Clone, Default, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StubEntry {
    pub template: Option<TemplateId>,
    pub sample: Option<u32>,
    pub attempt: Option<u32>,
    pub contains: Option<String>,
    pub text: Option<String>,
    #[serde(default)]
    pub echo: bool,
    #[serde(default)]
    pub replace: Vec<(String, String)>,
}

impl StubEntry {
    fn specificity(&self) -> usize {
        [
            self.template.is_some(),
            self.sample.is_some(),
            self.attempt.is_some(),
            self.contains.is_some(),
        ]
        .into_iter()
        .filter(|b| *b)
        .count()
    }

    fn matches(&self, p: &Prompt) -> bool {
        self.template.is_none_or(|t| t == p.template)
            && self.sample.is_none_or(|s| s == p.sample)
            && self.attempt.is_none_or(|a| a == p.attempt)
            && self.contains.as_ref().is_none_or(|c| p.text.contains(c.as_str()))
    }

    fn answer(&self, p: &Prompt) -> String {
        if let Some(t) = &self.text {
            return t.clone();
        }
        let mut code = p.variables.get("code").cloned().unwrap_or_default();
        for (from, to) in &self.replace {
            let to = to
                .replace("{sample}", &p.sample.to_string())
                .replace("{attempt}", &p.attempt.to_string());
            code = code.replace(from.as_str(), &to);
        }
        format!("```verilog\n{}\n```\n", code.trim_end())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Deserialize)]
pub struct StubLlm {
    #[serde(default, rename = "entry")]
    pub entries: Vec<StubEntry>,
}

impl StubLlm {
    pub fn new(entries: Vec<StubEntry>) -> Result<Self> {
        let s = StubLlm { entries };
        s.validate()?;
        Ok(s)
    }

    /// A stub that echoes the `{code}` variable back for every prompt.
    pub fn echo() -> Self {
        StubLlm {
            entries: vec![StubEntry {
                echo: true,
                ..StubEntry::default()
            }],
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let s: StubLlm = toml::from_str(text).map_err(|e| Error::Input(format!("stub script: {e}")))?;
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::Input(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    fn validate(&self) -> Result<()> {
        for (i, e) in self.entries.iter().enumerate() {
            let kinds = usize::from(e.text.is_some()) + usize::from(e.echo) + usize::from(!e.replace.is_empty());
            if kinds != 1 {
                return Err(Error::Input(format!(
                    "stub entry {i} must set exactly one of text, echo, replace"
                )));
            }
        }
        Ok(())
    }
}

impl LlmAdapter for StubLlm {
    fn model(&self) -> String {
        "stub".into()
    }

    fn complete(&self, prompt: &Prompt) -> Result<String> {
        let mut best: Option<&StubEntry> = None;
        for e in self.entries.iter().filter(|e| e.matches(prompt)) {
            if best.is_none_or(|b| e.specificity() > b.specificity()) {
                best = Some(e);
            }
        }
        Ok(best.map_or_else(|| UNMATCHED.to_string(), |e| e.answer(prompt)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llm::{extract_code, generate, sample_rewrites, vars, GenerationConfig};
    use crate::model::RtlDesign;

    const SCRIPT: &str = r#"
[[entry]]
echo = true

[[entry]]
template = "rewrite"
sample = 1
replace = [["a + b", "b + a"]]

[[entry]]
template = "rewrite"
sample = 2
text = "no code here"

[[entry]]
template = "rewrite"
sample = 2
attempt = 1
text = "```verilog\nmodule retry; endmodule\n```"
"#;

    fn design() -> RtlDesign {
        RtlDesign::new("d", "module m(input a, b, output y); assign y = a + b; endmodule").unwrap()
    }

    #[test]
    fn most_specific_entry_wins() {
        let stub = StubLlm::from_toml(SCRIPT).unwrap();
        let r = sample_rewrites(&design(), 3, &stub, &GenerationConfig::default()).unwrap();
        assert_eq!(r.len(), 3);
        assert_eq!(r[0].source, design().source);
        assert!(r[1].source.contains("b + a"));
        assert_eq!(r[2].source, "module retry; endmodule");
        assert_eq!(r[1].design_id, "d~r1");
    }

    #[test]
    fn fenceless_twice_drops_sample() {
        let stub = StubLlm::from_toml("[[entry]]\ntext = \"prose only\"\n").unwrap();
        assert!(sample_rewrites(&design(), 4, &stub, &GenerationConfig::default())
            .unwrap()
            .is_empty());
    }

    #[test]
    fn unmatched_prompt_has_no_code() {
        let stub = StubLlm::default();
        let v = vars([("code", "x")]);
        let got = generate(
            &stub,
            TemplateId::Rewrite,
            &v,
            0,
            &GenerationConfig::default(),
            extract_code,
        )
        .unwrap();
        assert_eq!(got, None);
    }

    #[test]
    fn deterministic_per_sample() {
        let stub = StubLlm::from_toml(SCRIPT).unwrap();
        let a = sample_rewrites(&design(), 3, &stub, &GenerationConfig::default()).unwrap();
        let b = sample_rewrites(&design(), 3, &stub, &GenerationConfig::default()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn replacements_see_the_sample_index() {
        let stub =
            StubLlm::from_toml("[[entry]]\nreplace = [[\"endmodule\", \"wire w{sample}_{attempt}; endmodule\"]]\n")
                .unwrap();
        let r = sample_rewrites(&design(), 2, &stub, &GenerationConfig::default()).unwrap();
        assert!(r[0].source.ends_with("wire w0_0; endmodule"));
        assert!(r[1].source.ends_with("wire w1_0; endmodule"));
    }

    #[test]
    fn invalid_entries_rejected() {
        assert!(StubLlm::from_toml("[[entry]]\n").is_err());
        assert!(StubLlm::from_toml("[[entry]]\ntext = \"a\"\necho = true\n").is_err());
        assert!(StubLlm::from_toml("[[entry]]\ntext = \"a\"\nbogus = 1\n").is_err());
    }
}
