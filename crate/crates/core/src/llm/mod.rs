// SPDX-License-Identifier: Apache-2.0

//! Text generation: prompt templates, adapters and response extraction.

mod remote;
mod stub;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use remote::{RemoteEmbedder, RemoteLlm};
pub use stub::{StubEntry, StubLlm};

use crate::error::{Error, Result};
use crate::model::RtlDesign;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TemplateId {
    Rewrite,
    Induce,
    Speculate,
    Adapt,
    Optimize,
}

impl TemplateId {
    pub const ALL: [TemplateId; 5] = [
        TemplateId::Rewrite,
        TemplateId::Induce,
        TemplateId::Speculate,
        TemplateId::Adapt,
        TemplateId::Optimize,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TemplateId::Rewrite => "rewrite",
            TemplateId::Induce => "induce",
            TemplateId::Speculate => "speculate",
            TemplateId::Adapt => "adapt",
            TemplateId::Optimize => "optimize",
        }
    }

    /// The bundled template text.
    pub fn text(self) -> &'static str {
        match self {
            TemplateId::Rewrite => include_str!("../../assets/prompts/rewrite.txt"),
            TemplateId::Induce => include_str!("../../assets/prompts/induce.txt"),
            TemplateId::Speculate => include_str!("../../assets/prompts/speculate.txt"),
            TemplateId::Adapt => include_str!("../../assets/prompts/adapt.txt"),
            TemplateId::Optimize => include_str!("../../assets/prompts/optimize.txt"),
        }
    }
}

impl fmt::Display for TemplateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TemplateId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        TemplateId::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| Error::Template(format!("unknown template '{s}'")))
    }
}

/// Substitutes `{name}` placeholders in one pass; `{{` and `}}` are literal
/// braces. Substituted text is never rescanned, so values may contain braces.
pub fn render(template: &str, vars: &BTreeMap<String, String>) -> Result<String> {
    let mut out = String::with_capacity(template.len() + 256);
    let mut rest = template;
    while let Some(pos) = rest.find(['{', '}']) {
        out.push_str(&rest[..pos]);
        let tail = &rest[pos..];
        if tail.starts_with("{{") || tail.starts_with("}}") {
            out.push_str(&tail[..1]);
            rest = &tail[2..];
            continue;
        }
        if tail.starts_with('}') {
            return Err(Error::Template("unmatched '}' in template".into()));
        }
        let close = tail
            .find('}')
            .ok_or_else(|| Error::Template("unterminated placeholder".into()))?;
        let name = &tail[1..close];
        if name.is_empty() || !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
            return Err(Error::Template(format!("malformed placeholder '{{{name}}}'")));
        }
        let value = vars
            .get(name)
            .ok_or_else(|| Error::Template(format!("placeholder '{{{name}}}' is unbound")))?;
        out.push_str(value);
        rest = &tail[close + 1..];
    }
    out.push_str(rest);
    Ok(out)
}

/// One rendered call to an adapter.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Prompt {
    pub template: TemplateId,
    pub variables: BTreeMap<String, String>,
    pub text: String,
    /// Logical sample index; re-asks keep the index and bump `attempt`.
    pub sample: u32,
    pub attempt: u32,
    pub temperature: f64,
}

pub trait LlmAdapter: Send + Sync {
    fn model(&self) -> String;
    fn complete(&self, prompt: &Prompt) -> Result<String>;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenerationConfig {
    pub temperature: f64,
    /// Total tries per logical sample when the answer cannot be parsed.
    pub max_attempts: u32,
}

impl Default for GenerationConfig {
    fn default() -> Self {
        GenerationConfig {
            temperature: 0.6,
            max_attempts: 2,
        }
    }
}

impl GenerationConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=2.0).contains(&self.temperature) {
            return Err(Error::Domain(format!(
                "temperature must lie in [0, 2], got {}",
                self.temperature
            )));
        }
        if self.max_attempts == 0 {
            return Err(Error::Domain("max_attempts must be at least 1".into()));
        }
        Ok(())
    }
}

/// Convenience builder for template variables.
pub fn vars<const N: usize>(pairs: [(&str, &str); N]) -> BTreeMap<String, String> {
    pairs.into_iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
}

/// Renders `template` and asks until `parse` accepts an answer or attempts run
/// out. Rendering fails before any call when a placeholder is unbound.
pub fn generate<T>(
    llm: &dyn LlmAdapter,
    template: TemplateId,
    variables: &BTreeMap<String, String>,
    sample: u32,
    cfg: &GenerationConfig,
    parse: impl Fn(&str) -> Option<T>,
) -> Result<Option<T>> {
    Ok(generate_traced(llm, template, variables, sample, cfg, parse)?.map(|(v, _)| v))
}

/// Like [`generate`], also reporting which attempt produced the answer.
pub fn generate_traced<T>(
    llm: &dyn LlmAdapter,
    template: TemplateId,
    variables: &BTreeMap<String, String>,
    sample: u32,
    cfg: &GenerationConfig,
    parse: impl Fn(&str) -> Option<T>,
) -> Result<Option<(T, u32)>> {
    cfg.validate()?;
    let text = render(template.text(), variables)?;
    let mut prompt = Prompt {
        template,
        variables: variables.clone(),
        text,
        sample,
        attempt: 0,
        temperature: cfg.temperature,
    };
    for attempt in 0..cfg.max_attempts {
        prompt.attempt = attempt;
        let raw = llm.complete(&prompt)?;
        if let Some(v) = parse(&raw) {
            return Ok(Some((v, attempt)));
        }
        log::debug!("{template} sample {sample} attempt {attempt}: unparseable answer");
    }
    Ok(None)
}

/// Body of the first ```` ```verilog ```` (or `systemverilog`) fenced block,
/// else of the first fenced block of any tag.
pub fn extract_code(raw: &str) -> Option<String> {
    let mut blocks: Vec<(String, String)> = Vec::new();
    let mut open: Option<(String, Vec<&str>)> = None;
    for line in raw.lines() {
        match &mut open {
            None => {
                if let Some(tag) = line.trim_start().strip_prefix("```") {
                    if tag.contains("```") {
                        continue;
                    }
                    open = Some((tag.trim().to_ascii_lowercase(), Vec::new()));
                }
            }
            Some((tag, body)) => {
                if let Some(pos) = line.find("```") {
                    let head = &line[..pos];
                    if !head.trim().is_empty() {
                        body.push(head);
                    }
                    blocks.push((std::mem::take(tag), body.join("\n")));
                    open = None;
                } else {
                    body.push(line);
                }
            }
        }
    }
    let pick = blocks
        .iter()
        .find(|(tag, _)| tag == "verilog" || tag == "systemverilog")
        .or_else(|| blocks.first())?;
    let body = pick.1.trim_matches('\n').trim_end();
    if body.trim().is_empty() {
        None
    } else {
        Some(body.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RuleTriple {
    pub snippet: String,
    pub condition: String,
    pub action: String,
}

#[derive(Clone, Copy, PartialEq)]
enum Section {
    Snippet,
    Condition,
    Action,
}

fn strip_fences(s: &str) -> String {
    s.lines()
        .filter(|l| !l.trim_start().starts_with("```"))
        .collect::<Vec<_>>()
        .join("\n")
        .trim()
        .to_string()
}

/// Parses up to `expected` `[SNIPPET]` / `[CONDITION]` / `[ACTION]` triples in
/// that order. Triples with a missing or empty section are dropped.
pub fn extract_rules(raw: &str, expected: usize) -> Vec<RuleTriple> {
    let tags = [
        ("[SNIPPET]", Section::Snippet),
        ("[CONDITION]", Section::Condition),
        ("[ACTION]", Section::Action),
    ];
    let upper = raw.to_ascii_uppercase();
    let mut marks: Vec<(usize, usize, Section)> = Vec::new();
    for (tag, sec) in tags {
        let mut from = 0;
        while let Some(p) = upper[from..].find(tag) {
            marks.push((from + p, tag.len(), sec));
            from += p + tag.len();
        }
    }
    marks.sort_by_key(|m| m.0);

    let mut out = Vec::new();
    let mut snippet: Option<String> = None;
    let mut condition: Option<String> = None;
    for (i, &(pos, len, sec)) in marks.iter().enumerate() {
        let end = marks.get(i + 1).map_or(raw.len(), |m| m.0);
        let body = strip_fences(&raw[pos + len..end]);
        match sec {
            Section::Snippet => {
                snippet = Some(body);
                condition = None;
            }
            Section::Condition if snippet.is_some() => condition = Some(body),
            Section::Action => {
                if let (Some(s), Some(c)) = (snippet.take(), condition.take()) {
                    if !s.is_empty() && !c.is_empty() && !body.is_empty() {
                        out.push(RuleTriple {
                            snippet: s,
                            condition: c,
                            action: body,
                        });
                        if out.len() == expected {
                            break;
                        }
                    }
                }
            }
            Section::Condition => {}
        }
    }
    out
}

/// Asks for `count` structural rewrites of `design`. Samples whose answers
/// cannot be parsed after all attempts are dropped, so the result may be
/// shorter than `count`. Order follows the sample index.
pub fn sample_rewrites(
    design: &RtlDesign,
    count: u32,
    llm: &dyn LlmAdapter,
    cfg: &GenerationConfig,
) -> Result<Vec<RtlDesign>> {
    if count == 0 {
        return Err(Error::Domain("rewrite count must be at least 1".into()));
    }
    let variables = vars([("code", design.source.as_str())]);
    let results: Vec<Result<Option<String>>> = (0..count)
        .into_par_iter()
        .map(|i| generate(llm, TemplateId::Rewrite, &variables, i, cfg, extract_code))
        .collect();
    let mut out = Vec::new();
    for (i, r) in results.into_iter().enumerate() {
        if let Some(code) = r? {
            out.push(RtlDesign::new(format!("{}~r{i}", design.design_id), code)?);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn render_binds_and_fails_closed() {
        let v = vars([("code", "module m; wire [1:0] x = {a, b}; endmodule")]);
        let out = render("A {code} B {{lit}}", &v).unwrap();
        assert_eq!(out, "A module m; wire [1:0] x = {a, b}; endmodule B {lit}");
        assert!(matches!(render("{missing}", &v), Err(Error::Template(_))));
        assert!(matches!(render("{code", &v), Err(Error::Template(_))));
    }

    #[test]
    fn bundled_templates_have_expected_placeholders() {
        let all = vars([
            ("code", "c"),
            ("optimized_code", "o"),
            ("rules", "r"),
            ("speculated_condition", "s"),
            ("target_metric", "area"),
            ("count", "2"),
        ]);
        for t in TemplateId::ALL {
            render(t.text(), &all).unwrap();
        }
        assert!(render(TemplateId::Optimize.text(), &vars([("code", "c")])).is_err());
    }

    #[test]
    fn extract_code_examples() {
        assert_eq!(
            extract_code("```verilog\nmodule m; endmodule\n```").as_deref(),
            Some("module m; endmodule")
        );
        assert_eq!(extract_code("just prose, no code"), None);
        let two = "```text\nnot this\n```\nand\n```verilog\nmodule v; endmodule\n```";
        assert_eq!(extract_code(two).as_deref(), Some("module v; endmodule"));
        assert_eq!(
            extract_code("```\nmodule x; endmodule\n```").as_deref(),
            Some("module x; endmodule")
        );
        assert_eq!(extract_code("```verilog\nmodule open;"), None);
    }

    #[test]
    fn extract_rules_examples() {
        let two = "[SNIPPET]\na*2\n[CONDITION]\nmultiply by power of two\n[ACTION]\nuse a shift\n\
                   [SNIPPET]\nx+0\n[CONDITION]\nadding zero\n[ACTION]\ndrop the adder\n";
        let r = extract_rules(two, 2);
        assert_eq!(r.len(), 2);
        assert_eq!(r[0].action, "use a shift");
        assert_eq!(r[1].snippet, "x+0");
        let partial = "[SNIPPET]\na*2\n[CONDITION]\nc\n[ACTION]\nshift\n[SNIPPET]\nb\n[CONDITION]\nd\n";
        assert_eq!(extract_rules(partial, 2).len(), 1);
        assert!(extract_rules("", 2).is_empty());
        assert_eq!(extract_rules(two, 1).len(), 1);
        let empty_action = "[SNIPPET]\na\n[CONDITION]\nb\n[ACTION]\n\n";
        assert!(extract_rules(empty_action, 1).is_empty());
        let fenced = "[SNIPPET]\n```verilog\nassign y = a * 2;\n```\n[CONDITION]\nc\n[ACTION]\nd";
        assert_eq!(extract_rules(fenced, 1)[0].snippet, "assign y = a * 2;");
    }

    #[test]
    fn duplicate_triples_are_kept() {
        let t = "[SNIPPET]\na\n[CONDITION]\nb\n[ACTION]\nc\n";
        assert_eq!(extract_rules(&t.repeat(2), 2).len(), 2);
    }

    #[test]
    fn generation_config_bounds() {
        assert!(GenerationConfig::default().validate().is_ok());
        let hot = GenerationConfig {
            temperature: 2.5,
            ..GenerationConfig::default()
        };
        assert!(hot.validate().is_err());
    }
}
