// SPDX-License-Identifier: Apache-2.0

//! Domain types shared by every stage and the improvement arithmetic.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Target {
    #[default]
    Area,
    Delay,
    Power,
}

impl Target {
    pub fn as_str(self) -> &'static str {
        match self {
            Target::Area => "area",
            Target::Delay => "delay",
            Target::Power => "power",
        }
    }
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Target {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "area" => Ok(Target::Area),
            "delay" => Ok(Target::Delay),
            "power" => Ok(Target::Power),
            other => Err(Error::Input(format!("unknown target metric '{other}'"))),
        }
    }
}

/// Area in µm², delay in ns, power in mW.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PpaMetrics {
    pub area: f64,
    pub delay: f64,
    pub power: f64,
    pub target: Target,
}

impl PpaMetrics {
    pub fn new(area: f64, delay: f64, power: f64, target: Target) -> Result<Self> {
        for (name, v) in [("area", area), ("delay", delay), ("power", power)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Domain(format!(
                    "{name} must be a finite non-negative number, got {v}"
                )));
            }
        }
        Ok(PpaMetrics {
            area,
            delay,
            power,
            target,
        })
    }

    /// Metrics whose target scalar is `v` and whose other fields are zero.
    pub fn scalar_only(v: f64, target: Target) -> Result<Self> {
        let mut m = PpaMetrics::new(0.0, 0.0, 0.0, target)?;
        match target {
            Target::Area => m.area = v,
            Target::Delay => m.delay = v,
            Target::Power => m.power = v,
        }
        PpaMetrics::new(m.area, m.delay, m.power, target)
    }

    pub fn scalar(&self) -> f64 {
        match self.target {
            Target::Area => self.area,
            Target::Delay => self.delay,
            Target::Power => self.power,
        }
    }

    pub fn retarget(mut self, target: Target) -> Self {
        self.target = target;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RtlDesign {
    pub design_id: String,
    pub source: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub top_module: Option<String>,
}

impl RtlDesign {
    pub fn new(design_id: impl Into<String>, source: impl Into<String>) -> Result<Self> {
        let source = source.into();
        if source.trim().is_empty() {
            return Err(Error::Input("design source is empty".into()));
        }
        Ok(RtlDesign {
            design_id: design_id.into(),
            source,
            top_module: None,
        })
    }

    pub fn with_top(mut self, top: impl Into<String>) -> Self {
        self.top_module = Some(top.into());
        self
    }

    /// Hex SHA-256 of the source with comments removed and whitespace collapsed,
    /// so cosmetic differences hash alike.
    pub fn normalized_hash(&self) -> String {
        source_hash(&self.source)
    }
}

pub fn source_hash(source: &str) -> String {
    let stripped = crate::verilog::strip_comments(source);
    let normalized = stripped.split_whitespace().collect::<Vec<_>>().join(" ");
    let digest = Sha256::digest(normalized.as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VerdictStatus {
    Equivalent,
    Inequivalent,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EquivalenceVerdict {
    pub status: VerdictStatus,
    pub detail: String,
}

impl EquivalenceVerdict {
    pub fn equivalent(detail: impl Into<String>) -> Self {
        EquivalenceVerdict {
            status: VerdictStatus::Equivalent,
            detail: detail.into(),
        }
    }

    pub fn inequivalent(detail: impl Into<String>) -> Self {
        EquivalenceVerdict {
            status: VerdictStatus::Inequivalent,
            detail: detail.into(),
        }
    }

    pub fn inconclusive(detail: impl Into<String>) -> Self {
        EquivalenceVerdict {
            status: VerdictStatus::Inconclusive,
            detail: detail.into(),
        }
    }

    pub fn is_equivalent(&self) -> bool {
        self.status == VerdictStatus::Equivalent
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CodePair {
    pub id: String,
    pub non_optimized: RtlDesign,
    pub optimized: RtlDesign,
    pub ppa_non: PpaMetrics,
    pub ppa_opt: PpaMetrics,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub pair_id: String,
    pub attempt: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rule {
    /// Assigned by the library on insertion; empty for drafts.
    #[serde(default)]
    pub id: String,
    pub snippet: String,
    pub condition: String,
    pub action: String,
    pub score: f64,
    pub provenance: Provenance,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub embedding: Vec<f64>,
}

impl Rule {
    pub fn draft(snippet: &str, condition: &str, action: &str, provenance: Provenance) -> Self {
        Rule {
            id: String::new(),
            snippet: snippet.trim().to_string(),
            condition: condition.trim().to_string(),
            action: action.trim().to_string(),
            score: 0.0,
            provenance,
            embedding: Vec::new(),
        }
    }

    pub fn is_complete(&self) -> bool {
        !self.snippet.trim().is_empty() && !self.condition.trim().is_empty() && !self.action.trim().is_empty()
    }

    /// Text embedded for retrieval: condition and action joined by a separator.
    pub fn retrieval_text(&self) -> String {
        retrieval_text(&self.condition, &self.action)
    }
}

pub const RETRIEVAL_SEPARATOR: &str = " \u{2016} ";

pub fn retrieval_text(condition: &str, action: &str) -> String {
    format!("{}{RETRIEVAL_SEPARATOR}{}", condition.trim(), action.trim())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchConfig {
    pub beam_width: u32,
    pub num_expand: u32,
    pub max_steps: u32,
    pub diversity_weight: f64,
    pub pair_threshold: f64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            beam_width: 2,
            num_expand: 3,
            max_steps: 3,
            diversity_weight: 0.25,
            pair_threshold: 0.05,
        }
    }
}

impl SearchConfig {
    pub fn new(beam_width: u32, num_expand: u32, max_steps: u32) -> Self {
        SearchConfig {
            beam_width,
            num_expand,
            max_steps,
            ..SearchConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.beam_width == 0 || self.num_expand == 0 || self.max_steps == 0 {
            return Err(Error::Domain(
                "beam width, expansion and steps must all be at least 1".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.diversity_weight) {
            return Err(Error::Domain(format!(
                "diversity weight must lie in [0, 1], got {}",
                self.diversity_weight
            )));
        }
        Ok(())
    }
}

/// Total number of optimize generations a search may issue: `(1 + k·(s−1))·m`.
pub fn total_budget(config: &SearchConfig) -> Result<u64> {
    config.validate()?;
    let k = config.beam_width as u64;
    let m = config.num_expand as u64;
    let s = config.max_steps as u64;
    Ok((1 + k * (s - 1)) * m)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub id: String,
    pub design: RtlDesign,
    pub parent_id: Option<String>,
    pub depth: u32,
    pub verdict: EquivalenceVerdict,
    pub ppa: Option<PpaMetrics>,
    pub score: f64,
}

/// `1 − candidate/original` for equivalent improvements, otherwise 0.
pub fn improvement(original: &PpaMetrics, candidate: &PpaMetrics, verdict: &EquivalenceVerdict) -> Result<f64> {
    if original.target != candidate.target {
        return Err(Error::Domain("metrics target different scalars".into()));
    }
    let orig = original.scalar();
    if !(orig > 0.0) {
        return Err(Error::Domain(format!("original scalar must be positive, got {orig}")));
    }
    let cand = candidate.scalar();
    if !verdict.is_equivalent() || cand >= orig {
        return Ok(0.0);
    }
    // (orig - cand) / orig is exact for the round numbers reports typically carry
    Ok(((orig - cand) / orig).clamp(0.0, 1.0))
}

pub fn relative_difference(a: &PpaMetrics, b: &PpaMetrics) -> Result<f64> {
    let (x, y) = (a.scalar(), b.scalar());
    let denom = x.max(y);
    if !(denom > 0.0) {
        return Err(Error::Domain("relative difference of two zero scalars".into()));
    }
    Ok((x - y).abs() / denom)
}
