// SPDX-License-Identifier: Apache-2.0

//! Rule learning from contrastive code pairs.
//!
//! 1. Filter the corpus (synthesizable, self-contained, mid-range area).
//! 2. Explore: sample structural rewrites of each design.
//! 3. Evaluate: check each rewrite, measure it, and compute the entropy of
//!    the improvement distribution; keep the most diverse designs.
//! 4. Induce rules from every rewrite that differs enough from its original,
//!    then score each rule by re-applying it and keep the good ones.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::library::RuleLibrary;
use crate::llm::{extract_code, extract_rules, generate, generate_traced, sample_rewrites, vars, TemplateId};
use crate::model::{
    relative_difference, CodePair, EquivalenceVerdict, PpaMetrics, Provenance, RtlDesign, Rule, Target,
};
use crate::toolchain::Toolchain;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LearningConfig {
    pub rewrites_per_design: u32,
    /// Percentage of designs, by entropy, kept for rule induction.
    pub top_percent: f64,
    pub pair_threshold: f64,
    pub rules_per_pair: usize,
    pub reapply_attempts: u32,
    pub alpha: f64,
    pub beta: f64,
    pub accept_threshold: f64,
    /// Width of the improvement histogram bins used for entropy.
    pub entropy_bin_width: f64,
    /// Percentile band of original area (or target metric) admitted to learning.
    pub area_band: [f64; 2],
}

impl Default for LearningConfig {
    fn default() -> Self {
        LearningConfig {
            rewrites_per_design: 50,
            top_percent: 25.0,
            pair_threshold: 0.05,
            rules_per_pair: 2,
            reapply_attempts: 3,
            alpha: 0.25,
            beta: 0.5,
            accept_threshold: 0.7,
            entropy_bin_width: 0.05,
            area_band: [25.0, 75.0],
        }
    }
}

impl LearningConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Domain(m));
        if !(self.top_percent > 0.0 && self.top_percent <= 100.0) {
            return bad(format!("top_percent must lie in (0, 100], got {}", self.top_percent));
        }
        if self.alpha < 0.0 || self.beta < 0.0 {
            return bad("alpha and beta must be non-negative".into());
        }
        if !(self.accept_threshold > 0.0 && self.accept_threshold <= 1.0) {
            return bad(format!(
                "accept_threshold must lie in (0, 1], got {}",
                self.accept_threshold
            ));
        }
        if self.rewrites_per_design == 0 || self.rules_per_pair == 0 || self.reapply_attempts == 0 {
            return bad("rewrite, rule and reapply counts must be positive".into());
        }
        if !(self.entropy_bin_width > 0.0 && self.entropy_bin_width <= 2.0) {
            return bad(format!(
                "entropy bin width must lie in (0, 2], got {}",
                self.entropy_bin_width
            ));
        }
        let [lo, hi] = self.area_band;
        if !(0.0 <= lo && lo <= hi && hi <= 100.0) {
            return bad(format!("area band [{lo}, {hi}] is not a percentile range"));
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Scoring and statistics

const DEGENERATE_EPS: f64 = 1e-6;

/// Score of one re-application: `α + β·(n − i)/(n − o)` clipped to [0, 1],
/// or 0 for a non-equivalent rewrite. `n` and `o` are the pair's original and
/// optimized scalars, `i` the re-application's.
pub fn score_rewrite(ppa_n: f64, ppa_o: f64, ppa_i: f64, equivalent: bool, alpha: f64, beta: f64) -> Result<f64> {
    let gap = ppa_n - ppa_o;
    if !(gap >= DEGENERATE_EPS * ppa_n) || !(gap > 0.0) {
        return Err(Error::DegeneratePair(format!("original {ppa_n} vs optimized {ppa_o}")));
    }
    if !equivalent {
        return Ok(0.0);
    }
    Ok((alpha + beta * (ppa_n - ppa_i) / gap).clamp(0.0, 1.0))
}

/// Histogram bin of a signed improvement over [−1, 1]; out-of-range values
/// fall into the end bins. Values within 1e-9 of an edge go to the upper bin.
pub fn improvement_bin(improvement: f64, width: f64) -> usize {
    let bins = (2.0 / width).round() as i64;
    let idx = ((improvement + 1.0) / width + 1e-9).floor() as i64;
    idx.clamp(0, bins - 1) as usize
}

/// Shannon entropy in bits of the binned improvements.
pub fn entropy(improvements: &[f64], width: f64) -> f64 {
    if improvements.is_empty() {
        return 0.0;
    }
    let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
    for &x in improvements {
        *counts.entry(improvement_bin(x, width)).or_insert(0) += 1;
    }
    let n = improvements.len() as f64;
    let sum: f64 = counts
        .values()
        .map(|&c| {
            let p = c as f64 / n;
            p * p.log2()
        })
        .sum();
    if sum == 0.0 {
        0.0
    } else {
        -sum
    }
}

/// Linearly interpolated percentile of sorted data, `p` in [0, 100].
pub fn percentile(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty(), "percentile of empty data");
    let rank = p / 100.0 * (sorted.len() - 1) as f64;
    let lo = rank.floor() as usize;
    let hi = rank.ceil() as usize;
    sorted[lo] + (rank - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Indices of `values` inside the `[lo, hi]` percentile band, inclusive.
pub fn mid_range(values: &[f64], band: [f64; 2]) -> Vec<usize> {
    if values.is_empty() {
        return Vec::new();
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let lo = percentile(&sorted, band[0]);
    let hi = percentile(&sorted, band[1]);
    (0..values.len())
        .filter(|&i| values[i] >= lo && values[i] <= hi)
        .collect()
}

/// `⌈K% · count⌉`, guarded against floating-point overshoot.
pub fn selection_size(count: usize, top_percent: f64) -> usize {
    let raw = top_percent / 100.0 * count as f64;
    ((raw - 1e-9).ceil().max(0.0) as usize).min(count)
}

/// Highest-entropy designs first, ties by id ascending.
pub fn select_designs(evaluated: &[(String, f64)], top_percent: f64) -> Vec<String> {
    let mut v: Vec<&(String, f64)> = evaluated.iter().collect();
    v.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    v.into_iter()
        .take(selection_size(evaluated.len(), top_percent))
        .map(|(id, _)| id.clone())
        .collect()
}

// ---------------------------------------------------------------------------
// Pipeline stages

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasuredDesign {
    pub design: RtlDesign,
    pub ppa: PpaMetrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exclusion {
    pub design_id: String,
    pub reason: String,
}

/// Keeps synthesizable designs whose target metric lies in the configured
/// percentile band.
pub fn filter_corpus(
    corpus: &[RtlDesign],
    cfg: &LearningConfig,
    tools: &Toolchain<'_>,
) -> Result<(Vec<MeasuredDesign>, Vec<Exclusion>)> {
    let checked: Vec<Result<std::result::Result<PpaMetrics, String>>> = corpus
        .par_iter()
        .map(|d| {
            if !tools.synth.check_synthesizable(d)? {
                return Ok(Err("not synthesizable or not self-contained".to_string()));
            }
            match tools.measure(d) {
                Ok(p) if p.scalar() > 0.0 => Ok(Ok(p)),
                Ok(_) => Ok(Err(format!("{} is zero", tools.target))),
                Err(e @ Error::Environment(_)) => Err(e),
                Err(e) => Ok(Err(e.to_string())),
            }
        })
        .collect();
    let mut measured = Vec::new();
    let mut excluded = Vec::new();
    for (d, r) in corpus.iter().zip(checked) {
        match r? {
            Ok(ppa) => measured.push(MeasuredDesign { design: d.clone(), ppa }),
            Err(reason) => {
                log::warn!("excluding {}: {reason}", d.design_id);
                excluded.push(Exclusion {
                    design_id: d.design_id.clone(),
                    reason,
                });
            }
        }
    }
    let scalars: Vec<f64> = measured.iter().map(|m| m.ppa.scalar()).collect();
    let keep: BTreeSet<usize> = mid_range(&scalars, cfg.area_band).into_iter().collect();
    let mut kept = Vec::new();
    for (i, m) in measured.into_iter().enumerate() {
        if keep.contains(&i) {
            kept.push(m);
        } else {
            excluded.push(Exclusion {
                design_id: m.design.design_id.clone(),
                reason: format!("{} {} outside the mid-range band", tools.target, m.ppa.scalar()),
            });
        }
    }
    Ok((kept, excluded))
}

/// Samples rewrites for every design. Non-environment failures skip the design.
pub fn explore(
    designs: &[RtlDesign],
    cfg: &LearningConfig,
    tools: &Toolchain<'_>,
) -> Result<BTreeMap<String, Vec<RtlDesign>>> {
    let results: Vec<Result<Vec<RtlDesign>>> = designs
        .par_iter()
        .map(|d| sample_rewrites(d, cfg.rewrites_per_design, tools.llm, &tools.generation))
        .collect();
    let mut out = BTreeMap::new();
    for (d, r) in designs.iter().zip(results) {
        match r {
            Ok(v) => {
                out.insert(d.design_id.clone(), v);
            }
            Err(e @ Error::Environment(_)) => return Err(e),
            Err(e) => log::warn!("exploration of {} failed: {e}", d.design_id),
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewriteRecord {
    pub rewrite_id: String,
    pub verdict: EquivalenceVerdict,
    pub ppa: Option<PpaMetrics>,
    /// Signed `(original − rewrite) / original` on the target metric.
    pub improvement: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignEvaluation {
    pub design_id: String,
    pub original_ppa: PpaMetrics,
    pub entropy: f64,
    pub rewrites: Vec<RewriteRecord>,
    pub pairs: Vec<CodePair>,
}

pub(crate) fn verdict_or_inconclusive(r: Result<EquivalenceVerdict>) -> Result<EquivalenceVerdict> {
    match r {
        Ok(v) => Ok(v),
        Err(e @ Error::Environment(_)) => Err(e),
        Err(e) => Ok(EquivalenceVerdict::inconclusive(e.to_string())),
    }
}

/// Checks and measures every rewrite; computes entropy over equivalent ones
/// and emits pairs whose relative difference exceeds the threshold.
pub fn evaluate_design(
    original: &MeasuredDesign,
    rewrites: &[RtlDesign],
    cfg: &LearningConfig,
    tools: &Toolchain<'_>,
) -> Result<DesignEvaluation> {
    let orig = original.ppa.scalar();
    if !(orig > 0.0) {
        return Err(Error::Domain(format!(
            "{} of {} is not positive",
            tools.target, original.design.design_id
        )));
    }
    let records: Vec<Result<RewriteRecord>> = rewrites
        .par_iter()
        .map(|rw| {
            let verdict = verdict_or_inconclusive(tools.equivalence(&original.design, rw))?;
            let ppa = if verdict.is_equivalent() {
                match tools.measure(rw) {
                    Ok(p) => Some(p),
                    Err(e @ Error::Environment(_)) => return Err(e),
                    Err(e) => {
                        log::debug!("{} failed synthesis: {e}", rw.design_id);
                        None
                    }
                }
            } else {
                None
            };
            Ok(RewriteRecord {
                rewrite_id: rw.design_id.clone(),
                improvement: ppa.map(|p| (orig - p.scalar()) / orig),
                verdict,
                ppa,
            })
        })
        .collect();
    let records = records.into_iter().collect::<Result<Vec<_>>>()?;

    let improvements: Vec<f64> = records.iter().filter_map(|r| r.improvement).collect();
    let mut pairs = Vec::new();
    for (rw, rec) in rewrites.iter().zip(&records) {
        let Some(ppa) = rec.ppa else { continue };
        if relative_difference(&original.ppa, &ppa)? <= cfg.pair_threshold {
            continue;
        }
        let id = format!("{}#{}", original.design.design_id, pairs.len());
        let pair = if ppa.scalar() < orig {
            CodePair {
                id,
                non_optimized: original.design.clone(),
                optimized: rw.clone(),
                ppa_non: original.ppa,
                ppa_opt: ppa,
            }
        } else {
            CodePair {
                id,
                non_optimized: rw.clone(),
                optimized: original.design.clone(),
                ppa_non: ppa,
                ppa_opt: original.ppa,
            }
        };
        pairs.push(pair);
    }
    Ok(DesignEvaluation {
        design_id: original.design.design_id.clone(),
        original_ppa: original.ppa,
        entropy: entropy(&improvements, cfg.entropy_bin_width),
        rewrites: records,
        pairs,
    })
}

/// How a metric is named in prompts.
pub fn metric_name(t: Target) -> &'static str {
    match t {
        Target::Area => "area",
        Target::Delay => "delay (critical path)",
        Target::Power => "power",
    }
}

/// Asks for up to `rules_per_pair` rules explaining the pair.
pub fn induce_rules(pair: &CodePair, cfg: &LearningConfig, tools: &Toolchain<'_>) -> Result<Vec<Rule>> {
    let count = cfg.rules_per_pair.to_string();
    let v = vars([
        ("code", pair.non_optimized.source.as_str()),
        ("optimized_code", pair.optimized.source.as_str()),
        ("target_metric", metric_name(tools.target)),
        ("count", count.as_str()),
    ]);
    let n = cfg.rules_per_pair;
    let got = generate_traced(tools.llm, TemplateId::Induce, &v, 0, &tools.generation, |raw| {
        let r = extract_rules(raw, n);
        (!r.is_empty()).then_some(r)
    })?;
    Ok(got
        .map(|(triples, attempt)| {
            triples
                .into_iter()
                .map(|t| {
                    Rule::draft(
                        &t.snippet,
                        &t.condition,
                        &t.action,
                        Provenance {
                            pair_id: pair.id.clone(),
                            attempt,
                        },
                    )
                })
                .collect()
        })
        .unwrap_or_default())
}

/// Guidance text listing rules for the optimize and adapt prompts.
pub fn format_rules<'r>(rules: impl IntoIterator<Item = &'r Rule>) -> String {
    format_triples(
        rules
            .into_iter()
            .map(|r| (r.snippet.as_str(), r.condition.as_str(), r.action.as_str())),
    )
}

pub fn format_triples<'t>(triples: impl IntoIterator<Item = (&'t str, &'t str, &'t str)>) -> String {
    let mut s = String::new();
    for (i, (snippet, condition, action)) in triples.into_iter().enumerate() {
        if i > 0 {
            s.push('\n');
        }
        s.push_str(&format!(
            "Rule {}\n[SNIPPET]\n{snippet}\n[CONDITION]\n{condition}\n[ACTION]\n{action}\n",
            i + 1
        ));
    }
    s
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttemptScore {
    pub attempt: u32,
    pub verdict: Option<EquivalenceVerdict>,
    pub ppa: Option<f64>,
    pub score: f64,
}

/// Re-applies `rule` to the pair's non-optimized design several times and
/// averages the per-attempt scores. Failed generations score 0.
pub fn score_rule(
    rule: &Rule,
    pair: &CodePair,
    cfg: &LearningConfig,
    tools: &Toolchain<'_>,
) -> Result<(f64, Vec<AttemptScore>)> {
    let (n, o) = (pair.ppa_non.scalar(), pair.ppa_opt.scalar());
    // reject degenerate pairs before spending generations on them
    score_rewrite(n, o, n, true, cfg.alpha, cfg.beta)?;
    let guidance = format_rules([rule]);
    let v = vars([
        ("code", pair.non_optimized.source.as_str()),
        ("rules", guidance.as_str()),
        ("target_metric", metric_name(tools.target)),
    ]);
    let attempts: Vec<Result<AttemptScore>> = (0..cfg.reapply_attempts)
        .into_par_iter()
        .map(|a| {
            let Some(code) = generate(tools.llm, TemplateId::Optimize, &v, a, &tools.generation, extract_code)? else {
                return Ok(AttemptScore {
                    attempt: a,
                    verdict: None,
                    ppa: None,
                    score: 0.0,
                });
            };
            let design = RtlDesign::new(format!("{}~a{a}", pair.id), code)?;
            let verdict = verdict_or_inconclusive(tools.equivalence(&pair.non_optimized, &design))?;
            if !verdict.is_equivalent() {
                return Ok(AttemptScore {
                    attempt: a,
                    verdict: Some(verdict),
                    ppa: None,
                    score: 0.0,
                });
            }
            let ppa = match tools.measure(&design) {
                Ok(p) => p.scalar(),
                Err(e @ Error::Environment(_)) => return Err(e),
                Err(_) => {
                    return Ok(AttemptScore {
                        attempt: a,
                        verdict: Some(verdict),
                        ppa: None,
                        score: 0.0,
                    })
                }
            };
            let score = score_rewrite(n, o, ppa, true, cfg.alpha, cfg.beta)?;
            Ok(AttemptScore {
                attempt: a,
                verdict: Some(verdict),
                ppa: Some(ppa),
                score,
            })
        })
        .collect();
    let attempts = attempts.into_iter().collect::<Result<Vec<_>>>()?;
    let mean = attempts.iter().map(|a| a.score).sum::<f64>() / attempts.len() as f64;
    Ok((mean, attempts))
}

// ---------------------------------------------------------------------------
// Orchestration

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredRule {
    pub pair_id: String,
    pub rule: Rule,
    pub attempts: Vec<AttemptScore>,
    pub accepted_id: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct LearnReport {
    pub excluded: Vec<Exclusion>,
    pub evaluations: Vec<DesignEvaluation>,
    pub selected: Vec<String>,
    pub rules: Vec<ScoredRule>,
}

impl LearnReport {
    pub fn pairs(&self) -> impl Iterator<Item = &CodePair> {
        let selected: BTreeSet<&str> = self.selected.iter().map(String::as_str).collect();
        self.evaluations
            .iter()
            .filter(move |e| selected.contains(e.design_id.as_str()))
            .flat_map(|e| e.pairs.iter())
    }

    pub fn accepted(&self) -> usize {
        self.rules.iter().filter(|r| r.accepted_id.is_some()).count()
    }
}

fn load_checkpoint(path: &Path) -> Result<BTreeMap<String, DesignEvaluation>> {
    let mut out = BTreeMap::new();
    let Ok(f) = File::open(path) else { return Ok(out) };
    for line in BufReader::new(f).lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        // a torn final line from an interrupted run is ignored
        if let Ok(e) = serde_json::from_str::<DesignEvaluation>(&line) {
            out.insert(e.design_id.clone(), e);
        }
    }
    Ok(out)
}

/// Runs the whole pipeline and appends accepted rules to `library`.
///
/// With a checkpoint path, finished design evaluations are appended to that
/// file and reused by a later run with the same corpus.
pub fn learn(
    corpus: &[RtlDesign],
    cfg: &LearningConfig,
    tools: &Toolchain<'_>,
    library: &mut RuleLibrary,
    checkpoint: Option<&Path>,
) -> Result<LearnReport> {
    cfg.validate()?;
    let mut report = LearnReport::default();
    let (kept, excluded) = filter_corpus(corpus, cfg, tools)?;
    report.excluded = excluded;
    log::info!("{} of {} designs admitted", kept.len(), corpus.len());

    let mut done = match checkpoint {
        Some(p) => load_checkpoint(p)?,
        None => BTreeMap::new(),
    };
    let todo: Vec<RtlDesign> = kept
        .iter()
        .filter(|m| !done.contains_key(&m.design.design_id))
        .map(|m| m.design.clone())
        .collect();
    let rewrites = explore(&todo, cfg, tools)?;
    for m in &kept {
        if done.contains_key(&m.design.design_id) {
            continue;
        }
        let Some(rws) = rewrites.get(&m.design.design_id) else {
            continue;
        };
        let eval = evaluate_design(m, rws, cfg, tools)?;
        log::info!(
            "{}: {} rewrites, entropy {:.3} bits, {} pairs",
            eval.design_id,
            rws.len(),
            eval.entropy,
            eval.pairs.len()
        );
        if let Some(p) = checkpoint {
            let mut f = OpenOptions::new().create(true).append(true).open(p)?;
            writeln!(f, "{}", serde_json::to_string(&eval).expect("evaluation serializes"))?;
        }
        done.insert(eval.design_id.clone(), eval);
    }
    report.evaluations = kept.iter().filter_map(|m| done.remove(&m.design.design_id)).collect();

    let ranked: Vec<(String, f64)> = report
        .evaluations
        .iter()
        .map(|e| (e.design_id.clone(), e.entropy))
        .collect();
    report.selected = select_designs(&ranked, cfg.top_percent);

    let pairs: Vec<CodePair> = report.pairs().cloned().collect();
    for pair in &pairs {
        let drafts = match induce_rules(pair, cfg, tools) {
            Ok(d) => d,
            Err(e @ Error::Environment(_)) => return Err(e),
            Err(e) => {
                log::warn!("induction for {} failed: {e}", pair.id);
                continue;
            }
        };
        for mut rule in drafts {
            let (score, attempts) = match score_rule(&rule, pair, cfg, tools) {
                Ok(s) => s,
                Err(Error::DegeneratePair(m)) => {
                    log::warn!("skipping {}: {m}", pair.id);
                    break;
                }
                Err(e) => return Err(e),
            };
            rule.score = score;
            let accepted_id = if score > cfg.accept_threshold {
                match library.add(rule.clone()) {
                    Ok(id) => Some(id),
                    Err(Error::Rejected(m)) => {
                        log::warn!("rule from {} rejected by the library: {m}", pair.id);
                        None
                    }
                    Err(e) => return Err(e),
                }
            } else {
                None
            };
            report.rules.push(ScoredRule {
                pair_id: pair.id.clone(),
                rule,
                attempts,
                accepted_id,
            });
        }
    }
    Ok(report)
}
