// SPDX-License-Identifier: Apache-2.0

//! Retrieval-guided optimization and diversity-aware beam search.
//!
//! One expansion speculates a rule for the target, retrieves similar library
//! rules, adapts them to the target and asks for `m` optimized variants. The
//! search keeps the `k` best candidates by a blend of diversity against the
//! candidate's ancestors and PPA relative to the root.

use std::cmp::Ordering;
use std::collections::{BTreeSet, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learn::{format_rules, format_triples, metric_name, verdict_or_inconclusive};
use crate::library::RuleLibrary;
use crate::llm::{extract_code, extract_rules, generate, vars, TemplateId};
use crate::model::{improvement, total_budget, Candidate, EquivalenceVerdict, PpaMetrics, RtlDesign, SearchConfig};
use crate::tfidf;
use crate::toolchain::Toolchain;
use crate::verilog::extract_interface;

pub const RETRIEVE_TOP: usize = 3;
pub const NO_RULES: &str = "No library rules are available; rely on general optimization knowledge.";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpeculatedRule {
    pub snippet: String,
    pub condition: String,
    pub action: String,
    /// True when the model's answer could not be used and the interface
    /// summary stands in.
    pub fallback: bool,
}

/// Asks for one rule describing how `target` could improve. Unusable answers
/// fall back to the design's interface.
pub fn speculate(target: &RtlDesign, sample: u32, tools: &Toolchain<'_>) -> Result<SpeculatedRule> {
    let metric = metric_name(tools.target);
    let v = vars([("code", target.source.as_str()), ("target_metric", metric)]);
    let got = generate(tools.llm, TemplateId::Speculate, &v, sample, &tools.generation, |raw| {
        extract_rules(raw, 1).into_iter().next()
    })?;
    if let Some(t) = got {
        return Ok(SpeculatedRule {
            snippet: t.snippet,
            condition: t.condition,
            action: t.action,
            fallback: false,
        });
    }
    let summary = match extract_interface(target) {
        Ok(i) => i.summary(),
        Err(_) => target.design_id.clone(),
    };
    Ok(SpeculatedRule {
        snippet: format!("module {summary};"),
        condition: summary,
        action: format!("reduce {metric}"),
        fallback: true,
    })
}

/// `0` for non-equivalent candidates, else `0.5 + 0.5·(root − cand)/root`
/// clipped to [0, 1].
pub fn ppa_score(root_ppa: f64, candidate: &Candidate) -> f64 {
    match candidate.ppa {
        Some(p) if candidate.verdict.is_equivalent() && root_ppa > 0.0 => {
            (0.5 + 0.5 * (root_ppa - p.scalar()) / root_ppa).clamp(0.0, 1.0)
        }
        _ => 0.0,
    }
}

pub fn composite_score(diversity: f64, ppa: f64, weight: f64) -> f64 {
    weight * diversity + (1.0 - weight) * ppa
}

pub fn diversity_score(candidate: &str, ancestors: &[&str]) -> f64 {
    tfidf::diversity(candidate, ancestors)
}

/// Beam order: higher score, then lower target metric, then smaller source
/// hash, then smaller id.
pub fn rank_order(a: &(Candidate, String), b: &(Candidate, String)) -> Ordering {
    let metric = |c: &Candidate| c.ppa.map_or(f64::INFINITY, |p| p.scalar());
    b.0.score
        .total_cmp(&a.0.score)
        .then_with(|| metric(&a.0).total_cmp(&metric(&b.0)))
        .then_with(|| a.1.cmp(&b.1))
        .then_with(|| a.0.id.cmp(&b.0.id))
}

pub fn is_pool_eligible(c: &Candidate) -> bool {
    c.verdict.is_equivalent() && c.ppa.is_some()
}

/// A variant produced by one optimize generation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Generated {
    pub generation: u64,
    pub candidate: Candidate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Expansion {
    pub target_id: String,
    pub speculated: SpeculatedRule,
    pub retrieved: Vec<String>,
    /// Generations issued, including those that produced no code.
    pub generations: u64,
    pub variants: Vec<Generated>,
}

/// One speculate / retrieve / adapt / optimize round on `target`. Variants
/// are checked against `root`; those that fail keep their verdict so the
/// caller can archive them. Generations without a code block yield nothing.
#[allow(clippy::too_many_arguments)]
pub fn arao_step(
    target: &Candidate,
    root: &RtlDesign,
    library: &RuleLibrary,
    m: u32,
    first_generation: u64,
    expansion: u32,
    tools: &Toolchain<'_>,
) -> Result<Expansion> {
    if m == 0 {
        return Err(Error::Domain("an expansion needs at least one generation".into()));
    }
    let metric = metric_name(tools.target);
    let speculated = speculate(&target.design, expansion, tools)?;

    let (guidance, retrieved) = if library.is_empty() {
        log::warn!("rule library is empty; optimizing {} without rules", target.id);
        (NO_RULES.to_string(), Vec::new())
    } else {
        let hits = library.retrieve(&speculated.condition, &speculated.action, RETRIEVE_TOP)?;
        let ids: Vec<String> = hits.iter().map(|h| h.rule.id.clone()).collect();
        let listed = format_rules(hits.iter().map(|h| h.rule));
        let opportunity = format!("{}\n{}", speculated.condition, speculated.action);
        let v = vars([
            ("code", target.design.source.as_str()),
            ("rules", listed.as_str()),
            ("speculated_condition", opportunity.as_str()),
            ("target_metric", metric),
        ]);
        let n = hits.len();
        let adapted = generate(tools.llm, TemplateId::Adapt, &v, expansion, &tools.generation, |raw| {
            let t = extract_rules(raw, n);
            (!t.is_empty()).then_some(t)
        })?;
        let text = match adapted {
            Some(t) => format_triples(
                t.iter()
                    .map(|r| (r.snippet.as_str(), r.condition.as_str(), r.action.as_str())),
            ),
            None => listed,
        };
        (text, ids)
    };

    let v = vars([
        ("code", target.design.source.as_str()),
        ("rules", guidance.as_str()),
        ("target_metric", metric),
    ]);
    let results: Vec<Result<Option<Generated>>> = (0..m as u64)
        .into_par_iter()
        .map(|i| {
            let generation = first_generation + i;
            let sample = u32::try_from(generation).map_err(|_| Error::Domain("generation index overflow".into()))?;
            let Some(code) = generate(
                tools.llm,
                TemplateId::Optimize,
                &v,
                sample,
                &tools.generation,
                extract_code,
            )?
            else {
                return Ok(None);
            };
            let design = RtlDesign::new(format!("{}~g{generation}", root.design_id), code)?;
            let verdict = verdict_or_inconclusive(tools.equivalence(root, &design))?;
            let ppa = if verdict.is_equivalent() {
                match tools.measure(&design) {
                    Ok(p) => Some(p),
                    Err(e @ Error::Environment(_)) => return Err(e),
                    Err(e) => {
                        log::debug!("{} failed synthesis: {e}", design.design_id);
                        None
                    }
                }
            } else {
                None
            };
            Ok(Some(Generated {
                generation,
                candidate: Candidate {
                    id: design.design_id.clone(),
                    design,
                    parent_id: Some(target.id.clone()),
                    depth: target.depth + 1,
                    verdict,
                    ppa,
                    score: 0.0,
                },
            }))
        })
        .collect();
    let mut variants = Vec::new();
    for r in results {
        if let Some(g) = r? {
            variants.push(g);
        }
    }
    Ok(Expansion {
        target_id: target.id.clone(),
        speculated,
        retrieved,
        generations: m as u64,
        variants,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchiveRecord {
    pub step: u32,
    pub generation: u64,
    pub candidate: Candidate,
    pub diversity: f64,
    pub ppa_score: f64,
    pub improvement: f64,
    pub eligible: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeamEntry {
    pub id: String,
    pub score: f64,
    pub ppa: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepReport {
    pub step: u32,
    /// Generations issued so far in the run.
    pub generations: u64,
    pub beam: Vec<BeamEntry>,
    pub best_improvement: f64,
    pub expansions: Vec<Expansion>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeamState {
    pub step: u32,
    pub beam: Vec<Candidate>,
    pub archive: Vec<ArchiveRecord>,
    pub budget_used: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchOutcome {
    pub root: Candidate,
    pub best: Candidate,
    pub best_improvement: f64,
    pub budget: u64,
    pub generations: u64,
    pub steps: Vec<StepReport>,
    pub archive: Vec<ArchiveRecord>,
}

fn ancestors_of<'c>(id: &str, known: &'c HashMap<String, Candidate>) -> Vec<&'c str> {
    let mut chain = Vec::new();
    let mut cur = known.get(id);
    while let Some(c) = cur {
        chain.push(c.design.source.as_str());
        cur = c.parent_id.as_deref().and_then(|p| known.get(p));
    }
    chain.reverse();
    chain
}

/// Verifies and measures the original, producing the root candidate.
pub fn prepare_root(original: &RtlDesign, config: &SearchConfig, tools: &Toolchain<'_>) -> Result<Candidate> {
    let input = |e: Error| match e {
        Error::Environment(_) => e,
        other => Error::Input(format!("original design {}: {other}", original.design_id)),
    };
    let verdict = tools.equivalence(original, original).map_err(input)?;
    if !verdict.is_equivalent() {
        return Err(Error::Input(format!(
            "original design {} is not equivalent to itself: {}",
            original.design_id, verdict.detail
        )));
    }
    let ppa = tools.measure(original).map_err(input)?;
    if !(ppa.scalar() > 0.0) {
        return Err(Error::Input(format!(
            "original design {} has zero {}",
            original.design_id, tools.target
        )));
    }
    let mut root = Candidate {
        id: original.design_id.clone(),
        design: original.clone(),
        parent_id: None,
        depth: 0,
        verdict,
        ppa: Some(ppa),
        score: 0.0,
    };
    let diversity = diversity_score(&original.source, &[&original.source]);
    root.score = composite_score(diversity, ppa_score(ppa.scalar(), &root), config.diversity_weight);
    Ok(root)
}

pub fn beam_search(
    original: &RtlDesign,
    config: &SearchConfig,
    library: &RuleLibrary,
    tools: &Toolchain<'_>,
) -> Result<SearchOutcome> {
    let budget = total_budget(config)?;
    let root = prepare_root(original, config, tools)?;
    let root_ppa: PpaMetrics = root.ppa.expect("root is measured");
    let k = config.beam_width as usize;
    let m = config.num_expand as u64;

    let mut known: HashMap<String, Candidate> = HashMap::new();
    known.insert(root.id.clone(), root.clone());
    let mut state = BeamState {
        step: 0,
        beam: vec![root.clone()],
        archive: Vec::new(),
        budget_used: 0,
    };
    let mut steps = Vec::new();
    let mut best_improvement = 0.0f64;
    let mut expansions_done = 0u32;

    for step in 1..=config.max_steps {
        if state.budget_used >= budget {
            break;
        }
        state.step = step;
        // plan generation ranges up front so concurrent expansions stay deterministic
        let mut plan = Vec::new();
        let mut next = state.budget_used;
        for target in state.beam.iter().take(if step == 1 { 1 } else { k }) {
            let n = m.min(budget - next);
            if n == 0 {
                break;
            }
            plan.push((target, n, next, expansions_done));
            next += n;
            expansions_done += 1;
        }
        let results: Vec<Result<Expansion>> = plan
            .par_iter()
            .map(|&(target, n, first, ordinal)| arao_step(target, original, library, n as u32, first, ordinal, tools))
            .collect();
        let expansions = results.into_iter().collect::<Result<Vec<_>>>()?;
        state.budget_used = next;

        let mut fresh = Vec::new();
        for exp in &expansions {
            for g in &exp.variants {
                let mut cand = g.candidate.clone();
                let parent = cand.parent_id.as_deref().expect("variants have parents");
                let ancestors = ancestors_of(parent, &known);
                let diversity = diversity_score(&cand.design.source, &ancestors);
                let ppa = ppa_score(root_ppa.scalar(), &cand);
                cand.score = composite_score(diversity, ppa, config.diversity_weight);
                let impr = match cand.ppa {
                    Some(p) => improvement(&root_ppa, &p, &cand.verdict)?,
                    None => 0.0,
                };
                let eligible = is_pool_eligible(&cand);
                if eligible {
                    best_improvement = best_improvement.max(impr);
                    fresh.push(cand.clone());
                }
                state.archive.push(ArchiveRecord {
                    step,
                    generation: g.generation,
                    candidate: cand,
                    diversity,
                    ppa_score: ppa,
                    improvement: impr,
                    eligible,
                });
            }
        }
        for c in &fresh {
            known.insert(c.id.clone(), c.clone());
        }

        let mut seen = BTreeSet::new();
        let mut pool: Vec<(Candidate, String)> = Vec::new();
        for c in state.beam.drain(..).chain(fresh) {
            let h = c.design.normalized_hash();
            if seen.insert(h.clone()) {
                pool.push((c, h));
            }
        }
        pool.sort_by(rank_order);
        pool.truncate(k);
        state.beam = pool.into_iter().map(|(c, _)| c).collect();

        steps.push(StepReport {
            step,
            generations: state.budget_used,
            beam: state
                .beam
                .iter()
                .map(|c| BeamEntry {
                    id: c.id.clone(),
                    score: c.score,
                    ppa: c.ppa.map_or(0.0, |p| p.scalar()),
                })
                .collect(),
            best_improvement,
            expansions,
        });
    }

    let best = state
        .archive
        .iter()
        .filter(|r| r.eligible && r.improvement > 0.0)
        .max_by(|a, b| {
            a.improvement
                .total_cmp(&b.improvement)
                .then(b.generation.cmp(&a.generation))
        })
        .map(|r| r.candidate.clone())
        .unwrap_or_else(|| root.clone());
    Ok(SearchOutcome {
        root,
        best,
        best_improvement,
        budget,
        generations: state.budget_used,
        steps,
        archive: state.archive,
    })
}

impl SearchOutcome {
    /// Per-generation improvements with zeros for generations that produced
    /// nothing usable, in generation order.
    pub fn improvements(&self) -> Vec<f64> {
        let mut v = vec![0.0; self.generations as usize];
        for r in &self.archive {
            if let Some(slot) = v.get_mut(r.generation as usize) {
                *slot = r.improvement;
            }
        }
        v
    }

    pub fn verdict_counts(&self) -> (usize, usize) {
        let eq = self
            .archive
            .iter()
            .filter(|r| r.candidate.verdict.is_equivalent())
            .count();
        (eq, self.archive.len() - eq)
    }
}

/// Convenience for tests and reports: an equivalent candidate with given PPA.
pub fn measured_candidate(id: &str, source: &str, ppa: PpaMetrics) -> Result<Candidate> {
    Ok(Candidate {
        id: id.to_string(),
        design: RtlDesign::new(id, source)?,
        parent_id: None,
        depth: 0,
        verdict: EquivalenceVerdict::equivalent("assumed"),
        ppa: Some(ppa),
        score: 0.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Target;

    fn cand(id: &str, area: f64, eq: bool) -> Candidate {
        let mut c = measured_candidate(
            id,
            "module m; endmodule",
            PpaMetrics::scalar_only(area, Target::Area).unwrap(),
        )
        .unwrap();
        if !eq {
            c.verdict = EquivalenceVerdict::inequivalent("x");
        }
        c
    }

    #[test]
    fn ppa_score_examples() {
        assert_eq!(ppa_score(100.0, &cand("a", 100.0, true)), 0.5);
        assert_eq!(ppa_score(100.0, &cand("a", 50.0, true)), 0.75);
        assert_eq!(ppa_score(100.0, &cand("a", 50.0, false)), 0.0);
        assert_eq!(ppa_score(100.0, &cand("a", 400.0, true)), 0.0);
        assert_eq!(ppa_score(100.0, &cand("a", 0.0, true)), 1.0);
    }

    #[test]
    fn composite_examples() {
        assert_eq!(composite_score(1.0, 0.5, 0.25), 0.625);
        assert_eq!(composite_score(0.0, 0.0, 0.25), 0.0);
        assert_eq!(composite_score(0.9, 0.37, 0.0), 0.37);
    }

    #[test]
    fn rank_ties() {
        let mut a = cand("b", 10.0, true);
        let mut b = cand("a", 20.0, true);
        a.score = 0.5;
        b.score = 0.5;
        let mut pool = [(b.clone(), "00".to_string()), (a.clone(), "ff".to_string())];
        pool.sort_by(rank_order);
        assert_eq!(pool[0].0.id, "b", "lower metric wins a score tie");
        b.ppa = a.ppa;
        let mut pool = [(a, "ff".to_string()), (b, "00".to_string())];
        pool.sort_by(rank_order);
        assert_eq!(pool[0].0.id, "a", "smaller hash wins");
    }
}
