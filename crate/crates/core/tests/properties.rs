// SPDX-License-Identifier: Apache-2.0

use proptest::prelude::*;

use rtlopt_core::equiv::{BuiltinSimulator, StimulusConfig};
use rtlopt_core::learn::{entropy, mid_range, percentile, score_rewrite, select_designs, selection_size};
use rtlopt_core::library::{cosine, RuleLibrary, TableEmbedder};
use rtlopt_core::llm::{GenerationConfig, StubEntry, StubLlm, TemplateId};
use rtlopt_core::metrics::{impr_at_k, SampleSet};
use rtlopt_core::model::{
    improvement, relative_difference, EquivalenceVerdict, PpaMetrics, Provenance, RtlDesign, Rule, SearchConfig, Target,
};
use rtlopt_core::optimize::beam_search;
use rtlopt_core::synth::{MockSynthesizer, SynthesisConstraints};
use rtlopt_core::tfidf;
use rtlopt_core::toolchain::Toolchain;

/// Mean over all size-`k` subsets of the subset maximum.
fn brute_force(xs: &[f64], k: usize) -> f64 {
    let n = xs.len();
    let (mut total, mut count) = (0.0, 0u64);
    for mask in 0u32..(1 << n) {
        if mask.count_ones() as usize != k {
            continue;
        }
        let best = (0..n)
            .filter(|i| mask >> i & 1 == 1)
            .map(|i| xs[i])
            .fold(f64::MIN, f64::max);
        total += best;
        count += 1;
    }
    total / count as f64
}

fn area(v: f64) -> PpaMetrics {
    PpaMetrics::scalar_only(v, Target::Area).unwrap()
}

proptest! {
    #[test]
    fn rewrite_score_range_and_anchors(n in 1.0f64..1e4, gap in 0.01f64..0.99, i in 0.0f64..2e4, eq: bool) {
        let o = n * (1.0 - gap);
        let s = score_rewrite(n, o, i, eq, 0.25, 0.5).unwrap();
        prop_assert!((0.0..=1.0).contains(&s));
        if !eq {
            prop_assert_eq!(s, 0.0);
        }
        prop_assert_eq!(score_rewrite(n, o, n, true, 0.25, 0.5).unwrap(), 0.25);
        prop_assert_eq!(score_rewrite(n, o, o, true, 0.25, 0.5).unwrap(), 0.75);
    }

    #[test]
    fn rewrite_score_falls_as_cost_rises(n in 1.0f64..1e4, gap in 0.01f64..0.99, a in 0.0f64..2e4, b in 0.0f64..2e4) {
        let o = n * (1.0 - gap);
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(score_rewrite(n, o, lo, true, 0.25, 0.5).unwrap() >= score_rewrite(n, o, hi, true, 0.25, 0.5).unwrap());
    }

    #[test]
    fn improvement_is_a_fraction(orig in 0.001f64..1e6, cand in 0.0f64..2e6, eq: bool) {
        let v = if eq { EquivalenceVerdict::equivalent("") } else { EquivalenceVerdict::inequivalent("") };
        let x = improvement(&area(orig), &area(cand), &v).unwrap();
        prop_assert!((0.0..=1.0).contains(&x));
        if !eq || cand >= orig {
            prop_assert_eq!(x, 0.0);
        }
        let d = relative_difference(&area(orig), &area(cand)).unwrap();
        prop_assert_eq!(d, relative_difference(&area(cand), &area(orig)).unwrap());
    }

    #[test]
    fn entropy_bounds_and_order_independence(mut xs in prop::collection::vec(-1.5f64..1.5, 0..60)) {
        let h = entropy(&xs, 0.05);
        prop_assert!(h >= 0.0);
        prop_assert!(h <= 40f64.log2() + 1e-12);
        prop_assert!(h <= (xs.len().max(1) as f64).log2() + 1e-12);
        xs.reverse();
        prop_assert!((entropy(&xs, 0.05) - h).abs() < 1e-12);
    }

    #[test]
    fn selection_keeps_the_ceiling(hs in prop::collection::vec(0.0f64..5.0, 1..80), k in 1u32..=100) {
        let ev: Vec<(String, f64)> = hs.iter().enumerate().map(|(i, h)| (format!("d{i}"), *h)).collect();
        let picked = select_designs(&ev, k as f64);
        let expect = (k as usize * hs.len()).div_ceil(100);
        prop_assert_eq!(picked.len(), expect);
        prop_assert_eq!(selection_size(hs.len(), k as f64), expect);
        let floor = picked.iter().map(|id| ev.iter().find(|e| &e.0 == id).unwrap().1).fold(f64::MAX, f64::min);
        prop_assert!(ev.iter().filter(|e| !picked.contains(&e.0)).all(|e| e.1 <= floor));
    }

    #[test]
    fn mid_range_stays_in_band(xs in prop::collection::vec(0.0f64..1e3, 1..50)) {
        let mut sorted = xs.clone();
        sorted.sort_by(f64::total_cmp);
        let (lo, hi) = (percentile(&sorted, 25.0), percentile(&sorted, 75.0));
        prop_assert!(sorted[0] <= lo && lo <= hi && hi <= sorted[sorted.len() - 1]);
        for i in mid_range(&xs, [25.0, 75.0]) {
            prop_assert!(xs[i] >= lo && xs[i] <= hi);
        }
        prop_assert_eq!(mid_range(&xs, [0.0, 100.0]).len(), xs.len());
    }

    #[test]
    fn estimator_matches_enumeration(xs in prop::collection::vec(0.0f64..=1.0, 1..=12)) {
        let set = SampleSet::new("c", xs.clone()).unwrap();
        let mut prev = 0.0;
        for k in 1..=xs.len() {
            let got = impr_at_k(&set, k).unwrap();
            prop_assert!((got - brute_force(&xs, k)).abs() <= 1e-12, "k={} got={} want={}", k, got, brute_force(&xs, k));
            prop_assert!(got >= prev - 1e-15);
            prev = got;
        }
    }

    #[test]
    fn estimator_ignores_sample_order(mut xs in prop::collection::vec(0.0f64..=1.0, 2..40), k in 1usize..40) {
        let k = k.min(xs.len());
        let a = impr_at_k(&SampleSet::new("c", xs.clone()).unwrap(), k).unwrap();
        xs.rotate_left(1);
        let b = impr_at_k(&SampleSet::new("c", xs).unwrap(), k).unwrap();
        prop_assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn diversity_is_a_fraction(words in prop::collection::vec("[a-z]{2,5}", 0..12), anc in prop::collection::vec("[a-z]{2,5}", 1..12)) {
        let cand = words.join(" ");
        let parent = anc.join(" ");
        let d = tfidf::diversity(&cand, &[&parent]);
        prop_assert!((0.0..=1.0).contains(&d));
        prop_assert_eq!(tfidf::diversity(&parent, &[&parent]), 0.0);
    }

    #[test]
    fn cosine_ignores_positive_scale(a in prop::collection::vec(-5.0f64..5.0, 8), b in prop::collection::vec(-5.0f64..5.0, 8), s in 0.01f64..100.0) {
        let scaled: Vec<f64> = a.iter().map(|x| x * s).collect();
        prop_assert!((cosine(&a, &b) - cosine(&scaled, &b)).abs() < 1e-12);
    }

    #[test]
    fn persisted_library_retrieves_the_same(vecs in prop::collection::vec(prop::collection::vec(-1.0f64..1.0, 4), 1..8), q in prop::collection::vec(-1.0f64..1.0, 4)) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("lib.jsonl");
        let mut emb = TableEmbedder::new(4);
        for (i, v) in vecs.iter().enumerate() {
            emb = emb.with(&rtlopt_core::model::retrieval_text(&format!("c{i}"), "a"), v.clone());
        }
        let mut lib = RuleLibrary::create(&path, Box::new(emb.clone()), 0.7).unwrap();
        for i in 0..vecs.len() {
            let mut r = Rule::draft("s", &format!("c{i}"), "a", Provenance { pair_id: "p#0".into(), attempt: 0 });
            r.score = 0.9;
            lib.add(r).unwrap();
        }
        let reopened = RuleLibrary::open(&path, Box::new(emb)).unwrap();
        let ids = |l: &RuleLibrary| l.rank(&q, 3).iter().map(|r| (r.rule.id.clone(), r.similarity)).collect::<Vec<_>>();
        let hits = ids(&lib);
        prop_assert_eq!(&hits, &ids(&reopened));
        prop_assert!(hits.windows(2).all(|w| w[0].1 >= w[1].1));
    }
}

const SEARCH_DESIGN: &str =
    "module sel(input [3:0] a, b, input s, output [4:0] y);\n  assign y = s ? a + b : a - b;\nendmodule\n";

fn answer(kind: u8, sample: u32) -> StubEntry {
    let mut e = StubEntry {
        template: Some(TemplateId::Optimize),
        sample: Some(sample),
        ..StubEntry::default()
    };
    match kind {
        0 => e.echo = true,
        1 => e.text = Some("no code".into()),
        2 => e.replace = vec![("a - b".into(), "b - a".into())],
        3 => {
            e.replace = vec![
                ("a + b".into(), "b + a".into()),
                ("endmodule".into(), "wire w{sample};\nendmodule".into()),
            ]
        }
        _ => e.replace = vec![("endmodule".into(), "wire v{sample};\nendmodule".into())],
    }
    e
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn search_respects_budget_and_validity(k in 1u32..=3, m in 1u32..=3, s in 1u32..=3, kinds in prop::collection::vec(0u8..5, 40)) {
        let cfg = SearchConfig::new(k, m, s);
        let mut entries = vec![StubEntry { echo: true, ..StubEntry::default() }];
        entries.extend(kinds.iter().enumerate().map(|(i, &kd)| answer(kd, i as u32)));
        let llm = StubLlm::new(entries).unwrap();
        let sim = BuiltinSimulator::new();
        let synth = MockSynthesizer::new();
        let constraints = SynthesisConstraints::default();
        let tools = Toolchain {
            llm: &llm,
            synth: &synth,
            sim: &sim,
            stimulus: StimulusConfig { cycles_per_sequence: 64, ..StimulusConfig::default() },
            generation: GenerationConfig::default(),
            constraints: &constraints,
            target: Target::Area,
        };
        let lib = RuleLibrary::in_memory(Box::new(TableEmbedder::new(2)), 0.7).unwrap();
        let design = RtlDesign::new("sel", SEARCH_DESIGN).unwrap();
        let out = beam_search(&design, &cfg, &lib, &tools).unwrap();
        prop_assert!(out.generations <= out.budget);
        prop_assert!(out.archive.len() as u64 <= out.generations);
        prop_assert!(out.steps.windows(2).all(|w| w[0].best_improvement <= w[1].best_improvement));
        for step in &out.steps {
            prop_assert!(step.beam.len() <= k as usize);
            for entry in &step.beam {
                let valid = entry.id == out.root.id
                    || out.archive.iter().any(|r| r.candidate.id == entry.id && r.eligible && r.candidate.verdict.is_equivalent() && r.candidate.ppa.is_some());
                prop_assert!(valid, "{} is not a valid beam member", entry.id);
            }
        }
        prop_assert!(out.best.verdict.is_equivalent());
    }
}
