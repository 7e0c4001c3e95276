// SPDX-License-Identifier: Apache-2.0

use std::path::{Path, PathBuf};
use std::sync::Mutex;

use rtlopt_core::corpus;
use rtlopt_core::equiv::{BuiltinSimulator, StimulusConfig};
use rtlopt_core::library::{HashedTfIdf, RuleLibrary};
use rtlopt_core::llm::{GenerationConfig, LlmAdapter, Prompt, StubLlm, TemplateId};
use rtlopt_core::model::{total_budget, Provenance, RtlDesign, Rule, SearchConfig, Target};
use rtlopt_core::optimize::{arao_step, beam_search, is_pool_eligible, prepare_root, speculate, NO_RULES};
use rtlopt_core::synth::{MockSynthesizer, SynthesisConstraints};
use rtlopt_core::toolchain::Toolchain;
use rtlopt_core::Error;

fn root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn design(name: &str) -> RtlDesign {
    corpus::load_design(&root().join(format!("corpus/micro/{name}.v"))).unwrap()
}

/// Records every prompt before delegating to a stub.
struct Recorder {
    inner: StubLlm,
    prompts: Mutex<Vec<Prompt>>,
}

impl Recorder {
    fn new(inner: StubLlm) -> Self {
        Recorder {
            inner,
            prompts: Mutex::new(Vec::new()),
        }
    }

    fn count(&self, t: TemplateId) -> usize {
        self.prompts.lock().unwrap().iter().filter(|p| p.template == t).count()
    }
}

impl LlmAdapter for Recorder {
    fn model(&self) -> String {
        self.inner.model()
    }

    fn complete(&self, prompt: &Prompt) -> rtlopt_core::Result<String> {
        self.prompts.lock().unwrap().push(prompt.clone());
        self.inner.complete(prompt)
    }
}

const SYNTH: MockSynthesizer = MockSynthesizer;

fn with_tools<R>(llm: &dyn LlmAdapter, f: impl FnOnce(&Toolchain<'_>) -> R) -> R {
    let sim = BuiltinSimulator::new();
    let constraints = SynthesisConstraints::default();
    let tools = Toolchain {
        llm,
        synth: &SYNTH,
        sim: &sim,
        stimulus: StimulusConfig::default(),
        generation: GenerationConfig::default(),
        constraints: &constraints,
        target: Target::Area,
    };
    f(&tools)
}

fn empty_library() -> RuleLibrary {
    RuleLibrary::in_memory(Box::new(HashedTfIdf::new()), 0.7).unwrap()
}

#[test]
fn scripted_search_finds_the_ten_percent_variant() {
    let llm = StubLlm::load(&root().join("corpus/stubs/search.toml")).unwrap();
    let out = with_tools(&llm, |t| {
        beam_search(&design("sum_pairs"), &SearchConfig::new(2, 3, 3), &empty_library(), t)
    })
    .unwrap();
    assert_eq!(out.budget, 15);
    assert_eq!(out.generations, 15);
    assert_eq!(out.best_improvement, 0.10);
    assert_eq!(out.best.id, "sum_pairs~g6");
    assert_eq!(out.best.ppa.unwrap().area, 72.0);

    let bests: Vec<f64> = out.steps.iter().map(|s| s.best_improvement).collect();
    assert_eq!(bests, [0.05, 0.10, 0.10]);
    assert_eq!(
        out.steps[0].beam.iter().map(|b| b.id.as_str()).collect::<Vec<_>>(),
        ["sum_pairs~g0", "sum_pairs"]
    );
    assert_eq!(out.steps[1].beam[0].id, "sum_pairs~g6");

    // the broken variant is archived but never enters the beam
    let broken = out.archive.iter().find(|r| r.generation == 2).unwrap();
    assert!(!broken.eligible);
    assert_eq!(broken.improvement, 0.0);
    assert!(out.steps.iter().all(|s| s.beam.iter().all(|b| b.id != "sum_pairs~g2")));
}

#[test]
fn unchanged_answers_keep_the_original() {
    let llm = StubLlm::echo();
    let out = with_tools(&llm, |t| {
        beam_search(&design("max4"), &SearchConfig::new(2, 3, 3), &empty_library(), t)
    })
    .unwrap();
    assert_eq!(out.best_improvement, 0.0);
    assert_eq!(out.best.id, "max4");
    for s in &out.steps {
        assert_eq!(s.beam.len(), 1);
        assert_eq!(s.beam[0].id, "max4");
        assert_eq!(s.beam[0].score, 0.75 * 0.5);
    }
    // copies of the original collapse into one beam entry, so each later step expands it alone
    assert_eq!(out.generations, 9);
    assert!(out.generations <= out.budget);
}

#[test]
fn budget_is_spent_exactly_for_each_scale() {
    for ((k, m, s), n) in [((2, 3, 3), 15), ((3, 5, 4), 50), ((3, 8, 5), 104), ((5, 10, 5), 210)] {
        let cfg = SearchConfig::new(k, m, s);
        assert_eq!(total_budget(&cfg).unwrap(), n);
        let llm = Recorder::new(StubLlm::load(&root().join("corpus/stubs/distinct.toml")).unwrap());
        let out = with_tools(&llm, |t| beam_search(&design("add4"), &cfg, &empty_library(), t)).unwrap();
        assert_eq!(out.generations, n);
        assert_eq!(llm.count(TemplateId::Optimize) as u64, n);
        assert_eq!(out.archive.len() as u64, n);
    }
}

#[test]
fn archives_are_reproducible() {
    let llm = StubLlm::load(&root().join("corpus/stubs/search.toml")).unwrap();
    let run = || {
        with_tools(&llm, |t| {
            beam_search(&design("sum_pairs"), &SearchConfig::new(2, 3, 3), &empty_library(), t)
        })
        .unwrap()
    };
    let a = serde_json::to_string(&run().archive).unwrap();
    let b = serde_json::to_string(&run().archive).unwrap();
    assert_eq!(a, b);
}

#[test]
fn broken_original_is_an_input_error() {
    let bad = RtlDesign::new("bad", "module bad(input a, output y); assign y = ; endmodule").unwrap();
    let llm = Recorder::new(StubLlm::echo());
    let err = with_tools(&llm, |t| {
        beam_search(&bad, &SearchConfig::new(2, 3, 3), &empty_library(), t)
    })
    .unwrap_err();
    assert!(matches!(err, Error::Input(_)), "{err}");
    assert_eq!(llm.prompts.lock().unwrap().len(), 0);
}

const MIXED: &str = r#"
[[entry]]
template = "optimize"
sample = 0
echo = true

[[entry]]
template = "optimize"
sample = 1
replace = [["(a < b)", "(a <= b)"], ["? b : a", "? a : b"]]
"#;

#[test]
fn one_step_keeps_failed_variants_for_the_archive() {
    let llm = StubLlm::from_toml(MIXED).unwrap();
    let d = design("max4");
    let exp = with_tools(&llm, |t| {
        let root = prepare_root(&d, &SearchConfig::default(), t).unwrap();
        arao_step(&root, &d, &empty_library(), 3, 0, 0, t).unwrap()
    });
    assert_eq!(exp.generations, 3);
    assert_eq!(exp.variants.len(), 2, "the fenceless answer yields nothing");
    let eligible = exp.variants.iter().filter(|g| is_pool_eligible(&g.candidate)).count();
    assert_eq!(eligible, 1);
    assert!(exp.retrieved.is_empty());
}

#[test]
fn retrieved_rules_reach_the_prompts() {
    let mut lib = empty_library();
    let mut rule = Rule::draft(
        "assign y = (a < b) ? b : a;",
        "A comparison selects between its own operands.",
        "Share the comparator with the selection logic.",
        Provenance {
            pair_id: "x#0".into(),
            attempt: 0,
        },
    );
    rule.score = 0.9;
    lib.add(rule).unwrap();
    let llm = Recorder::new(StubLlm::echo());
    let d = design("max4");
    let exp = with_tools(&llm, |t| {
        let root = prepare_root(&d, &SearchConfig::default(), t).unwrap();
        arao_step(&root, &d, &lib, 2, 0, 0, t).unwrap()
    });
    assert_eq!(exp.retrieved, ["rule-0001"]);
    // one logical adapt call; the echoed answer has no rule sections and is asked again once
    assert_eq!(llm.count(TemplateId::Adapt), 2);
    assert!(llm
        .prompts
        .lock()
        .unwrap()
        .iter()
        .filter(|p| p.template == TemplateId::Adapt)
        .all(|p| p.sample == 0));
    let prompts = llm.prompts.lock().unwrap();
    let adapt = prompts.iter().find(|p| p.template == TemplateId::Adapt).unwrap();
    assert!(adapt.text.contains("Share the comparator"));
    // the echoed adapt answer carries no rule sections, so the retrieved rules are used as-is
    let opt = prompts.iter().find(|p| p.template == TemplateId::Optimize).unwrap();
    assert!(opt.text.contains("Share the comparator"));
    assert!(!opt.text.contains(NO_RULES));
}

#[test]
fn empty_library_optimizes_without_rules() {
    let llm = Recorder::new(StubLlm::echo());
    let d = design("add4");
    let exp = with_tools(&llm, |t| {
        let root = prepare_root(&d, &SearchConfig::default(), t).unwrap();
        arao_step(&root, &d, &empty_library(), 3, 0, 0, t).unwrap()
    });
    assert_eq!(exp.variants.len(), 3);
    assert_eq!(llm.count(TemplateId::Adapt), 0);
    let prompts = llm.prompts.lock().unwrap();
    assert!(prompts
        .iter()
        .filter(|p| p.template == TemplateId::Optimize)
        .all(|p| p.text.contains(NO_RULES)));
}

#[test]
fn speculation_parses_or_falls_back() {
    let d = design("add4");
    let scripted = StubLlm::from_toml(
        "[[entry]]\ntemplate = \"speculate\"\ntext = \"[SNIPPET]\\na + b\\n[CONDITION]\\nwide add\\n[ACTION]\\nnarrow it\"\n",
    )
    .unwrap();
    let s = with_tools(&scripted, |t| speculate(&d, 0, t)).unwrap();
    assert_eq!(
        (s.snippet.as_str(), s.condition.as_str(), s.action.as_str(), s.fallback),
        ("a + b", "wide add", "narrow it", false)
    );

    let llm = Recorder::new(StubLlm::default());
    let s = with_tools(&llm, |t| speculate(&d, 0, t)).unwrap();
    assert!(s.fallback);
    assert_eq!(s.condition, "add4(input [3:0] a, input [3:0] b, output [4:0] y)");
    assert_eq!(s.action, "reduce area");
    assert_eq!(llm.count(TemplateId::Speculate), 2, "one re-ask before falling back");

    let partial = StubLlm::from_toml(
        "[[entry]]\ntemplate = \"speculate\"\ntext = \"[SNIPPET]\\na + b\\n[CONDITION]\\nwide add\\n[ACTION]\\n\"\n",
    )
    .unwrap();
    assert!(with_tools(&partial, |t| speculate(&d, 0, t)).unwrap().fallback);
}
