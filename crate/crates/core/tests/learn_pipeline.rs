// SPDX-License-Identifier: Apache-2.0

use std::path::{Path, PathBuf};

use rtlopt_core::equiv::{BuiltinSimulator, StimulusConfig};
use rtlopt_core::learn::{learn, LearnReport, LearningConfig};
use rtlopt_core::library::{HashedTfIdf, RuleLibrary};
use rtlopt_core::llm::GenerationConfig;
use rtlopt_core::llm::StubLlm;
use rtlopt_core::model::{relative_difference, Target};
use rtlopt_core::synth::{MockSynthesizer, SynthesisConstraints};
use rtlopt_core::toolchain::Toolchain;
use rtlopt_core::{corpus, Error};

fn root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn micro_config() -> LearningConfig {
    LearningConfig {
        rewrites_per_design: 4,
        area_band: [0.0, 100.0],
        ..LearningConfig::default()
    }
}

fn run(checkpoint: Option<&Path>) -> (LearnReport, RuleLibrary) {
    let designs = corpus::load_dir(&root().join("corpus/micro")).unwrap();
    let llm = StubLlm::load(&root().join("corpus/stubs/learn.toml")).unwrap();
    let synth = MockSynthesizer::new();
    let sim = BuiltinSimulator::new();
    let constraints = SynthesisConstraints::default();
    let tools = Toolchain {
        llm: &llm,
        synth: &synth,
        sim: &sim,
        stimulus: StimulusConfig::default(),
        generation: GenerationConfig::default(),
        constraints: &constraints,
        target: Target::Area,
    };
    let cfg = micro_config();
    let mut lib = RuleLibrary::in_memory(Box::new(HashedTfIdf::new()), cfg.accept_threshold).unwrap();
    let report = learn(&designs, &cfg, &tools, &mut lib, checkpoint).unwrap();
    (report, lib)
}

#[test]
fn micro_corpus_learning_trace() {
    let (report, lib) = run(None);
    assert!(report.excluded.is_empty(), "{:?}", report.excluded);
    assert_eq!(report.evaluations.len(), 14);
    assert_eq!(report.selected, ["sum_pairs", "mac4", "absdiff", "alu4"]);

    let entropy = |id: &str| report.evaluations.iter().find(|e| e.design_id == id).unwrap().entropy;
    assert_eq!(entropy("sum_pairs"), 2.0);
    assert!((entropy("mac4") - 3f64.log2()).abs() < 1e-12);
    assert_eq!(entropy("absdiff"), 1.0);
    assert_eq!(entropy("popcount8"), 0.0);

    let pair_ids: Vec<&str> = report.pairs().map(|p| p.id.as_str()).collect();
    assert_eq!(
        pair_ids,
        [
            "absdiff#0",
            "absdiff#1",
            "alu4#0",
            "mac4#0",
            "mac4#1",
            "sum_pairs#0",
            "sum_pairs#1"
        ]
    );
    for p in report.pairs() {
        assert!(relative_difference(&p.ppa_non, &p.ppa_opt).unwrap() > 0.05, "{}", p.id);
        assert!(p.ppa_opt.scalar() < p.ppa_non.scalar());
    }

    let score = |pair: &str, i: usize| {
        report
            .rules
            .iter()
            .filter(|r| r.pair_id == pair)
            .nth(i)
            .unwrap()
            .rule
            .score
    };
    assert!((score("sum_pairs#0", 0) - 2.5 / 3.0).abs() < 1e-12);
    assert!((score("sum_pairs#1", 0) - 1.0 / 3.0).abs() < 1e-12);
    assert_eq!(score("mac4#0", 0), 0.75);
    assert_eq!(score("mac4#0", 1), 0.25);

    assert_eq!(report.accepted(), 3);
    assert_eq!(lib.len(), 3);
    assert!(lib.rules().iter().all(|r| r.score > 0.7));
    let origins: Vec<&str> = lib.rules().iter().map(|r| r.provenance.pair_id.as_str()).collect();
    assert_eq!(origins, ["absdiff#0", "mac4#0", "sum_pairs#0"]);
}

#[test]
fn checkpoint_resumes_to_the_same_result() {
    let dir = tempfile::tempdir().unwrap();
    let ck = dir.path().join("evals.jsonl");
    let (first, lib1) = run(Some(&ck));
    let lines = std::fs::read_to_string(&ck).unwrap().lines().count();
    assert_eq!(lines, 14);
    let (second, lib2) = run(Some(&ck));
    assert_eq!(first, second);
    assert_eq!(lib1.rules(), lib2.rules());
    assert_eq!(
        std::fs::read_to_string(&ck).unwrap().lines().count(),
        lines,
        "nothing re-evaluated"
    );
}

#[test]
fn unsynthesizable_design_is_excluded() {
    let designs =
        vec![
            rtlopt_core::model::RtlDesign::new("broken", "module broken(input a, output y); assign y = ; endmodule")
                .unwrap(),
        ];
    let llm = StubLlm::echo();
    let synth = MockSynthesizer::new();
    let sim = BuiltinSimulator::new();
    let constraints = SynthesisConstraints::default();
    let tools = Toolchain {
        llm: &llm,
        synth: &synth,
        sim: &sim,
        stimulus: StimulusConfig::default(),
        generation: GenerationConfig::default(),
        constraints: &constraints,
        target: Target::Area,
    };
    let mut lib = RuleLibrary::in_memory(Box::new(HashedTfIdf::new()), 0.7).unwrap();
    let report = learn(&designs, &micro_config(), &tools, &mut lib, None).unwrap();
    assert_eq!(report.excluded.len(), 1);
    assert!(report.selected.is_empty());
    assert!(lib.is_empty());
}

#[test]
fn invalid_config_is_rejected() {
    let cfg = LearningConfig {
        area_band: [80.0, 20.0],
        ..LearningConfig::default()
    };
    assert!(matches!(cfg.validate(), Err(Error::Domain(_))));
}
