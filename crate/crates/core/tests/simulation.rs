use std::collections::BTreeMap;

use kindred_core::analytics::profiles::extract_profiles;
use kindred_core::analytics::replay::LogView;
use kindred_core::analytics::taxonomy::{assign_taxonomy, ConsultLevel, UsageMode};
use kindred_core::analytics::usage::INDIRECT_SIMILARITY;
use kindred_core::safety::SafetyRuleSet;
use kindred_core::study::simulate::{simulate_population, BehaviorGroup, PopulationSpec};
use kindred_core::study::{EventLog, EventPayload, StudyArm};

fn run(spec: &PopulationSpec) -> kindred_core::study::simulate::Simulation {
    simulate_population(spec, SafetyRuleSet::bundled()).expect("simulation runs")
}

fn rewriting_only(groups: Vec<BehaviorGroup>, n: usize) -> PopulationSpec {
    PopulationSpec {
        participants: n,
        arm_weights: [0.0, 1.0, 0.0],
        groups,
        dropout_prob: 0.0,
        ..PopulationSpec::default()
    }
}

#[test]
fn default_population_exercises_the_event_vocabulary() {
    let sim = run(&PopulationSpec::default());
    let kinds: std::collections::BTreeSet<&str> = sim.log.events().iter().map(|e| e.payload.type_name()).collect();
    for k in [
        "enrolled",
        "phase_advanced",
        "survey_submitted",
        "prompt_shown",
        "feedback_requested",
        "feedback_shown",
        "action_accepted",
        "draft_snapshot",
        "response_submitted",
        "escalated",
        "evaluation_submitted",
    ] {
        assert!(kinds.contains(k), "missing {k}: {kinds:?}");
    }
    let text = sim.log.to_jsonl();
    assert_eq!(EventLog::from_jsonl(&text).unwrap().len(), sim.log.len());
}

#[test]
fn same_seed_same_log() {
    let spec = PopulationSpec::default();
    assert_eq!(run(&spec).log.to_jsonl(), run(&spec).log.to_jsonl());
    let other = PopulationSpec { seed: 8, ..spec };
    assert_ne!(run(&PopulationSpec::default()).log.to_jsonl(), run(&other).log.to_jsonl());
}

#[test]
fn profiles_match_ground_truth() {
    let spec = PopulationSpec {
        participants: 40,
        arm_weights: [0.2, 0.6, 0.2],
        ..PopulationSpec::default()
    };
    let sim = run(&spec);
    let view = LogView::build(&sim.log);
    let profiles = extract_profiles(&view, INDIRECT_SIMILARITY);
    let mut checked = 0;
    for p in profiles.rewriting.iter().chain(&profiles.classification) {
        let t = sim.truth.get(&p.participant_id).unwrap();
        assert!(t.completed);
        assert_eq!(p.consult_count, t.consult_count, "{}", p.participant_id);
        assert_eq!(p.usage_counts, t.usage_counts, "{}", p.participant_id);
        assert_eq!(p.used_reload, t.used_reload, "{}", p.participant_id);
        checked += 1;
    }
    let expected = sim
        .truth
        .participants
        .iter()
        .filter(|t| t.completed && t.arm != StudyArm::HumanOnly)
        .count();
    assert_eq!(checked, expected);
    assert!(checked > 10);
}

#[test]
fn never_consulting_population() {
    let g = BehaviorGroup {
        consult_prob: 0.0,
        ..BehaviorGroup::default()
    };
    let sim = run(&rewriting_only(vec![g], 12));
    let view = LogView::build(&sim.log);
    let profiles = extract_profiles(&view, INDIRECT_SIMILARITY);
    assert_eq!(profiles.rewriting.len(), 12);
    for p in &profiles.rewriting {
        let c = assign_taxonomy(p).category().unwrap();
        assert_eq!((c.consult_level, c.usage_mode), (ConsultLevel::Never, UsageMode::None));
    }
}

#[test]
fn always_accepting_population() {
    let g = BehaviorGroup {
        consult_prob: 1.0,
        accept_prob: 1.0,
        reload_prob: 0.0,
        ..BehaviorGroup::default()
    };
    let sim = run(&rewriting_only(vec![g], 12));
    let view = LogView::build(&sim.log);
    for p in &extract_profiles(&view, INDIRECT_SIMILARITY).rewriting {
        let c = assign_taxonomy(p).category().unwrap();
        assert_eq!((c.consult_level, c.usage_mode), (ConsultLevel::Always, UsageMode::Direct));
    }
}

#[test]
fn dropouts_are_swept() {
    let spec = PopulationSpec {
        dropout_prob: 0.5,
        participants: 20,
        ..PopulationSpec::default()
    };
    let sim = run(&spec);
    let dropped: Vec<_> = sim.truth.participants.iter().filter(|t| !t.completed).collect();
    assert!(!dropped.is_empty());
    let view = LogView::build(&sim.log);
    let phases: BTreeMap<_, _> = view.participants.iter().map(|(id, p)| (id.clone(), p.phase)).collect();
    for t in dropped {
        assert_eq!(phases[&t.participant_id], kindred_core::study::Phase::DroppedOut);
    }
    assert!(sim
        .log
        .events()
        .iter()
        .any(|e| matches!(e.payload, EventPayload::PhaseAdvanced { .. })));
}

#[test]
fn simulate_then_analyze_is_deterministic() {
    use kindred_core::analytics::report::{analyze, AnalysisConfig};
    let start = std::time::Instant::now();
    let cfg = AnalysisConfig::default();
    let a = analyze(&run(&PopulationSpec::default()).log, &cfg).unwrap();
    let b = analyze(&run(&PopulationSpec::default()).log, &cfg).unwrap();
    assert_eq!(a.files, b.files);
    assert_eq!(a.manifest_json(), b.manifest_json());
    assert!(a.files["taxonomy_consult.tsv"].lines().count() > 4);
    for (name, body) in &a.files {
        if name.ends_with(".tsv") {
            eprintln!("== {name}\n{body}");
        }
    }
    eprintln!("{}", a.manifest_json());
    assert!(start.elapsed().as_secs() < 60);
}
