//! Acceptance checks. Runs without the libtest harness so every criterion
//! prints exactly one PASS or FAIL line; the process exits non-zero if any
//! criterion fails.

use std::collections::BTreeMap;
use std::path::Path;
use std::process::Command;
use std::sync::Arc;
use std::time::{Duration, Instant};

use kindred_core::analytics::kmeans::{choose_k, kmeans, rand_index, KMeansConfig};
use kindred_core::analytics::preferences::{
    aggregate_preferences, ArmResponse, ComparisonRecord, Dimension, Preference,
};
use kindred_core::analytics::profiles::extract_profiles;
use kindred_core::analytics::replay::LogView;
use kindred_core::analytics::report::percent_truncated;
use kindred_core::analytics::stats::{bootstrap_ci, p_from_t};
use kindred_core::analytics::taxonomy::{assign_taxonomy, taxonomy_table, ConsultLevel, UsageMode};
use kindred_core::analytics::usage::INDIRECT_SIMILARITY;
use kindred_core::empathy::RuleScorer;
use kindred_core::platform::ingest_posts;
use kindred_core::rewriter::{BundleKind, FeedbackRequest, Rewriter, RewriterConfig, TemplateBank};
use kindred_core::safety::{RuleHandle, SafetyRuleSet};
use kindred_core::study::simulate::{simulate_population, synthetic_posts, BehaviorGroup, PopulationSpec};
use kindred_core::study::{power_analysis, Post, StudyArm};
use kindred_core::textcore::{
    align_to_script, apply_script, segment_sentences, EditAction, EditKind, EditScript, SentenceSeq,
};
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

type Check = Result<String, String>;

const STRESS_POST: &str = "My job is becoming more and more stressful with each passing day.";

/// Low-effort response sentences a peer supporter might start from.
const DRAFT_POOL: &[&str] = &[
    "Don't worry!",
    "I'm there for you.",
    "Just relax.",
    "Things will get better.",
    "You should talk to someone.",
    "Try to take a break.",
    "Everyone goes through this.",
    "Stay strong.",
    "That happens.",
    "Maybe go for a walk.",
    "You can do it.",
    "Keep going.",
];

fn rewriter(rules: SafetyRuleSet) -> Rewriter {
    Rewriter::new(
        RewriterConfig::default(),
        TemplateBank::bundled(),
        RuleScorer::default(),
        RuleHandle::new(rules),
    )
}

fn request(post: &str, draft: &str, cursor: usize, n: usize) -> FeedbackRequest {
    FeedbackRequest {
        seeker_post: post.into(),
        draft: draft.into(),
        candidate_cursor: cursor,
        participant_id: format!("p{n}"),
        session_id: format!("S{n}"),
    }
}

fn random_draft(rng: &mut ChaCha8Rng) -> String {
    let len = rng.random_range(1..=3);
    let picks: Vec<&str> = DRAFT_POOL.choose_multiple(rng, len).copied().collect();
    picks.join(" ")
}

fn worked_example() -> Check {
    let draft = "Don't worry! I'm there for you.";
    let start = Instant::now();
    let g = rewriter(SafetyRuleSet::bundled())
        .generate(&request(STRESS_POST, draft, 0, 1))
        .map_err(|e| format!("generate failed: {e}"))?;
    let elapsed = start.elapsed();
    let b = &g.bundle;
    if b.kind != BundleKind::Suggestions {
        return Err(format!("expected suggestions, got {:?}", b.kind));
    }
    let actions = b.script.actions();
    let replaces_opener = actions.iter().any(|a| a.kind == EditKind::Replace && a.anchor == 0);
    let appends_question = actions
        .last()
        .is_some_and(|a| a.kind == EditKind::Insert && a.anchor == 2 && a.text.ends_with('?'));
    if !replaces_opener || !appends_question {
        return Err(format!("unexpected script {actions:?}"));
    }
    if b.preview.contains("Don't worry!") {
        return Err(format!("opener survived in preview {:?}", b.preview));
    }
    let applied = apply_script(&segment_sentences(draft), &b.script).map_err(|e| e.to_string())?;
    if applied.joined() != b.preview {
        return Err(format!("applied {:?} != preview {:?}", applied.joined(), b.preview));
    }
    if elapsed >= Duration::from_secs(1) {
        return Err(format!("took {elapsed:?}"));
    }
    Ok(format!("preview {:?} in {elapsed:?}", b.preview))
}

fn strict_improvement() -> Check {
    let rw = rewriter(SafetyRuleSet::bundled());
    let posts = synthetic_posts(200, 0, 11);
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut surfaced = 0;
    let mut violations = Vec::new();
    for n in 0..1000 {
        let post = &posts.choose(&mut rng).unwrap().text;
        let draft = random_draft(&mut rng);
        let cursor = rng.random_range(0..4);
        let Ok(g) = rw.generate(&request(post, &draft, cursor, n)) else {
            continue;
        };
        if g.bundle.kind != BundleKind::Suggestions {
            continue;
        }
        surfaced += 1;
        let preview = rw.score(post, &g.bundle.preview).total();
        let base = rw.score(post, &draft).total();
        if preview <= base {
            violations.push(format!("{draft:?}: {base} -> {preview}"));
        }
    }
    if surfaced == 0 {
        return Err("no suggestion bundles were surfaced".into());
    }
    if !violations.is_empty() {
        return Err(format!("{} violations, e.g. {}", violations.len(), violations[0]));
    }
    Ok(format!("{surfaced} suggestion bundles, 0 violations"))
}

fn safety() -> Check {
    let rules = SafetyRuleSet::bundled();
    // Literal phrases taken from the rule patterns plus spacing tricks.
    let terms = [
        "commit suicide",
        "suicide",
        "suicidal",
        "kill myself",
        "end it all",
        "want to die",
        "self harm",
        "cut",
        "c u t",
        "cutting myself",
        "overdose",
        "hang myself",
        "no reason to live",
    ];
    let topics = ["job", "exams", "family", "breakup", "sleep", "friends"];
    let rw = rewriter(rules.clone());
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut suggestions = 0;
    for n in 0..10_000 {
        let term = terms.choose(&mut rng).unwrap();
        let topic = topics.choose(&mut rng).unwrap();
        let post = match rng.random_range(0..3) {
            0 => format!("My {topic} makes me think about {term}."),
            1 => format!("I keep worrying about my {topic}, it is a lot."),
            _ => format!("The {term} thing and my {topic} are too much."),
        };
        let mut draft = random_draft(&mut rng);
        if rng.random_bool(0.5) {
            draft.push_str(&format!(" Don't {term}."));
        }
        let Ok(g) = rw.generate(&request(&post, &draft, rng.random_range(0..8), n)) else {
            continue;
        };
        for action in g.bundle.script.actions() {
            suggestions += 1;
            if !rules.is_safe(&action.text) {
                return Err(format!("unsafe suggestion {:?} for post {post:?}", action.text));
            }
        }
    }

    let posts = ["commit suicide", "I cut myself again.", "c u t", "I got a haircut today."]
        .iter()
        .enumerate()
        .map(|(i, t)| Post {
            id: format!("q{i}"),
            text: t.to_string(),
        })
        .collect();
    let report = ingest_posts(Arc::new(rules), posts);
    let escalated: Vec<&str> = report.escalated.iter().map(|e| e.post_id.as_str()).collect();
    if escalated != ["q0", "q1", "q2"] {
        return Err(format!("escalated {escalated:?}"));
    }
    if report.admitted.len() != 1 {
        return Err("word-bounded rule blocked an unrelated word".into());
    }

    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let posts_path = dir.path().join("posts.tsv");
    let body: String = (0..20).map(|i| format!("p{i}\tMy job is stressful, week {i}.\n")).collect();
    std::fs::write(&posts_path, body).map_err(|e| e.to_string())?;
    let out = Command::new(env!("CARGO_BIN_EXE_kindred"))
        .args(["serve", "--posts", posts_path.to_str().unwrap(), "--listen-address", "127.0.0.1:0"])
        .env("RUST_LOG", "error")
        .output()
        .map_err(|e| e.to_string())?;
    if out.status.success() || !String::from_utf8_lossy(&out.stderr).contains("refusing to start") {
        return Err("serve started without a rule set".into());
    }
    Ok(format!("{suggestions} suggested sentences checked, ingest escalations correct, serve fails closed"))
}

fn alignment_round_trip() -> Check {
    let originals: Vec<String> = (0..40).map(|i| format!("Original line number {i} about the weather.")).collect();
    let fresh: Vec<String> = (0..40)
        .map(|i| format!("Completely new remark {i}, asking how you are holding up?"))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for case in 0..1000 {
        let n = rng.random_range(0..7);
        let draft = SentenceSeq::from_sentences(originals.choose_multiple(&mut rng, n).cloned());
        let mut pool = fresh.clone();
        pool.shuffle(&mut rng);
        let mut pool = pool.into_iter();
        let mut actions = Vec::new();
        for anchor in 0..=n {
            if rng.random_bool(0.3) {
                actions.push(EditAction::insert(anchor, pool.next().unwrap()));
            }
            if anchor < n && rng.random_bool(0.4) {
                actions.push(EditAction::replace(anchor, pool.next().unwrap()));
            }
        }
        let script = EditScript::new(actions, n).map_err(|e| format!("case {case}: {e}"))?;
        let applied = apply_script(&draft, &script).map_err(|e| format!("case {case}: {e}"))?;
        let recovered = align_to_script(&draft, &applied).map_err(|e| format!("case {case}: {e}"))?;
        let again = apply_script(&draft, &recovered).map_err(|e| format!("case {case}: {e}"))?;
        if again.joined() != applied.joined() {
            return Err(format!("case {case}: {:?} != {:?}", again.joined(), applied.joined()));
        }
    }
    Ok("1000 cases reproduced exactly".into())
}

fn statistics() -> Check {
    let start = Instant::now();
    // Two-sided 5% criticals from a printed t-table.
    for (t, df) in [(2.000, 60.0), (2.228, 10.0), (2.042, 30.0)] {
        let p = p_from_t(t, df);
        if (p - 0.05).abs() > 0.0005 {
            return Err(format!("p_from_t({t}, {df}) = {p}"));
        }
    }
    let n = power_analysis(0.5, 1.0, 0.05, 0.8).map_err(|e| e.to_string())?;
    if !(63..=64).contains(&n) {
        return Err(format!("d = 0.5 gives {n}"));
    }
    let target = power_analysis(0.1, 0.977, 0.05, 0.8).map_err(|e| e.to_string())?;
    if !(1498..=1502).contains(&target) {
        return Err(format!("recruitment target {target}"));
    }
    let normal = Normal::new(0.0, 1.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let draws = 500;
    let mut covered = 0;
    for i in 0..draws {
        let xs: Vec<f64> = (0..50).map(|_| normal.sample(&mut rng)).collect();
        let ci = bootstrap_ci(&xs, 0.95, 2000, i).map_err(|e| e.to_string())?;
        if ci.lo <= 0.0 && 0.0 <= ci.hi {
            covered += 1;
        }
    }
    let coverage = covered as f64 * 100.0 / draws as f64;
    if (coverage - 95.0).abs() > 2.0 {
        return Err(format!("bootstrap coverage {coverage:.1}%"));
    }
    let elapsed = start.elapsed();
    if elapsed >= Duration::from_secs(120) {
        return Err(format!("took {elapsed:?}"));
    }
    Ok(format!("power {n}/{target}, coverage {coverage:.1}% in {elapsed:?}"))
}

fn pure_group(name: &str, weight: f64, consults: [usize; 2], accept: f64, indirect: f64, reload: f64) -> BehaviorGroup {
    BehaviorGroup {
        name: name.into(),
        weight,
        consult_count: Some(consults),
        accept_prob: accept,
        indirect_prob: indirect,
        reload_prob: reload,
        ..BehaviorGroup::default()
    }
}

fn rewriting_population(participants: usize, groups: Vec<BehaviorGroup>) -> PopulationSpec {
    PopulationSpec {
        participants,
        arm_weights: [0.0, 1.0, 0.0],
        groups,
        dropout_prob: 0.0,
        ..PopulationSpec::default()
    }
}

fn taxonomy() -> Check {
    // Pure policies: every participant of a group lands in one known leaf.
    let planted = [
        (pure_group("never", 1.0, [0, 0], 0.0, 0.0, 0.0), (ConsultLevel::Never, UsageMode::None, false)),
        (pure_group("always", 1.0, [10, 10], 1.0, 0.0, 0.0), (ConsultLevel::Always, UsageMode::Direct, false)),
        (pure_group("once", 1.0, [1, 1], 0.0, 0.0, 1.0), (ConsultLevel::Once, UsageMode::None, true)),
        (pure_group("often", 1.0, [2, 9], 1.0, 0.0, 1.0), (ConsultLevel::Often, UsageMode::Direct, true)),
    ];
    let spec = rewriting_population(40, planted.iter().map(|(g, _)| g.clone()).collect());
    let sim = simulate_population(&spec, SafetyRuleSet::bundled()).map_err(|e| e.to_string())?;
    let expected: BTreeMap<&str, _> = planted.iter().map(|(g, leaf)| (g.name.as_str(), *leaf)).collect();
    let view = LogView::build(&sim.log);
    let profiles = extract_profiles(&view, INDIRECT_SIMILARITY);
    if profiles.rewriting.len() != 40 {
        return Err(format!("{} profiles for 40 participants", profiles.rewriting.len()));
    }
    for p in &profiles.rewriting {
        let group = sim.truth.get(&p.participant_id).unwrap().group.clone().unwrap_or_default();
        let leaf = assign_taxonomy(p)
            .category()
            .map(|c| (c.consult_level, c.usage_mode, c.reload));
        if leaf != Some(expected[group.as_str()]) {
            return Err(format!("{} in {group} assigned {leaf:?}", p.participant_id));
        }
    }

    // Four planted modes in the plane.
    let centers = [[0.0, 0.0], [4.0, 0.0], [0.0, 4.0], [4.0, 4.0]];
    let noise = Normal::new(0.0, 0.3).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let mut points = Vec::new();
    let mut labels = Vec::new();
    for (label, c) in centers.iter().enumerate() {
        for _ in 0..30 {
            points.push(vec![c[0] + noise.sample(&mut rng), c[1] + noise.sample(&mut rng)]);
            labels.push(label);
        }
    }
    let cfg = KMeansConfig::default();
    let elbow = choose_k(&points, 2..=8, &cfg).map_err(|e| e.to_string())?;
    if ![4, 5].contains(&elbow.k) {
        return Err(format!("elbow chose k = {}", elbow.k));
    }
    let fit = kmeans(&points, elbow.k, &cfg).map_err(|e| e.to_string())?;
    let rand = rand_index(&fit.assignments, &labels);
    if rand <= 0.9 {
        return Err(format!("Rand index {rand:.3}"));
    }

    // Population tuned to the published consult-level marginals.
    let groups = vec![
        pure_group("always", 0.1552, [10, 10], 1.0, 0.0, 0.0),
        pure_group("often", 0.5603, [2, 9], 1.0, 0.0, 0.0),
        pure_group("once", 0.0603, [1, 1], 1.0, 0.0, 0.0),
        pure_group("never", 0.2241, [0, 0], 0.0, 0.0, 0.0),
    ];
    let sim = simulate_population(&rewriting_population(116, groups), SafetyRuleSet::bundled())
        .map_err(|e| e.to_string())?;
    let view = LogView::build(&sim.log);
    let table = taxonomy_table(&extract_profiles(&view, INDIRECT_SIMILARITY).rewriting);
    let targets = [
        (ConsultLevel::Always, 15.52),
        (ConsultLevel::Often, 56.03),
        (ConsultLevel::Once, 6.03),
        (ConsultLevel::Never, 22.41),
    ];
    let mut shares = Vec::new();
    for (level, target) in targets {
        let share = table.consult_share(level);
        if (share - target).abs() > 5.0 {
            return Err(format!("{} share {share:.2} vs {target}", level.as_str()));
        }
        shares.push(format!("{share:.2}"));
    }
    Ok(format!("pure leaves exact, k = {} Rand {rand:.3}, consult shares {}", elbow.k, shares.join("/")))
}

fn record(i: usize, preference: Preference) -> ComparisonRecord {
    let side = |arm: StudyArm, pid: String| ArmResponse {
        arm,
        participant_id: pid,
        post_id: format!("post{}", i % 50),
        text: format!("response {i}"),
    };
    // Alternate which side the treatment appears on.
    let (a, b) = if i % 2 == 0 {
        (side(StudyArm::HumanPlusRewriting, format!("t{i}")), side(StudyArm::HumanOnly, format!("c{i}")))
    } else {
        (side(StudyArm::HumanOnly, format!("c{i}")), side(StudyArm::HumanPlusRewriting, format!("t{i}")))
    };
    let flip = |p: Preference| match p {
        Preference::A => Preference::B,
        Preference::B => Preference::A,
        Preference::Tie => Preference::Tie,
    };
    ComparisonRecord {
        id: format!("r{i}"),
        seeker_post_id: a.post_id.clone(),
        response_a: a,
        response_b: b,
        rater_id: format!("rater{}", i % 7),
        preference: if i % 2 == 0 { preference } else { flip(preference) },
        dimension: Dimension::Empathy,
    }
}

fn fixture_arithmetic() -> Check {
    // `Preference::A` here means "treatment preferred" before the side flip.
    let mut records = Vec::new();
    for (count, pref) in [(292, Preference::A), (98, Preference::Tie), (233, Preference::B)] {
        for _ in 0..count {
            records.push(record(records.len(), pref));
        }
    }
    let summary = aggregate_preferences(&records, StudyArm::HumanPlusRewriting, StudyArm::HumanOnly, Dimension::Empathy, 1000, 3)
        .map_err(|e| e.to_string())?;
    let printed = summary.formatted(2);
    if printed != ["46.87", "15.73", "37.40"] {
        return Err(format!("preferences printed as {printed:?}"));
    }
    let flag = percent_truncated(56, 1939, 2);
    if flag.as_deref() != Some("2.88") {
        return Err(format!("flag rate printed as {flag:?}"));
    }
    Ok(format!("{} / 2.88", printed.join("/")))
}

fn read_dir_sorted(dir: &Path) -> std::io::Result<Vec<(String, Vec<u8>)>> {
    let mut files = Vec::new();
    for entry in std::fs::read_dir(dir)? {
        let entry = entry?;
        files.push((entry.file_name().to_string_lossy().into_owned(), std::fs::read(entry.path())?));
    }
    files.sort();
    Ok(files)
}

fn end_to_end() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let run = |args: &[&str]| -> Result<(), String> {
        let out = Command::new(env!("CARGO_BIN_EXE_kindred"))
            .args(args)
            .env("RUST_LOG", "error")
            .output()
            .map_err(|e| e.to_string())?;
        if out.status.success() {
            Ok(())
        } else {
            Err(format!("{args:?}: {}", String::from_utf8_lossy(&out.stderr)))
        }
    };
    let path = |name: &str| dir.path().join(name).to_string_lossy().into_owned();
    let start = Instant::now();
    run(&["simulate", "--seed", "7", "--out", &path("log.jsonl")])?;
    run(&["analyze", "--log", &path("log.jsonl"), "--out", &path("a")])?;
    let elapsed = start.elapsed();
    run(&["analyze", "--log", &path("log.jsonl"), "--out", &path("b")])?;
    let a = read_dir_sorted(&dir.path().join("a")).map_err(|e| e.to_string())?;
    let b = read_dir_sorted(&dir.path().join("b")).map_err(|e| e.to_string())?;
    if a != b {
        return Err("analysis outputs differ between runs".into());
    }
    if !a.iter().any(|(n, _)| n == "manifest.json") {
        return Err("no manifest written".into());
    }
    if elapsed >= Duration::from_secs(60) {
        return Err(format!("pipeline took {elapsed:?}"));
    }
    Ok(format!("{} identical files, N=30 pipeline in {elapsed:?}", a.len()))
}

fn main() {
    let checks: [(&str, fn() -> Check); 8] = [
        ("worked example", worked_example),
        ("strict improvement", strict_improvement),
        ("safety", safety),
        ("alignment round trip", alignment_round_trip),
        ("statistics oracles", statistics),
        ("taxonomy pipeline", taxonomy),
        ("fixture arithmetic", fixture_arithmetic),
        ("end-to-end determinism", end_to_end),
    ];
    let mut failed = 0;
    for (name, check) in checks {
        match check() {
            Ok(detail) => println!("PASS {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {name}: {detail}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", checks.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
