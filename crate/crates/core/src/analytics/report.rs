//! The `analyze` pipeline: event log in, delimited tables and a run manifest
//! out. Everything is recomputed from the log, and every output is a pure
//! function of the log bytes and the config.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::kmeans::{choose_k, cluster_cards, features, kmeans, ClusterCard, KMeansConfig};
use super::preferences::{aggregate_preferences, Dimension};
use super::profiles::{extract_profiles, CollaborationProfile};
use super::replay::LogView;
use super::stats::{compare_means, describe_mean, StatResult, DEFAULT_BOOTSTRAP_RESAMPLES};
use super::strata::{stratified_preferences, stratified_scores, ScoredResponse, STRATUM_KEYS};
use super::taxonomy::{assign_taxonomy, ConsultLevel, TaxonomyAssignment};
use super::trend::empathy_trend;
use super::usage::INDIRECT_SIMILARITY;
use super::AnalyticsError;
use crate::empathy::{RuleScorer, LEXICON_VERSION};
use crate::study::{EventLog, EventPayload, StudyArm};

const TREATMENT: StudyArm = StudyArm::HumanPlusRewriting;
const CONTROL: StudyArm = StudyArm::HumanOnly;
const HEADER: &str = "row\testimate\tci_low\tci_high\tp_value\tn\n";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AnalysisConfig {
    pub seed: u64,
    pub n_boot: usize,
    pub indirect_similarity: f64,
    pub k_min: usize,
    pub k_max: usize,
    pub kmeans_restarts: usize,
    pub kmeans_max_iter: usize,
    /// Version of the safety rule set the run used, copied into the manifest.
    pub rules_version: Option<String>,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            n_boot: DEFAULT_BOOTSTRAP_RESAMPLES,
            indirect_similarity: INDIRECT_SIMILARITY,
            k_min: 2,
            k_max: 25,
            kmeans_restarts: 10,
            kmeans_max_iter: 100,
            rules_version: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Manifest {
    pub log_sha256: String,
    pub log_events: usize,
    pub config: AnalysisConfig,
    pub lexicon_version: String,
    pub rules_versions_seen: Vec<String>,
    pub participants: BTreeMap<String, usize>,
    pub completed: BTreeMap<String, usize>,
    pub profiles_rewriting: usize,
    pub profiles_classification: usize,
    pub taxonomy_excluded: usize,
    pub chosen_k: Option<usize>,
    pub preference_aggregation: String,
    pub flag_rate_rounding: String,
    pub audit: Vec<String>,
    pub notes: Vec<String>,
    /// sha256 of every other output file.
    pub outputs: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisReport {
    /// File name to contents, manifest excluded.
    pub files: BTreeMap<String, String>,
    pub manifest: Manifest,
    pub cards: Vec<ClusterCard>,
}

impl AnalysisReport {
    pub fn manifest_json(&self) -> String {
        serde_json::to_string_pretty(&self.manifest).expect("manifest serializes") + "\n"
    }

    pub fn write_to(&self, dir: &Path) -> std::io::Result<()> {
        std::fs::create_dir_all(dir)?;
        for (name, body) in &self.files {
            std::fs::write(dir.join(name), body)?;
        }
        std::fs::write(dir.join("manifest.json"), self.manifest_json())
    }
}

fn fmt(x: f64) -> String {
    // -0.0000 and 0.0000 should print the same
    let s = format!("{x:.4}");
    if s.trim_start_matches('-').chars().all(|c| c == '0' || c == '.') {
        s.trim_start_matches('-').to_string()
    } else {
        s
    }
}

fn row(name: &str, r: &StatResult) -> String {
    format!(
        "{name}\t{}\t{}\t{}\t{}\t{}\n",
        fmt(r.estimate),
        fmt(r.ci_low),
        fmt(r.ci_high),
        r.p_value.map(fmt).unwrap_or_default(),
        r.n.iter().map(|n| n.to_string()).collect::<Vec<_>>().join("/")
    )
}

fn empty_row(name: &str, n: &str) -> String {
    format!("{name}\t\t\t\t\t{n}\n")
}

/// `num / den` as a percentage with `decimals` places, truncated rather than
/// rounded, using integer arithmetic.
pub fn percent_truncated(num: usize, den: usize, decimals: u32) -> Option<String> {
    if den == 0 {
        return None;
    }
    let scale = 10u128.pow(decimals);
    let units = num as u128 * 100 * scale / den as u128;
    Some(if decimals == 0 {
        units.to_string()
    } else {
        format!("{}.{:0w$}", units / scale, units % scale, w = decimals as usize)
    })
}

fn share_row(name: &str, hits: usize, total: usize, n_boot: usize, seed: u64) -> Result<String, AnalyticsError> {
    if total == 0 {
        return Ok(empty_row(name, "0"));
    }
    let indicators: Vec<f64> = (0..total).map(|i| if i < hits { 100.0 } else { 0.0 }).collect();
    Ok(row(name, &describe_mean(&indicators, n_boot, seed)?))
}

fn seed_for(base: u64, label: &str) -> u64 {
    let digest = Sha256::digest(label.as_bytes());
    base ^ u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"))
}

fn sha_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn taxonomy_tables(
    profiles: &[CollaborationProfile],
    cfg: &AnalysisConfig,
) -> Result<(String, String, usize), AnalyticsError> {
    let assignments: Vec<TaxonomyAssignment> = profiles.iter().map(assign_taxonomy).collect();
    let included: Vec<_> = assignments.iter().filter_map(|a| a.category()).collect();
    let excluded = assignments.len() - included.len();

    let mut consult = String::from(HEADER);
    for level in ConsultLevel::ALL {
        let hits = included.iter().filter(|c| c.consult_level == level).count();
        let name = format!("consult_{}", level.as_str());
        consult += &share_row(&name, hits, included.len(), cfg.n_boot, seed_for(cfg.seed, &name))?;
    }
    consult += &format!("excluded_mixed\t{excluded}\t\t\t\t{}\n", assignments.len());

    let mut leaf_counts: BTreeMap<String, usize> = BTreeMap::new();
    for c in &included {
        *leaf_counts.entry(c.label()).or_default() += 1;
    }
    let mut leaves = String::from(HEADER);
    for (label, hits) in &leaf_counts {
        leaves += &share_row(label, *hits, included.len(), cfg.n_boot, seed_for(cfg.seed, label))?;
    }
    Ok((consult, leaves, excluded))
}

/// Runs every analysis over `log`.
pub fn analyze(log: &EventLog, cfg: &AnalysisConfig) -> Result<AnalysisReport, AnalyticsError> {
    let view = LogView::build(log);
    let scorer = RuleScorer::default();
    let mut files = BTreeMap::new();
    let mut notes = Vec::new();

    // Taxonomy over rewriting-arm profiles.
    let profiles = extract_profiles(&view, cfg.indirect_similarity);
    let (consult, leaves, excluded) = taxonomy_tables(&profiles.rewriting, cfg)?;
    files.insert("taxonomy_consult.tsv".to_string(), consult);
    files.insert("taxonomy_leaves.tsv".to_string(), leaves);
    let (c_consult, _, _) = taxonomy_tables(&profiles.classification, cfg)?;
    files.insert("taxonomy_consult_classification.tsv".to_string(), c_consult);

    // Automatic empathy scores of submitted responses.
    let mut scored: Vec<ScoredResponse> = Vec::new();
    let mut series: Vec<(StudyArm, Vec<f64>)> = Vec::new();
    for p in view.completed() {
        let mut s = Vec::new();
        for (idx, _, seeker, text) in p.responses() {
            let score = scorer.score_texts(seeker, text).total() as f64;
            s.push(score);
            scored.push(ScoredResponse {
                participant_id: p.id.clone(),
                arm: p.arm,
                post_index: idx,
                score,
            });
        }
        series.push((p.arm, s));
    }
    let arm_scores = |arm: StudyArm| -> Vec<f64> { scored.iter().filter(|s| s.arm == arm).map(|s| s.score).collect() };
    let mut by_arm = String::from(HEADER);
    for arm in StudyArm::ALL {
        let xs = arm_scores(arm);
        by_arm += &match describe_mean(&xs, cfg.n_boot, seed_for(cfg.seed, arm.as_str())) {
            Ok(r) => row(arm.as_str(), &r),
            Err(_) => empty_row(arm.as_str(), "0"),
        };
    }
    for arm in [StudyArm::HumanPlusRewriting, StudyArm::HumanPlusClassification] {
        let name = format!("{}_minus_{}", arm.as_str(), CONTROL.as_str());
        let (a, b) = (arm_scores(arm), arm_scores(CONTROL));
        by_arm += &match compare_means(&a, &b, cfg.n_boot, seed_for(cfg.seed, &name)) {
            Ok(r) => row(&name, &r),
            Err(_) => empty_row(&name, &format!("{}/{}", a.len(), b.len())),
        };
    }
    files.insert("empathy_by_arm.tsv".to_string(), by_arm);

    // Human-evaluation preferences, one row per outcome and dimension.
    let mut prefs = String::from(HEADER);
    for dim in [Dimension::Empathy, Dimension::Authenticity] {
        let dname = format!("{dim:?}").to_lowercase();
        match aggregate_preferences(&view.evaluations, TREATMENT, CONTROL, dim, cfg.n_boot, seed_for(cfg.seed, &dname)) {
            Ok(summary) => {
                let shown = summary.formatted(2);
                for (i, (label, r)) in [
                    ("treatment_preferred", &summary.treatment_preferred),
                    ("tie", &summary.tie),
                    ("control_preferred", &summary.control_preferred),
                ]
                .into_iter()
                .enumerate()
                {
                    prefs += &format!(
                        "{dname}_{label}\t{}\t{}\t{}\t\t{}\n",
                        shown[i],
                        fmt(r.ci_low),
                        fmt(r.ci_high),
                        summary.n()
                    );
                }
            }
            Err(AnalyticsError::Empty(_)) => prefs += &empty_row(&format!("{dname}_none"), "0"),
            Err(e) => return Err(e),
        }
    }
    files.insert("preferences.tsv".to_string(), prefs);

    // Flag rates, truncated to two decimals.
    let f = view.flags;
    let mut flags = String::from(HEADER);
    for (name, num, den) in [
        ("seeker_post_flags", f.post_flags, f.posts_shown),
        ("feedback_flags", f.feedback_flags, f.feedback_requests),
    ] {
        flags += &format!(
            "{name}\t{}\t\t\t\t{den}\n",
            percent_truncated(num, den, 2).unwrap_or_default()
        );
    }
    files.insert("flag_rates.tsv".to_string(), flags);

    // First five versus last five responses.
    let mut trend = String::from(HEADER);
    match empathy_trend(&series, TREATMENT, CONTROL) {
        Ok(t) => {
            for a in [&t.treatment, &t.control].into_iter().flatten() {
                let n = a.participants.to_string();
                let arm = a.arm.as_str();
                trend += &format!("{arm}_first5_mean\t{}\t\t\t\t{n}\n", fmt(a.first_mean));
                trend += &format!("{arm}_last5_mean\t{}\t\t\t\t{n}\n", fmt(a.last_mean));
                trend += &format!("{arm}_drop_pct\t{}\t\t\t\t{n}\n", fmt(a.drop_pct));
            }
            if let Some(test) = t.drop_test {
                trend += &format!("drop_difference_t\t{}\t\t\t{}\t\n", fmt(test.t), fmt(test.p_value));
            }
        }
        Err(AnalyticsError::Empty(m)) => notes.push(format!("trend: {m}")),
        Err(e) => return Err(e),
    }
    files.insert("empathy_trend.tsv".to_string(), trend);

    // Strata.
    for key in STRATUM_KEYS {
        let labels: BTreeMap<String, String> = view
            .participants
            .values()
            .filter_map(|p| p.label(key).map(|l| (p.id.clone(), l)))
            .collect();
        let mut t = String::from(HEADER);
        for s in stratified_scores(&scored, &labels, TREATMENT, CONTROL, cfg.n_boot, seed_for(cfg.seed, key))? {
            let name = format!("{key}={}", s.stratum);
            t += &match &s.result {
                Some(r) => row(&name, r),
                None => empty_row(&name, &format!("{}/{}", s.n_treatment, s.n_control)),
            };
        }
        files.insert(format!("strata_scores_{key}.tsv"), t);

        let mut t = String::from(HEADER);
        let prefs = stratified_preferences(
            &view.evaluations,
            &labels,
            TREATMENT,
            CONTROL,
            Dimension::Empathy,
            cfg.n_boot,
            seed_for(cfg.seed, &format!("pref:{key}")),
        )?;
        for s in prefs {
            let name = format!("{key}={}", s.stratum);
            t += &match &s.summary {
                Some(sum) => format!(
                    "{name}\t{}\t{}\t{}\t\t{}\n",
                    sum.formatted(2)[0],
                    fmt(sum.treatment_preferred.ci_low),
                    fmt(sum.treatment_preferred.ci_high),
                    sum.n()
                ),
                None => empty_row(&name, &s.matched.to_string()),
            };
        }
        files.insert(format!("strata_preferences_{key}.tsv"), t);
    }

    // Clusters over rewriting profiles.
    let points: Vec<Vec<f64>> = profiles.rewriting.iter().map(features).collect();
    let kcfg = KMeansConfig {
        seed: cfg.seed,
        restarts: cfg.kmeans_restarts,
        max_iter: cfg.kmeans_max_iter,
    };
    let mut clusters = String::from("k\tsse\tchosen\n");
    let mut cards = Vec::new();
    let mut chosen_k = None;
    match choose_k(&points, cfg.k_min..=cfg.k_max, &kcfg) {
        Ok(elbow) => {
            for (k, sse) in &elbow.sse_by_k {
                clusters += &format!("{k}\t{}\t{}\n", fmt(*sse), u8::from(*k == elbow.k));
            }
            let fit = kmeans(&points, elbow.k, &kcfg)?;
            cards = cluster_cards(&profiles.rewriting, &fit);
            chosen_k = Some(elbow.k);
        }
        Err(AnalyticsError::Domain(m)) => notes.push(format!("clusters: {m}")),
        Err(e) => return Err(e),
    }
    files.insert("clusters.tsv".to_string(), clusters);
    files.insert(
        "cluster_cards.json".to_string(),
        serde_json::to_string_pretty(&cards).expect("cards serialize") + "\n",
    );

    let count_by_arm = |complete: bool| -> BTreeMap<String, usize> {
        let mut m: BTreeMap<String, usize> = StudyArm::ALL.iter().map(|a| (a.as_str().to_string(), 0)).collect();
        for p in view.participants.values().filter(|p| !complete || p.is_complete()) {
            *m.get_mut(p.arm.as_str()).expect("known arm") += 1;
        }
        m
    };
    let mut rules_versions: Vec<String> = log
        .events()
        .iter()
        .filter_map(|e| match &e.payload {
            EventPayload::Escalated { rules_version, .. } => Some(rules_version.clone()),
            _ => None,
        })
        .collect();
    rules_versions.sort();
    rules_versions.dedup();
    notes.push(format!(
        "{} escalations, {} scorer fallbacks, {} candidate-bank exhaustions in the log",
        view.escalations, view.scorer_fallbacks, view.exhaustions
    ));

    let outputs = files.iter().map(|(k, v)| (k.clone(), sha_hex(v.as_bytes()))).collect();
    let manifest = Manifest {
        log_sha256: sha_hex(log.to_jsonl().as_bytes()),
        log_events: log.len(),
        config: cfg.clone(),
        lexicon_version: LEXICON_VERSION.to_string(),
        rules_versions_seen: rules_versions,
        participants: count_by_arm(false),
        completed: count_by_arm(true),
        profiles_rewriting: profiles.rewriting.len(),
        profiles_classification: profiles.classification.len(),
        taxonomy_excluded: excluded,
        chosen_k,
        preference_aggregation: "each comparison record counts once; A/B order is unwound to arm labels first".into(),
        flag_rate_rounding: "percent truncated to two decimals".into(),
        audit: profiles.audit,
        notes,
        outputs,
    };
    Ok(AnalysisReport { files, manifest, cards })
}
