use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use super::preferences::{aggregate_preferences, ComparisonRecord, Dimension, PreferenceSummary};
use super::stats::{compare_means, StatResult};
use super::AnalyticsError;
use crate::study::StudyArm;

/// Stratum keys drawn from the surveys.
pub const STRATUM_KEYS: [&str; 3] = ["writing_challenging", "peer_support_experience", "age_range"];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoredResponse {
    pub participant_id: String,
    pub arm: StudyArm,
    pub post_index: usize,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StratumResult {
    pub stratum: String,
    /// Treatment minus control mean score; None when either arm has no
    /// responses in the stratum.
    pub result: Option<StatResult>,
    pub n_treatment: usize,
    pub n_control: usize,
}

/// Automatic-score comparison within each stratum. Labels come from the
/// participant who wrote the response, so no matching is needed.
pub fn stratified_scores(
    samples: &[ScoredResponse],
    labels: &BTreeMap<String, String>,
    treatment: StudyArm,
    control: StudyArm,
    n_boot: usize,
    seed: u64,
) -> Result<Vec<StratumResult>, AnalyticsError> {
    let mut groups: BTreeMap<&str, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for s in samples {
        let Some(label) = labels.get(&s.participant_id) else {
            continue;
        };
        let entry = groups.entry(label).or_default();
        if s.arm == treatment {
            entry.0.push(s.score);
        } else if s.arm == control {
            entry.1.push(s.score);
        }
    }
    groups
        .into_iter()
        .enumerate()
        .map(|(i, (label, (t, c)))| {
            let result = if t.is_empty() || c.is_empty() {
                None
            } else {
                Some(compare_means(&t, &c, n_boot, seed.wrapping_add(i as u64))?)
            };
            Ok(StratumResult {
                stratum: label.to_string(),
                result,
                n_treatment: t.len(),
                n_control: c.len(),
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StratumPreference {
    pub stratum: String,
    /// Comparisons whose two authors share this label.
    pub matched: usize,
    pub summary: Option<PreferenceSummary>,
}

/// Human-evaluation comparison within each stratum, keeping only comparisons
/// whose two authors carry the same label. Every label seen on either side
/// gets a row, empty when nothing matched.
pub fn stratified_preferences(
    records: &[ComparisonRecord],
    labels: &BTreeMap<String, String>,
    treatment: StudyArm,
    control: StudyArm,
    dimension: Dimension,
    n_boot: usize,
    seed: u64,
) -> Result<Vec<StratumPreference>, AnalyticsError> {
    let mut seen: BTreeSet<&str> = BTreeSet::new();
    let mut matched: BTreeMap<&str, Vec<ComparisonRecord>> = BTreeMap::new();
    for r in records.iter().filter(|r| r.dimension == dimension) {
        let la = labels.get(&r.response_a.participant_id);
        let lb = labels.get(&r.response_b.participant_id);
        seen.extend(la.map(String::as_str));
        seen.extend(lb.map(String::as_str));
        if let (Some(a), Some(b)) = (la, lb) {
            if a == b {
                matched.entry(a).or_default().push(r.clone());
            }
        }
    }
    seen.into_iter()
        .enumerate()
        .map(|(i, label)| {
            let recs = matched.remove(label).unwrap_or_default();
            let summary = match aggregate_preferences(&recs, treatment, control, dimension, n_boot, seed.wrapping_add(i as u64)) {
                Ok(s) => Some(s),
                Err(AnalyticsError::Empty(_)) => None,
                Err(e) => return Err(e),
            };
            Ok(StratumPreference {
                stratum: label.to_string(),
                matched: recs.len(),
                summary,
            })
        })
        .collect()
}
