use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::replay::{LogView, ParticipantView};
use super::usage::{classify_usage, UsageClass, UsageSkip};
use crate::study::{EventPayload, StudyArm};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CollaborationProfile {
    pub participant_id: String,
    pub arm: StudyArm,
    /// Posts with at least one feedback request.
    pub consult_count: usize,
    pub usage_counts: BTreeMap<UsageClass, usize>,
    pub used_reload: bool,
}

impl CollaborationProfile {
    pub fn usage(&self, class: UsageClass) -> usize {
        self.usage_counts.get(&class).copied().unwrap_or(0)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct Profiles {
    pub rewriting: Vec<CollaborationProfile>,
    pub classification: Vec<CollaborationProfile>,
    /// Posts left out of a profile, with the reason.
    pub audit: Vec<String>,
}

fn profile(p: &ParticipantView<'_>, threshold: f64, audit: &mut Vec<String>) -> CollaborationProfile {
    let mut usage_counts: BTreeMap<UsageClass, usize> = UsageClass::ALL.iter().map(|&c| (c, 0)).collect();
    let mut consult_count = 0;
    let mut used_reload = false;
    for (&i, events) in &p.posts {
        used_reload |= events.iter().any(|e| matches!(e.payload, EventPayload::Reload { .. }));
        match classify_usage(events, threshold) {
            Ok(class) => {
                consult_count += 1;
                *usage_counts.entry(class).or_default() += 1;
            }
            Err(UsageSkip::NotConsulted) => {}
            Err(skip) => audit.push(format!("{} post {i}: {skip}", p.id)),
        }
    }
    CollaborationProfile {
        participant_id: p.id.clone(),
        arm: p.arm,
        consult_count,
        usage_counts,
        used_reload,
    }
}

/// One profile per participant who completed the study in an assisted arm,
/// rewriting and classification arms kept apart.
pub fn extract_profiles(view: &LogView<'_>, threshold: f64) -> Profiles {
    let mut out = Profiles::default();
    for p in view.completed() {
        match p.arm {
            StudyArm::HumanOnly => {}
            StudyArm::HumanPlusRewriting => {
                let prof = profile(p, threshold, &mut out.audit);
                out.rewriting.push(prof);
            }
            StudyArm::HumanPlusClassification => {
                let prof = profile(p, threshold, &mut out.audit);
                out.classification.push(prof);
            }
        }
    }
    out
}
