use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::analytics::preferences::{ArmResponse, ComparisonRecord, Dimension, Preference};
use crate::analytics::replay::LogView;
use crate::study::{EventLog, StudyArm};

/// A pair shown to a rater. Which arm sits in slot A is hidden from them.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EvalTask {
    pub task_id: String,
    pub rater_id: String,
    pub dimension: Dimension,
    pub seeker_post_id: String,
    pub seeker_post: String,
    pub response_a: String,
    pub response_b: String,
    #[serde(skip)]
    arms: (ArmResponse, ArmResponse),
}

/// Identity of a pair independent of display order.
type PairKey = (String, String, String);

/// Builds rewriting-vs-unassisted pairs from completed participants and hands
/// them out to raters. Within a seeker post, the i-th rewriting response (by
/// participant id) is paired with the i-th unassisted one; leftovers wait for
/// a partner.
#[derive(Debug, Clone)]
pub struct EvaluationQueue {
    seed: u64,
    next_id: u64,
    pending: BTreeMap<String, EvalTask>,
    judged: BTreeSet<(String, Dimension, PairKey)>,
}

impl EvaluationQueue {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            next_id: 0,
            pending: BTreeMap::new(),
            judged: BTreeSet::new(),
        }
    }

    fn pairs(log: &EventLog) -> Vec<(String, ArmResponse, ArmResponse)> {
        let view = LogView::build(log);
        let mut by_post: BTreeMap<String, (String, Vec<ArmResponse>, Vec<ArmResponse>)> = BTreeMap::new();
        for arm in [StudyArm::HumanPlusRewriting, StudyArm::HumanOnly] {
            for p in view.completed_in(arm) {
                for (_, post_id, seeker, text) in p.responses() {
                    let entry = by_post
                        .entry(post_id.to_string())
                        .or_insert_with(|| (seeker.to_string(), Vec::new(), Vec::new()));
                    let r = ArmResponse {
                        arm,
                        participant_id: p.id.clone(),
                        post_id: post_id.to_string(),
                        text: text.to_string(),
                    };
                    if arm == StudyArm::HumanPlusRewriting {
                        entry.1.push(r);
                    } else {
                        entry.2.push(r);
                    }
                }
            }
        }
        let mut out = Vec::new();
        for (_, (seeker, treat, control)) in by_post {
            for (t, c) in treat.into_iter().zip(control) {
                out.push((seeker.clone(), t, c));
            }
        }
        out
    }

    fn treatment_first(&self, rater: &str, key: &PairKey) -> bool {
        let mut h = Sha256::new();
        h.update(self.seed.to_le_bytes());
        h.update(rater.as_bytes());
        h.update([0]);
        h.update(key.0.as_bytes());
        h.update([0]);
        h.update(key.1.as_bytes());
        h.update([0]);
        h.update(key.2.as_bytes());
        h.finalize()[0] & 1 == 0
    }

    pub fn next_task(&mut self, log: &EventLog, rater: &str, dimension: Dimension) -> Option<EvalTask> {
        if let Some(t) = self
            .pending
            .values()
            .find(|t| t.rater_id == rater && t.dimension == dimension)
        {
            return Some(t.clone());
        }
        for (seeker, t, c) in Self::pairs(log) {
            let key = (t.post_id.clone(), t.participant_id.clone(), c.participant_id.clone());
            if self.judged.contains(&(rater.to_string(), dimension, key.clone())) {
                continue;
            }
            let (a, b) = if self.treatment_first(rater, &key) { (t, c) } else { (c, t) };
            self.next_id += 1;
            let task = EvalTask {
                task_id: format!("E{:06}", self.next_id),
                rater_id: rater.to_string(),
                dimension,
                seeker_post_id: key.0.clone(),
                seeker_post: seeker,
                response_a: a.text.clone(),
                response_b: b.text.clone(),
                arms: (a, b),
            };
            self.pending.insert(task.task_id.clone(), task.clone());
            return Some(task);
        }
        None
    }

    pub fn complete(&mut self, task_id: &str, preference: Preference) -> Option<ComparisonRecord> {
        let task = self.pending.remove(task_id)?;
        let (a, b) = task.arms;
        let (t, c) = if a.arm == StudyArm::HumanPlusRewriting { (&a, &b) } else { (&b, &a) };
        let key = (t.post_id.clone(), t.participant_id.clone(), c.participant_id.clone());
        self.judged.insert((task.rater_id.clone(), task.dimension, key));
        Some(ComparisonRecord {
            id: task.task_id,
            seeker_post_id: task.seeker_post_id,
            response_a: a,
            response_b: b,
            rater_id: task.rater_id,
            preference,
            dimension: task.dimension,
        })
    }
}
