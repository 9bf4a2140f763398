use std::collections::HashMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{SafetyRuleSet, SafetyVerdict};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EscalationRecord {
    pub post_id: String,
    pub text: String,
    pub rules_version: String,
    pub verdict: SafetyVerdict,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "decision", rename_all = "snake_case")]
pub enum GateDecision {
    Admitted,
    Escalated(EscalationRecord),
}

impl GateDecision {
    pub fn is_admitted(&self) -> bool {
        matches!(self, GateDecision::Admitted)
    }
}

/// Admission control for seeker posts. Decisions are remembered per post id,
/// so gating the same post again returns the original decision.
#[derive(Debug, Clone)]
pub struct PostGate {
    rules: Arc<SafetyRuleSet>,
    decisions: HashMap<String, GateDecision>,
    escalations: Vec<EscalationRecord>,
}

impl PostGate {
    pub fn new(rules: Arc<SafetyRuleSet>) -> Self {
        Self {
            rules,
            decisions: HashMap::new(),
            escalations: Vec::new(),
        }
    }

    pub fn gate(&mut self, post_id: &str, text: &str) -> &GateDecision {
        if !self.decisions.contains_key(post_id) {
            let verdict = self.rules.check(text);
            let decision = if verdict.is_safe() {
                GateDecision::Admitted
            } else {
                let record = EscalationRecord {
                    post_id: post_id.to_string(),
                    text: text.to_string(),
                    rules_version: self.rules.version().to_string(),
                    verdict,
                };
                self.escalations.push(record.clone());
                GateDecision::Escalated(record)
            };
            self.decisions.insert(post_id.to_string(), decision);
        }
        &self.decisions[post_id]
    }

    /// Escalations in the order they were first decided.
    pub fn escalations(&self) -> &[EscalationRecord] {
        &self.escalations
    }

    pub fn decision(&self, post_id: &str) -> Option<&GateDecision> {
        self.decisions.get(post_id)
    }
}
