use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::types::{Answers, Phase, StudyArm};
use super::StudyError;
use crate::analytics::preferences::ComparisonRecord;
use crate::clock::Timestamp;
use crate::empathy::EmpathyScore;
use crate::rewriter::BundleKind;
use crate::safety::{FlagTarget, FlagTargets, SafetyMatch};
use crate::textcore::EditAction;

pub const EVENT_SCHEMA_VERSION: u32 = 1;

/// Participant id used for events that belong to no participant (post escalation).
pub const SYSTEM_ACTOR: &str = "system";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeedbackMode {
    Rewriting,
    Classification,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SurveyKind {
    Pre,
    Post,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "payload", rename_all = "snake_case")]
pub enum EventPayload {
    Enrolled {
        arm: StudyArm,
        post_subset_id: usize,
        demographics: Answers,
    },
    PhaseAdvanced {
        from: Phase,
        to: Phase,
    },
    /// A seeker post was put in front of the participant; `assist_offered` is
    /// true when the feedback prompt was shown with it.
    PromptShown {
        post_id: String,
        assist_offered: bool,
    },
    FeedbackRequested {
        post_id: String,
        mode: FeedbackMode,
        cursor: usize,
    },
    FeedbackShown {
        post_id: String,
        feedback_id: String,
        mode: FeedbackMode,
        kind: Option<BundleKind>,
        candidate_id: Option<usize>,
        suggestions: Vec<EditAction>,
        preview: Option<String>,
        scores: Option<EmpathyScore>,
        /// Set when no improving candidate was found and a neutral no-edit
        /// message was shown instead.
        #[serde(default)]
        degraded: bool,
    },
    ActionAccepted {
        feedback_id: String,
        action_ids: Vec<usize>,
        draft_after: String,
    },
    Reload {
        feedback_id: String,
        cursor: usize,
    },
    FlagRaised {
        flag_id: String,
        target: FlagTarget,
        target_id: String,
        reason: Option<String>,
    },
    DraftSnapshot {
        text: String,
    },
    ResponseSubmitted {
        post_id: String,
        seeker_post: String,
        text: String,
    },
    SurveySubmitted {
        survey: SurveyKind,
        answers: Answers,
    },
    /// A remote backend failed and the built-in one answered; `backend` is
    /// "scorer" or "rewriter".
    ScorerFallback {
        backend: String,
        reason: String,
    },
    Exhaustion {
        bank_size: usize,
        cursor: usize,
    },
    Escalated {
        post_id: String,
        rules_version: String,
        matched: Vec<SafetyMatch>,
    },
    EvaluationSubmitted {
        record: ComparisonRecord,
    },
}

impl EventPayload {
    pub fn type_name(&self) -> &'static str {
        match self {
            EventPayload::Enrolled { .. } => "enrolled",
            EventPayload::PhaseAdvanced { .. } => "phase_advanced",
            EventPayload::PromptShown { .. } => "prompt_shown",
            EventPayload::FeedbackRequested { .. } => "feedback_requested",
            EventPayload::FeedbackShown { .. } => "feedback_shown",
            EventPayload::ActionAccepted { .. } => "action_accepted",
            EventPayload::Reload { .. } => "reload",
            EventPayload::FlagRaised { .. } => "flag_raised",
            EventPayload::DraftSnapshot { .. } => "draft_snapshot",
            EventPayload::ResponseSubmitted { .. } => "response_submitted",
            EventPayload::SurveySubmitted { .. } => "survey_submitted",
            EventPayload::ScorerFallback { .. } => "scorer_fallback",
            EventPayload::Exhaustion { .. } => "exhaustion",
            EventPayload::Escalated { .. } => "escalated",
            EventPayload::EvaluationSubmitted { .. } => "evaluation_submitted",
        }
    }

    /// Events that only make sense while the participant is writing responses.
    pub fn is_response_scoped(&self) -> bool {
        matches!(
            self,
            EventPayload::PromptShown { .. }
                | EventPayload::FeedbackRequested { .. }
                | EventPayload::FeedbackShown { .. }
                | EventPayload::ActionAccepted { .. }
                | EventPayload::Reload { .. }
                | EventPayload::DraftSnapshot { .. }
                | EventPayload::ResponseSubmitted { .. }
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteractionEvent {
    pub v: u32,
    pub offset: u64,
    pub timestamp: Timestamp,
    pub participant_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub session_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub post_index: Option<usize>,
    #[serde(flatten)]
    pub payload: EventPayload,
}

impl InteractionEvent {
    /// A new event; the log assigns the offset on append.
    pub fn new(
        timestamp: Timestamp,
        participant_id: impl Into<String>,
        session_id: Option<String>,
        post_index: Option<usize>,
        payload: EventPayload,
    ) -> Self {
        Self {
            v: EVENT_SCHEMA_VERSION,
            offset: 0,
            timestamp,
            participant_id: participant_id.into(),
            session_id,
            post_index,
            payload,
        }
    }
}

/// Append-only interaction log. Offsets are assigned densely from 0; an
/// optional line-delimited JSON sink receives each event as it is appended.
#[derive(Default)]
pub struct EventLog {
    events: Vec<InteractionEvent>,
    sink: Option<BufWriter<File>>,
    submitted: HashSet<(String, usize)>,
    last_timestamp: HashMap<String, Timestamp>,
    feedback_ids: HashSet<String>,
    served_posts: HashSet<String>,
}

impl std::fmt::Debug for EventLog {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("EventLog")
            .field("events", &self.events.len())
            .field("persistent", &self.sink.is_some())
            .finish()
    }
}

impl EventLog {
    pub fn new() -> Self {
        Self::default()
    }

    /// A log that also appends every event to `path` (created or truncated).
    pub fn with_sink(path: &Path) -> Result<Self, StudyError> {
        let file = File::create(path).map_err(|e| StudyError::Io(format!("{}: {e}", path.display())))?;
        Ok(Self {
            sink: Some(BufWriter::new(file)),
            ..Self::default()
        })
    }

    pub fn append(&mut self, mut event: InteractionEvent) -> Result<u64, StudyError> {
        self.validate(&event)?;
        event.v = EVENT_SCHEMA_VERSION;
        event.offset = self.events.len() as u64;
        if let Some(sink) = self.sink.as_mut() {
            serde_json::to_writer(&mut *sink, &event).map_err(|e| StudyError::Io(e.to_string()))?;
            sink.write_all(b"\n").map_err(|e| StudyError::Io(e.to_string()))?;
            sink.flush().map_err(|e| StudyError::Io(e.to_string()))?;
        }
        self.index(&event);
        let offset = event.offset;
        self.events.push(event);
        Ok(offset)
    }

    fn validate(&self, event: &InteractionEvent) -> Result<(), StudyError> {
        if let Some(last) = self.last_timestamp.get(&event.participant_id) {
            if event.timestamp < *last {
                return Err(StudyError::Invariant(format!(
                    "event at {} precedes earlier event at {} for {}",
                    event.timestamp, last, event.participant_id
                )));
            }
        }
        if let EventPayload::ResponseSubmitted { .. } = event.payload {
            let post = event.post_index.ok_or_else(|| {
                StudyError::Invariant("response_submitted without post_index".into())
            })?;
            if self.submitted.contains(&(event.participant_id.clone(), post)) {
                return Err(StudyError::Invariant(format!(
                    "response for post {post} already submitted by {}",
                    event.participant_id
                )));
            }
        }
        Ok(())
    }

    fn index(&mut self, event: &InteractionEvent) {
        self.last_timestamp
            .insert(event.participant_id.clone(), event.timestamp);
        match &event.payload {
            EventPayload::ResponseSubmitted { post_id, .. } => {
                if let Some(post) = event.post_index {
                    self.submitted.insert((event.participant_id.clone(), post));
                }
                self.served_posts.insert(post_id.clone());
            }
            EventPayload::PromptShown { post_id, .. } | EventPayload::FeedbackRequested { post_id, .. } => {
                self.served_posts.insert(post_id.clone());
            }
            EventPayload::FeedbackShown { feedback_id, .. } => {
                self.feedback_ids.insert(feedback_id.clone());
            }
            _ => {}
        }
    }

    pub fn events(&self) -> &[InteractionEvent] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn has_submitted(&self, participant_id: &str, post_index: usize) -> bool {
        self.submitted
            .contains(&(participant_id.to_string(), post_index))
    }

    pub fn responses_submitted(&self, participant_id: &str) -> usize {
        self.submitted
            .iter()
            .filter(|(p, _)| p == participant_id)
            .count()
    }

    /// One JSON object per line.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for e in &self.events {
            out.push_str(&serde_json::to_string(e).expect("events serialize"));
            out.push('\n');
        }
        out
    }

    pub fn write_jsonl(&self, path: &Path) -> Result<(), StudyError> {
        std::fs::write(path, self.to_jsonl()).map_err(|e| StudyError::Io(format!("{}: {e}", path.display())))
    }

    /// Rebuilds a log from JSONL, re-running every append invariant.
    pub fn from_jsonl(src: &str) -> Result<Self, StudyError> {
        let mut log = Self::new();
        for (i, line) in src.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let event: InteractionEvent = serde_json::from_str(line)
                .map_err(|e| StudyError::Validation(format!("event line {}: {e}", i + 1)))?;
            if event.v != EVENT_SCHEMA_VERSION {
                return Err(StudyError::Validation(format!(
                    "event line {}: schema v{} unsupported",
                    i + 1,
                    event.v
                )));
            }
            if event.offset != log.len() as u64 {
                return Err(StudyError::Validation(format!(
                    "event line {}: offset {} out of sequence",
                    i + 1,
                    event.offset
                )));
            }
            log.append(event)?;
        }
        Ok(log)
    }

    pub fn read_jsonl(path: &Path) -> Result<Self, StudyError> {
        let file = File::open(path).map_err(|e| StudyError::Io(format!("{}: {e}", path.display())))?;
        let mut src = String::new();
        for line in BufReader::new(file).lines() {
            src.push_str(&line.map_err(|e| StudyError::Io(e.to_string()))?);
            src.push('\n');
        }
        Self::from_jsonl(&src)
    }
}

impl FlagTargets for EventLog {
    fn has_target(&self, target: FlagTarget, id: &str) -> bool {
        match target {
            FlagTarget::SeekerPost => self.served_posts.contains(id),
            FlagTarget::Feedback => self.feedback_ids.contains(id),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(ms: i64, pid: &str, post: Option<usize>, payload: EventPayload) -> InteractionEvent {
        InteractionEvent::new(Timestamp::from_millis(ms), pid, Some("s".into()), post, payload)
    }

    fn submitted(post_id: &str) -> EventPayload {
        EventPayload::ResponseSubmitted {
            post_id: post_id.into(),
            seeker_post: "x".into(),
            text: "y".into(),
        }
    }

    #[test]
    fn offsets_are_dense_and_monotone() {
        let mut log = EventLog::new();
        let a = log.append(ev(1, "p", Some(0), EventPayload::DraftSnapshot { text: "hi".into() })).unwrap();
        let b = log.append(ev(2, "p", Some(0), EventPayload::DraftSnapshot { text: "hi!".into() })).unwrap();
        assert_eq!((a, b), (0, 1));
    }

    #[test]
    fn second_submission_for_a_post_is_rejected() {
        let mut log = EventLog::new();
        log.append(ev(1, "p", Some(3), submitted("x3"))).unwrap();
        let err = log.append(ev(2, "p", Some(3), submitted("x3"))).unwrap_err();
        assert!(matches!(err, StudyError::Invariant(_)));
        assert_eq!(log.len(), 1);
        // other participants are independent
        log.append(ev(2, "q", Some(3), submitted("x3"))).unwrap();
    }

    #[test]
    fn timestamps_cannot_go_backwards_per_participant() {
        let mut log = EventLog::new();
        log.append(ev(10, "p", None, EventPayload::ScorerFallback { backend: "scorer".into(), reason: "x".into() })).unwrap();
        assert!(log.append(ev(5, "p", None, EventPayload::ScorerFallback { backend: "scorer".into(), reason: "x".into() })).is_err());
        log.append(ev(5, "q", None, EventPayload::ScorerFallback { backend: "scorer".into(), reason: "x".into() })).unwrap();
    }

    #[test]
    fn jsonl_round_trip_and_wire_shape() {
        let mut log = EventLog::new();
        log.append(ev(1_640_995_200_000, "p", Some(0), EventPayload::PromptShown { post_id: "x".into(), assist_offered: true }))
            .unwrap();
        let text = log.to_jsonl();
        let value: serde_json::Value = serde_json::from_str(text.lines().next().unwrap()).unwrap();
        assert_eq!(value["type"], "prompt_shown");
        assert_eq!(value["payload"]["post_id"], "x");
        assert_eq!(value["timestamp"], "2022-01-01T00:00:00.000Z");
        assert_eq!(value["v"], 1);
        let back = EventLog::from_jsonl(&text).unwrap();
        assert_eq!(back.events(), log.events());
    }

    #[test]
    fn replay_rejects_tampered_offsets() {
        let mut log = EventLog::new();
        log.append(ev(1, "p", None, EventPayload::ScorerFallback { backend: "scorer".into(), reason: "x".into() })).unwrap();
        let text = log.to_jsonl().replace("\"offset\":0", "\"offset\":4");
        assert!(EventLog::from_jsonl(&text).is_err());
    }

    #[test]
    fn flag_targets_track_served_posts_and_feedback() {
        let mut log = EventLog::new();
        log.append(ev(1, "p", Some(0), EventPayload::PromptShown { post_id: "x".into(), assist_offered: false }))
            .unwrap();
        assert!(log.has_target(FlagTarget::SeekerPost, "x"));
        assert!(!log.has_target(FlagTarget::SeekerPost, "nope"));
        assert!(!log.has_target(FlagTarget::Feedback, "f1"));
    }
}
