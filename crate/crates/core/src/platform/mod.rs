//! The application engine behind the HTTP API and the simulator: sessions,
//! arm gating, feedback issuing, actions, submissions, flags, classification
//! scores and evaluator tasks. Every state change lands in the event log.

mod error;
mod eval;

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::clock::{Clock, Timestamp};
use crate::empathy::{FallbackScorer, RuleScorer, ScoreSource, Scored, ScoringContext};
use crate::rewriter::{
    BundleKind, FeedbackBundle, FeedbackRequest, GenerationNote, Rewriter, RewriterConfig, RewriterError,
    TemplateBank,
};
use crate::safety::{validate_flag, EscalationRecord, FlagRecord, FlagTarget, GateDecision, PostGate, RuleHandle, SafetyRuleSet};
use crate::study::{
    Answers, EventLog, EventPayload, FeedbackMode, InteractionEvent, Participant, Phase, PhasePayload, Post, PostPool,
    Study, StudyArm, StudyConfig, StudyForms, TrainingMaterial, SYSTEM_ACTOR,
};

pub use error::{ApiError, ErrorCode};
pub use eval::{EvalTask, EvaluationQueue};

use crate::analytics::preferences::{ComparisonRecord, Dimension, Preference};

/// Shown instead of suggestions when no candidate improved the draft. It is
/// neutral on purpose: the draft did not earn praise.
pub const NO_SUGGESTION_MESSAGE: &str =
    "No new suggestions for this draft right now. Keep going in your own words.";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlatformConfig {
    pub study: StudyConfig,
    pub rewriter: RewriterConfig,
    /// Seed for evaluator order randomization.
    pub eval_seed: u64,
}

impl Default for PlatformConfig {
    fn default() -> Self {
        Self {
            study: StudyConfig::default(),
            rewriter: RewriterConfig::default(),
            eval_seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct IngestReport {
    pub admitted: Vec<Post>,
    pub escalated: Vec<EscalationRecord>,
    pub rules_version: String,
}

/// Runs every post through the safety gate. Unsafe posts are escalated and
/// never reach the pool.
pub fn ingest_posts(rules: Arc<SafetyRuleSet>, posts: Vec<Post>) -> IngestReport {
    let mut gate = PostGate::new(rules.clone());
    let mut admitted = Vec::new();
    for post in posts {
        if let GateDecision::Admitted = gate.gate(&post.id, &post.text) {
            admitted.push(post);
        }
    }
    IngestReport {
        admitted,
        escalated: gate.escalations().to_vec(),
        rules_version: rules.version().to_string(),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Session {
    pub session_id: String,
    pub participant_id: String,
    pub post_index: usize,
    pub draft: String,
    /// Reload cursor for the current post.
    pub cursor: usize,
    pub last_feedback: Option<String>,
    pub prompt_shown: bool,
    pub created: Timestamp,
    pub last_active: Timestamp,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Enrollment {
    pub participant: Participant,
    pub session_id: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Assist {
    None,
    Rewriting,
    Classification,
}

impl Assist {
    fn for_arm(arm: StudyArm) -> Self {
        match arm {
            StudyArm::HumanOnly => Assist::None,
            StudyArm::HumanPlusRewriting => Assist::Rewriting,
            StudyArm::HumanPlusClassification => Assist::Classification,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PostView {
    pub session_id: String,
    pub post_index: usize,
    pub post_id: String,
    pub text: String,
    pub assist: Assist,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FeedbackView {
    pub feedback_id: String,
    pub bundle: FeedbackBundle,
    /// True when no improving candidate was found and no edits are offered.
    pub degraded: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ActionsView {
    pub feedback_id: String,
    pub draft: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SubmitView {
    pub post_index: usize,
    pub remaining: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ScoresView {
    pub feedback_id: String,
    #[serde(flatten)]
    pub scored: Scored,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlagRequest {
    pub target: FlagTarget,
    pub target_id: String,
    pub participant_id: String,
    #[serde(default)]
    pub reason: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FlagReceipt {
    pub flag_id: String,
}

#[derive(Debug, Clone)]
struct IssuedFeedback {
    session_id: String,
    post_index: usize,
    draft: String,
    bundle: FeedbackBundle,
}

pub struct Platform {
    config: PlatformConfig,
    study: Study,
    rewriter: Rewriter,
    scorer: FallbackScorer,
    rules: RuleHandle,
    sessions: BTreeMap<String, Session>,
    feedback: HashMap<String, IssuedFeedback>,
    next_feedback: u64,
    next_flag: u64,
    next_error: u64,
    evaluations: EvaluationQueue,
    clock: Arc<dyn Clock>,
}

impl std::fmt::Debug for Platform {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Platform")
            .field("study", &self.study)
            .field("sessions", &self.sessions.len())
            .finish()
    }
}

pub struct PlatformParts {
    pub config: PlatformConfig,
    pub rules: SafetyRuleSet,
    pub posts: Vec<Post>,
    pub forms: StudyForms,
    pub templates: TemplateBank,
    pub scorer: RuleScorer,
    pub primary_scorer: Option<Box<dyn crate::empathy::Scorer>>,
    pub remote_rewriter: Option<Box<dyn crate::rewriter::RewriteBackend>>,
    pub log: EventLog,
    pub clock: Arc<dyn Clock>,
}

impl PlatformParts {
    /// Bundled forms, templates and lexicons with no remote backends.
    pub fn new(config: PlatformConfig, rules: SafetyRuleSet, posts: Vec<Post>, clock: Arc<dyn Clock>) -> Self {
        Self {
            config,
            rules,
            posts,
            forms: StudyForms::bundled(),
            templates: TemplateBank::bundled(),
            scorer: RuleScorer::default(),
            primary_scorer: None,
            remote_rewriter: None,
            log: EventLog::new(),
            clock,
        }
    }
}

impl Platform {
    /// Builds the engine. The safety rule set is required: there is no way to
    /// construct a platform that serves feedback without one.
    pub fn new(parts: PlatformParts) -> Result<(Self, IngestReport), ApiError> {
        let PlatformParts {
            config,
            rules,
            posts,
            forms,
            templates,
            scorer,
            primary_scorer,
            remote_rewriter,
            log,
            clock,
        } = parts;
        let rules_arc = Arc::new(rules.clone());
        let report = ingest_posts(rules_arc, posts);
        let pool = PostPool::new(report.admitted.clone()).map_err(|e| ApiError::from_study(e, "startup"))?;
        let mut study = Study::new(config.study.clone(), forms, pool, log, clock.clone())
            .map_err(|e| ApiError::from_study(e, "startup"))?;
        for esc in &report.escalated {
            let event = InteractionEvent::new(
                clock.now(),
                SYSTEM_ACTOR,
                None,
                None,
                EventPayload::Escalated {
                    post_id: esc.post_id.clone(),
                    rules_version: esc.rules_version.clone(),
                    matched: esc.verdict.matched().to_vec(),
                },
            );
            study.record_external(event).map_err(|e| ApiError::from_study(e, "startup"))?;
        }
        let handle = RuleHandle::new(rules);
        let mut rewriter = Rewriter::new(config.rewriter, templates, scorer.clone(), handle.clone());
        if let Some(remote) = remote_rewriter {
            rewriter = rewriter.with_remote(remote);
        }
        let scorer = match primary_scorer {
            Some(primary) => FallbackScorer::with_primary(primary, scorer),
            None => FallbackScorer::rules_only(scorer),
        };
        let evaluations = EvaluationQueue::new(config.eval_seed);
        Ok((
            Self {
                config,
                study,
                rewriter,
                scorer,
                rules: handle,
                sessions: BTreeMap::new(),
                feedback: HashMap::new(),
                next_feedback: 0,
                next_flag: 0,
                next_error: 0,
                evaluations,
                clock,
            },
            report,
        ))
    }

    pub fn config(&self) -> &PlatformConfig {
        &self.config
    }

    pub fn study(&self) -> &Study {
        &self.study
    }

    pub fn log(&self) -> &EventLog {
        self.study.log()
    }

    pub fn into_log(self) -> EventLog {
        self.study.into_log()
    }

    pub fn rules(&self) -> Arc<SafetyRuleSet> {
        self.rules.current()
    }

    /// Atomically replaces the rule set used for feedback and seeker posts.
    pub fn swap_rules(&self, rules: SafetyRuleSet) {
        self.rules.swap(rules);
    }

    pub fn training(&self) -> &TrainingMaterial {
        &self.study.forms().training
    }

    pub fn forms(&self) -> &StudyForms {
        self.study.forms()
    }

    pub fn session(&self, session_id: &str) -> Result<&Session, ApiError> {
        self.sessions
            .get(session_id)
            .ok_or_else(|| self.err(ErrorCode::NotFound, format!("session {session_id}")))
    }

    fn err(&self, code: ErrorCode, message: impl Into<String>) -> ApiError {
        ApiError::new(code, message, format!("err-{:06}", self.next_error))
    }

    fn fail<T>(&mut self, code: ErrorCode, message: impl Into<String>) -> Result<T, ApiError> {
        let e = self.err(code, message);
        self.next_error += 1;
        Err(e)
    }

    fn study_err<T>(&mut self, e: crate::study::StudyError) -> Result<T, ApiError> {
        let e = ApiError::from_study(e, &format!("err-{:06}", self.next_error));
        self.next_error += 1;
        Err(e)
    }

    pub fn enroll(&mut self, demographics: Answers) -> Result<Enrollment, ApiError> {
        let participant = match self.study.enroll(demographics) {
            Ok(p) => p,
            Err(e) => return self.study_err(e),
        };
        let now = self.clock.now();
        let session_id = format!("S{}", &participant.id[1..]);
        self.sessions.insert(
            session_id.clone(),
            Session {
                session_id: session_id.clone(),
                participant_id: participant.id.clone(),
                post_index: 0,
                draft: String::new(),
                cursor: 0,
                last_feedback: None,
                prompt_shown: false,
                created: now,
                last_active: now,
            },
        );
        Ok(Enrollment {
            participant,
            session_id,
        })
    }

    pub fn participant(&self, id: &str) -> Result<&Participant, ApiError> {
        self.study
            .participant(id)
            .map_err(|e| ApiError::from_study(e, &format!("err-{:06}", self.next_error)))
    }

    pub fn advance_phase(&mut self, participant_id: &str, payload: PhasePayload) -> Result<Participant, ApiError> {
        match self.study.advance_phase(participant_id, payload) {
            Ok(p) => Ok(p),
            Err(e) => self.study_err(e),
        }
    }

    /// Drops idle participants and closes their sessions.
    pub fn sweep_inactive(&mut self) -> Result<Vec<String>, ApiError> {
        let dropped = match self.study.sweep_inactive() {
            Ok(d) => d,
            Err(e) => return self.study_err(e),
        };
        self.sessions.retain(|_, s| !dropped.contains(&s.participant_id));
        Ok(dropped)
    }

    fn responding_session(&mut self, session_id: &str) -> Result<(Session, Participant), ApiError> {
        let Some(session) = self.sessions.get(session_id).cloned() else {
            return self.fail(ErrorCode::NotFound, format!("session {session_id}"));
        };
        let participant = match self.study.participant(&session.participant_id) {
            Ok(p) => p.clone(),
            Err(e) => return self.study_err(e),
        };
        if participant.phase != Phase::Responding {
            return self.fail(
                ErrorCode::PhaseViolation,
                format!("{} is in {:?}, not Responding", participant.id, participant.phase),
            );
        }
        if session.post_index >= crate::study::POSTS_PER_SUBSET {
            return self.fail(ErrorCode::PhaseViolation, "all posts have been answered");
        }
        Ok((session, participant))
    }

    fn current(&self, participant_id: &str, post_index: usize) -> Post {
        self.study.assigned_posts(participant_id).expect("participant exists")[post_index].clone()
    }

    fn record(&mut self, session: &Session, payload: EventPayload) -> Result<u64, ApiError> {
        let event = InteractionEvent::new(
            self.clock.now(),
            session.participant_id.clone(),
            Some(session.session_id.clone()),
            Some(session.post_index),
            payload,
        );
        let now = event.timestamp;
        match self.study.record(event) {
            Ok(offset) => {
                if let Some(s) = self.sessions.get_mut(&session.session_id) {
                    s.last_active = now;
                }
                Ok(offset)
            }
            Err(e) => self.study_err(e),
        }
    }

    fn ensure_prompt(&mut self, session: &mut Session, participant: &Participant, post: &Post) -> Result<(), ApiError> {
        if !session.prompt_shown {
            self.record(
                session,
                EventPayload::PromptShown {
                    post_id: post.id.clone(),
                    assist_offered: participant.arm != StudyArm::HumanOnly,
                },
            )?;
            session.prompt_shown = true;
            self.sessions.get_mut(&session.session_id).expect("session exists").prompt_shown = true;
        }
        Ok(())
    }

    /// The seeker post the participant should answer next.
    pub fn current_post(&mut self, session_id: &str) -> Result<PostView, ApiError> {
        let (mut session, participant) = self.responding_session(session_id)?;
        let post = self.current(&participant.id, session.post_index);
        self.ensure_prompt(&mut session, &participant, &post)?;
        Ok(PostView {
            session_id: session.session_id,
            post_index: session.post_index,
            post_id: post.id,
            text: post.text,
            assist: Assist::for_arm(participant.arm),
        })
    }

    fn check_post_safe(&mut self, session: &Session, post: &Post) -> Result<(), ApiError> {
        let rules = self.rules.current();
        let verdict = rules.check(&post.text);
        if verdict.is_safe() {
            return Ok(());
        }
        self.record(
            session,
            EventPayload::Escalated {
                post_id: post.id.clone(),
                rules_version: rules.version().to_string(),
                matched: verdict.matched().to_vec(),
            },
        )?;
        self.fail(ErrorCode::SafetyRejected, format!("post {} is escalated", post.id))
    }

    /// Rewriting feedback on `draft`. Only the rewriting arm has this; other
    /// arms get NotFound so the endpoint does not exist for them.
    pub fn feedback(&mut self, session_id: &str, draft: &str) -> Result<FeedbackView, ApiError> {
        let (mut session, participant) = self.responding_session(session_id)?;
        if participant.arm != StudyArm::HumanPlusRewriting {
            return self.fail(ErrorCode::NotFound, "feedback is not available in this study arm");
        }
        let post = self.current(&participant.id, session.post_index);
        self.ensure_prompt(&mut session, &participant, &post)?;
        self.check_post_safe(&session, &post)?;
        self.record(&session, EventPayload::DraftSnapshot { text: draft.to_string() })?;
        self.record(
            &session,
            EventPayload::FeedbackRequested {
                post_id: post.id.clone(),
                mode: FeedbackMode::Rewriting,
                cursor: 0,
            },
        )?;
        {
            let s = self.sessions.get_mut(session_id).expect("session exists");
            s.draft = draft.to_string();
            s.cursor = 0;
        }
        session.draft = draft.to_string();
        session.cursor = 0;
        self.issue(&session, &post)
    }

    /// The next candidate for the draft of the last feedback request.
    pub fn reload(&mut self, session_id: &str) -> Result<FeedbackView, ApiError> {
        let (mut session, participant) = self.responding_session(session_id)?;
        if participant.arm != StudyArm::HumanPlusRewriting {
            return self.fail(ErrorCode::NotFound, "feedback is not available in this study arm");
        }
        let Some(previous) = session.last_feedback.clone() else {
            return self.fail(ErrorCode::NotFound, "no feedback to reload for this post");
        };
        let post = self.current(&participant.id, session.post_index);
        self.check_post_safe(&session, &post)?;
        session.cursor += 1;
        self.sessions.get_mut(session_id).expect("session exists").cursor = session.cursor;
        self.record(
            &session,
            EventPayload::Reload {
                feedback_id: previous,
                cursor: session.cursor,
            },
        )?;
        self.issue(&session, &post)
    }

    fn issue(&mut self, session: &Session, post: &Post) -> Result<FeedbackView, ApiError> {
        let request = FeedbackRequest {
            seeker_post: post.text.clone(),
            draft: session.draft.clone(),
            candidate_cursor: session.cursor,
            participant_id: session.participant_id.clone(),
            session_id: session.session_id.clone(),
        };
        let (bundle, score, notes, degraded) = match self.rewriter.generate(&request) {
            Ok(g) => (g.bundle, Some(g.preview_score), g.notes, false),
            Err(RewriterError::NoImprovement { notes, .. }) => {
                (FeedbackBundle::no_edits(&session.draft, NO_SUGGESTION_MESSAGE), None, notes, true)
            }
            Err(RewriterError::InvalidRequest(m)) => return self.fail(ErrorCode::Validation, m),
            Err(RewriterError::BackendUnavailable(m)) => return self.fail(ErrorCode::BackendUnavailable, m),
            Err(RewriterError::Template(m)) => return self.fail(ErrorCode::ContractViolation, m),
        };
        for note in &notes {
            match note {
                GenerationNote::Exhausted { bank_size, cursor } => {
                    self.record(
                        session,
                        EventPayload::Exhaustion {
                            bank_size: *bank_size,
                            cursor: *cursor,
                        },
                    )?;
                }
                GenerationNote::RemoteFallback { reason } => {
                    self.record(
                        session,
                        EventPayload::ScorerFallback {
                            backend: "rewriter".into(),
                            reason: reason.clone(),
                        },
                    )?;
                }
                GenerationNote::Resampled { .. } => {}
            }
        }
        let feedback_id = format!("F{:06}", self.next_feedback);
        self.next_feedback += 1;
        self.record(
            session,
            EventPayload::FeedbackShown {
                post_id: post.id.clone(),
                feedback_id: feedback_id.clone(),
                mode: FeedbackMode::Rewriting,
                kind: Some(bundle.kind),
                candidate_id: (bundle.kind == BundleKind::Suggestions).then_some(bundle.candidate_id),
                suggestions: bundle.script.actions().to_vec(),
                preview: Some(bundle.preview.clone()),
                scores: score,
                degraded,
            },
        )?;
        self.feedback.insert(
            feedback_id.clone(),
            IssuedFeedback {
                session_id: session.session_id.clone(),
                post_index: session.post_index,
                draft: session.draft.clone(),
                bundle: bundle.clone(),
            },
        );
        self.sessions.get_mut(&session.session_id).expect("session exists").last_feedback = Some(feedback_id.clone());
        Ok(FeedbackView {
            feedback_id,
            bundle,
            degraded,
        })
    }

    /// Applies the accepted subset of a bundle's actions to the draft the
    /// bundle was issued for.
    pub fn accept_actions(
        &mut self,
        session_id: &str,
        feedback_id: &str,
        action_ids: &[usize],
    ) -> Result<ActionsView, ApiError> {
        let (session, _) = self.responding_session(session_id)?;
        let issued = match self.feedback.get(feedback_id) {
            Some(f) if f.session_id == session.session_id && f.post_index == session.post_index => f.clone(),
            _ => return self.fail(ErrorCode::NotFound, format!("feedback {feedback_id} for the current post")),
        };
        if action_ids.is_empty() {
            return self.fail(ErrorCode::Validation, "no actions selected");
        }
        let draft = match issued.bundle.preview_for(&issued.draft, action_ids) {
            Ok(d) => d,
            Err(e) => return self.fail(ErrorCode::Validation, e.to_string()),
        };
        self.record(
            &session,
            EventPayload::ActionAccepted {
                feedback_id: feedback_id.to_string(),
                action_ids: action_ids.to_vec(),
                draft_after: draft.clone(),
            },
        )?;
        self.sessions.get_mut(session_id).expect("session exists").draft = draft.clone();
        Ok(ActionsView {
            feedback_id: feedback_id.to_string(),
            draft,
        })
    }

    pub fn submit_response(&mut self, session_id: &str, text: &str) -> Result<SubmitView, ApiError> {
        let (mut session, participant) = self.responding_session(session_id)?;
        if text.trim().is_empty() {
            return self.fail(ErrorCode::Validation, "response text is empty");
        }
        let post = self.current(&participant.id, session.post_index);
        self.ensure_prompt(&mut session, &participant, &post)?;
        self.record(
            &session,
            EventPayload::ResponseSubmitted {
                post_id: post.id.clone(),
                seeker_post: post.text.clone(),
                text: text.to_string(),
            },
        )?;
        let s = self.sessions.get_mut(session_id).expect("session exists");
        s.post_index += 1;
        s.draft.clear();
        s.cursor = 0;
        s.last_feedback = None;
        s.prompt_shown = false;
        Ok(SubmitView {
            post_index: s.post_index,
            remaining: crate::study::POSTS_PER_SUBSET - s.post_index,
        })
    }

    /// Mechanism scores for the classification arm. Any other arm gets a
    /// phase violation.
    pub fn scores(&mut self, session_id: &str, draft: &str) -> Result<ScoresView, ApiError> {
        let (mut session, participant) = self.responding_session(session_id)?;
        if participant.arm != StudyArm::HumanPlusClassification {
            return self.fail(
                ErrorCode::PhaseViolation,
                "mechanism scores are only offered in the classification arm",
            );
        }
        let post = self.current(&participant.id, session.post_index);
        self.ensure_prompt(&mut session, &participant, &post)?;
        self.check_post_safe(&session, &post)?;
        self.record(&session, EventPayload::DraftSnapshot { text: draft.to_string() })?;
        self.record(
            &session,
            EventPayload::FeedbackRequested {
                post_id: post.id.clone(),
                mode: FeedbackMode::Classification,
                cursor: 0,
            },
        )?;
        let ctx = match ScoringContext::new(post.text.clone(), draft) {
            Ok(c) => c,
            Err(e) => return self.fail(ErrorCode::Validation, e.to_string()),
        };
        let scored = self.scorer.score(&ctx);
        if let ScoreSource::Fallback { reason } = &scored.source {
            self.record(
                &session,
                EventPayload::ScorerFallback {
                    backend: "scorer".into(),
                    reason: reason.clone(),
                },
            )?;
        }
        let feedback_id = format!("F{:06}", self.next_feedback);
        self.next_feedback += 1;
        self.record(
            &session,
            EventPayload::FeedbackShown {
                post_id: post.id.clone(),
                feedback_id: feedback_id.clone(),
                mode: FeedbackMode::Classification,
                kind: None,
                candidate_id: None,
                suggestions: Vec::new(),
                preview: None,
                scores: Some(scored.score),
                degraded: false,
            },
        )?;
        self.sessions.get_mut(session_id).expect("session exists").draft = draft.to_string();
        Ok(ScoresView { feedback_id, scored })
    }

    pub fn flag(&mut self, request: FlagRequest) -> Result<FlagReceipt, ApiError> {
        let participant = match self.study.participant(&request.participant_id) {
            Ok(p) => p.clone(),
            Err(e) => return self.study_err(e),
        };
        let record = FlagRecord {
            target: request.target,
            target_id: request.target_id.clone(),
            participant_id: participant.id.clone(),
            timestamp: self.clock.now(),
            reason: request.reason.clone(),
        };
        if let Err(e) = validate_flag(&record, self.study.log()) {
            return self.fail(ErrorCode::NotFound, e.to_string());
        }
        let session = self
            .sessions
            .values()
            .find(|s| s.participant_id == participant.id)
            .cloned();
        let flag_id = format!("G{:06}", self.next_flag);
        self.next_flag += 1;
        let event = InteractionEvent::new(
            record.timestamp,
            participant.id.clone(),
            session.as_ref().map(|s| s.session_id.clone()),
            session
                .as_ref()
                .filter(|s| s.post_index < crate::study::POSTS_PER_SUBSET)
                .map(|s| s.post_index),
            EventPayload::FlagRaised {
                flag_id: flag_id.clone(),
                target: record.target,
                target_id: record.target_id,
                reason: record.reason,
            },
        );
        if let Err(e) = self.study.record(event) {
            return self.study_err(e);
        }
        Ok(FlagReceipt { flag_id })
    }

    /// Next comparison task for `rater_id`, or None when the rater has judged
    /// every available pair on this dimension.
    pub fn eval_next(&mut self, rater_id: &str, dimension: Dimension) -> Result<Option<EvalTask>, ApiError> {
        if self.study.participant(rater_id).is_ok() || rater_id == SYSTEM_ACTOR || rater_id.trim().is_empty() {
            return self.fail(ErrorCode::Validation, format!("{rater_id:?} cannot act as a rater"));
        }
        Ok(self.evaluations.next_task(self.study.log(), rater_id, dimension))
    }

    pub fn eval_submit(&mut self, task_id: &str, preference: Preference) -> Result<ComparisonRecord, ApiError> {
        let Some(record) = self.evaluations.complete(task_id, preference) else {
            return self.fail(ErrorCode::NotFound, format!("evaluation task {task_id}"));
        };
        let event = InteractionEvent::new(
            self.clock.now(),
            record.rater_id.clone(),
            None,
            None,
            EventPayload::EvaluationSubmitted { record: record.clone() },
        );
        if let Err(e) = self.study.record_external(event) {
            return self.study_err(e);
        }
        Ok(record)
    }

    pub fn now(&self) -> Timestamp {
        self.clock.now()
    }
}
