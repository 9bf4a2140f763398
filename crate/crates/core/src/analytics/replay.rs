use std::collections::BTreeMap;

use super::preferences::ComparisonRecord;
use crate::safety::FlagTarget;
use crate::study::{Answers, EventLog, EventPayload, FeedbackMode, InteractionEvent, Phase, StudyArm, SurveyKind};

/// Participant state reconstructed from the log alone.
#[derive(Debug, Clone)]
pub struct ParticipantView<'a> {
    pub id: String,
    pub arm: StudyArm,
    pub post_subset_id: usize,
    pub phase: Phase,
    pub demographics: Answers,
    pub pre_survey: Answers,
    pub post_survey: Answers,
    /// Response-scoped events keyed by post index, in log order.
    pub posts: BTreeMap<usize, Vec<&'a InteractionEvent>>,
}

impl ParticipantView<'_> {
    pub fn is_complete(&self) -> bool {
        self.phase == Phase::Complete
    }

    /// (post index, post id, seeker post, response text) for every submitted response.
    pub fn responses(&self) -> Vec<(usize, &str, &str, &str)> {
        self.posts
            .iter()
            .filter_map(|(&i, events)| {
                events.iter().find_map(|e| match &e.payload {
                    EventPayload::ResponseSubmitted {
                        post_id,
                        seeker_post,
                        text,
                    } => Some((i, post_id.as_str(), seeker_post.as_str(), text.as_str())),
                    _ => None,
                })
            })
            .collect()
    }

    /// Survey answer used for stratification: pre-survey first, then demographics.
    pub fn label(&self, key: &str) -> Option<String> {
        self.pre_survey
            .get(key)
            .or_else(|| self.demographics.get(key))
            .map(|a| match a {
                crate::study::Answer::Text(t) => t.clone(),
                crate::study::Answer::Level(l) => l.to_string(),
            })
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct FlagCounts {
    pub post_flags: usize,
    pub feedback_flags: usize,
    pub posts_shown: usize,
    pub feedback_requests: usize,
}

#[derive(Debug, Clone, Default)]
pub struct LogView<'a> {
    pub participants: BTreeMap<String, ParticipantView<'a>>,
    pub evaluations: Vec<ComparisonRecord>,
    pub flags: FlagCounts,
    pub escalations: usize,
    pub scorer_fallbacks: usize,
    pub exhaustions: usize,
}

impl<'a> LogView<'a> {
    pub fn build(log: &'a EventLog) -> Self {
        let mut view = LogView::default();
        for e in log.events() {
            match &e.payload {
                EventPayload::Enrolled {
                    arm,
                    post_subset_id,
                    demographics,
                } => {
                    view.participants.insert(
                        e.participant_id.clone(),
                        ParticipantView {
                            id: e.participant_id.clone(),
                            arm: *arm,
                            post_subset_id: *post_subset_id,
                            phase: Phase::PreSurvey,
                            demographics: demographics.clone(),
                            pre_survey: Answers::new(),
                            post_survey: Answers::new(),
                            posts: BTreeMap::new(),
                        },
                    );
                }
                EventPayload::EvaluationSubmitted { record } => view.evaluations.push(record.clone()),
                EventPayload::Escalated { .. } => view.escalations += 1,
                EventPayload::ScorerFallback { .. } => view.scorer_fallbacks += 1,
                EventPayload::Exhaustion { .. } => view.exhaustions += 1,
                EventPayload::FlagRaised { target, .. } => match target {
                    FlagTarget::SeekerPost => view.flags.post_flags += 1,
                    FlagTarget::Feedback => view.flags.feedback_flags += 1,
                },
                EventPayload::PromptShown { .. } => view.flags.posts_shown += 1,
                EventPayload::FeedbackRequested { mode, .. } => {
                    if *mode == FeedbackMode::Rewriting {
                        view.flags.feedback_requests += 1;
                    }
                }
                _ => {}
            }
            let Some(p) = view.participants.get_mut(&e.participant_id) else {
                continue;
            };
            match &e.payload {
                EventPayload::PhaseAdvanced { to, .. } => p.phase = *to,
                EventPayload::SurveySubmitted { survey, answers } => match survey {
                    SurveyKind::Pre => p.pre_survey = answers.clone(),
                    SurveyKind::Post => p.post_survey = answers.clone(),
                },
                payload if payload.is_response_scoped() => {
                    if let Some(i) = e.post_index {
                        p.posts.entry(i).or_default().push(e);
                    }
                }
                _ => {}
            }
        }
        view
    }

    /// Participants who finished the study; dropouts and unfinished
    /// participants never reach any analysis.
    pub fn completed(&self) -> impl Iterator<Item = &ParticipantView<'a>> {
        self.participants.values().filter(|p| p.is_complete())
    }

    pub fn completed_in(&self, arm: StudyArm) -> impl Iterator<Item = &ParticipantView<'a>> {
        self.completed().filter(move |p| p.arm == arm)
    }
}
