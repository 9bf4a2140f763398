//! Randomized-trial engine: enrollment, arm and post-subset assignment, the
//! four-phase workflow, surveys, dropout handling and the interaction log.

mod engine;
mod events;
mod forms;
mod power;
pub mod simulate;
mod types;

pub use engine::{PhasePayload, Study, StudyConfig, POSTS_PER_SUBSET};
pub use events::{
    EventLog, EventPayload, FeedbackMode, InteractionEvent, SurveyKind, EVENT_SCHEMA_VERSION,
    SYSTEM_ACTOR,
};
pub use forms::{FieldKind, FormField, StudyForms, SurveyForm, TrainingMaterial};
pub use power::power_analysis;
pub use types::{Answer, Answers, Participant, Phase, Post, PostPool, PostSubset, StudyArm};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum StudyError {
    #[error("phase violation: {0}")]
    PhaseViolation(String),
    #[error("not found: {0}")]
    NotFound(String),
    #[error("invalid input: {0}")]
    Validation(String),
    #[error("log invariant violated: {0}")]
    Invariant(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("io: {0}")]
    Io(String),
}
