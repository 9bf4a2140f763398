use serde::{Deserialize, Serialize};

use crate::study::{EventPayload, InteractionEvent};
use crate::textcore::{segment_sentences, similarity};

/// Similarity above which a typed sentence counts as a retyped suggestion.
pub const INDIRECT_SIMILARITY: f64 = 0.95;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UsageClass {
    Direct,
    Indirect,
    None,
}

impl UsageClass {
    pub const ALL: [UsageClass; 3] = [UsageClass::Direct, UsageClass::Indirect, UsageClass::None];
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum UsageSkip {
    #[error("feedback was never requested for this post")]
    NotConsulted,
    #[error("no response was submitted for this post")]
    MissingResponse,
}

/// Classifies how feedback was used on one post, given that post's events in
/// log order. An accepted action makes the post Direct. Otherwise the post is
/// Indirect when a sentence that is new relative to the draft at feedback time
/// is more than `threshold` similar to a suggested sentence.
pub fn classify_usage(events: &[&InteractionEvent], threshold: f64) -> Result<UsageClass, UsageSkip> {
    let consulted = events
        .iter()
        .any(|e| matches!(e.payload, EventPayload::FeedbackRequested { .. }));
    if !consulted {
        return Err(UsageSkip::NotConsulted);
    }
    let response = events
        .iter()
        .find_map(|e| match &e.payload {
            EventPayload::ResponseSubmitted { text, .. } => Some(text.as_str()),
            _ => None,
        })
        .ok_or(UsageSkip::MissingResponse)?;
    if events
        .iter()
        .any(|e| matches!(e.payload, EventPayload::ActionAccepted { .. }))
    {
        return Ok(UsageClass::Direct);
    }

    let final_sentences = segment_sentences(response).into_sentences();
    let mut draft_at_feedback = "";
    for e in events {
        match &e.payload {
            EventPayload::DraftSnapshot { text } => draft_at_feedback = text,
            EventPayload::FeedbackShown { suggestions, .. } if !suggestions.is_empty() => {
                let before = segment_sentences(draft_at_feedback);
                let fresh = final_sentences
                    .iter()
                    .filter(|s| !before.sentences().contains(s));
                for sentence in fresh {
                    if suggestions
                        .iter()
                        .any(|a| similarity(&a.text, sentence) > threshold)
                    {
                        return Ok(UsageClass::Indirect);
                    }
                }
            }
            _ => {}
        }
    }
    Ok(UsageClass::None)
}
