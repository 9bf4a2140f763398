//! Expressed-empathy scoring on the 0–6 scale: three communication
//! mechanisms (emotional reactions, interpretations, explorations), each
//! scored 0, 1 or 2.

mod lexicon;
mod remote;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::analytics::stats::{self, BootstrapCi};
use crate::textcore::segment_sentences;

pub use lexicon::{tokenize, Lexicons, LEXICON_VERSION};
pub use remote::{FallbackScorer, RemoteScorer, ScoreSource, Scored};

use lexicon::contains_phrase;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EmpathyError {
    #[error("scoring backend unavailable: {0}")]
    BackendUnavailable(String),
    #[error("scoring backend violated its contract: {0}")]
    ContractViolation(String),
    #[error("seeker post must not be empty")]
    EmptySeekerPost,
    #[error("lexicon: {0}")]
    Lexicon(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EmpathyScore {
    emotional_reactions: u8,
    interpretations: u8,
    explorations: u8,
    total: u8,
}

impl EmpathyScore {
    pub const ZERO: Self = Self {
        emotional_reactions: 0,
        interpretations: 0,
        explorations: 0,
        total: 0,
    };

    pub fn new(
        emotional_reactions: u8,
        interpretations: u8,
        explorations: u8,
    ) -> Result<Self, EmpathyError> {
        for (name, v) in [
            ("emotional_reactions", emotional_reactions),
            ("interpretations", interpretations),
            ("explorations", explorations),
        ] {
            if v > 2 {
                return Err(EmpathyError::ContractViolation(format!(
                    "{name} = {v} outside 0..=2"
                )));
            }
        }
        Ok(Self {
            emotional_reactions,
            interpretations,
            explorations,
            total: emotional_reactions + interpretations + explorations,
        })
    }

    pub fn emotional_reactions(&self) -> u8 {
        self.emotional_reactions
    }

    pub fn interpretations(&self) -> u8 {
        self.interpretations
    }

    pub fn explorations(&self) -> u8 {
        self.explorations
    }

    pub fn total(&self) -> u8 {
        self.total
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScoringContext {
    pub seeker_post: String,
    pub response: String,
}

impl ScoringContext {
    pub fn new(seeker_post: impl Into<String>, response: impl Into<String>) -> Result<Self, EmpathyError> {
        let seeker_post = seeker_post.into();
        if seeker_post.trim().is_empty() {
            return Err(EmpathyError::EmptySeekerPost);
        }
        Ok(Self {
            seeker_post,
            response: response.into(),
        })
    }
}

/// Any source of mechanism scores.
pub trait Scorer: Send + Sync {
    fn score(&self, ctx: &ScoringContext) -> Result<EmpathyScore, EmpathyError>;
}

/// Deterministic lexicon-and-frame scorer.
///
/// Per sentence, the strongest level found for each mechanism wins:
/// * emotional reactions: 1 for an emotion term, 2 for an emotion term with an
///   intensifier or a first-person frame ("I feel", "I'm so sorry").
/// * interpretations: 1 for an understanding frame, 2 when that sentence also
///   shares a content word with the seeker post.
/// * explorations: 1 for a question, 2 when the question shares a content
///   word with the seeker post.
#[derive(Debug, Clone, Default)]
pub struct RuleScorer {
    lexicons: Arc<Lexicons>,
}

impl RuleScorer {
    pub fn new(lexicons: Lexicons) -> Self {
        Self {
            lexicons: Arc::new(lexicons),
        }
    }

    pub fn lexicons(&self) -> &Lexicons {
        &self.lexicons
    }

    pub fn score_texts(&self, seeker_post: &str, response: &str) -> EmpathyScore {
        let lex = &*self.lexicons;
        let seeker_words = lex.content_words(seeker_post);
        let (mut er, mut ip, mut ex) = (0u8, 0u8, 0u8);

        for sentence in segment_sentences(response).sentences() {
            let tokens = tokenize(sentence);
            if tokens.is_empty() {
                continue;
            }
            let shares_seeker_word = tokens.iter().any(|t| seeker_words.contains(t));

            let has_emotion = tokens.iter().any(|t| lex.emotion_terms.contains(t));
            let has_intensifier = tokens.iter().any(|t| lex.intensifiers.contains(t));
            let has_emotion_frame = lex.emotion_frames.iter().any(|f| contains_phrase(&tokens, f));
            let sentence_er = if has_emotion_frame || (has_emotion && has_intensifier) {
                2
            } else if has_emotion {
                1
            } else {
                0
            };

            let understands = lex
                .understanding_frames
                .iter()
                .any(|f| contains_phrase(&tokens, f));
            let sentence_ip = match (understands, shares_seeker_word) {
                (true, true) => 2,
                (true, false) => 1,
                _ => 0,
            };

            let question = sentence.contains('?');
            let sentence_ex = match (question, shares_seeker_word) {
                (true, true) => 2,
                (true, false) => 1,
                _ => 0,
            };

            er = er.max(sentence_er);
            ip = ip.max(sentence_ip);
            ex = ex.max(sentence_ex);
        }
        EmpathyScore::new(er, ip, ex).expect("levels are capped at 2")
    }
}

impl Scorer for RuleScorer {
    fn score(&self, ctx: &ScoringContext) -> Result<EmpathyScore, EmpathyError> {
        Ok(self.score_texts(&ctx.seeker_post, &ctx.response))
    }
}

/// Scores with the bundled rule backend.
pub fn score(ctx: &ScoringContext) -> EmpathyScore {
    RuleScorer::default().score_texts(&ctx.seeker_post, &ctx.response)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusScores {
    pub items: Vec<EmpathyScore>,
    /// Mean total; absent for an empty corpus.
    pub mean: Option<f64>,
    pub ci: Option<BootstrapCi>,
}

pub fn score_corpus(scorer: &dyn Scorer, pairs: &[ScoringContext], seed: u64) -> Result<CorpusScores, EmpathyError> {
    let items = pairs
        .iter()
        .map(|ctx| scorer.score(ctx))
        .collect::<Result<Vec<_>, _>>()?;
    let totals: Vec<f64> = items.iter().map(|s| f64::from(s.total())).collect();
    let mean = stats::mean(&totals);
    let ci = if totals.is_empty() {
        None
    } else {
        stats::bootstrap_ci(&totals, 0.95, stats::DEFAULT_BOOTSTRAP_RESAMPLES, seed).ok()
    };
    Ok(CorpusScores { items, mean, ci })
}
