//! Empathic-rewriting feedback as Insert/Replace bundles.
//!
//! A backend proposes a rewritten response, alignment turns it into an edit
//! script, and the candidate is only surfaced if every suggested sentence is
//! safe and the rewritten response scores strictly higher than the draft.
//! Rejected candidates are resampled up to a retry budget.

mod remote;
mod templates;

use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::empathy::{EmpathyScore, RuleScorer};
use crate::safety::RuleHandle;
use crate::textcore::{
    align_with, apply_script, segment_sentences, AlignConfig, EditScript, SentenceSeq, TextError,
    TrigramCosine,
};

pub use remote::{RemoteRewriter, RewriteBackend};
pub use templates::{Template, TemplateBank, GENERIC_TOPIC};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RewriterError {
    #[error("no improving candidate after {attempts} attempts")]
    NoImprovement {
        attempts: usize,
        notes: Vec<GenerationNote>,
    },
    #[error("invalid feedback request: {0}")]
    InvalidRequest(String),
    #[error("rewriting backend unavailable: {0}")]
    BackendUnavailable(String),
    #[error("template: {0}")]
    Template(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RewriterConfig {
    /// Drafts scoring at least this much get positive feedback instead of edits.
    pub positive_threshold: u8,
    /// Extra candidates tried after the first one is rejected.
    pub retry_budget: usize,
    pub seed: u64,
    pub align: AlignConfig,
}

impl Default for RewriterConfig {
    fn default() -> Self {
        Self {
            positive_threshold: 5,
            retry_budget: 8,
            seed: 0,
            align: AlignConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeedbackRequest {
    pub seeker_post: String,
    pub draft: String,
    pub candidate_cursor: usize,
    pub participant_id: String,
    pub session_id: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BundleKind {
    Suggestions,
    Positive,
}

pub const SUGGESTIONS_MESSAGE: &str = "Here are some ways to make your response more empathic.";
pub const POSITIVE_MESSAGE: &str = "Your response already shows a lot of empathy. Nice work!";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeedbackBundle {
    pub script: EditScript,
    pub preview: String,
    pub candidate_id: usize,
    pub kind: BundleKind,
    pub message: String,
}

impl FeedbackBundle {
    /// A no-edit bundle; the preview is the draft as segmented.
    pub fn no_edits(draft: &str, message: impl Into<String>) -> Self {
        let seq = segment_sentences(draft);
        Self {
            script: EditScript::empty(seq.len()),
            preview: seq.joined(),
            candidate_id: 0,
            kind: BundleKind::Positive,
            message: message.into(),
        }
    }

    /// Preview text for the accepted subset of actions.
    pub fn preview_for(&self, draft: &str, accepted: &[usize]) -> Result<String, TextError> {
        let subset = self.script.subset(accepted)?;
        Ok(apply_script(&segment_sentences(draft), &subset)?.joined())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectReason {
    Unsafe,
    NoImprovement,
    NotRepresentable,
    NoChange,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "note", rename_all = "snake_case")]
pub enum GenerationNote {
    Resampled {
        candidate_id: usize,
        reason: RejectReason,
    },
    /// The cursor ran past the candidate bank and wrapped around.
    Exhausted { bank_size: usize, cursor: usize },
    RemoteFallback { reason: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Generated {
    pub bundle: FeedbackBundle,
    pub draft_score: EmpathyScore,
    pub preview_score: EmpathyScore,
    pub notes: Vec<GenerationNote>,
}

/// Which parts the built-in backend adds for a given draft.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CandidatePlan {
    /// Index of a dismissive sentence to be replaced by the reaction.
    pub replace_at: Option<usize>,
    pub reaction: bool,
    pub interpretation: bool,
    pub exploration: bool,
}

impl CandidatePlan {
    fn dims(&self, bank: &TemplateBank) -> Vec<usize> {
        let mut dims = Vec::new();
        if self.reaction {
            dims.push(bank.reactions.len());
        }
        if self.interpretation {
            dims.push(bank.interpretations.len());
        }
        if self.exploration {
            dims.push(bank.explorations.len());
        }
        dims
    }

    /// Size of the cartesian product of the banks in use.
    pub fn bank_size(&self, bank: &TemplateBank) -> usize {
        let dims = self.dims(bank);
        if dims.is_empty() {
            0
        } else {
            dims.iter().product()
        }
    }
}

pub struct Rewriter {
    config: RewriterConfig,
    bank: Arc<TemplateBank>,
    scorer: RuleScorer,
    rules: RuleHandle,
    remote: Option<Box<dyn RewriteBackend>>,
}

impl std::fmt::Debug for Rewriter {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Rewriter")
            .field("config", &self.config)
            .field("remote", &self.remote.is_some())
            .finish()
    }
}

impl Rewriter {
    pub fn new(config: RewriterConfig, bank: TemplateBank, scorer: RuleScorer, rules: RuleHandle) -> Self {
        Self {
            config,
            bank: Arc::new(bank),
            scorer,
            rules,
            remote: None,
        }
    }

    pub fn with_remote(mut self, remote: Box<dyn RewriteBackend>) -> Self {
        self.remote = Some(remote);
        self
    }

    pub fn config(&self) -> &RewriterConfig {
        &self.config
    }

    pub fn bank(&self) -> &TemplateBank {
        &self.bank
    }

    pub fn score(&self, seeker_post: &str, response: &str) -> EmpathyScore {
        self.scorer.score_texts(seeker_post, response)
    }

    pub fn generate(&self, req: &FeedbackRequest) -> Result<Generated, RewriterError> {
        if req.seeker_post.trim().is_empty() {
            return Err(RewriterError::InvalidRequest("empty seeker post".into()));
        }
        let draft_seq = segment_sentences(&req.draft);
        let draft_score = self.score(&req.seeker_post, &req.draft);
        if draft_score.total() >= self.config.positive_threshold {
            return Ok(Generated {
                bundle: FeedbackBundle::no_edits(&req.draft, POSITIVE_MESSAGE),
                draft_score,
                preview_score: draft_score,
                notes: Vec::new(),
            });
        }
        match &self.remote {
            Some(remote) => self.generate_remote(remote.as_ref(), req, &draft_seq, draft_score),
            None => self.generate_builtin(req, &draft_seq, draft_score, Vec::new()),
        }
    }

    /// Same as `generate`; the cursor in `req` selects the candidate.
    pub fn reload(&self, req: &FeedbackRequest) -> Result<Generated, RewriterError> {
        self.generate(req)
    }

    pub fn plan(&self, draft: &SentenceSeq, draft_score: EmpathyScore) -> CandidatePlan {
        let replace_at = draft
            .sentences()
            .iter()
            .position(|s| self.bank.is_dismissive(s));
        CandidatePlan {
            replace_at,
            reaction: replace_at.is_some() || draft_score.emotional_reactions() < 2,
            interpretation: draft_score.interpretations() < 2,
            exploration: draft_score.explorations() < 2,
        }
    }

    /// Seeded permutation of the candidate bank for this context.
    pub fn candidate_order(&self, req: &FeedbackRequest, bank_size: usize) -> Vec<usize> {
        let mut order: Vec<usize> = (0..bank_size).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(context_seed(
            self.config.seed,
            &req.seeker_post,
            &req.draft,
        ));
        order.shuffle(&mut rng);
        order
    }

    /// The rewritten sentence list for bank entry `index`.
    pub fn build_candidate(
        &self,
        seeker_post: &str,
        draft: &SentenceSeq,
        plan: &CandidatePlan,
        index: usize,
    ) -> Vec<String> {
        let bank = &self.bank;
        let topic = bank.topic_phrase(seeker_post);
        let dims = plan.dims(bank);
        // Mixed-radix decode, first bank most significant.
        let mut digits = vec![0; dims.len()];
        let mut rest = index;
        for (d, size) in digits.iter_mut().zip(&dims).rev() {
            *d = rest % size;
            rest /= size;
        }
        let mut digits = digits.into_iter();
        let reaction = plan
            .reaction
            .then(|| bank.reactions[digits.next().unwrap()].render(&topic));
        let interpretation = plan
            .interpretation
            .then(|| bank.interpretations[digits.next().unwrap()].render(&topic));
        let exploration = plan
            .exploration
            .then(|| bank.explorations[digits.next().unwrap()].render(&topic));

        let mut out: Vec<String> = Vec::with_capacity(draft.len() + 3);
        match plan.replace_at {
            Some(at) => {
                for (i, s) in draft.sentences().iter().enumerate() {
                    if i == at {
                        out.extend(reaction.clone());
                        out.extend(interpretation.clone());
                    } else {
                        out.push(s.clone());
                    }
                }
            }
            None => {
                out.extend(reaction);
                out.extend(interpretation);
                out.extend(draft.sentences().iter().cloned());
            }
        }
        out.extend(exploration);
        out
    }

    fn generate_builtin(
        &self,
        req: &FeedbackRequest,
        draft_seq: &SentenceSeq,
        draft_score: EmpathyScore,
        mut notes: Vec<GenerationNote>,
    ) -> Result<Generated, RewriterError> {
        let plan = self.plan(draft_seq, draft_score);
        let bank_size = plan.bank_size(&self.bank);
        let attempts = (self.config.retry_budget + 1).min(bank_size);
        if bank_size == 0 {
            return Err(RewriterError::NoImprovement { attempts: 0, notes });
        }
        if req.candidate_cursor >= bank_size {
            notes.push(GenerationNote::Exhausted {
                bank_size,
                cursor: req.candidate_cursor,
            });
        }
        let order = self.candidate_order(req, bank_size);
        for attempt in 0..attempts {
            let position = (req.candidate_cursor + attempt) % bank_size;
            let sentences = self.build_candidate(&req.seeker_post, draft_seq, &plan, order[position]);
            let rewritten = SentenceSeq::from_sentences(sentences);
            match self.check_candidate(req, draft_seq, draft_score, &rewritten, position) {
                Ok(mut generated) => {
                    notes.append(&mut generated.notes);
                    generated.notes = notes;
                    return Ok(generated);
                }
                Err(reason) => notes.push(GenerationNote::Resampled {
                    candidate_id: position,
                    reason,
                }),
            }
        }
        Err(RewriterError::NoImprovement { attempts, notes })
    }

    fn generate_remote(
        &self,
        remote: &dyn RewriteBackend,
        req: &FeedbackRequest,
        draft_seq: &SentenceSeq,
        draft_score: EmpathyScore,
    ) -> Result<Generated, RewriterError> {
        let mut notes = Vec::new();
        let attempts = self.config.retry_budget + 1;
        for attempt in 0..attempts {
            let candidate_id = req.candidate_cursor + attempt;
            let seed = context_seed(self.config.seed ^ candidate_id as u64, &req.seeker_post, &req.draft);
            let text = match remote.rewrite(&req.seeker_post, &req.draft, seed) {
                Ok(text) => text,
                Err(err) => {
                    tracing::warn!(%err, "remote rewriter failed, using built-in backend");
                    notes.push(GenerationNote::RemoteFallback {
                        reason: err.to_string(),
                    });
                    return self.generate_builtin(req, draft_seq, draft_score, notes);
                }
            };
            let rewritten = segment_sentences(&text);
            match self.check_candidate(req, draft_seq, draft_score, &rewritten, candidate_id) {
                Ok(mut generated) => {
                    notes.append(&mut generated.notes);
                    generated.notes = notes;
                    return Ok(generated);
                }
                Err(reason) => notes.push(GenerationNote::Resampled {
                    candidate_id,
                    reason,
                }),
            }
        }
        Err(RewriterError::NoImprovement { attempts, notes })
    }

    fn check_candidate(
        &self,
        req: &FeedbackRequest,
        draft_seq: &SentenceSeq,
        draft_score: EmpathyScore,
        rewritten: &SentenceSeq,
        candidate_id: usize,
    ) -> Result<Generated, RejectReason> {
        let script = align_with(draft_seq, rewritten, &TrigramCosine, &self.config.align).map_err(|_| RejectReason::NotRepresentable)?;
        if script.is_empty() {
            return Err(RejectReason::NoChange);
        }
        let rules = self.rules.current();
        if script.actions().iter().any(|a| !rules.is_safe(&a.text)) {
            return Err(RejectReason::Unsafe);
        }
        let preview = apply_script(draft_seq, &script)
            .map_err(|_| RejectReason::NotRepresentable)?
            .joined();
        let preview_score = self.score(&req.seeker_post, &preview);
        if preview_score.total() <= draft_score.total() {
            return Err(RejectReason::NoImprovement);
        }
        Ok(Generated {
            bundle: FeedbackBundle {
                script,
                preview,
                candidate_id,
                kind: BundleKind::Suggestions,
                message: SUGGESTIONS_MESSAGE.to_string(),
            },
            draft_score,
            preview_score,
            notes: Vec::new(),
        })
    }
}

fn context_seed(seed: u64, seeker_post: &str, draft: &str) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    hasher.update(seeker_post.as_bytes());
    hasher.update([0u8]);
    hasher.update(draft.as_bytes());
    let digest = hasher.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("digest has 32 bytes"))
}
