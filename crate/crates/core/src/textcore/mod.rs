//! Sentence segmentation, the Insert/Replace edit model, sentence alignment,
//! normalization and similarity. Everything here is pure.

mod align;
mod edit;
mod normalize;
mod segment;
mod similarity;

pub use align::{align_to_script, align_with, AlignConfig};
pub use edit::{apply_script, EditAction, EditKind, EditScript};
pub use normalize::{normalize, Normalized, Variant};
pub use segment::{segment_sentences, SentenceSeq};
pub use similarity::{similarity, SimilarityBackend, TrigramCosine};


#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TextError {
    #[error("invalid edit script: {0}")]
    InvalidScript(String),
    #[error("rewriting drops original sentences ({original} -> {rewritten}); only insert and replace are supported")]
    NotRepresentable { original: usize, rewritten: usize },
}
