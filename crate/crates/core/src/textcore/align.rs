use serde::{Deserialize, Serialize};

use super::edit::{EditAction, EditScript};
use super::segment::SentenceSeq;
use super::similarity::{SimilarityBackend, TrigramCosine};
use super::TextError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlignConfig {
    /// Cost of a rewritten sentence with no original counterpart.
    pub gap_cost: f64,
    /// Aligned pairs at or above this similarity are kept as-is.
    pub keep_threshold: f64,
}

impl Default for AlignConfig {
    fn default() -> Self {
        Self {
            gap_cost: 0.7,
            keep_threshold: 0.98,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Step {
    Pair,
    Insert,
}

/// Converts a rewriting into Insert/Replace actions against the original.
///
/// Global alignment where each original sentence pairs with exactly one
/// rewritten sentence (cost `1 - similarity`) and extra rewritten sentences
/// are insertions (cost `gap_cost`). Original sentences cannot be dropped, so
/// a rewriting shorter than the original is not representable.
pub fn align_to_script(
    original: &SentenceSeq,
    rewritten: &SentenceSeq,
) -> Result<EditScript, TextError> {
    align_with(original, rewritten, &TrigramCosine, &AlignConfig::default())
}

pub fn align_with(
    original: &SentenceSeq,
    rewritten: &SentenceSeq,
    backend: &dyn SimilarityBackend,
    config: &AlignConfig,
) -> Result<EditScript, TextError> {
    let n = original.len();
    let m = rewritten.len();
    if m < n {
        return Err(TextError::NotRepresentable {
            original: n,
            rewritten: m,
        });
    }

    let sim: Vec<Vec<f64>> = original
        .sentences()
        .iter()
        .map(|a| {
            rewritten
                .sentences()
                .iter()
                .map(|b| backend.similarity(a, b))
                .collect()
        })
        .collect();

    // cost[i][j]: first i originals aligned against first j rewritten, i <= j.
    let mut cost = vec![vec![f64::INFINITY; m + 1]; n + 1];
    let mut back = vec![vec![Step::Insert; m + 1]; n + 1];
    cost[0][0] = 0.0;
    for j in 1..=m {
        cost[0][j] = cost[0][j - 1] + config.gap_cost;
    }
    for i in 1..=n {
        for j in i..=m {
            let pair = cost[i - 1][j - 1] + (1.0 - sim[i - 1][j - 1]);
            let insert = if j > i {
                cost[i][j - 1] + config.gap_cost
            } else {
                f64::INFINITY
            };
            // Ties prefer pairing.
            if pair <= insert {
                cost[i][j] = pair;
                back[i][j] = Step::Pair;
            } else {
                cost[i][j] = insert;
                back[i][j] = Step::Insert;
            }
        }
    }

    let mut steps = Vec::with_capacity(m);
    let (mut i, mut j) = (n, m);
    while j > 0 {
        let step = if i == 0 { Step::Insert } else { back[i][j] };
        steps.push((step, i, j));
        match step {
            Step::Pair => {
                i -= 1;
                j -= 1;
            }
            Step::Insert => j -= 1,
        }
    }
    steps.reverse();

    let mut actions = Vec::new();
    for (step, i, j) in steps {
        let text = &rewritten.sentences()[j - 1];
        match step {
            Step::Pair => {
                if sim[i - 1][j - 1] < config.keep_threshold {
                    actions.push(EditAction::replace(i - 1, text.clone()));
                }
            }
            // `i` originals consumed so far: the sentence goes before original i.
            Step::Insert => actions.push(EditAction::insert(i, text.clone())),
        }
    }
    EditScript::new(actions, n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::textcore::{apply_script, segment_sentences, EditKind};

    fn seq(items: &[&str]) -> SentenceSeq {
        SentenceSeq::from_sentences(items.iter().copied())
    }

    #[test]
    fn worked_example_aligns_as_replace_then_append() {
        let original = seq(&["Don't worry!", "I'm there for you."]);
        let rewritten = seq(&[
            "It must be a real struggle!",
            "I'm there for you.",
            "Have you tried talking to your boss?",
        ]);
        let script = align_to_script(&original, &rewritten).unwrap();
        let shape: Vec<(EditKind, usize)> =
            script.actions().iter().map(|a| (a.kind, a.anchor)).collect();
        assert_eq!(shape, vec![(EditKind::Replace, 0), (EditKind::Insert, 2)]);
        assert_eq!(apply_script(&original, &script).unwrap(), rewritten);
    }

    #[test]
    fn identical_sequences_give_empty_script() {
        let s = seq(&["One.", "Two!", "Three?"]);
        assert!(align_to_script(&s, &s).unwrap().is_empty());
    }

    // The 2x1 table has no path that consumes both originals, so the only
    // alignments drop a sentence.
    #[test]
    fn dropped_sentence_is_not_representable() {
        let original = segment_sentences("A. B.");
        assert_eq!(original.len(), 2);
        let rewritten = seq(&["B."]);
        assert!(matches!(
            align_to_script(&original, &rewritten),
            Err(TextError::NotRepresentable { original: 2, rewritten: 1 })
        ));
    }

    #[test]
    fn empty_original_becomes_all_inserts() {
        let original = segment_sentences("");
        let rewritten = seq(&["I'm sorry.", "What happened?"]);
        let script = align_to_script(&original, &rewritten).unwrap();
        assert!(script.actions().iter().all(|a| a.kind == EditKind::Insert && a.anchor == 0));
        assert_eq!(apply_script(&original, &script).unwrap(), rewritten);
    }

    #[test]
    fn leading_insert_anchors_before_first_sentence() {
        let original = seq(&["I'm there for you."]);
        let rewritten = seq(&["That sounds so hard.", "I'm there for you."]);
        let script = align_to_script(&original, &rewritten).unwrap();
        assert_eq!(script.actions(), &[EditAction::insert(0, "That sounds so hard.")]);
    }

    #[test]
    fn near_identical_pair_is_kept() {
        let original = seq(&["I really hope that things get better for you at work soon."]);
        let rewritten = seq(&["I really hope that things get better for you at work soon!"]);
        let s = TrigramCosine.similarity(&original.sentences()[0], &rewritten.sentences()[0]);
        assert!(s >= 0.98, "{s}");
        assert!(align_to_script(&original, &rewritten).unwrap().is_empty());
    }
}
