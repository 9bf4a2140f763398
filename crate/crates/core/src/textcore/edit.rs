use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::segment::{collapse_whitespace, SentenceSeq};
use super::TextError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EditKind {
    Insert,
    Replace,
}

/// One sentence-level suggestion.
///
/// For `Insert` the anchor is the position before which the sentence goes
/// (anchor == draft length appends). For `Replace` it is the index of the
/// replaced sentence. There is deliberately no delete.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EditAction {
    pub kind: EditKind,
    pub anchor: usize,
    pub text: String,
}

impl EditAction {
    pub fn insert(anchor: usize, text: impl Into<String>) -> Self {
        Self {
            kind: EditKind::Insert,
            anchor,
            text: text.into(),
        }
    }

    pub fn replace(anchor: usize, text: impl Into<String>) -> Self {
        Self {
            kind: EditKind::Replace,
            anchor,
            text: text.into(),
        }
    }
}

/// Ordered actions against a draft of `base_length` sentences.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EditScript {
    actions: Vec<EditAction>,
    base_length: usize,
}

impl EditScript {
    pub fn new(actions: Vec<EditAction>, base_length: usize) -> Result<Self, TextError> {
        let mut replaced = HashSet::new();
        for (i, action) in actions.iter().enumerate() {
            if collapse_whitespace(&action.text).is_empty() {
                return Err(TextError::InvalidScript(format!("action {i} has empty text")));
            }
            let limit = match action.kind {
                EditKind::Insert => base_length + 1,
                EditKind::Replace => base_length,
            };
            if action.anchor >= limit {
                return Err(TextError::InvalidScript(format!(
                    "action {i} anchor {} out of range for {} sentences",
                    action.anchor, base_length
                )));
            }
            if action.kind == EditKind::Replace && !replaced.insert(action.anchor) {
                return Err(TextError::InvalidScript(format!(
                    "two replacements target sentence {}",
                    action.anchor
                )));
            }
        }
        Ok(Self {
            actions,
            base_length,
        })
    }

    pub fn empty(base_length: usize) -> Self {
        Self {
            actions: Vec::new(),
            base_length,
        }
    }

    pub fn actions(&self) -> &[EditAction] {
        &self.actions
    }

    pub fn base_length(&self) -> usize {
        self.base_length
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    /// The script restricted to the actions at `indices` (any order, duplicates ignored).
    pub fn subset(&self, indices: &[usize]) -> Result<Self, TextError> {
        let wanted: HashSet<usize> = indices.iter().copied().collect();
        if let Some(bad) = wanted.iter().find(|&&i| i >= self.actions.len()) {
            return Err(TextError::InvalidScript(format!("no action with id {bad}")));
        }
        let actions = self
            .actions
            .iter()
            .enumerate()
            .filter(|(i, _)| wanted.contains(i))
            .map(|(_, a)| a.clone())
            .collect();
        Ok(Self {
            actions,
            base_length: self.base_length,
        })
    }
}

/// Applies replacements at their anchors, then insertions from the highest
/// anchor down so earlier anchors keep their meaning. Inserts sharing an
/// anchor keep script order.
pub fn apply_script(draft: &SentenceSeq, script: &EditScript) -> Result<SentenceSeq, TextError> {
    if script.base_length != draft.len() {
        return Err(TextError::InvalidScript(format!(
            "script targets {} sentences, draft has {}",
            script.base_length,
            draft.len()
        )));
    }
    // Re-validate: scripts can be deserialized without passing through `new`.
    let script = EditScript::new(script.actions.clone(), script.base_length)?;

    let mut sentences: Vec<String> = draft.sentences().to_vec();
    for action in script.actions.iter().filter(|a| a.kind == EditKind::Replace) {
        sentences[action.anchor] = collapse_whitespace(&action.text);
    }

    let mut inserts: Vec<(usize, usize, &EditAction)> = script
        .actions
        .iter()
        .enumerate()
        .filter(|(_, a)| a.kind == EditKind::Insert)
        .map(|(order, a)| (a.anchor, order, a))
        .collect();
    // Descending anchor; within an anchor, later script entries go in first so
    // that the final order matches the script.
    inserts.sort_by(|a, b| b.0.cmp(&a.0).then(b.1.cmp(&a.1)));
    for (anchor, _, action) in inserts {
        sentences.insert(anchor, collapse_whitespace(&action.text));
    }

    Ok(SentenceSeq::from_sentences(sentences))
}
