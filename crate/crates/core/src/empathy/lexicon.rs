use std::collections::HashSet;
use std::path::Path;

use super::EmpathyError;

/// Word lists and phrase frames driving the rule scorer. Phrases are stored
/// as token sequences.
#[derive(Debug, Clone)]
pub struct Lexicons {
    pub stopwords: HashSet<String>,
    pub emotion_terms: HashSet<String>,
    pub intensifiers: HashSet<String>,
    pub emotion_frames: Vec<Vec<String>>,
    pub understanding_frames: Vec<Vec<String>>,
}

const STOPWORDS: &str = include_str!("../../data/stopwords.txt");
const EMOTION_LEXICON: &str = include_str!("../../data/emotion_lexicon.txt");
const INTENSIFIERS: &str = include_str!("../../data/intensifiers.txt");
const EMOTION_FRAMES: &str = include_str!("../../data/emotion_frames.txt");
const UNDERSTANDING_FRAMES: &str = include_str!("../../data/understanding_frames.txt");

/// Bumped whenever a bundled list changes.
pub const LEXICON_VERSION: &str = "lexicon-2026.1";

impl Default for Lexicons {
    fn default() -> Self {
        Self::from_sources(
            STOPWORDS,
            EMOTION_LEXICON,
            INTENSIFIERS,
            EMOTION_FRAMES,
            UNDERSTANDING_FRAMES,
        )
    }
}

impl Lexicons {
    fn from_sources(
        stopwords: &str,
        emotion: &str,
        intensifiers: &str,
        emotion_frames: &str,
        understanding_frames: &str,
    ) -> Self {
        Self {
            stopwords: lines(stopwords).collect(),
            emotion_terms: lines(emotion).collect(),
            intensifiers: lines(intensifiers).collect(),
            emotion_frames: lines(emotion_frames).map(|l| tokenize(&l)).collect(),
            understanding_frames: lines(understanding_frames).map(|l| tokenize(&l)).collect(),
        }
    }

    /// Loads lists from `dir`, using the bundled copy for any missing file.
    pub fn load_dir(dir: &Path) -> Result<Self, EmpathyError> {
        let read = |name: &str, bundled: &'static str| -> Result<String, EmpathyError> {
            let path = dir.join(name);
            if path.exists() {
                std::fs::read_to_string(&path)
                    .map_err(|e| EmpathyError::Lexicon(format!("{}: {e}", path.display())))
            } else {
                Ok(bundled.to_string())
            }
        };
        Ok(Self::from_sources(
            &read("stopwords.txt", STOPWORDS)?,
            &read("emotion_lexicon.txt", EMOTION_LEXICON)?,
            &read("intensifiers.txt", INTENSIFIERS)?,
            &read("emotion_frames.txt", EMOTION_FRAMES)?,
            &read("understanding_frames.txt", UNDERSTANDING_FRAMES)?,
        ))
    }

    /// Non-stopword tokens of at least three characters.
    pub fn content_words(&self, text: &str) -> HashSet<String> {
        tokenize(text)
            .into_iter()
            .filter(|t| t.chars().count() >= 3 && !self.stopwords.contains(t))
            .collect()
    }
}

fn lines(src: &str) -> impl Iterator<Item = String> + '_ {
    src.lines()
        .map(|l| l.trim())
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| l.to_lowercase())
}

/// Lowercased word tokens; apostrophes inside words are kept.
pub fn tokenize(text: &str) -> Vec<String> {
    text.to_lowercase()
        .replace(['\u{2019}', '\u{2018}'], "'")
        .split(|c: char| !(c.is_alphanumeric() || c == '\''))
        .map(|t| t.trim_matches('\''))
        .filter(|t| !t.is_empty())
        .map(str::to_string)
        .collect()
}

pub(crate) fn contains_phrase(tokens: &[String], phrase: &[String]) -> bool {
    !phrase.is_empty() && tokens.windows(phrase.len()).any(|w| w == phrase)
}
