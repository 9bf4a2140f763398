use serde::{Deserialize, Serialize};

/// Tokens ending in a period that never close a sentence. Compared lowercased.
const ABBREVIATIONS: &[&str] = &[
    "dr.", "mr.", "mrs.", "ms.", "prof.", "sr.", "jr.", "st.", "vs.", "etc.", "e.g.", "i.e.",
    "a.m.", "p.m.", "approx.", "no.", "mt.", "u.s.",
];

const CLOSERS: &[char] = &['"', '\'', ')', ']', '\u{201d}', '\u{2019}'];

/// A draft split into sentences, the atomic unit of every edit action.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SentenceSeq {
    sentences: Vec<String>,
    raw: String,
}

impl SentenceSeq {
    /// Builds a sequence from already-split sentences. Blank entries are dropped
    /// and inner whitespace is collapsed.
    pub fn from_sentences<I, S>(sentences: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let sentences: Vec<String> = sentences
            .into_iter()
            .map(|s| collapse_whitespace(s.as_ref()))
            .filter(|s| !s.is_empty())
            .collect();
        let raw = sentences.join(" ");
        Self { sentences, raw }
    }

    pub fn sentences(&self) -> &[String] {
        &self.sentences
    }

    pub fn raw(&self) -> &str {
        &self.raw
    }

    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }

    pub fn get(&self, index: usize) -> Option<&str> {
        self.sentences.get(index).map(String::as_str)
    }

    /// Sentences re-joined with single spaces.
    pub fn joined(&self) -> String {
        self.sentences.join(" ")
    }

    pub fn into_sentences(self) -> Vec<String> {
        self.sentences
    }
}

pub(crate) fn collapse_whitespace(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn is_terminal(c: char) -> bool {
    matches!(c, '.' | '!' | '?')
}

/// Splits free text on `.`, `!` or `?` runs followed by whitespace or end of
/// input. A period closing a known abbreviation does not split. Trailing text
/// without terminal punctuation becomes the last sentence.
pub fn segment_sentences(text: &str) -> SentenceSeq {
    let chars: Vec<char> = text.chars().collect();
    let mut sentences = Vec::new();
    let mut start = 0;
    let mut i = 0;

    while i < chars.len() {
        if !is_terminal(chars[i]) {
            i += 1;
            continue;
        }
        let mut end = i;
        while end + 1 < chars.len() && is_terminal(chars[end + 1]) {
            end += 1;
        }
        while end + 1 < chars.len() && CLOSERS.contains(&chars[end + 1]) {
            end += 1;
        }
        let at_boundary = end + 1 == chars.len() || chars[end + 1].is_whitespace();
        if at_boundary && !ends_with_abbreviation(&chars[start..=end]) {
            let sentence: String = chars[start..=end].iter().collect();
            let sentence = collapse_whitespace(&sentence);
            if !sentence.is_empty() {
                sentences.push(sentence);
            }
            start = end + 1;
        }
        i = end + 1;
    }

    let tail: String = chars[start.min(chars.len())..].iter().collect();
    let tail = collapse_whitespace(&tail);
    if !tail.is_empty() {
        sentences.push(tail);
    }

    SentenceSeq {
        sentences,
        raw: text.to_string(),
    }
}

fn ends_with_abbreviation(span: &[char]) -> bool {
    // Only a single trailing period can belong to an abbreviation.
    let text: String = span.iter().collect();
    let trimmed = text.trim_end_matches(CLOSERS);
    if !trimmed.ends_with('.') || trimmed.ends_with("..") {
        return false;
    }
    let last_token = trimmed
        .rsplit(char::is_whitespace)
        .next()
        .unwrap_or("")
        .trim_start_matches(['(', '"', '\'', '[', '\u{201c}', '\u{2018}'])
        .to_lowercase();
    ABBREVIATIONS.contains(&last_token.as_str())
}
