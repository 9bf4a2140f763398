use std::collections::HashSet;
use std::path::Path;

use super::RewriterError;
use crate::empathy::tokenize;

const REACTIONS: &str = include_str!("../../data/templates_reactions.txt");
const INTERPRETATIONS: &str = include_str!("../../data/templates_interpretations.txt");
const EXPLORATIONS: &str = include_str!("../../data/templates_explorations.txt");
const DISMISSIVE: &str = include_str!("../../data/dismissive.txt");
const TOPIC_NOUNS: &str = include_str!("../../data/topic_nouns.txt");

const PLACEHOLDERS: &[&str] = &["topic"];

/// Topic phrase used when the seeker post names none of the known topics.
pub const GENERIC_TOPIC: &str = "all of this";

/// A sentence template with `{name}` placeholders.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Template(String);

impl Template {
    pub fn parse(src: &str) -> Result<Self, RewriterError> {
        let mut rest = src;
        while let Some(open) = rest.find('{') {
            let close = rest[open..]
                .find('}')
                .ok_or_else(|| RewriterError::Template(format!("unclosed placeholder in {src:?}")))?;
            let name = &rest[open + 1..open + close];
            if !PLACEHOLDERS.contains(&name) {
                return Err(RewriterError::Template(format!(
                    "unknown placeholder {{{name}}} in {src:?}"
                )));
            }
            rest = &rest[open + close + 1..];
        }
        Ok(Self(src.to_string()))
    }

    pub fn render(&self, topic: &str) -> String {
        self.0.replace("{topic}", topic)
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

/// Template banks and word lists used by the built-in rewriting backend.
#[derive(Debug, Clone)]
pub struct TemplateBank {
    pub reactions: Vec<Template>,
    pub interpretations: Vec<Template>,
    pub explorations: Vec<Template>,
    pub dismissive: Vec<Vec<String>>,
    pub topic_nouns: Vec<String>,
}

fn entries(src: &str) -> impl Iterator<Item = &str> {
    src.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
}

fn templates(src: &str) -> Result<Vec<Template>, RewriterError> {
    let list: Vec<Template> = entries(src).map(Template::parse).collect::<Result<_, _>>()?;
    if list.is_empty() {
        return Err(RewriterError::Template("template bank is empty".into()));
    }
    Ok(list)
}

impl TemplateBank {
    pub fn from_sources(
        reactions: &str,
        interpretations: &str,
        explorations: &str,
        dismissive: &str,
        topic_nouns: &str,
    ) -> Result<Self, RewriterError> {
        Ok(Self {
            reactions: templates(reactions)?,
            interpretations: templates(interpretations)?,
            explorations: templates(explorations)?,
            dismissive: entries(dismissive).map(tokenize).collect(),
            topic_nouns: entries(topic_nouns).map(str::to_lowercase).collect(),
        })
    }

    pub fn bundled() -> Self {
        Self::from_sources(REACTIONS, INTERPRETATIONS, EXPLORATIONS, DISMISSIVE, TOPIC_NOUNS)
            .expect("bundled templates are valid")
    }

    /// Loads banks from `dir`, using the bundled copy for any missing file.
    pub fn load_dir(dir: &Path) -> Result<Self, RewriterError> {
        let read = |name: &str, bundled: &'static str| -> Result<String, RewriterError> {
            let path = dir.join(name);
            if path.exists() {
                std::fs::read_to_string(&path)
                    .map_err(|e| RewriterError::Template(format!("{}: {e}", path.display())))
            } else {
                Ok(bundled.to_string())
            }
        };
        Self::from_sources(
            &read("templates_reactions.txt", REACTIONS)?,
            &read("templates_interpretations.txt", INTERPRETATIONS)?,
            &read("templates_explorations.txt", EXPLORATIONS)?,
            &read("dismissive.txt", DISMISSIVE)?,
            &read("topic_nouns.txt", TOPIC_NOUNS)?,
        )
    }

    /// "your job" for the first known topic noun in the post, in post order.
    pub fn topic_phrase(&self, seeker_post: &str) -> String {
        let known: HashSet<&str> = self.topic_nouns.iter().map(String::as_str).collect();
        tokenize(seeker_post)
            .into_iter()
            .find(|t| known.contains(t.as_str()))
            .map(|noun| format!("your {noun}"))
            .unwrap_or_else(|| GENERIC_TOPIC.to_string())
    }

    pub fn is_dismissive(&self, sentence: &str) -> bool {
        let tokens = tokenize(sentence);
        self.dismissive
            .iter()
            .any(|p| !p.is_empty() && tokens.windows(p.len()).any(|w| w == p.as_slice()))
    }
}
