//! Crisis-content filtering for seeker posts and generated feedback.
//!
//! Rules are regular expressions evaluated against every normalization
//! variant of a text, so spacing tricks such as "c u t" are caught through
//! the fused variant.

mod gate;

use std::path::Path;
use std::sync::{Arc, RwLock};

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::clock::Timestamp;
use crate::textcore::{normalize, Variant};

pub use gate::{EscalationRecord, GateDecision, PostGate};

const BUNDLED_RULES: &str = include_str!("../../data/safety_rules.tsv");

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SafetyError {
    #[error("rule file line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("rule {id} does not compile: {message}")]
    Compile { id: String, message: String },
    #[error("rule set is empty")]
    Empty,
    #[error("reading rules: {0}")]
    Io(String),
    #[error("unknown flag target {kind:?} {id}")]
    UnknownTarget { kind: FlagTarget, id: String },
}

#[derive(Debug, Clone)]
pub struct SafetyRule {
    pub id: String,
    pub pattern: String,
    /// True when the pattern was rewritten to match a single word at word boundaries.
    pub word_bounded: bool,
    regex: Regex,
}

impl SafetyRule {
    pub fn new(id: impl Into<String>, pattern: impl Into<String>) -> Result<Self, SafetyError> {
        let id = id.into();
        let pattern = pattern.into();
        let (source, word_bounded) = match single_word_core(&pattern) {
            Some(word) => (format!(r"(?i)\b({})\b", regex::escape(word)), true),
            None => (format!("(?i){pattern}"), false),
        };
        let regex = Regex::new(&source).map_err(|e| SafetyError::Compile {
            id: id.clone(),
            message: e.to_string(),
        })?;
        Ok(Self {
            id,
            pattern,
            word_bounded,
            regex,
        })
    }

    /// The matched text: the first capture group when present, else the whole match.
    fn find<'t>(&self, text: &'t str) -> Option<&'t str> {
        let caps = self.regex.captures(text)?;
        caps.get(1).or_else(|| caps.get(0)).map(|m| m.as_str())
    }
}

/// `.*(cut).*`, `(cut)` and `cut` all have the single-word core `cut`.
fn single_word_core(pattern: &str) -> Option<&str> {
    let mut core = pattern.trim();
    core = core.strip_prefix(".*").unwrap_or(core);
    core = core.strip_suffix(".*").unwrap_or(core);
    if let Some(inner) = core.strip_prefix('(').and_then(|c| c.strip_suffix(')')) {
        core = inner;
    }
    (!core.is_empty() && core.chars().all(|c| c.is_ascii_alphabetic())).then_some(core)
}

#[derive(Debug, Clone)]
pub struct SafetyRuleSet {
    version: String,
    rules: Vec<SafetyRule>,
}

impl SafetyRuleSet {
    pub fn new(version: impl Into<String>, rules: Vec<SafetyRule>) -> Result<Self, SafetyError> {
        if rules.is_empty() {
            return Err(SafetyError::Empty);
        }
        Ok(Self {
            version: version.into(),
            rules,
        })
    }

    /// Parses `id<TAB>pattern` lines. `#` lines are comments; a
    /// `# version: X` comment names the set.
    pub fn parse(src: &str) -> Result<Self, SafetyError> {
        let mut version = None;
        let mut rules = Vec::new();
        for (i, raw) in src.lines().enumerate() {
            let line = raw.trim_end_matches('\r');
            if line.trim().is_empty() {
                continue;
            }
            if let Some(comment) = line.trim_start().strip_prefix('#') {
                if let Some(v) = comment.trim().strip_prefix("version:") {
                    version = Some(v.trim().to_string());
                }
                continue;
            }
            let (id, pattern) = line.split_once('\t').ok_or_else(|| SafetyError::Parse {
                line: i + 1,
                message: "expected id<TAB>pattern".into(),
            })?;
            if id.trim().is_empty() || pattern.trim().is_empty() {
                return Err(SafetyError::Parse {
                    line: i + 1,
                    message: "empty id or pattern".into(),
                });
            }
            rules.push(SafetyRule::new(id.trim(), pattern.trim())?);
        }
        Self::new(version.unwrap_or_else(|| "unversioned".into()), rules)
    }

    pub fn load(path: &Path) -> Result<Self, SafetyError> {
        let src = std::fs::read_to_string(path)
            .map_err(|e| SafetyError::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&src)
    }

    pub fn bundled() -> Self {
        Self::parse(BUNDLED_RULES).expect("bundled rule file is valid")
    }

    pub fn version(&self) -> &str {
        &self.version
    }

    pub fn rules(&self) -> &[SafetyRule] {
        &self.rules
    }

    /// Every (rule, variant) hit is reported; matching does not stop at the first.
    pub fn check(&self, text: &str) -> SafetyVerdict {
        let normalized = normalize(text);
        let mut matched = Vec::new();
        for rule in &self.rules {
            for (variant, form) in normalized.variants() {
                if let Some(span) = rule.find(form) {
                    matched.push(SafetyMatch {
                        rule_id: rule.id.clone(),
                        span: span.to_string(),
                        variant,
                    });
                }
            }
        }
        SafetyVerdict::from_matches(matched)
    }

    pub fn is_safe(&self, text: &str) -> bool {
        self.check(text).is_safe()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SafetyStatus {
    Safe,
    Unsafe,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SafetyMatch {
    pub rule_id: String,
    pub span: String,
    pub variant: Variant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SafetyVerdict {
    status: SafetyStatus,
    matched: Vec<SafetyMatch>,
}

impl SafetyVerdict {
    fn from_matches(matched: Vec<SafetyMatch>) -> Self {
        let status = if matched.is_empty() {
            SafetyStatus::Safe
        } else {
            SafetyStatus::Unsafe
        };
        Self { status, matched }
    }

    pub fn status(&self) -> SafetyStatus {
        self.status
    }

    pub fn matched(&self) -> &[SafetyMatch] {
        &self.matched
    }

    pub fn is_safe(&self) -> bool {
        self.status == SafetyStatus::Safe
    }
}

/// Shared handle whose rule set can be swapped as a whole while readers keep
/// the set they started with.
#[derive(Debug, Clone)]
pub struct RuleHandle(Arc<RwLock<Arc<SafetyRuleSet>>>);

impl RuleHandle {
    pub fn new(rules: SafetyRuleSet) -> Self {
        Self(Arc::new(RwLock::new(Arc::new(rules))))
    }

    pub fn current(&self) -> Arc<SafetyRuleSet> {
        self.0.read().expect("rule lock poisoned").clone()
    }

    pub fn swap(&self, rules: SafetyRuleSet) -> Arc<SafetyRuleSet> {
        std::mem::replace(&mut *self.0.write().expect("rule lock poisoned"), Arc::new(rules))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlagTarget {
    SeekerPost,
    Feedback,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlagRecord {
    pub target: FlagTarget,
    pub target_id: String,
    pub participant_id: String,
    pub timestamp: Timestamp,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
}

/// Lookup of entities that can be flagged.
pub trait FlagTargets {
    fn has_target(&self, target: FlagTarget, id: &str) -> bool;
}

pub fn validate_flag(flag: &FlagRecord, targets: &dyn FlagTargets) -> Result<(), SafetyError> {
    if targets.has_target(flag.target, &flag.target_id) {
        Ok(())
    } else {
        Err(SafetyError::UnknownTarget {
            kind: flag.target,
            id: flag.target_id.clone(),
        })
    }
}

/// Flagged share of `total` as a percentage; `None` when nothing was shown.
pub fn flag_rate_percent(flags: usize, total: usize) -> Option<f64> {
    (total > 0).then(|| flags as f64 * 100.0 / total as f64)
}
