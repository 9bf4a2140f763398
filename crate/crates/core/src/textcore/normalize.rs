use serde::{Deserialize, Serialize};

use super::segment::collapse_whitespace;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Lowercased, otherwise untouched.
    Lowered,
    /// Lowercased with whitespace runs collapsed to one space.
    Collapsed,
    /// Collapsed, then runs of single characters separated by single spaces fused.
    Fused,
    /// Like `Fused`, but a leading or trailing "i" or "a" in a run stays a word.
    FusedWords,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Normalized {
    pub lowered: String,
    pub collapsed: String,
    pub fused: String,
    pub fused_words: String,
}

impl Normalized {
    pub fn variants(&self) -> [(Variant, &str); 4] {
        [
            (Variant::Lowered, self.lowered.as_str()),
            (Variant::Collapsed, self.collapsed.as_str()),
            (Variant::Fused, self.fused.as_str()),
            (Variant::FusedWords, self.fused_words.as_str()),
        ]
    }
}

pub fn normalize(text: &str) -> Normalized {
    let lowered = text.to_lowercase();
    let collapsed = collapse_whitespace(&lowered);
    let fused = fuse_spaced_letters(&collapsed, false);
    let fused_words = fuse_spaced_letters(&collapsed, true);
    Normalized {
        lowered,
        collapsed,
        fused,
        fused_words,
    }
}

/// "c u t myself" -> "cut myself". Only runs of two or more one-character
/// alphanumeric tokens are fused. With `keep_words`, a run's leading or
/// trailing "i"/"a" is left out of the fusion ("i c u t" -> "i cut").
fn fuse_spaced_letters(collapsed: &str, keep_words: bool) -> String {
    let tokens: Vec<&str> = collapsed.split(' ').filter(|t| !t.is_empty()).collect();
    let single = |t: &str| {
        let mut chars = t.chars();
        matches!((chars.next(), chars.next()), (Some(c), None) if c.is_alphanumeric())
    };

    let mut out: Vec<String> = Vec::with_capacity(tokens.len());
    let mut i = 0;
    while i < tokens.len() {
        if single(tokens[i]) {
            let mut j = i;
            while j < tokens.len() && single(tokens[j]) {
                j += 1;
            }
            let word = |t: &str| keep_words && (t == "i" || t == "a");
            let (mut lo, mut hi) = (i, j);
            if hi - lo > 2 && word(tokens[lo]) {
                out.push(tokens[lo].to_string());
                lo += 1;
            }
            let trailing = (hi - lo > 2 && word(tokens[hi - 1])).then(|| tokens[hi - 1]);
            if trailing.is_some() {
                hi -= 1;
            }
            if hi - lo >= 2 {
                out.push(tokens[lo..hi].concat());
            } else {
                out.extend(tokens[lo..hi].iter().map(|t| t.to_string()));
            }
            out.extend(trailing.map(str::to_string));
            i = j;
        } else {
            out.push(tokens[i].to_string());
            i += 1;
        }
    }
    out.join(" ")
}
