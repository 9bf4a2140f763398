use std::collections::HashMap;

use super::segment::collapse_whitespace;

/// Pluggable sentence similarity. Implementations must be symmetric and
/// return values in `[0, 1]`.
pub trait SimilarityBackend: Send + Sync {
    fn similarity(&self, a: &str, b: &str) -> f64;
}

/// Cosine similarity of character-trigram term frequencies over the
/// lowercased, whitespace-collapsed text. Strings shorter than three
/// characters count as a single gram.
#[derive(Debug, Clone, Copy, Default)]
pub struct TrigramCosine;

impl TrigramCosine {
    fn grams(text: &str) -> HashMap<String, u32> {
        let chars: Vec<char> = text.chars().collect();
        let mut counts = HashMap::new();
        if chars.len() < 3 {
            counts.insert(text.to_string(), 1);
            return counts;
        }
        for window in chars.windows(3) {
            *counts.entry(window.iter().collect()).or_insert(0) += 1;
        }
        counts
    }
}

impl SimilarityBackend for TrigramCosine {
    fn similarity(&self, a: &str, b: &str) -> f64 {
        let a = collapse_whitespace(&a.to_lowercase());
        let b = collapse_whitespace(&b.to_lowercase());
        match (a.is_empty(), b.is_empty()) {
            (true, true) => return 1.0,
            (true, false) | (false, true) => return 0.0,
            _ => {}
        }
        if a == b {
            return 1.0;
        }
        let ga = Self::grams(&a);
        let gb = Self::grams(&b);
        let dot: f64 = ga
            .iter()
            .filter_map(|(g, &x)| gb.get(g).map(|&y| f64::from(x) * f64::from(y)))
            .sum();
        let norm = |g: &HashMap<String, u32>| {
            g.values().map(|&v| f64::from(v).powi(2)).sum::<f64>().sqrt()
        };
        (dot / (norm(&ga) * norm(&gb))).clamp(0.0, 1.0)
    }
}

/// Similarity under the built-in trigram backend.
pub fn similarity(a: &str, b: &str) -> f64 {
    TrigramCosine.similarity(a, b)
}
