use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::StudyError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StudyArm {
    HumanOnly,
    HumanPlusRewriting,
    HumanPlusClassification,
}

impl StudyArm {
    pub const ALL: [StudyArm; 3] = [
        StudyArm::HumanOnly,
        StudyArm::HumanPlusRewriting,
        StudyArm::HumanPlusClassification,
    ];

    pub fn index(self) -> usize {
        match self {
            StudyArm::HumanOnly => 0,
            StudyArm::HumanPlusRewriting => 1,
            StudyArm::HumanPlusClassification => 2,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            StudyArm::HumanOnly => "human_only",
            StudyArm::HumanPlusRewriting => "human_plus_rewriting",
            StudyArm::HumanPlusClassification => "human_plus_classification",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    PreSurvey,
    Training,
    Responding,
    PostSurvey,
    Complete,
    DroppedOut,
}

/// Survey answers: Likert levels as small integers, everything else as text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Answer {
    Level(i64),
    Text(String),
}

pub type Answers = BTreeMap<String, Answer>;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Participant {
    pub id: String,
    pub arm: StudyArm,
    pub post_subset_id: usize,
    pub phase: Phase,
    pub pre_survey: Answers,
    pub post_survey: Answers,
    pub demographics: Answers,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Post {
    pub id: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PostSubset {
    pub id: usize,
    pub post_ids: Vec<String>,
}

/// Seeker posts admitted into the study.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PostPool {
    posts: Vec<Post>,
}

impl PostPool {
    pub fn new(posts: Vec<Post>) -> Result<Self, StudyError> {
        let mut seen = std::collections::HashSet::new();
        for p in &posts {
            if !seen.insert(p.id.as_str()) {
                return Err(StudyError::Validation(format!("duplicate post id {}", p.id)));
            }
        }
        Ok(Self { posts })
    }

    /// Parses `post_id<TAB>text` lines; blank lines and `#` comments are skipped.
    pub fn parse_tsv(src: &str) -> Result<Vec<Post>, StudyError> {
        src.lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'))
            .map(|(i, line)| {
                let (id, text) = line.split_once('\t').ok_or_else(|| {
                    StudyError::Validation(format!("posts line {}: expected post_id<TAB>text", i + 1))
                })?;
                if id.trim().is_empty() || text.trim().is_empty() {
                    return Err(StudyError::Validation(format!("posts line {}: empty field", i + 1)));
                }
                Ok(Post {
                    id: id.trim().to_string(),
                    text: text.trim().to_string(),
                })
            })
            .collect()
    }

    pub fn posts(&self) -> &[Post] {
        &self.posts
    }

    pub fn len(&self) -> usize {
        self.posts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.posts.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&Post> {
        self.posts.iter().find(|p| p.id == id)
    }

    /// Seeded random split into subsets of `per_subset`. Posts beyond the last
    /// full subset are left out.
    pub fn partition(&self, per_subset: usize, seed: u64) -> Vec<PostSubset> {
        let mut ids: Vec<&str> = self.posts.iter().map(|p| p.id.as_str()).collect();
        ids.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        ids.chunks_exact(per_subset)
            .enumerate()
            .map(|(id, chunk)| PostSubset {
                id,
                post_ids: chunk.iter().map(|s| s.to_string()).collect(),
            })
            .collect()
    }
}
