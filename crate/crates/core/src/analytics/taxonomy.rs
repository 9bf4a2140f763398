use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::profiles::CollaborationProfile;
use super::usage::UsageClass;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConsultLevel {
    Always,
    Often,
    Once,
    Never,
}

impl ConsultLevel {
    pub const ALL: [ConsultLevel; 4] = [
        ConsultLevel::Always,
        ConsultLevel::Often,
        ConsultLevel::Once,
        ConsultLevel::Never,
    ];

    /// 0 is Never, 1 Once, 10 Always, anything between Often.
    pub fn from_count(consults: usize) -> Self {
        match consults {
            0 => ConsultLevel::Never,
            1 => ConsultLevel::Once,
            10.. => ConsultLevel::Always,
            _ => ConsultLevel::Often,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ConsultLevel::Always => "always",
            ConsultLevel::Often => "often",
            ConsultLevel::Once => "once",
            ConsultLevel::Never => "never",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UsageMode {
    Direct,
    Indirect,
    None,
    Mixed,
}

impl UsageMode {
    pub fn as_str(self) -> &'static str {
        match self {
            UsageMode::Direct => "direct",
            UsageMode::Indirect => "indirect",
            UsageMode::None => "none",
            UsageMode::Mixed => "mixed",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TaxonomyCategory {
    pub consult_level: ConsultLevel,
    pub usage_mode: UsageMode,
    pub reload: bool,
}

impl TaxonomyCategory {
    pub fn label(&self) -> String {
        format!(
            "{}/{}/{}",
            self.consult_level.as_str(),
            self.usage_mode.as_str(),
            if self.reload { "reload" } else { "no_reload" }
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum TaxonomyAssignment {
    Category(TaxonomyCategory),
    /// No usage class holds a strict majority; the would-be category is kept
    /// for auditing but the profile is left out of leaf percentages.
    Excluded(TaxonomyCategory),
}

impl TaxonomyAssignment {
    pub fn category(&self) -> Option<TaxonomyCategory> {
        match self {
            TaxonomyAssignment::Category(c) => Some(*c),
            TaxonomyAssignment::Excluded(_) => None,
        }
    }
}

/// Usage class with strictly more than half of the consulted posts.
pub fn usage_mode(profile: &CollaborationProfile) -> UsageMode {
    if profile.consult_count == 0 {
        return UsageMode::None;
    }
    let majority = UsageClass::ALL
        .into_iter()
        .find(|&c| 2 * profile.usage(c) > profile.consult_count);
    match majority {
        Some(UsageClass::Direct) => UsageMode::Direct,
        Some(UsageClass::Indirect) => UsageMode::Indirect,
        Some(UsageClass::None) => UsageMode::None,
        None => UsageMode::Mixed,
    }
}

pub fn assign_taxonomy(profile: &CollaborationProfile) -> TaxonomyAssignment {
    let category = TaxonomyCategory {
        consult_level: ConsultLevel::from_count(profile.consult_count),
        usage_mode: usage_mode(profile),
        reload: profile.consult_count > 0 && profile.used_reload,
    };
    if category.usage_mode == UsageMode::Mixed {
        TaxonomyAssignment::Excluded(category)
    } else {
        TaxonomyAssignment::Category(category)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct TaxonomyTable {
    pub consult_levels: BTreeMap<ConsultLevel, usize>,
    pub leaves: BTreeMap<TaxonomyCategory, usize>,
    pub included: usize,
    pub excluded: usize,
}

impl TaxonomyTable {
    /// Shares over the included (non-excluded) profiles.
    pub fn consult_share(&self, level: ConsultLevel) -> f64 {
        share(self.consult_levels.get(&level).copied().unwrap_or(0), self.included)
    }

    pub fn leaf_share(&self, category: &TaxonomyCategory) -> f64 {
        share(self.leaves.get(category).copied().unwrap_or(0), self.included)
    }
}

fn share(count: usize, total: usize) -> f64 {
    if total == 0 {
        0.0
    } else {
        count as f64 * 100.0 / total as f64
    }
}

/// Tallies assignments. Consult levels and leaves are counted over included
/// profiles only, so both sets of shares sum to 100.
pub fn taxonomy_table(profiles: &[CollaborationProfile]) -> TaxonomyTable {
    let mut table = TaxonomyTable::default();
    for p in profiles {
        match assign_taxonomy(p) {
            TaxonomyAssignment::Category(c) => {
                table.included += 1;
                *table.consult_levels.entry(c.consult_level).or_default() += 1;
                *table.leaves.entry(c).or_default() += 1;
            }
            TaxonomyAssignment::Excluded(_) => table.excluded += 1,
        }
    }
    table
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::study::StudyArm;

    fn profile(consult: usize, direct: usize, indirect: usize, reload: bool) -> CollaborationProfile {
        CollaborationProfile {
            participant_id: "p".into(),
            arm: StudyArm::HumanPlusRewriting,
            consult_count: consult,
            usage_counts: [
                (UsageClass::Direct, direct),
                (UsageClass::Indirect, indirect),
                (UsageClass::None, consult - direct - indirect),
            ]
            .into_iter()
            .collect(),
            used_reload: reload,
        }
    }

    #[test]
    fn always_direct() {
        let c = assign_taxonomy(&profile(10, 10, 0, false)).category().unwrap();
        assert_eq!((c.consult_level, c.usage_mode), (ConsultLevel::Always, UsageMode::Direct));
    }

    #[test]
    fn never_consulted() {
        let c = assign_taxonomy(&profile(0, 0, 0, true)).category().unwrap();
        assert_eq!(
            c,
            TaxonomyCategory {
                consult_level: ConsultLevel::Never,
                usage_mode: UsageMode::None,
                reload: false
            }
        );
    }

    #[test]
    fn tie_between_modes_is_excluded() {
        assert!(matches!(
            assign_taxonomy(&profile(6, 3, 3, false)),
            TaxonomyAssignment::Excluded(TaxonomyCategory {
                usage_mode: UsageMode::Mixed,
                ..
            })
        ));
        // 4 of 7 is a strict majority
        assert_eq!(usage_mode(&profile(7, 4, 3, false)), UsageMode::Direct);
    }

    #[test]
    fn consult_boundaries() {
        let levels: Vec<_> = (0..=10).map(ConsultLevel::from_count).collect();
        assert_eq!(levels[0], ConsultLevel::Never);
        assert_eq!(levels[1], ConsultLevel::Once);
        assert!(levels[2..10].iter().all(|&l| l == ConsultLevel::Often));
        assert_eq!(levels[10], ConsultLevel::Always);
    }

    #[test]
    fn table_partitions_profiles() {
        let ps = vec![
            profile(10, 10, 0, false),
            profile(6, 3, 3, false),
            profile(0, 0, 0, false),
            profile(4, 0, 3, true),
        ];
        let t = taxonomy_table(&ps);
        assert_eq!((t.included, t.excluded), (3, 1));
        let total: f64 = t.leaves.keys().map(|c| t.leaf_share(c)).sum();
        assert!((total - 100.0).abs() < 1e-9);
        let consult_total: f64 = ConsultLevel::ALL.iter().map(|&l| t.consult_share(l)).sum();
        assert!((consult_total - 100.0).abs() < 1e-9);
    }
}
