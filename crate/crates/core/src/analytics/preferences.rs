use serde::{Deserialize, Serialize};

use super::stats::{bootstrap_ci, StatResult};
use super::AnalyticsError;
use crate::study::StudyArm;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArmResponse {
    pub arm: StudyArm,
    pub participant_id: String,
    pub post_id: String,
    pub text: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Preference {
    A,
    B,
    Tie,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dimension {
    /// Which response is more empathic.
    Empathy,
    /// Which response reads as written by a person.
    Authenticity,
}

/// One pairwise judgment. `response_a`/`response_b` are in the order the rater
/// saw them; the arm labels let aggregation undo that order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComparisonRecord {
    pub id: String,
    pub seeker_post_id: String,
    pub response_a: ArmResponse,
    pub response_b: ArmResponse,
    pub rater_id: String,
    pub preference: Preference,
    pub dimension: Dimension,
}

impl ComparisonRecord {
    pub fn validate(&self) -> Result<(), AnalyticsError> {
        if self.response_a.post_id != self.seeker_post_id || self.response_b.post_id != self.seeker_post_id {
            return Err(AnalyticsError::Invalid(format!(
                "comparison {} pairs responses to different seeker posts",
                self.id
            )));
        }
        Ok(())
    }

    /// Outcome from the point of view of `arm`, or None when neither side is
    /// from `arm` or both are.
    pub fn outcome_for(&self, arm: StudyArm) -> Option<Outcome> {
        let a = self.response_a.arm == arm;
        let b = self.response_b.arm == arm;
        if a == b {
            return None;
        }
        Some(match (self.preference, a) {
            (Preference::Tie, _) => Outcome::Tie,
            (Preference::A, true) | (Preference::B, false) => Outcome::Preferred,
            _ => Outcome::NotPreferred,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Preferred,
    Tie,
    NotPreferred,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PreferenceSummary {
    pub treatment: StudyArm,
    pub control: StudyArm,
    pub dimension: Dimension,
    /// Treatment preferred, tie, control preferred.
    pub counts: [usize; 3],
    pub treatment_preferred: StatResult,
    pub tie: StatResult,
    pub control_preferred: StatResult,
}

impl PreferenceSummary {
    pub fn n(&self) -> usize {
        self.counts.iter().sum()
    }

    /// Percentages rounded so that the three printed values sum to exactly 100.
    pub fn formatted(&self, decimals: u32) -> [String; 3] {
        let parts = largest_remainder(&self.counts, decimals);
        let scale = 10u64.pow(decimals);
        let fmt = |units: u64| {
            if decimals == 0 {
                units.to_string()
            } else {
                format!("{}.{:0width$}", units / scale, units % scale, width = decimals as usize)
            }
        };
        [fmt(parts[0]), fmt(parts[1]), fmt(parts[2])]
    }
}

/// Splits 100 * 10^decimals units over `counts` proportionally, handing the
/// leftover units to the largest remainders (lowest index on ties).
pub fn largest_remainder(counts: &[usize], decimals: u32) -> Vec<u64> {
    let n: u64 = counts.iter().map(|&c| c as u64).sum();
    if n == 0 {
        return vec![0; counts.len()];
    }
    let units = 100 * 10u64.pow(decimals);
    let mut parts: Vec<u64> = counts.iter().map(|&c| c as u64 * units / n).collect();
    let mut order: Vec<usize> = (0..counts.len()).collect();
    order.sort_by_key(|&i| (std::cmp::Reverse(counts[i] as u64 * units % n), i));
    let leftover = units - parts.iter().sum::<u64>();
    for &i in order.iter().take(leftover as usize) {
        parts[i] += 1;
    }
    parts
}

/// Share of comparisons in which the treatment response was preferred, tied,
/// or beaten, with percentile bootstrap CIs. Each record counts once.
pub fn aggregate_preferences(
    records: &[ComparisonRecord],
    treatment: StudyArm,
    control: StudyArm,
    dimension: Dimension,
    n_boot: usize,
    seed: u64,
) -> Result<PreferenceSummary, AnalyticsError> {
    let mut indicators: [Vec<f64>; 3] = Default::default();
    for r in records.iter().filter(|r| r.dimension == dimension) {
        r.validate()?;
        let arms = (r.response_a.arm, r.response_b.arm);
        if arms != (treatment, control) && arms != (control, treatment) {
            continue;
        }
        let slot = match r.outcome_for(treatment).expect("one side is treatment") {
            Outcome::Preferred => 0,
            Outcome::Tie => 1,
            Outcome::NotPreferred => 2,
        };
        for (i, v) in indicators.iter_mut().enumerate() {
            v.push(if i == slot { 100.0 } else { 0.0 });
        }
    }
    let n = indicators[0].len();
    if n == 0 {
        return Err(AnalyticsError::Empty(format!(
            "no {dimension:?} comparisons between {} and {}",
            treatment.as_str(),
            control.as_str()
        )));
    }
    let counts = indicators.each_ref().map(|v| v.iter().filter(|&&x| x > 0.0).count());
    let stat = |i: usize| -> Result<StatResult, AnalyticsError> {
        let estimate = counts[i] as f64 * 100.0 / n as f64;
        let ci = bootstrap_ci(&indicators[i], 0.95, n_boot, seed.wrapping_add(i as u64))?;
        Ok(StatResult::new(estimate, ci, None, vec![n]))
    };
    Ok(PreferenceSummary {
        treatment,
        control,
        dimension,
        counts,
        treatment_preferred: stat(0)?,
        tie: stat(1)?,
        control_preferred: stat(2)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(i: usize, treatment_first: bool, pref: Preference) -> ComparisonRecord {
        let side = |arm: StudyArm| ArmResponse {
            arm,
            participant_id: format!("{}-{i}", arm.as_str()),
            post_id: format!("post{i}"),
            text: "text".into(),
        };
        let (a, b) = if treatment_first {
            (side(StudyArm::HumanPlusRewriting), side(StudyArm::HumanOnly))
        } else {
            (side(StudyArm::HumanOnly), side(StudyArm::HumanPlusRewriting))
        };
        ComparisonRecord {
            id: format!("c{i}"),
            seeker_post_id: format!("post{i}"),
            response_a: a,
            response_b: b,
            rater_id: "r".into(),
            preference: pref,
            dimension: Dimension::Empathy,
        }
    }

    fn summary(records: &[ComparisonRecord]) -> PreferenceSummary {
        aggregate_preferences(
            records,
            StudyArm::HumanPlusRewriting,
            StudyArm::HumanOnly,
            Dimension::Empathy,
            1000,
            1,
        )
        .unwrap()
    }

    #[test]
    fn all_ties() {
        let recs: Vec<_> = (0..7).map(|i| record(i, i % 2 == 0, Preference::Tie)).collect();
        let s = summary(&recs);
        assert_eq!(
            (s.treatment_preferred.estimate, s.tie.estimate, s.control_preferred.estimate),
            (0.0, 100.0, 0.0)
        );
    }

    #[test]
    fn order_is_unwound() {
        // treatment shown first and chosen (A), shown second and chosen (B),
        // shown first and beaten (B)
        let recs = vec![
            record(0, true, Preference::A),
            record(1, false, Preference::B),
            record(2, false, Preference::B),
            record(3, true, Preference::Tie),
            record(4, true, Preference::B),
        ];
        let s = summary(&recs);
        assert_eq!(s.counts, [3, 1, 1]);
        assert_eq!(s.formatted(0), ["60", "20", "20"]);
    }

    #[test]
    fn formatted_shares_sum_to_one_hundred() {
        let s = |c: [usize; 3]| largest_remainder(&c, 2).iter().sum::<u64>();
        for c in [[1, 1, 1], [2, 2, 3], [292, 98, 233], [0, 0, 5], [1, 5, 7]] {
            assert_eq!(s(c), 10_000, "{c:?}");
        }
        assert_eq!(largest_remainder(&[1, 1, 1], 2), vec![3334, 3333, 3333]);
    }

    #[test]
    fn empty_input_is_an_error() {
        assert!(matches!(
            aggregate_preferences(&[], StudyArm::HumanPlusRewriting, StudyArm::HumanOnly, Dimension::Empathy, 10, 0),
            Err(AnalyticsError::Empty(_))
        ));
    }

    #[test]
    fn mismatched_posts_rejected() {
        let mut r = record(0, true, Preference::A);
        r.response_b.post_id = "other".into();
        assert!(r.validate().is_err());
    }
}
