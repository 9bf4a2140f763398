use serde::Serialize;

use super::stats::{mean, t_test_two_sided, TTest};
use super::AnalyticsError;
use crate::study::StudyArm;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ArmTrend {
    pub arm: StudyArm,
    pub participants: usize,
    /// Mean score over post indices 0..5 and 5..10.
    pub first_mean: f64,
    pub last_mean: f64,
    /// `(first - last) / first` in percent; zero when `first` is zero.
    pub drop_pct: f64,
    pub drops: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrendResult {
    pub treatment: Option<ArmTrend>,
    pub control: Option<ArmTrend>,
    /// t-test between the two arms' per-participant drops.
    pub drop_test: Option<TTest>,
}

fn arm_trend(arm: StudyArm, series: &[&[f64]]) -> Option<ArmTrend> {
    if series.is_empty() {
        return None;
    }
    let firsts: Vec<f64> = series.iter().map(|s| mean(&s[..5]).unwrap()).collect();
    let lasts: Vec<f64> = series.iter().map(|s| mean(&s[5..]).unwrap()).collect();
    let first_mean = mean(&firsts).unwrap();
    let last_mean = mean(&lasts).unwrap();
    let drop_pct = if first_mean == 0.0 {
        0.0
    } else {
        (first_mean - last_mean) / first_mean * 100.0
    };
    Some(ArmTrend {
        arm,
        participants: series.len(),
        first_mean,
        last_mean,
        drop_pct,
        drops: firsts.iter().zip(&lasts).map(|(f, l)| f - l).collect(),
    })
}

/// First-five versus last-five mean scores per arm. Each series holds one
/// participant's scores ordered by post index; only complete series of ten
/// are used.
pub fn empathy_trend(
    series: &[(StudyArm, Vec<f64>)],
    treatment: StudyArm,
    control: StudyArm,
) -> Result<TrendResult, AnalyticsError> {
    let pick = |arm: StudyArm| -> Vec<&[f64]> {
        series
            .iter()
            .filter(|(a, s)| *a == arm && s.len() == 10)
            .map(|(_, s)| s.as_slice())
            .collect()
    };
    let t = arm_trend(treatment, &pick(treatment));
    let c = arm_trend(control, &pick(control));
    if t.is_none() && c.is_none() {
        return Err(AnalyticsError::Empty("no participant has ten scored responses".into()));
    }
    let drop_test = match (&t, &c) {
        (Some(t), Some(c)) => t_test_two_sided(&t.drops, &c.drops).ok(),
        _ => None,
    };
    Ok(TrendResult {
        treatment: t,
        control: c,
        drop_test,
    })
}
