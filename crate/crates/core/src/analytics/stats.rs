//! Bootstrap intervals and the pooled-variance two-sample t-test.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum StatsError {
    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("invalid argument: {0}")]
    Domain(String),
}

pub const DEFAULT_BOOTSTRAP_RESAMPLES: usize = 10_000;

pub fn mean(samples: &[f64]) -> Option<f64> {
    if samples.is_empty() {
        None
    } else {
        Some(samples.iter().sum::<f64>() / samples.len() as f64)
    }
}

fn sample_variance(samples: &[f64], mean: f64) -> f64 {
    samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (samples.len() as f64 - 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapCi {
    pub lo: f64,
    pub hi: f64,
    /// Set when the interval is degenerate because n == 1.
    pub degenerate: bool,
}

/// Seeded percentile bootstrap of the mean.
pub fn bootstrap_ci(
    samples: &[f64],
    level: f64,
    n_boot: usize,
    seed: u64,
) -> Result<BootstrapCi, StatsError> {
    bootstrap_ci_with(samples, level, n_boot, seed, |xs| {
        xs.iter().sum::<f64>() / xs.len() as f64
    })
}

/// Percentile bootstrap of an arbitrary statistic of one sample.
pub fn bootstrap_ci_with<F>(
    samples: &[f64],
    level: f64,
    n_boot: usize,
    seed: u64,
    statistic: F,
) -> Result<BootstrapCi, StatsError>
where
    F: Fn(&[f64]) -> f64,
{
    check_level(level, n_boot)?;
    let n = samples.len();
    if n == 0 {
        return Err(StatsError::TooFewSamples { needed: 1, got: 0 });
    }
    if n == 1 {
        let v = statistic(samples);
        return Ok(BootstrapCi {
            lo: v,
            hi: v,
            degenerate: true,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut buf = vec![0.0; n];
    let mut stats = Vec::with_capacity(n_boot);
    for _ in 0..n_boot {
        for slot in buf.iter_mut() {
            *slot = samples[rng.random_range(0..n)];
        }
        stats.push(statistic(&buf));
    }
    let (lo, hi) = percentile_bounds(&mut stats, level);
    Ok(BootstrapCi {
        lo,
        hi,
        degenerate: false,
    })
}

/// Percentile bootstrap of `statistic(a) - statistic(b)` resampling each group
/// independently.
pub fn bootstrap_diff_ci(
    a: &[f64],
    b: &[f64],
    level: f64,
    n_boot: usize,
    seed: u64,
) -> Result<BootstrapCi, StatsError> {
    check_level(level, n_boot)?;
    if a.is_empty() || b.is_empty() {
        return Err(StatsError::TooFewSamples {
            needed: 1,
            got: a.len().min(b.len()),
        });
    }
    let point = mean(a).unwrap_or_default() - mean(b).unwrap_or_default();
    if a.len() == 1 && b.len() == 1 {
        return Ok(BootstrapCi {
            lo: point,
            hi: point,
            degenerate: true,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut stats = Vec::with_capacity(n_boot);
    for _ in 0..n_boot {
        let ma = (0..a.len()).map(|_| a[rng.random_range(0..a.len())]).sum::<f64>() / a.len() as f64;
        let mb = (0..b.len()).map(|_| b[rng.random_range(0..b.len())]).sum::<f64>() / b.len() as f64;
        stats.push(ma - mb);
    }
    let (lo, hi) = percentile_bounds(&mut stats, level);
    Ok(BootstrapCi {
        lo,
        hi,
        degenerate: false,
    })
}

fn check_level(level: f64, n_boot: usize) -> Result<(), StatsError> {
    if !(level > 0.0 && level < 1.0) {
        return Err(StatsError::Domain(format!("confidence level {level} not in (0, 1)")));
    }
    if n_boot == 0 {
        return Err(StatsError::Domain("n_boot must be positive".into()));
    }
    Ok(())
}

fn percentile_bounds(stats: &mut [f64], level: f64) -> (f64, f64) {
    stats.sort_by(f64::total_cmp);
    let b = stats.len();
    let tail = (1.0 - level) / 2.0;
    let lo_idx = ((tail * b as f64).floor() as usize).min(b - 1);
    let hi_idx = (((1.0 - tail) * b as f64).ceil() as usize)
        .saturating_sub(1)
        .min(b - 1);
    (stats[lo_idx], stats[hi_idx])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TTest {
    pub t: f64,
    pub df: f64,
    pub p_value: f64,
}

/// Two-sided Student's t-test with pooled variance.
pub fn t_test_two_sided(a: &[f64], b: &[f64]) -> Result<TTest, StatsError> {
    if a.len() < 2 || b.len() < 2 {
        return Err(StatsError::TooFewSamples {
            needed: 2,
            got: a.len().min(b.len()),
        });
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (ma, mb) = (mean(a).unwrap(), mean(b).unwrap());
    let df = na + nb - 2.0;
    let pooled = ((na - 1.0) * sample_variance(a, ma) + (nb - 1.0) * sample_variance(b, mb)) / df;
    let diff = ma - mb;
    let se = (pooled * (1.0 / na + 1.0 / nb)).sqrt();

    // Scale-free zero test so that multiplying both groups by c leaves p unchanged.
    let scale = ma.abs().max(mb.abs()).max(pooled.sqrt()).max(f64::MIN_POSITIVE);
    if diff.abs() <= 1e-12 * scale {
        return Ok(TTest {
            t: 0.0,
            df,
            p_value: 1.0,
        });
    }
    if se <= 1e-12 * scale {
        return Ok(TTest {
            t: diff.signum() * f64::INFINITY,
            df,
            p_value: 0.0,
        });
    }
    let t = diff / se;
    Ok(TTest {
        t,
        df,
        p_value: p_from_t(t, df),
    })
}

/// Two-sided tail probability of Student's t with `df` degrees of freedom.
pub fn p_from_t(t: f64, df: f64) -> f64 {
    if t.is_infinite() {
        return 0.0;
    }
    let dist = StudentsT::new(0.0, 1.0, df).expect("positive degrees of freedom");
    (2.0 * dist.sf(t.abs())).clamp(0.0, 1.0)
}

/// A point estimate with its bootstrapped interval and optional test result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatResult {
    pub estimate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub p_value: Option<f64>,
    pub n: Vec<usize>,
}

impl StatResult {
    /// The interval is widened if needed so it always contains the estimate.
    pub fn new(estimate: f64, ci: BootstrapCi, p_value: Option<f64>, n: Vec<usize>) -> Self {
        Self {
            estimate,
            ci_low: ci.lo.min(estimate),
            ci_high: ci.hi.max(estimate),
            p_value,
            n,
        }
    }
}

/// Difference of means `a - b` with a bootstrap interval and, when both groups
/// have at least two samples, the two-sided t-test p-value.
pub fn compare_means(a: &[f64], b: &[f64], n_boot: usize, seed: u64) -> Result<StatResult, StatsError> {
    let ci = bootstrap_diff_ci(a, b, 0.95, n_boot, seed)?;
    let estimate = mean(a).unwrap_or_default() - mean(b).unwrap_or_default();
    let p = t_test_two_sided(a, b).ok().map(|t| t.p_value);
    Ok(StatResult::new(estimate, ci, p, vec![a.len(), b.len()]))
}

/// Mean of one group with its bootstrap interval.
pub fn describe_mean(samples: &[f64], n_boot: usize, seed: u64) -> Result<StatResult, StatsError> {
    let ci = bootstrap_ci(samples, 0.95, n_boot, seed)?;
    let estimate = mean(samples).ok_or(StatsError::TooFewSamples { needed: 1, got: 0 })?;
    Ok(StatResult::new(estimate, ci, None, vec![samples.len()]))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_groups_give_p_one() {
        let a = [1.0, 2.0, 3.0, 4.0];
        let r = t_test_two_sided(&a, &a).unwrap();
        assert_eq!(r.p_value, 1.0);
        assert_eq!(r.t, 0.0);
    }

    // Critical value table: t(0.975, 60) = 2.000.
    #[test]
    fn matches_t_table_at_df_60() {
        let p = p_from_t(2.000, 60.0);
        assert!((p - 0.0500).abs() <= 0.0005, "{p}");
    }

    #[test]
    fn sample_based_t_of_two_at_df_60() {
        // Two groups of 31: a = b + d with common spread; choose d so t == 2.
        let base: Vec<f64> = (0..31).map(|i| (i as f64 - 15.0) / 5.0).collect();
        let var = sample_variance(&base, 0.0);
        let d = 2.0 * (var * (2.0 / 31.0)).sqrt();
        let a: Vec<f64> = base.iter().map(|x| x + d).collect();
        let r = t_test_two_sided(&a, &base).unwrap();
        assert!((r.t - 2.0).abs() < 1e-9);
        assert_eq!(r.df, 60.0);
        assert!((r.p_value - 0.05).abs() <= 0.0005);
    }

    #[test]
    fn too_few_samples() {
        assert!(t_test_two_sided(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn zero_variance_different_means() {
        let r = t_test_two_sided(&[1.0, 1.0], &[2.0, 2.0]).unwrap();
        assert_eq!(r.p_value, 0.0);
    }

    #[test]
    fn constant_samples_give_zero_width_interval() {
        let ci = bootstrap_ci(&[3.0; 20], 0.95, 1000, 7).unwrap();
        assert_eq!((ci.lo, ci.hi, ci.degenerate), (3.0, 3.0, false));
    }

    #[test]
    fn single_sample_is_flagged() {
        let ci = bootstrap_ci(&[4.5], 0.95, 1000, 7).unwrap();
        assert_eq!((ci.lo, ci.hi, ci.degenerate), (4.5, 4.5, true));
        assert!(bootstrap_ci(&[], 0.95, 1000, 7).is_err());
    }

    #[test]
    fn bootstrap_is_seeded() {
        let xs: Vec<f64> = (0..30).map(|i| (i * 7 % 11) as f64).collect();
        assert_eq!(bootstrap_ci(&xs, 0.95, 500, 1), bootstrap_ci(&xs, 0.95, 500, 1));
        let ci = bootstrap_ci(&xs, 0.95, 2000, 1).unwrap();
        let m = mean(&xs).unwrap();
        assert!(ci.lo < m && m < ci.hi);
    }
}
