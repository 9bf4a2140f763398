use std::collections::BTreeMap;
use std::ops::RangeInclusive;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::profiles::CollaborationProfile;
use super::taxonomy::assign_taxonomy;
use super::usage::UsageClass;
use super::AnalyticsError;

pub const FEATURE_NAMES: [&str; 5] = ["consult", "direct", "indirect", "none", "reload"];

/// Consult count scaled to [0, 1], the share of consulted posts in each usage
/// class (all zero when nothing was consulted), and the reload indicator.
pub fn features(profile: &CollaborationProfile) -> Vec<f64> {
    let c = profile.consult_count as f64;
    let frac = |class| {
        if profile.consult_count == 0 {
            0.0
        } else {
            profile.usage(class) as f64 / c
        }
    };
    vec![
        (c / 10.0).min(1.0),
        frac(UsageClass::Direct),
        frac(UsageClass::Indirect),
        frac(UsageClass::None),
        if profile.used_reload { 1.0 } else { 0.0 },
    ]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct KMeansConfig {
    pub seed: u64,
    pub restarts: usize,
    pub max_iter: usize,
}

impl Default for KMeansConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            restarts: 10,
            max_iter: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KMeansFit {
    pub k: usize,
    pub assignments: Vec<usize>,
    pub centroids: Vec<Vec<f64>>,
    pub sse: f64,
    /// SSE after each assignment step of the winning restart.
    pub sse_trace: Vec<f64>,
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum()
}

fn nearest(point: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    centroids
        .iter()
        .enumerate()
        .map(|(i, c)| (i, dist2(point, c)))
        .fold((0, f64::INFINITY), |best, cur| if cur.1 < best.1 { cur } else { best })
}

fn plus_plus_init(points: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let mut centroids = vec![points[rng.random_range(0..points.len())].clone()];
    while centroids.len() < k {
        let d2: Vec<f64> = points.iter().map(|p| nearest(p, &centroids).1).collect();
        let idx = match WeightedIndex::new(&d2) {
            Ok(dist) => dist.sample(rng),
            // every point already coincides with a centroid
            Err(_) => rng.random_range(0..points.len()),
        };
        centroids.push(points[idx].clone());
    }
    centroids
}

fn lloyd(points: &[Vec<f64>], mut centroids: Vec<Vec<f64>>, max_iter: usize) -> KMeansFit {
    let k = centroids.len();
    let dim = points[0].len();
    let mut assignments = vec![usize::MAX; points.len()];
    let mut sse_trace = Vec::new();
    for _ in 0..max_iter.max(1) {
        let mut changed = false;
        let mut sse = 0.0;
        for (p, a) in points.iter().zip(assignments.iter_mut()) {
            let (c, d) = nearest(p, &centroids);
            sse += d;
            if *a != c {
                *a = c;
                changed = true;
            }
        }
        sse_trace.push(sse);
        if !changed {
            break;
        }
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (p, &a) in points.iter().zip(&assignments) {
            counts[a] += 1;
            for (s, x) in sums[a].iter_mut().zip(p) {
                *s += x;
            }
        }
        for c in 0..k {
            // an emptied cluster keeps its previous centroid
            if counts[c] > 0 {
                centroids[c] = sums[c].iter().map(|s| s / counts[c] as f64).collect();
            }
        }
    }
    let sse = points
        .iter()
        .zip(&assignments)
        .map(|(p, &a)| dist2(p, &centroids[a]))
        .sum();
    KMeansFit {
        k,
        assignments,
        centroids,
        sse,
        sse_trace,
    }
}

/// Seeded k-means++ with restarts; the restart with the lowest SSE wins.
pub fn kmeans(points: &[Vec<f64>], k: usize, config: &KMeansConfig) -> Result<KMeansFit, AnalyticsError> {
    if k == 0 || k > points.len() {
        return Err(AnalyticsError::Domain(format!(
            "k = {k} must lie in 1..={}",
            points.len()
        )));
    }
    let dim = points[0].len();
    if points.iter().any(|p| p.len() != dim || p.iter().any(|x| !x.is_finite())) {
        return Err(AnalyticsError::Invalid("points must share a finite dimension".into()));
    }
    let mut best: Option<KMeansFit> = None;
    for r in 0..config.restarts.max(1) {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(r as u64));
        let fit = lloyd(points, plus_plus_init(points, k, &mut rng), config.max_iter);
        if best.as_ref().is_none_or(|b| fit.sse < b.sse) {
            best = Some(fit);
        }
    }
    Ok(best.expect("at least one restart"))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Elbow {
    pub k: usize,
    pub sse_by_k: Vec<(usize, f64)>,
}

/// Picks the k with the largest second difference of SSE over `k_range`.
/// Values of k above the number of points are skipped.
pub fn choose_k(
    points: &[Vec<f64>],
    k_range: RangeInclusive<usize>,
    config: &KMeansConfig,
) -> Result<Elbow, AnalyticsError> {
    let ks: Vec<usize> = k_range.filter(|&k| k >= 1 && k <= points.len()).collect();
    if ks.len() < 3 {
        return Err(AnalyticsError::Domain(format!(
            "the elbow needs at least three feasible k values for {} points",
            points.len()
        )));
    }
    let sse_by_k: Vec<(usize, f64)> = ks
        .iter()
        .map(|&k| kmeans(points, k, config).map(|f| (k, f.sse)))
        .collect::<Result<_, _>>()?;
    let mut best = (sse_by_k[1].0, f64::NEG_INFINITY);
    for w in sse_by_k.windows(3) {
        let second = w[0].1 - 2.0 * w[1].1 + w[2].1;
        if second > best.1 + 1e-12 {
            best = (w[1].0, second);
        }
    }
    Ok(Elbow { k: best.0, sse_by_k })
}

/// Share of point pairs on which two labelings agree (same/different cluster).
pub fn rand_index(a: &[usize], b: &[usize]) -> f64 {
    assert_eq!(a.len(), b.len(), "labelings must cover the same points");
    let n = a.len();
    if n < 2 {
        return 1.0;
    }
    let mut agree = 0u64;
    for i in 0..n {
        for j in i + 1..n {
            if (a[i] == a[j]) == (b[i] == b[j]) {
                agree += 1;
            }
        }
    }
    agree as f64 / (n * (n - 1) / 2) as f64
}

/// Summary of one cluster for manual merge/discard review.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClusterCard {
    pub cluster: usize,
    pub size: usize,
    pub centroid: BTreeMap<String, f64>,
    /// Up to three members closest to the centroid.
    pub exemplars: Vec<String>,
    /// Most common taxonomy leaf among members (ties: lexically first).
    pub dominant_category: Option<String>,
}

pub fn cluster_cards(profiles: &[CollaborationProfile], fit: &KMeansFit) -> Vec<ClusterCard> {
    (0..fit.k)
        .map(|c| {
            let mut members: Vec<(f64, &CollaborationProfile)> = profiles
                .iter()
                .zip(&fit.assignments)
                .filter(|(_, &a)| a == c)
                .map(|(p, _)| (dist2(&features(p), &fit.centroids[c]), p))
                .collect();
            members.sort_by(|x, y| x.0.total_cmp(&y.0).then_with(|| x.1.participant_id.cmp(&y.1.participant_id)));
            let mut labels: BTreeMap<String, usize> = BTreeMap::new();
            for (_, p) in &members {
                let label = match assign_taxonomy(p) {
                    super::taxonomy::TaxonomyAssignment::Category(cat) => cat.label(),
                    super::taxonomy::TaxonomyAssignment::Excluded(_) => "excluded".to_string(),
                };
                *labels.entry(label).or_default() += 1;
            }
            let dominant_category = labels
                .iter()
                .max_by(|a, b| a.1.cmp(b.1).then_with(|| b.0.cmp(a.0)))
                .map(|(l, _)| l.clone());
            ClusterCard {
                cluster: c,
                size: members.len(),
                centroid: FEATURE_NAMES
                    .iter()
                    .zip(&fit.centroids[c])
                    .map(|(n, v)| (n.to_string(), *v))
                    .collect(),
                exemplars: members.iter().take(3).map(|(_, p)| p.participant_id.clone()).collect(),
                dominant_category,
            }
        })
        .collect()
}
