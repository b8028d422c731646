//! QoS degradation pipeline: preprocessing, residual statistics, k-means
//! clustering with elbow selection, cluster summaries and spatial
//! correlation over the topology tree.

mod kmeans;
mod preprocess;
mod spatial;
mod stats;
mod summary;

pub use kmeans::{elbow_select, kmeans, ClusterModel, ElbowReport};
pub use preprocess::{qos_preprocess, DropReason, QosTensorBundle, QOS_METRICS};
pub use spatial::{spatial_correlate, RegionSummary};
pub use stats::{qos_residual_stats_all, QosFeatures, QOS_FEATURE_NAMES};
pub use summary::{label_clusters, summarize_clusters, ClusterSemantic, ClusterSummary, SemanticThresholds};

use rand::Rng;

use crate::error::{Error, Result};

/// Plain Lloyd iterations with k-means++ seeding on raw (unscaled) points.
///
/// Returns `(centroids, assignments, inertia)`. Shared by [`kmeans`] and the
/// GMM initialization.
pub(crate) fn lloyd(
    points: &[Vec<f64>],
    k: usize,
    seed: u64,
    max_iters: usize,
) -> Result<(Vec<Vec<f64>>, Vec<usize>, f64)> {
    let (model_centroids, assignments, inertia, _) = lloyd_trace(points, k, seed, max_iters)?;
    Ok((model_centroids, assignments, inertia))
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Lloyd with a per-iteration inertia trace.
pub(crate) fn lloyd_trace(
    points: &[Vec<f64>],
    k: usize,
    seed: u64,
    max_iters: usize,
) -> Result<(Vec<Vec<f64>>, Vec<usize>, f64, Vec<f64>)> {
    if k == 0 {
        return Err(Error::InvalidArg("kmeans: k must be >= 1".into()));
    }
    if points.is_empty() {
        return Err(Error::InvalidArg("kmeans: no points".into()));
    }
    let dim = points[0].len();
    for p in points {
        if p.len() != dim {
            return Err(Error::DimMismatch("kmeans: ragged point dimensions".into()));
        }
        if !p.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("kmeans: non-finite point".into()));
        }
    }
    let mut distinct: Vec<&Vec<f64>> = Vec::new();
    for p in points {
        if !distinct.iter().any(|q| *q == p) {
            distinct.push(p);
            if distinct.len() > k {
                break;
            }
        }
    }
    if distinct.len() < k {
        return Err(Error::Degenerate(format!(
            "kmeans: only {} distinct points for k = {k}",
            distinct.len()
        )));
    }

    // k-means++ seeding.
    let mut rng = crate::datagen::stream_rng(seed, 7 << 40);
    let n = points.len();
    let mut centroids: Vec<Vec<f64>> = Vec::with_capacity(k);
    centroids.push(points[rng.gen_range(0..n)].clone());
    let mut d2: Vec<f64> = points.iter().map(|p| sq_dist(p, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total <= 0.0 {
            // All mass on existing centroids: pick any point not yet chosen.
            points
                .iter()
                .position(|p| !centroids.contains(p))
                .ok_or_else(|| Error::Degenerate("kmeans: not enough distinct points".into()))?
        } else {
            let mut target = rng.gen_range(0.0..total);
            let mut idx = 0;
            for (i, &d) in d2.iter().enumerate() {
                if target < d {
                    idx = i;
                    break;
                }
                target -= d;
                idx = i;
            }
            idx
        };
        centroids.push(points[next].clone());
        for (i, p) in points.iter().enumerate() {
            d2[i] = d2[i].min(sq_dist(p, centroids.last().unwrap()));
        }
    }

    let mut assignments = vec![0usize; n];
    let mut trace = Vec::new();
    let mut inertia = f64::INFINITY;
    for _ in 0..max_iters {
        // Assignment step; ties go to the lowest index.
        let mut changed = false;
        let mut new_inertia = 0.0;
        for (i, p) in points.iter().enumerate() {
            let mut best = (0usize, f64::INFINITY);
            for (c, centroid) in centroids.iter().enumerate() {
                let d = sq_dist(p, centroid);
                if d < best.1 {
                    best = (c, d);
                }
            }
            new_inertia += best.1;
            if assignments[i] != best.0 {
                assignments[i] = best.0;
                changed = true;
            }
        }
        trace.push(new_inertia);
        inertia = new_inertia;
        if !changed && trace.len() > 1 {
            break;
        }
        // Update step; empty clusters are reseeded to the farthest point.
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (p, &a) in points.iter().zip(&assignments) {
            counts[a] += 1;
            for d in 0..dim {
                sums[a][d] += p[d];
            }
        }
        for c in 0..k {
            if counts[c] == 0 {
                let far = points
                    .iter()
                    .enumerate()
                    .max_by(|(_, a), (_, b)| {
                        sq_dist(a, &centroids[assignments[0]])
                            .total_cmp(&sq_dist(b, &centroids[assignments[0]]))
                    })
                    .map(|(i, _)| i)
                    .unwrap_or(0);
                centroids[c] = points[far].clone();
            } else {
                for d in 0..dim {
                    centroids[c][d] = sums[c][d] / counts[c] as f64;
                }
            }
        }
    }
    Ok((centroids, assignments, inertia, trace))
}
