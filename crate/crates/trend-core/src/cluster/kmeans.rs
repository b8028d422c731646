//! K-means over z-scored features and elbow-based k selection.

use serde::{Deserialize, Serialize};

use super::{lloyd_trace, sq_dist};
use crate::error::{Error, Result};

/// Fitted clustering: centroids live in z-scored space, the scaler is kept
/// so new points can be assigned consistently.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClusterModel {
    pub k: usize,
    /// Per-feature mean of the fitting set.
    pub z_mean: Vec<f64>,
    /// Per-feature standard deviation (1 where the feature is constant).
    pub z_std: Vec<f64>,
    /// Centroids in z-scored space.
    pub centroids: Vec<Vec<f64>>,
    /// Cluster of each fitting point.
    pub assignments: Vec<usize>,
    /// Within-cluster sum of squares at convergence (z-scored space).
    pub inertia: f64,
    /// Inertia after each Lloyd iteration.
    pub inertia_trace: Vec<f64>,
}

impl ClusterModel {
    pub fn zscore(&self, point: &[f64]) -> Result<Vec<f64>> {
        if point.len() != self.z_mean.len() {
            return Err(Error::DimMismatch("cluster: point dimension".into()));
        }
        Ok(point
            .iter()
            .zip(self.z_mean.iter().zip(&self.z_std))
            .map(|(v, (m, s))| (v - m) / s)
            .collect())
    }

    /// Nearest centroid (Euclidean, in z-scored space).
    pub fn assign(&self, point: &[f64]) -> Result<usize> {
        let z = self.zscore(point)?;
        let mut best = (0usize, f64::INFINITY);
        for (c, centroid) in self.centroids.iter().enumerate() {
            let d = sq_dist(&z, centroid);
            if d < best.1 {
                best = (c, d);
            }
        }
        Ok(best.0)
    }
}

fn zscore_params(points: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let dim = points[0].len();
    let n = points.len() as f64;
    let mut mean = vec![0.0; dim];
    for p in points {
        for d in 0..dim {
            mean[d] += p[d];
        }
    }
    for m in mean.iter_mut() {
        *m /= n;
    }
    let mut std = vec![0.0; dim];
    for p in points {
        for d in 0..dim {
            let diff = p[d] - mean[d];
            std[d] += diff * diff;
        }
    }
    for s in std.iter_mut() {
        *s = (*s / n).sqrt();
        if *s == 0.0 {
            *s = 1.0;
        }
    }
    (mean, std)
}

/// Restarts per [`kmeans`] call; the lowest-inertia run wins.
const KMEANS_RESTARTS: u64 = 10;

/// Z-scores the points, then runs Lloyd with k-means++ seeding until the
/// assignments are stable or 300 iterations. Ten seeded restarts guard
/// against bad initializations; the lowest-inertia run is returned.
pub fn kmeans(points: &[Vec<f64>], k: usize, seed: u64) -> Result<ClusterModel> {
    if points.is_empty() {
        return Err(Error::InvalidArg("kmeans: no points".into()));
    }
    let (z_mean, z_std) = zscore_params(points);
    let scaled: Vec<Vec<f64>> = points
        .iter()
        .map(|p| {
            p.iter()
                .zip(z_mean.iter().zip(&z_std))
                .map(|(v, (m, s))| (v - m) / s)
                .collect()
        })
        .collect();
    let mut best: Option<(Vec<Vec<f64>>, Vec<usize>, f64, Vec<f64>)> = None;
    for restart in 0..KMEANS_RESTARTS {
        let run = lloyd_trace(&scaled, k, seed.wrapping_add(restart), 300)?;
        if best.as_ref().map_or(true, |b| run.2 < b.2) {
            best = Some(run);
        }
    }
    let (centroids, assignments, inertia, inertia_trace) = best.expect("restarts >= 1");
    Ok(ClusterModel { k, z_mean, z_std, centroids, assignments, inertia, inertia_trace })
}

/// Inertia curve over candidate k plus the knee choice.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ElbowReport {
    pub ks: Vec<usize>,
    pub inertias: Vec<f64>,
    pub chosen_k: usize,
    /// Normalized chord distance of the knee on the log-inertia curve;
    /// small values mean the curve has no pronounced elbow.
    pub knee_strength: f64,
    /// The inertia drop into the knee, `inertia[k*] / inertia[k*-1]`.
    pub knee_drop: f64,
    pub confident: bool,
}

/// Minimum normalized chord distance for a knee to count as pronounced.
const KNEE_MIN_STRENGTH: f64 = 0.10;
/// A confident knee must at least halve the inertia of the previous k;
/// smooth curves shed inertia gradually at every k.
const KNEE_MAX_DROP: f64 = 0.5;

/// Runs [`kmeans`] for each k and picks the knee of the inertia curve: the
/// point with maximum distance to the chord between the curve endpoints,
/// with both axes normalized to `[0, 1]` and inertia on a log scale (a real
/// knee is an order-of-magnitude cliff; the log exposes it).
pub fn elbow_select(points: &[Vec<f64>], ks: &[usize], seed: u64) -> Result<ElbowReport> {
    if ks.is_empty() {
        return Err(Error::InvalidArg("elbow: empty k range".into()));
    }
    let mut ks = ks.to_vec();
    ks.sort_unstable();
    ks.dedup();
    let mut inertias = Vec::with_capacity(ks.len());
    for &k in &ks {
        inertias.push(kmeans(points, k, seed)?.inertia);
    }
    if ks.len() < 3 {
        // No interior point to bend; fall back to the smallest k.
        return Ok(ElbowReport {
            chosen_k: ks[0],
            knee_strength: 0.0,
            knee_drop: 1.0,
            confident: false,
            ks,
            inertias,
        });
    }
    let logs: Vec<f64> = inertias.iter().map(|&v| v.max(1e-12).ln()).collect();
    let k_lo = ks[0] as f64;
    let k_hi = *ks.last().unwrap() as f64;
    let l_lo = *logs.last().unwrap();
    let l_hi = logs[0];
    let span_k = (k_hi - k_lo).max(1e-12);
    let span_l = (l_hi - l_lo).max(1e-12);
    // Normalized curve runs from (0, 1) to (1, 0); chord distance is
    // |x + y - 1| / sqrt(2).
    let mut best = (0usize, f64::NEG_INFINITY);
    for (idx, &k) in ks.iter().enumerate() {
        let x = (k as f64 - k_lo) / span_k;
        let y = (logs[idx] - l_lo) / span_l;
        let dist = (1.0 - x - y).abs() / std::f64::consts::SQRT_2;
        if dist > best.1 {
            best = (idx, dist);
        }
    }
    let knee_drop = if best.0 == 0 {
        1.0
    } else {
        inertias[best.0] / inertias[best.0 - 1].max(1e-300)
    };
    Ok(ElbowReport {
        chosen_k: ks[best.0],
        knee_strength: best.1,
        knee_drop,
        confident: best.1 >= KNEE_MIN_STRENGTH && knee_drop <= KNEE_MAX_DROP,
        ks,
        inertias,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn blobs(centers: &[[f64; 2]], spread: f64, per: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut pts = Vec::new();
        for c in centers {
            for _ in 0..per {
                pts.push(vec![
                    c[0] + rng.gen_range(-spread..spread),
                    c[1] + rng.gen_range(-spread..spread),
                ]);
            }
        }
        pts
    }

    #[test]
    fn k1_centroid_is_the_mean() {
        let pts = vec![vec![0.0, 0.0], vec![2.0, 4.0], vec![4.0, 2.0]];
        let model = kmeans(&pts, 1, 0).unwrap();
        // In z-space the mean is the origin.
        assert!(model.centroids[0].iter().all(|&v| v.abs() < 1e-12));
        // Mapping the raw mean through the scaler hits the centroid.
        let z = model.zscore(&[2.0, 2.0]).unwrap();
        assert!(z.iter().all(|&v| v.abs() < 1e-12));
    }

    #[test]
    fn separates_two_far_blobs() {
        let pts = blobs(&[[0.0, 0.0], [10.0, 10.0]], 0.3, 40, 3);
        let model = kmeans(&pts, 2, 1).unwrap();
        let first = model.assignments[0];
        assert!(model.assignments[..40].iter().all(|&a| a == first));
        assert!(model.assignments[40..].iter().all(|&a| a != first));
    }

    #[test]
    fn k_exceeding_distinct_points_is_an_error() {
        let pts = vec![vec![1.0], vec![1.0], vec![2.0]];
        assert!(matches!(kmeans(&pts, 3, 0), Err(Error::Degenerate(_))));
    }

    #[test]
    fn zscore_normalization_invariant() {
        let pts = blobs(&[[5.0, -3.0], [9.0, 4.0]], 1.0, 50, 7);
        let model = kmeans(&pts, 2, 0).unwrap();
        let dim = 2;
        let n = pts.len() as f64;
        for d in 0..dim {
            let mean: f64 = pts.iter().map(|p| (p[d] - model.z_mean[d]) / model.z_std[d]).sum::<f64>() / n;
            let var: f64 = pts
                .iter()
                .map(|p| {
                    let z = (p[d] - model.z_mean[d]) / model.z_std[d];
                    z * z
                })
                .sum::<f64>()
                / n;
            assert!(mean.abs() < 1e-9, "z mean {mean}");
            assert!((var - 1.0).abs() < 1e-9, "z var {var}");
        }
    }

    #[test]
    fn lloyd_inertia_never_increases() {
        let pts = blobs(&[[0.0, 0.0], [3.0, 1.0], [1.0, 4.0]], 1.5, 60, 11);
        let model = kmeans(&pts, 3, 2).unwrap();
        for w in model.inertia_trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-9, "inertia increased: {} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn elbow_finds_planted_blob_count() {
        let pts = blobs(
            &[[0.0, 0.0], [8.0, 0.0], [0.0, 8.0], [8.0, 8.0], [4.0, 16.0]],
            0.4,
            40,
            5,
        );
        let ks: Vec<usize> = (2..=8).collect();
        let report = elbow_select(&pts, &ks, 1).unwrap();
        assert_eq!(report.chosen_k, 5, "report: {report:?}");
        assert!(report.confident);
        // Inertia decreases along k on this data.
        for w in report.inertias.windows(2) {
            assert!(w[1] < w[0], "inertia not decreasing: {:?}", report.inertias);
        }
    }

    #[test]
    fn elbow_on_single_blob_is_unconfident() {
        let pts = blobs(&[[0.0, 0.0]], 1.0, 200, 9);
        let ks: Vec<usize> = (2..=8).collect();
        let report = elbow_select(&pts, &ks, 1).unwrap();
        assert!(!report.confident, "report: {report:?}");
    }

    #[test]
    fn empty_k_range_is_an_error() {
        let pts = vec![vec![0.0], vec![1.0]];
        assert!(matches!(elbow_select(&pts, &[], 0), Err(Error::InvalidArg(_))));
    }
}
