//! Per-cluster time-series summaries and semantic labels.
//!
//! Members of a cluster are summarized minute-by-minute with medians of
//! normalized latency (per-day minimum subtracted, exposing queueing delay),
//! measured loss, and the fraction of members missing a sample. Scalar
//! aggregates of those series drive a rule-based mapping onto the five
//! recurring service-quality regimes.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::datagen::{QosDay, MINUTES_PER_DAY};
use crate::error::{Error, Result};

/// Minute-wise summary of one cluster.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClusterSummary {
    pub cluster: usize,
    pub members: usize,
    /// Median over members of latency minus the member-day minimum (ms).
    pub latency_norm_median: Vec<f64>,
    /// Median over members of the measured loss fraction.
    pub loss_median: Vec<f64>,
    /// Fraction of members with a missing sample.
    pub missing_fraction: Vec<f64>,
    /// Time averages of the three series above.
    pub mean_latency_elevation: f64,
    pub mean_loss: f64,
    pub mean_missing: f64,
}

/// Service-quality regimes used to name clusters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClusterSemantic {
    Good,
    ModerateLoss,
    HighLatency,
    HighUnavailability,
    UnavailabilityAndLoss,
}

/// Cutoffs for the semantic mapping.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SemanticThresholds {
    /// Mean missing fraction at or above which a cluster is unavailable.
    pub missing_high: f64,
    /// Mean measured loss at or above which losses are notable.
    pub loss_moderate: f64,
    /// Mean latency elevation (ms) at or above which latency dominates.
    pub latency_high_ms: f64,
}

impl Default for SemanticThresholds {
    fn default() -> Self {
        Self { missing_high: 0.10, loss_moderate: 0.05, latency_high_ms: 10.0 }
    }
}

fn median(values: &mut Vec<f64>) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let n = values.len();
    Some(if n % 2 == 1 { values[n / 2] } else { (values[n / 2 - 1] + values[n / 2]) / 2.0 })
}

/// Summarizes every cluster of the model over the raw (untransformed) days.
///
/// `assignments` pairs each entity-day with its cluster; an empty cluster
/// yields an all-zero summary with `members == 0`.
pub fn summarize_clusters(
    assignments: &[((String, usize), usize)],
    raw_days: &[QosDay],
    n_clusters: usize,
) -> Result<Vec<ClusterSummary>> {
    let by_key: HashMap<(String, usize), &QosDay> =
        raw_days.iter().map(|d| ((d.entity.clone(), d.day), d)).collect();
    let mut members: Vec<Vec<&QosDay>> = vec![Vec::new(); n_clusters];
    for ((entity, day), cluster) in assignments {
        if *cluster >= n_clusters {
            return Err(Error::InvalidArg(format!(
                "summarize_clusters: cluster {cluster} out of range"
            )));
        }
        let day = by_key.get(&(entity.clone(), *day)).ok_or_else(|| {
            Error::Data(format!("summarize_clusters: no raw day for ({entity}, {day})"))
        })?;
        members[*cluster].push(day);
    }

    let mut out = Vec::with_capacity(n_clusters);
    for (cluster, days) in members.iter().enumerate() {
        // Per member-day latency floor over observed minutes.
        let floors: Vec<f64> = days
            .iter()
            .map(|d| {
                d.latency_ms
                    .iter()
                    .zip(&d.missing)
                    .filter(|(_, &miss)| !miss)
                    .map(|(&l, _)| l)
                    .fold(f64::INFINITY, f64::min)
            })
            .collect();
        let mut latency_norm_median = vec![0.0; MINUTES_PER_DAY];
        let mut loss_median = vec![0.0; MINUTES_PER_DAY];
        let mut missing_fraction = vec![0.0; MINUTES_PER_DAY];
        for m in 0..MINUTES_PER_DAY {
            let mut lats = Vec::new();
            let mut losses = Vec::new();
            let mut miss = 0usize;
            for (d, floor) in days.iter().zip(&floors) {
                if d.missing[m] {
                    miss += 1;
                } else {
                    if floor.is_finite() {
                        lats.push(d.latency_ms[m] - floor);
                    }
                    losses.push(d.loss[m]);
                }
            }
            latency_norm_median[m] = median(&mut lats).unwrap_or(0.0);
            loss_median[m] = median(&mut losses).unwrap_or(0.0);
            missing_fraction[m] =
                if days.is_empty() { 0.0 } else { miss as f64 / days.len() as f64 };
        }
        let avg = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        out.push(ClusterSummary {
            cluster,
            members: days.len(),
            mean_latency_elevation: avg(&latency_norm_median),
            mean_loss: avg(&loss_median),
            mean_missing: avg(&missing_fraction),
            latency_norm_median,
            loss_median,
            missing_fraction,
        });
    }
    Ok(out)
}

/// Maps cluster summaries onto semantic labels by thresholding their scalar
/// aggregates. Unavailability dominates, then latency, then loss.
pub fn label_clusters(
    summaries: &[ClusterSummary],
    thresholds: &SemanticThresholds,
) -> Vec<ClusterSemantic> {
    summaries
        .iter()
        .map(|s| {
            let unavailable = s.mean_missing >= thresholds.missing_high;
            let lossy = s.mean_loss >= thresholds.loss_moderate;
            let slow = s.mean_latency_elevation >= thresholds.latency_high_ms;
            match (unavailable, lossy, slow) {
                (true, true, _) => ClusterSemantic::UnavailabilityAndLoss,
                (true, false, _) => ClusterSemantic::HighUnavailability,
                (false, _, true) => ClusterSemantic::HighLatency,
                (false, true, false) => ClusterSemantic::ModerateLoss,
                (false, false, false) => ClusterSemantic::Good,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{gen_qos, QosConfig, QosEvent, QosEventKind, QosEventPlan, Topology};

    fn day_key(d: &QosDay) -> (String, usize) {
        (d.entity.clone(), d.day)
    }

    #[test]
    fn cluster_of_identical_days_summarizes_to_that_day() {
        let topo = Topology::synthetic(1, 1).unwrap();
        let cfg = QosConfig { latency_jitter_sigma: 0.0, baseline_loss_prob: 0.0, ..QosConfig::default() };
        let days = gen_qos(&cfg, 1, &topo, &QosEventPlan::default(), 1).unwrap();
        let assignments = vec![(day_key(&days[0]), 0usize)];
        let summaries = summarize_clusters(&assignments, &days, 1).unwrap();
        let s = &summaries[0];
        assert_eq!(s.members, 1);
        let floor = days[0].latency_ms.iter().cloned().fold(f64::INFINITY, f64::min);
        for m in 0..MINUTES_PER_DAY {
            assert!((s.latency_norm_median[m] - (days[0].latency_ms[m] - floor)).abs() < 1e-12);
            assert_eq!(s.loss_median[m], days[0].loss[m]);
            assert_eq!(s.missing_fraction[m], 0.0);
        }
        // Per-day minimum maps to zero somewhere.
        assert!(s.latency_norm_median.iter().any(|&v| v == 0.0));
    }

    #[test]
    fn outage_cluster_has_highest_missing_fraction() {
        let topo = Topology::synthetic(4, 2).unwrap();
        let plan = QosEventPlan {
            events: vec![QosEvent {
                node: "region-0".into(),
                day: 0,
                start: 200,
                end: 600,
                kind: QosEventKind::Outage,
            }],
            server_offline: vec![],
        };
        let days = gen_qos(&QosConfig::default(), 1, &topo, &plan, 6).unwrap();
        let region0 = topo.node_by_name("region-0").unwrap().id;
        let affected: std::collections::HashSet<&str> =
            topo.descendant_entities(region0).into_iter().collect();
        // Cluster 0 = affected, cluster 1 = rest.
        let assignments: Vec<((String, usize), usize)> = days
            .iter()
            .map(|d| (day_key(d), usize::from(!affected.contains(d.entity.as_str()))))
            .collect();
        let summaries = summarize_clusters(&assignments, &days, 2).unwrap();
        assert!(summaries[0].mean_missing > summaries[1].mean_missing);
        let labels = label_clusters(&summaries, &SemanticThresholds::default());
        assert_eq!(labels[0], ClusterSemantic::HighUnavailability);
        assert_eq!(labels[1], ClusterSemantic::Good);
    }

    #[test]
    fn empty_cluster_reports_zero_members() {
        let topo = Topology::synthetic(1, 1).unwrap();
        let days = gen_qos(&QosConfig::default(), 1, &topo, &QosEventPlan::default(), 2).unwrap();
        let assignments = vec![(day_key(&days[0]), 1usize)];
        let summaries = summarize_clusters(&assignments, &days, 2).unwrap();
        assert_eq!(summaries[0].members, 0);
        assert!(summaries[0].latency_norm_median.iter().all(|&v| v == 0.0));
        assert_eq!(summaries[1].members, 1);
    }

    #[test]
    fn semantic_rules_cover_the_grid() {
        let mk = |missing: f64, loss: f64, lat: f64| ClusterSummary {
            cluster: 0,
            members: 1,
            latency_norm_median: vec![],
            loss_median: vec![],
            missing_fraction: vec![],
            mean_latency_elevation: lat,
            mean_loss: loss,
            mean_missing: missing,
        };
        let th = SemanticThresholds::default();
        let cases = [
            (mk(0.0, 0.0, 0.0), ClusterSemantic::Good),
            (mk(0.0, 0.2, 0.0), ClusterSemantic::ModerateLoss),
            (mk(0.0, 0.0, 25.0), ClusterSemantic::HighLatency),
            (mk(0.5, 0.0, 0.0), ClusterSemantic::HighUnavailability),
            (mk(0.5, 0.3, 0.0), ClusterSemantic::UnavailabilityAndLoss),
        ];
        for (summary, expect) in cases {
            assert_eq!(label_clusters(&[summary], &th)[0], expect);
        }
    }
}
