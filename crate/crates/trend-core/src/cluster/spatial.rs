//! Spatial correlation of cluster assignments with the topology tree.
//!
//! For every tree node and day, the fraction of descendant entity-days in
//! each cluster; regions whose users degrade together show a synchronized
//! fraction spike on the event day while sibling regions stay flat.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::datagen::Topology;
use crate::error::{Error, Result};

/// Daily per-cluster fractions under one tree node.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RegionSummary {
    pub node_id: usize,
    pub node_name: String,
    /// Days with at least one descendant entity-day.
    pub days: Vec<usize>,
    /// `fractions[d][c]` = fraction of that day's descendant entity-days in
    /// cluster `c`; each row sums to one.
    pub fractions: Vec<Vec<f64>>,
    /// Fraction in the designated good cluster per day, when one is known.
    pub good_fraction: Option<Vec<f64>>,
}

impl RegionSummary {
    pub fn fraction_on(&self, day: usize, cluster: usize) -> Option<f64> {
        self.days.iter().position(|&d| d == day).map(|i| self.fractions[i][cluster])
    }
}

/// Computes per-node per-day cluster fractions for every node of the tree.
///
/// `assignments` pairs each (entity, day) with its cluster; every entity
/// must be a leaf of the topology.
pub fn spatial_correlate(
    assignments: &[((String, usize), usize)],
    n_clusters: usize,
    topology: &Topology,
    good_cluster: Option<usize>,
) -> Result<Vec<RegionSummary>> {
    if n_clusters == 0 {
        return Err(Error::InvalidArg("spatial_correlate: no clusters".into()));
    }
    for ((entity, _), cluster) in assignments {
        if !topology.contains_entity(entity) {
            return Err(Error::Data(format!(
                "spatial_correlate: entity {entity} is not in the topology"
            )));
        }
        if *cluster >= n_clusters {
            return Err(Error::InvalidArg(format!(
                "spatial_correlate: cluster {cluster} out of range"
            )));
        }
    }

    let mut out = Vec::new();
    for node in topology.nodes() {
        let under: std::collections::HashSet<&str> =
            topology.descendant_entities(node.id).into_iter().collect();
        // day -> per-cluster counts
        let mut per_day: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for ((entity, day), cluster) in assignments {
            if under.contains(entity.as_str()) {
                per_day.entry(*day).or_insert_with(|| vec![0; n_clusters])[*cluster] += 1;
            }
        }
        if per_day.is_empty() {
            continue;
        }
        let days: Vec<usize> = per_day.keys().copied().collect();
        let fractions: Vec<Vec<f64>> = per_day
            .values()
            .map(|counts| {
                let total: usize = counts.iter().sum();
                counts.iter().map(|&c| c as f64 / total as f64).collect()
            })
            .collect();
        let good_fraction =
            good_cluster.map(|g| fractions.iter().map(|row| row[g]).collect::<Vec<f64>>());
        out.push(RegionSummary {
            node_id: node.id,
            node_name: node.name.clone(),
            days,
            fractions,
            good_fraction,
        });
    }
    Ok(out)
}
