//! Nine residual statistics per entity-day.
//!
//! Three statistics (mean, population standard deviation, 95th percentile
//! by nearest rank) over three series: latency residuals, loss residuals
//! with the encoded loss = 1 minutes removed, and loss residuals over all
//! observed samples.

use serde::{Deserialize, Serialize};

use super::preprocess::QosTensorBundle;
use crate::error::{Error, Result};
use crate::tensor::Tensor3;

/// Fixed feature order.
pub const QOS_FEATURE_NAMES: [&str; 9] = [
    "lat_mean",
    "lat_std",
    "lat_p95",
    "loss_excl_mean",
    "loss_excl_std",
    "loss_excl_p95",
    "loss_all_mean",
    "loss_all_std",
    "loss_all_p95",
];

/// Residual statistics of one entity-day.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QosFeatures {
    pub entity: String,
    pub day: usize,
    /// Values in [`QOS_FEATURE_NAMES`] order.
    pub values: [f64; 9],
    /// False when the exclusion left no sample and the all-samples
    /// statistics were substituted for the excluded triple.
    pub excluded_series_present: bool,
}

fn mean_std(series: &[f64]) -> (f64, f64) {
    if series.is_empty() {
        return (0.0, 0.0);
    }
    let n = series.len() as f64;
    let mean = series.iter().sum::<f64>() / n;
    let var = series.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Nearest-rank 95th percentile: the smallest value with at least 95% of
/// the samples at or below it.
fn p95(series: &[f64]) -> f64 {
    if series.is_empty() {
        return 0.0;
    }
    let mut sorted = series.to_vec();
    sorted.sort_by(f64::total_cmp);
    let rank = ((0.95 * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    sorted[rank - 1]
}

fn triple(series: &[f64]) -> [f64; 3] {
    let (mean, std) = mean_std(series);
    [mean, std, p95(series)]
}

/// Computes the nine statistics for every entity-day of the bundle from the
/// residual tensor of the fitted model.
pub fn qos_residual_stats_all(
    residual: &Tensor3,
    bundle: &QosTensorBundle,
) -> Result<Vec<QosFeatures>> {
    if residual.dims() != bundle.tensor.dims() {
        return Err(Error::DimMismatch(
            "qos_residual_stats: residual dims do not match the bundle".into(),
        ));
    }
    let (_, _, minutes) = residual.dims();
    let mut out = Vec::with_capacity(bundle.entity_days.len());
    for (i, (entity, day)) in bundle.entity_days.iter().enumerate() {
        let mut lat = Vec::new();
        let mut loss_all = Vec::new();
        let mut loss_excl = Vec::new();
        for m in 0..minutes {
            if residual.is_observed(i, 0, m)? {
                lat.push(residual.get(i, 0, m)?);
            }
            if residual.is_observed(i, 1, m)? {
                let v = residual.get(i, 1, m)?;
                loss_all.push(v);
                if !bundle.loss_one[i][m] {
                    loss_excl.push(v);
                }
            }
        }
        let excluded_series_present = !loss_excl.is_empty();
        let excl_triple = if excluded_series_present { triple(&loss_excl) } else { triple(&loss_all) };
        let lat_triple = triple(&lat);
        let all_triple = triple(&loss_all);
        out.push(QosFeatures {
            entity: entity.clone(),
            day: *day,
            values: [
                lat_triple[0],
                lat_triple[1],
                lat_triple[2],
                excl_triple[0],
                excl_triple[1],
                excl_triple[2],
                all_triple[0],
                all_triple[1],
                all_triple[2],
            ],
            excluded_series_present,
        });
    }
    Ok(out)
}
