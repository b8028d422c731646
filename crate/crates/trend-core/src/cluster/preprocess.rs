//! QoS preprocessing into a masked (entity-day x metric x minute) tensor.
//!
//! Rules, in order of precedence per minute:
//!
//! 1. measurement-server offline -> masked in both channels (the absence
//!    says nothing about the client);
//! 2. cross-traffic above the threshold -> masked in both channels (user
//!    traffic biases the measurement);
//! 3. client-side missing sample -> encoded as loss = 1 in the loss channel
//!    (unavailability is signal), latency masked;
//! 4. otherwise the measured values are kept.
//!
//! Entity-days with fewer surviving loss samples than the floor are
//! dropped. Values are `log(1 + v)` transformed; metric order is
//! `[latency, loss]`.

use crate::datagen::{OfflineSpan, QosDay, MINUTES_PER_DAY};
use crate::error::{Error, Result};
use crate::tensor::Tensor3;

/// Metric order of the QoS tensor's second mode.
pub const QOS_METRICS: [&str; 2] = ["latency", "loss"];

/// Why an entity-day was excluded from the tensor.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DropReason {
    /// Fewer surviving loss samples than the floor.
    TooFewSamples,
}

/// Preprocessed tensor plus the bookkeeping the rest of the pipeline needs.
#[derive(Debug, Clone)]
pub struct QosTensorBundle {
    /// (entity-day, metric, minute) with metric order [`QOS_METRICS`].
    pub tensor: Tensor3,
    /// Row identity of each mode-1 slice.
    pub entity_days: Vec<(String, usize)>,
    /// Per retained entity-day: minutes whose loss channel carries the
    /// encoded loss = 1 marker (client-side missing).
    pub loss_one: Vec<Vec<bool>>,
    pub dropped: Vec<(String, usize, DropReason)>,
}

/// Builds the QoS tensor from raw days.
///
/// `theta` is the cross-traffic threshold in Mbps, `eta` the minimum number
/// of surviving loss samples per entity-day.
pub fn qos_preprocess(
    days: &[QosDay],
    theta: f64,
    eta: usize,
    server_offline: &[OfflineSpan],
) -> Result<QosTensorBundle> {
    if theta <= 0.0 {
        return Err(Error::InvalidArg("qos_preprocess: theta must be > 0".into()));
    }
    if eta == 0 {
        return Err(Error::InvalidArg("qos_preprocess: eta must be >= 1".into()));
    }
    if days.is_empty() {
        return Err(Error::InvalidArg("qos_preprocess: no days".into()));
    }

    let mut offline = std::collections::HashMap::<usize, Vec<(usize, usize)>>::new();
    for span in server_offline {
        offline.entry(span.day).or_default().push((span.start, span.end));
    }
    let is_offline = |day: usize, minute: usize| {
        offline
            .get(&day)
            .map_or(false, |spans| spans.iter().any(|&(s, e)| (s..e).contains(&minute)))
    };

    struct Row {
        entity: String,
        day: usize,
        latency: Vec<f64>,
        latency_obs: Vec<bool>,
        loss: Vec<f64>,
        loss_obs: Vec<bool>,
        loss_one: Vec<bool>,
    }

    let mut rows = Vec::new();
    let mut dropped = Vec::new();
    for d in days {
        if d.latency_ms.len() != MINUTES_PER_DAY
            || d.loss.len() != MINUTES_PER_DAY
            || d.cross_mbps.len() != MINUTES_PER_DAY
            || d.missing.len() != MINUTES_PER_DAY
        {
            return Err(Error::DimMismatch("qos_preprocess: series length".into()));
        }
        let mut latency = vec![0.0; MINUTES_PER_DAY];
        let mut latency_obs = vec![false; MINUTES_PER_DAY];
        let mut loss = vec![0.0; MINUTES_PER_DAY];
        let mut loss_obs = vec![false; MINUTES_PER_DAY];
        let mut loss_one = vec![false; MINUTES_PER_DAY];
        let mut surviving = 0usize;
        for m in 0..MINUTES_PER_DAY {
            if is_offline(d.day, m) || d.cross_mbps[m] > theta {
                continue; // masked in both channels
            }
            if d.missing[m] {
                // Client-side unavailability: encode as total loss.
                loss[m] = (1.0_f64).ln_1p();
                loss_obs[m] = true;
                loss_one[m] = true;
                surviving += 1;
                continue;
            }
            if !(0.0..=1.0).contains(&d.loss[m]) || d.latency_ms[m] <= 0.0 {
                return Err(Error::Data(format!(
                    "qos_preprocess: bad sample at ({}, {}, {m})",
                    d.entity, d.day
                )));
            }
            latency[m] = d.latency_ms[m].ln_1p();
            latency_obs[m] = true;
            loss[m] = d.loss[m].ln_1p();
            loss_obs[m] = true;
            surviving += 1;
        }
        if surviving < eta {
            dropped.push((d.entity.clone(), d.day, DropReason::TooFewSamples));
            continue;
        }
        rows.push(Row {
            entity: d.entity.clone(),
            day: d.day,
            latency,
            latency_obs,
            loss,
            loss_obs,
            loss_one,
        });
    }

    if rows.is_empty() {
        return Err(Error::Degenerate(
            "qos_preprocess: every entity-day was dropped".into(),
        ));
    }

    let dims = (rows.len(), 2, MINUTES_PER_DAY);
    let n = dims.0 * dims.1 * dims.2;
    let mut values = vec![0.0; n];
    let mut mask = vec![false; n];
    for (i, row) in rows.iter().enumerate() {
        for m in 0..MINUTES_PER_DAY {
            let lat_idx = i + dims.0 * (2 * m);
            let loss_idx = i + dims.0 * (1 + 2 * m);
            values[lat_idx] = row.latency[m];
            mask[lat_idx] = row.latency_obs[m];
            values[loss_idx] = row.loss[m];
            mask[loss_idx] = row.loss_obs[m];
        }
    }
    let tensor = Tensor3::with_mask(dims, values, mask)?;
    Ok(QosTensorBundle {
        tensor,
        entity_days: rows.iter().map(|r| (r.entity.clone(), r.day)).collect(),
        loss_one: rows.into_iter().map(|r| r.loss_one).collect(),
        dropped,
    })
}
