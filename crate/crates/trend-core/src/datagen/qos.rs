//! Latency/loss telemetry with plantable degradation events.
//!
//! Baseline series are low-latency, near-zero-loss with a mild evening
//! latency bump; per-minute cross-traffic occasionally exceeds the filter
//! threshold used downstream. Events attach to a topology node and affect
//! every entity beneath it:
//!
//! * outage: no samples recorded (missing), as when the access link is down;
//! * loss: elevated packet loss while samples keep arriving;
//! * congestion: inflated latency;
//! * server offline (global): no samples for anyone, tracked separately so
//!   preprocessing can distinguish it from client-side unavailability.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{stream_rng, Topology, MINUTES_PER_DAY};
use crate::error::{Error, Result};

/// One entity-day of QoS telemetry.
#[derive(Debug, Clone, PartialEq)]
pub struct QosDay {
    pub entity: String,
    pub day: usize,
    /// Milliseconds; meaningless where `missing`.
    pub latency_ms: Vec<f64>,
    /// Loss fraction in [0, 1]; meaningless where `missing`.
    pub loss: Vec<f64>,
    /// User cross-traffic in Mbps (always measured by the router).
    pub cross_mbps: Vec<f64>,
    /// True where no measurement sample was recorded.
    pub missing: Vec<bool>,
}

/// What a planted event does to the series below its node.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum QosEventKind {
    /// Client-side unavailability: samples stop arriving.
    Outage,
    /// Elevated loss fraction while measurements continue.
    Loss { rate: f64 },
    /// Added queueing latency in milliseconds.
    Congestion { added_ms: f64 },
}

/// An event pinned to a tree node, a day and a minute span `[start, end)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QosEvent {
    pub node: String,
    pub day: usize,
    pub start: usize,
    pub end: usize,
    #[serde(flatten)]
    pub kind: QosEventKind,
}

/// Minute span of a measurement-server outage on one day.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OfflineSpan {
    pub day: usize,
    pub start: usize,
    pub end: usize,
}

/// Planted events plus the global server-offline schedule.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct QosEventPlan {
    pub events: Vec<QosEvent>,
    pub server_offline: Vec<OfflineSpan>,
}

impl QosEventPlan {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// Baseline QoS texture.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QosConfig {
    /// Per-user base latency range, ms.
    pub base_latency_range: (f64, f64),
    /// Evening latency bump amplitude, ms.
    pub evening_bump_ms: f64,
    /// Log-normal sigma of per-minute latency jitter.
    pub latency_jitter_sigma: f64,
    /// Chance of a small nonzero loss sample per minute.
    pub baseline_loss_prob: f64,
    /// Upper bound of baseline loss values.
    pub baseline_loss_max: f64,
    /// Median cross-traffic in Mbps.
    pub cross_base_mbps: f64,
    /// Log-normal sigma of cross-traffic (heavy tail).
    pub cross_sigma: f64,
}

impl Default for QosConfig {
    fn default() -> Self {
        Self {
            base_latency_range: (8.0, 15.0),
            evening_bump_ms: 2.0,
            latency_jitter_sigma: 0.06,
            baseline_loss_prob: 0.01,
            baseline_loss_max: 0.02,
            cross_base_mbps: 0.3,
            cross_sigma: 1.3,
        }
    }
}

/// Generates QoS days for every entity in the topology, applying the event
/// plan. Deterministic per seed.
pub fn gen_qos(
    cfg: &QosConfig,
    n_days: usize,
    topology: &Topology,
    plan: &QosEventPlan,
    seed: u64,
) -> Result<Vec<QosDay>> {
    if n_days == 0 {
        return Err(Error::InvalidArg("gen_qos: days must be >= 1".into()));
    }
    for ev in &plan.events {
        if topology.node_by_name(&ev.node).is_none() {
            return Err(Error::Data(format!("gen_qos: event references unknown node {}", ev.node)));
        }
        if ev.start >= ev.end || ev.end > MINUTES_PER_DAY {
            return Err(Error::InvalidArg(format!(
                "gen_qos: bad event span {}..{}",
                ev.start, ev.end
            )));
        }
    }
    for span in &plan.server_offline {
        if span.start >= span.end || span.end > MINUTES_PER_DAY {
            return Err(Error::InvalidArg(format!(
                "gen_qos: bad offline span {}..{}",
                span.start, span.end
            )));
        }
    }

    let entities: Vec<String> = topology.entities().map(|s| s.to_string()).collect();
    let mut out = Vec::with_capacity(entities.len() * n_days);
    let noise: Normal<f64> = Normal::new(0.0, 1.0).expect("valid normal");

    for (user_idx, entity) in entities.iter().enumerate() {
        let mut profile_rng = stream_rng(seed, (3 << 40) | user_idx as u64);
        let base_latency =
            profile_rng.gen_range(cfg.base_latency_range.0..cfg.base_latency_range.1);

        for day in 0..n_days {
            let mut rng =
                stream_rng(seed, (4 << 40) | ((user_idx as u64) << 16) | day as u64);
            let mut latency_ms = Vec::with_capacity(MINUTES_PER_DAY);
            let mut loss = Vec::with_capacity(MINUTES_PER_DAY);
            let mut cross_mbps = Vec::with_capacity(MINUTES_PER_DAY);
            let mut missing = vec![false; MINUTES_PER_DAY];

            for minute in 0..MINUTES_PER_DAY {
                let hour = minute as f64 / 60.0;
                let evening = (-0.5 * ((hour - 20.5) / 2.0_f64).powi(2)).exp();
                let lat = (base_latency + cfg.evening_bump_ms * evening)
                    * (cfg.latency_jitter_sigma * noise.sample(&mut rng)).exp();
                latency_ms.push(lat);
                let l = if rng.gen_range(0.0..1.0) < cfg.baseline_loss_prob {
                    rng.gen_range(0.0..cfg.baseline_loss_max)
                } else {
                    0.0
                };
                loss.push(l);
                let activity = 1.0 + 1.2 * evening;
                cross_mbps.push(
                    cfg.cross_base_mbps * activity * (cfg.cross_sigma * noise.sample(&mut rng)).exp(),
                );
            }

            // Planted events on this day affecting this entity.
            for ev in plan.events.iter().filter(|e| e.day == day) {
                let node = topology.node_by_name(&ev.node).expect("validated").id;
                if !topology.descendant_entities(node).iter().any(|e| *e == entity.as_str()) {
                    continue;
                }
                match ev.kind {
                    QosEventKind::Outage => {
                        for m in ev.start..ev.end {
                            missing[m] = true;
                        }
                    }
                    QosEventKind::Loss { rate } => {
                        for m in ev.start..ev.end {
                            let jitter = 0.05 * noise.sample(&mut rng);
                            loss[m] = (rate + jitter).clamp(loss[m], 1.0);
                        }
                    }
                    QosEventKind::Congestion { added_ms } => {
                        for m in ev.start..ev.end {
                            latency_ms[m] += added_ms * rng.gen_range(0.7..1.3);
                        }
                    }
                }
            }
            for span in plan.server_offline.iter().filter(|s| s.day == day) {
                for m in span.start..span.end {
                    missing[m] = true;
                }
            }
            // Missing minutes carry inert sentinels.
            for m in 0..MINUTES_PER_DAY {
                if missing[m] {
                    latency_ms[m] = 0.0;
                    loss[m] = 0.0;
                }
            }

            out.push(QosDay {
                entity: entity.clone(),
                day,
                latency_ms,
                loss,
                cross_mbps,
                missing,
            });
        }
    }
    Ok(out)
}

/// Convenience: a plan with a root outage on `day` between 13:00 and 17:00,
/// mirroring a full-region unavailability afternoon.
pub fn root_outage_plan(topology: &Topology, day: usize) -> QosEventPlan {
    let root_name = topology.nodes()[topology.root()].name.clone();
    QosEventPlan {
        events: vec![QosEvent {
            node: root_name,
            day,
            start: 13 * 60,
            end: 17 * 60,
            kind: QosEventKind::Outage,
        }],
        server_offline: vec![],
    }
}
