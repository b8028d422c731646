//! Synthetic desk-scale data for both pipelines.
//!
//! Real deployments feed the tensors from router telemetry; these generators
//! produce statistically similar stand-ins: per-user diurnal traffic
//! counters with injectable flood attacks, and latency/loss series over a
//! synthetic ISP tree with plantable degradation events. Everything is a
//! pure function of its parameters and seed.

mod qos;
mod topology;
mod traffic;

pub use qos::{gen_qos, OfflineSpan, QosConfig, QosDay, QosEvent, QosEventKind, QosEventPlan};
pub use topology::{Topology, TopologyNode};
pub use traffic::{
    gen_traffic, inject_attacks, AttackConfig, AttackEvent, AttackGroundTruth, AttackVector,
    TrafficConfig, TrafficDay, MINUTES_PER_DAY, TRAFFIC_METRICS,
};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Independent deterministic RNG stream for a (seed, tag) pair.
pub(crate) fn stream_rng(seed: u64, tag: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(tag);
    rng
}

/// Canonical entity naming shared by generators and the CLI.
pub fn entity_name(index: usize) -> String {
    format!("u{index:04}")
}
