//! Home-router traffic telemetry and flood-attack injection.
//!
//! Each user-day carries four per-minute series (download/upload bytes and
//! packets per second). Normal traffic is a constant floor plus a few
//! day-part bumps, modulated by bursts that move both directions together;
//! uploads carry systematically fewer bytes than downloads while packet
//! counts stay much closer (small upload packets).
//!
//! Attacks are synchronized floods from a random set of infected homes:
//! per day a Poisson number of events starts at uniform minutes, lasts a
//! truncated-Gaussian number of minutes, uses a uniformly drawn vector, and
//! *adds* its packet/byte rates to the upload counters of every infected
//! home.

use rand::Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};

use super::{entity_name, stream_rng};
use crate::error::{Error, Result};

pub const MINUTES_PER_DAY: usize = 1440;

/// Metric order used everywhere a traffic tensor is built.
pub const TRAFFIC_METRICS: [&str; 4] = ["down_bytes", "up_bytes", "down_pkts", "up_pkts"];

/// One user's one-day multivariate series.
#[derive(Debug, Clone, PartialEq)]
pub struct TrafficDay {
    pub entity: String,
    pub day: usize,
    /// Bytes/s, one sample per minute.
    pub down_bytes: Vec<f64>,
    pub up_bytes: Vec<f64>,
    /// Packets/s, one sample per minute.
    pub down_pkts: Vec<f64>,
    pub up_pkts: Vec<f64>,
    /// True exactly on injected attack minutes.
    pub attack_labels: Vec<bool>,
}

impl TrafficDay {
    /// Metric series by index in [`TRAFFIC_METRICS`] order.
    pub fn metric(&self, idx: usize) -> &[f64] {
        match idx {
            0 => &self.down_bytes,
            1 => &self.up_bytes,
            2 => &self.down_pkts,
            _ => &self.up_pkts,
        }
    }
}

/// Shape of the synthetic diurnal traffic.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrafficConfig {
    /// Download floor range in bytes/s before the per-user volume factor.
    pub floor_range: (f64, f64),
    /// Number of day-part bumps per user (inclusive range).
    pub bumps: (usize, usize),
    /// Bump amplitude as a multiple of the floor.
    pub bump_amp_range: (f64, f64),
    /// Bump width in minutes.
    pub bump_width_range: (f64, f64),
    /// Upload bytes as a fraction of download bytes.
    pub upload_ratio_range: (f64, f64),
    /// Average download packet size in bytes.
    pub down_pkt_size_range: (f64, f64),
    /// Average upload packet size in bytes.
    pub up_pkt_size_range: (f64, f64),
    /// Per-minute chance of starting an activity burst.
    pub burst_prob: f64,
    /// Burst intensity multiplier range (applies to both directions).
    pub burst_factor_range: (f64, f64),
    /// Mean burst length in minutes.
    pub burst_mean_len: f64,
}

impl Default for TrafficConfig {
    fn default() -> Self {
        Self {
            floor_range: (2_000.0, 15_000.0),
            bumps: (1, 3),
            bump_amp_range: (2.0, 8.0),
            bump_width_range: (60.0, 200.0),
            upload_ratio_range: (0.08, 0.20),
            down_pkt_size_range: (700.0, 1_100.0),
            up_pkt_size_range: (100.0, 200.0),
            burst_prob: 0.01,
            burst_factor_range: (2.0, 6.0),
            burst_mean_len: 5.0,
        }
    }
}

struct UserProfile {
    floor: f64,
    bumps: Vec<(f64, f64, f64)>, // (center minute, width, amplitude)
    upload_ratio: f64,
    down_pkt_size: f64,
    up_pkt_size: f64,
}

fn user_profile(cfg: &TrafficConfig, seed: u64, user: usize) -> UserProfile {
    let mut rng = stream_rng(seed, user as u64);
    let volume = (rng.gen_range(-0.5..0.5f64)).exp();
    let floor = rng.gen_range(cfg.floor_range.0..cfg.floor_range.1) * volume;
    let n_bumps = rng.gen_range(cfg.bumps.0..=cfg.bumps.1);
    let bumps = (0..n_bumps)
        .map(|_| {
            let center = rng.gen_range(7.0 * 60.0..23.0 * 60.0);
            let width = rng.gen_range(cfg.bump_width_range.0..cfg.bump_width_range.1);
            let amp = rng.gen_range(cfg.bump_amp_range.0..cfg.bump_amp_range.1) * floor;
            (center, width, amp)
        })
        .collect();
    UserProfile {
        floor,
        bumps,
        upload_ratio: rng.gen_range(cfg.upload_ratio_range.0..cfg.upload_ratio_range.1),
        down_pkt_size: rng.gen_range(cfg.down_pkt_size_range.0..cfg.down_pkt_size_range.1),
        up_pkt_size: rng.gen_range(cfg.up_pkt_size_range.0..cfg.up_pkt_size_range.1),
    }
}

/// Generates `n_users * n_days` traffic days, deterministic per seed.
pub fn gen_traffic(
    cfg: &TrafficConfig,
    n_users: usize,
    n_days: usize,
    seed: u64,
) -> Result<Vec<TrafficDay>> {
    if n_users == 0 || n_days == 0 {
        return Err(Error::InvalidArg("gen_traffic: users and days must be >= 1".into()));
    }
    let mut out = Vec::with_capacity(n_users * n_days);
    for user in 0..n_users {
        let profile = user_profile(cfg, seed, user);
        for day in 0..n_days {
            // Separate stream per (user, day) so days are order-independent.
            let mut rng = stream_rng(seed, (1 << 40) | ((user as u64) << 16) | day as u64);
            let noise: Normal<f64> = Normal::new(0.0, 1.0).expect("valid normal");
            let mut down_bytes = Vec::with_capacity(MINUTES_PER_DAY);
            let mut up_bytes = Vec::with_capacity(MINUTES_PER_DAY);
            let mut down_pkts = Vec::with_capacity(MINUTES_PER_DAY);
            let mut up_pkts = Vec::with_capacity(MINUTES_PER_DAY);
            let mut burst_left = 0usize;
            let mut burst_factor = 1.0;
            for minute in 0..MINUTES_PER_DAY {
                let t = minute as f64;
                let mut level = profile.floor;
                for (center, width, amp) in &profile.bumps {
                    let d = (t - center) / width;
                    level += amp * (-0.5 * d * d).exp();
                }
                if burst_left == 0 && rng.gen_range(0.0..1.0) < cfg.burst_prob {
                    burst_factor = rng
                        .gen_range(cfg.burst_factor_range.0..cfg.burst_factor_range.1);
                    burst_left = 1 + (cfg.burst_mean_len * rng.gen_range(0.2..2.0)) as usize;
                }
                let burst = if burst_left > 0 {
                    burst_left -= 1;
                    burst_factor
                } else {
                    1.0
                };
                // Bursts and the shared factor move every metric together;
                // direction/metric noise is kept small so the up-down
                // relationship stays tight outside attacks.
                let shared = (0.08 * noise.sample(&mut rng)).exp() * burst;
                let down_dir = (0.05 * noise.sample(&mut rng)).exp();
                let up_dir = (0.05 * noise.sample(&mut rng)).exp();
                let db = level * shared * down_dir * (0.03 * noise.sample(&mut rng)).exp();
                let ub = level * profile.upload_ratio * shared * up_dir
                    * (0.03 * noise.sample(&mut rng)).exp();
                down_bytes.push(db);
                up_bytes.push(ub);
                down_pkts
                    .push(db / profile.down_pkt_size * (0.03 * noise.sample(&mut rng)).exp());
                up_pkts.push(ub / profile.up_pkt_size * (0.03 * noise.sample(&mut rng)).exp());
            }
            out.push(TrafficDay {
                entity: entity_name(user),
                day,
                down_bytes,
                up_bytes,
                down_pkts,
                up_pkts,
                attack_labels: vec![false; MINUTES_PER_DAY],
            });
        }
    }
    Ok(out)
}

/// Flood vectors observed from consumer botnet malware.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AttackVector {
    MiraiUdpFlood,
    MiraiSynFlood,
    MiraiAckFlood,
    MiraiUdpPlainFlood,
    BashliteUdpFlood,
    BashliteSynFlood,
    BashliteAckFlood,
}

impl AttackVector {
    pub const ALL: [AttackVector; 7] = [
        AttackVector::MiraiUdpFlood,
        AttackVector::MiraiSynFlood,
        AttackVector::MiraiAckFlood,
        AttackVector::MiraiUdpPlainFlood,
        AttackVector::BashliteUdpFlood,
        AttackVector::BashliteSynFlood,
        AttackVector::BashliteAckFlood,
    ];

    /// UDP floods carry a 1400-byte payload; SYN/ACK floods are empty.
    pub fn payload_bytes(&self) -> f64 {
        match self {
            AttackVector::MiraiUdpFlood
            | AttackVector::MiraiUdpPlainFlood
            | AttackVector::BashliteUdpFlood => 1400.0,
            _ => 0.0,
        }
    }

    /// Bytes on the wire per packet: payload plus headers, so that empty
    /// TCP floods still move the byte counters a little.
    pub fn wire_bytes_per_packet(&self) -> f64 {
        match self {
            AttackVector::MiraiUdpFlood
            | AttackVector::MiraiUdpPlainFlood
            | AttackVector::BashliteUdpFlood => self.payload_bytes() + 28.0,
            _ => 40.0,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            AttackVector::MiraiUdpFlood => "mirai_udp",
            AttackVector::MiraiSynFlood => "mirai_syn",
            AttackVector::MiraiAckFlood => "mirai_ack",
            AttackVector::MiraiUdpPlainFlood => "mirai_udp_plain",
            AttackVector::BashliteUdpFlood => "bashlite_udp",
            AttackVector::BashliteSynFlood => "bashlite_syn",
            AttackVector::BashliteAckFlood => "bashlite_ack",
        }
    }
}

/// Attack injection parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AttackConfig {
    /// Fraction of homes infected.
    pub q: f64,
    /// Mean attack duration in minutes.
    pub mean_duration: f64,
    /// Duration standard deviation (truncated below at one minute).
    pub sigma_duration: f64,
    /// Average synchronized attacks per day.
    pub attacks_per_day: f64,
    /// Added upload packet rate per infected home, packets/s.
    pub pkt_rate: f64,
}

impl Default for AttackConfig {
    fn default() -> Self {
        Self {
            q: 0.05,
            mean_duration: 2.0,
            sigma_duration: 0.5,
            attacks_per_day: 1.0,
            pkt_rate: 2_000.0,
        }
    }
}

/// One synchronized attack event.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AttackEvent {
    pub day: usize,
    pub start_minute: usize,
    /// Minutes, truncated at the end of the day when it would overrun.
    pub duration: usize,
    pub vector: AttackVector,
}

/// What was injected and into whom.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AttackGroundTruth {
    pub infected: Vec<String>,
    pub events: Vec<AttackEvent>,
}

/// Injects synchronized attacks into `days`; attack traffic is *added* to
/// the measured upload counters of every infected home and the affected
/// minutes are labeled.
pub fn inject_attacks(
    mut days: Vec<TrafficDay>,
    cfg: &AttackConfig,
    seed: u64,
) -> Result<(Vec<TrafficDay>, AttackGroundTruth)> {
    if !(0.0..=1.0).contains(&cfg.q) || cfg.q <= 0.0 {
        return Err(Error::InvalidArg("inject_attacks: q must be in (0, 1]".into()));
    }
    if cfg.mean_duration < 1.0 {
        return Err(Error::InvalidArg("inject_attacks: mean duration must be >= 1".into()));
    }
    let mut entities: Vec<String> = days.iter().map(|d| d.entity.clone()).collect();
    entities.sort();
    entities.dedup();
    let n_users = entities.len();
    if cfg.q * (n_users as f64) < 1.0 {
        return Err(Error::Degenerate(format!(
            "inject_attacks: q*n_users = {} < 1, nothing to infect",
            cfg.q * n_users as f64
        )));
    }
    let n_days = days.iter().map(|d| d.day + 1).max().unwrap_or(0);

    let n_infected = (cfg.q * n_users as f64).ceil() as usize;
    let mut rng = stream_rng(seed, 2 << 40);
    let mut order: Vec<usize> = (0..n_users).collect();
    use rand::seq::SliceRandom;
    order.shuffle(&mut rng);
    let mut infected: Vec<String> =
        order[..n_infected].iter().map(|&i| entities[i].clone()).collect();
    infected.sort();

    let duration_dist = Normal::new(cfg.mean_duration, cfg.sigma_duration)
        .map_err(|e| Error::InvalidArg(format!("inject_attacks: bad duration params: {e}")))?;
    let poisson = Poisson::new(cfg.attacks_per_day)
        .map_err(|e| Error::InvalidArg(format!("inject_attacks: bad rate: {e}")))?;

    let mut events = Vec::new();
    for day in 0..n_days {
        let count = poisson.sample(&mut rng).round() as usize;
        for _ in 0..count {
            let start_minute = rng.gen_range(0..MINUTES_PER_DAY);
            let duration = (duration_dist.sample(&mut rng).round().max(1.0) as usize)
                .min(MINUTES_PER_DAY - start_minute);
            let vector = AttackVector::ALL[rng.gen_range(0..AttackVector::ALL.len())];
            events.push(AttackEvent { day, start_minute, duration, vector });
        }
    }

    let is_infected: std::collections::HashSet<&str> =
        infected.iter().map(|s| s.as_str()).collect();
    for td in days.iter_mut() {
        if !is_infected.contains(td.entity.as_str()) {
            continue;
        }
        for ev in events.iter().filter(|e| e.day == td.day) {
            let byte_rate = cfg.pkt_rate * ev.vector.wire_bytes_per_packet();
            for m in ev.start_minute..ev.start_minute + ev.duration {
                td.up_pkts[m] += cfg.pkt_rate;
                td.up_bytes[m] += byte_rate;
                td.attack_labels[m] = true;
            }
        }
    }

    Ok((days, AttackGroundTruth { infected, events }))
}
