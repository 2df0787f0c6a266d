//! Simulation constants: packet interference model and scheduler-model knobs.
//!
//! The per-packet costs and batching constants are calibration outputs, not
//! ground truth; see `docs/calibration.md` for the sweep that picked them.

use serde::{Deserialize, Serialize};

use crate::model::AttackSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArrivalModel {
    ConstantRate,
    Poisson,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimParams {
    /// Non-preemptible receive cost per packet (driver/IRQ path).
    pub per_packet_hardirq_ns: u64,
    /// Stack processing cost per packet, served in softirq context. The RT
    /// task preempts this work only at batch boundaries.
    pub per_packet_softirq_ns: u64,
    /// Softirq cost per ARP frame; slightly below the SYN cost since no
    /// response is generated.
    pub per_packet_softirq_arp_ns: u64,
    /// Packets coalesced into one non-preemptible service burst.
    pub napi_batch: u32,
    /// Flood rate used when the attack spec carries none.
    pub packet_rate_pps: u64,
    pub arrival_model: ArrivalModel,
    /// Execution cost of the toggle job per cycle.
    pub task_exec_ns: u64,
    /// Fixed wakeup-to-run overhead on the Linux cores.
    pub sched_latency_ns: u64,
    /// Extra per-wakeup kernel jitter, uniform in [0, wakeup_jitter_ns].
    pub wakeup_jitter_ns: u64,
    pub rng_seed: u64,
    /// Fraction of receive interrupts that land on the control core in the
    /// dual-core variant (IRQ work that is not steered away).
    pub spillover_fraction: f64,
    /// Under sustained receive pressure the stack performs a coalesced
    /// drop/reclaim pass every this many accepted packets...
    pub flush_every_packets: u64,
    /// ...costing this much non-preemptible softirq time.
    pub flush_cost_ns: u64,
    /// Packet rate of the unthrottled full-range scan.
    pub scan_rate_pps: u64,
    /// The scan is time-bounded; it stops after this many seconds even if
    /// the attack phase is longer.
    pub scan_duration_s: f64,
    /// CPU-bound stress workers hold short non-preemptible kernel sections;
    /// length of one section and the mean interval between them.
    pub hog_np_section_ns: u64,
    pub hog_np_interval_ns: u64,
}

impl Default for SimParams {
    fn default() -> Self {
        SimParams {
            per_packet_hardirq_ns: 500,
            per_packet_softirq_ns: 9_200,
            per_packet_softirq_arp_ns: 8_800,
            napi_batch: 4,
            packet_rate_pps: 100_000,
            arrival_model: ArrivalModel::ConstantRate,
            task_exec_ns: 10_000,
            sched_latency_ns: 20_000,
            wakeup_jitter_ns: 8_000,
            rng_seed: 1,
            spillover_fraction: 0.05,
            flush_every_packets: 400_000,
            flush_cost_ns: 2_750_000,
            scan_rate_pps: 13_000,
            scan_duration_s: 10.0,
            hog_np_section_ns: 2_000,
            hog_np_interval_ns: 150_000,
        }
    }
}

impl SimParams {
    pub fn validate(&self) -> Result<(), crate::model::ModelError> {
        use crate::model::ModelError;
        if self.napi_batch == 0 {
            return Err(ModelError::Invalid("napi_batch must be >= 1".into()));
        }
        if !(0.0..=1.0).contains(&self.spillover_fraction) {
            return Err(ModelError::Invalid("spillover_fraction must be in [0, 1]".into()));
        }
        if self.flush_every_packets == 0 {
            return Err(ModelError::Invalid("flush_every_packets must be >= 1".into()));
        }
        if self.hog_np_interval_ns == 0 || self.hog_np_interval_ns < self.hog_np_section_ns {
            return Err(ModelError::Invalid(
                "hog_np_interval_ns must be >= hog_np_section_ns and > 0".into(),
            ));
        }
        Ok(())
    }

    /// Packet source implied by an attack spec, if any.
    pub fn traffic_for(&self, attack: &AttackSpec) -> Option<TrafficProfile> {
        match attack {
            AttackSpec::None => None,
            AttackSpec::SynFlood { rate_pps } => Some(TrafficProfile {
                rate_pps: if *rate_pps > 0 { *rate_pps } else { self.packet_rate_pps },
                softirq_ns: self.per_packet_softirq_ns,
                hardirq_ns: self.per_packet_hardirq_ns,
                duration_s: None,
            }),
            AttackSpec::ArpFlood { rate_pps } => Some(TrafficProfile {
                rate_pps: if *rate_pps > 0 { *rate_pps } else { self.packet_rate_pps },
                softirq_ns: self.per_packet_softirq_arp_ns,
                hardirq_ns: self.per_packet_hardirq_ns,
                duration_s: None,
            }),
            AttackSpec::SynScan { .. } => Some(TrafficProfile {
                rate_pps: self.scan_rate_pps,
                softirq_ns: self.per_packet_softirq_ns,
                hardirq_ns: self.per_packet_hardirq_ns,
                duration_s: Some(self.scan_duration_s),
            }),
        }
    }
}

/// Interference source derived from one attack spec.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrafficProfile {
    pub rate_pps: u64,
    pub softirq_ns: u64,
    pub hardirq_ns: u64,
    /// None = runs for the whole attack phase.
    pub duration_s: Option<f64>,
}
