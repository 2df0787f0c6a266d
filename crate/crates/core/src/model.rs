//! Shared experiment vocabulary: architectures, scheduler policies, attacks,
//! stress profiles and the cycle-record data every backend produces.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default cycle period of the control task: 1 ms.
pub const DEFAULT_CYCLE_PERIOD_NS: u64 = 1_000_000;
/// Default runtime budget for the deadline scheduler: 100 us.
pub const DEFAULT_DL_RUNTIME_NS: u64 = 100_000;
/// Default deadline/period for the deadline scheduler: 1 ms.
pub const DEFAULT_DL_PERIOD_NS: u64 = 1_000_000;
/// Default break between procedure phases, seconds.
pub const DEFAULT_GAP_S: f64 = 5.0;
/// Default RT priority for the static-priority schedulers.
pub const DEFAULT_RT_PRIORITY: u8 = 99;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ModelError {
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error("empty attack list")]
    EmptyAttackList,
    #[error("unknown config code {0:?}")]
    UnknownCode(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Architecture {
    /// Everything (control task, network stack, stress) shares one core.
    SingleCore,
    /// Control task pinned to core 1, network handling stays on core 0.
    DualCorePinned,
    /// Control task on a dedicated execution unit with zero network
    /// interference; the Linux side only carries the network stack.
    CoProcessor,
}

impl Architecture {
    pub fn core_count(&self) -> usize {
        match self {
            Architecture::SingleCore => 1,
            Architecture::DualCorePinned | Architecture::CoProcessor => 2,
        }
    }

    /// Core the control task runs on, for the Linux-hosted variants.
    pub fn control_core(&self) -> Option<usize> {
        match self {
            Architecture::SingleCore => Some(0),
            Architecture::DualCorePinned => Some(1),
            Architecture::CoProcessor => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "snake_case")]
pub enum SchedulerPolicy {
    Fifo { priority: u8 },
    RoundRobin { priority: u8 },
    Deadline { runtime_ns: u64, deadline_ns: u64, period_ns: u64 },
}

impl SchedulerPolicy {
    pub fn fifo() -> Self {
        SchedulerPolicy::Fifo { priority: DEFAULT_RT_PRIORITY }
    }

    pub fn round_robin() -> Self {
        SchedulerPolicy::RoundRobin { priority: DEFAULT_RT_PRIORITY }
    }

    pub fn deadline() -> Self {
        SchedulerPolicy::Deadline {
            runtime_ns: DEFAULT_DL_RUNTIME_NS,
            deadline_ns: DEFAULT_DL_PERIOD_NS,
            period_ns: DEFAULT_DL_PERIOD_NS,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        match *self {
            SchedulerPolicy::Fifo { priority } | SchedulerPolicy::RoundRobin { priority } => {
                if !(1..=99).contains(&priority) {
                    return Err(ModelError::Invalid(format!(
                        "RT priority {priority} out of range 1-99"
                    )));
                }
            }
            SchedulerPolicy::Deadline { runtime_ns, deadline_ns, period_ns } => {
                if runtime_ns == 0 {
                    return Err(ModelError::Invalid("deadline runtime must be > 0".into()));
                }
                if !(runtime_ns <= deadline_ns && deadline_ns <= period_ns) {
                    return Err(ModelError::Invalid(format!(
                        "deadline params must satisfy runtime <= deadline <= period \
                         (got {runtime_ns} / {deadline_ns} / {period_ns})"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Inclusive TCP port interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PortRange {
    pub first: u16,
    pub last: u16,
}

impl PortRange {
    pub const FULL: PortRange = PortRange { first: 1, last: 65535 };

    pub fn new(first: u16, last: u16) -> Result<Self, ModelError> {
        if first == 0 || first > last {
            return Err(ModelError::Invalid(format!("empty port range {first}-{last}")));
        }
        Ok(PortRange { first, last })
    }

    pub fn len(&self) -> u32 {
        u32::from(self.last) - u32::from(self.first) + 1
    }

    pub fn is_empty(&self) -> bool {
        false // construction rejects empty ranges
    }

    pub fn iter(&self) -> impl Iterator<Item = u16> {
        self.first..=self.last
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AttackSpec {
    None,
    SynFlood { rate_pps: u64 },
    ArpFlood { rate_pps: u64 },
    /// Unthrottled full-range scan; `port_range` defaults to 1-65535.
    SynScan { port_range: PortRange },
}

impl AttackSpec {
    pub fn syn_flood() -> Self {
        AttackSpec::SynFlood { rate_pps: 100_000 }
    }

    pub fn arp_flood() -> Self {
        AttackSpec::ArpFlood { rate_pps: 100_000 }
    }

    pub fn syn_scan() -> Self {
        AttackSpec::SynScan { port_range: PortRange::FULL }
    }

    pub fn is_attack(&self) -> bool {
        !matches!(self, AttackSpec::None)
    }

    /// Column label used in the result tables.
    pub fn column_label(&self) -> &'static str {
        match self {
            AttackSpec::None => "Idle",
            AttackSpec::SynFlood { .. } => "SYN flooding",
            AttackSpec::ArpFlood { .. } => "ARP flooding",
            AttackSpec::SynScan { .. } => "Nmap",
        }
    }

    /// Short tag used in artifact paths and config ids.
    pub fn tag(&self) -> &'static str {
        match self {
            AttackSpec::None => "idle",
            AttackSpec::SynFlood { .. } => "syn",
            AttackSpec::ArpFlood { .. } => "arp",
            AttackSpec::SynScan { .. } => "scan",
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        match self {
            AttackSpec::SynFlood { rate_pps } | AttackSpec::ArpFlood { rate_pps } => {
                if *rate_pps == 0 {
                    return Err(ModelError::Invalid("flood rate must be positive".into()));
                }
            }
            _ => {}
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StressSpec {
    pub enabled: bool,
    pub workers: u32,
    /// Core index each worker gets pinned to.
    pub pinning: Vec<usize>,
}

impl StressSpec {
    pub fn none() -> Self {
        StressSpec { enabled: false, workers: 0, pinning: Vec::new() }
    }

    /// One worker per available core, mirroring the whole-run stress load.
    pub fn full_load(arch: Architecture) -> Self {
        match arch {
            Architecture::SingleCore => {
                StressSpec { enabled: true, workers: 1, pinning: vec![0] }
            }
            Architecture::DualCorePinned | Architecture::CoProcessor => {
                StressSpec { enabled: true, workers: 2, pinning: vec![0, 1] }
            }
        }
    }

    pub fn validate(&self, arch: Architecture) -> Result<(), ModelError> {
        if !self.enabled {
            return Ok(());
        }
        if self.workers as usize != self.pinning.len() {
            return Err(ModelError::Invalid(format!(
                "stress workers ({}) must match pinning list length ({})",
                self.workers,
                self.pinning.len()
            )));
        }
        let cores = arch.core_count();
        if let Some(&bad) = self.pinning.iter().find(|&&c| c >= cores) {
            return Err(ModelError::Invalid(format!(
                "stress pinned to core {bad}, but architecture has {cores} core(s)"
            )));
        }
        Ok(())
    }
}

/// One completed cycle; `period_ns` is the start-to-start interval,
/// the same quantity a logic analyzer sees between output toggles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CycleRecord {
    pub index: u64,
    pub start_time_ns: u64,
    pub period_ns: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    IdlePre,
    Attack,
    IdlePost,
}

impl Phase {
    pub const ALL: [Phase; 3] = [Phase::IdlePre, Phase::Attack, Phase::IdlePost];

    pub fn tag(&self) -> &'static str {
        match self {
            Phase::IdlePre => "idle_pre",
            Phase::Attack => "attack",
            Phase::IdlePost => "idle_post",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CycleSeries {
    pub phase: Phase,
    pub config_id: String,
    pub records: Vec<CycleRecord>,
    pub wall_duration_ns: u64,
}

impl CycleSeries {
    pub fn periods(&self) -> impl Iterator<Item = u64> + '_ {
        self.records.iter().map(|r| r.period_ns)
    }

    pub fn max_period_ns(&self) -> Option<u64> {
        self.periods().max()
    }

    /// Structural invariants shared by simulated and real series.
    pub fn validate(&self, nominal_period_ns: u64) -> Result<(), ModelError> {
        let mut prev: Option<&CycleRecord> = None;
        let mut sum: u128 = 0;
        for rec in &self.records {
            if rec.period_ns == 0 {
                return Err(ModelError::Invalid(format!(
                    "record {} has zero period",
                    rec.index
                )));
            }
            if let Some(p) = prev {
                if rec.index <= p.index {
                    return Err(ModelError::Invalid("record indices not increasing".into()));
                }
                if rec.start_time_ns < p.start_time_ns {
                    return Err(ModelError::Invalid("start times not monotonic".into()));
                }
            }
            sum += u128::from(rec.period_ns);
            prev = Some(rec);
        }
        if sum > u128::from(self.wall_duration_ns) + u128::from(nominal_period_ns) {
            return Err(ModelError::Invalid(
                "sum of periods exceeds wall duration plus one nominal period".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    Real,
    Sim,
}

/// Full description of one test case.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub id: String,
    pub architecture: Architecture,
    pub scheduler: SchedulerPolicy,
    pub cycle_period_ns: u64,
    pub attack: AttackSpec,
    pub stress: StressSpec,
    pub phase_duration_s: f64,
    pub gap_s: f64,
    pub backend: Backend,
}

/// The paper's two-letter test-case codes, in table row order.
pub const CANONICAL_CODES: [&str; 7] = ["SD", "SF", "SR", "DD", "DF", "DR", "C"];

impl ExperimentConfig {
    /// Builds one of the seven canonical test cases (SF, SR, SD, DF, DR, DD, C).
    pub fn canonical(
        code: &str,
        attack: AttackSpec,
        stress_enabled: bool,
        phase_duration_s: f64,
        backend: Backend,
    ) -> Result<Self, ModelError> {
        let (architecture, scheduler) = match code {
            "SF" => (Architecture::SingleCore, SchedulerPolicy::fifo()),
            "SR" => (Architecture::SingleCore, SchedulerPolicy::round_robin()),
            "SD" => (Architecture::SingleCore, SchedulerPolicy::deadline()),
            "DF" => (Architecture::DualCorePinned, SchedulerPolicy::fifo()),
            "DR" => (Architecture::DualCorePinned, SchedulerPolicy::round_robin()),
            "DD" => (Architecture::DualCorePinned, SchedulerPolicy::deadline()),
            // The co-processor runs the control task; scheduling class on the
            // Linux side is irrelevant to it. FIFO is used for the agent stub.
            "C" => (Architecture::CoProcessor, SchedulerPolicy::fifo()),
            other => return Err(ModelError::UnknownCode(other.to_string())),
        };
        let stress = if stress_enabled {
            StressSpec::full_load(architecture)
        } else {
            StressSpec::none()
        };
        let cfg = ExperimentConfig {
            id: code.to_string(),
            architecture,
            scheduler,
            cycle_period_ns: DEFAULT_CYCLE_PERIOD_NS,
            attack,
            stress,
            phase_duration_s,
            gap_s: DEFAULT_GAP_S,
            backend,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Total validation; any field combination either passes or yields a
    /// diagnostic. Never panics.
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.id.is_empty() {
            return Err(ModelError::Invalid("config id must not be empty".into()));
        }
        if self.cycle_period_ns == 0 {
            return Err(ModelError::Invalid("cycle period must be > 0".into()));
        }
        if !(self.phase_duration_s > 0.0) {
            return Err(ModelError::Invalid("phase duration must be > 0".into()));
        }
        if self.gap_s < 0.0 {
            return Err(ModelError::Invalid("gap must be >= 0".into()));
        }
        self.scheduler.validate()?;
        self.attack.validate()?;
        self.stress.validate(self.architecture)?;
        if let SchedulerPolicy::Deadline { period_ns, .. } = self.scheduler {
            if period_ns != self.cycle_period_ns {
                return Err(ModelError::Invalid(format!(
                    "deadline scheduler period ({period_ns} ns) must match the \
                     cycle period ({} ns)",
                    self.cycle_period_ns
                )));
            }
        }
        Ok(())
    }

    /// Unique tag for artifact paths: code + attack + stress variant.
    pub fn run_tag(&self) -> String {
        let stress = if self.stress.enabled { "-stress" } else { "" };
        format!("{}-{}{}", self.id, self.attack.tag(), stress)
    }
}

/// Cross product of the seven canonical test cases, the given attacks and
/// stress variants, with canonical defaults applied.
pub fn canonical_matrix(
    phase_duration_s: f64,
    attacks: &[AttackSpec],
    stress_variants: &[bool],
    backend: Backend,
) -> Result<Vec<ExperimentConfig>, ModelError> {
    if attacks.is_empty() {
        return Err(ModelError::EmptyAttackList);
    }
    if !(phase_duration_s > 0.0) {
        return Err(ModelError::Invalid("phase duration must be > 0".into()));
    }
    let stress_variants: &[bool] = if stress_variants.is_empty() { &[false] } else { stress_variants };
    let mut out = Vec::new();
    for &stress in stress_variants {
        for attack in attacks {
            attack.validate()?;
            for code in CANONICAL_CODES {
                out.push(ExperimentConfig::canonical(
                    code,
                    *attack,
                    stress,
                    phase_duration_s,
                    backend,
                )?);
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_matrix_seven_per_attack() {
        let cfgs =
            canonical_matrix(300.0, &[AttackSpec::syn_flood()], &[false], Backend::Sim).unwrap();
        assert_eq!(cfgs.len(), 7);
        let ids: Vec<&str> = cfgs.iter().map(|c| c.id.as_str()).collect();
        for code in CANONICAL_CODES {
            assert!(ids.contains(&code));
        }
    }

    #[test]
    fn canonical_matrix_rejects_empty_attack_list() {
        let err = canonical_matrix(300.0, &[], &[false], Backend::Sim).unwrap_err();
        assert_eq!(err, ModelError::EmptyAttackList);
    }

    #[test]
    fn canonical_matrix_full_product() {
        let attacks =
            [AttackSpec::syn_flood(), AttackSpec::arp_flood(), AttackSpec::syn_scan()];
        let cfgs = canonical_matrix(10.0, &attacks, &[false, true], Backend::Sim).unwrap();
        assert_eq!(cfgs.len(), 42);
    }

    #[test]
    fn deadline_defaults_match_canonical_parameters() {
        let cfg = ExperimentConfig::canonical(
            "SD",
            AttackSpec::None,
            false,
            300.0,
            Backend::Sim,
        )
        .unwrap();
        assert_eq!(
            cfg.scheduler,
            SchedulerPolicy::Deadline {
                runtime_ns: 100_000,
                deadline_ns: 1_000_000,
                period_ns: 1_000_000
            }
        );
        assert_eq!(cfg.cycle_period_ns, 1_000_000);
    }

    #[test]
    fn deadline_rejects_runtime_above_period() {
        let pol = SchedulerPolicy::Deadline {
            runtime_ns: 2_000_000,
            deadline_ns: 1_000_000,
            period_ns: 1_000_000,
        };
        assert!(pol.validate().is_err());
    }

    #[test]
    fn priority_range_enforced() {
        assert!(SchedulerPolicy::Fifo { priority: 0 }.validate().is_err());
        assert!(SchedulerPolicy::Fifo { priority: 99 }.validate().is_ok());
        assert!(SchedulerPolicy::RoundRobin { priority: 100 }.validate().is_err());
    }

    #[test]
    fn stress_pinning_matches_architecture() {
        let full = StressSpec::full_load(Architecture::SingleCore);
        assert_eq!(full.workers, 1);
        assert_eq!(full.pinning, vec![0]);
        let dual = StressSpec::full_load(Architecture::DualCorePinned);
        assert_eq!(dual.workers, 2);
        assert_eq!(dual.pinning, vec![0, 1]);
        // pinned past the last core is a diagnostic, not a panic
        let bad = StressSpec { enabled: true, workers: 1, pinning: vec![3] };
        assert!(bad.validate(Architecture::SingleCore).is_err());
    }

    #[test]
    fn empty_port_range_rejected() {
        assert!(PortRange::new(5, 4).is_err());
        assert!(PortRange::new(0, 4).is_err());
        assert_eq!(PortRange::FULL.len(), 65535);
    }

    #[test]
    fn series_invariants() {
        let series = CycleSeries {
            phase: Phase::IdlePre,
            config_id: "SF".into(),
            records: vec![
                CycleRecord { index: 0, start_time_ns: 1_000_000, period_ns: 1_000_000 },
                CycleRecord { index: 1, start_time_ns: 2_000_000, period_ns: 1_000_000 },
            ],
            wall_duration_ns: 2_000_000,
        };
        assert!(series.validate(1_000_000).is_ok());

        let mut bad = series.clone();
        bad.records[1].index = 0;
        assert!(bad.validate(1_000_000).is_err());

        let mut overlong = series;
        overlong.wall_duration_ns = 500_000;
        assert!(overlong.validate(1_000_000).is_err());
    }
}
