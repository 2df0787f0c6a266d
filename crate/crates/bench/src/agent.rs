//! Real-mode backend: the cyclic toggle task running on the host OS.
//!
//! The loop wakes at absolute multiples of the cycle period, timestamps
//! first and flips the output state second, so the recorded instant is the
//! moment the task got the CPU. A wakeup that arrives k periods late emits
//! one long-period record and then re-aligns to the absolute grid; slots are
//! never silently skipped twice.

use std::sync::atomic::{AtomicBool, Ordering};

use cyclebench_core::model::{
    Architecture, Backend, CycleRecord, CycleSeries, ExperimentConfig, Phase, SchedulerPolicy,
};
use thiserror::Error;

use crate::sys::{self, SysError};

#[derive(Debug, Error)]
pub enum AgentError {
    #[error("privilege: {0}")]
    Privilege(String),
    #[error("affinity: {0}")]
    Affinity(String),
    #[error("admission: {0}")]
    Admission(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error(transparent)]
    Sys(#[from] SysError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AgentErrorKind {
    Privilege,
    Affinity,
    Admission,
    Runtime,
}

impl AgentError {
    pub fn kind(&self) -> AgentErrorKind {
        match self {
            AgentError::Privilege(_) => AgentErrorKind::Privilege,
            AgentError::Affinity(_) => AgentErrorKind::Affinity,
            AgentError::Admission(_) => AgentErrorKind::Admission,
            AgentError::Unsupported(_) => AgentErrorKind::Runtime,
            AgentError::Sys(e) => match e {
                SysError::Privilege(_) => AgentErrorKind::Privilege,
                SysError::Affinity(_) => AgentErrorKind::Affinity,
                SysError::Admission(_) => AgentErrorKind::Admission,
                SysError::Os(_) => AgentErrorKind::Runtime,
            },
        }
    }
}

/// Settings read back from the OS after applying a policy.
#[derive(Debug, Clone, PartialEq)]
pub struct AppliedSettings {
    pub policy: SchedulerPolicy,
    pub cores: Vec<usize>,
}

fn control_cores(arch: Architecture) -> Result<Vec<usize>, AgentError> {
    match arch.control_core() {
        Some(c) => Ok(vec![c]),
        None => Err(AgentError::Unsupported(
            "co-processor architecture has no host-side control core".into(),
        )),
    }
}

/// Applies policy and affinity to the calling thread and verifies them by
/// reading the effective settings back. A silent downgrade is an error.
pub fn set_policy_and_affinity(
    policy: &SchedulerPolicy,
    cores: &[usize],
) -> Result<AppliedSettings, AgentError> {
    policy.validate().map_err(|e| AgentError::Admission(e.to_string()))?;
    if cores.iter().any(|&c| c >= sys::online_cores()) {
        return Err(AgentError::Affinity(format!(
            "requested cores {cores:?}, host has {}",
            sys::online_cores()
        )));
    }
    sys::set_affinity(cores).map_err(AgentError::from)?;
    match *policy {
        SchedulerPolicy::Fifo { priority } => sys::set_rt_policy(libc::SCHED_FIFO, priority)?,
        SchedulerPolicy::RoundRobin { priority } => sys::set_rt_policy(libc::SCHED_RR, priority)?,
        SchedulerPolicy::Deadline { runtime_ns, deadline_ns, period_ns } => {
            sys::set_deadline(runtime_ns, deadline_ns, period_ns)?
        }
    }
    let applied = read_back(policy)?;
    let got_cores = sys::get_affinity().map_err(AgentError::from)?;
    if &applied != policy || got_cores != cores {
        return Err(AgentError::Unsupported(format!(
            "read-back mismatch: requested {policy:?} on {cores:?}, got {applied:?} on \
             {got_cores:?}"
        )));
    }
    Ok(AppliedSettings { policy: applied, cores: got_cores })
}

fn read_back(requested: &SchedulerPolicy) -> Result<SchedulerPolicy, AgentError> {
    match requested {
        SchedulerPolicy::Deadline { .. } => {
            let attr = sys::get_sched_attr().map_err(AgentError::from)?;
            if attr.sched_policy != sys::SCHED_DEADLINE {
                return Err(AgentError::Unsupported(format!(
                    "expected SCHED_DEADLINE, kernel reports policy {}",
                    attr.sched_policy
                )));
            }
            Ok(SchedulerPolicy::Deadline {
                runtime_ns: attr.sched_runtime,
                deadline_ns: attr.sched_deadline,
                period_ns: attr.sched_period,
            })
        }
        _ => {
            let (policy, prio) = sys::get_policy().map_err(AgentError::from)?;
            match policy {
                libc::SCHED_FIFO => Ok(SchedulerPolicy::Fifo { priority: prio }),
                libc::SCHED_RR => Ok(SchedulerPolicy::RoundRobin { priority: prio }),
                other => Err(AgentError::Unsupported(format!(
                    "kernel reports unexpected policy {other}"
                ))),
            }
        }
    }
}

static OUTPUT_STATE: AtomicBool = AtomicBool::new(false);

/// Runs the cyclic toggle loop for `duration_s` and returns the series.
/// Must run in a dedicated thread; the policy change applies to the caller.
pub fn run_cycle_loop(
    config: &ExperimentConfig,
    duration_s: f64,
) -> Result<CycleSeries, AgentError> {
    run_cycle_loop_tagged(config, duration_s, Phase::Attack)
}

pub fn run_cycle_loop_tagged(
    config: &ExperimentConfig,
    duration_s: f64,
    phase: Phase,
) -> Result<CycleSeries, AgentError> {
    if config.backend != Backend::Real {
        return Err(AgentError::Unsupported("agent requires the real backend".into()));
    }
    let period = config.cycle_period_ns;
    let duration_ns = (duration_s * 1e9) as u64;
    let mut records = Vec::with_capacity((duration_ns / period.max(1) + 2) as usize);
    if duration_ns == 0 {
        return Ok(CycleSeries {
            phase,
            config_id: config.id.clone(),
            records,
            wall_duration_ns: 0,
        });
    }
    let cores = control_cores(config.architecture)?;
    set_policy_and_affinity(&config.scheduler, &cores)?;
    // best effort: measurement boxes grant CAP_IPC_LOCK, dev boxes may not
    let _ = sys::lock_memory();

    let t0 = sys::now_ns();
    let end = t0 + duration_ns;
    let mut next_wake = t0 + period;
    let mut prev_start: Option<u64> = None;
    let mut index = 0u64;
    loop {
        sys::sleep_until_ns(next_wake);
        let now = sys::now_ns();
        if now >= end {
            break;
        }
        // timestamp first, flip second: the flip cost lands inside the
        // cycle, not between the wakeup and the recorded instant
        OUTPUT_STATE.fetch_xor(true, Ordering::Relaxed);
        if let Some(prev) = prev_start {
            records.push(CycleRecord {
                index,
                start_time_ns: now - t0,
                period_ns: now - prev,
            });
            index += 1;
        }
        prev_start = Some(now);
        // absolute grid: first multiple strictly after now, never relative
        next_wake += period * ((now - next_wake) / period + 1);
    }
    Ok(CycleSeries {
        phase,
        config_id: config.id.clone(),
        records,
        wall_duration_ns: duration_ns,
    })
}

/// Host RT capability report for `bench selftest`.
#[derive(Debug, serde::Serialize)]
pub struct SelfTest {
    pub kernel: String,
    pub online_cores: usize,
    pub can_set_fifo: bool,
    pub can_set_deadline: bool,
    pub can_lock_memory: bool,
    pub notes: Vec<String>,
}

pub fn selftest() -> SelfTest {
    let mut notes = Vec::new();
    let probe = std::thread::spawn(|| {
        let fifo = match sys::set_rt_policy(libc::SCHED_FIFO, 1) {
            Ok(()) => {
                let _ = sys::set_rt_policy(libc::SCHED_OTHER, 0);
                Ok(())
            }
            Err(e) => Err(e.to_string()),
        };
        let dl = match sys::set_deadline(100_000, 1_000_000, 1_000_000) {
            Ok(()) => {
                let _ = sys::set_rt_policy(libc::SCHED_OTHER, 0);
                Ok(())
            }
            Err(e) => Err(e.to_string()),
        };
        let mem = sys::lock_memory().map_err(|e| e.to_string());
        (fifo, dl, mem)
    });
    let (fifo, dl, mem) = probe.join().expect("probe thread");
    for r in [&fifo, &dl, &mem] {
        if let Err(msg) = r {
            notes.push(msg.clone());
        }
    }
    SelfTest {
        kernel: sys::kernel_version(),
        online_cores: sys::online_cores(),
        can_set_fifo: fifo.is_ok(),
        can_set_deadline: dl.is_ok(),
        can_lock_memory: mem.is_ok(),
        notes,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use cyclebench_core::model::AttackSpec;

    fn real_config(code: &str) -> ExperimentConfig {
        ExperimentConfig::canonical(code, AttackSpec::None, false, 10.0, Backend::Real).unwrap()
    }

    fn has_rt_privilege() -> bool {
        std::thread::spawn(|| {
            let ok = sys::set_rt_policy(libc::SCHED_FIFO, 1).is_ok();
            let _ = sys::set_rt_policy(libc::SCHED_OTHER, 0);
            ok
        })
        .join()
        .unwrap()
    }

    #[test]
    fn zero_duration_is_empty_series() {
        let series = run_cycle_loop(&real_config("SF"), 0.0).unwrap();
        assert!(series.records.is_empty());
    }

    #[test]
    fn sim_backend_rejected() {
        let cfg =
            ExperimentConfig::canonical("SF", AttackSpec::None, false, 1.0, Backend::Sim).unwrap();
        assert!(matches!(run_cycle_loop(&cfg, 1.0), Err(AgentError::Unsupported(_))));
    }

    #[test]
    fn coprocessor_has_no_host_loop() {
        let cfg = real_config("C");
        assert!(matches!(run_cycle_loop(&cfg, 1.0), Err(AgentError::Unsupported(_))));
    }

    #[test]
    fn unprivileged_run_fails_fast_or_privileged_run_measures() {
        let cfg = real_config("SF");
        let handle = std::thread::spawn(move || run_cycle_loop(&cfg, 0.5));
        match handle.join().unwrap() {
            Ok(series) => {
                // privileged environment: verify the series invariants
                assert!(series.records.len() > 100);
                series.validate(1_000_000).unwrap();
                let max = series.periods().max().unwrap();
                assert!(max < 100_000_000, "max period {max} ns looks broken");
            }
            Err(e) => {
                println!("SKIP: no RT privilege ({e})");
                assert_eq!(e.kind(), AgentErrorKind::Privilege);
            }
        }
    }

    #[test]
    fn read_back_equality_when_privileged() {
        if !has_rt_privilege() {
            println!("SKIP: no RT privilege");
            return;
        }
        let handle = std::thread::spawn(|| {
            let policy = SchedulerPolicy::fifo();
            let applied = set_policy_and_affinity(&policy, &[0])?;
            assert_eq!(applied.policy, policy);
            assert_eq!(applied.cores, vec![0]);
            sys::set_rt_policy(libc::SCHED_OTHER, 0).ok();
            Ok::<(), AgentError>(())
        });
        handle.join().unwrap().unwrap();
    }

    #[test]
    fn selftest_reports_host() {
        let report = selftest();
        assert!(report.online_cores >= 1);
        assert!(!report.kernel.is_empty());
    }
}
