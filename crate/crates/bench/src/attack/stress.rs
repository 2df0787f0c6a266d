//! Pinned CPU-stress workers: plain busy-spin loops at normal scheduling
//! class, one per requested core, with an OS-sampled load report.

use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::time::Duration;

use serde::Serialize;

use super::AttackError;
use crate::sys;

#[derive(Debug, Serialize)]
pub struct LoadReport {
    pub workers: u32,
    pub pinned_cores: Vec<usize>,
    /// Busy fraction per online core over the run, from /proc/stat deltas.
    pub per_core_busy: Vec<f64>,
}

/// Running stress workers; dropping the handle stops them.
pub struct StressHandle {
    stop: Arc<AtomicBool>,
    threads: Vec<std::thread::JoinHandle<()>>,
    pinned: Vec<usize>,
    workers: u32,
    baseline: Vec<(u64, u64, u64, u64)>,
}

impl StressHandle {
    pub fn start(workers: u32, pinning: &[usize]) -> Result<StressHandle, AttackError> {
        if workers as usize != pinning.len() {
            return Err(AttackError::Config(format!(
                "{workers} workers but {} pinning entries",
                pinning.len()
            )));
        }
        let online = sys::online_cores();
        if let Some(&bad) = pinning.iter().find(|&&c| c >= online) {
            return Err(AttackError::Config(format!(
                "core {bad} not available (host has {online})"
            )));
        }
        let stop = Arc::new(AtomicBool::new(false));
        let mut threads = Vec::new();
        for &core in pinning {
            let stop = Arc::clone(&stop);
            threads.push(std::thread::spawn(move || {
                if sys::set_affinity(&[core]).is_err() {
                    return;
                }
                let mut x = 0u64;
                while !stop.load(Ordering::Relaxed) {
                    // keep the ALU busy; black_box defeats the optimizer
                    x = std::hint::black_box(x.wrapping_mul(6_364_136_223_846_793_005).wrapping_add(1));
                }
                std::hint::black_box(x);
            }));
        }
        Ok(StressHandle {
            stop,
            threads,
            pinned: pinning.to_vec(),
            workers,
            baseline: sys::proc_stat_cores().unwrap_or_default(),
        })
    }

    pub fn stop(mut self) -> LoadReport {
        let report = self.sample();
        self.stop.store(true, Ordering::Relaxed);
        for t in self.threads.drain(..) {
            t.join().ok();
        }
        report
    }

    fn sample(&self) -> LoadReport {
        let now = sys::proc_stat_cores().unwrap_or_default();
        let per_core_busy = now
            .iter()
            .zip(&self.baseline)
            .map(|(n, b)| {
                let busy = (n.0 + n.1 + n.2).saturating_sub(b.0 + b.1 + b.2);
                let idle = n.3.saturating_sub(b.3);
                let total = busy + idle;
                if total == 0 {
                    0.0
                } else {
                    busy as f64 / total as f64
                }
            })
            .collect();
        LoadReport { workers: self.workers, pinned_cores: self.pinned.clone(), per_core_busy }
    }
}

impl Drop for StressHandle {
    fn drop(&mut self) {
        self.stop.store(true, Ordering::Relaxed);
        for t in self.threads.drain(..) {
            t.join().ok();
        }
    }
}

/// Runs stress for a fixed duration and reports achieved utilization.
pub fn cpu_stress(
    workers: u32,
    pinning: &[usize],
    duration_s: f64,
) -> Result<LoadReport, AttackError> {
    if workers == 0 {
        return Ok(LoadReport {
            workers: 0,
            pinned_cores: Vec::new(),
            per_core_busy: vec![0.0; sys::online_cores()],
        });
    }
    let handle = StressHandle::start(workers, pinning)?;
    std::thread::sleep(Duration::from_secs_f64(duration_s));
    Ok(handle.stop())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_workers_is_noop() {
        let report = cpu_stress(0, &[], 0.1).unwrap();
        assert_eq!(report.workers, 0);
        assert!(report.per_core_busy.iter().all(|&b| b == 0.0));
    }

    #[test]
    fn mismatched_pinning_rejected() {
        assert!(matches!(cpu_stress(2, &[0], 0.1), Err(AttackError::Config(_))));
    }

    #[test]
    fn invalid_core_rejected() {
        assert!(matches!(cpu_stress(1, &[9999], 0.1), Err(AttackError::Config(_))));
    }

    #[test]
    fn single_worker_loads_its_core() {
        let report = cpu_stress(1, &[0], 1.0).unwrap();
        assert!(
            report.per_core_busy[0] > 0.8,
            "core 0 busy {:.2}, expected near 1.0",
            report.per_core_busy[0]
        );
    }
}
