//! Per-class CPU utilization time series, shaped like the usual
//! softirq/user/idle/system load breakdown.

use serde::{Deserialize, Serialize};

use crate::sim::engine::CoreAccounting;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BreakdownWindow {
    pub start_s: f64,
    pub softirq: f64,
    pub user: f64,
    pub idle: f64,
    pub system: f64,
}

impl BreakdownWindow {
    pub fn sum(&self) -> f64 {
        self.softirq + self.user + self.idle + self.system
    }
}

/// Per-window utilization fractions for one core. RT and normal user time
/// both land in `user`; receive-interrupt time lands in `system`.
/// A window longer than the simulation collapses into a single aggregate.
pub fn report_cpu_breakdown(
    acct: &CoreAccounting,
    elapsed_ns: u64,
    window_s: f64,
) -> Vec<BreakdownWindow> {
    let elapsed_s = elapsed_ns as f64 / 1e9;
    if window_s >= elapsed_s || acct.bins.is_empty() {
        let t = acct.total;
        let denom = t.total().max(1) as f64;
        return vec![BreakdownWindow {
            start_s: 0.0,
            softirq: t.softirq as f64 / denom,
            user: (t.rt_user + t.normal_user) as f64 / denom,
            idle: t.idle as f64 / denom,
            system: t.hardirq as f64 / denom,
        }];
    }
    // bins are one second each; aggregate them into the requested window
    let per_window = (window_s.round().max(1.0)) as usize;
    acct.bins
        .chunks(per_window)
        .enumerate()
        .map(|(i, chunk)| {
            let mut softirq = 0u64;
            let mut user = 0u64;
            let mut idle = 0u64;
            let mut system = 0u64;
            for b in chunk {
                softirq += b.softirq;
                user += b.rt_user + b.normal_user;
                idle += b.idle;
                system += b.hardirq;
            }
            let denom = (softirq + user + idle + system).max(1) as f64;
            BreakdownWindow {
                start_s: (i * per_window) as f64,
                softirq: softirq as f64 / denom,
                user: user as f64 / denom,
                idle: idle as f64 / denom,
                system: system as f64 / denom,
            }
        })
        .collect()
}
