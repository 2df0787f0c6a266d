use cyclebench_core::analysis::compute_stats;
use cyclebench_core::model::*;
use cyclebench_core::sim::{report_cpu_breakdown, simulate_phase_full, SimParams};

fn main() {
    let dur: f64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(60.0);
    let params = SimParams::default();
    for stress in [false, true] {
        println!("== stress={stress} ==");
        for code in CANONICAL_CODES {
            for attack in [AttackSpec::None, AttackSpec::syn_flood(), AttackSpec::arp_flood(), AttackSpec::syn_scan()] {
                let cfg = ExperimentConfig::canonical(code, attack.clone(), stress, dur, Backend::Sim).unwrap();
                let out = simulate_phase_full(&cfg, &params, Phase::Attack).unwrap();
                let st = compute_stats(&out.series, 1_000_000, 0.1).unwrap();
                let bd = report_cpu_breakdown(&out.cores[cfg.architecture.control_core().unwrap_or(0)], out.elapsed_ns, f64::INFINITY);
                println!(
                    "{code:>2} {:<12} max={:8.3}ms mean={:10.1}ns p99={:7.3}ms n={} soft={:.3} user={:.3} sys={:.3} idle={:.3} drop={}",
                    attack.tag(), st.max_ns as f64 / 1e6, st.mean_ns, st.p99_ns as f64/1e6, st.count,
                    bd[0].softirq, bd[0].user, bd[0].system, bd[0].idle, out.packets_dropped
                );
            }
        }
    }
}
