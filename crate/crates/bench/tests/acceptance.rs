//! Acceptance gate: every release criterion runs here, one pass/fail line
//! each. Simulator and analysis criteria always run; network-generator and
//! scan criteria need raw-socket privilege and print a SKIP line without
//! failing when the environment can't host them.
//!
//! Run with `cargo test --test acceptance -- --nocapture` to see the lines.

use std::net::Ipv4Addr;
use std::time::Instant;

use cyclebench::attack::{self, FloodOptions};
use cyclebench::orchestrator;
use cyclebench_core::analysis::compute_stats;
use cyclebench_core::model::{
    canonical_matrix, AttackSpec, Backend, CycleRecord, CycleSeries, ExperimentConfig, Phase,
    PortRange, CANONICAL_CODES,
};
use cyclebench_core::sim::{report_cpu_breakdown, simulate_phase_full, SimParams};
use rand::{Rng, SeedableRng};

const NOMINAL_NS: u64 = 1_000_000;
/// Desk scale: 1/60 of the paper's 5-minute phases = 5 s.
const DESK_SCALE_PHASE_S: f64 = 5.0;

fn verdict(criterion: &str, pass: bool, detail: &str) {
    println!("{}: {criterion} — {detail}", if pass { "PASS" } else { "FAIL" });
    assert!(pass, "{criterion}: {detail}");
}

fn skip(criterion: &str, why: &str) {
    println!("SKIP: {criterion} — {why}");
}

fn sim_config(code: &str, attack: AttackSpec, stress: bool, phase_s: f64) -> ExperimentConfig {
    ExperimentConfig::canonical(code, attack, stress, phase_s, Backend::Sim).unwrap()
}

fn max_period(code: &str, attack: AttackSpec, stress: bool, phase: Phase, phase_s: f64) -> u64 {
    let cfg = sim_config(code, attack, stress, phase_s);
    let out = simulate_phase_full(&cfg, &SimParams::default(), phase).unwrap();
    out.series.periods().max().unwrap()
}

#[test]
fn coprocessor_is_exact_for_all_attacks() {
    let attacks = [
        AttackSpec::None,
        AttackSpec::syn_flood(),
        AttackSpec::arp_flood(),
        AttackSpec::syn_scan(),
    ];
    let mut worst_runtime = 0.0f64;
    let mut exact = true;
    for attack in attacks {
        for stress in [false, true] {
            let cfg = sim_config("C", attack.clone(), stress, DESK_SCALE_PHASE_S);
            let started = Instant::now();
            let out = simulate_phase_full(&cfg, &SimParams::default(), Phase::Attack).unwrap();
            worst_runtime = worst_runtime.max(started.elapsed().as_secs_f64());
            exact &= out.series.periods().all(|p| p == NOMINAL_NS);
        }
    }
    verdict(
        "coprocessor exact nominal period for all attacks, runtime < 10 s/run",
        exact && worst_runtime < 10.0,
        &format!("exact={exact}, worst runtime {worst_runtime:.2} s"),
    );
}

#[test]
fn dd_stress_idle_outlier_is_doubled_period() {
    let max = max_period("DD", AttackSpec::None, true, Phase::IdlePre, DESK_SCALE_PHASE_S);
    let ms = max as f64 / 1e6;
    verdict(
        "DD + stress idle max period within [1.9, 2.1] ms",
        (1.9..=2.1).contains(&ms),
        &format!("max = {ms:.3} ms"),
    );
}

#[test]
fn syn_flood_architecture_ordering_is_strict() {
    // longer phase so rare flush outliers are sampled on every config
    let phase_s = 30.0;
    let m = |code: &str| max_period(code, AttackSpec::syn_flood(), false, Phase::Attack, phase_s);
    let c = m("C");
    let d = [m("DF"), m("DR"), m("DD")];
    let sf = m("SF");
    let sr = m("SR");
    let sd = m("SD");
    let d_max = *d.iter().max().unwrap();
    let d_min = *d.iter().min().unwrap();
    let pass = c <= d_min && d_max < sf.min(sr) && sf.max(sr) < sd;
    verdict(
        "SYN flood ordering max(C) <= max(D*) < max(SF/SR) < max(SD), strict",
        pass,
        &format!(
            "C {:.3} ms, D {:.3}-{:.3} ms, SF {:.3} ms, SR {:.3} ms, SD {:.3} ms",
            c as f64 / 1e6,
            d_min as f64 / 1e6,
            d_max as f64 / 1e6,
            sf as f64 / 1e6,
            sr as f64 / 1e6,
            sd as f64 / 1e6
        ),
    );
}

#[test]
fn single_core_flood_mean_is_compensated() {
    // >= 10k cycles at 1 ms needs >= 10 s of simulated attack
    let phase_s = 15.0;
    let mut worst = 0.0f64;
    let mut count_ok = true;
    for code in ["SF", "SR", "SD"] {
        for attack in [AttackSpec::syn_flood(), AttackSpec::arp_flood()] {
            let cfg = sim_config(code, attack, false, phase_s);
            let out = simulate_phase_full(&cfg, &SimParams::default(), Phase::Attack).unwrap();
            let stats = compute_stats(&out.series, NOMINAL_NS, 0.10).unwrap();
            count_ok &= stats.count >= 10_000;
            worst = worst.max((stats.mean_ns - NOMINAL_NS as f64).abs());
        }
    }
    verdict(
        "single-core flood mean within 1 us of nominal over >= 10k cycles",
        count_ok && worst < 1_000.0,
        &format!("worst |mean - 1 ms| = {worst:.0} ns, all series >= 10k cycles: {count_ok}"),
    );
}

#[test]
fn dual_core_no_stress_robust_under_both_floods() {
    let bound = (1_011_000.0 * 1.005) as u64;
    let mut worst = 0u64;
    for code in ["DF", "DR", "DD"] {
        for attack in [AttackSpec::syn_flood(), AttackSpec::arp_flood()] {
            worst = worst.max(max_period(code, attack, false, Phase::Attack, DESK_SCALE_PHASE_S));
        }
    }
    verdict(
        "dual-core no-stress max <= 1.011 ms (+0.5%) under both floods",
        worst <= bound,
        &format!("worst = {:.4} ms, bound {:.4} ms", worst as f64 / 1e6, bound as f64 / 1e6),
    );
}

#[test]
fn syn_flood_cpu_breakdown_is_softirq_bound() {
    let cfg = sim_config("SF", AttackSpec::syn_flood(), false, DESK_SCALE_PHASE_S);
    let out = simulate_phase_full(&cfg, &SimParams::default(), Phase::Attack).unwrap();
    let agg = report_cpu_breakdown(&out.cores[0], out.elapsed_ns, f64::INFINITY);
    let (softirq, user) = (agg[0].softirq, agg[0].user);
    verdict(
        "single-core SYN flood softirq > 0.9 and user near 0",
        softirq > 0.9 && user < 0.05,
        &format!("softirq = {softirq:.3}, user = {user:.3}"),
    );
}

/// Independent recomputation: sort and read everything off the sorted list.
fn naive_stats(periods: &[u64], theta: f64) -> (u64, u64, u64, u64, u64, usize, usize) {
    let mut s = periods.to_vec();
    s.sort_unstable();
    let n = s.len();
    let rank = |q: f64| s[((q * n as f64).ceil() as usize).clamp(1, n) - 1];
    let hi = (1.0 + theta) * NOMINAL_NS as f64;
    let lo = (1.0 - theta) * NOMINAL_NS as f64;
    (
        s[0],
        s[n - 1],
        rank(0.5),
        rank(0.99),
        rank(0.999),
        s.iter().filter(|&&p| (p as f64) > hi).count(),
        s.iter().filter(|&&p| (p as f64) < lo).count(),
    )
}

#[test]
fn analysis_matches_naive_oracle_on_1000_random_series() {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0xACCE97);
    let mut checked = 0usize;
    for i in 0..1000 {
        let len = if i < 10 { i + 1 } else { rng.random_range(1..=100_000) };
        let periods: Vec<u64> =
            (0..len).map(|_| rng.random_range(100_000..30_000_000)).collect();
        let mut t = 0u64;
        let records = periods
            .iter()
            .enumerate()
            .map(|(idx, &p)| {
                t += p;
                CycleRecord { index: idx as u64, start_time_ns: t, period_ns: p }
            })
            .collect();
        let series = CycleSeries {
            phase: Phase::Attack,
            config_id: "X".into(),
            records,
            wall_duration_ns: t,
        };
        let st = compute_stats(&series, NOMINAL_NS, 0.10).unwrap();
        let (min, max, p50, p99, p999, high, low) = naive_stats(&periods, 0.10);
        let ok = st.min_ns == min
            && st.max_ns == max
            && st.p50_ns == p50
            && st.p99_ns == p99
            && st.p999_ns == p999
            && st.outlier_count_high == high
            && st.outlier_count_low == low;
        if !ok {
            verdict(
                "compute_stats equals naive sort-based oracle on 1000 series",
                false,
                &format!("mismatch on series {i} (len {len})"),
            );
        }
        checked += 1;
    }
    verdict(
        "compute_stats equals naive sort-based oracle on 1000 series",
        checked == 1000,
        &format!("{checked} series, lengths 1 to 100000, exact match"),
    );
}

#[test]
fn identical_config_and_seed_give_byte_identical_jsonl() {
    let dir = tempfile::tempdir().unwrap();
    let params = SimParams::default();
    let mut blobs = Vec::new();
    for run in 0..2 {
        let cfg = sim_config("SD", AttackSpec::syn_flood(), true, DESK_SCALE_PHASE_S);
        let out = simulate_phase_full(&cfg, &params, Phase::Attack).unwrap();
        let path = dir.path().join(format!("run{run}.jsonl"));
        cyclebench_core::series::write_jsonl(&path, &out.series).unwrap();
        blobs.push(std::fs::read(&path).unwrap());
    }
    verdict(
        "two runs with identical config+seed yield byte-identical JSONL",
        blobs[0] == blobs[1],
        &format!("{} bytes each", blobs[0].len()),
    );
}

fn have_raw_sockets() -> bool {
    let fd = unsafe { libc::socket(libc::AF_INET, libc::SOCK_RAW, libc::IPPROTO_RAW) };
    if fd >= 0 {
        unsafe { libc::close(fd) };
        true
    } else {
        false
    }
}

/// Test-local frame validation, independent of the generator's builder:
/// checks IPv4 + TCP structure and recomputes both checksums from scratch.
mod independent_parser {
    pub fn checksum(data: &[u8]) -> u16 {
        let mut sum: u32 = 0;
        let mut i = 0;
        while i < data.len() {
            let hi = u32::from(data[i]) << 8;
            let lo = if i + 1 < data.len() { u32::from(data[i + 1]) } else { 0 };
            sum += hi | lo;
            i += 2;
        }
        while sum > 0xffff {
            sum = (sum & 0xffff) + (sum >> 16);
        }
        !(sum as u16)
    }

    /// Returns (dst_port, is_syn) if the packet is a well-formed IPv4 TCP
    /// segment with valid IP and TCP checksums.
    pub fn validate_tcp(pkt: &[u8]) -> Option<(u16, bool)> {
        if pkt.len() < 40 || pkt[0] != 0x45 || pkt[9] != 6 {
            return None;
        }
        let total = usize::from(u16::from_be_bytes([pkt[2], pkt[3]]));
        if total > pkt.len() {
            return None;
        }
        if checksum(&pkt[..20]) != 0 {
            return None;
        }
        let tcp = &pkt[20..total];
        let mut pseudo = Vec::with_capacity(12 + tcp.len());
        pseudo.extend_from_slice(&pkt[12..20]);
        pseudo.push(0);
        pseudo.push(6);
        pseudo.extend_from_slice(&(tcp.len() as u16).to_be_bytes());
        pseudo.extend_from_slice(tcp);
        if checksum(&pseudo) != 0 {
            return None;
        }
        Some((u16::from_be_bytes([tcp[2], tcp[3]]), tcp[13] & 0x3f == 0x02))
    }

    /// Returns the announced IP if the frame is a broadcast gratuitous ARP
    /// request (sender IP equals target IP).
    pub fn validate_gratuitous_arp(frame: &[u8]) -> Option<[u8; 4]> {
        if frame.len() < 42 || frame[..6] != [0xff; 6] {
            return None;
        }
        if u16::from_be_bytes([frame[12], frame[13]]) != 0x0806 {
            return None;
        }
        let arp = &frame[14..42];
        let header_ok = arp[..8] == [0, 1, 8, 0, 6, 4, 0, 1];
        let sender_ip = &arp[14..18];
        let target_ip = &arp[24..28];
        if header_ok && sender_ip == target_ip {
            Some([arp[14], arp[15], arp[16], arp[17]])
        } else {
            None
        }
    }
}

/// Captures loopback traffic on an AF_PACKET socket, independently of the
/// generators' sending sockets.
struct Capture {
    fd: libc::c_int,
}

impl Capture {
    fn open_loopback() -> Option<Capture> {
        let fd = unsafe {
            libc::socket(libc::AF_PACKET, libc::SOCK_RAW, (libc::ETH_P_ALL as u16).to_be() as i32)
        };
        if fd < 0 {
            return None;
        }
        let idx = unsafe { libc::if_nametoindex(c"lo".as_ptr()) };
        let mut addr: libc::sockaddr_ll = unsafe { std::mem::zeroed() };
        addr.sll_family = libc::AF_PACKET as libc::sa_family_t;
        addr.sll_protocol = (libc::ETH_P_ALL as u16).to_be();
        addr.sll_ifindex = idx as libc::c_int;
        let rc = unsafe {
            libc::bind(
                fd,
                &addr as *const _ as *const libc::sockaddr,
                std::mem::size_of::<libc::sockaddr_ll>() as libc::socklen_t,
            )
        };
        if rc != 0 {
            unsafe { libc::close(fd) };
            return None;
        }
        let tv = libc::timeval { tv_sec: 0, tv_usec: 200_000 };
        unsafe {
            libc::setsockopt(
                fd,
                libc::SOL_SOCKET,
                libc::SO_RCVTIMEO,
                &tv as *const _ as *const libc::c_void,
                std::mem::size_of::<libc::timeval>() as libc::socklen_t,
            )
        };
        Some(Capture { fd })
    }

    fn recv(&self, buf: &mut [u8]) -> Option<usize> {
        let rc =
            unsafe { libc::recv(self.fd, buf.as_mut_ptr() as *mut libc::c_void, buf.len(), 0) };
        if rc < 0 {
            None
        } else {
            Some(rc as usize)
        }
    }
}

impl Drop for Capture {
    fn drop(&mut self) {
        unsafe { libc::close(self.fd) };
    }
}

#[test]
fn generator_pacing_and_frame_validity() {
    const CRITERION: &str = "flood pacing within +/-10% at 1k and 50k pps, frames valid";
    if !have_raw_sockets() {
        skip(CRITERION, "no raw-socket privilege");
        return;
    }
    // frame validity: capture a short burst of each flood on loopback and
    // run every frame through the test-local parser
    let capture = match Capture::open_loopback() {
        Some(c) => c,
        None => {
            skip(CRITERION, "cannot open AF_PACKET capture on lo");
            return;
        }
    };
    let syn_port = 48_123u16;
    let send = std::thread::spawn(move || {
        attack::syn_flood(&FloodOptions {
            target: Ipv4Addr::LOCALHOST,
            target_port: syn_port,
            source: Ipv4Addr::LOCALHOST,
            randomize_source: false,
            rate_pps: 500,
            duration_s: 1.0,
            rotate_ports: false,
        })
        .unwrap();
        attack::arp_flood("lo", Ipv4Addr::new(10, 77, 0, 1), 500, 1.0).unwrap();
    });
    let mut buf = [0u8; 2048];
    let mut valid_syn = 0u64;
    let mut valid_arp = 0u64;
    let deadline = Instant::now() + std::time::Duration::from_secs(4);
    while Instant::now() < deadline && (valid_syn < 100 || valid_arp < 100) {
        let Some(n) = capture.recv(&mut buf) else { continue };
        let frame = &buf[..n];
        if let Some(ip) = independent_parser::validate_gratuitous_arp(frame) {
            if ip == [10, 77, 0, 1] {
                valid_arp += 1;
            }
        } else if n > 14 {
            if let Some((dport, is_syn)) = independent_parser::validate_tcp(&frame[14..n]) {
                if dport == syn_port && is_syn {
                    valid_syn += 1;
                }
            }
        }
    }
    send.join().unwrap();

    // pacing: full-second telemetry windows within +/-10% at both rates
    let mut pacing_ok = true;
    let mut detail = format!("{valid_syn} valid SYNs, {valid_arp} valid ARPs captured");
    for rate in [1_000u64, 50_000] {
        let telemetry = attack::syn_flood(&FloodOptions {
            target: Ipv4Addr::LOCALHOST,
            target_port: 9,
            source: Ipv4Addr::LOCALHOST,
            randomize_source: false,
            rate_pps: rate,
            duration_s: 5.0,
            rotate_ports: false,
        })
        .unwrap();
        for (i, &sent) in telemetry.sent_pps.iter().enumerate() {
            let err = (sent as f64 - rate as f64).abs() / rate as f64;
            if err > 0.10 {
                pacing_ok = false;
                detail = format!("{rate} pps window {i}: sent {sent}");
            }
        }
    }
    verdict(CRITERION, valid_syn >= 100 && valid_arp >= 100 && pacing_ok, &detail);
}

fn listeners_below_1025() -> std::collections::BTreeSet<u16> {
    let mut ports = std::collections::BTreeSet::new();
    for file in ["/proc/net/tcp", "/proc/net/tcp6"] {
        let Ok(text) = std::fs::read_to_string(file) else { continue };
        for line in text.lines().skip(1) {
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() > 3 && fields[3] == "0A" {
                if let Some((_, port_hex)) = fields[1].rsplit_once(':') {
                    if let Ok(port) = u16::from_str_radix(port_hex, 16) {
                        if port <= 1024 {
                            ports.insert(port);
                        }
                    }
                }
            }
        }
    }
    ports
}

#[test]
fn scan_finds_exactly_the_one_listener() {
    const CRITERION: &str = "scan of 1-1024 with one listener finds exactly that port open";
    if !have_raw_sockets() {
        skip(CRITERION, "no raw-socket privilege");
        return;
    }
    if !listeners_below_1025().is_empty() {
        skip(CRITERION, "host already has listeners in 1-1024");
        return;
    }
    let listener = match std::net::TcpListener::bind("127.0.0.1:777") {
        Ok(l) => l,
        Err(e) => {
            skip(CRITERION, &format!("cannot bind port 777: {e}"));
            return;
        }
    };
    let summary = attack::syn_scan(
        Ipv4Addr::LOCALHOST,
        Ipv4Addr::LOCALHOST,
        PortRange::new(1, 1024).unwrap(),
        256,
    )
    .unwrap();
    drop(listener);
    verdict(
        CRITERION,
        summary.open == vec![777] && summary.probed == 1024,
        &format!(
            "open {:?}, {} closed, {} filtered, {:.2} s",
            summary.open, summary.closed, summary.filtered, summary.elapsed_s
        ),
    );
}

#[test]
fn end_to_end_matrix_reproduces_both_tables() {
    const CRITERION: &str = "bench matrix emits both tables; re-analysis is bit-identical";
    let dir = tempfile::tempdir().unwrap();
    let attacks = [AttackSpec::syn_flood(), AttackSpec::arp_flood(), AttackSpec::syn_scan()];
    let configs = canonical_matrix(300.0, &attacks, &[false, true], Backend::Sim).unwrap();
    let out =
        orchestrator::run_matrix(&configs, &SimParams::default(), 1.0 / 60.0, dir.path())
            .unwrap();
    assert!(out.failures.is_empty(), "failed runs: {:?}", out.failures);

    let expected_cols = vec!["Idle", "SYN flooding", "ARP flooding", "Nmap"];
    let mut structure_ok = true;
    for table in [out.no_stress.as_ref().unwrap(), out.stress.as_ref().unwrap()] {
        structure_ok &= table.rows == CANONICAL_CODES;
        structure_ok &= table.columns == expected_cols;
        structure_ok &= table.cells.iter().flatten().all(|c| c.is_some());
    }

    let read_tables = |root: &std::path::Path| {
        ["table_no_stress.csv", "table_stress.csv", "table_no_stress.txt", "table_stress.txt"]
            .map(|f| std::fs::read(root.join(f)).unwrap())
    };
    let first = read_tables(dir.path());
    let re = orchestrator::analyze_dir(dir.path()).unwrap();
    let second = read_tables(dir.path());
    let identical = first == second
        && re.no_stress == out.no_stress
        && re.stress == out.stress;
    verdict(
        CRITERION,
        structure_ok && identical,
        &format!(
            "42 runs, rows {:?}, columns {:?}, re-analysis identical: {identical}",
            out.no_stress.as_ref().unwrap().rows,
            expected_cols
        ),
    );
}
