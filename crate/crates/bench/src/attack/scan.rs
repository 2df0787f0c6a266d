//! SYN scanner: one SYN per port with one retry, classifying each port as
//! open (SYN/ACK), closed (RST) or filtered (no answer). Works in batches so
//! full-range scans stay fast; unthrottled by design.

use std::collections::HashMap;
use std::net::Ipv4Addr;
use std::time::{Duration, Instant};

use cyclebench_core::model::PortRange;
use serde::Serialize;

use super::packet::{self, TcpSyn, TCP_ACK, TCP_RST, TCP_SYN};
use super::{AttackError, RawIpSocket, RawTcpSniffer};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PortState {
    Open,
    Closed,
    Filtered,
}

#[derive(Debug, Serialize)]
pub struct ScanSummary {
    pub probed: usize,
    pub open: Vec<u16>,
    pub closed: usize,
    pub filtered: usize,
    pub elapsed_s: f64,
    pub retries: u64,
}

const BATCH_TIMEOUT: Duration = Duration::from_millis(500);
const MAX_RETRIES: u32 = 1;

pub fn syn_scan(
    source: Ipv4Addr,
    target: Ipv4Addr,
    range: PortRange,
    parallelism: usize,
) -> Result<ScanSummary, AttackError> {
    if parallelism == 0 {
        return Err(AttackError::Config("parallelism must be >= 1".into()));
    }
    let send_sock = RawIpSocket::new()?;
    let sniffer = RawTcpSniffer::new(50)?;
    let started = Instant::now();

    let ports: Vec<u16> = (range.first..=range.last).collect();
    let mut states: HashMap<u16, PortState> = HashMap::with_capacity(ports.len());
    let mut retries = 0u64;
    let src_port_base: u16 = 47_000;

    for batch in ports.chunks(parallelism) {
        let mut pending: Vec<u16> = batch.to_vec();
        for attempt in 0..=MAX_RETRIES {
            if pending.is_empty() {
                break;
            }
            if attempt > 0 {
                retries += pending.len() as u64;
            }
            for &port in &pending {
                let pkt = packet::ipv4_tcp_syn(&TcpSyn {
                    src: source,
                    dst: target,
                    // encode the probed port into the source port so replies
                    // can be matched without tracking sequence numbers
                    src_port: src_port_base.wrapping_add(port % 16_384),
                    dst_port: port,
                    seq: u32::from(port) << 8,
                });
                send_sock.send_to(&pkt, target)?;
            }
            let deadline = Instant::now() + BATCH_TIMEOUT;
            let mut buf = [0u8; 2048];
            while Instant::now() < deadline && !pending.is_empty() {
                let Ok(Some(n)) = sniffer.recv(&mut buf) else { continue };
                let Some((src, sport, dport, flags)) = packet::parse_tcp(&buf[..n]) else {
                    continue;
                };
                // reply comes from the probed port; its dst is our src port
                if src != target || dport != src_port_base.wrapping_add(sport % 16_384) {
                    continue;
                }
                let state = if flags & (TCP_SYN | TCP_ACK) == TCP_SYN | TCP_ACK {
                    Some(PortState::Open)
                } else if flags & TCP_RST != 0 {
                    Some(PortState::Closed)
                } else {
                    None
                };
                if let Some(state) = state {
                    states.insert(sport, state);
                    pending.retain(|&p| p != sport);
                }
            }
        }
        for port in pending {
            states.insert(port, PortState::Filtered);
        }
    }

    let mut open: Vec<u16> =
        states.iter().filter(|(_, &s)| s == PortState::Open).map(|(&p, _)| p).collect();
    open.sort_unstable();
    Ok(ScanSummary {
        probed: ports.len(),
        closed: states.values().filter(|&&s| s == PortState::Closed).count(),
        filtered: states.values().filter(|&&s| s == PortState::Filtered).count(),
        open,
        elapsed_s: started.elapsed().as_secs_f64(),
        retries,
    })
}
