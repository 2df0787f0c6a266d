//! Hand-built frames for the generators: Ethernet, gratuitous ARP, and
//! IPv4/TCP SYN segments with proper checksums.

use std::net::Ipv4Addr;

pub const ETHERTYPE_ARP: u16 = 0x0806;
pub const ETHERTYPE_IPV4: u16 = 0x0800;
pub const BROADCAST_MAC: [u8; 6] = [0xff; 6];

pub fn ethernet_frame(dst: [u8; 6], src: [u8; 6], ethertype: u16, payload: &[u8]) -> Vec<u8> {
    let mut f = Vec::with_capacity(14 + payload.len());
    f.extend_from_slice(&dst);
    f.extend_from_slice(&src);
    f.extend_from_slice(&ethertype.to_be_bytes());
    f.extend_from_slice(payload);
    f
}

/// Gratuitous ARP request: sender IP = target IP, broadcast destination,
/// target MAC zeroed. Announces `ip` as owned by `src_mac`.
pub fn gratuitous_arp(src_mac: [u8; 6], ip: Ipv4Addr) -> Vec<u8> {
    let mut p = Vec::with_capacity(28);
    p.extend_from_slice(&1u16.to_be_bytes()); // htype: ethernet
    p.extend_from_slice(&ETHERTYPE_IPV4.to_be_bytes()); // ptype: IPv4
    p.push(6); // hlen
    p.push(4); // plen
    p.extend_from_slice(&1u16.to_be_bytes()); // oper: request
    p.extend_from_slice(&src_mac);
    p.extend_from_slice(&ip.octets()); // sender IP = target IP (gratuitous)
    p.extend_from_slice(&[0u8; 6]); // target MAC unknown
    p.extend_from_slice(&ip.octets());
    ethernet_frame(BROADCAST_MAC, src_mac, ETHERTYPE_ARP, &p)
}

/// RFC 1071 internet checksum.
pub fn internet_checksum(data: &[u8]) -> u16 {
    let mut sum = 0u32;
    for chunk in data.chunks(2) {
        let word = if chunk.len() == 2 {
            u16::from_be_bytes([chunk[0], chunk[1]])
        } else {
            u16::from_be_bytes([chunk[0], 0])
        };
        sum += u32::from(word);
    }
    while sum >> 16 != 0 {
        sum = (sum & 0xffff) + (sum >> 16);
    }
    !(sum as u16)
}

pub struct TcpSyn {
    pub src: Ipv4Addr,
    pub dst: Ipv4Addr,
    pub src_port: u16,
    pub dst_port: u16,
    pub seq: u32,
}

/// IPv4 header + TCP SYN segment (no options, no payload), checksummed.
pub fn ipv4_tcp_syn(syn: &TcpSyn) -> Vec<u8> {
    let mut tcp = [0u8; 20];
    tcp[0..2].copy_from_slice(&syn.src_port.to_be_bytes());
    tcp[2..4].copy_from_slice(&syn.dst_port.to_be_bytes());
    tcp[4..8].copy_from_slice(&syn.seq.to_be_bytes());
    tcp[12] = 5 << 4; // data offset
    tcp[13] = 0x02; // SYN
    tcp[14..16].copy_from_slice(&64_240u16.to_be_bytes()); // window
    let mut pseudo = Vec::with_capacity(12 + 20);
    pseudo.extend_from_slice(&syn.src.octets());
    pseudo.extend_from_slice(&syn.dst.octets());
    pseudo.extend_from_slice(&[0, 6]); // zero, protocol
    pseudo.extend_from_slice(&20u16.to_be_bytes());
    pseudo.extend_from_slice(&tcp);
    let csum = internet_checksum(&pseudo);
    tcp[16..18].copy_from_slice(&csum.to_be_bytes());

    let mut ip = [0u8; 20];
    ip[0] = 0x45; // v4, IHL 5
    ip[2..4].copy_from_slice(&40u16.to_be_bytes()); // total length
    ip[6] = 0x40; // don't fragment
    ip[8] = 64; // TTL
    ip[9] = 6; // TCP
    ip[12..16].copy_from_slice(&syn.src.octets());
    ip[16..20].copy_from_slice(&syn.dst.octets());
    let icsum = internet_checksum(&ip);
    ip[10..12].copy_from_slice(&icsum.to_be_bytes());

    let mut pkt = Vec::with_capacity(40);
    pkt.extend_from_slice(&ip);
    pkt.extend_from_slice(&tcp);
    pkt
}

/// TCP flag inspection for response counting and scan classification.
/// Returns (src_ip, src_port, dst_port, flags) for an IPv4/TCP packet.
pub fn parse_tcp(pkt: &[u8]) -> Option<(Ipv4Addr, u16, u16, u8)> {
    if pkt.len() < 20 || pkt[0] >> 4 != 4 || pkt[9] != 6 {
        return None;
    }
    let ihl = usize::from(pkt[0] & 0x0f) * 4;
    let tcp = pkt.get(ihl..ihl + 20)?;
    Some((
        Ipv4Addr::new(pkt[12], pkt[13], pkt[14], pkt[15]),
        u16::from_be_bytes([tcp[0], tcp[1]]),
        u16::from_be_bytes([tcp[2], tcp[3]]),
        tcp[13],
    ))
}

pub const TCP_SYN: u8 = 0x02;
pub const TCP_ACK: u8 = 0x10;
pub const TCP_RST: u8 = 0x04;
