//! Traffic and load generators.

pub mod arp_flood;
pub mod pacing;
pub mod packet;
pub mod scan;
pub mod stress;
pub mod syn_flood;

use std::io;

use thiserror::Error;

pub use arp_flood::arp_flood;
pub use pacing::PacingBucket;
pub use scan::{syn_scan, PortState, ScanSummary};
pub use stress::{cpu_stress, LoadReport, StressHandle};
pub use syn_flood::{syn_flood, FloodOptions, FloodTelemetry};

#[derive(Debug, Error)]
pub enum AttackError {
    #[error("insufficient privilege: {0}")]
    Privilege(String),
    #[error("interface error: {0}")]
    Interface(String),
    #[error("invalid argument: {0}")]
    Config(String),
    #[error("io error: {0}")]
    Io(#[from] io::Error),
}

impl AttackError {
    fn from_os(context: &str) -> AttackError {
        let err = io::Error::last_os_error();
        match err.raw_os_error() {
            Some(libc::EPERM) | Some(libc::EACCES) => {
                AttackError::Privilege(format!("{context}: {err}"))
            }
            Some(libc::ENODEV) | Some(libc::ENXIO) => {
                AttackError::Interface(format!("{context}: {err}"))
            }
            _ => AttackError::Io(err),
        }
    }
}

/// Raw IPv4 socket with IP_HDRINCL: we build the full IP header ourselves.
pub(crate) struct RawIpSocket {
    fd: libc::c_int,
}

impl RawIpSocket {
    pub fn new() -> Result<Self, AttackError> {
        let fd = unsafe { libc::socket(libc::AF_INET, libc::SOCK_RAW, libc::IPPROTO_RAW) };
        if fd < 0 {
            return Err(AttackError::from_os("socket(AF_INET, SOCK_RAW, IPPROTO_RAW)"));
        }
        let one: libc::c_int = 1;
        unsafe {
            libc::setsockopt(
                fd,
                libc::IPPROTO_IP,
                libc::IP_HDRINCL,
                &one as *const _ as *const libc::c_void,
                std::mem::size_of::<libc::c_int>() as libc::socklen_t,
            )
        };
        Ok(RawIpSocket { fd })
    }

    pub fn send_to(&self, packet: &[u8], dst: std::net::Ipv4Addr) -> Result<(), AttackError> {
        let addr = libc::sockaddr_in {
            sin_family: libc::AF_INET as libc::sa_family_t,
            sin_port: 0,
            sin_addr: libc::in_addr { s_addr: u32::from(dst).to_be() },
            sin_zero: [0; 8],
        };
        let rc = unsafe {
            libc::sendto(
                self.fd,
                packet.as_ptr() as *const libc::c_void,
                packet.len(),
                0,
                &addr as *const _ as *const libc::sockaddr,
                std::mem::size_of::<libc::sockaddr_in>() as libc::socklen_t,
            )
        };
        if rc < 0 {
            return Err(AttackError::from_os("sendto"));
        }
        Ok(())
    }
}

impl Drop for RawIpSocket {
    fn drop(&mut self) {
        unsafe { libc::close(self.fd) };
    }
}

/// Raw TCP receive socket: sees every inbound TCP/IPv4 packet with header.
pub(crate) struct RawTcpSniffer {
    fd: libc::c_int,
}

impl RawTcpSniffer {
    pub fn new(timeout_ms: u64) -> Result<Self, AttackError> {
        let fd = unsafe { libc::socket(libc::AF_INET, libc::SOCK_RAW, libc::IPPROTO_TCP) };
        if fd < 0 {
            return Err(AttackError::from_os("socket(AF_INET, SOCK_RAW, IPPROTO_TCP)"));
        }
        let tv = libc::timeval {
            tv_sec: (timeout_ms / 1000) as libc::time_t,
            tv_usec: ((timeout_ms % 1000) * 1000) as libc::suseconds_t,
        };
        unsafe {
            libc::setsockopt(
                fd,
                libc::SOL_SOCKET,
                libc::SO_RCVTIMEO,
                &tv as *const _ as *const libc::c_void,
                std::mem::size_of::<libc::timeval>() as libc::socklen_t,
            )
        };
        Ok(RawTcpSniffer { fd })
    }

    /// Returns the packet bytes, or None on timeout.
    pub fn recv(&self, buf: &mut [u8]) -> Result<Option<usize>, AttackError> {
        let rc = unsafe {
            libc::recv(self.fd, buf.as_mut_ptr() as *mut libc::c_void, buf.len(), 0)
        };
        if rc < 0 {
            let err = io::Error::last_os_error();
            if err.raw_os_error() == Some(libc::EAGAIN) {
                return Ok(None);
            }
            return Err(AttackError::Io(err));
        }
        Ok(Some(rc as usize))
    }
}

impl Drop for RawTcpSniffer {
    fn drop(&mut self) {
        unsafe { libc::close(self.fd) };
    }
}

/// AF_PACKET socket bound to one interface, for link-layer frames.
#[derive(Debug)]
pub(crate) struct PacketSocket {
    fd: libc::c_int,
    ifindex: libc::c_int,
}

impl PacketSocket {
    pub fn new(interface: &str) -> Result<Self, AttackError> {
        let c_iface = std::ffi::CString::new(interface)
            .map_err(|_| AttackError::Interface("interface name contains NUL".into()))?;
        let ifindex = unsafe { libc::if_nametoindex(c_iface.as_ptr()) };
        if ifindex == 0 {
            return Err(AttackError::Interface(format!("no such interface: {interface}")));
        }
        let fd = unsafe {
            libc::socket(libc::AF_PACKET, libc::SOCK_RAW, (libc::ETH_P_ALL as u16).to_be() as i32)
        };
        if fd < 0 {
            return Err(AttackError::from_os("socket(AF_PACKET, SOCK_RAW)"));
        }
        Ok(PacketSocket { fd, ifindex: ifindex as libc::c_int })
    }

    pub fn send(&self, frame: &[u8]) -> Result<(), AttackError> {
        let mut addr: libc::sockaddr_ll = unsafe { std::mem::zeroed() };
        addr.sll_family = libc::AF_PACKET as libc::sa_family_t;
        addr.sll_ifindex = self.ifindex;
        addr.sll_halen = 6;
        addr.sll_addr[..6].copy_from_slice(&frame[..6]);
        let rc = unsafe {
            libc::sendto(
                self.fd,
                frame.as_ptr() as *const libc::c_void,
                frame.len(),
                0,
                &addr as *const _ as *const libc::sockaddr,
                std::mem::size_of::<libc::sockaddr_ll>() as libc::socklen_t,
            )
        };
        if rc < 0 {
            return Err(AttackError::from_os("sendto(AF_PACKET)"));
        }
        Ok(())
    }
}

impl Drop for PacketSocket {
    fn drop(&mut self) {
        unsafe { libc::close(self.fd) };
    }
}

/// MAC address of an interface, read from sysfs.
pub(crate) fn interface_mac(interface: &str) -> Result<[u8; 6], AttackError> {
    let path = format!("/sys/class/net/{interface}/address");
    let text = std::fs::read_to_string(&path)
        .map_err(|e| AttackError::Interface(format!("{path}: {e}")))?;
    let mut mac = [0u8; 6];
    for (i, part) in text.trim().split(':').enumerate() {
        if i >= 6 {
            return Err(AttackError::Interface(format!("bad MAC in {path}")));
        }
        mac[i] = u8::from_str_radix(part, 16)
            .map_err(|_| AttackError::Interface(format!("bad MAC in {path}")))?;
    }
    Ok(mac)
}
