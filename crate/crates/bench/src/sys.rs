//! Thin wrappers around the scheduling and timing syscalls the agent needs.
//! Everything here is Linux-specific.

use std::io;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SysError {
    #[error("insufficient privilege: {0}")]
    Privilege(String),
    #[error("affinity error: {0}")]
    Affinity(String),
    #[error("deadline admission rejected: {0}")]
    Admission(String),
    #[error("os error: {0}")]
    Os(#[from] io::Error),
}

pub fn now_ns() -> u64 {
    let mut ts = libc::timespec { tv_sec: 0, tv_nsec: 0 };
    unsafe { libc::clock_gettime(libc::CLOCK_MONOTONIC, &mut ts) };
    ts.tv_sec as u64 * 1_000_000_000 + ts.tv_nsec as u64
}

/// Absolute-time sleep on the monotonic clock. Returns immediately if the
/// deadline already passed.
pub fn sleep_until_ns(deadline_ns: u64) {
    let ts = libc::timespec {
        tv_sec: (deadline_ns / 1_000_000_000) as libc::time_t,
        tv_nsec: (deadline_ns % 1_000_000_000) as libc::c_long,
    };
    loop {
        let rc = unsafe {
            libc::clock_nanosleep(
                libc::CLOCK_MONOTONIC,
                libc::TIMER_ABSTIME,
                &ts,
                std::ptr::null_mut(),
            )
        };
        if rc != libc::EINTR {
            return;
        }
    }
}

pub fn set_affinity(cores: &[usize]) -> Result<(), SysError> {
    unsafe {
        let mut set: libc::cpu_set_t = std::mem::zeroed();
        for &c in cores {
            if c >= libc::CPU_SETSIZE as usize {
                return Err(SysError::Affinity(format!("core index {c} out of range")));
            }
            libc::CPU_SET(c, &mut set);
        }
        if libc::sched_setaffinity(0, std::mem::size_of::<libc::cpu_set_t>(), &set) != 0 {
            let err = io::Error::last_os_error();
            return Err(if err.raw_os_error() == Some(libc::EINVAL) {
                SysError::Affinity(format!("cores {cores:?} not available: {err}"))
            } else {
                SysError::Os(err)
            });
        }
    }
    Ok(())
}

pub fn get_affinity() -> Result<Vec<usize>, SysError> {
    unsafe {
        let mut set: libc::cpu_set_t = std::mem::zeroed();
        if libc::sched_getaffinity(0, std::mem::size_of::<libc::cpu_set_t>(), &mut set) != 0 {
            return Err(SysError::Os(io::Error::last_os_error()));
        }
        Ok((0..libc::CPU_SETSIZE as usize).filter(|&c| libc::CPU_ISSET(c, &set)).collect())
    }
}

pub fn set_rt_policy(policy: libc::c_int, priority: u8) -> Result<(), SysError> {
    let param = libc::sched_param { sched_priority: priority as libc::c_int };
    if unsafe { libc::sched_setscheduler(0, policy, &param) } != 0 {
        let err = io::Error::last_os_error();
        return Err(match err.raw_os_error() {
            Some(libc::EPERM) => {
                SysError::Privilege(format!("sched_setscheduler needs CAP_SYS_NICE: {err}"))
            }
            Some(libc::EINVAL) => SysError::Admission(format!("invalid policy/priority: {err}")),
            _ => SysError::Os(err),
        });
    }
    Ok(())
}

pub fn get_policy() -> Result<(libc::c_int, u8), SysError> {
    let policy = unsafe { libc::sched_getscheduler(0) };
    if policy < 0 {
        return Err(SysError::Os(io::Error::last_os_error()));
    }
    let mut param = libc::sched_param { sched_priority: 0 };
    if unsafe { libc::sched_getparam(0, &mut param) } != 0 {
        return Err(SysError::Os(io::Error::last_os_error()));
    }
    Ok((policy, param.sched_priority as u8))
}

/// `struct sched_attr` for sched_setattr(2); not exposed by libc.
#[repr(C)]
#[derive(Debug, Default, Clone, Copy)]
pub struct SchedAttr {
    pub size: u32,
    pub sched_policy: u32,
    pub sched_flags: u64,
    pub sched_nice: i32,
    pub sched_priority: u32,
    pub sched_runtime: u64,
    pub sched_deadline: u64,
    pub sched_period: u64,
}

pub const SCHED_DEADLINE: u32 = 6;
const SYS_SCHED_SETATTR: libc::c_long = 314;
const SYS_SCHED_GETATTR: libc::c_long = 315;

pub fn set_deadline(runtime_ns: u64, deadline_ns: u64, period_ns: u64) -> Result<(), SysError> {
    let attr = SchedAttr {
        size: std::mem::size_of::<SchedAttr>() as u32,
        sched_policy: SCHED_DEADLINE,
        sched_runtime: runtime_ns,
        sched_deadline: deadline_ns,
        sched_period: period_ns,
        ..Default::default()
    };
    if unsafe { libc::syscall(SYS_SCHED_SETATTR, 0, &attr, 0u32) } != 0 {
        let err = io::Error::last_os_error();
        return Err(match err.raw_os_error() {
            Some(libc::EPERM) => {
                SysError::Privilege(format!("sched_setattr needs CAP_SYS_NICE: {err}"))
            }
            Some(libc::EBUSY) | Some(libc::EINVAL) => {
                SysError::Admission(format!("SCHED_DEADLINE admission failed: {err}"))
            }
            _ => SysError::Os(err),
        });
    }
    Ok(())
}

pub fn get_sched_attr() -> Result<SchedAttr, SysError> {
    let mut attr = SchedAttr::default();
    let size = std::mem::size_of::<SchedAttr>() as u32;
    if unsafe { libc::syscall(SYS_SCHED_GETATTR, 0, &mut attr, size, 0u32) } != 0 {
        return Err(SysError::Os(io::Error::last_os_error()));
    }
    Ok(attr)
}

/// Pins current + future pages; failure is reported, not fatal (the caller
/// decides whether unlocked memory is acceptable).
pub fn lock_memory() -> Result<(), SysError> {
    if unsafe { libc::mlockall(libc::MCL_CURRENT | libc::MCL_FUTURE) } != 0 {
        let err = io::Error::last_os_error();
        return Err(if err.raw_os_error() == Some(libc::EPERM) {
            SysError::Privilege(format!("mlockall needs CAP_IPC_LOCK: {err}"))
        } else {
            SysError::Os(err)
        });
    }
    Ok(())
}

pub fn online_cores() -> usize {
    let n = unsafe { libc::sysconf(libc::_SC_NPROCESSORS_ONLN) };
    if n < 1 {
        1
    } else {
        n as usize
    }
}

pub fn kernel_version() -> String {
    unsafe {
        let mut uts: libc::utsname = std::mem::zeroed();
        if libc::uname(&mut uts) != 0 {
            return "unknown".into();
        }
        let release = std::ffi::CStr::from_ptr(uts.release.as_ptr()).to_string_lossy();
        let machine = std::ffi::CStr::from_ptr(uts.machine.as_ptr()).to_string_lossy();
        format!("{release} {machine}")
    }
}

/// Per-core jiffy counters from /proc/stat: (user+nice, system+irq, softirq, idle+iowait).
pub fn proc_stat_cores() -> io::Result<Vec<(u64, u64, u64, u64)>> {
    let text = std::fs::read_to_string("/proc/stat")?;
    let mut out = Vec::new();
    for line in text.lines() {
        let mut it = line.split_whitespace();
        let Some(label) = it.next() else { continue };
        if !label.starts_with("cpu") || label == "cpu" {
            continue;
        }
        let v: Vec<u64> = it.map(|f| f.parse().unwrap_or(0)).collect();
        if v.len() < 8 {
            continue;
        }
        // user nice system idle iowait irq softirq steal
        out.push((v[0] + v[1], v[2] + v[5], v[6], v[3] + v[4]));
    }
    Ok(out)
}
