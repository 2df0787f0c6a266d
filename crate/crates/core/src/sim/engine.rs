//! Deterministic discrete-event simulation of the cyclic control task under
//! packet interference and CPU stress.
//!
//! Priority model per core: in-flight hardirq/softirq service bursts are
//! non-preemptible; the RT control task preempts queued softirq work at burst
//! boundaries and normal-class (stress) work immediately, except while a
//! worker sits in a short non-preemptible kernel section.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::model::{
    Architecture, AttackSpec, CycleRecord, CycleSeries, ExperimentConfig, Phase, SchedulerPolicy,
};
use crate::sim::params::{ArrivalModel, SimParams, TrafficProfile};

const NS_PER_SEC: u64 = 1_000_000_000;
/// Receive backlog cap in packets; arrivals beyond it are dropped.
const BACKLOG_CAP_PKTS: u64 = 4096;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SimError {
    #[error("config rejected: {0}")]
    Config(String),
    #[error("CBS admission failed: runtime {runtime_ns} ns exceeds period {period_ns} ns")]
    CbsAdmission { runtime_ns: u64, period_ns: u64 },
}

/// Busy time per scheduling class, nanoseconds.
#[derive(Debug, Default, Clone, Copy, PartialEq, Eq)]
pub struct ClassBusy {
    pub hardirq: u64,
    pub softirq: u64,
    pub rt_user: u64,
    pub normal_user: u64,
    pub idle: u64,
}

impl ClassBusy {
    pub fn total(&self) -> u64 {
        self.hardirq + self.softirq + self.rt_user + self.normal_user + self.idle
    }

    fn add(&mut self, class: Class, ns: u64) {
        match class {
            Class::Hardirq => self.hardirq += ns,
            Class::Softirq => self.softirq += ns,
            Class::RtUser => self.rt_user += ns,
            Class::NormalUser => self.normal_user += ns,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Class {
    Hardirq,
    Softirq,
    RtUser,
    NormalUser,
}

/// Per-core accounting: one bin per simulated second plus the grand total.
#[derive(Debug, Clone, Default)]
pub struct CoreAccounting {
    pub bins: Vec<ClassBusy>,
    pub total: ClassBusy,
}

impl CoreAccounting {
    fn record(&mut self, class: Class, start: u64, end: u64) {
        debug_assert!(end >= start);
        self.total.add(class, end - start);
        let mut t = start;
        while t < end {
            let bin = (t / NS_PER_SEC) as usize;
            if self.bins.len() <= bin {
                self.bins.resize(bin + 1, ClassBusy::default());
            }
            let bin_end = ((bin as u64) + 1) * NS_PER_SEC;
            let span_end = end.min(bin_end);
            self.bins[bin].add(class, span_end - t);
            t = span_end;
        }
    }
}

/// Constant-bandwidth-server state for the deadline policy.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CbsState {
    pub budget_ns: u64,
    pub absolute_deadline_ns: u64,
    pub replenish_period_ns: u64,
    pub runtime_ns: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Occupant {
    Hardirq { remaining: u64 },
    /// Coalesced drop/reclaim pass; softirq class, fully non-preemptible.
    Flush { remaining: u64 },
    /// One softirq service burst, non-preemptible.
    Softirq { remaining: u64 },
    Rt { remaining: u64 },
    Hog,
}

impl Occupant {
    fn class(&self) -> Class {
        match self {
            Occupant::Hardirq { .. } => Class::Hardirq,
            Occupant::Flush { .. } | Occupant::Softirq { .. } => Class::Softirq,
            Occupant::Rt { .. } => Class::RtUser,
            Occupant::Hog => Class::NormalUser,
        }
    }

    /// In-flight burst that nothing in the model interrupts.
    fn non_preemptible(&self) -> bool {
        matches!(
            self,
            Occupant::Hardirq { .. } | Occupant::Flush { .. } | Occupant::Softirq { .. }
        )
    }
}

/// Run queue and accounting for one simulated core.
#[derive(Debug)]
pub struct CoreState {
    occupant: Option<Occupant>,
    occ_seq: u64,
    occ_start: u64,
    /// Hardirq bursts deferred while a non-preemptible burst is in flight.
    pending_hardirq: VecDeque<u64>,
    softirq_backlog_pkts: u64,
    softirq_ns_per_pkt: u64,
    flush_pending: bool,
    hog_present: bool,
    /// Current or next non-preemptible section of the hog, absolute times.
    np_start: u64,
    np_end: u64,
    np_rng: ChaCha8Rng,
    pub acct: CoreAccounting,
}

impl CoreState {
    fn new(seed: u64, hog: bool) -> Self {
        CoreState {
            occupant: None,
            occ_seq: 0,
            occ_start: 0,
            pending_hardirq: VecDeque::new(),
            softirq_backlog_pkts: 0,
            softirq_ns_per_pkt: 0,
            flush_pending: false,
            hog_present: hog,
            np_start: 0,
            np_end: 0,
            np_rng: ChaCha8Rng::seed_from_u64(seed),
            acct: CoreAccounting::default(),
        }
    }

    /// Advances the hog's non-preemptible section schedule up to `t` and
    /// returns the end of the section containing `t`, if any.
    fn np_section_end_at(&mut self, t: u64, section_ns: u64, interval_ns: u64) -> Option<u64> {
        if !self.hog_present || section_ns == 0 {
            return None;
        }
        while self.np_end <= t {
            let gap = self.np_rng.random_range(interval_ns / 2..=interval_ns * 3 / 2);
            self.np_start = self.np_end + gap;
            self.np_end = self.np_start + section_ns;
        }
        (self.np_start <= t).then_some(self.np_end)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum TaskState {
    Sleeping,
    /// Released; dispatchable once `eligible_at` has passed.
    Pending { eligible_at: u64 },
    Running,
    /// CBS budget exhausted; parked until the next replenishment.
    Throttled,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum EventKind {
    OccupantDone { core: usize, occ_seq: u64 },
    NpSectionEnd { core: usize, occ_seq: u64 },
    Wake,
    Release,
    Eligible,
    Replenish,
    Arrival { core: usize, pkts: u64, hardirq_only: bool },
    PhaseEnd,
}

impl EventKind {
    /// Tie-break order at equal timestamps. Releases must land before the
    /// replenishment poll of the same instant.
    fn rank(&self) -> u8 {
        match self {
            EventKind::OccupantDone { .. } | EventKind::NpSectionEnd { .. } => 0,
            EventKind::Wake | EventKind::Release | EventKind::Eligible => 1,
            EventKind::Replenish => 2,
            EventKind::Arrival { .. } => 3,
            EventKind::PhaseEnd => 4,
        }
    }
}

#[derive(Debug, PartialEq, Eq, PartialOrd, Ord)]
struct QueuedEvent {
    time: u64,
    rank: u8,
    seq: u64,
    kind: EventKind,
}

/// Everything a simulated phase produces.
#[derive(Debug)]
pub struct SimOutput {
    pub series: CycleSeries,
    pub cores: Vec<CoreAccounting>,
    /// Intervals the control job actually executed (CBS service audit).
    pub rt_service: Vec<(u64, u64)>,
    pub packets_offered: u64,
    pub packets_dropped: u64,
    pub elapsed_ns: u64,
}

struct ControlTask {
    core: usize,
    state: TaskState,
    remaining_exec: u64,
    /// Job released (wakeup delivered to the scheduler).
    released: bool,
    release_time: u64,
    /// First dispatch instant of the current job; the record timestamp.
    job_start: Option<u64>,
    prev_start: Option<u64>,
    next_index: u64,
    cbs: Option<CbsState>,
}

pub struct Engine<'a> {
    config: &'a ExperimentConfig,
    params: &'a SimParams,
    phase: Phase,
    now: u64,
    end: u64,
    seq: u64,
    queue: BinaryHeap<Reverse<QueuedEvent>>,
    cores: Vec<CoreState>,
    task: Option<ControlTask>,
    records: Vec<CycleRecord>,
    rt_service: Vec<(u64, u64)>,
    jitter_rng: ChaCha8Rng,
    arrival_rng: ChaCha8Rng,
    traffic: Option<TrafficProfile>,
    traffic_end: u64,
    interference_core: usize,
    spill_acc: f64,
    accepted_since_flush: u64,
    packets_offered: u64,
    packets_dropped: u64,
    finished: bool,
}

fn phase_seed(params: &SimParams, config: &ExperimentConfig, phase: Phase, stream: u64) -> u64 {
    // FNV-1a over the run tag, mixed with phase and stream ids.
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in config.run_tag().bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x100_0000_01b3);
    }
    h ^= match phase {
        Phase::IdlePre => 0x11,
        Phase::Attack => 0x22,
        Phase::IdlePost => 0x33,
    };
    h = h.wrapping_mul(0x100_0000_01b3);
    params.rng_seed.wrapping_add(h).wrapping_add(stream.wrapping_mul(0x9e37_79b9_7f4a_7c15))
}

impl<'a> Engine<'a> {
    pub fn new(
        config: &'a ExperimentConfig,
        params: &'a SimParams,
        phase: Phase,
    ) -> Result<Self, SimError> {
        config.validate().map_err(|e| SimError::Config(e.to_string()))?;
        params.validate().map_err(|e| SimError::Config(e.to_string()))?;
        if let SchedulerPolicy::Deadline { runtime_ns, period_ns, .. } = config.scheduler {
            if runtime_ns > period_ns {
                return Err(SimError::CbsAdmission { runtime_ns, period_ns });
            }
        }

        let end = (config.phase_duration_s * NS_PER_SEC as f64).round() as u64;
        let stress = config.stress.enabled;
        let n_cores = config.architecture.core_count();
        let cores: Vec<CoreState> = (0..n_cores)
            .map(|i| {
                let hog = stress && config.stress.pinning.contains(&i);
                CoreState::new(phase_seed(params, config, phase, 100 + i as u64), hog)
            })
            .collect();

        let traffic = if phase == Phase::Attack {
            params.traffic_for(&config.attack)
        } else {
            None
        };
        let traffic_end = match traffic.and_then(|t| t.duration_s) {
            Some(d) => end.min((d * NS_PER_SEC as f64).round() as u64),
            None => end,
        };

        let task = config.architecture.control_core().map(|core| ControlTask {
            core,
            state: TaskState::Sleeping,
            remaining_exec: 0,
            released: false,
            release_time: 0,
            job_start: None,
            prev_start: None,
            next_index: 0,
            cbs: match config.scheduler {
                SchedulerPolicy::Deadline { runtime_ns, period_ns, .. } => Some(CbsState {
                    budget_ns: 0,
                    absolute_deadline_ns: period_ns,
                    replenish_period_ns: period_ns,
                    runtime_ns,
                }),
                _ => None,
            },
        });

        let mut engine = Engine {
            config,
            params,
            phase,
            now: 0,
            end,
            seq: 0,
            queue: BinaryHeap::new(),
            cores,
            task,
            records: Vec::new(),
            rt_service: Vec::new(),
            jitter_rng: ChaCha8Rng::seed_from_u64(phase_seed(params, config, phase, 1)),
            arrival_rng: ChaCha8Rng::seed_from_u64(phase_seed(params, config, phase, 2)),
            traffic,
            traffic_end,
            interference_core: 0,
            spill_acc: 0.0,
            accepted_since_flush: 0,
            packets_offered: 0,
            packets_dropped: 0,
            finished: false,
        };

        if let Some(t) = traffic {
            let sir = t.softirq_ns;
            engine.cores[engine.interference_core].softirq_ns_per_pkt = sir;
            if engine.cores.len() > 1 {
                engine.cores[1].softirq_ns_per_pkt = sir;
            }
            let first = engine.batch_gap(&t);
            engine.push(first, EventKind::Arrival {
                core: engine.interference_core,
                pkts: engine.params.napi_batch as u64,
                hardirq_only: false,
            });
        }
        if engine.task.is_some() {
            engine.push(0, EventKind::Wake);
            if matches!(engine.config.scheduler, SchedulerPolicy::Deadline { .. }) {
                engine.push(0, EventKind::Replenish);
            }
        }
        engine.push(end, EventKind::PhaseEnd);
        // hogs start spinning immediately
        for core in 0..engine.cores.len() {
            engine.dispatch(core);
        }
        Ok(engine)
    }

    fn push(&mut self, time: u64, kind: EventKind) {
        self.seq += 1;
        self.queue.push(Reverse(QueuedEvent { time, rank: kind.rank(), seq: self.seq, kind }));
    }

    fn batch_gap(&mut self, t: &TrafficProfile) -> u64 {
        let batch = self.params.napi_batch as u64;
        let mean_gap = batch.saturating_mul(NS_PER_SEC) / t.rate_pps.max(1);
        match self.params.arrival_model {
            ArrivalModel::ConstantRate => mean_gap.max(1),
            ArrivalModel::Poisson => {
                // exponential inter-batch gap with the same mean
                let u: f64 = self.arrival_rng.random::<f64>().max(1e-12);
                ((-(u.ln()) * mean_gap as f64) as u64).max(1)
            }
        }
    }

    pub fn run(mut self) -> SimOutput {
        while self.step() {}
        self.finish()
    }

    /// Processes exactly one event; returns false once the phase has ended.
    pub fn step(&mut self) -> bool {
        if self.finished {
            return false;
        }
        let Some(Reverse(ev)) = self.queue.pop() else {
            self.finished = true;
            return false;
        };
        debug_assert!(ev.time >= self.now, "simulated clock must never decrease");
        self.now = ev.time;
        match ev.kind {
            EventKind::PhaseEnd => {
                self.finished = true;
                return false;
            }
            EventKind::OccupantDone { core, occ_seq } => self.occupant_done(core, occ_seq),
            EventKind::NpSectionEnd { core, occ_seq } => {
                if self.cores[core].occ_seq == occ_seq {
                    // hog left its non-preemptible section; re-evaluate
                    self.preempt_hog_and_dispatch(core);
                }
            }
            EventKind::Wake => self.on_wake(),
            EventKind::Release => self.on_release(),
            EventKind::Eligible => {
                if let Some(task) = &self.task {
                    let core = task.core;
                    self.try_dispatch_rt(core);
                }
            }
            EventKind::Replenish => self.on_replenish(),
            EventKind::Arrival { core, pkts, hardirq_only } => {
                self.on_arrival(core, pkts, hardirq_only)
            }
        }
        true
    }

    // ---- control task ----------------------------------------------------

    fn on_wake(&mut self) {
        // Wakeup timer fired at a grid point. On the dual-core variant the
        // wakeup crosses cores; a stress worker sitting in a non-preemptible
        // section on the timer core holds it up.
        let delay = if self.config.architecture == Architecture::DualCorePinned {
            let (s, i) = (self.params.hog_np_section_ns, self.params.hog_np_interval_ns);
            let timer_core = self.interference_core;
            let hog_running = matches!(self.cores[timer_core].occupant, Some(Occupant::Hog));
            if hog_running {
                self.cores[timer_core]
                    .np_section_end_at(self.now, s, i)
                    .map(|end| end - self.now)
                    .unwrap_or(0)
            } else {
                0
            }
        } else {
            0
        };
        if delay > 0 {
            let t = self.now + delay;
            self.push(t, EventKind::Release);
        } else {
            self.on_release();
        }
    }

    fn on_release(&mut self) {
        let now = self.now;
        let jitter = if self.params.wakeup_jitter_ns > 0 {
            self.jitter_rng.random_range(0..=self.params.wakeup_jitter_ns)
        } else {
            0
        };
        let eligible_at = now + self.params.sched_latency_ns + jitter;
        let (core, exec) = {
            let task = self.task.as_mut().expect("release without control task");
            debug_assert_eq!(task.state, TaskState::Sleeping);
            task.released = true;
            task.release_time = now;
            task.remaining_exec = self.params.task_exec_ns.max(1);
            task.job_start = None;
            task.state = TaskState::Pending { eligible_at };
            (task.core, eligible_at)
        };
        self.push(exec, EventKind::Eligible);
        self.try_dispatch_rt(core);
    }

    fn on_replenish(&mut self) {
        let now = self.now;
        let mut dispatch_core = None;
        if let Some(task) = self.task.as_mut() {
            if let Some(cbs) = task.cbs.as_mut() {
                // Budget is handed out only to a server with work queued at
                // the replenishment instant; an idle server is parked with
                // zero budget until its job shows up.
                if task.released {
                    cbs.budget_ns = cbs.runtime_ns;
                    cbs.absolute_deadline_ns = now + cbs.replenish_period_ns;
                    if task.state == TaskState::Throttled {
                        task.state = TaskState::Pending { eligible_at: now };
                        dispatch_core = Some(task.core);
                    }
                } else {
                    cbs.budget_ns = 0;
                    cbs.absolute_deadline_ns = now + cbs.replenish_period_ns;
                }
                let next = now + cbs.replenish_period_ns;
                if next < self.end {
                    self.push(next, EventKind::Replenish);
                }
            }
        }
        if let Some(core) = dispatch_core {
            self.try_dispatch_rt(core);
        }
    }

    /// Attempts to put the control job on its core, honoring burst
    /// non-preemptibility and hog non-preemptible sections.
    fn try_dispatch_rt(&mut self, core: usize) {
        let now = self.now;
        let Some(task) = self.task.as_ref() else { return };
        let TaskState::Pending { eligible_at } = task.state else { return };
        if eligible_at > now {
            return;
        }
        if let Some(cbs) = &task.cbs {
            if cbs.budget_ns == 0 {
                // released but out of budget: throttle until replenishment
                self.task.as_mut().unwrap().state = TaskState::Throttled;
                return;
            }
        }
        match self.cores[core].occupant {
            None => self.start_rt(core),
            Some(Occupant::Hog) => self.preempt_hog_and_dispatch(core),
            Some(occ) if occ.non_preemptible() => { /* wait for burst boundary */ }
            Some(_) => {}
        }
    }

    /// Preempts a hog (after any in-flight non-preemptible section) and lets
    /// the dispatcher pick the next occupant.
    fn preempt_hog_and_dispatch(&mut self, core: usize) {
        let now = self.now;
        let (s, i) = (self.params.hog_np_section_ns, self.params.hog_np_interval_ns);
        if let Some(np_end) = self.cores[core].np_section_end_at(now, s, i) {
            if matches!(self.cores[core].occupant, Some(Occupant::Hog)) && np_end > now {
                let seq = self.cores[core].occ_seq;
                self.push(np_end, EventKind::NpSectionEnd { core, occ_seq: seq });
                return;
            }
        }
        if matches!(self.cores[core].occupant, Some(Occupant::Hog)) {
            self.close_occupant(core);
            self.dispatch(core);
        }
    }

    fn start_rt(&mut self, core: usize) {
        let now = self.now;
        let task = self.task.as_mut().expect("rt start without task");
        if task.job_start.is_none() {
            task.job_start = Some(now);
        }
        let mut slice = task.remaining_exec;
        if let Some(cbs) = &task.cbs {
            slice = slice.min(cbs.budget_ns);
        }
        debug_assert!(slice > 0);
        task.state = TaskState::Running;
        self.set_occupant(core, Occupant::Rt { remaining: slice }, Some(now + slice));
    }

    fn complete_rt_job(&mut self) {
        let now = self.now;
        let period = self.config.cycle_period_ns;
        let task = self.task.as_mut().expect("rt completion without task");
        let start = task.job_start.take().expect("completed job without start");
        if let Some(prev) = task.prev_start {
            self.records.push(CycleRecord {
                index: task.next_index,
                start_time_ns: start,
                period_ns: start - prev,
            });
            task.next_index += 1;
        }
        task.prev_start = Some(start);
        task.released = false;
        task.state = TaskState::Sleeping;
        // re-align to the absolute grid: first grid point strictly after now
        let next_grid = (now / period + 1) * period;
        if next_grid < self.end {
            self.push(next_grid, EventKind::Wake);
        }
    }

    // ---- interference ----------------------------------------------------

    fn on_arrival(&mut self, core: usize, pkts: u64, hardirq_only: bool) {
        let Some(traffic) = self.traffic else { return };
        self.packets_offered += pkts;

        // hardirq burst: runs immediately unless a non-preemptible burst is
        // already in flight, in which case it queues behind it
        let hard_ns = pkts * traffic.hardirq_ns;
        if hard_ns > 0 {
            match self.cores[core].occupant {
                Some(occ) if occ.non_preemptible() => {
                    self.cores[core].pending_hardirq.push_back(hard_ns);
                }
                Some(_) => {
                    // preempt RT or hog in place
                    self.close_occupant(core);
                    self.set_occupant(
                        core,
                        Occupant::Hardirq { remaining: hard_ns },
                        Some(self.now + hard_ns),
                    );
                }
                None => {
                    self.set_occupant(
                        core,
                        Occupant::Hardirq { remaining: hard_ns },
                        Some(self.now + hard_ns),
                    );
                }
            }
        }

        if !hardirq_only {
            // stack work queues on the interference core
            let sink = self.interference_core;
            let backlog = self.cores[sink].softirq_backlog_pkts;
            let accepted = pkts.min(BACKLOG_CAP_PKTS.saturating_sub(backlog));
            self.packets_dropped += pkts - accepted;
            self.cores[sink].softirq_backlog_pkts += accepted;
            self.accepted_since_flush += accepted;
            if self.accepted_since_flush >= self.params.flush_every_packets {
                self.accepted_since_flush -= self.params.flush_every_packets;
                self.cores[sink].flush_pending = true;
            }
            if self.cores[sink].occupant.is_none() {
                self.dispatch(sink);
            }

            // schedule the next batch, splitting off receive interrupts that
            // land on the control core in the dual-core variant
            let gap = self.batch_gap(&traffic);
            let next = self.now + gap;
            if next < self.traffic_end {
                let batch = self.params.napi_batch as u64;
                let mut main = batch;
                if self.config.architecture == Architecture::DualCorePinned
                    && self.params.spillover_fraction > 0.0
                {
                    self.spill_acc += batch as f64 * self.params.spillover_fraction;
                    let spill = self.spill_acc as u64;
                    if spill > 0 {
                        self.spill_acc -= spill as f64;
                        main = batch.saturating_sub(spill);
                        self.push(next, EventKind::Arrival {
                            core: 1,
                            pkts: spill,
                            hardirq_only: true,
                        });
                    }
                }
                if main > 0 {
                    self.push(next, EventKind::Arrival {
                        core: self.interference_core,
                        pkts: main,
                        hardirq_only: false,
                    });
                }
            }
        } else if self.cores[core].occupant.is_none() {
            self.dispatch(core);
        }
    }

    // ---- core occupancy --------------------------------------------------

    fn set_occupant(&mut self, core: usize, occ: Occupant, done_at: Option<u64>) {
        let c = &mut self.cores[core];
        debug_assert!(c.occupant.is_none());
        c.occupant = Some(occ);
        c.occ_seq += 1;
        c.occ_start = self.now;
        if let Some(t) = done_at {
            let seq = c.occ_seq;
            self.push(t, EventKind::OccupantDone { core, occ_seq: seq });
        }
    }

    /// Closes the current occupant span: accounts its class time, updates RT
    /// bookkeeping and CBS budget drain.
    fn close_occupant(&mut self, core: usize) {
        let now = self.now;
        let c = &mut self.cores[core];
        let Some(occ) = c.occupant.take() else { return };
        let start = c.occ_start;
        c.acct.record(occ.class(), start, now);
        let elapsed = now - start;

        match occ {
            Occupant::Rt { remaining } => {
                if elapsed > 0 {
                    self.rt_service.push((start, now));
                }
                let mut completed = false;
                {
                    let task = self.task.as_mut().expect("rt occupant without task");
                    task.remaining_exec = task.remaining_exec.saturating_sub(elapsed);
                    if let Some(cbs) = task.cbs.as_mut() {
                        cbs.budget_ns = cbs.budget_ns.saturating_sub(elapsed);
                    }
                    if task.remaining_exec == 0 {
                        completed = true;
                    } else if elapsed >= remaining {
                        // ran out of its dispatched slice: only possible when
                        // the slice was budget-capped
                        debug_assert!(task.cbs.is_some());
                        task.state = TaskState::Throttled;
                    } else {
                        // preempted mid-slice
                        task.state = TaskState::Pending { eligible_at: now };
                    }
                }
                if completed {
                    self.complete_rt_job();
                }
            }
            Occupant::Hardirq { .. } | Occupant::Softirq { .. } | Occupant::Flush { .. } => {
                // interference time stolen while the server's job is queued
                // drains its budget; this is what starves the deadline task
                // under sustained receive pressure
                if let Some(task) = self.task.as_mut() {
                    if task.core == core && task.released && task.state != TaskState::Running {
                        if let Some(cbs) = task.cbs.as_mut() {
                            let charged = now.max(task.release_time) - start.max(task.release_time);
                            if charged > 0 {
                                cbs.budget_ns = cbs.budget_ns.saturating_sub(charged.min(elapsed));
                                if cbs.budget_ns == 0 {
                                    task.state = TaskState::Throttled;
                                }
                            }
                        }
                    }
                }
            }
            Occupant::Hog => {}
        }
    }

    fn occupant_done(&mut self, core: usize, occ_seq: u64) {
        if self.cores[core].occ_seq != occ_seq || self.cores[core].occupant.is_none() {
            return; // stale completion of a preempted occupant
        }
        self.close_occupant(core);
        self.dispatch(core);
    }

    /// Picks the next occupant for an idle core.
    fn dispatch(&mut self, core: usize) {
        if self.cores[core].occupant.is_some() {
            return;
        }
        let now = self.now;

        // 1. deferred hardirq bursts
        if let Some(ns) = self.cores[core].pending_hardirq.pop_front() {
            self.set_occupant(core, Occupant::Hardirq { remaining: ns }, Some(now + ns));
            return;
        }
        // 2. pending reclaim pass
        if self.cores[core].flush_pending {
            self.cores[core].flush_pending = false;
            let cost = self.params.flush_cost_ns;
            self.set_occupant(core, Occupant::Flush { remaining: cost }, Some(now + cost));
            return;
        }
        // 3. the RT control job
        if let Some(task) = self.task.as_ref() {
            if task.core == core {
                if let TaskState::Pending { eligible_at } = task.state {
                    let budget_ok =
                        task.cbs.as_ref().map(|c| c.budget_ns > 0).unwrap_or(true);
                    if eligible_at <= now && budget_ok {
                        self.start_rt(core);
                        return;
                    }
                    if eligible_at <= now && !budget_ok {
                        self.task.as_mut().unwrap().state = TaskState::Throttled;
                    }
                }
            }
        }
        // 4. queued softirq work, one burst at a time
        if self.cores[core].softirq_backlog_pkts > 0 {
            let chunk = self.cores[core].softirq_backlog_pkts.min(self.params.napi_batch as u64);
            self.cores[core].softirq_backlog_pkts -= chunk;
            let ns = chunk * self.cores[core].softirq_ns_per_pkt.max(1);
            self.set_occupant(core, Occupant::Softirq { remaining: ns }, Some(now + ns));
            return;
        }
        // 5. normal-class stress worker
        if self.cores[core].hog_present {
            self.set_occupant(core, Occupant::Hog, None);
        }
        // 6. otherwise idle (accounted at span close / finish)
    }

    fn finish(mut self) -> SimOutput {
        self.now = self.end;
        for core in 0..self.cores.len() {
            self.close_occupant(core);
        }
        // idle time is whatever the busy classes did not cover, binned
        for c in &mut self.cores {
            let mut cursor = 0u64;
            // rebuild idle per bin so each bin sums to its wall span
            let bins = c.acct.bins.len().max(self.end.div_ceil(NS_PER_SEC) as usize);
            c.acct.bins.resize(bins, ClassBusy::default());
            for (i, bin) in c.acct.bins.iter_mut().enumerate() {
                let span_end = ((i as u64 + 1) * NS_PER_SEC).min(self.end);
                let span = span_end.saturating_sub(cursor);
                cursor = span_end;
                let busy = bin.hardirq + bin.softirq + bin.rt_user + bin.normal_user;
                debug_assert!(busy <= span);
                bin.idle = span - busy;
            }
            let busy = c.acct.total.hardirq
                + c.acct.total.softirq
                + c.acct.total.rt_user
                + c.acct.total.normal_user;
            c.acct.total.idle = self.end - busy;
        }

        let records = if self.config.architecture == Architecture::CoProcessor {
            // dedicated execution unit: exact grid, zero interference
            let period = self.config.cycle_period_ns;
            let n = self.end / period;
            (1..n)
                .map(|k| CycleRecord {
                    index: k - 1,
                    start_time_ns: k * period,
                    period_ns: period,
                })
                .collect()
        } else {
            std::mem::take(&mut self.records)
        };

        SimOutput {
            series: CycleSeries {
                phase: self.phase,
                config_id: self.config.id.clone(),
                records,
                wall_duration_ns: self.end,
            },
            cores: self.cores.into_iter().map(|c| c.acct).collect(),
            rt_service: self.rt_service,
            packets_offered: self.packets_offered,
            packets_dropped: self.packets_dropped,
            elapsed_ns: self.end,
        }
    }
}

/// Runs one measurement phase and returns the full simulation output.
pub fn simulate_phase_full(
    config: &ExperimentConfig,
    params: &SimParams,
    phase: Phase,
) -> Result<SimOutput, SimError> {
    Ok(Engine::new(config, params, phase)?.run())
}

/// Runs one measurement phase and returns the cycle series.
pub fn simulate_phase(
    config: &ExperimentConfig,
    params: &SimParams,
    phase: Phase,
) -> Result<CycleSeries, SimError> {
    simulate_phase_full(config, params, phase).map(|o| o.series)
}

/// True when interference may be active for this (config, phase) pair:
/// attacks only during the attack phase, stress for the whole procedure.
pub fn interference_active(config: &ExperimentConfig, phase: Phase) -> (bool, bool) {
    (phase == Phase::Attack && config.attack.is_attack(), config.stress.enabled)
}

#[allow(unused)]
fn attack_is_scan(attack: &AttackSpec) -> bool {
    matches!(attack, AttackSpec::SynScan { .. })
}
