//! The simulated system: persistent memory, each process's volatile frame,
//! the recovery phase, and the recorded history.

use std::collections::BTreeSet;
use std::hash::{Hash, Hasher};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::algorithm::{Frame, Model, StepKind, StepOutcome, SwapAlgorithm};
use crate::checker::history::HistoryEvent;
use crate::error::Fault;
use crate::memory::{Memory, MemorySnapshot};
use crate::sim::plan::Actor;
use crate::swap_global::check_list_mended;
use crate::types::{OpId, Value};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Phase {
    Normal,
    /// System-wide crash happened; the system actor runs global recovery.
    GlobalRecovery,
    /// Global recovery done; crashed processes run their own recovery and
    /// no new operation may start.
    IndividualRecovery,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
enum Status {
    Idle,
    Running(Frame),
    Crashed { readmit_at: Option<u64> },
    Finished,
}

/// The harness's persistent record of a pending invocation, so recovery
/// receives the same arguments.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
struct Pending {
    seq: u64,
    val: Value,
}

#[derive(Clone, Debug)]
struct Proc {
    status: Status,
    next_op: usize,
    pending: Option<Pending>,
    op_steps: u64,
    op_crashed: bool,
    spinning: bool,
}

/// One executed scheduler step.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: u64,
    pub actor: Actor,
    pub label: String,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub spin: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub accesses: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SnapshotRecord {
    pub step: u64,
    pub reason: String,
    pub memory: MemorySnapshot,
}

/// Steps of one SWAP that ran from invocation to response without a crash.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OpSteps {
    pub op: OpId,
    pub steps: u64,
}

#[derive(Clone, Debug)]
pub struct World {
    alg: Arc<dyn SwapAlgorithm>,
    mem: Memory,
    procs: Vec<Proc>,
    system: Option<Frame>,
    phase: Phase,
    operands: Vec<Vec<Value>>,
    history: Vec<HistoryEvent>,
    now: u64,
    last_progress: u64,
    crashes: u32,
    record_steps: bool,
    record_accesses: bool,
    steps: Vec<StepRecord>,
    snapshots: Vec<SnapshotRecord>,
    op_steps: Vec<OpSteps>,
}

impl World {
    /// `operands[pid]` lists the operands process `pid` swaps, in order.
    pub fn new(alg: Arc<dyn SwapAlgorithm>, operands: Vec<Vec<Value>>) -> Self {
        let n = operands.len() - 1;
        let procs = (0..=n)
            .map(|p| Proc {
                status: if p == 0 || operands[p].is_empty() { Status::Finished } else { Status::Idle },
                next_op: 0,
                pending: None,
                op_steps: 0,
                op_crashed: false,
                spinning: false,
            })
            .collect();
        Self {
            alg,
            mem: Memory::new(n),
            procs,
            system: None,
            phase: Phase::Normal,
            operands,
            history: Vec::new(),
            now: 0,
            last_progress: 0,
            crashes: 0,
            record_steps: false,
            record_accesses: false,
            steps: Vec::new(),
            snapshots: Vec::new(),
            op_steps: Vec::new(),
        }
    }

    pub fn set_recording(&mut self, steps: bool, accesses: bool) {
        self.record_steps = steps;
        self.record_accesses = accesses;
        self.mem.set_logging(accesses);
    }

    pub fn set_order_checks(&mut self, on: bool) {
        self.mem.set_order_checks(on);
    }

    pub fn n(&self) -> usize {
        self.procs.len() - 1
    }

    pub fn model(&self) -> Model {
        self.alg.model()
    }

    pub fn algorithm(&self) -> &dyn SwapAlgorithm {
        self.alg.as_ref()
    }

    pub fn now(&self) -> u64 {
        self.now
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn memory(&self) -> &Memory {
        &self.mem
    }

    pub fn history(&self) -> &[HistoryEvent] {
        &self.history
    }

    pub fn steps(&self) -> &[StepRecord] {
        &self.steps
    }

    pub fn snapshots(&self) -> &[SnapshotRecord] {
        &self.snapshots
    }

    pub fn op_steps(&self) -> &[OpSteps] {
        &self.op_steps
    }

    pub fn crashes(&self) -> u32 {
        self.crashes
    }

    pub fn last_progress(&self) -> u64 {
        self.last_progress
    }

    pub fn into_parts(self) -> (Vec<HistoryEvent>, Vec<StepRecord>, Vec<SnapshotRecord>, Vec<OpSteps>, Memory) {
        (self.history, self.steps, self.snapshots, self.op_steps, self.mem)
    }

    /// Every operation responded and no recovery is in progress.
    pub fn is_done(&self) -> bool {
        self.phase == Phase::Normal && self.procs[1..].iter().all(|p| p.status == Status::Finished)
    }

    /// Processes whose most recent step was a spin.
    pub fn spinning(&self) -> Vec<usize> {
        (1..=self.n()).filter(|&p| self.procs[p].spinning).collect()
    }

    /// Running a SWAP or a recovery (a crash would interrupt something).
    pub fn is_running(&self, pid: usize) -> bool {
        matches!(self.procs[pid].status, Status::Running(_))
    }

    pub fn is_crashed(&self, pid: usize) -> bool {
        matches!(self.procs[pid].status, Status::Crashed { .. })
    }

    /// Some invocation is pending, or global recovery is running.
    pub fn any_pending(&self) -> bool {
        self.system.is_some() || self.procs[1..].iter().any(|p| p.pending.is_some())
    }

    fn enabled_proc(&self, pid: usize) -> bool {
        let p = &self.procs[pid];
        match (&p.status, self.phase) {
            (_, Phase::GlobalRecovery) => false,
            (Status::Running(_), _) => true,
            (Status::Idle, Phase::Normal) => true,
            (Status::Crashed { readmit_at: Some(t) }, Phase::Normal) => *t <= self.now,
            _ => false,
        }
    }

    pub fn enabled(&self) -> Vec<Actor> {
        let mut out = Vec::new();
        if self.system.is_some() {
            out.push(Actor::System);
        }
        out.extend((1..=self.n()).filter(|&p| self.enabled_proc(p)).map(Actor::Process));
        out
    }

    /// Earliest pending re-admission time, if any process awaits one.
    pub fn next_readmission(&self) -> Option<u64> {
        self.procs[1..]
            .iter()
            .filter_map(|p| match p.status {
                Status::Crashed { readmit_at } => readmit_at,
                _ => None,
            })
            .min()
    }

    /// Lets time pass with nobody stepping (everyone awaits re-admission).
    pub fn advance_to(&mut self, t: u64) {
        if t > self.now {
            self.now = t;
        }
    }

    fn record(&mut self, actor: Actor, label: String, spin: bool) {
        let accesses = self.mem.take_accesses();
        if self.record_steps {
            self.steps.push(StepRecord { step: self.now, actor, label, spin, accesses });
        }
    }

    /// Executes one step of `actor`, which must be enabled.
    pub fn step(&mut self, actor: Actor) -> Result<StepOutcome, Fault> {
        self.now += 1;
        let out = match actor {
            Actor::System => self.step_system()?,
            Actor::Process(pid) => self.step_process(pid)?,
        };
        let spin = out.kind == StepKind::Spin;
        if !spin {
            self.last_progress = self.now;
        }
        if let Actor::Process(p) = actor {
            self.procs[p].spinning = spin;
        }
        self.record(actor, out.label.to_string(), spin);
        Ok(out)
    }

    fn step_system(&mut self) -> Result<StepOutcome, Fault> {
        let frame = self.system.as_mut().expect("system actor enabled only during recovery");
        let out = frame.step(&mut self.mem, 0)?;
        if let StepKind::Done(_) = out.kind {
            self.system = None;
            check_list_mended(&self.mem)?;
            for pid in 1..=self.n() {
                if let (Status::Crashed { .. }, Some(pd)) = (&self.procs[pid].status, self.procs[pid].pending) {
                    self.history.push(HistoryEvent::rec(pid, pd.seq, pd.val, self.now));
                    self.procs[pid].status = Status::Running(self.alg.begin_recover(pid, pd.val, pd.seq));
                }
            }
            self.phase = Phase::IndividualRecovery;
            self.settle_phase();
        }
        Ok(out)
    }

    fn settle_phase(&mut self) {
        if self.phase == Phase::IndividualRecovery {
            let recovering = self.procs[1..].iter().any(|p| match &p.status {
                Status::Running(f) => f.is_recovery(),
                Status::Crashed { .. } => true,
                _ => false,
            });
            if !recovering {
                self.phase = Phase::Normal;
            }
        }
    }

    fn step_process(&mut self, pid: usize) -> Result<StepOutcome, Fault> {
        let now = self.now;
        let p = &mut self.procs[pid];
        match &mut p.status {
            Status::Idle => {
                let val = self.operands[pid][p.next_op];
                p.next_op += 1;
                let seq = self.mem.increment_seq(pid);
                p.pending = Some(Pending { seq, val });
                p.op_steps = 0;
                p.op_crashed = false;
                p.status = Status::Running(self.alg.begin_swap(pid, val, seq));
                self.history.push(HistoryEvent::inv(pid, seq, val, now));
                Ok(StepOutcome::cont(crate::algorithm::StepLabel::new("INV")))
            }
            Status::Crashed { .. } => {
                let pd = p.pending.expect("crashed processes have a pending op");
                p.status = Status::Running(self.alg.begin_recover(pid, pd.val, pd.seq));
                self.history.push(HistoryEvent::rec(pid, pd.seq, pd.val, now));
                Ok(StepOutcome::cont(crate::algorithm::StepLabel::new("REC")))
            }
            Status::Running(frame) => {
                let out = frame.step(&mut self.mem, pid)?;
                p.op_steps += 1;
                if let StepKind::Done(ret) = out.kind {
                    let ret = ret.expect("process procedures return a value");
                    let pd = p.pending.take().expect("running op is pending");
                    if !p.op_crashed {
                        self.op_steps.push(OpSteps { op: OpId::new(pid, pd.seq), steps: p.op_steps });
                    }
                    p.status = if p.next_op < self.operands[pid].len() {
                        Status::Idle
                    } else {
                        Status::Finished
                    };
                    self.history.push(HistoryEvent::res(pid, pd.seq, pd.val, ret, now));
                    self.settle_phase();
                }
                Ok(out)
            }
            Status::Finished => unreachable!("finished processes are never enabled"),
        }
    }

    fn crash_one(&mut self, pid: usize, readmit_at: Option<u64>) -> bool {
        let p = &mut self.procs[pid];
        if !matches!(p.status, Status::Running(_)) {
            return false;
        }
        let pd = p.pending.expect("running op is pending");
        p.status = Status::Crashed { readmit_at };
        p.op_crashed = true;
        p.spinning = false;
        self.history.push(HistoryEvent::crash(pid, pd.seq, pd.val, self.now));
        true
    }

    /// System-wide crash: every running process loses its volatile state,
    /// any in-progress global recovery restarts. Idle processes are
    /// unaffected.
    pub fn crash_all(&mut self) {
        self.snapshots.push(SnapshotRecord {
            step: self.now,
            reason: "pre-recovery".into(),
            memory: self.mem.snapshot(),
        });
        for pid in 1..=self.n() {
            self.crash_one(pid, None);
        }
        self.system = self.alg.begin_system_recovery();
        self.phase = Phase::GlobalRecovery;
        self.crashes += 1;
    }

    /// Independent crash of `pid`, re-admitted `delay` steps from now.
    /// Returns false (a no-op) if `pid` had nothing in flight.
    pub fn crash_process(&mut self, pid: usize, delay: u64) -> bool {
        let at = self.now + delay;
        let hit = self.crash_one(pid, Some(at));
        if hit {
            self.crashes += 1;
        }
        hit
    }

    pub fn snapshot(&self) -> MemorySnapshot {
        self.mem.snapshot()
    }

    pub fn push_final_snapshot(&mut self) {
        self.snapshots.push(SnapshotRecord { step: self.now, reason: "final".into(), memory: self.mem.snapshot() });
    }

    /// 128-bit digest of everything that determines future behaviour and
    /// the history so far, ignoring absolute step numbers.
    pub fn fingerprint(&self) -> u128 {
        let mut lo = std::collections::hash_map::DefaultHasher::new();
        let mut hi = std::collections::hash_map::DefaultHasher::new();
        0xa5u8.hash(&mut hi);
        for h in [&mut lo, &mut hi] {
            self.mem.fingerprint(h);
            for p in &self.procs {
                match &p.status {
                    Status::Crashed { readmit_at } => {
                        3u8.hash(h);
                        readmit_at.map(|t| t.saturating_sub(self.now)).hash(h);
                    }
                    s => s.hash(h),
                }
                p.next_op.hash(h);
                p.pending.hash(h);
            }
            self.system.hash(h);
            self.phase.hash(h);
            self.crashes.hash(h);
            for e in &self.history {
                (e.kind, e.pid, e.seq, e.val, e.ret).hash(h);
            }
        }
        ((hi.finish() as u128) << 64) | lo.finish() as u128
    }
}

/// Nodes whose operation precedes another's in real time must never be
/// reachable the other way round; used by tests over completed runs.
pub fn live_set(history: &[HistoryEvent]) -> BTreeSet<OpId> {
    history.iter().map(|e| e.op()).collect()
}
