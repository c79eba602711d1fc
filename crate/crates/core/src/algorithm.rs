//! The SWAP step machine shared by both failure models, the frame type the
//! simulator drives, and the name-keyed algorithm registry.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::Fault;
use crate::memory::{Cell, Field, Memory, Slot, Word};
use crate::swap_global::{GlobalIndividualRecover, GlobalRecover, GlobalSwap};
use crate::swap_indep::{IndependentRecover, IndependentSwap};
use crate::types::{NodeId, NodeRecord, Value, VectorTimestamp};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Model {
    Global,
    Independent,
}

impl Model {
    pub fn name(self) -> &'static str {
        match self {
            Model::Global => "global",
            Model::Independent => "independent",
        }
    }
}

impl fmt::Display for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Model {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "global" | "system-wide" => Ok(Model::Global),
            "independent" => Ok(Model::Independent),
            _ => Err(format!("unknown model `{s}` (expected global or independent)")),
        }
    }
}

/// Name of an atomic step. `index` is the collect position for the
/// per-entry steps (`COLLECT_START_3`) and 0 otherwise.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct StepLabel {
    pub name: &'static str,
    pub index: usize,
}

impl StepLabel {
    pub const fn new(name: &'static str) -> Self {
        Self { name, index: 0 }
    }

    pub const fn indexed(name: &'static str, index: usize) -> Self {
        Self { name, index }
    }
}

impl fmt::Display for StepLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.index == 0 {
            f.write_str(self.name)
        } else {
            write!(f, "{}_{}", self.name, self.index)
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StepKind {
    Continue,
    /// Re-read an awaited variable; no progress.
    Spin,
    /// The procedure returned. Process procedures carry their response.
    Done(Option<Value>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct StepOutcome {
    pub label: StepLabel,
    pub kind: StepKind,
}

impl StepOutcome {
    pub fn cont(label: StepLabel) -> Self {
        Self { label, kind: StepKind::Continue }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
enum SwapPc {
    Alloc,
    VtsInc,
    CollectStart(usize),
    ReadPrevExec,
    LinkPrevExec,
    SetInWork1,
    Announce,
    PrimSwap,
    PersistPrev,
    CollectEnd(usize),
    SetInWork0,
    Return,
}

/// One SWAP invocation in flight: `myNode`, the partial collect, the
/// primitive swap's result, and the program counter.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct SwapFrame {
    pid: usize,
    val: Value,
    seq: u64,
    in_work: bool,
    stop_before_return: bool,
    pc: SwapPc,
    node: Slot<NodeId>,
    prev_exec: Slot<Option<NodeId>>,
    prev: Slot<NodeId>,
    collected: Vec<u64>,
}

impl SwapFrame {
    /// A fresh invocation. `in_work` adds the two flag writes of the
    /// independent model.
    pub fn fresh(pid: usize, val: Value, seq: u64, in_work: bool) -> Self {
        Self {
            pid,
            val,
            seq,
            in_work,
            stop_before_return: false,
            pc: SwapPc::Alloc,
            node: Slot::Poison,
            prev_exec: Slot::Poison,
            prev: Slot::Poison,
            collected: Vec::new(),
        }
    }

    /// Re-executes an announced node from the primitive swap onward.
    /// `stop_before_return` ends the frame after its last shared write.
    pub fn resume_at_swap(owner: usize, node: NodeId, in_work: bool, stop_before_return: bool) -> Self {
        let mut f = Self::fresh(owner, Value::Bottom, 0, in_work);
        f.node.set(node);
        f.pc = SwapPc::PrimSwap;
        f.stop_before_return = stop_before_return;
        f
    }

    pub fn node(&self) -> Option<NodeId> {
        match &self.node {
            Slot::Set(id) => Some(*id),
            Slot::Poison => None,
        }
    }

    pub fn label(&self) -> StepLabel {
        match self.pc {
            SwapPc::Alloc => StepLabel::new("ALLOC"),
            SwapPc::VtsInc => StepLabel::new("VTS_INC"),
            SwapPc::CollectStart(k) => StepLabel::indexed("COLLECT_START", k),
            SwapPc::ReadPrevExec => StepLabel::new("READ_PREVEXEC"),
            SwapPc::LinkPrevExec => StepLabel::new("LINK_PREVEXEC"),
            SwapPc::SetInWork1 => StepLabel::new("SET_INWORK1"),
            SwapPc::Announce => StepLabel::new("ANNOUNCE"),
            SwapPc::PrimSwap => StepLabel::new("PRIM_SWAP"),
            SwapPc::PersistPrev => StepLabel::new("PERSIST_PREV"),
            SwapPc::CollectEnd(k) => StepLabel::indexed("COLLECT_END", k),
            SwapPc::SetInWork0 => StepLabel::new("SET_INWORK0"),
            SwapPc::Return => StepLabel::new("RETURN"),
        }
    }

    fn after_collect_end(&self) -> Option<SwapPc> {
        if self.in_work {
            Some(SwapPc::SetInWork0)
        } else if self.stop_before_return {
            None
        } else {
            Some(SwapPc::Return)
        }
    }

    /// Executes one atomic step as `actor` (the owner, or 0 for the system).
    pub fn step(&mut self, mem: &mut Memory, actor: usize) -> Result<StepOutcome, Fault> {
        let label = self.label();
        let pid = self.pid;
        let n = mem.n();
        let next = match self.pc {
            SwapPc::Alloc => {
                let id = mem.alloc(pid, NodeRecord::new(pid, self.val, self.seq));
                self.node.set(id);
                Some(SwapPc::VtsInc)
            }
            SwapPc::VtsInc => {
                mem.increment_vts(pid)?;
                self.collected.clear();
                Some(SwapPc::CollectStart(1))
            }
            SwapPc::CollectStart(k) => {
                let x = mem.read_int(actor, Cell::Vts(k))?;
                self.collected.push(x);
                if k < n {
                    Some(SwapPc::CollectStart(k + 1))
                } else {
                    let id = self.node.cloned(pid, "myNode")?;
                    let v = VectorTimestamp::from_entries(std::mem::take(&mut self.collected));
                    mem.write(actor, Cell::Node(id, Field::StartVts), Word::Vts(Some(v)))?;
                    Some(SwapPc::ReadPrevExec)
                }
            }
            SwapPc::ReadPrevExec => {
                self.prev_exec.set(mem.read_ref(actor, Cell::Announce(pid))?);
                Some(SwapPc::LinkPrevExec)
            }
            SwapPc::LinkPrevExec => {
                let id = self.node.cloned(pid, "myNode")?;
                let pe = self.prev_exec.cloned(pid, "prevExecution")?;
                mem.write(actor, Cell::Node(id, Field::PrevExecution), Word::Ref(pe))?;
                Some(if self.in_work { SwapPc::SetInWork1 } else { SwapPc::Announce })
            }
            SwapPc::SetInWork1 => {
                let id = self.node.cloned(pid, "myNode")?;
                mem.write(actor, Cell::Node(id, Field::InWork), Word::Int(1))?;
                Some(SwapPc::Announce)
            }
            SwapPc::Announce => {
                let id = self.node.cloned(pid, "myNode")?;
                mem.write(actor, Cell::Announce(pid), Word::Ref(Some(id)))?;
                Some(SwapPc::PrimSwap)
            }
            SwapPc::PrimSwap => {
                let id = self.node.cloned(pid, "myNode")?;
                self.prev.set(mem.swap_tail(actor, id)?);
                Some(SwapPc::PersistPrev)
            }
            SwapPc::PersistPrev => {
                let id = self.node.cloned(pid, "myNode")?;
                let prev = self.prev.cloned(pid, "prev")?;
                mem.write(actor, Cell::Node(id, Field::Prev), Word::Ref(Some(prev)))?;
                self.collected.clear();
                Some(SwapPc::CollectEnd(1))
            }
            SwapPc::CollectEnd(k) => {
                let x = mem.read_int(actor, Cell::Vts(k))?;
                self.collected.push(x);
                if k < n {
                    Some(SwapPc::CollectEnd(k + 1))
                } else {
                    let id = self.node.cloned(pid, "myNode")?;
                    let v = VectorTimestamp::from_entries(std::mem::take(&mut self.collected));
                    mem.write(actor, Cell::Node(id, Field::EndVts), Word::Vts(Some(v)))?;
                    self.after_collect_end()
                }
            }
            SwapPc::SetInWork0 => {
                let id = self.node.cloned(pid, "myNode")?;
                mem.write(actor, Cell::Node(id, Field::InWork), Word::Int(0))?;
                if self.stop_before_return {
                    None
                } else {
                    Some(SwapPc::Return)
                }
            }
            SwapPc::Return => {
                let id = self.node.cloned(pid, "myNode")?;
                let prev = mem
                    .read_ref(actor, Cell::Node(id, Field::Prev))?
                    .ok_or(Fault::NullPrevAfterRecovery { pid })?;
                let v = mem.read_value(actor, Cell::Node(prev, Field::Val))?;
                return Ok(StepOutcome { label, kind: StepKind::Done(Some(v)) });
            }
        };
        Ok(match next {
            Some(pc) => {
                self.pc = pc;
                StepOutcome::cont(label)
            }
            None => StepOutcome { label, kind: StepKind::Done(None) },
        })
    }
}

/// Volatile state of whatever procedure an actor is executing.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Frame {
    Swap(SwapFrame),
    GlobalRecover(GlobalRecover),
    GlobalIndividual(GlobalIndividualRecover),
    IndependentRecover(Box<IndependentRecover>),
}

impl Frame {
    pub fn step(&mut self, mem: &mut Memory, actor: usize) -> Result<StepOutcome, Fault> {
        match self {
            Frame::Swap(f) => f.step(mem, actor),
            Frame::GlobalRecover(f) => f.step(mem),
            Frame::GlobalIndividual(f) => f.step(mem),
            Frame::IndependentRecover(f) => f.step(mem),
        }
    }

    /// Label the next step will carry.
    pub fn next_label(&self) -> StepLabel {
        match self {
            Frame::Swap(f) => f.label(),
            Frame::GlobalRecover(f) => f.label(),
            Frame::GlobalIndividual(f) => f.label(),
            Frame::IndependentRecover(f) => f.label(),
        }
    }

    pub fn is_recovery(&self) -> bool {
        !matches!(self, Frame::Swap(_))
    }
}

/// A recoverable SWAP implementation, selected by name at runtime.
pub trait SwapAlgorithm: Send + Sync + fmt::Debug {
    fn name(&self) -> &'static str;
    fn model(&self) -> Model;
    /// Steps of a crash-free SWAP for `n` processes.
    fn crash_free_steps(&self, n: usize) -> u64;
    fn begin_swap(&self, pid: usize, val: Value, seq: u64) -> Frame;
    /// Recovery for a crashed invocation, called with the same arguments.
    fn begin_recover(&self, pid: usize, val: Value, seq: u64) -> Frame;
    /// The system actor's procedure after a system-wide crash, if any.
    fn begin_system_recovery(&self) -> Option<Frame>;
}

type AlgorithmCtor = fn() -> Box<dyn SwapAlgorithm>;

fn ctors() -> BTreeMap<&'static str, AlgorithmCtor> {
    let mut m: BTreeMap<&'static str, AlgorithmCtor> = BTreeMap::new();
    m.insert("global", || Box::new(GlobalSwap));
    m.insert("independent", || Box::new(IndependentSwap));
    m
}

pub fn algorithm_names() -> Vec<&'static str> {
    ctors().keys().copied().collect()
}

pub fn lookup_algorithm(name: &str) -> Option<Box<dyn SwapAlgorithm>> {
    ctors().get(name).map(|c| c())
}

pub fn algorithm_for(model: Model) -> Box<dyn SwapAlgorithm> {
    lookup_algorithm(model.name()).expect("every model has a registered algorithm")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_solo(mem: &mut Memory, pid: usize, val: Value, in_work: bool) -> (Value, u64) {
        let seq = mem.increment_seq(pid);
        let mut f = SwapFrame::fresh(pid, val, seq, in_work);
        let mut steps = 0;
        loop {
            steps += 1;
            if let StepKind::Done(Some(v)) = f.step(mem, pid).unwrap().kind {
                return (v, steps);
            }
        }
    }

    #[test]
    fn solo_swap_returns_bottom_and_links_to_head() {
        let mut mem = Memory::new(2);
        let (v, steps) = run_solo(&mut mem, 1, Value::Int(5), false);
        assert_eq!(v, Value::Bottom);
        assert_eq!(steps, 8 + 2 * 2);
        let s = mem.snapshot();
        let node = s.tail;
        assert_ne!(node, s.head());
        assert_eq!(s.heap.get(node).prev, Some(s.head()));
    }

    #[test]
    fn sequential_swaps_return_previous_operand() {
        let mut mem = Memory::new(2);
        run_solo(&mut mem, 1, Value::Int(1), false);
        let (v, _) = run_solo(&mut mem, 2, Value::Int(2), false);
        assert_eq!(v, Value::Int(1));
    }

    #[test]
    fn independent_swap_adds_two_steps_and_clears_in_work() {
        for n in 1..=5 {
            let mut mem = Memory::new(n);
            let (_, steps) = run_solo(&mut mem, 1, Value::Int(9), true);
            assert_eq!(steps, 10 + 2 * n as u64);
            let s = mem.snapshot();
            let r = s.heap.get(s.tail);
            assert_eq!(r.in_work, 0);
            assert!(r.end_vts.is_some());
        }
    }

    #[test]
    fn labels_follow_program_order() {
        let mut mem = Memory::new(2);
        let seq = mem.increment_seq(1);
        let mut f = SwapFrame::fresh(1, Value::Int(3), seq, true);
        let mut labels = Vec::new();
        loop {
            let out = f.step(&mut mem, 1).unwrap();
            labels.push(out.label.to_string());
            if matches!(out.kind, StepKind::Done(_)) {
                break;
            }
        }
        assert_eq!(
            labels,
            [
                "ALLOC",
                "VTS_INC",
                "COLLECT_START_1",
                "COLLECT_START_2",
                "READ_PREVEXEC",
                "LINK_PREVEXEC",
                "SET_INWORK1",
                "ANNOUNCE",
                "PRIM_SWAP",
                "PERSIST_PREV",
                "COLLECT_END_1",
                "COLLECT_END_2",
                "SET_INWORK0",
                "RETURN"
            ]
        );
    }

    #[test]
    fn registry_resolves_both_models() {
        assert_eq!(algorithm_names(), vec!["global", "independent"]);
        assert_eq!(algorithm_for(Model::Global).model(), Model::Global);
        assert_eq!(algorithm_for(Model::Independent).crash_free_steps(3), 16);
        assert!(lookup_algorithm("nope").is_none());
    }
}
