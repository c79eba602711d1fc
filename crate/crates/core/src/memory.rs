//! Simulated persistent shared memory.
//!
//! All shared state is non-volatile and survives crashes: the `tail` pointer,
//! the announcement array `Nodes[0..=n]`, the global vector timestamp, the
//! per-process sequence counters, the RME lock metadata and the node heap.
//! Process-local state lives in [`VolatileEnv`] and is poisoned by a crash.
//!
//! Every write goes through hooks that assert the structural invariants the
//! recovery algorithms depend on: `prev` and `prevExecution` are write-once,
//! `inWork` follows its state machine, no node is ever referenced by two
//! `prev` pointers (or by `tail` and a `prev` pointer), and, when enabled,
//! no node on a `prev`-chain started after the chain's origin ended.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::Fault;
use crate::rme_lock::LockState;
use crate::types::{NodeId, NodeRecord, Value, VectorTimestamp};

/// A node-record field.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Field {
    Val,
    Prev,
    PrevExecution,
    StartVts,
    EndVts,
    Seq,
    InWork,
}

/// Address of one shared, non-volatile cell.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Cell {
    Tail,
    /// `Nodes[i]`, `i` in `0..=n`.
    Announce(usize),
    /// `VTS[pid]`, `pid` in `1..=n`.
    Vts(usize),
    /// `SEQ_pid`.
    Seq(usize),
    Node(NodeId, Field),
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Cell::Tail => f.write_str("tail"),
            Cell::Announce(i) => write!(f, "Nodes[{i}]"),
            Cell::Vts(p) => write!(f, "VTS[{p}]"),
            Cell::Seq(p) => write!(f, "SEQ[{p}]"),
            Cell::Node(id, field) => {
                let name = match field {
                    Field::Val => "val",
                    Field::Prev => "prev",
                    Field::PrevExecution => "prevExecution",
                    Field::StartVts => "startVts",
                    Field::EndVts => "endVts",
                    Field::Seq => "seq",
                    Field::InWork => "inWork",
                };
                write!(f, "{id}.{name}")
            }
        }
    }
}

/// Contents of a cell.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Word {
    Value(Value),
    Ref(Option<NodeId>),
    Int(u64),
    Vts(Option<VectorTimestamp>),
}

impl Word {
    fn kind(&self) -> &'static str {
        match self {
            Word::Value(_) => "value",
            Word::Ref(_) => "reference",
            Word::Int(_) => "integer",
            Word::Vts(_) => "timestamp",
        }
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Word::Value(v) => write!(f, "{v}"),
            Word::Ref(Some(id)) => write!(f, "{id}"),
            Word::Ref(None) => f.write_str("null"),
            Word::Int(x) => write!(f, "{x}"),
            Word::Vts(Some(v)) => write!(f, "{:?}", v.entries()),
            Word::Vts(None) => f.write_str("null"),
        }
    }
}

fn mismatch(cell: Cell, expected: &'static str, found: &Word) -> Fault {
    Fault::TypeMismatch {
        cell: cell.to_string(),
        expected,
        found: found.kind(),
    }
}

/// The non-volatile node arena. Records are never reclaimed.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NvHeap {
    records: Vec<NodeRecord>,
}

impl NvHeap {
    pub fn get(&self, id: NodeId) -> &NodeRecord {
        &self.records[id.index()]
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = NodeId> + '_ {
        (0..self.records.len() as u32).map(NodeId)
    }

    fn push(&mut self, rec: NodeRecord) -> NodeId {
        self.records.push(rec);
        NodeId(self.records.len() as u32 - 1)
    }

    fn get_mut(&mut self, id: NodeId) -> &mut NodeRecord {
        &mut self.records[id.index()]
    }
}

/// Deep copy of all non-volatile state.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct MemorySnapshot {
    pub n: usize,
    pub tail: NodeId,
    pub announce: Vec<Option<NodeId>>,
    pub vts: Vec<u64>,
    pub seq: Vec<u64>,
    pub heap: NvHeap,
    pub lock: LockState,
}

impl MemorySnapshot {
    pub fn head(&self) -> NodeId {
        self.announce[0].expect("Nodes[0] is always the head node")
    }

    /// Every node reachable from `Nodes[0..=n]` through `prevExecution`.
    pub fn announced(&self) -> Vec<NodeId> {
        let mut out = Vec::new();
        for slot in &self.announce {
            let mut cur = *slot;
            while let Some(id) = cur {
                out.push(id);
                cur = self.heap.get(id).prev_execution;
            }
        }
        out.sort();
        out
    }

    /// The list induced by `prev` pointers starting at `tail`.
    pub fn list_from_tail(&self) -> Vec<NodeId> {
        let mut out = vec![self.tail];
        let mut cur = self.heap.get(self.tail).prev;
        while let Some(id) = cur {
            if out.len() > self.heap.len() {
                break;
            }
            out.push(id);
            cur = self.heap.get(id).prev;
        }
        out
    }
}

/// Simulated persistent memory for one run.
#[derive(Clone, Debug)]
pub struct Memory {
    n: usize,
    tail: NodeId,
    announce: Vec<Option<NodeId>>,
    vts: Vec<u64>,
    seq: Vec<u64>,
    heap: NvHeap,
    lock: LockState,
    // audit state, not visible to the algorithms
    pointed_by: Vec<Option<NodeId>>,
    swap_order: Vec<NodeId>,
    check_order: bool,
    log: Option<Vec<String>>,
}

impl Memory {
    /// The initial state: a head node holding `⊥`, `tail` and `Nodes[0]`
    /// pointing at it, every other announcement null, every counter zero.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "at least one process");
        let mut heap = NvHeap::default();
        let mut head = NodeRecord::new(0, Value::Bottom, 0);
        head.start_vts = Some(VectorTimestamp::zero(n));
        head.end_vts = Some(VectorTimestamp::zero(n));
        let head = heap.push(head);
        let mut announce = vec![None; n + 1];
        announce[0] = Some(head);
        Self {
            n,
            tail: head,
            announce,
            vts: vec![0; n + 1],
            seq: vec![0; n + 1],
            heap,
            lock: LockState::new(n),
            pointed_by: vec![None],
            swap_order: Vec::new(),
            check_order: true,
            log: None,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn head(&self) -> NodeId {
        NodeId(0)
    }

    /// Enables per-access logging, drained by [`Memory::take_accesses`].
    pub fn set_logging(&mut self, on: bool) {
        self.log = on.then(Vec::new);
    }

    /// Enables the prev-chain timestamp check on every `prev`/`endVts` write.
    pub fn set_order_checks(&mut self, on: bool) {
        self.check_order = on;
    }

    pub fn take_accesses(&mut self) -> Vec<String> {
        self.log.as_mut().map(std::mem::take).unwrap_or_default()
    }

    fn note(&mut self, actor: usize, op: &str, cell: Cell, w: &Word) {
        if let Some(log) = &mut self.log {
            let who = if actor == 0 { "sys".to_string() } else { format!("p{actor}") };
            log.push(format!("{who} {op} {cell}={w}"));
        }
    }

    /// Direct read-only view of the heap, for auditing and coalesced local
    /// work. Algorithms that need a scheduler step use [`Memory::read`].
    pub fn heap(&self) -> &NvHeap {
        &self.heap
    }

    pub fn tail(&self) -> NodeId {
        self.tail
    }

    pub fn announced_at(&self, i: usize) -> Option<NodeId> {
        self.announce[i]
    }

    pub fn seq_of(&self, pid: usize) -> u64 {
        self.seq[pid]
    }

    pub fn lock_state(&self) -> &LockState {
        &self.lock
    }

    pub fn lock_state_mut(&mut self) -> &mut LockState {
        &mut self.lock
    }

    /// Nodes in the order they were installed into `tail`.
    pub fn swap_order(&self) -> &[NodeId] {
        &self.swap_order
    }

    /// Allocates and initializes a node. Local to the caller until announced.
    pub fn alloc(&mut self, actor: usize, rec: NodeRecord) -> NodeId {
        let id = self.heap.push(rec);
        self.pointed_by.push(None);
        if let Some(log) = &mut self.log {
            log.push(format!("p{actor} new {id}"));
        }
        id
    }

    fn load(&self, cell: Cell) -> Word {
        match cell {
            Cell::Tail => Word::Ref(Some(self.tail)),
            Cell::Announce(i) => Word::Ref(self.announce[i]),
            Cell::Vts(p) => Word::Int(self.vts[p]),
            Cell::Seq(p) => Word::Int(self.seq[p]),
            Cell::Node(id, field) => {
                let r = self.heap.get(id);
                match field {
                    Field::Val => Word::Value(r.val),
                    Field::Prev => Word::Ref(r.prev),
                    Field::PrevExecution => Word::Ref(r.prev_execution),
                    Field::StartVts => Word::Vts(r.start_vts.clone()),
                    Field::EndVts => Word::Vts(r.end_vts.clone()),
                    Field::Seq => Word::Int(r.seq),
                    Field::InWork => Word::Int(r.in_work as u64),
                }
            }
        }
    }

    pub fn read(&mut self, actor: usize, cell: Cell) -> Word {
        let w = self.load(cell);
        self.note(actor, "R", cell, &w);
        w
    }

    pub fn write(&mut self, actor: usize, cell: Cell, w: Word) -> Result<(), Fault> {
        self.note(actor, "W", cell, &w);
        self.store(cell, w)
    }

    /// Atomically installs `w` and returns the previous contents.
    pub fn primitive_swap(&mut self, actor: usize, cell: Cell, w: Word) -> Result<Word, Fault> {
        let old = self.load(cell);
        self.note(actor, "S", cell, &w);
        self.store(cell, w)?;
        Ok(old)
    }

    fn store(&mut self, cell: Cell, w: Word) -> Result<(), Fault> {
        match (cell, w) {
            (Cell::Tail, Word::Ref(Some(id))) => {
                if self.pointed_by[id.index()].is_some() {
                    return Err(Fault::InDegree { node: id });
                }
                self.tail = id;
                self.swap_order.push(id);
            }
            (Cell::Announce(i), Word::Ref(r)) => self.announce[i] = r,
            (Cell::Vts(p), Word::Int(x)) => {
                let old = self.vts[p];
                if x != old + 1 {
                    return Err(Fault::VtsStep { pid: p, old, new: x });
                }
                self.vts[p] = x;
            }
            (Cell::Seq(p), Word::Int(x)) => self.seq[p] = x,
            (Cell::Node(id, field), w) => self.store_field(id, field, w)?,
            (cell, w) => return Err(mismatch(cell, "matching word", &w)),
        }
        Ok(())
    }

    fn store_field(&mut self, id: NodeId, field: Field, w: Word) -> Result<(), Fault> {
        let cell = Cell::Node(id, field);
        match (field, w) {
            (Field::Prev, Word::Ref(new)) => {
                let old = self.heap.get(id).prev;
                match (old, new) {
                    (Some(o), Some(nw)) if o == nw => {}
                    (Some(o), Some(nw)) => return Err(Fault::PrevRewrite { node: id, old: o, new: nw }),
                    (Some(o), None) => return Err(Fault::PrevRewrite { node: id, old: o, new: o }),
                    (None, None) => {}
                    (None, Some(target)) => {
                        if self.pointed_by[target.index()].is_some() || self.tail == target {
                            return Err(Fault::InDegree { node: target });
                        }
                        self.heap.get_mut(id).prev = Some(target);
                        self.pointed_by[target.index()] = Some(id);
                        if self.check_order {
                            self.check_after_link(id, target)?;
                        }
                    }
                }
            }
            (Field::PrevExecution, Word::Ref(new)) => {
                let rec = self.heap.get_mut(id);
                if rec.prev_execution.is_some() && rec.prev_execution != new {
                    return Err(Fault::PrevExecutionRewrite { node: id });
                }
                rec.prev_execution = new;
            }
            (Field::InWork, Word::Int(to)) => {
                let from = self.heap.get(id).in_work;
                let to = to as u8;
                let ok = matches!((from, to), (0, 1) | (1, 0) | (1, 2) | (0, 2) | (2, 0) | (2, 2));
                if !ok {
                    return Err(Fault::InWorkTransition { node: id, from, to });
                }
                self.heap.get_mut(id).in_work = to;
            }
            (Field::StartVts, Word::Vts(v)) => self.heap.get_mut(id).start_vts = v,
            (Field::EndVts, Word::Vts(v)) => {
                self.heap.get_mut(id).end_vts = v;
                if self.check_order {
                    self.check_chain_from(id)?;
                }
            }
            (Field::Val, Word::Value(v)) => self.heap.get_mut(id).val = v,
            (Field::Seq, Word::Int(s)) => self.heap.get_mut(id).seq = s,
            (_, w) => return Err(mismatch(cell, "matching word", &w)),
        }
        Ok(())
    }

    fn chain_violation(&self, x: NodeId, from: Option<NodeId>) -> Result<(), Fault> {
        let Some(end) = &self.heap.get(x).end_vts else {
            return Ok(());
        };
        let mut cur = from;
        let mut hops = 0;
        while let Some(y) = cur {
            if y == x || hops > self.heap.len() {
                return Err(Fault::GraphCycle { node: x });
            }
            let ry = self.heap.get(y);
            if ry.start_vts.as_ref().is_some_and(|s| s.dominates(end)) {
                return Err(Fault::TimestampOrder { x, y });
            }
            cur = ry.prev;
            hops += 1;
        }
        Ok(())
    }

    fn check_chain_from(&self, x: NodeId) -> Result<(), Fault> {
        self.chain_violation(x, self.heap.get(x).prev)
    }

    /// After `u.prev = v`: every node whose chain now passes through `u`
    /// gained the nodes of `v`'s chain.
    fn check_after_link(&self, u: NodeId, v: NodeId) -> Result<(), Fault> {
        let mut x = Some(u);
        let mut hops = 0;
        while let Some(id) = x {
            self.chain_violation(id, Some(v))?;
            x = self.pointed_by[id.index()];
            hops += 1;
            if hops > self.heap.len() {
                return Err(Fault::GraphCycle { node: u });
            }
        }
        Ok(())
    }

    // Typed accessors used by the step machines. Each is one shared access.

    pub fn read_ref(&mut self, actor: usize, cell: Cell) -> Result<Option<NodeId>, Fault> {
        match self.read(actor, cell) {
            Word::Ref(r) => Ok(r),
            w => Err(mismatch(cell, "reference", &w)),
        }
    }

    pub fn read_int(&mut self, actor: usize, cell: Cell) -> Result<u64, Fault> {
        match self.read(actor, cell) {
            Word::Int(x) => Ok(x),
            w => Err(mismatch(cell, "integer", &w)),
        }
    }

    pub fn read_value(&mut self, actor: usize, cell: Cell) -> Result<Value, Fault> {
        match self.read(actor, cell) {
            Word::Value(v) => Ok(v),
            w => Err(mismatch(cell, "value", &w)),
        }
    }

    pub fn swap_tail(&mut self, actor: usize, node: NodeId) -> Result<NodeId, Fault> {
        match self.primitive_swap(actor, Cell::Tail, Word::Ref(Some(node)))? {
            Word::Ref(Some(old)) => Ok(old),
            w => Err(mismatch(Cell::Tail, "reference", &w)),
        }
    }

    pub fn increment_vts(&mut self, pid: usize) -> Result<(), Fault> {
        let cur = self.read_int(pid, Cell::Vts(pid))?;
        self.write(pid, Cell::Vts(pid), Word::Int(cur + 1))
    }

    /// Harness-side: bump `SEQ_pid` before an invocation.
    pub fn increment_seq(&mut self, pid: usize) -> u64 {
        self.seq[pid] += 1;
        let s = self.seq[pid];
        self.note(pid, "W", Cell::Seq(pid), &Word::Int(s));
        s
    }

    pub fn snapshot(&self) -> MemorySnapshot {
        MemorySnapshot {
            n: self.n,
            tail: self.tail,
            announce: self.announce.clone(),
            vts: self.vts.clone(),
            seq: self.seq.clone(),
            heap: self.heap.clone(),
            lock: self.lock.clone(),
        }
    }

    /// Hashes the non-volatile state (and the ground-truth swap order) for
    /// state-space deduplication.
    pub fn fingerprint<H: std::hash::Hasher>(&self, h: &mut H) {
        use std::hash::Hash;
        self.tail.hash(h);
        self.announce.hash(h);
        self.vts.hash(h);
        self.seq.hash(h);
        self.heap.hash(h);
        self.lock.hash(h);
        self.swap_order.hash(h);
    }
}

/// A volatile local variable. Reads before the first write, or after a
/// crash, fault instead of yielding an arbitrary value.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
pub enum Slot<T> {
    #[default]
    Poison,
    Set(T),
}

impl<T> Slot<T> {
    pub fn set(&mut self, v: T) {
        *self = Slot::Set(v);
    }

    pub fn get(&self, pid: usize, name: &'static str) -> Result<&T, Fault> {
        match self {
            Slot::Set(v) => Ok(v),
            Slot::Poison => Err(Fault::PoisonRead { pid, slot: name }),
        }
    }

    pub fn is_poison(&self) -> bool {
        matches!(self, Slot::Poison)
    }
}

impl<T: Clone> Slot<T> {
    pub fn cloned(&self, pid: usize, name: &'static str) -> Result<T, Fault> {
        self.get(pid, name).cloned()
    }
}

/// Volatile state of one process: the frame of the procedure it is
/// executing. `F` is the algorithm's frame type.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct VolatileEnv<F> {
    pub pid: usize,
    pub frame: Slot<F>,
}

impl<F> VolatileEnv<F> {
    pub fn new(pid: usize) -> Self {
        Self { pid, frame: Slot::Poison }
    }

    /// Forgets every local variable and the program counter. Non-volatile
    /// memory, including `SEQ_pid`, is untouched.
    pub fn crash_reset(&mut self) {
        self.frame = Slot::Poison;
    }

    pub fn frame_mut(&mut self) -> Result<&mut F, Fault> {
        match &mut self.frame {
            Slot::Set(f) => Ok(f),
            Slot::Poison => Err(Fault::PoisonRead { pid: self.pid, slot: "frame" }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn node_for(mem: &mut Memory, pid: usize, val: u64) -> NodeId {
        let mut r = NodeRecord::new(pid, Value::Int(val), 1);
        r.start_vts = Some(VectorTimestamp::zero(mem.n()));
        mem.alloc(pid, r)
    }

    #[test]
    fn initial_state_matches_init_block() {
        let mem = Memory::new(3);
        let s = mem.snapshot();
        let head = s.head();
        assert_eq!(s.tail, head);
        assert_eq!(s.announce, vec![Some(head), None, None, None]);
        assert_eq!(s.vts, vec![0; 4]);
        let h = s.heap.get(head);
        assert_eq!(h.val, Value::Bottom);
        assert_eq!(h.seq, 0);
        assert_eq!(h.prev, None);
        assert_eq!(h.prev_execution, None);
        assert_eq!(h.in_work, 0);
        assert_eq!(h.start_vts, Some(VectorTimestamp::zero(3)));
        assert_eq!(h.end_vts, Some(VectorTimestamp::zero(3)));
    }

    #[test]
    fn primitive_swap_returns_previous_tail() {
        let mut mem = Memory::new(2);
        let a = node_for(&mut mem, 1, 1);
        let b = node_for(&mut mem, 2, 2);
        assert_eq!(mem.swap_tail(1, a).unwrap(), mem.head());
        assert_eq!(mem.tail(), a);
        assert_eq!(mem.swap_tail(2, b).unwrap(), a);
    }

    #[test]
    fn writes_survive_crash() {
        let mut mem = Memory::new(2);
        let a = node_for(&mut mem, 1, 1);
        mem.write(1, Cell::Announce(1), Word::Ref(Some(a))).unwrap();
        let mut env: VolatileEnv<u32> = VolatileEnv::new(1);
        env.frame.set(5);
        env.crash_reset();
        assert!(env.frame_mut().is_err());
        assert_eq!(mem.read_ref(1, Cell::Announce(1)).unwrap(), Some(a));
    }

    #[test]
    fn poisoned_slot_faults_until_rewritten() {
        let mut s: Slot<NodeId> = Slot::Poison;
        assert_eq!(
            s.get(3, "prev"),
            Err(Fault::PoisonRead { pid: 3, slot: "prev" })
        );
        s.set(NodeId(4));
        assert_eq!(s.get(3, "prev"), Ok(&NodeId(4)));
    }

    #[test]
    fn prev_is_write_once() {
        let mut mem = Memory::new(2);
        let a = node_for(&mut mem, 1, 1);
        let b = node_for(&mut mem, 2, 2);
        let head = mem.head();
        mem.swap_tail(1, a).unwrap();
        mem.write(1, Cell::Node(a, Field::Prev), Word::Ref(Some(head))).unwrap();
        // same target again is harmless
        mem.write(1, Cell::Node(a, Field::Prev), Word::Ref(Some(head))).unwrap();
        let err = mem.write(1, Cell::Node(a, Field::Prev), Word::Ref(Some(b))).unwrap_err();
        assert!(matches!(err, Fault::PrevRewrite { .. }));
    }

    #[test]
    fn second_pointer_to_a_node_is_rejected() {
        let mut mem = Memory::new(2);
        let a = node_for(&mut mem, 1, 1);
        let b = node_for(&mut mem, 2, 2);
        let head = mem.head();
        mem.swap_tail(1, a).unwrap();
        mem.write(1, Cell::Node(a, Field::Prev), Word::Ref(Some(head))).unwrap();
        let err = mem.write(2, Cell::Node(b, Field::Prev), Word::Ref(Some(head))).unwrap_err();
        assert_eq!(err, Fault::InDegree { node: head });
        // a is the tail: nobody may point at it with prev
        let err = mem.write(2, Cell::Node(b, Field::Prev), Word::Ref(Some(a))).unwrap_err();
        assert_eq!(err, Fault::InDegree { node: a });
    }

    #[test]
    fn in_work_follows_its_state_machine() {
        let mut mem = Memory::new(1);
        let a = node_for(&mut mem, 1, 1);
        let w = |x| Word::Int(x);
        mem.write(1, Cell::Node(a, Field::InWork), w(1)).unwrap();
        mem.write(1, Cell::Node(a, Field::InWork), w(2)).unwrap();
        mem.write(1, Cell::Node(a, Field::InWork), w(2)).unwrap();
        mem.write(1, Cell::Node(a, Field::InWork), w(0)).unwrap();
        let err = mem.write(1, Cell::Node(a, Field::InWork), w(0)).unwrap_err();
        assert!(matches!(err, Fault::InWorkTransition { from: 0, to: 0, .. }));
        mem.write(1, Cell::Node(a, Field::InWork), w(1)).unwrap();
        let err = mem.write(1, Cell::Node(a, Field::InWork), w(1)).unwrap_err();
        assert!(matches!(err, Fault::InWorkTransition { from: 1, to: 1, .. }));
    }

    #[test]
    fn vts_only_grows_by_one() {
        let mut mem = Memory::new(2);
        mem.increment_vts(1).unwrap();
        mem.increment_vts(1).unwrap();
        assert_eq!(mem.read_int(1, Cell::Vts(1)).unwrap(), 2);
        let err = mem.write(1, Cell::Vts(1), Word::Int(1)).unwrap_err();
        assert!(matches!(err, Fault::VtsStep { .. }));
    }

    #[test]
    fn chain_timestamp_violation_is_caught() {
        let mut mem = Memory::new(2);
        let head = mem.head();
        let x = node_for(&mut mem, 1, 1);
        let y = node_for(&mut mem, 2, 2);
        mem.swap_tail(1, x).unwrap();
        // y started strictly after x ended
        mem.write(1, Cell::Node(x, Field::EndVts), Word::Vts(Some(VectorTimestamp::from_entries(vec![1, 0]))))
            .unwrap();
        mem.write(2, Cell::Node(y, Field::StartVts), Word::Vts(Some(VectorTimestamp::from_entries(vec![1, 1]))))
            .unwrap();
        mem.write(2, Cell::Node(y, Field::Prev), Word::Ref(Some(head))).unwrap();
        let err = mem.write(1, Cell::Node(x, Field::Prev), Word::Ref(Some(y))).unwrap_err();
        assert_eq!(err, Fault::TimestampOrder { x, y });
    }

    #[test]
    fn snapshot_is_a_deep_copy() {
        let mut mem = Memory::new(2);
        let before = mem.snapshot();
        assert_eq!(before, mem.snapshot());
        let a = node_for(&mut mem, 1, 1);
        mem.swap_tail(1, a).unwrap();
        assert_ne!(before, mem.snapshot());
        assert_eq!(before.tail, before.head());
        assert_eq!(before.heap.len(), 1);
    }

    #[test]
    fn logging_records_each_access() {
        let mut mem = Memory::new(1);
        mem.set_logging(true);
        mem.read(1, Cell::Tail);
        mem.increment_vts(1).unwrap();
        assert_eq!(
            mem.take_accesses(),
            vec!["p1 R tail=n0", "p1 R VTS[1]=0", "p1 W VTS[1]=1"]
        );
        assert!(mem.take_accesses().is_empty());
    }
}
