//! Recoverable SWAP for the independent failures model.
//!
//! SWAP additionally raises `inWork` around its critical section. RECOVER
//! serializes on the RME lock and gathers the graph twice, waiting for each
//! node that is mid-swap, before splicing its own node onto a fragment
//! start seen in the first gather (or onto the head fragment).

use crate::algorithm::{Frame, Model, StepKind, StepLabel, StepOutcome, SwapAlgorithm, SwapFrame};
use crate::error::Fault;
use crate::fragments::{arrange, classify, path_order, path_start, AwaitingGather, FragmentGraph, GatherStep, Path, Vertex};
use crate::memory::{Cell, Field, Memory, Word};
use crate::rme_lock::{LockMachine, LockStep};
use crate::types::{NodeId, PathOrder, Value, VectorTimestamp};

#[derive(Clone, Copy, Debug, Default)]
pub struct IndependentSwap;

impl SwapAlgorithm for IndependentSwap {
    fn name(&self) -> &'static str {
        "independent"
    }

    fn model(&self) -> Model {
        Model::Independent
    }

    fn crash_free_steps(&self, n: usize) -> u64 {
        10 + 2 * n as u64
    }

    fn begin_swap(&self, pid: usize, val: Value, seq: u64) -> Frame {
        Frame::Swap(SwapFrame::fresh(pid, val, seq, true))
    }

    fn begin_recover(&self, pid: usize, val: Value, seq: u64) -> Frame {
        Frame::IndependentRecover(Box::new(IndependentRecover::new(pid, val, seq)))
    }

    fn begin_system_recovery(&self) -> Option<Frame> {
        None
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
enum RecPc {
    Check,
    Rerun(SwapFrame),
    SetInWork2,
    Lock(LockMachine),
    CheckPrev,
    Gather1(AwaitingGather),
    ReadTail,
    AwaitTail(NodeId),
    Gather2(NodeId, AwaitingGather),
    Paths(NodeId, FragmentGraph),
    Reexec(SwapFrame),
    Splice(NodeId),
    CollectEnd(usize, Vec<u64>),
    Unlock(LockMachine),
    Return,
}

/// RECOVER for one crashed invocation. Restarted from the top after every
/// crash; persisted effects steer it to the right branch.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct IndependentRecover {
    pid: usize,
    val: Value,
    seq: u64,
    node: Option<NodeId>,
    first: FragmentGraph,
    pc: RecPc,
}

/// Which fragment start a recovering node should link to.
///
/// `my_path` must end at `my_node`. Returns the start of the first ordered
/// middle path after `my_path` whose start was seen in the first gather,
/// else the head path's start. The tail path is ranked first, and middle
/// paths that would have to precede it are left out.
pub fn choose_candidate(
    mem: &Memory,
    paths: Vec<Path>,
    my_node: NodeId,
    first: &FragmentGraph,
) -> Result<NodeId, Fault> {
    let me = Vertex::Node(my_node);
    let c = classify(paths, mem.head(), false);
    // The tail path stays on top. A fragment that would have to sit above
    // it is a lone node whose owner re-executes its swap; never link it.
    let mut ordered = Vec::new();
    let mut middle = c.middle;
    if let Some(t) = c.tail_path {
        let mut keep = Vec::with_capacity(middle.len());
        for p in middle {
            match path_order(mem.heap(), &p, &t) {
                Ok(PathOrder::FirstSucceeds) | Err(Fault::OrderBothWays) => {}
                Ok(_) => keep.push(p),
                Err(f) => return Err(f),
            }
        }
        middle = keep;
        ordered.push(t);
    }
    ordered.extend(arrange(mem.heap(), middle)?);
    let from = ordered.iter().position(|p| p.contains(&me)).map_or(0, |i| i + 1);
    for p in &ordered[from..] {
        let s = path_start(p);
        if s != Vertex::Tail && first.contains(s) {
            return Ok(s.node().expect("middle paths start at nodes"));
        }
    }
    let head = c.head_path.ok_or(Fault::MissingHeadPath)?;
    Ok(path_start(&head).node().expect("head path starts at a node"))
}

impl IndependentRecover {
    pub fn new(pid: usize, val: Value, seq: u64) -> Self {
        Self {
            pid,
            val,
            seq,
            node: None,
            first: FragmentGraph::new(),
            pc: RecPc::Check,
        }
    }

    pub fn label(&self) -> StepLabel {
        match &self.pc {
            RecPc::Check => StepLabel::new("REC_CHECK"),
            RecPc::Rerun(f) | RecPc::Reexec(f) => f.label(),
            RecPc::SetInWork2 => StepLabel::new("SET_INWORK2"),
            RecPc::Lock(m) | RecPc::Unlock(m) => StepLabel::new(m.label()),
            RecPc::CheckPrev => StepLabel::new("CHECK_PREV"),
            RecPc::Gather1(_) => StepLabel::new("GATHER1"),
            RecPc::ReadTail => StepLabel::new("READ_TAIL"),
            RecPc::AwaitTail(_) => StepLabel::new("AWAIT_TAIL"),
            RecPc::Gather2(..) => StepLabel::new("GATHER2"),
            RecPc::Paths(..) => StepLabel::new("PATHS"),
            RecPc::Splice(_) => StepLabel::new("SPLICE"),
            RecPc::CollectEnd(k, _) => StepLabel::indexed("COLLECT_END_REC", *k),
            RecPc::Return => StepLabel::new("RETURN"),
        }
    }

    fn my_node(&self) -> Result<NodeId, Fault> {
        self.node.ok_or(Fault::PoisonRead { pid: self.pid, slot: "myNode" })
    }

    /// Every node that swapped into `tail` before `myNode` must have been
    /// seen by the first gather.
    fn check_first_gather(&self, mem: &Memory) -> Result<(), Fault> {
        let me = self.my_node()?;
        let order = mem.swap_order();
        if let Some(pos) = order.iter().position(|&x| x == me) {
            for &x in &order[..pos] {
                if !self.first.contains(Vertex::Node(x)) {
                    return Err(Fault::IncompleteFirstGather { node: me, missing: x });
                }
            }
        }
        Ok(())
    }

    pub fn step(&mut self, mem: &mut Memory) -> Result<StepOutcome, Fault> {
        let label = self.label();
        let pid = self.pid;
        let cont = Ok(StepOutcome::cont(label));
        let spin = Ok(StepOutcome { label, kind: StepKind::Spin });
        let my_node = self.my_node();
        match &mut self.pc {
            RecPc::Check => {
                let announced = match mem.read_ref(pid, Cell::Announce(pid))? {
                    Some(id) => {
                        let seq = mem.read_int(pid, Cell::Node(id, Field::Seq))?;
                        (seq >= mem.seq_of(pid)).then_some(id)
                    }
                    None => None,
                };
                match announced {
                    Some(id) => {
                        self.node = Some(id);
                        self.pc = RecPc::SetInWork2;
                    }
                    None => {
                        self.pc = RecPc::Rerun(SwapFrame::fresh(pid, self.val, self.seq, true));
                    }
                }
                cont
            }
            RecPc::Rerun(f) => f.step(mem, pid),
            RecPc::SetInWork2 => {
                let me = self.my_node()?;
                mem.write(pid, Cell::Node(me, Field::InWork), Word::Int(2))?;
                self.pc = RecPc::Lock(LockMachine::lock(pid));
                cont
            }
            RecPc::Lock(m) => match m.step(mem.lock_state_mut())? {
                LockStep::Spin => spin,
                LockStep::Continue => cont,
                LockStep::Done => {
                    self.pc = RecPc::CheckPrev;
                    cont
                }
            },
            RecPc::CheckPrev => {
                let me = self.my_node()?;
                self.pc = match mem.read_ref(pid, Cell::Node(me, Field::Prev))? {
                    Some(_) => RecPc::CollectEnd(1, Vec::new()),
                    None => RecPc::Gather1(AwaitingGather::new()),
                };
                cont
            }
            RecPc::Gather1(g) => match g.step(mem, pid)? {
                GatherStep::Spin => spin,
                GatherStep::Continue => cont,
                GatherStep::Done => {
                    self.first = std::mem::take(g).into_graph();
                    self.check_first_gather(mem)?;
                    self.pc = RecPc::ReadTail;
                    cont
                }
            },
            RecPc::ReadTail => {
                let t = mem.read_ref(pid, Cell::Tail)?.expect("tail is never null");
                self.pc = RecPc::AwaitTail(t);
                cont
            }
            RecPc::AwaitTail(t) => {
                let t = *t;
                let w = mem.read_int(pid, Cell::Node(t, Field::InWork))?;
                if w == 1 {
                    return spin;
                }
                self.pc = RecPc::Gather2(t, AwaitingGather::new());
                cont
            }
            RecPc::Gather2(t, g) => match g.step(mem, pid)? {
                GatherStep::Spin => spin,
                GatherStep::Continue => cont,
                GatherStep::Done => {
                    let t = *t;
                    let graph = std::mem::take(g).into_graph();
                    self.pc = RecPc::Paths(t, graph);
                    cont
                }
            },
            RecPc::Paths(t, g2) => {
                let me = my_node?;
                let mut g = std::mem::take(g2);
                g.union(&self.first)?;
                g.add_vertex(Vertex::Node(*t));
                let mut paths = g.maximal_paths()?;
                // Swaps that landed after `tail` was read may already point
                // at the node read; the marker goes on the path through it.
                if let Some(p) = paths.iter_mut().find(|p| p.contains(&Vertex::Node(*t))) {
                    p.insert(0, Vertex::Tail);
                }
                let mine = paths
                    .iter()
                    .find(|p| p.contains(&Vertex::Node(me)))
                    .ok_or(Fault::MissingOwnPath { node: me })?;
                if mine.len() == 1 {
                    self.pc = RecPc::Reexec(SwapFrame::resume_at_swap(pid, me, true, true));
                } else {
                    let target = choose_candidate(mem, paths, me, &self.first)?;
                    self.pc = RecPc::Splice(target);
                }
                cont
            }
            RecPc::Reexec(f) => {
                let out = f.step(mem, pid)?;
                if let StepKind::Done(_) = out.kind {
                    self.pc = RecPc::Unlock(LockMachine::unlock(pid));
                }
                Ok(StepOutcome::cont(out.label))
            }
            RecPc::Splice(target) => {
                let me = my_node?;
                mem.write(pid, Cell::Node(me, Field::Prev), Word::Ref(Some(*target)))?;
                self.pc = RecPc::CollectEnd(1, Vec::new());
                cont
            }
            RecPc::CollectEnd(k, acc) => {
                acc.push(mem.read_int(pid, Cell::Vts(*k))?);
                if *k < mem.n() {
                    *k += 1;
                } else {
                    let me = my_node?;
                    let v = VectorTimestamp::from_entries(std::mem::take(acc));
                    mem.write(pid, Cell::Node(me, Field::EndVts), Word::Vts(Some(v)))?;
                    self.pc = RecPc::Unlock(LockMachine::unlock(pid));
                }
                cont
            }
            RecPc::Unlock(m) => match m.step(mem.lock_state_mut())? {
                LockStep::Spin => spin,
                LockStep::Continue => cont,
                LockStep::Done => {
                    self.pc = RecPc::Return;
                    cont
                }
            },
            RecPc::Return => {
                let me = self.my_node()?;
                let prev = mem
                    .read_ref(pid, Cell::Node(me, Field::Prev))?
                    .ok_or(Fault::NullPrevAfterRecovery { pid })?;
                let v = mem.read_value(pid, Cell::Node(prev, Field::Val))?;
                Ok(StepOutcome { label, kind: StepKind::Done(Some(v)) })
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn drive(mem: &mut Memory, f: &mut Frame, actor: usize, limit: usize) -> (Value, Vec<String>) {
        let mut labels = Vec::new();
        for _ in 0..limit {
            let out = f.step(mem, actor).unwrap();
            labels.push(out.label.to_string());
            if let StepKind::Done(Some(v)) = out.kind {
                return (v, labels);
            }
        }
        panic!("did not finish: {labels:?}");
    }

    fn steps(mem: &mut Memory, f: &mut Frame, actor: usize, k: usize) {
        for _ in 0..k {
            assert_eq!(f.step(mem, actor).unwrap().kind, StepKind::Continue);
        }
    }

    // steps from invocation through the named point, independent model
    fn through_announce(n: usize) -> usize {
        2 + n + 4
    }

    #[test]
    fn crash_before_announce_behaves_as_fresh_swap() {
        let alg = IndependentSwap;
        let mut mem = Memory::new(2);
        let seq = mem.increment_seq(1);
        let mut f = alg.begin_swap(1, Value::Int(1), seq);
        steps(&mut mem, &mut f, 1, 3);
        let mut r = alg.begin_recover(1, Value::Int(1), seq);
        let (v, labels) = drive(&mut mem, &mut r, 1, 100);
        assert_eq!(v, Value::Bottom);
        assert_eq!(labels[0], "REC_CHECK");
        assert_eq!(labels.len(), 1 + 10 + 4);
    }

    #[test]
    fn crash_after_persist_short_circuits() {
        let alg = IndependentSwap;
        let n = 2;
        let mut mem = Memory::new(n);
        let seq = mem.increment_seq(1);
        let mut f = alg.begin_swap(1, Value::Int(1), seq);
        steps(&mut mem, &mut f, 1, through_announce(n) + 2);
        let nodes_before = mem.heap().len();
        let mut r = alg.begin_recover(1, Value::Int(1), seq);
        let (v, labels) = drive(&mut mem, &mut r, 1, 200);
        assert_eq!(v, Value::Bottom);
        assert!(labels.contains(&"CHECK_PREV".to_string()));
        assert!(!labels.iter().any(|l| l.starts_with("GATHER")));
        assert_eq!(mem.heap().len(), nodes_before);
        assert!(mem.lock_state().holders().is_empty());
    }

    #[test]
    fn unswapped_node_is_reexecuted() {
        let alg = IndependentSwap;
        let n = 2;
        let mut mem = Memory::new(n);
        let seq = mem.increment_seq(1);
        let mut f = alg.begin_swap(1, Value::Int(1), seq);
        steps(&mut mem, &mut f, 1, through_announce(n));
        let me = mem.announced_at(1).unwrap();
        let mut r = alg.begin_recover(1, Value::Int(1), seq);
        let (v, labels) = drive(&mut mem, &mut r, 1, 200);
        assert_eq!(v, Value::Bottom);
        assert!(labels.contains(&"PRIM_SWAP".to_string()));
        assert_eq!(mem.tail(), me);
        assert_eq!(mem.heap().get(me).in_work, 0);
    }

    #[test]
    fn swapped_but_unpersisted_node_is_spliced() {
        let alg = IndependentSwap;
        let n = 2;
        let mut mem = Memory::new(n);
        let s1 = mem.increment_seq(1);
        let mut f1 = alg.begin_swap(1, Value::Int(1), s1);
        steps(&mut mem, &mut f1, 1, through_announce(n) + 1);
        let s2 = mem.increment_seq(2);
        let mut f2 = alg.begin_swap(2, Value::Int(2), s2);
        assert_eq!(drive(&mut mem, &mut f2, 2, 100).0, Value::Int(1));
        let mut r = alg.begin_recover(1, Value::Int(1), s1);
        let (v, labels) = drive(&mut mem, &mut r, 1, 500);
        assert_eq!(v, Value::Bottom);
        assert!(labels.contains(&"SPLICE".to_string()));
        assert_eq!(mem.snapshot().list_from_tail().len(), 3);
    }

    #[test]
    fn recoverer_waits_for_in_flight_swap() {
        let alg = IndependentSwap;
        let n = 2;
        let mut mem = Memory::new(n);
        // p1 crashed between swap and persist
        let s1 = mem.increment_seq(1);
        let mut f1 = alg.begin_swap(1, Value::Int(1), s1);
        steps(&mut mem, &mut f1, 1, through_announce(n) + 1);
        // p2 announced (inWork = 1) and is paused
        let s2 = mem.increment_seq(2);
        let mut f2 = alg.begin_swap(2, Value::Int(2), s2);
        steps(&mut mem, &mut f2, 2, through_announce(n));
        let mut r = alg.begin_recover(1, Value::Int(1), s1);
        let mut spins = 0;
        for _ in 0..100 {
            if r.step(&mut mem, 1).unwrap().kind == StepKind::Spin {
                spins += 1;
            }
        }
        assert!(spins > 0);
        // p2 finishes, recovery proceeds
        assert_eq!(drive(&mut mem, &mut f2, 2, 100).0, Value::Int(1));
        assert_eq!(drive(&mut mem, &mut r, 1, 500).0, Value::Bottom);
    }

    #[test]
    fn crash_inside_recovery_keeps_lock_and_reenters() {
        let alg = IndependentSwap;
        let n = 2;
        let mut mem = Memory::new(n);
        let s1 = mem.increment_seq(1);
        let mut f1 = alg.begin_swap(1, Value::Int(1), s1);
        steps(&mut mem, &mut f1, 1, through_announce(n) + 1);
        let mut r = alg.begin_recover(1, Value::Int(1), s1);
        let mut in_gather = false;
        for _ in 0..200 {
            let out = r.step(&mut mem, 1).unwrap();
            if out.label.name == "GATHER1" {
                in_gather = true;
                break;
            }
        }
        assert!(in_gather);
        assert!(mem.lock_state().is_holder(1));
        // crash; a contender cannot enter while p1 is re-entering
        let mut contender = crate::rme_lock::LockMachine::lock(2);
        for _ in 0..50 {
            contender.step(mem.lock_state_mut()).unwrap();
        }
        assert_eq!(mem.lock_state().holders(), vec![1]);
        let mut r = alg.begin_recover(1, Value::Int(1), s1);
        assert_eq!(drive(&mut mem, &mut r, 1, 500).0, Value::Bottom);
    }
}
