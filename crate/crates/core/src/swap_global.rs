//! Recoverable SWAP for the system-wide failures model.
//!
//! After a system-wide crash the system actor runs [`GlobalRecover`]: it
//! rebuilds the fragment graph from the announcement array, and either
//! re-executes the swaps of nodes that never reached `tail` (when the list
//! is still whole) or splices all fragments back into one list in `≻`
//! order. Each process then runs [`GlobalIndividualRecover`].

use crate::algorithm::{Frame, Model, StepKind, StepLabel, StepOutcome, SwapAlgorithm, SwapFrame};
use crate::error::Fault;
use crate::fragments::{
    arrange, classify, gather_graph_live, path_end, path_nodes, path_start, Path, Vertex,
};
use crate::memory::{Cell, Field, Memory, Word};
use crate::types::{NodeId, Value};

#[derive(Clone, Copy, Debug, Default)]
pub struct GlobalSwap;

impl SwapAlgorithm for GlobalSwap {
    fn name(&self) -> &'static str {
        "global"
    }

    fn model(&self) -> Model {
        Model::Global
    }

    fn crash_free_steps(&self, n: usize) -> u64 {
        8 + 2 * n as u64
    }

    fn begin_swap(&self, pid: usize, val: Value, seq: u64) -> Frame {
        Frame::Swap(SwapFrame::fresh(pid, val, seq, false))
    }

    fn begin_recover(&self, pid: usize, val: Value, seq: u64) -> Frame {
        Frame::GlobalIndividual(GlobalIndividualRecover::new(pid, val, seq))
    }

    fn begin_system_recovery(&self) -> Option<Frame> {
        Some(Frame::GlobalRecover(GlobalRecover::new()))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
enum GrPc {
    Gather,
    Reexec { rest: Vec<NodeId>, cur: SwapFrame },
    Splice { writes: Vec<(NodeId, NodeId)>, next: usize },
}

/// The global recovery procedure, run by the system actor.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct GlobalRecover {
    pc: GrPc,
}

impl Default for GlobalRecover {
    fn default() -> Self {
        Self::new()
    }
}

/// What the gather step decided: re-run these single nodes, or perform
/// these `prev` writes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum MendPlan {
    Reexecute(Vec<NodeId>),
    Splice(Vec<(NodeId, NodeId)>),
}

/// Computes the mending plan for the current memory state. Pure local work
/// over the gathered graph.
pub fn plan_mend(mem: &Memory) -> Result<MendPlan, Fault> {
    let mut g = gather_graph_live(mem)?;
    g.add_edge(Vertex::Tail, Vertex::Node(mem.tail()))?;
    let paths = g.maximal_paths()?;
    let c = classify(paths, mem.head(), true);
    let heap = mem.heap();
    if c.full_path {
        let mut singles: Vec<NodeId> = c.singles.iter().flat_map(path_nodes).collect();
        singles.sort_by_key(|&id| (heap.get(id).order_key(), id));
        return Ok(MendPlan::Reexecute(singles));
    }
    let tail_path = c.tail_path.ok_or(Fault::MissingHeadPath)?;
    let head_path = c.head_path.ok_or(Fault::MissingHeadPath)?;
    let mut frags: Vec<Path> = c.middle;
    frags.extend(c.singles);
    let ordered = arrange(heap, frags)?;
    let mut writes = Vec::with_capacity(ordered.len() + 1);
    let mut end = end_node(&tail_path);
    for p in ordered.iter().chain(std::iter::once(&head_path)) {
        let start = path_start(p).node().expect("fragment starts at a node");
        writes.push((end, start));
        end = end_node(p);
    }
    Ok(MendPlan::Splice(writes))
}

fn end_node(p: &Path) -> NodeId {
    path_end(p).node().expect("fragment ends at a node")
}

fn system_label(l: StepLabel) -> StepLabel {
    let name = match l.name {
        "PRIM_SWAP" => "GR_PRIM_SWAP",
        "PERSIST_PREV" => "GR_PERSIST_PREV",
        "COLLECT_END" => "GR_COLLECT_END",
        other => other,
    };
    StepLabel { name, index: l.index }
}

impl GlobalRecover {
    pub fn new() -> Self {
        Self { pc: GrPc::Gather }
    }

    pub fn label(&self) -> StepLabel {
        match &self.pc {
            GrPc::Gather => StepLabel::new("GR_GATHER"),
            GrPc::Reexec { cur, .. } => system_label(cur.label()),
            GrPc::Splice { writes, next } if *next + 1 == writes.len() => {
                StepLabel::new("GR_SPLICE_HEAD")
            }
            GrPc::Splice { .. } => StepLabel::new("GR_SPLICE"),
        }
    }

    pub fn step(&mut self, mem: &mut Memory) -> Result<StepOutcome, Fault> {
        let label = self.label();
        let done = StepOutcome { label, kind: StepKind::Done(None) };
        match &mut self.pc {
            GrPc::Gather => match plan_mend(mem)? {
                MendPlan::Reexecute(mut singles) => {
                    if singles.is_empty() {
                        return Ok(done);
                    }
                    let first = singles.remove(0);
                    let owner = mem.heap().get(first).owner;
                    self.pc = GrPc::Reexec {
                        rest: singles,
                        cur: SwapFrame::resume_at_swap(owner, first, false, true),
                    };
                }
                MendPlan::Splice(writes) => {
                    self.pc = GrPc::Splice { writes, next: 0 };
                }
            },
            GrPc::Reexec { rest, cur } => {
                let out = cur.step(mem, 0)?;
                if let StepKind::Done(_) = out.kind {
                    if rest.is_empty() {
                        return Ok(done);
                    }
                    let id = rest.remove(0);
                    let owner = mem.heap().get(id).owner;
                    *cur = SwapFrame::resume_at_swap(owner, id, false, true);
                }
            }
            GrPc::Splice { writes, next } => {
                let (u, v) = writes[*next];
                mem.write(0, Cell::Node(u, Field::Prev), Word::Ref(Some(v)))?;
                *next += 1;
                if *next == writes.len() {
                    return Ok(done);
                }
            }
        }
        Ok(StepOutcome::cont(label))
    }
}

/// After global recovery: the `prev`-list from `tail` must visit every
/// announced node exactly once and end at `Nodes[0]`.
pub fn check_list_mended(mem: &Memory) -> Result<(), Fault> {
    let snap = mem.snapshot();
    let list = snap.list_from_tail();
    let mut sorted = list.clone();
    sorted.sort();
    let announced = snap.announced();
    if list.last() != Some(&snap.head()) {
        return Err(Fault::ListNotMended {
            detail: format!("list ends at {:?}, not the head node", list.last()),
        });
    }
    if sorted != announced {
        return Err(Fault::ListNotMended {
            detail: format!(
                "list holds {} nodes, {} announced",
                list.len(),
                announced.len()
            ),
        });
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
enum IndivPc {
    Check,
    Return(NodeId),
    Rerun(SwapFrame),
}

/// Per-process recovery once global recovery has completed.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct GlobalIndividualRecover {
    pid: usize,
    val: Value,
    seq: u64,
    pc: IndivPc,
}

impl GlobalIndividualRecover {
    pub fn new(pid: usize, val: Value, seq: u64) -> Self {
        Self { pid, val, seq, pc: IndivPc::Check }
    }

    pub fn label(&self) -> StepLabel {
        match &self.pc {
            IndivPc::Check => StepLabel::new("REC_CHECK"),
            IndivPc::Return(_) => StepLabel::new("RETURN"),
            IndivPc::Rerun(f) => f.label(),
        }
    }

    pub fn step(&mut self, mem: &mut Memory) -> Result<StepOutcome, Fault> {
        let label = self.label();
        let pid = self.pid;
        match &mut self.pc {
            IndivPc::Check => {
                let announced = match mem.read_ref(pid, Cell::Announce(pid))? {
                    Some(id) => {
                        let seq = mem.read_int(pid, Cell::Node(id, Field::Seq))?;
                        (seq >= mem.seq_of(pid)).then_some(id)
                    }
                    None => None,
                };
                self.pc = match announced {
                    Some(id) => IndivPc::Return(id),
                    None => IndivPc::Rerun(SwapFrame::fresh(pid, self.val, self.seq, false)),
                };
                Ok(StepOutcome::cont(label))
            }
            IndivPc::Return(id) => {
                let prev = mem
                    .read_ref(pid, Cell::Node(*id, Field::Prev))?
                    .ok_or(Fault::NullPrevAfterRecovery { pid })?;
                let v = mem.read_value(pid, Cell::Node(prev, Field::Val))?;
                Ok(StepOutcome { label, kind: StepKind::Done(Some(v)) })
            }
            IndivPc::Rerun(f) => f.step(mem, pid),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn drive(mem: &mut Memory, f: &mut Frame, actor: usize, limit: usize) -> Option<Value> {
        for _ in 0..limit {
            if let StepKind::Done(v) = f.step(mem, actor).unwrap().kind {
                return v;
            }
        }
        panic!("did not finish");
    }

    fn steps(mem: &mut Memory, f: &mut Frame, actor: usize, k: usize) {
        for _ in 0..k {
            assert_eq!(f.step(mem, actor).unwrap().kind, StepKind::Continue);
        }
    }

    #[test]
    fn recovery_without_mid_swap_crash_changes_no_prev() {
        let alg = GlobalSwap;
        let mut mem = Memory::new(2);
        for pid in 1..=2 {
            let seq = mem.increment_seq(pid);
            let mut f = alg.begin_swap(pid, Value::encode(pid, seq), seq);
            drive(&mut mem, &mut f, pid, 100);
        }
        let before = mem.snapshot();
        let mut gr = alg.begin_system_recovery().unwrap();
        drive(&mut mem, &mut gr, 0, 10);
        assert_eq!(before, mem.snapshot());
        check_list_mended(&mem).unwrap();
    }

    #[test]
    fn unswapped_single_is_reexecuted_to_tail() {
        let alg = GlobalSwap;
        let n = 2;
        let mut mem = Memory::new(n);
        let seq = mem.increment_seq(1);
        let mut f = alg.begin_swap(1, Value::Int(10), seq);
        drive(&mut mem, &mut f, 1, 100);
        // p2 crashes right after announcing
        let seq = mem.increment_seq(2);
        let mut f = alg.begin_swap(2, Value::Int(20), seq);
        steps(&mut mem, &mut f, 2, 2 + n + 3);
        let announced = mem.announced_at(2).unwrap();
        assert_eq!(plan_mend(&mem).unwrap(), MendPlan::Reexecute(vec![announced]));
        let mut gr = alg.begin_system_recovery().unwrap();
        drive(&mut mem, &mut gr, 0, 100);
        check_list_mended(&mem).unwrap();
        assert_eq!(mem.tail(), announced);
        let mut r = alg.begin_recover(2, Value::Int(20), seq);
        assert_eq!(drive(&mut mem, &mut r, 2, 10), Some(Value::Int(10)));
    }

    #[test]
    fn crash_before_announce_reruns_in_full() {
        let alg = GlobalSwap;
        let mut mem = Memory::new(2);
        let seq = mem.increment_seq(1);
        let mut f = alg.begin_swap(1, Value::Int(10), seq);
        steps(&mut mem, &mut f, 1, 3);
        let mut gr = alg.begin_system_recovery().unwrap();
        drive(&mut mem, &mut gr, 0, 100);
        let mut r = alg.begin_recover(1, Value::Int(10), seq);
        assert_eq!(drive(&mut mem, &mut r, 1, 100), Some(Value::Bottom));
        check_list_mended(&mem).unwrap();
    }

    #[test]
    fn crash_between_swap_and_persist_is_spliced() {
        let alg = GlobalSwap;
        let n = 2;
        let mut mem = Memory::new(n);
        // p1 swaps but never persists prev; p2 completes on top of it
        let s1 = mem.increment_seq(1);
        let mut f1 = alg.begin_swap(1, Value::Int(1), s1);
        steps(&mut mem, &mut f1, 1, 2 + n + 4);
        let s2 = mem.increment_seq(2);
        let mut f2 = alg.begin_swap(2, Value::Int(2), s2);
        assert_eq!(drive(&mut mem, &mut f2, 2, 100), Some(Value::Int(1)));
        match plan_mend(&mem).unwrap() {
            MendPlan::Splice(w) => assert_eq!(w.len(), 1),
            other => panic!("{other:?}"),
        }
        let mut gr = alg.begin_system_recovery().unwrap();
        drive(&mut mem, &mut gr, 0, 100);
        check_list_mended(&mem).unwrap();
        let mut r = alg.begin_recover(1, Value::Int(1), s1);
        assert_eq!(drive(&mut mem, &mut r, 1, 10), Some(Value::Bottom));
    }
}
