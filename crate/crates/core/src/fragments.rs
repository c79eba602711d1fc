//! Recovery graph machinery: gathering announced nodes and their `prev`
//! edges, splitting the graph into maximal paths, classifying the paths
//! into head, tail and middle fragments, and ordering fragments by `≻`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::error::Fault;
use crate::memory::{Cell, Field, Memory, MemorySnapshot, NvHeap};
use crate::types::{path_compare, NodeId, NodeRecord, PathOrder};

/// A graph vertex: a node record, or the marker standing for `tail`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Vertex {
    Tail,
    Node(NodeId),
}

impl Vertex {
    pub fn node(self) -> Option<NodeId> {
        match self {
            Vertex::Tail => None,
            Vertex::Node(id) => Some(id),
        }
    }
}

impl fmt::Display for Vertex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Vertex::Tail => f.write_str("TAIL"),
            Vertex::Node(id) => write!(f, "{id}"),
        }
    }
}

/// `(V, E)` where an edge `u -> v` means `u.prev = v` (or `tail = v` when
/// `u` is [`Vertex::Tail`]). Every vertex has at most one outgoing edge.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct FragmentGraph {
    vertices: BTreeSet<Vertex>,
    edges: BTreeMap<Vertex, Vertex>,
}

pub type Path = Vec<Vertex>;

impl FragmentGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_vertex(&mut self, v: Vertex) {
        self.vertices.insert(v);
    }

    /// Adds `u -> v` and both endpoints. Re-adding the same edge is a no-op.
    pub fn add_edge(&mut self, u: Vertex, v: Vertex) -> Result<(), Fault> {
        self.vertices.insert(u);
        self.vertices.insert(v);
        match self.edges.get(&u) {
            Some(&w) if w != v => Err(Fault::GraphInDegree {
                node: v.node().or(w.node()).unwrap_or(NodeId(0)),
            }),
            _ => {
                self.edges.insert(u, v);
                Ok(())
            }
        }
    }

    pub fn union(&mut self, other: &FragmentGraph) -> Result<(), Fault> {
        self.vertices.extend(other.vertices.iter().copied());
        for (&u, &v) in &other.edges {
            self.add_edge(u, v)?;
        }
        Ok(())
    }

    pub fn vertices(&self) -> &BTreeSet<Vertex> {
        &self.vertices
    }

    pub fn contains(&self, v: Vertex) -> bool {
        self.vertices.contains(&v)
    }

    pub fn edges(&self) -> impl Iterator<Item = (Vertex, Vertex)> + '_ {
        self.edges.iter().map(|(&u, &v)| (u, v))
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Splits the graph into maximal paths, each running from an in-degree-0
    /// vertex along edges to an out-degree-0 vertex. Paths come out ordered
    /// by their first vertex.
    pub fn maximal_paths(&self) -> Result<Vec<Path>, Fault> {
        let mut indeg: BTreeMap<Vertex, usize> = BTreeMap::new();
        for &v in self.edges.values() {
            let d = indeg.entry(v).or_default();
            *d += 1;
            if *d > 1 {
                return Err(Fault::GraphInDegree { node: v.node().unwrap_or(NodeId(0)) });
            }
        }
        let mut paths = Vec::new();
        let mut covered = 0;
        for &s in &self.vertices {
            if indeg.contains_key(&s) {
                continue;
            }
            let mut path = vec![s];
            let mut cur = s;
            while let Some(&next) = self.edges.get(&cur) {
                path.push(next);
                cur = next;
            }
            covered += path.len();
            paths.push(path);
        }
        if covered != self.vertices.len() {
            let on_cycle = self
                .vertices
                .iter()
                .find(|v| !paths.iter().any(|p| p.contains(v)))
                .and_then(|v| v.node())
                .unwrap_or(NodeId(0));
            return Err(Fault::GraphCycle { node: on_cycle });
        }
        Ok(paths)
    }
}

/// Builds the graph from `Nodes[0..=n]` and their `prevExecution` chains,
/// without the tail marker. One coalesced read-only pass over memory.
pub fn gather_graph_plain(snap: &MemorySnapshot) -> Result<FragmentGraph, Fault> {
    let mut g = FragmentGraph::new();
    for slot in &snap.announce {
        let mut cur = *slot;
        while let Some(id) = cur {
            let rec = snap.heap.get(id);
            g.add_vertex(Vertex::Node(id));
            if let Some(p) = rec.prev {
                g.add_edge(Vertex::Node(id), Vertex::Node(p))?;
            }
            cur = rec.prev_execution;
        }
    }
    Ok(g)
}

/// Same traversal as [`gather_graph_plain`] reading live memory.
pub fn gather_graph_live(mem: &Memory) -> Result<FragmentGraph, Fault> {
    let mut g = FragmentGraph::new();
    for i in 0..=mem.n() {
        let mut cur = mem.announced_at(i);
        while let Some(id) = cur {
            let rec = mem.heap().get(id);
            g.add_vertex(Vertex::Node(id));
            if let Some(p) = rec.prev {
                g.add_edge(Vertex::Node(id), Vertex::Node(p))?;
            }
            cur = rec.prev_execution;
        }
    }
    Ok(g)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
enum GatherPc {
    ReadAnnounce(usize),
    Await(usize, NodeId),
    Visit(usize, NodeId),
}

/// Outcome of one [`AwaitingGather`] step.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GatherStep {
    Continue,
    Spin,
    Done,
}

/// The awaiting traversal, one shared access per step: read `Nodes[j]`,
/// then for each node on its `prevExecution` chain wait until its `inWork`
/// is 0 or 2 before reading its `prev` and `prevExecution`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct AwaitingGather {
    pc: GatherPc,
    graph: FragmentGraph,
}

impl Default for AwaitingGather {
    fn default() -> Self {
        Self::new()
    }
}

impl AwaitingGather {
    pub fn new() -> Self {
        Self { pc: GatherPc::ReadAnnounce(0), graph: FragmentGraph::new() }
    }

    pub fn label(&self) -> &'static str {
        match self.pc {
            GatherPc::ReadAnnounce(_) => "READ_ANNOUNCE",
            GatherPc::Await(..) => "AWAIT",
            GatherPc::Visit(..) => "VISIT",
        }
    }

    pub fn graph(&self) -> &FragmentGraph {
        &self.graph
    }

    pub fn into_graph(self) -> FragmentGraph {
        self.graph
    }

    /// The node this gather is currently waiting on, if any.
    pub fn awaiting(&self) -> Option<NodeId> {
        match self.pc {
            GatherPc::Await(_, id) => Some(id),
            _ => None,
        }
    }

    fn next_announce(&mut self, j: usize, n: usize) -> GatherStep {
        if j >= n {
            GatherStep::Done
        } else {
            self.pc = GatherPc::ReadAnnounce(j + 1);
            GatherStep::Continue
        }
    }

    pub fn step(&mut self, mem: &mut Memory, actor: usize) -> Result<GatherStep, Fault> {
        let n = mem.n();
        match self.pc {
            GatherPc::ReadAnnounce(j) => match mem.read_ref(actor, Cell::Announce(j))? {
                Some(id) => {
                    self.pc = GatherPc::Await(j, id);
                    Ok(GatherStep::Continue)
                }
                None => Ok(self.next_announce(j, n)),
            },
            GatherPc::Await(j, id) => {
                let w = mem.read_int(actor, Cell::Node(id, Field::InWork))?;
                if w == 0 || w == 2 {
                    self.pc = GatherPc::Visit(j, id);
                    Ok(GatherStep::Continue)
                } else {
                    Ok(GatherStep::Spin)
                }
            }
            GatherPc::Visit(j, id) => {
                // prevExecution is immutable once announced; reading it in
                // the same step as prev does not hide any interleaving
                let prev = mem.read_ref(actor, Cell::Node(id, Field::Prev))?;
                let pe = mem.read_ref(actor, Cell::Node(id, Field::PrevExecution))?;
                self.graph.add_vertex(Vertex::Node(id));
                if let Some(p) = prev {
                    self.graph.add_edge(Vertex::Node(id), Vertex::Node(p))?;
                }
                match pe {
                    Some(next) => {
                        self.pc = GatherPc::Await(j, next);
                        Ok(GatherStep::Continue)
                    }
                    None => Ok(self.next_announce(j, n)),
                }
            }
        }
    }
}

/// Partition of maximal paths for splicing.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Classification {
    pub tail_path: Option<Path>,
    pub head_path: Option<Path>,
    pub middle: Vec<Path>,
    pub singles: Vec<Path>,
    /// Set when one path holds both the tail marker and the head node.
    pub full_path: bool,
}

/// Classifies paths. With `separate_singles`, length-1 paths go to
/// `singles` (the system-wide recovery); otherwise they stay in `middle`.
/// The head node's path is never treated as a single, even when the head
/// node is alone.
pub fn classify(paths: Vec<Path>, head: NodeId, separate_singles: bool) -> Classification {
    let head_v = Vertex::Node(head);
    let mut c = Classification {
        tail_path: None,
        head_path: None,
        middle: Vec::new(),
        singles: Vec::new(),
        full_path: false,
    };
    for p in paths {
        let has_tail = p.contains(&Vertex::Tail);
        let has_head = p.contains(&head_v);
        if has_tail && has_head {
            c.full_path = true;
            c.tail_path = Some(p.clone());
            c.head_path = Some(p);
        } else if has_tail {
            c.tail_path = Some(p);
        } else if has_head {
            c.head_path = Some(p);
        } else if separate_singles && p.len() == 1 {
            c.singles.push(p);
        } else {
            c.middle.push(p);
        }
    }
    c
}

fn records<'a>(heap: &'a NvHeap, p: &Path) -> Vec<&'a NodeRecord> {
    p.iter().filter_map(|v| v.node()).map(|id| heap.get(id)).collect()
}

/// `≻` between two fragments, comparing their nodes' timestamps.
pub fn path_order(heap: &NvHeap, a: &Path, b: &Path) -> Result<PathOrder, Fault> {
    path_compare(&records(heap, a), &records(heap, b))
}

fn start_key(heap: &NvHeap, p: &Path) -> (usize, u64, NodeId) {
    let id = p.iter().find_map(|v| v.node()).expect("fragment with a node");
    let (pid, seq) = heap.get(id).order_key();
    (pid, seq, id)
}

/// Orders fragments so that whenever `A ≻ B`, `A` comes first. The relation
/// is not assumed transitive: this is a topological sort over all pairwise
/// comparisons, taking the smallest `(pid, seq)` start among the ready
/// fragments at each step. A cycle is a fault.
pub fn arrange(heap: &NvHeap, fragments: Vec<Path>) -> Result<Vec<Path>, Fault> {
    let k = fragments.len();
    let recs: Vec<Vec<&NodeRecord>> = fragments.iter().map(|p| records(heap, p)).collect();
    let mut succ: Vec<Vec<usize>> = vec![Vec::new(); k];
    let mut indeg = vec![0usize; k];
    for a in 0..k {
        for b in a + 1..k {
            match path_compare(&recs[a], &recs[b])? {
                PathOrder::FirstSucceeds => {
                    succ[a].push(b);
                    indeg[b] += 1;
                }
                PathOrder::SecondSucceeds => {
                    succ[b].push(a);
                    indeg[a] += 1;
                }
                PathOrder::Equal => {}
            }
        }
    }
    let keys: Vec<_> = fragments.iter().map(|p| start_key(heap, p)).collect();
    let mut ready: BTreeSet<((usize, u64, NodeId), usize)> =
        (0..k).filter(|&i| indeg[i] == 0).map(|i| (keys[i], i)).collect();
    let mut order = Vec::with_capacity(k);
    while let Some(first) = ready.pop_first() {
        let i = first.1;
        order.push(i);
        for &j in &succ[i] {
            indeg[j] -= 1;
            if indeg[j] == 0 {
                ready.insert((keys[j], j));
            }
        }
    }
    if order.len() != k {
        return Err(Fault::OrderCycle { remaining: k - order.len() });
    }
    let mut slots: Vec<Option<Path>> = fragments.into_iter().map(Some).collect();
    Ok(order.into_iter().map(|i| slots[i].take().unwrap()).collect())
}

pub fn path_start(p: &Path) -> Vertex {
    p[0]
}

pub fn path_end(p: &Path) -> Vertex {
    *p.last().expect("paths are non-empty")
}

/// Node ids on a path, without the tail marker.
pub fn path_nodes(p: &Path) -> Vec<NodeId> {
    p.iter().filter_map(|v| v.node()).collect()
}
