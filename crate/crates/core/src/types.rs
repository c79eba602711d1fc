//! Value types shared by every module: swap values, operation identities,
//! vector timestamps, node records and the fragment order.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::Fault;

/// A value held by the swap object.
///
/// `Bottom` is the initial value of the object and is never used as an
/// operand by generated workloads. Serialized as JSON `null` or a number.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(from = "Option<u64>", into = "Option<u64>")]
pub enum Value {
    Bottom,
    Int(u64),
}

impl Value {
    /// Operand for the `seq`-th operation of process `pid`. Unique per run.
    pub fn encode(pid: usize, seq: u64) -> Value {
        Value::Int(((pid as u64) << 32) | (seq & 0xffff_ffff))
    }

    pub fn is_bottom(&self) -> bool {
        matches!(self, Value::Bottom)
    }
}

impl From<Option<u64>> for Value {
    fn from(v: Option<u64>) -> Self {
        v.map_or(Value::Bottom, Value::Int)
    }
}

impl From<Value> for Option<u64> {
    fn from(v: Value) -> Self {
        match v {
            Value::Bottom => None,
            Value::Int(x) => Some(x),
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Bottom => f.write_str("⊥"),
            Value::Int(x) => write!(f, "{x}"),
        }
    }
}

/// Identity of one operation: the invoking process (1-based) and the value
/// of its sequence counter at invocation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct OpId {
    pub pid: usize,
    pub seq: u64,
}

impl OpId {
    pub fn new(pid: usize, seq: u64) -> Self {
        Self { pid, seq }
    }
}

impl fmt::Display for OpId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "p{}#{}", self.pid, self.seq)
    }
}

/// Reference to a record in the non-volatile node heap.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub u32);

impl NodeId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "n{}", self.0)
    }
}

/// A length-n vector of per-process counters. Entry `i` (0-based) belongs to
/// process `i + 1`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct VectorTimestamp(Vec<u64>);

impl VectorTimestamp {
    pub fn zero(n: usize) -> Self {
        Self(vec![0; n])
    }

    pub fn from_entries(entries: Vec<u64>) -> Self {
        Self(entries)
    }

    pub fn entries(&self) -> &[u64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Componentwise `>=` with at least one strict `>`.
    ///
    /// Panics on a length mismatch: timestamps of one run always share `n`.
    pub fn dominates(&self, other: &VectorTimestamp) -> bool {
        assert_eq!(
            self.0.len(),
            other.0.len(),
            "vector timestamps of different length compared"
        );
        let mut strict = false;
        for (a, b) in self.0.iter().zip(&other.0) {
            match a.cmp(b) {
                Ordering::Less => return false,
                Ordering::Greater => strict = true,
                Ordering::Equal => {}
            }
        }
        strict
    }
}

/// Free-function form of [`VectorTimestamp::dominates`].
pub fn vts_dominates(u: &VectorTimestamp, v: &VectorTimestamp) -> bool {
    u.dominates(v)
}

/// One SWAP operation's non-volatile record.
///
/// `owner` is bookkeeping written at allocation; the algorithms use it only
/// to break ties deterministically when ordering fragments.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct NodeRecord {
    pub owner: usize,
    pub val: Value,
    pub prev: Option<NodeId>,
    pub prev_execution: Option<NodeId>,
    pub start_vts: Option<VectorTimestamp>,
    pub end_vts: Option<VectorTimestamp>,
    pub seq: u64,
    pub in_work: u8,
}

impl NodeRecord {
    pub fn new(owner: usize, val: Value, seq: u64) -> Self {
        Self {
            owner,
            val,
            prev: None,
            prev_execution: None,
            start_vts: None,
            end_vts: None,
            seq,
            in_work: 0,
        }
    }

    /// Tie-break key for fragments starting at this node.
    pub fn order_key(&self) -> (usize, u64) {
        (self.owner, self.seq)
    }
}

/// Outcome of comparing two node-disjoint paths under the fragment order.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PathOrder {
    /// Some node of the first path started after some node of the second ended.
    FirstSucceeds,
    SecondSucceeds,
    Equal,
}

fn succeeds(a: &[&NodeRecord], b: &[&NodeRecord]) -> bool {
    a.iter().any(|na| {
        let Some(start) = &na.start_vts else {
            return false;
        };
        b.iter()
            .any(|nb| nb.end_vts.as_ref().is_some_and(|end| start.dominates(end)))
    })
}

/// Compares two paths: `A ≻ B` when a node of `A` has a start timestamp
/// dominating the end timestamp of a node of `B`. Nodes without an end
/// timestamp never appear on the dominated side.
///
/// Both directions holding at once is impossible for fragments of one
/// memory state and is reported as a fault.
pub fn path_compare(a: &[&NodeRecord], b: &[&NodeRecord]) -> Result<PathOrder, Fault> {
    match (succeeds(a, b), succeeds(b, a)) {
        (true, true) => Err(Fault::OrderBothWays),
        (true, false) => Ok(PathOrder::FirstSucceeds),
        (false, true) => Ok(PathOrder::SecondSucceeds),
        (false, false) => Ok(PathOrder::Equal),
    }
}
