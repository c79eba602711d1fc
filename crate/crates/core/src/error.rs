use thiserror::Error;

use crate::types::NodeId;

/// A hard fault: an invariant that must hold in every schedule was violated,
/// or an algorithm read state it had lost. Faults abort the run that raised
/// them and are never silently recovered from.
#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum Fault {
    #[error("process {pid} read volatile slot `{slot}` after a crash")]
    PoisonRead { pid: usize, slot: &'static str },
    #[error("{node}.prev rewritten from {old} to {new}")]
    PrevRewrite { node: NodeId, old: NodeId, new: NodeId },
    #[error("{node}.prevExecution rewritten")]
    PrevExecutionRewrite { node: NodeId },
    #[error("{node}.inWork transition {from} -> {to} is not allowed")]
    InWorkTransition { node: NodeId, from: u8, to: u8 },
    #[error("{node} would be referenced twice by tail/prev pointers")]
    InDegree { node: NodeId },
    #[error("{y} is on the prev-chain of {x} but {y}.startVts dominates {x}.endVts")]
    TimestampOrder { x: NodeId, y: NodeId },
    #[error("VTS[{pid}] moved from {old} to {new}; entries only grow by one")]
    VtsStep { pid: usize, old: u64, new: u64 },
    #[error("fragment order holds in both directions")]
    OrderBothWays,
    #[error("fragment order is cyclic over {remaining} fragments")]
    OrderCycle { remaining: usize },
    #[error("prev graph contains a cycle through {node}")]
    GraphCycle { node: NodeId },
    #[error("prev graph vertex {node} has more than one incoming edge")]
    GraphInDegree { node: NodeId },
    #[error("recovery found no head fragment")]
    MissingHeadPath,
    #[error("recovering node {node} is not on any maximal path")]
    MissingOwnPath { node: NodeId },
    #[error("node {missing} swapped before {node} but is absent from the first gather")]
    IncompleteFirstGather { node: NodeId, missing: NodeId },
    #[error("after global recovery the prev-list from tail is not a permutation of announced nodes: {detail}")]
    ListNotMended { detail: String },
    #[error("process {pid} found a null prev after global recovery")]
    NullPrevAfterRecovery { pid: usize },
    #[error("process {pid} released a lock it does not hold")]
    UnlockByNonHolder { pid: usize },
    #[error("cell {cell} holds a {found}, not a {expected}")]
    TypeMismatch {
        cell: String,
        expected: &'static str,
        found: &'static str,
    },
    #[error("scripted schedule picked p{pid}, which cannot step")]
    ScriptViolation { pid: usize },
}
