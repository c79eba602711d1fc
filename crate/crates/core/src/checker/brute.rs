//! Exhaustive linearizability search over completions and linear
//! extensions of the real-time order.
//!
//! A pending operation is either dropped or linearized with the response
//! the specification gives at that point. Failed `(placed set, state)`
//! pairs are memoized.

use std::collections::HashSet;

use crate::checker::history::{operations, HistoryEvent, Operation};
use crate::checker::spec::SequentialSpec;
use crate::checker::Verdict;
use crate::types::OpId;

pub const DEFAULT_BOUND: usize = 10;

struct Search<'a, S: SequentialSpec> {
    spec: &'a S,
    ops: &'a [Operation],
    /// `preds[i]`: bitmask of completed operations that precede op `i`.
    preds: Vec<u64>,
    required: u64,
    failed: HashSet<(u64, S::State)>,
    order: Vec<usize>,
}

impl<S: SequentialSpec> Search<'_, S> {
    fn dfs(&mut self, placed: u64, state: &S::State) -> bool {
        if placed & self.required == self.required {
            return true;
        }
        if self.failed.contains(&(placed, state.clone())) {
            return false;
        }
        for i in 0..self.ops.len() {
            let bit = 1u64 << i;
            if placed & bit != 0 || self.preds[i] & !placed != 0 {
                continue;
            }
            let op = &self.ops[i];
            let (next, ret) = self.spec.apply(state, op.val);
            if let Some(r) = op.ret() {
                if r != ret {
                    continue;
                }
            }
            self.order.push(i);
            if self.dfs(placed | bit, &next) {
                return true;
            }
            self.order.pop();
        }
        self.failed.insert((placed, state.clone()));
        false
    }
}

/// Linearizability of a crash-free history. Refuses above `bound` ops.
pub fn check_linearizable_bruteforce_with<S: SequentialSpec>(h: &[HistoryEvent], spec: &S, bound: usize) -> Verdict {
    let ops = operations(h);
    if ops.len() > bound.min(64) {
        return Verdict::Refused { reason: format!("{} operations exceed the brute-force bound {bound}", ops.len()) };
    }
    let preds = ops
        .iter()
        .map(|b| {
            ops.iter()
                .enumerate()
                .filter(|(_, a)| a.precedes(b))
                .fold(0u64, |m, (j, _)| m | (1 << j))
        })
        .collect();
    let required = ops
        .iter()
        .enumerate()
        .filter(|(_, o)| !o.is_pending())
        .fold(0u64, |m, (j, _)| m | (1 << j));
    let mut s = Search { spec, ops: &ops, preds, required, failed: HashSet::new(), order: Vec::new() };
    if s.dfs(0, &spec.initial()) {
        let witness: Vec<OpId> = s.order.iter().map(|&i| ops[i].id).collect();
        Verdict::Yes { witness: Some(witness) }
    } else {
        Verdict::No { reason: "no completion has a legal linearization".into() }
    }
}

pub fn check_linearizable_bruteforce<S: SequentialSpec>(h: &[HistoryEvent], spec: &S) -> Verdict {
    check_linearizable_bruteforce_with(h, spec, DEFAULT_BOUND)
}
