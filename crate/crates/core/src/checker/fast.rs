//! Linearizability of swap histories whose operands are all distinct.
//!
//! Each completed operation returning `x` must come right after the
//! operation that swapped `x` in, and one returning ⊥ must come first.
//! These forced adjacencies cut the operations into chains headed by a
//! pending operation or by the ⊥-returner. The history is linearizable
//! iff the returns are consistent, every chain respects real time
//! internally, and the chains can be ordered consistently with real time
//! (the ⊥ chain first). Pending operations heading no chain are dropped.

use std::collections::{BTreeMap, BTreeSet};

use crate::checker::history::{operations, HistoryEvent};
use crate::checker::Verdict;
use crate::types::Value;

pub fn check_swap_fast(h: &[HistoryEvent]) -> Verdict {
    let ops = operations(h);
    let mut by_val: BTreeMap<u64, usize> = BTreeMap::new();
    for (i, o) in ops.iter().enumerate() {
        match o.val {
            Value::Bottom => return Verdict::Refused { reason: format!("{} swaps in ⊥", o.id) },
            Value::Int(x) => {
                if by_val.insert(x, i).is_some() {
                    return Verdict::Refused { reason: format!("operand {x} is used twice") };
                }
            }
        }
    }
    // next[i]: the completed operation that returned i's operand.
    let mut next: Vec<Option<usize>> = vec![None; ops.len()];
    let mut has_pred = vec![false; ops.len()];
    let mut first: Option<usize> = None;
    for (c, o) in ops.iter().enumerate() {
        match o.ret() {
            None => {}
            Some(Value::Bottom) => {
                if let Some(f) = first {
                    return Verdict::No { reason: format!("{} and {} both return ⊥", ops[f].id, o.id) };
                }
                first = Some(c);
            }
            Some(Value::Int(x)) => {
                let Some(&p) = by_val.get(&x) else {
                    return Verdict::No { reason: format!("{} returns {x}, which nobody swapped in", o.id) };
                };
                if p == c {
                    return Verdict::No { reason: format!("{} returns its own operand", o.id) };
                }
                if let Some(other) = next[p] {
                    return Verdict::No {
                        reason: format!("{} and {} both return {x}", ops[other].id, o.id),
                    };
                }
                next[p] = Some(c);
                has_pred[c] = true;
            }
        }
    }

    // Walk chains from their heads; whatever is not reached lies on a cycle.
    let mut block = vec![usize::MAX; ops.len()];
    let mut pos = vec![0usize; ops.len()];
    let mut chains: Vec<Vec<usize>> = Vec::new();
    for head in 0..ops.len() {
        if has_pred[head] {
            continue;
        }
        let lone_pending = ops[head].is_pending() && next[head].is_none();
        if lone_pending {
            continue;
        }
        if ops[head].ret().is_some_and(|r| r != Value::Bottom) {
            unreachable!("completed ops returning a value always have a predecessor");
        }
        let b = chains.len();
        let mut chain = Vec::new();
        let mut cur = Some(head);
        while let Some(i) = cur {
            block[i] = b;
            pos[i] = chain.len();
            chain.push(i);
            cur = next[i];
        }
        chains.push(chain);
    }
    if let Some(i) = (0..ops.len()).find(|&i| has_pred[i] && block[i] == usize::MAX) {
        return Verdict::No { reason: format!("returns form a cycle through {}", ops[i].id) };
    }

    let first_block = first.map(|f| block[f]);
    let mut succ: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); chains.len()];
    if let Some(fb) = first_block {
        for b in 0..chains.len() {
            if b != fb {
                succ[fb].insert(b);
            }
        }
    }
    let mut sorted: Vec<usize> = (0..ops.len()).filter(|&i| block[i] != usize::MAX).collect();
    sorted.sort_by_key(|&i| ops[i].res.map_or(usize::MAX, |(r, _)| r));
    for &b in &sorted {
        for &a in &sorted {
            if !ops[a].precedes(&ops[b]) {
                if ops[a].res.is_none_or(|(r, _)| r > ops[b].inv) {
                    break;
                }
                continue;
            }
            if block[a] == block[b] {
                if pos[a] > pos[b] {
                    return Verdict::No {
                        reason: format!(
                            "{} must follow {} but responded before it was invoked",
                            ops[a].id, ops[b].id
                        ),
                    };
                }
            } else {
                succ[block[a]].insert(block[b]);
            }
        }
    }

    // Kahn over the chain graph.
    let mut indeg = vec![0usize; chains.len()];
    for s in &succ {
        for &t in s {
            indeg[t] += 1;
        }
    }
    let mut ready: BTreeSet<usize> = (0..chains.len()).filter(|&b| indeg[b] == 0).collect();
    let mut witness = Vec::new();
    while let Some(b) = ready.pop_first() {
        witness.extend(chains[b].iter().map(|&i| ops[i].id));
        for &t in &succ[b] {
            indeg[t] -= 1;
            if indeg[t] == 0 {
                ready.insert(t);
            }
        }
    }
    if witness.len() < chains.iter().map(Vec::len).sum::<usize>() {
        return Verdict::No { reason: "return chains cannot be ordered consistently with real time".into() };
    }
    Verdict::Yes { witness: Some(witness) }
}
