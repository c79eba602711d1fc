//! Recorded histories: INV / RES / CRASH / REC events and the operation
//! view derived from them.

use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::types::{OpId, Value};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum EventKind {
    Inv,
    Res,
    Crash,
    Rec,
}

/// One history step. `val` is the operand of the operation the event
/// belongs to; `ret` is present on RES only.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct HistoryEvent {
    pub kind: EventKind,
    pub pid: usize,
    pub seq: u64,
    pub val: Value,
    #[serde(
        default,
        skip_serializing_if = "Option::is_none",
        serialize_with = "ser_ret",
        deserialize_with = "de_ret"
    )]
    pub ret: Option<Value>,
    pub step: u64,
}

// `ret` is present-or-absent; when present, ⊥ is JSON null like any value.
fn ser_ret<S: Serializer>(ret: &Option<Value>, s: S) -> Result<S::Ok, S::Error> {
    match ret {
        Some(v) => v.serialize(s),
        None => s.serialize_none(),
    }
}

fn de_ret<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Value>, D::Error> {
    Ok(Some(Value::deserialize(d)?))
}

impl HistoryEvent {
    pub fn op(&self) -> OpId {
        OpId::new(self.pid, self.seq)
    }

    pub fn inv(pid: usize, seq: u64, val: Value, step: u64) -> Self {
        Self { kind: EventKind::Inv, pid, seq, val, ret: None, step }
    }

    pub fn res(pid: usize, seq: u64, val: Value, ret: Value, step: u64) -> Self {
        Self { kind: EventKind::Res, pid, seq, val, ret: Some(ret), step }
    }

    pub fn crash(pid: usize, seq: u64, val: Value, step: u64) -> Self {
        Self { kind: EventKind::Crash, pid, seq, val, ret: None, step }
    }

    pub fn rec(pid: usize, seq: u64, val: Value, step: u64) -> Self {
        Self { kind: EventKind::Rec, pid, seq, val, ret: None, step }
    }
}

impl fmt::Display for HistoryEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match self.kind {
            EventKind::Inv => "INV",
            EventKind::Res => "RES",
            EventKind::Crash => "CRASH",
            EventKind::Rec => "REC",
        };
        write!(f, "@{} {kind} p{} SWAP({})#{}", self.step, self.pid, self.val, self.seq)?;
        if let Some(r) = self.ret {
            write!(f, " -> {r}")?;
        }
        Ok(())
    }
}

pub type History = Vec<HistoryEvent>;

/// An operation of a crash-free history: its invocation position and, if
/// it completed, its response position and return value.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Operation {
    pub id: OpId,
    pub val: Value,
    pub inv: usize,
    pub res: Option<(usize, Value)>,
}

impl Operation {
    pub fn ret(&self) -> Option<Value> {
        self.res.map(|(_, v)| v)
    }

    pub fn is_pending(&self) -> bool {
        self.res.is_none()
    }

    /// Real-time order: `self` responded before `other` was invoked.
    pub fn precedes(&self, other: &Operation) -> bool {
        matches!(self.res, Some((r, _)) if r < other.inv)
    }
}

/// Operations of a history, in invocation order. CRASH and REC events are
/// skipped; a RES closes the most recent INV of its process.
pub fn operations(h: &[HistoryEvent]) -> Vec<Operation> {
    let mut ops: Vec<Operation> = Vec::new();
    for (i, e) in h.iter().enumerate() {
        match e.kind {
            EventKind::Inv => ops.push(Operation { id: e.op(), val: e.val, inv: i, res: None }),
            EventKind::Res => {
                if let Some(op) = ops.iter_mut().rev().find(|o| o.id == e.op() && o.res.is_none()) {
                    op.res = Some((i, e.ret.unwrap_or(Value::Bottom)));
                }
            }
            EventKind::Crash | EventKind::Rec => {}
        }
    }
    ops
}

/// `(pid, operand, inv position, (res position, return))`.
pub type Interval = (usize, Value, usize, Option<(usize, Value)>);

/// Builds a crash-free history from `(pid, operand, ret)` intervals given as
/// event positions; handy for tests and generators.
pub fn history_from_intervals(ops: &[Interval]) -> History {
    let mut evs: Vec<(usize, HistoryEvent)> = Vec::new();
    let mut seqs = std::collections::BTreeMap::new();
    for &(pid, val, inv, res) in ops {
        let seq = seqs.entry(pid).or_insert(0u64);
        *seq += 1;
        evs.push((inv, HistoryEvent::inv(pid, *seq, val, inv as u64)));
        if let Some((r, ret)) = res {
            evs.push((r, HistoryEvent::res(pid, *seq, val, ret, r as u64)));
        }
    }
    evs.sort_by_key(|(p, _)| *p);
    evs.into_iter().map(|(_, e)| e).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ret_round_trips_including_bottom() {
        let e = HistoryEvent::res(1, 1, Value::Int(4), Value::Bottom, 9);
        let s = serde_json::to_string(&e).unwrap();
        assert_eq!(s, r#"{"kind":"RES","pid":1,"seq":1,"val":4,"ret":null,"step":9}"#);
        let back: HistoryEvent = serde_json::from_str(&s).unwrap();
        assert_eq!(back, e);
        let i = HistoryEvent::inv(1, 1, Value::Int(4), 3);
        let s = serde_json::to_string(&i).unwrap();
        assert!(!s.contains("ret"));
        assert_eq!(serde_json::from_str::<HistoryEvent>(&s).unwrap(), i);
    }

    #[test]
    fn operations_pair_inv_with_res() {
        let h = vec![
            HistoryEvent::inv(1, 1, Value::Int(1), 1),
            HistoryEvent::inv(2, 1, Value::Int(2), 2),
            HistoryEvent::crash(2, 1, Value::Int(2), 3),
            HistoryEvent::res(1, 1, Value::Int(1), Value::Bottom, 4),
            HistoryEvent::rec(2, 1, Value::Int(2), 5),
            HistoryEvent::res(2, 1, Value::Int(2), Value::Int(1), 6),
        ];
        let ops = operations(&h);
        assert_eq!(ops.len(), 2);
        assert_eq!(ops[0].res, Some((3, Value::Bottom)));
        assert_eq!(ops[1].res, Some((5, Value::Int(1))));
        assert!(!ops[0].precedes(&ops[1]));
    }
}
