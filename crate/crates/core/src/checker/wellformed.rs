//! Recoverable well-formedness and crash/recovery stripping.

use std::collections::BTreeMap;

use crate::checker::history::{EventKind, HistoryEvent};
use crate::types::OpId;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum PState {
    Idle,
    Pending(OpId),
    Crashed(OpId),
    Recovering(OpId),
}

/// Every crash of a process is its last step or is followed by a matching
/// recovery, and with crashes and recoveries removed each process
/// alternates invocations and responses. The error names the first
/// offending event.
pub fn check_recoverable_well_formed(h: &[HistoryEvent]) -> Result<(), String> {
    let mut st: BTreeMap<usize, PState> = BTreeMap::new();
    let mut last_step = 0;
    for (i, e) in h.iter().enumerate() {
        if e.step < last_step {
            return Err(format!("event {i} ({e}) goes back in time"));
        }
        last_step = e.step;
        if e.pid == 0 {
            return Err(format!("event {i} ({e}) has no process"));
        }
        let s = st.entry(e.pid).or_insert(PState::Idle);
        let op = e.op();
        let next = match (e.kind, *s) {
            (EventKind::Inv, PState::Idle) => PState::Pending(op),
            (EventKind::Res, PState::Pending(o) | PState::Recovering(o)) if o == op && e.ret.is_some() => PState::Idle,
            (EventKind::Crash, PState::Pending(o) | PState::Recovering(o)) if o == op => PState::Crashed(op),
            (EventKind::Rec, PState::Crashed(o)) if o == op => PState::Recovering(op),
            (_, cur) => return Err(format!("event {i} ({e}) not allowed in state {cur:?}")),
        };
        *s = next;
    }
    Ok(())
}

/// The history with crash and recovery steps removed.
pub fn strip(h: &[HistoryEvent]) -> Vec<HistoryEvent> {
    h.iter().filter(|e| matches!(e.kind, EventKind::Inv | EventKind::Res)).cloned().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::Value;

    fn v(x: u64) -> Value {
        Value::Int(x)
    }

    #[test]
    fn crash_free_alternation_is_well_formed() {
        let h = vec![
            HistoryEvent::inv(1, 1, v(1), 1),
            HistoryEvent::res(1, 1, v(1), Value::Bottom, 2),
            HistoryEvent::inv(1, 2, v(2), 3),
            HistoryEvent::res(1, 2, v(2), v(1), 4),
        ];
        assert!(check_recoverable_well_formed(&h).is_ok());
        assert_eq!(strip(&h), h);
    }

    #[test]
    fn trailing_crash_is_exempt() {
        let h = vec![HistoryEvent::inv(1, 1, v(1), 1), HistoryEvent::crash(1, 1, v(1), 2)];
        assert!(check_recoverable_well_formed(&h).is_ok());
        assert_eq!(strip(&h).len(), 1);
    }

    #[test]
    fn invocation_after_crash_without_recovery_is_rejected() {
        let h = vec![
            HistoryEvent::inv(1, 1, v(1), 1),
            HistoryEvent::crash(1, 1, v(1), 2),
            HistoryEvent::inv(1, 2, v(2), 3),
        ];
        assert!(check_recoverable_well_formed(&h).is_err());
    }

    #[test]
    fn crash_during_recovery_then_recover_again() {
        let h = vec![
            HistoryEvent::inv(1, 1, v(1), 1),
            HistoryEvent::crash(1, 1, v(1), 2),
            HistoryEvent::rec(1, 1, v(1), 3),
            HistoryEvent::crash(1, 1, v(1), 4),
            HistoryEvent::rec(1, 1, v(1), 5),
            HistoryEvent::res(1, 1, v(1), Value::Bottom, 6),
        ];
        assert!(check_recoverable_well_formed(&h).is_ok());
        assert_eq!(strip(&h).len(), 2);
    }

    #[test]
    fn empty_history() {
        assert!(check_recoverable_well_formed(&[]).is_ok());
        assert!(strip(&[]).is_empty());
    }
}
