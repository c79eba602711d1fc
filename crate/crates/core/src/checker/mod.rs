//! Correctness checkers over recorded histories, selected by name.

pub mod brute;
pub mod distinguish;
pub mod fast;
pub mod history;
pub mod spec;
pub mod wellformed;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::checker::history::{EventKind, HistoryEvent};
use crate::checker::spec::SwapSpec;
use crate::types::{OpId, Value};

pub use brute::{check_linearizable_bruteforce, check_linearizable_bruteforce_with, DEFAULT_BOUND};
pub use distinguish::check_distinguishable_swap;
pub use fast::check_swap_fast;
pub use wellformed::{check_recoverable_well_formed, strip};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "kebab-case")]
pub enum Verdict {
    Yes {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        witness: Option<Vec<OpId>>,
    },
    No { reason: String },
    /// The checker's precondition does not hold.
    Refused { reason: String },
}

impl Verdict {
    pub fn is_yes(&self) -> bool {
        matches!(self, Verdict::Yes { .. })
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Verdict::Yes { witness: Some(w) } => {
                let ids: Vec<String> = w.iter().map(ToString::to_string).collect();
                write!(f, "YES [{}]", ids.join(" "))
            }
            Verdict::Yes { witness: None } => f.write_str("YES"),
            Verdict::No { reason } => write!(f, "NO: {reason}"),
            Verdict::Refused { reason } => write!(f, "REFUSED: {reason}"),
        }
    }
}

/// Whether all operands in the history are distinct and none is ⊥.
pub fn operands_unique(h: &[HistoryEvent]) -> bool {
    let mut seen = std::collections::HashSet::new();
    h.iter()
        .filter(|e| e.kind == EventKind::Inv)
        .all(|e| e.val != Value::Bottom && seen.insert(e.val))
}

/// Recoverable well-formedness, then linearizability of the stripped
/// history (fast path for distinct operands, exhaustive search otherwise).
pub fn check_nrl(h: &[HistoryEvent]) -> Verdict {
    if let Err(e) = check_recoverable_well_formed(h) {
        return Verdict::No { reason: format!("not recoverable well-formed: {e}") };
    }
    let n = strip(h);
    if operands_unique(&n) {
        check_swap_fast(&n)
    } else {
        check_linearizable_bruteforce(&n, &SwapSpec)
    }
}

pub trait Checker: Send + Sync {
    fn name(&self) -> &'static str;
    fn check(&self, h: &[HistoryEvent]) -> Verdict;
}

struct Fast;
struct Brute;
struct Nrl;

fn stripped_if_well_formed(h: &[HistoryEvent]) -> Result<Vec<HistoryEvent>, Verdict> {
    check_recoverable_well_formed(h)
        .map(|_| strip(h))
        .map_err(|e| Verdict::No { reason: format!("not recoverable well-formed: {e}") })
}

impl Checker for Fast {
    fn name(&self) -> &'static str {
        "fast"
    }

    fn check(&self, h: &[HistoryEvent]) -> Verdict {
        stripped_if_well_formed(h).map_or_else(|v| v, |n| check_swap_fast(&n))
    }
}

impl Checker for Brute {
    fn name(&self) -> &'static str {
        "brute"
    }

    fn check(&self, h: &[HistoryEvent]) -> Verdict {
        stripped_if_well_formed(h).map_or_else(|v| v, |n| check_linearizable_bruteforce(&n, &SwapSpec))
    }
}

impl Checker for Nrl {
    fn name(&self) -> &'static str {
        "nrl"
    }

    fn check(&self, h: &[HistoryEvent]) -> Verdict {
        check_nrl(h)
    }
}

type CheckerCtor = fn() -> Box<dyn Checker>;

fn registry() -> BTreeMap<&'static str, CheckerCtor> {
    let mut m: BTreeMap<&'static str, CheckerCtor> = BTreeMap::new();
    m.insert("fast", || Box::new(Fast));
    m.insert("brute", || Box::new(Brute));
    m.insert("nrl", || Box::new(Nrl));
    m
}

pub fn checker_names() -> Vec<&'static str> {
    registry().keys().copied().collect()
}

pub fn lookup_checker(name: &str) -> Option<Box<dyn Checker>> {
    registry().get(name).map(|c| c())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registry_resolves_every_name() {
        for name in checker_names() {
            assert_eq!(lookup_checker(name).unwrap().name(), name);
        }
        assert!(lookup_checker("nope").is_none());
    }

    #[test]
    fn nrl_rejects_malformed_crash_pattern() {
        let h = vec![
            HistoryEvent::inv(1, 1, Value::Int(1), 1),
            HistoryEvent::crash(1, 1, Value::Int(1), 2),
            HistoryEvent::inv(1, 2, Value::Int(2), 3),
        ];
        assert!(matches!(check_nrl(&h), Verdict::No { .. }));
    }
}
