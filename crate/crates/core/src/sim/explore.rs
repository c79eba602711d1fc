//! Exhaustive small-scope exploration: depth-first over every schedule
//! and every crash point, with states merged by fingerprint.

use std::collections::HashSet;
use std::sync::Arc;

use crate::algorithm::{algorithm_for, Model};
use crate::checker::history::HistoryEvent;
use crate::sim::plan::Actor;
use crate::sim::world::World;
use crate::types::Value;

#[derive(Clone, Debug)]
pub struct ExploreConfig {
    pub model: Model,
    pub n: usize,
    pub ops_per_process: usize,
    /// Crashes allowed along any one path.
    pub max_crashes: u32,
    /// Stop after this many distinct states.
    pub max_states: usize,
}

impl ExploreConfig {
    pub fn new(model: Model, n: usize, ops_per_process: usize) -> Self {
        Self { model, n, ops_per_process, max_crashes: 2, max_states: 5_000_000 }
    }
}

#[derive(Clone, Debug, Default)]
pub struct ExploreReport {
    pub states: usize,
    pub transitions: usize,
    pub terminals: usize,
    /// States where every enabled step leaves the state unchanged.
    pub deadlocks: usize,
    pub truncated: bool,
    /// Runtime faults and terminal-check failures, with the history so far.
    pub failures: Vec<(String, Vec<HistoryEvent>)>,
}

#[derive(Clone, Copy, Debug)]
enum Action {
    Step(Actor),
    Crash(usize),
    CrashAll,
}

fn actions(w: &World, max_crashes: u32) -> Vec<Action> {
    let mut out: Vec<Action> = w.enabled().into_iter().map(Action::Step).collect();
    if w.crashes() < max_crashes {
        match w.model() {
            Model::Independent => {
                out.extend((1..=w.n()).filter(|&p| w.is_running(p)).map(Action::Crash));
            }
            Model::Global => {
                if w.any_pending() {
                    out.push(Action::CrashAll);
                }
            }
        }
    }
    out
}

/// Visits every reachable state; `check` judges each terminal history.
pub fn explore(
    cfg: &ExploreConfig,
    mut check: impl FnMut(&[HistoryEvent]) -> Result<(), String>,
) -> ExploreReport {
    let operands: Vec<Vec<Value>> = (0..=cfg.n)
        .map(|p| if p == 0 { Vec::new() } else { (1..=cfg.ops_per_process as u64).map(|s| Value::encode(p, s)).collect() })
        .collect();
    let root = World::new(Arc::from(algorithm_for(cfg.model)), operands);
    let mut report = ExploreReport::default();
    let mut seen: HashSet<u128> = HashSet::new();
    seen.insert(root.fingerprint());
    let mut stack = vec![root];
    while let Some(w) = stack.pop() {
        report.states += 1;
        if w.is_done() {
            report.terminals += 1;
            if let Err(e) = check(w.history()) {
                report.failures.push((e, w.history().to_vec()));
            }
            continue;
        }
        let here = w.fingerprint();
        let mut moved = false;
        for a in actions(&w, cfg.max_crashes) {
            let mut next = w.clone();
            let r = match a {
                Action::Step(actor) => next.step(actor).map(|_| ()),
                Action::Crash(p) => {
                    next.crash_process(p, 0);
                    Ok(())
                }
                Action::CrashAll => {
                    next.crash_all();
                    Ok(())
                }
            };
            report.transitions += 1;
            if let Err(f) = r {
                report.failures.push((f.to_string(), next.history().to_vec()));
                continue;
            }
            let fp = next.fingerprint();
            if matches!(a, Action::Step(_)) && fp != here {
                moved = true;
            }
            if seen.insert(fp) {
                if seen.len() > cfg.max_states {
                    report.truncated = true;
                    return report;
                }
                stack.push(next);
            }
        }
        if !moved {
            report.deadlocks += 1;
        }
    }
    report
}
