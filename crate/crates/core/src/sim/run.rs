//! Driving a world to completion under a scheduler and a crash plan.

use std::sync::Arc;

use rand_core::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;
use serde::{Deserialize, Serialize};

use crate::algorithm::{algorithm_for, StepOutcome};
use crate::checker::history::HistoryEvent;
use crate::error::Fault;
use crate::memory::MemorySnapshot;
use crate::sim::config::RunConfig;
use crate::sim::plan::{Actor, CrashPlan, CrashScope, CrashWhen};
use crate::sim::scheduler::make_scheduler;
use crate::sim::world::{OpSteps, SnapshotRecord, StepRecord, World};

const CRASH_STREAM: u64 = 0x6a09_e667_f3bc_c909;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum Outcome {
    Completed,
    /// Budget exhausted while these processes spin without progress.
    Blocked { spinning: Vec<usize> },
    /// Budget exhausted while processes were still making progress.
    BudgetExhausted,
    /// A runtime invariant fired.
    Faulted { step: u64, actor: Actor, fault: String },
}

impl Outcome {
    pub fn name(&self) -> &'static str {
        match self {
            Outcome::Completed => "completed",
            Outcome::Blocked { .. } => "blocked",
            Outcome::BudgetExhausted => "budget-exhausted",
            Outcome::Faulted { .. } => "faulted",
        }
    }
}

#[derive(Clone, Debug)]
pub struct RunResult {
    pub config: RunConfig,
    pub history: Vec<HistoryEvent>,
    pub steps: Vec<StepRecord>,
    pub snapshots: Vec<SnapshotRecord>,
    pub outcome: Outcome,
    /// The typed fault, when the outcome is `Faulted`.
    pub fault: Option<Fault>,
    pub op_steps: Vec<OpSteps>,
    pub crashes: u32,
}

impl RunResult {
    pub fn final_snapshot(&self) -> Option<&MemorySnapshot> {
        self.snapshots.iter().rev().find(|s| s.reason == "final").map(|s| &s.memory)
    }

    pub fn pre_recovery_snapshots(&self) -> impl Iterator<Item = &SnapshotRecord> {
        self.snapshots.iter().filter(|s| s.reason == "pre-recovery")
    }
}

/// Fires crash triggers after each step.
#[derive(Clone, Debug)]
pub struct CrashInjector {
    plan: CrashPlan,
    hits: Vec<u32>,
    rng: Xoshiro256PlusPlus,
    fired: u32,
}

impl CrashInjector {
    pub fn new(plan: CrashPlan, seed: u64) -> Self {
        let hits = vec![0; plan.triggers.len()];
        Self { plan, hits, rng: Xoshiro256PlusPlus::seed_from_u64(seed ^ CRASH_STREAM), fired: 0 }
    }

    fn unit(&mut self) -> f64 {
        (self.rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    pub fn after_step(&mut self, world: &mut World, actor: Actor, out: &StepOutcome) {
        let label = out.label.to_string();
        for i in 0..self.plan.triggers.len() {
            if self.plan.max_crashes.is_some_and(|m| self.fired >= m) {
                return;
            }
            let t = &self.plan.triggers[i];
            let (scope, delay) = (t.scope, t.delay);
            let fire = match &t.when {
                CrashWhen::AtStep { step } => world.now() == *step,
                CrashWhen::AtLabel { actor: a, label: l, occurrence } => {
                    if *a == actor && (*l == label || l == out.label.name) {
                        self.hits[i] += 1;
                        self.hits[i] == *occurrence
                    } else {
                        false
                    }
                }
                CrashWhen::Random { rate } => {
                    let rate = *rate;
                    let eligible = match scope {
                        CrashScope::All => world.any_pending(),
                        CrashScope::Any => matches!(actor, Actor::Process(p) if world.is_running(p)),
                        CrashScope::Pid(p) => world.is_running(p),
                    };
                    eligible && self.unit() < rate
                }
            };
            if !fire {
                continue;
            }
            let hit = match scope {
                CrashScope::All => {
                    world.crash_all();
                    true
                }
                CrashScope::Any => match actor {
                    Actor::Process(p) => world.crash_process(p, delay),
                    Actor::System => false,
                },
                CrashScope::Pid(p) => world.crash_process(p, delay),
            };
            if hit {
                self.fired += 1;
            }
        }
    }
}

pub fn build_world(config: &RunConfig) -> World {
    let alg = Arc::from(algorithm_for(config.model));
    let mut w = World::new(alg, config.operands());
    w.set_recording(config.record_steps, config.record_accesses);
    w.set_order_checks(config.order_checks);
    w
}

/// Executes `config` deterministically.
pub fn run(config: &RunConfig) -> Result<RunResult, String> {
    config.validate()?;
    let mut world = build_world(config);
    let mut sched = make_scheduler(&config.scheduler, config.seed);
    let mut crashes = CrashInjector::new(config.crash_plan.clone(), config.seed);
    let n = config.n as u64;
    let mut fault = None;
    let outcome = loop {
        if world.is_done() {
            break Outcome::Completed;
        }
        if world.now() >= config.step_budget {
            let spinning = world.spinning();
            let window = 10 * n * (spinning.len() as u64).max(1);
            let idle_for = world.now() - world.last_progress();
            break if !spinning.is_empty() && idle_for >= window {
                Outcome::Blocked { spinning }
            } else {
                Outcome::BudgetExhausted
            };
        }
        let enabled = world.enabled();
        if enabled.is_empty() {
            match world.next_readmission() {
                Some(t) => {
                    world.advance_to(t.min(config.step_budget));
                    continue;
                }
                None => break Outcome::Blocked { spinning: Vec::new() },
            }
        }
        let actor = match sched.pick(&enabled) {
            Ok(a) => a,
            Err(f) => {
                let o = Outcome::Faulted { step: world.now() + 1, actor: Actor::System, fault: f.to_string() };
                fault = Some(f);
                break o;
            }
        };
        match world.step(actor) {
            Ok(out) => crashes.after_step(&mut world, actor, &out),
            Err(f) => {
                let o = Outcome::Faulted { step: world.now(), actor, fault: f.to_string() };
                fault = Some(f);
                break o;
            }
        }
    };
    world.push_final_snapshot();
    let crashes = world.crashes();
    let (history, steps, snapshots, op_steps, _) = world.into_parts();
    Ok(RunResult { config: config.clone(), history, steps, snapshots, outcome, fault, op_steps, crashes })
}
