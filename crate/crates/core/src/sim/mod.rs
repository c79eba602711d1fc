//! Deterministic simulation: scheduler, crash injection, recovery
//! orchestration and exhaustive exploration.

pub mod config;
pub mod explore;
pub mod fixtures;
pub mod plan;
pub mod run;
pub mod scheduler;
pub mod world;

pub use crate::checker::history::{EventKind, HistoryEvent};
pub use config::{RunConfig, SchedulerPolicy, DEFAULT_STEP_BUDGET};
pub use plan::{Actor, CrashPlan, CrashScope, CrashTrigger, CrashWhen};
pub use run::{run, Outcome, RunResult};
pub use world::{Phase, StepRecord, World};
