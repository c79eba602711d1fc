use std::fmt;

use serde::{Deserialize, Serialize};

use crate::algorithm::Model;
use crate::sim::plan::CrashPlan;
use crate::types::Value;

pub const DEFAULT_STEP_BUDGET: u64 = 1_000_000;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SchedulerPolicy {
    RoundRobin,
    SeededRandom,
    /// Actor ids in order (0 is the system actor), then round-robin.
    Scripted { script: Vec<usize> },
}

impl SchedulerPolicy {
    pub fn name(&self) -> &'static str {
        match self {
            SchedulerPolicy::RoundRobin => "round-robin",
            SchedulerPolicy::SeededRandom => "seeded-random",
            SchedulerPolicy::Scripted { .. } => "scripted",
        }
    }
}

impl fmt::Display for SchedulerPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

fn yes() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RunConfig {
    pub model: Model,
    pub n: usize,
    pub ops_per_process: usize,
    pub seed: u64,
    pub scheduler: SchedulerPolicy,
    pub crash_plan: CrashPlan,
    pub step_budget: u64,
    /// Explicit operands per process, overriding `ops_per_process` and the
    /// generated `(pid, seq)` operands.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workload: Option<Vec<Vec<u64>>>,
    /// Prev-chain timestamp-order assertion on every `prev`/`endVts` write.
    #[serde(default = "yes")]
    pub order_checks: bool,
    #[serde(default = "yes")]
    pub record_steps: bool,
    #[serde(default)]
    pub record_accesses: bool,
}

impl RunConfig {
    pub fn new(model: Model, n: usize, ops_per_process: usize, seed: u64) -> Self {
        Self {
            model,
            n,
            ops_per_process,
            seed,
            scheduler: SchedulerPolicy::SeededRandom,
            crash_plan: CrashPlan::none(),
            step_budget: DEFAULT_STEP_BUDGET,
            workload: None,
            order_checks: true,
            record_steps: true,
            record_accesses: false,
        }
    }

    pub fn with_scheduler(mut self, s: SchedulerPolicy) -> Self {
        self.scheduler = s;
        self
    }

    pub fn with_plan(mut self, p: CrashPlan) -> Self {
        self.crash_plan = p;
        self
    }

    pub fn with_budget(mut self, b: u64) -> Self {
        self.step_budget = b;
        self
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.n == 0 {
            return Err("n must be at least 1".into());
        }
        if self.step_budget == 0 {
            return Err("step budget must be positive".into());
        }
        if let Some(w) = &self.workload {
            if w.len() != self.n {
                return Err(format!("workload lists {} processes, n = {}", w.len(), self.n));
            }
        }
        if let SchedulerPolicy::Scripted { script } = &self.scheduler {
            if let Some(bad) = script.iter().find(|&&a| a > self.n) {
                return Err(format!("script names actor {bad} > n"));
            }
        }
        self.crash_plan.validate(self.model, self.n, self.step_budget)
    }

    /// Operands of each process, index 0 unused.
    pub fn operands(&self) -> Vec<Vec<Value>> {
        let mut out = vec![Vec::new()];
        for pid in 1..=self.n {
            out.push(match &self.workload {
                Some(w) => w[pid - 1].iter().map(|&x| Value::Int(x)).collect(),
                None => (1..=self.ops_per_process as u64).map(|s| Value::encode(pid, s)).collect(),
            });
        }
        out
    }
}
