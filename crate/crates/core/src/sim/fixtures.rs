//! Built-in scripted scenarios, addressed as `fixture:<name>` crash plans.

use crate::algorithm::Model;
use crate::sim::config::{RunConfig, SchedulerPolicy};
use crate::sim::plan::CrashPlan;

pub fn fixture_names() -> Vec<&'static str> {
    vec!["blocking", "figure1"]
}

fn repeat(script: &mut Vec<usize>, pid: usize, k: usize) {
    script.extend(std::iter::repeat_n(pid, k));
}

/// Six processes and eight swaps, operand `k` for `op_k`. Ops 1, 4 and 5
/// stop right after their primitive swap, op 7 right after announcing,
/// and a system-wide crash hits at step 135. The persistent list then
/// holds the fragments (tail, op6, op5), (op3, op4), (op2, op1), (op0,
/// head) and the lone node of op7.
pub fn figure1() -> RunConfig {
    let full = 21;
    let through_swap = 13;
    let mut script = Vec::new();
    for (pid, k) in [
        (1, full),
        (2, through_swap),
        (3, full),
        (1, 12),
        (5, through_swap),
        (4, full),
        (6, through_swap),
        (3, full),
    ] {
        repeat(&mut script, pid, k);
    }
    let mut c = RunConfig::new(Model::Global, 6, 1, 0)
        .with_scheduler(SchedulerPolicy::Scripted { script })
        .with_plan("all:step=135".parse().expect("fixture plan parses"));
    c.workload = Some(vec![vec![0, 7], vec![1], vec![2, 6], vec![3], vec![4], vec![5]]);
    c
}

/// Independent model, two processes. p1 crashes right after announcing
/// (inWork = 1) and is not re-admitted before the budget runs out; p2
/// crashes after its primitive swap, recovers at once and spins on p1's
/// node.
pub fn blocking() -> RunConfig {
    let mut script = Vec::new();
    repeat(&mut script, 1, 9);
    repeat(&mut script, 2, 10);
    RunConfig::new(Model::Independent, 2, 1, 0)
        .with_scheduler(SchedulerPolicy::Scripted { script })
        .with_plan(
            "p1:label=p1/ANNOUNCE#1,delay=395;p2:label=p2/PRIM_SWAP#1"
                .parse::<CrashPlan>()
                .expect("fixture plan parses"),
        )
        .with_budget(400)
}

pub fn fixture(name: &str) -> Option<RunConfig> {
    match name {
        "figure1" => Some(figure1()),
        "blocking" => Some(blocking()),
        _ => None,
    }
}
