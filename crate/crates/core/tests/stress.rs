use recoswap::algorithm::Model;
use recoswap::checker::history::EventKind;
use recoswap::checker::{check_linearizable_bruteforce, check_nrl, check_swap_fast, strip};
use recoswap::checker::spec::SwapSpec;
use recoswap::sim::{run, CrashPlan, Outcome, RunConfig, SchedulerPolicy};

fn mix(seed: u64, k: u64) -> u64 {
    let mut z = seed.wrapping_mul(0x9e37_79b9_7f4a_7c15).wrapping_add(k.wrapping_mul(0xbf58_476d_1ce4_e5b9));
    z ^= z >> 31;
    z = z.wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 29)
}

fn global_plan(seed: u64, n: usize, ops: usize) -> CrashPlan {
    let span = (ops * n * (8 + 2 * n)) as u64;
    let k = 1 + mix(seed, 1) % 3;
    let mut items: Vec<String> = (0..k).map(|i| format!("all:step={}", 1 + mix(seed, 10 + i) % span)).collect();
    if mix(seed, 2).is_multiple_of(5) {
        items.push("all:label=sys/GR_GATHER#1".into());
    }
    items.join(";").parse().unwrap()
}

#[test]
fn crash_free_runs_are_linearizable_and_take_fixed_steps() {
    for model in [Model::Global, Model::Independent] {
        for n in [2, 4] {
            for seed in 0..40 {
                let r = run(&RunConfig::new(model, n, 5, seed)).unwrap();
                assert_eq!(r.outcome, Outcome::Completed);
                assert!(check_swap_fast(&r.history).is_yes());
                let want = match model {
                    Model::Global => 8 + 2 * n as u64,
                    Model::Independent => 10 + 2 * n as u64,
                };
                assert_eq!(r.op_steps.len(), n * 5);
                assert!(r.op_steps.iter().all(|o| o.steps == want));
            }
        }
    }
}

#[test]
fn system_wide_crashes_mend_the_list() {
    for seed in 0..200 {
        let n = 2 + (seed % 3) as usize;
        let ops = 3;
        let c = RunConfig::new(Model::Global, n, ops, seed).with_plan(global_plan(seed, n, ops));
        let r = run(&c).unwrap();
        assert_eq!(r.outcome, Outcome::Completed, "seed {seed}: {:?}", r.outcome);
        assert!(r.crashes >= 1);
        let s = r.final_snapshot().unwrap();
        let mut list = s.list_from_tail();
        assert_eq!(*list.last().unwrap(), s.head(), "seed {seed}");
        list.sort();
        assert_eq!(list, s.announced(), "seed {seed}");
        assert!(check_nrl(&r.history).is_yes(), "seed {seed}: {}", check_nrl(&r.history));
    }
}

#[test]
fn small_global_runs_agree_with_brute_force() {
    for seed in 0..60 {
        let c = RunConfig::new(Model::Global, 3, 2, seed).with_plan(global_plan(seed, 3, 2));
        let r = run(&c).unwrap();
        let fast = check_nrl(&r.history).is_yes();
        let brute = check_linearizable_bruteforce(&strip(&r.history), &SwapSpec).is_yes();
        assert_eq!(fast, brute, "seed {seed}");
        assert!(fast);
    }
}

#[test]
fn independent_crashes_stay_linearizable() {
    for seed in 0..200 {
        let n = 2 + (seed % 3) as usize;
        let rate = 0.02 * (1 + seed % 4) as f64 / 4.0;
        let plan: CrashPlan = format!("any:rate={rate},delay={}", seed % 7).parse().unwrap();
        let c = RunConfig::new(Model::Independent, n, 4, seed).with_plan(plan);
        let r = run(&c).unwrap();
        assert_eq!(r.outcome, Outcome::Completed, "seed {seed}: {:?}", r.outcome);
        assert!(check_nrl(&r.history).is_yes(), "seed {seed}: {}", check_nrl(&r.history));
    }
}

#[test]
fn round_robin_no_crash_example() {
    let c = RunConfig::new(Model::Global, 2, 2, 0).with_scheduler(SchedulerPolicy::RoundRobin);
    let r = run(&c).unwrap();
    assert_eq!(r.history.len(), 8);
    assert!(r.history.iter().all(|e| matches!(e.kind, EventKind::Inv | EventKind::Res)));
    assert!(check_swap_fast(&r.history).is_yes());
}
