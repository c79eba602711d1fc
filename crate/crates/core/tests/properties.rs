use std::collections::{BTreeMap, HashSet};

use proptest::prelude::*;

use recoswap::algorithm::Model;
use recoswap::checker::history::{operations, EventKind, HistoryEvent};
use recoswap::checker::spec::SwapSpec;
use recoswap::checker::{check_linearizable_bruteforce, check_nrl, check_recoverable_well_formed, check_swap_fast, Verdict};
use recoswap::sim::{run, CrashPlan, Outcome, RunConfig, RunResult};
use recoswap::trace::{replay, TraceFile};
use recoswap::types::vts_dominates;
use recoswap::Value;

/// Unique operands 1..=k, one op per process, linearized in `order` and
/// stretched into overlapping intervals; `ret_edit` optionally corrupts
/// one return.
fn history(order: &[u64], slack: &[(u64, u64, bool)], ret_edit: Option<(usize, u64)>) -> Vec<HistoryEvent> {
    let mut timed = Vec::new();
    let mut prev = Value::Bottom;
    for (i, (&v, &(before, after, pending))) in order.iter().zip(slack).enumerate() {
        let lp = 10 * (i as u64 + 1);
        let pid = v as usize;
        timed.push((2 * lp.saturating_sub(before), HistoryEvent::inv(pid, 1, Value::Int(v), 0)));
        let mut ret = prev;
        if let Some((j, r)) = ret_edit {
            if j == i {
                ret = if r == 0 { Value::Bottom } else { Value::Int(r) };
            }
        }
        if !pending {
            timed.push((2 * (lp + after) + 1, HistoryEvent::res(pid, 1, Value::Int(v), ret, 0)));
        }
        prev = Value::Int(v);
    }
    timed.sort_by_key(|(t, _)| *t);
    timed
        .into_iter()
        .enumerate()
        .map(|(i, (_, mut e))| {
            e.step = i as u64;
            e
        })
        .collect()
}

fn histories() -> impl Strategy<Value = Vec<HistoryEvent>> {
    (1usize..=8)
        .prop_flat_map(|k| {
            (
                Just((1..=k as u64).collect::<Vec<_>>()).prop_shuffle(),
                proptest::collection::vec((0u64..40, 0u64..25, proptest::bool::weighted(0.15)), k),
                proptest::option::of((0..k, 0..=k as u64)),
            )
        })
        .prop_map(|(order, slack, edit)| history(&order, &slack, edit))
}

fn small_run() -> impl Strategy<Value = RunConfig> {
    (any::<bool>(), 2usize..=4, 1usize..=4, any::<u64>(), 0u32..=25, 0u64..12).prop_map(|(g, n, ops, seed, r, delay)| {
        let rate = r as f64 / 1000.0;
        let (model, plan) = if g {
            (Model::Global, format!("all:rate={rate};max=3"))
        } else {
            (Model::Independent, format!("any:rate={rate},delay={delay}"))
        };
        let plan: CrashPlan = plan.parse().unwrap();
        RunConfig::new(model, n, ops, seed).with_plan(plan)
    })
}

fn rets_unique(h: &[HistoryEvent]) -> bool {
    let mut seen = HashSet::new();
    h.iter().filter(|e| e.kind == EventKind::Res).filter_map(|e| e.ret).all(|r| seen.insert(r))
}

/// Completed ops whose RES precedes another's INV must have ordered
/// timestamps on their nodes.
fn real_time_order_in_vts(r: &RunResult) -> Result<(), String> {
    let s = r.final_snapshot().ok_or("no final snapshot")?;
    let node: BTreeMap<Value, _> =
        s.heap.ids().map(|id| s.heap.get(id)).filter(|n| n.owner != 0).map(|n| (n.val, n)).collect();
    let ops = operations(&r.history);
    for a in ops.iter().filter(|o| !o.is_pending()) {
        for b in ops.iter().filter(|b| b.inv > a.res.unwrap().0) {
            let (Some(na), Some(nb)) = (node.get(&a.val), node.get(&b.val)) else { continue };
            let (Some(end), Some(start)) = (&na.end_vts, &nb.start_vts) else { continue };
            if !vts_dominates(start, end) {
                return Err(format!("{:?} precedes {:?} but {start:?} does not dominate {end:?}", a.val, b.val));
            }
        }
    }
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(400))]

    #[test]
    fn fast_agrees_with_brute_force(h in histories()) {
        let fast = check_swap_fast(&h);
        let brute = check_linearizable_bruteforce(&h, &SwapSpec);
        prop_assert!(!matches!(brute, Verdict::Refused { .. }), "refused");
        prop_assert_eq!(fast.is_yes(), brute.is_yes(), "fast {} brute {}", fast, brute);
    }

    #[test]
    fn dropping_an_unobserved_pending_invocation_keeps_nrl(h in histories()) {
        if !check_nrl(&h).is_yes() {
            return Ok(());
        }
        let done: HashSet<_> = h.iter().filter(|e| e.kind == EventKind::Res).map(|e| e.op()).collect();
        let seen: HashSet<Value> = h.iter().filter_map(|e| e.ret).collect();
        let last_pending = h
            .iter()
            .rposition(|e| e.kind == EventKind::Inv && !done.contains(&e.op()) && !seen.contains(&e.val));
        let Some(i) = last_pending else { return Ok(()) };
        let mut cut = h.clone();
        cut.remove(i);
        prop_assert!(check_nrl(&cut).is_yes());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(150))]

    #[test]
    fn runs_are_well_formed_linearizable_and_deterministic(c in small_run()) {
        let r = run(&c).unwrap();
        prop_assert!(matches!(r.outcome, Outcome::Completed), "{:?}", r.outcome);
        prop_assert!(check_recoverable_well_formed(&r.history).is_ok());
        let v = check_nrl(&r.history);
        prop_assert!(v.is_yes(), "{}", v);
        prop_assert!(rets_unique(&r.history));
        prop_assert!(real_time_order_in_vts(&r).is_ok(), "{:?}", real_time_order_in_vts(&r));
        let again = run(&c).unwrap();
        prop_assert_eq!(&again.history, &r.history);
        prop_assert_eq!(&again.steps, &r.steps);
    }

    #[test]
    fn traces_round_trip_and_replay(c in small_run()) {
        let t = TraceFile::from_result(&run(&c).unwrap());
        let text = t.to_json_lines();
        let back = TraceFile::parse(&text).unwrap();
        prop_assert_eq!(back.to_json_lines(), text);
        prop_assert!(replay(&back, Some(c.model)).unwrap().identical());
    }

    #[test]
    fn crash_plans_print_and_parse_back(c in small_run()) {
        let text = c.crash_plan.to_string();
        let back: CrashPlan = text.parse().unwrap();
        prop_assert_eq!(back.to_string(), text);
    }
}

/// After a system-wide crash no new operation starts until every crashed
/// operation has responded.
#[test]
fn no_invocation_during_system_wide_recovery() {
    for seed in 0..300 {
        let c = RunConfig::new(Model::Global, 3, 3, seed).with_plan("all:rate=0.02;max=3".parse().unwrap());
        let r = run(&c).unwrap();
        assert_eq!(r.outcome, Outcome::Completed);
        let mut waiting: HashSet<(usize, u64)> = HashSet::new();
        for e in &r.history {
            match e.kind {
                EventKind::Crash => {
                    waiting.insert((e.pid, e.seq));
                }
                EventKind::Res => {
                    waiting.remove(&(e.pid, e.seq));
                }
                EventKind::Inv => assert!(waiting.is_empty(), "seed {seed}: {e} while {waiting:?} recover"),
                EventKind::Rec => {}
            }
        }
    }
}

/// Independent crashes with eventual re-admission either finish or report
/// a spinning process; they never hang silently.
#[test]
fn runs_finish_or_report_spinners() {
    for seed in 0..300 {
        let plan: CrashPlan = format!("any:rate=0.05,delay={}", 50 + seed % 200).parse().unwrap();
        let c = RunConfig::new(Model::Independent, 3, 3, seed).with_plan(plan).with_budget(600);
        let r = run(&c).unwrap();
        match &r.outcome {
            Outcome::Completed | Outcome::BudgetExhausted => {}
            Outcome::Blocked { spinning } => assert!(!spinning.is_empty(), "seed {seed}"),
            o => panic!("seed {seed}: {o:?}"),
        }
    }
}
