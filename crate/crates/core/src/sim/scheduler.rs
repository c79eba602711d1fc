//! Scheduling policies, selected by name.
//!
//! The seeded policy uses xoshiro256++ seeded through SplitMix64
//! (`seed_from_u64`), so a seed yields the same schedule on every platform.

use rand_core::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

use crate::error::Fault;
use crate::sim::config::SchedulerPolicy;
use crate::sim::plan::Actor;

/// Picks the next actor among the enabled ones (never empty, sorted).
pub trait Scheduler: Send + std::fmt::Debug {
    fn pick(&mut self, enabled: &[Actor]) -> Result<Actor, Fault>;
    fn clone_box(&self) -> Box<dyn Scheduler>;
}

impl Clone for Box<dyn Scheduler> {
    fn clone(&self) -> Self {
        self.clone_box()
    }
}

#[derive(Clone, Debug, Default)]
pub struct RoundRobin {
    last: Option<Actor>,
}

impl Scheduler for RoundRobin {
    fn pick(&mut self, enabled: &[Actor]) -> Result<Actor, Fault> {
        let next = match self.last {
            Some(l) => enabled.iter().copied().find(|&a| a > l).unwrap_or(enabled[0]),
            None => enabled[0],
        };
        self.last = Some(next);
        Ok(next)
    }

    fn clone_box(&self) -> Box<dyn Scheduler> {
        Box::new(self.clone())
    }
}

#[derive(Clone, Debug)]
pub struct SeededRandom {
    rng: Xoshiro256PlusPlus,
}

impl SeededRandom {
    pub fn new(seed: u64) -> Self {
        Self { rng: Xoshiro256PlusPlus::seed_from_u64(seed) }
    }
}

impl Scheduler for SeededRandom {
    fn pick(&mut self, enabled: &[Actor]) -> Result<Actor, Fault> {
        let i = (self.rng.next_u64() % enabled.len() as u64) as usize;
        Ok(enabled[i])
    }

    fn clone_box(&self) -> Box<dyn Scheduler> {
        Box::new(self.clone())
    }
}

/// Follows a fixed list of actor ids, then continues round-robin.
#[derive(Clone, Debug)]
pub struct Scripted {
    script: Vec<usize>,
    pos: usize,
    fallback: RoundRobin,
}

impl Scripted {
    pub fn new(script: Vec<usize>) -> Self {
        Self { script, pos: 0, fallback: RoundRobin::default() }
    }
}

impl Scheduler for Scripted {
    fn pick(&mut self, enabled: &[Actor]) -> Result<Actor, Fault> {
        let Some(&id) = self.script.get(self.pos) else {
            return self.fallback.pick(enabled);
        };
        self.pos += 1;
        let a = if id == 0 { Actor::System } else { Actor::Process(id) };
        if !enabled.contains(&a) {
            return Err(Fault::ScriptViolation { pid: id });
        }
        self.fallback.last = Some(a);
        Ok(a)
    }

    fn clone_box(&self) -> Box<dyn Scheduler> {
        Box::new(self.clone())
    }
}

pub fn scheduler_names() -> Vec<&'static str> {
    vec!["round-robin", "scripted", "seeded-random"]
}

pub fn make_scheduler(policy: &SchedulerPolicy, seed: u64) -> Box<dyn Scheduler> {
    match policy {
        SchedulerPolicy::RoundRobin => Box::new(RoundRobin::default()),
        SchedulerPolicy::SeededRandom => Box::new(SeededRandom::new(seed)),
        SchedulerPolicy::Scripted { script } => Box::new(Scripted::new(script.clone())),
    }
}

/// Resolves a policy by its registered name (scripted needs a script).
pub fn policy_by_name(name: &str) -> Option<SchedulerPolicy> {
    match name {
        "round-robin" | "rr" => Some(SchedulerPolicy::RoundRobin),
        "seeded-random" | "random" => Some(SchedulerPolicy::SeededRandom),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ps(ids: &[usize]) -> Vec<Actor> {
        ids.iter().map(|&p| Actor::Process(p)).collect()
    }

    #[test]
    fn round_robin_cycles_over_enabled() {
        let mut rr = RoundRobin::default();
        let en = ps(&[1, 2, 3]);
        let picks: Vec<_> = (0..5).map(|_| rr.pick(&en).unwrap()).collect();
        assert_eq!(picks, ps(&[1, 2, 3, 1, 2]));
        assert_eq!(rr.pick(&ps(&[1, 3])).unwrap(), Actor::Process(3));
    }

    #[test]
    fn seeded_random_is_reproducible() {
        let en = ps(&[1, 2, 3, 4]);
        let mut a = SeededRandom::new(7);
        let mut b = SeededRandom::new(7);
        let xa: Vec<_> = (0..50).map(|_| a.pick(&en).unwrap()).collect();
        let xb: Vec<_> = (0..50).map(|_| b.pick(&en).unwrap()).collect();
        assert_eq!(xa, xb);
        let mut c = SeededRandom::new(8);
        let xc: Vec<_> = (0..50).map(|_| c.pick(&en).unwrap()).collect();
        assert_ne!(xa, xc);
    }

    #[test]
    fn script_then_round_robin() {
        let mut s = Scripted::new(vec![2, 2, 1]);
        let en = ps(&[1, 2]);
        let picks: Vec<_> = (0..5).map(|_| s.pick(&en).unwrap()).collect();
        assert_eq!(picks, ps(&[2, 2, 1, 2, 1]));
        let mut s = Scripted::new(vec![3]);
        assert_eq!(s.pick(&en), Err(Fault::ScriptViolation { pid: 3 }));
    }
}
