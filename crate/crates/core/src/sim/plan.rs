//! Crash plans: when to crash whom, and when crashed processes are
//! re-admitted.
//!
//! Text syntax, triggers separated by `;`:
//!
//! ```text
//! <scope>:<when>[,delay=N]
//! scope := all | any | p<N>
//! when  := step=K | rate=R | label=<actor>/<LABEL>[#occurrence]
//! actor := p<N> | sys
//! ```
//!
//! `all` crashes every process at once (system-wide model). `any` crashes
//! the process that just stepped and `pN` crashes process N (independent
//! model). `delay` is the number of steps before the independent-model
//! recovery is invoked. `max=N` as its own item caps the number of crashes.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::algorithm::Model;

/// Who steps: a process, or the system actor running global recovery.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Actor {
    System,
    Process(usize),
}

impl Actor {
    /// Memory-attribution id: 0 for the system, the pid otherwise.
    pub fn id(self) -> usize {
        match self {
            Actor::System => 0,
            Actor::Process(p) => p,
        }
    }
}

impl fmt::Display for Actor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Actor::System => f.write_str("sys"),
            Actor::Process(p) => write!(f, "p{p}"),
        }
    }
}

impl FromStr for Actor {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "sys" {
            return Ok(Actor::System);
        }
        s.strip_prefix('p')
            .and_then(|d| d.parse::<usize>().ok())
            .filter(|&p| p >= 1)
            .map(Actor::Process)
            .ok_or_else(|| format!("bad actor `{s}` (expected sys or pN)"))
    }
}

impl Serialize for Actor {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Actor {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CrashScope {
    All,
    Any,
    #[serde(untagged)]
    Pid(usize),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "camelCase")]
pub enum CrashWhen {
    /// After the `step`-th scheduler step.
    AtStep { step: u64 },
    /// After `actor`'s `occurrence`-th step labelled `label`. The label
    /// matches either the full name (`COLLECT_START_2`) or its base name.
    AtLabel { actor: Actor, label: String, occurrence: u32 },
    /// After each step, with probability `rate`.
    Random { rate: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrashTrigger {
    pub scope: CrashScope,
    pub when: CrashWhen,
    #[serde(default)]
    pub delay: u64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CrashPlan {
    pub triggers: Vec<CrashTrigger>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_crashes: Option<u32>,
}

impl CrashPlan {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn is_empty(&self) -> bool {
        self.triggers.is_empty()
    }

    /// Checks the plan against the model, process count and step budget.
    pub fn validate(&self, model: Model, n: usize, step_budget: u64) -> Result<(), String> {
        for t in &self.triggers {
            match (model, t.scope) {
                (Model::Global, CrashScope::All) => {}
                (Model::Global, s) => {
                    return Err(format!("scope {s:?} is invalid in the system-wide model; use all"))
                }
                (Model::Independent, CrashScope::All) => {
                    return Err("scope all is invalid in the independent model".into())
                }
                (Model::Independent, CrashScope::Pid(p)) if p == 0 || p > n => {
                    return Err(format!("p{p} is not a process of n={n}"))
                }
                (Model::Independent, _) => {}
            }
            if t.delay >= step_budget {
                return Err(format!(
                    "re-admission delay {} is not within the step budget {step_budget}",
                    t.delay
                ));
            }
            match &t.when {
                CrashWhen::Random { rate } if !(0.0..=1.0).contains(rate) => {
                    return Err(format!("crash rate {rate} outside [0, 1]"))
                }
                CrashWhen::AtLabel { actor: Actor::System, .. } if model == Model::Independent => {
                    return Err("the independent model has no system actor".into())
                }
                CrashWhen::AtLabel { actor: Actor::Process(p), .. } if *p > n => {
                    return Err(format!("p{p} is not a process of n={n}"))
                }
                CrashWhen::AtLabel { occurrence: 0, .. } => {
                    return Err("label occurrences count from 1".into())
                }
                _ => {}
            }
        }
        Ok(())
    }
}

fn parse_trigger(item: &str) -> Result<CrashTrigger, String> {
    let (scope, rest) = item
        .split_once(':')
        .ok_or_else(|| format!("crash trigger `{item}` lacks `<scope>:`"))?;
    let scope = match scope {
        "all" => CrashScope::All,
        "any" => CrashScope::Any,
        s => CrashScope::Pid(
            s.strip_prefix('p')
                .and_then(|d| d.parse().ok())
                .ok_or_else(|| format!("bad crash scope `{s}`"))?,
        ),
    };
    let mut parts = rest.split(',');
    let when_s = parts.next().unwrap_or_default();
    let (key, value) = when_s
        .split_once('=')
        .ok_or_else(|| format!("bad crash condition `{when_s}`"))?;
    let when = match key {
        "step" => CrashWhen::AtStep {
            step: value.parse().map_err(|_| format!("bad step `{value}`"))?,
        },
        "rate" => CrashWhen::Random {
            rate: value.parse().map_err(|_| format!("bad rate `{value}`"))?,
        },
        "label" => {
            let (actor, label) = value
                .split_once('/')
                .ok_or_else(|| format!("label trigger `{value}` must be <actor>/<LABEL>"))?;
            let (label, occurrence) = match label.split_once('#') {
                Some((l, o)) => (l, o.parse().map_err(|_| format!("bad occurrence `{o}`"))?),
                None => (label, 1),
            };
            CrashWhen::AtLabel { actor: actor.parse()?, label: label.to_string(), occurrence }
        }
        k => return Err(format!("unknown crash condition `{k}`")),
    };
    let mut delay = 0;
    for p in parts {
        match p.split_once('=') {
            Some(("delay", d)) => delay = d.parse().map_err(|_| format!("bad delay `{d}`"))?,
            _ => return Err(format!("unknown trigger option `{p}`")),
        }
    }
    Ok(CrashTrigger { scope, when, delay })
}

impl FromStr for CrashPlan {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s.starts_with('{') {
            return serde_json::from_str(s).map_err(|e| format!("bad crash plan JSON: {e}"));
        }
        let mut plan = CrashPlan::none();
        if s.is_empty() || s == "none" {
            return Ok(plan);
        }
        for item in s.split(';').map(str::trim).filter(|i| !i.is_empty()) {
            if let Some(m) = item.strip_prefix("max=") {
                plan.max_crashes = Some(m.parse().map_err(|_| format!("bad max `{m}`"))?);
            } else {
                plan.triggers.push(parse_trigger(item)?);
            }
        }
        Ok(plan)
    }
}

impl fmt::Display for CrashPlan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.triggers.is_empty() && self.max_crashes.is_none() {
            return f.write_str("none");
        }
        let mut items = Vec::new();
        for t in &self.triggers {
            let scope = match t.scope {
                CrashScope::All => "all".to_string(),
                CrashScope::Any => "any".to_string(),
                CrashScope::Pid(p) => format!("p{p}"),
            };
            let when = match &t.when {
                CrashWhen::AtStep { step } => format!("step={step}"),
                CrashWhen::Random { rate } => format!("rate={rate}"),
                CrashWhen::AtLabel { actor, label, occurrence } => {
                    format!("label={actor}/{label}#{occurrence}")
                }
            };
            let delay = if t.delay > 0 { format!(",delay={}", t.delay) } else { String::new() };
            items.push(format!("{scope}:{when}{delay}"));
        }
        if let Some(m) = self.max_crashes {
            items.push(format!("max={m}"));
        }
        f.write_str(&items.join(";"))
    }
}
