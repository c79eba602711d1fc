//! Trace files: one JSON header line, then one JSON record per line
//! (events, low-level steps, snapshots, and the outcome) in step order.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::algorithm::Model;
use crate::checker::history::HistoryEvent;
use crate::sim::config::RunConfig;
use crate::sim::run::{run, Outcome, RunResult};
use crate::sim::world::{SnapshotRecord, StepRecord};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("invalid trace: {0}")]
    Invalid(String),
    #[error("model mismatch: trace was recorded with {trace}, replay requested {requested}")]
    ModelMismatch { trace: Model, requested: Model },
    #[error("cannot re-run the recorded configuration: {0}")]
    Config(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TraceHeader {
    pub format_version: u32,
    pub model: Model,
    pub n: usize,
    pub seed: u64,
    pub scheduler_policy: String,
    pub crash_plan: String,
    pub config: RunConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "lowercase")]
pub enum TraceRecord {
    Event(HistoryEvent),
    Step(StepRecord),
    Snapshot(SnapshotRecord),
    Outcome(OutcomeRecord),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutcomeRecord {
    pub step: u64,
    pub outcome: Outcome,
    pub crashes: u32,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TraceFile {
    pub header: TraceHeader,
    pub records: Vec<TraceRecord>,
}

impl TraceFile {
    pub fn from_result(r: &RunResult) -> Self {
        let c = &r.config;
        let header = TraceHeader {
            format_version: FORMAT_VERSION,
            model: c.model,
            n: c.n,
            seed: c.seed,
            scheduler_policy: c.scheduler.name().to_string(),
            crash_plan: c.crash_plan.to_string(),
            config: c.clone(),
        };
        // Within a step: the step itself, then its events, then snapshots.
        let mut keyed: Vec<(u64, u8, TraceRecord)> = Vec::new();
        keyed.extend(r.steps.iter().map(|s| (s.step, 0, TraceRecord::Step(s.clone()))));
        keyed.extend(r.history.iter().map(|e| (e.step, 1, TraceRecord::Event(e.clone()))));
        keyed.extend(r.snapshots.iter().map(|s| (s.step, 2, TraceRecord::Snapshot(s.clone()))));
        keyed.sort_by_key(|(s, k, _)| (*s, *k));
        let mut records: Vec<TraceRecord> = keyed.into_iter().map(|(_, _, rec)| rec).collect();
        let last = records.iter().map(record_step).max().unwrap_or(0);
        records.push(TraceRecord::Outcome(OutcomeRecord { step: last, outcome: r.outcome.clone(), crashes: r.crashes }));
        Self { header, records }
    }

    pub fn events(&self) -> Vec<HistoryEvent> {
        self.records
            .iter()
            .filter_map(|r| match r {
                TraceRecord::Event(e) => Some(e.clone()),
                _ => None,
            })
            .collect()
    }

    pub fn steps(&self) -> Vec<&StepRecord> {
        self.records
            .iter()
            .filter_map(|r| match r {
                TraceRecord::Step(s) => Some(s),
                _ => None,
            })
            .collect()
    }

    pub fn snapshots(&self) -> Vec<&SnapshotRecord> {
        self.records
            .iter()
            .filter_map(|r| match r {
                TraceRecord::Snapshot(s) => Some(s),
                _ => None,
            })
            .collect()
    }

    pub fn outcome(&self) -> Option<&OutcomeRecord> {
        self.records.iter().find_map(|r| match r {
            TraceRecord::Outcome(o) => Some(o),
            _ => None,
        })
    }

    pub fn to_json_lines(&self) -> String {
        let mut out = serde_json::to_string(&self.header).expect("header serializes");
        out.push('\n');
        for r in &self.records {
            writeln!(out, "{}", serde_json::to_string(r).expect("record serializes")).expect("string write");
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self, TraceError> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, first) = lines.next().ok_or_else(|| TraceError::Invalid("empty file".into()))?;
        let header: TraceHeader =
            serde_json::from_str(first).map_err(|e| TraceError::Parse { line: 1, msg: e.to_string() })?;
        let mut records = Vec::new();
        for (i, l) in lines {
            records.push(serde_json::from_str(l).map_err(|e| TraceError::Parse { line: i + 1, msg: e.to_string() })?);
        }
        let t = Self { header, records };
        t.validate()?;
        Ok(t)
    }

    /// Header consistency, pids within range, and records in step order.
    pub fn validate(&self) -> Result<(), TraceError> {
        let h = &self.header;
        let bad = |m: String| Err(TraceError::Invalid(m));
        if h.format_version != FORMAT_VERSION {
            return bad(format!("unsupported format version {}", h.format_version));
        }
        if h.model != h.config.model || h.n != h.config.n || h.seed != h.config.seed {
            return bad("header disagrees with its embedded configuration".into());
        }
        if h.scheduler_policy != h.config.scheduler.name() || h.crash_plan != h.config.crash_plan.to_string() {
            return bad("header disagrees with its embedded configuration".into());
        }
        let mut last = 0;
        for (i, r) in self.records.iter().enumerate() {
            let s = record_step(r);
            if s < last {
                return bad(format!("record {} at step {s} follows step {last}", i + 2));
            }
            last = s;
            if let TraceRecord::Event(e) = r {
                if e.pid == 0 || e.pid > h.n {
                    return bad(format!("event for p{} but n = {}", e.pid, h.n));
                }
            }
        }
        Ok(())
    }
}

fn record_step(r: &TraceRecord) -> u64 {
    match r {
        TraceRecord::Event(e) => e.step,
        TraceRecord::Step(s) => s.step,
        TraceRecord::Snapshot(s) => s.step,
        TraceRecord::Outcome(o) => o.step,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Divergence {
    /// Index among the compared records (events or steps).
    pub index: usize,
    pub step: u64,
    pub what: &'static str,
    pub recorded: String,
    pub replayed: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReplayReport {
    pub events: usize,
    pub steps: usize,
    pub divergence: Option<Divergence>,
}

impl ReplayReport {
    pub fn identical(&self) -> bool {
        self.divergence.is_none()
    }
}

fn first_diff<T: PartialEq + std::fmt::Debug>(
    what: &'static str,
    a: &[T],
    b: &[T],
    step_of: impl Fn(&T) -> u64,
) -> Option<Divergence> {
    let show = |x: Option<&T>| x.map_or_else(|| "<nothing>".to_string(), |x| format!("{x:?}"));
    let i = (0..a.len().max(b.len())).find(|&i| a.get(i) != b.get(i))?;
    let step = a.get(i).or(b.get(i)).map(&step_of).unwrap_or(0);
    Some(Divergence { index: i, step, what, recorded: show(a.get(i)), replayed: show(b.get(i)) })
}

/// Re-runs the trace's configuration and compares the event sequence and
/// low-level steps. `model`, if given, must match the trace.
pub fn replay(trace: &TraceFile, model: Option<Model>) -> Result<ReplayReport, TraceError> {
    if let Some(m) = model {
        if m != trace.header.model {
            return Err(TraceError::ModelMismatch { trace: trace.header.model, requested: m });
        }
    }
    let fresh = run(&trace.header.config).map_err(TraceError::Config)?;
    let recorded = trace.events();
    let divergence = first_diff("event", &recorded, &fresh.history, |e| e.step).or_else(|| {
        let steps: Vec<StepRecord> = trace.steps().into_iter().cloned().collect();
        if steps.is_empty() {
            None
        } else {
            first_diff("step", &steps, &fresh.steps, |s| s.step)
        }
    });
    Ok(ReplayReport { events: recorded.len(), steps: fresh.steps.len(), divergence })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::config::SchedulerPolicy;
    use crate::types::Value;

    fn sample() -> TraceFile {
        let c = RunConfig::new(Model::Independent, 2, 2, 5)
            .with_plan("any:rate=0.05,delay=3".parse().unwrap())
            .with_scheduler(SchedulerPolicy::SeededRandom);
        TraceFile::from_result(&run(&c).unwrap())
    }

    #[test]
    fn write_read_write_is_identical() {
        let t = sample();
        let s = t.to_json_lines();
        let back = TraceFile::parse(&s).unwrap();
        assert_eq!(back, t);
        assert_eq!(back.to_json_lines(), s);
    }

    #[test]
    fn replay_matches_and_detects_mutation() {
        let t = sample();
        assert!(replay(&t, None).unwrap().identical());
        let mut m = t.clone();
        let pos = m
            .records
            .iter()
            .position(|r| matches!(r, TraceRecord::Event(e) if e.ret.is_some()))
            .unwrap();
        let TraceRecord::Event(e) = &mut m.records[pos] else { unreachable!() };
        e.ret = Some(Value::Int(999_999));
        let step = e.step;
        let d = replay(&m, None).unwrap().divergence.unwrap();
        assert_eq!(d.what, "event");
        assert_eq!(d.step, step);
    }

    #[test]
    fn replay_rejects_other_model() {
        let t = sample();
        assert!(matches!(replay(&t, Some(Model::Global)), Err(TraceError::ModelMismatch { .. })));
    }

    #[test]
    fn header_must_match_events() {
        let mut t = sample();
        t.header.n = 1;
        t.header.config.n = 1;
        assert!(t.validate().is_err());
    }
}
