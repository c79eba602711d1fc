//! `recoswap` command line: run, check, sweep and replay.
//!
//! Exit codes: 0 success, 2 blocked, 3 check failed, 64 usage error or
//! checker refusal, 65 malformed trace file.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::Serialize;

use recoswap::checker::{lookup_checker, Verdict};
use recoswap::sim::fixtures::fixture;
use recoswap::sim::scheduler::policy_by_name;
use recoswap::sim::{run, CrashPlan, Outcome, RunConfig, RunResult, DEFAULT_STEP_BUDGET};
use recoswap::trace::{replay, TraceError, TraceFile};
use recoswap::Model;

pub const EXIT_OK: i32 = 0;
pub const EXIT_BLOCKED: i32 = 2;
pub const EXIT_CHECK_FAILED: i32 = 3;
pub const EXIT_USAGE: i32 = 64;
pub const EXIT_DATA: i32 = 65;

pub const BUDGET_ENV: &str = "RECOSWAP_STEP_BUDGET";

#[derive(Parser, Debug)]
#[command(name = "recoswap", version, about = "Recoverable swap simulator and checker")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Run one simulation, write its trace and check it.
    Run(RunArgs),
    /// Check a recorded trace.
    Check(CheckArgs),
    /// Run a campaign over seeds, process counts and crash rates.
    Sweep(SweepArgs),
    /// Re-execute a trace and compare.
    Replay(ReplayArgs),
}

#[derive(Args, Debug)]
pub struct RunArgs {
    #[arg(long, default_value = "global")]
    pub model: Model,
    #[arg(long, default_value_t = 2)]
    pub n: usize,
    #[arg(long, default_value_t = 2)]
    pub ops: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Crash plan text, a file holding one, or `fixture:<name>`.
    #[arg(long, default_value = "none")]
    pub crash_plan: String,
    #[arg(long)]
    pub step_budget: Option<u64>,
    #[arg(long, default_value = "seeded-random")]
    pub scheduler: String,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// fast, brute, nrl or none.
    #[arg(long, default_value = "nrl")]
    pub check: String,
    /// Leave low-level steps out of the trace.
    #[arg(long)]
    pub no_steps: bool,
}

#[derive(Args, Debug)]
pub struct CheckArgs {
    pub trace: PathBuf,
    #[arg(long, default_value = "nrl")]
    pub check: String,
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    #[arg(long, default_value = "global")]
    pub model: Model,
    /// Half-open seed range `a..b`.
    #[arg(long, default_value = "0..100")]
    pub seeds: String,
    /// Inclusive process-count range `a..=b` (or a single number).
    #[arg(long, default_value = "2..=4")]
    pub n: String,
    #[arg(long, default_value_t = 3)]
    pub ops: usize,
    #[arg(long, default_value_t = 0.0)]
    pub rate_min: f64,
    #[arg(long, default_value_t = 0.0)]
    pub rate_max: f64,
    /// Re-admission delay for independent crashes.
    #[arg(long, default_value_t = 0)]
    pub delay: u64,
    /// Cap on system-wide crashes per run.
    #[arg(long, default_value_t = 3)]
    pub max_crashes: u32,
    #[arg(long)]
    pub step_budget: Option<u64>,
    #[arg(long, default_value = "nrl")]
    pub check: String,
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
}

#[derive(Args, Debug)]
pub struct ReplayArgs {
    pub trace: PathBuf,
    /// Fail unless the trace was recorded with this model.
    #[arg(long)]
    pub model: Option<Model>,
}

struct Failure {
    code: i32,
    msg: String,
}

fn fail(code: i32, msg: impl Into<String>) -> Failure {
    Failure { code, msg: msg.into() }
}

type CmdResult = Result<i32, Failure>;

fn budget(flag: Option<u64>) -> Result<u64, Failure> {
    if let Some(b) = flag {
        return Ok(b);
    }
    match std::env::var(BUDGET_ENV) {
        Ok(v) => v.trim().parse().map_err(|_| fail(EXIT_USAGE, format!("{BUDGET_ENV}={v} is not a number"))),
        Err(_) => Ok(DEFAULT_STEP_BUDGET),
    }
}

fn parse_plan(spec: &str) -> Result<CrashPlan, Failure> {
    let text = if Path::new(spec).is_file() {
        std::fs::read_to_string(spec).map_err(|e| fail(EXIT_USAGE, format!("cannot read {spec}: {e}")))?
    } else {
        spec.to_string()
    };
    text.parse().map_err(|e: String| fail(EXIT_USAGE, format!("invalid crash plan: {e}")))
}

/// Builds the run configuration; fixtures fix their own workload and
/// schedule and only take the seed and an explicit budget.
pub fn build_config(a: &RunArgs) -> Result<RunConfig, String> {
    let to_s = |f: Failure| f.msg;
    if let Some(name) = a.crash_plan.strip_prefix("fixture:") {
        let mut c = fixture(name).ok_or_else(|| format!("unknown fixture `{name}`"))?;
        if c.model != a.model {
            return Err(format!("fixture {name} runs the {} model, not {}", c.model, a.model));
        }
        c.seed = a.seed;
        if let Some(b) = a.step_budget {
            c.step_budget = b;
        }
        c.record_steps = !a.no_steps;
        c.validate()?;
        return Ok(c);
    }
    let plan = parse_plan(&a.crash_plan).map_err(to_s)?;
    let scheduler = policy_by_name(&a.scheduler).ok_or_else(|| format!("unknown scheduler `{}`", a.scheduler))?;
    let mut c = RunConfig::new(a.model, a.n, a.ops, a.seed)
        .with_plan(plan)
        .with_scheduler(scheduler)
        .with_budget(budget(a.step_budget).map_err(to_s)?);
    c.record_steps = !a.no_steps;
    c.validate()?;
    Ok(c)
}

fn run_check(name: &str, r: &RunResult) -> Result<Option<Verdict>, Failure> {
    if name == "none" {
        return Ok(None);
    }
    let checker = lookup_checker(name).ok_or_else(|| fail(EXIT_USAGE, format!("unknown checker `{name}`")))?;
    Ok(Some(checker.check(&r.history)))
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct RunReport<'a> {
    model: Model,
    n: usize,
    seed: u64,
    outcome: &'a Outcome,
    crashes: u32,
    events: usize,
    steps: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    verdict: Option<&'a Verdict>,
    #[serde(skip_serializing_if = "Option::is_none")]
    trace: Option<String>,
}

fn cmd_run(a: &RunArgs, out: &mut dyn Write, err: &mut dyn Write) -> CmdResult {
    let config = build_config(a).map_err(|m| fail(EXIT_USAGE, m))?;
    let r = run(&config).map_err(|m| fail(EXIT_USAGE, m))?;
    if let Some(path) = &a.out {
        let t = TraceFile::from_result(&r);
        std::fs::write(path, t.to_json_lines())
            .map_err(|e| fail(EXIT_USAGE, format!("cannot write {}: {e}", path.display())))?;
    }
    let verdict = run_check(&a.check, &r)?;
    let report = RunReport {
        model: config.model,
        n: config.n,
        seed: config.seed,
        outcome: &r.outcome,
        crashes: r.crashes,
        events: r.history.len(),
        steps: r.steps.len(),
        verdict: verdict.as_ref(),
        trace: a.out.as_ref().map(|p| p.display().to_string()),
    };
    writeln!(out, "{}", serde_json::to_string(&report).expect("report serializes")).ok();
    match (&r.outcome, &verdict) {
        (Outcome::Faulted { step, actor, fault }, _) => {
            writeln!(err, "runtime invariant violated at step {step} by {actor}: {fault} (seed {})", config.seed).ok();
            Ok(EXIT_CHECK_FAILED)
        }
        (Outcome::Blocked { spinning }, _) => {
            writeln!(err, "blocked: {spinning:?} spin without progress (seed {})", config.seed).ok();
            Ok(EXIT_BLOCKED)
        }
        (_, Some(Verdict::Refused { reason })) => Err(fail(EXIT_USAGE, format!("checker refused: {reason}"))),
        (_, Some(Verdict::No { reason })) => {
            writeln!(err, "check failed: {reason} (reproduce with --seed {})", config.seed).ok();
            Ok(EXIT_CHECK_FAILED)
        }
        _ => Ok(EXIT_OK),
    }
}

fn read_trace(path: &Path) -> Result<TraceFile, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| fail(EXIT_DATA, format!("cannot read {}: {e}", path.display())))?;
    TraceFile::parse(&text).map_err(|e| fail(EXIT_DATA, format!("{}: {e}", path.display())))
}

fn cmd_check(a: &CheckArgs, out: &mut dyn Write, err: &mut dyn Write) -> CmdResult {
    let checker = lookup_checker(&a.check).ok_or_else(|| fail(EXIT_USAGE, format!("unknown checker `{}`", a.check)))?;
    let t = read_trace(&a.trace)?;
    let v = checker.check(&t.events());
    writeln!(out, "{}", serde_json::to_string(&v).expect("verdict serializes")).ok();
    match v {
        Verdict::Yes { .. } => Ok(EXIT_OK),
        Verdict::No { reason } => {
            writeln!(err, "check failed: {reason} (seed {})", t.header.seed).ok();
            Ok(EXIT_CHECK_FAILED)
        }
        Verdict::Refused { reason } => Err(fail(EXIT_USAGE, format!("checker refused: {reason}"))),
    }
}

fn cmd_replay(a: &ReplayArgs, out: &mut dyn Write, err: &mut dyn Write) -> CmdResult {
    let t = read_trace(&a.trace)?;
    let rep = match replay(&t, a.model) {
        Ok(r) => r,
        Err(e @ TraceError::ModelMismatch { .. }) => return Err(fail(EXIT_USAGE, e.to_string())),
        Err(e) => return Err(fail(EXIT_DATA, e.to_string())),
    };
    match &rep.divergence {
        None => {
            writeln!(out, "identical: {} events, {} steps", rep.events, rep.steps).ok();
            Ok(EXIT_OK)
        }
        Some(d) => {
            writeln!(out, "diverged at {} {} (step {})", d.what, d.index, d.step).ok();
            writeln!(err, "recorded: {}\nreplayed: {}", d.recorded, d.replayed).ok();
            Ok(EXIT_CHECK_FAILED)
        }
    }
}

fn parse_range(s: &str, inclusive_default: bool) -> Result<(u64, u64), String> {
    let bad = || format!("bad range `{s}`");
    if let Some((a, b)) = s.split_once("..=") {
        let (a, b) = (a.parse().map_err(|_| bad())?, b.parse::<u64>().map_err(|_| bad())?);
        return Ok((a, b + 1));
    }
    if let Some((a, b)) = s.split_once("..") {
        return Ok((a.parse().map_err(|_| bad())?, b.parse().map_err(|_| bad())?));
    }
    let x: u64 = s.parse().map_err(|_| bad())?;
    Ok((x, x + u64::from(inclusive_default)))
}

#[derive(Serialize, Default, Debug, PartialEq)]
#[serde(rename_all = "camelCase")]
pub struct SweepSummary {
    pub runs: usize,
    pub completed: usize,
    pub blocked: usize,
    pub budget_exhausted: usize,
    pub faulted: usize,
    pub check_failures: usize,
    pub skipped: usize,
    pub failures: Vec<SweepFailure>,
}

#[derive(Serialize, Debug, PartialEq)]
#[serde(rename_all = "camelCase")]
pub struct SweepFailure {
    pub seed: u64,
    pub n: usize,
    pub crash_plan: String,
    pub reason: String,
}

enum RunTally {
    Skipped,
    Done(Outcome, Option<String>),
}

/// Crash rate for one run: spread evenly over `[min, max]` by seed.
fn rate_for(a: &SweepArgs, seed: u64) -> f64 {
    if a.rate_max <= a.rate_min {
        return a.rate_min;
    }
    a.rate_min + (a.rate_max - a.rate_min) * (seed % 11) as f64 / 10.0
}

fn sweep_one(a: &SweepArgs, seed: u64, n: usize, budget: u64) -> (String, RunTally) {
    let rate = rate_for(a, seed);
    let plan = if rate <= 0.0 {
        CrashPlan::none()
    } else {
        let text = match a.model {
            Model::Global => format!("all:rate={rate};max={}", a.max_crashes),
            Model::Independent => format!("any:rate={rate},delay={};max={}", a.delay, a.max_crashes),
        };
        text.parse().expect("generated plans parse")
    };
    let plan_s = plan.to_string();
    let mut c = RunConfig::new(a.model, n, a.ops, seed).with_plan(plan).with_budget(budget);
    c.record_steps = false;
    let Ok(r) = run(&c) else {
        return (plan_s, RunTally::Skipped);
    };
    let reason = match &r.outcome {
        Outcome::Faulted { fault, .. } => Some(fault.clone()),
        Outcome::Completed => match lookup_checker(&a.check).map(|ch| ch.check(&r.history)) {
            Some(Verdict::No { reason }) => Some(reason),
            Some(Verdict::Refused { reason }) => Some(format!("refused: {reason}")),
            _ => None,
        },
        _ => None,
    };
    (plan_s, RunTally::Done(r.outcome, reason))
}

pub fn sweep(a: &SweepArgs) -> Result<SweepSummary, String> {
    if a.check != "none" && lookup_checker(&a.check).is_none() {
        return Err(format!("unknown checker `{}`", a.check));
    }
    let (s0, s1) = parse_range(&a.seeds, true)?;
    let (n0, n1) = parse_range(&a.n, true)?;
    let budget = budget(a.step_budget).map_err(|f| f.msg)?;
    let cases: Vec<(u64, usize)> = (s0..s1).flat_map(|s| (n0..n1).map(move |n| (s, n as usize))).collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(a.jobs.max(1))
        .build()
        .map_err(|e| e.to_string())?;
    let results: Vec<(u64, usize, String, RunTally)> = pool.install(|| {
        cases
            .par_iter()
            .map(|&(seed, n)| {
                let (plan, t) = sweep_one(a, seed, n, budget);
                (seed, n, plan, t)
            })
            .collect()
    });
    let mut sum = SweepSummary::default();
    for (seed, n, crash_plan, t) in results {
        match t {
            RunTally::Skipped => sum.skipped += 1,
            RunTally::Done(outcome, reason) => {
                sum.runs += 1;
                match outcome {
                    Outcome::Completed => sum.completed += 1,
                    Outcome::Blocked { .. } => sum.blocked += 1,
                    Outcome::BudgetExhausted => sum.budget_exhausted += 1,
                    Outcome::Faulted { .. } => sum.faulted += 1,
                }
                if let Some(reason) = reason {
                    sum.check_failures += 1;
                    sum.failures.push(SweepFailure { seed, n, crash_plan, reason });
                }
            }
        }
    }
    Ok(sum)
}

fn cmd_sweep(a: &SweepArgs, out: &mut dyn Write) -> CmdResult {
    let sum = sweep(a).map_err(|m| fail(EXIT_USAGE, m))?;
    writeln!(out, "{}", serde_json::to_string(&sum).expect("summary serializes")).ok();
    Ok(if sum.check_failures == 0 { EXIT_OK } else { EXIT_CHECK_FAILED })
}

/// Runs the command line `args` (including the program name) and returns
/// the exit code.
pub fn run_cli<I, S>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            if code == EXIT_OK {
                write!(out, "{text}").ok();
            } else {
                write!(err, "{text}").ok();
            }
            return code;
        }
    };
    let r = match &cli.command {
        Command::Run(a) => cmd_run(a, out, err),
        Command::Check(a) => cmd_check(a, out, err),
        Command::Sweep(a) => cmd_sweep(a, out),
        Command::Replay(a) => cmd_replay(a, out, err),
    };
    match r {
        Ok(code) => code,
        Err(f) => {
            writeln!(err, "recoswap: {}", f.msg).ok();
            f.code
        }
    }
}
