//! Acceptance suite. Prints one line per criterion and exits nonzero if a
//! gating criterion fails.
//!
//! Criteria that need resources this machine may not have (the published
//! dataset checkout, a real prover) report BLOCKED or SKIP instead of
//! failing the build; with the resources present they gate normally.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestRng, TestRunner};

use feas::dataset::{load_dataset, DatasetManifest, Problem, Tier, TierSelect};
use feas::env::{ExternalProver, ProverEnvironment, ToyEnv, ToyEnvSpec};
use feas::harness::{compute_pass_at_k, emit_report, run_benchmark, AgentKind, EnvConfig, ReportFormat, RunConfig, TierChoice};
use feas::search::{apply_with_fallback, feas_search, replay_proof, SearchConfig, SearchOutcome, SearchStatus, TraceEvent};
use feas::state::{BlockOrigin, FailureDict, Obligation, Hypothesis, TacticBlock};
use feas::suggest::parse::strip_proof_delimiters;
use feas::suggest::{
    join_blocks, normalize_script, segment_blocks, AgentMode, BackendConfig, BackendError, BackendKind, PromptBundle,
    RecordingBackend, ReplayBackend, ScriptTable, ScriptedBackend, SuggestionBackend,
};

/// Criterion 1: all hand-traced environments together.
const HAND_TRACE_BUDGET: Duration = Duration::from_secs(1);
/// Criterion 2: search timeout and the simulated cost of one application.
const SLOW_TIMEOUT: Duration = Duration::from_secs(2);
const SLOW_APPLY: Duration = Duration::from_millis(400);
/// Scheduling slack allowed on top of one application.
const SCHEDULING_SLACK: Duration = Duration::from_millis(150);
/// Criterion 7: reported values are compared at four decimals.
const METRIC_TOLERANCE: f64 = 5e-5;
const MONOTONE_EPS: f64 = 1e-12;
const RANDOM_ENVS: u32 = 1_000;
const RANDOM_SCRIPTS: u32 = 1_000;
const RANDOM_MATRICES: u32 = 10_000;

#[derive(PartialEq)]
enum Verdict {
    Pass,
    Fail,
    Blocked,
    Skip,
}

fn main() {
    let criteria: Vec<(u32, &str, bool, Check)> = vec![
        (1, "algorithm trace oracle", true, criterion_1),
        (2, "budget exactness and timeout", true, criterion_2),
        (3, "loop safety on random cyclic environments", true, criterion_3),
        (4, "parser round trip", true, criterion_4),
        (5, "salvage semantics", true, criterion_5),
        (6, "fallback contract", true, criterion_6),
        (7, "pass@k metrics", true, criterion_7),
        (8, "determinism and replay", true, criterion_8),
        (9, "dataset tier counts", true, criterion_9),
        (10, "live prover smoke", false, criterion_10),
    ];
    let mut gating_failures = 0;
    for (n, title, gating, check) in criteria {
        let result = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            Err(Outcome::Fail(msg))
        });
        let (verdict, detail) = match result {
            Ok(detail) => (Verdict::Pass, detail),
            Err(Outcome::Fail(d)) => (Verdict::Fail, d),
            Err(Outcome::Blocked(d)) => (Verdict::Blocked, d),
            Err(Outcome::Skip(d)) => (Verdict::Skip, d),
        };
        let tag = match verdict {
            Verdict::Pass => "PASS",
            Verdict::Fail => "FAIL",
            Verdict::Blocked => "BLOCKED",
            Verdict::Skip => "SKIP",
        };
        let gate = if gating { "" } else { " (not gating)" };
        println!("{tag:<7} criterion {n:>2}: {title}{gate}: {detail}");
        if verdict == Verdict::Fail && gating {
            gating_failures += 1;
        }
    }
    if gating_failures > 0 {
        eprintln!("{gating_failures} gating criteria failed");
        std::process::exit(1);
    }
}

type Check = fn() -> Result<String, Outcome>;

enum Outcome {
    Fail(String),
    /// A required external resource is missing.
    Blocked(String),
    Skip(String),
}

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        #[allow(clippy::neg_cmp_op_on_partial_ord)]
        if !$cond {
            return Err(Outcome::Fail(format!($($fmt)+)));
        }
    };
}

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

fn problem() -> Problem {
    Problem::from_source("theorem toy : p := sorry", Tier::Simple, PathBuf::from("toy.lean"))
}

/// A fenced Lean response with one tactic per line.
fn resp(tactics: &[&str]) -> String {
    let body: String = tactics.iter().map(|t| format!("  {t},\n")).collect();
    format!("```lean\nbegin\n{body}end\n```")
}

fn cfg(max_queries: u32, retry_limit: u32, fallback: bool) -> SearchConfig {
    SearchConfig {
        max_queries,
        retry_limit,
        fallback_enabled: fallback,
        ..SearchConfig::default()
    }
}

fn search(spec: &ToyEnvSpec, script: ScriptTable, cfg: &SearchConfig) -> SearchOutcome {
    let mut env = ToyEnv::new(spec.clone()).unwrap();
    let mut backend = ScriptedBackend::new(script);
    feas_search(&problem(), &mut env, &mut backend, cfg).unwrap()
}

struct HandCase {
    name: &'static str,
    spec: ToyEnvSpec,
    script: ScriptTable,
    cfg: SearchConfig,
    status: SearchStatus,
    proof: Option<Vec<&'static str>>,
    queries: u32,
    bad: Vec<(&'static str, Vec<&'static str>)>,
    trace: Vec<&'static str>,
}

fn ob(goal: &str, hyps: &[(&str, &str)]) -> Vec<Obligation> {
    vec![Obligation::new(goal, hyps.iter().map(|(n, s)| Hypothesis::new(*n, *s)).collect()).unwrap()]
}

fn hand_cases() -> Vec<HandCase> {
    let d = SearchConfig::default;
    vec![
        HandCase {
            name: "one step",
            spec: ToyEnvSpec::new("S0").on("S0", "b1", "QED"),
            script: ScriptTable::new().with("S0", &[&resp(&["b1"])]),
            cfg: d(),
            status: SearchStatus::Proved,
            proof: Some(vec!["b1"]),
            queries: 1,
            bad: vec![],
            trace: vec!["push S0", "query 1 @S0 -> 1", "apply b1 @S0 -> QED"],
        },
        HandCase {
            name: "three states",
            spec: ToyEnvSpec::new("S0").on("S0", "t1", "S1").on("S1", "t2", "ERR").on("S1", "t3", "QED"),
            script: ScriptTable::new().with("S0", &[&resp(&["t1", "t2"])]).with("S1", &[&resp(&["t3"])]),
            cfg: d(),
            status: SearchStatus::Proved,
            proof: Some(vec!["t1", "t3"]),
            queries: 2,
            bad: vec![("S1", vec!["t2"])],
            trace: vec![
                "push S0",
                "query 1 @S0 -> 2",
                "apply t1 @S0 -> S1",
                "push S1",
                "apply t2 @S1 -> ERR",
                "bad S1 += t2",
                "fallback @S1 -> omitted",
                "query 2 @S1 -> 1",
                "apply t3 @S1 -> QED",
            ],
        },
        HandCase {
            name: "two-state cycle",
            spec: ToyEnvSpec::new("S0").on("S0", "a", "S1").on("S1", "back", "S0").on("S1", "b", "QED"),
            script: ScriptTable::new().with("S0", &[&resp(&["a", "back"])]).with("S1", &[&resp(&["b"])]),
            cfg: d(),
            status: SearchStatus::Proved,
            proof: Some(vec!["a", "b"]),
            queries: 2,
            bad: vec![("S1", vec!["back"])],
            trace: vec![
                "push S0",
                "query 1 @S0 -> 2",
                "apply a @S0 -> S1",
                "push S1",
                "apply back @S1 -> LOOP S0",
                "bad S1 += back",
                "fallback @S1 -> omitted",
                "query 2 @S1 -> 1",
                "apply b @S1 -> QED",
            ],
        },
        HandCase {
            name: "self loop discards the rest of the response",
            spec: ToyEnvSpec::new("S0").on("S0", "noop", "S0").on("S0", "c", "QED"),
            script: ScriptTable::new().with("S0", &[&resp(&["noop", "c"]), &resp(&["c"])]),
            cfg: d(),
            status: SearchStatus::Proved,
            proof: Some(vec!["c"]),
            queries: 2,
            bad: vec![("S0", vec!["noop"])],
            trace: vec![
                "push S0",
                "query 1 @S0 -> 2",
                "apply noop @S0 -> LOOP S0",
                "bad S0 += noop",
                "fallback @S0 -> omitted",
                "query 2 @S0 -> 1",
                "apply c @S0 -> QED",
            ],
        },
        HandCase {
            name: "small query budget",
            spec: ToyEnvSpec::new("S0"),
            script: ScriptTable::new().with("S0", &[&resp(&["x"])]),
            cfg: cfg(3, 10, true),
            status: SearchStatus::ExhaustedQueries,
            proof: None,
            queries: 3,
            bad: vec![("S0", vec!["x"])],
            trace: vec![
                "push S0",
                "query 1 @S0 -> 1",
                "apply x @S0 -> ERR",
                "bad S0 += x",
                "fallback @S0 -> omitted",
                "query 2 @S0 -> 1",
                "skip x @S0",
                "fallback @S0 -> omitted",
                "query 3 @S0 -> 1",
                "skip x @S0",
                "fallback @S0 -> omitted",
            ],
        },
        HandCase {
            name: "refill limit at the root",
            spec: ToyEnvSpec::new("S0"),
            script: ScriptTable::new().with("S0", &[&resp(&["x"])]),
            cfg: cfg(60, 2, true),
            status: SearchStatus::RetryLimit,
            proof: None,
            queries: 2,
            bad: vec![("S0", vec!["x"])],
            trace: vec![
                "push S0",
                "query 1 @S0 -> 1",
                "apply x @S0 -> ERR",
                "bad S0 += x",
                "fallback @S0 -> omitted",
                "query 2 @S0 -> 1",
                "skip x @S0",
                "fallback @S0 -> omitted",
                "pop S0",
            ],
        },
        HandCase {
            name: "backtrack to the parent and take another branch",
            spec: ToyEnvSpec::new("S0").on("S0", "a", "S1").on("S0", "b", "S2").on("S2", "c", "QED"),
            script: ScriptTable::new()
                .with("S0", &[&resp(&["a"]), &resp(&["b"])])
                .with("S1", &[&resp(&["z"])])
                .with("S2", &[&resp(&["c"])]),
            cfg: cfg(60, 2, true),
            status: SearchStatus::Proved,
            proof: Some(vec!["b", "c"]),
            queries: 5,
            bad: vec![("S1", vec!["z"])],
            trace: vec![
                "push S0",
                "query 1 @S0 -> 1",
                "apply a @S0 -> S1",
                "push S1",
                "fallback @S1 -> omitted",
                "query 2 @S1 -> 1",
                "apply z @S1 -> ERR",
                "bad S1 += z",
                "fallback @S1 -> omitted",
                "query 3 @S1 -> 1",
                "skip z @S1",
                "fallback @S1 -> omitted",
                "pop S1",
                "query 4 @S0 -> 1",
                "apply b @S0 -> S2",
                "push S2",
                "fallback @S2 -> omitted",
                "query 5 @S2 -> 1",
                "apply c @S2 -> QED",
            ],
        },
        HandCase {
            name: "fallback closes a pushed state",
            spec: ToyEnvSpec::new("S0").on("S0", "a", "S1").closable("S1"),
            script: ScriptTable::new().with("S0", &[&resp(&["a"])]),
            cfg: d(),
            status: SearchStatus::Proved,
            proof: Some(vec!["a", "nlinarith"]),
            queries: 1,
            bad: vec![],
            trace: vec!["push S0", "query 1 @S0 -> 1", "apply a @S0 -> S1", "push S1", "fallback @S1 -> QED"],
        },
        HandCase {
            name: "fallback closes the root after an error",
            spec: ToyEnvSpec::new("S0").closable("S0"),
            script: ScriptTable::new().with("S0", &[&resp(&["x"])]),
            cfg: d(),
            status: SearchStatus::Proved,
            proof: Some(vec!["nlinarith"]),
            queries: 1,
            bad: vec![("S0", vec!["x"])],
            trace: vec!["push S0", "query 1 @S0 -> 1", "apply x @S0 -> ERR", "bad S0 += x", "fallback @S0 -> QED"],
        },
        HandCase {
            name: "fallback makes progress",
            spec: ToyEnvSpec::new("S0").on("S0", "a", "S1").on("S1", "nlinarith", "S2").on("S2", "d", "QED"),
            script: ScriptTable::new().with("S0", &[&resp(&["a"])]).with("S2", &[&resp(&["d"])]),
            cfg: d(),
            status: SearchStatus::Proved,
            proof: Some(vec!["a", "nlinarith", "d"]),
            queries: 2,
            bad: vec![],
            trace: vec![
                "push S0",
                "query 1 @S0 -> 1",
                "apply a @S0 -> S1",
                "push S1",
                "fallback @S1 -> S2",
                "push S2",
                "query 2 @S2 -> 1",
                "apply d @S2 -> QED",
            ],
        },
        HandCase {
            name: "fallback disabled",
            spec: ToyEnvSpec::new("S0").on("S0", "a", "S1").closable("S1"),
            script: ScriptTable::new().with("S0", &[&resp(&["a"])]).with("S1", &[&resp(&["e"])]),
            cfg: cfg(3, 5, false),
            status: SearchStatus::ExhaustedQueries,
            proof: None,
            queries: 3,
            bad: vec![("S1", vec!["e"])],
            trace: vec![
                "push S0",
                "query 1 @S0 -> 1",
                "apply a @S0 -> S1",
                "push S1",
                "query 2 @S1 -> 1",
                "apply e @S1 -> ERR",
                "bad S1 += e",
                "query 3 @S1 -> 1",
                "skip e @S1",
            ],
        },
        HandCase {
            name: "remaining blocks follow the new state",
            spec: ToyEnvSpec::new("S0").on("S0", "a", "S1").on("S1", "b", "S2").on("S2", "c", "QED"),
            script: ScriptTable::new().with("S0", &[&resp(&["a", "b", "c"])]),
            cfg: d(),
            status: SearchStatus::Proved,
            proof: Some(vec!["a", "b", "c"]),
            queries: 1,
            bad: vec![],
            trace: vec![
                "push S0",
                "query 1 @S0 -> 3",
                "apply a @S0 -> S1",
                "push S1",
                "apply b @S1 -> S2",
                "push S2",
                "apply c @S2 -> QED",
            ],
        },
        HandCase {
            name: "an error drops the rest of the response",
            spec: ToyEnvSpec::new("S0").on("S0", "a", "S1").on("S1", "b", "ERR").on("S1", "c", "QED"),
            script: ScriptTable::new().with("S0", &[&resp(&["a", "b", "c"])]).with("S1", &[&resp(&["c"])]),
            cfg: d(),
            status: SearchStatus::Proved,
            proof: Some(vec!["a", "c"]),
            queries: 2,
            bad: vec![("S1", vec!["b"])],
            trace: vec![
                "push S0",
                "query 1 @S0 -> 3",
                "apply a @S0 -> S1",
                "push S1",
                "apply b @S1 -> ERR",
                "bad S1 += b",
                "fallback @S1 -> omitted",
                "query 2 @S1 -> 1",
                "apply c @S1 -> QED",
            ],
        },
        HandCase {
            name: "response without a proof block",
            spec: ToyEnvSpec::new("S0").on("S0", "a", "QED"),
            script: ScriptTable::new().with("S0", &["I would start by substituting x = 0.", &resp(&["a"])]),
            cfg: d(),
            status: SearchStatus::Proved,
            proof: Some(vec!["a"]),
            queries: 2,
            bad: vec![],
            trace: vec![
                "push S0",
                "query 1 @S0 -> 0",
                "fallback @S0 -> omitted",
                "query 2 @S0 -> 1",
                "apply a @S0 -> QED",
            ],
        },
        HandCase {
            name: "loop to an equivalent state under another name",
            spec: ToyEnvSpec::new("S0")
                .on("S0", "a", "S1")
                .on("S1", "b", "S2")
                .on("S2", "c", "S1b")
                .on("S2", "d", "QED")
                .with_goals("S1", ob("p", &[("h", "q")]))
                .with_goals("S1b", ob("p", &[("h2", "q")])),
            script: ScriptTable::new().with("S0", &[&resp(&["a", "b", "c"])]).with("S2", &[&resp(&["d"])]),
            cfg: d(),
            status: SearchStatus::Proved,
            proof: Some(vec!["a", "b", "d"]),
            queries: 2,
            bad: vec![("S2", vec!["c"])],
            trace: vec![
                "push S0",
                "query 1 @S0 -> 3",
                "apply a @S0 -> S1",
                "push S1",
                "apply b @S1 -> S2",
                "push S2",
                "apply c @S2 -> LOOP S1",
                "bad S2 += c",
                "fallback @S2 -> omitted",
                "query 2 @S2 -> 1",
                "apply d @S2 -> QED",
            ],
        },
        HandCase {
            name: "failures carry over to an equivalent state",
            spec: ToyEnvSpec::new("S0")
                .on("S0", "a", "S1")
                .on("S0", "b", "S1b")
                .on("S1b", "w", "QED")
                .with_goals("S1", ob("p", &[("h", "q")]))
                .with_goals("S1b", ob("p", &[("k", "q")])),
            script: ScriptTable::new()
                .with("S0", &[&resp(&["a"]), &resp(&["b"])])
                .with("S1", &[&resp(&["z"])])
                .with("S1b", &[&resp(&["z"]), &resp(&["w"])]),
            cfg: cfg(60, 2, true),
            status: SearchStatus::Proved,
            proof: Some(vec!["b", "w"]),
            queries: 6,
            bad: vec![("S1", vec!["z"]), ("S1b", vec!["z"])],
            trace: vec![
                "push S0",
                "query 1 @S0 -> 1",
                "apply a @S0 -> S1",
                "push S1",
                "fallback @S1 -> omitted",
                "query 2 @S1 -> 1",
                "apply z @S1 -> ERR",
                "bad S1 += z",
                "fallback @S1 -> omitted",
                "query 3 @S1 -> 1",
                "skip z @S1",
                "fallback @S1 -> omitted",
                "pop S1",
                "query 4 @S0 -> 1",
                "apply b @S0 -> S1b",
                "push S1b",
                "fallback @S1b -> omitted",
                "query 5 @S1b -> 1",
                "skip z @S1b",
                "fallback @S1b -> omitted",
                "query 6 @S1b -> 1",
                "apply w @S1b -> QED",
            ],
        },
        HandCase {
            name: "budget runs out below the root",
            spec: ToyEnvSpec::new("S0").on("S0", "a", "S1"),
            script: ScriptTable::new().with("S0", &[&resp(&["a"])]),
            cfg: cfg(1, 5, true),
            status: SearchStatus::ExhaustedQueries,
            proof: None,
            queries: 1,
            bad: vec![],
            trace: vec!["push S0", "query 1 @S0 -> 1", "apply a @S0 -> S1", "push S1", "fallback @S1 -> omitted"],
        },
        HandCase {
            name: "an inherited-queue state still gets its own queries",
            spec: ToyEnvSpec::new("S0").on("S0", "a", "S1").on("S1", "b", "S2").on("S1", "c", "QED"),
            script: ScriptTable::new()
                .with("S0", &[&resp(&["a", "b"])])
                .with("S1", &[&resp(&["c"])])
                .with("S2", &[&resp(&["z"])]),
            cfg: cfg(60, 1, true),
            status: SearchStatus::Proved,
            proof: Some(vec!["a", "c"]),
            queries: 3,
            bad: vec![("S2", vec!["z"])],
            trace: vec![
                "push S0",
                "query 1 @S0 -> 2",
                "apply a @S0 -> S1",
                "push S1",
                "apply b @S1 -> S2",
                "push S2",
                "fallback @S2 -> omitted",
                "query 2 @S2 -> 1",
                "apply z @S2 -> ERR",
                "bad S2 += z",
                "fallback @S2 -> omitted",
                "pop S2",
                "query 3 @S1 -> 1",
                "apply c @S1 -> QED",
            ],
        },
        HandCase {
            name: "known-bad block is skipped with its queue",
            spec: ToyEnvSpec::new("S0").on("S0", "y", "QED"),
            script: ScriptTable::new().with("S0", &[&resp(&["x"]), &resp(&["x", "y"]), &resp(&["y"])]),
            cfg: d(),
            status: SearchStatus::Proved,
            proof: Some(vec!["y"]),
            queries: 3,
            bad: vec![("S0", vec!["x"])],
            trace: vec![
                "push S0",
                "query 1 @S0 -> 1",
                "apply x @S0 -> ERR",
                "bad S0 += x",
                "fallback @S0 -> omitted",
                "query 2 @S0 -> 2",
                "skip x @S0",
                "fallback @S0 -> omitted",
                "query 3 @S0 -> 1",
                "apply y @S0 -> QED",
            ],
        },
        HandCase {
            name: "few-shot sends the whole body as one block",
            spec: ToyEnvSpec::new("S0").on("S0", "intro x, simp,", "QED"),
            script: ScriptTable::new().with("S0", &[&resp(&["intro x", "simp"])]),
            cfg: SearchConfig {
                mode: AgentMode::FewShot,
                max_queries: 1,
                fallback_enabled: false,
                ..d()
            },
            status: SearchStatus::Proved,
            proof: Some(vec!["intro x,\n  simp,"]),
            queries: 1,
            bad: vec![],
            trace: vec!["push S0", "query 1 @S0 -> 1", "apply intro x, simp, @S0 -> QED"],
        },
        HandCase {
            name: "copra takes the first tactic only",
            spec: ToyEnvSpec::new("S0").on("S0", "a", "S1").on("S1", "b", "QED"),
            script: ScriptTable::new().with("S0", &[&resp(&["a", "b"])]).with("S1", &[&resp(&["b"])]),
            cfg: SearchConfig {
                mode: AgentMode::Copra,
                fallback_enabled: false,
                ..d()
            },
            status: SearchStatus::Proved,
            proof: Some(vec!["a", "b"]),
            queries: 2,
            bad: vec![],
            trace: vec!["push S0", "query 1 @S0 -> 1", "apply a @S0 -> S1", "push S1", "query 2 @S1 -> 1", "apply b @S1 -> QED"],
        },
    ]
}

fn criterion_1() -> Result<String, Outcome> {
    let cases = hand_cases();
    ensure!(cases.len() >= 20, "only {} hand-traced environments", cases.len());
    let started = Instant::now();
    for case in &cases {
        let out = search(&case.spec, case.script.clone(), &case.cfg);
        let name = case.name;
        ensure!(out.status == case.status, "{name}: status {:?}, expected {:?}", out.status, case.status);
        ensure!(out.queries_used == case.queries, "{name}: {} queries, expected {}", out.queries_used, case.queries);
        let proof = out.proof_script();
        ensure!(proof == case.proof, "{name}: proof {proof:?}, expected {:?}", case.proof);
        let trace = out.trace.compact();
        ensure!(trace == case.trace, "{name}: trace\n{trace:#?}\nexpected\n{:#?}", case.trace);
        let mut expected_entries = 0;
        for (label, tactics) in &case.bad {
            let state = case.spec.state(label).unwrap();
            let got = out.failures.failed_tactics(&state);
            ensure!(&got == tactics, "{name}: Bad({label}) = {got:?}, expected {tactics:?}");
            expected_entries += tactics.len();
        }
        let distinct: usize = out.failures.iter().map(|(_, set)| set.len()).sum();
        ensure!(
            distinct <= expected_entries && (expected_entries == 0) == out.failures.is_empty(),
            "{name}: unexpected failure entries {:?}",
            out.failures
        );
    }
    let elapsed = started.elapsed();
    ensure!(elapsed < HAND_TRACE_BUDGET, "took {elapsed:?}");
    Ok(format!("{} environments match their hand traces in {elapsed:?}", cases.len()))
}

/// Counts every call that reaches the wrapped backend.
struct Counting<B> {
    inner: B,
    calls: Arc<Mutex<u32>>,
}

impl<B: SuggestionBackend> SuggestionBackend for Counting<B> {
    fn complete(&mut self, prompt: &PromptBundle) -> Result<String, BackendError> {
        *self.calls.lock().unwrap() += 1;
        self.inner.complete(prompt)
    }
}

fn criterion_2() -> Result<String, Outcome> {
    // A refill limit above the budget keeps the root alive until the budget ends.
    let spec = ToyEnvSpec::new("S0");
    let calls = Arc::new(Mutex::new(0));
    let mut backend = Counting {
        inner: ScriptedBackend::new(ScriptTable::new().with("S0", &[&resp(&["linarith"]), &resp(&["simp"])])),
        calls: calls.clone(),
    };
    let mut env = ToyEnv::new(spec).unwrap();
    let budget = cfg(60, 1_000, true);
    let out = feas_search(&problem(), &mut env, &mut backend, &budget).unwrap();
    ensure!(out.status == SearchStatus::ExhaustedQueries, "status {:?}", out.status);
    ensure!(out.queries_used == 60, "queries_used {}", out.queries_used);
    ensure!(*calls.lock().unwrap() == 60, "backend saw {} calls", calls.lock().unwrap());

    let slow = ToyEnvSpec::new("S0").with_delay(SLOW_APPLY);
    let mut env = ToyEnv::new(slow).unwrap();
    let mut backend = ScriptedBackend::new(ScriptTable::new().with("S0", &[&resp(&["a"]), &resp(&["b"]), &resp(&["c"])]));
    let timed = SearchConfig {
        timeout: SLOW_TIMEOUT,
        ..cfg(60, 1_000, true)
    };
    let started = Instant::now();
    let out = feas_search(&problem(), &mut env, &mut backend, &timed).unwrap();
    let wall = started.elapsed();
    let bound = SLOW_TIMEOUT + SLOW_APPLY + SCHEDULING_SLACK;
    ensure!(out.status == SearchStatus::TimedOut, "status {:?}", out.status);
    ensure!(wall <= bound, "ran {wall:?}, bound {bound:?}");
    ensure!(wall >= SLOW_TIMEOUT, "stopped early at {wall:?}");
    Ok(format!("60/60 queries then exhausted_queries; timed_out after {wall:?} (bound {bound:?})"))
}

/// A random finite environment with at least one cycle, and a script for it.
#[derive(Debug, Clone)]
struct RandomEnv {
    spec: ToyEnvSpec,
    script: ScriptTable,
    cfg: SearchConfig,
}

fn random_env() -> impl Strategy<Value = RandomEnv> {
    (2usize..7).prop_flat_map(|n| {
        let targets = proptest::collection::vec(proptest::collection::vec(0..n + 2, 3), n);
        let responses = proptest::collection::vec(
            proptest::collection::vec(proptest::collection::vec(0usize..4, 1..4), 1..3),
            n,
        );
        let closable = proptest::collection::vec(proptest::bool::weighted(0.15), n);
        (Just(n), targets, responses, closable, 1u32..4, 1u32..25, any::<bool>())
    })
    .prop_map(|(n, targets, responses, closable, retry, max_q, fallback)| {
        let label = |i: usize| format!("S{i}");
        let mut spec = ToyEnvSpec::new("S0");
        for (i, row) in targets.iter().enumerate() {
            for (t, &to) in row.iter().enumerate() {
                // indices n and n+1 stand for ERR and QED; QED only from the last tactic
                let target = match to {
                    x if x < n => label(x),
                    x if x == n => "ERR".to_string(),
                    _ if t == 2 => "QED".to_string(),
                    _ => label(0),
                };
                spec = spec.on(&label(i), &format!("t{t}"), &target);
            }
            if closable[i] {
                spec = spec.closable(&label(i));
            }
        }
        // guarantee a cycle back to the root
        spec = spec.on(&label(n - 1), "back", "S0");
        let mut script = ScriptTable::new();
        for (i, resps) in responses.iter().enumerate() {
            let texts: Vec<String> = resps
                .iter()
                .map(|tactics| {
                    let names: Vec<String> = tactics.iter().map(|&t| if t == 3 { "back".to_string() } else { format!("t{t}") }).collect();
                    resp(&names.iter().map(String::as_str).collect::<Vec<_>>())
                })
                .collect();
            script = script.with(label(i), &texts.iter().map(String::as_str).collect::<Vec<_>>());
        }
        RandomEnv {
            spec,
            script,
            cfg: cfg(max_q, retry, fallback),
        }
    })
}

/// Checks the search invariants on one outcome.
fn check_invariants(env: &RandomEnv, out: &SearchOutcome) -> Result<(), String> {
    for path in out.trace.paths() {
        let mut seen = std::collections::HashSet::new();
        for s in &path {
            if !seen.insert(s) {
                return Err(format!("state {s} repeated on path {path:?}"));
            }
        }
    }
    if out.trace.pushes() - out.trace.pops() != out.final_depth {
        return Err("pushes and pops do not balance".into());
    }
    if out.queries_used > env.cfg.max_queries {
        return Err(format!("{} queries over budget", out.queries_used));
    }
    let mut recorded = std::collections::HashSet::new();
    for e in &out.trace.events {
        match e {
            TraceEvent::FailureRecorded { state, tactic, .. } => {
                recorded.insert((state.clone(), tactic.clone()));
            }
            TraceEvent::BlockApplied { state, tactic, result, .. }
                if recorded.contains(&(state.clone(), tactic.clone())) && *result != feas::search::ApplyKind::KnownBad =>
            {
                return Err(format!("{tactic} re-applied at {state} after being recorded"));
            }
            _ => {}
        }
    }
    if out.is_proved() {
        let mut fresh = ToyEnv::new(env.spec.clone()).unwrap();
        if !replay_proof(&problem(), &mut fresh, &out.proof_script().unwrap()) {
            return Err("proof does not replay".into());
        }
    }
    Ok(())
}

fn criterion_3() -> Result<String, Outcome> {
    let mut runner = TestRunner::new_with_rng(
        Config {
            cases: RANDOM_ENVS,
            failure_persistence: None,
            ..Config::default()
        },
        TestRng::deterministic_rng(RngAlgorithm::ChaCha),
    );
    let proved = std::cell::Cell::new(0u32);
    runner
        .run(&random_env(), |env| {
            let out = search(&env.spec, env.script.clone(), &env.cfg);
            check_invariants(&env, &out).map_err(TestCaseError::fail)?;
            let again = search(&env.spec, env.script.clone(), &env.cfg);
            prop_assert_eq!(out.clone().without_timing(), again.without_timing());
            proved.set(proved.get() + u32::from(out.is_proved()));
            Ok(())
        })
        .map_err(|e| Outcome::Fail(e.to_string()))?;
    Ok(format!(
        "{RANDOM_ENVS} cyclic environments terminate loop-free ({} proved)",
        proved.get()
    ))
}

fn reference_body(name: &str) -> String {
    let text = std::fs::read_to_string(fixtures().join("reference_proofs").join(name)).unwrap();
    text[strip_proof_delimiters(&text)].to_string()
}

/// Tactics that stand alone under the segmentation rules, some with commas
/// and newlines nested inside brackets or begin/end.
fn tactic() -> impl Strategy<Value = String> {
    let leaf = prop_oneof![
        Just("intro x".to_string()),
        Just("simp".to_string()),
        Just("nlinarith [sq_nonneg (x - 1), sq_nonneg x]".to_string()),
        Just("rw [h_0 (1 / x), h_1 x hx] at h".to_string()),
        Just("have h : f (x, y) = ⟨a, b⟩ := rfl".to_string()),
        Just("exact ⦃a, b⦄".to_string()),
        Just("simp only [foo] at h ⊢".to_string()),
        Just("{ linarith,\n  ring }".to_string()),
        "[a-z]{1,6}".prop_filter("keywords", |w| !matches!(w.as_str(), "begin" | "end" | "by" | "from" | "calc" | "at" | "with" | "then" | "else" | "fun" | "assume" | "using")),
    ];
    leaf.prop_recursive(3, 16, 3, |inner| {
        prop_oneof![
            proptest::collection::vec(inner.clone(), 1..3).prop_map(|ts| format!("begin\n  {},\nend", ts.join(",\n  "))),
            proptest::collection::vec(inner.clone(), 1..3).prop_map(|ts| format!("{{ {} }}", ts.join(", "))),
            inner.prop_map(|t| format!("refine ⟨_, _⟩; ({t})")),
        ]
    })
}

fn criterion_4() -> Result<String, Outcome> {
    let feas_body = reference_body("feas_proof.lean");
    let blocks: Vec<String> = segment_blocks(&feas_body).iter().map(|b| b.text().to_string()).collect();
    let expected = [
        "intro x",
        "intro hx",
        "have h_2 : f (1 / x + 1) = f (1 / x) + 1 := h_0 (1 / x)",
        "have h_3 : f (1 / x) = f x / x ^ 2 := h_1 x hx",
        "rw h_3 at h_2",
        "rw add_comm at h_2",
        "nlinarith",
    ];
    ensure!(blocks == expected, "reference proof segments as {blocks:?}");
    let commented = segment_blocks("norm_num, -- first, then\nsimp\n");
    let commented: Vec<&str> = commented.iter().map(|b| b.text()).collect();
    ensure!(commented == ["norm_num", "-- first, then\nsimp"], "comment split as {commented:?}");
    let copra_body = reference_body("copra_proof.lean");
    for body in [&feas_body, &copra_body] {
        let joined = join_blocks(&segment_blocks(body));
        ensure!(normalize_script(&joined) == normalize_script(body), "reference round trip:\n{joined}");
    }

    let mut runner = TestRunner::new_with_rng(
        Config {
            cases: RANDOM_SCRIPTS,
            failure_persistence: None,
            ..Config::default()
        },
        TestRng::deterministic_rng(RngAlgorithm::ChaCha),
    );
    let seps = prop_oneof![Just(",\n"), Just(", "), Just(",\n\n  "), Just("\n")];
    runner
        .run(&proptest::collection::vec((tactic(), seps), 1..8), |parts| {
            let mut script = String::new();
            for (t, sep) in &parts {
                script.push_str(t);
                script.push_str(sep);
            }
            let blocks = segment_blocks(&script);
            let texts: Vec<String> = blocks.iter().map(|b| normalize_script(b.text())).collect();
            let want: Vec<String> = parts.iter().map(|(t, _)| normalize_script(t)).collect();
            prop_assert_eq!(&texts, &want, "script {:?}", script);
            prop_assert_eq!(normalize_script(&join_blocks(&blocks)), normalize_script(&script));
            Ok(())
        })
        .map_err(|e| Outcome::Fail(e.to_string()))?;
    Ok(format!("reference proof gives 7 blocks; both reference proofs and {RANDOM_SCRIPTS} random scripts round-trip"))
}

/// Records every prompt it sees.
struct Capture<B> {
    inner: B,
    prompts: Arc<Mutex<Vec<PromptBundle>>>,
}

impl<B: SuggestionBackend> SuggestionBackend for Capture<B> {
    fn complete(&mut self, prompt: &PromptBundle) -> Result<String, BackendError> {
        self.prompts.lock().unwrap().push(prompt.clone());
        self.inner.complete(prompt)
    }
}

fn criterion_5() -> Result<String, Outcome> {
    let spec = ToyEnvSpec::new("S0")
        .on("S0", "good", "S1")
        .fails_with("S1", "bad", "unknown identifier 'h_9'")
        .on("S1", "good2", "S2")
        .on("S1", "fin", "QED");

    let mut env = ToyEnv::new(spec.clone()).unwrap();
    let s0 = env.init_problem(&problem()).unwrap();
    let blocks: Vec<TacticBlock> = ["good", "bad", "good2"].iter().map(|t| TacticBlock::plain(*t).unwrap()).collect();
    let mut bad = FailureDict::new();
    let salvage = apply_with_fallback(&mut env, &s0, &blocks, &mut bad).map_err(|e| Outcome::Fail(e.to_string()))?;
    let prefix: Vec<&str> = salvage.prefix.iter().map(TacticBlock::text).collect();
    ensure!(prefix == ["good"], "prefix {prefix:?}");
    let s1 = spec.state("S1").unwrap();
    ensure!(bad.failed_tactics(&s1) == ["bad"], "Bad(S1) = {:?}", bad.failed_tactics(&s1));

    let prompts = Arc::new(Mutex::new(Vec::new()));
    let mut backend = Capture {
        inner: ScriptedBackend::new(
            ScriptTable::new()
                .with("S0", &[&resp(&["good", "bad", "good2"])])
                .with("S1", &[&resp(&["fin"])]),
        ),
        prompts: prompts.clone(),
    };
    let mut env = ToyEnv::new(spec.clone()).unwrap();
    let out = feas_search(&problem(), &mut env, &mut backend, &SearchConfig::default()).unwrap();
    ensure!(out.proof_script() == Some(vec!["good", "fin"]), "proof {:?}", out.proof_script());
    ensure!(out.failures.failed_tactics(&s1) == ["bad"], "search Bad(S1) = {:?}", out.failures.failed_tactics(&s1));
    ensure!(
        !out.trace.compact().iter().any(|l| l.starts_with("apply good2")),
        "good2 was applied after the error"
    );
    let prompts = prompts.lock().unwrap();
    let second = prompts.get(1).ok_or(Outcome::Fail("no second prompt".into()))?;
    ensure!(second.state_id.as_str() == "S1", "second prompt was for {}", second.state_id);
    ensure!(
        second.user_text.lines().any(|l| l == "- bad"),
        "second prompt does not list `bad`:\n{}",
        second.user_text
    );
    ensure!(second.user_text.contains("unknown identifier 'h_9'"), "second prompt lacks the prover error");
    Ok("prefix [good]; Bad(S1) = {bad}; the next prompt at S1 lists it".into())
}

fn criterion_6() -> Result<String, Outcome> {
    let spec = ToyEnvSpec::new("S0").on("S0", "a", "S1").on("S1", "b", "S2").closable("S2");
    let out = search(&spec, ScriptTable::new().with("S0", &[&resp(&["a", "b"])]), &SearchConfig::default());
    let proof = out.proof.clone().unwrap_or_default();
    ensure!(out.is_proved(), "status {:?}", out.status);
    ensure!(
        proof.last().map(TacticBlock::origin) == Some(BlockOrigin::AutoFallback),
        "last block is not from the fallback: {proof:?}"
    );
    ensure!(
        proof.iter().filter(|b| b.origin() == BlockOrigin::AutoFallback).count() == 1,
        "more than one fallback block"
    );

    // A failed fallback leaves no mark on the outcome or the state.
    let spec = ToyEnvSpec::new("S0").on("S0", "a", "S1").on("S1", "b", "QED");
    let out = search(
        &spec,
        ScriptTable::new().with("S0", &[&resp(&["a"])]).with("S1", &[&resp(&["b"])]),
        &SearchConfig::default(),
    );
    ensure!(out.proof_script() == Some(vec!["a", "b"]), "proof {:?}", out.proof_script());
    ensure!(out.failures.is_empty(), "failed fallback recorded: {:?}", out.failures);
    ensure!(
        out.trace.compact().contains(&"fallback @S1 -> omitted".to_string()),
        "fallback attempt missing from the trace"
    );
    let mut env = ToyEnv::new(spec).unwrap();
    let s0 = env.init_problem(&problem()).unwrap();
    let s1 = env.apply(&s0, &TacticBlock::plain("a").unwrap()).unwrap().state;
    let before = s1.clone();
    ensure!(env.attempt_fallback(&s1).is_none(), "fallback should fail at S1");
    ensure!(s1 == before, "state changed");
    ensure!(
        env.apply(&s1, &TacticBlock::plain("b").unwrap()).unwrap().state.is_qed(),
        "state unusable after a failed fallback"
    );
    Ok("auto-closable states end in one fallback block; failed attempts leave no trace in outcomes".into())
}

/// Independent oracle: pass@1 is solved pairs over all pairs; pass@2 with two
/// runs is problems solved in either run over problems.
fn oracle(runs: &[Vec<bool>]) -> (f64, Option<f64>) {
    let pairs: usize = runs.iter().map(Vec::len).sum();
    let solved: usize = runs.iter().flatten().filter(|&&s| s).count();
    let either = runs.iter().filter(|r| r.iter().take(2).any(|&s| s)).count();
    let p2 = runs.iter().all(|r| r.len() == 2).then(|| either as f64 / runs.len() as f64);
    (solved as f64 / pairs as f64, p2)
}

fn criterion_7() -> Result<String, Outcome> {
    // 18 problems: the first 16 solved in run 1; problems 0..14 and 16 in run 2.
    let table1: Vec<Vec<bool>> = (0..18).map(|i| vec![i < 16, i < 14 || i == 16]).collect();
    let (o1, o2) = oracle(&table1);
    ensure!((o1 - 0.8611).abs() < METRIC_TOLERANCE, "oracle pass@1 {o1}");
    ensure!((o2.unwrap() - 0.9444).abs() < METRIC_TOLERANCE, "oracle pass@2 {o2:?}");
    let p1 = compute_pass_at_k(&table1, 1).unwrap();
    let p2 = compute_pass_at_k(&table1, 2).unwrap();
    ensure!((p1 - 0.8611).abs() < METRIC_TOLERANCE, "pass@1 {p1}");
    ensure!((p2 - 0.9444).abs() < METRIC_TOLERANCE, "pass@2 {p2}");

    let table2: Vec<Vec<bool>> = (0..15).map(|i| vec![i == 0]).collect();
    let q1 = compute_pass_at_k(&table2, 1).unwrap();
    ensure!((q1 - 0.0667).abs() < METRIC_TOLERANCE, "1-of-15 pass@1 {q1}");
    ensure!(compute_pass_at_k(&table2, 2).is_err(), "pass@2 accepted with one run");

    let mut runner = TestRunner::new_with_rng(
        Config {
            cases: RANDOM_MATRICES,
            failure_persistence: None,
            ..Config::default()
        },
        TestRng::deterministic_rng(RngAlgorithm::ChaCha),
    );
    runner
        .run(&(2usize..6).prop_flat_map(|runs| proptest::collection::vec(proptest::collection::vec(any::<bool>(), runs..=runs), 1..40)), |m| {
            let p1 = compute_pass_at_k(&m, 1).unwrap();
            let p2 = compute_pass_at_k(&m, 2).unwrap();
            prop_assert!(p2 + MONOTONE_EPS >= p1, "pass@2 {} < pass@1 {}", p2, p1);
            prop_assert!((0.0..=1.0).contains(&p1) && (0.0..=1.0).contains(&p2));
            let (o1, o2) = oracle(&m);
            prop_assert!((p1 - o1).abs() < 1e-12);
            if let Some(o2) = o2 {
                prop_assert!((p2 - o2).abs() < 1e-12);
            }
            Ok(())
        })
        .map_err(|e| Outcome::Fail(e.to_string()))?;
    Ok(format!("0.8611/0.9444 and 0.0667 reproduced; pass@2 >= pass@1 on {RANDOM_MATRICES} random matrices"))
}

fn bench_config(tier: TierChoice, backend: BackendKind, workers: usize, out: &Path) -> RunConfig {
    let mut cfg = RunConfig::new(AgentKind::Feas, tier, BackendConfig::new(backend), EnvConfig::toy());
    cfg.workers = workers;
    cfg.out = Some(out.to_path_buf());
    cfg.record_timing = false;
    cfg
}

fn criterion_8() -> Result<String, Outcome> {
    let suite = fixtures().join("toy_suite");
    let dir = tempfile::tempdir().unwrap();
    let mut reports = Vec::new();
    for tier in [TierChoice::Simple, TierChoice::Intermediate] {
        let mut rendered = Vec::new();
        for (i, workers) in [1usize, 4].into_iter().enumerate() {
            let out = dir.path().join(format!("{}-{i}", tier.name()));
            let cfg = bench_config(tier, BackendKind::Scripted { script: None }, workers, &out);
            let report = run_benchmark(&suite, &cfg).map_err(|e| Outcome::Fail(e.to_string()))?;
            rendered.push(emit_report(&report, ReportFormat::Structured));
        }
        ensure!(rendered[0] == rendered[1], "{tier} reports differ between runs");
        let on_disk = std::fs::read_to_string(dir.path().join(format!("{}-0", tier.name())).join("report.json")).unwrap();
        ensure!(on_disk == rendered[0], "report.json differs from the emitted report");

        // replay the recorded transcripts
        let transcripts = dir.path().join(format!("{}-0", tier.name())).join("transcripts");
        let cfg = bench_config(tier, BackendKind::Replay { transcript: transcripts }, 2, &dir.path().join(format!("{}-replay", tier.name())));
        let replayed = run_benchmark(&suite, &cfg).map_err(|e| Outcome::Fail(e.to_string()))?;
        ensure!(emit_report(&replayed, ReportFormat::Structured) == rendered[0], "{tier} replay report differs");
        reports.push(rendered.remove(0));
    }

    // outcome-level replay on the worked session
    let lean = fixtures().join("toy_suite/intermediate/intermediate_funeq_2.lean");
    let problem = Problem::load_file(&lean).unwrap();
    let spec = ToyEnvSpec::load(&lean.with_extension("toy.toml")).unwrap();
    let table = ScriptTable::load(&lean.with_extension("script.toml"), 1).unwrap();
    let transcript = dir.path().join("session.jsonl");
    let mut recorder = RecordingBackend::create(ScriptedBackend::new(table), &transcript).unwrap();
    let first = feas_search(&problem, &mut ToyEnv::new(spec.clone()).unwrap(), &mut recorder, &SearchConfig::default()).unwrap();
    drop(recorder);
    let mut replay = ReplayBackend::open(&transcript).unwrap();
    let second = feas_search(&problem, &mut ToyEnv::new(spec).unwrap(), &mut replay, &SearchConfig::default()).unwrap();
    ensure!(first.clone().without_timing() == second.without_timing(), "replayed outcome differs");
    Ok(format!(
        "scripted bench reports byte-identical across runs and worker counts ({} tiers); transcripts replay to identical outcomes",
        reports.len()
    ))
}

fn criterion_9() -> Result<String, Outcome> {
    let Some(root) = std::env::var_os("FUNEQ_ROOT") else {
        return Err(Outcome::Blocked("FUNEQ_ROOT is not set; the published dataset checkout is not available here".into()));
    };
    let root = PathBuf::from(root);
    let problems = load_dataset(&root, TierSelect::All).map_err(|e| Outcome::Fail(e.to_string()))?;
    let manifest = DatasetManifest::build(&root, &problems);
    let (s, i) = (manifest.count(Tier::Simple), manifest.count(Tier::Intermediate));
    ensure!(s == 18 && i == 15, "found {s} simple and {i} intermediate problems");
    Ok(format!("18 simple, 15 intermediate, {} hard", manifest.count(Tier::Hard)))
}

fn criterion_10() -> Result<String, Outcome> {
    let lean = fixtures().join("toy_suite/intermediate/intermediate_funeq_2.lean");
    let problem = Problem::load_file(&lean).unwrap();
    let table = ScriptTable::load(&lean.with_extension("script.toml"), 1).unwrap();
    let response = table.responses["T0"].clone();
    let expected = [
        "intro x",
        "intro hx",
        "have h_2 : f (1 / x + 1) = f (1 / x) + 1 := h_0 (1 / x)",
        "have h_3 : f (1 / x) = f x / x ^ 2 := h_1 x hx",
        "rw h_3 at h_2",
        "rw add_comm at h_2",
        "nlinarith",
    ];

    // The same session over the process protocol, against the toy prover.
    let mut proxy = ExternalProver::spawn(
        env!("CARGO_BIN_EXE_feas"),
        &["serve-toy".to_string(), lean.with_extension("toy.toml").display().to_string()],
    )
    .unwrap();
    let mut backend = ScriptedBackend::new(table);
    let out = feas_search(&problem, &mut proxy, &mut backend, &SearchConfig::default()).unwrap();
    ensure!(out.proof_script() == Some(expected.to_vec()), "proxy session proof {:?}", out.proof_script());

    let Some(cmd) = std::env::var_os("FEAS_PROVER") else {
        return Err(Outcome::Skip(
            "FEAS_PROVER is not set; the session reproduces over the process protocol with the toy prover".into(),
        ));
    };
    let cmd = cmd.to_string_lossy().into_owned();
    let mut words = cmd.split_whitespace().map(str::to_string);
    let program = words.next().unwrap_or_default();
    let args: Vec<String> = words.collect();
    let mut live = ExternalProver::spawn(&program, &args).map_err(|e| Outcome::Fail(e.to_string()))?;
    let mut backend = ScriptedBackend::new(ScriptTable::new().with("*", &response.iter().map(String::as_str).collect::<Vec<_>>()));
    let out = feas_search(&problem, &mut live, &mut backend, &SearchConfig::default()).map_err(|e| Outcome::Fail(e.to_string()))?;
    ensure!(out.proof_script() == Some(expected.to_vec()), "live proof {:?}", out.proof_script());
    let mut fresh = ExternalProver::spawn(&program, &args).map_err(|e| Outcome::Fail(e.to_string()))?;
    ensure!(replay_proof(&problem, &mut fresh, &expected), "replay_proof rejected the live proof");
    Ok("live prover reproduces the worked proof and replay confirms it".into())
}
