//! Benchmark runs: agents over dataset tiers, pass@k aggregation and reports.
//!
//! Each (problem, run) pair gets a fresh environment, backend and failure
//! dictionary, so results do not depend on scheduling. When an output
//! directory is set, every run leaves behind
//!
//! - `traces/<tier>/<stem>-run<k>.json`: the search trace,
//! - `transcripts/<tier>/<stem>-run<k>.jsonl`: every backend response,
//! - `proofs/<tier>/<stem>-run<k>.lean`: the proof script, if one was found,
//!
//! and the run as a whole writes `report.json`. A transcripts directory can be
//! fed back with the replay backend.

use std::fmt;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Duration;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{load_dataset, select_a1_subset, DatasetError, Problem, Tier, TierSelect};
use crate::env::{ExternalProver, ProverEnvironment, ToyEnv, ToyEnvSpec, DEFAULT_APPLY_TIMEOUT, DEFAULT_FALLBACK_TACTIC};
use crate::search::{fallback_steps, feas_search, SearchConfig, SearchOutcome, SearchStatus};
use crate::suggest::{
    AgentMode, BackendConfig, BackendError, BackendKind, RecordingBackend, RemoteBackend, ReplayBackend, ScriptTable,
    ScriptedBackend, SuggestionBackend,
};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("{what}: {source}")]
    Io {
        what: String,
        #[source]
        source: std::io::Error,
    },
}

impl HarnessError {
    fn io(what: impl Into<String>, source: std::io::Error) -> Self {
        HarnessError::Io { what: what.into(), source }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentKind {
    FewShot,
    Copra,
    Feas,
    FeasHeuristics,
}

impl AgentKind {
    pub const ALL: [AgentKind; 4] = [AgentKind::FewShot, AgentKind::Copra, AgentKind::Feas, AgentKind::FeasHeuristics];

    pub fn name(self) -> &'static str {
        match self {
            AgentKind::FewShot => "few-shot",
            AgentKind::Copra => "copra",
            AgentKind::Feas => "feas",
            AgentKind::FeasHeuristics => "feas-heuristics",
        }
    }

    /// The search settings this agent runs under, starting from `base`.
    ///
    /// Few-shot gets a single query for a whole proof. The COPRA baseline asks
    /// for one tactic at a time. Neither uses the fallback tactic.
    pub fn search_config(self, base: &SearchConfig) -> SearchConfig {
        let mut cfg = base.clone();
        match self {
            AgentKind::FewShot => {
                cfg.mode = AgentMode::FewShot;
                cfg.max_queries = 1;
                cfg.fallback_enabled = false;
                cfg.heuristics = false;
            }
            AgentKind::Copra => {
                cfg.mode = AgentMode::Copra;
                cfg.fallback_enabled = false;
                cfg.heuristics = false;
            }
            AgentKind::Feas => {
                cfg.mode = AgentMode::Feas;
                cfg.fallback_enabled = true;
                cfg.heuristics = false;
            }
            AgentKind::FeasHeuristics => {
                cfg.mode = AgentMode::Feas;
                cfg.fallback_enabled = true;
                cfg.heuristics = true;
            }
        }
        cfg
    }
}

impl fmt::Display for AgentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AgentKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        let s = s.replace('_', "-");
        AgentKind::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| format!("unknown agent `{s}`"))
    }
}

/// A dataset tier, or the A1 subset of the hard tier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TierChoice {
    Simple,
    Intermediate,
    Hard,
    A1,
}

impl TierChoice {
    pub const ALL: [TierChoice; 4] = [TierChoice::Simple, TierChoice::Intermediate, TierChoice::Hard, TierChoice::A1];

    pub fn name(self) -> &'static str {
        match self {
            TierChoice::Simple => "simple",
            TierChoice::Intermediate => "intermediate",
            TierChoice::Hard => "hard",
            TierChoice::A1 => "a1",
        }
    }

    pub fn tier(self) -> Tier {
        match self {
            TierChoice::Simple => Tier::Simple,
            TierChoice::Intermediate => Tier::Intermediate,
            TierChoice::Hard | TierChoice::A1 => Tier::Hard,
        }
    }

    /// Two runs on the simple and intermediate tiers, one on the hard tier.
    pub fn default_runs(self) -> u32 {
        match self {
            TierChoice::Simple | TierChoice::Intermediate => 2,
            TierChoice::Hard | TierChoice::A1 => 1,
        }
    }
}

impl fmt::Display for TierChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TierChoice {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        TierChoice::ALL
            .into_iter()
            .find(|t| t.name() == s.to_ascii_lowercase())
            .ok_or_else(|| format!("unknown tier `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EnvKind {
    /// `<stem>.toy.toml` next to each problem file.
    Toy,
    /// A prover process speaking the line protocol, one per search.
    External { program: String, args: Vec<String> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvConfig {
    pub kind: EnvKind,
    #[serde(with = "millis")]
    pub apply_timeout: Duration,
    pub fallback_tactic: String,
}

impl EnvConfig {
    pub fn new(kind: EnvKind) -> Self {
        EnvConfig {
            kind,
            apply_timeout: DEFAULT_APPLY_TIMEOUT,
            fallback_tactic: DEFAULT_FALLBACK_TACTIC.to_string(),
        }
    }

    pub fn toy() -> Self {
        Self::new(EnvKind::Toy)
    }

    /// A fresh environment for `problem`.
    pub fn open(&self, problem: &Problem) -> Result<Box<dyn ProverEnvironment>, String> {
        match &self.kind {
            EnvKind::Toy => {
                let path = sibling(&problem.source_path, "toy.toml");
                let spec = ToyEnvSpec::load(&path).map_err(|e| e.to_string())?;
                let env = ToyEnv::new(spec)
                    .map_err(|e| e.to_string())?
                    .with_apply_timeout(self.apply_timeout)
                    .with_fallback_tactic(&self.fallback_tactic);
                Ok(Box::new(env))
            }
            EnvKind::External { program, args } => {
                let env = ExternalProver::spawn(program, args)
                    .map_err(|e| e.to_string())?
                    .with_apply_timeout(self.apply_timeout)
                    .with_fallback_tactic(&self.fallback_tactic);
                Ok(Box::new(env))
            }
        }
    }
}

mod millis {
    use std::time::Duration;

    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u64(d.as_millis() as u64)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        Ok(Duration::from_millis(u64::deserialize(d)?))
    }
}

/// `dir/stem.lean` -> `dir/stem.<ext>`.
pub fn sibling(problem_path: &Path, ext: &str) -> PathBuf {
    problem_path.with_extension(ext)
}

fn stem(problem: &Problem) -> String {
    problem
        .source_path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| problem.name.clone())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub agent: AgentKind,
    pub tier: TierChoice,
    pub runs_per_problem: u32,
    /// Applied before the agent's own settings.
    pub search: SearchConfig,
    pub backend: BackendConfig,
    pub env: EnvConfig,
    pub workers: usize,
    pub out: Option<PathBuf>,
    /// When false, wall times are reported as zero so reports are
    /// byte-for-byte reproducible.
    pub record_timing: bool,
}

impl RunConfig {
    pub fn new(agent: AgentKind, tier: TierChoice, backend: BackendConfig, env: EnvConfig) -> Self {
        RunConfig {
            agent,
            tier,
            runs_per_problem: tier.default_runs(),
            search: SearchConfig::default(),
            backend,
            env,
            workers: 1,
            out: None,
            record_timing: true,
        }
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.runs_per_problem == 0 {
            return Err(HarnessError::InvalidArgument("runs must be at least 1".into()));
        }
        if self.workers == 0 {
            return Err(HarnessError::InvalidArgument("workers must be at least 1".into()));
        }
        self.agent
            .search_config(&self.search)
            .validate()
            .map_err(|e| HarnessError::InvalidArgument(e.to_string()))
    }

    fn backend_for(&self, problem: &Problem, run: u32) -> Result<Box<dyn SuggestionBackend>, BackendError> {
        let inner: Box<dyn SuggestionBackend> = match &self.backend.kind {
            BackendKind::Remote(settings) => Box::new(RemoteBackend::new(settings.clone(), self.backend.temperature)),
            BackendKind::Replay { transcript } => {
                let path = if transcript.is_dir() {
                    let file = format!("{}-run{run}.jsonl", stem(problem));
                    let tiered = transcript.join(problem.tier.dir_name()).join(&file);
                    if tiered.exists() {
                        tiered
                    } else {
                        transcript.join(file)
                    }
                } else {
                    transcript.clone()
                };
                Box::new(ReplayBackend::open(&path)?)
            }
            BackendKind::Scripted { script } => {
                let path = script.clone().unwrap_or_else(|| sibling(&problem.source_path, "script.toml"));
                Box::new(ScriptedBackend::new(ScriptTable::load(&path, run)?))
            }
        };
        match &self.out {
            Some(out) => Ok(Box::new(RecordingBackend::create(inner, &artifact(out, "transcripts", problem, run, "jsonl"))?)),
            None => Ok(inner),
        }
    }
}

fn artifact(out: &Path, kind: &str, problem: &Problem, run: u32, ext: &str) -> PathBuf {
    out.join(kind)
        .join(problem.tier.dir_name())
        .join(format!("{}-run{run}.{ext}", stem(problem)))
}

/// Summary of one search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub run: u32,
    /// `None` when the run could not start or the prover failed.
    pub status: Option<SearchStatus>,
    pub proved: bool,
    pub queries_used: u32,
    pub wall_time_ms: u64,
    pub proof: Option<Vec<String>>,
    pub fallback_steps: usize,
    pub error: Option<String>,
}

impl RunSummary {
    pub fn from_outcome(run: u32, outcome: &SearchOutcome) -> Self {
        RunSummary {
            run,
            status: Some(outcome.status),
            proved: outcome.is_proved(),
            queries_used: outcome.queries_used,
            wall_time_ms: outcome.wall_time_ms,
            proof: outcome.proof_script().map(|p| p.into_iter().map(str::to_string).collect()),
            fallback_steps: outcome.proof.as_deref().map_or(0, fallback_steps),
            error: outcome.error.clone(),
        }
    }

    fn failed(run: u32, error: String) -> Self {
        RunSummary {
            run,
            status: None,
            proved: false,
            queries_used: 0,
            wall_time_ms: 0,
            proof: None,
            fallback_steps: 0,
            error: Some(error),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemReport {
    pub name: String,
    pub tier: Tier,
    pub runs: Vec<RunSummary>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Totals {
    pub problems: usize,
    pub searches: usize,
    pub proved_searches: usize,
    pub queries: u64,
    pub wall_time_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub agent: AgentKind,
    pub tier: TierChoice,
    pub runs_per_problem: u32,
    pub problems: Vec<ProblemReport>,
    pub pass1: f64,
    /// Absent with fewer than two runs per problem.
    pub pass2: Option<f64>,
    pub totals: Totals,
}

impl RunReport {
    /// Aggregates per-problem results.
    pub fn new(agent: AgentKind, tier: TierChoice, runs_per_problem: u32, problems: Vec<ProblemReport>) -> Result<Self, HarnessError> {
        let matrix = solved_matrix(&problems);
        let pass1 = compute_pass_at_k(&matrix, 1)?;
        let pass2 = if runs_per_problem >= 2 { Some(compute_pass_at_k(&matrix, 2)?) } else { None };
        let mut totals = Totals {
            problems: problems.len(),
            ..Totals::default()
        };
        for r in problems.iter().flat_map(|p| &p.runs) {
            totals.searches += 1;
            totals.proved_searches += usize::from(r.proved);
            totals.queries += u64::from(r.queries_used);
            totals.wall_time_ms += r.wall_time_ms;
        }
        Ok(RunReport {
            agent,
            tier,
            runs_per_problem,
            problems,
            pass1,
            pass2,
            totals,
        })
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

pub fn solved_matrix(problems: &[ProblemReport]) -> Vec<Vec<bool>> {
    problems.iter().map(|p| p.runs.iter().map(|r| r.proved).collect()).collect()
}

fn choose(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (k - i) as f64)
}

/// pass@k over a problems-by-runs matrix of solved flags.
///
/// Per problem with `n` runs of which `c` succeeded this is
/// `1 - C(n-c, k) / C(n, k)`, the chance that `k` runs drawn from the `n`
/// include a success; the result is the mean over problems. For `k = 1` this
/// is the mean over all (problem, run) pairs, and with two runs `pass@2` is
/// the fraction of problems solved in either run.
pub fn compute_pass_at_k(outcomes: &[Vec<bool>], k: usize) -> Result<f64, HarnessError> {
    if k == 0 {
        return Err(HarnessError::InvalidArgument("k must be at least 1".into()));
    }
    if outcomes.is_empty() {
        log::warn!("pass@{k} over zero problems is reported as 0");
        return Ok(0.0);
    }
    if let Some(short) = outcomes.iter().map(Vec::len).min().filter(|&n| n < k) {
        return Err(HarnessError::InvalidArgument(format!("pass@{k} needs {k} runs per problem, found {short}")));
    }
    let total: f64 = outcomes
        .iter()
        .map(|runs| {
            let n = runs.len();
            let c = runs.iter().filter(|&&s| s).count();
            1.0 - choose(n - c, k) / choose(n, k)
        })
        .sum();
    Ok(total / outcomes.len() as f64)
}

/// A fraction as a percentage with two decimals, rounding half up.
pub fn format_percent(fraction: f64) -> String {
    // The epsilon absorbs binary error in values like 0.86115.
    let hundredths = (fraction * 10_000.0 + 0.5 + 1e-9).floor();
    format!("{:.2}%", hundredths / 100.0)
}

/// The `pass@1% (pass@2%)` cell.
pub fn format_cell(report: &RunReport) -> String {
    match report.pass2 {
        Some(p2) => format!("{} ({})", format_percent(report.pass1), format_percent(p2)),
        None => format_percent(report.pass1),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportFormat {
    Table,
    Structured,
}

impl FromStr for ReportFormat {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "table" => Ok(ReportFormat::Table),
            "structured" => Ok(ReportFormat::Structured),
            other => Err(format!("unknown format `{other}`")),
        }
    }
}

pub const TABLE_HEADER: &str = "agent            tier          problems  runs  pass@1 (pass@2)";

pub fn emit_report(report: &RunReport, format: ReportFormat) -> String {
    match format {
        ReportFormat::Structured => {
            let mut s = serde_json::to_string_pretty(report).expect("reports serialize");
            s.push('\n');
            s
        }
        ReportFormat::Table => {
            let mut s = String::new();
            s.push_str(TABLE_HEADER);
            s.push('\n');
            if !report.problems.is_empty() {
                let _ = writeln!(
                    s,
                    "{:<16} {:<13} {:>8}  {:>4}  {}",
                    report.agent.name(),
                    report.tier.name(),
                    report.problems.len(),
                    report.runs_per_problem,
                    format_cell(report)
                );
            }
            s
        }
    }
}

/// Loads the problems `cfg.tier` names under `root`.
pub fn load_problems(root: &Path, tier: TierChoice) -> Result<Vec<Problem>, HarnessError> {
    let problems = load_dataset(root, TierSelect::One(tier.tier()))?;
    Ok(match tier {
        TierChoice::A1 => select_a1_subset(&problems),
        _ => problems,
    })
}

pub fn run_benchmark(root: &Path, cfg: &RunConfig) -> Result<RunReport, HarnessError> {
    cfg.validate()?;
    let problems = load_problems(root, cfg.tier)?;
    run_problems(&problems, cfg)
}

/// Runs `cfg.runs_per_problem` independent searches on each problem.
pub fn run_problems(problems: &[Problem], cfg: &RunConfig) -> Result<RunReport, HarnessError> {
    cfg.validate()?;
    let jobs: Vec<(usize, u32)> = (0..problems.len())
        .flat_map(|i| (1..=cfg.runs_per_problem).map(move |r| (i, r)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| HarnessError::InvalidArgument(format!("worker pool: {e}")))?;
    let results: Vec<RunSummary> = pool.install(|| jobs.par_iter().map(|&(i, run)| run_one(&problems[i], run, cfg)).collect());

    let mut reports: Vec<ProblemReport> = problems
        .iter()
        .map(|p| ProblemReport {
            name: p.name.clone(),
            tier: p.tier,
            runs: Vec::new(),
        })
        .collect();
    for (&(i, _), summary) in jobs.iter().zip(results) {
        reports[i].runs.push(summary);
    }
    let report = RunReport::new(cfg.agent, cfg.tier, cfg.runs_per_problem, reports)?;
    if let Some(out) = &cfg.out {
        let path = out.join("report.json");
        write_file(&path, &emit_report(&report, ReportFormat::Structured))?;
    }
    Ok(report)
}

fn write_file(path: &Path, text: &str) -> Result<(), HarnessError> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(format!("creating {}", dir.display()), e))?;
    }
    std::fs::write(path, text).map_err(|e| HarnessError::io(format!("writing {}", path.display()), e))
}

fn run_one(problem: &Problem, run: u32, cfg: &RunConfig) -> RunSummary {
    let search_cfg = cfg.agent.search_config(&cfg.search);
    let mut env = match cfg.env.open(problem) {
        Ok(env) => env,
        Err(e) => return RunSummary::failed(run, format!("environment: {e}")),
    };
    let mut backend = match cfg.backend_for(problem, run) {
        Ok(b) => b,
        Err(e) => return RunSummary::failed(run, format!("backend: {e}")),
    };
    log::info!("{} run {run}: searching", problem.name);
    let outcome = match feas_search(problem, env.as_mut(), backend.as_mut(), &search_cfg) {
        Ok(o) => o,
        Err(e) => return RunSummary::failed(run, format!("search: {e}")),
    };
    let outcome = if cfg.record_timing { outcome } else { outcome.without_timing() };
    log::info!("{} run {run}: {} after {} queries", problem.name, outcome.status.name(), outcome.queries_used);

    if let Some(out) = &cfg.out {
        let trace = serde_json::to_string_pretty(&outcome.trace).expect("traces serialize");
        if let Err(e) = write_file(&artifact(out, "traces", problem, run, "json"), &(trace + "\n")) {
            log::warn!("{e}");
        }
        if let Some(script) = outcome.proof_script() {
            let text = script.join(",\n") + "\n";
            if let Err(e) = write_file(&artifact(out, "proofs", problem, run, "lean"), &text) {
                log::warn!("{e}");
            }
        }
    }
    RunSummary::from_outcome(run, &outcome)
}
