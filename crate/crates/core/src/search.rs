//! Backtracking depth-first proof search.
//!
//! The stack holds the current path of open states. Each frame owns a queue
//! of blocks left over from the last response. An empty queue triggers a
//! fresh query; an erring or looping block is recorded as bad at its state
//! and drops the rest of the queue; any other result is pushed and inherits
//! the remaining queue. A frame that has been refilled `retry_limit` times
//! without progress is popped.
//!
//! After each response's blocks are used up (or one fails), the fallback
//! tactic is tried once at the top state. If it closes the goal the search
//! ends; if it makes progress the new state is pushed; if it fails nothing
//! changes.

use std::collections::VecDeque;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::Problem;
use crate::env::{EnvError, ProverEnvironment};
use crate::state::{canonical_form, normalize_whitespace, BlockOrigin, CanonicalKey, FailureDict, ProofState, SearchStack, StateError, StateId, StateKind, TacticBlock};
use crate::suggest::prompt::{default_heuristics, promptify_with, HeuristicEntry};
use crate::suggest::{parse_response, query, AgentMode, PromptError, QueryCounter, SuggestionBackend};

pub const DEFAULT_MAX_QUERIES: u32 = 60;
pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(720);
pub const DEFAULT_RETRY_LIMIT: u32 = 5;

/// Prover feedback recorded when a block leads back to a state on the stack.
pub const LOOP_MESSAGE: &str = "tactic led back to an earlier state of this proof";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    pub max_queries: u32,
    #[serde(with = "duration_secs")]
    pub timeout: Duration,
    /// Refills allowed at one state before backtracking.
    pub retry_limit: u32,
    pub fallback_enabled: bool,
    pub mode: AgentMode,
    pub heuristics: bool,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            max_queries: DEFAULT_MAX_QUERIES,
            timeout: DEFAULT_TIMEOUT,
            retry_limit: DEFAULT_RETRY_LIMIT,
            fallback_enabled: true,
            mode: AgentMode::Feas,
            heuristics: false,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<(), SearchError> {
        if self.max_queries == 0 {
            return Err(SearchError::InvalidConfig("max_queries must be at least 1".into()));
        }
        if self.timeout.is_zero() {
            return Err(SearchError::InvalidConfig("timeout must be positive".into()));
        }
        if self.retry_limit == 0 {
            return Err(SearchError::InvalidConfig("retry_limit must be at least 1".into()));
        }
        Ok(())
    }
}

mod duration_secs {
    use std::time::Duration;

    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(d.as_secs_f64())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        let secs = f64::deserialize(d)?;
        Duration::try_from_secs_f64(secs).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Error)]
pub enum SearchError {
    #[error("invalid search configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    State(#[from] StateError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SearchStatus {
    Proved,
    ExhaustedQueries,
    TimedOut,
    RetryLimit,
    BackendFailed,
}

impl SearchStatus {
    pub fn name(self) -> &'static str {
        match self {
            SearchStatus::Proved => "proved",
            SearchStatus::ExhaustedQueries => "exhausted_queries",
            SearchStatus::TimedOut => "timed_out",
            SearchStatus::RetryLimit => "retry_limit",
            SearchStatus::BackendFailed => "backend_failed",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ApplyKind {
    Progress,
    Error,
    Loop,
    Qed,
    /// Already in the failure dictionary for this state; not sent to the prover.
    KnownBad,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FallbackResult {
    Qed,
    Progress,
    Omitted,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum TraceEvent {
    Pushed { state: String, depth: usize },
    QueryIssued { n: u32, state: String, blocks: usize },
    BlockApplied { state: String, tactic: String, result: ApplyKind, next: Option<String> },
    FailureRecorded { state: String, key: CanonicalKey, tactic: String },
    Backtracked { state: String, depth: usize },
    FallbackAttempted { state: String, result: FallbackResult, next: Option<String> },
}

impl TraceEvent {
    /// One-line form used in hand-written expected traces.
    pub fn compact(&self) -> String {
        let norm = |t: &str| normalize_whitespace(t);
        match self {
            TraceEvent::Pushed { state, .. } => format!("push {state}"),
            TraceEvent::QueryIssued { n, state, blocks } => format!("query {n} @{state} -> {blocks}"),
            TraceEvent::BlockApplied { state, tactic, result, next } => match (result, norm(tactic)) {
                (ApplyKind::Progress, tactic) => format!("apply {tactic} @{state} -> {}", next.as_deref().unwrap_or("?")),
                (ApplyKind::Error, tactic) => format!("apply {tactic} @{state} -> ERR"),
                (ApplyKind::Loop, tactic) => format!("apply {tactic} @{state} -> LOOP {}", next.as_deref().unwrap_or("?")),
                (ApplyKind::Qed, tactic) => format!("apply {tactic} @{state} -> QED"),
                (ApplyKind::KnownBad, tactic) => format!("skip {tactic} @{state}"),
            },
            TraceEvent::FailureRecorded { state, tactic: t, .. } => format!("bad {state} += {}", norm(t)),
            TraceEvent::Backtracked { state, .. } => format!("pop {state}"),
            TraceEvent::FallbackAttempted { state, result, next } => match result {
                FallbackResult::Qed => format!("fallback @{state} -> QED"),
                FallbackResult::Progress => format!("fallback @{state} -> {}", next.as_deref().unwrap_or("?")),
                FallbackResult::Omitted => format!("fallback @{state} -> omitted"),
            },
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchTrace {
    pub events: Vec<TraceEvent>,
}

impl SearchTrace {
    pub fn compact(&self) -> Vec<String> {
        self.events.iter().map(TraceEvent::compact).collect()
    }

    pub fn pushes(&self) -> usize {
        self.events.iter().filter(|e| matches!(e, TraceEvent::Pushed { .. })).count()
    }

    pub fn pops(&self) -> usize {
        self.events.iter().filter(|e| matches!(e, TraceEvent::Backtracked { .. })).count()
    }

    /// Replays pushes and pops and returns the stack of state labels after
    /// each push, for checking that no path ever repeats a state.
    pub fn paths(&self) -> Vec<Vec<String>> {
        let mut stack: Vec<String> = Vec::new();
        let mut out = Vec::new();
        for e in &self.events {
            match e {
                TraceEvent::Pushed { state, .. } => {
                    stack.push(state.clone());
                    out.push(stack.clone());
                }
                TraceEvent::Backtracked { .. } => {
                    stack.pop();
                }
                _ => {}
            }
        }
        out
    }

    fn push(&mut self, event: TraceEvent) {
        log::trace!("{}", event.compact());
        self.events.push(event);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchOutcome {
    pub status: SearchStatus,
    /// Present iff `status` is `Proved`.
    pub proof: Option<Vec<TacticBlock>>,
    pub queries_used: u32,
    pub wall_time_ms: u64,
    pub final_depth: usize,
    pub failures: FailureDict,
    pub trace: SearchTrace,
    /// Backend failure detail when `status` is `BackendFailed`.
    pub error: Option<String>,
}

impl SearchOutcome {
    pub fn proof_script(&self) -> Option<Vec<&str>> {
        self.proof.as_ref().map(|p| p.iter().map(TacticBlock::text).collect())
    }

    pub fn is_proved(&self) -> bool {
        self.status == SearchStatus::Proved
    }

    /// The outcome with wall time zeroed, for comparisons across runs.
    pub fn without_timing(mut self) -> Self {
        self.wall_time_ms = 0;
        self
    }
}

/// Runs the search on `problem`. `env` is initialized here; the timeout
/// clock starts after initialization.
pub fn feas_search(
    problem: &Problem,
    env: &mut dyn ProverEnvironment,
    backend: &mut dyn SuggestionBackend,
    cfg: &SearchConfig,
) -> Result<SearchOutcome, SearchError> {
    let heuristics = if cfg.heuristics { default_heuristics() } else { &[] };
    feas_search_with(problem, env, backend, cfg, heuristics)
}

/// Like [`feas_search`] with an explicit heuristic list (used when
/// `cfg.heuristics` is set).
pub fn feas_search_with(
    problem: &Problem,
    env: &mut dyn ProverEnvironment,
    backend: &mut dyn SuggestionBackend,
    cfg: &SearchConfig,
    heuristics: &[HeuristicEntry],
) -> Result<SearchOutcome, SearchError> {
    cfg.validate()?;
    let root = env.init_problem(problem)?;
    let started = Instant::now();
    let search = Search {
        env,
        backend,
        cfg,
        heuristics: if cfg.heuristics { heuristics } else { &[] },
        stack: SearchStack::new(),
        bad: FailureDict::new(),
        trace: SearchTrace::default(),
        counter: QueryCounter::default(),
        started,
    };
    search.run(root)
}

struct Search<'a> {
    env: &'a mut dyn ProverEnvironment,
    backend: &'a mut dyn SuggestionBackend,
    cfg: &'a SearchConfig,
    heuristics: &'a [HeuristicEntry],
    stack: SearchStack,
    bad: FailureDict,
    trace: SearchTrace,
    counter: QueryCounter,
    started: Instant,
}

/// What the caller of a step should do next.
enum Step {
    Continue,
    Done(SearchStatus, Option<Vec<TacticBlock>>, Option<String>),
}

impl Search<'_> {
    fn run(mut self, root: ProofState) -> Result<SearchOutcome, SearchError> {
        match root.kind() {
            StateKind::Qed => return Ok(self.finish(SearchStatus::Proved, Some(Vec::new()), None)),
            StateKind::Error => {
                let msg = root.error_message().unwrap_or_default().to_string();
                return Err(EnvError::ProblemRejected(msg).into());
            }
            StateKind::Obligations => {}
        }
        self.push(root, None, VecDeque::new())?;
        loop {
            if let Step::Done(status, proof, error) = self.step()? {
                return Ok(self.finish(status, proof, error));
            }
        }
    }

    fn timed_out(&self) -> bool {
        self.started.elapsed() >= self.cfg.timeout
    }

    fn push(&mut self, state: ProofState, via: Option<TacticBlock>, queue: VecDeque<TacticBlock>) -> Result<(), SearchError> {
        let label = state.id().to_string();
        self.stack.push(state, via, queue)?;
        self.trace.push(TraceEvent::Pushed {
            state: label,
            depth: self.stack.depth(),
        });
        Ok(())
    }

    fn step(&mut self) -> Result<Step, SearchError> {
        let Some(top) = self.stack.top() else {
            return Ok(Step::Done(SearchStatus::RetryLimit, None, None));
        };
        if top.queue.is_empty() {
            return self.refill();
        }

        let top = self.stack.top_mut().expect("non-empty stack");
        let block = top.queue.pop_front().expect("non-empty queue");
        let label = top.state.id().to_string();
        if self.bad.contains(&top.key, block.text()) {
            top.queue.clear();
            self.trace.push(TraceEvent::BlockApplied {
                state: label,
                tactic: block.text().to_string(),
                result: ApplyKind::KnownBad,
                next: None,
            });
            return self.end_of_response();
        }
        let state = top.state.clone();
        if self.timed_out() {
            return Ok(Step::Done(SearchStatus::TimedOut, None, None));
        }

        let next = match self.env.apply(&state, &block) {
            Ok(r) => r.state,
            Err(EnvError::Timeout(d)) => ProofState::error(StateId::new(format!("{label}/timeout")), format!("tactic timed out after {d:?}"))?,
            Err(e) => return Err(e.into()),
        };
        let next_label = next.id().to_string();
        match next.kind() {
            StateKind::Qed => {
                self.trace.push(TraceEvent::BlockApplied {
                    state: label,
                    tactic: block.text().to_string(),
                    result: ApplyKind::Qed,
                    next: None,
                });
                let mut proof = self.stack.path();
                proof.push(block);
                Ok(Step::Done(SearchStatus::Proved, Some(proof), None))
            }
            StateKind::Error => {
                self.trace.push(TraceEvent::BlockApplied {
                    state: label,
                    tactic: block.text().to_string(),
                    result: ApplyKind::Error,
                    next: None,
                });
                let message = next.error_message().unwrap_or_default().to_string();
                self.fail_at_top(&block, message);
                self.end_of_response()
            }
            StateKind::Obligations => {
                let key = canonical_form(&next)?;
                if self.stack.contains_key(&key) {
                    let ancestor = self.stack.frames().iter().find(|f| f.key == key).map(|f| f.state.id().to_string());
                    self.trace.push(TraceEvent::BlockApplied {
                        state: label,
                        tactic: block.text().to_string(),
                        result: ApplyKind::Loop,
                        next: ancestor,
                    });
                    self.fail_at_top(&block, LOOP_MESSAGE.to_string());
                    return self.end_of_response();
                }
                self.trace.push(TraceEvent::BlockApplied {
                    state: label,
                    tactic: block.text().to_string(),
                    result: ApplyKind::Progress,
                    next: Some(next_label),
                });
                let rest = std::mem::take(&mut self.stack.top_mut().expect("non-empty stack").queue);
                let exhausted = rest.is_empty();
                self.push(next, Some(block), rest)?;
                if exhausted {
                    self.end_of_response()
                } else {
                    Ok(Step::Continue)
                }
            }
        }
    }

    fn refill(&mut self) -> Result<Step, SearchError> {
        let top = self.stack.top().expect("non-empty stack");
        if top.refills >= self.cfg.retry_limit {
            let frame = self.stack.pop().expect("non-empty stack");
            self.trace.push(TraceEvent::Backtracked {
                state: frame.state.id().to_string(),
                depth: self.stack.depth(),
            });
            if self.stack.is_empty() {
                return Ok(Step::Done(SearchStatus::RetryLimit, None, None));
            }
            return Ok(Step::Continue);
        }
        if self.counter.get() >= self.cfg.max_queries {
            return Ok(Step::Done(SearchStatus::ExhaustedQueries, None, None));
        }
        if self.timed_out() {
            return Ok(Step::Done(SearchStatus::TimedOut, None, None));
        }

        let prompt = promptify_with(&self.stack, &self.bad, self.heuristics, self.cfg.mode)?;
        let response = match query(self.backend, &prompt, &mut self.counter) {
            Ok(r) => r,
            Err(e) => {
                log::warn!("backend failed: {e}");
                return Ok(Step::Done(SearchStatus::BackendFailed, None, Some(e.to_string())));
            }
        };
        let blocks = parse_response(&response, self.cfg.mode);
        let top = self.stack.top_mut().expect("non-empty stack");
        top.refills += 1;
        self.trace.push(TraceEvent::QueryIssued {
            n: self.counter.get(),
            state: top.state.id().to_string(),
            blocks: blocks.len(),
        });
        if blocks.is_empty() {
            return self.end_of_response();
        }
        top.queue = blocks.into();
        Ok(Step::Continue)
    }

    fn fail_at_top(&mut self, block: &TacticBlock, message: String) {
        let top = self.stack.top_mut().expect("non-empty stack");
        top.queue.clear();
        top.last_error = Some(message);
        let key = top.key.clone();
        let label = top.state.id().to_string();
        if self.bad.record_at(key.clone(), block.text()) {
            self.trace.push(TraceEvent::FailureRecorded {
                state: label,
                key,
                tactic: block.text().to_string(),
            });
        }
    }

    /// The fallback attempt that closes each response.
    fn end_of_response(&mut self) -> Result<Step, SearchError> {
        if !self.cfg.fallback_enabled || self.timed_out() {
            return Ok(Step::Continue);
        }
        let state = self.stack.top().expect("non-empty stack").state.clone();
        let label = state.id().to_string();
        let block = TacticBlock::fallback(self.env.fallback_tactic())?;
        let outcome = self.env.attempt_fallback(&state).map(|r| r.state);
        match outcome {
            Some(next) if next.is_qed() => {
                self.trace.push(TraceEvent::FallbackAttempted {
                    state: label,
                    result: FallbackResult::Qed,
                    next: None,
                });
                let mut proof = self.stack.path();
                proof.push(block);
                Ok(Step::Done(SearchStatus::Proved, Some(proof), None))
            }
            Some(next) if next.kind() == StateKind::Obligations && !self.stack.contains_key(&canonical_form(&next)?) => {
                self.trace.push(TraceEvent::FallbackAttempted {
                    state: label,
                    result: FallbackResult::Progress,
                    next: Some(next.id().to_string()),
                });
                self.push(next, Some(block), VecDeque::new())?;
                Ok(Step::Continue)
            }
            _ => {
                self.trace.push(TraceEvent::FallbackAttempted {
                    state: label,
                    result: FallbackResult::Omitted,
                    next: None,
                });
                Ok(Step::Continue)
            }
        }
    }

    fn finish(self, status: SearchStatus, proof: Option<Vec<TacticBlock>>, error: Option<String>) -> SearchOutcome {
        SearchOutcome {
            status,
            proof,
            queries_used: self.counter.get(),
            wall_time_ms: self.started.elapsed().as_millis() as u64,
            final_depth: self.stack.depth(),
            failures: self.bad,
            trace: self.trace,
            error,
        }
    }
}

/// Result of applying one response's blocks outside a full search.
#[derive(Debug, Clone, PartialEq)]
pub struct Salvage {
    /// State after the applied prefix (and the fallback, if it succeeded).
    pub final_state: ProofState,
    /// Blocks that applied cleanly, plus a fallback block if it helped.
    pub prefix: Vec<TacticBlock>,
    /// The first block that failed, with its result kind.
    pub failed: Option<(TacticBlock, ApplyKind)>,
    /// Set when an environment error cut the prefix short.
    pub env_error: Option<String>,
    pub fallback: FallbackResult,
}

/// Applies `blocks` from `state` until one errs or loops, records that block
/// in `bad` at the state where it failed, then tries the fallback once.
pub fn apply_with_fallback(
    env: &mut dyn ProverEnvironment,
    state: &ProofState,
    blocks: &[TacticBlock],
    bad: &mut FailureDict,
) -> Result<Salvage, SearchError> {
    if state.kind() != StateKind::Obligations {
        return Err(StateError::NotAnObligationState(state.kind().name()).into());
    }
    let mut seen: Vec<CanonicalKey> = vec![canonical_form(state)?];
    let mut current = state.clone();
    let mut prefix = Vec::new();
    let mut failed = None;
    let mut env_error = None;
    for block in blocks {
        let next = match env.apply(&current, block) {
            Ok(r) => r.state,
            Err(e) => {
                env_error = Some(e.to_string());
                break;
            }
        };
        match next.kind() {
            StateKind::Qed => {
                prefix.push(block.clone());
                return Ok(Salvage {
                    final_state: next,
                    prefix,
                    failed: None,
                    env_error: None,
                    fallback: FallbackResult::Omitted,
                });
            }
            StateKind::Error => {
                bad.record_failure(&current, block)?;
                failed = Some((block.clone(), ApplyKind::Error));
                break;
            }
            StateKind::Obligations => {
                let key = canonical_form(&next)?;
                if seen.contains(&key) {
                    bad.record_failure(&current, block)?;
                    failed = Some((block.clone(), ApplyKind::Loop));
                    break;
                }
                seen.push(key);
                prefix.push(block.clone());
                current = next;
            }
        }
    }

    let mut fallback = FallbackResult::Omitted;
    if let Some(r) = env.attempt_fallback(&current) {
        let loops = r.state.kind() == StateKind::Obligations && seen.contains(&canonical_form(&r.state)?);
        if !loops {
            fallback = if r.state.is_qed() { FallbackResult::Qed } else { FallbackResult::Progress };
            prefix.push(TacticBlock::fallback(env.fallback_tactic())?);
            current = r.state;
        }
    }
    Ok(Salvage {
        final_state: current,
        prefix,
        failed,
        env_error,
        fallback,
    })
}

/// Whether `script` closes `problem` from a fresh start in `env`.
pub fn replay_proof<S: AsRef<str>>(problem: &Problem, env: &mut dyn ProverEnvironment, script: &[S]) -> bool {
    let Ok(mut state) = env.init_problem(problem) else {
        return false;
    };
    for tactic in script {
        if state.kind() != StateKind::Obligations {
            return false;
        }
        let Ok(block) = TacticBlock::plain(tactic.as_ref()) else {
            return false;
        };
        match env.apply(&state, &block) {
            Ok(r) => state = r.state,
            Err(_) => return false,
        }
    }
    state.is_qed()
}

/// Number of fallback-origin blocks in a proof.
pub fn fallback_steps(proof: &[TacticBlock]) -> usize {
    proof.iter().filter(|b| b.origin() == BlockOrigin::AutoFallback).count()
}
