//! Proof-state model: obligations, prover states, tactic blocks, the failure
//! dictionary and the search stack.
//!
//! Two states are considered equivalent when their canonical keys match. The
//! canonical key is a purely textual normal form: whitespace runs collapse to
//! a single space, obligations are sorted by goal, hypotheses are sorted by
//! statement and their names are erased. Keys are stable across processes.

use std::collections::VecDeque;
use std::fmt;

use indexmap::{IndexMap, IndexSet};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Key of the terminal state.
pub const QED_KEY: &str = "QED";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum StateError {
    #[error("obligation goal must not be empty")]
    EmptyGoal,
    #[error("duplicate hypothesis name `{0}`")]
    DuplicateHypothesis(String),
    #[error("error state requires a non-empty message")]
    EmptyErrorMessage,
    #[error("tactic text must not be empty")]
    EmptyTactic,
    #[error("source span {start}..{end} is not ordered")]
    BadSpan { start: usize, end: usize },
    #[error("{0} state has no canonical form")]
    NoCanonicalForm(&'static str),
    #[error("failures can only be recorded at obligation states, not {0}")]
    NotAnObligationState(&'static str),
    #[error("state `{0}` is equivalent to a state already on the stack")]
    LoopOnStack(CanonicalKey),
}

/// Collapses every run of whitespace to a single space and trims the ends.
pub fn normalize_whitespace(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Hypothesis {
    pub name: String,
    pub statement: String,
}

impl Hypothesis {
    pub fn new(name: impl Into<String>, statement: impl Into<String>) -> Self {
        Hypothesis {
            name: name.into(),
            statement: statement.into(),
        }
    }
}

/// One goal together with the hypotheses available for it.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawObligation", into = "RawObligation")]
pub struct Obligation {
    goal: String,
    hypotheses: Vec<Hypothesis>,
}

#[derive(Serialize, Deserialize)]
struct RawObligation {
    goal: String,
    #[serde(default)]
    hypotheses: Vec<Hypothesis>,
}

impl TryFrom<RawObligation> for Obligation {
    type Error = StateError;
    fn try_from(raw: RawObligation) -> Result<Self, StateError> {
        Obligation::new(raw.goal, raw.hypotheses)
    }
}

impl From<Obligation> for RawObligation {
    fn from(ob: Obligation) -> Self {
        RawObligation {
            goal: ob.goal,
            hypotheses: ob.hypotheses,
        }
    }
}

impl Obligation {
    pub fn new(goal: impl Into<String>, hypotheses: Vec<Hypothesis>) -> Result<Self, StateError> {
        let goal = goal.into();
        if goal.trim().is_empty() {
            return Err(StateError::EmptyGoal);
        }
        let mut seen = std::collections::HashSet::new();
        for h in &hypotheses {
            if !seen.insert(h.name.as_str()) {
                return Err(StateError::DuplicateHypothesis(h.name.clone()));
            }
        }
        Ok(Obligation { goal, hypotheses })
    }

    /// An obligation with no hypotheses.
    pub fn goal_only(goal: impl Into<String>) -> Result<Self, StateError> {
        Obligation::new(goal, Vec::new())
    }

    pub fn goal(&self) -> &str {
        &self.goal
    }

    pub fn hypotheses(&self) -> &[Hypothesis] {
        &self.hypotheses
    }

    fn canonical(&self) -> (String, String) {
        let goal = normalize_whitespace(&self.goal);
        let mut hyps: Vec<String> = self
            .hypotheses
            .iter()
            .map(|h| normalize_whitespace(&h.statement))
            .collect();
        hyps.sort();
        let rendered = if hyps.is_empty() {
            format!("⊢ {goal}")
        } else {
            format!("{} ⊢ {goal}", hyps.join(" ; "))
        };
        (goal, rendered)
    }
}

/// Opaque handle the prover issues for a state.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StateId(pub String);

impl StateId {
    pub fn new(id: impl Into<String>) -> Self {
        StateId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for StateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StateKind {
    Obligations,
    Error,
    Qed,
}

impl StateKind {
    pub fn name(self) -> &'static str {
        match self {
            StateKind::Obligations => "obligations",
            StateKind::Error => "error",
            StateKind::Qed => "qed",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StateBody {
    Obligations { obligations: Vec<Obligation> },
    Error { message: String },
    Qed,
}

/// A node of the search: open obligations, a prover error, or QED.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProofState {
    id: StateId,
    #[serde(flatten)]
    body: StateBody,
}

impl ProofState {
    /// An obligation state. An empty obligation list is the finished proof,
    /// so it is returned as a QED state.
    pub fn obligations(id: StateId, obligations: Vec<Obligation>) -> Self {
        if obligations.is_empty() {
            return ProofState::qed(id);
        }
        ProofState {
            id,
            body: StateBody::Obligations { obligations },
        }
    }

    pub fn error(id: StateId, message: impl Into<String>) -> Result<Self, StateError> {
        let message = message.into();
        if message.trim().is_empty() {
            return Err(StateError::EmptyErrorMessage);
        }
        Ok(ProofState {
            id,
            body: StateBody::Error { message },
        })
    }

    pub fn qed(id: StateId) -> Self {
        ProofState {
            id,
            body: StateBody::Qed,
        }
    }

    pub fn id(&self) -> &StateId {
        &self.id
    }

    pub fn body(&self) -> &StateBody {
        &self.body
    }

    pub fn kind(&self) -> StateKind {
        match self.body {
            StateBody::Obligations { .. } => StateKind::Obligations,
            StateBody::Error { .. } => StateKind::Error,
            StateBody::Qed => StateKind::Qed,
        }
    }

    pub fn is_qed(&self) -> bool {
        matches!(self.body, StateBody::Qed)
    }

    pub fn obligation_list(&self) -> &[Obligation] {
        match &self.body {
            StateBody::Obligations { obligations } => obligations,
            _ => &[],
        }
    }

    pub fn error_message(&self) -> Option<&str> {
        match &self.body {
            StateBody::Error { message } => Some(message),
            _ => None,
        }
    }
}

/// Canonical text of a non-error state; equality of keys is state equivalence.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CanonicalKey(String);

impl CanonicalKey {
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for CanonicalKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

pub fn canonical_form(state: &ProofState) -> Result<CanonicalKey, StateError> {
    match &state.body {
        StateBody::Qed => Ok(CanonicalKey(QED_KEY.to_string())),
        StateBody::Error { .. } => Err(StateError::NoCanonicalForm("error")),
        StateBody::Obligations { obligations } => {
            let mut parts: Vec<(String, String)> =
                obligations.iter().map(Obligation::canonical).collect();
            parts.sort();
            let rendered: Vec<String> = parts.into_iter().map(|(_, r)| r).collect();
            Ok(CanonicalKey(rendered.join(" ∥ ")))
        }
    }
}

pub fn state_equiv(a: &ProofState, b: &ProofState) -> Result<bool, StateError> {
    Ok(canonical_form(a)? == canonical_form(b)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockOrigin {
    Llm,
    AutoFallback,
}

/// Inclusive, 1-based line range within the response a block came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SourceSpan {
    pub start_line: usize,
    pub end_line: usize,
}

/// One independently applicable piece of a tactic script.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TacticBlock {
    text: String,
    span: Option<SourceSpan>,
    origin: BlockOrigin,
    /// Separator characters that followed the block in its source, with
    /// whitespace removed (`","`, or empty for a line break).
    #[serde(default, skip_serializing_if = "String::is_empty")]
    separator: String,
}

impl TacticBlock {
    pub fn llm(text: impl Into<String>, span: SourceSpan) -> Result<Self, StateError> {
        if span.start_line > span.end_line {
            return Err(StateError::BadSpan {
                start: span.start_line,
                end: span.end_line,
            });
        }
        Self::build(text.into(), Some(span), BlockOrigin::Llm)
    }

    /// A block with no recorded source location, e.g. one given on the
    /// command line or replayed from a proof file.
    pub fn plain(text: impl Into<String>) -> Result<Self, StateError> {
        Self::build(text.into(), None, BlockOrigin::Llm)
    }

    pub fn fallback(text: impl Into<String>) -> Result<Self, StateError> {
        Self::build(text.into(), None, BlockOrigin::AutoFallback)
    }

    fn build(text: String, span: Option<SourceSpan>, origin: BlockOrigin) -> Result<Self, StateError> {
        let text = text.trim().to_string();
        if text.is_empty() {
            return Err(StateError::EmptyTactic);
        }
        Ok(TacticBlock {
            text,
            span,
            origin,
            separator: String::new(),
        })
    }

    pub(crate) fn with_separator(mut self, separator: String) -> Self {
        self.separator = separator;
        self
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn span(&self) -> Option<SourceSpan> {
        self.span
    }

    pub fn origin(&self) -> BlockOrigin {
        self.origin
    }

    pub fn separator(&self) -> &str {
        &self.separator
    }
}

/// Bad(O): tactics known to be unproductive at a state, keyed by canonical form.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FailureDict {
    entries: IndexMap<CanonicalKey, IndexSet<String>>,
}

impl FailureDict {
    pub fn new() -> Self {
        Self::default()
    }

    /// Returns whether the pair was new.
    pub fn record_failure(&mut self, state: &ProofState, tactic: &TacticBlock) -> Result<bool, StateError> {
        if state.kind() != StateKind::Obligations {
            return Err(StateError::NotAnObligationState(state.kind().name()));
        }
        let key = canonical_form(state)?;
        Ok(self.record_at(key, tactic.text()))
    }

    pub(crate) fn record_at(&mut self, key: CanonicalKey, tactic: &str) -> bool {
        self.entries.entry(key).or_default().insert(tactic.to_string())
    }

    /// Failed tactics at `state` in the order they were recorded.
    pub fn failed_tactics(&self, state: &ProofState) -> Vec<&str> {
        match canonical_form(state) {
            Ok(key) => self.failed_at(&key),
            Err(_) => Vec::new(),
        }
    }

    pub fn failed_at(&self, key: &CanonicalKey) -> Vec<&str> {
        self.entries
            .get(key)
            .map(|set| set.iter().map(String::as_str).collect())
            .unwrap_or_default()
    }

    pub fn contains(&self, key: &CanonicalKey, tactic: &str) -> bool {
        self.entries.get(key).is_some_and(|set| set.contains(tactic))
    }

    pub fn len(&self) -> usize {
        self.entries.values().map(IndexSet::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn iter(&self) -> impl Iterator<Item = (&CanonicalKey, &IndexSet<String>)> {
        self.entries.iter()
    }
}

/// One level of the search stack.
#[derive(Debug, Clone)]
pub struct Frame {
    pub state: ProofState,
    pub key: CanonicalKey,
    /// Blocks still to apply at this state, left over from an earlier response.
    pub queue: VecDeque<TacticBlock>,
    /// Number of suggestion queries issued while this frame was on top.
    pub refills: u32,
    pub last_error: Option<String>,
    /// Block that produced this state from the frame below; `None` at the root.
    pub via: Option<TacticBlock>,
}

#[derive(Debug, Clone, Default)]
pub struct SearchStack {
    frames: Vec<Frame>,
}

impl SearchStack {
    pub fn new() -> Self {
        Self::default()
    }

    /// Pushes an obligation state. Rejects states equivalent to one already
    /// on the stack, so the stack never holds a cycle.
    pub fn push(&mut self, state: ProofState, via: Option<TacticBlock>, queue: VecDeque<TacticBlock>) -> Result<&mut Frame, StateError> {
        if state.kind() != StateKind::Obligations {
            return Err(StateError::NotAnObligationState(state.kind().name()));
        }
        let key = canonical_form(&state)?;
        if self.contains_key(&key) {
            return Err(StateError::LoopOnStack(key));
        }
        self.frames.push(Frame {
            state,
            key,
            queue,
            refills: 0,
            last_error: None,
            via,
        });
        Ok(self.frames.last_mut().expect("just pushed"))
    }

    pub fn pop(&mut self) -> Option<Frame> {
        self.frames.pop()
    }

    pub fn top(&self) -> Option<&Frame> {
        self.frames.last()
    }

    pub fn top_mut(&mut self) -> Option<&mut Frame> {
        self.frames.last_mut()
    }

    pub fn contains_key(&self, key: &CanonicalKey) -> bool {
        self.frames.iter().any(|f| &f.key == key)
    }

    pub fn depth(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn frames(&self) -> &[Frame] {
        &self.frames
    }

    /// Blocks along the current path from the root to the top frame.
    pub fn path(&self) -> Vec<TacticBlock> {
        self.frames.iter().filter_map(|f| f.via.clone()).collect()
    }
}
