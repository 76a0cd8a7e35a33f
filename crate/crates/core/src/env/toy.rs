//! A deterministic in-process prover defined by a transition table.
//!
//! A toy state is a label; its obligations default to a single goal whose text
//! is the label. `T(label, tactic)` is looked up in the table, and anything
//! missing is a prover error. Labels in `auto_close` are closed by the
//! fallback tactic.
//!
//! On disk the spec is TOML:
//!
//! ```toml
//! initial = "S0"
//! auto_close = ["S2"]
//!
//! [states.S1]
//! goals = [{ goal = "f 1 = 1", hypotheses = [{ name = "h", statement = "f 0 = 0" }] }]
//!
//! [[transitions]]
//! from = "S0"
//! tactic = "intro x"
//! to = "S1"          # a label, "ERR" or "QED"
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::{ApplyResult, EnvError, ProverEnvironment, DEFAULT_APPLY_TIMEOUT, DEFAULT_FALLBACK_TACTIC};
use crate::dataset::Problem;
use crate::state::{normalize_whitespace, Obligation, ProofState, StateId, StateKind, TacticBlock};

pub const ERR: &str = "ERR";
pub const QED: &str = "QED";

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Target {
    State(String),
    Error(Option<String>),
    Qed,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ToyState {
    /// Empty means one goal whose text is the label.
    #[serde(default)]
    pub goals: Vec<Obligation>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ToyTransition {
    pub from: String,
    pub tactic: String,
    pub to: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ToyEnvSpec {
    pub initial: String,
    #[serde(default)]
    pub states: BTreeMap<String, ToyState>,
    #[serde(default)]
    pub transitions: Vec<ToyTransition>,
    #[serde(default)]
    pub auto_close: BTreeSet<String>,
    /// Simulated cost of each tactic application.
    #[serde(default)]
    pub apply_delay_ms: u64,
}

impl ToyEnvSpec {
    pub fn new(initial: &str) -> Self {
        let mut spec = ToyEnvSpec {
            initial: initial.to_string(),
            states: BTreeMap::new(),
            transitions: Vec::new(),
            auto_close: BTreeSet::new(),
            apply_delay_ms: 0,
        };
        spec.declare(initial);
        spec
    }

    fn declare(&mut self, label: &str) {
        if label != ERR && label != QED {
            self.states.entry(label.to_string()).or_default();
        }
    }

    /// Adds `T(from, tactic) = to`, declaring unknown labels on the way.
    /// `to` may be `"ERR"` or `"QED"`.
    pub fn on(mut self, from: &str, tactic: &str, to: &str) -> Self {
        self.declare(from);
        self.declare(to);
        self.transitions.push(ToyTransition {
            from: from.to_string(),
            tactic: tactic.to_string(),
            to: to.to_string(),
            message: None,
        });
        self
    }

    pub fn fails_with(mut self, from: &str, tactic: &str, message: &str) -> Self {
        self = self.on(from, tactic, ERR);
        self.transitions.last_mut().expect("just pushed").message = Some(message.to_string());
        self
    }

    pub fn with_goals(mut self, label: &str, goals: Vec<Obligation>) -> Self {
        self.states.insert(label.to_string(), ToyState { goals });
        self
    }

    pub fn closable(mut self, label: &str) -> Self {
        self.declare(label);
        self.auto_close.insert(label.to_string());
        self
    }

    pub fn with_delay(mut self, delay: Duration) -> Self {
        self.apply_delay_ms = delay.as_millis() as u64;
        self
    }

    pub fn parse(text: &str) -> Result<Self, EnvError> {
        let spec: ToyEnvSpec = toml::from_str(text).map_err(|e| EnvError::InvalidSpec(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<Self, EnvError> {
        let text = std::fs::read_to_string(path).map_err(|e| EnvError::InvalidSpec(format!("{}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            EnvError::InvalidSpec(m) => EnvError::InvalidSpec(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("toy spec serializes")
    }

    pub fn validate(&self) -> Result<(), EnvError> {
        if !self.states.contains_key(&self.initial) {
            return Err(EnvError::InvalidSpec(format!("initial state `{}` is not declared", self.initial)));
        }
        for t in &self.transitions {
            if !self.states.contains_key(&t.from) {
                return Err(EnvError::InvalidSpec(format!("transition from undeclared state `{}`", t.from)));
            }
            if t.to != ERR && t.to != QED && !self.states.contains_key(&t.to) {
                return Err(EnvError::InvalidSpec(format!("transition to undeclared state `{}`", t.to)));
            }
        }
        if let Some(bad) = self.auto_close.iter().find(|l| !self.states.contains_key(*l)) {
            return Err(EnvError::InvalidSpec(format!("auto_close names undeclared state `{bad}`")));
        }
        Ok(())
    }

    pub fn state(&self, label: &str) -> Option<ProofState> {
        let toy = self.states.get(label)?;
        let goals = if toy.goals.is_empty() {
            vec![Obligation::goal_only(label).ok()?]
        } else {
            toy.goals.clone()
        };
        Some(ProofState::obligations(StateId::new(label), goals))
    }

    pub fn target(&self, label: &str, tactic: &str) -> Option<Target> {
        let tactic = normalize_whitespace(tactic);
        self.transitions
            .iter()
            .find(|t| t.from == label && normalize_whitespace(&t.tactic) == tactic)
            .map(|t| match t.to.as_str() {
                ERR => Target::Error(t.message.clone()),
                QED => Target::Qed,
                other => Target::State(other.to_string()),
            })
    }
}

pub struct ToyEnv {
    spec: ToyEnvSpec,
    fallback: String,
    apply_timeout: Duration,
    initialized: bool,
}

impl ToyEnv {
    pub fn new(spec: ToyEnvSpec) -> Result<Self, EnvError> {
        spec.validate()?;
        Ok(ToyEnv {
            spec,
            fallback: DEFAULT_FALLBACK_TACTIC.to_string(),
            apply_timeout: DEFAULT_APPLY_TIMEOUT,
            initialized: false,
        })
    }

    pub fn with_fallback_tactic(mut self, name: &str) -> Self {
        self.fallback = name.to_string();
        self
    }

    pub fn with_apply_timeout(mut self, timeout: Duration) -> Self {
        self.apply_timeout = timeout;
        self
    }

    pub fn spec(&self) -> &ToyEnvSpec {
        &self.spec
    }
}

impl ProverEnvironment for ToyEnv {
    fn init_problem(&mut self, _problem: &Problem) -> Result<ProofState, EnvError> {
        self.initialized = true;
        self.spec
            .state(&self.spec.initial)
            .ok_or_else(|| EnvError::InvalidSpec(format!("initial state `{}` is not declared", self.spec.initial)))
    }

    fn apply(&mut self, state: &ProofState, tactic: &TacticBlock) -> Result<ApplyResult, EnvError> {
        if !self.initialized {
            return Err(EnvError::NotInitialized);
        }
        if state.kind() != StateKind::Obligations {
            return Err(EnvError::NotOpen(state.kind().name()));
        }
        let label = state.id().as_str();
        if !self.spec.states.contains_key(label) {
            return Err(EnvError::UnknownState(state.id().clone()));
        }
        let started = Instant::now();
        let delay = Duration::from_millis(self.spec.apply_delay_ms);
        if delay > self.apply_timeout {
            std::thread::sleep(self.apply_timeout);
            return Err(EnvError::Timeout(self.apply_timeout));
        }
        std::thread::sleep(delay);

        let closes = normalize_whitespace(tactic.text()) == self.fallback && self.spec.auto_close.contains(label);
        let target = if closes {
            Some(Target::Qed)
        } else {
            self.spec.target(label, tactic.text())
        };
        let next = match target {
            Some(Target::Qed) => ProofState::qed(StateId::new(QED)),
            Some(Target::State(to)) => self.spec.state(&to).ok_or_else(|| EnvError::UnknownState(StateId::new(to)))?,
            Some(Target::Error(message)) => {
                let message = message.unwrap_or_else(|| format!("tactic `{}` failed at {label}", tactic.text()));
                ProofState::error(StateId::new(format!("{label}/err")), message).expect("non-empty message")
            }
            None => ProofState::error(
                StateId::new(format!("{label}/err")),
                format!("tactic `{}` failed at {label}", tactic.text()),
            )
            .expect("non-empty message"),
        };
        Ok(ApplyResult {
            state: next,
            elapsed: started.elapsed(),
        })
    }

    fn fallback_tactic(&self) -> &str {
        &self.fallback
    }
}
