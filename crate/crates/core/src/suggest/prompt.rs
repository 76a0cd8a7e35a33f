//! PROMPTIFY: renders the search stack and failure dictionary into a prompt.
//!
//! Instruction text lives in `templates/` and is compiled in. The rendered
//! user message always carries the current goals, the tactics applied so far,
//! the tactics that failed at this state, and the last prover error.

use std::fmt::Write as _;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::state::{CanonicalKey, FailureDict, ProofState, SearchStack, StateId, StateKind};

const SYSTEM_FEAS: &str = include_str!("../../templates/system_feas.txt");
const SYSTEM_COPRA: &str = include_str!("../../templates/system_copra.txt");
const SYSTEM_FEW_SHOT: &str = include_str!("../../templates/system_few_shot.txt");
const HEURISTICS: &str = include_str!("../../templates/heuristics.toml");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentMode {
    /// Whole proof in one shot, with worked examples.
    FewShot,
    /// One tactic per query.
    Copra,
    /// Strategy first, then a multi-step formal proof.
    Feas,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PromptError {
    #[error("cannot build a prompt from an empty stack")]
    EmptyStack,
    #[error("cannot build a prompt for a {0} state")]
    NotOpen(&'static str),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HeuristicEntry {
    pub name: String,
    pub prompt_text: String,
}

#[derive(Deserialize)]
struct HeuristicFile {
    heuristic: Vec<HeuristicEntry>,
}

/// The shipped heuristic set: substitution, bijectivity, symmetry/involution
/// and induction.
pub fn default_heuristics() -> &'static [HeuristicEntry] {
    static SET: OnceLock<Vec<HeuristicEntry>> = OnceLock::new();
    SET.get_or_init(|| {
        toml::from_str::<HeuristicFile>(HEURISTICS)
            .expect("bundled heuristics.toml is valid")
            .heuristic
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptBundle {
    pub system_text: String,
    pub user_text: String,
    pub agent_mode: AgentMode,
    /// Canonical key of the state the prompt was built for.
    pub state_key: CanonicalKey,
    pub state_id: StateId,
}

impl PromptBundle {
    /// Hex SHA-256 over the system and user text.
    pub fn digest(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(self.system_text.as_bytes());
        hasher.update([0u8]);
        hasher.update(self.user_text.as_bytes());
        hasher
            .finalize()
            .iter()
            .fold(String::with_capacity(64), |mut s, b| {
                let _ = write!(s, "{b:02x}");
                s
            })
    }
}

pub fn promptify(stack: &SearchStack, bad: &FailureDict, heuristics_on: bool, mode: AgentMode) -> Result<PromptBundle, PromptError> {
    let heuristics = if heuristics_on { default_heuristics() } else { &[] };
    promptify_with(stack, bad, heuristics, mode)
}

/// Like [`promptify`] with an explicit heuristic list.
pub fn promptify_with(stack: &SearchStack, bad: &FailureDict, heuristics: &[HeuristicEntry], mode: AgentMode) -> Result<PromptBundle, PromptError> {
    let top = stack.top().ok_or(PromptError::EmptyStack)?;
    if top.state.kind() != StateKind::Obligations {
        return Err(PromptError::NotOpen(top.state.kind().name()));
    }

    let mut system_text = match mode {
        AgentMode::Feas => SYSTEM_FEAS,
        AgentMode::Copra => SYSTEM_COPRA,
        AgentMode::FewShot => SYSTEM_FEW_SHOT,
    }
    .trim_end()
    .to_string();
    if !heuristics.is_empty() {
        system_text.push_str("\n\nFunctional equation heuristics:\n");
        for h in heuristics {
            let _ = write!(system_text, "\n[{}]\n{}\n", h.name, h.prompt_text.trim());
        }
    }

    let mut user_text = String::new();
    user_text.push_str("Theorem state:\n");
    user_text.push_str(&render_state(&top.state));

    let path = stack.path();
    if !path.is_empty() {
        user_text.push_str("\nSteps so far:\n");
        for block in &path {
            let _ = writeln!(user_text, "{},", block.text());
        }
    }

    let failed = bad.failed_at(&top.key);
    if !failed.is_empty() {
        user_text.push_str("\nPreviously failed tactics at this state (do not repeat them):\n");
        for tactic in failed {
            let _ = writeln!(user_text, "- {tactic}");
        }
    }

    if let Some(err) = &top.last_error {
        user_text.push_str("\nLast error from the prover at this state:\n");
        user_text.push_str(err.trim_end());
        user_text.push('\n');
    }

    Ok(PromptBundle {
        system_text,
        user_text,
        agent_mode: mode,
        state_key: top.key.clone(),
        state_id: top.state.id().clone(),
    })
}

/// Goals in the prover's usual layout: hypotheses as `name : statement`,
/// then the goal after a turnstile.
pub fn render_state(state: &ProofState) -> String {
    let obligations = state.obligation_list();
    let mut out = String::new();
    for (i, ob) in obligations.iter().enumerate() {
        if obligations.len() > 1 {
            let _ = writeln!(out, "[goal {} of {}]", i + 1, obligations.len());
        }
        for h in ob.hypotheses() {
            let _ = writeln!(out, "{} : {}", h.name, h.statement);
        }
        let _ = writeln!(out, "⊢ {}", ob.goal());
    }
    out
}
