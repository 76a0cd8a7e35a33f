//! Prover environments: apply tactics to retained proof states.
//!
//! States are snapshots. Applying a tactic never changes the input state, and
//! any earlier state can be revisited through its id, so backtracking needs
//! no replay.

use std::time::Duration;

use thiserror::Error;

use crate::dataset::Problem;
use crate::state::{ProofState, StateId, StateKind, TacticBlock};

pub mod external;
pub mod toy;
pub mod wire;

pub use external::ExternalProver;
pub use toy::{ToyEnv, ToyEnvSpec};

pub const DEFAULT_FALLBACK_TACTIC: &str = "nlinarith";
pub const DEFAULT_APPLY_TIMEOUT: Duration = Duration::from_secs(30);

#[derive(Debug, Error)]
pub enum EnvError {
    #[error("environment used before init_problem")]
    NotInitialized,
    #[error("prover failed to start: {0}")]
    Start(String),
    #[error("prover rejected the problem: {0}")]
    ProblemRejected(String),
    #[error("prover session is dead: {0}")]
    SessionDead(String),
    #[error("tactic application exceeded {0:?}")]
    Timeout(Duration),
    #[error("unknown state `{0}`")]
    UnknownState(StateId),
    #[error("cannot apply a tactic to a {0} state")]
    NotOpen(&'static str),
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error("invalid toy environment: {0}")]
    InvalidSpec(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ApplyResult {
    pub state: ProofState,
    pub elapsed: Duration,
}

pub trait ProverEnvironment: Send {
    /// Loads the problem and returns its root state.
    fn init_problem(&mut self, problem: &Problem) -> Result<ProofState, EnvError>;

    /// Applies one tactic to a state issued by this environment.
    fn apply(&mut self, state: &ProofState, tactic: &TacticBlock) -> Result<ApplyResult, EnvError>;

    fn fallback_tactic(&self) -> &str {
        DEFAULT_FALLBACK_TACTIC
    }

    /// Tries the fallback tactic. Any failure, including an environment
    /// error, is reported as `None`.
    fn attempt_fallback(&mut self, state: &ProofState) -> Option<ApplyResult> {
        if state.kind() != StateKind::Obligations {
            return None;
        }
        let block = TacticBlock::fallback(self.fallback_tactic()).ok()?;
        match self.apply(state, &block) {
            Ok(result) if result.state.kind() != StateKind::Error => Some(result),
            Ok(_) => None,
            Err(e) => {
                log::debug!("fallback `{}` failed: {e}", block.text());
                None
            }
        }
    }
}

impl<E: ProverEnvironment + ?Sized> ProverEnvironment for Box<E> {
    fn init_problem(&mut self, problem: &Problem) -> Result<ProofState, EnvError> {
        (**self).init_problem(problem)
    }

    fn apply(&mut self, state: &ProofState, tactic: &TacticBlock) -> Result<ApplyResult, EnvError> {
        (**self).apply(state, tactic)
    }

    fn fallback_tactic(&self) -> &str {
        (**self).fallback_tactic()
    }

    fn attempt_fallback(&mut self, state: &ProofState) -> Option<ApplyResult> {
        (**self).attempt_fallback(state)
    }
}
