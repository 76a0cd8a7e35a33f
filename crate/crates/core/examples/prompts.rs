//! Renders the prompt the search sends for a state with recorded failures.

use std::collections::VecDeque;

use feas::state::{FailureDict, Hypothesis, Obligation, ProofState, SearchStack, StateId, TacticBlock};
use feas::suggest::{promptify, AgentMode};

fn main() {
    let goal = Obligation::new(
        "f x = x",
        vec![Hypothesis::new("h_0", "∀ x, f (x + 1) = f x + 1"), Hypothesis::new("x", "ℝ")],
    )
    .unwrap();
    let state = ProofState::obligations(StateId::new("s0"), vec![goal]);
    let mut bad = FailureDict::new();
    bad.record_failure(&state, &TacticBlock::plain("linarith [h_0 x]").unwrap()).unwrap();

    let mut stack = SearchStack::new();
    stack.push(state, None, VecDeque::new()).unwrap();

    let with_heuristics = std::env::args().any(|a| a == "--heuristics");
    let prompt = promptify(&stack, &bad, with_heuristics, AgentMode::Feas).unwrap();
    println!("=== system ===\n{}\n\n=== user ===\n{}", prompt.system_text, prompt.user_text);
    println!("\ndigest {}", prompt.digest());
}
