//! States that differ only in hypothesis names, order or spacing share one
//! canonical key, so the search treats them as the same node.

use feas::state::{canonical_form, state_equiv, FailureDict, Hypothesis, Obligation, ProofState, StateId, TacticBlock};

fn state(id: &str, hyps: &[(&str, &str)], goal: &str) -> ProofState {
    let hyps = hyps.iter().map(|(n, s)| Hypothesis::new(*n, *s)).collect();
    ProofState::obligations(StateId::new(id), vec![Obligation::new(goal, hyps).unwrap()])
}

fn main() {
    let a = state("a", &[("h_0", "∀ x, f (x + 1) = f x + 1"), ("hx", "x ≠ 0")], "f x = x");
    let b = state("b", &[("hx'", "x  ≠ 0"), ("h", "∀ x, f (x + 1) = f x + 1")], "f x  =  x");
    let c = state("c", &[("hx", "x ≠ 0")], "f x = x");

    println!("key(a) = {}", canonical_form(&a).unwrap().as_str());
    println!("a ~ b: {}", state_equiv(&a, &b).unwrap());
    println!("a ~ c: {}", state_equiv(&a, &c).unwrap());

    // a failure recorded at `a` is visible at `b`
    let mut bad = FailureDict::new();
    bad.record_failure(&a, &TacticBlock::plain("linarith").unwrap()).unwrap();
    println!("failed at b: {:?}", bad.failed_tactics(&b));
}
