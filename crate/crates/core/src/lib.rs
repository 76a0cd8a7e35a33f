//! Backtracking tactic search for interactive theorem provers, driven by
//! block-parsed suggestions from a language-model backend.

pub mod state;
pub mod suggest;
pub mod dataset;
pub mod env;
pub mod search;
pub mod harness;
