//! Runs the search on a small in-memory environment and prints its trace.

use std::path::PathBuf;

use feas::dataset::{Problem, Tier};
use feas::env::{ToyEnv, ToyEnvSpec};
use feas::search::{feas_search, SearchConfig};
use feas::suggest::{ScriptTable, ScriptedBackend};

fn main() {
    // S1 has a dead end (t2) and a loop back to S0 before the closing step.
    let spec = ToyEnvSpec::new("S0")
        .on("S0", "t1", "S1")
        .fails_with("S1", "t2", "linarith failed")
        .on("S1", "back", "S0")
        .on("S1", "t3", "QED");
    let script = ScriptTable::new()
        .with("S0", &["```lean\nbegin\n  t1,\n  t2,\nend\n```"])
        .with("S1", &["```lean\nbegin\n  back,\nend\n```", "```lean\nbegin\n  t3,\nend\n```"]);

    let problem = Problem::from_source("theorem demo : p := sorry", Tier::Simple, PathBuf::from("demo.lean"));
    let mut env = ToyEnv::new(spec).unwrap();
    let mut backend = ScriptedBackend::new(script);
    let outcome = feas_search(&problem, &mut env, &mut backend, &SearchConfig::default()).unwrap();

    for line in outcome.trace.compact() {
        println!("{line}");
    }
    println!("\n{} after {} queries", outcome.status.name(), outcome.queries_used);
    if let Some(proof) = outcome.proof_script() {
        println!("proof: {}", proof.join(", "));
    }
}
