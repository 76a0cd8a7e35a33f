//! Replays a complete worked session: one long response is split into seven
//! steps, and the final step fails over to the fallback tactic.

use std::path::Path;

use feas::dataset::Problem;
use feas::env::{ToyEnv, ToyEnvSpec};
use feas::search::{fallback_steps, feas_search, SearchConfig};
use feas::suggest::{ScriptTable, ScriptedBackend};

fn main() {
    let lean = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/toy_suite/intermediate/intermediate_funeq_2.lean");
    let problem = Problem::load_file(&lean).unwrap();
    let spec = ToyEnvSpec::load(&lean.with_extension("toy.toml")).unwrap();
    let table = ScriptTable::load(&lean.with_extension("script.toml"), 1).unwrap();

    println!("{}\n", problem.statement_text.trim());
    let mut env = ToyEnv::new(spec).unwrap();
    let outcome = feas_search(&problem, &mut env, &mut ScriptedBackend::new(table), &SearchConfig::default()).unwrap();
    for line in outcome.trace.compact() {
        println!("  {line}");
    }
    let proof = outcome.proof.clone().unwrap_or_default();
    println!("\n{} with {} queries, {} fallback step(s)", outcome.status.name(), outcome.queries_used, fallback_steps(&proof));
    println!("begin\n  {},\nend", outcome.proof_script().unwrap_or_default().join(",\n  "));
}
