//! Drives a prover over the line protocol. With no arguments it starts this
//! crate's `feas serve-toy` on the bundled fixture; otherwise the arguments
//! are the prover command.
//!
//!     cargo build --bin feas && cargo run --example external_prover
//!     cargo run --example external_prover -- /path/to/lean-server --flag

use std::path::Path;
use std::time::Duration;

use feas::dataset::Problem;
use feas::env::ExternalProver;
use feas::search::{feas_search, replay_proof, SearchConfig};
use feas::suggest::{ScriptTable, ScriptedBackend};

fn main() {
    let lean = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/toy_suite/intermediate/intermediate_funeq_2.lean");
    let mut args: Vec<String> = std::env::args().skip(1).collect();
    let program = if args.is_empty() {
        args = vec!["serve-toy".into(), lean.with_extension("toy.toml").display().to_string()];
        Path::new(env!("CARGO_MANIFEST_DIR")).join("../../target/debug/feas").display().to_string()
    } else {
        args.remove(0)
    };

    let problem = Problem::load_file(&lean).unwrap();
    let table = ScriptTable::load(&lean.with_extension("script.toml"), 1).unwrap();
    let open = || match ExternalProver::spawn(&program, &args) {
        Ok(p) => p.with_apply_timeout(Duration::from_secs(30)),
        Err(e) => {
            eprintln!("{e} (build the binary first: cargo build --bin feas)");
            std::process::exit(1);
        }
    };

    let mut prover = open();
    let outcome = feas_search(&problem, &mut prover, &mut ScriptedBackend::new(table), &SearchConfig::default()).unwrap();
    println!("{} in {} ms", outcome.status.name(), outcome.wall_time_ms);
    if let Some(proof) = outcome.proof_script() {
        println!("replays on a fresh session: {}", replay_proof(&problem, &mut open(), &proof));
    }
}
