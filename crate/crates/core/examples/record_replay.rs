//! Records a session's model traffic to a transcript, then reruns the search
//! from the transcript alone and checks the outcome is unchanged.

use std::path::Path;

use feas::dataset::Problem;
use feas::env::{ToyEnv, ToyEnvSpec};
use feas::search::{feas_search, SearchConfig};
use feas::suggest::backend::read_transcript;
use feas::suggest::{RecordingBackend, ReplayBackend, ScriptTable, ScriptedBackend};

fn main() {
    let lean = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/toy_suite/intermediate/intermediate_funeq_1.lean");
    let problem = Problem::load_file(&lean).unwrap();
    let spec = ToyEnvSpec::load(&lean.with_extension("toy.toml")).unwrap();
    let table = ScriptTable::load(&lean.with_extension("script.toml"), 1).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("session.jsonl");
    let cfg = SearchConfig::default();

    let mut recorder = RecordingBackend::create(ScriptedBackend::new(table), &path).unwrap();
    let recorded = feas_search(&problem, &mut ToyEnv::new(spec.clone()).unwrap(), &mut recorder, &cfg).unwrap();
    drop(recorder);
    for r in read_transcript(&path).unwrap() {
        println!("prompt {}… -> {} bytes", &r.prompt_digest[..12], r.response.len());
    }

    let mut replay = ReplayBackend::open(&path).unwrap();
    let replayed = feas_search(&problem, &mut ToyEnv::new(spec).unwrap(), &mut replay, &cfg).unwrap();
    println!("recorded: {}, replayed: {}", recorded.status.name(), replayed.status.name());
    println!("identical: {}", recorded.without_timing() == replayed.without_timing());
}
