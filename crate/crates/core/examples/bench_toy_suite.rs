//! Benchmarks every agent on the bundled toy suite and prints one table row
//! per agent and tier.

use std::path::Path;

use feas::harness::{emit_report, run_benchmark, AgentKind, EnvConfig, ReportFormat, RunConfig, TierChoice, TABLE_HEADER};
use feas::suggest::{BackendConfig, BackendKind};

fn main() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/toy_suite");
    println!("{TABLE_HEADER}");
    for tier in [TierChoice::Simple, TierChoice::Intermediate, TierChoice::A1] {
        for agent in AgentKind::ALL {
            let mut cfg = RunConfig::new(agent, tier, BackendConfig::new(BackendKind::Scripted { script: None }), EnvConfig::toy());
            cfg.workers = 4;
            let report = run_benchmark(&root, &cfg).unwrap();
            let table = emit_report(&report, ReportFormat::Table);
            print!("{}", table.lines().skip(1).map(|l| format!("{l}\n")).collect::<String>());
        }
    }
}
