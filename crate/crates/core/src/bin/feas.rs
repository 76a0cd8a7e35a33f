use std::io::{self, BufReader};
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};

use feas::dataset::Problem;
use feas::env::{wire, ToyEnv, ToyEnvSpec};
use feas::harness::{emit_report, run_benchmark, run_problems, AgentKind, EnvConfig, EnvKind, HarnessError, ReportFormat, RunConfig, TierChoice};
use feas::search::SearchConfig;
use feas::suggest::{BackendConfig, BackendKind, RemoteSettings};

const EXIT_CONFIG: u8 = 2;
const EXIT_RUNTIME: u8 = 1;

#[derive(Parser)]
#[command(name = "feas", version, about = "Backtracking tactic search driven by model suggestions")]
struct Cli {
    /// More log output (-v info, -vv debug, -vvv trace). RUST_LOG also works.
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Search for a proof of one problem file.
    Prove {
        problem: PathBuf,
        #[command(flatten)]
        opts: RunOpts,
    },
    /// Run an agent over a dataset tier and report pass@1 (pass@2).
    Bench {
        root: PathBuf,
        #[command(flatten)]
        opts: RunOpts,
    },
    /// Serve a toy environment over the line protocol on stdin/stdout.
    ServeToy { spec: PathBuf },
}

#[derive(Clone, Copy, ValueEnum)]
enum TierArg {
    Simple,
    Intermediate,
    Hard,
    A1,
}

#[derive(Clone, Copy, ValueEnum)]
enum AgentArg {
    FewShot,
    Copra,
    Feas,
    FeasHeuristics,
}

#[derive(Clone, Copy, ValueEnum)]
enum BackendArg {
    Remote,
    Replay,
    Scripted,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Table,
    Structured,
}

#[derive(Args)]
struct RunOpts {
    #[arg(long, value_enum)]
    tier: Option<TierArg>,
    #[arg(long, value_enum, default_value = "feas")]
    agent: AgentArg,
    #[arg(long, value_enum, default_value = "remote")]
    backend: BackendArg,
    /// Model name for the remote backend (or FEAS_MODEL).
    #[arg(long)]
    model: Option<String>,
    /// Chat-completions URL for the remote backend (or FEAS_ENDPOINT).
    #[arg(long)]
    endpoint: Option<String>,
    /// Transcript file, or directory of per-run transcripts, to replay.
    #[arg(long)]
    transcript: Option<PathBuf>,
    /// Script table for the scripted backend; defaults to `<problem>.script.toml`.
    #[arg(long)]
    script: Option<PathBuf>,
    #[arg(long, default_value_t = 60)]
    max_queries: u32,
    /// Seconds per search, excluding prover startup.
    #[arg(long, default_value_t = 720.0)]
    timeout: f64,
    #[arg(long, default_value_t = 0.0)]
    temperature: f64,
    /// Refills at one state before backtracking.
    #[arg(long, default_value_t = 5)]
    retry_limit: u32,
    /// Runs per problem; defaults to 2 on simple/intermediate, 1 on hard/a1 and for `prove`.
    #[arg(long)]
    runs: Option<u32>,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Directory for traces, transcripts, proofs and report.json.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "table")]
    format: FormatArg,
    /// Prover command speaking the line protocol; without it each problem
    /// uses its `<problem>.toy.toml`.
    #[arg(long)]
    prover: Option<String>,
    /// Seconds allowed for one tactic application.
    #[arg(long, default_value_t = 30.0)]
    apply_timeout: f64,
    #[arg(long, default_value = "nlinarith")]
    fallback_tactic: String,
    /// Report zero wall times so reports are reproducible byte for byte.
    #[arg(long)]
    no_timing: bool,
}

fn seconds(name: &str, value: f64) -> Result<Duration, String> {
    Duration::try_from_secs_f64(value)
        .ok()
        .filter(|d| !d.is_zero())
        .ok_or_else(|| format!("--{name} must be a positive number of seconds"))
}

impl RunOpts {
    fn run_config(&self, tier: TierChoice, default_runs: u32) -> Result<RunConfig, String> {
        let agent = match self.agent {
            AgentArg::FewShot => AgentKind::FewShot,
            AgentArg::Copra => AgentKind::Copra,
            AgentArg::Feas => AgentKind::Feas,
            AgentArg::FeasHeuristics => AgentKind::FeasHeuristics,
        };
        let kind = match self.backend {
            BackendArg::Remote => BackendKind::Remote(RemoteSettings::from_env(self.endpoint.clone(), self.model.clone()).map_err(|e| e.to_string())?),
            BackendArg::Replay => BackendKind::Replay {
                transcript: self.transcript.clone().ok_or("--backend replay needs --transcript")?,
            },
            BackendArg::Scripted => BackendKind::Scripted { script: self.script.clone() },
        };
        if !self.temperature.is_finite() || self.temperature < 0.0 {
            return Err("--temperature must be a non-negative number".into());
        }
        let backend = BackendConfig {
            kind,
            temperature: self.temperature,
        };
        let env_kind = match &self.prover {
            None => EnvKind::Toy,
            Some(cmd) => {
                let mut words = cmd.split_whitespace().map(str::to_string);
                let program = words.next().ok_or("--prover is empty")?;
                EnvKind::External {
                    program,
                    args: words.collect(),
                }
            }
        };
        let env = EnvConfig {
            kind: env_kind,
            apply_timeout: seconds("apply-timeout", self.apply_timeout)?,
            fallback_tactic: self.fallback_tactic.clone(),
        };
        let mut cfg = RunConfig::new(agent, tier, backend, env);
        cfg.runs_per_problem = self.runs.unwrap_or(default_runs);
        cfg.search = SearchConfig {
            max_queries: self.max_queries,
            timeout: seconds("timeout", self.timeout)?,
            retry_limit: self.retry_limit,
            ..SearchConfig::default()
        };
        cfg.workers = self.workers;
        cfg.out = self.out.clone();
        cfg.record_timing = !self.no_timing;
        cfg.validate().map_err(|e| e.to_string())?;
        Ok(cfg)
    }

    fn format(&self) -> ReportFormat {
        match self.format {
            FormatArg::Table => ReportFormat::Table,
            FormatArg::Structured => ReportFormat::Structured,
        }
    }
}

fn tier_choice(t: TierArg) -> TierChoice {
    match t {
        TierArg::Simple => TierChoice::Simple,
        TierArg::Intermediate => TierChoice::Intermediate,
        TierArg::Hard => TierChoice::Hard,
        TierArg::A1 => TierChoice::A1,
    }
}

fn config_error(message: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {message}");
    ExitCode::from(EXIT_CONFIG)
}

fn harness_exit(e: HarnessError) -> ExitCode {
    match e {
        HarnessError::Io { .. } => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_RUNTIME)
        }
        other => config_error(other),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        2 => "debug",
        _ => "trace",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    match cli.command {
        Command::ServeToy { spec } => {
            let spec = match ToyEnvSpec::load(&spec) {
                Ok(s) => s,
                Err(e) => return config_error(e),
            };
            let mut env = match ToyEnv::new(spec) {
                Ok(env) => env,
                Err(e) => return config_error(e),
            };
            match wire::serve(&mut env, BufReader::new(io::stdin().lock()), io::stdout().lock()) {
                Ok(()) => ExitCode::SUCCESS,
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(EXIT_RUNTIME)
                }
            }
        }
        Command::Prove { problem, opts } => {
            let problem = match Problem::load_file(&problem) {
                Ok(p) => p,
                Err(e) => return config_error(e),
            };
            let tier = opts.tier.map(tier_choice).unwrap_or(match problem.tier {
                feas::dataset::Tier::Simple => TierChoice::Simple,
                feas::dataset::Tier::Intermediate => TierChoice::Intermediate,
                feas::dataset::Tier::Hard => TierChoice::Hard,
            });
            let cfg = match opts.run_config(tier, 1) {
                Ok(c) => c,
                Err(e) => return config_error(e),
            };
            let report = match run_problems(std::slice::from_ref(&problem), &cfg) {
                Ok(r) => r,
                Err(e) => return harness_exit(e),
            };
            print!("{}", emit_report(&report, opts.format()));
            if let ReportFormat::Table = opts.format() {
                for run in report.problems.iter().flat_map(|p| &p.runs) {
                    let status = run.status.map_or("failed", |s| s.name());
                    println!("run {}: {status} after {} queries", run.run, run.queries_used);
                    if let Some(err) = &run.error {
                        println!("  {err}");
                    }
                    if let Some(proof) = &run.proof {
                        println!("{}", proof.join(",\n"));
                    }
                }
            }
            ExitCode::SUCCESS
        }
        Command::Bench { root, opts } => {
            let tier = opts.tier.map(tier_choice).unwrap_or(TierChoice::Simple);
            let cfg = match opts.run_config(tier, tier.default_runs()) {
                Ok(c) => c,
                Err(e) => return config_error(e),
            };
            match run_benchmark(&root, &cfg) {
                Ok(report) => {
                    print!("{}", emit_report(&report, opts.format()));
                    ExitCode::SUCCESS
                }
                Err(e) => harness_exit(e),
            }
        }
    }
}
