//! Drives a prover that speaks the [`wire`](super::wire) protocol over a pipe.

use std::io::{BufRead, BufReader, Write};
use std::process::{Child, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::thread;
use std::time::{Duration, Instant};

use super::wire::{state_from_response, Request, Response, Status};
use super::{ApplyResult, EnvError, ProverEnvironment, DEFAULT_APPLY_TIMEOUT, DEFAULT_FALLBACK_TACTIC};
use crate::dataset::Problem;
use crate::state::{ProofState, StateId, StateKind, TacticBlock};

pub const DEFAULT_INIT_TIMEOUT: Duration = Duration::from_secs(300);

/// One prover session. Requests are strictly sequential; a timed-out or
/// garbled reply desynchronizes the pipe, so the session is then marked dead
/// and every later call fails with [`EnvError::SessionDead`].
pub struct ExternalProver {
    child: Option<Child>,
    writer: Box<dyn Write + Send>,
    lines: Receiver<std::io::Result<String>>,
    apply_timeout: Duration,
    init_timeout: Duration,
    fallback: String,
    dead: Option<String>,
    initialized: bool,
}

impl ExternalProver {
    /// Starts `program args...` with piped stdin and stdout.
    pub fn spawn(program: &str, args: &[String]) -> Result<Self, EnvError> {
        let mut child = Command::new(program)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| EnvError::Start(format!("{program}: {e}")))?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        let mut prover = Self::from_streams(BufReader::new(stdout), stdin);
        prover.child = Some(child);
        Ok(prover)
    }

    pub fn from_streams(reader: impl BufRead + Send + 'static, writer: impl Write + Send + 'static) -> Self {
        let (tx, rx) = mpsc::channel();
        thread::spawn(move || {
            for line in reader.lines() {
                if tx.send(line).is_err() {
                    break;
                }
            }
        });
        ExternalProver {
            child: None,
            writer: Box::new(writer),
            lines: rx,
            apply_timeout: DEFAULT_APPLY_TIMEOUT,
            init_timeout: DEFAULT_INIT_TIMEOUT,
            fallback: DEFAULT_FALLBACK_TACTIC.to_string(),
            dead: None,
            initialized: false,
        }
    }

    pub fn with_apply_timeout(mut self, timeout: Duration) -> Self {
        self.apply_timeout = timeout;
        self
    }

    pub fn with_init_timeout(mut self, timeout: Duration) -> Self {
        self.init_timeout = timeout;
        self
    }

    pub fn with_fallback_tactic(mut self, name: &str) -> Self {
        self.fallback = name.to_string();
        self
    }

    pub fn is_alive(&self) -> bool {
        self.dead.is_none()
    }

    fn kill(&mut self, reason: String) -> EnvError {
        log::warn!("prover session dead: {reason}");
        if let Some(mut child) = self.child.take() {
            let _ = child.kill();
            let _ = child.wait();
        }
        self.dead = Some(reason.clone());
        EnvError::SessionDead(reason)
    }

    fn round_trip(&mut self, request: &Request, timeout: Duration) -> Result<Response, EnvError> {
        if let Some(reason) = &self.dead {
            return Err(EnvError::SessionDead(reason.clone()));
        }
        let text = serde_json::to_string(request).expect("requests serialize");
        if let Err(e) = writeln!(self.writer, "{text}").and_then(|_| self.writer.flush()) {
            return Err(self.kill(format!("write failed: {e}")));
        }
        let line = match self.lines.recv_timeout(timeout) {
            Ok(Ok(line)) => line,
            Ok(Err(e)) => return Err(self.kill(format!("read failed: {e}"))),
            Err(RecvTimeoutError::Timeout) => {
                self.kill(format!("no reply within {timeout:?}"));
                return Err(EnvError::Timeout(timeout));
            }
            Err(RecvTimeoutError::Disconnected) => return Err(self.kill("prover closed its output".into())),
        };
        serde_json::from_str(&line).map_err(|e| self.kill(format!("unparseable reply `{line}`: {e}")))
    }
}

impl ProverEnvironment for ExternalProver {
    fn init_problem(&mut self, problem: &Problem) -> Result<ProofState, EnvError> {
        let resp = self.round_trip(&Request::init(&problem.statement_text), self.init_timeout)?;
        if resp.status != Status::Ok {
            let message = resp.message.unwrap_or_else(|| format!("init answered {:?}", resp.status));
            return Err(EnvError::ProblemRejected(message));
        }
        let state = state_from_response(resp, &StateId::new("init")).map_err(EnvError::Protocol)?;
        self.initialized = true;
        Ok(state)
    }

    fn apply(&mut self, state: &ProofState, tactic: &TacticBlock) -> Result<ApplyResult, EnvError> {
        if !self.initialized {
            return Err(EnvError::NotInitialized);
        }
        if state.kind() != StateKind::Obligations {
            return Err(EnvError::NotOpen(state.kind().name()));
        }
        let started = Instant::now();
        let resp = self.round_trip(&Request::apply(state.id().as_str(), tactic.text()), self.apply_timeout)?;
        let next = state_from_response(resp, state.id()).map_err(EnvError::Protocol)?;
        Ok(ApplyResult {
            state: next,
            elapsed: started.elapsed(),
        })
    }

    fn fallback_tactic(&self) -> &str {
        &self.fallback
    }
}

impl Drop for ExternalProver {
    fn drop(&mut self) {
        if let Some(mut child) = self.child.take() {
            let _ = child.kill();
            let _ = child.wait();
        }
    }
}

#[cfg(test)]
mod tests {
    use std::io::{BufReader, Read};
    use std::path::PathBuf;

    use super::*;
    use crate::dataset::Tier;
    use crate::env::toy::{ToyEnv, ToyEnvSpec};
    use crate::env::wire::serve;

    /// An in-memory pipe pair with a toy server on the far end.
    fn toy_session(spec: ToyEnvSpec) -> ExternalProver {
        let (req_tx, req_rx) = os_pipe();
        let (resp_tx, resp_rx) = os_pipe();
        thread::spawn(move || {
            let mut env = ToyEnv::new(spec).unwrap();
            let _ = serve(&mut env, BufReader::new(req_rx), resp_tx);
        });
        ExternalProver::from_streams(BufReader::new(resp_rx), req_tx)
    }

    struct ChanWriter(mpsc::Sender<Vec<u8>>);
    struct ChanReader(Receiver<Vec<u8>>, Vec<u8>);

    impl Write for ChanWriter {
        fn write(&mut self, buf: &[u8]) -> std::io::Result<usize> {
            let _ = self.0.send(buf.to_vec());
            Ok(buf.len())
        }
        fn flush(&mut self) -> std::io::Result<()> {
            Ok(())
        }
    }

    impl Read for ChanReader {
        fn read(&mut self, buf: &mut [u8]) -> std::io::Result<usize> {
            if self.1.is_empty() {
                match self.0.recv() {
                    Ok(chunk) => self.1 = chunk,
                    Err(_) => return Ok(0),
                }
            }
            let n = buf.len().min(self.1.len());
            buf[..n].copy_from_slice(&self.1[..n]);
            self.1.drain(..n);
            Ok(n)
        }
    }

    fn os_pipe() -> (ChanWriter, ChanReader) {
        let (tx, rx) = mpsc::channel();
        (ChanWriter(tx), ChanReader(rx, Vec::new()))
    }

    fn problem() -> Problem {
        Problem::from_source("theorem t : p := sorry", Tier::Simple, PathBuf::new())
    }

    #[test]
    fn drives_a_toy_server() {
        let spec = ToyEnvSpec::new("S0").on("S0", "t", "S1").closable("S1");
        let mut prover = toy_session(spec);
        let s0 = prover.init_problem(&problem()).unwrap();
        let s1 = prover.apply(&s0, &TacticBlock::plain("t").unwrap()).unwrap().state;
        assert_eq!(s1.id().as_str(), "S1");
        let err = prover.apply(&s0, &TacticBlock::plain("x").unwrap()).unwrap().state;
        assert_eq!(err.kind(), StateKind::Error);
        assert!(prover.attempt_fallback(&s1).unwrap().state.is_qed());
    }

    #[test]
    fn silent_prover_times_out_then_session_is_dead() {
        let (req_tx, _req_rx) = os_pipe();
        let (_resp_tx, resp_rx) = os_pipe();
        let mut prover = ExternalProver::from_streams(BufReader::new(resp_rx), req_tx).with_init_timeout(Duration::from_millis(20));
        assert!(matches!(prover.init_problem(&problem()), Err(EnvError::Timeout(_))));
        assert!(!prover.is_alive());
        assert!(matches!(prover.init_problem(&problem()), Err(EnvError::SessionDead(_))));
    }

    #[test]
    fn closed_output_is_session_death() {
        let (req_tx, _req_rx) = os_pipe();
        let (resp_tx, resp_rx) = os_pipe();
        drop(resp_tx);
        let mut prover = ExternalProver::from_streams(BufReader::new(resp_rx), req_tx);
        assert!(matches!(prover.init_problem(&problem()), Err(EnvError::SessionDead(_))));
    }

    #[test]
    fn missing_binary_fails_to_start() {
        assert!(matches!(ExternalProver::spawn("/nonexistent/prover", &[]), Err(EnvError::Start(_))));
    }
}
