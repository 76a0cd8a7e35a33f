//! Line-delimited JSON protocol between the search and an external prover.
//!
//! Each message is one JSON object on one line, UTF-8, terminated by `\n`.
//!
//! Requests:
//!
//! ```text
//! {"op":"init","theorem":"theorem t (x : ℕ) : x = x"}
//! {"op":"apply","state_id":"3","tactic":"intro x"}
//! ```
//!
//! Responses:
//!
//! ```text
//! {"status":"ok","state_id":"4","goals":[{"goal":"x = x","hypotheses":[{"name":"x","statement":"ℕ"}]}]}
//! {"status":"error","state_id":"3","message":"unknown identifier 'y'"}
//! {"status":"qed","state_id":"5"}
//! ```
//!
//! `state_id`s stay valid for the life of the session, so a client can go
//! back to any earlier state. [`serve`] exposes any [`ProverEnvironment`]
//! over this protocol.

use std::collections::HashMap;
use std::io::{BufRead, Write};
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use super::ProverEnvironment;
use crate::dataset::{Problem, Tier};
use crate::state::{Hypothesis, Obligation, ProofState, StateBody, StateId, TacticBlock};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Op {
    Init,
    Apply,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Request {
    pub op: Op,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub state_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tactic: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theorem: Option<String>,
}

impl Request {
    pub fn init(theorem: &str) -> Self {
        Request {
            op: Op::Init,
            state_id: None,
            tactic: None,
            theorem: Some(theorem.to_string()),
        }
    }

    pub fn apply(state_id: &str, tactic: &str) -> Self {
        Request {
            op: Op::Apply,
            state_id: Some(state_id.to_string()),
            tactic: Some(tactic.to_string()),
            theorem: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Ok,
    Error,
    Qed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WireGoal {
    pub goal: String,
    #[serde(default)]
    pub hypotheses: Vec<Hypothesis>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Response {
    pub status: Status,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub state_id: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub goals: Vec<WireGoal>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
}

impl Response {
    fn error(state_id: Option<String>, message: impl Into<String>) -> Self {
        Response {
            status: Status::Error,
            state_id,
            goals: Vec::new(),
            message: Some(message.into()),
        }
    }

    pub fn from_state(state: &ProofState) -> Self {
        let state_id = Some(state.id().to_string());
        match state.body() {
            StateBody::Qed => Response {
                status: Status::Qed,
                state_id,
                goals: Vec::new(),
                message: None,
            },
            StateBody::Error { message } => Response::error(state_id, message.clone()),
            StateBody::Obligations { obligations } => Response {
                status: Status::Ok,
                state_id,
                goals: obligations
                    .iter()
                    .map(|o| WireGoal {
                        goal: o.goal().to_string(),
                        hypotheses: o.hypotheses().to_vec(),
                    })
                    .collect(),
                message: None,
            },
        }
    }
}

/// Converts wire goals to obligations. Repeated hypothesis names (shadowed
/// variables) get a `✝n` suffix so names stay unique.
pub fn goals_to_obligations(goals: &[WireGoal]) -> Result<Vec<Obligation>, String> {
    goals
        .iter()
        .map(|g| {
            let mut seen: HashMap<&str, usize> = HashMap::new();
            let hyps = g
                .hypotheses
                .iter()
                .map(|h| {
                    let n = seen.entry(h.name.as_str()).or_insert(0);
                    *n += 1;
                    let name = if *n == 1 { h.name.clone() } else { format!("{}✝{}", h.name, *n - 1) };
                    Hypothesis::new(name, h.statement.clone())
                })
                .collect();
            Obligation::new(g.goal.clone(), hyps).map_err(|e| e.to_string())
        })
        .collect()
}

/// Answers protocol requests from `input` on `output` until end of input.
pub fn serve<E: ProverEnvironment + ?Sized>(env: &mut E, input: impl BufRead, mut output: impl Write) -> std::io::Result<()> {
    let mut states: HashMap<String, ProofState> = HashMap::new();
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let response = match serde_json::from_str::<Request>(&line) {
            Err(e) => Response::error(None, format!("malformed request: {e}")),
            Ok(req) => handle(env, &mut states, req),
        };
        let text = serde_json::to_string(&response).expect("responses serialize");
        writeln!(output, "{text}")?;
        output.flush()?;
    }
    Ok(())
}

fn handle<E: ProverEnvironment + ?Sized>(env: &mut E, states: &mut HashMap<String, ProofState>, req: Request) -> Response {
    match req.op {
        Op::Init => {
            let Some(theorem) = req.theorem else {
                return Response::error(None, "init requires `theorem`");
            };
            let problem = Problem::from_source(&theorem, Tier::Simple, PathBuf::from("<wire>"));
            match env.init_problem(&problem) {
                Ok(state) => {
                    states.insert(state.id().to_string(), state.clone());
                    Response::from_state(&state)
                }
                Err(e) => Response::error(None, e.to_string()),
            }
        }
        Op::Apply => {
            let (Some(id), Some(tactic)) = (req.state_id, req.tactic) else {
                return Response::error(None, "apply requires `state_id` and `tactic`");
            };
            let Some(state) = states.get(&id).cloned() else {
                return Response::error(Some(id.clone()), format!("unknown state_id `{id}`"));
            };
            let block = match TacticBlock::plain(tactic) {
                Ok(b) => b,
                Err(e) => return Response::error(Some(id), e.to_string()),
            };
            match env.apply(&state, &block) {
                Ok(result) => {
                    if let StateBody::Obligations { .. } = result.state.body() {
                        states.insert(result.state.id().to_string(), result.state.clone());
                    }
                    Response::from_state(&result.state)
                }
                Err(e) => Response::error(Some(id), e.to_string()),
            }
        }
    }
}

pub(crate) fn state_from_response(resp: Response, fallback_id: &StateId) -> Result<ProofState, String> {
    let id = resp.state_id.map(StateId::new);
    match resp.status {
        Status::Qed => Ok(ProofState::qed(id.unwrap_or_else(|| StateId::new("QED")))),
        Status::Error => {
            let id = id.unwrap_or_else(|| StateId::new(format!("{fallback_id}/err")));
            let message = resp
                .message
                .filter(|m| !m.trim().is_empty())
                .unwrap_or_else(|| "prover reported an error without a message".to_string());
            Ok(ProofState::error(id, message).expect("non-empty message"))
        }
        Status::Ok => {
            let id = id.ok_or("`ok` response without state_id")?;
            Ok(ProofState::obligations(id, goals_to_obligations(&resp.goals)?))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::toy::{ToyEnv, ToyEnvSpec};

    #[test]
    fn message_shapes_are_stable() {
        assert_eq!(
            serde_json::to_string(&Request::apply("3", "intro x")).unwrap(),
            r#"{"op":"apply","state_id":"3","tactic":"intro x"}"#
        );
        assert_eq!(serde_json::to_string(&Request::init("theorem t : p")).unwrap(), r#"{"op":"init","theorem":"theorem t : p"}"#);
        let qed: Response = serde_json::from_str(r#"{"status":"qed","state_id":"5"}"#).unwrap();
        assert_eq!(qed.status, Status::Qed);
    }

    #[test]
    fn serve_answers_each_line() {
        let spec = ToyEnvSpec::new("S0").on("S0", "t", "S1").on("S1", "u", "QED");
        let mut env = ToyEnv::new(spec).unwrap();
        let input = [
            r#"{"op":"init","theorem":"theorem t : p"}"#,
            r#"{"op":"apply","state_id":"S0","tactic":"t"}"#,
            r#"{"op":"apply","state_id":"S0","tactic":"nope"}"#,
            r#"{"op":"apply","state_id":"S1","tactic":"u"}"#,
            r#"{"op":"apply","state_id":"S7","tactic":"u"}"#,
            "not json",
        ]
        .join("\n");
        let mut out = Vec::new();
        serve(&mut env, input.as_bytes(), &mut out).unwrap();
        let lines: Vec<Response> = String::from_utf8(out)
            .unwrap()
            .lines()
            .map(|l| serde_json::from_str(l).unwrap())
            .collect();
        let statuses: Vec<Status> = lines.iter().map(|r| r.status).collect();
        assert_eq!(statuses, vec![Status::Ok, Status::Ok, Status::Error, Status::Qed, Status::Error, Status::Error]);
        assert_eq!(lines[1].goals[0].goal, "S1");
    }

    #[test]
    fn shadowed_hypotheses_are_renamed() {
        let goals = vec![WireGoal {
            goal: "p".into(),
            hypotheses: vec![Hypothesis::new("x", "ℕ"), Hypothesis::new("x", "ℝ")],
        }];
        let obs = goals_to_obligations(&goals).unwrap();
        assert_eq!(obs[0].hypotheses()[1].name, "x✝1");
    }
}
