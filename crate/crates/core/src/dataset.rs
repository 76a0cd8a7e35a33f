//! Problem files laid out as `root/{simple,intermediate,hard}/<name>.lean`,
//! one theorem per file.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::state::{normalize_whitespace, Hypothesis, Obligation, StateError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tier {
    Simple,
    Intermediate,
    Hard,
}

impl Tier {
    pub const ALL: [Tier; 3] = [Tier::Simple, Tier::Intermediate, Tier::Hard];

    pub fn dir_name(self) -> &'static str {
        match self {
            Tier::Simple => "simple",
            Tier::Intermediate => "intermediate",
            Tier::Hard => "hard",
        }
    }
}

impl fmt::Display for Tier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.dir_name())
    }
}

impl FromStr for Tier {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Tier::ALL
            .into_iter()
            .find(|t| t.dir_name() == s)
            .ok_or_else(|| format!("unknown tier `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TierSelect {
    One(Tier),
    All,
}

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("dataset root {0} does not exist")]
    MissingRoot(PathBuf),
    #[error("tier directory {0} does not exist")]
    MissingTier(PathBuf),
    #[error("reading {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Header { path: PathBuf, message: String },
    #[error(transparent)]
    State(#[from] StateError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Problem {
    pub name: String,
    pub tier: Tier,
    pub statement_text: String,
    pub source_path: PathBuf,
}

impl Problem {
    /// Builds a problem from file contents. The name is the declared theorem
    /// name, or the file stem if no declaration is found.
    pub fn from_source(text: &str, tier: Tier, source_path: PathBuf) -> Self {
        let statement_text = extract_statement(text);
        let name = declarations(&statement_text)
            .first()
            .map(|d| d.name.clone())
            .or_else(|| source_path.file_stem().map(|s| s.to_string_lossy().into_owned()))
            .unwrap_or_default();
        Problem {
            name,
            tier,
            statement_text,
            source_path,
        }
    }

    pub fn load(path: &Path, tier: Tier) -> Result<Self, DatasetError> {
        let text = std::fs::read_to_string(path).map_err(|source| DatasetError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Ok(Problem::from_source(&text, tier, path.to_path_buf()))
    }

    /// Reads a single problem file, inferring the tier from its parent
    /// directory name (defaulting to `simple`).
    pub fn load_file(path: &Path) -> Result<Self, DatasetError> {
        let tier = path
            .parent()
            .and_then(|p| p.file_name())
            .and_then(|n| n.to_str())
            .and_then(|n| n.parse().ok())
            .unwrap_or(Tier::Simple);
        Problem::load(path, tier)
    }

    /// The opening obligation: binders become hypotheses, the text after the
    /// header's top-level colon is the goal.
    pub fn root_obligation(&self) -> Result<Obligation, DatasetError> {
        let header = parse_header(&self.statement_text).map_err(|message| DatasetError::Header {
            path: self.source_path.clone(),
            message,
        })?;
        Ok(Obligation::new(header.goal, header.hypotheses)?)
    }
}

/// The theorem declaration through its `:=`, or the whole text if no
/// declaration keyword is present.
fn extract_statement(text: &str) -> String {
    let decls = declarations(text);
    let Some(first) = decls.first() else {
        return text.trim().to_string();
    };
    // Keep every declaration so validation can see duplicates.
    let from = &text[first.start..];
    match decls.len() {
        1 => match find_top_level(from, ":=") {
            Some(end) => from[..end].trim_end().to_string(),
            None => from.trim_end().to_string(),
        },
        _ => from.trim_end().to_string(),
    }
}

struct Declaration {
    name: String,
    start: usize,
    name_end: usize,
}

fn declaration_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?m)^\s*(?:theorem|lemma)\s+([^\s(\[{:⦃]+)").unwrap())
}

fn declarations(text: &str) -> Vec<Declaration> {
    let code = blank_comments(text);
    declaration_re()
        .captures_iter(&code)
        .map(|c| Declaration {
            name: c[1].to_string(),
            start: c.get(0).unwrap().start() + (c[0].len() - c[0].trim_start().len()),
            name_end: c.get(1).unwrap().end(),
        })
        .collect()
}

/// Replaces comment characters with spaces, preserving byte offsets.
fn blank_comments(text: &str) -> String {
    let bytes = text.as_bytes();
    let mut out = bytes.to_vec();
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i..].starts_with(b"--") {
            while i < bytes.len() && bytes[i] != b'\n' {
                out[i] = b' ';
                i += 1;
            }
        } else if bytes[i..].starts_with(b"/-") {
            let mut depth = 0;
            while i < bytes.len() {
                if bytes[i..].starts_with(b"/-") {
                    depth += 1;
                    out[i] = b' ';
                    out[i + 1] = b' ';
                    i += 2;
                } else if bytes[i..].starts_with(b"-/") {
                    depth -= 1;
                    out[i] = b' ';
                    out[i + 1] = b' ';
                    i += 2;
                    if depth == 0 {
                        break;
                    }
                } else {
                    if bytes[i] != b'\n' && bytes[i].is_ascii() {
                        out[i] = b' ';
                    }
                    i += 1;
                }
            }
        } else {
            i += 1;
        }
    }
    // Only ASCII bytes were replaced, so the result is still valid UTF-8.
    String::from_utf8(out).expect("ascii replacement keeps utf-8")
}

fn closing(c: char) -> Option<char> {
    match c {
        '(' => Some(')'),
        '[' => Some(']'),
        '{' => Some('}'),
        '⦃' => Some('⦄'),
        '⟨' => Some('⟩'),
        _ => None,
    }
}

/// Byte offset of `pat` at bracket depth zero.
fn find_top_level(text: &str, pat: &str) -> Option<usize> {
    let mut stack = Vec::new();
    for (i, c) in text.char_indices() {
        if let Some(close) = closing(c) {
            stack.push(close);
        } else if stack.last() == Some(&c) {
            stack.pop();
        } else if stack.is_empty() && text[i..].starts_with(pat) {
            return Some(i);
        }
    }
    None
}

struct Header {
    hypotheses: Vec<Hypothesis>,
    goal: String,
}

fn parse_header(statement: &str) -> Result<Header, String> {
    let decls = declarations(statement);
    let decl = decls.first().ok_or("no theorem declaration")?;
    let mut rest = &statement[decl.name_end..];
    if let Some(end) = find_top_level(rest, ":=") {
        rest = &rest[..end];
    }

    let mut hypotheses = Vec::new();
    loop {
        rest = rest.trim_start();
        let Some(open) = rest.chars().next() else {
            return Err("missing `:` before the goal".into());
        };
        if open == ':' {
            let goal = normalize_whitespace(&rest[1..]);
            return Ok(Header { hypotheses, goal });
        }
        let close = closing(open).ok_or_else(|| format!("unexpected `{open}` in binders"))?;
        let mut depth = 0usize;
        let mut end = None;
        for (i, c) in rest.char_indices() {
            if closing(c).is_some() {
                depth += 1;
            } else if c == ')' || c == ']' || c == '}' || c == '⦄' || c == '⟩' {
                depth -= 1;
                if depth == 0 {
                    if c != close {
                        return Err(format!("mismatched `{c}` in binders"));
                    }
                    end = Some(i);
                    break;
                }
            }
        }
        let end = end.ok_or("unbalanced binder")?;
        let inner = &rest[open.len_utf8()..end];
        rest = &rest[end + close.len_utf8()..];
        match find_top_level(inner, ":") {
            Some(colon) => {
                let ty = normalize_whitespace(&inner[colon + 1..]);
                for name in inner[..colon].split_whitespace() {
                    hypotheses.push(Hypothesis::new(name, ty.clone()));
                }
            }
            // anonymous instance binder, e.g. `[ring α]`
            None => hypotheses.push(Hypothesis::new(format!("_inst_{}", hypotheses.len() + 1), normalize_whitespace(inner))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Finding {
    pub problem: String,
    pub message: String,
}

/// Structural checks on a problem; an empty list means it is valid.
pub fn validate_problem(p: &Problem) -> Vec<Finding> {
    let mut findings = Vec::new();
    let mut note = |message: &str| {
        findings.push(Finding {
            problem: p.name.clone(),
            message: message.to_string(),
        })
    };
    match declarations(&p.statement_text).len() {
        0 => note("no declaration"),
        1 => {}
        _ => note("multiple declarations"),
    }
    match parse_header(&p.statement_text) {
        Ok(h) if h.goal.is_empty() => note("empty goal"),
        Ok(_) => {}
        Err(msg) if msg.contains("missing `:`") => note("empty goal"),
        Err(msg) => note(&format!("unparseable header: {msg}")),
    }
    findings
}

/// Problems sorted by name, then tier. A tier directory with no `.lean`
/// files yields nothing and logs a warning.
pub fn load_dataset(root: &Path, select: TierSelect) -> Result<Vec<Problem>, DatasetError> {
    if !root.is_dir() {
        return Err(DatasetError::MissingRoot(root.to_path_buf()));
    }
    let tiers: Vec<Tier> = match select {
        TierSelect::One(t) => vec![t],
        TierSelect::All => Tier::ALL.to_vec(),
    };
    let mut problems = Vec::new();
    for tier in tiers {
        let dir = root.join(tier.dir_name());
        if !dir.is_dir() {
            return Err(DatasetError::MissingTier(dir));
        }
        let entries = std::fs::read_dir(&dir).map_err(|source| DatasetError::Io {
            path: dir.clone(),
            source,
        })?;
        let mut found = 0;
        for entry in entries {
            let entry = entry.map_err(|source| DatasetError::Io {
                path: dir.clone(),
                source,
            })?;
            let path = entry.path();
            if path.is_file() && path.extension().is_some_and(|e| e == "lean") {
                problems.push(Problem::load(&path, tier)?);
                found += 1;
            }
        }
        if found == 0 {
            log::warn!("tier directory {} contains no problems", dir.display());
        }
    }
    problems.sort_by(|a, b| (&a.name, a.tier, &a.source_path).cmp(&(&b.name, b.tier, &b.source_path)));
    Ok(problems)
}

fn a1_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?i)(?:^|[^a-z])a1(?:$|[^0-9])").unwrap())
}

/// The A1 problems of the hard tier, recognised by an `A1` marker in the name
/// (`imo_2005_a1`, `2019A1`, ...).
pub fn select_a1_subset(problems: &[Problem]) -> Vec<Problem> {
    let picked: Vec<Problem> = problems.iter().filter(|p| a1_re().is_match(&p.name)).cloned().collect();
    if picked.is_empty() && !problems.is_empty() {
        log::warn!("no A1-marked problems among {} hard-tier problems", problems.len());
    }
    picked
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub root: PathBuf,
    pub tiers: BTreeMap<Tier, Vec<String>>,
}

impl DatasetManifest {
    pub fn build(root: &Path, problems: &[Problem]) -> Self {
        let mut tiers: BTreeMap<Tier, Vec<String>> = BTreeMap::new();
        for p in problems {
            tiers.entry(p.tier).or_default().push(p.name.clone());
        }
        DatasetManifest {
            root: root.to_path_buf(),
            tiers,
        }
    }

    pub fn count(&self, tier: Tier) -> usize {
        self.tiers.get(&tier).map_or(0, Vec::len)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) const INTERMEDIATE_FUNEQ_2: &str = "\
theorem intermediate_funeq_2
(f : ℝ → ℝ)
(h_0 : ∀ x, f(x + 1) = f(x) + 1)
(h_1 : ∀ x, x ≠ 0 → f(1/x) = f(x)/x^2) :
∀ x, x ≠ 0 → f(1 + 1/x) = 1 + f(x)/x^2 :=
begin
  sorry
end
";

    fn problem(text: &str) -> Problem {
        Problem::from_source(text, Tier::Intermediate, PathBuf::from("intermediate/x.lean"))
    }

    #[test]
    fn multi_binder_header_parses_into_one_obligation() {
        let p = problem(INTERMEDIATE_FUNEQ_2);
        assert_eq!(p.name, "intermediate_funeq_2");
        assert!(validate_problem(&p).is_empty());
        let ob = p.root_obligation().unwrap();
        let names: Vec<&str> = ob.hypotheses().iter().map(|h| h.name.as_str()).collect();
        assert_eq!(names, vec!["f", "h_0", "h_1"]);
        assert_eq!(ob.goal(), "∀ x, x ≠ 0 → f(1 + 1/x) = 1 + f(x)/x^2");
        assert_eq!(ob.hypotheses()[1].statement, "∀ x, f(x + 1) = f(x) + 1");
        assert!(!p.statement_text.contains("sorry"));
    }

    #[test]
    fn two_declarations_are_flagged() {
        let text = "theorem a (x : ℕ) : x = x := rfl\nlemma b : true := trivial\n";
        let findings = validate_problem(&problem(text));
        assert!(findings.iter().any(|f| f.message == "multiple declarations"));
    }

    #[test]
    fn missing_goal_is_flagged() {
        let f = validate_problem(&problem("theorem a (x : ℕ) : := rfl"));
        assert!(f.iter().any(|f| f.message == "empty goal"), "{f:?}");
        let g = validate_problem(&problem("theorem a (x : ℕ)"));
        assert!(g.iter().any(|f| f.message == "empty goal"), "{g:?}");
    }

    #[test]
    fn grouped_and_instance_binders() {
        let p = problem("theorem t {α : Type} [ring α] (x y : α) (h : x = y) : y = x := h.symm");
        let ob = p.root_obligation().unwrap();
        let names: Vec<&str> = ob.hypotheses().iter().map(|h| h.name.as_str()).collect();
        assert_eq!(names, vec!["α", "_inst_2", "x", "y", "h"]);
        assert_eq!(ob.goal(), "y = x");
    }

    #[test]
    fn commented_out_declarations_do_not_count() {
        let p = problem("-- theorem old : false\n/- lemma x : true -/\ntheorem t : 1 = 1 := rfl");
        assert_eq!(p.name, "t");
        assert!(validate_problem(&p).is_empty());
    }

    #[test]
    fn a1_selection() {
        let mk = |n: &str| Problem::from_source(&format!("theorem {n} : true := trivial"), Tier::Hard, PathBuf::new());
        let all: Vec<Problem> = ["imo_2005_a1", "imo_2005_a2", "imo2019a1", "imo_2010_A1", "imo_2008_a10", "data1"]
            .iter()
            .map(|n| mk(n))
            .collect();
        let names: Vec<String> = select_a1_subset(&all).into_iter().map(|p| p.name).collect();
        assert_eq!(names, vec!["imo_2005_a1", "imo2019a1", "imo_2010_A1"]);
        assert!(select_a1_subset(&[]).is_empty());
        assert!(select_a1_subset(&all[1..2]).is_empty());
    }

    #[test]
    fn loading_sorts_and_rejects_missing_tiers() {
        let dir = tempfile::tempdir().unwrap();
        let simple = dir.path().join("simple");
        std::fs::create_dir_all(&simple).unwrap();
        std::fs::write(simple.join("b.lean"), "theorem b_thm : true := trivial").unwrap();
        std::fs::write(simple.join("a.lean"), "theorem a_thm : true := trivial").unwrap();
        std::fs::write(simple.join("notes.txt"), "ignored").unwrap();
        let got = load_dataset(dir.path(), TierSelect::One(Tier::Simple)).unwrap();
        let names: Vec<&str> = got.iter().map(|p| p.name.as_str()).collect();
        assert_eq!(names, vec!["a_thm", "b_thm"]);
        assert!(matches!(
            load_dataset(dir.path(), TierSelect::One(Tier::Hard)),
            Err(DatasetError::MissingTier(_))
        ));
        std::fs::create_dir_all(dir.path().join("intermediate")).unwrap();
        assert!(load_dataset(dir.path(), TierSelect::One(Tier::Intermediate)).unwrap().is_empty());
        let manifest = DatasetManifest::build(dir.path(), &got);
        assert_eq!(manifest.count(Tier::Simple), 2);
        assert_eq!(manifest.count(Tier::Hard), 0);
    }

    #[test]
    fn statement_round_trips_through_disk() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.lean");
        std::fs::write(&path, INTERMEDIATE_FUNEQ_2).unwrap();
        let first = Problem::load(&path, Tier::Intermediate).unwrap();
        std::fs::write(&path, &first.statement_text).unwrap();
        let second = Problem::load(&path, Tier::Intermediate).unwrap();
        assert_eq!(first, second);
    }
}
