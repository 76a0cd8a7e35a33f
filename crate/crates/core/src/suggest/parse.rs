//! Response parsing: locate the formal proof in a model response and cut it
//! into independently applicable tactic blocks.
//!
//! Blocks are split at commas and line breaks that sit at nesting depth zero.
//! Parentheses, brackets, braces, angle brackets, `begin`/`end`, string
//! literals and comments all protect their contents. A line break continues
//! the current block when the next line is indented deeper than the block's
//! first line or when the block so far ends in an operator such as `:=`.
//! Unbalanced input is never dropped: from the first unmatched closer on, or
//! for a construct left open at the end, the remainder becomes one block.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::prompt::AgentMode;
use crate::state::{SourceSpan, TacticBlock};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SuggestionResponse {
    pub raw_text: String,
    pub strategy_text: String,
    /// Byte range of the formal proof inside `raw_text`, if one was found.
    pub proof_range: Option<Range<usize>>,
}

impl SuggestionResponse {
    pub fn from_raw(raw_text: impl Into<String>) -> Self {
        let raw_text = raw_text.into();
        let (strategy_text, proof_range) = match last_fenced_region(&raw_text) {
            Some(region) => (raw_text[..region.fence_start].trim().to_string(), Some(region.body)),
            None => (String::new(), None),
        };
        SuggestionResponse {
            raw_text,
            strategy_text,
            proof_range,
        }
    }

    pub fn proof_text(&self) -> &str {
        match &self.proof_range {
            Some(r) => &self.raw_text[r.clone()],
            None => "",
        }
    }
}

struct FencedRegion {
    fence_start: usize,
    body: Range<usize>,
}

/// Finds the last ```-fenced region. An unterminated final fence runs to the
/// end of the text.
fn last_fenced_region(text: &str) -> Option<FencedRegion> {
    let mut last = None;
    let mut open: Option<(usize, usize)> = None;
    let mut offset = 0;
    for line in text.split_inclusive('\n') {
        if line.trim_start().starts_with("```") {
            match open.take() {
                None => open = Some((offset, offset + line.len())),
                Some((fence_start, body_start)) => {
                    last = Some(FencedRegion {
                        fence_start,
                        body: body_start..offset,
                    })
                }
            }
        }
        offset += line.len();
    }
    if let Some((fence_start, body_start)) = open {
        last = Some(FencedRegion {
            fence_start,
            body: body_start..text.len(),
        });
    }
    last
}

/// Narrows a proof to the tactic sequence between its delimiters: the first
/// `begin` and the last `end`, or whatever follows a leading or `:=`-attached
/// `by`. Returns a byte range within `proof`.
pub fn strip_proof_delimiters(proof: &str) -> Range<usize> {
    let words = top_words(proof);
    if let Some(begin) = words.iter().find(|w| w.text == "begin") {
        let end = words
            .iter()
            .rev()
            .find(|w| w.text == "end" && w.start >= begin.end)
            .map(|w| w.start)
            .unwrap_or(proof.len());
        return begin.end..end;
    }
    if let Some(by) = words.iter().find(|w| w.text == "by") {
        let before = proof[..by.start].trim_end();
        if before.is_empty() || before.ends_with(":=") {
            return by.end..proof.len();
        }
    }
    0..proof.len()
}

/// PARSETACTIC: turns a response into the blocks to apply, according to the
/// agent mode. An empty result means the response could not be used.
pub fn parse_response(resp: &SuggestionResponse, mode: AgentMode) -> Vec<TacticBlock> {
    let Some(range) = resp.proof_range.clone() else {
        return Vec::new();
    };
    let proof = &resp.raw_text[range.clone()];
    let inner = strip_proof_delimiters(proof);
    let start = range.start + inner.start;
    let body = &resp.raw_text[start..range.start + inner.end];
    let base_line = line_of(&resp.raw_text, start);
    match mode {
        AgentMode::Feas => segment_from(body, base_line),
        AgentMode::FewShot => whole_block(body, base_line).into_iter().collect(),
        AgentMode::Copra => first_tactic(body, base_line).into_iter().collect(),
    }
}

/// Splits a delimiter-free tactic script into top-level blocks.
pub fn segment_blocks(proof_text: &str) -> Vec<TacticBlock> {
    segment_from(proof_text, 1)
}

/// Rebuilds a script from blocks, restoring each block's separator.
pub fn join_blocks(blocks: &[TacticBlock]) -> String {
    let mut out = String::new();
    for b in blocks {
        out.push_str(b.text());
        out.push_str(b.separator());
        out.push('\n');
    }
    out
}

/// Whitespace normalization under which `join_blocks(segment_blocks(x))`
/// reproduces `x`: runs of whitespace become one space, spaces next to commas
/// are dropped, and leading separators are removed.
pub fn normalize_script(text: &str) -> String {
    let collapsed = crate::state::normalize_whitespace(text);
    let mut out = String::with_capacity(collapsed.len());
    let chars: Vec<char> = collapsed.chars().collect();
    for (i, &c) in chars.iter().enumerate() {
        if c == ' ' {
            let prev = if i > 0 { chars[i - 1] } else { ',' };
            let next = chars.get(i + 1).copied().unwrap_or(',');
            if prev == ',' || next == ',' {
                continue;
            }
        }
        out.push(c);
    }
    out.trim_start_matches([',', ' ']).to_string()
}

fn line_of(text: &str, byte: usize) -> usize {
    1 + text[..byte].bytes().filter(|&b| b == b'\n').count()
}

fn span_block(text: &str, range: Range<usize>, base_line: usize) -> Option<TacticBlock> {
    let slice = &text[range.clone()];
    let lead = slice.len() - slice.trim_start().len();
    let trimmed = slice.trim();
    if trimmed.is_empty() {
        return None;
    }
    let start = range.start + lead;
    let end = start + trimmed.len();
    let span = SourceSpan {
        start_line: base_line + line_of(text, start) - 1,
        end_line: base_line + line_of(text, end) - 1,
    };
    TacticBlock::llm(trimmed, span).ok()
}

fn whole_block(body: &str, base_line: usize) -> Option<TacticBlock> {
    span_block(body, 0..body.len(), base_line)
}

/// Single-tactic reading: the first non-blank line, extended over following
/// lines only while a bracket or `begin` is still open. Trailing commas are
/// dropped.
fn first_tactic(body: &str, base_line: usize) -> Option<TacticBlock> {
    let first = body.find(|c: char| !c.is_whitespace())?;
    let mut end = body.len();
    let mut cursor = first;
    while cursor < body.len() {
        let line_end = body[cursor..].find('\n').map(|i| cursor + i).unwrap_or(body.len());
        if Scanner::new(&body[first..line_end]).run().balanced() {
            end = line_end;
            break;
        }
        cursor = line_end + 1;
    }
    let tactic = body[first..end].trim_end_matches(|c: char| c == ',' || c.is_whitespace());
    span_block(body, first..first + tactic.len(), base_line)
}

fn segment_from(text: &str, base_line: usize) -> Vec<TacticBlock> {
    let scan = Scanner::new(text).run();
    let mut parts: Vec<(Range<usize>, String)> = Vec::new();
    let mut pending: Option<usize> = None;
    for seg in scan.segments {
        let slice = &text[seg.range.clone()];
        if slice.trim().is_empty() {
            // empty segment between separators, e.g. ",,"
            if let Some(last) = parts.last_mut() {
                last.1.push_str(&seg.separator);
            }
            continue;
        }
        let start = pending.take().unwrap_or(seg.range.start);
        if is_comment_only(slice) {
            pending = Some(start);
            continue;
        }
        parts.push((start..seg.range.end, seg.separator));
    }
    if let Some(start) = pending {
        // trailing comments join the previous block, separator included
        match parts.last_mut() {
            Some(last) => {
                last.0.end = text.len();
                last.1.clear();
            }
            None => parts.push((start..text.len(), String::new())),
        }
    }
    parts
        .into_iter()
        .filter_map(|(range, sep)| span_block(text, range, base_line).map(|b| b.with_separator(sep)))
        .collect()
}

fn is_comment_only(segment: &str) -> bool {
    let scan = Scanner::new(segment).run();
    scan.code_chars == 0 && !segment.trim().is_empty()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Opener {
    Paren,
    Bracket,
    Brace,
    Angle,
    Anon,
    Begin,
}

impl Opener {
    fn closes_with(self, c: char) -> bool {
        matches!(
            (self, c),
            (Opener::Paren, ')') | (Opener::Bracket, ']') | (Opener::Brace, '}') | (Opener::Angle, '⟩') | (Opener::Anon, '⦄')
        )
    }
}

struct Segment {
    range: Range<usize>,
    separator: String,
}

struct ScanResult {
    segments: Vec<Segment>,
    open_at_end: bool,
    broken: bool,
    code_chars: usize,
}

impl ScanResult {
    fn balanced(&self) -> bool {
        !self.open_at_end && !self.broken
    }
}

struct Word<'a> {
    text: &'a str,
    start: usize,
    end: usize,
}

/// Identifier-like words outside strings and comments.
fn top_words(text: &str) -> Vec<Word<'_>> {
    let mut words = Vec::new();
    let mut sc = Scanner::new(text);
    sc.word_sink = Some(&mut words);
    sc.run();
    words
}

fn is_ident_start(c: char) -> bool {
    c.is_alphabetic() || c == '_'
}

fn is_ident_char(c: char) -> bool {
    c.is_alphanumeric() || matches!(c, '_' | '\'' | '.' | '!' | '?') || ('₀'..='₉').contains(&c)
}

const CONTINUATION_SUFFIXES: &[&str] = &[
    ":=", "=", "→", "->", "↔", "<->", "$", "<|>", ";", "+", "-", "*", "/", "^", "∧", "∨", "≤", "≥", "<", ">", "≠", "∘", "|",
];
const CONTINUATION_WORDS: &[&str] = &["by", "from", "calc", "at", "with", "then", "else", "λ", "fun", "assume", "using"];
const CONTINUATION_PREFIXES: &[&str] = &["...", ":=", "<|>", "|", ";", "$", "="];

struct Scanner<'a, 'w> {
    text: &'a str,
    word_sink: Option<&'w mut Vec<Word<'a>>>,
}

impl<'a, 'w> Scanner<'a, 'w> {
    fn new(text: &'a str) -> Self {
        Scanner { text, word_sink: None }
    }

    fn run(mut self) -> ScanResult {
        let text = self.text;
        let chars: Vec<(usize, char)> = text.char_indices().collect();
        let mut stack: Vec<Opener> = Vec::new();
        let mut segments = Vec::new();
        let mut seg_start = 0usize;
        let mut broken = false;
        let mut code_chars = 0usize;
        let mut i = 0usize;

        while i < chars.len() {
            let (pos, c) = chars[i];
            let next = chars.get(i + 1).map(|&(_, c)| c);

            // comments
            if c == '-' && next == Some('-') {
                while i < chars.len() && chars[i].1 != '\n' {
                    i += 1;
                }
                continue;
            }
            if c == '/' && next == Some('-') {
                let mut depth = 0usize;
                while i < chars.len() {
                    let c0 = chars[i].1;
                    let c1 = chars.get(i + 1).map(|&(_, c)| c);
                    if c0 == '/' && c1 == Some('-') {
                        depth += 1;
                        i += 2;
                    } else if c0 == '-' && c1 == Some('/') {
                        depth -= 1;
                        i += 2;
                        if depth == 0 {
                            break;
                        }
                    } else {
                        i += 1;
                    }
                }
                continue;
            }
            if c == '"' {
                code_chars += 1;
                i += 1;
                while i < chars.len() {
                    match chars[i].1 {
                        '\\' => i += 2,
                        '"' => {
                            i += 1;
                            break;
                        }
                        _ => i += 1,
                    }
                }
                continue;
            }
            if is_ident_start(c) {
                let start = pos;
                let mut j = i;
                while j < chars.len() && is_ident_char(chars[j].1) {
                    j += 1;
                }
                let end = chars.get(j).map(|&(p, _)| p).unwrap_or(text.len());
                let word = &text[start..end];
                code_chars += 1;
                if !broken {
                    match word {
                        "begin" => stack.push(Opener::Begin),
                        "end" => {
                            if stack.last() == Some(&Opener::Begin) {
                                stack.pop();
                            } else {
                                broken = true;
                            }
                        }
                        _ => {}
                    }
                }
                if let Some(sink) = self.word_sink.as_deref_mut() {
                    sink.push(Word { text: word, start, end });
                }
                i = j;
                continue;
            }
            if !c.is_whitespace() {
                code_chars += 1;
            }
            if !broken {
                match c {
                    '(' => stack.push(Opener::Paren),
                    '[' => stack.push(Opener::Bracket),
                    '{' => stack.push(Opener::Brace),
                    '⟨' => stack.push(Opener::Angle),
                    '⦃' => stack.push(Opener::Anon),
                    ')' | ']' | '}' | '⟩' | '⦄' => match stack.last() {
                        Some(open) if open.closes_with(c) => {
                            stack.pop();
                        }
                        _ => broken = true,
                    },
                    ',' if stack.is_empty() => {
                        segments.push(Segment {
                            range: seg_start..pos,
                            separator: ",".to_string(),
                        });
                        seg_start = pos + 1;
                    }
                    '\n' if stack.is_empty() && !continues(text, seg_start, pos) => {
                        segments.push(Segment {
                            range: seg_start..pos,
                            separator: String::new(),
                        });
                        seg_start = pos + 1;
                    }
                    _ => {}
                }
            }
            i += 1;
        }
        segments.push(Segment {
            range: seg_start..text.len(),
            separator: String::new(),
        });
        ScanResult {
            segments,
            open_at_end: !stack.is_empty(),
            broken,
            code_chars,
        }
    }
}

fn indentation(text: &str, at: usize) -> usize {
    let line_start = text[..at].rfind('\n').map(|i| i + 1).unwrap_or(0);
    text[line_start..].chars().take_while(|c| *c == ' ' || *c == '\t').count()
}

/// Whether the line break at `newline` continues the block that began at
/// `seg_start` rather than ending it.
fn continues(text: &str, seg_start: usize, newline: usize) -> bool {
    let so_far = strip_line_comment(&text[seg_start..newline]).trim_end();
    if so_far.trim().is_empty() {
        return false;
    }
    if CONTINUATION_SUFFIXES.iter().any(|s| so_far.ends_with(s)) {
        return true;
    }
    if let Some(last) = so_far.split_whitespace().last() {
        if CONTINUATION_WORDS.contains(&last) {
            return true;
        }
    }
    let rest = &text[newline + 1..];
    let Some(offset) = rest.find(|c: char| !c.is_whitespace()) else {
        return false;
    };
    let next_at = newline + 1 + offset;
    let next_line = &text[next_at..];
    if CONTINUATION_PREFIXES.iter().any(|p| next_line.starts_with(p)) {
        return true;
    }
    let block_first = seg_start + text[seg_start..newline].find(|c: char| !c.is_whitespace()).unwrap_or(0);
    indentation(text, next_at) > indentation(text, block_first)
}

fn strip_line_comment(line: &str) -> &str {
    match line.rfind('\n') {
        Some(nl) => strip_line_comment_single(&line[nl + 1..]).map_or(line, |cut| &line[..nl + 1 + cut]),
        None => strip_line_comment_single(line).map_or(line, |cut| &line[..cut]),
    }
}

fn strip_line_comment_single(line: &str) -> Option<usize> {
    line.find("--")
}
