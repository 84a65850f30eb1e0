//! Reply parsing: fenced blocks, `//@` groups, alignment to source lines.

use crate::lang::Program;
use crate::spec::{clause_location, clause_property, parse_clauses, Clause, Origin};
use crate::synth::{CandidateSpec, Proposal, Stage};

/// Where a reply may place annotations.
#[derive(Debug, Clone)]
pub struct ReplyScope<'a> {
    pub prog: &'a Program,
    pub stage: Stage,
    /// Functions searched first when aligning a code line.
    pub funcs: Vec<String>,
}

/// The result of parsing one reply.
#[derive(Debug, Default)]
pub struct ParsedReply {
    pub proposals: Vec<Proposal>,
    pub diagnostics: Vec<String>,
}

/// ```-fenced block bodies; the whole text when there is no fence.
fn fenced_blocks(text: &str) -> Vec<String> {
    let mut blocks = Vec::new();
    let mut cur: Option<String> = None;
    for line in text.lines() {
        if line.trim_start().starts_with("```") {
            match cur.take() {
                Some(b) => blocks.push(b),
                None => cur = Some(String::new()),
            }
            continue;
        }
        if let Some(b) = cur.as_mut() {
            b.push_str(line);
            b.push('\n');
        }
    }
    if let Some(b) = cur {
        blocks.push(b);
    }
    if blocks.is_empty() && !text.contains("```") {
        blocks.push(text.to_string());
    }
    blocks
}

/// Drops a `NNN | ` or `    | ` prefix copied from the prompt.
fn strip_prefix(line: &str) -> &str {
    let t = line.trim_start();
    let digits = t.len() - t.trim_start_matches(|c: char| c.is_ascii_digit()).len();
    let rest = t[digits..].trim_start();
    match rest.strip_prefix('|') {
        Some(r) if digits > 0 || line.starts_with(' ') || line.starts_with('|') => r.strip_prefix(' ').unwrap_or(r),
        _ => line,
    }
}

fn squash(s: &str) -> String {
    s.chars().filter(|c| !c.is_whitespace()).collect()
}

impl ReplyScope<'_> {
    #[allow(clippy::reversed_empty_ranges)]
    fn lines_of(&self, f: &str) -> std::ops::RangeInclusive<u32> {
        match self.prog.function(f) {
            Some(f) => f.line..=f.end_line,
            None => 1..=0,
        }
    }

    /// The source line whose code matches `code`, preferring lines after
    /// `cursor` and functions in scope.
    fn align(&self, code: &str, cursor: u32) -> Option<u32> {
        let want = squash(code);
        if want.is_empty() {
            return None;
        }
        let src: Vec<&str> = self.prog.source().lines().collect();
        let matches = |l: &u32| src.get(*l as usize - 1).is_some_and(|s| squash(s) == want);
        let scoped: Vec<u32> = self.funcs.iter().flat_map(|f| self.lines_of(f)).filter(matches).collect();
        let all: Vec<u32> = (1..=src.len() as u32).filter(matches).collect();
        for cands in [&scoped, &all] {
            if let Some(l) = cands.iter().find(|l| **l > cursor).or(cands.first()) {
                return Some(*l);
            }
        }
        None
    }

    /// Header line used for a contract clause with no placeable code line.
    fn default_header(&self) -> Option<u32> {
        match self.stage {
            Stage::Host => self.funcs.first(),
            Stage::Callee if self.funcs.len() == 1 => self.funcs.first(),
            Stage::Callee => None,
        }
        .and_then(|f| self.prog.function(f))
        .map(|f| f.line)
    }
}

struct Group {
    text: String,
    first_line: u32,
    code: Option<String>,
}

fn groups(block: &str) -> Vec<Group> {
    let lines: Vec<&str> = block.lines().map(strip_prefix).collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < lines.len() {
        if !lines[i].trim_start().starts_with("//@") {
            i += 1;
            continue;
        }
        let first = i;
        let mut text = String::new();
        while i < lines.len() && lines[i].trim_start().starts_with("//@") {
            text.push_str(lines[i].trim_start().trim_start_matches("//@"));
            text.push('\n');
            i += 1;
        }
        let code = lines[i..]
            .iter()
            .map(|l| l.trim())
            .find(|t| !t.is_empty() && !t.starts_with("//"))
            .map(str::to_string);
        out.push(Group { text, first_line: first as u32 + 1, code });
    }
    out
}

fn raw(text: &str, code: Option<&str>) -> String {
    let mut s: String = text.lines().map(|l| format!("//@{l}\n")).collect();
    if let Some(c) = code {
        s.push_str(c);
    }
    s.trim_end().to_string()
}

/// Parses every `//@` group of a reply into proposals. Groups that fail to
/// parse, place or scope-check come back as `Proposal::Illegal` carrying the
/// error and the raw text with its code line, ready for correction.
pub fn parse_spec_response(text: &str, scope: &ReplyScope<'_>) -> ParsedReply {
    let mut out = ParsedReply::default();
    let mut cursor = 0;
    let mut n = 0;
    for block in fenced_blocks(text) {
        for g in groups(&block) {
            let raw_group = raw(&g.text, g.code.as_deref());
            let illegal = |error: String| Proposal::Illegal { stage: scope.stage, raw_text: raw_group.clone(), error };
            let clauses = match parse_clauses(&g.text, g.first_line) {
                Ok(cs) => cs,
                Err(e) => {
                    out.diagnostics.push(e.to_string());
                    out.proposals.push(illegal(e.to_string()));
                    continue;
                }
            };
            let aligned = g.code.as_deref().and_then(|c| scope.align(c, cursor));
            if let Some(l) = aligned {
                cursor = l;
            }
            for c in clauses {
                let contract = matches!(c.clause, Clause::Requires(_) | Clause::Ensures(_));
                let header = |l: u32| scope.prog.functions.iter().any(|f| f.line == l);
                let target = match aligned {
                    Some(l) if !contract || header(l) => Some(l),
                    _ if contract => scope.default_header(),
                    _ => None,
                };
                let one = raw(&format!(" {}", clause_text(&c.clause)), g.code.as_deref());
                let Some(line) = target else {
                    let msg = match &g.code {
                        Some(code) => format!("cannot place annotation: code line `{code}` is not in the program"),
                        None => "cannot place annotation: no code line follows it".to_string(),
                    };
                    out.diagnostics.push(msg.clone());
                    out.proposals.push(Proposal::Illegal { stage: scope.stage, raw_text: one, error: msg });
                    continue;
                };
                let placed = clause_location(scope.prog, &c.clause, line).and_then(|(at, func)| {
                    n += 1;
                    let id = c.label.clone().unwrap_or_else(|| format!("llm{n}"));
                    clause_property(scope.prog, c.clause.clone(), at, &func, id, Origin::Synthesized)
                        .map_err(|e| e.to_string())
                });
                match placed {
                    Ok(property) => {
                        let raw_text = format!("//@ {}\n{}", property.annotation(), g.code.as_deref().unwrap_or(""));
                        out.proposals.push(Proposal::Parsed(CandidateSpec {
                            property,
                            stage: scope.stage,
                            raw_text: raw_text.trim_end().to_string(),
                        }));
                    }
                    Err(e) => {
                        out.diagnostics.push(e.clone());
                        out.proposals.push(Proposal::Illegal { stage: scope.stage, raw_text: one, error: e });
                    }
                }
            }
        }
    }
    if out.proposals.is_empty() {
        out.diagnostics.push("reply contains no //@ annotation".into());
    }
    out
}

fn clause_text(c: &Clause) -> String {
    match c {
        Clause::Requires(p) => format!("requires {p};"),
        Clause::Ensures(p) => format!("ensures {p};"),
        Clause::Assert(p) => format!("assert {p};"),
        Clause::LoopInvariant(p) => format!("loop invariant {p};"),
        Clause::LoopAssigns(xs) if xs.is_empty() => "loop assigns \\nothing;".to_string(),
        Clause::LoopAssigns(xs) => format!("loop assigns {};", xs.iter().cloned().collect::<Vec<_>>().join(", ")),
    }
}
