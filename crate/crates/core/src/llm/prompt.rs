//! Prompt assembly for the host and callee stages.

use super::LlmError;
use crate::lang::Program;
use crate::spec::{Property, PropKind};
use crate::synth::{Request, Stage};
use crate::verifier::render_obligation;
use serde::Serialize;
use std::fmt::Write as _;

const SYSTEM: &str = "You write MiniSpec annotations for MiniC programs. MiniC is a small C subset with \
32-bit signed ints, fixed-size local arrays and array parameters followed by their length. \
Annotations are `//@` comments placed directly above the construct they describe: \
`requires` and `ensures` above a function header, `loop invariant` and `loop assigns` above a \
`while`, `assert` above a statement. Predicates use C expressions plus `==>`, `\\forall integer k; \
lo <= k < hi ==> P`, `\\valid_read(a, lo, hi)`, `\\initialized(a, lo, hi)`, `\\result` and `\\old(x)`.";

const HOST_TASK: &str = "The guard assertion below could not be proved. First reason step by step about why \
the proof obligation fails. Then add the annotations the function needs for the assertion to verify: \
preconditions of this function, loop invariants and loop assigns clauses. Keep each precondition as weak as \
possible; it will be checked at every call site. Reply with the annotated function in one ```c fenced block.";

const CALLEE_TASK: &str = "The guard assertion below could not be proved. First reason step by step about which \
facts about the called functions the proof is missing. Then add postconditions (and loop invariants if \
needed) to the called functions only. Do not write any `requires` clause. Reply with the annotated callee \
functions in one ```c fenced block.";

const EXEMPLARS: &str = r#"Example 1. Guard `INT_MIN < x` before `return -x;` fails with goal `INT_MIN < x_0`.
```c
//@ requires INT_MIN < x;
int neg(int x) {
  return -x;
}
```
Example 2. Guard `\valid_read(a, i, i)` inside a counting loop fails because `i` is unconstrained at the loop head.
```c
int sum(int a[], int n) {
  int s = 0;
  int i = 0;
  //@ loop invariant 0 <= i;
  //@ loop assigns i, s;
  while (0 <= i && i < n) {
    s = s + a[i];
    i = i + 1;
  }
  return s;
}
```
Example 3. Guard `y != 0` after `int y = succ(x);` fails because nothing is known about `succ`.
```c
//@ ensures \result == x + 1;
int succ(int x) {
  return x + 1;
}
```"#;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PromptBundle {
    pub system: String,
    pub instructions: String,
    pub context: String,
    pub target: String,
    pub obligations: String,
    pub exemplars: String,
}

impl PromptBundle {
    /// The user message.
    pub fn user_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{}\n", self.instructions);
        let _ = writeln!(s, "Program context:\n```c\n{}```\n", self.context);
        let _ = writeln!(s, "Target guard assertion:\n{}\n", self.target);
        let _ = writeln!(s, "Proof obligations for the assertion:\n{}", self.obligations);
        let _ = writeln!(s, "Worked examples:\n{}", self.exemplars);
        s
    }

    pub fn len(&self) -> usize {
        self.system.len() + self.user_text().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Function text with `NNN | ` line prefixes and the known annotations of
/// that function placed above their lines.
fn annotated_function(prog: &Program, name: &str, specs: &[Property]) -> String {
    let Some(f) = prog.function(name) else { return String::new() };
    let lines: Vec<&str> = prog.source().lines().collect();
    let mut out = String::new();
    let own: Vec<&Property> = specs.iter().filter(|p| p.func == name).collect();
    let above = |line: u32| -> Vec<String> {
        own.iter()
            .filter(|p| match (&p.kind, p.at.file_line()) {
                (PropKind::Precondition | PropKind::Postcondition, _) => line == f.line,
                (_, l) => l == line,
            })
            .map(|p| p.annotation())
            .collect()
    };
    for line in f.line..=f.end_line {
        let text = lines.get(line as usize - 1).copied().unwrap_or("");
        if text.trim_start().starts_with("//@") {
            continue;
        }
        let indent: String = text.chars().take_while(|c| c.is_whitespace()).collect();
        for a in above(line) {
            let _ = writeln!(out, "    | {indent}//@ {a}");
        }
        let _ = writeln!(out, "{line:>3} | {text}");
    }
    out
}

pub fn build_prompt(mode: Stage, req: &Request<'_>, budget: usize) -> Result<PromptBundle, LlmError> {
    let funcs: Vec<&str> = match mode {
        Stage::Host => vec![req.unit.host.as_str()],
        Stage::Callee => req.unit.context.iter().map(String::as_str).collect(),
    };
    let mut context = String::new();
    for f in &funcs {
        context.push_str(&annotated_function(req.prog, f, req.context));
        context.push('\n');
    }
    let g = &req.unit.guard;
    let target = format!("`{}` at line {} of `{}`", g.predicate, g.at.file_line(), g.func);
    let obligations: String = req.verdict.feedback.iter().map(render_obligation).collect::<Vec<_>>().join("\n");
    let bundle = PromptBundle {
        system: SYSTEM.to_string(),
        instructions: match mode {
            Stage::Host => HOST_TASK,
            Stage::Callee => CALLEE_TASK,
        }
        .to_string(),
        context,
        target,
        obligations,
        exemplars: EXEMPLARS.to_string(),
    };
    if bundle.len() > budget {
        return Err(LlmError::ContextTooLarge { bytes: bundle.len(), budget });
    }
    Ok(bundle)
}

/// Message asking for one illegal candidate to be fixed.
pub fn correction_text(raw: &str, error: &str) -> String {
    format!(
        "This annotation was rejected:\n```c\n{raw}\n```\nError: {error}\n\
         Reply with a corrected version in one ```c fenced block, keeping the code line that follows the \
         annotation so it can be placed. If it cannot be expressed legally, reply with an empty block."
    )
}
