//! The MiniC language: syntax, typing and concrete semantics.

pub mod ast;
mod check;
pub mod interp;
pub mod lexer;
mod parser;

pub use ast::*;
pub use check::LocInfo;
pub use interp::{Configuration, InputDomain, InputValue, RteClass, State, Step, Terminal, Trace, Value};

use std::collections::{BTreeMap, HashMap};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LangError {
    #[error("syntax error at line {line}: {msg}")]
    Syntax { line: u32, msg: String },
    #[error("type error at line {line}: {msg}")]
    Type { line: u32, msg: String },
    #[error("recursive call cycle: {}", .0.join(" -> "))]
    Recursion(Vec<String>),
    #[error("no entry function: {0}")]
    NoEntry(String),
    #[error("bad input domain: {0}")]
    Domain(String),
}

/// A parsed and checked MiniC program.
#[derive(Debug, Clone)]
pub struct Program {
    pub functions: Vec<Function>,
    /// `main` when present.
    pub entry: Option<String>,
    source: String,
    index: HashMap<String, usize>,
    locs: BTreeMap<Location, LocInfo>,
    stmts: HashMap<Location, Stmt>,
    pub(crate) cfgs: Vec<interp::Cfg>,
}

/// Parses and checks a MiniC program.
pub fn parse_program(source: &str) -> Result<Program, LangError> {
    let functions = parser::Parser::new(source)?.program()?;
    let locs = check::check(&functions)?;
    let index = functions.iter().enumerate().map(|(i, f)| (f.name.clone(), i)).collect();
    let mut stmts = HashMap::new();
    for f in &functions {
        f.walk(&mut |s| {
            stmts.insert(s.loc.clone(), s.clone());
        });
    }
    let cfgs = functions.iter().map(interp::build_cfg).collect();
    let entry = functions.iter().any(|f| f.name == "main").then(|| "main".to_string());
    Ok(Program { functions, entry, source: source.to_string(), index, locs, stmts, cfgs })
}

impl Program {
    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn func_index(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn function(&self, name: &str) -> Option<&Function> {
        self.func_index(name).map(|i| &self.functions[i])
    }

    /// The statement at an instruction location.
    pub fn stmt_at(&self, loc: &Location) -> Option<&Stmt> {
        self.stmts.get(loc)
    }

    pub fn loc_info(&self, loc: &Location) -> Option<&LocInfo> {
        self.locs.get(loc)
    }

    /// Every location of the program (instructions plus entry/exit) in order.
    pub fn locations(&self) -> impl Iterator<Item = &Location> {
        self.locs.keys()
    }

    /// Name of the function containing `loc`.
    pub fn func_of(&self, loc: &Location) -> Option<&str> {
        self.locs.get(loc).map(|i| i.func.as_str())
    }

    /// Source text of one function, header through closing brace.
    pub fn function_text(&self, name: &str) -> String {
        let Some(f) = self.function(name) else {
            return String::new();
        };
        self.source
            .lines()
            .enumerate()
            .filter(|(i, _)| {
                let l = *i as u32 + 1;
                l >= f.line && l <= f.end_line
            })
            .map(|(_, l)| l)
            .filter(|l| !l.trim_start().starts_with("//@"))
            .collect::<Vec<_>>()
            .join("\n")
    }

    /// Location of the first instruction starting on `line`, if any.
    pub fn first_loc_on_line(&self, line: u32) -> Option<Location> {
        let l = Location::line(line, 0);
        self.stmts.contains_key(&l).then_some(l)
    }

    /// Locations of statements nested inside the loop at `loop_loc`.
    pub fn loop_body_locs(&self, loop_loc: &Location) -> Vec<Location> {
        let mut out = Vec::new();
        if let Some(Stmt { kind: StmtKind::While { body, .. }, .. }) = self.stmt_at(loop_loc) {
            for s in body {
                s.walk(&mut |x| out.push(x.loc.clone()));
            }
        }
        out
    }

    /// The innermost loops enclosing `loc`, outermost first.
    pub fn enclosing_loops(&self, loc: &Location) -> Vec<Location> {
        let Some(func) = self.func_of(loc).and_then(|n| self.function(n)) else {
            return Vec::new();
        };
        fn go(stmts: &[Stmt], target: &Location, path: &mut Vec<Location>) -> bool {
            for s in stmts {
                if &s.loc == target {
                    return true;
                }
                match &s.kind {
                    StmtKind::If { then_branch, else_branch, .. } => {
                        if go(then_branch, target, path) || go(else_branch, target, path) {
                            return true;
                        }
                    }
                    StmtKind::While { body, .. } => {
                        path.push(s.loc.clone());
                        if go(body, target, path) {
                            return true;
                        }
                        path.pop();
                    }
                    _ => {}
                }
            }
            false
        }
        let mut path = Vec::new();
        if go(&func.body, loc, &mut path) {
            path
        } else {
            Vec::new()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const ABS: &str = "int abs(int x) {\n  if (x < 0) {\n    return -x;\n  }\n  return x;\n}\n\nint main() {\n  int a = abs(-42);\n  int b = abs(INT_MIN);\n  return 0;\n}\n";

    #[test]
    fn parses_abs() {
        let p = parse_program(ABS).unwrap();
        assert_eq!(p.functions.len(), 2);
        assert_eq!(p.functions[0].params.len(), 1);
        assert_eq!(p.entry.as_deref(), Some("main"));
    }

    #[test]
    fn empty_source_is_syntax_error() {
        assert!(matches!(parse_program(""), Err(LangError::Syntax { .. })));
    }

    #[test]
    fn self_recursion_rejected() {
        let e = parse_program("int f() { int x = f(); return x; }").unwrap_err();
        assert_eq!(e, LangError::Recursion(vec!["f".into()]));
    }

    #[test]
    fn mutual_recursion_rejected() {
        let e = parse_program("int f() { int x = g(); return x; } int g() { int y = f(); return y; }").unwrap_err();
        assert!(matches!(e, LangError::Recursion(c) if c.len() == 2));
    }

    #[test]
    fn undeclared_identifier() {
        assert!(matches!(parse_program("int f() { return y; }"), Err(LangError::Type { .. })));
    }

    #[test]
    fn missing_return_rejected() {
        assert!(matches!(parse_program("int f(int x) { if (x < 0) { return 1; } }"), Err(LangError::Type { .. })));
    }

    #[test]
    fn array_param_needs_length() {
        assert!(parse_program("int f(int a[]) { return 0; }").is_err());
        assert!(parse_program("int f(int a[], int n) { return 0; }").is_ok());
    }

    #[test]
    fn locations_unique_and_ordered() {
        let p = parse_program("int f(int x) { int y = 1; y = y + 1; return y; }").unwrap();
        let lines: Vec<_> = p.locations().filter(|l| matches!(l, Location::Line { .. })).cloned().collect();
        assert_eq!(lines, vec![Location::line(1, 0), Location::line(1, 1), Location::line(1, 2)]);
    }

    #[test]
    fn enclosing_loops_found() {
        let src = "void f(int n) {\n int i = 0;\n while (i < n) {\n  i = i + 1;\n }\n}\n";
        let p = parse_program(src).unwrap();
        assert_eq!(p.enclosing_loops(&Location::line(4, 0)), vec![Location::line(3, 0)]);
        assert_eq!(p.loop_body_locs(&Location::line(3, 0)), vec![Location::line(4, 0)]);
    }
}
