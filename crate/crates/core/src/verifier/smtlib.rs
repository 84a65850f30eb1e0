//! SMT-LIB v2 emission and the external solver driver.
//!
//! Arrays become uninterpreted functions `Int -> Int` with a length constant
//! and, when their initialization is unknown, an `Int -> Bool` function.

use super::logic::*;
use super::ProofObligation;
use crate::spec::Cmp;
use std::fmt::Write as _;
use std::io::{Read, Write};
use std::process::{Command, Stdio};
use std::time::Duration;
use wait_timeout::ChildExt;

fn q(name: &str) -> String {
    format!("|{name}|")
}

fn num(n: i128) -> String {
    if n < 0 {
        format!("(- {})", -n)
    } else {
        n.to_string()
    }
}

fn len_sym(base: &str) -> String {
    q(&format!("{base}.len"))
}

fn init_sym(base: &str) -> String {
    q(&format!("{base}.init"))
}

struct Emitter<'d> {
    decls: &'d [Decl],
    bound: usize,
}

impl Emitter<'_> {
    fn sort(&self, base: &str) -> Option<Sort> {
        self.decls.iter().find(|d| d.name == base).map(|d| d.sort)
    }

    fn term(&mut self, t: &LTerm) -> String {
        match t {
            LTerm::Int(n) => num(*n),
            LTerm::Sym(s) => q(s),
            LTerm::Len(a) => len_sym(a.base()),
            LTerm::Select(a, i) => {
                let i = self.term(i);
                self.select(a, &i)
            }
            LTerm::Neg(a) => format!("(- {})", self.term(a)),
            LTerm::Add(a, b) => format!("(+ {} {})", self.term(a), self.term(b)),
            LTerm::Sub(a, b) => format!("(- {} {})", self.term(a), self.term(b)),
            LTerm::Mul(a, b) => format!("(* {} {})", self.term(a), self.term(b)),
            LTerm::Div(a, b) => format!("(cdiv {} {})", self.term(a), self.term(b)),
            LTerm::Mod(a, b) => format!("(cmod {} {})", self.term(a), self.term(b)),
            LTerm::Ite(c, a, b) => format!("(ite {} {} {})", self.form(c), self.term(a), self.term(b)),
        }
    }

    fn select(&mut self, a: &LArr, i: &str) -> String {
        match a {
            LArr::Sym(s) => format!("({} {i})", q(s)),
            LArr::Store(b, j, v) => {
                let (j, v) = (self.term(j), self.term(v));
                format!("(ite (= {i} {j}) {v} {})", self.select(b, i))
            }
        }
    }

    fn init_cell(&mut self, a: &LArr, i: &str) -> String {
        match a {
            LArr::Sym(s) => match self.sort(s) {
                Some(Sort::Array { init: ArrInit::Full, .. }) => "true".into(),
                Some(Sort::Array { init: ArrInit::Empty, .. }) => "false".into(),
                _ => format!("({} {i})", init_sym(s)),
            },
            LArr::Store(b, j, _) => {
                let j = self.term(j);
                format!("(or (= {i} {j}) {})", self.init_cell(b, i))
            }
        }
    }

    fn fresh_bound(&mut self) -> String {
        self.bound += 1;
        q(&format!("k!{}", self.bound))
    }

    fn form(&mut self, f: &LForm) -> String {
        match f {
            LForm::Bool(b) => b.to_string(),
            LForm::BoolSym(s) => q(s),
            LForm::Cmp(c, a, b) => {
                let (a, b) = (self.term(a), self.term(b));
                match c {
                    Cmp::Lt => format!("(< {a} {b})"),
                    Cmp::Le => format!("(<= {a} {b})"),
                    Cmp::Gt => format!("(> {a} {b})"),
                    Cmp::Ge => format!("(>= {a} {b})"),
                    Cmp::Eq => format!("(= {a} {b})"),
                    Cmp::Ne => format!("(not (= {a} {b}))"),
                }
            }
            LForm::Not(x) => format!("(not {})", self.form(x)),
            LForm::And(xs) | LForm::Or(xs) => {
                let op = if matches!(f, LForm::And(_)) { "and" } else { "or" };
                let parts: Vec<String> = xs.iter().map(|x| self.form(x)).collect();
                format!("({op} {})", parts.join(" "))
            }
            LForm::Implies(a, b) => format!("(=> {} {})", self.form(a), self.form(b)),
            LForm::Forall(k, lo, hi, b) => {
                let (lo, hi, b) = (self.term(lo), self.term(hi), self.form(b));
                format!("(forall (({} Int)) (=> (and (<= {lo} {k}) (< {k} {hi})) {b}))", q(k), k = q(k))
            }
            LForm::Exists(k, lo, hi, b) => {
                let (lo, hi, b) = (self.term(lo), self.term(hi), self.form(b));
                format!("(exists (({} Int)) (and (<= {lo} {k}) (< {k} {hi}) {b}))", q(k), k = q(k))
            }
            LForm::Valid(a, lo, hi) => {
                let (lo, hi) = (self.term(lo), self.term(hi));
                format!("(or (> {lo} {hi}) (and (<= 0 {lo}) (< {hi} {})))", len_sym(a.base()))
            }
            LForm::InitRange(a, lo, hi) => {
                let (lo, hi) = (self.term(lo), self.term(hi));
                let k = self.fresh_bound();
                let cell = self.init_cell(a, &k);
                format!(
                    "(or (> {lo} {hi}) (and (<= 0 {lo}) (< {hi} {}) (forall (({k} Int)) (=> (and (<= {lo} {k}) (<= {k} {hi})) {cell}))))",
                    len_sym(a.base())
                )
            }
            LForm::InitCell(a, i) => {
                let i = self.term(i);
                self.init_cell(a, &i)
            }
            LForm::ArrEq(a, b) => {
                let k = self.fresh_bound();
                let (sa, sb) = (self.select(a, &k), self.select(b, &k));
                let (ia, ib) = (self.init_cell(a, &k), self.init_cell(b, &k));
                format!(
                    "(and (= {} {}) (forall (({k} Int)) (and (= {sa} {sb}) (= {ia} {ib}))))",
                    len_sym(a.base()),
                    len_sym(b.base())
                )
            }
        }
    }
}

/// Symbol table as `(name, signature)` pairs, in declaration order.
pub fn smt_symbols(decls: &[Decl]) -> Vec<(String, String)> {
    let mut out = Vec::new();
    for d in decls {
        match d.sort {
            Sort::Int32 => out.push((d.name.clone(), "Int".into())),
            Sort::Bool => out.push((d.name.clone(), "Bool".into())),
            Sort::Array { init, .. } => {
                out.push((d.name.clone(), "(Int) Int".into()));
                out.push((format!("{}.len", d.name), "Int".into()));
                if init == ArrInit::Unknown {
                    out.push((format!("{}.init", d.name), "(Int) Bool".into()));
                }
            }
        }
    }
    out
}

const PRELUDE: &str = "\
(define-fun cdiv ((a Int) (b Int)) Int
  (ite (>= a 0) (ite (> b 0) (div a b) (- (div a (- b))))
                (ite (> b 0) (- (div (- a) b)) (div (- a) (- b)))))
(define-fun cmod ((a Int) (b Int)) Int (- a (* b (cdiv a b))))
";

pub fn emit_smtlib(ob: &ProofObligation) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "; obligation {} at {}", ob.name, ob.at);
    let _ = writeln!(s, "(set-logic ALL)");
    for d in &ob.declarations {
        let n = q(&d.name);
        match d.sort {
            Sort::Int32 => {
                let _ = writeln!(s, "(declare-const {n} Int)");
                let _ = writeln!(s, "(assert (and (<= {} {n}) (<= {n} {})))", num(INT_MIN), num(INT_MAX));
            }
            Sort::Bool => {
                let _ = writeln!(s, "(declare-const {n} Bool)");
            }
            Sort::Array { len, init } => {
                let l = len_sym(&d.name);
                let _ = writeln!(s, "(declare-fun {n} (Int) Int)");
                let _ = writeln!(s, "(declare-const {l} Int)");
                match len {
                    Some(k) => {
                        let _ = writeln!(s, "(assert (= {l} {k}))");
                    }
                    None => {
                        let _ = writeln!(s, "(assert (and (<= 0 {l}) (<= {l} {})))", num(INT_MAX));
                    }
                }
                if init == ArrInit::Unknown {
                    let _ = writeln!(s, "(declare-fun {} (Int) Bool)", init_sym(&d.name));
                }
            }
        }
    }
    s.push_str(PRELUDE);
    let mut e = Emitter { decls: &ob.declarations, bound: 0 };
    for (label, h) in &ob.hypotheses {
        let _ = writeln!(s, "; {label}");
        let _ = writeln!(s, "(assert {})", e.form(h));
    }
    let _ = writeln!(s, "; Q");
    let negated = match &ob.goal {
        LForm::Bool(true) => "false".to_string(),
        g => format!("(not {})", e.form(g)),
    };
    let _ = writeln!(s, "(assert {negated})");
    let _ = writeln!(s, "(check-sat)");
    s
}

/// S-expression reader, enough to validate emitted scripts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SExp {
    Atom(String),
    List(Vec<SExp>),
}

pub fn parse_sexps(text: &str) -> Result<Vec<SExp>, String> {
    let mut tokens = Vec::new();
    let mut chars = text.chars().peekable();
    while let Some(&c) = chars.peek() {
        match c {
            ';' => {
                while chars.peek().is_some_and(|&c| c != '\n') {
                    chars.next();
                }
            }
            '(' | ')' => {
                tokens.push(c.to_string());
                chars.next();
            }
            '|' => {
                chars.next();
                let mut s = String::from("|");
                loop {
                    match chars.next() {
                        Some('|') => break,
                        Some(c) => s.push(c),
                        None => return Err("unterminated quoted symbol".into()),
                    }
                }
                s.push('|');
                tokens.push(s);
            }
            c if c.is_whitespace() => {
                chars.next();
            }
            _ => {
                let mut s = String::new();
                while let Some(&c) = chars.peek() {
                    if c.is_whitespace() || c == '(' || c == ')' || c == ';' {
                        break;
                    }
                    s.push(c);
                    chars.next();
                }
                tokens.push(s);
            }
        }
    }
    let mut stack: Vec<Vec<SExp>> = vec![Vec::new()];
    for t in tokens {
        match t.as_str() {
            "(" => stack.push(Vec::new()),
            ")" => {
                let l = stack.pop().ok_or("unbalanced `)`")?;
                stack.last_mut().ok_or("unbalanced `)`")?.push(SExp::List(l));
            }
            _ => stack.last_mut().expect("root").push(SExp::Atom(t)),
        }
    }
    match stack.len() {
        1 => Ok(stack.pop().expect("root")),
        _ => Err("unbalanced `(`".into()),
    }
}

fn unquote(s: &str) -> String {
    s.trim_start_matches('|').trim_end_matches('|').to_string()
}

fn render(e: &SExp) -> String {
    match e {
        SExp::Atom(a) => a.clone(),
        SExp::List(xs) => format!("({})", xs.iter().map(render).collect::<Vec<_>>().join(" ")),
    }
}

/// `(name, signature)` of every `declare-const` / `declare-fun` command.
pub fn parse_declarations(text: &str) -> Result<Vec<(String, String)>, String> {
    let mut out = Vec::new();
    for cmd in parse_sexps(text)? {
        let SExp::List(xs) = cmd else { return Err("top-level atom".into()) };
        match xs.as_slice() {
            [SExp::Atom(h), SExp::Atom(n), SExp::Atom(sort)] if h == "declare-const" => {
                out.push((unquote(n), sort.clone()));
            }
            [SExp::Atom(h), SExp::Atom(n), args, SExp::Atom(sort)] if h == "declare-fun" => {
                out.push((unquote(n), format!("{} {sort}", render(args))));
            }
            _ => {}
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SolverConfig {
    /// Program and arguments; the script is written to its stdin.
    pub cmd: Vec<String>,
    pub timeout: Duration,
}

impl SolverConfig {
    pub fn new(cmd: &str, timeout: Duration) -> Self {
        SolverConfig { cmd: cmd.split_whitespace().map(String::from).collect(), timeout }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SolverAnswer {
    Unsat,
    Sat,
    Unknown,
    Timeout,
    Crash(String),
}

pub fn run_solver(cfg: &SolverConfig, script: &str) -> SolverAnswer {
    let Some((prog, args)) = cfg.cmd.split_first() else { return SolverAnswer::Crash("empty solver command".into()) };
    let child = Command::new(prog).args(args).stdin(Stdio::piped()).stdout(Stdio::piped()).stderr(Stdio::null()).spawn();
    let mut child = match child {
        Ok(c) => c,
        Err(e) => return SolverAnswer::Crash(e.to_string()),
    };
    if let Some(mut stdin) = child.stdin.take() {
        // A solver that exits early closes the pipe; its answer still counts.
        let _ = stdin.write_all(script.as_bytes());
    }
    let mut stdout = child.stdout.take().expect("piped");
    let reader = std::thread::spawn(move || {
        let mut s = String::new();
        let _ = stdout.read_to_string(&mut s);
        s
    });
    let status = match child.wait_timeout(cfg.timeout) {
        Ok(Some(s)) => s,
        Ok(None) => {
            let _ = child.kill();
            let _ = child.wait();
            return SolverAnswer::Timeout;
        }
        Err(e) => return SolverAnswer::Crash(e.to_string()),
    };
    let out = reader.join().unwrap_or_default();
    let first = out.lines().map(str::trim).find(|l| !l.is_empty()).unwrap_or("");
    match first {
        "unsat" if status.success() => SolverAnswer::Unsat,
        "sat" => SolverAnswer::Sat,
        "unknown" => SolverAnswer::Unknown,
        _ => SolverAnswer::Crash(format!("unexpected solver output `{first}` ({status})")),
    }
}
