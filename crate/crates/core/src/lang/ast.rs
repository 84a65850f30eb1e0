//! Typed MiniC syntax tree.

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::fmt;
use std::str::FromStr;

/// A program point. `Entry(f)` and `Exit(f)` are the pseudo-instructions
/// before the first and after the last instruction of `f`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Location {
    Entry(String),
    Line { line: u32, index: u32 },
    Exit(String),
}

impl Location {
    pub fn line(line: u32, index: u32) -> Self {
        Location::Line { line, index }
    }

    /// Source line used for ordering; entry/exit sort as line 0.
    pub fn file_line(&self) -> u32 {
        match self {
            Location::Line { line, .. } => *line,
            _ => 0,
        }
    }

    pub fn index(&self) -> u32 {
        match self {
            Location::Line { index, .. } => *index,
            _ => 0,
        }
    }
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Location::Entry(func) => write!(f, "entry({func})"),
            Location::Exit(func) => write!(f, "exit({func})"),
            Location::Line { line, index } => write!(f, "{line}:{index}"),
        }
    }
}

impl FromStr for Location {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let inner = |p: &str| s.strip_prefix(p).and_then(|r| r.strip_suffix(')'));
        if let Some(f) = inner("entry(") {
            return Ok(Location::Entry(f.to_string()));
        }
        if let Some(f) = inner("exit(") {
            return Ok(Location::Exit(f.to_string()));
        }
        let (l, i) = s.split_once(':').ok_or_else(|| format!("bad location `{s}`"))?;
        let line = l.parse().map_err(|_| format!("bad location `{s}`"))?;
        let index = i.parse().map_err(|_| format!("bad location `{s}`"))?;
        Ok(Location::Line { line, index })
    }
}

impl Serialize for Location {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Location {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum UnOp {
    Neg,
    Not,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Mod,
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
    And,
    Or,
}

impl BinOp {
    pub fn is_arith(self) -> bool {
        matches!(self, BinOp::Add | BinOp::Sub | BinOp::Mul | BinOp::Div | BinOp::Mod)
    }

    pub fn is_cmp(self) -> bool {
        matches!(self, BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge | BinOp::Eq | BinOp::Ne)
    }

    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Mod => "%",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
            BinOp::Gt => ">",
            BinOp::Ge => ">=",
            BinOp::Eq => "==",
            BinOp::Ne => "!=",
            BinOp::And => "&&",
            BinOp::Or => "||",
        }
    }

    pub(crate) fn prec(self) -> u8 {
        match self {
            BinOp::Or => 1,
            BinOp::And => 2,
            BinOp::Eq | BinOp::Ne => 3,
            BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => 4,
            BinOp::Add | BinOp::Sub => 5,
            BinOp::Mul | BinOp::Div | BinOp::Mod => 6,
        }
    }
}

/// Expressions. Conditions and integer expressions share one tree; the type
/// checker keeps them apart.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Expr {
    Int(i32),
    Var(String),
    Index(String, Box<Expr>),
    Unary(UnOp, Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
}

impl Expr {
    pub fn bin(op: BinOp, l: Expr, r: Expr) -> Expr {
        Expr::Binary(op, Box::new(l), Box::new(r))
    }

    pub fn var(name: &str) -> Expr {
        Expr::Var(name.to_string())
    }

    /// Names read by this expression (scalars and arrays), in order.
    pub fn reads(&self, out: &mut Vec<String>) {
        match self {
            Expr::Int(_) => {}
            Expr::Var(v) => out.push(v.clone()),
            Expr::Index(a, i) => {
                out.push(a.clone());
                i.reads(out);
            }
            Expr::Unary(_, e) => e.reads(out),
            Expr::Binary(_, l, r) => {
                l.reads(out);
                r.reads(out);
            }
        }
    }

    fn fmt_prec(&self, f: &mut fmt::Formatter<'_>, outer: u8) -> fmt::Result {
        match self {
            Expr::Int(i32::MIN) => write!(f, "INT_MIN"),
            Expr::Int(i32::MAX) => write!(f, "INT_MAX"),
            Expr::Int(n) => write!(f, "{n}"),
            Expr::Var(v) => write!(f, "{v}"),
            Expr::Index(a, i) => write!(f, "{a}[{i}]"),
            Expr::Unary(UnOp::Neg, e) => {
                write!(f, "-")?;
                e.fmt_prec(f, 7)
            }
            Expr::Unary(UnOp::Not, e) => {
                write!(f, "!")?;
                e.fmt_prec(f, 7)
            }
            Expr::Binary(op, l, r) => {
                let p = op.prec();
                if p < outer {
                    write!(f, "(")?;
                }
                l.fmt_prec(f, p)?;
                write!(f, " {} ", op.symbol())?;
                r.fmt_prec(f, p + 1)?;
                if p < outer {
                    write!(f, ")")?;
                }
                Ok(())
            }
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_prec(f, 0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dest {
    pub name: String,
    /// `int x = f(...)` rather than `x = f(...)`.
    pub declare: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StmtKind {
    Decl { name: String, init: Option<Expr> },
    DeclArray { name: String, len: u32 },
    Assign { name: String, value: Expr },
    Store { array: String, index: Expr, value: Expr },
    Call { dest: Option<Dest>, callee: String, args: Vec<Expr> },
    If { cond: Expr, then_branch: Vec<Stmt>, else_branch: Vec<Stmt> },
    While { cond: Expr, body: Vec<Stmt> },
    Return(Option<Expr>),
    Nop,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stmt {
    pub loc: Location,
    pub kind: StmtKind,
}

impl Stmt {
    /// Visits this statement and every nested one, outermost first.
    pub fn walk<'a>(&'a self, f: &mut impl FnMut(&'a Stmt)) {
        f(self);
        match &self.kind {
            StmtKind::If { then_branch, else_branch, .. } => {
                then_branch.iter().for_each(|s| s.walk(f));
                else_branch.iter().for_each(|s| s.walk(f));
            }
            StmtKind::While { body, .. } => body.iter().for_each(|s| s.walk(f)),
            _ => {}
        }
    }

    /// Variables assigned by this statement or anything nested in it.
    pub fn writes(&self, out: &mut Vec<String>) {
        self.walk(&mut |s| match &s.kind {
            StmtKind::Decl { name, .. } | StmtKind::DeclArray { name, .. } | StmtKind::Assign { name, .. } => {
                out.push(name.clone())
            }
            StmtKind::Store { array, .. } => out.push(array.clone()),
            StmtKind::Call { dest: Some(d), .. } => out.push(d.name.clone()),
            _ => {}
        });
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RetKind {
    Int,
    Void,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum ParamKind {
    Int,
    /// Array parameter; `len_param` is the int parameter carrying its length.
    Array { len_param: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Param {
    pub name: String,
    pub kind: ParamKind,
}

/// Kind of a variable in scope.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum VarKind {
    Int,
    /// Arrays; local arrays carry their constant length.
    Array(Option<u32>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Function {
    pub name: String,
    pub params: Vec<Param>,
    pub ret: RetKind,
    pub body: Vec<Stmt>,
    /// Line of the function header.
    pub line: u32,
    /// Line of the closing brace.
    pub end_line: u32,
}

impl Function {
    pub fn param(&self, name: &str) -> Option<&Param> {
        self.params.iter().find(|p| p.name == name)
    }

    pub fn walk<'a>(&'a self, f: &mut impl FnMut(&'a Stmt)) {
        for s in &self.body {
            s.walk(f);
        }
    }

    /// Callees in order of first call.
    pub fn callees(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        self.walk(&mut |s| {
            if let StmtKind::Call { callee, .. } = &s.kind {
                if !out.contains(callee) {
                    out.push(callee.clone());
                }
            }
        });
        out
    }
}
