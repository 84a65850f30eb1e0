//! Obligation logic: int terms, arrays with stores, and bounded quantifiers.

use crate::spec::Cmp;
use std::collections::BTreeSet;
use std::fmt;

pub const INT_MIN: i128 = i32::MIN as i128;
pub const INT_MAX: i128 = i32::MAX as i128;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum LArr {
    Sym(String),
    Store(Box<LArr>, Box<LTerm>, Box<LTerm>),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum LTerm {
    Int(i128),
    Sym(String),
    Len(LArr),
    Select(LArr, Box<LTerm>),
    Neg(Box<LTerm>),
    Add(Box<LTerm>, Box<LTerm>),
    Sub(Box<LTerm>, Box<LTerm>),
    Mul(Box<LTerm>, Box<LTerm>),
    /// Truncating division and remainder.
    Div(Box<LTerm>, Box<LTerm>),
    Mod(Box<LTerm>, Box<LTerm>),
    Ite(Box<LForm>, Box<LTerm>, Box<LTerm>),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum LForm {
    Bool(bool),
    BoolSym(String),
    Cmp(Cmp, LTerm, LTerm),
    Not(Box<LForm>),
    And(Vec<LForm>),
    Or(Vec<LForm>),
    Implies(Box<LForm>, Box<LForm>),
    /// `∀ v. lo <= v < hi ==> body`.
    Forall(String, LTerm, LTerm, Box<LForm>),
    /// `∃ v. lo <= v < hi && body`.
    Exists(String, LTerm, LTerm, Box<LForm>),
    /// Cells `lo..=hi` are in bounds (or the range is empty).
    Valid(LArr, LTerm, LTerm),
    /// Cells `lo..=hi` are in bounds and initialized (or the range is empty).
    InitRange(LArr, LTerm, LTerm),
    /// Cell `i` is initialized (no bounds check).
    InitCell(LArr, LTerm),
    ArrEq(LArr, LArr),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ArrInit {
    /// Every cell is initialized (parameters).
    Full,
    /// No cell is initialized (fresh locals).
    Empty,
    Unknown,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sort {
    Int32,
    Bool,
    Array { len: Option<u32>, init: ArrInit },
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Decl {
    pub name: String,
    pub sort: Sort,
}

impl fmt::Display for Decl {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.sort {
            Sort::Int32 => write!(f, "int32 {}", self.name),
            Sort::Bool => write!(f, "bool {}", self.name),
            Sort::Array { len, init } => {
                let len = len.map_or(String::new(), |n| n.to_string());
                let init = match init {
                    ArrInit::Full => " initialized",
                    ArrInit::Empty => " uninitialized",
                    ArrInit::Unknown => "",
                };
                write!(f, "int32 {}[{len}]{init}", self.name)
            }
        }
    }
}

pub fn int(n: i128) -> LTerm {
    LTerm::Int(n)
}

pub fn sym(s: &str) -> LTerm {
    LTerm::Sym(s.to_string())
}

impl LTerm {
    pub fn add(a: LTerm, b: LTerm) -> LTerm {
        match (&a, &b) {
            (LTerm::Int(x), LTerm::Int(y)) => LTerm::Int(x + y),
            (_, LTerm::Int(0)) => a,
            (LTerm::Int(0), _) => b,
            _ => LTerm::Add(Box::new(a), Box::new(b)),
        }
    }

    pub fn sub(a: LTerm, b: LTerm) -> LTerm {
        match (&a, &b) {
            (LTerm::Int(x), LTerm::Int(y)) => LTerm::Int(x - y),
            (_, LTerm::Int(0)) => a,
            _ => LTerm::Sub(Box::new(a), Box::new(b)),
        }
    }

    pub fn mul(a: LTerm, b: LTerm) -> LTerm {
        match (&a, &b) {
            (LTerm::Int(x), LTerm::Int(y)) => LTerm::Int(x * y),
            (_, LTerm::Int(1)) => a,
            (LTerm::Int(1), _) => b,
            _ => LTerm::Mul(Box::new(a), Box::new(b)),
        }
    }

    pub fn neg(a: LTerm) -> LTerm {
        match a {
            LTerm::Int(x) => LTerm::Int(-x),
            a => LTerm::Neg(Box::new(a)),
        }
    }

    pub fn div(a: LTerm, b: LTerm) -> LTerm {
        match (&a, &b) {
            (LTerm::Int(x), LTerm::Int(y)) if *y != 0 => LTerm::Int(x / y),
            _ => LTerm::Div(Box::new(a), Box::new(b)),
        }
    }

    pub fn rem(a: LTerm, b: LTerm) -> LTerm {
        match (&a, &b) {
            (LTerm::Int(x), LTerm::Int(y)) if *y != 0 => LTerm::Int(x % y),
            _ => LTerm::Mod(Box::new(a), Box::new(b)),
        }
    }

    pub fn select(a: LArr, i: LTerm) -> LTerm {
        LTerm::Select(a, Box::new(i))
    }

    /// Substitutes a symbol by a term.
    pub fn subst(&self, v: &str, by: &LTerm) -> LTerm {
        let s = |t: &LTerm| Box::new(t.subst(v, by));
        match self {
            LTerm::Sym(x) if x == v => by.clone(),
            LTerm::Int(_) | LTerm::Sym(_) => self.clone(),
            LTerm::Len(a) => LTerm::Len(a.subst(v, by)),
            LTerm::Select(a, i) => LTerm::Select(a.subst(v, by), s(i)),
            LTerm::Neg(a) => LTerm::Neg(s(a)),
            LTerm::Add(a, b) => LTerm::Add(s(a), s(b)),
            LTerm::Sub(a, b) => LTerm::Sub(s(a), s(b)),
            LTerm::Mul(a, b) => LTerm::Mul(s(a), s(b)),
            LTerm::Div(a, b) => LTerm::Div(s(a), s(b)),
            LTerm::Mod(a, b) => LTerm::Mod(s(a), s(b)),
            LTerm::Ite(c, a, b) => LTerm::Ite(Box::new(c.subst(v, by)), s(a), s(b)),
        }
    }

    pub fn symbols(&self, out: &mut BTreeSet<String>) {
        match self {
            LTerm::Int(_) => {}
            LTerm::Sym(x) => {
                out.insert(x.clone());
            }
            LTerm::Len(a) => a.symbols(out),
            LTerm::Select(a, i) => {
                a.symbols(out);
                i.symbols(out);
            }
            LTerm::Neg(a) => a.symbols(out),
            LTerm::Add(a, b) | LTerm::Sub(a, b) | LTerm::Mul(a, b) | LTerm::Div(a, b) | LTerm::Mod(a, b) => {
                a.symbols(out);
                b.symbols(out);
            }
            LTerm::Ite(c, a, b) => {
                c.symbols(out);
                a.symbols(out);
                b.symbols(out);
            }
        }
    }

    fn prec(&self) -> u8 {
        match self {
            LTerm::Add(..) | LTerm::Sub(..) => 1,
            LTerm::Mul(..) | LTerm::Div(..) | LTerm::Mod(..) => 2,
            LTerm::Int(n) if *n < 0 => 3,
            LTerm::Neg(_) => 3,
            _ => 4,
        }
    }

    fn fmt_prec(&self, f: &mut fmt::Formatter<'_>, outer: u8) -> fmt::Result {
        let p = self.prec();
        if p < outer {
            write!(f, "(")?;
        }
        match self {
            LTerm::Int(n) if *n == INT_MIN => write!(f, "INT_MIN")?,
            LTerm::Int(n) if *n == INT_MAX => write!(f, "INT_MAX")?,
            LTerm::Int(n) => write!(f, "{n}")?,
            LTerm::Sym(s) => write!(f, "{s}")?,
            LTerm::Len(a) => write!(f, "\\length({a})")?,
            LTerm::Select(a, i) => write!(f, "{a}[{i}]")?,
            LTerm::Neg(a) => {
                write!(f, "-")?;
                a.fmt_prec(f, 4)?;
            }
            LTerm::Add(a, b) | LTerm::Sub(a, b) | LTerm::Mul(a, b) | LTerm::Div(a, b) | LTerm::Mod(a, b) => {
                let op = match self {
                    LTerm::Add(..) => "+",
                    LTerm::Sub(..) => "-",
                    LTerm::Mul(..) => "*",
                    LTerm::Div(..) => "/",
                    _ => "%",
                };
                a.fmt_prec(f, p)?;
                write!(f, " {op} ")?;
                b.fmt_prec(f, p + 1)?;
            }
            LTerm::Ite(c, a, b) => write!(f, "({c} ? {a} : {b})")?,
        }
        if p < outer {
            write!(f, ")")?;
        }
        Ok(())
    }
}

impl fmt::Display for LTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_prec(f, 0)
    }
}

impl LArr {
    pub fn base(&self) -> &str {
        match self {
            LArr::Sym(s) => s,
            LArr::Store(b, _, _) => b.base(),
        }
    }

    pub fn store(self, i: LTerm, v: LTerm) -> LArr {
        LArr::Store(Box::new(self), Box::new(i), Box::new(v))
    }

    pub fn subst(&self, v: &str, by: &LTerm) -> LArr {
        match self {
            LArr::Sym(_) => self.clone(),
            LArr::Store(b, i, x) => LArr::Store(Box::new(b.subst(v, by)), Box::new(i.subst(v, by)), Box::new(x.subst(v, by))),
        }
    }

    pub fn rename(&self, from: &str, to: &str) -> LArr {
        match self {
            LArr::Sym(s) if s == from => LArr::Sym(to.to_string()),
            LArr::Sym(_) => self.clone(),
            LArr::Store(b, i, x) => LArr::Store(Box::new(b.rename(from, to)), i.clone(), x.clone()),
        }
    }

    pub fn symbols(&self, out: &mut BTreeSet<String>) {
        match self {
            LArr::Sym(s) => {
                out.insert(s.clone());
            }
            LArr::Store(b, i, x) => {
                b.symbols(out);
                i.symbols(out);
                x.symbols(out);
            }
        }
    }
}

impl fmt::Display for LArr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LArr::Sym(s) => write!(f, "{s}"),
            LArr::Store(b, i, x) => write!(f, "{b}{{{i} <- {x}}}"),
        }
    }
}

impl LForm {
    pub fn tt() -> LForm {
        LForm::Bool(true)
    }

    pub fn cmp(c: Cmp, a: LTerm, b: LTerm) -> LForm {
        if let (LTerm::Int(x), LTerm::Int(y)) = (&a, &b) {
            return LForm::Bool(c.holds(x, y));
        }
        LForm::Cmp(c, a, b)
    }

    pub fn not(p: LForm) -> LForm {
        match p {
            LForm::Bool(b) => LForm::Bool(!b),
            LForm::Not(x) => *x,
            p => LForm::Not(Box::new(p)),
        }
    }

    pub fn and(ps: impl IntoIterator<Item = LForm>) -> LForm {
        let mut out: Vec<LForm> = Vec::new();
        for p in ps {
            match p {
                LForm::Bool(true) => {}
                LForm::Bool(false) => return LForm::Bool(false),
                LForm::And(xs) => {
                    for x in xs {
                        if !out.contains(&x) {
                            out.push(x);
                        }
                    }
                }
                p => {
                    if !out.contains(&p) {
                        out.push(p);
                    }
                }
            }
        }
        match out.len() {
            0 => LForm::Bool(true),
            1 => out.pop().expect("one"),
            _ => LForm::And(out),
        }
    }

    pub fn or(ps: impl IntoIterator<Item = LForm>) -> LForm {
        let mut out: Vec<LForm> = Vec::new();
        for p in ps {
            match p {
                LForm::Bool(false) => {}
                LForm::Bool(true) => return LForm::Bool(true),
                LForm::Or(xs) => {
                    for x in xs {
                        if !out.contains(&x) {
                            out.push(x);
                        }
                    }
                }
                p => {
                    if !out.contains(&p) {
                        out.push(p);
                    }
                }
            }
        }
        match out.len() {
            0 => LForm::Bool(false),
            1 => out.pop().expect("one"),
            _ => LForm::Or(out),
        }
    }

    pub fn implies(a: LForm, b: LForm) -> LForm {
        match (&a, &b) {
            (LForm::Bool(true), _) => b,
            (LForm::Bool(false), _) | (_, LForm::Bool(true)) => LForm::Bool(true),
            (_, LForm::Bool(false)) => LForm::not(a),
            _ => LForm::Implies(Box::new(a), Box::new(b)),
        }
    }

    pub fn is_true(&self) -> bool {
        matches!(self, LForm::Bool(true))
    }

    /// Substitutes a free symbol; bound variables shadow.
    pub fn subst(&self, v: &str, by: &LTerm) -> LForm {
        let t = |x: &LTerm| x.subst(v, by);
        let a = |x: &LArr| x.subst(v, by);
        match self {
            LForm::Bool(_) | LForm::BoolSym(_) => self.clone(),
            LForm::Cmp(c, x, y) => LForm::Cmp(*c, t(x), t(y)),
            LForm::Not(x) => LForm::Not(Box::new(x.subst(v, by))),
            LForm::And(xs) => LForm::And(xs.iter().map(|x| x.subst(v, by)).collect()),
            LForm::Or(xs) => LForm::Or(xs.iter().map(|x| x.subst(v, by)).collect()),
            LForm::Implies(x, y) => LForm::Implies(Box::new(x.subst(v, by)), Box::new(y.subst(v, by))),
            LForm::Forall(k, lo, hi, body) | LForm::Exists(k, lo, hi, body) => {
                let body = if k == v { (**body).clone() } else { body.subst(v, by) };
                let q = (k.clone(), t(lo), t(hi), Box::new(body));
                if matches!(self, LForm::Forall(..)) {
                    LForm::Forall(q.0, q.1, q.2, q.3)
                } else {
                    LForm::Exists(q.0, q.1, q.2, q.3)
                }
            }
            LForm::Valid(arr, x, y) => LForm::Valid(a(arr), t(x), t(y)),
            LForm::InitRange(arr, x, y) => LForm::InitRange(a(arr), t(x), t(y)),
            LForm::InitCell(arr, x) => LForm::InitCell(a(arr), t(x)),
            LForm::ArrEq(x, y) => LForm::ArrEq(a(x), a(y)),
        }
    }

    /// Free symbols, including array bases and boolean symbols.
    pub fn symbols(&self, out: &mut BTreeSet<String>) {
        match self {
            LForm::Bool(_) => {}
            LForm::BoolSym(s) => {
                out.insert(s.clone());
            }
            LForm::Cmp(_, a, b) => {
                a.symbols(out);
                b.symbols(out);
            }
            LForm::Not(x) => x.symbols(out),
            LForm::And(xs) | LForm::Or(xs) => xs.iter().for_each(|x| x.symbols(out)),
            LForm::Implies(a, b) => {
                a.symbols(out);
                b.symbols(out);
            }
            LForm::Forall(k, lo, hi, body) | LForm::Exists(k, lo, hi, body) => {
                lo.symbols(out);
                hi.symbols(out);
                let mut inner = BTreeSet::new();
                body.symbols(&mut inner);
                inner.remove(k);
                out.extend(inner);
            }
            LForm::Valid(a, x, y) | LForm::InitRange(a, x, y) => {
                a.symbols(out);
                x.symbols(out);
                y.symbols(out);
            }
            LForm::InitCell(a, x) => {
                a.symbols(out);
                x.symbols(out);
            }
            LForm::ArrEq(a, b) => {
                a.symbols(out);
                b.symbols(out);
            }
        }
    }

    fn fmt_prec(&self, f: &mut fmt::Formatter<'_>, outer: u8) -> fmt::Result {
        let p = match self {
            LForm::Implies(..) | LForm::Forall(..) | LForm::Exists(..) => 1,
            LForm::Or(_) => 2,
            LForm::And(_) => 3,
            _ => 4,
        };
        if p < outer {
            write!(f, "(")?;
        }
        match self {
            LForm::Bool(true) => write!(f, "\\true")?,
            LForm::Bool(false) => write!(f, "\\false")?,
            LForm::BoolSym(s) => write!(f, "{s}")?,
            LForm::Cmp(c, a, b) => write!(f, "{a} {} {b}", c.symbol())?,
            LForm::Not(x) => {
                write!(f, "!")?;
                x.fmt_prec(f, 5)?;
            }
            LForm::And(xs) | LForm::Or(xs) => {
                let op = if matches!(self, LForm::And(_)) { " && " } else { " || " };
                for (i, x) in xs.iter().enumerate() {
                    if i > 0 {
                        write!(f, "{op}")?;
                    }
                    x.fmt_prec(f, p + 1)?;
                }
            }
            LForm::Implies(a, b) => {
                a.fmt_prec(f, 2)?;
                write!(f, " ==> ")?;
                b.fmt_prec(f, 1)?;
            }
            LForm::Forall(k, lo, hi, body) => write!(f, "\\forall integer {k}; {lo} <= {k} < {hi} ==> {body}")?,
            LForm::Exists(k, lo, hi, body) => write!(f, "\\exists integer {k}; {lo} <= {k} < {hi} && {body}")?,
            LForm::Valid(a, lo, hi) => write!(f, "\\valid_read({a}, {lo}, {hi})")?,
            LForm::InitRange(a, lo, hi) => write!(f, "\\initialized({a}, {lo}, {hi})")?,
            LForm::InitCell(a, i) => write!(f, "\\init_cell({a}, {i})")?,
            LForm::ArrEq(a, b) => write!(f, "{a} == {b}")?,
        }
        if p < outer {
            write!(f, ")")?;
        }
        Ok(())
    }
}

impl fmt::Display for LForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_prec(f, 0)
    }
}
