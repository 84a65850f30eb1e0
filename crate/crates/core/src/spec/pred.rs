//! MiniSpec predicate syntax.

use crate::lang::{BinOp, Expr, UnOp};
use std::collections::BTreeSet;
use std::fmt;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Term {
    Int(i64),
    Var(String),
    Result,
    Old(String),
    Index(String, Box<Term>),
    Neg(Box<Term>),
    /// Arithmetic only: `+ - * / %`.
    Bin(BinOpT, Box<Term>, Box<Term>),
}

/// `BinOp` with an ordering, so terms can live in ordered sets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BinOpT {
    Add,
    Sub,
    Mul,
    Div,
    Mod,
}

impl BinOpT {
    pub fn from_binop(op: BinOp) -> Option<Self> {
        Some(match op {
            BinOp::Add => BinOpT::Add,
            BinOp::Sub => BinOpT::Sub,
            BinOp::Mul => BinOpT::Mul,
            BinOp::Div => BinOpT::Div,
            BinOp::Mod => BinOpT::Mod,
            _ => return None,
        })
    }

    pub fn symbol(self) -> &'static str {
        match self {
            BinOpT::Add => "+",
            BinOpT::Sub => "-",
            BinOpT::Mul => "*",
            BinOpT::Div => "/",
            BinOpT::Mod => "%",
        }
    }

    fn prec(self) -> u8 {
        match self {
            BinOpT::Add | BinOpT::Sub => 1,
            _ => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Cmp {
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
}

impl Cmp {
    pub fn from_binop(op: BinOp) -> Option<Self> {
        Some(match op {
            BinOp::Lt => Cmp::Lt,
            BinOp::Le => Cmp::Le,
            BinOp::Gt => Cmp::Gt,
            BinOp::Ge => Cmp::Ge,
            BinOp::Eq => Cmp::Eq,
            BinOp::Ne => Cmp::Ne,
            _ => return None,
        })
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Cmp::Lt => "<",
            Cmp::Le => "<=",
            Cmp::Gt => ">",
            Cmp::Ge => ">=",
            Cmp::Eq => "==",
            Cmp::Ne => "!=",
        }
    }

    pub fn negate(self) -> Cmp {
        match self {
            Cmp::Lt => Cmp::Ge,
            Cmp::Le => Cmp::Gt,
            Cmp::Gt => Cmp::Le,
            Cmp::Ge => Cmp::Lt,
            Cmp::Eq => Cmp::Ne,
            Cmp::Ne => Cmp::Eq,
        }
    }

    /// `a op b` iff `b (flip op) a`.
    pub fn flip(self) -> Cmp {
        match self {
            Cmp::Lt => Cmp::Gt,
            Cmp::Le => Cmp::Ge,
            Cmp::Gt => Cmp::Lt,
            Cmp::Ge => Cmp::Le,
            c => c,
        }
    }

    pub fn holds<T: Ord>(self, a: T, b: T) -> bool {
        match self {
            Cmp::Lt => a < b,
            Cmp::Le => a <= b,
            Cmp::Gt => a > b,
            Cmp::Ge => a >= b,
            Cmp::Eq => a == b,
            Cmp::Ne => a != b,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Pred {
    Bool(bool),
    Cmp(Cmp, Term, Term),
    Not(Box<Pred>),
    And(Vec<Pred>),
    Or(Vec<Pred>),
    Implies(Box<Pred>, Box<Pred>),
    /// `\forall integer var; lo <= var < hi ==> body` (hi exclusive).
    Forall { var: String, lo: Term, hi: Term, body: Box<Pred> },
    ValidRead(String, Term, Term),
    ValidWrite(String, Term, Term),
    /// All cells in `[lo, hi]` exist and are initialized.
    Initialized(String, Term, Term),
    /// Scalar `x` holds a value.
    Init(String),
}

impl Term {
    /// The term denoting a MiniC integer expression.
    pub fn from_expr(e: &Expr) -> Term {
        match e {
            Expr::Int(n) => Term::Int(*n as i64),
            Expr::Var(v) => Term::Var(v.clone()),
            Expr::Index(a, i) => Term::Index(a.clone(), Box::new(Term::from_expr(i))),
            Expr::Unary(_, x) => Term::Neg(Box::new(Term::from_expr(x))),
            Expr::Binary(op, l, r) => match BinOpT::from_binop(*op) {
                Some(o) => Term::bin(o, Term::from_expr(l), Term::from_expr(r)),
                // Conditions in integer position do not type-check.
                None => unreachable!("condition used as integer"),
            },
        }
    }

    pub fn var(s: &str) -> Term {
        Term::Var(s.to_string())
    }

    pub fn bin(op: BinOpT, a: Term, b: Term) -> Term {
        Term::Bin(op, Box::new(a), Box::new(b))
    }

    pub fn add(a: Term, b: Term) -> Term {
        Term::bin(BinOpT::Add, a, b)
    }

    pub fn sub(a: Term, b: Term) -> Term {
        Term::bin(BinOpT::Sub, a, b)
    }

    /// Identifiers mentioned (variables and arrays, not bound names removed).
    pub fn idents(&self, out: &mut BTreeSet<String>) {
        match self {
            Term::Int(_) | Term::Result => {}
            Term::Var(v) | Term::Old(v) => {
                out.insert(v.clone());
            }
            Term::Index(a, i) => {
                out.insert(a.clone());
                i.idents(out);
            }
            Term::Neg(t) => t.idents(out),
            Term::Bin(_, a, b) => {
                a.idents(out);
                b.idents(out);
            }
        }
    }

    pub fn mentions_result(&self) -> bool {
        match self {
            Term::Result => true,
            Term::Int(_) | Term::Var(_) | Term::Old(_) => false,
            Term::Index(_, i) | Term::Neg(i) => i.mentions_result(),
            Term::Bin(_, a, b) => a.mentions_result() || b.mentions_result(),
        }
    }

    /// Substitutes variables (not arrays) by terms.
    pub fn subst(&self, f: &impl Fn(&str) -> Option<Term>) -> Term {
        match self {
            Term::Var(v) => f(v).unwrap_or_else(|| self.clone()),
            Term::Int(_) | Term::Result | Term::Old(_) => self.clone(),
            Term::Index(a, i) => Term::Index(a.clone(), Box::new(i.subst(f))),
            Term::Neg(t) => Term::Neg(Box::new(t.subst(f))),
            Term::Bin(op, a, b) => Term::bin(*op, a.subst(f), b.subst(f)),
        }
    }

    /// Renames arrays (in `Index`).
    pub fn rename_arrays(&self, f: &impl Fn(&str) -> Option<String>) -> Term {
        match self {
            Term::Index(a, i) => Term::Index(f(a).unwrap_or_else(|| a.clone()), Box::new(i.rename_arrays(f))),
            Term::Neg(t) => Term::Neg(Box::new(t.rename_arrays(f))),
            Term::Bin(op, a, b) => Term::bin(*op, a.rename_arrays(f), b.rename_arrays(f)),
            _ => self.clone(),
        }
    }

    /// Replaces `\result` by a term.
    pub fn subst_result(&self, r: &Term) -> Term {
        match self {
            Term::Result => r.clone(),
            Term::Index(a, i) => Term::Index(a.clone(), Box::new(i.subst_result(r))),
            Term::Neg(t) => Term::Neg(Box::new(t.subst_result(r))),
            Term::Bin(op, a, b) => Term::bin(*op, a.subst_result(r), b.subst_result(r)),
            _ => self.clone(),
        }
    }

    fn fmt_prec(&self, f: &mut fmt::Formatter<'_>, outer: u8) -> fmt::Result {
        match self {
            Term::Int(n) if *n == i32::MIN as i64 => write!(f, "INT_MIN"),
            Term::Int(n) if *n == i32::MAX as i64 => write!(f, "INT_MAX"),
            Term::Int(n) if *n < 0 && outer > 0 => write!(f, "({n})"),
            Term::Int(n) => write!(f, "{n}"),
            Term::Var(v) => write!(f, "{v}"),
            Term::Result => write!(f, "\\result"),
            Term::Old(v) => write!(f, "\\old({v})"),
            Term::Index(a, i) => write!(f, "{a}[{i}]"),
            Term::Neg(t) => {
                write!(f, "-")?;
                t.fmt_prec(f, 3)
            }
            Term::Bin(op, a, b) => {
                let p = op.prec();
                if p < outer {
                    write!(f, "(")?;
                }
                a.fmt_prec(f, p)?;
                write!(f, " {} ", op.symbol())?;
                b.fmt_prec(f, p + 1)?;
                if p < outer {
                    write!(f, ")")?;
                }
                Ok(())
            }
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_prec(f, 0)
    }
}

impl Pred {
    /// The predicate denoting a MiniC condition.
    pub fn from_cond(e: &Expr) -> Pred {
        match e {
            Expr::Unary(UnOp::Not, x) => Pred::not(Pred::from_cond(x)),
            Expr::Binary(BinOp::And, l, r) => Pred::And(vec![Pred::from_cond(l), Pred::from_cond(r)]),
            Expr::Binary(BinOp::Or, l, r) => Pred::Or(vec![Pred::from_cond(l), Pred::from_cond(r)]),
            Expr::Binary(op, l, r) if op.is_cmp() => {
                Pred::Cmp(Cmp::from_binop(*op).expect("comparison"), Term::from_expr(l), Term::from_expr(r))
            }
            e => Pred::Cmp(Cmp::Ne, Term::from_expr(e), Term::Int(0)),
        }
    }

    pub fn tt() -> Pred {
        Pred::Bool(true)
    }

    pub fn cmp(c: Cmp, a: Term, b: Term) -> Pred {
        Pred::Cmp(c, a, b)
    }

    pub fn not(p: Pred) -> Pred {
        Pred::Not(Box::new(p))
    }

    pub fn implies(a: Pred, b: Pred) -> Pred {
        Pred::Implies(Box::new(a), Box::new(b))
    }

    /// Flattened conjunction; `true` conjuncts dropped, duplicates removed.
    pub fn conj(ps: impl IntoIterator<Item = Pred>) -> Pred {
        let mut out: Vec<Pred> = Vec::new();
        for p in ps {
            match p {
                Pred::Bool(true) => {}
                Pred::And(xs) => {
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
            0 => Pred::Bool(true),
            1 => out.pop().expect("one element"),
            _ => Pred::And(out),
        }
    }

    pub fn disj(ps: impl IntoIterator<Item = Pred>) -> Pred {
        let mut out: Vec<Pred> = Vec::new();
        for p in ps {
            match p {
                Pred::Bool(false) => {}
                Pred::Or(xs) => out.extend(xs),
                p => out.push(p),
            }
        }
        match out.len() {
            0 => Pred::Bool(false),
            1 => out.pop().expect("one element"),
            _ => Pred::Or(out),
        }
    }

    /// Top-level conjuncts.
    pub fn conjuncts(&self) -> Vec<Pred> {
        match self {
            Pred::And(xs) => xs.clone(),
            Pred::Bool(true) => Vec::new(),
            p => vec![p.clone()],
        }
    }

    pub fn is_true(&self) -> bool {
        matches!(self, Pred::Bool(true))
    }

    /// Free identifiers (quantifier variables excluded).
    pub fn idents(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_idents(&mut out);
        out
    }

    fn collect_idents(&self, out: &mut BTreeSet<String>) {
        match self {
            Pred::Bool(_) => {}
            Pred::Cmp(_, a, b) => {
                a.idents(out);
                b.idents(out);
            }
            Pred::Not(p) => p.collect_idents(out),
            Pred::And(xs) | Pred::Or(xs) => xs.iter().for_each(|x| x.collect_idents(out)),
            Pred::Implies(a, b) => {
                a.collect_idents(out);
                b.collect_idents(out);
            }
            Pred::Forall { var, lo, hi, body } => {
                lo.idents(out);
                hi.idents(out);
                let mut inner = BTreeSet::new();
                body.collect_idents(&mut inner);
                inner.remove(var);
                out.extend(inner);
            }
            Pred::ValidRead(a, lo, hi) | Pred::ValidWrite(a, lo, hi) | Pred::Initialized(a, lo, hi) => {
                out.insert(a.clone());
                lo.idents(out);
                hi.idents(out);
            }
            Pred::Init(x) => {
                out.insert(x.clone());
            }
        }
    }

    pub fn mentions_result(&self) -> bool {
        let mut hit = false;
        self.visit_terms(&mut |t| hit |= t.mentions_result());
        hit
    }

    pub fn mentions_old(&self) -> bool {
        fn old(t: &Term) -> bool {
            match t {
                Term::Old(_) => true,
                Term::Index(_, i) | Term::Neg(i) => old(i),
                Term::Bin(_, a, b) => old(a) || old(b),
                _ => false,
            }
        }
        let mut hit = false;
        self.visit_terms(&mut |t| hit |= old(t));
        hit
    }

    pub fn visit_terms(&self, f: &mut impl FnMut(&Term)) {
        match self {
            Pred::Bool(_) | Pred::Init(_) => {}
            Pred::Cmp(_, a, b) => {
                f(a);
                f(b);
            }
            Pred::Not(p) => p.visit_terms(f),
            Pred::And(xs) | Pred::Or(xs) => xs.iter().for_each(|x| x.visit_terms(f)),
            Pred::Implies(a, b) => {
                a.visit_terms(f);
                b.visit_terms(f);
            }
            Pred::Forall { lo, hi, body, .. } => {
                f(lo);
                f(hi);
                body.visit_terms(f);
            }
            Pred::ValidRead(_, lo, hi) | Pred::ValidWrite(_, lo, hi) | Pred::Initialized(_, lo, hi) => {
                f(lo);
                f(hi);
            }
        }
    }

    /// Maps every term (variables substituted), respecting quantifier binders.
    pub fn map_terms(&self, f: &impl Fn(&Term, &BTreeSet<String>) -> Term) -> Pred {
        self.map_terms_in(f, &BTreeSet::new())
    }

    fn map_terms_in(&self, f: &impl Fn(&Term, &BTreeSet<String>) -> Term, bound: &BTreeSet<String>) -> Pred {
        match self {
            Pred::Bool(_) | Pred::Init(_) => self.clone(),
            Pred::Cmp(c, a, b) => Pred::Cmp(*c, f(a, bound), f(b, bound)),
            Pred::Not(p) => Pred::not(p.map_terms_in(f, bound)),
            Pred::And(xs) => Pred::And(xs.iter().map(|x| x.map_terms_in(f, bound)).collect()),
            Pred::Or(xs) => Pred::Or(xs.iter().map(|x| x.map_terms_in(f, bound)).collect()),
            Pred::Implies(a, b) => Pred::implies(a.map_terms_in(f, bound), b.map_terms_in(f, bound)),
            Pred::Forall { var, lo, hi, body } => {
                let mut inner = bound.clone();
                inner.insert(var.clone());
                Pred::Forall {
                    var: var.clone(),
                    lo: f(lo, bound),
                    hi: f(hi, bound),
                    body: Box::new(body.map_terms_in(f, &inner)),
                }
            }
            Pred::ValidRead(a, lo, hi) => Pred::ValidRead(a.clone(), f(lo, bound), f(hi, bound)),
            Pred::ValidWrite(a, lo, hi) => Pred::ValidWrite(a.clone(), f(lo, bound), f(hi, bound)),
            Pred::Initialized(a, lo, hi) => Pred::Initialized(a.clone(), f(lo, bound), f(hi, bound)),
        }
    }

    /// Substitutes free scalar variables by terms.
    pub fn subst_vars(&self, f: &impl Fn(&str) -> Option<Term>) -> Pred {
        self.map_terms(&|t, bound| t.subst(&|v| if bound.contains(v) { None } else { f(v) }))
    }

    /// Renames arrays everywhere (atoms and index terms).
    pub fn rename_arrays(&self, f: &impl Fn(&str) -> Option<String>) -> Pred {
        let renamed = self.map_terms(&|t, _| t.rename_arrays(f));
        renamed.rename_atoms(f)
    }

    fn rename_atoms(&self, f: &impl Fn(&str) -> Option<String>) -> Pred {
        let r = |a: &String| f(a).unwrap_or_else(|| a.clone());
        match self {
            Pred::Not(p) => Pred::not(p.rename_atoms(f)),
            Pred::And(xs) => Pred::And(xs.iter().map(|x| x.rename_atoms(f)).collect()),
            Pred::Or(xs) => Pred::Or(xs.iter().map(|x| x.rename_atoms(f)).collect()),
            Pred::Implies(a, b) => Pred::implies(a.rename_atoms(f), b.rename_atoms(f)),
            Pred::Forall { var, lo, hi, body } => Pred::Forall {
                var: var.clone(),
                lo: lo.clone(),
                hi: hi.clone(),
                body: Box::new(body.rename_atoms(f)),
            },
            Pred::ValidRead(a, lo, hi) => Pred::ValidRead(r(a), lo.clone(), hi.clone()),
            Pred::ValidWrite(a, lo, hi) => Pred::ValidWrite(r(a), lo.clone(), hi.clone()),
            Pred::Initialized(a, lo, hi) => Pred::Initialized(r(a), lo.clone(), hi.clone()),
            Pred::Init(x) => Pred::Init(r(x)),
            _ => self.clone(),
        }
    }

    pub fn subst_result(&self, r: &Term) -> Pred {
        self.map_terms(&|t, _| t.subst_result(r))
    }

    fn fmt_prec(&self, f: &mut fmt::Formatter<'_>, outer: u8) -> fmt::Result {
        let paren = |f: &mut fmt::Formatter<'_>, p: u8, body: &dyn Fn(&mut fmt::Formatter<'_>) -> fmt::Result| {
            if p < outer {
                write!(f, "(")?;
                body(f)?;
                write!(f, ")")
            } else {
                body(f)
            }
        };
        match self {
            Pred::Bool(b) => write!(f, "{}", if *b { "\\true" } else { "\\false" }),
            Pred::Cmp(c, a, b) => paren(f, 4, &|f| write!(f, "{a} {} {b}", c.symbol())),
            Pred::Not(p) => {
                write!(f, "!")?;
                p.fmt_prec(f, 5)
            }
            Pred::And(xs) => paren(f, 3, &|f| {
                for (i, x) in xs.iter().enumerate() {
                    if i > 0 {
                        write!(f, " && ")?;
                    }
                    x.fmt_prec(f, 4)?;
                }
                Ok(())
            }),
            Pred::Or(xs) => paren(f, 2, &|f| {
                for (i, x) in xs.iter().enumerate() {
                    if i > 0 {
                        write!(f, " || ")?;
                    }
                    x.fmt_prec(f, 3)?;
                }
                Ok(())
            }),
            Pred::Implies(a, b) => paren(f, 1, &|f| {
                a.fmt_prec(f, 2)?;
                write!(f, " ==> ")?;
                b.fmt_prec(f, 1)
            }),
            Pred::Forall { var, lo, hi, body } => paren(f, 1, &|f| {
                write!(f, "\\forall integer {var}; {lo} <= {var} < {hi} ==> ")?;
                body.fmt_prec(f, 1)
            }),
            Pred::ValidRead(a, lo, hi) => write!(f, "\\valid_read({a}, {lo}, {hi})"),
            Pred::ValidWrite(a, lo, hi) => write!(f, "\\valid_write({a}, {lo}, {hi})"),
            Pred::Initialized(a, lo, hi) => write!(f, "\\initialized({a}, {lo}, {hi})"),
            Pred::Init(x) => write!(f, "\\init({x})"),
        }
    }
}

impl fmt::Display for Pred {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_prec(f, 0)
    }
}
