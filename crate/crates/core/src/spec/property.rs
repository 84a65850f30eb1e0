//! Properties, the property ledger, and attaching annotations to a program.

use super::parse::{parse_clauses, parse_predicate, Clause};
use super::pred::{Pred, Term};
use super::SpecError;
use crate::lang::{Location, Program, RetKind, RteClass, StmtKind, VarKind};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::collections::BTreeSet;
use std::fmt;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PropKind {
    RteAssertion(RteClass),
    Precondition,
    Postcondition,
    LoopInvariant,
    LoopAssigns(BTreeSet<String>),
    PlainAssert,
    /// Callee precondition instantiated at one call site (caller scope).
    CallSiteCheck { callee: String },
}

impl PropKind {
    pub fn tag(&self) -> &'static str {
        match self {
            PropKind::RteAssertion(_) => "rte",
            PropKind::Precondition => "requires",
            PropKind::Postcondition => "ensures",
            PropKind::LoopInvariant => "loop invariant",
            PropKind::LoopAssigns(_) => "loop assigns",
            PropKind::PlainAssert => "assert",
            PropKind::CallSiteCheck { .. } => "call-site check",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Origin {
    Analyzer,
    Synthesized,
    Placeholder,
    Manual,
}

fn ser_pred<S: Serializer>(p: &Pred, s: S) -> Result<S::Ok, S::Error> {
    s.collect_str(p)
}

fn de_pred<'de, D: Deserializer<'de>>(d: D) -> Result<Pred, D::Error> {
    let s = String::deserialize(d)?;
    parse_predicate(&s).map_err(serde::de::Error::custom)
}

/// `p = <predicate, location>` plus bookkeeping.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Property {
    pub id: String,
    pub kind: PropKind,
    pub at: Location,
    #[serde(serialize_with = "ser_pred", deserialize_with = "de_pred")]
    pub predicate: Pred,
    pub origin: Origin,
    /// Function whose body contains `at`.
    pub func: String,
}

impl Property {
    pub fn new(id: impl Into<String>, kind: PropKind, at: Location, predicate: Pred, origin: Origin, func: &str) -> Self {
        Property { id: id.into(), kind, at, predicate, origin, func: func.to_string() }
    }

    /// Content identity: kind, location and predicate.
    pub fn same_content(&self, other: &Property) -> bool {
        self.kind == other.kind && self.at == other.at && self.predicate == other.predicate
    }

    /// Annotation text (`requires ...;`) as it would appear in source.
    pub fn annotation(&self) -> String {
        match &self.kind {
            PropKind::LoopAssigns(xs) if xs.is_empty() => "loop assigns \\nothing;".to_string(),
            PropKind::LoopAssigns(xs) => {
                format!("loop assigns {};", xs.iter().cloned().collect::<Vec<_>>().join(", "))
            }
            PropKind::RteAssertion(_) | PropKind::PlainAssert | PropKind::CallSiteCheck { .. } => {
                format!("assert {};", self.predicate)
            }
            k => format!("{} {};", k.tag(), self.predicate),
        }
    }
}

impl fmt::Display for Property {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} @ {}: {}", self.id, self.at, self.annotation())
    }
}

/// The four property sets of a run.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PropertyLedger {
    #[serde(rename = "A")]
    pub a: Vec<Property>,
    #[serde(rename = "S")]
    pub s: Vec<Property>,
    #[serde(rename = "V")]
    pub v: Vec<Property>,
    #[serde(rename = "H")]
    pub h: Vec<Property>,
}

impl PropertyLedger {
    fn ids(xs: &[Property]) -> BTreeSet<&str> {
        xs.iter().map(|p| p.id.as_str()).collect()
    }

    /// Checks `A ∩ S = ∅`, `V ∩ H = ∅` and `A ∪ S = V ∪ H` (by id).
    pub fn check_partition(&self) -> Result<(), String> {
        let (a, s, v, h) = (Self::ids(&self.a), Self::ids(&self.s), Self::ids(&self.v), Self::ids(&self.h));
        if let Some(x) = a.intersection(&s).next() {
            return Err(format!("`{x}` is in both A and S"));
        }
        if let Some(x) = v.intersection(&h).next() {
            return Err(format!("`{x}` is in both V and H"));
        }
        let left: BTreeSet<_> = a.union(&s).copied().collect();
        let right: BTreeSet<_> = v.union(&h).copied().collect();
        if left != right {
            let diff: Vec<_> = left.symmetric_difference(&right).collect();
            return Err(format!("A ∪ S differs from V ∪ H on {diff:?}"));
        }
        Ok(())
    }

    pub fn all(&self) -> Vec<Property> {
        self.a.iter().chain(self.s.iter()).cloned().collect()
    }

    pub fn in_h(&self, id: &str) -> bool {
        self.h.iter().any(|p| p.id == id)
    }
}

/// Where an annotation must be placed and what its predicate may mention.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ScopeRules {
    pub allow_result: bool,
    pub allow_old: bool,
}

/// Checks that every identifier in `pred` is visible at `at`.
pub fn scope_check(prog: &Program, pred: &Pred, at: &Location, rules: ScopeRules) -> Result<(), SpecError> {
    let info = prog
        .loc_info(at)
        .ok_or_else(|| SpecError::Scope { ident: String::new(), loc: at.to_string(), msg: "unknown location".into() })?;
    let scope_err = |ident: &str, msg: String| SpecError::Scope { ident: ident.to_string(), loc: at.to_string(), msg };
    if pred.mentions_result() {
        let ok = rules.allow_result
            && matches!(at, Location::Exit(f) if prog.function(f).map(|f| f.ret) == Some(RetKind::Int));
        if !ok {
            return Err(scope_err("\\result", "`\\result` is only allowed in postconditions of int functions".into()));
        }
    }
    if pred.mentions_old() && !rules.allow_old {
        return Err(scope_err("\\old", "`\\old` is only allowed in postconditions".into()));
    }
    check_pred(pred, &info.scope, &mut Vec::new(), &scope_err)
}

fn kind_of(scope: &[(String, VarKind)], bound: &[String], name: &str) -> Option<VarKind> {
    if bound.iter().any(|b| b == name) {
        return Some(VarKind::Int);
    }
    scope.iter().rev().find(|(n, _)| n == name).map(|(_, k)| *k)
}

type NameCheck<'a> = &'a dyn Fn(&str, &Vec<String>) -> Result<(), SpecError>;

fn check_pred(
    p: &Pred,
    scope: &[(String, VarKind)],
    bound: &mut Vec<String>,
    err: &dyn Fn(&str, String) -> SpecError,
) -> Result<(), SpecError> {
    let scalar = |name: &str, bound: &Vec<String>| match kind_of(scope, bound, name) {
        Some(VarKind::Int) => Ok(()),
        Some(_) => Err(err(name, format!("`{name}` is an array, expected an int"))),
        None => Err(err(name, format!("variable `{name}` is unbound here"))),
    };
    let array = |name: &str, bound: &Vec<String>| match kind_of(scope, bound, name) {
        Some(VarKind::Array(_)) => Ok(()),
        Some(_) => Err(err(name, format!("`{name}` is not an array"))),
        None => Err(err(name, format!("variable `{name}` is unbound here"))),
    };
    fn term(
        t: &Term,
        bound: &Vec<String>,
        scalar: NameCheck<'_>,
        array: NameCheck<'_>,
    ) -> Result<(), SpecError> {
        match t {
            Term::Int(_) | Term::Result => Ok(()),
            Term::Var(v) | Term::Old(v) => scalar(v, bound),
            Term::Index(a, i) => {
                array(a, bound)?;
                term(i, bound, scalar, array)
            }
            Term::Neg(x) => term(x, bound, scalar, array),
            Term::Bin(_, a, b) => {
                term(a, bound, scalar, array)?;
                term(b, bound, scalar, array)
            }
        }
    }
    match p {
        Pred::Bool(_) => Ok(()),
        Pred::Cmp(_, a, b) => {
            term(a, bound, &scalar, &array)?;
            term(b, bound, &scalar, &array)
        }
        Pred::Not(x) => check_pred(x, scope, bound, err),
        Pred::And(xs) | Pred::Or(xs) => xs.iter().try_for_each(|x| check_pred(x, scope, bound, err)),
        Pred::Implies(a, b) => {
            check_pred(a, scope, bound, err)?;
            check_pred(b, scope, bound, err)
        }
        Pred::Forall { var, lo, hi, body } => {
            term(lo, bound, &scalar, &array)?;
            term(hi, bound, &scalar, &array)?;
            bound.push(var.clone());
            let r = check_pred(body, scope, bound, err);
            bound.pop();
            r
        }
        Pred::ValidRead(a, lo, hi) | Pred::ValidWrite(a, lo, hi) | Pred::Initialized(a, lo, hi) => {
            array(a, bound)?;
            term(lo, bound, &scalar, &array)?;
            term(hi, bound, &scalar, &array)
        }
        Pred::Init(x) => scalar(x, bound),
    }
}

/// Where a clause of a given kind attaches: the function entry/exit for
/// contracts, the loop for loop clauses, the statement for asserts.
pub fn clause_location(prog: &Program, clause: &Clause, target_line: u32) -> Result<(Location, String), String> {
    let func_header = prog.functions.iter().find(|f| f.line == target_line);
    match clause {
        Clause::Requires(_) | Clause::Ensures(_) => {
            let f = func_header.ok_or("requires/ensures must precede a function header")?;
            let at = if matches!(clause, Clause::Requires(_)) {
                Location::Entry(f.name.clone())
            } else {
                Location::Exit(f.name.clone())
            };
            Ok((at, f.name.clone()))
        }
        Clause::LoopInvariant(_) | Clause::LoopAssigns(_) => {
            let loc = prog.first_loc_on_line(target_line).ok_or("loop annotation must precede a while loop")?;
            match prog.stmt_at(&loc).map(|s| &s.kind) {
                Some(StmtKind::While { .. }) => {}
                _ => return Err("loop annotation must precede a while loop".into()),
            }
            let f = prog.func_of(&loc).unwrap_or_default().to_string();
            Ok((loc, f))
        }
        Clause::Assert(_) => {
            let loc = prog.first_loc_on_line(target_line).ok_or("assert must precede a statement")?;
            let f = prog.func_of(&loc).unwrap_or_default().to_string();
            Ok((loc, f))
        }
    }
}

/// Builds a property from a clause at a location, checking the scope.
pub fn clause_property(
    prog: &Program,
    clause: Clause,
    at: Location,
    func: &str,
    id: String,
    origin: Origin,
) -> Result<Property, SpecError> {
    let (kind, pred, rules) = match clause {
        Clause::Requires(p) => (PropKind::Precondition, p, ScopeRules { allow_result: false, allow_old: false }),
        Clause::Ensures(p) => (PropKind::Postcondition, p, ScopeRules { allow_result: true, allow_old: true }),
        Clause::Assert(p) => (PropKind::PlainAssert, p, ScopeRules { allow_result: false, allow_old: false }),
        Clause::LoopInvariant(p) => (PropKind::LoopInvariant, p, ScopeRules { allow_result: false, allow_old: false }),
        Clause::LoopAssigns(xs) => {
            let info = prog.loc_info(&at).expect("loop location known");
            for x in &xs {
                if !info.scope.iter().any(|(n, _)| n == x) {
                    return Err(SpecError::Scope {
                        ident: x.clone(),
                        loc: at.to_string(),
                        msg: format!("variable `{x}` is unbound here"),
                    });
                }
            }
            return Ok(Property::new(id, PropKind::LoopAssigns(xs), at, Pred::tt(), origin, func));
        }
    };
    scope_check(prog, &pred, &at, rules)?;
    Ok(Property::new(id, kind, at, pred, origin, func))
}

/// Collects `//@` annotations from `source` and attaches each to the
/// construct on the next code line.
pub fn parse_annotations(source: &str, prog: &Program) -> Result<Vec<Property>, SpecError> {
    let lines: Vec<&str> = source.lines().collect();
    let mut out = Vec::new();
    let mut i = 0;
    let mut counter = 0;
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
        let mut target = i;
        while target < lines.len() {
            let t = lines[target].trim();
            if t.is_empty() || (t.starts_with("//") && !t.starts_with("//@")) {
                target += 1;
            } else {
                break;
            }
        }
        let target_line = target as u32 + 1;
        for c in parse_clauses(&text, first as u32 + 1)? {
            let (at, func) = clause_location(prog, &c.clause, target_line)
                .map_err(|msg| SpecError::Syntax { line: c.line, msg })?;
            counter += 1;
            let id = c.label.clone().unwrap_or_else(|| format!("m{counter}"));
            out.push(clause_property(prog, c.clause, at, &func, id, Origin::Manual)?);
        }
    }
    Ok(out)
}
