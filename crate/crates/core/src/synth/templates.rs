//! Deterministic template proposer.
//!
//! Host stage: goal lifting (T1), counter bounds (T2), loop frames (T3) and
//! prefix initialization (T4). Callee stage: exact returns (C1) and goal
//! projection onto a call result (C2).

use super::{CandidateSpec, Proposal, Proposer, ProposerUnavailable, Request, Stage};
use crate::lang::{BinOp, Expr, Function, Location, ParamKind, Program, RetKind, Stmt, StmtKind, VarKind};
use crate::spec::{BinOpT, Cmp, Origin, Pred, PropKind, Property, Term};
use crate::verifier::{uncovered_writes, LArr, LForm, LTerm};
use std::collections::{BTreeSet, HashMap};

#[derive(Debug, Default, Clone)]
pub struct TemplateProposer {
    counter: usize,
}

impl TemplateProposer {
    pub fn new() -> Self {
        Self::default()
    }

    fn candidate(&mut self, stage: Stage, kind: PropKind, at: Location, pred: Pred, func: &str) -> Proposal {
        self.counter += 1;
        let p = Property::new(format!("t{}", self.counter), kind, at, pred, Origin::Synthesized, func);
        let raw_text = p.annotation();
        Proposal::Parsed(CandidateSpec { property: p, stage, raw_text })
    }
}

impl Proposer for TemplateProposer {
    fn name(&self) -> &'static str {
        "template"
    }

    fn propose(&mut self, stage: Stage, req: &Request<'_>) -> Result<Vec<Proposal>, ProposerUnavailable> {
        let Some(f) = req.prog.function(&req.unit.host) else { return Ok(Vec::new()) };
        let mut out = Vec::new();
        let mut seen: BTreeSet<(PropKind, Location, Pred)> = BTreeSet::new();
        let mut push = |me: &mut Self, kind: PropKind, at: Location, pred: Pred, func: &str| {
            if seen.insert((kind.clone(), at.clone(), pred.clone())) {
                out.push(me.candidate(stage, kind, at, pred, func));
            }
        };
        match stage {
            Stage::Host => {
                for pred in goal_lift(req, f) {
                    push(self, PropKind::Precondition, Location::Entry(f.name.clone()), pred, &f.name);
                }
                let loops = loops_of(f);
                for (loc, cond, body, pre) in &loops {
                    for pred in counter_bounds(cond, body, pre) {
                        push(self, PropKind::LoopInvariant, loc.clone(), pred, &f.name);
                    }
                }
                for (loc, ..) in &loops {
                    let ws: BTreeSet<String> = uncovered_writes(req.prog, loc, &BTreeSet::new()).into_iter().collect();
                    push(self, PropKind::LoopAssigns(ws), loc.clone(), Pred::tt(), &f.name);
                }
                for (loc, cond, body, pre) in &loops {
                    for pred in prefix_init(req.prog, loc, cond, body, pre) {
                        push(self, PropKind::LoopInvariant, loc.clone(), pred, &f.name);
                    }
                }
            }
            Stage::Callee => {
                for g in req.unit.context.iter().skip(1) {
                    let Some(gf) = req.prog.function(g) else { continue };
                    if let Some(e) = exact_return(gf) {
                        push(self, PropKind::Postcondition, Location::Exit(g.clone()), e, g);
                    }
                }
                for (g, pred) in goal_projection(req, f) {
                    push(self, PropKind::Postcondition, Location::Exit(g.clone()), pred, &g);
                }
            }
        }
        Ok(out)
    }
}

/// Loop statement, its condition, body, and the statements preceding it in
/// the same block (innermost last).
type LoopSite<'a> = (Location, &'a Expr, &'a [Stmt], Vec<&'a Stmt>);

fn loops_of(f: &Function) -> Vec<LoopSite<'_>> {
    fn go<'a>(block: &'a [Stmt], before: &mut Vec<&'a Stmt>, out: &mut Vec<LoopSite<'a>>) {
        let mark = before.len();
        for s in block {
            match &s.kind {
                StmtKind::While { cond, body } => {
                    out.push((s.loc.clone(), cond, body, before.clone()));
                    go(body, before, out);
                }
                StmtKind::If { then_branch, else_branch, .. } => {
                    go(then_branch, before, out);
                    go(else_branch, before, out);
                }
                _ => {}
            }
            before.push(s);
        }
        before.truncate(mark);
    }
    let mut out = Vec::new();
    go(&f.body, &mut Vec::new(), &mut out);
    out
}

// --- T1 ---------------------------------------------------------------------

/// Failing goals rewritten over the host's parameters, or the guard itself
/// when no goal can be lifted.
fn goal_lift(req: &Request<'_>, f: &Function) -> Vec<Pred> {
    let mut out: Vec<Pred> = Vec::new();
    let mut add = |p: Pred| {
        if !p.idents().is_empty() && !out.contains(&p) {
            out.push(p);
        }
    };
    let mut lifted_any = false;
    for ob in &req.verdict.feedback {
        if let Some(p) = lift_form(&ob.goal, f, &mut Vec::new()) {
            lifted_any = true;
            add(p);
        } else if let Some(p) = generalize_index(ob.hypothesis_forms(), &ob.goal, f) {
            lifted_any = true;
            add(p);
        }
    }
    if !lifted_any {
        add(req.unit.guard.predicate.clone());
    }
    out
}

fn entry_name<'f>(sym: &str, f: &'f Function) -> Option<&'f str> {
    let base = sym.strip_suffix("_0")?;
    f.params.iter().find(|p| p.name == base).map(|p| p.name.as_str())
}

fn lift_term(t: &LTerm, f: &Function, bound: &mut Vec<String>) -> Option<Term> {
    let bin = |op: BinOpT, a: &LTerm, b: &LTerm, bound: &mut Vec<String>| {
        Some(Term::bin(op, lift_term(a, f, bound)?, lift_term(b, f, bound)?))
    };
    Some(match t {
        LTerm::Int(n) => Term::Int(i64::try_from(*n).ok()?),
        LTerm::Sym(s) if bound.contains(s) => Term::Var(s.trim_end_matches(".q").to_string()),
        LTerm::Sym(s) => Term::Var(entry_name(s, f)?.to_string()),
        LTerm::Select(LArr::Sym(a), i) => Term::Index(entry_name(a, f)?.to_string(), Box::new(lift_term(i, f, bound)?)),
        LTerm::Neg(x) => Term::Neg(Box::new(lift_term(x, f, bound)?)),
        LTerm::Add(a, b) => return bin(BinOpT::Add, a, b, bound),
        LTerm::Sub(a, b) => return bin(BinOpT::Sub, a, b, bound),
        LTerm::Mul(a, b) => return bin(BinOpT::Mul, a, b, bound),
        LTerm::Div(a, b) => return bin(BinOpT::Div, a, b, bound),
        LTerm::Mod(a, b) => return bin(BinOpT::Mod, a, b, bound),
        _ => return None,
    })
}

fn lift_arr(a: &LArr, f: &Function) -> Option<String> {
    match a {
        LArr::Sym(s) => entry_name(s, f).map(String::from),
        LArr::Store(..) => None,
    }
}

fn lift_form(p: &LForm, f: &Function, bound: &mut Vec<String>) -> Option<Pred> {
    Some(match p {
        LForm::Bool(b) => Pred::Bool(*b),
        LForm::Cmp(c, a, b) => Pred::Cmp(*c, lift_term(a, f, bound)?, lift_term(b, f, bound)?),
        LForm::Not(x) => Pred::not(lift_form(x, f, bound)?),
        LForm::And(xs) => Pred::And(xs.iter().map(|x| lift_form(x, f, bound)).collect::<Option<_>>()?),
        LForm::Or(xs) => Pred::Or(xs.iter().map(|x| lift_form(x, f, bound)).collect::<Option<_>>()?),
        LForm::Implies(a, b) => Pred::implies(lift_form(a, f, bound)?, lift_form(b, f, bound)?),
        LForm::Forall(k, lo, hi, body) => {
            let lo = lift_term(lo, f, bound)?;
            let hi = lift_term(hi, f, bound)?;
            bound.push(k.clone());
            let body = lift_form(body, f, bound);
            bound.pop();
            Pred::Forall { var: k.trim_end_matches(".q").to_string(), lo, hi, body: Box::new(body?) }
        }
        LForm::Valid(a, lo, hi) => Pred::ValidRead(lift_arr(a, f)?, lift_term(lo, f, bound)?, lift_term(hi, f, bound)?),
        LForm::InitRange(a, lo, hi) => {
            Pred::Initialized(lift_arr(a, f)?, lift_term(lo, f, bound)?, lift_term(hi, f, bound)?)
        }
        _ => return None,
    })
}

/// `\valid_read(a, s, s)` under `lo <= s` and `s < hi` with `lo`, `hi` over
/// parameters becomes `\valid_read(a, lo, hi - 1)`.
fn generalize_index<'a>(hyps: impl Iterator<Item = &'a LForm>, goal: &LForm, f: &Function) -> Option<Pred> {
    let (arr, idx, valid) = match goal {
        LForm::Valid(a, i, j) if i == j => (a, i, true),
        LForm::InitRange(a, i, j) if i == j => (a, i, false),
        _ => return None,
    };
    let arr = lift_arr(arr, f)?;
    let LTerm::Sym(s) = idx else { return None };
    let mut atoms = Vec::new();
    fn flatten<'b>(p: &'b LForm, out: &mut Vec<&'b LForm>) {
        match p {
            LForm::And(xs) => xs.iter().for_each(|x| flatten(x, out)),
            p => out.push(p),
        }
    }
    for h in hyps {
        flatten(h, &mut atoms);
    }
    let is_s = |t: &LTerm| matches!(t, LTerm::Sym(x) if x == s);
    let mut lo = None;
    let mut hi = None;
    for a in atoms {
        let LForm::Cmp(c, l, r) = a else { continue };
        let lift = |t: &LTerm| lift_term(t, f, &mut Vec::new());
        match (c, is_s(l), is_s(r)) {
            (Cmp::Le, false, true) | (Cmp::Ge, true, false) => {
                let other = if is_s(r) { l } else { r };
                lo = lo.or_else(|| lift(other));
            }
            (Cmp::Lt, true, false) | (Cmp::Gt, false, true) => {
                let other = if is_s(l) { r } else { l };
                hi = hi.or_else(|| lift(other).map(|t| Term::sub(t, Term::Int(1))));
            }
            (Cmp::Le, true, false) | (Cmp::Ge, false, true) => {
                let other = if is_s(l) { r } else { l };
                hi = hi.or_else(|| lift(other));
            }
            _ => {}
        }
    }
    let (lo, hi) = (lo?, hi?);
    Some(if valid { Pred::ValidRead(arr, lo, hi) } else { Pred::Initialized(arr, lo, hi) })
}

// --- T2 / T4 ----------------------------------------------------------------

/// `x = x + c` / `x = x - c` with a positive constant, anywhere in the body.
fn steps(body: &[Stmt]) -> HashMap<String, i64> {
    let mut out: HashMap<String, i64> = HashMap::new();
    let mut bad: BTreeSet<String> = BTreeSet::new();
    for s in body {
        s.walk(&mut |s| match &s.kind {
            StmtKind::Assign { name, value } => {
                let step = match value {
                    Expr::Binary(BinOp::Add, l, r) => match (&**l, &**r) {
                        (Expr::Var(v), Expr::Int(c)) | (Expr::Int(c), Expr::Var(v)) if v == name => Some(*c as i64),
                        _ => None,
                    },
                    Expr::Binary(BinOp::Sub, l, r) => match (&**l, &**r) {
                        (Expr::Var(v), Expr::Int(c)) if v == name => Some(-(*c as i64)),
                        _ => None,
                    },
                    _ => None,
                };
                match step {
                    Some(c) if c != 0 && out.get(name).is_none_or(|d| d.signum() == c.signum()) => {
                        out.insert(name.clone(), c);
                    }
                    _ => {
                        bad.insert(name.clone());
                    }
                }
            }
            StmtKind::Call { dest: Some(d), .. } => {
                bad.insert(d.name.clone());
            }
            _ => {}
        });
    }
    out.retain(|k, _| !bad.contains(k));
    out
}

/// The value `x` holds on loop entry, from the last preceding assignment.
fn init_value(x: &str, pre: &[&Stmt]) -> Option<Term> {
    for s in pre.iter().rev() {
        match &s.kind {
            StmtKind::Decl { name, init: Some(e) } | StmtKind::Assign { name, value: e } if name == x => {
                return Some(Term::from_expr(e));
            }
            _ => {
                let mut ws = Vec::new();
                s.writes(&mut ws);
                if ws.iter().any(|w| w == x) {
                    return None;
                }
            }
        }
    }
    None
}

fn cond_atoms(cond: &Expr) -> Vec<(Cmp, &Expr, &Expr)> {
    match cond {
        Expr::Binary(BinOp::And, l, r) => {
            let mut v = cond_atoms(l);
            v.extend(cond_atoms(r));
            v
        }
        Expr::Binary(op, l, r) if op.is_cmp() => Cmp::from_binop(*op).map(|c| vec![(c, &**l, &**r)]).unwrap_or_default(),
        _ => Vec::new(),
    }
}

/// `(counter, lower, upper)` bounds implied by the guard and the step.
fn counters(cond: &Expr, body: &[Stmt], pre: &[&Stmt]) -> Vec<(String, Term, Term)> {
    let st = steps(body);
    let mut out = Vec::new();
    for (c, l, r) in cond_atoms(cond) {
        // Normalize to `x c e`.
        let (c, x, e) = match (l, r) {
            (Expr::Var(x), e) if st.contains_key(x) => (c, x, e),
            (e, Expr::Var(x)) if st.contains_key(x) => (c.flip(), x, e),
            _ => continue,
        };
        let step = st[x];
        let Some(init) = init_value(x, pre) else { continue };
        let bound = Term::from_expr(e);
        let (lo, hi) = match (c, step > 0) {
            (Cmp::Lt, true) => (init, Term::add(bound, Term::Int(step - 1))),
            (Cmp::Le, true) => (init, Term::add(bound, Term::Int(step))),
            (Cmp::Gt, false) => (Term::sub(bound, Term::Int(-step - 1)), init),
            (Cmp::Ge, false) => (Term::sub(bound, Term::Int(-step)), init),
            _ => continue,
        };
        out.push((x.clone(), simplify(lo), simplify(hi)));
    }
    out
}

fn simplify(t: Term) -> Term {
    match t {
        Term::Bin(BinOpT::Add, a, b) if *b == Term::Int(0) => *a,
        Term::Bin(BinOpT::Sub, a, b) if *b == Term::Int(0) => *a,
        t => t,
    }
}

fn counter_bounds(cond: &Expr, body: &[Stmt], pre: &[&Stmt]) -> Vec<Pred> {
    let mut out = Vec::new();
    for (x, lo, hi) in counters(cond, body, pre) {
        let lower = Pred::cmp(Cmp::Le, lo, Term::var(&x));
        let upper = Pred::cmp(Cmp::Le, Term::var(&x), hi);
        out.push(Pred::And(vec![lower.clone(), upper.clone()]));
        out.push(lower);
        out.push(upper);
    }
    out
}

fn prefix_init(prog: &Program, loc: &Location, cond: &Expr, body: &[Stmt], pre: &[&Stmt]) -> Vec<Pred> {
    let Some(info) = prog.loc_info(loc) else { return Vec::new() };
    let local_array = |a: &str| info.scope.iter().any(|(n, k)| n == a && matches!(k, VarKind::Array(Some(_))));
    let up: Vec<(String, Term)> = counters(cond, body, pre)
        .into_iter()
        .filter(|(x, ..)| steps(body).get(x).is_some_and(|s| *s == 1))
        .map(|(x, lo, _)| (x, lo))
        .collect();
    let mut stored: Vec<(String, String)> = Vec::new();
    for s in body {
        s.walk(&mut |s| {
            if let StmtKind::Store { array, index: Expr::Var(i), .. } = &s.kind {
                if local_array(array) && !stored.contains(&(array.clone(), i.clone())) {
                    stored.push((array.clone(), i.clone()));
                }
            }
        });
    }
    let mut k = "k".to_string();
    while info.scope.iter().any(|(n, _)| *n == k) {
        k.push('k');
    }
    let mut out = Vec::new();
    for (a, i) in stored {
        let Some((_, lo)) = up.iter().find(|(x, _)| *x == i) else { continue };
        out.push(Pred::Forall {
            var: k.clone(),
            lo: lo.clone(),
            hi: Term::var(&i),
            body: Box::new(Pred::Initialized(a, Term::var(&k), Term::var(&k))),
        });
    }
    out
}

// --- C1 / C2 ----------------------------------------------------------------

fn exact_return(g: &Function) -> Option<Pred> {
    if g.ret != RetKind::Int {
        return None;
    }
    let [Stmt { kind: StmtKind::Return(Some(e)), .. }] = g.body.as_slice() else { return None };
    let params: BTreeSet<&str> = g.params.iter().map(|p| p.name.as_str()).collect();
    let mut reads = Vec::new();
    e.reads(&mut reads);
    if !reads.iter().all(|r| params.contains(r.as_str())) {
        return None;
    }
    Some(Pred::cmp(Cmp::Eq, Term::Result, Term::from_expr(e)))
}

/// The guard rewritten over the result of a call in the host: the call's
/// destination becomes `\result`, plain scalar arguments become parameters.
fn goal_projection(req: &Request<'_>, f: &Function) -> Vec<(String, Pred)> {
    let guard = &req.unit.guard.predicate;
    let idents = guard.idents();
    let mut out = Vec::new();
    for s in &f.body {
        s.walk(&mut |s| {
            let StmtKind::Call { dest: Some(d), callee, args } = &s.kind else { return };
            if !idents.contains(&d.name) || !req.unit.context.iter().skip(1).any(|c| c == callee) {
                return;
            }
            let Some(g) = req.prog.function(callee) else { return };
            if g.ret != RetKind::Int {
                return;
            }
            let mut map: HashMap<&str, Term> = HashMap::new();
            map.insert(d.name.as_str(), Term::Result);
            for (p, a) in g.params.iter().zip(args) {
                if let (ParamKind::Int, Expr::Var(v)) = (&p.kind, a) {
                    map.entry(v.as_str()).or_insert_with(|| Term::var(&p.name));
                }
            }
            if !idents.iter().all(|i| map.contains_key(i.as_str())) {
                return;
            }
            let p = guard.subst_vars(&|v| map.get(v).cloned());
            out.push((callee.clone(), p));
        });
    }
    out
}
