//! Obligation generation by forward symbolic execution.
//!
//! Values are substituted into the store, so hypotheses only carry path
//! conditions, definedness facts and assumed properties. A goal is checked
//! when execution arrives at its location, before the properties attached to
//! that location are assumed.

use super::logic::*;
use crate::lang::{BinOp, Expr, Function, Location, ParamKind, Program, StmtKind, Stmt, UnOp, VarKind};
use crate::spec::eval::MAX_QUANTIFIER_RANGE;
use crate::spec::{scope_check, BinOpT, Cmp, Pred, PropKind, Property, ScopeRules, SpecError, Term};
use std::collections::{BTreeSet, HashMap};

/// Symbolic states alive at once before the engine gives up.
pub const MAX_PATHS: usize = 512;

#[derive(Debug, Clone, PartialEq)]
pub struct ProofObligation {
    pub name: String,
    /// Id of the property this obligation helps establish.
    pub target: String,
    pub reason: String,
    pub hypotheses: Vec<(String, LForm)>,
    pub declarations: Vec<Decl>,
    pub goal: LForm,
    pub at: Location,
}

impl ProofObligation {
    pub fn hypothesis_forms(&self) -> impl Iterator<Item = &LForm> {
        self.hypotheses.iter().map(|(_, f)| f)
    }

    /// Copy with an extra hypothesis appended under the next label.
    pub fn with_hypothesis(&self, f: LForm) -> ProofObligation {
        let mut o = self.clone();
        let label = format!("P{}", o.hypotheses.len() + 1);
        o.hypotheses.push((label, f));
        o
    }
}

#[derive(Debug, Clone, Default)]
pub struct WpResult {
    pub obligations: Vec<ProofObligation>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone)]
struct Sc {
    val: LTerm,
    init: LForm,
}

#[derive(Debug, Clone, Default)]
struct SymState {
    scalars: HashMap<String, Sc>,
    arrays: HashMap<String, LArr>,
    facts: Vec<LForm>,
}

impl SymState {
    fn assume(&mut self, f: LForm) {
        if !f.is_true() && !self.facts.contains(&f) {
            self.facts.push(f);
        }
    }
}

/// Where names in a predicate resolve.
struct View<'s> {
    scalars: &'s HashMap<String, Sc>,
    arrays: &'s HashMap<String, LArr>,
    old: &'s HashMap<String, Sc>,
    result: Option<&'s LTerm>,
}

/// Translation of predicates into "true without error" / "false without
/// error" formulas, following the evaluation order of the concrete evaluator.
struct Tr<'s> {
    v: View<'s>,
    bound: Vec<(String, String)>,
}

fn undefined() -> (LTerm, LForm) {
    (LTerm::Int(0), LForm::Bool(false))
}

fn bound_symbol(var: &str) -> String {
    // SSA symbols end in `_<digits>`; keep bound names out of that space.
    let ssa_like = var.rsplit_once('_').is_some_and(|(_, d)| !d.is_empty() && d.bytes().all(|b| b.is_ascii_digit()));
    if ssa_like {
        format!("{var}.q")
    } else {
        var.to_string()
    }
}

impl Tr<'_> {
    fn lookup(&self, map: &HashMap<String, Sc>, v: &str) -> (LTerm, LForm) {
        if let Some((_, s)) = self.bound.iter().rev().find(|(n, _)| n == v) {
            return (LTerm::Sym(s.clone()), LForm::tt());
        }
        match map.get(v) {
            Some(sc) => (sc.val.clone(), sc.init.clone()),
            None => undefined(),
        }
    }

    fn term(&mut self, t: &Term) -> (LTerm, LForm) {
        match t {
            Term::Int(n) => (LTerm::Int(*n as i128), LForm::tt()),
            Term::Var(v) => self.lookup(self.v.scalars, v),
            Term::Old(v) => self.lookup(self.v.old, v),
            Term::Result => match self.v.result {
                Some(r) => (r.clone(), LForm::tt()),
                None => undefined(),
            },
            Term::Index(a, i) => {
                let (i, di) = self.term(i);
                let Some(arr) = self.v.arrays.get(a).cloned() else { return undefined() };
                let d = LForm::and([di, in_bounds(&arr, &i), LForm::InitCell(arr.clone(), i.clone())]);
                (LTerm::select(arr, i), d)
            }
            Term::Neg(x) => {
                let (x, d) = self.term(x);
                (LTerm::neg(x), d)
            }
            Term::Bin(op, a, b) => {
                let (a, da) = self.term(a);
                let (b, db) = self.term(b);
                match op {
                    BinOpT::Add => (LTerm::add(a, b), LForm::and([da, db])),
                    BinOpT::Sub => (LTerm::sub(a, b), LForm::and([da, db])),
                    BinOpT::Mul => (LTerm::mul(a, b), LForm::and([da, db])),
                    BinOpT::Div | BinOpT::Mod => {
                        let nz = LForm::cmp(Cmp::Ne, b.clone(), int(0));
                        let t = if *op == BinOpT::Div { LTerm::div(a, b) } else { LTerm::rem(a, b) };
                        (t, LForm::and([da, db, nz]))
                    }
                }
            }
        }
    }

    /// `(T(p), F(p))`.
    fn pred(&mut self, p: &Pred) -> (LForm, LForm) {
        match p {
            Pred::Bool(b) => (LForm::Bool(*b), LForm::Bool(!*b)),
            Pred::Cmp(c, a, b) => {
                let (a, da) = self.term(a);
                let (b, db) = self.term(b);
                let d = LForm::and([da, db]);
                let atom = LForm::cmp(*c, a, b);
                (LForm::and([d.clone(), atom.clone()]), LForm::and([d, LForm::not(atom)]))
            }
            Pred::Not(x) => {
                let (t, f) = self.pred(x);
                (f, t)
            }
            Pred::And(xs) => {
                let parts: Vec<(LForm, LForm)> = xs.iter().map(|x| self.pred(x)).collect();
                let t = LForm::and(parts.iter().map(|(t, _)| t.clone()));
                let f = LForm::or((0..parts.len()).map(|i| {
                    LForm::and(parts[..i].iter().map(|(t, _)| t.clone()).chain([parts[i].1.clone()]))
                }));
                (t, f)
            }
            Pred::Or(xs) => {
                let parts: Vec<(LForm, LForm)> = xs.iter().map(|x| self.pred(x)).collect();
                let f = LForm::and(parts.iter().map(|(_, f)| f.clone()));
                let t = LForm::or((0..parts.len()).map(|i| {
                    LForm::and(parts[..i].iter().map(|(_, f)| f.clone()).chain([parts[i].0.clone()]))
                }));
                (t, f)
            }
            Pred::Implies(a, b) => {
                let (ta, fa) = self.pred(a);
                let (tb, fb) = self.pred(b);
                (LForm::or([fa, LForm::and([ta.clone(), tb])]), LForm::and([ta, fb]))
            }
            Pred::Forall { var, lo, hi, body } => {
                let (lo, dlo) = self.term(lo);
                let (hi, dhi) = self.term(hi);
                let small = LForm::cmp(Cmp::Le, LTerm::sub(hi.clone(), lo.clone()), int(MAX_QUANTIFIER_RANGE));
                let k = bound_symbol(var);
                self.bound.push((var.clone(), k.clone()));
                let (tb, fb) = self.pred(body);
                self.bound.pop();
                let d = LForm::and([dlo, dhi, small]);
                let all = |b: LForm| LForm::Forall(k.clone(), lo.clone(), hi.clone(), Box::new(b));
                let t = LForm::and([d.clone(), forall_or_true(all(tb.clone()))]);
                let some_false = LForm::Exists(k.clone(), lo.clone(), hi.clone(), Box::new(fb.clone()));
                let f = LForm::and([d, forall_or_true(all(LForm::or([tb, fb]))), some_false]);
                (t, f)
            }
            Pred::ValidRead(a, lo, hi) | Pred::ValidWrite(a, lo, hi) => {
                let (lo, dlo) = self.term(lo);
                let (hi, dhi) = self.term(hi);
                let Some(arr) = self.v.arrays.get(a).cloned() else { return (LForm::Bool(false), LForm::Bool(false)) };
                let d = LForm::and([dlo, dhi]);
                let atom = LForm::Valid(arr, lo, hi);
                (LForm::and([d.clone(), atom.clone()]), LForm::and([d, LForm::not(atom)]))
            }
            Pred::Initialized(a, lo, hi) => {
                let (lo, dlo) = self.term(lo);
                let (hi, dhi) = self.term(hi);
                let Some(arr) = self.v.arrays.get(a).cloned() else { return (LForm::Bool(false), LForm::Bool(false)) };
                let d = LForm::and([dlo, dhi]);
                let atom = LForm::InitRange(arr, lo, hi);
                (LForm::and([d.clone(), atom.clone()]), LForm::and([d, LForm::not(atom)]))
            }
            // Looks at the state only, never at quantifier bindings.
            Pred::Init(x) => match self.v.scalars.get(x) {
                Some(sc) => (sc.init.clone(), LForm::not(sc.init.clone())),
                None => (LForm::Bool(false), LForm::Bool(false)),
            },
        }
    }
}

fn forall_or_true(f: LForm) -> LForm {
    match f {
        LForm::Forall(_, _, _, ref b) if b.is_true() => LForm::tt(),
        f => f,
    }
}

fn in_bounds(arr: &LArr, i: &LTerm) -> LForm {
    LForm::and([LForm::cmp(Cmp::Le, int(0), i.clone()), LForm::cmp(Cmp::Lt, i.clone(), LTerm::Len(arr.clone()))])
}

fn int32(t: &LTerm) -> LForm {
    LForm::and([LForm::cmp(Cmp::Le, int(INT_MIN), t.clone()), LForm::cmp(Cmp::Le, t.clone(), int(INT_MAX))])
}

fn cmp_of(op: BinOp) -> Option<Cmp> {
    Cmp::from_binop(op)
}

fn scope_rules(kind: &PropKind) -> ScopeRules {
    let post = matches!(kind, PropKind::Postcondition);
    ScopeRules { allow_result: post, allow_old: post }
}

/// Proof obligations whose joint validity establishes `q` under `specs`.
pub fn wp_obligations(prog: &Program, specs: &[Property], q: &Property) -> Result<WpResult, SpecError> {
    if prog.loc_info(&q.at).is_none() {
        return Err(SpecError::Scope { ident: q.id.clone(), loc: q.at.to_string(), msg: "unknown location".into() });
    }
    for p in specs.iter().chain([q]) {
        if !matches!(p.kind, PropKind::LoopAssigns(_)) {
            scope_check(prog, &p.predicate, &p.at, scope_rules(&p.kind))?;
        }
    }
    let mut out = WpResult::default();
    if let PropKind::LoopAssigns(xs) = &q.kind {
        out.obligations.extend(assigns_coverage(prog, q, xs));
        return Ok(out);
    }
    let hosts: Vec<&Function> = match (&q.kind, &q.at) {
        (PropKind::Precondition, Location::Entry(g)) => {
            let callers: Vec<&Function> = prog.functions.iter().filter(|f| f.callees().contains(g)).collect();
            if callers.is_empty() {
                let f = prog.function(g).expect("located");
                let mut e = Engine::new(prog, specs, q, f);
                let st = e.entry_state();
                let goal = e.translate_at(&st, q, None, true);
                e.emit(&st, goal, &q.at, "no call sites");
                out.obligations = e.obligations;
                return Ok(out);
            }
            callers
        }
        _ => vec![prog.function(&q.func).or_else(|| prog.func_of(&q.at).and_then(|n| prog.function(n))).expect("located")],
    };
    for f in hosts {
        let mut e = Engine::new(prog, specs, q, f);
        e.run();
        out.obligations.extend(e.obligations);
        out.warnings.extend(e.warnings);
    }
    Ok(out)
}

/// Variables written by the loop body that are visible at the loop and
/// missing from `xs`. Without any, the clause holds by construction.
pub fn uncovered_writes(prog: &Program, at: &Location, xs: &BTreeSet<String>) -> Vec<String> {
    let Some(Stmt { kind: StmtKind::While { body, .. }, .. }) = prog.stmt_at(at) else { return Vec::new() };
    let visible: BTreeSet<&str> = prog.loc_info(at).map(|i| i.scope.iter().map(|(n, _)| n.as_str()).collect()).unwrap_or_default();
    let mut w = Vec::new();
    for s in body {
        s.writes(&mut w);
    }
    let mut out: Vec<String> = w.into_iter().filter(|n| visible.contains(n.as_str()) && !xs.contains(n)).collect();
    out.sort();
    out.dedup();
    out
}

fn assigns_coverage(prog: &Program, q: &Property, xs: &BTreeSet<String>) -> Vec<ProofObligation> {
    let missing = uncovered_writes(prog, &q.at, xs);
    if missing.is_empty() && matches!(prog.stmt_at(&q.at).map(|s| &s.kind), Some(StmtKind::While { .. })) {
        return Vec::new();
    }
    let reason = if missing.is_empty() {
        "loop assigns clause is not attached to a loop".to_string()
    } else {
        format!("assigns coverage: {} written in the loop but not listed", missing.join(", "))
    };
    vec![ProofObligation {
        name: format!("{}.1", q.id),
        target: q.id.clone(),
        reason,
        hypotheses: Vec::new(),
        declarations: Vec::new(),
        goal: LForm::Bool(false),
        at: q.at.clone(),
    }]
}

struct Engine<'a> {
    prog: &'a Program,
    hyps: &'a [Property],
    goal: &'a Property,
    func: &'a Function,
    decls: Vec<Decl>,
    counters: HashMap<String, usize>,
    entry: HashMap<String, Sc>,
    entry_arrays: HashMap<String, LArr>,
    obligations: Vec<ProofObligation>,
    warnings: Vec<String>,
    exhausted: bool,
}

impl<'a> Engine<'a> {
    fn new(prog: &'a Program, hyps: &'a [Property], goal: &'a Property, func: &'a Function) -> Self {
        Engine {
            prog,
            hyps,
            goal,
            func,
            decls: Vec::new(),
            counters: HashMap::new(),
            entry: HashMap::new(),
            entry_arrays: HashMap::new(),
            obligations: Vec::new(),
            warnings: Vec::new(),
            exhausted: false,
        }
    }

    fn fresh(&mut self, base: &str, sort: Sort) -> String {
        let n = self.counters.entry(base.to_string()).or_insert(1);
        let name = format!("{base}_{n}");
        *n += 1;
        self.decls.push(Decl { name: name.clone(), sort });
        name
    }

    fn entry_state(&mut self) -> SymState {
        let mut st = SymState::default();
        for p in &self.func.params {
            let name = format!("{}_0", p.name);
            self.counters.insert(p.name.clone(), 1);
            match p.kind {
                ParamKind::Int => {
                    self.decls.push(Decl { name: name.clone(), sort: Sort::Int32 });
                    st.scalars.insert(p.name.clone(), Sc { val: LTerm::Sym(name), init: LForm::tt() });
                }
                ParamKind::Array { .. } => {
                    self.decls.push(Decl { name: name.clone(), sort: Sort::Array { len: None, init: ArrInit::Full } });
                    st.arrays.insert(p.name.clone(), LArr::Sym(name));
                }
            }
        }
        self.entry = st.scalars.clone();
        self.entry_arrays = st.arrays.clone();
        st
    }

    fn run(&mut self) {
        let mut st = self.entry_state();
        let entry = Location::Entry(self.func.name.clone());
        self.assume_hyps(&mut st, &entry);
        self.loop_warnings();
        let ends = self.block(&self.func.body, vec![st]);
        let exit = Location::Exit(self.func.name.clone());
        for s in ends {
            self.arrive_exit(&s, &exit, None);
        }
    }

    fn loop_warnings(&mut self) {
        for l in self.prog.enclosing_loops(&self.goal.at) {
            let has_inv = self.hyps.iter().any(|h| h.at == l && h.kind == PropKind::LoopInvariant);
            if !has_inv {
                self.warnings.push(format!("loop at {l} encloses {} but has no loop invariant", self.goal.id));
            }
        }
    }

    fn hyps_at<'h>(&'h self, loc: &'h Location) -> impl Iterator<Item = &'a Property> + 'h {
        self.hyps.iter().filter(move |h| h.at == *loc)
    }

    /// `T(p)` at a location; `exit` views the entry values plus the result.
    fn translate_at(&self, st: &SymState, p: &Property, result: Option<&LTerm>, exit: bool) -> LForm {
        let v = if exit {
            View { scalars: &self.entry, arrays: &self.entry_arrays, old: &self.entry, result }
        } else {
            View { scalars: &st.scalars, arrays: &st.arrays, old: &self.entry, result }
        };
        Tr { v, bound: Vec::new() }.pred(&p.predicate).0
    }

    fn assume_hyps(&self, st: &mut SymState, loc: &Location) {
        let fs: Vec<LForm> = self
            .hyps_at(loc)
            .filter(|h| !matches!(h.kind, PropKind::LoopAssigns(_)))
            .map(|h| self.translate_at(st, h, None, false))
            .collect();
        fs.into_iter().for_each(|f| st.assume(f));
    }

    fn emit(&mut self, st: &SymState, goal: LForm, at: &Location, reason: &str) {
        let hypotheses: Vec<(String, LForm)> =
            st.facts.iter().enumerate().map(|(i, f)| (format!("P{}", i + 1), f.clone())).collect();
        let mut syms = BTreeSet::new();
        goal.symbols(&mut syms);
        hypotheses.iter().for_each(|(_, f)| f.symbols(&mut syms));
        let declarations = self.decls.iter().filter(|d| syms.contains(&d.name)).cloned().collect();
        self.obligations.push(ProofObligation {
            name: format!("{}.{}", self.goal.id, self.obligations.len() + 1),
            target: self.goal.id.clone(),
            reason: reason.to_string(),
            hypotheses,
            declarations,
            goal,
            at: at.clone(),
        });
    }

    fn goal_here(&self, loc: &Location) -> bool {
        self.goal.at == *loc && !matches!(self.goal.kind, PropKind::Precondition | PropKind::LoopAssigns(_))
    }

    fn arrive(&mut self, st: &SymState, loc: &Location, reason: &str) {
        if self.goal_here(loc) {
            let g = self.translate_at(st, self.goal, None, false);
            self.emit(st, g, loc, reason);
        }
    }

    fn arrive_exit(&mut self, st: &SymState, exit: &Location, result: Option<&LTerm>) {
        if self.goal_here(exit) {
            let g = self.translate_at(st, self.goal, result, true);
            self.emit(st, g, exit, "at return");
        }
    }

    // ----- program expressions

    fn eval(&self, e: &Expr, st: &SymState) -> (LTerm, LForm) {
        match e {
            Expr::Int(n) => (int(*n as i128), LForm::tt()),
            Expr::Var(v) => match st.scalars.get(v) {
                Some(sc) => (sc.val.clone(), sc.init.clone()),
                None => undefined(),
            },
            Expr::Index(a, i) => {
                let (i, di) = self.eval(i, st);
                let Some(arr) = st.arrays.get(a).cloned() else { return undefined() };
                let d = LForm::and([di, in_bounds(&arr, &i), LForm::InitCell(arr.clone(), i.clone())]);
                (LTerm::select(arr, i), d)
            }
            Expr::Unary(UnOp::Neg, x) => {
                let (x, d) = self.eval(x, st);
                let ok = LForm::cmp(Cmp::Ne, x.clone(), int(INT_MIN));
                (LTerm::neg(x), LForm::and([d, ok]))
            }
            Expr::Binary(op, l, r) if op.is_arith() => {
                let (a, da) = self.eval(l, st);
                let (b, db) = self.eval(r, st);
                let (t, ok) = match op {
                    BinOp::Add => {
                        let t = LTerm::add(a, b);
                        (t.clone(), int32(&t))
                    }
                    BinOp::Sub => {
                        let t = LTerm::sub(a, b);
                        (t.clone(), int32(&t))
                    }
                    BinOp::Mul => {
                        let t = LTerm::mul(a, b);
                        (t.clone(), int32(&t))
                    }
                    _ => {
                        let nz = LForm::cmp(Cmp::Ne, b.clone(), int(0));
                        let no_ovf = LForm::or([
                            LForm::cmp(Cmp::Ne, a.clone(), int(INT_MIN)),
                            LForm::cmp(Cmp::Ne, b.clone(), int(-1)),
                        ]);
                        let t = if *op == BinOp::Div { LTerm::div(a, b) } else { LTerm::rem(a, b) };
                        (t, LForm::and([nz, no_ovf]))
                    }
                };
                (t, LForm::and([da, db, ok]))
            }
            _ => {
                let (c, d) = self.cond(e, st);
                (LTerm::Ite(Box::new(c), Box::new(int(1)), Box::new(int(0))), d)
            }
        }
    }

    /// `(truth, definedness)` of a condition with short-circuit evaluation.
    fn cond(&self, e: &Expr, st: &SymState) -> (LForm, LForm) {
        match e {
            Expr::Unary(UnOp::Not, x) => {
                let (c, d) = self.cond(x, st);
                (LForm::not(c), d)
            }
            Expr::Binary(BinOp::And, l, r) => {
                let (cl, dl) = self.cond(l, st);
                let (cr, dr) = self.cond(r, st);
                (LForm::and([cl.clone(), cr]), LForm::and([dl, LForm::implies(cl, dr)]))
            }
            Expr::Binary(BinOp::Or, l, r) => {
                let (cl, dl) = self.cond(l, st);
                let (cr, dr) = self.cond(r, st);
                (LForm::or([cl.clone(), cr]), LForm::and([dl, LForm::implies(LForm::not(cl), dr)]))
            }
            Expr::Binary(op, l, r) if op.is_cmp() => {
                let (a, da) = self.eval(l, st);
                let (b, db) = self.eval(r, st);
                (LForm::cmp(cmp_of(*op).expect("comparison"), a, b), LForm::and([da, db]))
            }
            _ => {
                let (t, d) = self.eval(e, st);
                (LForm::cmp(Cmp::Ne, t, int(0)), d)
            }
        }
    }

    // ----- statements

    fn block(&mut self, stmts: &[Stmt], mut states: Vec<SymState>) -> Vec<SymState> {
        for s in stmts {
            if states.is_empty() {
                break;
            }
            let mut next = Vec::new();
            for st in states {
                next.extend(self.stmt(s, st));
            }
            if next.len() > MAX_PATHS {
                self.give_up(&s.loc);
                return Vec::new();
            }
            states = next;
        }
        states
    }

    fn give_up(&mut self, at: &Location) {
        if !self.exhausted {
            self.exhausted = true;
            self.emit(&SymState::default(), LForm::Bool(false), at, "path budget exceeded");
        }
    }

    fn stmt(&mut self, s: &Stmt, mut st: SymState) -> Vec<SymState> {
        if self.exhausted {
            return Vec::new();
        }
        if let StmtKind::While { cond, body } = &s.kind {
            return self.while_loop(s, cond, body, st);
        }
        self.arrive(&st, &s.loc, "goal");
        self.assume_hyps(&mut st, &s.loc);
        match &s.kind {
            StmtKind::Decl { name, init } => {
                let sc = match init {
                    Some(e) => {
                        let (v, d) = self.eval(e, &st);
                        st.assume(d);
                        Sc { val: v, init: LForm::tt() }
                    }
                    None => Sc { val: int(0), init: LForm::Bool(false) },
                };
                st.scalars.insert(name.clone(), sc);
                vec![st]
            }
            StmtKind::DeclArray { name, len } => {
                let sym = self.fresh(name, Sort::Array { len: Some(*len), init: ArrInit::Empty });
                st.arrays.insert(name.clone(), LArr::Sym(sym));
                vec![st]
            }
            StmtKind::Assign { name, value } => {
                let (v, d) = self.eval(value, &st);
                st.assume(d);
                st.scalars.insert(name.clone(), Sc { val: v, init: LForm::tt() });
                vec![st]
            }
            StmtKind::Store { array, index, value } => {
                let (i, di) = self.eval(index, &st);
                let (v, dv) = self.eval(value, &st);
                let Some(arr) = st.arrays.get(array).cloned() else { return Vec::new() };
                st.assume(LForm::and([di, dv, in_bounds(&arr, &i)]));
                st.arrays.insert(array.clone(), arr.store(i, v));
                vec![st]
            }
            StmtKind::Call { dest, callee, args } => self.call(s, dest.as_ref().map(|d| d.name.as_str()), callee, args, st),
            StmtKind::If { cond, then_branch, else_branch } => {
                let (c, d) = self.cond(cond, &st);
                st.assume(d);
                let mut t = st.clone();
                t.assume(c.clone());
                let mut e = st;
                e.assume(LForm::not(c));
                let mut out = self.block(then_branch, vec![t]);
                out.extend(self.block(else_branch, vec![e]));
                out
            }
            StmtKind::Return(value) => {
                let r = value.as_ref().map(|e| {
                    let (v, d) = self.eval(e, &st);
                    st.assume(d);
                    v
                });
                let exit = Location::Exit(self.func.name.clone());
                self.arrive_exit(&st, &exit, r.as_ref());
                Vec::new()
            }
            StmtKind::Nop => vec![st],
            StmtKind::While { .. } => unreachable!("handled above"),
        }
    }

    fn call(&mut self, s: &Stmt, dest: Option<&str>, callee: &str, args: &[Expr], mut st: SymState) -> Vec<SymState> {
        let Some(g) = self.prog.function(callee) else { return Vec::new() };
        let mut scalars = HashMap::new();
        let mut arrays = HashMap::new();
        for (p, a) in g.params.iter().zip(args) {
            match (&p.kind, a) {
                (ParamKind::Array { .. }, Expr::Var(v)) => {
                    let Some(arr) = st.arrays.get(v).cloned() else { return Vec::new() };
                    let full = LForm::InitRange(arr.clone(), int(0), LTerm::sub(LTerm::Len(arr.clone()), int(1)));
                    st.assume(full);
                    arrays.insert(p.name.clone(), arr);
                }
                _ => {
                    let (v, d) = self.eval(a, &st);
                    st.assume(d);
                    scalars.insert(p.name.clone(), Sc { val: v, init: LForm::tt() });
                }
            }
        }
        let entry = Location::Entry(callee.to_string());
        let tr = |p: &Property, result: Option<&LTerm>| {
            let v = View { scalars: &scalars, arrays: &arrays, old: &scalars, result };
            Tr { v, bound: Vec::new() }.pred(&p.predicate).0
        };
        if self.goal.kind == PropKind::Precondition && self.goal.at == entry {
            let g = tr(self.goal, None);
            self.emit(&st, g, &s.loc, "call site");
        }
        let pres: Vec<LForm> = self.hyps_at(&entry).map(|h| tr(h, None)).collect();
        pres.into_iter().for_each(|f| st.assume(f));
        let r = match g.ret {
            crate::lang::RetKind::Int => {
                let base = dest.map(String::from).unwrap_or_else(|| format!("ret_{callee}"));
                Some(LTerm::Sym(self.fresh(&base, Sort::Int32)))
            }
            crate::lang::RetKind::Void => None,
        };
        let exit = Location::Exit(callee.to_string());
        let posts: Vec<LForm> = self.hyps_at(&exit).map(|h| tr(h, r.as_ref())).collect();
        posts.into_iter().for_each(|f| st.assume(f));
        if let (Some(d), Some(r)) = (dest, r) {
            st.scalars.insert(d.to_string(), Sc { val: r, init: LForm::tt() });
        }
        vec![st]
    }

    fn frame(&self, at: &Location) -> Option<BTreeSet<String>> {
        let mut frame: Option<BTreeSet<String>> = None;
        for h in self.hyps_at(at) {
            if let PropKind::LoopAssigns(xs) = &h.kind {
                frame = Some(match frame {
                    None => xs.clone(),
                    Some(f) => f.intersection(xs).cloned().collect(),
                });
            }
        }
        frame
    }

    fn havoc(&mut self, st: &mut SymState, at: &Location) {
        let frame = self.frame(at);
        let scope: Vec<(String, VarKind)> = self.prog.loc_info(at).map(|i| i.scope.clone()).unwrap_or_default();
        for (name, kind) in scope {
            if frame.as_ref().is_some_and(|f| !f.contains(&name)) {
                continue;
            }
            match kind {
                VarKind::Int => {
                    let Some(old) = st.scalars.get(&name).cloned() else { continue };
                    let v = self.fresh(&name, Sort::Int32);
                    let init = if old.init.is_true() {
                        LForm::tt()
                    } else {
                        let b = format!("{v}.init");
                        self.decls.push(Decl { name: b.clone(), sort: Sort::Bool });
                        LForm::or([old.init, LForm::BoolSym(b)])
                    };
                    st.scalars.insert(name, Sc { val: LTerm::Sym(v), init });
                }
                VarKind::Array(len) => {
                    if !st.arrays.contains_key(&name) {
                        continue;
                    }
                    let init = if len.is_some() { ArrInit::Unknown } else { ArrInit::Full };
                    let a = self.fresh(&name, Sort::Array { len, init });
                    st.arrays.insert(name, LArr::Sym(a));
                }
            }
        }
    }

    fn while_loop(&mut self, s: &Stmt, cond: &Expr, body: &[Stmt], st: SymState) -> Vec<SymState> {
        self.arrive(&st, &s.loc, "loop entry");
        let mut h = st;
        self.havoc(&mut h, &s.loc);
        self.assume_hyps(&mut h, &s.loc);
        // Induction: at a later visit the goal held at every earlier one.
        if self.goal_here(&s.loc) {
            let g = self.translate_at(&h, self.goal, None, false);
            h.assume(g);
        }
        let (c, d) = self.cond(cond, &h);
        h.assume(d);
        let mut b = h.clone();
        b.assume(c.clone());
        for end in self.block(body, vec![b]) {
            self.arrive(&end, &s.loc, "loop preservation");
        }
        h.assume(LForm::not(c));
        vec![h]
    }
}
