//! Internal prover: simplification, quantifier instantiation, purification
//! with Ackermann constraints, then DPLL over Fourier–Motzkin.

use super::logic::*;
use crate::spec::Cmp;
use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Limits {
    /// Instantiation rounds for unbounded quantifiers.
    pub rounds: usize,
    /// Quantifiers over constant ranges up to this size are expanded.
    pub expand: i128,
    pub decisions: usize,
    pub fm_constraints: usize,
    /// Ground instances per quantifier and round.
    pub instances: usize,
}

impl Default for Limits {
    fn default() -> Self {
        Limits { rounds: 2, expand: 64, decisions: 20_000, fm_constraints: 2_000, instances: 48 }
    }
}

/// `true` when `hyps ⇒ goal` holds for all values of the declared symbols.
pub fn prove(decls: &[Decl], hyps: &[LForm], goal: &LForm) -> bool {
    prove_with(decls, hyps, goal, Limits::default())
}

pub fn prove_with(decls: &[Decl], hyps: &[LForm], goal: &LForm, limits: Limits) -> bool {
    let mut p = Prover { sorts: decls.iter().map(|d| (d.name.clone(), d.sort)).collect(), limits, fresh: 0, skolems: Vec::new() };
    p.valid(hyps, goal)
}

struct Prover {
    sorts: HashMap<String, Sort>,
    limits: Limits,
    fresh: usize,
    skolems: Vec<String>,
}

// ---------------------------------------------------------------------
// Array renaming

fn rename_term(t: &LTerm, m: &HashMap<String, String>) -> LTerm {
    let r = |x: &LTerm| Box::new(rename_term(x, m));
    match t {
        LTerm::Int(_) | LTerm::Sym(_) => t.clone(),
        LTerm::Len(a) => LTerm::Len(rename_arr(a, m)),
        LTerm::Select(a, i) => LTerm::Select(rename_arr(a, m), r(i)),
        LTerm::Neg(a) => LTerm::Neg(r(a)),
        LTerm::Add(a, b) => LTerm::Add(r(a), r(b)),
        LTerm::Sub(a, b) => LTerm::Sub(r(a), r(b)),
        LTerm::Mul(a, b) => LTerm::Mul(r(a), r(b)),
        LTerm::Div(a, b) => LTerm::Div(r(a), r(b)),
        LTerm::Mod(a, b) => LTerm::Mod(r(a), r(b)),
        LTerm::Ite(c, a, b) => LTerm::Ite(Box::new(rename_form(c, m)), r(a), r(b)),
    }
}

fn rename_arr(a: &LArr, m: &HashMap<String, String>) -> LArr {
    match a {
        LArr::Sym(s) => LArr::Sym(m.get(s).cloned().unwrap_or_else(|| s.clone())),
        LArr::Store(b, i, v) => LArr::Store(Box::new(rename_arr(b, m)), Box::new(rename_term(i, m)), Box::new(rename_term(v, m))),
    }
}

fn rename_form(f: &LForm, m: &HashMap<String, String>) -> LForm {
    let t = |x: &LTerm| rename_term(x, m);
    let a = |x: &LArr| rename_arr(x, m);
    match f {
        LForm::Bool(_) | LForm::BoolSym(_) => f.clone(),
        LForm::Cmp(c, x, y) => LForm::Cmp(*c, t(x), t(y)),
        LForm::Not(x) => LForm::Not(Box::new(rename_form(x, m))),
        LForm::And(xs) => LForm::And(xs.iter().map(|x| rename_form(x, m)).collect()),
        LForm::Or(xs) => LForm::Or(xs.iter().map(|x| rename_form(x, m)).collect()),
        LForm::Implies(x, y) => LForm::Implies(Box::new(rename_form(x, m)), Box::new(rename_form(y, m))),
        LForm::Forall(k, lo, hi, b) => LForm::Forall(k.clone(), t(lo), t(hi), Box::new(rename_form(b, m))),
        LForm::Exists(k, lo, hi, b) => LForm::Exists(k.clone(), t(lo), t(hi), Box::new(rename_form(b, m))),
        LForm::Valid(x, lo, hi) => LForm::Valid(a(x), t(lo), t(hi)),
        LForm::InitRange(x, lo, hi) => LForm::InitRange(a(x), t(lo), t(hi)),
        LForm::InitCell(x, i) => LForm::InitCell(a(x), t(i)),
        LForm::ArrEq(x, y) => LForm::ArrEq(a(x), a(y)),
    }
}

fn top_conjuncts(f: &LForm, out: &mut Vec<LForm>) {
    match f {
        LForm::And(xs) => xs.iter().for_each(|x| top_conjuncts(x, out)),
        f => out.push(f.clone()),
    }
}

fn find(uf: &mut HashMap<String, String>, x: &str) -> String {
    let mut cur = x.to_string();
    while let Some(p) = uf.get(&cur) {
        if *p == cur {
            break;
        }
        cur = p.clone();
    }
    cur
}

impl Prover {
    fn valid(&mut self, hyps: &[LForm], goal: &LForm) -> bool {
        if goal.is_true() || hyps.iter().any(|h| h == goal || matches!(h, LForm::Bool(false))) {
            return true;
        }
        let (hyps, goal) = match self.merge_arrays(hyps) {
            Some((m, hs)) => (hs, rename_form(goal, &m)),
            None => (hyps.to_vec(), goal.clone()),
        };
        let mut fs: Vec<LForm> = hyps.iter().map(|h| self.simp(h)).collect();
        let g = self.simp(&goal);
        if g.is_true() || fs.iter().any(|f| matches!(f, LForm::Bool(false)) || *f == g) {
            return true;
        }
        fs.push(LForm::not(g));
        let mut fs: Vec<LForm> = fs.iter().map(|f| nnf(f, false)).collect();
        let mut done: HashSet<(LForm, LTerm)> = HashSet::new();
        for _ in 0..self.limits.rounds {
            fs = fs.iter().map(|f| self.skolemize(f)).collect();
            let terms = self.ground_terms(&fs);
            let mut changed = false;
            fs = fs.iter().map(|f| self.instantiate(f, &terms, &mut done, &mut changed)).collect();
            fs = fs.iter().map(|f| nnf(&self.simp(f), false)).collect();
            if !changed {
                break;
            }
        }
        let fs: Vec<LForm> = fs.iter().map(drop_foralls).map(|f| self.skolemize(&f)).collect();
        let fs: Vec<LForm> = fs.iter().map(|f| nnf(&self.simp(&drop_foralls(f)), false)).collect();
        if fs.iter().any(|f| matches!(f, LForm::Bool(false))) {
            return true;
        }
        let fs: Vec<LForm> = fs.iter().map(|f| self.lift(f)).collect();
        let mut th = Theory::new(&self.sorts);
        let pfs: Vec<PF> = fs.iter().map(|f| th.form(f)).collect();
        if th.overflow {
            return false;
        }
        let mut sat = Sat::new(&th, self.limits);
        for pf in pfs.iter().chain(th.side.clone().iter()) {
            sat.assert(pf);
        }
        sat.refuted(&th)
    }

    /// Collapses arrays equated by top-level hypotheses onto one symbol.
    fn merge_arrays(&mut self, hyps: &[LForm]) -> Option<(HashMap<String, String>, Vec<LForm>)> {
        let mut cs = Vec::new();
        hyps.iter().for_each(|h| top_conjuncts(h, &mut cs));
        let mut uf: HashMap<String, String> = HashMap::new();
        for c in &cs {
            if let LForm::ArrEq(LArr::Sym(a), LArr::Sym(b)) = c {
                let (ra, rb) = (find(&mut uf, a), find(&mut uf, b));
                if ra != rb {
                    let (keep, drop) = if ra < rb { (ra, rb) } else { (rb, ra) };
                    uf.insert(drop, keep);
                }
            }
        }
        if uf.is_empty() {
            return None;
        }
        let keys: Vec<String> = uf.keys().cloned().collect();
        let mut m = HashMap::new();
        for k in keys {
            let r = find(&mut uf, &k);
            // Equal arrays share length and contents, so either sort is sound.
            if let (Some(Sort::Array { len: kl, init: ki }), Some(Sort::Array { len: rl, init: ri })) =
                (self.sorts.get(&k).copied(), self.sorts.get(&r).copied())
            {
                let len = rl.or(kl);
                let init = if ri == ArrInit::Unknown { ki } else { ri };
                self.sorts.insert(r.clone(), Sort::Array { len, init });
            }
            m.insert(k, r);
        }
        let hs = hyps.iter().map(|h| rename_form(h, &m)).collect();
        Some((m, hs))
    }

    fn bound_name(&mut self) -> String {
        self.fresh += 1;
        format!("k!{}", self.fresh)
    }

    fn arr_sort(&self, a: &LArr) -> Option<Sort> {
        self.sorts.get(a.base()).copied()
    }

    // ----- simplification

    fn simp_term(&mut self, t: &LTerm) -> LTerm {
        match t {
            LTerm::Int(_) | LTerm::Sym(_) => t.clone(),
            LTerm::Len(a) => {
                let a = self.simp_arr(a);
                match self.arr_sort(&a) {
                    Some(Sort::Array { len: Some(n), .. }) => int(n as i128),
                    _ => LTerm::Len(LArr::Sym(a.base().to_string())),
                }
            }
            LTerm::Select(a, i) => {
                let a = self.simp_arr(a);
                let i = self.simp_term(i);
                select_store(&a, i)
            }
            LTerm::Neg(x) => LTerm::neg(self.simp_term(x)),
            LTerm::Add(a, b) => LTerm::add(self.simp_term(a), self.simp_term(b)),
            LTerm::Sub(a, b) => LTerm::sub(self.simp_term(a), self.simp_term(b)),
            LTerm::Mul(a, b) => LTerm::mul(self.simp_term(a), self.simp_term(b)),
            LTerm::Div(a, b) => LTerm::div(self.simp_term(a), self.simp_term(b)),
            LTerm::Mod(a, b) => LTerm::rem(self.simp_term(a), self.simp_term(b)),
            LTerm::Ite(c, a, b) => match self.simp(c) {
                LForm::Bool(true) => self.simp_term(a),
                LForm::Bool(false) => self.simp_term(b),
                c => {
                    let (a, b) = (self.simp_term(a), self.simp_term(b));
                    if a == b {
                        a
                    } else {
                        LTerm::Ite(Box::new(c), Box::new(a), Box::new(b))
                    }
                }
            },
        }
    }

    fn simp_arr(&mut self, a: &LArr) -> LArr {
        match a {
            LArr::Sym(_) => a.clone(),
            LArr::Store(b, i, v) => {
                let b = self.simp_arr(b);
                b.store(self.simp_term(i), self.simp_term(v))
            }
        }
    }

    fn init_cell(&self, a: &LArr, i: LTerm) -> LForm {
        match a {
            LArr::Sym(s) => match self.sorts.get(s) {
                Some(Sort::Array { init: ArrInit::Full, .. }) => LForm::tt(),
                Some(Sort::Array { init: ArrInit::Empty, .. }) => LForm::Bool(false),
                _ => LForm::InitCell(a.clone(), i),
            },
            LArr::Store(b, j, _) => {
                if i == **j {
                    return LForm::tt();
                }
                let eq = eq_terms(&i, j);
                LForm::or([eq, self.init_cell(b, i)])
            }
        }
    }

    fn simp(&mut self, f: &LForm) -> LForm {
        match f {
            LForm::Bool(_) | LForm::BoolSym(_) => f.clone(),
            LForm::Cmp(c, a, b) => {
                let (a, b) = (self.simp_term(a), self.simp_term(b));
                if a == b {
                    return LForm::Bool(matches!(c, Cmp::Le | Cmp::Ge | Cmp::Eq));
                }
                LForm::cmp(*c, a, b)
            }
            LForm::Not(x) => LForm::not(self.simp(x)),
            LForm::And(xs) => {
                let v: Vec<LForm> = xs.iter().map(|x| self.simp(x)).collect();
                LForm::and(v)
            }
            LForm::Or(xs) => {
                let v: Vec<LForm> = xs.iter().map(|x| self.simp(x)).collect();
                LForm::or(v)
            }
            LForm::Implies(a, b) => {
                let a = self.simp(a);
                let b = self.simp(b);
                LForm::or([LForm::not(a), b])
            }
            LForm::Forall(k, lo, hi, body) | LForm::Exists(k, lo, hi, body) => {
                let is_all = matches!(f, LForm::Forall(..));
                let (lo, hi) = (self.simp_term(lo), self.simp_term(hi));
                let body = self.simp(body);
                if body == LForm::Bool(is_all) {
                    return body;
                }
                if let (LTerm::Int(l), LTerm::Int(h)) = (&lo, &hi) {
                    if h <= l {
                        return LForm::Bool(is_all);
                    }
                    if h - l <= self.limits.expand {
                        let inst: Vec<LForm> = (*l..*h).map(|i| body.subst(k, &int(i))).collect();
                        let inst: Vec<LForm> = inst.iter().map(|x| self.simp(x)).collect();
                        return if is_all { LForm::and(inst) } else { LForm::or(inst) };
                    }
                }
                if is_all {
                    LForm::Forall(k.clone(), lo, hi, Box::new(body))
                } else {
                    LForm::Exists(k.clone(), lo, hi, Box::new(body))
                }
            }
            LForm::Valid(a, lo, hi) => {
                let a = self.simp_arr(a);
                let len = LTerm::Len(a);
                let e = LForm::or([
                    LForm::Cmp(Cmp::Gt, lo.clone(), hi.clone()),
                    LForm::and([LForm::Cmp(Cmp::Le, int(0), lo.clone()), LForm::Cmp(Cmp::Lt, hi.clone(), len)]),
                ]);
                self.simp(&e)
            }
            LForm::InitRange(a, lo, hi) => {
                let a = self.simp_arr(a);
                let k = self.bound_name();
                let cells = LForm::Forall(
                    k.clone(),
                    lo.clone(),
                    LTerm::add(hi.clone(), int(1)),
                    Box::new(LForm::InitCell(a.clone(), LTerm::Sym(k))),
                );
                let e = LForm::or([
                    LForm::Cmp(Cmp::Gt, lo.clone(), hi.clone()),
                    LForm::and([
                        LForm::Cmp(Cmp::Le, int(0), lo.clone()),
                        LForm::Cmp(Cmp::Lt, hi.clone(), LTerm::Len(a)),
                        cells,
                    ]),
                ]);
                self.simp(&e)
            }
            LForm::InitCell(a, i) => {
                let a = self.simp_arr(a);
                let i = self.simp_term(i);
                self.init_cell(&a, i)
            }
            LForm::ArrEq(a, b) => {
                let (a, b) = (self.simp_arr(a), self.simp_arr(b));
                if a == b {
                    LForm::tt()
                } else {
                    LForm::ArrEq(a, b)
                }
            }
        }
    }

    // ----- quantifiers

    fn skolemize(&mut self, f: &LForm) -> LForm {
        match f {
            LForm::Exists(k, lo, hi, body) => {
                self.fresh += 1;
                let sk = format!("sk!{}", self.fresh);
                self.skolems.push(sk.clone());
                let s = LTerm::Sym(sk);
                let body = body.subst(k, &s);
                LForm::and([
                    LForm::Cmp(Cmp::Le, lo.clone(), s.clone()),
                    LForm::Cmp(Cmp::Lt, s, hi.clone()),
                    self.skolemize(&body),
                ])
            }
            LForm::And(xs) => LForm::and(xs.iter().map(|x| self.skolemize(x)).collect::<Vec<_>>()),
            LForm::Or(xs) => LForm::or(xs.iter().map(|x| self.skolemize(x)).collect::<Vec<_>>()),
            _ => f.clone(),
        }
    }

    fn ground_terms(&self, fs: &[LForm]) -> Vec<LTerm> {
        let mut out = BTreeSet::new();
        for f in fs {
            collect_form(f, &mut Vec::new(), &mut out);
        }
        for s in &self.skolems {
            out.insert(LTerm::Sym(s.clone()));
        }
        out.into_iter().collect()
    }

    fn instantiate(&mut self, f: &LForm, terms: &[LTerm], done: &mut HashSet<(LForm, LTerm)>, changed: &mut bool) -> LForm {
        match f {
            LForm::Forall(k, lo, hi, body) => {
                let mut parts = vec![f.clone()];
                let mut n = 0;
                for t in terms {
                    if n >= self.limits.instances {
                        break;
                    }
                    if !done.insert((f.clone(), t.clone())) {
                        continue;
                    }
                    n += 1;
                    *changed = true;
                    parts.push(LForm::or([
                        LForm::Cmp(Cmp::Lt, t.clone(), lo.clone()),
                        LForm::Cmp(Cmp::Ge, t.clone(), hi.clone()),
                        body.subst(k, t),
                    ]));
                }
                LForm::and(parts)
            }
            LForm::And(xs) => {
                let v: Vec<LForm> = xs.iter().map(|x| self.instantiate(x, terms, done, changed)).collect();
                LForm::and(v)
            }
            LForm::Or(xs) => {
                let v: Vec<LForm> = xs.iter().map(|x| self.instantiate(x, terms, done, changed)).collect();
                LForm::or(v)
            }
            _ => f.clone(),
        }
    }

    // ----- if-then-else lifting

    fn lift(&mut self, f: &LForm) -> LForm {
        match f {
            LForm::And(xs) => LForm::and(xs.iter().map(|x| self.lift(x)).collect::<Vec<_>>()),
            LForm::Or(xs) => LForm::or(xs.iter().map(|x| self.lift(x)).collect::<Vec<_>>()),
            lit => match first_ite_form(lit) {
                None => lit.clone(),
                Some(c) => {
                    let yes = nnf(&self.simp(&replace_ite_form(lit, &c, true)), false);
                    let no = nnf(&self.simp(&replace_ite_form(lit, &c, false)), false);
                    let pc = nnf(&c, false);
                    let nc = nnf(&c, true);
                    let e = LForm::or([LForm::and([pc, yes]), LForm::and([nc, no])]);
                    self.lift(&e)
                }
            },
        }
    }
}

fn eq_terms(a: &LTerm, b: &LTerm) -> LForm {
    if a == b {
        return LForm::tt();
    }
    LForm::cmp(Cmp::Eq, a.clone(), b.clone())
}

fn select_store(a: &LArr, i: LTerm) -> LTerm {
    match a {
        LArr::Sym(_) => LTerm::select(a.clone(), i),
        LArr::Store(b, j, v) => {
            if i == **j {
                return (**v).clone();
            }
            match eq_terms(&i, j) {
                LForm::Bool(false) => select_store(b, i),
                c => LTerm::Ite(Box::new(c), v.clone(), Box::new(select_store(b, i))),
            }
        }
    }
}

pub(crate) fn nnf(f: &LForm, neg: bool) -> LForm {
    match f {
        LForm::Bool(b) => LForm::Bool(*b != neg),
        LForm::Cmp(c, a, b) => LForm::Cmp(if neg { c.negate() } else { *c }, a.clone(), b.clone()),
        LForm::Not(x) => nnf(x, !neg),
        LForm::And(xs) | LForm::Or(xs) => {
            let v: Vec<LForm> = xs.iter().map(|x| nnf(x, neg)).collect();
            if matches!(f, LForm::And(_)) != neg {
                LForm::and(v)
            } else {
                LForm::or(v)
            }
        }
        LForm::Implies(a, b) => nnf(&LForm::Or(vec![LForm::not((**a).clone()), (**b).clone()]), neg),
        LForm::Forall(k, lo, hi, b) | LForm::Exists(k, lo, hi, b) => {
            let body = Box::new(nnf(b, neg));
            if matches!(f, LForm::Forall(..)) != neg {
                LForm::Forall(k.clone(), lo.clone(), hi.clone(), body)
            } else {
                LForm::Exists(k.clone(), lo.clone(), hi.clone(), body)
            }
        }
        atom => {
            if neg {
                LForm::Not(Box::new(atom.clone()))
            } else {
                atom.clone()
            }
        }
    }
}

fn drop_foralls(f: &LForm) -> LForm {
    match f {
        LForm::Forall(..) => LForm::tt(),
        LForm::And(xs) => LForm::and(xs.iter().map(drop_foralls).collect::<Vec<_>>()),
        LForm::Or(xs) => LForm::or(xs.iter().map(drop_foralls).collect::<Vec<_>>()),
        _ => f.clone(),
    }
}

fn is_ground(t: &LTerm, bound: &[String]) -> bool {
    if bound.is_empty() {
        return true;
    }
    let mut s = BTreeSet::new();
    t.symbols(&mut s);
    !bound.iter().any(|b| s.contains(b))
}

fn collect_term(t: &LTerm, bound: &mut Vec<String>, out: &mut BTreeSet<LTerm>) {
    match t {
        LTerm::Int(_) | LTerm::Sym(_) => {}
        LTerm::Len(a) => collect_arr(a, bound, out),
        LTerm::Select(a, i) => {
            collect_arr(a, bound, out);
            if is_ground(i, bound) {
                out.insert((**i).clone());
            }
            collect_term(i, bound, out);
        }
        LTerm::Neg(a) => collect_term(a, bound, out),
        LTerm::Add(a, b) | LTerm::Sub(a, b) | LTerm::Mul(a, b) | LTerm::Div(a, b) | LTerm::Mod(a, b) => {
            collect_term(a, bound, out);
            collect_term(b, bound, out);
        }
        LTerm::Ite(c, a, b) => {
            collect_form(c, bound, out);
            collect_term(a, bound, out);
            collect_term(b, bound, out);
        }
    }
}

fn collect_arr(a: &LArr, bound: &mut Vec<String>, out: &mut BTreeSet<LTerm>) {
    if let LArr::Store(b, i, v) = a {
        collect_arr(b, bound, out);
        collect_term(i, bound, out);
        collect_term(v, bound, out);
    }
}

fn collect_form(f: &LForm, bound: &mut Vec<String>, out: &mut BTreeSet<LTerm>) {
    match f {
        LForm::Bool(_) | LForm::BoolSym(_) => {}
        LForm::Cmp(_, a, b) => {
            collect_term(a, bound, out);
            collect_term(b, bound, out);
        }
        LForm::Not(x) => collect_form(x, bound, out),
        LForm::And(xs) | LForm::Or(xs) => xs.iter().for_each(|x| collect_form(x, bound, out)),
        LForm::Implies(a, b) => {
            collect_form(a, bound, out);
            collect_form(b, bound, out);
        }
        LForm::Forall(k, lo, hi, b) | LForm::Exists(k, lo, hi, b) => {
            if is_ground(lo, bound) {
                out.insert(lo.clone());
            }
            if is_ground(hi, bound) {
                out.insert(LTerm::sub(hi.clone(), int(1)));
            }
            bound.push(k.clone());
            collect_form(b, bound, out);
            bound.pop();
        }
        LForm::Valid(a, x, y) | LForm::InitRange(a, x, y) => {
            collect_arr(a, bound, out);
            collect_term(x, bound, out);
            collect_term(y, bound, out);
        }
        LForm::InitCell(a, i) => {
            collect_arr(a, bound, out);
            if is_ground(i, bound) {
                out.insert(i.clone());
            }
            collect_term(i, bound, out);
        }
        LForm::ArrEq(a, b) => {
            collect_arr(a, bound, out);
            collect_arr(b, bound, out);
        }
    }
}

fn first_ite_term(t: &LTerm) -> Option<LForm> {
    match t {
        LTerm::Ite(c, _, _) => Some((**c).clone()),
        LTerm::Int(_) | LTerm::Sym(_) => None,
        LTerm::Len(_) => None,
        LTerm::Select(_, i) => first_ite_term(i),
        LTerm::Neg(a) => first_ite_term(a),
        LTerm::Add(a, b) | LTerm::Sub(a, b) | LTerm::Mul(a, b) | LTerm::Div(a, b) | LTerm::Mod(a, b) => {
            first_ite_term(a).or_else(|| first_ite_term(b))
        }
    }
}

fn first_ite_form(f: &LForm) -> Option<LForm> {
    match f {
        LForm::Cmp(_, a, b) => first_ite_term(a).or_else(|| first_ite_term(b)),
        LForm::Not(x) => first_ite_form(x),
        LForm::InitCell(_, i) => first_ite_term(i),
        _ => None,
    }
}

fn replace_ite_term(t: &LTerm, c: &LForm, v: bool) -> LTerm {
    let r = |x: &LTerm| Box::new(replace_ite_term(x, c, v));
    match t {
        LTerm::Ite(cc, a, b) if **cc == *c => replace_ite_term(if v { a } else { b }, c, v),
        LTerm::Ite(cc, a, b) => LTerm::Ite(cc.clone(), r(a), r(b)),
        LTerm::Int(_) | LTerm::Sym(_) | LTerm::Len(_) => t.clone(),
        LTerm::Select(a, i) => LTerm::Select(a.clone(), r(i)),
        LTerm::Neg(a) => LTerm::Neg(r(a)),
        LTerm::Add(a, b) => LTerm::Add(r(a), r(b)),
        LTerm::Sub(a, b) => LTerm::Sub(r(a), r(b)),
        LTerm::Mul(a, b) => LTerm::Mul(r(a), r(b)),
        LTerm::Div(a, b) => LTerm::Div(r(a), r(b)),
        LTerm::Mod(a, b) => LTerm::Mod(r(a), r(b)),
    }
}

fn replace_ite_form(f: &LForm, c: &LForm, v: bool) -> LForm {
    match f {
        LForm::Cmp(k, a, b) => LForm::Cmp(*k, replace_ite_term(a, c, v), replace_ite_term(b, c, v)),
        LForm::Not(x) => LForm::Not(Box::new(replace_ite_form(x, c, v))),
        LForm::InitCell(a, i) => LForm::InitCell(a.clone(), replace_ite_term(i, c, v)),
        f => f.clone(),
    }
}

// ---------------------------------------------------------------------
// Purified propositional skeleton

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
struct Lin {
    co: BTreeMap<usize, i128>,
    c: i128,
}

impl Lin {
    fn konst(c: i128) -> Lin {
        Lin { co: BTreeMap::new(), c }
    }

    fn var(v: usize) -> Lin {
        Lin { co: BTreeMap::from([(v, 1)]), c: 0 }
    }

    fn as_const(&self) -> Option<i128> {
        self.co.is_empty().then_some(self.c)
    }

    fn scale(&self, k: i128) -> Option<Lin> {
        let mut co = BTreeMap::new();
        for (v, a) in &self.co {
            let x = a.checked_mul(k)?;
            if x != 0 {
                co.insert(*v, x);
            }
        }
        Some(Lin { co, c: self.c.checked_mul(k)? })
    }

    fn add(&self, o: &Lin) -> Option<Lin> {
        let mut co = self.co.clone();
        for (v, a) in &o.co {
            let e = co.entry(*v).or_insert(0);
            *e = e.checked_add(*a)?;
            if *e == 0 {
                co.remove(v);
            }
        }
        Some(Lin { co, c: self.c.checked_add(o.c)? })
    }

    fn sub(&self, o: &Lin) -> Option<Lin> {
        self.add(&o.scale(-1)?)
    }

    /// Divides by the coefficient gcd, rounding the constant for integers.
    fn normalize(mut self) -> Lin {
        let g = self.co.values().fold(0i128, |g, a| gcd(g, a.abs()));
        if g > 1 {
            for a in self.co.values_mut() {
                *a /= g;
            }
            self.c = self.c.div_euclid(g) + i128::from(self.c.rem_euclid(g) != 0);
        }
        self
    }
}

fn gcd(a: i128, b: i128) -> i128 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

#[derive(Debug, Clone, PartialEq)]
enum PF {
    T,
    F,
    L(i32),
    And(Vec<PF>),
    Or(Vec<PF>),
}

fn pf_and(xs: Vec<PF>) -> PF {
    let mut out = Vec::new();
    for x in xs {
        match x {
            PF::T => {}
            PF::F => return PF::F,
            PF::And(ys) => out.extend(ys),
            x => out.push(x),
        }
    }
    match out.len() {
        0 => PF::T,
        1 => out.pop().expect("one"),
        _ => PF::And(out),
    }
}

fn pf_or(xs: Vec<PF>) -> PF {
    let mut out = Vec::new();
    for x in xs {
        match x {
            PF::F => {}
            PF::T => return PF::T,
            PF::Or(ys) => out.extend(ys),
            x => out.push(x),
        }
    }
    match out.len() {
        0 => PF::F,
        1 => out.pop().expect("one"),
        _ => PF::Or(out),
    }
}

fn pf_not(p: &PF) -> PF {
    match p {
        PF::T => PF::F,
        PF::F => PF::T,
        PF::L(l) => PF::L(-l),
        PF::And(xs) => pf_or(xs.iter().map(pf_not).collect()),
        PF::Or(xs) => pf_and(xs.iter().map(pf_not).collect()),
    }
}

#[derive(Debug, Clone)]
enum Atom {
    /// `e <= 0`.
    Lin(Lin),
    Prop,
}

struct Uf {
    name: String,
    args: Vec<Lin>,
    /// Result variable, or the propositional atom for predicates.
    res: usize,
}

struct Theory<'s> {
    sorts: &'s HashMap<String, Sort>,
    vars: HashMap<String, usize>,
    nvars: usize,
    atoms: Vec<Atom>,
    lin_ix: HashMap<Lin, i32>,
    prop_ix: HashMap<String, i32>,
    ufs: Vec<Uf>,
    divs: HashMap<(Lin, i128), usize>,
    side: Vec<PF>,
    overflow: bool,
}

impl<'s> Theory<'s> {
    fn new(sorts: &'s HashMap<String, Sort>) -> Self {
        Theory {
            sorts,
            vars: HashMap::new(),
            nvars: 0,
            atoms: Vec::new(),
            lin_ix: HashMap::new(),
            prop_ix: HashMap::new(),
            ufs: Vec::new(),
            divs: HashMap::new(),
            side: Vec::new(),
            overflow: false,
        }
    }

    fn new_var(&mut self) -> usize {
        self.nvars += 1;
        self.nvars - 1
    }

    fn range(&mut self, v: usize, lo: i128, hi: i128) {
        let x = Lin::var(v);
        let a = self.le0(Lin { co: x.co.clone(), c: -hi });
        let b = self.le0(Lin { co: x.scale(-1).expect("unit").co, c: lo });
        self.side.push(a);
        self.side.push(b);
    }

    fn named_var(&mut self, name: &str) -> usize {
        if let Some(v) = self.vars.get(name) {
            return *v;
        }
        let v = self.new_var();
        self.vars.insert(name.to_string(), v);
        if self.sorts.get(name) == Some(&Sort::Int32) {
            self.range(v, INT_MIN, INT_MAX);
        }
        v
    }

    fn le0(&mut self, e: Lin) -> PF {
        let e = e.normalize();
        if let Some(c) = e.as_const() {
            return if c <= 0 { PF::T } else { PF::F };
        }
        if let Some(id) = self.lin_ix.get(&e) {
            return PF::L(*id);
        }
        let neg = match e.scale(-1).and_then(|n| n.add(&Lin::konst(1))) {
            Some(n) => n.normalize(),
            None => {
                self.overflow = true;
                return PF::T;
            }
        };
        if let Some(id) = self.lin_ix.get(&neg) {
            return PF::L(-*id);
        }
        self.atoms.push(Atom::Lin(e.clone()));
        let id = self.atoms.len() as i32;
        self.lin_ix.insert(e, id);
        PF::L(id)
    }

    fn prop(&mut self, key: String) -> i32 {
        if let Some(id) = self.prop_ix.get(&key) {
            return *id;
        }
        self.atoms.push(Atom::Prop);
        let id = self.atoms.len() as i32;
        self.prop_ix.insert(key, id);
        id
    }

    fn eq(&mut self, a: &Lin, b: &Lin) -> PF {
        match (a.sub(b), b.sub(a)) {
            (Some(x), Some(y)) => {
                let (p, q) = (self.le0(x), self.le0(y));
                pf_and(vec![p, q])
            }
            _ => {
                self.overflow = true;
                PF::T
            }
        }
    }

    fn args_differ(&mut self, xs: &[Lin], ys: &[Lin]) -> PF {
        let eqs: Vec<PF> = xs.iter().zip(ys).map(|(x, y)| self.eq(x, y)).collect();
        pf_not(&pf_and(eqs))
    }

    fn uf(&mut self, name: &str, args: Vec<Lin>, boolean: bool) -> usize {
        if let Some(u) = self.ufs.iter().find(|u| u.name == name && u.args == args) {
            return u.res;
        }
        let res = if boolean { self.prop(format!("{name}#{}", self.ufs.len())) as usize } else { self.new_var() };
        let others: Vec<(Vec<Lin>, usize)> =
            self.ufs.iter().filter(|u| u.name == name).map(|u| (u.args.clone(), u.res)).collect();
        for (oargs, ores) in others {
            let differ = self.args_differ(&args, &oargs);
            let same = if boolean {
                let (p, q) = (res as i32, ores as i32);
                pf_and(vec![pf_or(vec![PF::L(-p), PF::L(q)]), pf_or(vec![PF::L(p), PF::L(-q)])])
            } else {
                self.eq(&Lin::var(res), &Lin::var(ores))
            };
            self.side.push(pf_or(vec![differ, same]));
        }
        self.ufs.push(Uf { name: name.to_string(), args, res });
        res
    }

    /// Quotient variable of truncating division by a nonzero constant.
    fn div_const(&mut self, a: &Lin, c: i128) -> Option<(Lin, Lin)> {
        let q = match self.divs.get(&(a.clone(), c)) {
            Some(q) => *q,
            None => {
                let q = self.new_var();
                self.divs.insert((a.clone(), c), q);
                let r = a.sub(&Lin::var(q).scale(c)?)?;
                let m = c.abs() - 1;
                let a_neg = self.le0(a.add(&Lin::konst(1))?);
                let a_nonneg = pf_not(&a_neg);
                let r_ge0 = self.le0(r.scale(-1)?);
                let r_le_m = self.le0(r.sub(&Lin::konst(m))?);
                let r_le0 = self.le0(r.clone());
                let r_ge_negm = self.le0(r.scale(-1)?.sub(&Lin::konst(m))?);
                self.side.push(pf_or(vec![a_neg.clone(), pf_and(vec![r_ge0, r_le_m])]));
                self.side.push(pf_or(vec![a_nonneg, pf_and(vec![r_le0, r_ge_negm])]));
                q
            }
        };
        let r = a.sub(&Lin::var(q).scale(c)?)?;
        Some((Lin::var(q), r))
    }

    fn lin(&mut self, t: &LTerm) -> Lin {
        match self.lin_opt(t) {
            Some(l) => l,
            None => {
                self.overflow = true;
                Lin::konst(0)
            }
        }
    }

    fn lin_opt(&mut self, t: &LTerm) -> Option<Lin> {
        Some(match t {
            LTerm::Int(n) => Lin::konst(*n),
            LTerm::Sym(s) => Lin::var(self.named_var(s)),
            LTerm::Len(a) => {
                let key = format!("{}.len", a.base());
                if let Some(v) = self.vars.get(&key) {
                    return Some(Lin::var(*v));
                }
                let v = self.named_var(&key);
                self.range(v, 0, INT_MAX);
                Lin::var(v)
            }
            LTerm::Select(a, i) => {
                let i = self.lin_opt(i)?;
                let fresh = !self.ufs.iter().any(|u| u.name == format!("sel:{}", a.base()) && u.args == [i.clone()]);
                let v = self.uf(&format!("sel:{}", a.base()), vec![i], false);
                if fresh {
                    self.range(v, INT_MIN, INT_MAX);
                }
                Lin::var(v)
            }
            LTerm::Neg(a) => self.lin_opt(a)?.scale(-1)?,
            LTerm::Add(a, b) => {
                let a = self.lin_opt(a)?;
                a.add(&self.lin_opt(b)?)?
            }
            LTerm::Sub(a, b) => {
                let a = self.lin_opt(a)?;
                a.sub(&self.lin_opt(b)?)?
            }
            LTerm::Mul(a, b) => {
                let (a, b) = (self.lin_opt(a)?, self.lin_opt(b)?);
                match (a.as_const(), b.as_const()) {
                    (Some(k), _) => b.scale(k)?,
                    (_, Some(k)) => a.scale(k)?,
                    _ => Lin::var(self.uf("mul", vec![a, b], false)),
                }
            }
            LTerm::Div(a, b) | LTerm::Mod(a, b) => {
                let is_div = matches!(t, LTerm::Div(..));
                let (a, b) = (self.lin_opt(a)?, self.lin_opt(b)?);
                match b.as_const() {
                    Some(c) if c != 0 => {
                        let (q, r) = self.div_const(&a, c)?;
                        if is_div {
                            q
                        } else {
                            r
                        }
                    }
                    _ => Lin::var(self.uf(if is_div { "div" } else { "mod" }, vec![a, b], false)),
                }
            }
            // Lifted before purification; an uninterpreted value is sound.
            LTerm::Ite(..) => Lin::var(self.new_var()),
        })
    }

    fn form(&mut self, f: &LForm) -> PF {
        match f {
            LForm::Bool(true) => PF::T,
            LForm::Bool(false) => PF::F,
            LForm::BoolSym(s) => PF::L(self.prop(format!("b:{s}"))),
            LForm::Cmp(c, a, b) => {
                let (a, b) = (self.lin(a), self.lin(b));
                let (Some(d), Some(e)) = (a.sub(&b), b.sub(&a)) else {
                    self.overflow = true;
                    return PF::T;
                };
                let one = Lin::konst(1);
                match c {
                    Cmp::Le => self.le0(d),
                    Cmp::Ge => self.le0(e),
                    Cmp::Lt => match d.add(&one) {
                        Some(x) => self.le0(x),
                        None => PF::T,
                    },
                    Cmp::Gt => match e.add(&one) {
                        Some(x) => self.le0(x),
                        None => PF::T,
                    },
                    Cmp::Eq => self.eq(&a, &b),
                    Cmp::Ne => {
                        let p = self.eq(&a, &b);
                        pf_not(&p)
                    }
                }
            }
            LForm::Not(x) => {
                let p = self.form(x);
                pf_not(&p)
            }
            LForm::And(xs) => {
                let v = xs.iter().map(|x| self.form(x)).collect();
                pf_and(v)
            }
            LForm::Or(xs) => {
                let v = xs.iter().map(|x| self.form(x)).collect();
                pf_or(v)
            }
            LForm::InitCell(a, i) => {
                let i = self.lin(i);
                PF::L(self.uf(&format!("init:{}", a.base()), vec![i], true) as i32)
            }
            LForm::ArrEq(a, b) => PF::L(self.prop(format!("eq:{a}={b}"))),
            // Positive quantifiers left over are weakened away.
            LForm::Forall(..) | LForm::Exists(..) => PF::T,
            LForm::Implies(a, b) => {
                
                self.form(&LForm::Or(vec![LForm::not((**a).clone()), (**b).clone()]))
            }
            // Eliminated by simplification.
            LForm::Valid(..) | LForm::InitRange(..) => PF::T,
        }
    }
}

// ---------------------------------------------------------------------
// DPLL with a Fourier–Motzkin consistency check

struct Sat {
    clauses: Vec<Vec<i32>>,
    nvars: usize,
    decisions: usize,
    limits: Limits,
    empty: bool,
    cache: HashMap<Vec<i32>, bool>,
}

impl Sat {
    fn new(th: &Theory, limits: Limits) -> Self {
        Sat { clauses: Vec::new(), nvars: th.atoms.len(), decisions: 0, limits, empty: false, cache: HashMap::new() }
    }

    fn aux(&mut self) -> i32 {
        self.nvars += 1;
        self.nvars as i32
    }

    /// Literal implying `p` (Plaisted–Greenbaum; `p` is negation-free above literals).
    fn lit(&mut self, p: &PF) -> Option<i32> {
        match p {
            PF::T => None,
            PF::F => {
                let a = self.aux();
                self.clauses.push(vec![-a]);
                Some(a)
            }
            PF::L(l) => Some(*l),
            PF::And(xs) => {
                let a = self.aux();
                for x in xs {
                    if let Some(l) = self.lit(x) { self.clauses.push(vec![-a, l]) }
                }
                Some(a)
            }
            PF::Or(xs) => {
                let a = self.aux();
                let mut c = vec![-a];
                for x in xs {
                    {
                        let l = self.lit(x)?;
                        c.push(l)
                    }
                }
                self.clauses.push(c);
                Some(a)
            }
        }
    }

    fn assert(&mut self, p: &PF) {
        match p {
            PF::T => {}
            PF::F => self.empty = true,
            PF::L(l) => self.clauses.push(vec![*l]),
            PF::And(xs) => xs.iter().for_each(|x| self.assert(x)),
            PF::Or(xs) => {
                let mut c = Vec::new();
                for x in xs {
                    match self.lit(x) {
                        Some(l) => c.push(l),
                        None => return,
                    }
                }
                self.clauses.push(c);
            }
        }
    }

    fn refuted(&mut self, th: &Theory) -> bool {
        if self.empty {
            return true;
        }
        let assign = vec![0i8; self.nvars + 1];
        self.search(assign, th) == Some(false)
    }

    fn value(assign: &[i8], l: i32) -> i8 {
        let v = assign[l.unsigned_abs() as usize];
        if l > 0 {
            v
        } else {
            -v
        }
    }

    fn propagate(&self, assign: &mut [i8]) -> bool {
        loop {
            let mut changed = false;
            for c in &self.clauses {
                let mut unassigned = None;
                let mut count = 0;
                let mut sat = false;
                for &l in c {
                    match Self::value(assign, l) {
                        1 => {
                            sat = true;
                            break;
                        }
                        0 => {
                            count += 1;
                            unassigned = Some(l);
                        }
                        _ => {}
                    }
                }
                if sat {
                    continue;
                }
                match (count, unassigned) {
                    (0, _) => return false,
                    (1, Some(l)) => {
                        assign[l.unsigned_abs() as usize] = if l > 0 { 1 } else { -1 };
                        changed = true;
                    }
                    _ => {}
                }
            }
            if !changed {
                return true;
            }
        }
    }

    fn consistent(&mut self, assign: &[i8], th: &Theory) -> bool {
        let lits: Vec<i32> = (1..=th.atoms.len())
            .filter(|&i| matches!(th.atoms[i - 1], Atom::Lin(_)) && assign[i] != 0)
            .map(|i| i as i32 * assign[i] as i32)
            .collect();
        if let Some(r) = self.cache.get(&lits) {
            return *r;
        }
        let cons: Vec<Lin> = lits
            .iter()
            .filter_map(|&l| {
                let Atom::Lin(e) = &th.atoms[l.unsigned_abs() as usize - 1] else { return None };
                if l > 0 {
                    Some(e.clone())
                } else {
                    e.scale(-1).and_then(|n| n.add(&Lin::konst(1)))
                }
            })
            .collect();
        let r = fm_feasible(cons, self.limits.fm_constraints);
        self.cache.insert(lits, r);
        r
    }

    /// `Some(true)` satisfiable, `Some(false)` refuted, `None` out of budget.
    fn search(&mut self, mut assign: Vec<i8>, th: &Theory) -> Option<bool> {
        if !self.propagate(&mut assign) || !self.consistent(&assign, th) {
            return Some(false);
        }
        let open = self.clauses.iter().find(|c| !c.iter().any(|&l| Self::value(&assign, l) == 1));
        let Some(c) = open else { return Some(true) };
        let l = *c.iter().find(|&&l| Self::value(&assign, l) == 0).expect("propagation leaves two open literals");
        self.decisions += 1;
        if self.decisions > self.limits.decisions {
            return None;
        }
        for v in [l, -l] {
            let mut a = assign.clone();
            a[v.unsigned_abs() as usize] = if v > 0 { 1 } else { -1 };
            match self.search(a, th) {
                Some(false) => {}
                r => return r,
            }
        }
        Some(false)
    }
}

/// `false` only when the conjunction of `e <= 0` constraints has no integer
/// solution.
fn fm_feasible(cons: Vec<Lin>, max: usize) -> bool {
    let mut cs: BTreeMap<BTreeMap<usize, i128>, i128> = BTreeMap::new();
    let add = |cs: &mut BTreeMap<BTreeMap<usize, i128>, i128>, e: Lin| -> bool {
        let e = e.normalize();
        if e.co.is_empty() {
            return e.c <= 0;
        }
        let c = cs.entry(e.co).or_insert(e.c);
        *c = (*c).max(e.c);
        true
    };
    for e in cons {
        if !add(&mut cs, e) {
            return false;
        }
    }
    loop {
        // Opposite pairs: bounds clash or pin an equality.
        let mut eq: Option<Lin> = None;
        for (co, c) in &cs {
            let neg: BTreeMap<usize, i128> = co.iter().map(|(v, a)| (*v, -a)).collect();
            if let Some(c2) = cs.get(&neg) {
                match c.checked_add(*c2) {
                    Some(s) if s > 0 => return false,
                    Some(0) if eq.is_none() && co.values().any(|a| a.abs() == 1) => {
                        eq = Some(Lin { co: co.clone(), c: *c });
                    }
                    None => return true,
                    _ => {}
                }
            }
        }
        let Some(e) = eq else { break };
        let (&x, &s) = e.co.iter().find(|(_, a)| a.abs() == 1).expect("unit coefficient");
        let old: Vec<Lin> = std::mem::take(&mut cs).into_iter().map(|(co, c)| Lin { co, c }).collect();
        for l in old {
            let a = l.co.get(&x).copied().unwrap_or(0);
            let l = if a == 0 {
                l
            } else {
                match e.scale(a * s).and_then(|m| l.sub(&m)) {
                    Some(l) => l,
                    None => return true,
                }
            };
            if !add(&mut cs, l) {
                return false;
            }
        }
    }
    loop {
        let vars: BTreeSet<usize> = cs.keys().flat_map(|co| co.keys().copied()).collect();
        if vars.is_empty() {
            return true;
        }
        let count = |v: usize| {
            let pos = cs.keys().filter(|co| co.get(&v).is_some_and(|a| *a > 0)).count();
            let neg = cs.keys().filter(|co| co.get(&v).is_some_and(|a| *a < 0)).count();
            (pos * neg, pos, neg)
        };
        let x = *vars.iter().min_by_key(|v| count(**v).0).expect("nonempty");
        let all: Vec<Lin> = std::mem::take(&mut cs).into_iter().map(|(co, c)| Lin { co, c }).collect();
        let (with, without): (Vec<Lin>, Vec<Lin>) = all.into_iter().partition(|l| l.co.contains_key(&x));
        for l in without {
            if !add(&mut cs, l) {
                return false;
            }
        }
        let pos: Vec<&Lin> = with.iter().filter(|l| l.co[&x] > 0).collect();
        let neg: Vec<&Lin> = with.iter().filter(|l| l.co[&x] < 0).collect();
        for p in &pos {
            for n in &neg {
                let (a, b) = (p.co[&x], -n.co[&x]);
                let Some(comb) = p.scale(b).and_then(|pp| n.scale(a).and_then(|nn| pp.add(&nn))) else { return true };
                if !add(&mut cs, comb) {
                    return false;
                }
                if cs.len() > max {
                    return true;
                }
            }
        }
    }
}
