//! Interval abstract interpretation over the AST and RTE guard emission.

use super::interval::{ArithOp, CmpOp, Interval, MAX, MIN};
use crate::lang::{BinOp, Expr, Function, Location, ParamKind, Program, RteClass, Stmt, StmtKind, UnOp};
use crate::spec::{BinOpT, Cmp, Origin, Pred, PropKind, Property, Term};
use rayon::prelude::*;
use std::collections::BTreeMap;
use std::fmt;

/// Loop-head iterations joined before widening kicks in.
pub const WIDEN_AFTER: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitAbs {
    MaybeUninit,
    DefInit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ScalarAbs {
    pub itv: Interval,
    pub init: InitAbs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ArrayAbs {
    /// Join of every value stored (or passed in).
    pub elem: Interval,
    pub len: Interval,
    /// Cells `[0, init_upto)` are definitely initialized.
    pub init_upto: u64,
}

impl ArrayAbs {
    fn all_init(&self) -> bool {
        self.len.bounds().is_some_and(|(_, hi)| self.init_upto >= hi.max(0) as u64)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Env {
    pub scalars: BTreeMap<String, ScalarAbs>,
    pub arrays: BTreeMap<String, ArrayAbs>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AbsState {
    Bottom,
    Env(Env),
}

impl fmt::Display for AbsState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let AbsState::Env(e) = self else { return write!(f, "_|_") };
        let mut parts = Vec::new();
        for (n, s) in &e.scalars {
            let u = if s.init == InitAbs::DefInit { "" } else { "?" };
            parts.push(format!("{n}{u} in {}", s.itv));
        }
        for (n, a) in &e.arrays {
            parts.push(format!("{n}[len {}] init<{}", a.len, a.init_upto));
        }
        write!(f, "{{{}}}", parts.join(", "))
    }
}

impl AbsState {
    pub fn env(&self) -> Option<&Env> {
        match self {
            AbsState::Env(e) => Some(e),
            AbsState::Bottom => None,
        }
    }

    pub fn join(&self, other: &AbsState) -> AbsState {
        self.combine(other, Interval::join)
    }

    pub fn widen(&self, next: &AbsState) -> AbsState {
        self.combine(next, Interval::widen)
    }

    /// Pointwise combination; variables missing on one side are out of scope.
    fn combine(&self, other: &AbsState, f: impl Fn(Interval, Interval) -> Interval) -> AbsState {
        let (a, b) = match (self, other) {
            (AbsState::Bottom, x) | (x, AbsState::Bottom) => return x.clone(),
            (AbsState::Env(a), AbsState::Env(b)) => (a, b),
        };
        let mut out = Env::default();
        for (n, x) in &a.scalars {
            if let Some(y) = b.scalars.get(n) {
                let init = if x.init == InitAbs::DefInit && y.init == InitAbs::DefInit {
                    InitAbs::DefInit
                } else {
                    InitAbs::MaybeUninit
                };
                out.scalars.insert(n.clone(), ScalarAbs { itv: f(x.itv, y.itv), init });
            }
        }
        for (n, x) in &a.arrays {
            if let Some(y) = b.arrays.get(n) {
                out.arrays.insert(
                    n.clone(),
                    ArrayAbs { elem: f(x.elem, y.elem), len: f(x.len, y.len), init_upto: x.init_upto.min(y.init_upto) },
                );
            }
        }
        AbsState::Env(out)
    }
}

fn arith_op(op: BinOp) -> Option<ArithOp> {
    match op {
        BinOp::Add => Some(ArithOp::Add),
        BinOp::Sub => Some(ArithOp::Sub),
        BinOp::Mul => Some(ArithOp::Mul),
        _ => None,
    }
}

fn cmp_op(op: BinOp) -> Option<CmpOp> {
    Some(match op {
        BinOp::Lt => CmpOp::Lt,
        BinOp::Le => CmpOp::Le,
        BinOp::Gt => CmpOp::Gt,
        BinOp::Ge => CmpOp::Ge,
        BinOp::Eq => CmpOp::Eq,
        BinOp::Ne => CmpOp::Ne,
        _ => return None,
    })
}

/// Interval of the values an expression yields when its evaluation succeeds.
pub fn eval_expr(e: &Expr, env: &Env) -> Interval {
    match e {
        Expr::Int(n) => Interval::single(*n as i64),
        Expr::Var(v) => env.scalars.get(v).map_or(Interval::TOP, |s| s.itv),
        Expr::Index(a, i) => {
            if eval_expr(i, env).is_bottom() {
                return Interval::Bottom;
            }
            env.arrays.get(a).map_or(Interval::TOP, |x| x.elem)
        }
        Expr::Unary(UnOp::Neg, x) => eval_expr(x, env).neg(),
        Expr::Unary(UnOp::Not, _) => Interval::new(0, 1),
        Expr::Binary(op, l, r) => {
            let (a, b) = (eval_expr(l, env), eval_expr(r, env));
            if let Some(o) = arith_op(*op) {
                Interval::arith(o, a, b)
            } else if *op == BinOp::Div {
                a.div(b)
            } else if *op == BinOp::Mod {
                a.rem(b)
            } else if a.is_bottom() || b.is_bottom() {
                Interval::Bottom
            } else {
                Interval::new(0, 1)
            }
        }
    }
}

fn feasible(op: CmpOp, a: Interval, b: Interval) -> bool {
    let (Some((a0, a1)), Some((b0, b1))) = (a.bounds(), b.bounds()) else { return false };
    match op {
        CmpOp::Lt => a0 < b1,
        CmpOp::Le => a0 <= b1,
        CmpOp::Gt => a1 > b0,
        CmpOp::Ge => a1 >= b0,
        CmpOp::Eq => a0.max(b0) <= a1.min(b1),
        CmpOp::Ne => !(a0 == a1 && b0 == b1 && a0 == b0),
    }
}

fn narrow_var(env: &mut Env, e: &Expr, op: CmpOp, other: Interval) -> bool {
    let Expr::Var(x) = e else { return true };
    let Some(s) = env.scalars.get_mut(x) else { return true };
    let mut itv = s.itv.meet(Interval::constrain(op, other));
    if op == CmpOp::Ne {
        if let Some((c, d)) = other.bounds() {
            if c == d {
                itv = itv.exclude(c);
            }
        }
    }
    s.itv = itv;
    !itv.is_bottom()
}

/// Abstract states in which `cond` evaluates to `truth`.
pub fn refine(st: &AbsState, cond: &Expr, truth: bool) -> AbsState {
    let AbsState::Env(env) = st else { return AbsState::Bottom };
    match cond {
        Expr::Unary(UnOp::Not, x) => refine(st, x, !truth),
        Expr::Binary(BinOp::And, l, r) => {
            if truth {
                refine(&refine(st, l, true), r, true)
            } else {
                refine(st, l, false).join(&refine(&refine(st, l, true), r, false))
            }
        }
        Expr::Binary(BinOp::Or, l, r) => {
            if truth {
                refine(st, l, true).join(&refine(&refine(st, l, false), r, true))
            } else {
                refine(&refine(st, l, false), r, false)
            }
        }
        Expr::Binary(op, l, r) if op.is_cmp() => {
            let c = cmp_op(*op).expect("comparison");
            let c = if truth { c } else { c.negate() };
            refine_cmp(env, c, l, r)
        }
        e => {
            let c = if truth { CmpOp::Ne } else { CmpOp::Eq };
            refine_cmp(env, c, e, &Expr::Int(0))
        }
    }
}

fn refine_cmp(env: &Env, c: CmpOp, l: &Expr, r: &Expr) -> AbsState {
    let (a, b) = (eval_expr(l, env), eval_expr(r, env));
    if !feasible(c, a, b) {
        return AbsState::Bottom;
    }
    let mut out = env.clone();
    if !narrow_var(&mut out, l, c, b) {
        return AbsState::Bottom;
    }
    let a = eval_expr(l, &out);
    if !narrow_var(&mut out, r, c.flip(), a) {
        return AbsState::Bottom;
    }
    AbsState::Env(out)
}

/// Per-function analysis recording the abstract pre-state of every location.
struct Analyzer {
    pre: BTreeMap<Location, AbsState>,
}

impl Analyzer {
    fn record(&mut self, loc: &Location, st: &AbsState) {
        let e = self.pre.entry(loc.clone()).or_insert(AbsState::Bottom);
        *e = e.join(st);
    }

    fn block(&mut self, stmts: &[Stmt], mut st: AbsState) -> AbsState {
        for s in stmts {
            st = self.stmt(s, st);
        }
        st
    }

    fn stmt(&mut self, s: &Stmt, st: AbsState) -> AbsState {
        if st == AbsState::Bottom {
            return st;
        }
        self.record(&s.loc, &st);
        let AbsState::Env(mut env) = st.clone() else { unreachable!() };
        match &s.kind {
            StmtKind::Decl { name, init: None } => {
                env.scalars.insert(name.clone(), ScalarAbs { itv: Interval::TOP, init: InitAbs::MaybeUninit });
            }
            StmtKind::Decl { name, init: Some(e) } | StmtKind::Assign { name, value: e } => {
                let itv = eval_expr(e, &env);
                if itv.is_bottom() {
                    return AbsState::Bottom;
                }
                env.scalars.insert(name.clone(), ScalarAbs { itv, init: InitAbs::DefInit });
            }
            StmtKind::DeclArray { name, len } => {
                let a = ArrayAbs { elem: Interval::Bottom, len: Interval::single(*len as i64), init_upto: 0 };
                env.arrays.insert(name.clone(), a);
            }
            StmtKind::Store { array, index, value } => {
                let (i, v) = (eval_expr(index, &env), eval_expr(value, &env));
                if i.is_bottom() || v.is_bottom() {
                    return AbsState::Bottom;
                }
                if let Some(a) = env.arrays.get_mut(array) {
                    a.elem = a.elem.join(v);
                    if i.bounds().is_some_and(|(lo, hi)| lo == hi && lo as u64 == a.init_upto) {
                        a.init_upto = a.init_upto.saturating_add(1);
                    }
                }
            }
            StmtKind::Call { dest, args, .. } => {
                if args.iter().any(|a| eval_expr(a, &env).is_bottom()) {
                    return AbsState::Bottom;
                }
                if let Some(d) = dest {
                    env.scalars.insert(d.name.clone(), ScalarAbs { itv: Interval::TOP, init: InitAbs::DefInit });
                }
            }
            StmtKind::If { cond, then_branch, else_branch } => {
                let t = self.block(then_branch, refine(&st, cond, true));
                let f = self.block(else_branch, refine(&st, cond, false));
                return t.join(&f);
            }
            StmtKind::While { cond, body } => {
                let mut head = st.clone();
                let mut iter = 0;
                loop {
                    self.record(&s.loc, &head);
                    let out = self.block(body, refine(&head, cond, true));
                    let next = head.join(&st.join(&out));
                    let next = if iter >= WIDEN_AFTER { head.widen(&next) } else { next };
                    if next == head {
                        break;
                    }
                    head = next;
                    iter += 1;
                }
                return refine(&head, cond, false);
            }
            StmtKind::Return(_) => return AbsState::Bottom,
            StmtKind::Nop => {}
        }
        AbsState::Env(env)
    }
}

fn entry_state(f: &Function) -> AbsState {
    let mut env = Env::default();
    for p in &f.params {
        match p.kind {
            ParamKind::Int => {
                env.scalars.insert(p.name.clone(), ScalarAbs { itv: Interval::TOP, init: InitAbs::DefInit });
            }
            ParamKind::Array { .. } => {
                let a = ArrayAbs { elem: Interval::TOP, len: Interval::new(0, MAX), init_upto: u64::MAX };
                env.arrays.insert(p.name.clone(), a);
            }
        }
    }
    AbsState::Env(env)
}

fn analyze_function(f: &Function) -> BTreeMap<Location, AbsState> {
    let mut a = Analyzer { pre: BTreeMap::new() };
    let st = entry_state(f);
    a.record(&Location::Entry(f.name.clone()), &st);
    a.block(&f.body, st);
    a.pre
}

/// Abstract pre-state of every reachable location (absent means unreachable).
pub fn analyze_intervals(prog: &Program) -> BTreeMap<Location, AbsState> {
    let parts: Vec<_> = prog.functions.par_iter().map(analyze_function).collect();
    parts.into_iter().flatten().collect()
}

/// Guards collected per (location, class).
#[derive(Default)]
struct Guards {
    map: BTreeMap<(Location, RteClass), Vec<Pred>>,
    func: BTreeMap<Location, String>,
}

struct Emitter<'a> {
    out: &'a mut Guards,
    loc: &'a Location,
}

impl Emitter<'_> {
    fn push(&mut self, class: RteClass, ctx: &[Pred], guard: Pred) {
        let g = if ctx.is_empty() { guard } else { Pred::implies(Pred::conj(ctx.iter().cloned()), guard) };
        let v = self.out.map.entry((self.loc.clone(), class)).or_default();
        if !v.contains(&g) {
            v.push(g);
        }
    }

    fn int_ops(&mut self, e: &Expr, env: &Env, ctx: &[Pred]) {
        match e {
            Expr::Int(_) => {}
            Expr::Var(x) => {
                if env.scalars.get(x).is_some_and(|s| s.init != InitAbs::DefInit) {
                    self.push(RteClass::UninitializedRead, ctx, Pred::Init(x.clone()));
                }
            }
            Expr::Index(a, i) => {
                self.int_ops(i, env, ctx);
                let idx = eval_expr(i, env);
                let (Some((lo, hi)), Some(arr)) = (idx.bounds(), env.arrays.get(a)) else { return };
                let t = Term::from_expr(i);
                let (len_lo, len_hi) = arr.len.bounds().unwrap_or((0, 0));
                if lo < 0 || hi >= len_lo {
                    self.push(RteClass::IndexOutOfBounds, ctx, Pred::ValidRead(a.clone(), t.clone(), t.clone()));
                }
                // Only in-bounds cells are read; out-of-bounds ones fault first.
                let top = hi.min(len_hi - 1);
                if top >= 0 && (top as u64) >= arr.init_upto {
                    self.push(RteClass::UninitializedRead, ctx, Pred::Initialized(a.clone(), t.clone(), t));
                }
            }
            Expr::Unary(UnOp::Neg, x) => {
                self.int_ops(x, env, ctx);
                if eval_expr(x, env).contains(MIN) {
                    self.push(RteClass::SignedOverflow, ctx, Pred::cmp(Cmp::Lt, Term::Int(MIN), Term::from_expr(x)));
                }
            }
            Expr::Unary(UnOp::Not, x) => self.cond_ops(x, env, ctx),
            Expr::Binary(op, l, r) if op.is_arith() => {
                self.int_ops(l, env, ctx);
                self.int_ops(r, env, ctx);
                let (a, b) = (eval_expr(l, env), eval_expr(r, env));
                if a.is_bottom() || b.is_bottom() {
                    return;
                }
                let (tl, tr) = (Term::from_expr(l), Term::from_expr(r));
                if let Some(o) = arith_op(*op) {
                    let (lo, hi) = Interval::exact(o, a, b).expect("non-empty operands");
                    let t = Term::bin(BinOpT::from_binop(*op).expect("arith"), tl, tr);
                    if lo < MIN as i128 {
                        self.push(RteClass::SignedOverflow, ctx, Pred::cmp(Cmp::Le, Term::Int(MIN), t.clone()));
                    }
                    if hi > MAX as i128 {
                        self.push(RteClass::SignedOverflow, ctx, Pred::cmp(Cmp::Le, t, Term::Int(MAX)));
                    }
                } else {
                    if b.contains(0) {
                        self.push(RteClass::DivByZero, ctx, Pred::cmp(Cmp::Ne, tr.clone(), Term::Int(0)));
                    }
                    if a.contains(MIN) && b.contains(-1) {
                        let g = Pred::Or(vec![
                            Pred::cmp(Cmp::Ne, tl, Term::Int(MIN)),
                            Pred::cmp(Cmp::Ne, tr, Term::Int(-1)),
                        ]);
                        self.push(RteClass::SignedOverflow, ctx, g);
                    }
                }
            }
            Expr::Binary(..) => self.cond_ops(e, env, ctx),
        }
    }

    /// Conditions evaluate left to right with short-circuiting, so guards
    /// on a right operand assume the left one took the continuing branch.
    fn cond_ops(&mut self, e: &Expr, env: &Env, ctx: &[Pred]) {
        match e {
            Expr::Unary(UnOp::Not, x) => self.cond_ops(x, env, ctx),
            Expr::Binary(op @ (BinOp::And | BinOp::Or), l, r) => {
                self.cond_ops(l, env, ctx);
                let cont = *op == BinOp::And;
                let AbsState::Env(env2) = refine(&AbsState::Env(env.clone()), l, cont) else { return };
                let lp = Pred::from_cond(l);
                let mut ctx2 = ctx.to_vec();
                ctx2.push(if cont { lp } else { Pred::not(lp) });
                self.cond_ops(r, &env2, &ctx2);
            }
            Expr::Binary(op, l, r) if op.is_cmp() => {
                self.int_ops(l, env, ctx);
                self.int_ops(r, env, ctx);
            }
            e => self.int_ops(e, env, ctx),
        }
    }

    fn stmt(&mut self, s: &Stmt, f: &Function, env: &Env) {
        match &s.kind {
            StmtKind::Decl { init: Some(e), .. } | StmtKind::Assign { value: e, .. } | StmtKind::Return(Some(e)) => {
                self.int_ops(e, env, &[])
            }
            StmtKind::Store { array, index, value } => {
                self.int_ops(index, env, &[]);
                self.int_ops(value, env, &[]);
                let (Some((lo, hi)), Some(arr)) = (eval_expr(index, env).bounds(), env.arrays.get(array)) else {
                    return;
                };
                if lo < 0 || hi >= arr.len.bounds().map_or(0, |b| b.0) {
                    let t = Term::from_expr(index);
                    self.push(RteClass::IndexOutOfBounds, &[], Pred::ValidWrite(array.clone(), t.clone(), t));
                }
            }
            StmtKind::Call { args, .. } => {
                for a in args {
                    match a {
                        Expr::Var(v) if env.arrays.contains_key(v) => {
                            let arr = &env.arrays[v];
                            if !arr.all_init() {
                                let n = arr.len.bounds().map_or(0, |b| b.1);
                                let g = Pred::Initialized(v.clone(), Term::Int(0), Term::Int(n - 1));
                                self.push(RteClass::UninitializedRead, &[], g);
                            }
                        }
                        a => self.int_ops(a, env, &[]),
                    }
                }
            }
            StmtKind::If { cond, .. } | StmtKind::While { cond, .. } => self.cond_ops(cond, env, &[]),
            _ => {}
        }
        if self.out.map.keys().any(|(l, _)| l == self.loc) {
            self.out.func.insert(self.loc.clone(), f.name.clone());
        }
    }
}

/// RTE assertions for every risky operation the interval analysis cannot
/// prove safe, merged per (location, class) and numbered in source order.
pub fn infer_rte_assertions(prog: &Program) -> Vec<Property> {
    let pre = analyze_intervals(prog);
    let mut guards = Guards::default();
    for f in &prog.functions {
        f.walk(&mut |s| {
            if let Some(AbsState::Env(env)) = pre.get(&s.loc) {
                Emitter { out: &mut guards, loc: &s.loc }.stmt(s, f, env);
            }
        });
    }
    let mut keys: Vec<_> = guards.map.keys().cloned().collect();
    keys.sort_by_key(|(l, c)| (l.file_line(), l.index(), *c));
    keys.into_iter()
        .enumerate()
        .map(|(n, key)| {
            let func = guards.func[&key.0].clone();
            let pred = Pred::conj(guards.map[&key].clone());
            Property::new(format!("a{}", n + 1), PropKind::RteAssertion(key.1), key.0, pred, Origin::Analyzer, &func)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::parse_program;

    fn rte(src: &str) -> Vec<String> {
        let p = parse_program(src).unwrap();
        infer_rte_assertions(&p).iter().map(|a| format!("{} @{}", a.predicate, a.at)).collect()
    }

    #[test]
    fn constant_divisor_is_safe() {
        assert!(rte("int f() {\n  return 1 / 2;\n}\n").is_empty());
    }

    #[test]
    fn negation_of_parameter() {
        let src = "int abs(int x) {\n  if (x < 0) {\n    return -x;\n  }\n  return x;\n}\n";
        assert_eq!(rte(src), vec!["INT_MIN < x @3:0"]);
    }

    #[test]
    fn refined_increment_is_safe() {
        let src = "int f(int n) {\n  int i = 0;\n  while (i < n) {\n    i = i + 1;\n  }\n  return i;\n}\n";
        assert!(rte(src).is_empty());
    }

    #[test]
    fn local_array_prefix_init() {
        let src = "int f() {\n  int a[2];\n  a[0] = 1;\n  int x = a[0];\n  int y = a[1];\n  return x;\n}\n";
        assert_eq!(rte(src), vec!["\\initialized(a, 1, 1) @5:0"]);
    }

    #[test]
    fn short_circuit_context() {
        let src = "int f(int a[], int n, int i) {\n  if (0 <= i && a[i] > 0) {\n    return 1;\n  }\n  return 0;\n}\n";
        assert_eq!(rte(src), vec!["0 <= i ==> \\valid_read(a, i, i) @2:0"]);
    }

    #[test]
    fn widening_terminates() {
        let src = "int f() {\n  int i = 0;\n  int s = 0;\n  while (i < 1000) {\n    s = s + i;\n    i = i + 1;\n  }\n  return s;\n}\n";
        let out = rte(src);
        assert_eq!(out, vec!["s + i <= INT_MAX @5:0"]);
    }
}
