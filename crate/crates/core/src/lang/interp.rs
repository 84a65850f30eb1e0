//! Concrete small-step semantics with runtime-error detection, and the
//! bounded trace enumerator used as ground truth.

use super::ast::*;
use super::{LangError, Program};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RteClass {
    DivByZero,
    SignedOverflow,
    IndexOutOfBounds,
    UninitializedRead,
}

impl RteClass {
    pub const ALL: [RteClass; 4] =
        [RteClass::DivByZero, RteClass::SignedOverflow, RteClass::IndexOutOfBounds, RteClass::UninitializedRead];
}

impl fmt::Display for RteClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            RteClass::DivByZero => "division by zero",
            RteClass::SignedOverflow => "signed overflow",
            RteClass::IndexOutOfBounds => "index out of bounds",
            RteClass::UninitializedRead => "uninitialized read",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Value {
    Uninit,
    Int(i32),
}

impl Value {
    pub fn get(self) -> Option<i32> {
        match self {
            Value::Int(v) => Some(v),
            Value::Uninit => None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct State {
    pub scalars: BTreeMap<String, Value>,
    pub arrays: BTreeMap<String, Vec<Value>>,
}

impl State {
    pub fn scalar(&self, name: &str) -> Option<Value> {
        self.scalars.get(name).copied()
    }

    pub fn array(&self, name: &str) -> Option<&[Value]> {
        self.arrays.get(name).map(|v| v.as_slice())
    }

    pub fn set(&mut self, name: &str, v: Value) {
        self.scalars.insert(name.to_string(), v);
    }
}

/// Input value for an entry parameter.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum InputValue {
    Int(i32),
    Array(Vec<i32>),
}

/// Per-parameter finite value sets for the entry function.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct InputDomain {
    pub values: BTreeMap<String, Vec<InputValue>>,
}

impl InputDomain {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn ints(mut self, param: &str, vals: &[i32]) -> Self {
        self.values.insert(param.to_string(), vals.iter().map(|v| InputValue::Int(*v)).collect());
        self
    }

    pub fn arrays(mut self, param: &str, vals: Vec<Vec<i32>>) -> Self {
        self.values.insert(param.to_string(), vals.into_iter().map(InputValue::Array).collect());
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Pos {
    Entry,
    Node(usize),
    Exit,
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Suspended {
    func: usize,
    resume: usize,
    state: State,
    entry: Arc<State>,
    dest: Option<String>,
    frame: u64,
}

/// A configuration: the current frame's state and the next instruction,
/// plus the control context needed to continue (call stack, frame ids).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Configuration {
    pub state: State,
    pub next: Location,
    /// Activation id of the frame executing `next`.
    pub frame: u64,
    /// Return value, set only at a function exit.
    pub result: Option<i32>,
    func: usize,
    pos: Pos,
    entry: Arc<State>,
    stack: Arc<Vec<Suspended>>,
    frames_created: u64,
}

impl Configuration {
    pub fn depth(&self) -> usize {
        self.stack.len()
    }

    pub fn func_index(&self) -> usize {
        self.func
    }

    /// Parameter values at the entry of the current activation.
    pub fn entry_state(&self) -> &State {
        &self.entry
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Step {
    Next(Configuration),
    Halt(RteClass, Location),
    Done,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Terminal {
    Completed,
    Rte { class: RteClass, at: Location },
    BudgetExceeded,
}

#[derive(Debug, Clone)]
pub struct Trace {
    pub input: Vec<(String, InputValue)>,
    pub steps: Vec<Configuration>,
    pub terminal: Terminal,
}

// ---------------------------------------------------------------------
// Control-flow graph

#[derive(Debug, Clone)]
pub(crate) enum NodeKind {
    Simple,
    Branch { t: usize, f: usize },
    Loop { body: usize, exit: usize },
    Return,
}

#[derive(Debug, Clone)]
pub(crate) struct Node {
    pub loc: Location,
    pub kind: NodeKind,
    pub next: usize,
}

pub(crate) const END: usize = usize::MAX;

#[derive(Debug, Clone, Default)]
pub(crate) struct Cfg {
    pub nodes: Vec<Node>,
    pub start: usize,
}

pub(crate) fn build_cfg(f: &Function) -> Cfg {
    let mut cfg = Cfg::default();
    cfg.start = compile_block(&mut cfg.nodes, &f.body, END);
    cfg
}

fn compile_block(nodes: &mut Vec<Node>, stmts: &[Stmt], cont: usize) -> usize {
    let mut cur = cont;
    for s in stmts.iter().rev() {
        cur = compile_stmt(nodes, s, cur);
    }
    cur
}

fn compile_stmt(nodes: &mut Vec<Node>, s: &Stmt, cont: usize) -> usize {
    match &s.kind {
        StmtKind::If { then_branch, else_branch, .. } => {
            let t = compile_block(nodes, then_branch, cont);
            let f = compile_block(nodes, else_branch, cont);
            nodes.push(Node { loc: s.loc.clone(), kind: NodeKind::Branch { t, f }, next: cont });
            nodes.len() - 1
        }
        StmtKind::While { body, .. } => {
            let idx = nodes.len();
            nodes.push(Node { loc: s.loc.clone(), kind: NodeKind::Loop { body: idx, exit: cont }, next: cont });
            let b = compile_block(nodes, body, idx);
            nodes[idx].kind = NodeKind::Loop { body: b, exit: cont };
            idx
        }
        StmtKind::Return(_) => {
            nodes.push(Node { loc: s.loc.clone(), kind: NodeKind::Return, next: END });
            nodes.len() - 1
        }
        _ => {
            nodes.push(Node { loc: s.loc.clone(), kind: NodeKind::Simple, next: cont });
            nodes.len() - 1
        }
    }
}

// ---------------------------------------------------------------------
// Expression evaluation

pub(crate) fn eval_int(e: &Expr, st: &State) -> Result<i32, RteClass> {
    match e {
        Expr::Int(n) => Ok(*n),
        Expr::Var(v) => st.scalar(v).and_then(Value::get).ok_or(RteClass::UninitializedRead),
        Expr::Index(a, i) => {
            let idx = eval_int(i, st)?;
            let arr = st.array(a).ok_or(RteClass::UninitializedRead)?;
            if idx < 0 || idx as usize >= arr.len() {
                return Err(RteClass::IndexOutOfBounds);
            }
            arr[idx as usize].get().ok_or(RteClass::UninitializedRead)
        }
        Expr::Unary(UnOp::Neg, x) => eval_int(x, st)?.checked_neg().ok_or(RteClass::SignedOverflow),
        Expr::Binary(op, l, r) if op.is_arith() => {
            let a = eval_int(l, st)?;
            let b = eval_int(r, st)?;
            arith(*op, a, b)
        }
        // Conditions never occur in int position after type checking.
        _ => Ok(eval_cond(e, st)? as i32),
    }
}

pub(crate) fn arith(op: BinOp, a: i32, b: i32) -> Result<i32, RteClass> {
    match op {
        BinOp::Add => a.checked_add(b).ok_or(RteClass::SignedOverflow),
        BinOp::Sub => a.checked_sub(b).ok_or(RteClass::SignedOverflow),
        BinOp::Mul => a.checked_mul(b).ok_or(RteClass::SignedOverflow),
        BinOp::Div | BinOp::Mod => {
            if b == 0 {
                return Err(RteClass::DivByZero);
            }
            if a == i32::MIN && b == -1 {
                return Err(RteClass::SignedOverflow);
            }
            Ok(if op == BinOp::Div { a / b } else { a % b })
        }
        _ => unreachable!("not an arithmetic operator"),
    }
}

pub(crate) fn eval_cond(e: &Expr, st: &State) -> Result<bool, RteClass> {
    match e {
        Expr::Unary(UnOp::Not, x) => Ok(!eval_cond(x, st)?),
        Expr::Binary(BinOp::And, l, r) => Ok(eval_cond(l, st)? && eval_cond(r, st)?),
        Expr::Binary(BinOp::Or, l, r) => Ok(eval_cond(l, st)? || eval_cond(r, st)?),
        Expr::Binary(op, l, r) if op.is_cmp() => {
            let a = eval_int(l, st)?;
            let b = eval_int(r, st)?;
            Ok(match op {
                BinOp::Lt => a < b,
                BinOp::Le => a <= b,
                BinOp::Gt => a > b,
                BinOp::Ge => a >= b,
                BinOp::Eq => a == b,
                _ => a != b,
            })
        }
        _ => Ok(eval_int(e, st)? != 0),
    }
}

// ---------------------------------------------------------------------
// Stepping

impl Program {
    /// Initial configuration at `Entry(func)` with the given parameter values.
    pub fn initial(&self, func: &str, args: &[(String, InputValue)]) -> Result<Configuration, LangError> {
        let fi = self.func_index(func).ok_or_else(|| LangError::NoEntry(func.to_string()))?;
        let f = &self.functions[fi];
        let mut st = State::default();
        for p in &f.params {
            let v = args.iter().find(|(n, _)| *n == p.name).map(|(_, v)| v.clone());
            match (&p.kind, v) {
                (ParamKind::Int, Some(InputValue::Int(x))) => st.set(&p.name, Value::Int(x)),
                (ParamKind::Array { .. }, Some(InputValue::Array(xs))) => {
                    st.arrays.insert(p.name.clone(), xs.into_iter().map(Value::Int).collect());
                }
                (ParamKind::Int, None) | (ParamKind::Int, Some(_)) => {
                    return Err(LangError::Domain(format!("parameter `{}` needs an int value", p.name)))
                }
                (ParamKind::Array { .. }, _) => {
                    return Err(LangError::Domain(format!("parameter `{}` needs an array value", p.name)))
                }
            }
        }
        let entry = Arc::new(st.clone());
        Ok(Configuration {
            state: st,
            next: Location::Entry(f.name.clone()),
            frame: 0,
            result: None,
            func: fi,
            pos: Pos::Entry,
            entry,
            stack: Arc::new(Vec::new()),
            frames_created: 1,
        })
    }

    fn loc_of(&self, func: usize, pos: Pos) -> Location {
        let name = &self.functions[func].name;
        match pos {
            Pos::Entry => Location::Entry(name.clone()),
            Pos::Exit => Location::Exit(name.clone()),
            Pos::Node(n) => self.cfgs[func].nodes[n].loc.clone(),
        }
    }

    fn goto(&self, c: &mut Configuration, node: usize) {
        c.pos = if node == END { Pos::Exit } else { Pos::Node(node) };
        if c.pos == Pos::Exit {
            // The exit state exposes the parameters' entry values.
            c.state = (*c.entry).clone();
        }
        c.next = self.loc_of(c.func, c.pos);
    }

    /// Executes the instruction `c.next`.
    pub fn eval_step(&self, c: &Configuration) -> Step {
        let mut n = c.clone();
        match c.pos {
            Pos::Entry => {
                let start = self.cfgs[c.func].start;
                self.goto(&mut n, start);
                Step::Next(n)
            }
            Pos::Exit => {
                let mut stack = (*c.stack).clone();
                let Some(caller) = stack.pop() else {
                    return Step::Done;
                };
                n.state = caller.state;
                if let (Some(d), Some(v)) = (&caller.dest, c.result) {
                    n.state.set(d, Value::Int(v));
                }
                n.func = caller.func;
                n.entry = caller.entry;
                n.frame = caller.frame;
                n.result = None;
                n.stack = Arc::new(stack);
                self.goto(&mut n, caller.resume);
                Step::Next(n)
            }
            Pos::Node(idx) => match self.exec_node(c, idx, n) {
                Ok(n) => Step::Next(n),
                Err(class) => Step::Halt(class, c.next.clone()),
            },
        }
    }

    fn exec_node(&self, c: &Configuration, idx: usize, mut n: Configuration) -> Result<Configuration, RteClass> {
        let node = &self.cfgs[c.func].nodes[idx];
        let stmt = self.stmt_at(&node.loc).expect("cfg node without statement");
        let st = &mut n.state;
        match (&stmt.kind, &node.kind) {
            (StmtKind::Decl { name, init }, _) => {
                let v = match init {
                    Some(e) => Value::Int(eval_int(e, st)?),
                    None => Value::Uninit,
                };
                st.set(name, v);
            }
            (StmtKind::DeclArray { name, len }, _) => {
                st.arrays.insert(name.clone(), vec![Value::Uninit; *len as usize]);
            }
            (StmtKind::Assign { name, value }, _) => {
                let v = eval_int(value, st)?;
                st.set(name, Value::Int(v));
            }
            (StmtKind::Store { array, index, value }, _) => {
                let i = eval_int(index, st)?;
                let v = eval_int(value, st)?;
                let arr = st.arrays.get_mut(array).ok_or(RteClass::UninitializedRead)?;
                if i < 0 || i as usize >= arr.len() {
                    return Err(RteClass::IndexOutOfBounds);
                }
                arr[i as usize] = Value::Int(v);
            }
            (StmtKind::Call { dest, callee, args }, _) => {
                let gi = self.func_index(callee).expect("callee checked at parse time");
                let g = &self.functions[gi];
                let mut callee_state = State::default();
                for (p, a) in g.params.iter().zip(args) {
                    match (&p.kind, a) {
                        (ParamKind::Array { .. }, Expr::Var(v)) => {
                            let arr = st.array(v).ok_or(RteClass::UninitializedRead)?;
                            if arr.contains(&Value::Uninit) {
                                return Err(RteClass::UninitializedRead);
                            }
                            callee_state.arrays.insert(p.name.clone(), arr.to_vec());
                        }
                        _ => {
                            let v = eval_int(a, st)?;
                            callee_state.set(&p.name, Value::Int(v));
                        }
                    }
                }
                let mut stack = (*c.stack).clone();
                stack.push(Suspended {
                    func: c.func,
                    resume: node.next,
                    state: n.state.clone(),
                    entry: c.entry.clone(),
                    dest: dest.as_ref().map(|d| d.name.clone()),
                    frame: c.frame,
                });
                n.stack = Arc::new(stack);
                n.entry = Arc::new(callee_state.clone());
                n.state = callee_state;
                n.func = gi;
                n.frame = c.frames_created;
                n.frames_created = c.frames_created + 1;
                n.pos = Pos::Entry;
                n.next = Location::Entry(g.name.clone());
                return Ok(n);
            }
            (StmtKind::If { cond, .. }, NodeKind::Branch { t, f }) => {
                let target = if eval_cond(cond, st)? { *t } else { *f };
                self.goto(&mut n, target);
                return Ok(n);
            }
            (StmtKind::While { cond, .. }, NodeKind::Loop { body, exit }) => {
                let target = if eval_cond(cond, st)? { *body } else { *exit };
                self.goto(&mut n, target);
                return Ok(n);
            }
            (StmtKind::Return(value), _) => {
                let r = match value {
                    Some(e) => Some(eval_int(e, st)?),
                    None => None,
                };
                self.goto(&mut n, END);
                n.result = r;
                return Ok(n);
            }
            (StmtKind::Nop, _) => {}
            _ => unreachable!("statement and cfg node disagree"),
        }
        self.goto(&mut n, node.next);
        Ok(n)
    }

    /// Runs from `c` for at most `max_steps` configurations.
    pub fn run(&self, c: Configuration, max_steps: usize, input: Vec<(String, InputValue)>) -> Trace {
        let mut steps = vec![c];
        loop {
            if steps.len() >= max_steps {
                return Trace { input, steps, terminal: Terminal::BudgetExceeded };
            }
            match self.eval_step(steps.last().expect("nonempty")) {
                Step::Next(n) => steps.push(n),
                Step::Halt(class, at) => return Trace { input, steps, terminal: Terminal::Rte { class, at } },
                Step::Done => return Trace { input, steps, terminal: Terminal::Completed },
            }
        }
    }

    /// One maximal trace per input valuation, ordered lexicographically by
    /// parameter order and the order of each parameter's domain.
    pub fn enumerate_traces(
        &self,
        entry: Option<&str>,
        domain: &InputDomain,
        max_steps: usize,
    ) -> Result<Vec<Trace>, LangError> {
        let name = match entry.or(self.entry.as_deref()) {
            Some(n) => n.to_string(),
            None => return Err(LangError::NoEntry("no entry function".into())),
        };
        let fi = self.func_index(&name).ok_or_else(|| LangError::NoEntry(name.clone()))?;
        let f = &self.functions[fi];
        let mut axes: Vec<(String, Vec<InputValue>)> = Vec::new();
        for p in &f.params {
            let vals = domain
                .values
                .get(&p.name)
                .cloned()
                .ok_or_else(|| LangError::Domain(format!("no input domain for parameter `{}`", p.name)))?;
            axes.push((p.name.clone(), vals));
        }
        let mut out = Vec::new();
        let mut idx = vec![0usize; axes.len()];
        loop {
            if axes.iter().any(|(_, v)| v.is_empty()) {
                break;
            }
            let input: Vec<(String, InputValue)> =
                axes.iter().zip(&idx).map(|((n, vals), i)| (n.clone(), vals[*i].clone())).collect();
            let c = self.initial(&name, &input)?;
            out.push(self.run(c, max_steps.max(1), input));
            // Odometer increment, last parameter fastest.
            let mut k = axes.len();
            loop {
                if k == 0 {
                    return Ok(out);
                }
                k -= 1;
                idx[k] += 1;
                if idx[k] < axes[k].1.len() {
                    break;
                }
                idx[k] = 0;
            }
        }
        Ok(out)
    }
}
