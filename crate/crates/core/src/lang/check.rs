//! Scope and type checking; computes the per-location scope table.

use super::ast::*;
use super::LangError;
use std::collections::{BTreeMap, HashMap, HashSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Ty {
    Int,
    Bool,
    Array,
}

/// What the checker knows about one instruction location.
#[derive(Debug, Clone)]
pub struct LocInfo {
    pub func: String,
    /// Variables visible just before the instruction executes.
    pub scope: Vec<(String, VarKind)>,
    pub is_loop: bool,
}

pub(crate) fn check(fns: &[Function]) -> Result<BTreeMap<Location, LocInfo>, LangError> {
    let mut sigs: HashMap<&str, &Function> = HashMap::new();
    for f in fns {
        if sigs.insert(&f.name, f).is_some() {
            return Err(LangError::Type { line: f.line, msg: format!("function `{}` defined twice", f.name) });
        }
    }
    let mut locs = BTreeMap::new();
    for f in fns {
        let mut seen = HashSet::new();
        let mut scope: Vec<(String, VarKind)> = Vec::new();
        for p in &f.params {
            if !seen.insert(p.name.clone()) {
                return Err(LangError::Type { line: f.line, msg: format!("duplicate parameter `{}`", p.name) });
            }
            let kind = match p.kind {
                ParamKind::Int => VarKind::Int,
                ParamKind::Array { .. } => VarKind::Array(None),
            };
            scope.push((p.name.clone(), kind));
        }
        let params = scope.clone();
        let info = |is_loop| LocInfo { func: f.name.clone(), scope: params.clone(), is_loop };
        locs.insert(Location::Entry(f.name.clone()), info(false));
        locs.insert(Location::Exit(f.name.clone()), info(false));
        let mut cx = Checker { sigs: &sigs, func: f, seen, locs: &mut locs };
        cx.block(&f.body, &mut scope)?;
        if f.ret == RetKind::Int && !returns(&f.body) {
            return Err(LangError::Type {
                line: f.end_line,
                msg: format!("function `{}` may reach its end without returning a value", f.name),
            });
        }
    }
    check_acyclic(fns)?;
    Ok(locs)
}

fn returns(block: &[Stmt]) -> bool {
    block.iter().any(|s| match &s.kind {
        StmtKind::Return(_) => true,
        StmtKind::If { then_branch, else_branch, .. } => returns(then_branch) && returns(else_branch),
        _ => false,
    })
}

fn check_acyclic(fns: &[Function]) -> Result<(), LangError> {
    let callees: HashMap<&str, Vec<String>> = fns.iter().map(|f| (f.name.as_str(), f.callees())).collect();
    // 0 = unvisited, 1 = on stack, 2 = done
    let mut state: HashMap<&str, u8> = HashMap::new();
    let mut stack: Vec<String> = Vec::new();

    fn dfs<'a>(
        f: &'a str,
        callees: &'a HashMap<&'a str, Vec<String>>,
        state: &mut HashMap<&'a str, u8>,
        stack: &mut Vec<String>,
    ) -> Result<(), LangError> {
        state.insert(f, 1);
        stack.push(f.to_string());
        for g in &callees[f] {
            match state.get(g.as_str()).copied().unwrap_or(0) {
                1 => {
                    let start = stack.iter().position(|s| s == g).unwrap_or(0);
                    return Err(LangError::Recursion(stack[start..].to_vec()));
                }
                0 => dfs(g.as_str(), callees, state, stack)?,
                _ => {}
            }
        }
        stack.pop();
        state.insert(f, 2);
        Ok(())
    }

    for f in fns {
        if state.get(f.name.as_str()).copied().unwrap_or(0) == 0 {
            dfs(&f.name, &callees, &mut state, &mut stack)?;
        }
    }
    Ok(())
}

struct Checker<'a> {
    sigs: &'a HashMap<&'a str, &'a Function>,
    func: &'a Function,
    seen: HashSet<String>,
    locs: &'a mut BTreeMap<Location, LocInfo>,
}

impl Checker<'_> {
    fn err<T>(&self, loc: &Location, msg: String) -> Result<T, LangError> {
        Err(LangError::Type { line: loc.file_line(), msg })
    }

    fn block(&mut self, stmts: &[Stmt], scope: &mut Vec<(String, VarKind)>) -> Result<(), LangError> {
        let mark = scope.len();
        for s in stmts {
            self.stmt(s, scope)?;
        }
        scope.truncate(mark);
        Ok(())
    }

    fn declare(&mut self, loc: &Location, name: &str, kind: VarKind, scope: &mut Vec<(String, VarKind)>) -> Result<(), LangError> {
        if !self.seen.insert(name.to_string()) {
            return self.err(loc, format!("`{name}` is declared more than once in `{}`", self.func.name));
        }
        scope.push((name.to_string(), kind));
        Ok(())
    }

    fn stmt(&mut self, s: &Stmt, scope: &mut Vec<(String, VarKind)>) -> Result<(), LangError> {
        let is_loop = matches!(s.kind, StmtKind::While { .. });
        self.locs.insert(
            s.loc.clone(),
            LocInfo { func: self.func.name.clone(), scope: scope.clone(), is_loop },
        );
        let loc = &s.loc;
        match &s.kind {
            StmtKind::Decl { name, init } => {
                if let Some(e) = init {
                    self.expect(loc, e, Ty::Int, scope)?;
                }
                self.declare(loc, name, VarKind::Int, scope)?;
            }
            StmtKind::DeclArray { name, len } => {
                if *len == 0 {
                    return self.err(loc, format!("array `{name}` must have positive length"));
                }
                self.declare(loc, name, VarKind::Array(Some(*len)), scope)?;
            }
            StmtKind::Assign { name, value } => {
                self.expect(loc, value, Ty::Int, scope)?;
                self.scalar(loc, name, scope)?;
            }
            StmtKind::Store { array, index, value } => {
                self.expect(loc, index, Ty::Int, scope)?;
                self.expect(loc, value, Ty::Int, scope)?;
                match lookup(scope, array) {
                    Some(VarKind::Array(_)) => {}
                    Some(_) => return self.err(loc, format!("`{array}` is not an array")),
                    None => return self.err(loc, format!("undeclared identifier `{array}`")),
                }
            }
            StmtKind::Call { dest, callee, args } => {
                let Some(g) = self.sigs.get(callee.as_str()).copied() else {
                    return self.err(loc, format!("call to undefined function `{callee}`"));
                };
                if g.params.len() != args.len() {
                    return self.err(
                        loc,
                        format!("`{callee}` expects {} arguments, got {}", g.params.len(), args.len()),
                    );
                }
                for (p, a) in g.params.iter().zip(args) {
                    match p.kind {
                        ParamKind::Int => self.expect(loc, a, Ty::Int, scope)?,
                        ParamKind::Array { .. } => match a {
                            Expr::Var(v) if matches!(lookup(scope, v), Some(VarKind::Array(_))) => {}
                            _ => return self.err(loc, format!("argument for `{}` must be an array variable", p.name)),
                        },
                    }
                }
                if let Some(d) = dest {
                    if g.ret == RetKind::Void {
                        return self.err(loc, format!("`{callee}` returns void"));
                    }
                    if d.declare {
                        self.declare(loc, &d.name, VarKind::Int, scope)?;
                    } else {
                        self.scalar(loc, &d.name, scope)?;
                    }
                }
            }
            StmtKind::If { cond, then_branch, else_branch } => {
                self.expect(loc, cond, Ty::Bool, scope)?;
                self.block(then_branch, scope)?;
                self.block(else_branch, scope)?;
            }
            StmtKind::While { cond, body } => {
                self.expect(loc, cond, Ty::Bool, scope)?;
                self.block(body, scope)?;
            }
            StmtKind::Return(value) => match (self.func.ret, value) {
                (RetKind::Int, Some(e)) => self.expect(loc, e, Ty::Int, scope)?,
                (RetKind::Void, None) => {}
                (RetKind::Int, None) => return self.err(loc, "missing return value".into()),
                (RetKind::Void, Some(_)) => return self.err(loc, "void function returns a value".into()),
            },
            StmtKind::Nop => {}
        }
        Ok(())
    }

    fn scalar(&self, loc: &Location, name: &str, scope: &[(String, VarKind)]) -> Result<(), LangError> {
        match lookup(scope, name) {
            Some(VarKind::Int) => Ok(()),
            Some(_) => self.err(loc, format!("cannot assign to array `{name}`")),
            None => self.err(loc, format!("undeclared identifier `{name}`")),
        }
    }

    fn expect(&self, loc: &Location, e: &Expr, want: Ty, scope: &[(String, VarKind)]) -> Result<(), LangError> {
        let got = self.ty(loc, e, scope)?;
        if got != want {
            let name = |t| match t {
                Ty::Int => "int",
                Ty::Bool => "condition",
                Ty::Array => "array",
            };
            return self.err(loc, format!("expected {} expression, `{e}` is {}", name(want), name(got)));
        }
        Ok(())
    }

    fn ty(&self, loc: &Location, e: &Expr, scope: &[(String, VarKind)]) -> Result<Ty, LangError> {
        Ok(match e {
            Expr::Int(_) => Ty::Int,
            Expr::Var(v) => match lookup(scope, v) {
                Some(VarKind::Int) => Ty::Int,
                Some(VarKind::Array(_)) => Ty::Array,
                None => return self.err(loc, format!("undeclared identifier `{v}`")),
            },
            Expr::Index(a, i) => {
                match lookup(scope, a) {
                    Some(VarKind::Array(_)) => {}
                    Some(_) => return self.err(loc, format!("`{a}` is not an array")),
                    None => return self.err(loc, format!("undeclared identifier `{a}`")),
                }
                self.expect(loc, i, Ty::Int, scope)?;
                Ty::Int
            }
            Expr::Unary(UnOp::Neg, x) => {
                self.expect(loc, x, Ty::Int, scope)?;
                Ty::Int
            }
            Expr::Unary(UnOp::Not, x) => {
                self.expect(loc, x, Ty::Bool, scope)?;
                Ty::Bool
            }
            Expr::Binary(op, l, r) => {
                let operand = if op.is_arith() || op.is_cmp() { Ty::Int } else { Ty::Bool };
                self.expect(loc, l, operand, scope)?;
                self.expect(loc, r, operand, scope)?;
                if op.is_arith() {
                    Ty::Int
                } else {
                    Ty::Bool
                }
            }
        })
    }
}

fn lookup(scope: &[(String, VarKind)], name: &str) -> Option<VarKind> {
    scope.iter().rev().find(|(n, _)| n == name).map(|(_, k)| *k)
}
