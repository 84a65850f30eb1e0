//! Evaluation of predicates on concrete states.

use super::pred::{BinOpT, Pred, Term};
use crate::lang::{State, Value};
use std::collections::HashMap;
use std::fmt;

/// Quantifier ranges longer than this are an evaluation error.
pub const MAX_QUANTIFIER_RANGE: i128 = 1 << 20;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EvalError {
    Unbound(String),
    Uninit(String),
    OutOfBounds(String, i128),
    DivByZero,
    Overflow,
    RangeTooLarge,
    NoResult,
}

impl fmt::Display for EvalError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EvalError::Unbound(v) => write!(f, "`{v}` is not bound"),
            EvalError::Uninit(v) => write!(f, "`{v}` is uninitialized"),
            EvalError::OutOfBounds(a, i) => write!(f, "index {i} out of bounds for `{a}`"),
            EvalError::DivByZero => write!(f, "division by zero in predicate"),
            EvalError::Overflow => write!(f, "arithmetic overflow in predicate"),
            EvalError::RangeTooLarge => write!(f, "quantifier range too large"),
            EvalError::NoResult => write!(f, "`\\result` has no value here"),
        }
    }
}

/// Extra bindings: the return value and the entry state for `\old`.
#[derive(Debug, Clone, Copy, Default)]
pub struct Binding<'a> {
    pub result: Option<i32>,
    pub old: Option<&'a State>,
}

struct Env<'a> {
    st: &'a State,
    b: Binding<'a>,
    bound: HashMap<String, i128>,
}

pub fn eval_predicate(p: &Pred, st: &State, b: Binding<'_>) -> Result<bool, EvalError> {
    let mut env = Env { st, b, bound: HashMap::new() };
    env.pred(p)
}

pub fn eval_term(t: &Term, st: &State, b: Binding<'_>) -> Result<i128, EvalError> {
    let env = Env { st, b, bound: HashMap::new() };
    env.term(t)
}

impl Env<'_> {
    fn scalar(&self, st: &State, v: &str) -> Result<i128, EvalError> {
        if let Some(x) = self.bound.get(v) {
            return Ok(*x);
        }
        match st.scalar(v) {
            Some(Value::Int(x)) => Ok(x as i128),
            Some(Value::Uninit) => Err(EvalError::Uninit(v.to_string())),
            None => Err(EvalError::Unbound(v.to_string())),
        }
    }

    fn term(&self, t: &Term) -> Result<i128, EvalError> {
        match t {
            Term::Int(n) => Ok(*n as i128),
            Term::Var(v) => self.scalar(self.st, v),
            Term::Result => self.b.result.map(|r| r as i128).ok_or(EvalError::NoResult),
            Term::Old(v) => self.scalar(self.b.old.unwrap_or(self.st), v),
            Term::Index(a, i) => {
                let idx = self.term(i)?;
                let arr = self.st.array(a).ok_or_else(|| EvalError::Unbound(a.clone()))?;
                if idx < 0 || idx >= arr.len() as i128 {
                    return Err(EvalError::OutOfBounds(a.clone(), idx));
                }
                match arr[idx as usize] {
                    Value::Int(x) => Ok(x as i128),
                    Value::Uninit => Err(EvalError::Uninit(format!("{a}[{idx}]"))),
                }
            }
            Term::Neg(x) => self.term(x)?.checked_neg().ok_or(EvalError::Overflow),
            Term::Bin(op, a, b) => {
                let x = self.term(a)?;
                let y = self.term(b)?;
                match op {
                    BinOpT::Add => x.checked_add(y).ok_or(EvalError::Overflow),
                    BinOpT::Sub => x.checked_sub(y).ok_or(EvalError::Overflow),
                    BinOpT::Mul => x.checked_mul(y).ok_or(EvalError::Overflow),
                    BinOpT::Div if y == 0 => Err(EvalError::DivByZero),
                    BinOpT::Mod if y == 0 => Err(EvalError::DivByZero),
                    BinOpT::Div => x.checked_div(y).ok_or(EvalError::Overflow),
                    BinOpT::Mod => x.checked_rem(y).ok_or(EvalError::Overflow),
                }
            }
        }
    }

    fn len(&self, a: &str) -> Result<i128, EvalError> {
        self.st.array(a).map(|x| x.len() as i128).ok_or_else(|| EvalError::Unbound(a.to_string()))
    }

    fn pred(&mut self, p: &Pred) -> Result<bool, EvalError> {
        match p {
            Pred::Bool(b) => Ok(*b),
            Pred::Cmp(c, a, b) => {
                let x = self.term(a)?;
                let y = self.term(b)?;
                Ok(c.holds(x, y))
            }
            Pred::Not(x) => Ok(!self.pred(x)?),
            Pred::And(xs) => {
                for x in xs {
                    if !self.pred(x)? {
                        return Ok(false);
                    }
                }
                Ok(true)
            }
            Pred::Or(xs) => {
                for x in xs {
                    if self.pred(x)? {
                        return Ok(true);
                    }
                }
                Ok(false)
            }
            Pred::Implies(a, b) => Ok(!self.pred(a)? || self.pred(b)?),
            Pred::Forall { var, lo, hi, body } => {
                let lo = self.term(lo)?;
                let hi = self.term(hi)?;
                if hi - lo > MAX_QUANTIFIER_RANGE {
                    return Err(EvalError::RangeTooLarge);
                }
                let saved = self.bound.get(var).copied();
                // Every instance is evaluated: an ill-defined instance makes
                // the whole quantifier ill-defined even after a false one.
                let mut all = true;
                let mut k = lo;
                let mut res = Ok(());
                while k < hi {
                    self.bound.insert(var.clone(), k);
                    match self.pred(body) {
                        Ok(v) => all &= v,
                        Err(e) => {
                            res = Err(e);
                            break;
                        }
                    }
                    k += 1;
                }
                match saved {
                    Some(v) => self.bound.insert(var.clone(), v),
                    None => self.bound.remove(var),
                };
                res.map(|_| all)
            }
            Pred::ValidRead(a, lo, hi) | Pred::ValidWrite(a, lo, hi) => {
                let lo = self.term(lo)?;
                let hi = self.term(hi)?;
                let n = self.len(a)?;
                Ok(lo > hi || (lo >= 0 && hi < n))
            }
            Pred::Initialized(a, lo, hi) => {
                let lo = self.term(lo)?;
                let hi = self.term(hi)?;
                let arr = self.st.array(a).ok_or_else(|| EvalError::Unbound(a.clone()))?;
                if lo > hi {
                    return Ok(true);
                }
                if lo < 0 || hi >= arr.len() as i128 {
                    return Ok(false);
                }
                Ok(arr[lo as usize..=hi as usize].iter().all(|v| *v != Value::Uninit))
            }
            Pred::Init(x) => match self.st.scalar(x) {
                Some(Value::Int(_)) => Ok(true),
                Some(Value::Uninit) => Ok(false),
                None => Err(EvalError::Unbound(x.clone())),
            },
        }
    }
}
