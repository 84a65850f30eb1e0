//! Parser for `//@` annotation clauses.

use super::pred::*;
use super::SpecError;
use crate::lang::lexer::{lex, Tok, Token};
use std::collections::BTreeSet;

/// One parsed clause before it is attached to a location.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Clause {
    Requires(Pred),
    Ensures(Pred),
    Assert(Pred),
    LoopInvariant(Pred),
    LoopAssigns(BTreeSet<String>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledClause {
    pub label: Option<String>,
    pub clause: Clause,
    pub line: u32,
}

struct P {
    toks: Vec<Token>,
    pos: usize,
}

type R<T> = Result<T, SpecError>;

/// Parses a sequence of clauses, each terminated by `;`.
pub fn parse_clauses(text: &str, first_line: u32) -> R<Vec<LabeledClause>> {
    let toks = lex(text, first_line, true).map_err(|e| SpecError::Syntax { line: e.line, msg: e.msg })?;
    let mut p = P { toks, pos: 0 };
    let mut out = Vec::new();
    while *p.peek() != Tok::Eof {
        out.push(p.clause()?);
    }
    Ok(out)
}

/// Parses a bare predicate (no keyword, no trailing `;` required).
pub fn parse_predicate(text: &str) -> R<Pred> {
    let toks = lex(text, 1, true).map_err(|e| SpecError::Syntax { line: e.line, msg: e.msg })?;
    let mut p = P { toks, pos: 0 };
    let pred = p.pred()?;
    p.eat(&Tok::Semi);
    if *p.peek() != Tok::Eof {
        return p.err(format!("unexpected {} after predicate", p.peek()));
    }
    Ok(pred)
}

impl P {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, n: usize) -> &Tok {
        &self.toks[(self.pos + n).min(self.toks.len() - 1)].tok
    }

    fn line(&self) -> u32 {
        self.toks[self.pos].line
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].tok.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn eat(&mut self, t: &Tok) -> bool {
        if self.peek() == t {
            self.bump();
            true
        } else {
            false
        }
    }

    fn err<T>(&self, msg: impl Into<String>) -> R<T> {
        Err(SpecError::Syntax { line: self.line(), msg: msg.into() })
    }

    fn expect(&mut self, t: Tok) -> R<()> {
        if self.eat(&t) {
            Ok(())
        } else {
            self.err(format!("expected {t}, found {}", self.peek()))
        }
    }

    fn is_ident(&self, s: &str) -> bool {
        matches!(self.peek(), Tok::Ident(x) if x == s)
    }

    fn ident(&mut self) -> R<String> {
        match self.bump() {
            Tok::Ident(s) => Ok(s),
            t => self.err(format!("expected identifier, found {t}")),
        }
    }

    fn clause(&mut self) -> R<LabeledClause> {
        let line = self.line();
        let kw = match self.bump() {
            Tok::Ident(s) => s,
            t => return self.err(format!("expected annotation keyword, found {t}")),
        };
        let kind = match kw.as_str() {
            "requires" | "ensures" | "assert" => kw.clone(),
            "loop" => match self.bump() {
                Tok::Ident(s) if s == "invariant" => "invariant".to_string(),
                Tok::Ident(s) if s == "assigns" => "assigns".to_string(),
                t => return self.err(format!("expected `invariant` or `assigns` after `loop`, found {t}")),
            },
            other => return self.err(format!("unknown annotation keyword `{other}`")),
        };
        let label = match (self.peek().clone(), self.peek_at(1)) {
            (Tok::Ident(l), Tok::Colon) if kind != "assigns" => {
                self.bump();
                self.bump();
                Some(l)
            }
            _ => None,
        };
        let clause = if kind == "assigns" {
            let mut set = BTreeSet::new();
            if matches!(self.peek(), Tok::Builtin(s) if s == "nothing") {
                self.bump();
            } else {
                loop {
                    set.insert(self.ident()?);
                    if !self.eat(&Tok::Comma) {
                        break;
                    }
                }
            }
            Clause::LoopAssigns(set)
        } else {
            let p = self.pred()?;
            match kind.as_str() {
                "requires" => Clause::Requires(p),
                "ensures" => Clause::Ensures(p),
                "assert" => Clause::Assert(p),
                _ => Clause::LoopInvariant(p),
            }
        };
        if *self.peek() != Tok::Semi {
            return self.err(format!("expected `;` to end the `{kw}` clause, found {}", self.peek()));
        }
        self.bump();
        Ok(LabeledClause { label, clause, line })
    }

    fn pred(&mut self) -> R<Pred> {
        let lhs = self.or()?;
        if self.eat(&Tok::Implies) {
            let rhs = self.pred()?;
            return Ok(Pred::implies(lhs, rhs));
        }
        Ok(lhs)
    }

    fn or(&mut self) -> R<Pred> {
        let mut xs = vec![self.and()?];
        while self.eat(&Tok::OrOr) {
            xs.push(self.and()?);
        }
        Ok(if xs.len() == 1 { xs.pop().expect("one") } else { Pred::Or(xs) })
    }

    fn and(&mut self) -> R<Pred> {
        let mut xs = vec![self.unary()?];
        while self.eat(&Tok::AndAnd) {
            xs.push(self.unary()?);
        }
        Ok(if xs.len() == 1 { xs.pop().expect("one") } else { Pred::And(xs) })
    }

    fn unary(&mut self) -> R<Pred> {
        if self.eat(&Tok::Bang) {
            return Ok(Pred::not(self.unary()?));
        }
        self.atom()
    }

    fn builtin_name(&self) -> Option<String> {
        let name = match self.peek() {
            Tok::Builtin(s) => s.clone(),
            Tok::Ident(s) if *self.peek_at(1) == Tok::LParen => s.clone(),
            _ => return None,
        };
        matches!(name.as_str(), "valid_read" | "valid_write" | "valid" | "initialized" | "init").then_some(name)
    }

    fn atom(&mut self) -> R<Pred> {
        match self.peek().clone() {
            Tok::Builtin(s) if s == "true" => {
                self.bump();
                return Ok(Pred::Bool(true));
            }
            Tok::Builtin(s) if s == "false" => {
                self.bump();
                return Ok(Pred::Bool(false));
            }
            Tok::Ident(s) if s == "true" || s == "false" => {
                self.bump();
                return Ok(Pred::Bool(s == "true"));
            }
            Tok::Builtin(s) if s == "forall" => return self.forall(),
            _ => {}
        }
        if let Some(name) = self.builtin_name() {
            self.bump();
            self.expect(Tok::LParen)?;
            let a = self.ident()?;
            if name == "init" && *self.peek() == Tok::RParen {
                self.bump();
                return Ok(Pred::Init(a));
            }
            self.expect(Tok::Comma)?;
            let lo = self.term()?;
            self.expect(Tok::Comma)?;
            let hi = self.term()?;
            self.expect(Tok::RParen)?;
            return Ok(match name.as_str() {
                "valid_read" => Pred::ValidRead(a, lo, hi),
                "valid_write" | "valid" => Pred::ValidWrite(a, lo, hi),
                _ => Pred::Initialized(a, lo, hi),
            });
        }
        if *self.peek() == Tok::LParen {
            // Either a parenthesised predicate or a comparison whose left
            // operand starts with a parenthesised term.
            let save = self.pos;
            if let Ok(t) = self.term() {
                if let Some(c) = self.cmp_op() {
                    self.bump();
                    let r = self.term()?;
                    return Ok(Pred::Cmp(c, t, r));
                }
            }
            self.pos = save;
            self.bump();
            let p = self.pred()?;
            self.expect(Tok::RParen)?;
            return Ok(p);
        }
        let l = self.term()?;
        let Some(c) = self.cmp_op() else {
            return self.err(format!("expected comparison after `{l}`, found {}", self.peek()));
        };
        self.bump();
        let r = self.term()?;
        Ok(Pred::Cmp(c, l, r))
    }

    fn forall(&mut self) -> R<Pred> {
        self.bump();
        if !self.is_ident("integer") && !self.is_ident("int") {
            return self.err("expected `integer` after `\\forall`");
        }
        self.bump();
        let var = self.ident()?;
        self.expect(Tok::Semi)?;
        let lo = self.term()?;
        let lo_strict = match self.bump() {
            Tok::Le => false,
            Tok::Lt => true,
            t => return self.err(format!("expected `<=` or `<` in quantifier range, found {t}")),
        };
        match self.bump() {
            Tok::Ident(v) if v == var => {}
            t => return self.err(format!("expected bound variable `{var}`, found {t}")),
        }
        let hi_strict = match self.bump() {
            Tok::Le => false,
            Tok::Lt => true,
            t => return self.err(format!("expected `<=` or `<` in quantifier range, found {t}")),
        };
        let hi = self.term()?;
        self.expect(Tok::Implies)?;
        let body = self.pred()?;
        let lo = if lo_strict { Term::add(lo, Term::Int(1)) } else { lo };
        let hi = if hi_strict { hi } else { Term::add(hi, Term::Int(1)) };
        Ok(Pred::Forall { var, lo, hi, body: Box::new(body) })
    }

    fn cmp_op(&self) -> Option<Cmp> {
        Some(match self.peek() {
            Tok::Lt => Cmp::Lt,
            Tok::Le => Cmp::Le,
            Tok::Gt => Cmp::Gt,
            Tok::Ge => Cmp::Ge,
            Tok::EqEq => Cmp::Eq,
            Tok::Ne => Cmp::Ne,
            _ => return None,
        })
    }

    fn term(&mut self) -> R<Term> {
        let mut lhs = self.factor()?;
        loop {
            let op = match self.peek() {
                Tok::Plus => BinOpT::Add,
                Tok::Minus => BinOpT::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.factor()?;
            lhs = Term::bin(op, lhs, rhs);
        }
    }

    fn factor(&mut self) -> R<Term> {
        let mut lhs = self.unary_term()?;
        loop {
            let op = match self.peek() {
                Tok::Star => BinOpT::Mul,
                Tok::Slash => BinOpT::Div,
                Tok::Percent => BinOpT::Mod,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.unary_term()?;
            lhs = Term::bin(op, lhs, rhs);
        }
    }

    fn unary_term(&mut self) -> R<Term> {
        if self.eat(&Tok::Minus) {
            let t = self.unary_term()?;
            return Ok(match t {
                Term::Int(n) => Term::Int(-n),
                t => Term::Neg(Box::new(t)),
            });
        }
        self.primary_term()
    }

    fn primary_term(&mut self) -> R<Term> {
        match self.bump() {
            Tok::Int(n) => {
                if n > i64::MAX as u64 / 2 {
                    return self.err(format!("integer literal {n} too large"));
                }
                Ok(Term::Int(n as i64))
            }
            Tok::LParen => {
                let t = self.term()?;
                self.expect(Tok::RParen)?;
                Ok(t)
            }
            Tok::Builtin(s) if s == "result" => Ok(Term::Result),
            Tok::Builtin(s) if s == "old" => {
                self.expect(Tok::LParen)?;
                let v = self.ident()?;
                self.expect(Tok::RParen)?;
                Ok(Term::Old(v))
            }
            Tok::Ident(s) if s == "INT_MIN" => Ok(Term::Int(i32::MIN as i64)),
            Tok::Ident(s) if s == "INT_MAX" => Ok(Term::Int(i32::MAX as i64)),
            Tok::Ident(s) => {
                if self.eat(&Tok::LBracket) {
                    let i = self.term()?;
                    self.expect(Tok::RBracket)?;
                    Ok(Term::Index(s, Box::new(i)))
                } else {
                    Ok(Term::Var(s))
                }
            }
            t => self.err(format!("expected term, found {t}")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn requires_with_label() {
        let cs = parse_clauses("requires p2: INT_MIN < x;", 1).unwrap();
        assert_eq!(cs[0].label.as_deref(), Some("p2"));
        assert_eq!(
            cs[0].clause,
            Clause::Requires(Pred::Cmp(Cmp::Lt, Term::Int(i32::MIN as i64), Term::var("x")))
        );
    }

    #[test]
    fn missing_semicolon() {
        assert!(matches!(parse_clauses("ensures \\result == x", 1), Err(SpecError::Syntax { .. })));
    }

    #[test]
    fn forall_inclusive_upper_bound_normalised() {
        let p = parse_predicate("\\forall integer k; 0 <= k <= n - 1 ==> a[k] == 0").unwrap();
        assert_eq!(p.to_string(), "\\forall integer k; 0 <= k < n - 1 + 1 ==> a[k] == 0");
        let Pred::Forall { var, .. } = p else { panic!() };
        assert_eq!(var, "k");
    }

    #[test]
    fn parenthesised_forms() {
        assert_eq!(parse_predicate("(x + 1) < y").unwrap().to_string(), "x + 1 < y");
        assert_eq!(parse_predicate("(x < y) && !(y == 0)").unwrap().to_string(), "x < y && !(y == 0)");
    }

    #[test]
    fn display_roundtrip() {
        for s in [
            "INT_MIN < x",
            "\\result == x",
            "\\valid_read(arr, 0, len - 1)",
            "x != 0 ==> y / x > 1 || \\init(z)",
            "\\forall integer k; 0 <= k < i ==> \\initialized(a, k, k)",
            "x - (-1) == \\old(x) * 2",
        ] {
            let p = parse_predicate(s).unwrap();
            assert_eq!(parse_predicate(&p.to_string()).unwrap(), p, "{s}");
        }
    }

    #[test]
    fn loop_assigns_list() {
        let cs = parse_clauses("loop assigns i, j;\nloop invariant 0 <= i;", 3).unwrap();
        assert_eq!(cs[0].clause, Clause::LoopAssigns(["i".to_string(), "j".to_string()].into()));
        assert_eq!(cs[1].line, 4);
    }
}
