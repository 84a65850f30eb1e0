//! Recursive-descent parser for MiniC.

use super::ast::*;
use super::lexer::{lex, Tok, Token};
use super::LangError;
use std::collections::HashMap;

pub(crate) struct Parser {
    toks: Vec<Token>,
    pos: usize,
    line_counters: HashMap<u32, u32>,
}

type PResult<T> = Result<T, LangError>;

impl Parser {
    pub(crate) fn new(src: &str) -> PResult<Self> {
        let toks = lex(src, 1, false).map_err(|e| LangError::Syntax { line: e.line, msg: e.msg })?;
        Ok(Parser { toks, pos: 0, line_counters: HashMap::new() })
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, n: usize) -> &Tok {
        let i = (self.pos + n).min(self.toks.len() - 1);
        &self.toks[i].tok
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

    fn err<T>(&self, msg: impl Into<String>) -> PResult<T> {
        Err(LangError::Syntax { line: self.line(), msg: msg.into() })
    }

    fn expect(&mut self, want: Tok) -> PResult<()> {
        if *self.peek() == want {
            self.bump();
            Ok(())
        } else {
            self.err(format!("expected {want}, found {}", self.peek()))
        }
    }

    fn eat(&mut self, want: &Tok) -> bool {
        if self.peek() == want {
            self.bump();
            true
        } else {
            false
        }
    }

    fn is_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == kw)
    }

    fn ident(&mut self) -> PResult<String> {
        match self.peek().clone() {
            Tok::Ident(s) if !is_keyword(&s) => {
                self.bump();
                Ok(s)
            }
            t => self.err(format!("expected identifier, found {t}")),
        }
    }

    fn new_loc(&mut self, line: u32) -> Location {
        let c = self.line_counters.entry(line).or_insert(0);
        let loc = Location::line(line, *c);
        *c += 1;
        loc
    }

    pub(crate) fn program(&mut self) -> PResult<Vec<Function>> {
        let mut fns = Vec::new();
        while *self.peek() != Tok::Eof {
            fns.push(self.function()?);
        }
        if fns.is_empty() {
            return self.err("program contains no functions");
        }
        Ok(fns)
    }

    fn function(&mut self) -> PResult<Function> {
        let line = self.line();
        let ret = if self.is_kw("int") {
            RetKind::Int
        } else if self.is_kw("void") {
            RetKind::Void
        } else {
            return self.err(format!("expected `int` or `void`, found {}", self.peek()));
        };
        self.bump();
        let name = self.ident()?;
        self.expect(Tok::LParen)?;
        let mut raw: Vec<(String, bool)> = Vec::new();
        if self.is_kw("void") && *self.peek_at(1) == Tok::RParen {
            self.bump();
        } else if *self.peek() != Tok::RParen {
            loop {
                if !self.is_kw("int") {
                    return self.err(format!("expected `int` parameter, found {}", self.peek()));
                }
                self.bump();
                let pname = self.ident()?;
                let is_array = if self.eat(&Tok::LBracket) {
                    self.expect(Tok::RBracket)?;
                    true
                } else {
                    false
                };
                raw.push((pname, is_array));
                if !self.eat(&Tok::Comma) {
                    break;
                }
            }
        }
        self.expect(Tok::RParen)?;
        let mut params = Vec::new();
        for (i, (pname, is_array)) in raw.iter().enumerate() {
            let kind = if *is_array {
                match raw.get(i + 1) {
                    Some((len, false)) => ParamKind::Array { len_param: len.clone() },
                    _ => {
                        return Err(LangError::Type {
                            line,
                            msg: format!("array parameter `{pname}` must be followed by its int length parameter"),
                        })
                    }
                }
            } else {
                ParamKind::Int
            };
            params.push(Param { name: pname.clone(), kind });
        }
        let (body, end_line) = self.block()?;
        Ok(Function { name, params, ret, body, line, end_line })
    }

    /// Parses `{ stmt* }`; returns the statements and the closing-brace line.
    fn block(&mut self) -> PResult<(Vec<Stmt>, u32)> {
        self.expect(Tok::LBrace)?;
        let mut out = Vec::new();
        while *self.peek() != Tok::RBrace {
            if *self.peek() == Tok::Eof {
                return self.err("unexpected end of input, missing `}`");
            }
            out.push(self.stmt()?);
        }
        let end = self.line();
        self.bump();
        Ok((out, end))
    }

    fn branch(&mut self) -> PResult<Vec<Stmt>> {
        if *self.peek() == Tok::LBrace {
            Ok(self.block()?.0)
        } else {
            Ok(vec![self.stmt()?])
        }
    }

    fn stmt(&mut self) -> PResult<Stmt> {
        let line = self.line();
        if *self.peek() == Tok::Semi {
            self.bump();
            let loc = self.new_loc(line);
            return Ok(Stmt { loc, kind: StmtKind::Nop });
        }
        if self.is_kw("if") {
            self.bump();
            let loc = self.new_loc(line);
            self.expect(Tok::LParen)?;
            let cond = self.expr()?;
            self.expect(Tok::RParen)?;
            let then_branch = self.branch()?;
            let else_branch = if self.is_kw("else") {
                self.bump();
                self.branch()?
            } else {
                Vec::new()
            };
            return Ok(Stmt { loc, kind: StmtKind::If { cond, then_branch, else_branch } });
        }
        if self.is_kw("while") {
            self.bump();
            let loc = self.new_loc(line);
            self.expect(Tok::LParen)?;
            let cond = self.expr()?;
            self.expect(Tok::RParen)?;
            let body = self.branch()?;
            return Ok(Stmt { loc, kind: StmtKind::While { cond, body } });
        }
        if self.is_kw("return") {
            self.bump();
            let loc = self.new_loc(line);
            let value = if *self.peek() == Tok::Semi { None } else { Some(self.expr()?) };
            self.expect(Tok::Semi)?;
            return Ok(Stmt { loc, kind: StmtKind::Return(value) });
        }
        if self.is_kw("int") {
            self.bump();
            let loc = self.new_loc(line);
            let name = self.ident()?;
            if self.eat(&Tok::LBracket) {
                let len = match self.bump() {
                    Tok::Int(n) if n <= i32::MAX as u64 => n as u32,
                    t => return self.err(format!("expected constant array length, found {t}")),
                };
                self.expect(Tok::RBracket)?;
                self.expect(Tok::Semi)?;
                return Ok(Stmt { loc, kind: StmtKind::DeclArray { name, len } });
            }
            if self.eat(&Tok::Semi) {
                return Ok(Stmt { loc, kind: StmtKind::Decl { name, init: None } });
            }
            self.expect(Tok::Assign)?;
            let kind = if self.at_call() {
                let (callee, args) = self.call()?;
                StmtKind::Call { dest: Some(Dest { name, declare: true }), callee, args }
            } else {
                StmtKind::Decl { name, init: Some(self.expr()?) }
            };
            self.expect(Tok::Semi)?;
            return Ok(Stmt { loc, kind });
        }
        if self.is_kw("else") {
            return self.err("`else` without `if`");
        }
        // Statements starting with an identifier.
        if self.at_call() {
            let loc = self.new_loc(line);
            let (callee, args) = self.call()?;
            self.expect(Tok::Semi)?;
            return Ok(Stmt { loc, kind: StmtKind::Call { dest: None, callee, args } });
        }
        let name = self.ident()?;
        let loc = self.new_loc(line);
        let kind = match self.bump() {
            Tok::PlusPlus => StmtKind::Assign {
                name: name.clone(),
                value: Expr::bin(BinOp::Add, Expr::Var(name), Expr::Int(1)),
            },
            Tok::MinusMinus => StmtKind::Assign {
                name: name.clone(),
                value: Expr::bin(BinOp::Sub, Expr::Var(name), Expr::Int(1)),
            },
            Tok::LBracket => {
                let index = self.expr()?;
                self.expect(Tok::RBracket)?;
                self.expect(Tok::Assign)?;
                let value = self.expr()?;
                StmtKind::Store { array: name, index, value }
            }
            Tok::Assign => {
                if self.at_call() {
                    let (callee, args) = self.call()?;
                    StmtKind::Call { dest: Some(Dest { name, declare: false }), callee, args }
                } else {
                    StmtKind::Assign { name, value: self.expr()? }
                }
            }
            t => return self.err(format!("expected statement, found {t} after `{name}`")),
        };
        self.expect(Tok::Semi)?;
        Ok(Stmt { loc, kind })
    }

    fn at_call(&self) -> bool {
        matches!(self.peek(), Tok::Ident(s) if !is_keyword(s)) && *self.peek_at(1) == Tok::LParen
    }

    fn call(&mut self) -> PResult<(String, Vec<Expr>)> {
        let callee = self.ident()?;
        self.expect(Tok::LParen)?;
        let mut args = Vec::new();
        if *self.peek() != Tok::RParen {
            loop {
                args.push(self.expr()?);
                if !self.eat(&Tok::Comma) {
                    break;
                }
            }
        }
        self.expect(Tok::RParen)?;
        Ok((callee, args))
    }

    pub(crate) fn expr(&mut self) -> PResult<Expr> {
        self.binary(1)
    }

    fn binop(&self) -> Option<BinOp> {
        Some(match self.peek() {
            Tok::OrOr => BinOp::Or,
            Tok::AndAnd => BinOp::And,
            Tok::EqEq => BinOp::Eq,
            Tok::Ne => BinOp::Ne,
            Tok::Lt => BinOp::Lt,
            Tok::Le => BinOp::Le,
            Tok::Gt => BinOp::Gt,
            Tok::Ge => BinOp::Ge,
            Tok::Plus => BinOp::Add,
            Tok::Minus => BinOp::Sub,
            Tok::Star => BinOp::Mul,
            Tok::Slash => BinOp::Div,
            Tok::Percent => BinOp::Mod,
            _ => return None,
        })
    }

    fn binary(&mut self, min: u8) -> PResult<Expr> {
        let mut lhs = self.unary()?;
        while let Some(op) = self.binop() {
            let p = op.prec();
            if p < min {
                break;
            }
            self.bump();
            let rhs = self.binary(p + 1)?;
            lhs = Expr::bin(op, lhs, rhs);
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> PResult<Expr> {
        match self.peek() {
            Tok::Minus => {
                self.bump();
                Ok(Expr::Unary(UnOp::Neg, Box::new(self.unary()?)))
            }
            Tok::Bang => {
                self.bump();
                Ok(Expr::Unary(UnOp::Not, Box::new(self.unary()?)))
            }
            _ => self.primary(),
        }
    }

    fn primary(&mut self) -> PResult<Expr> {
        match self.peek().clone() {
            Tok::Int(n) => {
                self.bump();
                if n > i32::MAX as u64 {
                    return self.err(format!("integer literal {n} exceeds INT_MAX (use INT_MIN for the minimum)"));
                }
                Ok(Expr::Int(n as i32))
            }
            Tok::LParen => {
                self.bump();
                let e = self.expr()?;
                self.expect(Tok::RParen)?;
                Ok(e)
            }
            Tok::Ident(s) if s == "INT_MIN" => {
                self.bump();
                Ok(Expr::Int(i32::MIN))
            }
            Tok::Ident(s) if s == "INT_MAX" => {
                self.bump();
                Ok(Expr::Int(i32::MAX))
            }
            Tok::Ident(_) => {
                if self.at_call() {
                    return self.err("calls are only allowed as whole statements or assignment right-hand sides");
                }
                let name = self.ident()?;
                if self.eat(&Tok::LBracket) {
                    let idx = self.expr()?;
                    self.expect(Tok::RBracket)?;
                    Ok(Expr::Index(name, Box::new(idx)))
                } else {
                    Ok(Expr::Var(name))
                }
            }
            t => self.err(format!("expected expression, found {t}")),
        }
    }
}

pub(crate) fn is_keyword(s: &str) -> bool {
    matches!(s, "int" | "void" | "if" | "else" | "while" | "return" | "INT_MIN" | "INT_MAX")
}
