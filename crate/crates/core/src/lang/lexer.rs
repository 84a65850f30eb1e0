//! Tokenizer shared by the MiniC parser and the MiniSpec annotation parser.

use std::fmt;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Tok {
    Ident(String),
    /// `\result`, `\forall`, `\valid_read`, ... (annotation mode only).
    Builtin(String),
    Int(u64),
    LParen,
    RParen,
    LBrace,
    RBrace,
    LBracket,
    RBracket,
    Comma,
    Semi,
    Colon,
    Assign,
    Plus,
    Minus,
    Star,
    Slash,
    Percent,
    PlusPlus,
    MinusMinus,
    Lt,
    Le,
    Gt,
    Ge,
    EqEq,
    Ne,
    AndAnd,
    OrOr,
    Bang,
    Implies,
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Tok::Ident(s) => return write!(f, "identifier `{s}`"),
            Tok::Builtin(s) => return write!(f, "`\\{s}`"),
            Tok::Int(n) => return write!(f, "integer `{n}`"),
            Tok::LParen => "(",
            Tok::RParen => ")",
            Tok::LBrace => "{",
            Tok::RBrace => "}",
            Tok::LBracket => "[",
            Tok::RBracket => "]",
            Tok::Comma => ",",
            Tok::Semi => ";",
            Tok::Colon => ":",
            Tok::Assign => "=",
            Tok::Plus => "+",
            Tok::Minus => "-",
            Tok::Star => "*",
            Tok::Slash => "/",
            Tok::Percent => "%",
            Tok::PlusPlus => "++",
            Tok::MinusMinus => "--",
            Tok::Lt => "<",
            Tok::Le => "<=",
            Tok::Gt => ">",
            Tok::Ge => ">=",
            Tok::EqEq => "==",
            Tok::Ne => "!=",
            Tok::AndAnd => "&&",
            Tok::OrOr => "||",
            Tok::Bang => "!",
            Tok::Implies => "==>",
            Tok::Eof => return write!(f, "end of input"),
        };
        write!(f, "`{s}`")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub tok: Tok,
    pub line: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LexError {
    pub line: u32,
    pub msg: String,
}

/// Tokenizes `src`. Line comments are skipped, including `//@` lines: the
/// program parser never sees annotations. `first_line` is the line number
/// of the first byte, so annotation text can be lexed in place.
pub fn lex(src: &str, first_line: u32, annotations: bool) -> Result<Vec<Token>, LexError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut line = first_line;
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        if c == b'\n' {
            line += 1;
            i += 1;
            continue;
        }
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        if c == b'/' && bytes.get(i + 1) == Some(&b'/') {
            while i < bytes.len() && bytes[i] != b'\n' {
                i += 1;
            }
            continue;
        }
        if c == b'/' && bytes.get(i + 1) == Some(&b'*') {
            i += 2;
            loop {
                if i + 1 >= bytes.len() {
                    return Err(LexError { line, msg: "unterminated block comment".into() });
                }
                if bytes[i] == b'\n' {
                    line += 1;
                }
                if bytes[i] == b'*' && bytes[i + 1] == b'/' {
                    i += 2;
                    break;
                }
                i += 1;
            }
            continue;
        }
        if c.is_ascii_digit() {
            let start = i;
            while i < bytes.len() && bytes[i].is_ascii_digit() {
                i += 1;
            }
            let text = &src[start..i];
            let n: u64 = text
                .parse()
                .map_err(|_| LexError { line, msg: format!("integer literal `{text}` too large") })?;
            out.push(Token { tok: Tok::Int(n), line });
            continue;
        }
        if c.is_ascii_alphabetic() || c == b'_' || (c == b'\\' && annotations) {
            let start = if c == b'\\' { i + 1 } else { i };
            i = start;
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            let text = src[start..i].to_string();
            if c == b'\\' {
                if text.is_empty() {
                    return Err(LexError { line, msg: "stray `\\`".into() });
                }
                out.push(Token { tok: Tok::Builtin(text), line });
            } else {
                out.push(Token { tok: Tok::Ident(text), line });
            }
            continue;
        }
        let next = bytes.get(i + 1).copied();
        let (tok, len) = match (c, next) {
            (b'=', Some(b'=')) if bytes.get(i + 2) == Some(&b'>') => (Tok::Implies, 3),
            (b'=', Some(b'=')) => (Tok::EqEq, 2),
            (b'!', Some(b'=')) => (Tok::Ne, 2),
            (b'<', Some(b'=')) => (Tok::Le, 2),
            (b'>', Some(b'=')) => (Tok::Ge, 2),
            (b'&', Some(b'&')) => (Tok::AndAnd, 2),
            (b'|', Some(b'|')) => (Tok::OrOr, 2),
            (b'+', Some(b'+')) => (Tok::PlusPlus, 2),
            (b'-', Some(b'-')) => (Tok::MinusMinus, 2),
            (b'(', _) => (Tok::LParen, 1),
            (b')', _) => (Tok::RParen, 1),
            (b'{', _) => (Tok::LBrace, 1),
            (b'}', _) => (Tok::RBrace, 1),
            (b'[', _) => (Tok::LBracket, 1),
            (b']', _) => (Tok::RBracket, 1),
            (b',', _) => (Tok::Comma, 1),
            (b';', _) => (Tok::Semi, 1),
            (b':', _) => (Tok::Colon, 1),
            (b'=', _) => (Tok::Assign, 1),
            (b'+', _) => (Tok::Plus, 1),
            (b'-', _) => (Tok::Minus, 1),
            (b'*', _) => (Tok::Star, 1),
            (b'/', _) => (Tok::Slash, 1),
            (b'%', _) => (Tok::Percent, 1),
            (b'<', _) => (Tok::Lt, 1),
            (b'>', _) => (Tok::Gt, 1),
            (b'!', _) => (Tok::Bang, 1),
            _ => {
                let ch = src[i..].chars().next().unwrap_or('?');
                return Err(LexError { line, msg: format!("unexpected character `{ch}`") });
            }
        };
        out.push(Token { tok, line });
        i += len;
    }
    out.push(Token { tok: Tok::Eof, line });
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kinds(src: &str, ann: bool) -> Vec<Tok> {
        lex(src, 1, ann).unwrap().into_iter().map(|t| t.tok).collect()
    }

    #[test]
    fn implies_is_one_token() {
        assert_eq!(
            kinds("a ==> b == c", true),
            vec![
                Tok::Ident("a".into()),
                Tok::Implies,
                Tok::Ident("b".into()),
                Tok::EqEq,
                Tok::Ident("c".into()),
                Tok::Eof
            ]
        );
    }

    #[test]
    fn comments_and_lines() {
        let toks = lex("x\n//@ requires y;\n/* a\n b */ z", 1, false).unwrap();
        assert_eq!(toks[0].line, 1);
        assert_eq!(toks[1].tok, Tok::Ident("z".into()));
        assert_eq!(toks[1].line, 4);
    }

    #[test]
    fn backslash_only_in_annotations() {
        assert!(lex("\\result", 1, false).is_err());
        assert_eq!(kinds("\\result", true)[0], Tok::Builtin("result".into()));
    }
}
