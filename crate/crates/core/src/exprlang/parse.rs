//! Recursive-descent parser for the expression grammar:
//!
//! ```text
//! expr  := term (('+'|'-') term)*
//! term  := unary (('*'|'/') unary)*
//! unary := '-' unary | power
//! power := atom ('^' unary)?
//! atom  := number | ident | ident '(' expr (',' expr)* ')' | '(' expr ')'
//! ```

use thiserror::Error;

use super::ast::{BinOp, Expr, Func};

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("unknown function `{name}` at byte {offset}")]
    UnknownFunction { name: String, offset: usize },
    #[error("unbalanced parenthesis at byte {offset}")]
    UnbalancedParen { offset: usize },
    #[error("unexpected {found} at byte {offset}")]
    UnexpectedToken { found: String, offset: usize },
    #[error("`{name}` takes {expected} argument(s), got {found} (byte {offset})")]
    ArityMismatch {
        name: String,
        expected: usize,
        found: usize,
        offset: usize,
    },
}

impl ParseError {
    pub fn offset(&self) -> usize {
        match self {
            ParseError::UnknownFunction { offset, .. }
            | ParseError::UnbalancedParen { offset }
            | ParseError::UnexpectedToken { offset, .. }
            | ParseError::ArityMismatch { offset, .. } => *offset,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
    Comma,
    Eof,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Num(v) => format!("number `{v}`"),
            Tok::Ident(s) => format!("identifier `{s}`"),
            Tok::Op(c) => format!("`{c}`"),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::Comma => "`,`".into(),
            Tok::Eof => "end of input".into(),
        }
    }
}

fn tokenize(src: &str) -> Result<Vec<(Tok, usize)>, ParseError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        match c {
            b' ' | b'\t' | b'\n' | b'\r' => i += 1,
            b'+' | b'-' | b'*' | b'/' | b'^' => {
                out.push((Tok::Op(c as char), i));
                i += 1;
            }
            b'(' => {
                out.push((Tok::LParen, i));
                i += 1;
            }
            b')' => {
                out.push((Tok::RParen, i));
                i += 1;
            }
            b',' => {
                out.push((Tok::Comma, i));
                i += 1;
            }
            b'0'..=b'9' | b'.' => {
                let start = i;
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
                if i < bytes.len() && bytes[i] == b'.' {
                    i += 1;
                    while i < bytes.len() && bytes[i].is_ascii_digit() {
                        i += 1;
                    }
                }
                if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                    let mut j = i + 1;
                    if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                        j += 1;
                    }
                    if j < bytes.len() && bytes[j].is_ascii_digit() {
                        while j < bytes.len() && bytes[j].is_ascii_digit() {
                            j += 1;
                        }
                        i = j;
                    }
                }
                let text = &src[start..i];
                let v: f64 = text.parse().map_err(|_| ParseError::UnexpectedToken {
                    found: format!("malformed number `{text}`"),
                    offset: start,
                })?;
                out.push((Tok::Num(v), start));
            }
            c if c.is_ascii_alphabetic() || c == b'_' => {
                let start = i;
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                out.push((Tok::Ident(src[start..i].to_string()), start));
            }
            _ => {
                let ch = src[i..].chars().next().unwrap_or('?');
                return Err(ParseError::UnexpectedToken {
                    found: format!("character `{ch}`"),
                    offset: i,
                });
            }
        }
    }
    out.push((Tok::Eof, src.len()));
    Ok(out)
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    open: Vec<usize>,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn offset(&self) -> usize {
        self.toks[self.pos].1
    }

    fn bump(&mut self) -> (Tok, usize) {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn unexpected(&self) -> ParseError {
        match self.peek() {
            Tok::RParen if self.open.is_empty() => ParseError::UnbalancedParen {
                offset: self.offset(),
            },
            Tok::Eof if !self.open.is_empty() => ParseError::UnbalancedParen {
                offset: *self.open.last().unwrap(),
            },
            t => ParseError::UnexpectedToken {
                found: t.describe(),
                offset: self.offset(),
            },
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        while let Tok::Op(c @ ('+' | '-')) = *self.peek() {
            self.bump();
            let rhs = self.term()?;
            let op = if c == '+' { BinOp::Add } else { BinOp::Sub };
            lhs = Expr::binary(op, lhs, rhs);
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        while let Tok::Op(c @ ('*' | '/')) = *self.peek() {
            self.bump();
            let rhs = self.unary()?;
            let op = if c == '*' { BinOp::Mul } else { BinOp::Div };
            lhs = Expr::binary(op, lhs, rhs);
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if let Tok::Op('-') = self.peek() {
            self.bump();
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.atom()?;
        if let Tok::Op('^') = self.peek() {
            self.bump();
            let exponent = self.unary()?;
            return Ok(Expr::binary(BinOp::Pow, base, exponent));
        }
        Ok(base)
    }

    fn close(&mut self) -> Result<(), ParseError> {
        match self.peek() {
            Tok::RParen => {
                self.bump();
                self.open.pop();
                Ok(())
            }
            Tok::Eof => Err(ParseError::UnbalancedParen {
                offset: *self.open.last().unwrap(),
            }),
            _ => Err(self.unexpected()),
        }
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        match self.peek().clone() {
            Tok::Num(v) => {
                self.bump();
                Ok(Expr::Num(v))
            }
            Tok::Ident(name) => {
                let (_, name_offset) = self.bump();
                if let Tok::LParen = self.peek() {
                    let func = Func::from_name(&name).ok_or(ParseError::UnknownFunction {
                        name: name.clone(),
                        offset: name_offset,
                    })?;
                    let (_, lp) = self.bump();
                    self.open.push(lp);
                    let mut args = vec![self.expr()?];
                    while let Tok::Comma = self.peek() {
                        self.bump();
                        args.push(self.expr()?);
                    }
                    self.close()?;
                    if args.len() != func.arity() {
                        return Err(ParseError::ArityMismatch {
                            name,
                            expected: func.arity(),
                            found: args.len(),
                            offset: name_offset,
                        });
                    }
                    Ok(Expr::Call(func, args))
                } else if name == "pi" {
                    Ok(Expr::Pi)
                } else {
                    Ok(Expr::Var(name))
                }
            }
            Tok::LParen => {
                let (_, lp) = self.bump();
                self.open.push(lp);
                let inner = self.expr()?;
                self.close()?;
                Ok(inner)
            }
            _ => Err(self.unexpected()),
        }
    }
}

/// Parses `src` into an expression tree. Errors carry the byte offset of
/// the offending token.
pub fn parse(src: &str) -> Result<Expr, ParseError> {
    let toks = tokenize(src)?;
    let mut p = Parser {
        toks,
        pos: 0,
        open: Vec::new(),
    };
    let e = p.expr()?;
    match p.peek() {
        Tok::Eof => Ok(e),
        _ => Err(p.unexpected()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(n: &str) -> Expr {
        Expr::var(n)
    }

    #[test]
    fn grammar_cases() {
        assert_eq!(
            parse("x^2 + y").unwrap(),
            Expr::binary(
                BinOp::Add,
                Expr::binary(BinOp::Pow, v("x"), Expr::Num(2.0)),
                v("y")
            )
        );
        assert_eq!(
            parse("x ^ 2 ^ 3").unwrap(),
            Expr::binary(
                BinOp::Pow,
                v("x"),
                Expr::binary(BinOp::Pow, Expr::Num(2.0), Expr::Num(3.0))
            )
        );
        assert_eq!(
            parse("-x^2").unwrap(),
            Expr::Neg(Box::new(Expr::binary(BinOp::Pow, v("x"), Expr::Num(2.0))))
        );
        assert_eq!(parse("pi").unwrap(), Expr::Pi);
        assert_eq!(parse("1.5e-3").unwrap(), Expr::Num(1.5e-3));
        assert_eq!(parse(".5E2").unwrap(), Expr::Num(50.0));
        assert_eq!(
            parse("  a\t-\nb ").unwrap(),
            Expr::binary(BinOp::Sub, v("a"), v("b"))
        );
    }

    #[test]
    fn hopf_weight() {
        let e = parse("2/(1+x1^2+x2^2+x3^2)").unwrap();
        let sq = |n: &str| Expr::binary(BinOp::Pow, v(n), Expr::Num(2.0));
        let denom = Expr::binary(
            BinOp::Add,
            Expr::binary(
                BinOp::Add,
                Expr::binary(BinOp::Add, Expr::Num(1.0), sq("x1")),
                sq("x2"),
            ),
            sq("x3"),
        );
        assert_eq!(e, Expr::binary(BinOp::Div, Expr::Num(2.0), denom));
    }

    #[test]
    fn errors_carry_offsets() {
        assert_eq!(
            parse("1 + foo(x)"),
            Err(ParseError::UnknownFunction {
                name: "foo".into(),
                offset: 4
            })
        );
        assert_eq!(
            parse("(x + 1"),
            Err(ParseError::UnbalancedParen { offset: 0 })
        );
        assert_eq!(
            parse("sin(x"),
            Err(ParseError::UnbalancedParen { offset: 3 })
        );
        assert_eq!(
            parse("x + 1)"),
            Err(ParseError::UnbalancedParen { offset: 5 })
        );
        assert!(matches!(
            parse("x + * y"),
            Err(ParseError::UnexpectedToken { offset: 4, .. })
        ));
        assert!(matches!(
            parse(""),
            Err(ParseError::UnexpectedToken { offset: 0, .. })
        ));
        assert!(matches!(
            parse("x $ y"),
            Err(ParseError::UnexpectedToken { offset: 2, .. })
        ));
        assert!(matches!(
            parse("atan2(x)"),
            Err(ParseError::ArityMismatch {
                expected: 2,
                found: 1,
                ..
            })
        ));
    }
}
