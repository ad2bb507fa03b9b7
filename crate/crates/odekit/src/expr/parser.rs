//! Recursive-descent parser for the expression grammar:
//!
//! ```text
//! expr   := term (('+'|'-') term)*
//! term   := unary (('*'|'/') unary)*
//! unary  := '-' unary | power
//! power  := atom ('^' unary)?            right-associative
//! atom   := NUMBER | 'x' | 'y' | 's' | FUNC '(' expr ')' | '(' expr ')'
//! FUNC   := exp | ln | sin | cos | sqrt
//! ```
//!
//! `^` binds tighter than unary minus, so `-x^2` is `-(x^2)`. Exponents must
//! evaluate to rational constants; a positive constant base with a variable
//! exponent is rewritten as `exp(ln(base)*exponent)`. As an extension,
//! `ln(abs(u))` is accepted and maps to the `ln|u|` node, so every solver
//! output built from parseable node kinds reparses.

use crate::error::{Error, Result};
use crate::expr::{f64_to_rat, Expr, Symbol};

pub fn parse(input: &str) -> Result<Expr> {
    let tokens = lex(input)?;
    let mut p = Parser {
        tokens,
        pos: 0,
        end: input.len(),
    };
    let e = p.expr()?;
    match p.peek() {
        Token_::End => Ok(e),
        tok => Err(p.unexpected(tok, "end of input")),
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Kind {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
}

#[derive(Clone, Debug, PartialEq)]
struct Token {
    kind: Kind,
    offset: usize,
}

#[derive(Clone, Debug, PartialEq)]
enum TokenOrEnd {
    Tok(Token),
    End,
}

use TokenOrEnd as Token_;

fn lex(input: &str) -> Result<Vec<Token>> {
    let bytes = input.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let b = bytes[i];
        match b {
            b' ' | b'\t' | b'\r' | b'\n' => i += 1,
            b'+' | b'-' | b'*' | b'/' | b'^' | b'(' | b')' => {
                let kind = match b {
                    b'+' => Kind::Plus,
                    b'-' => Kind::Minus,
                    b'*' => Kind::Star,
                    b'/' => Kind::Slash,
                    b'^' => Kind::Caret,
                    b'(' => Kind::LParen,
                    _ => Kind::RParen,
                };
                out.push(Token { kind, offset: i });
                i += 1;
            }
            b'0'..=b'9' => {
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
                // Exponent part: only if followed by digits (an optional sign
                // in between), so `2exp(x)` still fails cleanly at `exp`.
                if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                    let mut j = i + 1;
                    if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                        j += 1;
                    }
                    if j < bytes.len() && bytes[j].is_ascii_digit() {
                        i = j;
                        while i < bytes.len() && bytes[i].is_ascii_digit() {
                            i += 1;
                        }
                    }
                }
                let text = &input[start..i];
                let value: f64 = text.parse().map_err(|_| Error::Syntax {
                    offset: start,
                    message: format!("bad numeric literal `{text}`"),
                })?;
                if !value.is_finite() {
                    return Err(Error::Syntax {
                        offset: start,
                        message: format!("numeric literal `{text}` overflows"),
                    });
                }
                out.push(Token {
                    kind: Kind::Num(value),
                    offset: start,
                });
            }
            b'a'..=b'z' | b'A'..=b'Z' => {
                let start = i;
                while i < bytes.len() && bytes[i].is_ascii_alphabetic() {
                    i += 1;
                }
                out.push(Token {
                    kind: Kind::Ident(input[start..i].to_string()),
                    offset: start,
                });
            }
            _ => {
                return Err(Error::Syntax {
                    offset: i,
                    message: format!("unexpected character `{}`", &input[i..i + 1]),
                })
            }
        }
    }
    Ok(out)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    end: usize,
}

impl Parser {
    fn peek(&self) -> Token_ {
        match self.tokens.get(self.pos) {
            Some(t) => Token_::Tok(t.clone()),
            None => Token_::End,
        }
    }

    fn peek_kind(&self) -> Option<&Kind> {
        self.tokens.get(self.pos).map(|t| &t.kind)
    }

    fn advance(&mut self) -> Option<Token> {
        let t = self.tokens.get(self.pos).cloned();
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn end_offset(&self) -> usize {
        self.end
    }

    fn unexpected(&self, tok: Token_, wanted: &str) -> Error {
        match tok {
            Token_::Tok(t) => Error::Syntax {
                offset: t.offset,
                message: format!("expected {wanted}, found `{}`", kind_text(&t.kind)),
            },
            Token_::End => Error::Syntax {
                offset: self.end_offset(),
                message: format!("expected {wanted}, found end of input"),
            },
        }
    }

    fn expect_rparen(&mut self) -> Result<()> {
        match self.peek_kind() {
            Some(Kind::RParen) => {
                self.pos += 1;
                Ok(())
            }
            _ => Err(self.unexpected(self.peek(), "`)`")),
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut acc = self.term()?;
        loop {
            match self.peek_kind() {
                Some(Kind::Plus) => {
                    self.pos += 1;
                    acc = acc + self.term()?;
                }
                Some(Kind::Minus) => {
                    self.pos += 1;
                    acc = acc - self.term()?;
                }
                _ => return Ok(acc),
            }
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut acc = self.unary()?;
        loop {
            match self.peek_kind() {
                Some(Kind::Star) => {
                    self.pos += 1;
                    acc = acc * self.unary()?;
                }
                Some(Kind::Slash) => {
                    self.pos += 1;
                    acc = acc / self.unary()?;
                }
                _ => return Ok(acc),
            }
        }
    }

    fn unary(&mut self) -> Result<Expr> {
        if matches!(self.peek_kind(), Some(Kind::Minus)) {
            self.pos += 1;
            let operand = self.unary()?;
            return Ok(-operand);
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.atom()?;
        if !matches!(self.peek_kind(), Some(Kind::Caret)) {
            return Ok(base);
        }
        let caret_offset = self.tokens[self.pos].offset;
        self.pos += 1;
        let exponent = self.unary()?;
        match exponent.constant_value().and_then(f64_to_rat) {
            Some(r) => Ok(base.pow(r)),
            None => {
                // A positive constant base still admits a variable exponent.
                match base.constant_value() {
                    Some(c) if c > 0.0 => Ok((Expr::num(c.ln()) * exponent).exp()),
                    _ => Err(Error::Syntax {
                        offset: caret_offset,
                        message: "exponent must evaluate to a rational constant".into(),
                    }),
                }
            }
        }
    }

    fn atom(&mut self) -> Result<Expr> {
        let tok = match self.advance() {
            Some(t) => t,
            None => return Err(self.unexpected(Token_::End, "an operand")),
        };
        match tok.kind {
            Kind::Num(v) => Ok(Expr::Constant(v)),
            Kind::LParen => {
                let inner = self.expr()?;
                self.expect_rparen()?;
                Ok(inner)
            }
            Kind::Ident(name) => match name.as_str() {
                "x" => Ok(Expr::Var(Symbol::X)),
                "y" => Ok(Expr::Var(Symbol::Y)),
                "s" => Ok(Expr::Var(Symbol::S)),
                "exp" | "ln" | "sin" | "cos" | "sqrt" => {
                    match self.peek_kind() {
                        Some(Kind::LParen) => self.pos += 1,
                        _ => return Err(self.unexpected(self.peek(), "`(`")),
                    }
                    if name == "ln" {
                        if let Some(e) = self.try_ln_abs()? {
                            return Ok(e);
                        }
                    }
                    let arg = self.expr()?;
                    self.expect_rparen()?;
                    Ok(match name.as_str() {
                        "exp" => arg.exp(),
                        "ln" => arg.ln(),
                        "sin" => arg.sin(),
                        "cos" => arg.cos(),
                        _ => arg.sqrt(),
                    })
                }
                "abs" => Err(Error::Syntax {
                    offset: tok.offset,
                    message: "`abs` is only supported directly under `ln`".into(),
                }),
                other => Err(Error::Syntax {
                    offset: tok.offset,
                    message: format!("unknown identifier `{other}`"),
                }),
            },
            kind => Err(Error::Syntax {
                offset: tok.offset,
                message: format!("expected an operand, found `{}`", kind_text(&kind)),
            }),
        }
    }

    /// After `ln(` has been consumed: if the argument is `abs(u)`, consume it
    /// (including both closing parens) and return the `ln|u|` node.
    fn try_ln_abs(&mut self) -> Result<Option<Expr>> {
        let is_abs_call = matches!(self.peek_kind(), Some(Kind::Ident(n)) if n == "abs")
            && matches!(
                self.tokens.get(self.pos + 1).map(|t| &t.kind),
                Some(Kind::LParen)
            );
        if !is_abs_call {
            return Ok(None);
        }
        self.pos += 2;
        let arg = self.expr()?;
        self.expect_rparen()?;
        self.expect_rparen()?;
        Ok(Some(arg.abs_ln()))
    }
}

fn kind_text(kind: &Kind) -> String {
    match kind {
        Kind::Num(v) => format!("{v}"),
        Kind::Ident(s) => s.clone(),
        Kind::Plus => "+".into(),
        Kind::Minus => "-".into(),
        Kind::Star => "*".into(),
        Kind::Slash => "/".into(),
        Kind::Caret => "^".into(),
        Kind::LParen => "(".into(),
        Kind::RParen => ")".into(),
    }
}
