use super::{Expr, ExprError, Exponent};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(String),
    Ident(String),
    Plus,
    Minus,
    Star,
    Caret,
    Slash,
    LParen,
    RParen,
    End,
}

struct Lexer<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn tokens(src: &'a str) -> Result<Vec<(Tok, usize)>, ExprError> {
        let mut lx = Lexer { src, pos: 0 };
        let mut out = Vec::new();
        loop {
            let (tok, at) = lx.next()?;
            let end = tok == Tok::End;
            out.push((tok, at));
            if end {
                return Ok(out);
            }
        }
    }

    fn peek_char(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn next(&mut self) -> Result<(Tok, usize), ExprError> {
        while let Some(c) = self.peek_char() {
            if c.is_whitespace() {
                self.pos += c.len_utf8();
            } else {
                break;
            }
        }
        let start = self.pos;
        let Some(c) = self.peek_char() else {
            return Ok((Tok::End, start));
        };
        let simple = match c {
            '+' => Some(Tok::Plus),
            '-' => Some(Tok::Minus),
            '*' => Some(Tok::Star),
            '^' => Some(Tok::Caret),
            '/' => Some(Tok::Slash),
            '(' => Some(Tok::LParen),
            ')' => Some(Tok::RParen),
            _ => None,
        };
        if let Some(t) = simple {
            self.pos += 1;
            return Ok((t, start));
        }
        if c.is_ascii_digit() || c == '.' {
            let rest = &self.src[start..];
            let mut len = 0;
            let mut seen_dot = false;
            for ch in rest.chars() {
                if ch.is_ascii_digit() {
                    len += 1;
                } else if ch == '.' && !seen_dot {
                    seen_dot = true;
                    len += 1;
                } else {
                    break;
                }
            }
            let text = &rest[..len];
            if text == "." {
                return Err(syntax(start, "expected digits"));
            }
            self.pos += len;
            return Ok((Tok::Num(text.to_string()), start));
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let rest = &self.src[start..];
            let len = rest
                .find(|ch: char| !(ch.is_ascii_alphanumeric() || ch == '_'))
                .unwrap_or(rest.len());
            self.pos += len;
            return Ok((Tok::Ident(rest[..len].to_string()), start));
        }
        Err(syntax(start, &format!("unexpected character `{c}`")))
    }
}

fn syntax(pos: usize, message: &str) -> ExprError {
    ExprError::Syntax {
        pos,
        message: message.to_string(),
    }
}

struct Parser<'v, S> {
    toks: Vec<(Tok, usize)>,
    at: usize,
    vars: &'v [S],
}

impl<S: AsRef<str>> Parser<'_, S> {
    fn peek(&self) -> &Tok {
        &self.toks[self.at].0
    }

    fn pos(&self) -> usize {
        self.toks[self.at].1
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.at].0.clone();
        if t != Tok::End {
            self.at += 1;
        }
        t
    }

    fn expect(&mut self, want: Tok, what: &str) -> Result<(), ExprError> {
        if *self.peek() == want {
            self.bump();
            Ok(())
        } else {
            Err(syntax(self.pos(), &format!("expected {what}")))
        }
    }

    fn expr(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Tok::Plus => {
                    self.bump();
                    lhs = lhs + self.term()?;
                }
                Tok::Minus => {
                    self.bump();
                    lhs = lhs - self.term()?;
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.unary()?;
        while *self.peek() == Tok::Star {
            self.bump();
            lhs = lhs * self.unary()?;
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, ExprError> {
        if *self.peek() == Tok::Minus {
            self.bump();
            return Ok(-self.unary()?);
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ExprError> {
        let base = self.atom()?;
        if *self.peek() != Tok::Caret {
            return Ok(base);
        }
        self.bump();
        let mut chain = vec![self.exponent_literal()?];
        while *self.peek() == Tok::Caret {
            self.bump();
            chain.push(self.exponent_literal()?);
        }
        // right-associative: a^b^c = a^(b^c), folded over literals
        let mut acc = chain.pop().expect("non-empty");
        while let Some((lit, pos)) = chain.pop() {
            acc = (raise(lit, acc.0, acc.1)?, pos);
        }
        Ok(base.pow(acc.0))
    }

    fn integer(&mut self) -> Result<i64, ExprError> {
        let pos = self.pos();
        match self.bump() {
            Tok::Num(text) if !text.contains('.') => text
                .parse::<i64>()
                .map_err(|_| syntax(pos, "integer literal out of range")),
            _ => Err(syntax(pos, "expected integer literal")),
        }
    }

    fn exponent_literal(&mut self) -> Result<(Exponent, usize), ExprError> {
        let pos = self.pos();
        match self.peek() {
            Tok::LParen => {
                self.bump();
                let sign = if *self.peek() == Tok::Minus {
                    self.bump();
                    -1
                } else {
                    1
                };
                let num = self.integer()?;
                let den = if *self.peek() == Tok::Slash {
                    self.bump();
                    self.integer()?
                } else {
                    1
                };
                self.expect(Tok::RParen, "`)` closing the exponent")?;
                Ok((Exponent::new(sign * num, den)?, pos))
            }
            Tok::Minus => {
                self.bump();
                Ok((Exponent::integer(-self.integer()?), pos))
            }
            Tok::Num(_) => Ok((Exponent::integer(self.integer()?), pos)),
            _ => Err(syntax(pos, "exponent must be an integer or a parenthesised rational")),
        }
    }

    fn atom(&mut self) -> Result<Expr, ExprError> {
        let pos = self.pos();
        match self.bump() {
            Tok::Num(text) => {
                let value: f64 = text
                    .parse()
                    .map_err(|_| syntax(pos, "malformed number"))?;
                if *self.peek() == Tok::Slash {
                    if text.contains('.') {
                        return Err(syntax(pos, "rational literal needs an integer numerator"));
                    }
                    self.bump();
                    let den = self.integer()?;
                    if den == 0 {
                        return Err(ExprError::ZeroDenominator);
                    }
                    return Ok(Expr::Const(value / den as f64));
                }
                Ok(Expr::Const(value))
            }
            Tok::Ident(name) => {
                if self.vars.iter().any(|v| v.as_ref() == name) {
                    Ok(Expr::var(&name))
                } else {
                    Err(ExprError::UndeclaredVariable { name, pos })
                }
            }
            Tok::LParen => {
                let inner = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(inner)
            }
            Tok::End => Err(syntax(pos, "unexpected end of input")),
            other => Err(syntax(pos, &format!("unexpected token {other:?}"))),
        }
    }
}

/// `base^power` for exponent literals; the power must be a non-negative integer.
fn raise(base: Exponent, power: Exponent, pos: usize) -> Result<Exponent, ExprError> {
    if !power.is_integer() || power.num() < 0 {
        return Err(syntax(pos, "stacked exponent must be a non-negative integer"));
    }
    let n = u32::try_from(power.num()).map_err(|_| syntax(pos, "exponent out of range"))?;
    let num = base.num().checked_pow(n);
    let den = base.den().checked_pow(n);
    match (num, den) {
        (Some(num), Some(den)) => Exponent::new(num, den),
        _ => Err(syntax(pos, "exponent out of range")),
    }
}

/// Parse `text` into an [`Expr`], rejecting identifiers outside `vars`.
pub fn parse_expr<S: AsRef<str>>(text: &str, vars: &[S]) -> Result<Expr, ExprError> {
    let toks = Lexer::tokens(text)?;
    let mut p = Parser { toks, at: 0, vars };
    let e = p.expr()?;
    if *p.peek() != Tok::End {
        return Err(syntax(p.pos(), "unexpected trailing input"));
    }
    Ok(e)
}
