//! Recursive-descent parser.
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := unary (('*' | '/') unary)*
//! unary  := '-' unary | power
//! power  := atom ('^' expo)?
//! expo   := '-' expo | power
//! atom   := number | 'x' | 'y'<digits> | func '(' expr ')' | '(' expr ')'
//! ```

use super::{BinOp, Expr, Func, ParseError, ParseErrorKind, Var};

pub fn parse_expr(src: &str) -> Result<Expr, ParseError> {
    let mut p = Parser { src, pos: 0 };
    p.skip_ws();
    if p.at_end() {
        return Err(p.error(ParseErrorKind::Empty));
    }
    let e = p.expr()?;
    p.skip_ws();
    if !p.at_end() {
        let c = p.peek().unwrap();
        return Err(p.error(ParseErrorKind::UnexpectedChar(c)));
    }
    Ok(e)
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Parser<'a> {
    fn error(&self, kind: ParseErrorKind) -> ParseError {
        ParseError { offset: self.pos, kind }
    }

    fn at_end(&self) -> bool {
        self.pos >= self.src.len()
    }

    fn peek(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn skip_ws(&mut self) {
        while let Some(c) = self.peek() {
            if c.is_whitespace() {
                self.pos += c.len_utf8();
            } else {
                break;
            }
        }
    }

    /// Consumes `c` if it is the next non-blank character.
    fn eat(&mut self, c: char) -> bool {
        self.skip_ws();
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            let op = if self.eat('+') {
                BinOp::Add
            } else if self.eat('-') {
                BinOp::Sub
            } else {
                return Ok(lhs);
            };
            let rhs = self.term()?;
            lhs = Expr::bin(op, lhs, rhs);
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            let op = if self.eat('*') {
                BinOp::Mul
            } else if self.eat('/') {
                BinOp::Div
            } else {
                return Ok(lhs);
            };
            let rhs = self.unary()?;
            lhs = Expr::bin(op, lhs, rhs);
        }
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if self.eat('-') {
            Ok(Expr::neg(self.unary()?))
        } else {
            self.power()
        }
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.atom()?;
        if self.eat('^') {
            let exponent = self.exponent()?;
            Ok(Expr::bin(BinOp::Pow, base, exponent))
        } else {
            Ok(base)
        }
    }

    fn exponent(&mut self) -> Result<Expr, ParseError> {
        if self.eat('-') {
            Ok(Expr::neg(self.exponent()?))
        } else {
            self.power()
        }
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        self.skip_ws();
        let Some(c) = self.peek() else {
            return Err(self.error(ParseErrorKind::UnexpectedEnd));
        };
        if c == '(' {
            self.pos += 1;
            let e = self.expr()?;
            if !self.eat(')') {
                return Err(self.unexpected());
            }
            Ok(e)
        } else if c.is_ascii_digit() || c == '.' {
            self.number()
        } else if c.is_ascii_alphabetic() || c == '_' {
            self.identifier()
        } else {
            Err(self.error(ParseErrorKind::UnexpectedChar(c)))
        }
    }

    fn unexpected(&mut self) -> ParseError {
        self.skip_ws();
        match self.peek() {
            None => self.error(ParseErrorKind::UnexpectedEnd),
            Some(c) => self.error(ParseErrorKind::UnexpectedChar(c)),
        }
    }

    fn take_while(&mut self, pred: impl Fn(u8) -> bool) {
        let bytes = self.src.as_bytes();
        while self.pos < bytes.len() && pred(bytes[self.pos]) {
            self.pos += 1;
        }
    }

    fn number(&mut self) -> Result<Expr, ParseError> {
        let start = self.pos;
        let bytes = self.src.as_bytes();
        self.take_while(|b| b.is_ascii_digit());
        if self.pos < bytes.len() && bytes[self.pos] == b'.' {
            self.pos += 1;
            self.take_while(|b| b.is_ascii_digit());
        }
        if self.pos < bytes.len() && matches!(bytes[self.pos], b'e' | b'E') {
            let save = self.pos;
            self.pos += 1;
            if self.pos < bytes.len() && matches!(bytes[self.pos], b'+' | b'-') {
                self.pos += 1;
            }
            let digits = self.pos;
            self.take_while(|b| b.is_ascii_digit());
            if self.pos == digits {
                // not an exponent after all
                self.pos = save;
            }
        }
        let text = &self.src[start..self.pos];
        text.parse::<f64>().map(Expr::Num).map_err(|_| ParseError {
            offset: start,
            kind: ParseErrorKind::InvalidNumber(text.to_string()),
        })
    }

    fn identifier(&mut self) -> Result<Expr, ParseError> {
        let start = self.pos;
        self.take_while(|b| b.is_ascii_alphanumeric() || b == b'_');
        let name = &self.src[start..self.pos];
        let save = self.pos;
        if self.eat('(') {
            let func = Func::from_name(name).ok_or(ParseError {
                offset: start,
                kind: ParseErrorKind::UnknownFunction(name.to_string()),
            })?;
            let arg = self.expr()?;
            if !self.eat(')') {
                return Err(self.unexpected());
            }
            return Ok(Expr::call(func, arg));
        }
        self.pos = save;
        parse_var(name).map(Expr::Var).ok_or(ParseError {
            offset: start,
            kind: ParseErrorKind::UnknownVariable(name.to_string()),
        })
    }
}

fn parse_var(name: &str) -> Option<Var> {
    if name == "x" {
        return Some(Var::X);
    }
    let digits = name.strip_prefix('y')?;
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    digits.parse().ok().map(Var::Y)
}
