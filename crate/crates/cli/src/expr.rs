//! Tiny expression language for analytic problem data: arithmetic with
//! `x1`, `x2`, `pi`, the functions `sin`, `cos`, `exp`, `abs`, and the
//! two-argument `min`, `max`. Exponentiation via `^`.

use std::fmt;

#[derive(Debug, Clone)]
pub enum Expr {
    Num(f64),
    X1,
    X2,
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    Sin(Box<Expr>),
    Cos(Box<Expr>),
    Exp(Box<Expr>),
    Abs(Box<Expr>),
    Min(Box<Expr>, Box<Expr>),
    Max(Box<Expr>, Box<Expr>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseError {
    pub pos: usize,
    pub message: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "at byte {}: {}", self.pos, self.message)
    }
}

impl std::error::Error for ParseError {}

impl Expr {
    pub fn parse(text: &str) -> Result<Expr, ParseError> {
        let mut p = Parser { text: text.as_bytes(), pos: 0 };
        p.skip_ws();
        let e = p.expr()?;
        p.skip_ws();
        if p.pos != p.text.len() {
            return Err(p.err("unexpected trailing input"));
        }
        Ok(e)
    }

    pub fn eval(&self, x1: f64, x2: f64) -> f64 {
        match self {
            Expr::Num(c) => *c,
            Expr::X1 => x1,
            Expr::X2 => x2,
            Expr::Neg(e) => -e.eval(x1, x2),
            Expr::Add(a, b) => a.eval(x1, x2) + b.eval(x1, x2),
            Expr::Sub(a, b) => a.eval(x1, x2) - b.eval(x1, x2),
            Expr::Mul(a, b) => a.eval(x1, x2) * b.eval(x1, x2),
            Expr::Div(a, b) => a.eval(x1, x2) / b.eval(x1, x2),
            Expr::Pow(a, b) => a.eval(x1, x2).powf(b.eval(x1, x2)),
            Expr::Sin(e) => e.eval(x1, x2).sin(),
            Expr::Cos(e) => e.eval(x1, x2).cos(),
            Expr::Exp(e) => e.eval(x1, x2).exp(),
            Expr::Abs(e) => e.eval(x1, x2).abs(),
            Expr::Min(a, b) => a.eval(x1, x2).min(b.eval(x1, x2)),
            Expr::Max(a, b) => a.eval(x1, x2).max(b.eval(x1, x2)),
        }
    }
}

struct Parser<'a> {
    text: &'a [u8],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn err(&self, message: &str) -> ParseError {
        ParseError { pos: self.pos, message: message.into() }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.text.len() && self.text[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&self) -> Option<u8> {
        self.text.get(self.pos).copied()
    }

    fn eat(&mut self, c: u8) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            self.skip_ws();
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            if self.eat(b'+') {
                lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
            } else if self.eat(b'-') {
                lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.factor()?;
        loop {
            if self.eat(b'*') {
                lhs = Expr::Mul(Box::new(lhs), Box::new(self.factor()?));
            } else if self.eat(b'/') {
                lhs = Expr::Div(Box::new(lhs), Box::new(self.factor()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn factor(&mut self) -> Result<Expr, ParseError> {
        if self.eat(b'-') {
            return Ok(Expr::Neg(Box::new(self.factor()?)));
        }
        let base = self.atom()?;
        if self.eat(b'^') {
            // right-associative
            let exp = self.factor()?;
            return Ok(Expr::Pow(Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        self.skip_ws();
        match self.peek() {
            Some(b'(') => {
                self.eat(b'(');
                let e = self.expr()?;
                if !self.eat(b')') {
                    return Err(self.err("expected ')'"));
                }
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() => self.ident(),
            _ => Err(self.err("expected a number, name, or '('")),
        }
    }

    fn number(&mut self) -> Result<Expr, ParseError> {
        let start = self.pos;
        while let Some(c) = self.peek() {
            if c.is_ascii_digit() || c == b'.' {
                self.pos += 1;
            } else if (c == b'e' || c == b'E') && self.pos > start {
                // exponent with optional sign
                let save = self.pos;
                self.pos += 1;
                if matches!(self.peek(), Some(b'+') | Some(b'-')) {
                    self.pos += 1;
                }
                if !matches!(self.peek(), Some(d) if d.is_ascii_digit()) {
                    self.pos = save;
                    break;
                }
            } else {
                break;
            }
        }
        let s = std::str::from_utf8(&self.text[start..self.pos]).unwrap();
        let v: f64 = s.parse().map_err(|_| ParseError {
            pos: start,
            message: format!("invalid number '{s}'"),
        })?;
        self.skip_ws();
        Ok(Expr::Num(v))
    }

    fn ident(&mut self) -> Result<Expr, ParseError> {
        let start = self.pos;
        while let Some(c) = self.peek() {
            if c.is_ascii_alphanumeric() || c == b'_' {
                self.pos += 1;
            } else {
                break;
            }
        }
        let name = std::str::from_utf8(&self.text[start..self.pos]).unwrap().to_string();
        self.skip_ws();
        match name.as_str() {
            "x1" => Ok(Expr::X1),
            "x2" => Ok(Expr::X2),
            "pi" => Ok(Expr::Num(std::f64::consts::PI)),
            "sin" | "cos" | "exp" | "abs" => {
                if !self.eat(b'(') {
                    return Err(self.err("expected '(' after function name"));
                }
                let arg = self.expr()?;
                if !self.eat(b')') {
                    return Err(self.err("expected ')'"));
                }
                let arg = Box::new(arg);
                Ok(match name.as_str() {
                    "sin" => Expr::Sin(arg),
                    "cos" => Expr::Cos(arg),
                    "exp" => Expr::Exp(arg),
                    _ => Expr::Abs(arg),
                })
            }
            "min" | "max" => {
                if !self.eat(b'(') {
                    return Err(self.err("expected '(' after function name"));
                }
                let a = self.expr()?;
                if !self.eat(b',') {
                    return Err(self.err("expected ',' between arguments"));
                }
                let b = self.expr()?;
                if !self.eat(b')') {
                    return Err(self.err("expected ')'"));
                }
                Ok(if name == "min" {
                    Expr::Min(Box::new(a), Box::new(b))
                } else {
                    Expr::Max(Box::new(a), Box::new(b))
                })
            }
            other => Err(ParseError {
                pos: start,
                message: format!("unknown name '{other}' (expected x1, x2, pi, or a function)"),
            }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(s: &str, x1: f64, x2: f64) -> f64 {
        Expr::parse(s).unwrap().eval(x1, x2)
    }

    #[test]
    fn arithmetic_and_precedence() {
        assert_eq!(ev("1 + 2 * 3", 0.0, 0.0), 7.0);
        assert_eq!(ev("(1 + 2) * 3", 0.0, 0.0), 9.0);
        assert_eq!(ev("2 ^ 3 ^ 1", 0.0, 0.0), 8.0);
        assert_eq!(ev("-x1 + x2", 2.0, 5.0), 3.0);
        assert_eq!(ev("1 - 2 - 3", 0.0, 0.0), -4.0);
        assert_eq!(ev("1e-2 + 1E2", 0.0, 0.0), 100.01);
    }

    #[test]
    fn functions() {
        let x = 0.3;
        assert!((ev("sin(pi*x1)*sin(pi*x2)", x, 0.7)
            - (std::f64::consts::PI * x).sin() * (std::f64::consts::PI * 0.7).sin())
        .abs()
            < 1e-15);
        assert_eq!(ev("max(x1, x2)", 1.0, 2.0), 2.0);
        assert_eq!(ev("min(x1, -1)", 1.0, 0.0), -1.0);
        assert_eq!(ev("abs(-3)", 0.0, 0.0), 3.0);
        assert!((ev("exp(1)", 0.0, 0.0) - std::f64::consts::E).abs() < 1e-15);
    }

    #[test]
    fn rejects_garbage() {
        assert!(Expr::parse("x3").is_err());
        assert!(Expr::parse("sin x1").is_err());
        assert!(Expr::parse("1 +").is_err());
        assert!(Expr::parse("min(1)").is_err());
        assert!(Expr::parse("2 2").is_err());
    }
}
