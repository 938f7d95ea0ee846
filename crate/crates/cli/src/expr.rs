//! Tiny arithmetic grammar for time-indexed signals: numbers, the step
//! variable `k`, + - * /, parentheses, unary minus, and sin/cos/sqrt.
//! Enough to spell signals like "1500*sin(2*k+1)" or "2000 + k/(k+1)".

use std::fmt;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ExprError {
    #[error("unexpected character '{ch}' at byte {at} in expression")]
    BadChar { ch: char, at: usize },
    #[error("unexpected end of expression")]
    UnexpectedEnd,
    #[error("expected '{expected}' at byte {at}")]
    Expected { expected: char, at: usize },
    #[error("unknown function '{name}'")]
    UnknownFunction { name: String },
    #[error("malformed number at byte {at}")]
    BadNumber { at: usize },
    #[error("trailing input at byte {at}")]
    Trailing { at: usize },
}

#[derive(Clone, Debug, PartialEq)]
enum Node {
    Num(f64),
    K,
    Neg(Box<Node>),
    Add(Box<Node>, Box<Node>),
    Sub(Box<Node>, Box<Node>),
    Mul(Box<Node>, Box<Node>),
    Div(Box<Node>, Box<Node>),
    Sin(Box<Node>),
    Cos(Box<Node>),
    Sqrt(Box<Node>),
}

/// A parsed expression over the step index `k`.
#[derive(Clone, Debug, PartialEq)]
pub struct Expr {
    root: Node,
    source: String,
}

impl Expr {
    pub fn parse(src: &str) -> Result<Expr, ExprError> {
        let mut p = Parser {
            bytes: src.as_bytes(),
            pos: 0,
        };
        p.skip_ws();
        let root = p.expr()?;
        p.skip_ws();
        if p.pos != p.bytes.len() {
            return Err(ExprError::Trailing { at: p.pos });
        }
        Ok(Expr {
            root,
            source: src.to_string(),
        })
    }

    pub fn eval(&self, k: usize) -> f64 {
        fn go(n: &Node, k: f64) -> f64 {
            match n {
                Node::Num(v) => *v,
                Node::K => k,
                Node::Neg(a) => -go(a, k),
                Node::Add(a, b) => go(a, k) + go(b, k),
                Node::Sub(a, b) => go(a, k) - go(b, k),
                Node::Mul(a, b) => go(a, k) * go(b, k),
                Node::Div(a, b) => go(a, k) / go(b, k),
                Node::Sin(a) => go(a, k).sin(),
                Node::Cos(a) => go(a, k).cos(),
                Node::Sqrt(a) => go(a, k).sqrt(),
            }
        }
        go(&self.root, k as f64)
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.source)
    }
}

struct Parser<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn skip_ws(&mut self) {
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&self) -> Option<u8> {
        self.bytes.get(self.pos).copied()
    }

    fn expr(&mut self) -> Result<Node, ExprError> {
        let mut node = self.term()?;
        loop {
            self.skip_ws();
            match self.peek() {
                Some(b'+') => {
                    self.pos += 1;
                    node = Node::Add(Box::new(node), Box::new(self.term()?));
                }
                Some(b'-') => {
                    self.pos += 1;
                    node = Node::Sub(Box::new(node), Box::new(self.term()?));
                }
                _ => return Ok(node),
            }
        }
    }

    fn term(&mut self) -> Result<Node, ExprError> {
        let mut node = self.factor()?;
        loop {
            self.skip_ws();
            match self.peek() {
                Some(b'*') => {
                    self.pos += 1;
                    node = Node::Mul(Box::new(node), Box::new(self.factor()?));
                }
                Some(b'/') => {
                    self.pos += 1;
                    node = Node::Div(Box::new(node), Box::new(self.factor()?));
                }
                _ => return Ok(node),
            }
        }
    }

    fn factor(&mut self) -> Result<Node, ExprError> {
        self.skip_ws();
        if self.peek() == Some(b'-') {
            self.pos += 1;
            return Ok(Node::Neg(Box::new(self.factor()?)));
        }
        self.atom()
    }

    fn atom(&mut self) -> Result<Node, ExprError> {
        self.skip_ws();
        match self.peek() {
            None => Err(ExprError::UnexpectedEnd),
            Some(b'(') => {
                self.pos += 1;
                let inner = self.expr()?;
                self.expect(b')')?;
                Ok(inner)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() => self.ident(),
            Some(c) => Err(ExprError::BadChar {
                ch: c as char,
                at: self.pos,
            }),
        }
    }

    fn expect(&mut self, c: u8) -> Result<(), ExprError> {
        self.skip_ws();
        if self.peek() == Some(c) {
            self.pos += 1;
            Ok(())
        } else {
            Err(ExprError::Expected {
                expected: c as char,
                at: self.pos,
            })
        }
    }

    fn number(&mut self) -> Result<Node, ExprError> {
        let start = self.pos;
        while let Some(c) = self.peek() {
            if c.is_ascii_digit() || c == b'.' {
                self.pos += 1;
            } else {
                break;
            }
        }
        // Optional exponent.
        if matches!(self.peek(), Some(b'e') | Some(b'E')) {
            let mark = self.pos;
            self.pos += 1;
            if matches!(self.peek(), Some(b'+') | Some(b'-')) {
                self.pos += 1;
            }
            if matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
                while matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
                    self.pos += 1;
                }
            } else {
                self.pos = mark; // 'e' belonged to something else; not valid here
            }
        }
        let text = std::str::from_utf8(&self.bytes[start..self.pos]).unwrap();
        text.parse::<f64>()
            .map(Node::Num)
            .map_err(|_| ExprError::BadNumber { at: start })
    }

    fn ident(&mut self) -> Result<Node, ExprError> {
        let start = self.pos;
        while matches!(self.peek(), Some(c) if c.is_ascii_alphanumeric() || c == b'_') {
            self.pos += 1;
        }
        let name = std::str::from_utf8(&self.bytes[start..self.pos]).unwrap();
        match name {
            "k" => Ok(Node::K),
            "sin" | "cos" | "sqrt" => {
                self.expect(b'(')?;
                let arg = Box::new(self.expr()?);
                self.expect(b')')?;
                Ok(match name {
                    "sin" => Node::Sin(arg),
                    "cos" => Node::Cos(arg),
                    _ => Node::Sqrt(arg),
                })
            }
            _ => Err(ExprError::UnknownFunction {
                name: name.to_string(),
            }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn attack_signal_shapes_evaluate() {
        let e = Expr::parse("1500*sin(2*k+1)").unwrap();
        assert!((e.eval(3) - 1500.0 * (7.0f64).sin()).abs() < 1e-12);
        let e = Expr::parse("2000 + k/(k+1)").unwrap();
        assert!((e.eval(4) - (2000.0 + 4.0 / 5.0)).abs() < 1e-12);
        let e = Expr::parse("125 + sqrt(k)").unwrap();
        assert!((e.eval(9) - 128.0).abs() < 1e-12);
        let e = Expr::parse("234*sin(k+1) - 143*cos(k)").unwrap();
        assert!((e.eval(0) - (234.0 * 1.0f64.sin() - 143.0)).abs() < 1e-12);
    }

    #[test]
    fn precedence_and_unary_minus() {
        assert_eq!(Expr::parse("2+3*4").unwrap().eval(0), 14.0);
        assert_eq!(Expr::parse("(2+3)*4").unwrap().eval(0), 20.0);
        assert_eq!(Expr::parse("-2*3").unwrap().eval(0), -6.0);
        assert_eq!(Expr::parse("1-k").unwrap().eval(5), -4.0);
        assert_eq!(Expr::parse("--4").unwrap().eval(0), 4.0);
        assert_eq!(Expr::parse("1e2 + 1").unwrap().eval(0), 101.0);
    }

    #[test]
    fn errors_point_at_the_problem() {
        assert_eq!(
            Expr::parse("2 * %3").unwrap_err(),
            ExprError::BadChar { ch: '%', at: 4 }
        );
        // After a complete expression, a stray operator is trailing input.
        assert_eq!(
            Expr::parse("2 % 3").unwrap_err(),
            ExprError::Trailing { at: 2 }
        );
        assert_eq!(
            Expr::parse("tan(k)").unwrap_err(),
            ExprError::UnknownFunction {
                name: "tan".into()
            }
        );
        assert_eq!(
            Expr::parse("(1+2").unwrap_err(),
            ExprError::Expected {
                expected: ')',
                at: 4
            }
        );
        assert!(Expr::parse("").is_err());
        assert_eq!(
            Expr::parse("1 2").unwrap_err(),
            ExprError::Trailing { at: 2 }
        );
    }

    #[test]
    fn source_text_is_preserved() {
        let e = Expr::parse("9.5 + 0.1*sin(k)").unwrap();
        assert_eq!(e.to_string(), "9.5 + 0.1*sin(k)");
    }
}
