//! Minimal arithmetic expression grammar for scenario-declared agent models
//! and leader inputs: `+ - * / ^`, parentheses, `sin`/`cos`/`abs`, the time
//! variable `t` and state variables `x1..x9`. No arbitrary code is loaded;
//! everything else is rejected at parse time.

use std::fmt;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    Time,
    /// 0-based state index.
    State(usize),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    Sin(Box<Expr>),
    Cos(Box<Expr>),
    Abs(Box<Expr>),
}

impl Expr {
    /// Parses `source`; `max_state` caps the usable state variables
    /// (0 for time-only expressions such as leader inputs).
    pub fn parse(source: &str, max_state: usize) -> Result<Expr> {
        let tokens = tokenize(source)?;
        let mut parser = Parser {
            tokens,
            pos: 0,
            max_state,
            source,
        };
        let expr = parser.expression()?;
        if parser.pos != parser.tokens.len() {
            return Err(Error::Expr(format!(
                "unexpected trailing input at offset {} in '{source}'",
                parser.pos
            )));
        }
        Ok(expr)
    }

    pub fn eval(&self, t: f64, state: &[f64]) -> f64 {
        match self {
            Expr::Const(c) => *c,
            Expr::Time => t,
            Expr::State(i) => state[*i],
            Expr::Neg(e) => -e.eval(t, state),
            Expr::Add(a, b) => a.eval(t, state) + b.eval(t, state),
            Expr::Sub(a, b) => a.eval(t, state) - b.eval(t, state),
            Expr::Mul(a, b) => a.eval(t, state) * b.eval(t, state),
            Expr::Div(a, b) => a.eval(t, state) / b.eval(t, state),
            Expr::Pow(a, b) => a.eval(t, state).powf(b.eval(t, state)),
            Expr::Sin(e) => e.eval(t, state).sin(),
            Expr::Cos(e) => e.eval(t, state).cos(),
            Expr::Abs(e) => e.eval(t, state).abs(),
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(c) => write!(f, "{c}"),
            Expr::Time => write!(f, "t"),
            Expr::State(i) => write!(f, "x{}", i + 1),
            Expr::Neg(e) => write!(f, "(-{e})"),
            Expr::Add(a, b) => write!(f, "({a} + {b})"),
            Expr::Sub(a, b) => write!(f, "({a} - {b})"),
            Expr::Mul(a, b) => write!(f, "({a} * {b})"),
            Expr::Div(a, b) => write!(f, "({a} / {b})"),
            Expr::Pow(a, b) => write!(f, "({a} ^ {b})"),
            Expr::Sin(e) => write!(f, "sin({e})"),
            Expr::Cos(e) => write!(f, "cos({e})"),
            Expr::Abs(e) => write!(f, "abs({e})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Number(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
}

fn tokenize(source: &str) -> Result<Vec<Token>> {
    let mut tokens = Vec::new();
    let bytes = source.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        match c {
            ' ' | '\t' | '\n' | '\r' => i += 1,
            '+' => {
                tokens.push(Token::Plus);
                i += 1;
            }
            '-' => {
                tokens.push(Token::Minus);
                i += 1;
            }
            '*' => {
                tokens.push(Token::Star);
                i += 1;
            }
            '/' => {
                tokens.push(Token::Slash);
                i += 1;
            }
            '^' => {
                tokens.push(Token::Caret);
                i += 1;
            }
            '(' => {
                tokens.push(Token::LParen);
                i += 1;
            }
            ')' => {
                tokens.push(Token::RParen);
                i += 1;
            }
            '0'..='9' | '.' => {
                let start = i;
                while i < bytes.len()
                    && matches!(bytes[i] as char, '0'..='9' | '.' | 'e' | 'E')
                {
                    // Signs are only part of the number right after an exponent.
                    i += 1;
                    if i < bytes.len()
                        && matches!(bytes[i] as char, '+' | '-')
                        && matches!(bytes[i - 1] as char, 'e' | 'E')
                    {
                        i += 1;
                    }
                }
                let text = &source[start..i];
                let value: f64 = text
                    .parse()
                    .map_err(|_| Error::Expr(format!("bad number literal '{text}'")))?;
                tokens.push(Token::Number(value));
            }
            'a'..='z' | 'A'..='Z' => {
                let start = i;
                while i < bytes.len() && (bytes[i] as char).is_ascii_alphanumeric() {
                    i += 1;
                }
                tokens.push(Token::Ident(source[start..i].to_string()));
            }
            other => {
                return Err(Error::Expr(format!(
                    "unexpected character '{other}' at offset {i}"
                )))
            }
        }
    }
    Ok(tokens)
}

struct Parser<'a> {
    tokens: Vec<Token>,
    pos: usize,
    max_state: usize,
    source: &'a str,
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn bump(&mut self) -> Option<Token> {
        let t = self.tokens.get(self.pos).cloned();
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn expression(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Some(Token::Plus) => {
                    self.pos += 1;
                    lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
                }
                Some(Token::Minus) => {
                    self.pos += 1;
                    lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        loop {
            match self.peek() {
                Some(Token::Star) => {
                    self.pos += 1;
                    lhs = Expr::Mul(Box::new(lhs), Box::new(self.unary()?));
                }
                Some(Token::Slash) => {
                    self.pos += 1;
                    lhs = Expr::Div(Box::new(lhs), Box::new(self.unary()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn unary(&mut self) -> Result<Expr> {
        if matches!(self.peek(), Some(Token::Minus)) {
            self.pos += 1;
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.primary()?;
        if matches!(self.peek(), Some(Token::Caret)) {
            self.pos += 1;
            // Right-associative; exponent may itself be unary-negated.
            let exponent = self.unary()?;
            return Ok(Expr::Pow(Box::new(base), Box::new(exponent)));
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<Expr> {
        match self.bump() {
            Some(Token::Number(v)) => Ok(Expr::Const(v)),
            Some(Token::LParen) => {
                let inner = self.expression()?;
                match self.bump() {
                    Some(Token::RParen) => Ok(inner),
                    _ => Err(Error::Expr(format!(
                        "missing closing parenthesis in '{}'",
                        self.source
                    ))),
                }
            }
            Some(Token::Ident(name)) => self.ident(name),
            other => Err(Error::Expr(format!(
                "expected a value, found {other:?} in '{}'",
                self.source
            ))),
        }
    }

    fn ident(&mut self, name: String) -> Result<Expr> {
        match name.as_str() {
            "t" => Ok(Expr::Time),
            "pi" => Ok(Expr::Const(std::f64::consts::PI)),
            "sin" | "cos" | "abs" => {
                match self.bump() {
                    Some(Token::LParen) => {}
                    _ => {
                        return Err(Error::Expr(format!(
                            "function '{name}' requires parentheses"
                        )))
                    }
                }
                let arg = Box::new(self.expression()?);
                match self.bump() {
                    Some(Token::RParen) => {}
                    _ => {
                        return Err(Error::Expr(format!(
                            "missing closing parenthesis after '{name}('"
                        )))
                    }
                }
                Ok(match name.as_str() {
                    "sin" => Expr::Sin(arg),
                    "cos" => Expr::Cos(arg),
                    _ => Expr::Abs(arg),
                })
            }
            _ => {
                if let Some(rest) = name.strip_prefix('x') {
                    if let Ok(index) = rest.parse::<usize>() {
                        if index >= 1 && index <= self.max_state {
                            return Ok(Expr::State(index - 1));
                        }
                        return Err(Error::Expr(format!(
                            "state variable '{name}' out of range (order is {})",
                            self.max_state
                        )));
                    }
                }
                Err(Error::Expr(format!("unknown identifier '{name}'")))
            }
        }
    }
}
