//! Arithmetic expressions in `t`, `x` and `v` for Lagrangians read from
//! problem files.
//!
//! Variables: `t`, `x1 … xd`, `v1 … vd` (`x` and `v` alias the first
//! coordinate), `speed` (`‖v‖`), `speed2` (`‖v‖²`), and the constants `pi`
//! and `inf`. Functions: `sqrt abs exp ln sin cos tan min max pow`.
//! Operators `+ - * / ^` with the usual precedence; `^` is right
//! associative and binds tighter than unary minus.
//!
//! ```
//! use transport_measures::expr::Expr;
//! let e = Expr::parse("0.5*speed2 - cos(2*pi*x1)").unwrap();
//! assert_eq!(e.eval(0.0, &[0.0], &[2.0]).unwrap(), 1.0);
//! ```

use std::fmt;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
enum Var {
    T,
    X(usize),
    V(usize),
    Speed,
    Speed2,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Func {
    Sqrt,
    Abs,
    Exp,
    Ln,
    Sin,
    Cos,
    Tan,
    Min,
    Max,
    Pow,
}

impl Func {
    fn lookup(name: &str) -> Option<(Self, usize)> {
        Some(match name {
            "sqrt" => (Self::Sqrt, 1),
            "abs" => (Self::Abs, 1),
            "exp" => (Self::Exp, 1),
            "ln" => (Self::Ln, 1),
            "sin" => (Self::Sin, 1),
            "cos" => (Self::Cos, 1),
            "tan" => (Self::Tan, 1),
            "min" => (Self::Min, 2),
            "max" => (Self::Max, 2),
            "pow" => (Self::Pow, 2),
            _ => return None,
        })
    }

    fn apply(self, a: &[f64]) -> f64 {
        match self {
            Self::Sqrt => a[0].sqrt(),
            Self::Abs => a[0].abs(),
            Self::Exp => a[0].exp(),
            Self::Ln => a[0].ln(),
            Self::Sin => a[0].sin(),
            Self::Cos => a[0].cos(),
            Self::Tan => a[0].tan(),
            Self::Min => a[0].min(a[1]),
            Self::Max => a[0].max(a[1]),
            Self::Pow => a[0].powf(a[1]),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Num(f64),
    Var(Var),
    Neg(Box<Node>),
    Bin(char, Box<Node>, Box<Node>),
    Call(Func, Vec<Node>),
}

/// A parsed expression.
#[derive(Clone, PartialEq)]
pub struct Expr {
    source: String,
    root: Node,
}

impl fmt::Debug for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Expr({:?})", self.source)
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Num(f64),
    Ident(String),
    Op(char),
}

fn tokenize(s: &str) -> Result<Vec<Token>> {
    let chars: Vec<char> = s.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    i = j;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let text: String = chars[start..i].iter().collect();
            let value = text.parse().map_err(|_| Error::Parse(format!("bad number {text:?} in expression")))?;
            out.push(Token::Num(value));
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push(Token::Ident(chars[start..i].iter().collect()));
        } else if "+-*/^(),".contains(c) {
            out.push(Token::Op(c));
            i += 1;
        } else {
            return Err(Error::Parse(format!("unexpected character {c:?} in expression")));
        }
    }
    Ok(out)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn eat(&mut self, op: char) -> bool {
        if self.peek() == Some(&Token::Op(op)) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, op: char) -> Result<()> {
        if self.eat(op) {
            Ok(())
        } else {
            Err(Error::Parse(format!("expected {op:?} in expression")))
        }
    }

    fn sum(&mut self) -> Result<Node> {
        let mut lhs = self.product()?;
        loop {
            let op = if self.eat('+') {
                '+'
            } else if self.eat('-') {
                '-'
            } else {
                return Ok(lhs);
            };
            lhs = Node::Bin(op, Box::new(lhs), Box::new(self.product()?));
        }
    }

    fn product(&mut self) -> Result<Node> {
        let mut lhs = self.unary()?;
        loop {
            let op = if self.eat('*') {
                '*'
            } else if self.eat('/') {
                '/'
            } else {
                return Ok(lhs);
            };
            lhs = Node::Bin(op, Box::new(lhs), Box::new(self.unary()?));
        }
    }

    fn unary(&mut self) -> Result<Node> {
        if self.eat('-') {
            return Ok(Node::Neg(Box::new(self.unary()?)));
        }
        if self.eat('+') {
            return self.unary();
        }
        self.power()
    }

    fn power(&mut self) -> Result<Node> {
        let base = self.atom()?;
        if self.eat('^') {
            return Ok(Node::Bin('^', Box::new(base), Box::new(self.unary()?)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Node> {
        match self.tokens.get(self.pos).cloned() {
            Some(Token::Num(v)) => {
                self.pos += 1;
                Ok(Node::Num(v))
            }
            Some(Token::Op('(')) => {
                self.pos += 1;
                let inner = self.sum()?;
                self.expect(')')?;
                Ok(inner)
            }
            Some(Token::Ident(name)) => {
                self.pos += 1;
                if self.eat('(') {
                    let (func, arity) =
                        Func::lookup(&name).ok_or_else(|| Error::Parse(format!("unknown function {name:?}")))?;
                    let mut args = vec![self.sum()?];
                    while self.eat(',') {
                        args.push(self.sum()?);
                    }
                    self.expect(')')?;
                    if args.len() != arity {
                        return Err(Error::Parse(format!("{name} takes {arity} argument(s), got {}", args.len())));
                    }
                    Ok(Node::Call(func, args))
                } else {
                    variable(&name)
                }
            }
            Some(t) => Err(Error::Parse(format!("unexpected token {t:?} in expression"))),
            None => Err(Error::Parse("expression ends early".into())),
        }
    }
}

fn variable(name: &str) -> Result<Node> {
    let indexed = |rest: &str| -> Option<usize> {
        if rest.is_empty() {
            return Some(0);
        }
        rest.parse::<usize>().ok().filter(|&i| i >= 1).map(|i| i - 1)
    };
    Ok(Node::Var(match name {
        "t" => Var::T,
        "speed" => Var::Speed,
        "speed2" => Var::Speed2,
        "pi" => return Ok(Node::Num(std::f64::consts::PI)),
        "inf" => return Ok(Node::Num(f64::INFINITY)),
        _ => match (name.chars().next(), indexed(&name[1..])) {
            (Some('x'), Some(i)) => Var::X(i),
            (Some('v'), Some(i)) => Var::V(i),
            _ => return Err(Error::Parse(format!("unknown variable {name:?}"))),
        },
    }))
}

impl Expr {
    pub fn parse(source: &str) -> Result<Self> {
        let mut p = Parser { tokens: tokenize(source)?, pos: 0 };
        let root = p.sum()?;
        if p.pos != p.tokens.len() {
            return Err(Error::Parse(format!("trailing input in expression {source:?}")));
        }
        Ok(Self { source: source.to_string(), root })
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    /// Largest coordinate index referenced, plus one.
    pub fn dimension_needed(&self) -> usize {
        fn walk(n: &Node) -> usize {
            match n {
                Node::Var(Var::X(i)) | Node::Var(Var::V(i)) => i + 1,
                Node::Neg(a) => walk(a),
                Node::Bin(_, a, b) => walk(a).max(walk(b)),
                Node::Call(_, args) => args.iter().map(walk).max().unwrap_or(0),
                _ => 0,
            }
        }
        walk(&self.root)
    }

    pub fn eval(&self, t: f64, x: &[f64], v: &[f64]) -> Result<f64> {
        let need = self.dimension_needed();
        if x.len() < need || v.len() < need {
            return Err(Error::Evaluation(format!("expression {:?} needs dimension {need}", self.source)));
        }
        Ok(self.eval_unchecked(t, x, v))
    }

    /// Evaluation without the dimension check; callers guarantee it.
    pub(crate) fn eval_unchecked(&self, t: f64, x: &[f64], v: &[f64]) -> f64 {
        fn go(n: &Node, t: f64, x: &[f64], v: &[f64]) -> f64 {
            match n {
                Node::Num(c) => *c,
                Node::Var(Var::T) => t,
                Node::Var(Var::X(i)) => x[*i],
                Node::Var(Var::V(i)) => v[*i],
                Node::Var(Var::Speed2) => v.iter().map(|c| c * c).sum(),
                Node::Var(Var::Speed) => v.iter().map(|c| c * c).sum::<f64>().sqrt(),
                Node::Neg(a) => -go(a, t, x, v),
                Node::Bin(op, a, b) => {
                    let (a, b) = (go(a, t, x, v), go(b, t, x, v));
                    match op {
                        '+' => a + b,
                        '-' => a - b,
                        '*' => a * b,
                        '/' => a / b,
                        _ => a.powf(b),
                    }
                }
                Node::Call(f, args) => {
                    let vals: Vec<f64> = args.iter().map(|a| go(a, t, x, v)).collect();
                    f.apply(&vals)
                }
            }
        }
        go(&self.root, t, x, v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn at(s: &str, t: f64, x: &[f64], v: &[f64]) -> f64 {
        Expr::parse(s).unwrap().eval(t, x, v).unwrap()
    }

    #[test]
    fn precedence() {
        assert_eq!(at("1 + 2 * 3", 0.0, &[], &[]), 7.0);
        assert_eq!(at("-2^2", 0.0, &[], &[]), -4.0);
        assert_eq!(at("2^3^2", 0.0, &[], &[]), 512.0);
        assert_eq!(at("(1 + 2) * 3", 0.0, &[], &[]), 9.0);
        assert_eq!(at("8 / 4 / 2", 0.0, &[], &[]), 1.0);
        assert_eq!(at("1e-3 * 1E3", 0.0, &[], &[]), 1.0);
    }

    #[test]
    fn variables_and_functions() {
        assert_eq!(at("t + x2 * v1", 0.5, &[1.0, 3.0], &[2.0, 0.0]), 6.5);
        assert_eq!(at("speed", 0.0, &[0.0, 0.0], &[3.0, 4.0]), 5.0);
        assert_eq!(at("max(x, v) + min(1, 2)", 0.0, &[4.0], &[-1.0]), 5.0);
        assert_eq!(at("inf", 0.0, &[], &[]), f64::INFINITY);
    }

    #[test]
    fn errors() {
        assert!(Expr::parse("1 +").is_err());
        assert!(Expr::parse("foo").is_err());
        assert!(Expr::parse("sqrt(1, 2)").is_err());
        assert!(Expr::parse("x0").is_err());
        assert!(Expr::parse("1 2").is_err());
        assert!(Expr::parse("x3").unwrap().eval(0.0, &[1.0], &[1.0]).is_err());
    }
}
