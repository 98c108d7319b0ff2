//! Arithmetic expressions in the position `x` and state variables `w1..wn`.
//!
//! Grammar (usual precedence, `^` right associative):
//!
//! ```text
//! expr  := term (('+' | '-') term)*
//! term  := unary (('*' | '/') unary)*
//! unary := ('+' | '-') unary | power
//! power := atom ('^' unary)?
//! atom  := number | 'x' | 'w'<index> | 'pi' | 'e' | func '(' expr (',' expr)* ')' | '(' expr ')'
//! ```

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Tan,
    Exp,
    Ln,
    Sqrt,
    Abs,
    Tanh,
    Sinh,
    Cosh,
    Atan,
    Min,
    Max,
    Pow,
}

impl Func {
    fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "tan" => Func::Tan,
            "exp" => Func::Exp,
            "ln" | "log" => Func::Ln,
            "sqrt" => Func::Sqrt,
            "abs" => Func::Abs,
            "tanh" => Func::Tanh,
            "sinh" => Func::Sinh,
            "cosh" => Func::Cosh,
            "atan" => Func::Atan,
            "min" => Func::Min,
            "max" => Func::Max,
            "pow" => Func::Pow,
            _ => return None,
        })
    }

    fn arity(self) -> usize {
        match self {
            Func::Min | Func::Max | Func::Pow => 2,
            _ => 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Const(f64),
    X,
    /// State component, zero-based.
    W(usize),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    Call(Func, Vec<Expr>),
}

impl Expr {
    pub fn parse(src: &str) -> Result<Self> {
        Self::parse_in(src, "x")
    }

    /// Parses with `var` as the name of the scalar variable (for example `t`
    /// for time signals); `x` is then an unknown identifier.
    pub fn parse_in(src: &str, var: &str) -> Result<Self> {
        let tokens = tokenize(src)?;
        let mut p = Parser {
            tokens: &tokens,
            pos: 0,
            src,
            var,
        };
        let e = p.expr()?;
        if p.pos != tokens.len() {
            return Err(Error::Expression(format!(
                "unexpected trailing input in `{src}`"
            )));
        }
        Ok(e)
    }

    pub fn eval<T: Scalar>(&self, x: T, w: &[T]) -> T {
        match self {
            Expr::Const(c) => T::lit(*c),
            Expr::X => x,
            Expr::W(i) => w.get(*i).copied().unwrap_or_else(T::zero),
            Expr::Neg(a) => -a.eval(x, w),
            Expr::Add(a, b) => a.eval(x, w) + b.eval(x, w),
            Expr::Sub(a, b) => a.eval(x, w) - b.eval(x, w),
            Expr::Mul(a, b) => a.eval(x, w) * b.eval(x, w),
            Expr::Div(a, b) => a.eval(x, w) / b.eval(x, w),
            Expr::Pow(a, b) => {
                let base = a.eval(x, w);
                match **b {
                    Expr::Const(c) if c.fract() == 0.0 && c.abs() < 64.0 => base.powi(c as i32),
                    _ => base.powf(b.eval(x, w)),
                }
            }
            Expr::Call(f, args) => {
                let a = args[0].eval(x, w);
                match f {
                    Func::Sin => a.sin(),
                    Func::Cos => a.cos(),
                    Func::Tan => a.tan(),
                    Func::Exp => a.exp(),
                    Func::Ln => a.ln(),
                    Func::Sqrt => a.sqrt(),
                    Func::Abs => a.abs(),
                    Func::Tanh => a.tanh(),
                    Func::Sinh => a.sinh(),
                    Func::Cosh => a.cosh(),
                    Func::Atan => a.atan(),
                    Func::Min => a.min(args[1].eval(x, w)),
                    Func::Max => a.max(args[1].eval(x, w)),
                    Func::Pow => a.powf(args[1].eval(x, w)),
                }
            }
        }
    }

    /// Largest referenced state index plus one (0 when the expression does
    /// not depend on the state).
    pub fn state_arity(&self) -> usize {
        match self {
            Expr::Const(_) | Expr::X => 0,
            Expr::W(i) => i + 1,
            Expr::Neg(a) => a.state_arity(),
            Expr::Add(a, b)
            | Expr::Sub(a, b)
            | Expr::Mul(a, b)
            | Expr::Div(a, b)
            | Expr::Pow(a, b) => a.state_arity().max(b.state_arity()),
            Expr::Call(_, args) => args.iter().map(Expr::state_arity).max().unwrap_or(0),
        }
    }

    /// Constant value when the expression depends on neither `x` nor `w`.
    pub fn as_constant(&self) -> Option<f64> {
        fn depends(e: &Expr) -> bool {
            match e {
                Expr::Const(_) => false,
                Expr::X | Expr::W(_) => true,
                Expr::Neg(a) => depends(a),
                Expr::Add(a, b)
                | Expr::Sub(a, b)
                | Expr::Mul(a, b)
                | Expr::Div(a, b)
                | Expr::Pow(a, b) => depends(a) || depends(b),
                Expr::Call(_, args) => args.iter().any(depends),
            }
        }
        (!depends(self)).then(|| self.eval::<f64>(0.0, &[]))
    }
}

impl FromStr for Expr {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Expr::parse(s)
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(c) => write!(f, "{c}"),
            Expr::X => write!(f, "x"),
            Expr::W(i) => write!(f, "w{}", i + 1),
            Expr::Neg(a) => write!(f, "(-{a})"),
            Expr::Add(a, b) => write!(f, "({a} + {b})"),
            Expr::Sub(a, b) => write!(f, "({a} - {b})"),
            Expr::Mul(a, b) => write!(f, "({a} * {b})"),
            Expr::Div(a, b) => write!(f, "({a} / {b})"),
            Expr::Pow(a, b) => write!(f, "({a} ^ {b})"),
            Expr::Call(func, args) => {
                write!(f, "{}(", format!("{func:?}").to_lowercase())?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{a}")?;
                }
                write!(f, ")")
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Token {
    Num(f64),
    Ident(String),
    Op(char),
}

fn tokenize(src: &str) -> Result<Vec<Token>> {
    let chars: Vec<char> = src.chars().collect();
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
            // exponent part, e.g. 1e-3
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
            let v = text
                .parse::<f64>()
                .map_err(|_| Error::Expression(format!("bad number `{text}` in `{src}`")))?;
            out.push(Token::Num(v));
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
            return Err(Error::Expression(format!(
                "unexpected character `{c}` in `{src}`"
            )));
        }
    }
    Ok(out)
}

struct Parser<'a> {
    tokens: &'a [Token],
    pos: usize,
    src: &'a str,
    var: &'a str,
}

impl Parser<'_> {
    fn peek_op(&self) -> Option<char> {
        match self.tokens.get(self.pos) {
            Some(Token::Op(c)) => Some(*c),
            _ => None,
        }
    }

    fn expect(&mut self, op: char) -> Result<()> {
        if self.peek_op() == Some(op) {
            self.pos += 1;
            Ok(())
        } else {
            Err(Error::Expression(format!(
                "expected `{op}` in `{}`",
                self.src
            )))
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        while let Some(op @ ('+' | '-')) = self.peek_op() {
            self.pos += 1;
            let rhs = self.term()?;
            lhs = if op == '+' {
                Expr::Add(Box::new(lhs), Box::new(rhs))
            } else {
                Expr::Sub(Box::new(lhs), Box::new(rhs))
            };
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        while let Some(op @ ('*' | '/')) = self.peek_op() {
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = if op == '*' {
                Expr::Mul(Box::new(lhs), Box::new(rhs))
            } else {
                Expr::Div(Box::new(lhs), Box::new(rhs))
            };
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr> {
        match self.peek_op() {
            Some('-') => {
                self.pos += 1;
                Ok(Expr::Neg(Box::new(self.unary()?)))
            }
            Some('+') => {
                self.pos += 1;
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.atom()?;
        if self.peek_op() == Some('^') {
            self.pos += 1;
            let exp = self.unary()?;
            return Ok(Expr::Pow(Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr> {
        let tok = self
            .tokens
            .get(self.pos)
            .cloned()
            .ok_or_else(|| Error::Expression(format!("unexpected end of `{}`", self.src)))?;
        self.pos += 1;
        match tok {
            Token::Num(v) => Ok(Expr::Const(v)),
            Token::Op('(') => {
                let e = self.expr()?;
                self.expect(')')?;
                Ok(e)
            }
            Token::Op(c) => Err(Error::Expression(format!(
                "unexpected `{c}` in `{}`",
                self.src
            ))),
            Token::Ident(name) => self.identifier(&name),
        }
    }

    fn identifier(&mut self, name: &str) -> Result<Expr> {
        if name == self.var {
            return Ok(Expr::X);
        }
        match name {
            "pi" => return Ok(Expr::Const(std::f64::consts::PI)),
            "e" => return Ok(Expr::Const(std::f64::consts::E)),
            _ => {}
        }
        if let Some(idx) = name.strip_prefix('w').and_then(|s| s.parse::<usize>().ok()) {
            if idx == 0 {
                return Err(Error::Expression(
                    "state variables are numbered from w1".into(),
                ));
            }
            return Ok(Expr::W(idx - 1));
        }
        let func = Func::from_name(name).ok_or_else(|| {
            Error::Expression(format!("unknown identifier `{name}` in `{}`", self.src))
        })?;
        self.expect('(')?;
        let mut args = vec![self.expr()?];
        while self.peek_op() == Some(',') {
            self.pos += 1;
            args.push(self.expr()?);
        }
        self.expect(')')?;
        if args.len() != func.arity() {
            return Err(Error::Expression(format!(
                "`{name}` takes {} argument(s), got {}",
                func.arity(),
                args.len()
            )));
        }
        Ok(Expr::Call(func, args))
    }
}
