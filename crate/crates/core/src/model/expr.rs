//! A small expression language for coefficients c_l(t, x) and terminal
//! conditions φ(x).
//!
//! ```text
//! expr    := term (("+" | "-") term)*
//! term    := unary (("*" | "/") unary)*
//! unary   := "-" unary | power
//! power   := atom ("^" unary)?
//! atom    := number | "t" | "x" index | "pi" | "(" expr ")"
//!          | func "(" expr ")"
//!          | "norm2" "(" ")" | "sumx" "(" ")"
//!          | "phi_bump" "(" const "," const ")"
//!          | "psi_getoor" "(" const "," const ")"
//!          | "indicator_box" "(" const "," const ")"
//! func    := "exp" | "cos" | "sin" | "sqrt" | "ln" | "abs" | "pospart" | "step"
//! ```
//!
//! Coordinates are 1-based (`x1`, …, `xd`). `norm2()` is ‖x‖², `sumx()` is
//! x₁+…+x_d, `step(v)` is 1 for v ≥ 0 and 0 otherwise, and
//! `indicator_box(lo, hi)` is the indicator of [lo, hi]^d. The arguments of
//! `phi_bump`, `psi_getoor` and `indicator_box` must be constant and are
//! folded at parse time.

use std::fmt;

use thiserror::Error;

use crate::specfun::{phi_bump, GetoorPair};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExprError {
    #[error("syntax error at byte {offset}: expected {}, found {found}", .expected.join(" or "))]
    Syntax {
        offset: usize,
        expected: Vec<String>,
        found: String,
    },
    #[error("unknown identifier `{name}` at byte {offset}")]
    UnknownIdent { name: String, offset: usize },
    #[error("coordinate x{index} at byte {offset} exceeds dimension {d}")]
    Dimension {
        index: usize,
        d: usize,
        offset: usize,
    },
    #[error("`{func}` at byte {offset} takes {expected} argument(s), got {got}")]
    Arity {
        func: String,
        expected: usize,
        got: usize,
        offset: usize,
    },
    #[error("bad argument to `{func}` at byte {offset}: {detail}")]
    BadArgument {
        func: String,
        offset: usize,
        detail: String,
    },
    #[error("evaluation error: {0}")]
    Eval(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinOp {
    fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Pow => "^",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Exp,
    Cos,
    Sin,
    Sqrt,
    Ln,
    Abs,
    PosPart,
    Step,
}

impl Func {
    pub const ALL: [Func; 8] = [
        Func::Exp,
        Func::Cos,
        Func::Sin,
        Func::Sqrt,
        Func::Ln,
        Func::Abs,
        Func::PosPart,
        Func::Step,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Func::Exp => "exp",
            Func::Cos => "cos",
            Func::Sin => "sin",
            Func::Sqrt => "sqrt",
            Func::Ln => "ln",
            Func::Abs => "abs",
            Func::PosPart => "pospart",
            Func::Step => "step",
        }
    }

    fn from_name(name: &str) -> Option<Func> {
        Func::ALL.into_iter().find(|f| f.name() == name)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Time,
    /// 0-based coordinate index.
    Coord(usize),
    Neg(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
    Norm2,
    SumX,
    PhiBump {
        k: u32,
        alpha: f64,
    },
    PsiGetoor(GetoorPair),
    IndicatorBox {
        lo: f64,
        hi: f64,
    },
}

impl Expr {
    pub fn is_constant(&self) -> bool {
        match self {
            Expr::Num(_) => true,
            Expr::Neg(e) | Expr::Call(_, e) => e.is_constant(),
            Expr::Bin(_, a, b) => a.is_constant() && b.is_constant(),
            _ => false,
        }
    }

    pub fn eval(&self, t: f64, x: &[f64]) -> Result<f64, ExprError> {
        let v = match self {
            Expr::Num(v) => *v,
            Expr::Time => t,
            Expr::Coord(i) => *x.get(*i).ok_or_else(|| {
                ExprError::Eval(format!("x{} missing from a {}-vector", i + 1, x.len()))
            })?,
            Expr::Neg(e) => -e.eval(t, x)?,
            Expr::Bin(op, a, b) => {
                let (a, b) = (a.eval(t, x)?, b.eval(t, x)?);
                match op {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => a * b,
                    BinOp::Div => {
                        if b == 0.0 {
                            return Err(ExprError::Eval("division by zero".into()));
                        }
                        a / b
                    }
                    BinOp::Pow => power(a, b)?,
                }
            }
            Expr::Call(f, e) => {
                let v = e.eval(t, x)?;
                match f {
                    Func::Exp => v.exp(),
                    Func::Cos => v.cos(),
                    Func::Sin => v.sin(),
                    Func::Sqrt if v < 0.0 => return Err(ExprError::Eval(format!("sqrt({v})"))),
                    Func::Sqrt => v.sqrt(),
                    Func::Ln if v <= 0.0 => return Err(ExprError::Eval(format!("ln({v})"))),
                    Func::Ln => v.ln(),
                    Func::Abs => v.abs(),
                    Func::PosPart => v.max(0.0),
                    Func::Step => {
                        if v >= 0.0 {
                            1.0
                        } else {
                            0.0
                        }
                    }
                }
            }
            Expr::Norm2 => x.iter().map(|v| v * v).sum(),
            Expr::SumX => x.iter().sum(),
            Expr::PhiBump { k, alpha } => phi_bump(*k, *alpha, x),
            Expr::PsiGetoor(g) => g.psi(x).map_err(|e| ExprError::Eval(e.to_string()))?,
            Expr::IndicatorBox { lo, hi } => {
                if x.iter().all(|v| (lo..=hi).contains(&v)) {
                    1.0
                } else {
                    0.0
                }
            }
        };
        if v.is_finite() {
            Ok(v)
        } else {
            Err(ExprError::Eval(format!("non-finite value from `{self}`")))
        }
    }
}

fn power(a: f64, b: f64) -> Result<f64, ExprError> {
    if b == b.trunc() && b.abs() <= 1024.0 {
        if a == 0.0 && b < 0.0 {
            return Err(ExprError::Eval("division by zero in negative power".into()));
        }
        return Ok(a.powi(b as i32));
    }
    if a < 0.0 {
        return Err(ExprError::Eval(format!(
            "{a} raised to non-integer power {b}"
        )));
    }
    if a == 0.0 && b < 0.0 {
        return Err(ExprError::Eval("division by zero in negative power".into()));
    }
    Ok(a.powf(b))
}

/// Fully parenthesized; parsing the output yields an equal AST.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(v) if v.is_sign_negative() => write!(f, "({v})"),
            Expr::Num(v) => write!(f, "{v}"),
            Expr::Time => write!(f, "t"),
            Expr::Coord(i) => write!(f, "x{}", i + 1),
            Expr::Neg(e) => write!(f, "(-({e}))"),
            Expr::Bin(op, a, b) => write!(f, "({a} {} {b})", op.symbol()),
            Expr::Call(func, e) => write!(f, "{}({e})", func.name()),
            Expr::Norm2 => write!(f, "norm2()"),
            Expr::SumX => write!(f, "sumx()"),
            Expr::PhiBump { k, alpha } => write!(f, "phi_bump({k}, {alpha})"),
            Expr::PsiGetoor(g) => write!(f, "psi_getoor({}, {})", g.k(), g.alpha()),
            Expr::IndicatorBox { lo, hi } => write!(f, "indicator_box({lo}, {hi})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Sym(char),
    End,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Num(v) => write!(f, "number {v}"),
            Tok::Ident(s) => write!(f, "`{s}`"),
            Tok::Sym(c) => write!(f, "`{c}`"),
            Tok::End => write!(f, "end of input"),
        }
    }
}

fn lex(src: &str) -> Result<Vec<(Tok, usize)>, ExprError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        if c.is_ascii_whitespace() {
            i += 1;
        } else if c.is_ascii_digit()
            || (c == b'.' && bytes.get(i + 1).is_some_and(u8::is_ascii_digit))
        {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                i += 1;
            }
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
            let text = &src[start..i];
            let v: f64 = text.parse().map_err(|_| ExprError::Syntax {
                offset: start,
                expected: vec!["number".into()],
                found: format!("`{text}`"),
            })?;
            out.push((Tok::Num(v), start));
        } else if c.is_ascii_alphabetic() || c == b'_' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push((Tok::Ident(src[start..i].to_string()), start));
        } else if b"+-*/^(),".contains(&c) {
            out.push((Tok::Sym(c as char), i));
            i += 1;
        } else {
            let ch = src[i..].chars().next().unwrap_or('?');
            return Err(ExprError::Syntax {
                offset: i,
                expected: vec!["operator".into(), "operand".into()],
                found: format!("`{ch}`"),
            });
        }
    }
    out.push((Tok::End, src.len()));
    Ok(out)
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    d: usize,
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

    fn unexpected(&self, expected: &[&str]) -> ExprError {
        ExprError::Syntax {
            offset: self.offset(),
            expected: expected.iter().map(|s| s.to_string()).collect(),
            found: self.peek().to_string(),
        }
    }

    fn expect(&mut self, c: char) -> Result<(), ExprError> {
        if *self.peek() == Tok::Sym(c) {
            self.bump();
            Ok(())
        } else {
            let want = format!("`{c}`");
            Err(self.unexpected(&[want.as_str()]))
        }
    }

    fn expr(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Tok::Sym('+') => BinOp::Add,
                Tok::Sym('-') => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.term()?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn term(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Tok::Sym('*') => BinOp::Mul,
                Tok::Sym('/') => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.unary()?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn unary(&mut self) -> Result<Expr, ExprError> {
        if *self.peek() == Tok::Sym('-') {
            self.bump();
            // a literal directly after the sign is a negative number
            if let Tok::Num(v) = *self.peek() {
                if !matches!(self.toks.get(self.pos + 1), Some((Tok::Sym('^'), _))) {
                    self.bump();
                    return Ok(Expr::Num(-v));
                }
            }
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ExprError> {
        let base = self.atom()?;
        if *self.peek() == Tok::Sym('^') {
            self.bump();
            let exp = self.unary()?;
            return Ok(Expr::Bin(BinOp::Pow, Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn args(&mut self) -> Result<Vec<(Expr, usize)>, ExprError> {
        self.expect('(')?;
        let mut out = Vec::new();
        if *self.peek() == Tok::Sym(')') {
            self.bump();
            return Ok(out);
        }
        loop {
            let at = self.offset();
            out.push((self.expr()?, at));
            match self.peek() {
                Tok::Sym(',') => {
                    self.bump();
                }
                Tok::Sym(')') => {
                    self.bump();
                    return Ok(out);
                }
                _ => return Err(self.unexpected(&["`,`", "`)`"])),
            }
        }
    }

    fn const_args(&mut self, name: &str, at: usize, n: usize) -> Result<Vec<f64>, ExprError> {
        let args = self.args()?;
        if args.len() != n {
            return Err(ExprError::Arity {
                func: name.into(),
                expected: n,
                got: args.len(),
                offset: at,
            });
        }
        args.into_iter()
            .map(|(e, off)| {
                if !e.is_constant() {
                    return Err(ExprError::BadArgument {
                        func: name.into(),
                        offset: off,
                        detail: "argument must be a constant".into(),
                    });
                }
                e.eval(0.0, &[]).map_err(|err| ExprError::BadArgument {
                    func: name.into(),
                    offset: off,
                    detail: err.to_string(),
                })
            })
            .collect()
    }

    fn bump_args(&mut self, name: &str, at: usize) -> Result<(u32, f64), ExprError> {
        let v = self.const_args(name, at, 2)?;
        let bad = |detail: String| ExprError::BadArgument {
            func: name.into(),
            offset: at,
            detail,
        };
        if !(v[0] >= 0.0 && v[0] == v[0].trunc() && v[0] <= 1000.0) {
            return Err(bad(format!("k = {} is not a non-negative integer", v[0])));
        }
        if !(v[1] > 0.0 && v[1] <= 2.0) {
            return Err(bad(format!("alpha = {} not in (0, 2]", v[1])));
        }
        Ok((v[0] as u32, v[1]))
    }

    fn atom(&mut self) -> Result<Expr, ExprError> {
        let (tok, at) = self.bump();
        match tok {
            Tok::Num(v) => Ok(Expr::Num(v)),
            Tok::Sym('(') => {
                let e = self.expr()?;
                self.expect(')')?;
                Ok(e)
            }
            Tok::Ident(name) => self.ident(name, at),
            _ => Err(ExprError::Syntax {
                offset: at,
                expected: vec![
                    "number".into(),
                    "identifier".into(),
                    "`(`".into(),
                    "`-`".into(),
                ],
                found: tok.to_string(),
            }),
        }
    }

    fn ident(&mut self, name: String, at: usize) -> Result<Expr, ExprError> {
        match name.as_str() {
            "t" => return Ok(Expr::Time),
            "pi" => return Ok(Expr::Num(std::f64::consts::PI)),
            "norm2" | "sumx" => {
                let n = self.args()?.len();
                if n != 0 {
                    return Err(ExprError::Arity {
                        func: name,
                        expected: 0,
                        got: n,
                        offset: at,
                    });
                }
                return Ok(if name == "norm2" {
                    Expr::Norm2
                } else {
                    Expr::SumX
                });
            }
            "phi_bump" => {
                let (k, alpha) = self.bump_args(&name, at)?;
                return Ok(Expr::PhiBump { k, alpha });
            }
            "psi_getoor" => {
                let (k, alpha) = self.bump_args(&name, at)?;
                let g = GetoorPair::new(k, alpha, self.d).map_err(|e| ExprError::BadArgument {
                    func: name.clone(),
                    offset: at,
                    detail: e.to_string(),
                })?;
                return Ok(Expr::PsiGetoor(g));
            }
            "indicator_box" => {
                let v = self.const_args(&name, at, 2)?;
                if v[0] > v[1] {
                    return Err(ExprError::BadArgument {
                        func: name,
                        offset: at,
                        detail: format!("lo = {} exceeds hi = {}", v[0], v[1]),
                    });
                }
                return Ok(Expr::IndicatorBox { lo: v[0], hi: v[1] });
            }
            _ => {}
        }
        if let Some(func) = Func::from_name(&name) {
            let mut args = self.args()?;
            if args.len() != 1 {
                return Err(ExprError::Arity {
                    func: name,
                    expected: 1,
                    got: args.len(),
                    offset: at,
                });
            }
            return Ok(Expr::Call(func, Box::new(args.remove(0).0)));
        }
        if let Some(digits) = name.strip_prefix('x') {
            if !digits.is_empty() && digits.bytes().all(|b| b.is_ascii_digit()) {
                let index: usize = digits.parse().unwrap_or(usize::MAX);
                if index == 0 || index > self.d {
                    return Err(ExprError::Dimension {
                        index,
                        d: self.d,
                        offset: at,
                    });
                }
                return Ok(Expr::Coord(index - 1));
            }
        }
        Err(ExprError::UnknownIdent { name, offset: at })
    }
}

/// A parsed expression bound to a spatial dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct Expression {
    d: usize,
    ast: Expr,
}

impl Expression {
    pub fn parse(src: &str, d: usize) -> Result<Self, ExprError> {
        let mut p = Parser {
            toks: lex(src)?,
            pos: 0,
            d,
        };
        let ast = p.expr()?;
        if *p.peek() != Tok::End {
            return Err(p.unexpected(&["operator", "end of input"]));
        }
        Ok(Self { d, ast })
    }

    pub fn constant(v: f64, d: usize) -> Self {
        Self {
            d,
            ast: Expr::Num(v),
        }
    }

    pub fn from_ast(ast: Expr, d: usize) -> Self {
        Self { d, ast }
    }

    pub fn ast(&self) -> &Expr {
        &self.ast
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn eval(&self, t: f64, x: &[f64]) -> Result<f64, ExprError> {
        if x.len() != self.d {
            return Err(ExprError::Eval(format!(
                "point has dimension {}, expected {}",
                x.len(),
                self.d
            )));
        }
        self.ast.eval(t, x)
    }

    /// `Some(v)` when the expression does not depend on (t, x).
    pub fn as_constant(&self) -> Option<f64> {
        match self.ast {
            Expr::Num(v) => Some(v),
            _ => None,
        }
    }
}

impl fmt::Display for Expression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.ast.fmt(f)
    }
}

pub fn parse_expression(src: &str, d: usize) -> Result<Expression, ExprError> {
    Expression::parse(src, d)
}

pub fn eval_expression(e: &Expression, t: f64, x: &[f64]) -> Result<f64, ExprError> {
    e.eval(t, x)
}
