//! Closed-form scalar fields on the plane.
//!
//! Fields are small expression trees over the coordinates, constants, the
//! elementary functions and the face functions `l1 .. lN` of a polytope. They
//! evaluate pointwise (optionally with the gradient, by forward-mode
//! differentiation) so that edge restrictions and quadrature can sample them
//! anywhere without interpolation.
//!
//! Grammar:
//!
//! ```text
//! expr  := term (("+" | "-") term)*
//! term  := unary (("*" | "/") unary)*
//! unary := ("-" | "+") unary | power
//! power := atom ("^" unary)?
//! atom  := number | "x" | "y" | "p" | "pi" | "e" | "l" INDEX
//!        | FUNC "(" expr ("," expr)* ")" | "(" expr ")"
//! ```
//!
//! `p` is an alias of `x` for fields on the `(p, y)` half-plane. Functions:
//! `exp log ln sqrt sin cos tan abs xlogx pow min max`.

use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::geometry::{HalfPlane, Polytope, Vec2};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Func {
    Exp,
    Log,
    Sqrt,
    Sin,
    Cos,
    Tan,
    Abs,
    /// `t log t`, extended by 0 at `t = 0`.
    Xlogx,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Const(f64),
    X,
    Y,
    /// `l_i` with a zero-based face index.
    Face(usize),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
    Min(Box<Expr>, Box<Expr>),
    Max(Box<Expr>, Box<Expr>),
    Sum(Vec<Expr>),
    Product(Vec<Expr>),
}

/// Value with its gradient.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Dual {
    pub v: f64,
    pub dx: f64,
    pub dy: f64,
}

impl Dual {
    fn constant(v: f64) -> Self {
        Self { v, dx: 0.0, dy: 0.0 }
    }

    fn chain(self, v: f64, d: f64) -> Self {
        Self {
            v,
            dx: d * self.dx,
            dy: d * self.dy,
        }
    }

    fn powd(self, e: Dual) -> Self {
        if e.dx == 0.0 && e.dy == 0.0 {
            let k = e.v;
            let v = self.v.powf(k);
            let d = if k == 0.0 { 0.0 } else { k * self.v.powf(k - 1.0) };
            return self.chain(v, d);
        }
        let v = self.v.powf(e.v);
        let ln = self.v.ln();
        Self {
            v,
            dx: v * (e.dx * ln + e.v * self.dx / self.v),
            dy: v * (e.dy * ln + e.v * self.dy / self.v),
        }
    }
}

impl Add for Dual {
    type Output = Dual;
    fn add(self, o: Dual) -> Dual {
        Dual {
            v: self.v + o.v,
            dx: self.dx + o.dx,
            dy: self.dy + o.dy,
        }
    }
}

impl Sub for Dual {
    type Output = Dual;
    fn sub(self, o: Dual) -> Dual {
        Dual {
            v: self.v - o.v,
            dx: self.dx - o.dx,
            dy: self.dy - o.dy,
        }
    }
}

impl Mul for Dual {
    type Output = Dual;
    fn mul(self, o: Dual) -> Dual {
        Dual {
            v: self.v * o.v,
            dx: self.dx * o.v + self.v * o.dx,
            dy: self.dy * o.v + self.v * o.dy,
        }
    }
}

impl Div for Dual {
    type Output = Dual;
    fn div(self, o: Dual) -> Dual {
        let inv = 1.0 / o.v;
        Dual {
            v: self.v * inv,
            dx: (self.dx - self.v * inv * o.dx) * inv,
            dy: (self.dy - self.v * inv * o.dy) * inv,
        }
    }
}

impl Neg for Dual {
    type Output = Dual;
    fn neg(self) -> Dual {
        Dual {
            v: -self.v,
            dx: -self.dx,
            dy: -self.dy,
        }
    }
}

impl Expr {
    pub fn constant(v: f64) -> Self {
        Expr::Const(v)
    }

    /// Largest face index referenced, if any.
    fn max_face(&self) -> Option<usize> {
        use Expr::*;
        match self {
            Const(_) | X | Y => None,
            Face(i) => Some(*i),
            Neg(a) | Call(_, a) => a.max_face(),
            Add(a, b) | Sub(a, b) | Mul(a, b) | Div(a, b) | Pow(a, b) | Min(a, b) | Max(a, b) => {
                a.max_face().max(b.max_face())
            }
            Sum(v) | Product(v) => v.iter().filter_map(|e| e.max_face()).max(),
        }
    }

    pub fn eval(&self, x: f64, y: f64, faces: &[HalfPlane]) -> f64 {
        use Expr::*;
        match self {
            Const(c) => *c,
            X => x,
            Y => y,
            Face(i) => faces[*i].eval(&Vec2::new(x, y)),
            Neg(a) => -a.eval(x, y, faces),
            Add(a, b) => a.eval(x, y, faces) + b.eval(x, y, faces),
            Sub(a, b) => a.eval(x, y, faces) - b.eval(x, y, faces),
            Mul(a, b) => a.eval(x, y, faces) * b.eval(x, y, faces),
            Div(a, b) => a.eval(x, y, faces) / b.eval(x, y, faces),
            Pow(a, b) => a.eval(x, y, faces).powf(b.eval(x, y, faces)),
            Call(f, a) => {
                let v = a.eval(x, y, faces);
                match f {
                    Func::Exp => v.exp(),
                    Func::Log => v.ln(),
                    Func::Sqrt => v.sqrt(),
                    Func::Sin => v.sin(),
                    Func::Cos => v.cos(),
                    Func::Tan => v.tan(),
                    Func::Abs => v.abs(),
                    Func::Xlogx => xlogx(v),
                }
            }
            Min(a, b) => a.eval(x, y, faces).min(b.eval(x, y, faces)),
            Max(a, b) => a.eval(x, y, faces).max(b.eval(x, y, faces)),
            Sum(v) => v.iter().map(|e| e.eval(x, y, faces)).sum(),
            Product(v) => v.iter().map(|e| e.eval(x, y, faces)).product(),
        }
    }

    pub fn eval_dual(&self, x: f64, y: f64, faces: &[HalfPlane]) -> Dual {
        use Expr::*;
        match self {
            Const(c) => Dual::constant(*c),
            X => Dual { v: x, dx: 1.0, dy: 0.0 },
            Y => Dual { v: y, dx: 0.0, dy: 1.0 },
            Face(i) => {
                let f = &faces[*i];
                Dual {
                    v: f.eval(&Vec2::new(x, y)),
                    dx: f.normal.x,
                    dy: f.normal.y,
                }
            }
            Neg(a) => -a.eval_dual(x, y, faces),
            Add(a, b) => a.eval_dual(x, y, faces) + b.eval_dual(x, y, faces),
            Sub(a, b) => a.eval_dual(x, y, faces) - b.eval_dual(x, y, faces),
            Mul(a, b) => a.eval_dual(x, y, faces) * b.eval_dual(x, y, faces),
            Div(a, b) => a.eval_dual(x, y, faces) / b.eval_dual(x, y, faces),
            Pow(a, b) => a.eval_dual(x, y, faces).powd(b.eval_dual(x, y, faces)),
            Call(f, a) => {
                let d = a.eval_dual(x, y, faces);
                let v = d.v;
                match f {
                    Func::Exp => d.chain(v.exp(), v.exp()),
                    Func::Log => d.chain(v.ln(), 1.0 / v),
                    Func::Sqrt => d.chain(v.sqrt(), 0.5 / v.sqrt()),
                    Func::Sin => d.chain(v.sin(), v.cos()),
                    Func::Cos => d.chain(v.cos(), -v.sin()),
                    Func::Tan => d.chain(v.tan(), 1.0 / (v.cos() * v.cos())),
                    Func::Abs => d.chain(v.abs(), v.signum()),
                    Func::Xlogx => d.chain(xlogx(v), v.ln() + 1.0),
                }
            }
            Min(a, b) => {
                let (a, b) = (a.eval_dual(x, y, faces), b.eval_dual(x, y, faces));
                if a.v <= b.v {
                    a
                } else {
                    b
                }
            }
            Max(a, b) => {
                let (a, b) = (a.eval_dual(x, y, faces), b.eval_dual(x, y, faces));
                if a.v >= b.v {
                    a
                } else {
                    b
                }
            }
            Sum(v) => v
                .iter()
                .map(|e| e.eval_dual(x, y, faces))
                .fold(Dual::constant(0.0), |a, b| a + b),
            Product(v) => v
                .iter()
                .map(|e| e.eval_dual(x, y, faces))
                .fold(Dual::constant(1.0), |a, b| a * b),
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use Expr::*;
        match self {
            Const(c) => write!(f, "{c}"),
            X => write!(f, "x"),
            Y => write!(f, "y"),
            Face(i) => write!(f, "l{}", i + 1),
            Neg(a) => write!(f, "(-{a})"),
            Add(a, b) => write!(f, "({a} + {b})"),
            Sub(a, b) => write!(f, "({a} - {b})"),
            Mul(a, b) => write!(f, "({a} * {b})"),
            Div(a, b) => write!(f, "({a} / {b})"),
            Pow(a, b) => write!(f, "({a} ^ {b})"),
            Call(func, a) => {
                let name = match func {
                    Func::Exp => "exp",
                    Func::Log => "log",
                    Func::Sqrt => "sqrt",
                    Func::Sin => "sin",
                    Func::Cos => "cos",
                    Func::Tan => "tan",
                    Func::Abs => "abs",
                    Func::Xlogx => "xlogx",
                };
                write!(f, "{name}({a})")
            }
            Min(a, b) => write!(f, "min({a}, {b})"),
            Max(a, b) => write!(f, "max({a}, {b})"),
            Sum(v) | Product(v) => {
                let sep = if matches!(self, Sum(_)) { " + " } else { " * " };
                write!(f, "(")?;
                for (k, e) in v.iter().enumerate() {
                    if k > 0 {
                        write!(f, "{sep}")?;
                    }
                    write!(f, "{e}")?;
                }
                write!(f, ")")
            }
        }
    }
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn err<T>(&self, message: impl Into<String>) -> Result<T> {
        Err(Error::ExprSyntax {
            column: self.pos + 1,
            message: message.into(),
        })
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn eat(&mut self, c: u8) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<Expr> {
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

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        loop {
            if self.eat(b'*') {
                lhs = Expr::Mul(Box::new(lhs), Box::new(self.unary()?));
            } else if self.eat(b'/') {
                lhs = Expr::Div(Box::new(lhs), Box::new(self.unary()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn unary(&mut self) -> Result<Expr> {
        if self.eat(b'-') {
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        if self.eat(b'+') {
            return self.unary();
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.atom()?;
        if self.eat(b'^') {
            let exp = self.unary()?;
            return Ok(Expr::Pow(Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr> {
        match self.peek() {
            None => self.err("unexpected end of expression"),
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                if !self.eat(b')') {
                    return self.err("expected `)`");
                }
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() => self.ident(),
            Some(c) => self.err(format!("unexpected character `{}`", c as char)),
        }
    }

    fn number(&mut self) -> Result<Expr> {
        let start = self.pos;
        while self.pos < self.src.len() && (self.src[self.pos].is_ascii_digit() || self.src[self.pos] == b'.') {
            self.pos += 1;
        }
        if self.pos < self.src.len() && (self.src[self.pos] == b'e' || self.src[self.pos] == b'E') {
            let save = self.pos;
            self.pos += 1;
            if self.pos < self.src.len() && (self.src[self.pos] == b'+' || self.src[self.pos] == b'-') {
                self.pos += 1;
            }
            if self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                    self.pos += 1;
                }
            } else {
                self.pos = save;
            }
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap_or("");
        match text.parse::<f64>() {
            Ok(v) => Ok(Expr::Const(v)),
            Err(_) => {
                self.pos = start;
                self.err(format!("malformed number `{text}`"))
            }
        }
    }

    fn ident(&mut self) -> Result<Expr> {
        let start = self.pos;
        while self.pos < self.src.len() && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_') {
            self.pos += 1;
        }
        let name = std::str::from_utf8(&self.src[start..self.pos]).unwrap_or("");
        match name {
            "x" | "p" => return Ok(Expr::X),
            "y" | "q" => return Ok(Expr::Y),
            "pi" => return Ok(Expr::Const(std::f64::consts::PI)),
            "e" => return Ok(Expr::Const(std::f64::consts::E)),
            _ => {}
        }
        if let Some(rest) = name.strip_prefix('l') {
            if !rest.is_empty() && rest.bytes().all(|b| b.is_ascii_digit()) {
                let k: usize = rest.parse().unwrap_or(0);
                if k == 0 {
                    self.pos = start;
                    return self.err("face indices start at l1");
                }
                return Ok(Expr::Face(k - 1));
            }
        }
        let func = match name {
            "exp" => Some(Func::Exp),
            "log" | "ln" => Some(Func::Log),
            "sqrt" => Some(Func::Sqrt),
            "sin" => Some(Func::Sin),
            "cos" => Some(Func::Cos),
            "tan" => Some(Func::Tan),
            "abs" => Some(Func::Abs),
            "xlogx" => Some(Func::Xlogx),
            "pow" | "min" | "max" => None,
            _ => {
                self.pos = start;
                return self.err(format!("unknown identifier `{name}`"));
            }
        };
        if !self.eat(b'(') {
            return self.err(format!("expected `(` after `{name}`"));
        }
        let first = self.expr()?;
        let out = match func {
            Some(f) => Expr::Call(f, Box::new(first)),
            None => {
                if !self.eat(b',') {
                    return self.err(format!("`{name}` takes two arguments"));
                }
                let second = self.expr()?;
                let (a, b) = (Box::new(first), Box::new(second));
                match name {
                    "pow" => Expr::Pow(a, b),
                    "min" => Expr::Min(a, b),
                    _ => Expr::Max(a, b),
                }
            }
        };
        if !self.eat(b')') {
            return self.err("expected `)`");
        }
        Ok(out)
    }
}

pub fn parse_expr(text: &str) -> Result<Expr> {
    let mut p = Parser {
        src: text.as_bytes(),
        pos: 0,
    };
    let e = p.expr()?;
    if p.peek().is_some() {
        return p.err("trailing input");
    }
    Ok(e)
}

fn xlogx(t: f64) -> f64 {
    if t == 0.0 {
        0.0
    } else {
        t * t.ln()
    }
}

/// A named, pointwise-evaluable field, bound to the faces it references.
#[derive(Clone, Debug)]
pub struct ScalarField {
    name: String,
    expr: Arc<Expr>,
    faces: Arc<[HalfPlane]>,
}

impl ScalarField {
    pub fn new(name: impl Into<String>, expr: Expr, polytope: Option<&Polytope>) -> Result<Self> {
        let faces: Arc<[HalfPlane]> = match polytope {
            Some(p) => p.faces().into(),
            None => Arc::from(Vec::new()),
        };
        if let Some(k) = expr.max_face() {
            if k >= faces.len() {
                return Err(Error::ExprSyntax {
                    column: 1,
                    message: format!("face l{} referenced but only {} faces exist", k + 1, faces.len()),
                });
            }
        }
        Ok(Self {
            name: name.into(),
            expr: Arc::new(expr),
            faces,
        })
    }

    pub fn parse(name: impl Into<String>, text: &str, polytope: Option<&Polytope>) -> Result<Self> {
        Self::new(name, parse_expr(text)?, polytope)
    }

    pub fn constant(name: impl Into<String>, v: f64) -> Self {
        Self::new(name, Expr::Const(v), None).expect("constants reference no faces")
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn expr(&self) -> &Expr {
        &self.expr
    }

    #[inline]
    pub fn eval(&self, x: &Vec2) -> f64 {
        self.expr.eval(x.x, x.y, &self.faces)
    }

    #[inline]
    pub fn eval_xy(&self, x: f64, y: f64) -> f64 {
        self.expr.eval(x, y, &self.faces)
    }

    /// Value and gradient.
    pub fn eval_grad(&self, x: &Vec2) -> (f64, Vec2) {
        let d = self.expr.eval_dual(x.x, x.y, &self.faces);
        (d.v, Vec2::new(d.dx, d.dy))
    }

    /// Sample on a `k x k` grid of the bounding box intersected with the
    /// closed polytope. Reports the first non-finite or (when `positive`)
    /// non-positive sample.
    pub fn screen(&self, polytope: &Polytope, k: usize, positive: bool) -> Result<()> {
        let (lo, hi) = polytope.bbox();
        for a in 0..k {
            for b in 0..k {
                let x = Vec2::new(
                    lo.x + (hi.x - lo.x) * a as f64 / (k - 1) as f64,
                    lo.y + (hi.y - lo.y) * b as f64 / (k - 1) as f64,
                );
                if polytope.min_face(&x) < -crate::geometry::FACE_TOL {
                    continue;
                }
                let v = self.eval(&x);
                if !v.is_finite() {
                    return Err(Error::NonFiniteField {
                        name: self.name.clone(),
                        at: x,
                    });
                }
                if positive && v <= 0.0 {
                    return Err(Error::NonPositiveField {
                        name: self.name.clone(),
                        at: x,
                        value: v,
                    });
                }
            }
        }
        Ok(())
    }
}

impl fmt::Display for ScalarField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} = {}", self.name, self.expr)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(text: &str, x: f64, y: f64) -> f64 {
        ScalarField::parse("f", text, Some(&Polytope::unit_square()))
            .unwrap()
            .eval_xy(x, y)
    }

    #[test]
    fn precedence_and_associativity() {
        assert_eq!(ev("1 + 2 * 3", 0.0, 0.0), 7.0);
        assert_eq!(ev("-2^2", 0.0, 0.0), -4.0);
        assert_eq!(ev("2^3^2", 0.0, 0.0), 512.0);
        assert_eq!(ev("8 / 4 / 2", 0.0, 0.0), 1.0);
        assert_eq!(ev("x - y - 1", 3.0, 1.0), 1.0);
        assert_eq!(ev("1.5e-1 * 2", 0.0, 0.0), 0.3);
    }

    #[test]
    fn faces_and_functions() {
        assert!((ev("l1 * l3", 0.25, 0.5) - 0.25 * 0.75).abs() < 1e-15);
        assert!((ev("log(exp(x)) + sqrt(y)", 0.3, 0.25) - 0.8).abs() < 1e-15);
        assert!((ev("max(x, y) + min(x, y)", 0.2, 0.7) - 0.9).abs() < 1e-15);
        assert_eq!(ev("pow(x, 2)", 3.0, 0.0), 9.0);
        assert!((ev("p^2/2 - q*log(q)", 1.0, 0.5) - (0.5 + 0.5 * 2f64.ln())).abs() < 1e-15);
    }

    #[test]
    fn syntax_errors_carry_columns() {
        match parse_expr("1 + * 2") {
            Err(Error::ExprSyntax { column, .. }) => assert_eq!(column, 5),
            other => panic!("{other:?}"),
        }
        assert!(parse_expr("foo(x)").is_err());
        assert!(parse_expr("(x + 1").is_err());
        assert!(parse_expr("x y").is_err());
        assert!(ScalarField::parse("f", "l5", Some(&Polytope::unit_square())).is_err());
        assert!(ScalarField::parse("f", "l0", None).is_err());
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let f = ScalarField::parse(
            "f",
            "exp(x*y) / (1 + l1*l2) + sqrt(l3)^3 - pow(x + 2, y) + min(x, y)",
            Some(&Polytope::unit_square()),
        )
        .unwrap();
        let x = Vec2::new(0.3, 0.6);
        let (_, g) = f.eval_grad(&x);
        let h = 1e-6;
        let gx = (f.eval(&(x + Vec2::new(h, 0.0))) - f.eval(&(x - Vec2::new(h, 0.0)))) / (2.0 * h);
        let gy = (f.eval(&(x + Vec2::new(0.0, h))) - f.eval(&(x - Vec2::new(0.0, h)))) / (2.0 * h);
        assert!((g.x - gx).abs() < 1e-8, "{} {}", g.x, gx);
        assert!((g.y - gy).abs() < 1e-8, "{} {}", g.y, gy);
    }

    #[test]
    fn screen_rejects_nonpositive() {
        let sq = Polytope::unit_square();
        let f = ScalarField::parse("h", "x - 2", Some(&sq)).unwrap();
        assert!(matches!(f.screen(&sq, 64, true), Err(Error::NonPositiveField { .. })));
        let g = ScalarField::parse("h", "1 + x*y", Some(&sq)).unwrap();
        assert!(g.screen(&sq, 64, true).is_ok());
    }

    #[test]
    fn display_round_trips() {
        let e = parse_expr("1 + x*l2 - max(y, 3)^2").unwrap();
        let again = parse_expr(&e.to_string()).unwrap();
        for (x, y) in [(0.1, 0.2), (0.7, 0.4)] {
            let faces = Polytope::unit_square().faces().to_vec();
            assert_eq!(e.eval(x, y, &faces), again.eval(x, y, &faces));
        }
    }
}
