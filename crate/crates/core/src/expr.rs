//! A small expression language for maps between coordinate spaces.
//!
//! ```text
//! f(x,y) = (2x, 3y)
//! g(x1,x2,x3,x4) = (exp(x3)*(x1 - x2), 0, 0, exp(x3)*(x4 - x2))
//! h(t) = t^2 + t
//! ```
//!
//! Components are built from numbers, the declared variables, `+ - * /`,
//! constant powers `^`, implicit multiplication (`2x`, `3(x+y)`) and `exp`.
//! Jacobians are exact (forward-mode differentiation of the syntax tree).

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::manifold::SmoothMapSpec;

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Const(f64),
    Var(usize),
    Neg(Box<Node>),
    Add(Box<Node>, Box<Node>),
    Sub(Box<Node>, Box<Node>),
    Mul(Box<Node>, Box<Node>),
    Div(Box<Node>, Box<Node>),
    Pow(Box<Node>, f64),
    Exp(Box<Node>),
}

impl Node {
    fn eval(&self, x: &[f64]) -> f64 {
        match self {
            Node::Const(c) => *c,
            Node::Var(i) => x[*i],
            Node::Neg(a) => -a.eval(x),
            Node::Add(a, b) => a.eval(x) + b.eval(x),
            Node::Sub(a, b) => a.eval(x) - b.eval(x),
            Node::Mul(a, b) => a.eval(x) * b.eval(x),
            Node::Div(a, b) => a.eval(x) / b.eval(x),
            Node::Pow(a, p) => pow(a.eval(x), *p),
            Node::Exp(a) => a.eval(x).exp(),
        }
    }

    /// Value and gradient with respect to all variables.
    fn eval_grad(&self, x: &[f64]) -> (f64, Vec<f64>) {
        let n = x.len();
        match self {
            Node::Const(c) => (*c, vec![0.0; n]),
            Node::Var(i) => {
                let mut g = vec![0.0; n];
                g[*i] = 1.0;
                (x[*i], g)
            }
            Node::Neg(a) => {
                let (v, g) = a.eval_grad(x);
                (-v, g.into_iter().map(|d| -d).collect())
            }
            Node::Add(a, b) => combine(a, b, x, |u, v| u + v, |_, _, du, dv| du + dv),
            Node::Sub(a, b) => combine(a, b, x, |u, v| u - v, |_, _, du, dv| du - dv),
            Node::Mul(a, b) => combine(a, b, x, |u, v| u * v, |u, v, du, dv| du * v + u * dv),
            Node::Div(a, b) => combine(
                a,
                b,
                x,
                |u, v| u / v,
                |u, v, du, dv| (du * v - u * dv) / (v * v),
            ),
            Node::Pow(a, p) => {
                let (v, g) = a.eval_grad(x);
                let d = if *p == 0.0 { 0.0 } else { p * pow(v, p - 1.0) };
                (pow(v, *p), g.into_iter().map(|dv| d * dv).collect())
            }
            Node::Exp(a) => {
                let (v, g) = a.eval_grad(x);
                let e = v.exp();
                (e, g.into_iter().map(|dv| e * dv).collect())
            }
        }
    }
}

fn pow(v: f64, p: f64) -> f64 {
    if p.fract() == 0.0 && p.abs() <= i32::MAX as f64 {
        v.powi(p as i32)
    } else {
        v.powf(p)
    }
}

fn combine(
    a: &Node,
    b: &Node,
    x: &[f64],
    value: impl Fn(f64, f64) -> f64,
    deriv: impl Fn(f64, f64, f64, f64) -> f64,
) -> (f64, Vec<f64>) {
    let (u, gu) = a.eval_grad(x);
    let (v, gv) = b.eval_grad(x);
    let g = gu
        .iter()
        .zip(&gv)
        .map(|(&du, &dv)| deriv(u, v, du, dv))
        .collect();
    (value(u, v), g)
}

/// A parsed map `name(vars) = (components)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExprMap {
    pub name: String,
    pub variables: Vec<String>,
    components: Vec<Node>,
}

impl ExprMap {
    pub fn parse(src: &str) -> Result<Self> {
        Parser::new(src)?.definition()
    }

    pub fn domain_dim(&self) -> usize {
        self.variables.len()
    }

    pub fn codomain_dim(&self) -> usize {
        self.components.len()
    }

    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        self.components.iter().map(|c| c.eval(x)).collect()
    }

    pub fn jacobian(&self, x: &[f64]) -> DMatrix<f64> {
        let rows: Vec<Vec<f64>> = self.components.iter().map(|c| c.eval_grad(x).1).collect();
        DMatrix::from_fn(rows.len(), x.len(), |i, j| rows[i][j])
    }

    pub fn into_spec(self) -> SmoothMapSpec {
        let (n, m) = (self.domain_dim(), self.codomain_dim());
        let for_jac = self.clone();
        SmoothMapSpec::new(n, m, move |x| self.eval(x)).with_jacobian(move |x| for_jac.jacobian(x))
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Sym(char),
}

struct Parser {
    toks: Vec<(usize, Tok)>,
    pos: usize,
    end: usize,
    vars: Vec<String>,
}

fn err<T>(position: usize, message: impl Into<String>) -> Result<T> {
    Err(Error::Parse {
        position,
        message: message.into(),
    })
}

fn tokenize(src: &str) -> Result<Vec<(usize, Tok)>> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_ascii_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                i += 1;
            }
            // exponent part, only when followed by digits (so `2e` is not eaten)
            if i + 1 < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                let mut j = i + 1;
                if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                    j += 1;
                }
                if j < bytes.len() && bytes[j].is_ascii_digit() {
                    while j < bytes.len() && bytes[j].is_ascii_digit() {
                        j += 1;
                    }
                    i = j;
                }
            }
            let text = &src[start..i];
            match text.parse::<f64>() {
                Ok(v) => out.push((start, Tok::Num(v))),
                Err(_) => return err(start, format!("invalid number `{text}`")),
            }
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push((start, Tok::Ident(src[start..i].to_string())));
        } else if "+-*/^(),=".contains(c) {
            out.push((i, Tok::Sym(c)));
            i += 1;
        } else {
            return err(i, format!("unexpected character `{c}`"));
        }
    }
    Ok(out)
}

impl Parser {
    fn new(src: &str) -> Result<Self> {
        Ok(Self {
            toks: tokenize(src)?,
            pos: 0,
            end: src.len(),
            vars: Vec::new(),
        })
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.1)
    }

    fn here(&self) -> usize {
        self.toks.get(self.pos).map_or(self.end, |t| t.0)
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(&Tok::Sym(c)) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: char) -> Result<()> {
        if self.eat(c) {
            Ok(())
        } else {
            err(self.here(), format!("expected `{c}`"))
        }
    }

    fn ident(&mut self) -> Result<String> {
        match self.peek().cloned() {
            Some(Tok::Ident(s)) => {
                self.pos += 1;
                Ok(s)
            }
            _ => err(self.here(), "expected an identifier"),
        }
    }

    fn definition(mut self) -> Result<ExprMap> {
        let name = self.ident()?;
        self.expect('(')?;
        loop {
            let pos = self.here();
            let v = self.ident()?;
            if v == "exp" || self.vars.contains(&v) {
                return err(pos, format!("invalid or repeated variable `{v}`"));
            }
            self.vars.push(v);
            if !self.eat(',') {
                break;
            }
        }
        self.expect(')')?;
        self.expect('=')?;

        let body_start = self.pos;
        let components = match self.tuple() {
            Ok(c) if self.pos == self.toks.len() => c,
            _ => {
                self.pos = body_start;
                let e = self.expr()?;
                vec![e]
            }
        };
        if self.pos != self.toks.len() {
            return err(self.here(), "unexpected trailing input");
        }
        Ok(ExprMap {
            name,
            variables: self.vars,
            components,
        })
    }

    fn tuple(&mut self) -> Result<Vec<Node>> {
        self.expect('(')?;
        let mut items = vec![self.expr()?];
        while self.eat(',') {
            items.push(self.expr()?);
        }
        self.expect(')')?;
        Ok(items)
    }

    fn expr(&mut self) -> Result<Node> {
        let mut lhs = self.term()?;
        loop {
            if self.eat('+') {
                lhs = Node::Add(Box::new(lhs), Box::new(self.term()?));
            } else if self.eat('-') {
                lhs = Node::Sub(Box::new(lhs), Box::new(self.term()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn starts_primary(&self) -> bool {
        matches!(
            self.peek(),
            Some(Tok::Num(_)) | Some(Tok::Ident(_)) | Some(Tok::Sym('('))
        )
    }

    fn term(&mut self) -> Result<Node> {
        let mut lhs = self.unary()?;
        loop {
            if self.eat('*') {
                lhs = Node::Mul(Box::new(lhs), Box::new(self.unary()?));
            } else if self.eat('/') {
                lhs = Node::Div(Box::new(lhs), Box::new(self.unary()?));
            } else if self.starts_primary() {
                lhs = Node::Mul(Box::new(lhs), Box::new(self.power()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn unary(&mut self) -> Result<Node> {
        if self.eat('-') {
            Ok(Node::Neg(Box::new(self.unary()?)))
        } else if self.eat('+') {
            self.unary()
        } else {
            self.power()
        }
    }

    fn power(&mut self) -> Result<Node> {
        let base = self.primary()?;
        if self.eat('^') {
            let pos = self.here();
            let exponent = self.unary()?;
            match constant_value(&exponent) {
                Some(p) => Ok(Node::Pow(Box::new(base), p)),
                None => err(pos, "exponent must be a constant"),
            }
        } else {
            Ok(base)
        }
    }

    fn primary(&mut self) -> Result<Node> {
        let pos = self.here();
        match self.peek().cloned() {
            Some(Tok::Num(v)) => {
                self.pos += 1;
                Ok(Node::Const(v))
            }
            Some(Tok::Ident(name)) => {
                self.pos += 1;
                if name == "exp" {
                    self.expect('(')?;
                    let arg = self.expr()?;
                    self.expect(')')?;
                    return Ok(Node::Exp(Box::new(arg)));
                }
                match self.vars.iter().position(|v| *v == name) {
                    Some(i) => Ok(Node::Var(i)),
                    None => err(pos, format!("unknown variable `{name}`")),
                }
            }
            Some(Tok::Sym('(')) => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(')')?;
                Ok(e)
            }
            _ => err(pos, "expected a number, variable, or `(`"),
        }
    }
}

fn constant_value(node: &Node) -> Option<f64> {
    match node {
        Node::Const(c) => Some(*c),
        Node::Neg(a) => constant_value(a).map(|v| -v),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_diagonal_map() {
        let m = ExprMap::parse("f(x,y)=(2x,3y)").unwrap();
        assert_eq!((m.domain_dim(), m.codomain_dim()), (2, 2));
        assert_eq!(m.eval(&[1.0, 1.0]), vec![2.0, 3.0]);
        assert_eq!(
            m.jacobian(&[0.3, 0.4]),
            DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 3.0])
        );
    }

    #[test]
    fn parses_example8() {
        let m = ExprMap::parse("f(a,b,c,d) = (exp(c)*(a-b), 0, 0, exp(c)(d - b))").unwrap();
        let x = [1.0, 2.0, 0.5, 3.0];
        let e = 0.5f64.exp();
        assert_eq!(m.eval(&x), vec![-e, 0.0, 0.0, e]);
        let j = m.jacobian(&x);
        assert!((j[(0, 2)] - e * (x[0] - x[1])).abs() < 1e-15);
        assert!((j[(3, 1)] + e).abs() < 1e-15);
    }

    #[test]
    fn scalar_body_without_tuple() {
        let m = ExprMap::parse("h(t) = t^2 + t").unwrap();
        assert_eq!(m.codomain_dim(), 1);
        assert_eq!(m.jacobian(&[-0.5]), DMatrix::from_element(1, 1, 0.0));
        let paren = ExprMap::parse("h(t) = (t+1)*2").unwrap();
        assert_eq!(paren.eval(&[1.0]), vec![4.0]);
    }

    #[test]
    fn precedence_and_powers() {
        let m = ExprMap::parse("f(x) = -x^2 + 2*x^3/4 - x^-1").unwrap();
        let x = 2.0;
        assert!((m.eval(&[x])[0] - (-4.0 + 4.0 - 0.5)).abs() < 1e-15);
        let d = -2.0 * x + 1.5 * x * x + 1.0 / (x * x);
        assert!((m.jacobian(&[x])[(0, 0)] - d).abs() < 1e-14);
        let s = ExprMap::parse("f(x) = 1.5e-1x").unwrap();
        assert!((s.eval(&[2.0])[0] - 0.3).abs() < 1e-15);
    }

    #[test]
    fn errors_carry_positions() {
        assert!(matches!(
            ExprMap::parse("f(x) = y"),
            Err(Error::Parse { position: 7, .. })
        ));
        assert!(ExprMap::parse("f(x) = x^x").is_err());
        assert!(ExprMap::parse("f(x) = (x").is_err());
        assert!(ExprMap::parse("f(x,x) = x").is_err());
        assert!(ExprMap::parse("f(x) = x $").is_err());
        assert!(ExprMap::parse("").is_err());
    }

    #[test]
    fn spec_has_exact_jacobian() {
        let spec = ExprMap::parse("c(t) = (t^3, t^6)").unwrap().into_spec();
        let j = spec.jacobian_matrix(&[1.0]).unwrap();
        assert_eq!(j, DMatrix::from_column_slice(2, 1, &[3.0, 6.0]));
    }
}
