//! Arithmetic expressions over named coordinates, evaluated on dual numbers.
//!
//! Grammar: numbers, identifiers, `+ - * / ^`, parentheses, the functions
//! `sin cos exp ln sqrt tanh` and the constant `pi`. `^` is right
//! associative and binds tighter than unary minus, so `-x^2 = -(x^2)`.

use std::fmt;
use std::sync::Arc;

use crate::chart::{CoordinateDomain, Field, Valence};
use crate::dual::Dual;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
enum Node {
    Number(f64),
    Var(usize),
    Neg(Box<Node>),
    Binary(Op, Box<Node>, Box<Node>),
    Call(Func, Box<Node>),
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Op {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Func {
    Sin,
    Cos,
    Exp,
    Ln,
    Sqrt,
    Tanh,
}

impl Func {
    fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "exp" => Func::Exp,
            "ln" => Func::Ln,
            "sqrt" => Func::Sqrt,
            "tanh" => Func::Tanh,
            _ => return None,
        })
    }
}

/// A parsed expression bound to an ordered list of variable names.
#[derive(Clone)]
pub struct Expr {
    source: String,
    root: Node,
}

impl fmt::Debug for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Expr({:?})", self.source)
    }
}

impl Expr {
    pub fn parse(source: &str, vars: &[&str]) -> Result<Self> {
        let mut p = Parser { chars: source.char_indices().peekable(), source, vars };
        let root = p.expr()?;
        p.skip_ws();
        if let Some((i, c)) = p.chars.peek() {
            return Err(parse_error(source, *i, &format!("unexpected '{c}'")));
        }
        Ok(Expr { source: source.to_string(), root })
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn eval(&self, x: &[Dual]) -> Dual {
        eval(&self.root, x)
    }

    pub fn eval_f64(&self, x: &[f64]) -> f64 {
        let d: Vec<Dual> = x.iter().map(|v| Dual::constant(*v)).collect();
        self.eval(&d).re()
    }
}

fn eval(node: &Node, x: &[Dual]) -> Dual {
    match node {
        Node::Number(v) => Dual::constant(*v),
        Node::Var(i) => x[*i],
        Node::Neg(a) => -eval(a, x),
        Node::Binary(op, a, b) => {
            let l = eval(a, x);
            if let (Op::Pow, Node::Number(p)) = (op, b.as_ref()) {
                if p.fract() == 0.0 && p.abs() <= 64.0 {
                    return l.powi(*p as i32);
                }
                return l.powf(*p);
            }
            let r = eval(b, x);
            match op {
                Op::Add => l + r,
                Op::Sub => l - r,
                Op::Mul => l * r,
                Op::Div => l / r,
                Op::Pow => (r * l.ln()).exp(),
            }
        }
        Node::Call(f, a) => {
            let v = eval(a, x);
            match f {
                Func::Sin => v.sin(),
                Func::Cos => v.cos(),
                Func::Exp => v.exp(),
                Func::Ln => v.ln(),
                Func::Sqrt => v.sqrt(),
                Func::Tanh => v.tanh(),
            }
        }
    }
}

fn parse_error(source: &str, at: usize, msg: &str) -> Error {
    Error::Invalid(format!("expression {source:?} at column {}: {msg}", at + 1))
}

struct Parser<'a> {
    chars: std::iter::Peekable<std::str::CharIndices<'a>>,
    source: &'a str,
    vars: &'a [&'a str],
}

impl Parser<'_> {
    fn skip_ws(&mut self) {
        while matches!(self.chars.peek(), Some((_, c)) if c.is_whitespace()) {
            self.chars.next();
        }
    }

    fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.chars.peek().map(|(_, c)| *c)
    }

    fn position(&mut self) -> usize {
        self.chars.peek().map(|(i, _)| *i).unwrap_or(self.source.len())
    }

    fn expr(&mut self) -> Result<Node> {
        let mut node = self.term()?;
        while let Some(c @ ('+' | '-')) = self.peek() {
            self.chars.next();
            let rhs = self.term()?;
            node = Node::Binary(if c == '+' { Op::Add } else { Op::Sub }, Box::new(node), Box::new(rhs));
        }
        Ok(node)
    }

    fn term(&mut self) -> Result<Node> {
        let mut node = self.unary()?;
        while let Some(c @ ('*' | '/')) = self.peek() {
            self.chars.next();
            let rhs = self.unary()?;
            node = Node::Binary(if c == '*' { Op::Mul } else { Op::Div }, Box::new(node), Box::new(rhs));
        }
        Ok(node)
    }

    fn unary(&mut self) -> Result<Node> {
        match self.peek() {
            Some('-') => {
                self.chars.next();
                Ok(Node::Neg(Box::new(self.unary()?)))
            }
            Some('+') => {
                self.chars.next();
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Node> {
        let base = self.atom()?;
        if self.peek() == Some('^') {
            self.chars.next();
            let exponent = self.unary()?;
            let exponent = match exponent {
                Node::Neg(inner) => match *inner {
                    Node::Number(v) => Node::Number(-v),
                    other => Node::Neg(Box::new(other)),
                },
                other => other,
            };
            if let (Node::Number(b), Node::Number(e)) = (&base, &exponent) {
                return Ok(Node::Number(b.powf(*e)));
            }
            return Ok(Node::Binary(Op::Pow, Box::new(base), Box::new(exponent)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Node> {
        let at = {
            self.skip_ws();
            self.position()
        };
        match self.peek() {
            Some('(') => {
                self.chars.next();
                let inner = self.expr()?;
                if self.peek() != Some(')') {
                    let at = self.position();
                    return Err(parse_error(self.source, at, "expected ')'"));
                }
                self.chars.next();
                Ok(inner)
            }
            Some(c) if c.is_ascii_digit() || c == '.' => {
                let mut text = String::new();
                while let Some((_, c)) = self.chars.peek() {
                    let c = *c;
                    let exponent_sign = (c == '-' || c == '+') && text.ends_with(['e', 'E']);
                    if c.is_ascii_digit() || c == '.' || c == 'e' || c == 'E' || exponent_sign {
                        text.push(c);
                        self.chars.next();
                    } else {
                        break;
                    }
                }
                text.parse::<f64>()
                    .map(Node::Number)
                    .map_err(|_| parse_error(self.source, at, &format!("bad number {text:?}")))
            }
            Some(c) if c.is_alphabetic() || c == '_' => {
                let mut name = String::new();
                while let Some((_, c)) = self.chars.peek() {
                    if c.is_alphanumeric() || *c == '_' {
                        name.push(*c);
                        self.chars.next();
                    } else {
                        break;
                    }
                }
                if let Some(f) = Func::from_name(&name) {
                    if self.peek() != Some('(') {
                        let at = self.position();
                        return Err(parse_error(self.source, at, &format!("expected '(' after {name}")));
                    }
                    let arg = self.atom()?;
                    return Ok(Node::Call(f, Box::new(arg)));
                }
                if name == "pi" {
                    return Ok(Node::Number(std::f64::consts::PI));
                }
                match self.vars.iter().position(|v| *v == name) {
                    Some(i) => Ok(Node::Var(i)),
                    None => Err(parse_error(self.source, at, &format!("unknown identifier {name:?}"))),
                }
            }
            Some(c) => Err(parse_error(self.source, at, &format!("unexpected '{c}'"))),
            None => Err(parse_error(self.source, at, "unexpected end")),
        }
    }
}

/// A field whose components are expressions in the coordinates `vars`.
pub fn expression_field(domain: CoordinateDomain, valence: Valence, vars: &[&str], components: &[String]) -> Result<Field> {
    let expected = valence.components(domain.dim());
    if components.len() != expected {
        return Err(Error::Invalid(format!(
            "{valence} on a {}-dimensional domain needs {expected} components, got {}",
            domain.dim(),
            components.len()
        )));
    }
    if vars.len() != domain.dim() {
        return Err(Error::Invalid(format!("{} coordinate names for dimension {}", vars.len(), domain.dim())));
    }
    let exprs: Arc<Vec<Expr>> = Arc::new(components.iter().map(|c| Expr::parse(c, vars)).collect::<Result<_>>()?);
    Ok(Field::new(domain, valence, move |x| exprs.iter().map(|e| e.eval(x)).collect()))
}

/// A scalar function of one variable `name`.
pub fn scalar_function(source: &str, name: &str) -> Result<Arc<dyn Fn(Dual) -> Dual + Send + Sync>> {
    let e = Expr::parse(source, &[name])?;
    Ok(Arc::new(move |x| e.eval(&[x])))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dual::derivative;

    fn at(src: &str, x: f64, y: f64) -> f64 {
        Expr::parse(src, &["x", "y"]).unwrap().eval_f64(&[x, y])
    }

    #[test]
    fn precedence() {
        assert_eq!(at("1 + 2 * 3", 0.0, 0.0), 7.0);
        assert_eq!(at("-x^2", 3.0, 0.0), -9.0);
        assert_eq!(at("2^3^2", 0.0, 0.0), 512.0);
        assert_eq!(at("(1 + 2) * 3 - 4 / 2", 0.0, 0.0), 7.0);
        assert_eq!(at("x^-1", 4.0, 0.0), 0.25);
        assert_eq!(at("1.5e-1 * y", 0.0, 2.0), 0.3);
        assert!((at("2 * pi * cos(0)", 0.0, 0.0) - 2.0 * std::f64::consts::PI).abs() < 1e-15);
    }

    #[test]
    fn functions_and_derivatives() {
        let e = Expr::parse("sin(x) * exp(x) + x^y", &["x", "y"]).unwrap();
        let (v, d) = derivative(|t| vec![e.eval(&[t, Dual::constant(2.5)])], Dual::constant(0.7));
        let x: f64 = 0.7;
        assert!((v[0].re() - (x.sin() * x.exp() + x.powf(2.5))).abs() < 1e-14);
        let exact = x.cos() * x.exp() + x.sin() * x.exp() + 2.5 * x.powf(1.5);
        assert!((d[0].re() - exact).abs() < 1e-13);
        assert!((at("sqrt(ln(exp(4)))", 0.0, 0.0) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn errors_name_the_column() {
        for (src, col) in [("x + ", "column 5"), ("x * z", "column 5"), ("sin x", "column 5"), ("(x", "column 3"), ("x y", "column 3")] {
            match Expr::parse(src, &["x", "y"]) {
                Err(Error::Invalid(msg)) => assert!(msg.contains(col), "{src}: {msg}"),
                other => panic!("{src}: {other:?}"),
            }
        }
    }

    #[test]
    fn fields_from_expressions() {
        let f = expression_field(CoordinateDomain::cube(2, 1.0), Valence::Form(2), &["x", "y"], &["x*y + 1".into()]).unwrap();
        assert_eq!(f.eval(&[0.5, 0.5]), vec![1.25]);
        assert!(expression_field(CoordinateDomain::cube(2, 1.0), Valence::Vector, &["x", "y"], &["x".into()]).is_err());
    }
}
