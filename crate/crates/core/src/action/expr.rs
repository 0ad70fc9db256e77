//! Closed coordinate-expression grammar for action programs.
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := '-' unary | primary
//! primary := number
//!          | ident                      parameter
//!          | ident '.' ('x' | 'y')      anchor coordinate
//!          | 'anchor' '(' ident ')' '.' ('x' | 'y')
//!          | 'lerp' '(' expr ',' expr ',' expr ')'
//!          | '(' expr ')'
//! ```
//!
//! `anchor(p)` resolves to the anchor named by the value bound to parameter `p`,
//! which is how discrete programs pick per-option targets.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::ParamValue;
use crate::error::{Error, Result};
use crate::geometry::Point;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Axis {
    X,
    Y,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Expr {
    Num(f64),
    Param(String),
    Anchor(String, Axis),
    AnchorOf(String, Axis),
    Neg(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    Lerp(Box<Expr>, Box<Expr>, Box<Expr>),
}

impl Expr {
    pub fn parse(src: &str) -> Result<Expr, String> {
        let tokens = tokenize(src)?;
        let mut p = Parser { tokens, pos: 0 };
        let e = p.expr()?;
        if p.pos != p.tokens.len() {
            return Err(format!("unexpected trailing input in `{src}`"));
        }
        Ok(e)
    }

    /// Parameters and anchors referenced by this expression.
    pub fn free_variables(&self, params: &mut BTreeSet<String>, anchors: &mut BTreeSet<String>) {
        match self {
            Expr::Num(_) => {}
            Expr::Param(p) | Expr::AnchorOf(p, _) => {
                params.insert(p.clone());
            }
            Expr::Anchor(a, _) => {
                anchors.insert(a.clone());
            }
            Expr::Neg(e) => e.free_variables(params, anchors),
            Expr::Bin(_, a, b) => {
                a.free_variables(params, anchors);
                b.free_variables(params, anchors);
            }
            Expr::Lerp(a, b, t) => {
                a.free_variables(params, anchors);
                b.free_variables(params, anchors);
                t.free_variables(params, anchors);
            }
        }
    }

    pub fn eval(
        &self,
        anchors: &BTreeMap<String, Point>,
        bindings: &BTreeMap<String, ParamValue>,
    ) -> Result<f64> {
        let v = match self {
            Expr::Num(n) => *n,
            Expr::Param(p) => match bindings.get(p) {
                Some(ParamValue::Number(n)) => *n,
                Some(ParamValue::Text(t)) => {
                    return Err(Error::invalid(format!(
                        "parameter `{p}` is bound to text `{t}` but used arithmetically"
                    )))
                }
                None => return Err(Error::UnboundParameter(p.clone())),
            },
            Expr::Anchor(a, axis) => {
                let pt = anchors
                    .get(a)
                    .ok_or_else(|| Error::invalid(format!("unknown anchor `{a}`")))?;
                axis.pick(pt)
            }
            Expr::AnchorOf(p, axis) => {
                let name = bindings
                    .get(p)
                    .ok_or_else(|| Error::UnboundParameter(p.clone()))?
                    .to_string();
                let pt = anchors.get(&name).ok_or_else(|| {
                    Error::invalid(format!("no anchor named `{name}` for parameter `{p}`"))
                })?;
                axis.pick(pt)
            }
            Expr::Neg(e) => -e.eval(anchors, bindings)?,
            Expr::Bin(op, a, b) => {
                let (a, b) = (a.eval(anchors, bindings)?, b.eval(anchors, bindings)?);
                match op {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => a * b,
                    BinOp::Div => a / b,
                }
            }
            Expr::Lerp(a, b, t) => {
                let (a, b, t) = (
                    a.eval(anchors, bindings)?,
                    b.eval(anchors, bindings)?,
                    t.eval(anchors, bindings)?,
                );
                a + (b - a) * t
            }
        };
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::NonFinite)
        }
    }

    /// Replace bare parameter references using `f`; used by the code importer
    /// to inline local variables.
    pub(crate) fn substitute(
        self,
        f: &mut impl FnMut(&str) -> Result<Expr, String>,
    ) -> Result<Expr, String> {
        Ok(match self {
            Expr::Param(p) => f(&p)?,
            Expr::Neg(e) => Expr::Neg(Box::new(e.substitute(f)?)),
            Expr::Bin(op, a, b) => {
                Expr::Bin(op, Box::new(a.substitute(f)?), Box::new(b.substitute(f)?))
            }
            Expr::Lerp(a, b, t) => Expr::Lerp(
                Box::new(a.substitute(f)?),
                Box::new(b.substitute(f)?),
                Box::new(t.substitute(f)?),
            ),
            other => other,
        })
    }
}

impl Axis {
    fn pick(self, p: &Point) -> f64 {
        match self {
            Axis::X => p.x,
            Axis::Y => p.y,
        }
    }

    fn as_str(self) -> &'static str {
        match self {
            Axis::X => "x",
            Axis::Y => "y",
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(n) => write!(f, "{n}"),
            Expr::Param(p) => f.write_str(p),
            Expr::Anchor(a, axis) => write!(f, "{a}.{}", axis.as_str()),
            Expr::AnchorOf(p, axis) => write!(f, "anchor({p}).{}", axis.as_str()),
            Expr::Neg(e) => write!(f, "-({e})"),
            Expr::Bin(op, a, b) => {
                let sym = match op {
                    BinOp::Add => '+',
                    BinOp::Sub => '-',
                    BinOp::Mul => '*',
                    BinOp::Div => '/',
                };
                write!(f, "({a} {sym} {b})")
            }
            Expr::Lerp(a, b, t) => write!(f, "lerp({a}, {b}, {t})"),
        }
    }
}

impl TryFrom<String> for Expr {
    type Error = String;

    fn try_from(s: String) -> Result<Self, String> {
        Expr::parse(&s)
    }
}

impl From<Expr> for String {
    fn from(e: Expr) -> String {
        e.to_string()
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
}

fn tokenize(src: &str) -> Result<Vec<Tok>, String> {
    let mut out = Vec::new();
    let chars: Vec<char> = src.chars().collect();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit()
            || (c == '.' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit()))
        {
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
            let n = text
                .parse::<f64>()
                .map_err(|_| format!("bad number `{text}`"))?;
            out.push(Tok::Num(n));
        } else if c.is_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push(Tok::Ident(chars[start..i].iter().collect()));
        } else if "+-*/(),.".contains(c) {
            out.push(Tok::Op(c));
            i += 1;
        } else {
            return Err(format!("unexpected character `{c}`"));
        }
    }
    Ok(out)
}

struct Parser {
    tokens: Vec<Tok>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.tokens.get(self.pos)
    }

    fn eat_op(&mut self, c: char) -> bool {
        if self.peek() == Some(&Tok::Op(c)) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect_op(&mut self, c: char) -> Result<(), String> {
        if self.eat_op(c) {
            Ok(())
        } else {
            Err(format!("expected `{c}`"))
        }
    }

    fn ident(&mut self) -> Result<String, String> {
        match self.tokens.get(self.pos) {
            Some(Tok::Ident(s)) => {
                self.pos += 1;
                Ok(s.clone())
            }
            _ => Err("expected identifier".into()),
        }
    }

    fn axis(&mut self) -> Result<Axis, String> {
        self.expect_op('.')?;
        match self.ident()?.as_str() {
            "x" => Ok(Axis::X),
            "y" => Ok(Axis::Y),
            other => Err(format!("unknown axis `{other}`")),
        }
    }

    fn expr(&mut self) -> Result<Expr, String> {
        let mut lhs = self.term()?;
        loop {
            let op = if self.eat_op('+') {
                BinOp::Add
            } else if self.eat_op('-') {
                BinOp::Sub
            } else {
                return Ok(lhs);
            };
            let rhs = self.term()?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn term(&mut self) -> Result<Expr, String> {
        let mut lhs = self.unary()?;
        loop {
            let op = if self.eat_op('*') {
                BinOp::Mul
            } else if self.eat_op('/') {
                BinOp::Div
            } else {
                return Ok(lhs);
            };
            let rhs = self.unary()?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn unary(&mut self) -> Result<Expr, String> {
        if self.eat_op('-') {
            // fold a directly negated literal so `-1` stays a constant
            if let Some(Tok::Num(n)) = self.peek().cloned() {
                self.pos += 1;
                return Ok(Expr::Num(-n));
            }
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<Expr, String> {
        match self.peek().cloned() {
            Some(Tok::Num(n)) => {
                self.pos += 1;
                Ok(Expr::Num(n))
            }
            Some(Tok::Op('(')) => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect_op(')')?;
                Ok(e)
            }
            Some(Tok::Ident(name)) => {
                self.pos += 1;
                match name.as_str() {
                    "lerp" if self.peek() == Some(&Tok::Op('(')) => {
                        self.pos += 1;
                        let a = self.expr()?;
                        self.expect_op(',')?;
                        let b = self.expr()?;
                        self.expect_op(',')?;
                        let t = self.expr()?;
                        self.expect_op(')')?;
                        Ok(Expr::Lerp(Box::new(a), Box::new(b), Box::new(t)))
                    }
                    "anchor" if self.peek() == Some(&Tok::Op('(')) => {
                        self.pos += 1;
                        let p = self.ident()?;
                        self.expect_op(')')?;
                        Ok(Expr::AnchorOf(p, self.axis()?))
                    }
                    _ if self.peek() == Some(&Tok::Op('.')) => Ok(Expr::Anchor(name, self.axis()?)),
                    _ if self.peek() == Some(&Tok::Op('(')) => Err(format!(
                        "function `{name}` is outside the expression grammar"
                    )),
                    _ => Ok(Expr::Param(name)),
                }
            }
            Some(t) => Err(format!("unexpected token {t:?}")),
            None => Err("unexpected end of expression".into()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn anchors() -> BTreeMap<String, Point> {
        BTreeMap::from([
            ("left".to_string(), Point::new(600.5, 830.0)),
            ("right".to_string(), Point::new(1064.5, 830.0)),
        ])
    }

    fn bind(name: &str, v: f64) -> BTreeMap<String, ParamValue> {
        BTreeMap::from([(name.to_string(), ParamValue::Number(v))])
    }

    #[test]
    fn precedence_and_associativity() {
        let e = Expr::parse("1 + 2 * 3 - 8 / 4 / 2").unwrap();
        assert_eq!(e.eval(&BTreeMap::new(), &BTreeMap::new()).unwrap(), 6.0);
        let e = Expr::parse("-(2 - 5) * -1").unwrap();
        assert_eq!(e.eval(&BTreeMap::new(), &BTreeMap::new()).unwrap(), -3.0);
    }

    #[test]
    fn slider_interpolation() {
        let e = Expr::parse("left.x + (right.x - left.x) * (v / 100)").unwrap();
        let x = e.eval(&anchors(), &bind("v", 24.0)).unwrap();
        assert!((x - 711.86).abs() < 1e-9);
        let l = Expr::parse("lerp(left.x, right.x, v / 100)").unwrap();
        assert!((l.eval(&anchors(), &bind("v", 60.0)).unwrap() - 878.9).abs() < 1e-9);
    }

    #[test]
    fn anchor_of_selects_by_bound_value() {
        let mut a = anchors();
        a.insert("M".into(), Point::new(5.0, 6.0));
        let e = Expr::parse("anchor(size).y").unwrap();
        let b = BTreeMap::from([("size".to_string(), ParamValue::Text("M".into()))]);
        assert_eq!(e.eval(&a, &b).unwrap(), 6.0);
    }

    #[test]
    fn errors() {
        assert!(matches!(
            Expr::parse("v + 1")
                .unwrap()
                .eval(&anchors(), &BTreeMap::new()),
            Err(Error::UnboundParameter(_))
        ));
        assert!(matches!(
            Expr::parse("1 / v")
                .unwrap()
                .eval(&anchors(), &bind("v", 0.0)),
            Err(Error::NonFinite)
        ));
        assert!(Expr::parse("round(v)").is_err());
        assert!(Expr::parse("v +").is_err());
        assert!(Expr::parse("left.z").is_err());
        assert!(Expr::parse("a ; b").is_err());
    }

    fn arb_expr() -> impl Strategy<Value = Expr> {
        let leaf = prop_oneof![
            (-1e6f64..1e6).prop_map(Expr::Num),
            "[a-w]{1,3}".prop_map(Expr::Param),
            ("[a-w]{1,3}", prop_oneof![Just(Axis::X), Just(Axis::Y)])
                .prop_map(|(a, x)| Expr::Anchor(a, x)),
        ];
        leaf.prop_recursive(4, 24, 3, |inner| {
            prop_oneof![
                inner.clone().prop_map(|e| Expr::Neg(Box::new(e))),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::Bin(
                    BinOp::Sub,
                    Box::new(a),
                    Box::new(b)
                )),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::Bin(
                    BinOp::Div,
                    Box::new(a),
                    Box::new(b)
                )),
                (inner.clone(), inner.clone(), inner).prop_map(|(a, b, t)| Expr::Lerp(
                    Box::new(a),
                    Box::new(b),
                    Box::new(t)
                )),
            ]
        })
    }

    proptest! {
        #[test]
        fn display_parse_round_trip(e in arb_expr()) {
            let text = e.to_string();
            prop_assert_eq!(Expr::parse(&text).unwrap(), e);
        }
    }
}
