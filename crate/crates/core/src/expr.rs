//! A small arithmetic language for vector fields, sections and impulse maps.
//!
//! Each component is parsed by recursive descent into a [`Node`] tree, then
//! flattened into postfix code evaluated on a fixed-size stack, so evaluation
//! never allocates. Components of a field are separated by `;`. The grammar
//! is documented in `docs/expression-language.md`.

use alloc::borrow::ToOwned;
use alloc::boxed::Box;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::error::{Error, ExprError, Result};
use crate::point::{Chart, Point, MAX_DIM};

const STACK: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
}

impl BinOp {
    fn prec(self) -> u8 {
        match self {
            BinOp::Add | BinOp::Sub => 1,
            BinOp::Mul | BinOp::Div => 2,
        }
    }

    fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Sqrt,
    Abs,
}

impl Func {
    fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "exp" => Func::Exp,
            "sqrt" => Func::Sqrt,
            "abs" => Func::Abs,
            _ => return None,
        })
    }

    fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Sqrt => "sqrt",
            Func::Abs => "abs",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Num(f64),
    Pi,
    Var(u8),
    Neg(Box<Node>),
    Bin(BinOp, Box<Node>, Box<Node>),
    Call(Func, Box<Node>),
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Op {
    Push(f64),
    Load(u8),
    Neg,
    Add,
    Sub,
    Mul,
    Div,
    Call(Func),
}

/// Variable names visible to expressions in a chart of a given dimension.
fn symbol_index(chart: Chart, dim: usize, name: &str) -> Option<u8> {
    match chart {
        Chart::Polar2d => match name {
            "r" => Some(0),
            "th" => Some(1),
            _ => None,
        },
        Chart::Cartesian => {
            let digits = name.strip_prefix('x')?;
            let i: usize = digits.parse().ok()?;
            if digits.starts_with('0') || i == 0 || i > dim {
                None
            } else {
                Some((i - 1) as u8)
            }
        }
    }
}

fn symbol_name(chart: Chart, i: u8) -> SymbolName {
    SymbolName(chart, i)
}

struct SymbolName(Chart, u8);

impl fmt::Display for SymbolName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.0, self.1) {
            (Chart::Polar2d, 0) => f.write_str("r"),
            (Chart::Polar2d, _) => f.write_str("th"),
            (Chart::Cartesian, i) => write!(f, "x{}", i + 1),
        }
    }
}

/// One scalar expression over the coordinates of a chart.
#[derive(Debug, Clone)]
pub struct Expr {
    chart: Chart,
    dim: usize,
    root: Node,
    code: Vec<Op>,
}

impl PartialEq for Expr {
    fn eq(&self, other: &Self) -> bool {
        self.chart == other.chart && self.dim == other.dim && self.root == other.root
    }
}

impl Expr {
    /// Parses a single scalar expression. `dim` is the number of coordinates
    /// the expression may reference (`0` allows constants only).
    pub fn parse(src: &str, chart: Chart, dim: usize) -> Result<Self, ExprError> {
        let mut fields = parse_components(src, chart, dim)?;
        if fields.len() != 1 {
            return Err(ExprError::Arity {
                expected: 1,
                found: fields.len(),
            });
        }
        Ok(fields.pop().unwrap())
    }

    fn compile(root: Node, chart: Chart, dim: usize, offset: usize) -> Result<Self, ExprError> {
        let mut code = Vec::new();
        emit(&root, &mut code);
        let mut depth = 0usize;
        let mut max = 0usize;
        for op in &code {
            match op {
                Op::Push(_) | Op::Load(_) => depth += 1,
                Op::Add | Op::Sub | Op::Mul | Op::Div => depth -= 1,
                Op::Neg | Op::Call(_) => {}
            }
            max = max.max(depth);
        }
        if max > STACK {
            return Err(ExprError::Syntax {
                offset,
                message: "expression nests too deeply",
            });
        }
        Ok(Self {
            chart,
            dim,
            root,
            code,
        })
    }

    pub fn node(&self) -> &Node {
        &self.root
    }

    pub fn chart(&self) -> Chart {
        self.chart
    }

    /// Evaluates at raw chart coordinates. The result may be non-finite; use
    /// [`Expr::eval_point`] for a checked value.
    #[inline]
    pub fn eval_raw(&self, vars: &[f64]) -> f64 {
        let mut stack = [0.0f64; STACK];
        let mut sp = 0usize;
        for op in &self.code {
            match *op {
                Op::Push(v) => {
                    stack[sp] = v;
                    sp += 1;
                }
                Op::Load(i) => {
                    stack[sp] = vars[i as usize];
                    sp += 1;
                }
                Op::Neg => stack[sp - 1] = -stack[sp - 1],
                Op::Add => {
                    sp -= 1;
                    stack[sp - 1] += stack[sp];
                }
                Op::Sub => {
                    sp -= 1;
                    stack[sp - 1] -= stack[sp];
                }
                Op::Mul => {
                    sp -= 1;
                    stack[sp - 1] *= stack[sp];
                }
                Op::Div => {
                    sp -= 1;
                    stack[sp - 1] /= stack[sp];
                }
                Op::Call(f) => {
                    let v = stack[sp - 1];
                    stack[sp - 1] = match f {
                        Func::Sin => libm::sin(v),
                        Func::Cos => libm::cos(v),
                        Func::Exp => libm::exp(v),
                        Func::Sqrt => libm::sqrt(v),
                        Func::Abs => v.abs(),
                    };
                }
            }
        }
        stack[0]
    }

    pub fn eval_point(&self, x: &Point) -> Result<f64> {
        if x.chart() != self.chart || (self.dim != 0 && x.dim() != self.dim) {
            return Err(Error::ChartMismatch);
        }
        let v = self.eval_raw(&x.raw());
        if v.is_finite() {
            Ok(v)
        } else {
            Err(ExprError::MathDomain { component: 0 }.into())
        }
    }

    /// Value of an expression without variables.
    pub fn eval_constant(&self) -> Result<f64, ExprError> {
        let v = self.eval_raw(&[0.0; MAX_DIM]);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(ExprError::MathDomain { component: 0 })
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_node(f, &self.root, self.chart, 0)
    }
}

fn emit(node: &Node, code: &mut Vec<Op>) {
    match node {
        Node::Num(v) => code.push(Op::Push(*v)),
        Node::Pi => code.push(Op::Push(core::f64::consts::PI)),
        Node::Var(i) => code.push(Op::Load(*i)),
        Node::Neg(a) => {
            emit(a, code);
            code.push(Op::Neg);
        }
        Node::Bin(op, a, b) => {
            emit(a, code);
            emit(b, code);
            code.push(match op {
                BinOp::Add => Op::Add,
                BinOp::Sub => Op::Sub,
                BinOp::Mul => Op::Mul,
                BinOp::Div => Op::Div,
            });
        }
        Node::Call(func, a) => {
            emit(a, code);
            code.push(Op::Call(*func));
        }
    }
}

const PREC_UNARY: u8 = 3;

fn node_prec(node: &Node) -> u8 {
    match node {
        Node::Bin(op, ..) => op.prec(),
        Node::Neg(_) => PREC_UNARY,
        _ => 4,
    }
}

/// Canonical printer: parenthesizes exactly where re-parsing would otherwise
/// build a different tree.
fn write_node(f: &mut fmt::Formatter<'_>, node: &Node, chart: Chart, min_prec: u8) -> fmt::Result {
    let wrap = node_prec(node) < min_prec;
    if wrap {
        f.write_str("(")?;
    }
    match node {
        Node::Num(v) => write!(f, "{v}")?,
        Node::Pi => f.write_str("pi")?,
        Node::Var(i) => write!(f, "{}", symbol_name(chart, *i))?,
        Node::Neg(a) => {
            f.write_str("-")?;
            write_node(f, a, chart, PREC_UNARY)?;
        }
        Node::Bin(op, a, b) => {
            let p = op.prec();
            write_node(f, a, chart, p)?;
            write!(f, " {} ", op.symbol())?;
            write_node(f, b, chart, p + 1)?;
        }
        Node::Call(func, a) => {
            write!(f, "{}(", func.name())?;
            write_node(f, a, chart, 0)?;
            f.write_str(")")?;
        }
    }
    if wrap {
        f.write_str(")")?;
    }
    Ok(())
}

/// A vector of expressions, one per component, over the coordinates of a chart.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldExpr {
    chart: Chart,
    dim: usize,
    components: Vec<Expr>,
}

impl FieldExpr {
    /// Parses a field with exactly `dim` components over a `dim`-dimensional chart.
    pub fn parse(src: &str, dim: usize, chart: Chart) -> Result<Self, ExprError> {
        Self::parse_with_components(src, chart, dim, dim)
    }

    /// Parses `components` expressions over a `dim`-dimensional chart.
    pub fn parse_with_components(
        src: &str,
        chart: Chart,
        dim: usize,
        components: usize,
    ) -> Result<Self, ExprError> {
        let parsed = parse_components(src, chart, dim)?;
        if parsed.len() != components {
            return Err(ExprError::Arity {
                expected: components,
                found: parsed.len(),
            });
        }
        Ok(Self {
            chart,
            dim,
            components: parsed,
        })
    }

    pub fn chart(&self) -> Chart {
        self.chart
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn components(&self) -> &[Expr] {
        &self.components
    }

    /// Componentwise evaluation, reporting the first non-finite component.
    pub fn eval(&self, x: &Point) -> Result<[f64; MAX_DIM]> {
        if x.chart() != self.chart || x.dim() != self.dim {
            return Err(Error::ChartMismatch);
        }
        self.eval_raw(&x.raw()).map_err(Error::from)
    }

    #[inline]
    pub(crate) fn eval_raw(&self, vars: &[f64; MAX_DIM]) -> Result<[f64; MAX_DIM], ExprError> {
        let mut out = [0.0; MAX_DIM];
        for (i, e) in self.components.iter().enumerate() {
            let v = e.eval_raw(vars);
            if !v.is_finite() {
                return Err(ExprError::MathDomain { component: i });
            }
            out[i] = v;
        }
        Ok(out)
    }

    /// Evaluates and wraps the result as a point of the same chart.
    pub fn map_point(&self, x: &Point) -> Result<Point> {
        let out = self.eval(x)?;
        let p = Point::from_raw(self.chart, self.components.len(), out);
        p.validate()?;
        Ok(p)
    }
}

impl fmt::Display for FieldExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, c) in self.components.iter().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{c}")?;
        }
        Ok(())
    }
}

fn parse_components(src: &str, chart: Chart, dim: usize) -> Result<Vec<Expr>, ExprError> {
    let mut p = Parser {
        src: src.as_bytes(),
        text: src,
        pos: 0,
        chart,
        dim,
    };
    let mut out = Vec::new();
    loop {
        p.skip_ws();
        let start = p.pos;
        let node = p.expr()?;
        out.push(Expr::compile(node, chart, dim, start)?);
        p.skip_ws();
        match p.peek() {
            None => break,
            Some(b';') => p.pos += 1,
            Some(_) => return Err(p.error("unexpected character")),
        }
    }
    Ok(out)
}

struct Parser<'a> {
    src: &'a [u8],
    text: &'a str,
    pos: usize,
    chart: Chart,
    dim: usize,
}

impl Parser<'_> {
    fn error(&self, message: &'static str) -> ExprError {
        ExprError::Syntax {
            offset: self.pos,
            message,
        }
    }

    fn peek(&self) -> Option<u8> {
        self.src.get(self.pos).copied()
    }

    fn skip_ws(&mut self) {
        while matches!(self.peek(), Some(b' ' | b'\t' | b'\n' | b'\r')) {
            self.pos += 1;
        }
    }

    fn expr(&mut self) -> Result<Node, ExprError> {
        let mut lhs = self.term()?;
        loop {
            self.skip_ws();
            let op = match self.peek() {
                Some(b'+') => BinOp::Add,
                Some(b'-') => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            let rhs = self.term()?;
            lhs = Node::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn term(&mut self) -> Result<Node, ExprError> {
        let mut lhs = self.unary()?;
        loop {
            self.skip_ws();
            let op = match self.peek() {
                Some(b'*') => BinOp::Mul,
                Some(b'/') => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = Node::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn unary(&mut self) -> Result<Node, ExprError> {
        self.skip_ws();
        if self.peek() == Some(b'-') {
            self.pos += 1;
            let inner = self.unary()?;
            return Ok(Node::Neg(Box::new(inner)));
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<Node, ExprError> {
        self.skip_ws();
        match self.peek() {
            None => Err(self.error("unexpected end of input")),
            Some(b'(') => {
                self.pos += 1;
                let inner = self.expr()?;
                self.expect_close()?;
                Ok(inner)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => self.identifier(),
            Some(_) => Err(self.error("expected a number, symbol or '('")),
        }
    }

    fn expect_close(&mut self) -> Result<(), ExprError> {
        self.skip_ws();
        if self.peek() == Some(b')') {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.error("expected ')'"))
        }
    }

    fn number(&mut self) -> Result<Node, ExprError> {
        let start = self.pos;
        let digits = |p: &mut Self| {
            let s = p.pos;
            while matches!(p.peek(), Some(c) if c.is_ascii_digit()) {
                p.pos += 1;
            }
            p.pos - s
        };
        let mut n = digits(self);
        if self.peek() == Some(b'.') {
            self.pos += 1;
            n += digits(self);
        }
        if n == 0 {
            self.pos = start;
            return Err(self.error("malformed number"));
        }
        if matches!(self.peek(), Some(b'e' | b'E')) {
            let save = self.pos;
            self.pos += 1;
            if matches!(self.peek(), Some(b'+' | b'-')) {
                self.pos += 1;
            }
            if digits(self) == 0 {
                self.pos = save;
                return Err(self.error("malformed exponent"));
            }
        }
        let text = &self.text[start..self.pos];
        match text.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(Node::Num(v)),
            _ => {
                self.pos = start;
                Err(self.error("number out of range"))
            }
        }
    }

    fn identifier(&mut self) -> Result<Node, ExprError> {
        let start = self.pos;
        while matches!(self.peek(), Some(c) if c.is_ascii_alphanumeric() || c == b'_') {
            self.pos += 1;
        }
        let name = &self.text[start..self.pos];
        let save = self.pos;
        self.skip_ws();
        if self.peek() == Some(b'(') {
            let Some(func) = Func::from_name(name) else {
                return Err(ExprError::UnknownSymbol {
                    name: name.to_owned(),
                    offset: start,
                });
            };
            self.pos += 1;
            let arg = self.expr()?;
            self.expect_close()?;
            return Ok(Node::Call(func, Box::new(arg)));
        }
        self.pos = save;
        if Func::from_name(name).is_some() {
            return Err(self.error("expected '(' after function name"));
        }
        if name == "pi" {
            return Ok(Node::Pi);
        }
        match symbol_index(self.chart, self.dim, name) {
            Some(i) => Ok(Node::Var(i)),
            None => Err(ExprError::UnknownSymbol {
                name: String::from(name),
                offset: start,
            }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;
    use core::f64::consts::PI;

    fn polar(src: &str) -> FieldExpr {
        FieldExpr::parse(src, 2, Chart::Polar2d).unwrap()
    }

    #[test]
    fn annulus_fields_parse() {
        let rot = polar("0; 1");
        let p = Point::polar(1.3, 2.0).unwrap();
        assert_eq!(&rot.eval(&p).unwrap()[..2], &[0.0, 1.0]);

        let con = polar("1 - r; 1");
        let q = Point::polar(2.0, 0.0).unwrap();
        assert_eq!(&con.eval(&q).unwrap()[..2], &[-1.0, 1.0]);

        let zero = polar("0; 0");
        assert_eq!(&zero.eval(&q).unwrap()[..2], &[0.0, 0.0]);
    }

    #[test]
    fn unbalanced_parenthesis_reports_offset() {
        let err = Expr::parse("sin(", Chart::Polar2d, 2).unwrap_err();
        assert!(
            matches!(err, ExprError::Syntax { offset: 4, .. }),
            "{err:?}"
        );
        let err = Expr::parse("(1 + r", Chart::Polar2d, 2).unwrap_err();
        assert!(
            matches!(err, ExprError::Syntax { offset: 6, .. }),
            "{err:?}"
        );
    }

    #[test]
    fn unknown_symbols_and_arity() {
        let err = FieldExpr::parse("x3; 1", 2, Chart::Cartesian).unwrap_err();
        assert_eq!(
            err,
            ExprError::UnknownSymbol {
                name: "x3".into(),
                offset: 0
            }
        );
        let err = FieldExpr::parse("r; th", 2, Chart::Cartesian).unwrap_err();
        assert!(matches!(err, ExprError::UnknownSymbol { .. }));
        let err = FieldExpr::parse("tan(r); 1", 2, Chart::Polar2d).unwrap_err();
        assert!(matches!(err, ExprError::UnknownSymbol { offset: 0, .. }));
        let err = FieldExpr::parse("1; 2; 3", 2, Chart::Polar2d).unwrap_err();
        assert_eq!(
            err,
            ExprError::Arity {
                expected: 2,
                found: 3
            }
        );
        assert!(FieldExpr::parse("1;", 2, Chart::Polar2d).is_err());
        assert!(Expr::parse("sin", Chart::Polar2d, 2).is_err());
        assert!(Expr::parse("1e999", Chart::Polar2d, 2).is_err());
    }

    #[test]
    fn precedence_and_unary_minus() {
        let e = Expr::parse("1 - 2 - 3 * 4 / 2 + -2", Chart::Cartesian, 0).unwrap();
        assert_eq!(e.eval_constant().unwrap(), 1.0 - 2.0 - 6.0 - 2.0);
        let e = Expr::parse("2 * (1 + pi) / 4", Chart::Cartesian, 0).unwrap();
        assert!((e.eval_constant().unwrap() - (1.0 + PI) / 2.0).abs() < 1e-15);
        let e = Expr::parse("1.5e-3 + .5 + 2.", Chart::Cartesian, 0).unwrap();
        assert_eq!(e.eval_constant().unwrap(), 1.5e-3 + 0.5 + 2.0);
    }

    #[test]
    fn math_domain_errors_name_the_component() {
        let f = FieldExpr::parse("1; sqrt(x1)", 2, Chart::Cartesian).unwrap();
        let p = Point::cartesian(&[-1.0, 0.0]).unwrap();
        assert_eq!(
            f.eval(&p).unwrap_err(),
            Error::Expr(ExprError::MathDomain { component: 1 })
        );
        let f = FieldExpr::parse("1 / x2; 0", 2, Chart::Cartesian).unwrap();
        assert!(f.eval(&p).is_err());
    }

    #[test]
    fn chart_mismatch_is_rejected() {
        let f = polar("0; 1");
        let p = Point::cartesian(&[1.0, 0.0]).unwrap();
        assert_eq!(f.eval(&p).unwrap_err(), Error::ChartMismatch);
    }

    #[test]
    fn printer_output_is_canonical() {
        let f = polar("-(r - 1)*2;  1 - (th - 1)");
        assert_eq!(f.to_string(), "-(r - 1) * 2; 1 - (th - 1)");
        let e = Expr::parse("a", Chart::Cartesian, 0);
        assert!(e.is_err());
    }

    const CORPUS: &[&str] = &[
        "0",
        "1",
        "1 - r",
        "-r",
        "--r",
        "r - -th",
        "r * th / 2",
        "r / (th * 2)",
        "r - (th - 1)",
        "(r - th) - 1",
        "r / (th / 2)",
        "-(r + th) * 3",
        "sin(th)",
        "cos(th) * sin(th)",
        "exp(-th) + sqrt(abs(r))",
        "1e-12 - abs(r - 1) - (1 - cos(th))",
        "(1 + r) / 2",
        "2 * r - 1",
        "pi",
        "th - 5e-7",
        "1.25e3 * (r - 0.001)",
        "-(-(-r))",
        "sqrt(r * r + th * th) / (1 + exp(-(r)))",
        "abs(sin(th / 2)) - 0.1 * r",
    ];

    #[test]
    fn corpus_round_trips_structurally() {
        for src in CORPUS {
            let a = Expr::parse(src, Chart::Polar2d, 2).unwrap();
            let printed = a.to_string();
            let b = Expr::parse(&printed, Chart::Polar2d, 2).unwrap();
            assert_eq!(a, b, "{src} -> {printed}");
            assert_eq!(printed, b.to_string());
        }
    }
}
