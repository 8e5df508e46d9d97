//! The expression language for tangent-form components.
//!
//! Components `omega0`, `omega_i`, `omegabar_i` are written over the chart
//! variables `t, x1..xm, y1..ym` with the operators `+ - * / ^`, unary minus,
//! parentheses, the functions `sin cos exp ln sqrt` and the constant `pi`.
//! Precedence is `^` (right-assoc) over unary minus over `* /` over `+ -`.
//! Implicit multiplication is a syntax error.

use crate::error::{Error, Result};
use crate::jet::{idx_x, idx_y, Jet2, IDX_T};
use std::collections::BTreeSet;
use std::fmt;

/// A chart variable reference.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Var {
    T,
    /// `x<k>`, 1-based.
    X(usize),
    /// `y<k>`, 1-based.
    Y(usize),
}

impl Var {
    /// Index into the `(t, x1..xm, y1..ym)` chart of a dimension-`m` form.
    pub fn chart_index(self, m: usize) -> usize {
        match self {
            Var::T => IDX_T,
            Var::X(k) => idx_x(k - 1),
            Var::Y(k) => idx_y(m, k - 1),
        }
    }

    pub fn is_y(self) -> bool {
        matches!(self, Var::Y(_))
    }
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Var::T => write!(f, "t"),
            Var::X(k) => write!(f, "x{k}"),
            Var::Y(k) => write!(f, "y{k}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnaryOp {
    Neg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Ln,
    Sqrt,
}

impl Func {
    fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Ln => "ln",
            Func::Sqrt => "sqrt",
        }
    }

    fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "exp" => Func::Exp,
            "ln" => Func::Ln,
            "sqrt" => Func::Sqrt,
            _ => return None,
        })
    }
}

/// Expression AST. Immutable and freely shareable.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Number(f64),
    Pi,
    Var(Var),
    Unary(UnaryOp, Box<Expr>),
    Binary(BinaryOp, Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

impl Expr {
    pub fn number(v: f64) -> Expr {
        Expr::Number(v)
    }

    pub fn var(v: Var) -> Expr {
        Expr::Var(v)
    }

    #[allow(clippy::should_implement_trait)]
    pub fn neg(e: Expr) -> Expr {
        Expr::Unary(UnaryOp::Neg, Box::new(e))
    }

    #[allow(clippy::should_implement_trait)]
    pub fn add(a: Expr, b: Expr) -> Expr {
        Expr::Binary(BinaryOp::Add, Box::new(a), Box::new(b))
    }

    #[allow(clippy::should_implement_trait)]
    pub fn sub(a: Expr, b: Expr) -> Expr {
        Expr::Binary(BinaryOp::Sub, Box::new(a), Box::new(b))
    }

    #[allow(clippy::should_implement_trait)]
    pub fn mul(a: Expr, b: Expr) -> Expr {
        Expr::Binary(BinaryOp::Mul, Box::new(a), Box::new(b))
    }

    /// The free variables occurring in the tree.
    pub fn free_vars(&self) -> BTreeSet<Var> {
        let mut set = BTreeSet::new();
        self.collect_vars(&mut set);
        set
    }

    fn collect_vars(&self, set: &mut BTreeSet<Var>) {
        match self {
            Expr::Number(_) | Expr::Pi => {}
            Expr::Var(v) => {
                set.insert(*v);
            }
            Expr::Unary(_, e) | Expr::Call(_, e) => e.collect_vars(set),
            Expr::Binary(_, a, b) => {
                a.collect_vars(set);
                b.collect_vars(set);
            }
        }
    }

    /// True when no free variable lies outside `allowed`.
    pub fn depends_only_on(&self, allowed: impl Fn(Var) -> bool) -> bool {
        self.free_vars().into_iter().all(allowed)
    }

    /// Evaluate on jets. `env[i]` must hold the jet of chart variable `i`
    /// for the owning dimension `m`.
    pub fn eval_jet(&self, env: &[Jet2], m: usize) -> Result<Jet2> {
        let n_vars = 2 * m + 1;
        assert_eq!(env.len(), n_vars, "environment does not match chart");
        match self {
            Expr::Number(v) => Ok(Jet2::constant(*v, n_vars)),
            Expr::Pi => Ok(Jet2::constant(std::f64::consts::PI, n_vars)),
            Expr::Var(v) => Ok(env[v.chart_index(m)].clone()),
            Expr::Unary(UnaryOp::Neg, e) => Ok(e.eval_jet(env, m)?.neg()),
            Expr::Binary(op, a, b) => {
                let ja = a.eval_jet(env, m)?;
                let jb = b.eval_jet(env, m)?;
                match op {
                    BinaryOp::Add => Ok(ja.add(&jb)),
                    BinaryOp::Sub => Ok(ja.sub(&jb)),
                    BinaryOp::Mul => Ok(ja.mul(&jb)),
                    BinaryOp::Div => ja.div(&jb).map_err(|e| self.locate(e)),
                    BinaryOp::Pow => {
                        // Constant integral exponents take the integer-power
                        // route (valid for negative bases); same rule as
                        // eval_value so the two paths agree exactly.
                        if b.free_vars().is_empty()
                            && jb.value.fract() == 0.0
                            && jb.value.abs() <= i32::MAX as f64
                        {
                            ja.powi(jb.value as i32).map_err(|e| self.locate(e))
                        } else {
                            ja.pow(&jb).map_err(|e| self.locate(e))
                        }
                    }
                }
            }
            Expr::Call(func, e) => {
                let j = e.eval_jet(env, m)?;
                match func {
                    Func::Sin => Ok(j.sin()),
                    Func::Cos => Ok(j.cos()),
                    Func::Exp => Ok(j.exp()),
                    Func::Ln => j.ln().map_err(|e| self.locate(e)),
                    Func::Sqrt => j.sqrt().map_err(|e| self.locate(e)),
                }
            }
        }
    }

    /// Plain value evaluation; performs the same floating operations in the
    /// same order as the value channel of [`Expr::eval_jet`].
    pub fn eval_value(&self, point: &[f64], m: usize) -> Result<f64> {
        assert_eq!(point.len(), 2 * m + 1, "point does not match chart");
        match self {
            Expr::Number(v) => Ok(*v),
            Expr::Pi => Ok(std::f64::consts::PI),
            Expr::Var(v) => Ok(point[v.chart_index(m)]),
            Expr::Unary(UnaryOp::Neg, e) => Ok(-e.eval_value(point, m)?),
            Expr::Binary(op, a, b) => {
                let va = a.eval_value(point, m)?;
                let vb = b.eval_value(point, m)?;
                match op {
                    BinaryOp::Add => Ok(va + vb),
                    BinaryOp::Sub => Ok(va - vb),
                    BinaryOp::Mul => Ok(va * vb),
                    BinaryOp::Div => {
                        if vb == 0.0 {
                            Err(self.locate(Error::Domain {
                                func: "div",
                                value: 0.0,
                                context: String::new(),
                            }))
                        } else {
                            Ok(va / vb)
                        }
                    }
                    BinaryOp::Pow => {
                        if b.free_vars().is_empty()
                            && vb.fract() == 0.0
                            && vb.abs() <= i32::MAX as f64
                        {
                            if va == 0.0 && vb < 0.0 {
                                return Err(self.locate(Error::Domain {
                                    func: "pow",
                                    value: 0.0,
                                    context: String::new(),
                                }));
                            }
                            Ok(va.powi(vb as i32))
                        } else if va <= 0.0 {
                            Err(self.locate(Error::Domain {
                                func: "pow",
                                value: va,
                                context: String::new(),
                            }))
                        } else {
                            Ok((vb * va.ln()).exp())
                        }
                    }
                }
            }
            Expr::Call(func, e) => {
                let v = e.eval_value(point, m)?;
                match func {
                    Func::Sin => Ok(v.sin()),
                    Func::Cos => Ok(v.cos()),
                    Func::Exp => Ok(v.exp()),
                    Func::Ln => {
                        if v <= 0.0 {
                            Err(self.locate(Error::Domain {
                                func: "ln",
                                value: v,
                                context: String::new(),
                            }))
                        } else {
                            Ok(v.ln())
                        }
                    }
                    Func::Sqrt => {
                        if v <= 0.0 {
                            Err(self.locate(Error::Domain {
                                func: "sqrt",
                                value: v,
                                context: String::new(),
                            }))
                        } else {
                            Ok(v.sqrt())
                        }
                    }
                }
            }
        }
    }

    fn locate(&self, err: Error) -> Error {
        match err {
            Error::Domain {
                func,
                value,
                context,
            } if context.is_empty() => Error::Domain {
                func,
                value,
                context: format!(" in `{self}`"),
            },
            other => other,
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Binary(BinaryOp::Add | BinaryOp::Sub, _, _) => 1,
            Expr::Binary(BinaryOp::Mul | BinaryOp::Div, _, _) => 2,
            Expr::Unary(_, _) => 3,
            Expr::Binary(BinaryOp::Pow, _, _) => 4,
            _ => 5,
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn paren(f: &mut fmt::Formatter<'_>, e: &Expr, need: bool) -> fmt::Result {
            if need {
                write!(f, "(")?;
                write!(f, "{e}")?;
                write!(f, ")")
            } else {
                write!(f, "{e}")
            }
        }
        match self {
            Expr::Number(v) => write!(f, "{v}"),
            Expr::Pi => write!(f, "pi"),
            Expr::Var(v) => write!(f, "{v}"),
            Expr::Unary(UnaryOp::Neg, e) => {
                write!(f, "-")?;
                paren(f, e, e.precedence() < 3)
            }
            Expr::Binary(op, a, b) => {
                let (sym, prec, right_assoc) = match op {
                    BinaryOp::Add => (" + ", 1, false),
                    BinaryOp::Sub => (" - ", 1, false),
                    BinaryOp::Mul => ("*", 2, false),
                    BinaryOp::Div => ("/", 2, false),
                    BinaryOp::Pow => ("^", 4, true),
                };
                // left child needs parens below prec (or at prec for right-assoc)
                let lneed = a.precedence() < prec || (right_assoc && a.precedence() == prec);
                // right child needs parens at-or-below prec for left-assoc ops
                let rneed = b.precedence() < prec || (!right_assoc && b.precedence() == prec);
                paren(f, a, lneed)?;
                write!(f, "{sym}")?;
                paren(f, b, rneed)
            }
            Expr::Call(func, e) => write!(f, "{}({e})", func.name()),
        }
    }
}

// ---------------------------------------------------------------------------
// Lexing and parsing
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Number(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    Eof,
}

#[derive(Debug, Clone)]
struct Spanned {
    tok: Tok,
    offset: usize,
}

fn lex(source: &str) -> Result<Vec<Spanned>> {
    let bytes = source.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        match c {
            ' ' | '\t' | '\n' | '\r' => i += 1,
            '+' | '-' | '*' | '/' | '^' | '(' | ')' => {
                let tok = match c {
                    '+' => Tok::Plus,
                    '-' => Tok::Minus,
                    '*' => Tok::Star,
                    '/' => Tok::Slash,
                    '^' => Tok::Caret,
                    '(' => Tok::LParen,
                    _ => Tok::RParen,
                };
                out.push(Spanned { tok, offset: i });
                i += 1;
            }
            '0'..='9' | '.' => {
                let start = i;
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
                if i < bytes.len() && bytes[i] == b'.' {
                    i += 1;
                    while i < bytes.len() && bytes[i].is_ascii_digit() {
                        i += 1;
                    }
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
                let text = &source[start..i];
                let value: f64 = text.parse().map_err(|_| Error::Parse {
                    offset: start,
                    message: format!("malformed number `{text}`"),
                })?;
                out.push(Spanned {
                    tok: Tok::Number(value),
                    offset: start,
                });
            }
            'a'..='z' | 'A'..='Z' => {
                let start = i;
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric()) {
                    i += 1;
                }
                out.push(Spanned {
                    tok: Tok::Ident(source[start..i].to_string()),
                    offset: start,
                });
            }
            _ => {
                return Err(Error::Parse {
                    offset: i,
                    message: format!("unexpected character `{c}`"),
                })
            }
        }
    }
    out.push(Spanned {
        tok: Tok::Eof,
        offset: source.len(),
    });
    Ok(out)
}

struct Parser {
    tokens: Vec<Spanned>,
    cursor: usize,
    dimension: usize,
}

// Binding powers: +,- (1,2); *,/ (3,4); unary minus 5; ^ (8,7) right-assoc.
const PREFIX_BP: u8 = 5;

impl Parser {
    fn peek(&self) -> &Spanned {
        &self.tokens[self.cursor]
    }

    fn bump(&mut self) -> Spanned {
        let t = self.tokens[self.cursor].clone();
        if self.cursor + 1 < self.tokens.len() {
            self.cursor += 1;
        }
        t
    }

    fn expect_rparen(&mut self) -> Result<()> {
        let t = self.bump();
        if t.tok == Tok::RParen {
            Ok(())
        } else {
            Err(Error::Parse {
                offset: t.offset,
                message: "expected `)`".into(),
            })
        }
    }

    fn resolve_ident(&self, name: &str, offset: usize) -> Result<Expr> {
        if name == "t" {
            return Ok(Expr::Var(Var::T));
        }
        if name == "pi" {
            return Ok(Expr::Pi);
        }
        let (kind, rest) = name.split_at(1);
        if (kind == "x" || kind == "y") && !rest.is_empty() && !rest.starts_with('0') {
            if let Ok(k) = rest.parse::<usize>() {
                if k > self.dimension {
                    return Err(Error::Parse {
                        offset,
                        message: format!("variable `{name}` exceeds dimension {}", self.dimension),
                    });
                }
                return Ok(Expr::Var(if kind == "x" { Var::X(k) } else { Var::Y(k) }));
            }
        }
        Err(Error::Parse {
            offset,
            message: format!("unknown identifier `{name}`"),
        })
    }

    fn primary(&mut self) -> Result<Expr> {
        let t = self.bump();
        match t.tok {
            Tok::Number(v) => Ok(Expr::Number(v)),
            Tok::Minus => {
                let operand = self.expression(PREFIX_BP)?;
                Ok(Expr::neg(operand))
            }
            Tok::LParen => {
                let inner = self.expression(0)?;
                self.expect_rparen()?;
                Ok(inner)
            }
            Tok::Ident(name) => {
                if let Some(func) = Func::from_name(&name) {
                    let next = self.bump();
                    if next.tok != Tok::LParen {
                        return Err(Error::Parse {
                            offset: next.offset,
                            message: format!("expected `(` after `{name}`"),
                        });
                    }
                    let arg = self.expression(0)?;
                    self.expect_rparen()?;
                    Ok(Expr::Call(func, Box::new(arg)))
                } else {
                    self.resolve_ident(&name, t.offset)
                }
            }
            _ => Err(Error::Parse {
                offset: t.offset,
                message: "expected an expression".into(),
            }),
        }
    }

    fn expression(&mut self, min_bp: u8) -> Result<Expr> {
        let mut lhs = self.primary()?;
        loop {
            let (op, lbp, rbp) = match self.peek().tok {
                Tok::Plus => (BinaryOp::Add, 1, 2),
                Tok::Minus => (BinaryOp::Sub, 1, 2),
                Tok::Star => (BinaryOp::Mul, 3, 4),
                Tok::Slash => (BinaryOp::Div, 3, 4),
                Tok::Caret => (BinaryOp::Pow, 8, 7),
                _ => break,
            };
            if lbp < min_bp {
                break;
            }
            self.bump();
            let rhs = self.expression(rbp)?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }
}

/// Parse `source` as a component expression of a dimension-`m` form.
pub fn parse(source: &str, dimension: usize) -> Result<Expr> {
    let tokens = lex(source)?;
    let mut parser = Parser {
        tokens,
        cursor: 0,
        dimension,
    };
    let expr = parser.expression(0)?;
    let trailing = parser.peek();
    if trailing.tok != Tok::Eof {
        return Err(Error::Parse {
            offset: trailing.offset,
            message: "trailing input".into(),
        });
    }
    Ok(expr)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jet::VarSet;

    fn env_for(m: usize, point: &[f64]) -> Vec<Jet2> {
        Jet2::seed_all(&VarSet::for_dimension(m), point).unwrap()
    }

    #[test]
    fn single_token_variable() {
        assert_eq!(parse("y2", 2).unwrap(), Expr::Var(Var::Y(2)));
    }

    #[test]
    fn out_of_range_variable_is_rejected() {
        let err = parse("y3", 2).unwrap_err();
        assert!(matches!(err, Error::Parse { .. }), "{err}");
        assert!(err.to_string().contains("exceeds dimension"));
    }

    #[test]
    fn structured_negation() {
        let e = parse("-(x1*y2 - x2*y1)", 2).unwrap();
        let expected = Expr::neg(Expr::sub(
            Expr::mul(Expr::Var(Var::X(1)), Expr::Var(Var::Y(2))),
            Expr::mul(Expr::Var(Var::X(2)), Expr::Var(Var::Y(1))),
        ));
        assert_eq!(e, expected);
    }

    #[test]
    fn print_parse_is_a_fixpoint() {
        for src in [
            "-(x1*y2 - x2*y1)",
            "1.5*x1^2 - y1/(t + 2)",
            "sin(t)*y2 + sqrt(x1^2 + 1)",
            "2^-3^2",
            "-x1^2",
            "(x1 + y1)*(x1 - y1)",
            "pi*t",
        ] {
            let once = parse(src, 2).unwrap().to_string();
            let twice = parse(&once, 2).unwrap().to_string();
            assert_eq!(once, twice, "not canonical for `{src}`");
        }
    }

    #[test]
    fn unary_minus_binds_below_pow() {
        // -x1^2 must be -(x1^2): value at x1=2 is -4
        let e = parse("-x1^2", 1).unwrap();
        let v = e.eval_value(&[0.0, 2.0, 0.0], 1).unwrap();
        assert_eq!(v, -4.0);
        // 2^-2 is 0.25
        let e = parse("2^-2", 1).unwrap();
        assert_eq!(e.eval_value(&[0.0, 0.0, 0.0], 1).unwrap(), 0.25);
    }

    #[test]
    fn implicit_multiplication_is_rejected() {
        assert!(parse("2x1", 2).is_err());
        assert!(parse("x1 y1", 2).is_err());
    }

    #[test]
    fn unknown_identifier_is_rejected() {
        let err = parse("foo + 1", 2).unwrap_err();
        assert!(err.to_string().contains("unknown identifier"));
    }

    #[test]
    fn eval_jet_linear() {
        let e = parse("t + x1", 2).unwrap();
        let env = env_for(2, &[1.0, 2.0, 0.0, 0.0, 0.0]);
        let j = e.eval_jet(&env, 2).unwrap();
        assert_eq!(j.value, 3.0);
        assert_eq!(j.grad(), &[1.0, 1.0, 0.0, 0.0, 0.0]);
        assert_eq!(j.hess_matrix().max_abs(), 0.0);
    }

    #[test]
    fn eval_jet_norm_gradient() {
        let e = parse("sqrt(y1^2 + y2^2)", 2).unwrap();
        let env = env_for(2, &[0.0, 0.0, 0.0, 3.0, 4.0]);
        let j = e.eval_jet(&env, 2).unwrap();
        assert!((j.value - 5.0).abs() < 1e-15);
        assert!((j.d(3) - 0.6).abs() < 1e-15);
        assert!((j.d(4) - 0.8).abs() < 1e-15);
    }

    #[test]
    fn free_vars_examples() {
        assert_eq!(
            parse("x1 + 1", 2).unwrap().free_vars(),
            [Var::X(1)].into_iter().collect()
        );
        assert_eq!(
            parse("sin(t)*y2", 2).unwrap().free_vars(),
            [Var::T, Var::Y(2)].into_iter().collect()
        );
        assert!(parse("3.5", 2).unwrap().free_vars().is_empty());
    }

    #[test]
    fn value_and_jet_agree_exactly() {
        let e = parse("sin(t)*y2 + x1^3/(y1 + 2) - exp(t/4)", 2).unwrap();
        let point = [0.7, 1.3, -0.4, 0.9, 2.2];
        let env = env_for(2, &point);
        let jet = e.eval_jet(&env, 2).unwrap();
        let val = e.eval_value(&point, 2).unwrap();
        assert_eq!(jet.value, val);
    }

    #[test]
    fn domain_error_carries_expression_location() {
        let e = parse("1/(y1 - 1)", 1).unwrap();
        let err = e.eval_value(&[0.0, 0.0, 1.0], 1).unwrap_err();
        assert!(err.to_string().contains("div"), "{err}");
    }
}
