//! Polynomials over the chart variables, with exact partial derivatives.
//!
//! Gauge tests and the `verify` suites need a function `F(t, x, y)` together
//! with its differential `dF` as component expressions. Symbolic rewriting is
//! out of scope for the expression language, so gauge terms are generated
//! here coefficient-wise: a [`Poly`] knows its own partials exactly and can
//! render itself as an expression tree.

use crate::expr::{Expr, Var};
use rand::{Rng, RngExt};

/// Sparse polynomial: sum of `coeff * t^e0 * x1^e1 ... * ym^e(2m)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Poly {
    m: usize,
    /// (coefficient, exponent per chart variable), chart order `(t, x.., y..)`.
    terms: Vec<(f64, Vec<u32>)>,
}

impl Poly {
    pub fn zero(m: usize) -> Self {
        Poly {
            m,
            terms: Vec::new(),
        }
    }

    pub fn constant(m: usize, c: f64) -> Self {
        let mut p = Poly::zero(m);
        if c != 0.0 {
            p.terms.push((c, vec![0; 2 * m + 1]));
        }
        p
    }

    pub fn dimension(&self) -> usize {
        self.m
    }

    /// Add a term given `(coeff, exps)`; exps drives the chart order.
    pub fn push_term(&mut self, coeff: f64, exps: Vec<u32>) {
        assert_eq!(exps.len(), 2 * self.m + 1);
        if coeff != 0.0 {
            self.terms.push((coeff, exps));
        }
    }

    /// Random polynomial of total degree <= `max_degree` with up to
    /// `n_terms` terms and coefficients in `[-1, 1]`.
    pub fn random(rng: &mut impl Rng, m: usize, max_degree: u32, n_terms: usize) -> Self {
        let n_vars = 2 * m + 1;
        let mut poly = Poly::zero(m);
        for _ in 0..n_terms {
            let mut exps = vec![0u32; n_vars];
            let degree = rng.random_range(0..=max_degree);
            for _ in 0..degree {
                exps[rng.random_range(0..n_vars)] += 1;
            }
            let coeff = rng.random_range(-1.0..1.0);
            poly.push_term(coeff, exps);
        }
        poly
    }

    /// Exact partial derivative with respect to chart variable `var_index`.
    pub fn partial(&self, var_index: usize) -> Poly {
        let mut out = Poly::zero(self.m);
        for (coeff, exps) in &self.terms {
            let e = exps[var_index];
            if e > 0 {
                let mut de = exps.clone();
                de[var_index] = e - 1;
                out.push_term(coeff * f64::from(e), de);
            }
        }
        out
    }

    pub fn eval(&self, point: &[f64]) -> f64 {
        assert_eq!(point.len(), 2 * self.m + 1);
        self.terms
            .iter()
            .map(|(c, exps)| {
                c * exps
                    .iter()
                    .zip(point)
                    .map(|(&e, &v)| v.powi(e as i32))
                    .product::<f64>()
            })
            .sum()
    }

    /// Render as an expression tree over the chart variables.
    pub fn to_expr(&self) -> Expr {
        if self.terms.is_empty() {
            return Expr::Number(0.0);
        }
        let mut acc: Option<Expr> = None;
        for (coeff, exps) in &self.terms {
            let mut factors: Vec<Expr> = Vec::new();
            for (idx, &e) in exps.iter().enumerate() {
                if e == 0 {
                    continue;
                }
                let var = self.chart_var(idx);
                let base = Expr::var(var);
                if e == 1 {
                    factors.push(base);
                } else {
                    factors.push(Expr::Binary(
                        crate::expr::BinaryOp::Pow,
                        Box::new(base),
                        Box::new(Expr::Number(f64::from(e))),
                    ));
                }
            }
            let mut term = Expr::Number(*coeff);
            for f in factors {
                term = Expr::mul(term, f);
            }
            acc = Some(match acc {
                None => term,
                Some(prev) => Expr::add(prev, term),
            });
        }
        acc.unwrap()
    }

    fn chart_var(&self, idx: usize) -> Var {
        if idx == 0 {
            Var::T
        } else if idx <= self.m {
            Var::X(idx)
        } else {
            Var::Y(idx - self.m)
        }
    }
}
