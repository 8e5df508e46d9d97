//! Truncated second-order multivariate jets (forward-mode AD).
//!
//! A [`Jet2`] carries a value, its gradient and its Hessian with respect to
//! the chart variables `(t, x1..xm, y1..ym)`. Every component function of a
//! tangent form is evaluated once on jets; all the partial derivatives that
//! the Euler-Lagrange expansion and the Hamiltonian checks need come out of
//! that single evaluation.
//!
//! The Hessian is stored as a packed lower triangle, so symmetry holds
//! bit-exactly by construction.

use crate::error::{Error, Result};

/// Ordered chart variables `(t, x1..xm, y1..ym)` for a dimension-`m` form.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VarSet {
    labels: Vec<String>,
}

impl VarSet {
    /// The 2m+1 chart variables of a dimension-`m` tangent form.
    pub fn for_dimension(m: usize) -> Self {
        assert!(m >= 1, "dimension must be positive");
        let mut labels = Vec::with_capacity(2 * m + 1);
        labels.push("t".to_string());
        for i in 1..=m {
            labels.push(format!("x{i}"));
        }
        for i in 1..=m {
            labels.push(format!("y{i}"));
        }
        VarSet { labels }
    }

    /// A var set with arbitrary labels (used by tests and the FD harness).
    pub fn with_labels(labels: &[&str]) -> Self {
        assert!(!labels.is_empty());
        let set: std::collections::BTreeSet<_> = labels.iter().collect();
        assert_eq!(set.len(), labels.len(), "labels must be unique");
        VarSet {
            labels: labels.iter().map(|s| s.to_string()).collect(),
        }
    }

    pub fn count(&self) -> usize {
        self.labels.len()
    }

    pub fn label(&self, index: usize) -> &str {
        &self.labels[index]
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == name)
    }
}

/// Index of `t` in the chart order.
pub const IDX_T: usize = 0;

/// Index of `x^(i)` (0-based `i`) in the chart order.
pub fn idx_x(i: usize) -> usize {
    1 + i
}

/// Index of `y^(i)` (0-based `i`) for a dimension-`m` chart.
pub fn idx_y(m: usize, i: usize) -> usize {
    1 + m + i
}

fn packed_len(n: usize) -> usize {
    n * (n + 1) / 2
}

fn packed_index(i: usize, j: usize) -> usize {
    let (hi, lo) = if i >= j { (i, j) } else { (j, i) };
    hi * (hi + 1) / 2 + lo
}

/// Value, gradient and packed symmetric Hessian of a scalar function.
#[derive(Debug, Clone, PartialEq)]
pub struct Jet2 {
    pub value: f64,
    grad: Vec<f64>,
    hess: Vec<f64>,
}

impl Jet2 {
    /// Constant jet: zero gradient and Hessian.
    pub fn constant(value: f64, n_vars: usize) -> Self {
        Jet2 {
            value,
            grad: vec![0.0; n_vars],
            hess: vec![0.0; packed_len(n_vars)],
        }
    }

    /// Seed an independent variable: gradient is the `index`-th basis vector.
    pub fn seed(vars: &VarSet, index: usize, value: f64) -> Result<Self> {
        if index >= vars.count() {
            return Err(Error::argument(format!(
                "seed index {index} out of range for {} variables",
                vars.count()
            )));
        }
        let mut jet = Jet2::constant(value, vars.count());
        jet.grad[index] = 1.0;
        Ok(jet)
    }

    /// Seed the full chart at a point: one jet per variable.
    pub fn seed_all(vars: &VarSet, point: &[f64]) -> Result<Vec<Self>> {
        if point.len() != vars.count() {
            return Err(Error::argument(format!(
                "point has {} coordinates, var set has {}",
                point.len(),
                vars.count()
            )));
        }
        point
            .iter()
            .enumerate()
            .map(|(i, &v)| Jet2::seed(vars, i, v))
            .collect()
    }

    pub fn n_vars(&self) -> usize {
        self.grad.len()
    }

    pub fn grad(&self) -> &[f64] {
        &self.grad
    }

    /// First partial with respect to variable `a`.
    pub fn d(&self, a: usize) -> f64 {
        self.grad[a]
    }

    /// Second partial with respect to variables `a`, `b` (order-free).
    pub fn dd(&self, a: usize, b: usize) -> f64 {
        self.hess[packed_index(a, b)]
    }

    /// Dense copy of the Hessian.
    pub fn hess_matrix(&self) -> crate::linalg::Matrix {
        let n = self.n_vars();
        crate::linalg::Matrix::from_fn(n, n, |i, j| self.dd(i, j))
    }

    pub fn is_finite(&self) -> bool {
        self.value.is_finite()
            && self.grad.iter().all(|v| v.is_finite())
            && self.hess.iter().all(|v| v.is_finite())
    }

    fn same_shape(&self, other: &Jet2) -> bool {
        self.grad.len() == other.grad.len()
    }

    pub fn add(&self, other: &Jet2) -> Jet2 {
        assert!(self.same_shape(other), "jet var sets differ");
        Jet2 {
            value: self.value + other.value,
            grad: zip_with(&self.grad, &other.grad, |a, b| a + b),
            hess: zip_with(&self.hess, &other.hess, |a, b| a + b),
        }
    }

    pub fn sub(&self, other: &Jet2) -> Jet2 {
        assert!(self.same_shape(other), "jet var sets differ");
        Jet2 {
            value: self.value - other.value,
            grad: zip_with(&self.grad, &other.grad, |a, b| a - b),
            hess: zip_with(&self.hess, &other.hess, |a, b| a - b),
        }
    }

    pub fn neg(&self) -> Jet2 {
        Jet2 {
            value: -self.value,
            grad: self.grad.iter().map(|v| -v).collect(),
            hess: self.hess.iter().map(|v| -v).collect(),
        }
    }

    pub fn scale(&self, s: f64) -> Jet2 {
        Jet2 {
            value: s * self.value,
            grad: self.grad.iter().map(|v| s * v).collect(),
            hess: self.hess.iter().map(|v| s * v).collect(),
        }
    }

    /// Product rule truncated at order 2.
    pub fn mul(&self, other: &Jet2) -> Jet2 {
        assert!(self.same_shape(other), "jet var sets differ");
        let n = self.n_vars();
        let value = self.value * other.value;
        let grad = (0..n)
            .map(|a| self.value * other.grad[a] + other.value * self.grad[a])
            .collect();
        let mut hess = vec![0.0; packed_len(n)];
        for i in 0..n {
            for j in 0..=i {
                hess[packed_index(i, j)] = self.value * other.dd(i, j)
                    + other.value * self.dd(i, j)
                    + self.grad[i] * other.grad[j]
                    + self.grad[j] * other.grad[i];
            }
        }
        Jet2 { value, grad, hess }
    }

    pub fn div(&self, other: &Jet2) -> Result<Jet2> {
        if other.value == 0.0 {
            return Err(Error::Domain {
                func: "div",
                value: 0.0,
                context: String::new(),
            });
        }
        // u/v = u * v^-1 with v^-1 by univariate chain rule
        let inv = other.chain("div", 1.0 / other.value, |v| {
            (-1.0 / (v * v), 2.0 / (v * v * v))
        })?;
        Ok(self.mul(&inv))
    }

    /// Univariate chain rule: given `f(u0)` and `(f'(u0), f''(u0))`.
    fn chain(&self, func: &'static str, f0: f64, df: impl Fn(f64) -> (f64, f64)) -> Result<Jet2> {
        let (f1, f2) = df(self.value);
        if !(f0.is_finite() && f1.is_finite() && f2.is_finite()) {
            return Err(Error::Domain {
                func,
                value: self.value,
                context: String::new(),
            });
        }
        let n = self.n_vars();
        let grad = self.grad.iter().map(|g| f1 * g).collect();
        let mut hess = vec![0.0; packed_len(n)];
        for i in 0..n {
            for j in 0..=i {
                hess[packed_index(i, j)] = f1 * self.dd(i, j) + f2 * self.grad[i] * self.grad[j];
            }
        }
        Ok(Jet2 {
            value: f0,
            grad,
            hess,
        })
    }

    pub fn sin(&self) -> Jet2 {
        self.chain("sin", self.value.sin(), |v| (v.cos(), -v.sin()))
            .expect("sin is total")
    }

    pub fn cos(&self) -> Jet2 {
        self.chain("cos", self.value.cos(), |v| (-v.sin(), -v.cos()))
            .expect("cos is total")
    }

    pub fn exp(&self) -> Jet2 {
        let e = self.value.exp();
        self.chain("exp", e, |_| (e, e)).expect("exp is total")
    }

    pub fn ln(&self) -> Result<Jet2> {
        if self.value <= 0.0 {
            return Err(Error::Domain {
                func: "ln",
                value: self.value,
                context: String::new(),
            });
        }
        self.chain("ln", self.value.ln(), |v| (1.0 / v, -1.0 / (v * v)))
    }

    pub fn sqrt(&self) -> Result<Jet2> {
        if self.value <= 0.0 {
            return Err(Error::Domain {
                func: "sqrt",
                value: self.value,
                context: String::new(),
            });
        }
        let r = self.value.sqrt();
        self.chain("sqrt", r, |v| (0.5 / r, -0.25 / (r * v)))
    }

    /// Integer power by the chain rule; valid for any base (also negative).
    pub fn powi(&self, k: i32) -> Result<Jet2> {
        if k == 0 {
            return Ok(Jet2::constant(1.0, self.n_vars()));
        }
        if self.value == 0.0 && k < 0 {
            return Err(Error::Domain {
                func: "pow",
                value: 0.0,
                context: String::new(),
            });
        }
        let v = self.value;
        let f0 = v.powi(k);
        let kf = f64::from(k);
        self.chain("pow", f0, |v| {
            (kf * v.powi(k - 1), kf * (kf - 1.0) * v.powi(k - 2))
        })
    }

    /// General power. Constant integer exponents go through [`Jet2::powi`];
    /// anything else uses `exp(b ln a)` and requires a positive base.
    pub fn pow(&self, exponent: &Jet2) -> Result<Jet2> {
        let is_const =
            exponent.grad.iter().all(|&g| g == 0.0) && exponent.hess.iter().all(|&h| h == 0.0);
        if is_const && exponent.value.fract() == 0.0 && exponent.value.abs() <= i32::MAX as f64 {
            return self.powi(exponent.value as i32);
        }
        if self.value <= 0.0 {
            return Err(Error::Domain {
                func: "pow",
                value: self.value,
                context: String::new(),
            });
        }
        Ok(exponent.mul(&self.ln()?).exp())
    }
}

fn zip_with(a: &[f64], b: &[f64], f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
    a.iter().zip(b).map(|(&x, &y)| f(x, y)).collect()
}

/// A function evaluable on jets, used by the FD validation harness.
pub type JetFn<'a> = dyn Fn(&[Jet2]) -> Result<Jet2> + 'a;

fn value_at(f: &JetFn, point: &[f64]) -> Result<f64> {
    let n = point.len();
    let jets: Vec<Jet2> = point.iter().map(|&v| Jet2::constant(v, n)).collect();
    Ok(f(&jets)?.value)
}

/// Compare AD derivatives of `f` against central finite differences at `point`.
///
/// First partials use step `h`; second partials use the sqrt(h)-scaled
/// stencils that balance truncation against rounding. Returns the maximum
/// relative discrepancy `|AD - FD| / (1 + |AD|)` over all first and second
/// partials.
pub fn fd_check(f: &JetFn, point: &[f64], h: f64) -> Result<f64> {
    assert!(h > 0.0, "FD step must be positive");
    let n = point.len();
    let labels: Vec<String> = (0..n).map(|i| format!("v{i}")).collect();
    let label_refs: Vec<&str> = labels.iter().map(String::as_str).collect();
    let vars = VarSet::with_labels(&label_refs);
    let ad = f(&Jet2::seed_all(&vars, point)?)?;

    let shifted = |deltas: &[(usize, f64)]| -> Result<f64> {
        let mut p = point.to_vec();
        for &(idx, d) in deltas {
            p[idx] += d;
        }
        value_at(f, &p)
    };

    let mut worst = 0.0_f64;
    for a in 0..n {
        let fd = (shifted(&[(a, h)])? - shifted(&[(a, -h)])?) / (2.0 * h);
        let err = (ad.d(a) - fd).abs() / (1.0 + ad.d(a).abs());
        worst = worst.max(err);
    }
    let h2 = h.sqrt();
    for a in 0..n {
        for b in 0..=a {
            let fd = if a == b {
                (shifted(&[(a, h2)])? - 2.0 * shifted(&[])? + shifted(&[(a, -h2)])?) / (h2 * h2)
            } else {
                (shifted(&[(a, h2), (b, h2)])?
                    - shifted(&[(a, h2), (b, -h2)])?
                    - shifted(&[(a, -h2), (b, h2)])?
                    + shifted(&[(a, -h2), (b, -h2)])?)
                    / (4.0 * h2 * h2)
            };
            let err = (ad.dd(a, b) - fd).abs() / (1.0 + ad.dd(a, b).abs());
            worst = worst.max(err);
        }
    }
    Ok(worst)
}
