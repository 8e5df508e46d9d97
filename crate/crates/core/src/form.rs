//! Tangent forms `omega = omega0 dt + omega_i dx^i + omegabar_i dy^i`,
//! their Lagrangians and actions on curves, pointwise classification,
//! equivalence witnesses and the pointed-Lagrangian decomposition.

use crate::error::{Error, Result};
use crate::expr::{parse, Expr, Var};
use crate::jet::{idx_x, idx_y, Jet2, VarSet, IDX_T};
use crate::linalg::Matrix;
use crate::poly::Poly;
use crate::quad::gauss_legendre;
use serde::Serialize;

/// Threshold under which the antisymmetrized vertical Jacobian counts as
/// identically zero (the vertical-closedness test of the singular criterion).
pub const SINGULAR_NORM_TOL: f64 = 1e-10;

/// A time-dependent 1-form on a tangent bundle, in a single chart on R^m.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentForm {
    m: usize,
    omega0: Expr,
    omega: Vec<Expr>,
    omegabar: Vec<Expr>,
    name: Option<String>,
}

impl TangentForm {
    pub fn new(
        m: usize,
        omega0: Expr,
        omega: Vec<Expr>,
        omegabar: Vec<Expr>,
        name: Option<String>,
    ) -> Result<Self> {
        if m == 0 {
            return Err(Error::argument("dimension must be positive"));
        }
        if omega.len() != m || omegabar.len() != m {
            return Err(Error::argument(format!(
                "component vectors must have length {m} (got {} and {})",
                omega.len(),
                omegabar.len()
            )));
        }
        let check = |e: &Expr| -> Result<()> {
            for v in e.free_vars() {
                let k = match v {
                    Var::T => 0,
                    Var::X(k) | Var::Y(k) => k,
                };
                if k > m {
                    return Err(Error::argument(format!(
                        "variable `{v}` exceeds dimension {m}"
                    )));
                }
            }
            Ok(())
        };
        check(&omega0)?;
        for e in omega.iter().chain(omegabar.iter()) {
            check(e)?;
        }
        Ok(TangentForm {
            m,
            omega0,
            omega,
            omegabar,
            name,
        })
    }

    /// Parse a form from component source strings.
    pub fn from_strings(
        m: usize,
        omega0: &str,
        omega: &[&str],
        omegabar: &[&str],
        name: Option<&str>,
    ) -> Result<Self> {
        let o0 = parse(omega0, m)?;
        let o: Vec<Expr> = omega.iter().map(|s| parse(s, m)).collect::<Result<_>>()?;
        let ob: Vec<Expr> = omegabar
            .iter()
            .map(|s| parse(s, m))
            .collect::<Result<_>>()?;
        TangentForm::new(m, o0, o, ob, name.map(str::to_string))
    }

    pub fn dimension(&self) -> usize {
        self.m
    }

    pub fn name(&self) -> Option<&str> {
        self.name.as_deref()
    }

    pub fn set_name(&mut self, name: Option<String>) {
        self.name = name;
    }

    pub fn omega0(&self) -> &Expr {
        &self.omega0
    }

    pub fn omega(&self) -> &[Expr] {
        &self.omega
    }

    pub fn omegabar(&self) -> &[Expr] {
        &self.omegabar
    }

    /// True when every component is independent of the fiber variables `y`.
    /// Together with `m == 1` this is the "basic" hypothesis of the
    /// one-dimensional theory.
    pub fn is_basic(&self) -> bool {
        self.m == 1
            && std::iter::once(&self.omega0)
                .chain(&self.omega)
                .chain(&self.omegabar)
                .all(|e| e.free_vars().iter().all(|v| !v.is_y()))
    }

    /// The form `omega + dF` with `dF` added symbolically, component-wise.
    pub fn with_added_differential(&self, f: &Poly) -> TangentForm {
        assert_eq!(f.dimension(), self.m);
        let m = self.m;
        let omega0 = Expr::add(self.omega0.clone(), f.partial(IDX_T).to_expr());
        let omega = (0..m)
            .map(|i| Expr::add(self.omega[i].clone(), f.partial(idx_x(i)).to_expr()))
            .collect();
        let omegabar = (0..m)
            .map(|i| Expr::add(self.omegabar[i].clone(), f.partial(idx_y(m, i)).to_expr()))
            .collect();
        TangentForm {
            m,
            omega0,
            omega,
            omegabar,
            name: None,
        }
    }

    /// The form `omega + a_i (dx^i - y^i dt)` for coefficient expressions `a`.
    pub fn with_added_g_element(&self, a: &[Expr]) -> TangentForm {
        assert_eq!(a.len(), self.m);
        let mut dt_part = Expr::mul(a[0].clone(), Expr::var(Var::Y(1)));
        for (i, ai) in a.iter().enumerate().skip(1) {
            dt_part = Expr::add(dt_part, Expr::mul(ai.clone(), Expr::var(Var::Y(i + 1))));
        }
        let omega0 = Expr::sub(self.omega0.clone(), dt_part);
        let omega = self
            .omega
            .iter()
            .zip(a)
            .map(|(o, ai)| Expr::add(o.clone(), ai.clone()))
            .collect();
        TangentForm {
            m: self.m,
            omega0,
            omega,
            omegabar: self.omegabar.clone(),
            name: None,
        }
    }

    /// Evaluate all components as jets at chart point `(t, x, y)`.
    pub(crate) fn jets_at(&self, t: f64, x: &[f64], y: &[f64]) -> Result<FormJets> {
        let m = self.m;
        assert_eq!(x.len(), m);
        assert_eq!(y.len(), m);
        let vars = VarSet::for_dimension(m);
        let mut point = Vec::with_capacity(2 * m + 1);
        point.push(t);
        point.extend_from_slice(x);
        point.extend_from_slice(y);
        let env = Jet2::seed_all(&vars, &point)?;
        let omega0 = self.omega0.eval_jet(&env, m)?;
        let omega = self
            .omega
            .iter()
            .map(|e| e.eval_jet(&env, m))
            .collect::<Result<Vec<_>>>()?;
        let omegabar = self
            .omegabar
            .iter()
            .map(|e| e.eval_jet(&env, m))
            .collect::<Result<Vec<_>>>()?;
        Ok(FormJets {
            m,
            omega0,
            omega,
            omegabar,
        })
    }

    /// Component values only, at `(t, x, y)`.
    pub fn component_values(
        &self,
        t: f64,
        x: &[f64],
        y: &[f64],
    ) -> Result<(f64, Vec<f64>, Vec<f64>)> {
        let m = self.m;
        let mut point = Vec::with_capacity(2 * m + 1);
        point.push(t);
        point.extend_from_slice(x);
        point.extend_from_slice(y);
        let o0 = self.omega0.eval_value(&point, m)?;
        let o = self
            .omega
            .iter()
            .map(|e| e.eval_value(&point, m))
            .collect::<Result<Vec<_>>>()?;
        let ob = self
            .omegabar
            .iter()
            .map(|e| e.eval_value(&point, m))
            .collect::<Result<Vec<_>>>()?;
        Ok((o0, o, ob))
    }
}

/// Jets of all components of a form at one chart point.
pub(crate) struct FormJets {
    pub m: usize,
    pub omega0: Jet2,
    pub omega: Vec<Jet2>,
    pub omegabar: Vec<Jet2>,
}

impl FormJets {
    pub fn t(&self) -> usize {
        IDX_T
    }

    pub fn x(&self, j: usize) -> usize {
        idx_x(j)
    }

    pub fn y(&self, j: usize) -> usize {
        idx_y(self.m, j)
    }

    /// Antisymmetrized vertical Jacobian `h_ij = d(omegabar_i)/dy^j - d(omegabar_j)/dy^i`.
    pub fn h_matrix(&self) -> Matrix {
        Matrix::from_fn(self.m, self.m, |i, j| {
            self.omegabar[i].d(self.y(j)) - self.omegabar[j].d(self.y(i))
        })
    }

    /// Vertical Jacobian `N_ij = d(omegabar_i)/dy^j` (the Legendre differential).
    pub fn n_matrix(&self) -> Matrix {
        Matrix::from_fn(self.m, self.m, |i, j| self.omegabar[i].d(self.y(j)))
    }
}

/// A point of the derivative chart `(t, x, y = dx/dt, z = d2x/dt2, w = d3x/dt3)`.
///
/// Present levels form a prefix: `w` can only be set when `z` is.
#[derive(Debug, Clone, PartialEq)]
pub struct JetPoint {
    pub t: f64,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    z: Option<Vec<f64>>,
    w: Option<Vec<f64>>,
}

impl JetPoint {
    pub fn new(t: f64, x: Vec<f64>, y: Vec<f64>) -> Self {
        assert_eq!(x.len(), y.len());
        JetPoint {
            t,
            x,
            y,
            z: None,
            w: None,
        }
    }

    pub fn with_z(t: f64, x: Vec<f64>, y: Vec<f64>, z: Vec<f64>) -> Self {
        assert_eq!(x.len(), y.len());
        assert_eq!(x.len(), z.len());
        JetPoint {
            t,
            x,
            y,
            z: Some(z),
            w: None,
        }
    }

    pub fn with_w(t: f64, x: Vec<f64>, y: Vec<f64>, z: Vec<f64>, w: Vec<f64>) -> Self {
        assert_eq!(x.len(), y.len());
        assert_eq!(x.len(), z.len());
        assert_eq!(x.len(), w.len());
        JetPoint {
            t,
            x,
            y,
            z: Some(z),
            w: Some(w),
        }
    }

    pub fn dim(&self) -> usize {
        self.x.len()
    }

    pub fn z(&self) -> Result<&[f64]> {
        self.z
            .as_deref()
            .ok_or_else(|| Error::argument("jet point carries no acceleration level z"))
    }

    pub fn w(&self) -> Result<&[f64]> {
        self.w
            .as_deref()
            .ok_or_else(|| Error::argument("jet point carries no third-derivative level w"))
    }

    pub fn has_z(&self) -> bool {
        self.z.is_some()
    }

    pub fn has_w(&self) -> bool {
        self.w.is_some()
    }
}

/// Second-order Lagrangian of the form: `L = omega0 + omega_i y^i + omegabar_i z^i`.
pub fn lagrangian(form: &TangentForm, p: &JetPoint) -> Result<f64> {
    let z = p.z()?;
    let (o0, o, ob) = form.component_values(p.t, &p.x, &p.y)?;
    let mut acc = o0;
    for (oi, yi) in o.iter().zip(&p.y) {
        acc += oi * yi;
    }
    for (obi, zi) in ob.iter().zip(z) {
        acc += obi * zi;
    }
    Ok(acc)
}

/// A uniformly sampled curve on R^m.
#[derive(Debug, Clone)]
pub struct Curve {
    t0: f64,
    t1: f64,
    samples: Vec<Vec<f64>>,
}

impl Curve {
    /// `samples[k]` is `x(t0 + k h)` with `h = (t1 - t0) / (samples.len() - 1)`.
    pub fn new(t0: f64, t1: f64, samples: Vec<Vec<f64>>) -> Result<Self> {
        if !t0.is_finite() || !t1.is_finite() || t0 >= t1 {
            return Err(Error::argument("curve needs t0 < t1"));
        }
        if samples.len() < 5 {
            return Err(Error::argument(
                "curve needs at least 5 nodes for second-difference stencils",
            ));
        }
        let m = samples[0].len();
        if m == 0 || samples.iter().any(|s| s.len() != m) {
            return Err(Error::argument("curve samples have inconsistent dimension"));
        }
        Ok(Curve { t0, t1, samples })
    }

    /// Sample an analytic curve on a uniform grid of `n` intervals.
    pub fn sample(t0: f64, t1: f64, n: usize, f: impl Fn(f64) -> Vec<f64>) -> Result<Self> {
        let h = (t1 - t0) / n as f64;
        let samples = (0..=n).map(|k| f(t0 + k as f64 * h)).collect();
        Curve::new(t0, t1, samples)
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn t1(&self) -> f64 {
        self.t1
    }

    pub fn nodes(&self) -> &[Vec<f64>] {
        &self.samples
    }

    pub fn nodes_mut(&mut self) -> &mut [Vec<f64>] {
        &mut self.samples
    }

    pub fn step(&self) -> f64 {
        (self.t1 - self.t0) / (self.samples.len() - 1) as f64
    }

    /// First and second derivatives at every node: central differences in the
    /// interior, one-sided second-order stencils at the ends.
    pub fn derivatives(&self) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        let n = self.samples.len();
        let m = self.samples[0].len();
        let h = self.step();
        let s = &self.samples;
        let mut d1 = vec![vec![0.0; m]; n];
        let mut d2 = vec![vec![0.0; m]; n];
        for c in 0..m {
            d1[0][c] = (-3.0 * s[0][c] + 4.0 * s[1][c] - s[2][c]) / (2.0 * h);
            d1[n - 1][c] = (3.0 * s[n - 1][c] - 4.0 * s[n - 2][c] + s[n - 3][c]) / (2.0 * h);
            d2[0][c] = (2.0 * s[0][c] - 5.0 * s[1][c] + 4.0 * s[2][c] - s[3][c]) / (h * h);
            d2[n - 1][c] =
                (2.0 * s[n - 1][c] - 5.0 * s[n - 2][c] + 4.0 * s[n - 3][c] - s[n - 4][c]) / (h * h);
            for k in 1..n - 1 {
                d1[k][c] = (s[k + 1][c] - s[k - 1][c]) / (2.0 * h);
                d2[k][c] = (s[k + 1][c] - 2.0 * s[k][c] + s[k - 1][c]) / (h * h);
            }
        }
        (d1, d2)
    }
}

fn with_node(err: Error, k: usize) -> Error {
    match err {
        Error::Domain {
            func,
            value,
            context,
        } => Error::Domain {
            func,
            value,
            context: format!("{context} at curve node {k}"),
        },
        other => other,
    }
}

/// Action of the form along a sampled curve: composite trapezoid over the
/// integrand `omega0 + omega_i dx^i/dt + omegabar_i d2x^i/dt2`, with the
/// curve derivatives taken from second-order difference stencils.
pub fn action(form: &TangentForm, curve: &Curve) -> Result<f64> {
    if curve.nodes()[0].len() != form.dimension() {
        return Err(Error::argument(format!(
            "curve dimension {} does not match form dimension {}",
            curve.nodes()[0].len(),
            form.dimension()
        )));
    }
    let (d1, d2) = curve.derivatives();
    let n = curve.nodes().len();
    let h = curve.step();
    let mut acc = 0.0;
    for k in 0..n {
        let t = curve.t0() + k as f64 * h;
        let p = JetPoint::with_z(t, curve.nodes()[k].clone(), d1[k].clone(), d2[k].clone());
        let g = lagrangian(form, &p).map_err(|e| with_node(e, k))?;
        let weight = if k == 0 || k == n - 1 { 0.5 } else { 1.0 };
        acc += weight * g;
    }
    Ok(acc * h)
}

/// Pointwise classification at one sample.
#[derive(Debug, Clone, Serialize)]
pub struct SampleClass {
    pub regular: bool,
    pub non_degenerated: bool,
    pub singular: bool,
    pub cond_h: f64,
    pub cond_n: f64,
}

/// Classification over a sample set.
///
/// Aggregates hold at *every* sample. `regular` additionally requires the
/// sample not to be singular, which keeps `singular => !regular` structural
/// even for vanishingly small `h`.
#[derive(Debug, Clone, Serialize)]
pub struct ClassificationReport {
    pub regular: bool,
    pub non_degenerated: bool,
    pub singular: bool,
    pub basic: bool,
    pub worst_cond_h: f64,
    pub worst_cond_n: f64,
    pub per_sample: Vec<SampleClass>,
}

/// Classify the form on the supplied samples (only `(t, x, y)` is read).
pub fn classify(form: &TangentForm, samples: &[JetPoint]) -> Result<ClassificationReport> {
    if samples.is_empty() {
        return Err(Error::argument("classification needs at least one sample"));
    }
    let mut per_sample = Vec::with_capacity(samples.len());
    let mut worst_cond_h: f64 = 0.0;
    let mut worst_cond_n: f64 = 0.0;
    for p in samples {
        let jets = form.jets_at(p.t, &p.x, &p.y)?;
        let h = jets.h_matrix();
        let n = jets.n_matrix();
        let cond_h = h.cond_inf();
        let cond_n = n.cond_inf();
        let singular = h.max_abs() < SINGULAR_NORM_TOL;
        per_sample.push(SampleClass {
            regular: h.is_invertible() && !singular,
            non_degenerated: n.is_invertible(),
            singular,
            cond_h,
            cond_n,
        });
        worst_cond_h = worst_cond_h.max(cond_h);
        worst_cond_n = worst_cond_n.max(cond_n);
    }
    Ok(ClassificationReport {
        regular: per_sample.iter().all(|s| s.regular),
        non_degenerated: per_sample.iter().all(|s| s.non_degenerated),
        singular: per_sample.iter().all(|s| s.singular),
        basic: form.is_basic(),
        worst_cond_h,
        worst_cond_n,
        per_sample,
    })
}

/// Outcome of an equivalence-witness check.
#[derive(Debug, Clone, Serialize)]
pub struct EquivalenceReport {
    pub equivalent: bool,
    pub worst_residual: f64,
}

/// Tolerance for the equivalence-witness identities.
pub const EQUIVALENCE_TOL: f64 = 1e-9;

/// Check that `F` witnesses the equivalence of `a` and `b`:
/// `omegabar_b = omegabar_a + dF/dy` and
/// `omega_b_i y^i + omega_b_0 = (dF/dx^i + omega_a_i) y^i + dF/dt + omega_a_0`
/// at every sample.
pub fn equivalence_check(
    a: &TangentForm,
    b: &TangentForm,
    f: &Expr,
    samples: &[JetPoint],
) -> Result<EquivalenceReport> {
    if a.dimension() != b.dimension() {
        return Err(Error::argument("forms have different dimensions"));
    }
    if f.free_vars().iter().any(|v| match v {
        Var::T => false,
        Var::X(k) | Var::Y(k) => *k > a.dimension(),
    }) {
        return Err(Error::argument("witness F exceeds the form dimension"));
    }
    let m = a.dimension();
    let vars = VarSet::for_dimension(m);
    let mut worst = 0.0_f64;
    for p in samples {
        let ja = a.jets_at(p.t, &p.x, &p.y)?;
        let jb = b.jets_at(p.t, &p.x, &p.y)?;
        let mut point = Vec::with_capacity(2 * m + 1);
        point.push(p.t);
        point.extend_from_slice(&p.x);
        point.extend_from_slice(&p.y);
        let env = Jet2::seed_all(&vars, &point)?;
        let jf = f.eval_jet(&env, m)?;
        for i in 0..m {
            let r = jb.omegabar[i].value - ja.omegabar[i].value - jf.d(idx_y(m, i));
            worst = worst.max(r.abs());
        }
        let lhs: f64 = (0..m).map(|i| jb.omega[i].value * p.y[i]).sum::<f64>() + jb.omega0.value;
        let rhs: f64 = (0..m)
            .map(|i| (jf.d(idx_x(i)) + ja.omega[i].value) * p.y[i])
            .sum::<f64>()
            + jf.d(IDX_T)
            + ja.omega0.value;
        worst = worst.max((lhs - rhs).abs());
    }
    Ok(EquivalenceReport {
        equivalent: worst < EQUIVALENCE_TOL,
        worst_residual: worst,
    })
}

/// Decompose a pointed Lagrangian `L(t, x, y)` (with `L(t, x, 0) = 0`) as
/// `L = y^i nu_i` via `nu_i = integral_0^1 dL/dy^i (t, x, tau y) d tau`.
pub fn pointed_decompose(
    l: &Expr,
    m: usize,
    t: f64,
    x: &[f64],
    y: &[f64],
    quad_nodes: usize,
) -> Result<Vec<f64>> {
    if quad_nodes < 8 {
        return Err(Error::argument(
            "pointed decomposition needs >= 8 quadrature nodes",
        ));
    }
    let mut origin = Vec::with_capacity(2 * m + 1);
    origin.push(t);
    origin.extend_from_slice(x);
    origin.extend(std::iter::repeat_n(0.0, m));
    let at_zero = l.eval_value(&origin, m)?;
    if at_zero.abs() > 1e-10 {
        return Err(Error::Precondition(format!(
            "Lagrangian is not pointed: L(t, x, 0) = {at_zero:.3e}"
        )));
    }
    let vars = VarSet::for_dimension(m);
    let (nodes, weights) = gauss_legendre(quad_nodes);
    let mut nu = vec![0.0; m];
    for (node, weight) in nodes.iter().zip(&weights) {
        let tau = 0.5 * (node + 1.0);
        let mut point = Vec::with_capacity(2 * m + 1);
        point.push(t);
        point.extend_from_slice(x);
        point.extend(y.iter().map(|v| tau * v));
        let env = Jet2::seed_all(&vars, &point)?;
        let jet = l.eval_jet(&env, m)?;
        for (i, nui) in nu.iter_mut().enumerate() {
            *nui += 0.5 * weight * jet.d(idx_y(m, i));
        }
    }
    Ok(nu)
}
