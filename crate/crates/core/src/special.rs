//! The one-dimensional theory (standard Lagrangians for regular basic
//! forms), first-order semi-spray families with their applicability
//! criteria, the affine-antisymmetric fit, and the builtin example registry.

use crate::error::{Error, Result};
use crate::expr::{Expr, Var};
use crate::form::{FormJets, JetPoint, TangentForm};
use crate::jet::{idx_x, idx_y, IDX_T};
use crate::linalg::{Matrix, COND_LIMIT};
use crate::quad::adaptive_simpson;
use crate::variational::{phi_bar_values, phi_bar_z_matrix};
use std::collections::BTreeMap;

/// Tolerance used by hypothesis checks (fit residual, constancy spreads).
pub const HYPOTHESIS_TOL: f64 = 1e-9;

// ---------------------------------------------------------------------------
// dim-1 theory
// ---------------------------------------------------------------------------

fn require_basic(form: &TangentForm) -> Result<()> {
    if form.dimension() != 1 {
        return Err(Error::precondition(format!(
            "the one-dimensional theory needs m = 1, got m = {}",
            form.dimension()
        )));
    }
    if !form.is_basic() {
        return Err(Error::precondition(
            "form is not basic: a component depends on y1",
        ));
    }
    Ok(())
}

/// One-dimensional basic-form partials at `(t, x)` (the y value is inert).
struct Basic1DJets {
    jets: FormJets,
}

impl Basic1DJets {
    fn at(form: &TangentForm, t: f64, x: f64) -> Result<Self> {
        Ok(Basic1DJets {
            jets: form.jets_at(t, &[x], &[0.0])?,
        })
    }

    fn obar_x(&self) -> f64 {
        self.jets.omegabar[0].d(idx_x(0))
    }

    fn obar_xx(&self) -> f64 {
        self.jets.omegabar[0].dd(idx_x(0), idx_x(0))
    }

    fn obar_xt(&self) -> f64 {
        self.jets.omegabar[0].dd(idx_x(0), IDX_T)
    }

    fn obar_tt(&self) -> f64 {
        self.jets.omegabar[0].dd(IDX_T, IDX_T)
    }

    fn o0_x(&self) -> f64 {
        self.jets.omega0.d(idx_x(0))
    }

    fn o_t(&self) -> f64 {
        self.jets.omega[0].d(IDX_T)
    }
}

/// Euler-Lagrange residual of a basic one-dimensional form:
/// `2 obar_x z + obar_xx y^2 + 2 obar_xt y + (omega0_x - omega_t + obar_tt)`.
pub fn el1d_residual(form: &TangentForm, p: &JetPoint) -> Result<f64> {
    require_basic(form)?;
    let z = p.z()?[0];
    let y = p.y[0];
    let d = Basic1DJets::at(form, p.t, p.x[0])?;
    Ok(2.0 * d.obar_x() * z
        + d.obar_xx() * y * y
        + 2.0 * d.obar_xt() * y
        + (d.o0_x() - d.o_t() + d.obar_tt()))
}

/// A standard Lagrangian `L = P y^2 / 2 + Q y + R` describing the dynamics of
/// a regular basic one-dimensional form.
///
/// With the antiderivative `P = exp(2 int a)` anchored so that
/// `P(t, anchor) = obar_x(t, anchor)`, the identity `P = obar_x` holds and
/// the classical Euler-Lagrange residual agrees with [`el1d_residual`]
/// exactly, not merely up to a factor.
pub struct StandardLagrangian1D {
    form: TangentForm,
    q: Expr,
    anchor: f64,
}

/// Quadrature tolerance for the `R` antiderivative.
const R_QUAD_TOL: f64 = 1e-12;

/// Build the standard-Lagrangian description of a regular basic form. `q` is
/// the free gauge function `Q(t, x)` of the construction.
pub fn standard_lagrangian_1d(
    form: &TangentForm,
    q: Expr,
    x_anchor: f64,
) -> Result<StandardLagrangian1D> {
    require_basic(form)?;
    if q.free_vars().iter().any(|v| v.is_y()) {
        return Err(Error::argument("Q must be a function of (t, x) only"));
    }
    let probe = Basic1DJets::at(form, 0.0, x_anchor)?;
    if probe.obar_x() <= 0.0 {
        return Err(Error::Regularity {
            what: format!(
                "obar_x({x_anchor}) = {} is not positive; flip the sign of the form",
                probe.obar_x()
            ),
            cond: f64::INFINITY,
        });
    }
    Ok(StandardLagrangian1D {
        form: form.clone(),
        q,
        anchor: x_anchor,
    })
}

impl StandardLagrangian1D {
    /// `a = obar_xx / (2 obar_x)`.
    pub fn coeff_a(&self, t: f64, x: f64) -> Result<f64> {
        let d = Basic1DJets::at(&self.form, t, x)?;
        Ok(d.obar_xx() / (2.0 * d.obar_x()))
    }

    /// `b = obar_xt / obar_x`.
    pub fn coeff_b(&self, t: f64, x: f64) -> Result<f64> {
        let d = Basic1DJets::at(&self.form, t, x)?;
        Ok(d.obar_xt() / d.obar_x())
    }

    /// `c = (omega0_x - omega_t + obar_tt) / (2 obar_x)`.
    pub fn coeff_c(&self, t: f64, x: f64) -> Result<f64> {
        let d = Basic1DJets::at(&self.form, t, x)?;
        Ok((d.o0_x() - d.o_t() + d.obar_tt()) / (2.0 * d.obar_x()))
    }

    /// The anchored `P`, identically `obar_x`. Errors when positivity fails.
    pub fn p_coeff(&self, t: f64, x: f64) -> Result<f64> {
        let d = Basic1DJets::at(&self.form, t, x)?;
        let p = d.obar_x();
        if p <= 0.0 {
            return Err(Error::Regularity {
                what: format!("obar_x(t={t}, x={x}) = {p} is not positive"),
                cond: f64::INFINITY,
            });
        }
        Ok(p)
    }

    fn q_jet(&self, t: f64, x: f64) -> Result<(f64, f64, f64)> {
        // (Q, Q_t, Q_x)
        let jets = TangentForm::new(
            1,
            self.q.clone(),
            vec![Expr::Number(0.0)],
            vec![Expr::Number(0.0)],
            None,
        )?
        .jets_at(t, &[x], &[0.0])?;
        Ok((
            jets.omega0.value,
            jets.omega0.d(IDX_T),
            jets.omega0.d(idx_x(0)),
        ))
    }

    /// `R(t, x) = int_anchor^x (Q_t(t, s) - c(t, s) P(t, s)) ds` by adaptive
    /// quadrature.
    pub fn r_coeff(&self, t: f64, x: f64) -> Result<f64> {
        let mut integrand = |s: f64| -> Result<f64> {
            let d = Basic1DJets::at(&self.form, t, s)?;
            if d.obar_x() <= 0.0 {
                return Err(Error::Regularity {
                    what: format!(
                        "obar_x(t={t}, x={s}) = {} on the quadrature path",
                        d.obar_x()
                    ),
                    cond: f64::INFINITY,
                });
            }
            let (_, q_t, _) = self.q_jet(t, s)?;
            let c = (d.o0_x() - d.o_t() + d.obar_tt()) / (2.0 * d.obar_x());
            Ok(q_t - c * d.obar_x())
        };
        adaptive_simpson(&mut integrand, self.anchor, x, R_QUAD_TOL)
    }

    /// `R_x` by Richardson-extrapolated central differences of the
    /// quadrature route (independent of the algebraic identity
    /// `R_x = Q_t - c P`).
    pub fn r_x_fd(&self, t: f64, x: f64) -> Result<f64> {
        let h = 1e-4 * (1.0 + x.abs());
        let d1 = (self.r_coeff(t, x + h)? - self.r_coeff(t, x - h)?) / (2.0 * h);
        let d2 = (self.r_coeff(t, x + h / 2.0)? - self.r_coeff(t, x - h / 2.0)?) / h;
        Ok((4.0 * d2 - d1) / 3.0)
    }

    /// Value of the standard Lagrangian `P y^2 / 2 + Q y + R`.
    pub fn value(&self, t: f64, x: f64, y: f64) -> Result<f64> {
        let (q, _, _) = self.q_jet(t, x)?;
        Ok(0.5 * self.p_coeff(t, x)? * y * y + q * y + self.r_coeff(t, x)?)
    }

    /// Classical Euler-Lagrange residual of the standard Lagrangian,
    /// `2 P z + P_x y^2 + 2 P_t y + 2 (Q_t - R_x)`, with `R_x` obtained by
    /// numerical differentiation of the quadrature.
    pub fn classical_residual(&self, p: &JetPoint) -> Result<f64> {
        let z = p.z()?[0];
        let y = p.y[0];
        let d = Basic1DJets::at(&self.form, p.t, p.x[0])?;
        let (_, q_t, _) = self.q_jet(p.t, p.x[0])?;
        let r_x = self.r_x_fd(p.t, p.x[0])?;
        Ok(2.0 * d.obar_x() * z + d.obar_xx() * y * y + 2.0 * d.obar_xt() * y + 2.0 * (q_t - r_x))
    }

    /// The existence criterion `b_x - 2 a_t`, by Richardson-extrapolated
    /// central differences of the coefficient functions.
    pub fn criterion_residual(&self, t: f64, x: f64) -> Result<f64> {
        let h = 1e-4;
        let bx1 = (self.coeff_b(t, x + h)? - self.coeff_b(t, x - h)?) / (2.0 * h);
        let bx2 = (self.coeff_b(t, x + h / 2.0)? - self.coeff_b(t, x - h / 2.0)?) / h;
        let b_x = (4.0 * bx2 - bx1) / 3.0;
        let at1 = (self.coeff_a(t + h, x)? - self.coeff_a(t - h, x)?) / (2.0 * h);
        let at2 = (self.coeff_a(t + h / 2.0, x)? - self.coeff_a(t - h / 2.0, x)?) / h;
        let a_t = (4.0 * at2 - at1) / 3.0;
        Ok(b_x - 2.0 * a_t)
    }
}

// ---------------------------------------------------------------------------
// First-order semi-spray families
// ---------------------------------------------------------------------------

/// Which structural hypothesis the family realizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FamilyKind {
    /// All components depend only on `(y^i)`; the first integral is
    /// `p_i + omega_i = c_i`.
    YOnly,
    /// `omega0(y)`, `omegabar(y)` and `omega_i(x)` affine with antisymmetric
    /// Jacobian; the first integral is `p_i = -2 c_ij x^j + e_i`.
    Linear,
}

/// A family of first-order semi-sprays whose integral curves project onto
/// the solutions of the generalized Euler-Lagrange equation.
pub struct SemiSprayFamily {
    form: TangentForm,
    kind: FamilyKind,
    constants: Vec<f64>,
    c_matrix: Option<Matrix>,
}

fn only_y(form: &TangentForm) -> bool {
    std::iter::once(form.omega0())
        .chain(form.omega())
        .chain(form.omegabar())
        .all(|e| e.free_vars().iter().all(|v| v.is_y()))
}

/// Deterministic affinely-independent sample points for the fit.
fn fit_samples(m: usize) -> Vec<Vec<f64>> {
    (0..2 * m + 3)
        .map(|s| {
            (0..m)
                .map(|j| (0.7 * s as f64 + 1.3 * j as f64 + 0.4).sin() * 1.5)
                .collect()
        })
        .collect()
}

/// Build the y-only family (all component functions depend only on `y`)
/// with momentum constants `c`.
pub fn semispray_family_y_only(form: &TangentForm, c: &[f64]) -> Result<SemiSprayFamily> {
    if c.len() != form.dimension() {
        return Err(Error::argument("constant vector length must equal m"));
    }
    if !only_y(form) {
        return Err(Error::precondition(
            "a component depends on (t, x); the y-only family does not apply",
        ));
    }
    Ok(SemiSprayFamily {
        form: form.clone(),
        kind: FamilyKind::YOnly,
        constants: c.to_vec(),
        c_matrix: None,
    })
}

/// Build the linear family (`omega0(y)`, `omegabar(y)`,
/// `omega_i = c_ij x^j + d_i` antisymmetric) with momentum constants `e`.
pub fn semispray_family_linear(form: &TangentForm, e: &[f64]) -> Result<SemiSprayFamily> {
    let m = form.dimension();
    if e.len() != m {
        return Err(Error::argument("constant vector length must equal m"));
    }
    let y_ok = std::iter::once(form.omega0())
        .chain(form.omegabar())
        .all(|ex| ex.free_vars().iter().all(|v| v.is_y()));
    let x_ok = form
        .omega()
        .iter()
        .all(|ex| ex.free_vars().iter().all(|v| matches!(v, Var::X(_))));
    if !y_ok || !x_ok {
        return Err(Error::precondition(
            "hypothesis violated: need omega0(y), omegabar(y) and omega_i(x)",
        ));
    }
    let fit = antisym_affine_fit(form.omega(), m, &fit_samples(m))?;
    if fit.residual > HYPOTHESIS_TOL || fit.condition1_violation > HYPOTHESIS_TOL {
        return Err(Error::precondition(format!(
            "omega_i is not affine with antisymmetric Jacobian \
             (fit residual {:.3e}, symmetry violation {:.3e})",
            fit.residual, fit.condition1_violation
        )));
    }
    Ok(SemiSprayFamily {
        form: form.clone(),
        kind: FamilyKind::Linear,
        constants: e.to_vec(),
        c_matrix: Some(fit.c),
    })
}

impl SemiSprayFamily {
    pub fn kind(&self) -> FamilyKind {
        self.kind
    }

    pub fn constants(&self) -> &[f64] {
        &self.constants
    }

    /// Evaluate the semi-spray `Sbar(x, y)`: the solution of
    /// `Phibar(t, x, y, Sbar) = p(x)` with `p` the family's momentum law.
    pub fn eval(&self, t: f64, x: &[f64], y: &[f64]) -> Result<Vec<f64>> {
        let m = self.form.dimension();
        let jets = self.form.jets_at(t, x, y)?;
        let matrix = phi_bar_z_matrix(&jets);
        let cond = matrix.cond_inf();
        if cond >= COND_LIMIT {
            return Err(Error::Regularity {
                what: "h matrix is singular; the family is undefined here".into(),
                cond,
            });
        }
        let momentum: Vec<f64> = match self.kind {
            FamilyKind::YOnly => {
                // p = c - omega(y)
                let (_, omega, _) = self.form.component_values(t, x, y)?;
                (0..m).map(|i| self.constants[i] - omega[i]).collect()
            }
            FamilyKind::Linear => {
                // p = -2 c x + e
                let c = self.c_matrix.as_ref().expect("linear family has a fit");
                let cx = c.matvec(x);
                (0..m).map(|i| -2.0 * cx[i] + self.constants[i]).collect()
            }
        };
        let rest = phi_bar_values(&jets, y, &vec![0.0; m]);
        let rhs: Vec<f64> = (0..m).map(|i| momentum[i] - rest[i]).collect();
        matrix.solve(&rhs)
    }

    /// Integrate `(xdot, ydot) = (y, Sbar)` with fixed-step RK4; returns the
    /// states `(x | y)` on the uniform grid.
    pub fn integrate(
        &self,
        t0: f64,
        x0: &[f64],
        y0: &[f64],
        t1: f64,
        dt: f64,
    ) -> Result<Vec<Vec<f64>>> {
        let m = self.form.dimension();
        let mut state = Vec::with_capacity(2 * m);
        state.extend_from_slice(x0);
        state.extend_from_slice(y0);
        crate::dynamics::rk4_raw(t0, &state, t1, dt, &mut |t, s| {
            let (x, y) = s.split_at(m);
            let sbar = self.eval(t, x, y)?;
            let mut d = Vec::with_capacity(2 * m);
            d.extend_from_slice(y);
            d.extend_from_slice(&sbar);
            Ok(d)
        })
        .map(|(_, states)| states)
    }
}

/// Momentum constants matching a third-order initial jet for the y-only
/// family: `c = Phibar(jet) + omega(y)`.
pub fn y_only_constants(form: &TangentForm, p: &JetPoint) -> Result<Vec<f64>> {
    let z = p.z()?.to_vec();
    let jets = form.jets_at(p.t, &p.x, &p.y)?;
    let phibar = phi_bar_values(&jets, &p.y, &z);
    let (_, omega, _) = form.component_values(p.t, &p.x, &p.y)?;
    Ok((0..form.dimension())
        .map(|i| phibar[i] + omega[i])
        .collect())
}

/// Momentum constants matching a third-order initial jet for the linear
/// family: `e = Phibar(jet) + 2 c x`.
pub fn linear_constants(form: &TangentForm, p: &JetPoint) -> Result<Vec<f64>> {
    let m = form.dimension();
    let z = p.z()?.to_vec();
    let jets = form.jets_at(p.t, &p.x, &p.y)?;
    let phibar = phi_bar_values(&jets, &p.y, &z);
    let fit = antisym_affine_fit(form.omega(), m, &fit_samples(m))?;
    let cx = fit.c.matvec(&p.x);
    Ok((0..m).map(|i| phibar[i] + 2.0 * cx[i]).collect())
}

// ---------------------------------------------------------------------------
// Affine antisymmetric fit (the lemma-level equivalence)
// ---------------------------------------------------------------------------

/// Least-squares description `omega_i(x) = c_ij x^j + d_i` with `c`
/// constrained antisymmetric, plus the pointwise symmetric-part check.
#[derive(Debug, Clone)]
pub struct AffineAntisymmetricFit {
    pub c: Matrix,
    pub d: Vec<f64>,
    /// Max deviation of the fit over the samples.
    pub residual: f64,
    /// Max of `|d(omega_i)/dx^j + d(omega_j)/dx^i|` over the samples.
    pub condition1_violation: f64,
}

/// Fit `omega_i(x) = c_ij x^j + d_i` with antisymmetric `c` over the sample
/// points, and evaluate the Jacobian-symmetry condition by jets.
pub fn antisym_affine_fit(
    omega: &[Expr],
    m: usize,
    samples: &[Vec<f64>],
) -> Result<AffineAntisymmetricFit> {
    if omega.len() != m {
        return Err(Error::argument("omega must have m components"));
    }
    for e in omega {
        if !e.free_vars().iter().all(|v| matches!(v, Var::X(_))) {
            return Err(Error::argument(
                "affine fit applies to components over x only",
            ));
        }
    }
    if samples.len() < m + 1 {
        return Err(Error::Sampling(format!(
            "need at least {} samples, got {}",
            m + 1,
            samples.len()
        )));
    }
    // Unknowns: u_(a,b) = c_ab for a < b, then d_1..d_m.
    let pairs: Vec<(usize, usize)> = (0..m)
        .flat_map(|a| ((a + 1)..m).map(move |b| (a, b)))
        .collect();
    let n_unknowns = pairs.len() + m;

    let dummy_form = TangentForm::new(
        m,
        Expr::Number(0.0),
        omega.to_vec(),
        vec![Expr::Number(0.0); m],
        None,
    )?;

    let mut normal = Matrix::zeros(n_unknowns, n_unknowns);
    let mut rhs = vec![0.0; n_unknowns];
    let mut values = Vec::with_capacity(samples.len());
    let mut condition1_violation = 0.0_f64;
    let zero_y = vec![0.0; m];
    for x in samples {
        if x.len() != m {
            return Err(Error::Sampling("sample has wrong dimension".into()));
        }
        let (_, omega_vals, _) = dummy_form.component_values(0.0, x, &zero_y)?;
        let jets = dummy_form.jets_at(0.0, x, &zero_y)?;
        for i in 0..m {
            for j in 0..m {
                let sym = jets.omega[i].d(idx_x(j)) + jets.omega[j].d(idx_x(i));
                condition1_violation = condition1_violation.max(sym.abs());
            }
        }
        // accumulate normal-equation rows for each component i
        for i in 0..m {
            let mut row = vec![0.0; n_unknowns];
            for (k, &(a, b)) in pairs.iter().enumerate() {
                if i == a {
                    row[k] = x[b];
                } else if i == b {
                    row[k] = -x[a];
                }
            }
            row[pairs.len() + i] = 1.0;
            for p in 0..n_unknowns {
                for q in 0..n_unknowns {
                    normal[(p, q)] += row[p] * row[q];
                }
                rhs[p] += row[p] * omega_vals[i];
            }
        }
        values.push(omega_vals);
    }
    if normal.cond_inf() >= COND_LIMIT {
        return Err(Error::Sampling(
            "samples are not affinely independent enough for the fit".into(),
        ));
    }
    let solution = normal.solve(&rhs)?;
    let mut c = Matrix::zeros(m, m);
    for (k, &(a, b)) in pairs.iter().enumerate() {
        c[(a, b)] = solution[k];
        c[(b, a)] = -solution[k];
    }
    let d = solution[pairs.len()..].to_vec();

    let mut residual = 0.0_f64;
    for (x, vals) in samples.iter().zip(&values) {
        let cx = c.matvec(x);
        for i in 0..m {
            residual = residual.max((vals[i] - cx[i] - d[i]).abs());
        }
    }
    Ok(AffineAntisymmetricFit {
        c,
        d,
        residual,
        condition1_violation,
    })
}

// ---------------------------------------------------------------------------
// Exterior-derivative criteria
// ---------------------------------------------------------------------------

/// Which applicability criterion to test.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Criterion {
    /// Components of `d mu` depend only on `y`; the `dt^dx` and `dx^dx`
    /// blocks vanish (the y-only family applies after a gauge shift).
    YOnlyClass,
    /// `dt^dx`, `dt^dy`, `dx^dy` blocks vanish, `dy^dy` depends only on `y`,
    /// `dx^dx` block constant (the linear family applies after a gauge shift).
    LinearClass,
    /// `dx^dx`, `dx^dy` blocks vanish, `dy^dy` depends only on `y`, and the
    /// mixed `dt` blocks have equal constant cross-derivatives.
    MixedClass,
}

/// Outcome of a criterion check.
#[derive(Debug, Clone)]
pub struct CriterionReport {
    pub holds: bool,
    pub worst_violation: f64,
}

/// Components of `d mu` at one chart point, from a single jet evaluation.
struct ExteriorDerivative {
    dt_dx: Vec<f64>,
    dt_dy: Vec<f64>,
    dx_dx: Matrix,
    dx_dy: Matrix,
    dy_dy: Matrix,
    /// `d f_j / d y^i` with `f` the `dx^dt` block (mixed-class condition).
    df_dy: Matrix,
    /// `d g_i / d x^j` with `g` the `dy^dt` block.
    dg_dx: Matrix,
}

fn exterior_derivative(
    form: &TangentForm,
    t: f64,
    x: &[f64],
    y: &[f64],
) -> Result<ExteriorDerivative> {
    let jets = form.jets_at(t, x, y)?;
    let m = jets.m;
    let dt_dx = (0..m)
        .map(|i| jets.omega[i].d(IDX_T) - jets.omega0.d(idx_x(i)))
        .collect();
    let dt_dy = (0..m)
        .map(|i| jets.omegabar[i].d(IDX_T) - jets.omega0.d(idx_y(m, i)))
        .collect();
    let dx_dx = Matrix::from_fn(m, m, |i, j| {
        jets.omega[j].d(idx_x(i)) - jets.omega[i].d(idx_x(j))
    });
    let dx_dy = Matrix::from_fn(m, m, |i, j| {
        jets.omegabar[j].d(idx_x(i)) - jets.omega[i].d(idx_y(m, j))
    });
    let dy_dy = Matrix::from_fn(m, m, |i, j| {
        jets.omegabar[j].d(idx_y(m, i)) - jets.omegabar[i].d(idx_y(m, j))
    });
    // f_j = omega0_xj - omega_j_t (dx^dt orientation); g_i = omega0_yi - omegabar_i_t
    let df_dy = Matrix::from_fn(m, m, |j, i| {
        jets.omega0.dd(idx_y(m, i), idx_x(j)) - jets.omega[j].dd(idx_y(m, i), IDX_T)
    });
    let dg_dx = Matrix::from_fn(m, m, |i, j| {
        jets.omega0.dd(idx_x(j), idx_y(m, i)) - jets.omegabar[i].dd(idx_x(j), IDX_T)
    });
    Ok(ExteriorDerivative {
        dt_dx,
        dt_dy,
        dx_dx,
        dx_dy,
        dy_dy,
        df_dy,
        dg_dx,
    })
}

/// Evaluate the applicability criterion for `mu` over the samples. The
/// "depends only on y" conditions are tested on the cross product of the
/// samples' `(t, x)` and `y` parts: for each fixed `y`, the spread over
/// `(t, x)` must stay below the tolerance.
pub fn criterion_check(
    mu: &TangentForm,
    which: Criterion,
    samples: &[JetPoint],
) -> Result<CriterionReport> {
    if samples.len() < 2 {
        return Err(Error::argument("criterion check needs at least 2 samples"));
    }
    let m = mu.dimension();
    let tx: Vec<(f64, Vec<f64>)> = samples.iter().take(6).map(|p| (p.t, p.x.clone())).collect();
    let ys: Vec<Vec<f64>> = samples.iter().take(6).map(|p| p.y.clone()).collect();

    // grid[y_index][tx_index]
    let mut grid: Vec<Vec<ExteriorDerivative>> = Vec::with_capacity(ys.len());
    for y in &ys {
        let mut row = Vec::with_capacity(tx.len());
        for (t, x) in &tx {
            row.push(exterior_derivative(mu, *t, x, y)?);
        }
        grid.push(row);
    }

    let vanish = |pick: &dyn Fn(&ExteriorDerivative) -> f64| -> f64 {
        let mut v = 0.0_f64;
        for row in &grid {
            for d in row {
                v = v.max(pick(d).abs());
            }
        }
        v
    };
    let y_only_spread = |pick: &dyn Fn(&ExteriorDerivative) -> f64| -> f64 {
        let mut spread = 0.0_f64;
        for row in &grid {
            let lo = row.iter().map(pick).fold(f64::INFINITY, f64::min);
            let hi = row.iter().map(pick).fold(f64::NEG_INFINITY, f64::max);
            spread = spread.max(hi - lo);
        }
        spread
    };
    let constant_spread = |pick: &dyn Fn(&ExteriorDerivative) -> f64| -> f64 {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for row in &grid {
            for d in row {
                lo = lo.min(pick(d));
                hi = hi.max(pick(d));
            }
        }
        hi - lo
    };

    let mut worst = 0.0_f64;
    match which {
        Criterion::YOnlyClass => {
            for i in 0..m {
                worst = worst.max(vanish(&|d| d.dt_dx[i]));
                worst = worst.max(y_only_spread(&|d| d.dt_dy[i]));
                for j in 0..m {
                    worst = worst.max(vanish(&|d| d.dx_dx[(i, j)]));
                    worst = worst.max(y_only_spread(&|d| d.dx_dy[(i, j)]));
                    worst = worst.max(y_only_spread(&|d| d.dy_dy[(i, j)]));
                }
            }
        }
        Criterion::LinearClass => {
            for i in 0..m {
                worst = worst.max(vanish(&|d| d.dt_dx[i]));
                worst = worst.max(vanish(&|d| d.dt_dy[i]));
                for j in 0..m {
                    worst = worst.max(vanish(&|d| d.dx_dy[(i, j)]));
                    worst = worst.max(y_only_spread(&|d| d.dy_dy[(i, j)]));
                    worst = worst.max(constant_spread(&|d| d.dx_dx[(i, j)]));
                }
            }
        }
        Criterion::MixedClass => {
            for i in 0..m {
                for j in 0..m {
                    worst = worst.max(vanish(&|d| d.dx_dx[(i, j)]));
                    worst = worst.max(vanish(&|d| d.dx_dy[(i, j)]));
                    worst = worst.max(y_only_spread(&|d| d.dy_dy[(i, j)]));
                    // df_j/dy^i = dg_i/dx^j, both constant
                    worst = worst.max(vanish(&|d| d.df_dy[(j, i)] - d.dg_dx[(i, j)]));
                    worst = worst.max(constant_spread(&|d| d.df_dy[(j, i)]));
                }
            }
        }
    }
    Ok(CriterionReport {
        holds: worst < HYPOTHESIS_TOL,
        worst_violation: worst,
    })
}

// ---------------------------------------------------------------------------
// Builtin registry
// ---------------------------------------------------------------------------

/// Registry metadata for one builtin form.
#[derive(Debug, Clone)]
pub struct BuiltinInfo {
    pub name: &'static str,
    pub dimension: usize,
    pub summary: &'static str,
    /// Parameter names with defaults, overridable as `name:k=2,mass=0.5`.
    pub params: &'static [(&'static str, f64)],
    /// Minimum velocity norm for sampling (slashed forms blow up at y = 0).
    pub y_floor: f64,
}

const REGISTRY: &[BuiltinInfo] = &[
    BuiltinInfo {
        name: "example1",
        dimension: 2,
        summary: "pure form Y dX - X dY; solutions are quadratic curves",
        params: &[],
        y_floor: 0.0,
    },
    BuiltinInfo {
        name: "example2",
        dimension: 2,
        summary: "-y dx + x dy + Y dX - X dY; solutions are ellipses and lines",
        params: &[],
        y_floor: 0.0,
    },
    BuiltinInfo {
        name: "example3",
        dimension: 2,
        summary: "(X+Y) dX + Y dY; constant first-order semi-sprays solve it",
        params: &[],
        y_floor: 0.0,
    },
    BuiltinInfo {
        name: "example4",
        dimension: 2,
        summary: "the example2 form, revisited for the linear semi-spray family",
        params: &[],
        y_floor: 0.0,
    },
    BuiltinInfo {
        name: "lsz",
        dimension: 2,
        summary: "pure Galilean form -k(xd dyd - yd dxd) + (mass/2)(xd dx + yd dy)",
        params: &[("k", 1.0), ("mass", 1.0)],
        y_floor: 0.0,
    },
    BuiltinInfo {
        name: "lsz-dt",
        dimension: 2,
        summary: "mixed Galilean form -k(xd dyd - yd dxd) + (mass/2)|yd|^2 dt",
        params: &[("k", 1.0), ("mass", 1.0)],
        y_floor: 0.0,
    },
    BuiltinInfo {
        name: "mathisson",
        dimension: 2,
        summary: "slashed form with |y|^3 denominators; undefined at y = 0",
        params: &[("mass", 1.0)],
        y_floor: 0.1,
    },
    BuiltinInfo {
        name: "riemann",
        dimension: 2,
        summary: "Riemannian energy form g_ii y^i dy^i: non-degenerated, never regular",
        params: &[("g1", 1.0), ("g2", 1.0)],
        y_floor: 0.0,
    },
    BuiltinInfo {
        name: "regular-degenerate",
        dimension: 2,
        summary: "(X+Y) dX - (X+Y) dY: regular but degenerated",
        params: &[],
        y_floor: 0.0,
    },
    BuiltinInfo {
        name: "fedosov",
        dimension: 2,
        summary: "constant-symplectic spray form eps_ij y^j dy^i + k y^i dx^i",
        params: &[("k", 1.0)],
        y_floor: 0.0,
    },
    BuiltinInfo {
        name: "timedep",
        dimension: 2,
        summary: "time-scaled essential part (1+t)(Y dX - X dY); exercises the dt correction",
        params: &[],
        y_floor: 0.0,
    },
    BuiltinInfo {
        name: "basic1",
        dimension: 1,
        summary: "basic 1D form x dy - (x^2/2) dt; on-shell 2 x'' = x",
        params: &[],
        y_floor: 0.0,
    },
    BuiltinInfo {
        name: "basic2",
        dimension: 1,
        summary: "basic 1D form exp(x) dy",
        params: &[],
        y_floor: 0.0,
    },
    BuiltinInfo {
        name: "basic3",
        dimension: 1,
        summary: "basic 1D form with t-dependence in every component",
        params: &[],
        y_floor: 0.0,
    },
];

/// The registry listing.
pub fn registry() -> &'static [BuiltinInfo] {
    REGISTRY
}

/// Metadata for one builtin name (without parameter suffix).
pub fn builtin_info(name: &str) -> Option<&'static BuiltinInfo> {
    REGISTRY.iter().find(|b| b.name == name)
}

fn fmt_param(v: f64) -> String {
    format!("({v})")
}

/// Resolve a builtin name with explicit parameter overrides.
pub fn builtin_with(name: &str, overrides: &BTreeMap<String, f64>) -> Result<TangentForm> {
    let info = builtin_info(name).ok_or_else(|| {
        Error::argument(format!(
            "unknown builtin `{name}`; known: {}",
            REGISTRY
                .iter()
                .map(|b| b.name)
                .collect::<Vec<_>>()
                .join(", ")
        ))
    })?;
    let mut params: BTreeMap<String, f64> = info
        .params
        .iter()
        .map(|(k, v)| (k.to_string(), *v))
        .collect();
    for (k, v) in overrides {
        if !params.contains_key(k) {
            return Err(Error::argument(format!(
                "builtin `{name}` has no parameter `{k}`"
            )));
        }
        params.insert(k.clone(), *v);
    }
    let p = |key: &str| fmt_param(params[key]);

    let (omega0, omega, omegabar): (String, Vec<String>, Vec<String>) = match name {
        "example1" => (
            "0".into(),
            vec!["0".into(), "0".into()],
            vec!["y2".into(), "-y1".into()],
        ),
        "example2" | "example4" => (
            "0".into(),
            vec!["-x2".into(), "x1".into()],
            vec!["y2".into(), "-y1".into()],
        ),
        "example3" => (
            "0".into(),
            vec!["0".into(), "0".into()],
            vec!["y1 + y2".into(), "y2".into()],
        ),
        "lsz" => (
            "0".into(),
            vec![format!("{}/2*y1", p("mass")), format!("{}/2*y2", p("mass"))],
            vec![format!("{}*y2", p("k")), format!("-{}*y1", p("k"))],
        ),
        "lsz-dt" => (
            format!("{}/2*(y1^2 + y2^2)", p("mass")),
            vec!["0".into(), "0".into()],
            vec![format!("{}*y2", p("k")), format!("-{}*y1", p("k"))],
        ),
        "mathisson" => {
            let nrm = "sqrt((y1^2 + y2^2)/2)";
            (
                "0".into(),
                vec![
                    format!("-{}*y1/{nrm}", p("mass")),
                    format!("-{}*y2/{nrm}", p("mass")),
                ],
                vec![format!("-y2/{nrm}^3"), format!("y1/{nrm}^3")],
            )
        }
        "riemann" => (
            "0".into(),
            vec!["0".into(), "0".into()],
            vec![format!("{}*y1", p("g1")), format!("{}*y2", p("g2"))],
        ),
        "regular-degenerate" => (
            "0".into(),
            vec!["0".into(), "0".into()],
            vec!["y1 + y2".into(), "-(y1 + y2)".into()],
        ),
        "fedosov" => (
            "0".into(),
            vec![format!("{}*y1", p("k")), format!("{}*y2", p("k"))],
            vec!["y2".into(), "-y1".into()],
        ),
        "timedep" => (
            "0".into(),
            vec!["0".into(), "0".into()],
            vec!["(1 + t)*y2".into(), "-(1 + t)*y1".into()],
        ),
        "basic1" => ("-x1^2/2".into(), vec!["0".into()], vec!["x1".into()]),
        "basic2" => ("0".into(), vec!["0".into()], vec!["exp(x1)".into()]),
        "basic3" => (
            "sin(x1)".into(),
            vec!["t*x1".into()],
            vec!["exp(x1)*(1 + t^2/4)".into()],
        ),
        _ => unreachable!("registry entry without builder"),
    };
    let omega_refs: Vec<&str> = omega.iter().map(String::as_str).collect();
    let omegabar_refs: Vec<&str> = omegabar.iter().map(String::as_str).collect();
    TangentForm::from_strings(
        info.dimension,
        &omega0,
        &omega_refs,
        &omegabar_refs,
        Some(name),
    )
}

/// Resolve a builtin by name, accepting a `name:k=2,mass=0.5` parameter
/// suffix.
pub fn builtin(spec: &str) -> Result<TangentForm> {
    let (name, overrides) = match spec.split_once(':') {
        None => (spec, BTreeMap::new()),
        Some((name, rest)) => {
            let mut map = BTreeMap::new();
            for piece in rest.split(',').filter(|s| !s.is_empty()) {
                let (k, v) = piece.split_once('=').ok_or_else(|| {
                    Error::argument(format!("malformed parameter `{piece}` (want key=value)"))
                })?;
                let value: f64 = v.trim().parse().map_err(|_| {
                    Error::argument(format!("parameter `{k}` has non-numeric value `{v}`"))
                })?;
                map.insert(k.trim().to_string(), value);
            }
            (name, map)
        }
    };
    builtin_with(name, &overrides)
}
