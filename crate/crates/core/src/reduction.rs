//! Hamiltonian reductions of a regular tangent form: the Ostrogradski phase
//! space `T2*M` with coordinates `(x, y, p)`, the double-momentum space
//! `T02M` with coordinates `(x, p0, p1)`, the vector fields X and Y living on
//! them, the symplectic matrices that make both flows Hamiltonian, Legendre
//! inversion by damped Newton, and the co-regularity matrix.

use crate::error::{Error, Result};
use crate::form::{FormJets, JetPoint, TangentForm};
use crate::jet::IDX_T;
use crate::linalg::{vec_norm_inf, Matrix, COND_LIMIT};
use crate::variational::{omega_big_values, phi_bar_values, phi_bar_z_matrix, phi_values};

/// A point of `T2*M`: base point, velocity and Ostrogradski momenta.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseStateX {
    pub t: f64,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub p: Vec<f64>,
}

/// A point of `T02M`: base point and the two momentum covectors
/// `p0 = omegabar`, `p1 = Phibar`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseStateY {
    pub t: f64,
    pub x: Vec<f64>,
    pub p0: Vec<f64>,
    pub p1: Vec<f64>,
}

/// Velocity of the X-flow.
#[derive(Debug, Clone)]
pub struct XVelocity {
    pub xdot: Vec<f64>,
    pub ydot: Vec<f64>,
    pub pdot: Vec<f64>,
}

/// Velocity of the Y-flow, together with the solved `(y, z)` used to produce
/// it (handy as the next Newton warm start).
#[derive(Debug, Clone)]
pub struct YVelocity {
    pub xdot: Vec<f64>,
    pub p0dot: Vec<f64>,
    pub p1dot: Vec<f64>,
    pub y: Vec<f64>,
    pub z: Vec<f64>,
}

/// Newton residual tolerance for Legendre inversion.
pub const LEGENDRE_TOL: f64 = 1e-12;

/// Lift a jet with `z` to `T2*M` via the Ostrogradski momenta `p = Phibar`.
pub fn phase_lift(form: &TangentForm, p: &JetPoint) -> Result<PhaseStateX> {
    let z = p.z()?.to_vec();
    let jets = form.jets_at(p.t, &p.x, &p.y)?;
    Ok(PhaseStateX {
        t: p.t,
        x: p.x.clone(),
        y: p.y.clone(),
        p: phi_bar_values(&jets, &p.y, &z),
    })
}

/// Lift a jet with `z` to `T02M`: `p0 = omegabar`, `p1 = Phibar`.
pub fn phase_lift_y(form: &TangentForm, p: &JetPoint) -> Result<PhaseStateY> {
    let z = p.z()?.to_vec();
    let jets = form.jets_at(p.t, &p.x, &p.y)?;
    Ok(PhaseStateY {
        t: p.t,
        x: p.x.clone(),
        p0: jets.omegabar.iter().map(|j| j.value).collect(),
        p1: phi_bar_values(&jets, &p.y, &z),
    })
}

/// Solve `Phibar(t, x, y, S) = p` for the acceleration slot `S`.
fn solve_acceleration(jets: &FormJets, y: &[f64], p: &[f64]) -> Result<Vec<f64>> {
    let matrix = phi_bar_z_matrix(jets);
    let cond = matrix.cond_inf();
    if cond >= COND_LIMIT {
        return Err(Error::Regularity {
            what: "h matrix is singular; the X-flow is undefined here".into(),
            cond,
        });
    }
    let rest = phi_bar_values(jets, y, &vec![0.0; jets.m]);
    let rhs: Vec<f64> = (0..jets.m).map(|i| p[i] - rest[i]).collect();
    matrix.solve(&rhs)
}

/// The vector field X on `T2*M`: `xdot = y`, `ydot = S` with
/// `Phibar(t, x, y, S) = p`, `pdot = Phi(t, x, y, S)`.
pub fn x_field(form: &TangentForm, s: &PhaseStateX) -> Result<XVelocity> {
    let jets = form.jets_at(s.t, &s.x, &s.y)?;
    let sdot = solve_acceleration(&jets, &s.y, &s.p)?;
    let pdot = phi_values(&jets, &s.y, &sdot);
    Ok(XVelocity {
        xdot: s.y.clone(),
        ydot: sdot,
        pdot,
    })
}

/// Invert the Legendre map: find `y` with `omegabar(t, x, y) = p0` by damped
/// Newton from `guess`. Callers integrating a trajectory warm-start it with
/// the previously solved velocity; the natural cold start is `p0` itself.
pub fn legendre_invert(
    form: &TangentForm,
    t: f64,
    x: &[f64],
    p0: &[f64],
    guess: &[f64],
) -> Result<Vec<f64>> {
    let m = form.dimension();
    let mut y = guess.to_vec();
    let residual = |y: &[f64]| -> Result<Vec<f64>> {
        let (_, _, ob) = form.component_values(t, x, y)?;
        Ok((0..m).map(|i| ob[i] - p0[i]).collect())
    };
    let mut r = residual(&y)?;
    let mut r_norm = vec_norm_inf(&r);
    for _ in 0..50 {
        if r_norm < LEGENDRE_TOL {
            return Ok(y);
        }
        let jets = form.jets_at(t, x, &y)?;
        let n = jets.n_matrix();
        let cond = n.cond_inf();
        if cond >= COND_LIMIT {
            return Err(Error::NonDegenerate {
                what: "Legendre differential is singular along the Newton path".into(),
                cond,
            });
        }
        let step = n.solve(&r)?;
        // damped update: halve until the residual does not grow
        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            let trial: Vec<f64> = (0..m).map(|i| y[i] - lambda * step[i]).collect();
            // an Err means the trial stepped outside the domain: damp further
            if let Ok(rt) = residual(&trial) {
                let rt_norm = vec_norm_inf(&rt);
                if rt_norm < r_norm || rt_norm < LEGENDRE_TOL {
                    y = trial;
                    r = rt;
                    r_norm = rt_norm;
                    accepted = true;
                    break;
                }
            }
            lambda *= 0.5;
        }
        if !accepted {
            return Err(Error::Inversion {
                what: "Legendre Newton stalled".into(),
                residual: r_norm,
            });
        }
    }
    if r_norm < LEGENDRE_TOL {
        Ok(y)
    } else {
        Err(Error::Inversion {
            what: "Legendre Newton did not converge in 50 iterations".into(),
            residual: r_norm,
        })
    }
}

/// The vector field Y on `T02M`:
/// `xdot = T`, `p0dot_i = Omega_i(t, x, T, S) - p1_i`, `p1dot = Phi(t, x, T, S)`
/// with `T` the Legendre inverse of `p0` and `S` the acceleration solve at
/// momentum `p1`.
pub fn y_field(form: &TangentForm, s: &PhaseStateY, guess: &[f64]) -> Result<YVelocity> {
    let y = legendre_invert(form, s.t, &s.x, &s.p0, guess)?;
    let jets = form.jets_at(s.t, &s.x, &y)?;
    let z = solve_acceleration(&jets, &y, &s.p1)?;
    let omega_big = omega_big_values(&jets, &y, &z);
    let p0dot = (0..form.dimension())
        .map(|i| omega_big[i] - s.p1[i])
        .collect();
    let p1dot = phi_values(&jets, &y, &z);
    Ok(YVelocity {
        xdot: y.clone(),
        p0dot,
        p1dot,
        y,
        z,
    })
}

/// An antisymmetric `3m x 3m` matrix with the block structure
/// `[[A, B, I], [-B^T, C, 0], [-I, 0, 0]]` in the ordered basis
/// `(x-block, y-or-p0-block, p-or-p1-block)`.
#[derive(Debug, Clone)]
pub struct SymplecticMatrix {
    m: usize,
    pub a: Matrix,
    pub b: Matrix,
    pub c: Matrix,
}

impl SymplecticMatrix {
    pub fn new(a: Matrix, b: Matrix, c: Matrix) -> Self {
        let m = a.rows();
        assert!(a.is_antisymmetric() && c.is_antisymmetric());
        assert_eq!((b.rows(), b.cols()), (m, m));
        SymplecticMatrix { m, a, b, c }
    }

    pub fn dim(&self) -> usize {
        3 * self.m
    }

    /// Assemble the dense antisymmetric matrix.
    pub fn full(&self) -> Matrix {
        let m = self.m;
        Matrix::from_fn(3 * m, 3 * m, |r, c| {
            let (br, ir) = (r / m, r % m);
            let (bc, ic) = (c / m, c % m);
            match (br, bc) {
                (0, 0) => self.a[(ir, ic)],
                (0, 1) => self.b[(ir, ic)],
                (0, 2) => f64::from(ir == ic),
                (1, 0) => -self.b[(ic, ir)],
                (1, 1) => self.c[(ir, ic)],
                (2, 0) => -f64::from(ir == ic),
                _ => 0.0,
            }
        })
    }

    /// Non-degenerate exactly when the C block is (block criterion).
    pub fn is_invertible(&self) -> bool {
        self.c.is_invertible()
    }
}

/// The symplectic matrix of the pulled-back canonical form on `T2*M`:
/// `A = d(omega_i)/dx^j - d(omega_j)/dx^i`,
/// `B = d(omega_i)/dy^j - d(omegabar_j)/dx^i`,
/// `C = d(omegabar_i)/dy^j - d(omegabar_j)/dy^i`.
pub fn symplectic_prime(form: &TangentForm, s: &PhaseStateX) -> Result<SymplecticMatrix> {
    let jets = form.jets_at(s.t, &s.x, &s.y)?;
    let m = jets.m;
    let a = Matrix::from_fn(m, m, |i, j| {
        jets.omega[i].d(jets.x(j)) - jets.omega[j].d(jets.x(i))
    });
    let b = Matrix::from_fn(m, m, |i, j| {
        jets.omega[i].d(jets.y(j)) - jets.omegabar[j].d(jets.x(i))
    });
    let c = jets.h_matrix();
    Ok(SymplecticMatrix::new(a, b, c))
}

/// The Hamiltonian on `T2*M`: `H = -p_i y^i + omega0(t, x, y)`.
pub fn hamiltonian_h(form: &TangentForm, s: &PhaseStateX) -> Result<f64> {
    let (o0, _, _) = form.component_values(s.t, &s.x, &s.y)?;
    let contraction: f64 = s.p.iter().zip(&s.y).map(|(p, y)| p * y).sum();
    Ok(-contraction + o0)
}

/// Residual of the Hamiltonian identity `Xi' X = dH - dt(omega~)` at `s`,
/// optionally dropping the time-dependence correction `dt(omega~) =
/// (d(omega_i)/dt, d(omegabar_i)/dt, 0)`.
pub fn hamiltonian_residual(
    form: &TangentForm,
    s: &PhaseStateX,
    with_time_correction: bool,
) -> Result<f64> {
    let m = form.dimension();
    let jets = form.jets_at(s.t, &s.x, &s.y)?;
    let vel = x_field(form, s)?;
    let xi = symplectic_prime(form, s)?.full();

    let mut flow = Vec::with_capacity(3 * m);
    flow.extend_from_slice(&vel.xdot);
    flow.extend_from_slice(&vel.ydot);
    flow.extend_from_slice(&vel.pdot);
    let lhs = xi.matvec(&flow);

    // dH over (x, y, p) for H = -p y + omega0
    let mut dh = Vec::with_capacity(3 * m);
    for i in 0..m {
        dh.push(jets.omega0.d(jets.x(i)));
    }
    for i in 0..m {
        dh.push(-s.p[i] + jets.omega0.d(jets.y(i)));
    }
    for i in 0..m {
        dh.push(-s.y[i]);
    }

    let mut worst = 0.0_f64;
    for k in 0..3 * m {
        let mut r = lhs[k] - dh[k];
        if with_time_correction {
            if k < m {
                r += jets.omega[k].d(IDX_T);
            } else if k < 2 * m {
                r += jets.omegabar[k - m].d(IDX_T);
            }
        }
        worst = worst.max(r.abs());
    }
    Ok(worst)
}

/// Hamiltonian identity residual including the time-dependence correction.
pub fn hamiltonian_check(form: &TangentForm, s: &PhaseStateX) -> Result<f64> {
    hamiltonian_residual(form, s, true)
}

/// The Hamiltonian on `T02M`: `H' = -p1_i T^i + omega0(t, x, T)`.
pub fn hamiltonian_hprime(form: &TangentForm, s: &PhaseStateY, guess: &[f64]) -> Result<f64> {
    let y = legendre_invert(form, s.t, &s.x, &s.p0, guess)?;
    let (o0, _, _) = form.component_values(s.t, &s.x, &y)?;
    let contraction: f64 = s.p1.iter().zip(&y).map(|(p, t)| p * t).sum();
    Ok(-contraction + o0)
}

/// Implicit derivatives of the Legendre inverse `T(t, x, p0)` at a point of
/// `T02M`: returns `(y = T, dT/dp0, dT/dx, dT/dt)` obtained by one linear
/// solve per direction from `omegabar(t, x, T) = p0`.
pub fn legendre_derivatives(
    form: &TangentForm,
    t: f64,
    x: &[f64],
    p0: &[f64],
    guess: &[f64],
) -> Result<(Vec<f64>, Matrix, Matrix, Vec<f64>)> {
    let m = form.dimension();
    let y = legendre_invert(form, t, x, p0, guess)?;
    let jets = form.jets_at(t, x, &y)?;
    let n = jets.n_matrix();
    let cond = n.cond_inf();
    if cond >= COND_LIMIT {
        return Err(Error::NonDegenerate {
            what: "Legendre differential is singular at the inverted point".into(),
            cond,
        });
    }
    let n_inv = n.inverse().expect("cond-checked matrix");
    // dT/dx = -N^-1 * d(omegabar)/dx, column by column
    let w = Matrix::from_fn(m, m, |i, j| jets.omegabar[i].d(jets.x(j)));
    let dt_dx = n_inv.matmul(&w).scale(-1.0);
    let ob_t: Vec<f64> = (0..m).map(|i| jets.omegabar[i].d(IDX_T)).collect();
    let dt_dt = n_inv.matvec(&ob_t).iter().map(|v| -v).collect();
    Ok((y, n_inv, dt_dx, dt_dt))
}

/// The symplectic matrix of the pulled-back form on `T02M`:
/// `A'_ij = d(omega~_i)/dx^j - d(omega~_j)/dx^i`,
/// `B'_ij = d(omega~_i)/dp0_j + dT^j/dx^i`,
/// `C'_ij = dT^j/dp0_i - dT^i/dp0_j`, where `omega~_i(t, x, p0) =
/// omega_i(t, x, T)` and all `T`-derivatives come from implicit
/// differentiation of `omegabar(t, x, T) = p0`. The `B'` sign follows from
/// expanding `dx^i ^ d(omega~_i) + dT^i ^ dp0_i` and is confirmed by the
/// finite-difference pullback oracle; it only matters when `omegabar`
/// depends on `x`.
pub fn symplectic_doubleprime(
    form: &TangentForm,
    s: &PhaseStateY,
    guess: &[f64],
) -> Result<SymplecticMatrix> {
    let m = form.dimension();
    let (y, dt_dp0, dt_dx, _) = legendre_derivatives(form, s.t, &s.x, &s.p0, guess)?;
    let jets = form.jets_at(s.t, &s.x, &y)?;

    // omega~ partials by the chain rule through T
    let mut om_x = Matrix::zeros(m, m); // d(omega~_i)/dx^j
    let mut om_p = Matrix::zeros(m, m); // d(omega~_i)/dp0_j
    for i in 0..m {
        for j in 0..m {
            let mut vx = jets.omega[i].d(jets.x(j));
            let mut vp = 0.0;
            for k in 0..m {
                vx += jets.omega[i].d(jets.y(k)) * dt_dx[(k, j)];
                vp += jets.omega[i].d(jets.y(k)) * dt_dp0[(k, j)];
            }
            om_x[(i, j)] = vx;
            om_p[(i, j)] = vp;
        }
    }

    let a = Matrix::from_fn(m, m, |i, j| om_x[(i, j)] - om_x[(j, i)]);
    let b = Matrix::from_fn(m, m, |i, j| om_p[(i, j)] + dt_dx[(j, i)]);
    let c = Matrix::from_fn(m, m, |i, j| dt_dp0[(j, i)] - dt_dp0[(i, j)]);
    Ok(SymplecticMatrix::new(a, b, c))
}

/// The co-regularity matrix `h~^ij = dT^i/dp_j - dT^j/dp_i` at `(t, x, p0)`.
/// Its invertibility agrees with that of `h` wherever the form is
/// non-degenerated.
pub fn coregular_matrix(
    form: &TangentForm,
    t: f64,
    x: &[f64],
    p0: &[f64],
    guess: &[f64],
) -> Result<Matrix> {
    let m = form.dimension();
    let (_, dt_dp0, _, _) = legendre_derivatives(form, t, x, p0, guess)?;
    Ok(Matrix::from_fn(m, m, |i, j| {
        dt_dp0[(i, j)] - dt_dp0[(j, i)]
    }))
}

/// Residual of the pushforward identity: transporting the Y-flow through
/// `F(t, x, p0, p1) = (t, x, T(t, x, p0), p1)` must reproduce the X-flow at
/// the image point. Exact chain rule via implicit differentiation of `T`.
pub fn pushforward_residual(form: &TangentForm, s: &PhaseStateY, guess: &[f64]) -> Result<f64> {
    let m = form.dimension();
    let yv = y_field(form, s, guess)?;
    let (y, dt_dp0, dt_dx, dt_dt) = legendre_derivatives(form, s.t, &s.x, &s.p0, guess)?;
    let image = PhaseStateX {
        t: s.t,
        x: s.x.clone(),
        y: y.clone(),
        p: s.p1.clone(),
    };
    let xv = x_field(form, &image)?;

    let mut worst = 0.0_f64;
    for i in 0..m {
        worst = worst.max((yv.xdot[i] - xv.xdot[i]).abs());
        // y-row: total time derivative of T along the Y-flow
        let mut ydot = dt_dt[i];
        for j in 0..m {
            ydot += dt_dx[(i, j)] * yv.xdot[j] + dt_dp0[(i, j)] * yv.p0dot[j];
        }
        worst = worst.max((ydot - xv.ydot[i]).abs());
        worst = worst.max((yv.p1dot[i] - xv.pdot[i]).abs());
    }
    Ok(worst)
}
