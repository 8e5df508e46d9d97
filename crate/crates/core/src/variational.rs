//! The Euler-Lagrange top tangent form of a tangent form, its split into
//! `E_i = h_ij w^j + f_i`, the adapted third-order semi-spray, Lagrange top
//! derivatives of covector pairs, and the Ostrogradski pair.
//!
//! Everything is assembled from a single jet evaluation of the components at
//! `(t, x, y)`: the second total derivative of `omegabar` needs its Hessian,
//! the rest needs first partials. The Lagrangian is affine in `z`, so no
//! third-order jets appear anywhere.

use crate::error::{Error, Result};
use crate::form::{FormJets, JetPoint, TangentForm};
use crate::linalg::{Matrix, COND_LIMIT};

/// Total derivative of a component value: `dG/dt = G_t + y^j G_xj + z^j G_yj`.
fn dt_value(jets: &FormJets, g: &crate::jet::Jet2, y: &[f64], z: &[f64]) -> f64 {
    let mut acc = g.d(jets.t());
    for j in 0..jets.m {
        acc += y[j] * g.d(jets.x(j)) + z[j] * g.d(jets.y(j));
    }
    acc
}

/// Total derivative of a first partial `dG/dv`.
fn dt_partial(jets: &FormJets, g: &crate::jet::Jet2, v: usize, y: &[f64], z: &[f64]) -> f64 {
    let mut acc = g.dd(jets.t(), v);
    for j in 0..jets.m {
        acc += y[j] * g.dd(jets.x(j), v) + z[j] * g.dd(jets.y(j), v);
    }
    acc
}

/// Ostrogradski `Omega_i = dL/dy^i - omega_i`.
pub(crate) fn omega_big_values(jets: &FormJets, y: &[f64], z: &[f64]) -> Vec<f64> {
    (0..jets.m)
        .map(|i| {
            let yi = jets.y(i);
            let mut acc = jets.omega0.d(yi);
            for j in 0..jets.m {
                acc += jets.omega[j].d(yi) * y[j] + jets.omegabar[j].d(yi) * z[j];
            }
            acc
        })
        .collect()
}

/// Ostrogradski momenta `Phibar_i = Omega_i - d/dt omegabar_i`.
pub(crate) fn phi_bar_values(jets: &FormJets, y: &[f64], z: &[f64]) -> Vec<f64> {
    let omega_big = omega_big_values(jets, y, z);
    (0..jets.m)
        .map(|i| omega_big[i] - dt_value(jets, &jets.omegabar[i], y, z))
        .collect()
}

/// `Phi_i = dL/dx^i - d/dt omega_i`.
pub(crate) fn phi_values(jets: &FormJets, y: &[f64], z: &[f64]) -> Vec<f64> {
    (0..jets.m)
        .map(|i| {
            let xi = jets.x(i);
            let mut acc = jets.omega0.d(xi);
            for j in 0..jets.m {
                acc += jets.omega[j].d(xi) * y[j] + jets.omegabar[j].d(xi) * z[j];
            }
            acc - dt_value(jets, &jets.omega[i], y, z)
        })
        .collect()
}

/// Coefficient of `z` in `Phibar`: `M_ij = d(omegabar_j)/dy^i - d(omegabar_i)/dy^j`
/// (the negative of the `h` matrix).
pub(crate) fn phi_bar_z_matrix(jets: &FormJets) -> Matrix {
    Matrix::from_fn(jets.m, jets.m, |i, j| {
        jets.omegabar[j].d(jets.y(i)) - jets.omegabar[i].d(jets.y(j))
    })
}

/// The Euler-Lagrange split `E_i = h_ij w^j + f_i` at a jet with `z`.
#[derive(Debug, Clone)]
pub struct ELSplit {
    /// Antisymmetric `h_ij = d(omegabar_i)/dy^j - d(omegabar_j)/dy^i`.
    pub h: Matrix,
    /// The `w`-independent part: the residual evaluated at `w = 0`.
    pub f: Vec<f64>,
}

/// Euler-Lagrange residual `E_i = dL/dx^i - d/dt dL/dy^i + d2/dt2 dL/dz^i`
/// at a jet point carrying `z` and `w`.
pub fn el_residual(form: &TangentForm, p: &JetPoint) -> Result<Vec<f64>> {
    let z = p.z()?.to_vec();
    let w = p.w()?.to_vec();
    let jets = form.jets_at(p.t, &p.x, &p.y)?;
    Ok(el_residual_from_jets(&jets, &p.y, &z, &w))
}

fn el_residual_from_jets(jets: &FormJets, y: &[f64], z: &[f64], w: &[f64]) -> Vec<f64> {
    let m = jets.m;
    let mut residual = Vec::with_capacity(m);
    for i in 0..m {
        let xi = jets.x(i);
        let yi = jets.y(i);

        // dL/dx^i
        let mut a = jets.omega0.d(xi);
        for j in 0..m {
            a += jets.omega[j].d(xi) * y[j] + jets.omegabar[j].d(xi) * z[j];
        }

        // d/dt dL/dy^i, with dL/dy^i = omega0_yi + omega_j_yi y^j + omega_i + omegabar_j_yi z^j
        let mut b = dt_partial(jets, &jets.omega0, yi, y, z);
        for j in 0..m {
            b += y[j] * dt_partial(jets, &jets.omega[j], yi, y, z) + z[j] * jets.omega[j].d(yi);
        }
        b += dt_value(jets, &jets.omega[i], y, z);
        for j in 0..m {
            b += z[j] * dt_partial(jets, &jets.omegabar[j], yi, y, z)
                + w[j] * jets.omegabar[j].d(yi);
        }

        // d2/dt2 omegabar_i
        let bi = &jets.omegabar[i];
        let mut c = dt_partial(jets, bi, jets.t(), y, z);
        for j in 0..m {
            c += y[j] * dt_partial(jets, bi, jets.x(j), y, z) + z[j] * bi.d(jets.x(j));
            c += z[j] * dt_partial(jets, bi, jets.y(j), y, z) + w[j] * bi.d(jets.y(j));
        }

        residual.push(a - b + c);
    }
    residual
}

/// Split the residual into its `h`-linear part and the `w`-free rest.
pub fn el_split(form: &TangentForm, p: &JetPoint) -> Result<ELSplit> {
    let z = p.z()?.to_vec();
    let jets = form.jets_at(p.t, &p.x, &p.y)?;
    let h = jets.h_matrix();
    let f = el_residual_from_jets(&jets, &p.y, &z, &vec![0.0; form.dimension()]);
    Ok(ELSplit { h, f })
}

/// The adapted third-order semi-spray: the unique `w*` with `h w* + f = 0`.
///
/// Integrating `d3x/dt3 = w*(t, x, dx/dt, d2x/dt2)` reproduces the solutions
/// of the generalized Euler-Lagrange equation for a regular form.
pub fn third_order_semispray(form: &TangentForm, p: &JetPoint) -> Result<Vec<f64>> {
    let split = el_split(form, p)?;
    let cond = split.h.cond_inf();
    if cond >= COND_LIMIT {
        return Err(Error::Regularity {
            what: "h matrix is singular; the form is not regular at this jet".into(),
            cond,
        });
    }
    let rhs: Vec<f64> = split.f.iter().map(|v| -v).collect();
    split.h.solve(&rhs)
}

/// First partials of a covector pair `(eta_i dx^i, etabar_i dy^i)` at a jet
/// point, ready for one total derivative. Each `dy_grad[i]` runs over the
/// derivative chart `(t, x^m, y^m)` for order-1 fields or `(t, x^m, y^m, z^m)`
/// for order-2 fields; its length decides which levels of the jet point the
/// contraction needs.
#[derive(Debug, Clone)]
pub struct PairJet {
    pub dx_value: Vec<f64>,
    pub dy_value: Vec<f64>,
    pub dy_grad: Vec<Vec<f64>>,
}

/// A covector pair evaluable on jet points (a k-order tangent form given by
/// its `dx`- and `dy`-components).
pub trait CovectorPairField {
    fn dimension(&self) -> usize;
    fn eval_pair(&self, p: &JetPoint) -> Result<PairJet>;
}

/// The essential pair `(omega_i, omegabar_i)` of a tangent form (order 1).
pub struct EssentialPair<'a>(pub &'a TangentForm);

/// The Ostrogradski form `Omega = Omega_i dx^i + omegabar_i dy^i` (order 2).
pub struct OmegaPair<'a>(pub &'a TangentForm);

/// The Ostrogradski form `Phi = Phi_i dx^i + Phibar_i dy^i` (order 2).
pub struct PhiPair<'a>(pub &'a TangentForm);

impl CovectorPairField for EssentialPair<'_> {
    fn dimension(&self) -> usize {
        self.0.dimension()
    }

    fn eval_pair(&self, p: &JetPoint) -> Result<PairJet> {
        let jets = self.0.jets_at(p.t, &p.x, &p.y)?;
        let m = jets.m;
        Ok(PairJet {
            dx_value: jets.omega.iter().map(|j| j.value).collect(),
            dy_value: jets.omegabar.iter().map(|j| j.value).collect(),
            dy_grad: (0..m)
                .map(|i| (0..2 * m + 1).map(|v| jets.omegabar[i].d(v)).collect())
                .collect(),
        })
    }
}

impl CovectorPairField for OmegaPair<'_> {
    fn dimension(&self) -> usize {
        self.0.dimension()
    }

    fn eval_pair(&self, p: &JetPoint) -> Result<PairJet> {
        let z = p.z()?.to_vec();
        let jets = self.0.jets_at(p.t, &p.x, &p.y)?;
        let m = jets.m;
        // dy-part is omegabar, an order-1 object: its z-partials vanish.
        Ok(PairJet {
            dx_value: omega_big_values(&jets, &p.y, &z),
            dy_value: jets.omegabar.iter().map(|j| j.value).collect(),
            dy_grad: (0..m)
                .map(|i| (0..2 * m + 1).map(|v| jets.omegabar[i].d(v)).collect())
                .collect(),
        })
    }
}

impl CovectorPairField for PhiPair<'_> {
    fn dimension(&self) -> usize {
        self.0.dimension()
    }

    fn eval_pair(&self, p: &JetPoint) -> Result<PairJet> {
        let z = p.z()?.to_vec();
        let jets = self.0.jets_at(p.t, &p.x, &p.y)?;
        let m = jets.m;
        let mut dy_grad = Vec::with_capacity(m);
        for i in 0..m {
            // Phibar_i = omega0_yi - omegabar_i_t
            //          + (omega_j_yi - omegabar_i_xj) y^j
            //          + (omegabar_j_yi - omegabar_i_yj) z^j
            let yi = jets.y(i);
            let bi = &jets.omegabar[i];
            let mut grad = vec![0.0; 3 * m + 1];
            for (v, gv) in grad.iter_mut().enumerate().take(2 * m + 1) {
                let mut g = jets.omega0.dd(v, yi) - bi.dd(v, jets.t());
                for (j, zj) in z.iter().enumerate() {
                    g += (jets.omega[j].dd(v, yi) - bi.dd(v, jets.x(j))) * p.y[j]
                        + (jets.omegabar[j].dd(v, yi) - bi.dd(v, jets.y(j))) * zj;
                }
                *gv = g;
            }
            // explicit y- and z-slot contributions of the affine structure
            for k in 0..m {
                grad[jets.y(k)] += jets.omega[k].d(yi) - bi.d(jets.x(k));
                grad[2 * m + 1 + k] = jets.omegabar[k].d(yi) - bi.d(jets.y(k));
            }
            dy_grad.push(grad);
        }
        Ok(PairJet {
            dx_value: phi_values(&jets, &p.y, &z),
            dy_value: phi_bar_values(&jets, &p.y, &z),
            dy_grad,
        })
    }
}

/// Contract a gradient over `(t, x, y[, z])` with the total-derivative
/// coefficients `(1, y, z[, w])` read off the jet point.
fn total_derivative(grad: &[f64], p: &JetPoint) -> Result<f64> {
    let m = p.dim();
    let z = p.z()?;
    let mut acc = grad[0];
    for j in 0..m {
        acc += grad[1 + j] * p.y[j] + grad[1 + m + j] * z[j];
    }
    if grad.len() == 3 * m + 1 {
        let w = p.w()?;
        for j in 0..m {
            acc += grad[1 + 2 * m + j] * w[j];
        }
    } else if grad.len() != 2 * m + 1 {
        return Err(Error::argument("covector gradient has unexpected length"));
    }
    Ok(acc)
}

/// Lagrange top derivative `eta_i - (d/dt) etabar_i` of a covector pair,
/// evaluated at a jet point one derivative level above the field's order.
pub fn lagrange_top_derivative(field: &dyn CovectorPairField, p: &JetPoint) -> Result<Vec<f64>> {
    let pair = field.eval_pair(p)?;
    (0..field.dimension())
        .map(|i| Ok(pair.dx_value[i] - total_derivative(&pair.dy_grad[i], p)?))
        .collect()
}

/// The Ostrogradski pair evaluated at a jet with `z`: `Omega = Omega_i dx^i +
/// omegabar_i dy^i` and `Phi = Phi_i dx^i + Phibar_i dy^i`. `phi_dy` carries
/// the Ostrogradski momenta `p_i`.
#[derive(Debug, Clone, serde::Serialize)]
pub struct OstrogradskiPair {
    pub omega_dx: Vec<f64>,
    pub omega_dy: Vec<f64>,
    pub phi_dx: Vec<f64>,
    pub phi_dy: Vec<f64>,
}

/// Evaluate the Ostrogradski pair at a jet point with `z`.
pub fn ostrogradski(form: &TangentForm, p: &JetPoint) -> Result<OstrogradskiPair> {
    let z = p.z()?.to_vec();
    let jets = form.jets_at(p.t, &p.x, &p.y)?;
    Ok(OstrogradskiPair {
        omega_dx: omega_big_values(&jets, &p.y, &z),
        omega_dy: jets.omegabar.iter().map(|j| j.value).collect(),
        phi_dx: phi_values(&jets, &p.y, &z),
        phi_dy: phi_bar_values(&jets, &p.y, &z),
    })
}
