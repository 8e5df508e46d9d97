//! Fixed-step RK4 integration of the three formulations of the dynamics:
//! the third-order semi-spray on `T2M`, the X-flow on `T2*M` and the Y-flow
//! on `T02M`, plus cross-formulation comparison and the on-shell residual
//! check.

use crate::error::{Error, Result};
use crate::form::{JetPoint, TangentForm};
use crate::linalg::vec_diff_inf;
use crate::reduction::{x_field, y_field, PhaseStateX, PhaseStateY};
use crate::variational::{el_residual, third_order_semispray};
use serde::Serialize;

/// Derivative callback of a generic first-order system.
pub(crate) type DerivFn<'a> = dyn FnMut(f64, &[f64]) -> Result<Vec<f64>> + 'a;

/// Which first-order extended system a trajectory integrates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Formulation {
    /// State `(x, y, z)`; derivative `(y, z, w*(t, x, y, z))`.
    ThirdOrder,
    /// State `(x, y, p)` on `T2*M`.
    XFlow,
    /// State `(x, p0, p1)` on `T02M`.
    YFlow,
}

impl Formulation {
    pub fn as_str(self) -> &'static str {
        match self {
            Formulation::ThirdOrder => "third-order",
            Formulation::XFlow => "phase-x",
            Formulation::YFlow => "phase-y",
        }
    }
}

/// A uniformly sampled trajectory of one formulation. Each state is a
/// `3m`-vector in the formulation's coordinate order; the `x` block always
/// comes first.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub formulation: Formulation,
    pub m: usize,
    pub t0: f64,
    pub dt: f64,
    pub states: Vec<Vec<f64>>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn time(&self, k: usize) -> f64 {
        self.t0 + k as f64 * self.dt
    }

    pub fn x_at(&self, k: usize) -> &[f64] {
        &self.states[k][..self.m]
    }

    pub fn last(&self) -> &[f64] {
        self.states.last().expect("trajectory is never empty")
    }
}

/// Hard cap on the number of RK4 steps.
pub const MAX_STEPS: u64 = 10_000_000;

/// RK4 on a generic first-order system. The step is adjusted to the nearest
/// value that divides `t1 - t0` evenly, so the grid is uniform and ends at
/// `t1` exactly; returns the effective step and the states.
pub(crate) fn rk4_raw(
    t0: f64,
    state0: &[f64],
    t1: f64,
    dt: f64,
    deriv: &mut DerivFn,
) -> Result<(f64, Vec<Vec<f64>>)> {
    if !dt.is_finite() || dt <= 0.0 {
        return Err(Error::argument("step dt must be positive"));
    }
    if t1 < t0 {
        return Err(Error::argument("t1 must not precede t0"));
    }
    if t1 == t0 {
        return Ok((dt, vec![state0.to_vec()]));
    }
    let raw_steps = (t1 - t0) / dt;
    if raw_steps > MAX_STEPS as f64 {
        return Err(Error::argument(format!(
            "integration would take {raw_steps:.0} steps (cap {MAX_STEPS})"
        )));
    }
    let n = (raw_steps.round() as u64).max(1);
    let h = (t1 - t0) / n as f64;
    let dim = state0.len();
    let mut states = Vec::with_capacity(n as usize + 1);
    states.push(state0.to_vec());
    let mut state = state0.to_vec();
    for k in 0..n {
        let t = t0 + k as f64 * h;
        let step = |e: Error| Error::Integration(format!("aborted at t = {t:.9}: {e}"));
        let k1 = deriv(t, &state).map_err(step)?;
        let mut s2 = vec![0.0; dim];
        for i in 0..dim {
            s2[i] = state[i] + 0.5 * h * k1[i];
        }
        let k2 = deriv(t + 0.5 * h, &s2).map_err(step)?;
        let mut s3 = vec![0.0; dim];
        for i in 0..dim {
            s3[i] = state[i] + 0.5 * h * k2[i];
        }
        let k3 = deriv(t + 0.5 * h, &s3).map_err(step)?;
        let mut s4 = vec![0.0; dim];
        for i in 0..dim {
            s4[i] = state[i] + h * k3[i];
        }
        let k4 = deriv(t + h, &s4).map_err(step)?;
        for i in 0..dim {
            state[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        if state.iter().any(|v| !v.is_finite()) {
            return Err(Error::Integration(format!(
                "state became non-finite after t = {t:.9}"
            )));
        }
        states.push(state.clone());
    }
    Ok((h, states))
}

/// Integrate the chosen formulation from `state0` (a `3m`-vector in the
/// formulation's coordinate order) over `[t0, t1]`.
pub fn integrate(
    form: &TangentForm,
    formulation: Formulation,
    t0: f64,
    state0: &[f64],
    t1: f64,
    dt: f64,
) -> Result<Trajectory> {
    let m = form.dimension();
    if state0.len() != 3 * m {
        return Err(Error::argument(format!(
            "initial state must have 3m = {} entries, got {}",
            3 * m,
            state0.len()
        )));
    }
    let (h, states) = match formulation {
        Formulation::ThirdOrder => rk4_raw(t0, state0, t1, dt, &mut |t, s| {
            let (x, rest) = s.split_at(m);
            let (y, z) = rest.split_at(m);
            let p = JetPoint::with_z(t, x.to_vec(), y.to_vec(), z.to_vec());
            let w = third_order_semispray(form, &p)?;
            let mut d = Vec::with_capacity(3 * m);
            d.extend_from_slice(y);
            d.extend_from_slice(z);
            d.extend_from_slice(&w);
            Ok(d)
        })?,
        Formulation::XFlow => rk4_raw(t0, state0, t1, dt, &mut |t, s| {
            let (x, rest) = s.split_at(m);
            let (y, p) = rest.split_at(m);
            let vel = x_field(
                form,
                &PhaseStateX {
                    t,
                    x: x.to_vec(),
                    y: y.to_vec(),
                    p: p.to_vec(),
                },
            )?;
            let mut d = Vec::with_capacity(3 * m);
            d.extend_from_slice(&vel.xdot);
            d.extend_from_slice(&vel.ydot);
            d.extend_from_slice(&vel.pdot);
            Ok(d)
        })?,
        Formulation::YFlow => {
            // warm-start the Legendre Newton with the previously solved y
            let mut guess: Vec<f64> = state0[m..2 * m].to_vec();
            rk4_raw(t0, state0, t1, dt, &mut |t, s| {
                let (x, rest) = s.split_at(m);
                let (p0, p1) = rest.split_at(m);
                let vel = y_field(
                    form,
                    &PhaseStateY {
                        t,
                        x: x.to_vec(),
                        p0: p0.to_vec(),
                        p1: p1.to_vec(),
                    },
                    &guess,
                )?;
                guess = vel.y.clone();
                let mut d = Vec::with_capacity(3 * m);
                d.extend_from_slice(&vel.xdot);
                d.extend_from_slice(&vel.p0dot);
                d.extend_from_slice(&vel.p1dot);
                Ok(d)
            })?
        }
    };
    Ok(Trajectory {
        formulation,
        m,
        t0,
        dt: h,
        states,
    })
}

/// Sup-norm deviation of the `x`-projections of two trajectories on the same
/// grid (the first `m` state entries in every formulation).
pub fn project_and_compare(a: &Trajectory, b: &Trajectory) -> Result<f64> {
    if a.m != b.m {
        return Err(Error::argument("trajectories have different dimensions"));
    }
    if a.len() != b.len()
        || (a.t0 - b.t0).abs() > 1e-12
        || (a.dt - b.dt).abs() > 1e-12 * (1.0 + a.dt.abs())
    {
        return Err(Error::argument("trajectory grids do not match"));
    }
    let mut worst = 0.0_f64;
    for k in 0..a.len() {
        worst = worst.max(vec_diff_inf(a.x_at(k), b.x_at(k)));
    }
    Ok(worst)
}

/// Max on-shell Euler-Lagrange residual along a third-order trajectory,
/// reconstructing `w` at interior nodes from central differences of the
/// stored `z` channel. The reconstruction is O(dt^2), so the figure shrinks
/// quadratically under step refinement.
pub fn residual_along(form: &TangentForm, traj: &Trajectory) -> Result<f64> {
    if traj.formulation != Formulation::ThirdOrder {
        return Err(Error::argument(
            "residual_along applies to third-order trajectories",
        ));
    }
    let m = traj.m;
    if traj.len() < 3 {
        return Ok(0.0);
    }
    let mut worst = 0.0_f64;
    for k in 1..traj.len() - 1 {
        let state = &traj.states[k];
        let w: Vec<f64> = (0..m)
            .map(|i| {
                (traj.states[k + 1][2 * m + i] - traj.states[k - 1][2 * m + i]) / (2.0 * traj.dt)
            })
            .collect();
        let p = JetPoint::with_w(
            traj.time(k),
            state[..m].to_vec(),
            state[m..2 * m].to_vec(),
            state[2 * m..].to_vec(),
            w,
        );
        let e = el_residual(form, &p)?;
        worst = worst.max(e.iter().fold(0.0_f64, |a, v| a.max(v.abs())));
    }
    Ok(worst)
}
