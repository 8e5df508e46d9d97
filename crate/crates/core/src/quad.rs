//! Quadrature helpers: Gauss-Legendre nodes and adaptive Simpson.

use crate::error::{Error, Result};

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
///
/// Nodes are the roots of the Legendre polynomial `P_n`, found by Newton
/// iteration from the Chebyshev initial guesses.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for k in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (k as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre_and_derivative(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let (_, dp) = legendre_and_derivative(n, x);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[k] = -x;
        nodes[n - 1 - k] = x;
        weights[k] = w;
        weights[n - 1 - k] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

fn legendre_and_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// Fixed-order Gauss-Legendre quadrature of `f` over `[a, b]`.
pub fn gauss_quad(f: &mut dyn FnMut(f64) -> Result<f64>, a: f64, b: f64, n: usize) -> Result<f64> {
    let (nodes, weights) = gauss_legendre(n);
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut acc = 0.0;
    for (x, w) in nodes.iter().zip(&weights) {
        acc += w * f(mid + half * x)?;
    }
    Ok(half * acc)
}

/// Adaptive Simpson quadrature over `[a, b]` to absolute tolerance `tol`.
pub fn adaptive_simpson(
    f: &mut dyn FnMut(f64) -> Result<f64>,
    a: f64,
    b: f64,
    tol: f64,
) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    let fa = f(a)?;
    let fb = f(b)?;
    let m = 0.5 * (a + b);
    let fm = f(m)?;
    simpson_step(f, a, b, fa, fm, fb, simpson(a, b, fa, fm, fb), tol, 40)
}

fn simpson(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step(
    f: &mut dyn FnMut(f64) -> Result<f64>,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> Result<f64> {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm)?;
    let frm = f(rm)?;
    let left = simpson(a, m, fa, flm, fm);
    let right = simpson(m, b, fm, frm, fb);
    let delta = left + right - whole;
    if depth == 0 {
        return Err(Error::Integration(format!(
            "adaptive Simpson failed to converge on [{a}, {b}] (last correction {delta:.3e})"
        )));
    }
    if delta.abs() <= 15.0 * tol {
        Ok(left + right + delta / 15.0)
    } else {
        let lhs = simpson_step(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)?;
        let rhs = simpson_step(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)?;
        Ok(lhs + rhs)
    }
}
