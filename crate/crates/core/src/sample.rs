//! Seeded random sampling of jet points and phase states.
//!
//! Used by the classifier CLI, the verify suites and the test harnesses;
//! everything is deterministic given the RNG.

use crate::form::JetPoint;
use crate::reduction::{PhaseStateX, PhaseStateY};
use rand::{Rng, RngExt};

/// Sampling box plus the minimum velocity norm required by slashed forms.
#[derive(Debug, Clone, Copy)]
pub struct SampleSpec {
    pub lo: f64,
    pub hi: f64,
    /// Resample until `max_i |y_i| >= y_floor` (0 disables the constraint).
    pub y_floor: f64,
}

impl SampleSpec {
    pub fn new(lo: f64, hi: f64) -> Self {
        assert!(lo < hi);
        SampleSpec {
            lo,
            hi,
            y_floor: 0.0,
        }
    }

    pub fn with_y_floor(mut self, floor: f64) -> Self {
        self.y_floor = floor;
        self
    }
}

impl Default for SampleSpec {
    fn default() -> Self {
        SampleSpec::new(-2.0, 2.0)
    }
}

fn vec_in(rng: &mut impl Rng, m: usize, spec: &SampleSpec) -> Vec<f64> {
    (0..m).map(|_| rng.random_range(spec.lo..spec.hi)).collect()
}

fn y_vec(rng: &mut impl Rng, m: usize, spec: &SampleSpec) -> Vec<f64> {
    loop {
        let y = vec_in(rng, m, spec);
        if spec.y_floor == 0.0 || y.iter().any(|v| v.abs() >= spec.y_floor) {
            return y;
        }
    }
}

/// A base point `(t, x, y)`.
pub fn random_base_jet(rng: &mut impl Rng, m: usize, spec: &SampleSpec) -> JetPoint {
    JetPoint::new(
        rng.random_range(spec.lo..spec.hi),
        vec_in(rng, m, spec),
        y_vec(rng, m, spec),
    )
}

/// A jet with acceleration level `z`.
pub fn random_jet_z(rng: &mut impl Rng, m: usize, spec: &SampleSpec) -> JetPoint {
    let base = random_base_jet(rng, m, spec);
    JetPoint::with_z(base.t, base.x, base.y, vec_in(rng, m, spec))
}

/// A jet with both `z` and `w` levels.
pub fn random_jet_w(rng: &mut impl Rng, m: usize, spec: &SampleSpec) -> JetPoint {
    let base = random_base_jet(rng, m, spec);
    JetPoint::with_w(
        base.t,
        base.x,
        base.y,
        vec_in(rng, m, spec),
        vec_in(rng, m, spec),
    )
}

/// A random point of `T2*M`.
pub fn random_state_x(rng: &mut impl Rng, m: usize, spec: &SampleSpec) -> PhaseStateX {
    PhaseStateX {
        t: rng.random_range(spec.lo..spec.hi),
        x: vec_in(rng, m, spec),
        y: y_vec(rng, m, spec),
        p: vec_in(rng, m, spec),
    }
}

/// A random point of `T02M`.
pub fn random_state_y(rng: &mut impl Rng, m: usize, spec: &SampleSpec) -> PhaseStateY {
    PhaseStateY {
        t: rng.random_range(spec.lo..spec.hi),
        x: vec_in(rng, m, spec),
        p0: vec_in(rng, m, spec),
        p1: vec_in(rng, m, spec),
    }
}
