//! Cross-module identities: the structural facts the theory promises,
//! verified numerically at seeded-random samples with independent oracles
//! (finite differences, quadrature, direct enumeration).

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tanform::dynamics::{integrate, Formulation};
use tanform::expr::Expr;
use tanform::form::{
    action, classify, lagrangian, pointed_decompose, Curve, JetPoint, TangentForm,
};
use tanform::jet::fd_check;
use tanform::linalg::Matrix;
use tanform::poly::Poly;
use tanform::reduction::{
    coregular_matrix, hamiltonian_h, legendre_invert, symplectic_doubleprime, symplectic_prime,
    PhaseStateX, PhaseStateY,
};
use tanform::sample::{random_jet_z, random_state_x, random_state_y, SampleSpec};
use tanform::special::{antisym_affine_fit, builtin, builtin_info, registry};

fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random polynomial tangent form of dimension 2 (degree <= 2 components).
fn random_form(rng: &mut ChaCha8Rng) -> TangentForm {
    let omega0 = Poly::random(rng, 2, 2, 4).to_expr();
    let omega = (0..2)
        .map(|_| Poly::random(rng, 2, 2, 4).to_expr())
        .collect();
    let omegabar = (0..2)
        .map(|_| Poly::random(rng, 2, 2, 4).to_expr())
        .collect();
    TangentForm::new(2, omega0, omega, omegabar, None).unwrap()
}

#[test]
fn fd_check_on_every_builtin_component() {
    // acceptance-grade AD validation: every component of every builtin form
    let mut rng = seeded(2024);
    for info in registry() {
        let form = builtin(info.name).unwrap();
        // slashed forms have steep higher derivatives near the excluded
        // locus: sample a comfortable shell and shorten the FD step there
        // h = 1e-8 puts the sqrt(h)-scaled second-difference step at the
        // classical 1e-4 optimum; the slashed forms additionally need a
        // comfortable sampling shell away from the excluded locus
        let h = 1e-8;
        let floor = if info.y_floor > 0.0 { 0.6 } else { 0.0 };
        let spec = SampleSpec::default().with_y_floor(floor);
        let m = form.dimension();
        let components: Vec<&Expr> = std::iter::once(form.omega0())
            .chain(form.omega())
            .chain(form.omegabar())
            .collect();
        for _ in 0..20 {
            let jet = random_jet_z(&mut rng, m, &spec);
            let mut point = vec![jet.t];
            point.extend_from_slice(&jet.x);
            point.extend_from_slice(&jet.y);
            for comp in &components {
                let f = |vars: &[tanform::jet::Jet2]| comp.eval_jet(vars, m);
                let worst = fd_check(&f, &point, h).unwrap();
                assert!(
                    worst < 1e-6,
                    "{}: fd_check discrepancy {worst:.3e} for `{comp}`",
                    info.name
                );
            }
        }
    }
}

#[test]
fn action_agrees_with_direct_lagrangian_quadrature() {
    // the action of the form equals the action of its second-order
    // Lagrangian, integrated by the same trapezoid rule
    let form = builtin("example2").unwrap();
    let curve = Curve::sample(0.0, 1.5, 400, |t| {
        vec![(1.3 * t).sin() + 0.2 * t * t, (0.7 * t).cos() - t]
    })
    .unwrap();
    let via_action = action(&form, &curve).unwrap();

    let (d1, d2) = curve.derivatives();
    let h = curve.step();
    let n = curve.nodes().len();
    let mut via_lagrangian = 0.0;
    for k in 0..n {
        let p = JetPoint::with_z(
            curve.t0() + k as f64 * h,
            curve.nodes()[k].clone(),
            d1[k].clone(),
            d2[k].clone(),
        );
        let weight = if k == 0 || k == n - 1 { 0.5 } else { 1.0 };
        via_lagrangian += weight * lagrangian(&form, &p).unwrap();
    }
    via_lagrangian *= h;
    assert!(
        (via_action - via_lagrangian).abs() < 1e-12 * (1.0 + via_action.abs()),
        "{via_action} vs {via_lagrangian}"
    );
}

#[test]
fn galilean_pair_has_equal_actions() {
    // the two Galilean forms differ by a G-element: identical actions on
    // curve lifts
    let omega1 = builtin("lsz:k=1,mass=2").unwrap();
    let omega2 = builtin("lsz-dt:k=1,mass=2").unwrap();
    let curve = Curve::sample(0.0, 1.0, 500, |t| vec![t.sin(), (2.0 * t).cos()]).unwrap();
    let a1 = action(&omega1, &curve).unwrap();
    let a2 = action(&omega2, &curve).unwrap();
    assert!((a1 - a2).abs() < 1e-6, "{a1} vs {a2}");
}

#[test]
fn symplectic_prime_is_closed() {
    // cyclic sum of FD derivatives of the entries vanishes; the second form
    // has nonconstant A, B and C blocks so every entry genuinely varies
    let nonlinear = TangentForm::from_strings(
        2,
        "x1*y2^2",
        &["sin(x2)*y1", "x1*y2 + y1^2"],
        &["(1 + y1^2)*y2 + x2^2", "-(1 + y1^2)*y1 + x1*x2"],
        None,
    )
    .unwrap();
    for form in [builtin("example2").unwrap(), nonlinear] {
        let m = form.dimension();
        let dim = 3 * m;
        let mut rng = seeded(41);
        let entries = |state: &[f64]| -> Matrix {
            let s = PhaseStateX {
                t: 0.3,
                x: state[..m].to_vec(),
                y: state[m..2 * m].to_vec(),
                p: state[2 * m..].to_vec(),
            };
            symplectic_prime(&form, &s).unwrap().full()
        };
        for _ in 0..10 {
            let state: Vec<f64> = (0..dim).map(|_| rng.random_range(-2.0..2.0)).collect();
            let h = 1e-4;
            let d_entry = |a: usize, b: usize, c: usize| {
                let mut up = state.clone();
                up[a] += h;
                let mut dn = state.clone();
                dn[a] -= h;
                (entries(&up)[(b, c)] - entries(&dn)[(b, c)]) / (2.0 * h)
            };
            for a in 0..dim {
                for b in (a + 1)..dim {
                    for c in (b + 1)..dim {
                        let cyc = d_entry(a, b, c) + d_entry(b, c, a) + d_entry(c, a, b);
                        assert!(cyc.abs() < 1e-6, "cyclic sum {cyc:.3e} at ({a},{b},{c})");
                    }
                }
            }
        }
    }
}

#[test]
fn cross_formulation_agreement_on_a_nonlinear_form() {
    // biregular away from y = 0: N = I + O(y^2) everywhere invertible,
    // h = 0.3 (y1^2 + y2^2)
    let form = TangentForm::from_strings(
        2,
        "y1*y2",
        &["x2*y1", "-x1*y2"],
        &["y1 + y2^3/10 + x1^2", "y2 - y1^3/10"],
        None,
    )
    .unwrap();
    let jet = JetPoint::with_z(0.0, vec![0.3, -0.2], vec![1.1, 0.9], vec![0.1, -0.3]);
    let mut ic3 = Vec::new();
    ic3.extend_from_slice(&jet.x);
    ic3.extend_from_slice(&jet.y);
    ic3.extend_from_slice(jet.z().unwrap());
    let t3 = integrate(&form, Formulation::ThirdOrder, 0.0, &ic3, 0.5, 5e-4).unwrap();

    let sx = tanform::reduction::phase_lift(&form, &jet).unwrap();
    let mut icx = Vec::new();
    icx.extend_from_slice(&sx.x);
    icx.extend_from_slice(&sx.y);
    icx.extend_from_slice(&sx.p);
    let tx = integrate(&form, Formulation::XFlow, 0.0, &icx, 0.5, 5e-4).unwrap();

    let sy = tanform::reduction::phase_lift_y(&form, &jet).unwrap();
    let mut icy = Vec::new();
    icy.extend_from_slice(&sy.x);
    icy.extend_from_slice(&sy.p0);
    icy.extend_from_slice(&sy.p1);
    let ty = integrate(&form, Formulation::YFlow, 0.0, &icy, 0.5, 5e-4).unwrap();

    let d3x = tanform::dynamics::project_and_compare(&t3, &tx).unwrap();
    let dxy = tanform::dynamics::project_and_compare(&tx, &ty).unwrap();
    assert!(d3x < 1e-6, "third-order vs x-flow {d3x:.3e}");
    assert!(dxy < 1e-6, "x-flow vs y-flow {dxy:.3e}");
}

#[test]
fn symplectic_determinant_tracks_the_c_block() {
    let mut rng = seeded(99);
    let spec = SampleSpec::default();
    let mut seen_invertible = 0;
    for _ in 0..100 {
        let form = random_form(&mut rng);
        let s = random_state_x(&mut rng, 2, &spec);
        let xi = symplectic_prime(&form, &s).unwrap();
        let det_full = xi.full().det();
        let det_c = xi.c.det();
        assert!(
            (det_full.abs() - det_c.abs()).abs() < 1e-9 * (1.0 + det_c.abs()),
            "|det Xi'| = {det_full:.6e} vs |det C| = {det_c:.6e}"
        );
        let invertible_full = det_full.abs() > 1e-9;
        let invertible_c = det_c.abs() > 1e-9;
        assert_eq!(invertible_full, invertible_c);
        if invertible_c {
            seen_invertible += 1;
        }
    }
    assert!(seen_invertible > 50, "random forms were mostly degenerate");
}

#[test]
fn doubleprime_is_the_pullback_of_prime() {
    // Xi'' = J^T Xi' J with J the FD Jacobian of F(x, p0, p1) = (x, T, p1).
    // The builtin omega-bars are linear, so central differences of T are
    // exact and the comparison is sharp.
    for name in ["example2", "example3", "example4", "lsz"] {
        let form = builtin(name).unwrap();
        let m = form.dimension();
        let mut rng = seeded(7 + name.len() as u64);
        let spec = SampleSpec::default();
        for _ in 0..50 {
            let s = random_state_y(&mut rng, m, &spec);
            let guess = vec![0.4; m];
            let xi2 = symplectic_doubleprime(&form, &s, &guess).unwrap().full();

            let t_of = |x: &[f64], p0: &[f64]| -> Vec<f64> {
                legendre_invert(&form, s.t, x, p0, &guess).unwrap()
            };
            let eps = 1e-4;
            // Jacobian blocks of F by central differences
            let mut j = Matrix::zeros(3 * m, 3 * m);
            for i in 0..m {
                j[(i, i)] = 1.0;
                j[(2 * m + i, 2 * m + i)] = 1.0;
            }
            for col in 0..m {
                let mut xu = s.x.clone();
                xu[col] += eps;
                let mut xd = s.x.clone();
                xd[col] -= eps;
                let tu = t_of(&xu, &s.p0);
                let td = t_of(&xd, &s.p0);
                for row in 0..m {
                    j[(m + row, col)] = (tu[row] - td[row]) / (2.0 * eps);
                }
                let mut pu = s.p0.clone();
                pu[col] += eps;
                let mut pd = s.p0.clone();
                pd[col] -= eps;
                let tu = t_of(&s.x, &pu);
                let td = t_of(&s.x, &pd);
                for row in 0..m {
                    j[(m + row, m + col)] = (tu[row] - td[row]) / (2.0 * eps);
                }
            }
            let image = PhaseStateX {
                t: s.t,
                x: s.x.clone(),
                y: t_of(&s.x, &s.p0),
                p: s.p1.clone(),
            };
            let xi1 = symplectic_prime(&form, &image).unwrap().full();
            let pulled = j.transpose().matmul(&xi1).matmul(&j);
            for a in 0..3 * m {
                for b in 0..3 * m {
                    assert!(
                        (pulled[(a, b)] - xi2[(a, b)]).abs() < 1e-8,
                        "{name}: entry ({a},{b}): {} vs {}",
                        pulled[(a, b)],
                        xi2[(a, b)]
                    );
                }
            }
        }
    }
}

#[test]
fn doubleprime_pullback_holds_for_a_nonlinear_legendre_map() {
    // nonlinear omegabar: the FD Jacobian of F carries Newton noise of
    // about 1e-12 / (2 eps), so the comparison runs at 1e-6 with a
    // Richardson-extrapolated difference
    let form = TangentForm::new(
        2,
        Expr::Number(0.0),
        vec![
            tanform::parse("x2*y1", 2).unwrap(),
            tanform::parse("-x1*y2", 2).unwrap(),
        ],
        vec![
            tanform::parse("y1 + y2^3/10 + x1^2", 2).unwrap(),
            tanform::parse("y2 - y1^3/10", 2).unwrap(),
        ],
        None,
    )
    .unwrap();
    let m = 2;
    let mut rng = seeded(313);
    let mut tested = 0;
    while tested < 10 {
        let s = PhaseStateY {
            t: rng.random_range(-1.0..1.0),
            x: (0..m).map(|_| rng.random_range(-1.0..1.0)).collect(),
            p0: (0..m).map(|_| rng.random_range(0.8..1.8)).collect(),
            p1: (0..m).map(|_| rng.random_range(-1.0..1.0)).collect(),
        };
        let guess = s.p0.clone();
        // h vanishes at y = 0; keep away from it
        let y0 = match legendre_invert(&form, s.t, &s.x, &s.p0, &guess) {
            Ok(y) => y,
            Err(_) => continue,
        };
        if y0[0] * y0[0] + y0[1] * y0[1] < 0.5 {
            continue;
        }
        let xi2 = match symplectic_doubleprime(&form, &s, &guess) {
            Ok(xi) => xi.full(),
            Err(_) => continue,
        };
        let t_of = |x: &[f64], p0: &[f64]| legendre_invert(&form, s.t, x, p0, &guess).unwrap();
        let fd_column = |apply: &dyn Fn(f64) -> Vec<f64>| -> Vec<f64> {
            let eps = 1e-4;
            let d = |e: f64| -> Vec<f64> {
                let up = apply(e);
                let dn = apply(-e);
                (0..m).map(|r| (up[r] - dn[r]) / (2.0 * e)).collect()
            };
            let full = d(eps);
            let half = d(eps / 2.0);
            (0..m).map(|r| (4.0 * half[r] - full[r]) / 3.0).collect()
        };
        let mut j = Matrix::zeros(3 * m, 3 * m);
        for i in 0..m {
            j[(i, i)] = 1.0;
            j[(2 * m + i, 2 * m + i)] = 1.0;
        }
        for col in 0..m {
            let dx = fd_column(&|e: f64| {
                let mut x = s.x.clone();
                x[col] += e;
                t_of(&x, &s.p0)
            });
            let dp = fd_column(&|e: f64| {
                let mut p0 = s.p0.clone();
                p0[col] += e;
                t_of(&s.x, &p0)
            });
            for row in 0..m {
                j[(m + row, col)] = dx[row];
                j[(m + row, m + col)] = dp[row];
            }
        }
        let image = PhaseStateX {
            t: s.t,
            x: s.x.clone(),
            y: y0,
            p: s.p1.clone(),
        };
        let xi1 = symplectic_prime(&form, &image).unwrap().full();
        let pulled = j.transpose().matmul(&xi1).matmul(&j);
        for a in 0..3 * m {
            for b in 0..3 * m {
                assert!(
                    (pulled[(a, b)] - xi2[(a, b)]).abs() < 1e-6,
                    "entry ({a},{b}): {} vs {}",
                    pulled[(a, b)],
                    xi2[(a, b)]
                );
            }
        }
        tested += 1;
    }
}

#[test]
fn coregular_agrees_with_regular_on_random_nondegenerate_forms() {
    let mut rng = seeded(4242);
    let mut tested = 0;
    while tested < 50 {
        // two classes: generic polynomial omegabar (h generically nonzero)
        // and gradient-type omegabar (h identically zero)
        let gradient_type = tested % 2 == 1;
        let (form, expect_regular) = if gradient_type {
            // omegabar_i = d/dy_i (|y|^2 + small poly): N symmetric positive
            let mut f = Poly::random(&mut rng, 2, 2, 3);
            let n = 5;
            let mut quad = vec![0u32; n];
            quad[3] = 2;
            f.push_term(2.0, quad.clone());
            quad[3] = 0;
            quad[4] = 2;
            f.push_term(2.0, quad);
            let omegabar = vec![f.partial(3).to_expr(), f.partial(4).to_expr()];
            (
                TangentForm::new(
                    2,
                    Expr::Number(0.0),
                    vec![Expr::Number(0.0); 2],
                    omegabar,
                    None,
                )
                .unwrap(),
                false,
            )
        } else {
            (random_form(&mut rng), true)
        };
        let jet = random_jet_z(&mut rng, 2, &SampleSpec::new(-1.0, 1.0));
        let jets_report = classify(&form, std::slice::from_ref(&jet)).unwrap();
        if !jets_report.non_degenerated {
            continue; // resample: the Legendre map must be invertible here
        }
        if expect_regular != jets_report.regular {
            continue; // pathological draw (e.g. h vanishing at the sample)
        }
        // corresponding cotangent point p0 = omegabar(t, x, y)
        let (_, _, p0) = form.component_values(jet.t, &jet.x, &jet.y).unwrap();
        let h_tilde = coregular_matrix(&form, jet.t, &jet.x, &p0, &jet.y).unwrap();
        // same two-sided notion as the classifier: invertible and not
        // roundoff-level (an antisymmetric eps-matrix has condition number 1)
        let coregular = h_tilde.is_invertible() && h_tilde.max_abs() >= 1e-10;
        assert_eq!(
            coregular, jets_report.regular,
            "co-regular vs regular disagree (h~ = {h_tilde:?})"
        );
        tested += 1;
    }
}

#[test]
fn pointed_decomposition_reproduces_the_lagrangian() {
    let mut rng = seeded(321);
    for _ in 0..50 {
        // pointed polynomial: every term has at least one y factor
        let mut poly = Poly::zero(2);
        for _ in 0..5 {
            let mut exps = vec![0u32; 5];
            for _ in 0..rng.random_range(0..3u32) {
                exps[rng.random_range(0..5)] += 1;
            }
            exps[3 + rng.random_range(0..2usize)] += 1; // force a y factor
            poly.push_term(rng.random_range(-1.0..1.0), exps);
        }
        let l = poly.to_expr();
        let t = rng.random_range(-1.0..1.0);
        let x: Vec<f64> = (0..2).map(|_| rng.random_range(-1.0..1.0)).collect();
        let y: Vec<f64> = (0..2).map(|_| rng.random_range(-1.0..1.0)).collect();
        let nu = pointed_decompose(&l, 2, t, &x, &y, 32).unwrap();
        let mut point = vec![t];
        point.extend_from_slice(&x);
        point.extend_from_slice(&y);
        let direct = l.eval_value(&point, 2).unwrap();
        let contracted = y[0] * nu[0] + y[1] * nu[1];
        assert!(
            (direct - contracted).abs() < 1e-10 * (1.0 + direct.abs()),
            "{direct} vs {contracted}"
        );
    }
}

#[test]
fn lmhelp_fit_and_jacobian_condition_agree() {
    // condition-1 (antisymmetric Jacobian) holds iff the affine
    // antisymmetric fit is exact, over random draws from both classes
    let mut rng = seeded(777);
    let samples: Vec<Vec<f64>> = (0..8)
        .map(|_| (0..2).map(|_| rng.random_range(-2.0..2.0)).collect())
        .collect();
    for k in 0..50 {
        let antisymmetric = k % 2 == 0;
        let c01 = rng.random_range(-2.0..2.0);
        let d: Vec<f64> = (0..2).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut o1 = Poly::zero(2);
        o1.push_term(c01, vec![0, 0, 1, 0, 0]); // c01 * x2
        o1.push_term(d[0], vec![0, 0, 0, 0, 0]);
        let mut o2 = Poly::zero(2);
        o2.push_term(-c01, vec![0, 1, 0, 0, 0]); // -c01 * x1
        o2.push_term(d[1], vec![0, 0, 0, 0, 0]);
        if !antisymmetric {
            // inject a symmetric or nonlinear violation
            if k % 4 == 1 {
                o1.push_term(0.5, vec![0, 1, 0, 0, 0]); // + x1 (symmetric part)
            } else {
                o2.push_term(0.5, vec![0, 0, 2, 0, 0]); // + x2^2 (nonlinear)
            }
        }
        let omega = vec![o1.to_expr(), o2.to_expr()];
        let fit = antisym_affine_fit(&omega, 2, &samples).unwrap();
        let condition_holds = fit.condition1_violation < 1e-9;
        let fit_exact = fit.residual < 1e-9;
        assert_eq!(
            condition_holds, fit_exact,
            "draw {k}: condition {condition_holds} vs fit {fit_exact} \
             (violation {:.3e}, residual {:.3e})",
            fit.condition1_violation, fit.residual
        );
        assert_eq!(condition_holds, antisymmetric, "draw {k} misclassified");
    }
}

#[test]
fn hamiltonian_is_conserved_along_autonomous_x_flows() {
    for name in [
        "example1", "example2", "example3", "example4", "lsz", "fedosov",
    ] {
        let form = builtin(name).unwrap();
        let m = form.dimension();
        let mut rng = seeded(11);
        let spec = SampleSpec::new(-0.8, 0.8);
        let s0 = random_state_x(&mut rng, m, &spec);
        let mut ic = Vec::new();
        ic.extend_from_slice(&s0.x);
        ic.extend_from_slice(&s0.y);
        ic.extend_from_slice(&s0.p);
        let traj = integrate(
            &form,
            Formulation::XFlow,
            0.0,
            &ic,
            2.0 * std::f64::consts::PI,
            1e-3,
        )
        .unwrap();
        let h_at = |state: &[f64]| {
            hamiltonian_h(
                &form,
                &PhaseStateX {
                    t: 0.0,
                    x: state[..m].to_vec(),
                    y: state[m..2 * m].to_vec(),
                    p: state[2 * m..].to_vec(),
                },
            )
            .unwrap()
        };
        let h0 = h_at(&traj.states[0]);
        let mut drift = 0.0_f64;
        for state in &traj.states {
            drift = drift.max((h_at(state) - h0).abs());
        }
        assert!(drift < 1e-7, "{name}: Hamiltonian drift {drift:.3e}");
    }
}

#[test]
fn equivalence_holds_for_symbolically_shifted_forms() {
    // b = a + dF passes the witness check with the same F
    let mut rng = seeded(6060);
    let a = builtin("example2").unwrap();
    for _ in 0..10 {
        let f = Poly::random(&mut rng, 2, 3, 5);
        let b = a.with_added_differential(&f);
        let samples: Vec<JetPoint> = (0..12)
            .map(|_| random_jet_z(&mut rng, 2, &SampleSpec::default()))
            .collect();
        let report = tanform::form::equivalence_check(&a, &b, &f.to_expr(), &samples).unwrap();
        assert!(report.equivalent, "residual {}", report.worst_residual);
    }
}

#[test]
fn slashed_form_domain_behaviour() {
    let form = builtin("mathisson").unwrap();
    assert_eq!(builtin_info("mathisson").unwrap().y_floor, 0.1);
    // at y = 0 the components are undefined
    assert!(form
        .component_values(0.0, &[0.0, 0.0], &[0.0, 0.0])
        .is_err());
    // on the sampling shell everything is finite
    let mut rng = seeded(5);
    let spec = SampleSpec::default().with_y_floor(0.1);
    for _ in 0..50 {
        let p = random_jet_z(&mut rng, 2, &spec);
        let (o0, o, ob) = form.component_values(p.t, &p.x, &p.y).unwrap();
        assert!(o0.is_finite());
        assert!(o.iter().chain(ob.iter()).all(|v| v.is_finite()));
    }
}
