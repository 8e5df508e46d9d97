//! Acceptance suite: one test per criterion, each printing a PASS line with
//! its measured figure (run with `--nocapture` to see them).

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::process::Command;
use tanform::checks::{discrete_variational_check, Status};
use tanform::dynamics::{integrate, project_and_compare, Formulation};
use tanform::expr::Expr;
use tanform::form::{classify, equivalence_check, lagrangian, JetPoint, TangentForm};
use tanform::jet::{fd_check, Jet2, VarSet};
use tanform::linalg::Matrix;
use tanform::poly::Poly;
use tanform::reduction::{
    coregular_matrix, hamiltonian_residual, phase_lift, phase_lift_y, pushforward_residual,
};
use tanform::sample::{random_jet_w, random_jet_z, random_state_x, random_state_y, SampleSpec};
use tanform::special::{
    builtin, el1d_residual, linear_constants, registry, semispray_family_linear,
    semispray_family_y_only, standard_lagrangian_1d, y_only_constants,
};
use tanform::variational::{el_residual, el_split, lagrange_top_derivative, OmegaPair, PhiPair};

fn pass(criterion: u32, name: &str, figure: &str) {
    println!("acceptance {criterion:02} ({name}): PASS [{figure}]");
}

fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn run_cli(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_tanform"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn read_trajectory_csv(path: &str) -> Vec<Vec<f64>> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|line| line.split(',').map(|v| v.parse().unwrap()).collect())
        .collect()
}

/// Criterion 1: third-order integration of the first example from a
/// quadratic-solution initial state reproduces the closed form at every node
/// within 1e-10 (RK4 is exact on quadratics).
#[test]
fn acceptance_01_example1_quadratic_golden() {
    let csv = std::env::temp_dir().join(format!("tanform-acc1-{}.csv", std::process::id()));
    let csv_str = csv.to_string_lossy().into_owned();
    let out = run_cli(&[
        "integrate",
        "example1",
        "--method",
        "third-order",
        "--ic",
        "0,0,0,1,2,1,-1",
        "--t1",
        "1",
        "--dt",
        "0.01",
        "--out",
        &csv_str,
    ]);
    assert_eq!(out.status.code(), Some(0));
    let rows = read_trajectory_csv(&csv_str);
    assert_eq!(rows.len(), 101);
    let mut worst = 0.0_f64;
    for row in &rows {
        let t = row[0];
        let expect = [t + 0.5 * t * t, 2.0 * t - 0.5 * t * t];
        worst = worst.max((row[1] - expect[0]).abs());
        worst = worst.max((row[2] - expect[1]).abs());
    }
    std::fs::remove_file(&csv).ok();
    assert!(worst < 1e-10, "worst node error {worst:.3e}");
    pass(
        1,
        "example1 golden",
        &format!("worst node error {worst:.3e}"),
    );
}

/// Criterion 2: the circle solution of the second example returns to its
/// initial 6-vector at 2 pi within 1e-6 at dt = 1e-3; halving the step
/// shrinks the terminal error by at least 15x (order 4, measured above the
/// roundoff floor); and a three-point {1, cos, sin} fit through samples near
/// t = 0, 1, 2 reconstructs every node within 1e-6.
#[test]
fn acceptance_02_example2_circle_golden() {
    let form = builtin("example2").unwrap();
    let ic = [1.0, 0.0, 0.0, 1.0, -1.0, 0.0];
    let t1 = 2.0 * std::f64::consts::PI;
    let traj = integrate(&form, Formulation::ThirdOrder, 0.0, &ic, t1, 1e-3).unwrap();
    let terminal = traj.last();
    let mut return_err = 0.0_f64;
    for i in 0..6 {
        return_err = return_err.max((terminal[i] - ic[i]).abs());
    }
    assert!(return_err < 1e-6, "return error {return_err:.3e}");

    // order-4 check where truncation dominates the floor
    let err_at = |dt: f64| {
        let traj = integrate(&form, Formulation::ThirdOrder, 0.0, &ic, t1, dt).unwrap();
        let end = traj.last();
        (0..6).fold(0.0_f64, |a, i| a.max((end[i] - ic[i]).abs()))
    };
    let coarse = err_at(0.05);
    let fine = err_at(0.025);
    assert!(
        coarse / fine >= 15.0,
        "order-4 ratio {} (errors {coarse:.3e} -> {fine:.3e})",
        coarse / fine
    );

    // three-point reconstruction: solutions live in span{1, cos t, sin t}
    let h = traj.dt;
    let k1 = (1.0 / h).round() as usize;
    let k2 = (2.0 / h).round() as usize;
    let times = [0.0, traj.time(k1), traj.time(k2)];
    let vandermonde = Matrix::from_fn(3, 3, |r, c| match c {
        0 => 1.0,
        1 => times[r].cos(),
        _ => times[r].sin(),
    });
    let mut fit_err = 0.0_f64;
    for coord in 0..2 {
        let rhs = [
            traj.states[0][coord],
            traj.states[k1][coord],
            traj.states[k2][coord],
        ];
        let coeffs = vandermonde.solve(&rhs).unwrap();
        for k in 0..traj.len() {
            let t = traj.time(k);
            let fitted = coeffs[0] + coeffs[1] * t.cos() + coeffs[2] * t.sin();
            fit_err = fit_err.max((fitted - traj.states[k][coord]).abs());
        }
    }
    assert!(fit_err < 1e-6, "three-point fit error {fit_err:.3e}");
    pass(
        2,
        "example2 golden",
        &format!(
            "return {return_err:.3e}, order ratio {:.1}, fit {fit_err:.3e}",
            coarse / fine
        ),
    );
}

/// Criterion 3: for 20 random smooth curves over the four example forms, the
/// central-difference gradient of the discretized action matches the
/// residual times dt with empirical convergence order >= 1.9.
#[test]
fn acceptance_03_discrete_variational_identity() {
    let mut details = Vec::new();
    for (i, name) in ["example1", "example2", "example3", "example4"]
        .iter()
        .enumerate()
    {
        let form = builtin(name).unwrap();
        // 5 random curves per form = 20 total
        let outcome = discrete_variational_check(&form, 100 + i as u64).unwrap();
        assert_eq!(
            outcome.status,
            Status::Passed,
            "{name}: {} (shortfall {})",
            outcome.detail,
            outcome.worst_residual
        );
        details.push(outcome.detail);
    }
    pass(3, "discrete variational identity", &details.join("; "));
}

/// Criterion 4: the Hamiltonian identity residual stays below 1e-8 at 100
/// seeded states for the example forms and the Galilean builtin; for the
/// time-scaled form the correction term is what makes it hold.
#[test]
fn acceptance_04_hamiltonian_identity() {
    let mut worst_all = 0.0_f64;
    for name in ["example1", "example2", "example3", "example4", "lsz"] {
        let form = builtin(name).unwrap();
        let mut rng = seeded(4);
        let spec = SampleSpec::default();
        let mut worst = 0.0_f64;
        for _ in 0..100 {
            let s = random_state_x(&mut rng, 2, &spec);
            worst = worst.max(hamiltonian_residual(&form, &s, true).unwrap());
        }
        assert!(worst < 1e-8, "{name}: corrected residual {worst:.3e}");
        worst_all = worst_all.max(worst);
    }

    let form = builtin("timedep").unwrap();
    let mut rng = seeded(44);
    let spec = SampleSpec::default();
    let mut with = 0.0_f64;
    let mut without = 0.0_f64;
    for _ in 0..100 {
        let s = random_state_x(&mut rng, 2, &spec);
        with = with.max(hamiltonian_residual(&form, &s, true).unwrap());
        without = without.max(hamiltonian_residual(&form, &s, false).unwrap());
    }
    assert!(with < 1e-8, "corrected residual {with:.3e}");
    assert!(without > 1e-3, "uncorrected residual only {without:.3e}");
    pass(
        4,
        "hamiltonian identity",
        &format!("corrected {worst_all:.3e}, uncorrected (time-dep) {without:.3e}"),
    );
}

/// Criterion 5: the x-projections of the three formulations agree within
/// 1e-6 over [0, 1] at dt = 1e-3 for examples 2-4, and the pushforward of
/// the Y-flow matches the X-flow within 1e-8 at 50 random states.
#[test]
fn acceptance_05_reduction_consistency() {
    let mut worst_proj = 0.0_f64;
    let mut worst_push = 0.0_f64;
    for name in ["example2", "example3", "example4"] {
        let form = builtin(name).unwrap();
        let jet = JetPoint::with_z(0.0, vec![0.4, -0.3], vec![0.9, 0.6], vec![-0.2, 0.5]);

        let mut ic3 = Vec::new();
        ic3.extend_from_slice(&jet.x);
        ic3.extend_from_slice(&jet.y);
        ic3.extend_from_slice(jet.z().unwrap());
        let t3 = integrate(&form, Formulation::ThirdOrder, 0.0, &ic3, 1.0, 1e-3).unwrap();

        let sx = phase_lift(&form, &jet).unwrap();
        let mut icx = Vec::new();
        icx.extend_from_slice(&sx.x);
        icx.extend_from_slice(&sx.y);
        icx.extend_from_slice(&sx.p);
        let tx = integrate(&form, Formulation::XFlow, 0.0, &icx, 1.0, 1e-3).unwrap();

        let sy = phase_lift_y(&form, &jet).unwrap();
        let mut icy = Vec::new();
        icy.extend_from_slice(&sy.x);
        icy.extend_from_slice(&sy.p0);
        icy.extend_from_slice(&sy.p1);
        let ty = integrate(&form, Formulation::YFlow, 0.0, &icy, 1.0, 1e-3).unwrap();

        let d3x = project_and_compare(&t3, &tx).unwrap();
        let dxy = project_and_compare(&tx, &ty).unwrap();
        assert!(d3x < 1e-6, "{name}: third-order vs x-flow {d3x:.3e}");
        assert!(dxy < 1e-6, "{name}: x-flow vs y-flow {dxy:.3e}");
        worst_proj = worst_proj.max(d3x).max(dxy);

        let mut rng = seeded(5);
        let spec = SampleSpec::default();
        for _ in 0..50 {
            let s = random_state_y(&mut rng, 2, &spec);
            let r = pushforward_residual(&form, &s, &[0.5, 0.5]).unwrap();
            assert!(r < 1e-8, "{name}: pushforward residual {r:.3e}");
            worst_push = worst_push.max(r);
        }
    }
    pass(
        5,
        "reduction consistency",
        &format!("projections {worst_proj:.3e}, pushforward {worst_push:.3e}"),
    );
}

/// Criterion 6: gauge and equivalence suite: the residual is unchanged by
/// adding dF (1e-10, 10 random polynomial F x 100 jets), the Galilean pair
/// passes the witness check with F = 0, and the Lagrangian is stable under
/// G-elements at 1e-12 relative.
#[test]
fn acceptance_06_gauge_and_equivalence() {
    let mut worst_gauge = 0.0_f64;
    for name in ["example1", "example2", "example3", "example4"] {
        let form = builtin(name).unwrap();
        let mut rng = seeded(6);
        let spec = SampleSpec::default();
        for _ in 0..10 {
            let f = Poly::random(&mut rng, 2, 3, 5);
            let shifted = form.with_added_differential(&f);
            for _ in 0..10 {
                let p = random_jet_w(&mut rng, 2, &spec);
                let base = el_residual(&form, &p).unwrap();
                let gauged = el_residual(&shifted, &p).unwrap();
                for i in 0..2 {
                    worst_gauge = worst_gauge.max((base[i] - gauged[i]).abs());
                }
            }
        }
    }
    assert!(worst_gauge < 1e-10, "gauge residual {worst_gauge:.3e}");

    // Galilean pair with the zero witness
    let omega1 = builtin("lsz:k=1,mass=2").unwrap();
    let omega2 = builtin("lsz-dt:k=1,mass=2").unwrap();
    let mut rng = seeded(66);
    let samples: Vec<JetPoint> = (0..20)
        .map(|_| random_jet_z(&mut rng, 2, &SampleSpec::default()))
        .collect();
    let report = equivalence_check(&omega1, &omega2, &Expr::Number(0.0), &samples).unwrap();
    assert!(report.equivalent, "pair residual {}", report.worst_residual);

    // G-element stability of the Lagrangian
    let form = builtin("example2").unwrap();
    let mut rng = seeded(666);
    let mut worst_g = 0.0_f64;
    for _ in 0..10 {
        let a: Vec<Expr> = (0..2)
            .map(|_| Poly::random(&mut rng, 2, 2, 4).to_expr())
            .collect();
        let shifted = form.with_added_g_element(&a);
        for _ in 0..10 {
            let p = random_jet_z(&mut rng, 2, &SampleSpec::default());
            let l0 = lagrangian(&form, &p).unwrap();
            let l1 = lagrangian(&shifted, &p).unwrap();
            worst_g = worst_g.max((l0 - l1).abs() / (1.0 + l0.abs()));
        }
    }
    assert!(worst_g < 1e-12, "G-element drift {worst_g:.3e}");
    pass(
        6,
        "gauge/equivalence",
        &format!(
            "gauge {worst_gauge:.3e}, pair {:.3e}, G-drift {worst_g:.3e}",
            report.worst_residual
        ),
    );
}

/// Criterion 7: two successive Lagrange top derivatives starting from the
/// Ostrogradski form reproduce the Euler-Lagrange residual within 1e-10 at
/// 100 random jets for every builtin form.
#[test]
fn acceptance_07_ostrogradski_chain() {
    let mut worst_all = 0.0_f64;
    for info in registry() {
        let form = builtin(info.name).unwrap();
        let floor = if info.y_floor > 0.0 { 0.5 } else { 0.0 };
        let spec = SampleSpec::default().with_y_floor(floor);
        let mut rng = seeded(7);
        let mut worst = 0.0_f64;
        for _ in 0..100 {
            let p = random_jet_w(&mut rng, form.dimension(), &spec);
            // first link gives the momenta, second gives the residual
            let phibar = lagrange_top_derivative(&OmegaPair(&form), &p).unwrap();
            let pair = tanform::variational::ostrogradski(&form, &p).unwrap();
            let e_chain = lagrange_top_derivative(&PhiPair(&form), &p).unwrap();
            let e_direct = el_residual(&form, &p).unwrap();
            for i in 0..form.dimension() {
                let scale = 1.0 + e_direct[i].abs().max(phibar[i].abs());
                worst = worst.max((phibar[i] - pair.phi_dy[i]).abs() / scale);
                worst = worst.max((e_chain[i] - e_direct[i]).abs() / scale);
            }
        }
        assert!(worst < 1e-10, "{}: chain residual {worst:.3e}", info.name);
        worst_all = worst_all.max(worst);
    }
    pass(7, "ostrogradski chain", &format!("worst {worst_all:.3e}"));
}

/// Criterion 8: for the three basic one-dimensional forms, the anchored
/// standard-Lagrangian residual equals the one-dimensional residual within
/// 1e-8 at 100 random jets, and the existence criterion vanishes within 1e-9.
#[test]
fn acceptance_08_dim1_standard_lagrangian() {
    let mut worst_eq = 0.0_f64;
    let mut worst_crit = 0.0_f64;
    for name in ["basic1", "basic2", "basic3"] {
        let form = builtin(name).unwrap();
        let sl = standard_lagrangian_1d(&form, Expr::Number(0.0), 0.0).unwrap();
        let mut rng = seeded(8);
        let spec = SampleSpec::new(-1.0, 1.0);
        for _ in 0..100 {
            let p = random_jet_z(&mut rng, 1, &spec);
            let classical = sl.classical_residual(&p).unwrap();
            let direct = el1d_residual(&form, &p).unwrap();
            worst_eq = worst_eq.max((classical - direct).abs() / (1.0 + direct.abs()));
            worst_crit = worst_crit.max(sl.criterion_residual(p.t, p.x[0]).unwrap().abs());
        }
    }
    assert!(worst_eq < 1e-8, "residual mismatch {worst_eq:.3e}");
    assert!(worst_crit < 1e-9, "criterion value {worst_crit:.3e}");
    pass(
        8,
        "dim-1 standard Lagrangian",
        &format!("equality {worst_eq:.3e}, criterion {worst_crit:.3e}"),
    );
}

/// Criterion 9: the first-order semi-spray families of examples 3 and 4,
/// with constants extracted from a third-order initial jet, reproduce the
/// (x, y)-projection of the third-order trajectory within 1e-6 on [0, 1].
#[test]
fn acceptance_09_semispray_families() {
    let mut worst_all = 0.0_f64;
    for (name, linear) in [("example3", false), ("example4", true)] {
        let form = builtin(name).unwrap();
        let jet = JetPoint::with_z(0.0, vec![0.3, -0.5], vec![0.8, 0.4], vec![-0.6, 0.2]);
        let family = if linear {
            let e = linear_constants(&form, &jet).unwrap();
            semispray_family_linear(&form, &e).unwrap()
        } else {
            let c = y_only_constants(&form, &jet).unwrap();
            semispray_family_y_only(&form, &c).unwrap()
        };

        let mut ic3 = Vec::new();
        ic3.extend_from_slice(&jet.x);
        ic3.extend_from_slice(&jet.y);
        ic3.extend_from_slice(jet.z().unwrap());
        let t3 = integrate(&form, Formulation::ThirdOrder, 0.0, &ic3, 1.0, 1e-3).unwrap();
        let tf = family.integrate(0.0, &jet.x, &jet.y, 1.0, 1e-3).unwrap();
        assert_eq!(t3.len(), tf.len());
        let mut worst = 0.0_f64;
        for (s3, sf) in t3.states.iter().zip(&tf) {
            for i in 0..4 {
                worst = worst.max((s3[i] - sf[i]).abs());
            }
        }
        assert!(worst < 1e-6, "{name}: family deviation {worst:.3e}");
        worst_all = worst_all.max(worst);
    }
    pass(9, "semi-spray families", &format!("worst {worst_all:.3e}"));
}

/// Criterion 10: classification fixtures and the co-regular/regular
/// agreement on 50 random non-degenerate forms.
#[test]
fn acceptance_10_classification_fixtures() {
    let mut rng = seeded(10);
    let spec = SampleSpec::default();
    let samples: Vec<JetPoint> = (0..30).map(|_| random_jet_z(&mut rng, 2, &spec)).collect();

    let riemann = builtin("riemann").unwrap();
    let report = classify(&riemann, &samples).unwrap();
    assert!(report.non_degenerated && report.singular && !report.regular);

    let rd = builtin("regular-degenerate").unwrap();
    let report = classify(&rd, &samples).unwrap();
    assert!(report.regular && !report.non_degenerated);

    // exact h matrices of examples 3 and 4
    let p = JetPoint::with_z(0.4, vec![0.7, -0.1], vec![1.2, 0.5], vec![0.0, 0.0]);
    let h3 = el_split(&builtin("example3").unwrap(), &p).unwrap().h;
    assert_eq!(
        (h3[(0, 0)], h3[(0, 1)], h3[(1, 0)], h3[(1, 1)]),
        (0.0, 1.0, -1.0, 0.0)
    );
    let h4 = el_split(&builtin("example4").unwrap(), &p).unwrap().h;
    assert_eq!(
        (h4[(0, 0)], h4[(0, 1)], h4[(1, 0)], h4[(1, 1)]),
        (0.0, 2.0, -2.0, 0.0)
    );

    // co-regular <=> regular over random non-degenerate forms
    let mut rng = seeded(1010);
    let mut tested = 0;
    while tested < 50 {
        let gradient_type = tested % 2 == 1;
        let form = if gradient_type {
            // omegabar = gradient of a strictly convex potential: h = 0
            let mut f = Poly::random(&mut rng, 2, 2, 3);
            let mut q1 = vec![0u32; 5];
            q1[3] = 2;
            f.push_term(2.0, q1);
            let mut q2 = vec![0u32; 5];
            q2[4] = 2;
            f.push_term(2.0, q2);
            TangentForm::new(
                2,
                Expr::Number(0.0),
                vec![Expr::Number(0.0); 2],
                vec![f.partial(3).to_expr(), f.partial(4).to_expr()],
                None,
            )
            .unwrap()
        } else {
            let omegabar = (0..2)
                .map(|_| Poly::random(&mut rng, 2, 2, 4).to_expr())
                .collect();
            TangentForm::new(
                2,
                Expr::Number(0.0),
                vec![Expr::Number(0.0); 2],
                omegabar,
                None,
            )
            .unwrap()
        };
        let jet = random_jet_z(&mut rng, 2, &SampleSpec::new(-1.0, 1.0));
        let report = classify(&form, std::slice::from_ref(&jet)).unwrap();
        if !report.non_degenerated {
            continue;
        }
        if gradient_type == report.regular {
            continue; // degenerate draw for the class: resample
        }
        let (_, _, p0) = form.component_values(jet.t, &jet.x, &jet.y).unwrap();
        let h_tilde = coregular_matrix(&form, jet.t, &jet.x, &p0, &jet.y).unwrap();
        let coregular = h_tilde.is_invertible() && h_tilde.max_abs() >= 1e-10;
        assert_eq!(coregular, report.regular, "draw {tested}");
        tested += 1;
    }
    pass(
        10,
        "classification fixtures",
        "fixtures + 50 co-regular draws",
    );
}

/// Criterion 11: the AD kernel agrees with central differences within 1e-6
/// on every builtin component at 100 random points, and is exact to 1e-12
/// on random quadratics.
#[test]
fn acceptance_11_ad_kernel() {
    let mut worst_fd = 0.0_f64;
    for info in registry() {
        let form = builtin(info.name).unwrap();
        let m = form.dimension();
        let floor = if info.y_floor > 0.0 { 0.6 } else { 0.0 };
        let spec = SampleSpec::default().with_y_floor(floor);
        let mut rng = seeded(11);
        let components: Vec<&Expr> = std::iter::once(form.omega0())
            .chain(form.omega())
            .chain(form.omegabar())
            .collect();
        for _ in 0..100 {
            let jet = random_jet_z(&mut rng, m, &spec);
            let mut point = vec![jet.t];
            point.extend_from_slice(&jet.x);
            point.extend_from_slice(&jet.y);
            for comp in &components {
                let f = |vars: &[Jet2]| comp.eval_jet(vars, m);
                let worst = fd_check(&f, &point, 1e-8).unwrap();
                assert!(
                    worst < 1e-6,
                    "{}: discrepancy {worst:.3e} for `{comp}`",
                    info.name
                );
                worst_fd = worst_fd.max(worst);
            }
        }
    }

    // exactness on random quadratics
    let mut rng = seeded(111);
    let vars = VarSet::for_dimension(2);
    let mut worst_quad = 0.0_f64;
    for _ in 0..50 {
        let n = 5;
        let mut poly = Poly::constant(2, rng.random_range(-2.0..2.0));
        let mut coeff = vec![vec![0.0; n]; n];
        let mut lin = vec![0.0; n];
        for i in 0..n {
            lin[i] = rng.random_range(-2.0..2.0);
            let mut e = vec![0u32; n];
            e[i] = 1;
            poly.push_term(lin[i], e);
            for j in i..n {
                let c = rng.random_range(-2.0..2.0);
                coeff[i][j] = c;
                let mut e = vec![0u32; n];
                e[i] += 1;
                e[j] += 1;
                poly.push_term(c, e);
            }
        }
        let point: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
        let jet = poly
            .to_expr()
            .eval_jet(&Jet2::seed_all(&vars, &point).unwrap(), 2)
            .unwrap();
        for i in 0..n {
            let mut grad = lin[i];
            for j in 0..n {
                grad += if i == j {
                    2.0 * coeff[i][i] * point[i]
                } else {
                    coeff[i.min(j)][i.max(j)] * point[j]
                };
            }
            worst_quad = worst_quad.max((jet.d(i) - grad).abs() / (1.0 + grad.abs()));
            for j in 0..n {
                let expect = if i == j {
                    2.0 * coeff[i][i]
                } else {
                    coeff[i.min(j)][i.max(j)]
                };
                worst_quad = worst_quad.max((jet.dd(i, j) - expect).abs() / (1.0 + expect.abs()));
            }
        }
    }
    assert!(worst_quad < 1e-12, "quadratic mismatch {worst_quad:.3e}");
    pass(
        11,
        "AD kernel",
        &format!("fd {worst_fd:.3e}, quadratics {worst_quad:.3e}"),
    );
}
