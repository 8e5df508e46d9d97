//! Command-line surface: classify, residual, action, integrate, reduce,
//! verify, examples.
//!
//! Exit codes: 0 success, 1 verification failure, 2 usage error, 3 numeric
//! error (regularity / inversion / domain).

mod csvio;
mod formfile;

use anyhow::{anyhow, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::json;
use tanform::checks::{self, CheckOutcome};
use tanform::dynamics::{integrate, Formulation};
use tanform::form::{classify, JetPoint, TangentForm};
use tanform::reduction::{x_field, PhaseStateX};
use tanform::sample::{random_jet_z, SampleSpec};
use tanform::special::{builtin_info, registry};
use tanform::variational::{el_residual, el_split, ostrogradski, third_order_semispray};

#[derive(Parser)]
#[command(
    name = "tanform",
    about = "Variational dynamics of tangent forms: residuals, reductions, trajectories",
    after_help = "FORM arguments name a builtin (see `tanform examples`; parameters \
                  attach as `lsz:k=2,mass=0.5`) or a TOML form file (anything with a \
                  path separator or a .toml suffix)."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Method {
    #[value(name = "third-order")]
    ThirdOrder,
    #[value(name = "phase-x")]
    PhaseX,
    #[value(name = "phase-y")]
    PhaseY,
}

impl Method {
    fn formulation(self) -> Formulation {
        match self {
            Method::ThirdOrder => Formulation::ThirdOrder,
            Method::PhaseX => Formulation::XFlow,
            Method::PhaseY => Formulation::YFlow,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Suite {
    All,
    Hamiltonian,
    Reduction,
    Gauge,
    Dim1,
}

#[derive(Subcommand)]
enum Command {
    /// Classify a form (regular / non-degenerated / singular / basic) on
    /// seeded-random samples; prints a JSON report.
    Classify {
        form: String,
        /// Number of random sample jets.
        #[arg(long, default_value_t = 100)]
        samples: usize,
        /// RNG seed (recorded in the report).
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Sampling box LO,HI for every coordinate.
        #[arg(long, default_value = "-2,2", value_parser = parse_range, allow_hyphen_values = true)]
        range: (f64, f64),
    },
    /// Euler-Lagrange residual at one jet; prints a JSON vector.
    Residual {
        form: String,
        /// Flat jet `t,x1..xm,y1..ym,z1..zm,w1..wm` (1+4m numbers).
        #[arg(long, allow_hyphen_values = true)]
        jet: String,
    },
    /// Action of the form along a sampled curve (CSV with t,x1..xm columns).
    Action {
        form: String,
        #[arg(long)]
        curve: String,
    },
    /// Integrate one of the three formulations with fixed-step RK4 and
    /// write the trajectory as CSV.
    Integrate {
        form: String,
        #[arg(long, value_enum)]
        method: Method,
        /// Initial state: `t0,x..,y..,z..` (third-order), `t0,x..,y..,p..`
        /// (phase-x) or `t0,x..,p0..,p1..` (phase-y); 1+3m numbers.
        #[arg(long, allow_hyphen_values = true)]
        ic: String,
        #[arg(long, allow_negative_numbers = true)]
        t1: f64,
        #[arg(long)]
        dt: f64,
        /// Output CSV path.
        #[arg(long)]
        out: String,
    },
    /// Euler-Lagrange split, adapted semi-spray and Ostrogradski pair at a
    /// jet `t,x..,y..,z..`; prints JSON.
    Reduce {
        form: String,
        #[arg(long, allow_hyphen_values = true)]
        at: String,
    },
    /// Run the numerical verification suites; prints a JSON report and
    /// exits 1 when any check fails.
    Verify {
        form: String,
        #[arg(long, value_enum, default_value = "all")]
        suite: Suite,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// List the builtin form registry.
    Examples,
}

fn parse_range(text: &str) -> std::result::Result<(f64, f64), String> {
    let parts: Vec<&str> = text.split(',').collect();
    if parts.len() != 2 {
        return Err("expected LO,HI".into());
    }
    let lo: f64 = parts[0].trim().parse().map_err(|_| "bad LO")?;
    let hi: f64 = parts[1].trim().parse().map_err(|_| "bad HI")?;
    if lo >= hi {
        return Err("need LO < HI".into());
    }
    Ok((lo, hi))
}

fn parse_numbers(text: &str, expected: usize, what: &str) -> Result<Vec<f64>> {
    let values: Vec<f64> = text
        .split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .with_context(|| format!("bad number `{s}` in {what}"))
        })
        .collect::<Result<_>>()?;
    if values.len() != expected {
        anyhow::bail!(
            "{what} needs {expected} comma-separated numbers, got {}",
            values.len()
        );
    }
    Ok(values)
}

fn jet_from_flat(values: &[f64], m: usize, with_w: bool) -> JetPoint {
    let t = values[0];
    let x = values[1..1 + m].to_vec();
    let y = values[1 + m..1 + 2 * m].to_vec();
    let z = values[1 + 2 * m..1 + 3 * m].to_vec();
    if with_w {
        let w = values[1 + 3 * m..1 + 4 * m].to_vec();
        JetPoint::with_w(t, x, y, z, w)
    } else {
        JetPoint::with_z(t, x, y, z)
    }
}

fn sample_spec(form: &TangentForm, lo: f64, hi: f64) -> SampleSpec {
    let floor = form
        .name()
        .and_then(builtin_info)
        .map(|info| info.y_floor)
        .unwrap_or(0.0);
    SampleSpec::new(lo, hi).with_y_floor(floor)
}

#[derive(Serialize)]
struct VerifyReport {
    form: Option<String>,
    seed: u64,
    suites: Vec<SuiteReport>,
    passed: bool,
}

#[derive(Serialize)]
struct SuiteReport {
    suite: &'static str,
    checks: Vec<CheckOutcome>,
}

fn run_verify(form: &TangentForm, suite: Suite, seed: u64) -> Result<i32> {
    let mut suites = Vec::new();
    let wants = |s: Suite| suite == Suite::All || suite == s;
    if wants(Suite::Hamiltonian) {
        suites.push(SuiteReport {
            suite: "hamiltonian",
            checks: checks::hamiltonian_suite(form, seed, 100)?,
        });
    }
    if wants(Suite::Reduction) {
        suites.push(SuiteReport {
            suite: "reduction",
            checks: checks::reduction_suite(form, seed)?,
        });
    }
    if wants(Suite::Gauge) {
        suites.push(SuiteReport {
            suite: "gauge",
            checks: checks::gauge_suite(form, seed)?,
        });
    }
    if wants(Suite::Dim1) {
        suites.push(SuiteReport {
            suite: "dim1",
            checks: checks::dim1_suite(form, seed)?,
        });
    }
    if suite == Suite::All {
        suites.push(SuiteReport {
            suite: "golden",
            checks: checks::golden_suite(form, seed)?,
        });
    }
    let passed = suites.iter().all(|s| s.checks.iter().all(|c| !c.failed()));
    let report = VerifyReport {
        form: form.name().map(str::to_string),
        seed,
        suites,
        passed,
    };
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(if passed { 0 } else { 1 })
}

fn dispatch(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Classify {
            form,
            samples,
            seed,
            range,
        } => {
            let form = formfile::load(&form)?;
            if samples == 0 {
                anyhow::bail!("--samples must be positive");
            }
            let spec = sample_spec(&form, range.0, range.1);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let jets: Vec<JetPoint> = (0..samples)
                .map(|_| random_jet_z(&mut rng, form.dimension(), &spec))
                .collect();
            let report = classify(&form, &jets)?;
            let payload = json!({
                "form": form.name(),
                "dimension": form.dimension(),
                "seed": seed,
                "samples": samples,
                "range": [range.0, range.1],
                "report": report,
            });
            println!("{}", serde_json::to_string_pretty(&payload)?);
            Ok(0)
        }
        Command::Residual { form, jet } => {
            let form = formfile::load(&form)?;
            let m = form.dimension();
            let values = parse_numbers(&jet, 1 + 4 * m, "--jet")?;
            let point = jet_from_flat(&values, m, true);
            let residual = el_residual(&form, &point)?;
            println!("{}", serde_json::to_string(&residual)?);
            Ok(0)
        }
        Command::Action { form, curve } => {
            let form = formfile::load(&form)?;
            let curve = csvio::read_curve(&curve, form.dimension())?;
            let value = tanform::form::action(&form, &curve)?;
            println!("{}", csvio::fmt_f64(value));
            Ok(0)
        }
        Command::Integrate {
            form,
            method,
            ic,
            t1,
            dt,
            out,
        } => {
            let form = formfile::load(&form)?;
            let m = form.dimension();
            let values = parse_numbers(&ic, 1 + 3 * m, "--ic")?;
            let traj = integrate(&form, method.formulation(), values[0], &values[1..], t1, dt)?;
            let mut file =
                std::fs::File::create(&out).with_context(|| format!("creating {out}"))?;
            csvio::write_trajectory(&traj, &mut file)?;
            eprintln!(
                "wrote {} states ({} to {}, dt = {}) to {out}",
                traj.len(),
                traj.t0,
                traj.time(traj.len() - 1),
                traj.dt
            );
            Ok(0)
        }
        Command::Reduce { form, at } => {
            let form = formfile::load(&form)?;
            let m = form.dimension();
            let values = parse_numbers(&at, 1 + 3 * m, "--at")?;
            let point = jet_from_flat(&values, m, false);
            let split = el_split(&form, &point)?;
            let pair = ostrogradski(&form, &point)?;
            let semispray = third_order_semispray(&form, &point);
            let lift_velocity = x_field(
                &form,
                &PhaseStateX {
                    t: point.t,
                    x: point.x.clone(),
                    y: point.y.clone(),
                    p: pair.phi_dy.clone(),
                },
            );
            let (spray_json, spray_err) = match &semispray {
                Ok(w) => (json!(w), None),
                Err(e) => (json!(null), Some(e.clone())),
            };
            let payload = json!({
                "form": form.name(),
                "at": values,
                "h": split.h.to_rows(),
                "f": split.f,
                "semispray": spray_json,
                "ostrogradski": pair,
                "x_field": match &lift_velocity {
                    Ok(v) => json!({"xdot": v.xdot, "ydot": v.ydot, "pdot": v.pdot}),
                    Err(_) => json!(null),
                },
            });
            println!("{}", serde_json::to_string_pretty(&payload)?);
            if let Some(e) = spray_err {
                return Err(anyhow!(e));
            }
            Ok(0)
        }
        Command::Verify { form, suite, seed } => {
            let form = formfile::load(&form)?;
            run_verify(&form, suite, seed)
        }
        Command::Examples => {
            println!("builtin tangent forms (use as FORM arguments):\n");
            for info in registry() {
                let params = if info.params.is_empty() {
                    String::new()
                } else {
                    let list: Vec<String> = info
                        .params
                        .iter()
                        .map(|(k, v)| format!("{k}={v}"))
                        .collect();
                    format!("  [params: {}]", list.join(", "))
                };
                let floor = if info.y_floor > 0.0 {
                    format!("  [sampled with |y| >= {}]", info.y_floor)
                } else {
                    String::new()
                };
                println!(
                    "  {:<19} m={}  {}{params}{floor}",
                    info.name, info.dimension, info.summary
                );
            }
            println!("\nparameters attach as `name:key=value,...`, e.g. `lsz:k=2,mass=0.5`");
            Ok(0)
        }
    }
}

fn exit_code_for(err: &anyhow::Error) -> i32 {
    match err.downcast_ref::<tanform::Error>() {
        Some(e) if e.is_numeric() => 3,
        _ => 2,
    }
}

fn main() {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => std::process::exit(code),
        Err(err) => {
            eprintln!("error: {err:#}");
            std::process::exit(exit_code_for(&err));
        }
    }
}
