//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any
//! criterion fails.

use std::process::ExitCode;
use std::time::Instant;

use fmorph::exprlang::{BinOp, Expr, Func, Jet2, Program};
use fmorph::geometry::{metric_at, RiemannianChart};
use fmorph::spin::{minimize, Boundary, Grid, MinimizeOptions, SpinConfig, SpinField};
use fmorph::verifier::identities::{self, run_suite, IdentityRow, Status, IDENTITY_TOL, POWER_TOL};
use fmorph::verifier::{catalog, classify, lookup, sample_points, two_weight_test, SamplerConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const POINTS: usize = 200;
const SEED: u64 = 0;

type Outcome = Result<String, String>;
type Criterion = fn() -> Outcome;

fn cfg() -> SamplerConfig {
    SamplerConfig::default().with_count(POINTS).with_seed(SEED)
}

fn check(cond: bool, ok: String, bad: String) -> Outcome {
    if cond {
        Ok(ok)
    } else {
        Err(bad)
    }
}

fn suite_outcome(rows: &[IdentityRow]) -> Outcome {
    let ran = rows.iter().filter(|r| r.status != Status::Skip).count();
    let worst = rows
        .iter()
        .filter_map(|r| r.max_residual)
        .fold(0.0, f64::max);
    let failed: Vec<&str> = rows
        .iter()
        .filter(|r| r.status == Status::Fail)
        .map(|r| r.map.as_str())
        .collect();
    check(
        failed.is_empty() && ran > 0,
        format!("{ran} maps, max residual {worst:.2e}"),
        format!("failing maps {failed:?}, max residual {worst:.2e}"),
    )
}

fn catalog_conformance() -> Outcome {
    let mut worst = (0.0f64, 0.0f64);
    let mut problems = Vec::new();
    for e in catalog() {
        let v = classify(&e.map, &cfg()).map_err(|err| format!("{}: {err}", e.key))?;
        let a = &v.aggregate;
        problems.extend(
            e.expected
                .mismatches(&v)
                .into_iter()
                .map(|m| format!("{}: {m}", e.key)),
        );
        if a.max_f_tension_residual > 1e-8 {
            problems.push(format!(
                "{}: tau_f residual {:e}",
                e.key, a.max_f_tension_residual
            ));
        }
        worst.0 = worst.0.max(a.max_f_tension_residual);
        if e.expected.is_hwc == Some(true) {
            if a.max_hwc_residual > 1e-8 {
                problems.push(format!("{}: hwc residual {:e}", e.key, a.max_hwc_residual));
            }
            worst.1 = worst.1.max(a.max_hwc_residual);
        }
    }
    check(
        problems.is_empty(),
        format!(
            "{} entries, max tau_f {:.2e}, max hwc {:.2e}",
            catalog().len(),
            worst.0,
            worst.1
        ),
        problems.join("; "),
    )
}

fn trichotomy_and_two_weights() -> Outcome {
    let rows = run_suite("t29", &cfg()).map_err(|e| e.to_string())?;
    let t = suite_outcome(&rows)?;
    let e = lookup("radial_projection").ok_or("radial_projection missing")?;
    let f1 = "1 + x^2+y^2+z^2".parse().unwrap();
    let f2 = "exp(sqrt(x^2+y^2+z^2))".parse().unwrap();
    let r = two_weight_test(&e.map, &f1, &f2, &cfg()).map_err(|e| e.to_string())?;
    check(
        r.passed,
        format!("{t}; two-weight test passed"),
        format!("{t}; two-weight test failed: {r:?}"),
    )
}

/// Random bounded expressions in `x`, `y` from a seeded generator.
fn random_expr(rng: &mut ChaCha8Rng, depth: u32) -> Expr {
    if depth == 0 || rng.gen_bool(0.25) {
        return match rng.gen_range(0..4) {
            0 => Expr::num((rng.gen_range(0.0..2.0f64) * 1e3).round() / 1e3),
            1 => Expr::var("x"),
            2 => Expr::var("y"),
            _ => Expr::Pi,
        };
    }
    let sub = |rng: &mut ChaCha8Rng| random_expr(rng, depth - 1);
    let one = Expr::num(1.0);
    match rng.gen_range(0..12) {
        0 => Expr::binary(BinOp::Add, sub(rng), sub(rng)),
        1 => Expr::binary(BinOp::Sub, sub(rng), sub(rng)),
        2 => Expr::binary(BinOp::Mul, sub(rng), sub(rng)),
        3 => {
            let a = sub(rng);
            let den = Expr::binary(
                BinOp::Add,
                one,
                Expr::binary(BinOp::Pow, sub(rng), Expr::num(2.0)),
            );
            Expr::binary(BinOp::Div, a, den)
        }
        4 => Expr::Neg(Box::new(sub(rng))),
        5 => Expr::call(Func::Sin, vec![sub(rng)]),
        6 => Expr::call(Func::Cos, vec![sub(rng)]),
        7 => Expr::call(Func::Tanh, vec![sub(rng)]),
        8 => Expr::call(Func::Exp, vec![Expr::call(Func::Tanh, vec![sub(rng)])]),
        9 => Expr::call(
            Func::Sqrt,
            vec![Expr::binary(
                BinOp::Add,
                one,
                Expr::binary(BinOp::Pow, sub(rng), Expr::num(2.0)),
            )],
        ),
        10 => {
            let a = sub(rng);
            Expr::call(
                Func::Log,
                vec![Expr::binary(
                    BinOp::Add,
                    one,
                    Expr::binary(BinOp::Mul, a.clone(), a),
                )],
            )
        }
        _ => {
            let a = sub(rng);
            let den = Expr::binary(
                BinOp::Add,
                one,
                Expr::binary(BinOp::Pow, sub(rng), Expr::num(2.0)),
            );
            Expr::call(Func::Atan2, vec![a, den])
        }
    }
}

const FD_H: f64 = 1e-4;

/// Worst `|jet − fd| / (1 + |jet|)` for gradient and Hessian entries of `f` at `p`.
fn fd_errors(
    f: impl Fn(&[f64]) -> f64,
    grad: &[f64],
    hess: impl Fn(usize, usize) -> f64,
    p: &[f64],
) -> (f64, f64) {
    let h = FD_H;
    let at = |i: usize, si: f64, j: usize, sj: f64| {
        let mut q = p.to_vec();
        q[i] += si;
        q[j] += sj;
        f(&q)
    };
    let (mut eg, mut eh) = (0.0f64, 0.0f64);
    for i in 0..p.len() {
        let g = (at(i, h, i, 0.0) - at(i, -h, i, 0.0)) / (2.0 * h);
        eg = eg.max((g - grad[i]).abs() / (1.0 + grad[i].abs()));
        for j in 0..p.len() {
            let fd = if i == j {
                (at(i, h, i, 0.0) - 2.0 * f(p) + at(i, -h, i, 0.0)) / (h * h)
            } else {
                (at(i, h, j, h) - at(i, h, j, -h) - at(i, -h, j, h) + at(i, -h, j, -h))
                    / (4.0 * h * h)
            };
            eh = eh.max((fd - hess(i, j)).abs() / (1.0 + hess(i, j).abs()));
        }
    }
    (eg, eh)
}

fn christoffel_errors(chart: &RiemannianChart, p: &[f64]) -> Result<f64, String> {
    let m = p.len();
    let mp = metric_at(chart, p).map_err(|e| e.to_string())?;
    let h = FD_H;
    let mut dg = vec![0.0; m * m * m];
    for k in 0..m {
        let (mut a, mut b) = (p.to_vec(), p.to_vec());
        a[k] += h;
        b[k] -= h;
        let ga = metric_at(chart, &a).map_err(|e| e.to_string())?.g;
        let gb = metric_at(chart, &b).map_err(|e| e.to_string())?.g;
        for i in 0..m {
            for j in 0..m {
                dg[(k * m + i) * m + j] = (ga[(i, j)] - gb[(i, j)]) / (2.0 * h);
            }
        }
    }
    let d = |k: usize, i: usize, j: usize| dg[(k * m + i) * m + j];
    let mut worst = 0.0f64;
    for k in 0..m {
        for i in 0..m {
            for j in 0..m {
                let fd: f64 = (0..m)
                    .map(|l| 0.5 * mp.g_inv[(k, l)] * (d(i, j, l) + d(j, i, l) - d(l, i, j)))
                    .sum();
                let g = mp.gamma(k, i, j);
                worst = worst.max((fd - g).abs() / (1.0 + g.abs()));
            }
        }
    }
    Ok(worst)
}

fn derivative_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let (mut eg, mut eh) = (0.0f64, 0.0f64);
    for _ in 0..1000 {
        let e = random_expr(&mut rng, 4);
        let p = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
        let prog = Program::compile(&e, &["x", "y"]).map_err(|err| err.to_string())?;
        let jet = prog
            .eval_jet(&Jet2::seed(&p))
            .map_err(|err| format!("{e}: {err}"))?;
        let (g, h) = fd_errors(
            |q| prog.eval_real(q).unwrap(),
            jet.grad(),
            |i, j| jet.hess(i, j),
            &p,
        );
        eg = eg.max(g);
        eh = eh.max(h);
    }
    let mut ec = 0.0f64;
    let mut charts = 0;
    for entry in catalog() {
        let pts = sample_points(
            &entry.map,
            &SamplerConfig::default().with_count(20).with_seed(SEED),
        )
        .map_err(|e| e.to_string())?;
        for p in &pts {
            ec = ec.max(christoffel_errors(entry.map.source(), p)?);
            let img = entry.map.eval(p).map_err(|e| e.to_string())?;
            ec = ec.max(christoffel_errors(entry.map.target(), &img)?);
        }
        charts += 2;
    }
    check(
        eg <= 1e-6 && eh <= 1e-4 && ec <= 1e-6,
        format!("1000 expressions: grad {eg:.1e}, hess {eh:.1e}; Christoffels on {charts} charts: {ec:.1e}"),
        format!("grad {eg:.1e} (tol 1e-6), hess {eh:.1e} (tol 1e-4), christoffel {ec:.1e} (tol 1e-6)"),
    )
}

const DISK: &str = r#"{
  "grid": {"nx": 33, "ny": 33, "hx": 0.0625},
  "domain": "disk",
  "f": "2/(1+x^2+y^2)",
  "boundary": {"type": "dirichlet", "value": [0, 0, 1]},
  "init": "random",
  "seed": 0
}"#;

fn spin_correspondence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut rhs_gap = 0.0f64;
    let mut fd_gap = 0.0f64;
    for trial in 0..50 {
        let (nx, ny) = if trial % 10 == 0 {
            (3, 3)
        } else {
            (rng.gen_range(3..9), rng.gen_range(1..9))
        };
        let grid = if ny == 1 {
            Grid::line(nx, 0.37)
        } else {
            Grid::plane(nx, ny, 0.37, 0.29)
        };
        let n = grid.len();
        let boundary = if trial % 2 == 0 {
            Boundary::Dirichlet
        } else {
            Boundary::Periodic
        };
        let u = (0..n)
            .map(|_| {
                [
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                ]
            })
            .collect();
        let f = (0..n).map(|_| rng.gen_range(0.2..3.0)).collect();
        let fixed = (0..n)
            .map(|k| boundary == Boundary::Dirichlet && grid.is_edge_node(k))
            .collect();
        let s: SpinField<f64> =
            SpinField::new(grid, boundary, u, f, fixed).map_err(|e| e.to_string())?;
        let (rt, _) = s.tangential_residual();
        for (a, b) in s.llg_rhs().iter().zip(&rt) {
            let na = (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt();
            let nb = (b[0] * b[0] + b[1] * b[1] + b[2] * b[2]).sqrt();
            rhs_gap = rhs_gap.max((na - nb).abs());
        }
        if (nx, ny) == (3, 3) {
            let r = s.residual();
            let vol = s.grid.cell_volume();
            let eps = 1e-2;
            for node in 0..n {
                for c in 0..3 {
                    let (mut a, mut b) = (s.clone(), s.clone());
                    a.u[node][c] += eps;
                    b.u[node][c] -= eps;
                    let fd = (a.f_energy() - b.f_energy()) / (2.0 * eps);
                    fd_gap = fd_gap.max((fd + vol * r[node][c]).abs());
                }
            }
        }
    }
    let cfg: SpinConfig = serde_json::from_str(DISK).map_err(|e| e.to_string())?;
    let field = cfg.build().map_err(|e| e.to_string())?;
    let (_, trace) = minimize(&field, &MinimizeOptions::default()).map_err(|e| e.to_string())?;
    let last = *trace.last().unwrap();
    let monotone = trace.is_energy_monotone();
    let summary = format!(
        "|rhs|-|r_T| {rhs_gap:.1e}, energy gradient {fd_gap:.1e}, disk: residual {:.2e} after {} iterations, monotone {monotone}",
        last.residual, last.iter
    );
    check(
        rhs_gap <= 1e-12
            && fd_gap <= 1e-10
            && last.residual <= 1e-6
            && last.iter <= 50_000
            && monotone,
        summary.clone(),
        summary,
    )
}

fn determinism() -> Outcome {
    let mut verdicts = 0;
    for e in catalog() {
        let a = classify(&e.map, &cfg())
            .map_err(|err| err.to_string())?
            .to_json();
        let b = classify(&e.map, &cfg())
            .map_err(|err| err.to_string())?
            .to_json();
        if a != b {
            return Err(format!("{}: verdict JSON differs between runs", e.key));
        }
        verdicts += 1;
    }
    let cfg: SpinConfig = serde_json::from_str(DISK).map_err(|e| e.to_string())?;
    let opts = MinimizeOptions {
        max_iter: 2000,
        ..MinimizeOptions::default()
    };
    let run = || -> Result<String, String> {
        let field = cfg.build().map_err(|e| e.to_string())?;
        Ok(minimize(&field, &opts)
            .map_err(|e| e.to_string())?
            .1
            .to_csv())
    };
    let (a, b) = (run()?, run()?);
    check(
        a == b,
        format!(
            "{verdicts} verdicts and a {}-line trace identical across runs",
            a.lines().count()
        ),
        "trace CSV differs".into(),
    )
}

fn main() -> ExitCode {
    let criteria: [(&str, Criterion); 8] = [
        ("1 catalog conformance", catalog_conformance),
        ("2 pullback identity", || {
            suite_outcome(&run_suite("eq12", &cfg()).map_err(|e| e.to_string())?)
        }),
        ("3 conformal rescaling", || {
            suite_outcome(&run_suite("c2", &cfg()).map_err(|e| e.to_string())?)
        }),
        ("4 power tensions", || {
            suite_outcome(&run_suite("c13", &cfg()).map_err(|e| e.to_string())?)
        }),
        ("5 trichotomy + two weights", trichotomy_and_two_weights),
        ("6 derivative oracle", derivative_oracle),
        ("7 spin correspondence", spin_correspondence),
        ("8 determinism", determinism),
    ];
    println!("acceptance: {POINTS} points, seed {SEED}, identity tol {IDENTITY_TOL:e}, power tol {POWER_TOL:e}, {} pullback test functions", identities::PULLBACK_FUNCTIONS);
    let mut failed = 0;
    for (name, run) in criteria {
        let t = Instant::now();
        let outcome = run();
        let secs = t.elapsed().as_secs_f64();
        match outcome {
            Ok(msg) => println!("PASS  {name:28} {msg} ({secs:.2}s)"),
            Err(msg) => {
                failed += 1;
                println!("FAIL  {name:28} {msg} ({secs:.2}s)");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
