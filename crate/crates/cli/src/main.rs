mod problem;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fmorph::spin::{evolve, minimize, SolveTrace, SpinConfig, SpinField};
use fmorph::verifier::identities::{self, Status};
use fmorph::verifier::{catalog, classify, lookup, SamplerConfig, Verdict};
use fmorph::Error;

use problem::{json_diagnostic, parse_doc, Job, ProblemDoc};

#[derive(Parser)]
#[command(
    name = "fmorph",
    version,
    about = "Check f-harmonic maps and morphisms, run identity suites and discrete spin flows"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Classify the maps of a problem document or a catalog entry.
    Check(CheckArgs),
    /// Run the identity suites over the catalog.
    Identities(IdentityArgs),
    /// Minimize or evolve a discrete spin field.
    #[command(subcommand)]
    Spin(SpinCommand),
    /// List the built-in catalog.
    Catalog {
        /// Print the catalog as a problem document.
        #[arg(long)]
        doc: bool,
    },
}

#[derive(Args)]
struct CheckArgs {
    /// Problem document path, or `catalog://KEY`.
    source: String,
    /// Only check the map with this name.
    #[arg(long)]
    map: Option<String>,
    #[arg(long)]
    points: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Residual tolerance for both the tension and the conformality tests.
    #[arg(long)]
    tol: Option<f64>,
    /// Print the full verdict as JSON.
    #[arg(long, conflicts_with = "csv")]
    json: bool,
    /// Print per-point results as CSV.
    #[arg(long)]
    csv: bool,
}

#[derive(Args)]
struct IdentityArgs {
    /// One of c2, c13, eq12, eq13, t29 or all.
    #[arg(long, default_value = "all")]
    suite: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 200)]
    points: usize,
    #[arg(long)]
    json: bool,
}

#[derive(Subcommand)]
enum SpinCommand {
    /// Projected gradient descent to a discrete f-harmonic field.
    Minimize {
        config: PathBuf,
        #[command(flatten)]
        out: SpinOutput,
        #[arg(long)]
        max_iter: Option<usize>,
        #[arg(long)]
        tol: Option<f64>,
    },
    /// RK4 integration of the precession equation.
    Evolve {
        config: PathBuf,
        #[command(flatten)]
        out: SpinOutput,
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long)]
        steps: Option<usize>,
    },
}

#[derive(Args)]
struct SpinOutput {
    /// Trace CSV destination; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Final field as JSON.
    #[arg(long)]
    field_out: Option<PathBuf>,
    /// Overrides the seed of a random initial field.
    #[arg(long)]
    seed: Option<u64>,
}

/// Exit status 1 for a negative result, 2 for unusable input.
enum Failure {
    Negative(String),
    Input(String),
}

type Outcome = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match cli.command {
        Command::Check(a) => check(a),
        Command::Identities(a) => run_identities(a),
        Command::Spin(c) => spin(c),
        Command::Catalog { doc } => list_catalog(doc),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Negative(msg)) => {
            if !msg.is_empty() {
                eprintln!("{msg}");
            }
            ExitCode::from(1)
        }
        Err(Failure::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn write(path: &Path, text: &str) -> Outcome {
    std::fs::write(path, text).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn load_jobs(source: &str) -> Result<(Vec<Job>, SamplerConfig), Failure> {
    if let Some(key) = source.strip_prefix("catalog://") {
        let e = lookup(key).ok_or_else(|| Failure::Input(format!("no catalog entry `{key}`")))?;
        return Ok((
            vec![Job {
                map: e.map,
                expected: Some(e.expected),
            }],
            SamplerConfig::default(),
        ));
    }
    let doc = parse_doc(&read(Path::new(source))?)
        .map_err(|e| Failure::Input(format!("{source}: {e}")))?;
    let jobs = doc
        .resolve()
        .map_err(|e| Failure::Input(format!("{source}: {e}")))?;
    Ok((jobs, doc.defaults.apply(SamplerConfig::default())))
}

fn check(a: CheckArgs) -> Outcome {
    let (mut jobs, mut cfg) = load_jobs(&a.source)?;
    if let Some(name) = &a.map {
        jobs.retain(|j| j.map.name() == name);
        if jobs.is_empty() {
            return Err(Failure::Input(format!(
                "no map named `{name}` in {}",
                a.source
            )));
        }
    }
    if a.csv && jobs.len() > 1 {
        return Err(Failure::Input(
            "--csv needs a single map; select one with --map".into(),
        ));
    }
    cfg.count = a.points.unwrap_or(cfg.count);
    cfg.seed = a.seed.unwrap_or(cfg.seed);
    if let Some(t) = a.tol {
        cfg.tol_resid = t;
        cfg.tol_hwc = t;
    }
    let mut verdicts = Vec::new();
    let mut failed = Vec::new();
    let mut summary = String::new();
    for job in &jobs {
        let v = classify(&job.map, &cfg).map_err(|e| match e {
            Error::SamplerExhausted { .. } => Failure::Negative(format!("{}: {e}", job.map.name())),
            e => Failure::Input(format!("{}: {e}", job.map.name())),
        })?;
        let miss = job.expected.map(|x| x.mismatches(&v)).unwrap_or_default();
        let _ = writeln!(
            summary,
            "{} {}",
            if miss.is_empty() { "PASS" } else { "FAIL" },
            describe(&v)
        );
        for m in &miss {
            let _ = writeln!(summary, "  {m}");
        }
        if !miss.is_empty() {
            failed.push(job.map.name().to_string());
        }
        verdicts.push(v);
    }
    if a.json {
        let text = if verdicts.len() == 1 {
            verdicts[0].to_json()
        } else {
            serde_json::to_string_pretty(&verdicts).expect("verdicts serialize")
        };
        println!("{text}");
    } else if a.csv {
        print!("{}", verdicts[0].to_csv());
    } else {
        print!("{summary}");
    }
    if failed.is_empty() {
        Ok(())
    } else if a.json || a.csv {
        Err(Failure::Negative(format!(
            "expectation mismatch: {}",
            failed.join(", ")
        )))
    } else {
        Err(Failure::Negative(String::new()))
    }
}

fn describe(v: &Verdict) -> String {
    let a = &v.aggregate;
    let opt = |o: Option<bool>| o.map_or_else(|| "n/a".to_string(), |b| b.to_string());
    let mut s = format!(
        "{} morphism={} f_harmonic={} hwc={} homothetic={} minimal_fibers={} tau_f={:.2e} hwc_resid={:.2e}",
        v.map,
        a.is_f_harmonic_morphism,
        a.is_f_harmonic,
        a.is_hwc,
        opt(a.is_horizontally_homothetic),
        opt(a.fibers_minimal),
        a.max_f_tension_residual,
        a.max_hwc_residual,
    );
    if let Some(l) = &a.lambda_stats {
        let _ = write!(s, " lambda_sq=[{:.3e}, {:.3e}]", l.min, l.max);
    }
    if a.critical_points > 0 {
        let _ = write!(s, " critical={}", a.critical_points);
    }
    if a.degenerate {
        s.push_str(" degenerate");
    }
    s
}

fn run_identities(a: IdentityArgs) -> Outcome {
    let cfg = SamplerConfig::default()
        .with_count(a.points)
        .with_seed(a.seed);
    let rows = identities::run_suite(&a.suite, &cfg).map_err(|e| match e {
        Error::Invalid(_) => Failure::Input(e.to_string()),
        e => Failure::Negative(e.to_string()),
    })?;
    if a.json {
        println!(
            "{}",
            serde_json::to_string_pretty(&rows).expect("rows serialize")
        );
    } else {
        println!(
            "{:<6} {:<22} {:<6} {:>12} {:>8} {:>6}  note",
            "suite", "map", "status", "residual", "tol", "points"
        );
        for r in &rows {
            let res = r
                .max_residual
                .map_or_else(|| "-".to_string(), |v| format!("{v:.3e}"));
            println!(
                "{:<6} {:<22} {:<6} {:>12} {:>8.0e} {:>6}  {}",
                r.suite,
                r.map,
                r.status.to_string(),
                res,
                r.tol,
                r.points,
                r.note
            );
        }
    }
    let fails = rows.iter().filter(|r| r.status == Status::Fail).count();
    if fails == 0 {
        Ok(())
    } else {
        Err(Failure::Negative(format!(
            "{fails} identity check(s) failed"
        )))
    }
}

fn load_spin(path: &Path, seed: Option<u64>) -> Result<(SpinConfig, SpinField<f64>), Failure> {
    let src = read(path)?;
    let mut cfg: SpinConfig = serde_json::from_str(&src).map_err(|e| {
        Failure::Input(format!("{}: {}", path.display(), json_diagnostic(&src, &e)))
    })?;
    cfg.seed = seed.unwrap_or(cfg.seed);
    let field = cfg
        .build()
        .map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
    Ok((cfg, field))
}

fn emit(out: &SpinOutput, field: &SpinField<f64>, trace: &SolveTrace) -> Outcome {
    match &out.out {
        Some(p) => write(p, &trace.to_csv())?,
        None => print!("{}", trace.to_csv()),
    }
    if let Some(p) = &out.field_out {
        write(
            p,
            &serde_json::to_string_pretty(field).expect("field serializes"),
        )?;
    }
    Ok(())
}

fn spin(c: SpinCommand) -> Outcome {
    match c {
        SpinCommand::Minimize {
            config,
            out,
            max_iter,
            tol,
        } => {
            let (cfg, field) = load_spin(&config, out.seed)?;
            let mut opts = cfg.minimize;
            opts.max_iter = max_iter.unwrap_or(opts.max_iter);
            opts.tol = tol.unwrap_or(opts.tol);
            let (done, trace) = minimize(&field, &opts).map_err(spin_failure)?;
            emit(&out, &done, &trace)?;
            let last = trace.last().expect("trace has an initial row");
            let msg = format!(
                "energy {:.6e}, residual {:.3e} after {} iterations",
                last.energy, last.residual, last.iter
            );
            if last.residual <= opts.tol {
                eprintln!("converged: {msg}");
                Ok(())
            } else {
                Err(Failure::Negative(format!("not converged: {msg}")))
            }
        }
        SpinCommand::Evolve {
            config,
            out,
            dt,
            steps,
        } => {
            let (cfg, field) = load_spin(&config, out.seed)?;
            let dt = dt
                .or(cfg.dt)
                .ok_or_else(|| Failure::Input("evolve needs dt in the config or --dt".into()))?;
            let steps = steps.or(cfg.steps).ok_or_else(|| {
                Failure::Input("evolve needs steps in the config or --steps".into())
            })?;
            if !(dt > 0.0 && dt.is_finite()) {
                return Err(Failure::Input(format!("dt must be positive, got {dt}")));
            }
            let (done, trace) = evolve(&field, dt, steps).map_err(spin_failure)?;
            emit(&out, &done, &trace)?;
            let (first, last) = (
                trace.rows[0],
                *trace.last().expect("trace has an initial row"),
            );
            let drift =
                (last.energy - first.energy).abs() / first.energy.abs().max(f64::MIN_POSITIVE);
            eprintln!(
                "completed {steps} steps: energy {:.6e}, relative drift {drift:.3e}",
                last.energy
            );
            Ok(())
        }
    }
}

fn spin_failure(e: Error) -> Failure {
    match e {
        Error::BlowUp(step) => Failure::Negative(format!("blow-up at step {step}")),
        Error::StepUnderflow(iter) => {
            Failure::Negative(format!("step underflow at iteration {iter}"))
        }
        e => Failure::Input(e.to_string()),
    }
}

fn list_catalog(doc: bool) -> Outcome {
    let entries = catalog();
    if doc {
        println!(
            "{}",
            serde_json::to_string_pretty(&ProblemDoc::from_catalog(&entries))
                .expect("document serializes")
        );
        return Ok(());
    }
    for e in &entries {
        let dims = format!("{} -> {}", e.map.source().name(), e.map.target().name());
        println!("{:<22} {:<28} {}", e.key, dims, e.note);
    }
    Ok(())
}
