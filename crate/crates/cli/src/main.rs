use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Map, Value};

use sle_core::dispersion;
use sle_core::error::exit;
use sle_core::functional::localization_radius;
use sle_core::io::{
    atomic_write, dispersion_csv, k_history_csv, profiles_csv, round_sig, trace_csv, write_json,
    Format, RunConfig, Snapshot,
};
use sle_core::model::SelfField;
use sle_core::scan::extremum_mismatch;
use sle_core::solver::solve_fixed_a_traced;
use sle_core::{find_a0, kinetic_t, potential_pi, trial_functions, Error, Grid, IterationState};

#[derive(Parser)]
#[command(
    name = "sle",
    version,
    about = "Self-consistent localized excitation solver"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve at a fixed coupling `a`.
    Solve(SolveArgs),
    /// Locate the coupling a0 where k(a0) = 1.
    Scan(ScanArgs),
    /// Tabulate the moving-excitation spectrum.
    Dispersion(DispersionArgs),
    /// Evaluate T and Pi on the analytic trial pair.
    TrialEval(TrialArgs),
}

#[derive(Args)]
struct Common {
    /// Key-value config file; flags override its entries.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    #[arg(long, value_name = "INT")]
    grid_nodes: Option<usize>,
    #[arg(long, value_name = "FLOAT", allow_negative_numbers = true)]
    tau: Option<f64>,
    /// Residual tolerance of the inner solve.
    #[arg(long, value_name = "FLOAT")]
    tol: Option<f64>,
    #[arg(long, value_name = "PATH", env = "SLE_OUTPUT_DIR")]
    output_dir: Option<PathBuf>,
    /// Output formats, comma separated or repeated.
    #[arg(long, value_name = "csv|json", value_delimiter = ',')]
    format: Vec<String>,
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    common: Common,
    /// Coupling; defaults to the config's `a_start`.
    #[arg(long, value_name = "FLOAT", allow_negative_numbers = true)]
    a: Option<f64>,
    /// Write a snapshot of the converged state here.
    #[arg(long, value_name = "PATH")]
    snapshot: Option<PathBuf>,
    /// Start from a saved snapshot instead of the trial pair.
    #[arg(long, value_name = "PATH")]
    warm_start: Option<PathBuf>,
    /// Also write the per-iteration trace.
    #[arg(long)]
    trace: bool,
}

#[derive(Args)]
struct ScanArgs {
    #[command(flatten)]
    common: Common,
    /// Snapshot path for the state at a0 (default: `<output-dir>/a0_snapshot.json`).
    #[arg(long, value_name = "PATH")]
    snapshot: Option<PathBuf>,
}

#[derive(Args)]
struct DispersionArgs {
    #[command(flatten)]
    common: Common,
    /// Rest energy E0 in units of m0.
    #[arg(
        long,
        value_name = "FLOAT",
        allow_negative_numbers = true,
        conflicts_with = "from_summary"
    )]
    e0: Option<f64>,
    /// Read E0 from the `E0_over_m0` field of a scan summary.
    #[arg(long, value_name = "PATH")]
    from_summary: Option<PathBuf>,
    #[arg(
        long,
        value_name = "FLOAT",
        default_value_t = 0.0,
        allow_negative_numbers = true
    )]
    p_min: f64,
    #[arg(
        long,
        value_name = "FLOAT",
        default_value_t = 5.0,
        allow_negative_numbers = true
    )]
    p_max: f64,
    #[arg(long, value_name = "INT", default_value_t = 51)]
    p_count: usize,
}

#[derive(Args)]
struct TrialArgs {
    #[command(flatten)]
    common: Common,
    /// Trial scale; defaults to the config's `trial_b`.
    #[arg(long, value_name = "FLOAT", allow_negative_numbers = true)]
    b: Option<f64>,
    /// Coupling used for the potential; defaults to `a_start`.
    #[arg(long, value_name = "FLOAT", allow_negative_numbers = true)]
    a: Option<f64>,
}

/// A failure with its exit code. Usage failures leave no files behind.
struct Failure {
    code: u8,
    error: Error,
}

impl From<Error> for Failure {
    fn from(error: Error) -> Self {
        Failure {
            code: error.exit_code(),
            error,
        }
    }
}

fn load_config(c: &Common) -> Result<RunConfig, Error> {
    let mut cfg = match &c.config {
        Some(path) => RunConfig::from_file(path).map_err(|e| match e {
            Error::Io(io) => Error::InvalidConfig(format!("cannot read {}: {io}", path.display())),
            other => other,
        })?,
        None => RunConfig::default(),
    };
    if let Some(n) = c.grid_nodes {
        cfg.grid.n_nodes = n;
    }
    if let Some(t) = c.tau {
        cfg.solver.tau = t;
    }
    if let Some(t) = c.tol {
        cfg.solver.tol_residual = t;
    }
    if let Some(d) = &c.output_dir {
        cfg.output_dir = d.clone();
    }
    if !c.format.is_empty() {
        cfg.formats = c
            .format
            .iter()
            .map(|f| f.parse::<Format>())
            .collect::<Result<_, _>>()?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn rounded(v: Value) -> Value {
    match v {
        Value::Number(n) => match n.as_f64() {
            Some(x) if n.is_f64() => json!(round_sig(x, 6)),
            _ => Value::Number(n),
        },
        Value::Object(m) => Value::Object(m.into_iter().map(|(k, v)| (k, rounded(v))).collect()),
        Value::Array(a) => Value::Array(a.into_iter().map(rounded).collect()),
        other => other,
    }
}

fn ensure_dir(dir: &Path) -> Result<(), Error> {
    std::fs::create_dir_all(dir)?;
    Ok(())
}

fn write_text(dir: &Path, name: &str, text: &str) -> Result<(), Error> {
    atomic_write(&dir.join(name), text.as_bytes())
}

fn write_profiles(cfg: &RunConfig, grid: &Grid, s: &IterationState) -> Result<(), Error> {
    if cfg.wants(Format::Csv) {
        let field = SelfField::from_pair(&s.pair, s.a, grid)?;
        write_text(
            &cfg.output_dir,
            "profiles.csv",
            &profiles_csv(grid, &s.pair, &field),
        )?;
    }
    Ok(())
}

fn print_summary(summary: &Value) {
    if let Value::Object(m) = summary {
        for (k, v) in m {
            println!("{k} = {v}");
        }
    }
}

fn run_solve(args: &SolveArgs, cfg: &RunConfig) -> Result<(), Failure> {
    let grid = cfg.grid.build()?;
    let (init, k_init, a_default) = match &args.warm_start {
        Some(path) => {
            let snap = Snapshot::load(path)?;
            if snap.grid != grid.spec() {
                return Err(Error::InvalidInput(format!(
                    "snapshot grid {:?} does not match the configured grid {:?}",
                    snap.grid,
                    grid.spec()
                ))
                .into());
            }
            (snap.pair(), snap.k, snap.a)
        }
        None => (
            trial_functions(cfg.trial_b(), &grid)?,
            1.0,
            cfg.scan.a_start,
        ),
    };
    let a = args.a.unwrap_or(a_default);
    if !a.is_finite() {
        return Err(Error::InvalidInput(format!("coupling must be finite, got {a}")).into());
    }

    ensure_dir(&cfg.output_dir)?;
    let solved = solve_fixed_a_traced(a, &init, k_init, &cfg.solver, &grid);
    if args.trace {
        if let Ok(s) = &solved {
            write_text(&cfg.output_dir, "trace.csv", &trace_csv(&s.trace))?;
        }
    }
    let solved = solved?;
    let s = &solved.state;
    let t = kinetic_t(&s.pair, &grid)?;
    let pi = potential_pi(&s.pair, &s.field, &grid)?;
    write_profiles(cfg, &grid, s)?;
    if let Some(path) = &args.snapshot {
        Snapshot::from_state(s, &grid).save(path)?;
    }
    let summary = rounded(json!({
        "command": "solve",
        "a": a,
        "k": s.k,
        "T": t,
        "Pi": pi,
        "residual": s.residual_norm,
        "norm_error": s.norm_error,
        "iterations": s.iteration,
        "seeded": solved.seeded,
        "localization_radius": localization_radius(&s.pair, &grid)?,
    }));
    if cfg.wants(Format::Json) {
        write_json(&cfg.output_dir.join("summary.json"), &summary)?;
    }
    print_summary(&summary);
    Ok(())
}

fn run_scan(args: &ScanArgs, cfg: &RunConfig) -> Result<(), Failure> {
    let grid = cfg.grid.build()?;
    ensure_dir(&cfg.output_dir)?;
    let result = match find_a0(&cfg.scan, &cfg.solver, &grid) {
        Ok(r) => r,
        Err(Error::ScanFailure { reason, history }) => {
            if cfg.wants(Format::Csv) {
                write_text(&cfg.output_dir, "k_history.csv", &k_history_csv(&history))?;
            }
            return Err(Error::ScanFailure { reason, history }.into());
        }
        Err(e) => return Err(e.into()),
    };
    let s = &result.solution;
    if cfg.wants(Format::Csv) {
        write_text(
            &cfg.output_dir,
            "k_history.csv",
            &k_history_csv(&result.k_history),
        )?;
    }
    write_profiles(cfg, &grid, s)?;
    let snap_path = args
        .snapshot
        .clone()
        .unwrap_or_else(|| cfg.output_dir.join("a0_snapshot.json"));
    Snapshot::from_state(s, &grid).save(&snap_path)?;

    let r = &result.report;
    let mut summary = Map::new();
    summary.insert("command".into(), json!("scan"));
    summary.insert("a0".into(), json!(result.a0));
    summary.insert("k".into(), json!(s.k));
    if let Value::Object(m) = serde_json::to_value(r).map_err(Error::from)? {
        summary.extend(m);
    }
    summary.insert(
        "extremum_mismatch".into(),
        json!(extremum_mismatch(result.a0, r.t, r.pi)),
    );
    summary.insert("monotone".into(), json!(result.monotone));
    summary.insert("evaluations".into(), json!(result.k_history.len()));
    summary.insert("residual".into(), json!(s.residual_norm));
    let summary = rounded(Value::Object(summary));
    if cfg.wants(Format::Json) {
        write_json(&cfg.output_dir.join("summary.json"), &summary)?;
    }
    print_summary(&summary);
    Ok(())
}

fn e0_from_summary(path: &Path) -> Result<f64, Error> {
    let text = std::fs::read_to_string(path)?;
    let v: Value = serde_json::from_str(&text)?;
    v.get("E0_over_m0")
        .and_then(Value::as_f64)
        .ok_or_else(|| Error::InvalidInput(format!("{} has no numeric E0_over_m0", path.display())))
}

fn run_dispersion(args: &DispersionArgs, cfg: &RunConfig) -> Result<(), Failure> {
    let e0 = match (&args.from_summary, args.e0) {
        (Some(path), _) => e0_from_summary(path).map_err(|e| match e {
            Error::Io(_) | Error::Json(_) => Failure {
                code: exit::IO,
                error: e,
            },
            other => other.into(),
        })?,
        (None, Some(e0)) => e0,
        (None, None) => {
            return Err(
                Error::InvalidInput("one of --e0 or --from-summary is required".into()).into(),
            )
        }
    };
    if !(e0 > 0.0 && e0.is_finite()) {
        return Err(Error::InvalidInput(format!("E0 must be positive, got {e0}")).into());
    }
    let momenta = dispersion::momentum_range(args.p_min, args.p_max, args.p_count)?;
    let table = dispersion::table(e0, &momenta)?;
    ensure_dir(&cfg.output_dir)?;
    if cfg.wants(Format::Csv) {
        write_text(&cfg.output_dir, "dispersion.csv", &dispersion_csv(&table))?;
    }
    if cfg.wants(Format::Json) {
        write_json(&cfg.output_dir.join("dispersion.json"), &table)?;
    }
    println!("E0 = {}", round_sig(e0, 6));
    println!("points = {}", table.len());
    Ok(())
}

fn run_trial(args: &TrialArgs, cfg: &RunConfig) -> Result<(), Failure> {
    let grid = cfg.grid.build()?;
    let b = args.b.unwrap_or(cfg.trial_b());
    let a = args.a.unwrap_or(cfg.scan.a_start);
    let mut pair = trial_functions(b, &grid)?;
    let norm = pair.normalize(&grid)?;
    let field = SelfField::from_pair(&pair, a, &grid)?;
    let t = kinetic_t(&pair, &grid)?;
    let pi = potential_pi(&pair, &field, &grid)?;
    // full precision: these are compared against oracles
    let out = json!({
        "command": "trial-eval",
        "b": b,
        "a": a,
        "norm_before_rescale": norm,
        "T": t,
        "Pi": pi,
        "phi0_origin": field.phi0[0],
        "localization_radius": localization_radius(&pair, &grid)?,
    });
    ensure_dir(&cfg.output_dir)?;
    if cfg.wants(Format::Json) {
        write_json(&cfg.output_dir.join("trial_eval.json"), &out)?;
    }
    if cfg.wants(Format::Csv) {
        write_text(
            &cfg.output_dir,
            "trial_profiles.csv",
            &profiles_csv(&grid, &pair, &field),
        )?;
    }
    print_summary(&rounded(out));
    Ok(())
}

fn diagnostic(command: &str, f: &Failure) -> Value {
    let mut d = json!({
        "command": command,
        "exit_code": f.code,
        "error": f.error.kind(),
        "message": f.error.to_string(),
    });
    match &f.error {
        Error::NonConvergence {
            iterations,
            residual_history,
        } => {
            d["iterations"] = json!(iterations);
            d["residual_history"] = json!(residual_history);
        }
        Error::ScanFailure { history, .. } => {
            d["k_history"] = json!(history);
        }
        _ => {}
    }
    d
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (name, common) = match &cli.command {
        Command::Solve(a) => ("solve", &a.common),
        Command::Scan(a) => ("scan", &a.common),
        Command::Dispersion(a) => ("dispersion", &a.common),
        Command::TrialEval(a) => ("trial-eval", &a.common),
    };
    let cfg = match load_config(common) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("sle {name}: {e}");
            return ExitCode::from(exit::USAGE);
        }
    };
    let outcome = match &cli.command {
        Command::Solve(a) => run_solve(a, &cfg),
        Command::Scan(a) => run_scan(a, &cfg),
        Command::Dispersion(a) => run_dispersion(a, &cfg),
        Command::TrialEval(a) => run_trial(a, &cfg),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("sle {name}: {}", f.error);
            if f.code != exit::USAGE
                && ensure_dir(&cfg.output_dir).is_ok()
                && write_json(&cfg.output_dir.join("error.json"), &diagnostic(name, &f)).is_err()
            {
                eprintln!("sle {name}: could not write error.json");
            }
            ExitCode::from(f.code)
        }
    }
}
