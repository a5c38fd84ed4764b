//! Command surface: validate a spec, solve it to a fixed point and report
//! observables, sweep the homogeneous coupling across the phase transition,
//! and run the verification suites.
//!
//! Exit codes: 0 success, 2 malformed input or flags, 3 infeasible spec,
//! 4 unsupported regime or solver failure, 5 verification failure.

mod manifest;
mod verify;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use multibethe::cavity::{self, CavityVector};
use multibethe::model::{class_edge_set, validate_spec, ModelSpec};
use multibethe::observables::ObservableReport;
use multibethe::spectral::{build_m, critical_beta, PhaseRegime};
use multibethe::Error;

use manifest::RunManifest;

#[derive(Parser)]
#[command(
    name = "multibethe",
    version,
    about = "Belief-propagation solver for multispecies Ising models on k-regular random graphs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OutputFormat {
    Json,
    Csv,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Suite {
    Trees,
    Inequalities,
    Mcmc,
    Spectral,
}

#[derive(Subcommand)]
enum Command {
    /// Check feasibility conditions and print the report as JSON.
    Validate {
        #[arg(long)]
        spec: PathBuf,
    },
    /// Solve the cavity recursion from a chosen boundary condition and print
    /// the fixed point with its observables.
    Solve {
        #[arg(long)]
        spec: PathBuf,
        /// zero | plus | minus | path to a JSON array of boundary components
        /// (numbers, or the strings "inf" / "-inf")
        #[arg(long, default_value = "zero")]
        boundary: String,
        #[arg(long, default_value_t = 1e-12)]
        tol: f64,
        #[arg(long, default_value_t = 1_000_000)]
        max_iter: usize,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = OutputFormat::Json)]
        format: OutputFormat,
    },
    /// Sweep the homogeneous coupling and emit one phase-diagram row per
    /// value.
    Sweep {
        #[arg(long)]
        spec: PathBuf,
        /// Only "beta" is supported.
        #[arg(long, default_value = "beta")]
        param: String,
        #[arg(long)]
        from: f64,
        #[arg(long)]
        to: f64,
        #[arg(long)]
        points: usize,
        #[arg(long, default_value_t = 1e-12)]
        tol: f64,
        /// Worker threads; falls back to MULTIBETHE_THREADS, then 1.
        #[arg(long)]
        threads: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = OutputFormat::Csv)]
        format: OutputFormat,
    },
    /// Run a verification suite against the exact and Monte Carlo oracles.
    Verify {
        #[arg(long, value_enum)]
        suite: Suite,
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::InvalidInput(_) | Error::Structural(_) | Error::Io(_) => 2,
        Error::Infeasible { .. } => 3,
        Error::UnsupportedRegime(_)
        | Error::Numeric(_)
        | Error::SamplingFailed { .. }
        | Error::TooLarge(_) => 4,
    }
}

fn fail(err: Error) -> ExitCode {
    let payload = json!({
        "error": err.to_string(),
        "exit_code": exit_code_for(&err),
    });
    eprintln!("{}", serde_json::to_string_pretty(&payload).unwrap());
    ExitCode::from(exit_code_for(&err))
}

fn load_spec(path: &PathBuf) -> Result<ModelSpec, Error> {
    let text = std::fs::read_to_string(path)?;
    ModelSpec::from_json(&text)
}


/// Writes to stdout, tolerating a closed pipe (e.g. `multibethe ... | head`).
fn emit(text: &str) {
    use std::io::Write;
    let _ = std::io::stdout().write_all(text.as_bytes());
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Validate { spec } => cmd_validate(&spec),
        Command::Solve {
            spec,
            boundary,
            tol,
            max_iter,
            seed,
            out,
            format,
        } => cmd_solve(&spec, &boundary, tol, max_iter, seed, out, format),
        Command::Sweep {
            spec,
            param,
            from,
            to,
            points,
            tol,
            threads,
            out,
            format,
        } => cmd_sweep(&spec, &param, from, to, points, tol, threads, out, format),
        Command::Verify { suite, seed } => cmd_verify(suite, seed.unwrap_or(0xD15EA5E)),
    }
}

fn cmd_validate(path: &PathBuf) -> ExitCode {
    let spec = match load_spec(path) {
        Ok(s) => s,
        Err(e) => return fail(e),
    };
    let report = validate_spec(&spec);
    emit(&format!(
        "{}\n",
        serde_json::to_string_pretty(&report).expect("report serializes")
    ));
    if report.verdict {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(3)
    }
}

fn parse_boundary(text: &str, dim: usize) -> Result<CavityVector, Error> {
    match text {
        "zero" => Ok(CavityVector::zeros(dim)),
        "plus" => Ok(CavityVector::homogeneous(dim, f64::INFINITY)),
        "minus" => Ok(CavityVector::homogeneous(dim, f64::NEG_INFINITY)),
        path => {
            let body = std::fs::read_to_string(path)?;
            let values: Vec<serde_json::Value> = serde_json::from_str(&body)
                .map_err(|e| Error::InvalidInput(format!("boundary file: {e}")))?;
            let parsed: Result<Vec<f64>, Error> = values
                .iter()
                .map(|v| match v {
                    serde_json::Value::Number(x) => Ok(x.as_f64().unwrap()),
                    serde_json::Value::String(s) if s == "inf" => Ok(f64::INFINITY),
                    serde_json::Value::String(s) if s == "-inf" => Ok(f64::NEG_INFINITY),
                    other => Err(Error::InvalidInput(format!(
                        "boundary component {other} is not a number or inf string"
                    ))),
                })
                .collect();
            let parsed = parsed?;
            if parsed.len() != dim {
                return Err(Error::InvalidInput(format!(
                    "boundary file has {} components, edge set has {dim}",
                    parsed.len()
                )));
            }
            Ok(CavityVector::new(parsed))
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_solve(
    path: &PathBuf,
    boundary: &str,
    tol: f64,
    max_iter: usize,
    seed: Option<u64>,
    out: Option<PathBuf>,
    format: OutputFormat,
) -> ExitCode {
    if !(tol > 0.0) {
        return fail(Error::InvalidInput(format!("--tol must be > 0, got {tol}")));
    }
    if format == OutputFormat::Csv {
        return fail(Error::InvalidInput(
            "solve reports are JSON; use --format json".into(),
        ));
    }
    let result = (|| -> Result<serde_json::Value, Error> {
        let spec = load_spec(path)?;
        let report = validate_spec(&spec);
        if !report.verdict {
            return Err(Error::Infeasible {
                n: 0,
                reason: format!("spec violates conditions {:?}", report.violated_conditions),
            });
        }
        let edges = class_edge_set(&spec);
        let h_star = parse_boundary(boundary, edges.len())?;
        let fp = cavity::iterate(&spec, &h_star, tol, max_iter)?;
        let observables = ObservableReport::compute(&spec, &fp.z)?;
        let manifest = RunManifest::new("solve", &spec, seed);
        Ok(json!({
            "schema_version": 1,
            "manifest": manifest,
            "boundary": boundary,
            "fixed_point": serde_json::from_str::<serde_json::Value>(&fp.to_json(&edges)).unwrap(),
            "observables": serde_json::from_str::<serde_json::Value>(&observables.to_json()).unwrap(),
        }))
    })();
    match result {
        Ok(payload) => {
            let text = serde_json::to_string_pretty(&payload).unwrap();
            emit(&format!("{text}\n"));
            if let Some(dir) = out {
                if let Err(e) = persist(&dir, &[("solve.json", &text)], &payload["manifest"]) {
                    return fail(e);
                }
            }
            ExitCode::SUCCESS
        }
        Err(e) => fail(e),
    }
}

fn persist(
    dir: &PathBuf,
    files: &[(&str, &str)],
    manifest: &serde_json::Value,
) -> Result<(), Error> {
    std::fs::create_dir_all(dir)?;
    let mut manifest = manifest.clone();
    manifest["outputs"] = json!(files.iter().map(|(name, _)| name).collect::<Vec<_>>());
    for (name, body) in files {
        std::fs::write(dir.join(name), body)?;
    }
    std::fs::write(
        dir.join("manifest.json"),
        serde_json::to_string_pretty(&manifest).unwrap(),
    )?;
    Ok(())
}

struct SweepRow {
    beta: f64,
    rho: f64,
    regime: &'static str,
    magnetizations: Vec<f64>,
    correlations: Vec<f64>,
    pressure: f64,
    spontaneous: Option<Vec<f64>>,
}

fn sweep_row(spec: &ModelSpec, beta: f64, tol: f64) -> Result<SweepRow, Error> {
    let edges = class_edge_set(spec);
    let mut at_beta = spec.clone();
    for &(a, b) in edges.edges() {
        at_beta = at_beta.with_beta(a, b, beta)?;
    }
    let rho = build_m(&at_beta).spectral_radius(1e-12)?;
    let regime = PhaseRegime::classify(rho);
    let z = if at_beta.zero_field() {
        if regime == PhaseRegime::Subcritical {
            // rho < 1 alone makes zero the unique fixed point
            CavityVector::zeros(edges.len())
        } else {
            cavity::fixed_point_zero_field_positive(&at_beta, tol)?.z
        }
    } else {
        cavity::fixed_point_nonneg(&at_beta, tol)?.z
    };
    let report = ObservableReport::compute(&at_beta, &z)?;
    Ok(SweepRow {
        beta,
        rho,
        regime: match regime {
            PhaseRegime::Subcritical => "subcritical",
            PhaseRegime::Supercritical => "supercritical",
            PhaseRegime::Critical => "critical",
        },
        magnetizations: report.magnetizations,
        correlations: report.edge_correlations.iter().map(|e| e.value).collect(),
        pressure: report.bethe_pressure,
        spontaneous: report.spontaneous,
    })
}

#[allow(clippy::too_many_arguments)]
fn cmd_sweep(
    path: &PathBuf,
    param: &str,
    from: f64,
    to: f64,
    points: usize,
    tol: f64,
    threads: Option<usize>,
    out: Option<PathBuf>,
    format: OutputFormat,
) -> ExitCode {
    if param != "beta" {
        return fail(Error::InvalidInput(format!(
            "--param {param} is not supported; only beta sweeps exist"
        )));
    }
    if points < 2 || !(tol > 0.0) || !(from <= to) || from < 0.0 {
        return fail(Error::InvalidInput(
            "need --points >= 2, 0 <= --from <= --to and --tol > 0".into(),
        ));
    }
    let threads = threads
        .or_else(|| {
            std::env::var("MULTIBETHE_THREADS")
                .ok()
                .and_then(|v| v.parse().ok())
        })
        .unwrap_or(1)
        .max(1);
    let spec = match load_spec(path) {
        Ok(s) => s,
        Err(e) => return fail(e),
    };
    let report = validate_spec(&spec);
    if !report.verdict {
        return fail(Error::Infeasible {
            n: 0,
            reason: format!("spec violates conditions {:?}", report.violated_conditions),
        });
    }
    let betas: Vec<f64> = (0..points)
        .map(|i| from + (to - from) * i as f64 / (points - 1) as f64)
        .collect();

    let results: Vec<Result<SweepRow, Error>> = std::thread::scope(|scope| {
        let spec = &spec;
        let chunks: Vec<&[f64]> = betas.chunks(betas.len().div_ceil(threads)).collect();
        let handles: Vec<_> = chunks
            .into_iter()
            .map(|chunk| {
                scope.spawn(move || {
                    chunk
                        .iter()
                        .map(|&b| sweep_row(spec, b, tol))
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("sweep worker"))
            .collect()
    });

    let mut rows = Vec::with_capacity(results.len());
    for r in results {
        match r {
            Ok(row) => rows.push(row),
            Err(e) => return fail(e),
        }
    }

    // the sweep itself makes the couplings homogeneous, so beta_c is defined
    let beta_c = {
        let edges = class_edge_set(&spec);
        let mut homog = spec.clone();
        for &(a, b) in edges.edges() {
            homog = homog.with_beta(a, b, 1.0).unwrap();
        }
        critical_beta(&homog).unwrap_or(f64::INFINITY)
    };

    let edges = class_edge_set(&spec);
    let pair_labels: Vec<String> = edges
        .edges()
        .iter()
        .filter(|&&(a, b)| a <= b)
        .map(|&(a, b)| format!("{}_{}", a + 1, b + 1))
        .collect();

    let text = match format {
        OutputFormat::Csv => {
            let mut text = format!("# schema_version=1 beta_c={beta_c}\n");
            let mut header = String::from("beta,rho_m,regime");
            for a in 0..spec.n() {
                header.push_str(&format!(",m_{}", a + 1));
            }
            for label in &pair_labels {
                header.push_str(&format!(",corr_{label}"));
            }
            header.push_str(",pressure");
            for a in 0..spec.n() {
                header.push_str(&format!(",S_{}", a + 1));
            }
            text.push_str(&header);
            text.push('\n');
            for row in &rows {
                let mut line = format!("{},{},{}", row.beta, row.rho, row.regime);
                for m in &row.magnetizations {
                    line.push_str(&format!(",{m}"));
                }
                for c in &row.correlations {
                    line.push_str(&format!(",{c}"));
                }
                line.push_str(&format!(",{}", row.pressure));
                for a in 0..spec.n() {
                    match &row.spontaneous {
                        Some(s) => line.push_str(&format!(",{}", s[a])),
                        None => line.push_str(if spec.zero_field() { ",0" } else { "," }),
                    }
                }
                text.push_str(&line);
                text.push('\n');
            }
            text
        }
        OutputFormat::Json => {
            let rows_json: Vec<serde_json::Value> = rows
                .iter()
                .map(|row| {
                    json!({
                        "beta": row.beta,
                        "rho_m": row.rho,
                        "regime": row.regime,
                        "magnetizations": row.magnetizations,
                        "edge_correlations": row.correlations,
                        "pressure": row.pressure,
                        "spontaneous": row.spontaneous,
                    })
                })
                .collect();
            serde_json::to_string_pretty(&json!({
                "schema_version": 1,
                "beta_c": beta_c,
                "rows": rows_json,
            }))
            .unwrap()
        }
    };
    emit(&text);
    if let Some(dir) = out {
        let manifest = serde_json::to_value(RunManifest::new("sweep", &spec, None)).unwrap();
        let name = match format {
            OutputFormat::Csv => "sweep.csv",
            OutputFormat::Json => "sweep.json",
        };
        if let Err(e) = persist(&dir, &[(name, &text)], &manifest) {
            return fail(e);
        }
    }
    ExitCode::SUCCESS
}

fn cmd_verify(suite: Suite, seed: u64) -> ExitCode {
    let outcome = match suite {
        Suite::Trees => verify::trees(seed),
        Suite::Inequalities => verify::inequalities(seed),
        Suite::Mcmc => verify::mcmc(seed),
        Suite::Spectral => verify::spectral(seed),
    };
    let mut all_ok = true;
    for check in &outcome {
        let tag = if check.ok { "PASS" } else { "FAIL" };
        emit(&format!("[{tag}] {}: {}\n", check.name, check.detail));
        all_ok &= check.ok;
    }
    if all_ok {
        emit(&format!("verify: all {} checks passed\n", outcome.len()));
        ExitCode::SUCCESS
    } else {
        let failing: Vec<_> = outcome.iter().filter(|c| !c.ok).collect();
        let record = json!({
            "failed": failing.iter().map(|c| json!({
                "name": c.name,
                "detail": c.detail,
            })).collect::<Vec<_>>(),
        });
        eprintln!("{}", serde_json::to_string_pretty(&record).unwrap());
        ExitCode::from(5)
    }
}
