//! `solidsum` command-line front end.
//!
//! Exit codes: 0 on success, 2 on usage errors (bad flags, malformed input
//! files or expressions), 3 on numerical failures (non-convergent
//! quadrature, failed consistency checks).

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};
use thiserror::Error;

use solidsum::bases::{classify_pullback, BasisFamily};
use solidsum::bernoulli1d::periodized_eval;
use solidsum::em::{expand_main, gamma_coefficients};
use solidsum::field::parse;
use solidsum::fourier::{expand_general, oracle_ft};
use solidsum::geometry::{
    exact_point, solid_angle, weighted_lattice_count, IntegerSimplex, SimplicialComplex,
    SolidAngleMethod,
};
use solidsum::mvb::{Backend, FourierOptions, Mollifier, MvBernoulli, MvbError};
use solidsum::quadrature::{convergence_table, extrapolated_integral, format_float, table_to_csv};
use solidsum::Error as CoreError;

/// Environment variable overriding `--threads`.
const THREADS_ENV: &str = "SM_THREADS";

#[derive(Debug, Parser, Serialize)]
#[command(
    name = "solidsum",
    version,
    about = "Solid-angle weighted lattice sums, Euler–Maclaurin expansions and extrapolated quadrature"
)]
struct Cli {
    /// Worker threads (default: available parallelism; SM_THREADS overrides).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output format for scalar results.
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Format {
    Text,
    Json,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(tag = "subcommand", rename_all = "kebab-case")]
enum Command {
    /// Periodized Bernoulli function B_n(x) (polynomial divided by n!).
    Bernoulli {
        #[arg(long)]
        n: usize,
        #[arg(long, allow_negative_numbers = true)]
        x: f64,
    },
    /// Listing of the basis family in dimension d as JSON.
    Bases {
        #[arg(long)]
        d: usize,
    },
    /// Normalized solid angle of a complex at a point.
    SolidAngle {
        #[arg(long)]
        complex: PathBuf,
        /// Comma-separated coordinates.
        #[arg(long, allow_hyphen_values = true)]
        point: String,
        #[command(flatten)]
        #[serde(flatten)]
        method: MethodArg,
    },
    /// Solid-angle weighted lattice count of the dilate τP.
    Count {
        #[arg(long)]
        complex: PathBuf,
        #[arg(long)]
        tau: u64,
        #[command(flatten)]
        #[serde(flatten)]
        method: MethodArg,
    },
    /// Multivariate periodized Bernoulli function.
    Mvb {
        /// Comma-separated orders J.
        #[arg(long = "J")]
        #[serde(rename = "J")]
        j: String,
        /// Row-major comma-separated integer matrix L.
        #[arg(long = "L", allow_hyphen_values = true)]
        #[serde(rename = "L")]
        l: String,
        /// Comma-separated point.
        #[arg(long, allow_hyphen_values = true)]
        x: String,
        #[arg(long, value_enum, default_value_t = BackendArg::Hnf)]
        backend: BackendArg,
        /// Mollifier width for the Fourier backend.
        #[arg(long, default_value_t = 1e-3)]
        epsilon: f64,
        /// Mollifier shape for the Fourier backend.
        #[arg(long, value_enum, default_value_t = MollifierArg::Lattice)]
        mollifier: MollifierArg,
        /// Frequency cutoff for the Fourier backend (default: adaptive).
        #[arg(long)]
        cutoff: Option<u64>,
    },
    /// Truncated boundary expansion of a Fourier transform over τP.
    FtExpand {
        #[arg(long)]
        simplex: PathBuf,
        #[arg(long, allow_hyphen_values = true)]
        f: String,
        #[arg(long)]
        tau: f64,
        #[arg(long, allow_hyphen_values = true)]
        xi: String,
        #[arg(long)]
        w: u32,
        /// Tolerance of the quadrature oracle.
        #[arg(long, default_value_t = 1e-12)]
        tol: f64,
    },
    /// Euler–Maclaurin expansion of a shifted weighted lattice sum.
    Expand {
        #[arg(long)]
        simplex: PathBuf,
        #[arg(long, allow_hyphen_values = true)]
        f: String,
        #[arg(long)]
        tau: f64,
        #[arg(long, allow_hyphen_values = true)]
        x: String,
        #[arg(long)]
        w: u32,
    },
    /// Coefficients γ_k of the even-power error expansion, as CSV.
    Gamma {
        #[arg(long)]
        complex: PathBuf,
        #[arg(long, allow_hyphen_values = true)]
        f: String,
        #[arg(long)]
        w: u32,
        /// Write the CSV here (with a `.meta.json` sidecar) instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Extrapolated weighted Riemann sum.
    Quad {
        #[arg(long)]
        complex: PathBuf,
        #[arg(long, allow_hyphen_values = true)]
        f: String,
        #[arg(long = "N")]
        #[serde(rename = "N")]
        n: u64,
        #[arg(long)]
        w: u32,
        #[command(flatten)]
        #[serde(flatten)]
        method: MethodArg,
    },
    /// Convergence table of the extrapolated sums, as CSV.
    Table {
        #[arg(long)]
        complex: PathBuf,
        #[arg(long, allow_hyphen_values = true)]
        f: String,
        /// Comma-separated resolutions.
        #[arg(long = "Ns", default_value = "8,16,32,64")]
        #[serde(rename = "Ns")]
        ns: String,
        #[arg(long)]
        w: u32,
        /// Reference value of the integral (default: a higher-order extrapolation).
        #[arg(long, allow_negative_numbers = true)]
        reference: Option<f64>,
        /// Write the CSV here (with a `.meta.json` sidecar) instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        #[serde(flatten)]
        method: MethodArg,
    },
}

#[derive(Debug, Args, Serialize)]
struct MethodArg {
    /// `exact` (d ≤ 3) or `mc:<samples>:<seed>`.
    #[arg(long, default_value = "exact")]
    method: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum BackendArg {
    Periodization,
    Hnf,
    Fourier,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum MollifierArg {
    Lattice,
    Radial,
}

#[derive(Debug, Error)]
enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Numeric(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Io { .. } => 2,
            CliError::Numeric(_) => 3,
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        let numeric = matches!(
            e,
            CoreError::NonConvergence(_)
                | CoreError::Numerical(_)
                | CoreError::Mvb(
                    MvbError::CosetCheck(_)
                        | MvbError::ImaginaryResidue(_)
                        | MvbError::Regularization(_)
                )
        );
        if numeric {
            CliError::Numeric(e.to_string())
        } else {
            CliError::Usage(e.to_string())
        }
    }
}

fn core<E: Into<CoreError>>(e: E) -> CliError {
    CliError::from(e.into())
}

fn parse_list<T: std::str::FromStr>(flag: &str, text: &str) -> Result<Vec<T>, CliError> {
    text.split(',')
        .map(|s| {
            s.trim()
                .parse()
                .map_err(|_| CliError::Usage(format!("--{flag}: cannot parse {s:?}")))
        })
        .collect()
}

fn parse_method(text: &str) -> Result<SolidAngleMethod, CliError> {
    if text == "exact" {
        return Ok(SolidAngleMethod::ExactLowDim);
    }
    let parts: Vec<&str> = text.split(':').collect();
    match parts.as_slice() {
        ["mc", samples, seed] => {
            let samples = samples
                .parse()
                .map_err(|_| CliError::Usage(format!("--method: bad sample count {samples:?}")))?;
            let seed = seed
                .parse()
                .map_err(|_| CliError::Usage(format!("--method: bad seed {seed:?}")))?;
            Ok(SolidAngleMethod::MonteCarlo { samples, seed })
        }
        _ => Err(CliError::Usage(format!(
            "--method: expected `exact` or `mc:<samples>:<seed>`, got {text:?}"
        ))),
    }
}

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn load_complex(path: &Path) -> Result<SimplicialComplex, CliError> {
    SimplicialComplex::from_json(&read(path)?).map_err(core)
}

/// A simplex file is either a one-simplex complex or a bare `{"p", "M"}`
/// object.
fn load_simplex(path: &Path) -> Result<IntegerSimplex, CliError> {
    let text = read(path)?;
    let value: Value = serde_json::from_str(&text)
        .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    let complex_text = if value.get("simplices").is_some() {
        text
    } else {
        let d = value
            .get("p")
            .and_then(Value::as_array)
            .map(Vec::len)
            .ok_or_else(|| {
                CliError::Usage(format!(
                    "{}: expected a complex or a {{\"p\", \"M\"}} object",
                    path.display()
                ))
            })?;
        json!({ "d": d, "simplices": [value] }).to_string()
    };
    let complex = SimplicialComplex::from_json(&complex_text).map_err(core)?;
    match complex.simplices() {
        [s] => Ok(s.clone()),
        other => Err(CliError::Usage(format!(
            "{}: expected exactly one simplex, found {}",
            path.display(),
            other.len()
        ))),
    }
}

fn field(src: &str, d: usize) -> Result<solidsum::field::ScalarField, CliError> {
    parse(src, d).map_err(core)
}

fn check_len(flag: &str, found: usize, d: usize) -> Result<(), CliError> {
    if found == d {
        Ok(())
    } else {
        Err(CliError::Usage(format!(
            "--{flag}: expected {d} coordinates, found {found}"
        )))
    }
}

/// Output of a subcommand before formatting.
enum Output {
    /// A single number.
    Scalar(f64),
    /// A JSON document.
    Json(Value),
    /// CSV text, optionally destined for a file.
    Csv(String, Option<PathBuf>),
}

fn run(cli: &Cli) -> Result<Output, CliError> {
    Ok(match &cli.command {
        Command::Bernoulli { n, x } => Output::Scalar(periodized_eval(*n, *x)),
        Command::Bases { d } => {
            let family = BasisFamily::build(*d).map_err(core)?;
            let rows: Vec<Value> = family
                .all_v()
                .into_iter()
                .map(|v| {
                    Ok(json!({
                        "V": v,
                        "basis": family.basis(&v).map_err(core)?,
                        "lambda": family.lambda(&v).map_err(core)?,
                    }))
                })
                .collect::<Result<_, CliError>>()?;
            Output::Json(json!({
                "d": d,
                "union_vectors": family.union_vectors(),
                "bases": rows,
            }))
        }
        Command::SolidAngle {
            complex,
            point,
            method,
        } => {
            let c = load_complex(complex)?;
            let x: Vec<f64> = parse_list("point", point)?;
            check_len("point", x.len(), c.dim())?;
            Output::Scalar(solid_angle(&c, &x, parse_method(&method.method)?).map_err(core)?)
        }
        Command::Count {
            complex,
            tau,
            method,
        } => {
            let c = load_complex(complex)?;
            Output::Scalar(
                weighted_lattice_count(&c, *tau, parse_method(&method.method)?).map_err(core)?,
            )
        }
        Command::Mvb {
            j,
            l,
            x,
            backend,
            epsilon,
            mollifier,
            cutoff,
        } => {
            let j: Vec<u32> = parse_list("J", j)?;
            let flat: Vec<i64> = parse_list("L", l)?;
            let x: Vec<f64> = parse_list("x", x)?;
            let d = j.len();
            check_len("L", flat.len(), d * d)?;
            check_len("x", x.len(), d)?;
            let rows: Vec<Vec<i64>> = flat.chunks(d).map(<[i64]>::to_vec).collect();
            let b = MvBernoulli::new(j, rows).map_err(core)?;
            let backend = match backend {
                BackendArg::Periodization => Backend::Periodization,
                BackendArg::Hnf => Backend::Hnf,
                BackendArg::Fourier => {
                    if epsilon.is_nan() || *epsilon <= 0.0 {
                        return Err(CliError::Usage("--epsilon must be positive".into()));
                    }
                    Backend::Fourier(FourierOptions {
                        epsilon: *epsilon,
                        cutoff: *cutoff,
                        mollifier: match mollifier {
                            MollifierArg::Lattice => Mollifier::Lattice,
                            MollifierArg::Radial => Mollifier::Radial,
                        },
                    })
                }
            };
            Output::Scalar(b.eval(&x, backend).map_err(core)?)
        }
        Command::FtExpand {
            simplex,
            f,
            tau,
            xi,
            w,
            tol,
        } => {
            let s = load_simplex(simplex)?;
            let q = field(f, s.dim())?;
            let xi: Vec<f64> = parse_list("xi", xi)?;
            check_len("xi", xi.len(), s.dim())?;
            let family = BasisFamily::build(s.dim()).map_err(core)?;
            let theta = classify_pullback(&family, s.m(), &exact_point(&xi));
            let expansion = expand_general(&s, &q, *tau, theta, *w).map_err(core)?;
            let value = expansion.eval(&xi).map_err(core)?;
            let oracle = oracle_ft(&s, &q, *tau, &xi, *tol).map_err(core)?;
            Output::Json(json!({
                "expansion": { "re": value.re, "im": value.im },
                "oracle": { "re": oracle.re, "im": oracle.im },
                "abs_error": (value - oracle).norm(),
                "terms": expansion.terms().len(),
            }))
        }
        Command::Expand {
            simplex,
            f,
            tau,
            x,
            w,
        } => {
            let s = load_simplex(simplex)?;
            let q = field(f, s.dim())?;
            let x: Vec<f64> = parse_list("x", x)?;
            check_len("x", x.len(), s.dim())?;
            let report = expand_main(&s, &q, *tau, &x, *w).map_err(core)?;
            Output::Json(
                serde_json::to_value(report).map_err(|e| CliError::Numeric(e.to_string()))?,
            )
        }
        Command::Gamma { complex, f, w, out } => {
            let c = load_complex(complex)?;
            let q = field(f, c.dim())?;
            let mut gamma = vec![0.0; (*w / 2) as usize];
            for s in c.simplices() {
                let report = gamma_coefficients(s, &q, *w).map_err(core)?;
                for (acc, g) in gamma.iter_mut().zip(&report.gamma) {
                    *acc += g;
                }
            }
            let mut csv = String::from("k,gamma\n");
            for (k, g) in gamma.iter().enumerate() {
                csv.push_str(&format!("{},{}\n", k + 1, format_float(*g)));
            }
            Output::Csv(csv, out.clone())
        }
        Command::Quad {
            complex,
            f,
            n,
            w,
            method,
        } => {
            let c = load_complex(complex)?;
            let q = field(f, c.dim())?;
            Output::Scalar(
                extrapolated_integral(&c, &q, *n, *w, parse_method(&method.method)?)
                    .map_err(core)?,
            )
        }
        Command::Table {
            complex,
            f,
            ns,
            w,
            reference,
            out,
            method,
        } => {
            let c = load_complex(complex)?;
            let q = field(f, c.dim())?;
            let ns: Vec<u64> = parse_list("Ns", ns)?;
            let rows =
                convergence_table(&c, &q, &ns, *w, *reference, parse_method(&method.method)?)
                    .map_err(core)?;
            Output::Csv(table_to_csv(&rows), out.clone())
        }
    })
}

/// The effective configuration, echoed with every result.
fn config(cli: &Cli, threads: usize) -> Value {
    let mut v = serde_json::to_value(&cli.command).expect("flags serialize");
    if let Value::Object(map) = &mut v {
        map.insert("threads".into(), json!(threads));
        map.insert("format".into(), json!(cli.format));
        map.insert("version".into(), json!(env!("CARGO_PKG_VERSION")));
    }
    v
}

fn resolve_threads(flag: Option<usize>) -> Result<usize, CliError> {
    if let Ok(text) = std::env::var(THREADS_ENV) {
        return text
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|n| *n > 0)
            .ok_or_else(|| {
                CliError::Usage(format!(
                    "{THREADS_ENV}: expected a positive integer, got {text:?}"
                ))
            });
    }
    match flag {
        Some(0) => Err(CliError::Usage("--threads must be positive".into())),
        Some(n) => Ok(n),
        None => Ok(std::thread::available_parallelism()
            .map(usize::from)
            .unwrap_or(1)),
    }
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn emit(cli: &Cli, config: Value, output: Output) -> Result<(), CliError> {
    match output {
        Output::Scalar(x) => match cli.format {
            Format::Text => {
                println!("{}", format_float(x));
                eprintln!("config: {config}");
            }
            Format::Json => println!("{}", json!({ "config": config, "value": x })),
        },
        Output::Json(mut value) => {
            if let Value::Object(map) = &mut value {
                map.insert("config".into(), config);
            }
            println!(
                "{}",
                serde_json::to_string_pretty(&value).expect("values serialize")
            );
        }
        Output::Csv(text, None) => {
            print!("{text}");
            eprintln!("config: {config}");
        }
        Output::Csv(text, Some(path)) => {
            write_file(&path, &text)?;
            let mut meta = path.clone().into_os_string();
            meta.push(".meta.json");
            let meta_text = serde_json::to_string_pretty(&config).expect("values serialize") + "\n";
            write_file(Path::new(&meta), &meta_text)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    // Usage errors from clap exit with status 2.
    let cli = Cli::parse();
    let result = resolve_threads(cli.threads).and_then(|threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| CliError::Numeric(format!("thread pool: {e}")))?;
        let output = run(&cli)?;
        emit(&cli, config(&cli, threads), output)
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
