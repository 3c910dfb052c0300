//! The `infopriv` command line.
//!
//! Every subcommand reads one distribution file and prints a versioned JSON
//! report (or its CSV projection). Exit codes: 0 success, 1 invalid input or
//! failed check, 2 infeasible request or size guard, 64 usage error,
//! 70 internal invariant failure.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Map, Value};

use crate::error::Error;
use crate::filters::PrivacyFilter;
use crate::io::{bits, digest, parse_distribution_str, quantity, InputRef, RunReport, Table, SCHEMA_VERSION};
use crate::multiletter::multiletter_evaluate;
use crate::perfect::{d0_vertices, g0, is_weakly_independent, DEFAULT_RANK_TOL};
use crate::private_info::{
    common_info_bundle_with, decompose_with_tol, distinct_posteriors, exact_generation_check, DEFAULT_POSTERIOR_TOL,
    DEFAULT_SEARCH_RESTARTS, MARKOV_TOL,
};
use crate::prob::{entropy, mutual_information, JointDistribution};
use crate::rate::{g_eps_curve, g_eps_deterministic, RatePrivacyPoint, SolveOptions, DEFAULT_RESTARTS, LEAKAGE_TOL};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_INFEASIBLE: i32 = 2;
pub const EXIT_USAGE: i32 = 64;
pub const EXIT_INTERNAL: i32 = 70;

/// Largest deviation accepted by `generate`.
pub const GENERATION_TOL: f64 = 1e-12;

#[derive(Debug, Parser)]
#[command(name = "infopriv", version, about = "Exact privacy/utility tradeoffs for finite alphabets")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Args)]
struct Common {
    /// Numerical tolerance (rank threshold for g0, posterior merge tolerance for decompose).
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Display alphabet size |Z| (default |Y| + 1).
    #[arg(long, global = true)]
    z_card: Option<usize>,
    /// RNG seed for the randomized searches.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Number of random restarts for the randomized searches.
    #[arg(long, global = true)]
    restarts: Option<usize>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Perfect privacy: the best zero-leakage filter.
    G0 { file: PathBuf },
    /// Tradeoff curve g_eps over a grid of leakage budgets (requires --seed).
    Gcurve {
        file: PathBuf,
        /// Comma-separated ascending budgets in bits, e.g. 0,0.05,0.1.
        #[arg(long, value_delimiter = ',', required = true)]
        eps_grid: Vec<f64>,
    },
    /// Best deterministic filter within a leakage budget.
    Gdet {
        file: PathBuf,
        #[arg(long)]
        eps: f64,
    },
    /// Minimal sufficient statistic and the C_X(Y) / D_X(Y) split.
    Decompose { file: PathBuf },
    /// Bounds on the common-information chain (requires --seed).
    Commoninfo { file: PathBuf },
    /// Near-uniform binning over Y^n.
    Multiletter {
        file: PathBuf,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        delta: f64,
    },
    /// Exact regeneration of the joint from the sufficient statistic.
    Generate { file: PathBuf },
    /// Parse and validate a distribution file.
    Validate { file: PathBuf },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::G0 { .. } => "g0",
            Command::Gcurve { .. } => "gcurve",
            Command::Gdet { .. } => "gdet",
            Command::Decompose { .. } => "decompose",
            Command::Commoninfo { .. } => "commoninfo",
            Command::Multiletter { .. } => "multiletter",
            Command::Generate { .. } => "generate",
            Command::Validate { .. } => "validate",
        }
    }

    fn file(&self) -> &Path {
        match self {
            Command::G0 { file }
            | Command::Gcurve { file, .. }
            | Command::Gdet { file, .. }
            | Command::Decompose { file }
            | Command::Commoninfo { file }
            | Command::Multiletter { file, .. }
            | Command::Generate { file }
            | Command::Validate { file } => file,
        }
    }
}

/// What a process run would print and return.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outcome {
    pub stdout: String,
    pub stderr: String,
    pub code: i32,
}

impl Outcome {
    fn fail(code: i32, message: impl std::fmt::Display) -> Self {
        Self {
            stdout: String::new(),
            stderr: format!("error: {message}\n"),
            code,
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Invalid(_) | Error::Parse { .. } | Error::Io(_) | Error::DimensionMismatch { .. } => EXIT_INVALID,
        Error::Precondition(_) | Error::TooLarge(_) => EXIT_INFEASIBLE,
        Error::Internal(_) => EXIT_INTERNAL,
    }
}

/// Runs one command line (`argv[0]` is the program name).
pub fn run_command<I, T>(argv: I) -> Outcome
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            return if code == EXIT_OK {
                Outcome {
                    stdout: text,
                    stderr: String::new(),
                    code,
                }
            } else {
                Outcome {
                    stdout: String::new(),
                    stderr: text,
                    code,
                }
            };
        }
    };
    let name = cli.command.name();
    if matches!(cli.command, Command::Gcurve { .. } | Command::Commoninfo { .. }) && cli.common.seed.is_none() {
        return Outcome::fail(EXIT_USAGE, format!("`{name}` requires --seed"));
    }

    let path = cli.command.file();
    let bytes = match std::fs::read(path) {
        Ok(b) => b,
        Err(e) => return Outcome::fail(EXIT_INVALID, format!("{}: {e}", path.display())),
    };
    let text = match String::from_utf8(bytes) {
        Ok(t) => t,
        Err(_) => return Outcome::fail(EXIT_INVALID, format!("{}: not UTF-8", path.display())),
    };
    let j = match parse_distribution_str(&text) {
        Ok(j) => j,
        Err(e) => return Outcome::fail(exit_code(&e), format!("{}: {e}", path.display())),
    };

    let mut report = RunReport {
        schema: SCHEMA_VERSION,
        command: name.to_string(),
        input: InputRef {
            name: path.file_name().map_or_else(String::new, |n| n.to_string_lossy().into_owned()),
            digest: digest(text.as_bytes()),
        },
        seed: cli.common.seed,
        tolerances: Map::new(),
        results: Map::new(),
        warnings: j
            .dropped_x_labels()
            .iter()
            .map(|l| format!("dropped zero-mass X symbol {l:?}"))
            .chain(j.dropped_y_labels().iter().map(|l| format!("dropped zero-mass Y symbol {l:?}")))
            .collect(),
        table: None,
    };
    let code = match execute(&cli.command, &cli.common, &j, &mut report) {
        Ok(code) => code,
        Err(e) => return Outcome::fail(exit_code(&e), e),
    };
    Outcome {
        stdout: match cli.common.format {
            Format::Json => report.to_json(),
            Format::Csv => report.to_csv(),
        },
        stderr: String::new(),
        code,
    }
}

fn filter_json(j: &JointDistribution, f: &PrivacyFilter, tol: f64) -> Value {
    let rows: Vec<&[f64]> = f.kernel().rows().collect();
    json!({
        "yLabels": j.y_labels(),
        "zCard": quantity(f.z_card(), "count", 0.0),
        "deterministic": f.is_deterministic(),
        "kernel": quantity(rows, "probability", tol),
    })
}

fn point_json(j: &JointDistribution, p: &RatePrivacyPoint, tol: f64) -> Value {
    json!({
        "epsilon": bits(p.epsilon, 0.0),
        "utility": bits(p.utility, tol),
        "achievedLeakage": bits(p.achieved_leakage, tol),
        "method": p.method,
        "restarts": quantity(p.restarts, "count", 0.0),
        "filter": filter_json(j, &p.filter, tol),
        "notes": p.notes,
    })
}

fn put(m: &mut Map<String, Value>, k: &str, v: Value) {
    m.insert(k.to_string(), v);
}

fn execute(cmd: &Command, c: &Common, j: &JointDistribution, rep: &mut RunReport) -> crate::Result<i32> {
    let z_card = c.z_card.unwrap_or(j.ny() + 1);
    let hy = entropy(&j.p_y());
    let mi = mutual_information(j);
    let res = &mut rep.results;
    let tols = &mut rep.tolerances;
    match cmd {
        Command::G0 { .. } => {
            let tol = c.tol.unwrap_or(DEFAULT_RANK_TOL);
            put(tols, "rank", json!(tol));
            put(tols, "leakage", json!(1e-9));
            let wi = is_weakly_independent(j, tol);
            let set = d0_vertices(j, z_card)?;
            let p = g0(j, z_card)?;
            if (p.utility > 1e-6) != wi.weakly_independent {
                rep.warnings.push(format!(
                    "g0 = {} disagrees with the rank test at tolerance {tol}",
                    p.utility
                ));
            }
            put(res, "utility", bits(p.utility, 1e-9));
            put(res, "leakage", bits(p.achieved_leakage, 1e-9));
            put(res, "hY", bits(hy, 1e-12));
            put(res, "weaklyIndependent", json!(wi.weakly_independent));
            put(res, "rank", quantity(wi.rank, "count", 0.0));
            put(res, "singularValues", quantity(&wi.singular_values, "singular value", tol));
            put(res, "vertexCount", quantity(set.vertices.len(), "count", 0.0));
            put(res, "filter", filter_json(j, &p.filter, 1e-9));
        }
        Command::Gcurve { eps_grid, .. } => {
            let seed = c.seed.expect("checked by caller");
            let mut opts = SolveOptions::new(c.restarts.unwrap_or(DEFAULT_RESTARTS), seed);
            opts.z_card = c.z_card;
            let tol = c.tol.unwrap_or(1e-6);
            put(tols, "feasibility", json!(tol));
            put(tols, "boundary", json!(LEAKAGE_TOL));
            let curve = g_eps_curve(j, eps_grid, &opts)?;
            put(res, "mi", bits(mi, 1e-12));
            put(res, "hY", bits(hy, 1e-12));
            put(res, "points", Value::Array(curve.points.iter().map(|p| point_json(j, p, tol)).collect()));
            rep.table = Some(Table {
                columns: vec!["epsilon".into(), "utility".into(), "achieved_leakage".into()],
                rows: curve
                    .points
                    .iter()
                    .map(|p| vec![p.epsilon, p.utility, p.achieved_leakage])
                    .collect(),
            });
        }
        Command::Gdet { eps, .. } => {
            let tol = c.tol.unwrap_or(1e-12);
            put(tols, "feasibility", json!(tol));
            let p = g_eps_deterministic(j, *eps)?;
            rep.warnings.extend(p.notes.iter().cloned());
            put(res, "point", point_json(j, &p, tol));
        }
        Command::Decompose { .. } => {
            let tol = c.tol.unwrap_or(DEFAULT_POSTERIOR_TOL);
            put(tols, "posterior", json!(tol));
            let d = decompose_with_tol(j, tol);
            let blocks: Vec<Vec<&str>> = d
                .statistic
                .blocks
                .iter()
                .map(|b| b.iter().map(|&y| j.y_labels()[y].as_str()).collect())
                .collect();
            put(res, "cX", bits(d.c_x, 1e-12));
            put(res, "dX", bits(d.d_x, 1e-12));
            put(res, "hY", bits(hy, 1e-12));
            put(res, "mi", bits(mi, 1e-12));
            put(res, "distinctPosteriors", json!(distinct_posteriors(j, tol)));
            put(res, "statisticBlocks", json!(blocks));
        }
        Command::Commoninfo { .. } => {
            let seed = c.seed.expect("checked by caller");
            let restarts = c.restarts.unwrap_or(DEFAULT_SEARCH_RESTARTS);
            put(tols, "markov", json!(MARKOV_TOL));
            let b = common_info_bundle_with(j, seed, restarts);
            put(res, "mi", bits(b.mi, 1e-12));
            put(res, "cwUpper", bits(b.cw_upper, MARKOV_TOL));
            put(res, "gUpper", bits(b.g_upper, MARKOV_TOL));
            put(res, "cX", bits(b.c_x, 1e-12));
            put(res, "hY", bits(b.h_y, 1e-12));
            put(res, "gk", bits(b.gk, 1e-12));
            put(res, "mLower", bits(b.m_lower, MARKOV_TOL));
            put(res, "hDagger", bits(b.h_dagger, 1e-12));
            put(res, "restarts", quantity(restarts, "count", 0.0));
            rep.warnings.push(
                "cwUpper and gUpper are search minima (upper bounds); mLower = H(X,Y) - cwUpper is a lower bound".into(),
            );
        }
        Command::Multiletter { n, delta, .. } => {
            put(tols, "brackets", json!(1e-12));
            let r = multiletter_evaluate(j, *n, *delta)?;
            rep.warnings.extend(r.warnings.iter().cloned());
            let exact = 1e-12;
            put(res, "n", quantity(r.n, "count", 0.0));
            put(res, "delta", bits(r.delta, 0.0));
            put(res, "minEntropy", bits(r.min_entropy, exact));
            put(res, "r", quantity(r.r, "bits", 0.0));
            put(res, "s", quantity(r.s, "bits", 0.0));
            put(res, "rate", quantity(r.rate, "bits/symbol", 0.0));
            put(res, "degenerate", json!(r.degenerate));
            put(res, "perSymbolTV", quantity(&r.per_symbol_tv, "l1", exact));
            put(res, "pairwiseTVMax", quantity(r.pairwise_tv_max, "l1", exact));
            put(res, "jointTV", quantity(r.joint_tv, "l1", exact));
            put(res, "jensenBound", quantity(r.jensen_bound, "l1", exact));
            put(res, "analyticBound", quantity(r.analytic_bound, "l1", 0.0));
            put(res, "leakage", bits(r.leakage, exact));
            put(res, "decoderErrorProb", quantity(r.decoder_error_prob, "probability", exact));
            put(res, "bracketsHold", json!(r.brackets_hold));
            put(res, "binMasses", quantity(&r.bin_masses, "probability", exact));
        }
        Command::Generate { .. } => {
            put(tols, "deviation", json!(GENERATION_TOL));
            let dev = exact_generation_check(j);
            let ok = dev < GENERATION_TOL;
            put(res, "maxDeviation", quantity(dev, "probability", GENERATION_TOL));
            put(res, "passed", json!(ok));
            if !ok {
                return Ok(EXIT_INVALID);
            }
        }
        Command::Validate { .. } => {
            put(tols, "mass", json!(crate::io::FILE_MASS_TOL));
            put(res, "xCard", quantity(j.nx(), "count", 0.0));
            put(res, "yCard", quantity(j.ny(), "count", 0.0));
            put(res, "xLabels", json!(j.x_labels()));
            put(res, "yLabels", json!(j.y_labels()));
            put(res, "mi", bits(mi, 1e-12));
            put(res, "hY", bits(hy, 1e-12));
        }
    }
    Ok(EXIT_OK)
}
