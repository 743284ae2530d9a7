//! The `fdep` command line.
//!
//! Exit codes: 0 success, 2 usage error, 3 data error, 4 internal assertion.
//! Every subcommand prints one JSON object on stdout, including its
//! wall-clock time in `elapsed_ms`. Floating-point fields carry 6 significant
//! digits unless `--full-precision` is given.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::{Map, Value};

use crate::baselines::{distance_correlation, permutation_test, PermutationPlan};
use crate::dependence::{coefficient, independence_test};
use crate::error::{Error, Result};
use crate::io;
use crate::model::{distance_matrix, DistanceMatrix};
use crate::rng::stream_rng;
use crate::simulation::{
    degree_growth_study, kl_sample, null_distribution_study, power_study, response,
    DegreeStudyConfig, KLModel, LambdaSpec, ResponseKind, ResponseModel, StudyConfig,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_INTERNAL: i32 = 4;

/// Environment fallback for `--threads`.
pub const THREADS_ENV: &str = "FDEP_THREADS";

#[derive(Debug, Parser)]
#[command(name = "fdep", version, about = "Nearest-neighbor dependence coefficient and independence test for functional data")]
pub struct Cli {
    /// Cap on worker threads (default: FDEP_THREADS, else all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// Print floating-point fields at full precision.
    #[arg(long, global = true)]
    pub full_precision: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Dependence coefficient T̂n only.
    Coef(InputArgs),
    /// Asymptotic independence test.
    Test(TestArgs),
    /// Distance correlation, optionally with a permutation p-value.
    Dcor(DcorArgs),
    /// Generate synthetic curves and a response.
    Simulate(SimulateArgs),
    /// Growth of the maximal in-degree under the spike model.
    DegreeStudy(DegreeArgs),
    /// Rejection rates over response kinds and signal fractions.
    Power(StudyArgs),
    /// Distribution of the test statistic under independence.
    NullStudy(StudyArgs),
}

#[derive(Debug, Args)]
pub struct InputArgs {
    /// Curves CSV.
    #[arg(long, conflicts_with = "dist_matrix", required_unless_present = "dist_matrix")]
    pub curves: Option<PathBuf>,
    /// Precomputed symmetric distance matrix CSV, used instead of curves.
    #[arg(long)]
    pub dist_matrix: Option<PathBuf>,
    /// Response CSV, one value per line.
    #[arg(long)]
    pub response: PathBuf,
}

#[derive(Debug, Args)]
pub struct TestArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
}

#[derive(Debug, Args)]
pub struct DcorArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Permutations for a p-value; 0 skips the test.
    #[arg(long, default_value_t = 0)]
    pub permutations: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, default_value_t = 100)]
    pub n: usize,
    #[arg(long, default_value = "int")]
    pub kind: String,
    #[arg(long, default_value_t = 1.0)]
    pub r2: f64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long = "basis-k", default_value_t = 20)]
    pub basis_k: usize,
    #[arg(long, default_value_t = 200)]
    pub grid_p: usize,
    #[arg(long, default_value_t = 0.3)]
    pub variance_decay: f64,
    #[arg(long)]
    pub curves_out: PathBuf,
    #[arg(long)]
    pub response_out: PathBuf,
}

#[derive(Debug, Args)]
pub struct StudyArgs {
    /// Flat key-value config; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long = "B")]
    pub replications: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Comma-separated response kinds (power study).
    #[arg(long)]
    pub kinds: Option<String>,
    /// Comma-separated signal fractions (power study).
    #[arg(long)]
    pub r2: Option<String>,
    #[arg(long = "basis-k")]
    pub basis_k: Option<usize>,
    #[arg(long)]
    pub grid_p: Option<usize>,
    #[arg(long)]
    pub variance_decay: Option<f64>,
    /// Also compute distance correlation (null study).
    #[arg(long)]
    pub dcor: bool,
    /// Permutations for the distance-correlation test (power study).
    #[arg(long)]
    pub dcor_permutations: Option<usize>,
    /// Write per-replicate or per-cell rows here.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DegreeArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Comma-separated sample sizes.
    #[arg(long)]
    pub sizes: Option<String>,
    /// Runs per sample size.
    #[arg(long)]
    pub runs: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Eigenvalue decay exponent a in λ_k ∝ k^(-a).
    #[arg(long = "decay")]
    pub lambda_decay_a: Option<f64>,
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

/// Maps library errors to exit codes.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        _ if e.is_internal() => EXIT_INTERNAL,
        Error::InvalidParameter(_) | Error::UnknownKind(_) => EXIT_USAGE,
        _ => EXIT_DATA,
    }
}

/// Parses `args` (including the program name) and runs the command, writing
/// the JSON report to `stdout` and diagnostics to `stderr`.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(stdout, "{e}");
                    return EXIT_OK;
                }
                _ => EXIT_USAGE,
            };
            let _ = write!(stderr, "{e}");
            return code;
        }
    };
    let threads = match resolve_threads(cli.threads) {
        Ok(t) => t,
        Err(msg) => {
            let _ = writeln!(stderr, "error: {msg}");
            return EXIT_USAGE;
        }
    };
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = threads {
        builder = builder.num_threads(t);
    }
    let pool = match builder.build() {
        Ok(p) => p,
        Err(e) => {
            let _ = writeln!(stderr, "error: cannot start thread pool: {e}");
            return EXIT_INTERNAL;
        }
    };
    let started = Instant::now();
    let outcome = pool.install(|| execute(&cli.command));
    match outcome {
        Ok(mut fields) => {
            fields.insert("elapsed_ms".into(), Value::from(started.elapsed().as_secs_f64() * 1e3));
            if !cli.full_precision {
                round_fields(&mut fields);
            }
            let _ = writeln!(stdout, "{}", Value::Object(fields));
            EXIT_OK
        }
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            exit_code(&e)
        }
    }
}

fn resolve_threads(flag: Option<usize>) -> std::result::Result<Option<usize>, String> {
    let value = match flag {
        Some(t) => Some(t),
        None => match std::env::var(THREADS_ENV) {
            Ok(s) if !s.trim().is_empty() => Some(
                s.trim()
                    .parse::<usize>()
                    .map_err(|_| format!("{THREADS_ENV}='{s}' is not a thread count"))?,
            ),
            _ => None,
        },
    };
    match value {
        Some(0) => Err("thread count must be at least 1".into()),
        v => Ok(v),
    }
}

/// Rounds a float to `digits` significant digits.
pub fn round_significant(v: f64, digits: usize) -> f64 {
    if !v.is_finite() || v == 0.0 {
        return v;
    }
    format!("{:.*e}", digits.saturating_sub(1), v).parse().unwrap_or(v)
}

fn round_fields(fields: &mut Map<String, Value>) {
    for v in fields.values_mut() {
        round_value(v);
    }
}

fn round_value(v: &mut Value) {
    match v {
        Value::Number(num) if num.is_f64() => {
            if let Some(x) = num.as_f64() {
                *v = Value::from(round_significant(x, 6));
            }
        }
        Value::Array(items) => items.iter_mut().for_each(round_value),
        Value::Object(map) => map.values_mut().for_each(round_value),
        _ => {}
    }
}

fn to_fields<T: Serialize>(value: &T) -> Map<String, Value> {
    match serde_json::to_value(value) {
        Ok(Value::Object(map)) => map,
        _ => Map::new(),
    }
}

fn load_distances(input: &InputArgs) -> Result<DistanceMatrix> {
    match (&input.curves, &input.dist_matrix) {
        (_, Some(path)) => io::parse_distance_csv(path),
        (Some(path), None) => distance_matrix(&io::parse_curves_csv(path)?),
        (None, None) => Err(Error::InvalidParameter("one of --curves or --dist-matrix is required".into())),
    }
}

/// Reads inputs, checking the response length and the size precondition
/// before the distance matrix is built.
fn load_inputs(input: &InputArgs, min_n: usize) -> Result<(DistanceMatrix, Vec<f64>)> {
    let y = io::parse_response_csv(&input.response)?;
    if let Some(path) = &input.curves {
        let x = io::parse_curves_csv(path)?;
        if x.n() < min_n {
            return Err(Error::SampleTooSmall { n: x.n(), min: min_n });
        }
        if x.n() != y.len() {
            return Err(Error::DimensionMismatch {
                what: "response length vs number of curves",
                expected: x.n(),
                found: y.len(),
            });
        }
        return Ok((distance_matrix(&x)?, y));
    }
    let d = load_distances(input)?;
    if d.n() < min_n {
        return Err(Error::SampleTooSmall { n: d.n(), min: min_n });
    }
    if d.n() != y.len() {
        return Err(Error::DimensionMismatch {
            what: "response length vs distance matrix size",
            expected: d.n(),
            found: y.len(),
        });
    }
    Ok((d, y))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

fn execute(command: &Command) -> Result<Map<String, Value>> {
    match command {
        Command::Coef(input) => {
            let (d, y) = load_inputs(input, 2)?;
            Ok(to_fields(&coefficient(&d, &y)?))
        }
        Command::Test(args) => {
            check_alpha(args.alpha)?;
            let (d, y) = load_inputs(&args.input, crate::dependence::MIN_TEST_N)?;
            let report = independence_test(&d, &y)?;
            let mut fields = to_fields(&report);
            fields.insert("reject".into(), Value::from(report.reject(args.alpha)));
            Ok(fields)
        }
        Command::Dcor(args) => {
            let (d, y) = load_inputs(&args.input, 2)?;
            let r = distance_correlation(&d, &y)?;
            let mut fields = Map::new();
            fields.insert("n".into(), Value::from(d.n()));
            fields.insert("dcor".into(), Value::from(r));
            if args.permutations > 0 {
                let plan = PermutationPlan::new(args.permutations, args.seed)?;
                let stat = |m: &DistanceMatrix, v: &[f64]| distance_correlation(m, v).unwrap_or(0.0);
                fields.insert("permutations".into(), Value::from(args.permutations));
                fields.insert("p_value".into(), Value::from(permutation_test(stat, &d, &y, plan)));
            }
            Ok(fields)
        }
        Command::Simulate(args) => simulate(args),
        Command::NullStudy(args) => {
            let cfg = study_config(args)?;
            let report = null_distribution_study(&cfg)?;
            if let Some(path) = &args.csv {
                io::write_null_csv(&report, create(path)?)?;
            }
            let mut fields = to_fields(&report);
            fields.insert("study".into(), Value::from("null"));
            Ok(fields)
        }
        Command::Power(args) => {
            let cfg = study_config(args)?;
            let report = power_study(&cfg)?;
            if let Some(path) = &args.csv {
                io::write_power_csv(&report, create(path)?)?;
            }
            let mut fields = to_fields(&report);
            fields.insert("study".into(), Value::from("power"));
            Ok(fields)
        }
        Command::DegreeStudy(args) => {
            let cfg = degree_config(args)?;
            let report = degree_growth_study(&cfg)?;
            if let Some(path) = &args.csv {
                io::write_degree_csv(&report, create(path)?)?;
            }
            let mut fields = to_fields(&report);
            fields.insert("study".into(), Value::from("degree"));
            fields.insert("bounds_hold".into(), Value::from(true));
            Ok(fields)
        }
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("alpha must lie in (0, 1), got {alpha}")))
    }
}

fn simulate(args: &SimulateArgs) -> Result<Map<String, Value>> {
    let kind: ResponseKind = args.kind.parse()?;
    let model = KLModel {
        basis_size: args.basis_k,
        variance_decay: args.variance_decay,
        grid_points: args.grid_p,
    };
    if args.n == 0 {
        return Err(Error::InvalidParameter("n must be at least 1".into()));
    }
    let mut rng = stream_rng(args.seed, 0);
    let x = kl_sample(&model, args.n, &mut rng)?;
    let y = response(&ResponseModel { kind, r2: args.r2 }, &x, &mut rng)?;
    let mut out = create(&args.curves_out)?;
    io::write_sample(&x, &mut out)?;
    out.flush()?;
    let mut out = create(&args.response_out)?;
    io::write_response(&y, &mut out)?;
    out.flush()?;
    let mut fields = Map::new();
    fields.insert("n".into(), Value::from(x.n()));
    fields.insert("p".into(), Value::from(x.p()));
    fields.insert("kind".into(), Value::from(kind.name()));
    fields.insert("r2".into(), Value::from(args.r2));
    fields.insert("seed".into(), Value::from(args.seed));
    Ok(fields)
}

fn read_config(path: &Option<PathBuf>) -> Result<BTreeMap<String, String>> {
    match path {
        Some(p) => io::parse_config(&std::fs::read_to_string(p)?),
        None => Ok(BTreeMap::new()),
    }
}

fn config_value<T: FromStr>(cfg: &BTreeMap<String, String>, key: &str) -> Result<Option<T>> {
    cfg.get(key)
        .map(|s| {
            s.parse::<T>()
                .map_err(|_| Error::InvalidParameter(format!("config key '{key}': cannot parse '{s}'")))
        })
        .transpose()
}

fn list<T: FromStr>(s: &str, what: &str) -> Result<Vec<T>> {
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<T>().map_err(|_| Error::InvalidParameter(format!("{what}: cannot parse '{t}'"))))
        .collect()
}

fn kinds(s: &str) -> Result<Vec<ResponseKind>> {
    s.split(',').map(str::trim).filter(|t| !t.is_empty()).map(str::parse).collect()
}

fn study_config(args: &StudyArgs) -> Result<StudyConfig> {
    let file = read_config(&args.config)?;
    let mut cfg = StudyConfig::default();
    macro_rules! pick {
        ($flag:expr, $key:literal) => {
            match $flag {
                Some(v) => Some(v),
                None => config_value(&file, $key)?,
            }
        };
    }
    if let Some(v) = pick!(args.n, "n") {
        cfg.n = v;
    }
    if let Some(v) = pick!(args.replications, "B") {
        cfg.replications = v;
    }
    if let Some(v) = pick!(args.seed, "seed") {
        cfg.seed = v;
    }
    if let Some(v) = pick!(args.alpha, "alpha") {
        cfg.alpha = v;
    }
    if let Some(v) = pick!(args.basis_k, "basis_K") {
        cfg.model.basis_size = v;
    }
    if let Some(v) = pick!(args.grid_p, "grid_p") {
        cfg.model.grid_points = v;
    }
    if let Some(v) = pick!(args.variance_decay, "variance_decay") {
        cfg.model.variance_decay = v;
    }
    if let Some(v) = pick!(args.dcor_permutations, "dcor_permutations") {
        cfg.dcor_permutations = v;
    }
    cfg.dcor = args.dcor || config_value::<bool>(&file, "dcor")?.unwrap_or(false);
    if let Some(s) = args.kinds.clone().or_else(|| file.get("kind").cloned()) {
        cfg.kinds = kinds(&s)?;
    }
    if let Some(s) = args.r2.clone().or_else(|| file.get("r2").cloned()) {
        cfg.r2 = list(&s, "r2")?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn degree_config(args: &DegreeArgs) -> Result<DegreeStudyConfig> {
    let file = read_config(&args.config)?;
    let mut cfg = DegreeStudyConfig::default();
    if let Some(s) = args.sizes.clone().or_else(|| file.get("sizes").cloned()) {
        cfg.sizes = list(&s, "sizes")?;
    } else if let Some(n) = config_value::<usize>(&file, "n")? {
        cfg.sizes = vec![n];
    }
    if let Some(v) = args.runs.or(config_value(&file, "runs")?) {
        cfg.runs = v;
    }
    if let Some(v) = args.seed.or(config_value(&file, "seed")?) {
        cfg.seed = v;
    }
    if let Some(a) = args.lambda_decay_a.or(config_value(&file, "lambda_decay_a")?) {
        if !(a > 1.0) {
            return Err(Error::InvalidParameter(format!("decay exponent must exceed 1, got {a}")));
        }
        cfg.lambda = LambdaSpec::power_law(a);
    }
    Ok(cfg)
}
