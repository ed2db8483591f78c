//! Command-line interface over `copula-core`: measure reports from data or
//! copula specs, * product composition, the property suites, the tent-family
//! reference table, and sampling.
//!
//! All commands write to a caller-supplied sink so tests can capture output;
//! `main` maps [`CliError`] onto the exit-code contract (0 ok, 2 usage,
//! 3 validation, 4 property violation).

use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::Serialize;
use thiserror::Error;

use copula_core::algebra::star;
use copula_core::checkerboard::CheckerboardCopula;
use copula_core::copula::{CopulaSpec, GridConfig};
use copula_core::estimation::{
    measure_from_samples, read_csv_pairs, sample_from, write_csv_pairs, EstimationError,
    SampleSet,
};
use copula_core::measures::{measure, Direction, MeasureFamily, MeasureSpec};
use copula_core::suites::{
    bounds_suite, coset_suite, dpi_suite, invariance_suite, oracle_suite,
    sobolev_counterexample_suite, SuiteConfig, SuiteOutcome,
};

/// Errors carrying the exit-code contract.
#[derive(Debug, Error)]
pub enum CliError {
    /// Arguments are malformed or inconsistent (exit 2).
    #[error("{0}")]
    Usage(String),
    /// Inputs parse but fail validation (exit 3).
    #[error("{0}")]
    Validation(String),
    /// A checked mathematical property failed (exit 4).
    #[error("property violation: {0}")]
    Violation(String),
    #[error("{0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Validation(_) | CliError::Io(_) => 3,
            CliError::Violation(_) => 4,
        }
    }
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn validation(err: impl std::fmt::Display) -> CliError {
    CliError::Validation(err.to_string())
}

/// Estimation errors split by blame: bad argument values are usage errors,
/// bad data is a validation error.
fn estimation_error(err: EstimationError) -> CliError {
    match err {
        EstimationError::GridZero | EstimationError::GridTooFine { .. } => {
            usage(err.to_string())
        }
        other => validation(other),
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "copula",
    about = "Nonsymmetric dependence measures built on bivariate copulas",
    version
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compute a dependence measure from a CSV sample or a copula spec.
    Measure(MeasureArgs),
    /// Compose two copulas with the * product and write the checkerboard.
    Star(StarArgs),
    /// Run seeded property suites and report violations.
    Props(PropsArgs),
    /// Reproduce the tent-family reference table with closed-form targets.
    Table(TableArgs),
    /// Draw seeded pseudo-observations from a copula spec.
    Sample(SampleArgs),
}

/// How `--direction` maps onto computed reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DirectionArg {
    /// Dependence of Y on X.
    Xy,
    /// Dependence of X on Y.
    Yx,
    /// Both directions in one report.
    Both,
}

impl DirectionArg {
    fn directions(self) -> Vec<Direction> {
        match self {
            DirectionArg::Xy => vec![Direction::XY],
            DirectionArg::Yx => vec![Direction::YX],
            DirectionArg::Both => vec![Direction::XY, Direction::YX],
        }
    }
}

#[derive(Debug, Args)]
pub struct MeasureArgs {
    /// CSV file with one (x, y) pair per row; exclusive with --copula.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Copula spec: pi | m | w | tent:<theta> | file:<path> |
    /// transpose(<spec>) | flipy(<spec>) | mix:<w1>,<spec1>;<w2>,<spec2>
    #[arg(long)]
    pub copula: Option<String>,
    /// Measure id, e.g. tau1, tau2, tau_alpha:1.5, sobolev, sw_sigma,
    /// ns_shannon, gns_renyi:1.5:0, copula_distance:2, shannon_mi.
    #[arg(long)]
    pub measure: String,
    #[arg(long, value_enum, default_value_t = DirectionArg::Both)]
    pub direction: DirectionArg,
    /// Quadrature resolution (spec input) or estimator grid (CSV input).
    #[arg(long)]
    pub grid: Option<usize>,
    /// Seed for the bootstrap resampler.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Number of bootstrap replicates for a standard error (CSV input only).
    #[arg(long)]
    pub bootstrap: Option<usize>,
    /// Rescale near-copula file inputs to exact uniform margins.
    #[arg(long)]
    pub normalize: bool,
}

#[derive(Debug, Args)]
pub struct StarArgs {
    /// Left factor (copula spec grammar as in `measure --copula`).
    #[arg(long)]
    pub left: String,
    /// Right factor.
    #[arg(long)]
    pub right: String,
    /// Output checkerboard resolution.
    #[arg(long, default_value_t = 512)]
    pub grid: usize,
    /// Destination file for the product checkerboard.
    #[arg(long)]
    pub out: PathBuf,
    /// Rescale near-copula file inputs to exact uniform margins.
    #[arg(long)]
    pub normalize: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SuiteArg {
    Dpi,
    Coset,
    Invariance,
    Bounds,
    SobolevCounterexample,
    Oracle,
    All,
}

#[derive(Debug, Args)]
pub struct PropsArgs {
    #[arg(long, value_enum)]
    pub suite: SuiteArg,
    /// Random checkerboard pairs (or boards) per suite.
    #[arg(long, default_value_t = 1000)]
    pub trials: usize,
    /// Checkerboard resolution for the random boards.
    #[arg(long, default_value_t = 16)]
    pub n: usize,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct TableArgs {
    /// Comma-separated tent parameters in [0, 1].
    #[arg(long, default_value = "0,0.25,0.5,0.75,1")]
    pub theta: String,
    /// Quadrature resolution per measure.
    #[arg(long, default_value_t = 512)]
    pub grid: usize,
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    /// Copula spec to sample from.
    #[arg(long)]
    pub copula: String,
    /// Number of pairs to draw.
    #[arg(short = 'm')]
    pub count: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Destination CSV; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Rescale near-copula file inputs to exact uniform margins.
    #[arg(long)]
    pub normalize: bool,
}

/// Parse the copula spec grammar. `normalize` applies to `file:` inputs.
pub fn parse_copula_arg(text: &str, normalize: bool) -> Result<CopulaSpec<f64>, CliError> {
    let t = text.trim();
    match t {
        "pi" => return Ok(CopulaSpec::Independence),
        "m" => return Ok(CopulaSpec::UpperBound),
        "w" => return Ok(CopulaSpec::LowerBound),
        _ => {}
    }
    if let Some(rest) = t.strip_prefix("tent:") {
        let theta: f64 = rest
            .parse()
            .map_err(|_| usage(format!("tent parameter {rest:?} is not a number")))?;
        return CopulaSpec::tent(theta).map_err(|e| usage(e.to_string()));
    }
    if let Some(path) = t.strip_prefix("file:") {
        let contents = fs::read_to_string(path)?;
        let board = CheckerboardCopula::parse(&contents, normalize).map_err(validation)?;
        return Ok(CopulaSpec::Checkerboard(board));
    }
    if let Some(inner) = t.strip_prefix("transpose(").and_then(|r| r.strip_suffix(')')) {
        return Ok(parse_copula_arg(inner, normalize)?.transpose());
    }
    if let Some(inner) = t.strip_prefix("flipy(").and_then(|r| r.strip_suffix(')')) {
        return Ok(parse_copula_arg(inner, normalize)?.flip_y());
    }
    if let Some(rest) = t.strip_prefix("mix:") {
        let mut weights = Vec::new();
        let mut parts = Vec::new();
        for component in rest.split(';') {
            let (w, spec) = component.split_once(',').ok_or_else(|| {
                usage(format!("mix component {component:?} is not <weight>,<spec>"))
            })?;
            let weight: f64 = w
                .trim()
                .parse()
                .map_err(|_| usage(format!("mix weight {w:?} is not a number")))?;
            weights.push(weight);
            parts.push(parse_copula_arg(spec, normalize)?);
        }
        return CopulaSpec::convex_mix(weights, parts).map_err(|e| usage(e.to_string()));
    }
    Err(usage(format!(
        "unrecognized copula spec {t:?}; expected pi, m, w, tent:<theta>, file:<path>, \
         transpose(<spec>), flipy(<spec>), or mix:<w1>,<spec1>;<w2>,<spec2>"
    )))
}

#[derive(Serialize)]
struct DirectionEntry {
    direction: &'static str,
    value: f64,
    raw_value: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    bootstrap_stderr: Option<f64>,
}

#[derive(Serialize)]
struct MeasureJson {
    measure: String,
    grid: usize,
    path: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    m: Option<usize>,
    results: Vec<DirectionEntry>,
}

pub fn cmd_measure(args: &MeasureArgs, out: &mut impl Write) -> Result<(), CliError> {
    let family: MeasureFamily<f64> =
        MeasureFamily::parse(&args.measure).map_err(|e| usage(e.to_string()))?;
    let directions = args.direction.directions();
    let quad_n = args.grid.unwrap_or_else(|| GridConfig::<f64>::default().quad_n);
    let cfg = GridConfig::new(quad_n, GridConfig::<f64>::default().fd_step)
        .map_err(|e| usage(e.to_string()))?;

    let json = match (&args.input, &args.copula) {
        (Some(_), Some(_)) | (None, None) => {
            return Err(usage("provide exactly one of --input and --copula"));
        }
        (Some(path), None) => {
            let file = fs::File::open(path)?;
            let samples = read_csv_pairs::<f64>(file).map_err(estimation_error)?;
            let mut grid = 0;
            let mut path_label = "";
            let mut results = Vec::new();
            for direction in &directions {
                let mspec = MeasureSpec::new(family.clone(), *direction);
                let est = measure_from_samples(&samples, &mspec, args.grid, &cfg)
                    .map_err(estimation_error)?;
                grid = est.n;
                path_label = est.report.path.as_str();
                let bootstrap_stderr = match args.bootstrap {
                    Some(k) => Some(bootstrap_stderr(
                        &samples, &mspec, args.grid, &cfg, k, args.seed,
                    )?),
                    None => None,
                };
                results.push(DirectionEntry {
                    direction: direction.as_str(),
                    value: est.report.value,
                    raw_value: est.report.raw_value,
                    bootstrap_stderr,
                });
            }
            MeasureJson {
                measure: args.measure.clone(),
                grid,
                path: path_label,
                m: Some(samples.len()),
                results,
            }
        }
        (None, Some(text)) => {
            if args.bootstrap.is_some() {
                return Err(usage("--bootstrap needs sample data; use --input"));
            }
            let spec = parse_copula_arg(text, args.normalize)?;
            let mut grid = 0;
            let mut path_label = "";
            let mut results = Vec::new();
            for direction in &directions {
                let mspec = MeasureSpec::new(family.clone(), *direction);
                let report = measure(&spec, &mspec, &cfg).map_err(measure_error)?;
                grid = report.grid;
                path_label = report.path.as_str();
                results.push(DirectionEntry {
                    direction: direction.as_str(),
                    value: report.value,
                    raw_value: report.raw_value,
                    bootstrap_stderr: None,
                });
            }
            MeasureJson {
                measure: args.measure.clone(),
                grid,
                path: path_label,
                m: None,
                results,
            }
        }
    };
    let rendered = serde_json::to_string_pretty(&json).expect("report serializes");
    writeln!(out, "{rendered}")?;
    Ok(())
}

/// Compute-time measure failures mean the requested measure cannot apply to
/// this input (exit 3); parse/range problems are caught earlier as usage.
fn measure_error(err: copula_core::measures::MeasureError) -> CliError {
    validation(err)
}

/// Standard error of the estimate over k seeded bootstrap resamples.
fn bootstrap_stderr(
    samples: &SampleSet<f64>,
    mspec: &MeasureSpec<f64>,
    n: Option<usize>,
    cfg: &GridConfig<f64>,
    k: usize,
    seed: u64,
) -> Result<f64, CliError> {
    if k < 2 {
        return Err(usage("--bootstrap needs at least 2 replicates"));
    }
    let pairs = samples.pairs();
    let base = ChaCha12Rng::seed_from_u64(seed);
    let mut values = Vec::with_capacity(k);
    for replicate in 0..k {
        let mut rng = base.clone();
        rng.set_stream(replicate as u64 + 1);
        let resampled: Vec<(f64, f64)> = (0..pairs.len())
            .map(|_| pairs[rng.random_range(0..pairs.len())])
            .collect();
        let set = SampleSet::from_pairs(resampled).map_err(estimation_error)?;
        let est = measure_from_samples(&set, mspec, n, cfg).map_err(estimation_error)?;
        values.push(est.report.value);
    }
    let mean = values.iter().sum::<f64>() / k as f64;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (k - 1) as f64;
    Ok(var.max(0.0).sqrt())
}

pub fn cmd_star(args: &StarArgs, out: &mut impl Write) -> Result<(), CliError> {
    let left = parse_copula_arg(&args.left, args.normalize)?;
    let right = parse_copula_arg(&args.right, args.normalize)?;
    let cfg = GridConfig::new(args.grid, GridConfig::<f64>::default().fd_step)
        .map_err(|e| usage(e.to_string()))?;
    let product = star(&left, &right, &cfg);
    let board = match product {
        CopulaSpec::Checkerboard(board) => board,
        other => {
            return Err(CliError::Violation(format!(
                "* product did not materialize a checkerboard: {other:?}"
            )));
        }
    };
    fs::write(&args.out, board.to_text())?;
    writeln!(
        out,
        "wrote {n} x {n} checkerboard to {path}",
        n = board.n(),
        path = args.out.display()
    )?;
    Ok(())
}

pub fn cmd_props(args: &PropsArgs, out: &mut impl Write) -> Result<i32, CliError> {
    if args.trials == 0 {
        return Err(usage("--trials must be positive"));
    }
    if args.n < 2 {
        return Err(usage("--n must be at least 2"));
    }
    let cfg = SuiteConfig {
        trials: args.trials,
        n: args.n,
        seed: args.seed,
        grid: GridConfig::default(),
    };
    let outcomes: Vec<SuiteOutcome> = match args.suite {
        SuiteArg::Dpi => vec![dpi_suite(&cfg)],
        SuiteArg::Coset => vec![coset_suite(&cfg)],
        SuiteArg::Invariance => vec![invariance_suite(&cfg)],
        SuiteArg::Bounds => vec![bounds_suite(&cfg)],
        SuiteArg::SobolevCounterexample => vec![sobolev_counterexample_suite(&cfg)],
        SuiteArg::Oracle => vec![oracle_suite(&cfg)],
        SuiteArg::All => vec![
            dpi_suite(&cfg),
            sobolev_counterexample_suite(&cfg),
            coset_suite(&cfg),
            invariance_suite(&cfg),
            bounds_suite(&cfg),
            oracle_suite(&cfg),
        ],
    };
    for outcome in &outcomes {
        write!(out, "{outcome}")?;
    }
    Ok(if outcomes.iter().all(|o| o.status.is_success()) {
        0
    } else {
        4
    })
}

pub fn cmd_table(args: &TableArgs, out: &mut impl Write) -> Result<(), CliError> {
    let mut thetas = Vec::new();
    for token in args.theta.split(',') {
        let theta: f64 = token
            .trim()
            .parse()
            .map_err(|_| usage(format!("theta {token:?} is not a number")))?;
        if !(0.0..=1.0).contains(&theta) {
            return Err(usage(format!("theta {theta} is outside [0, 1]")));
        }
        thetas.push(theta);
    }
    let cfg = GridConfig::new(args.grid, GridConfig::<f64>::default().fd_step)
        .map_err(|e| usage(e.to_string()))?;
    let value = |spec: &CopulaSpec<f64>, id: &str| -> Result<f64, CliError> {
        let family: MeasureFamily<f64> = MeasureFamily::parse(id).expect("builtin id");
        measure(spec, &MeasureSpec::new(family, Direction::XY), &cfg)
            .map(|r| r.value)
            .map_err(measure_error)
    };
    writeln!(
        out,
        "tent family: targets are tau1(C) = tau2(C) = 1, \
         tau1(CT) = theta^2 + (1-theta)^2, tau2(CT) = sqrt(3(theta-1/2)^2 + 1/4)"
    )?;
    writeln!(
        out,
        "{:>6} {:>9} {:>8} {:>9} {:>8} {:>9} {:>9} {:>8} {:>9} {:>9} {:>8}",
        "theta",
        "tau1(C)",
        "err",
        "tau2(C)",
        "err",
        "tau1(CT)",
        "target",
        "err",
        "tau2(CT)",
        "target",
        "err"
    )?;
    for &theta in &thetas {
        let c = CopulaSpec::tent(theta).map_err(|e| usage(e.to_string()))?;
        let ct = c.clone().transpose();
        let tau1 = value(&c, "tau1")?;
        let tau2 = value(&c, "tau2")?;
        let tau1_t = value(&ct, "tau1")?;
        let tau2_t = value(&ct, "tau2")?;
        let target1_t = theta * theta + (1.0 - theta) * (1.0 - theta);
        let target2_t = (3.0 * (theta - 0.5) * (theta - 0.5) + 0.25).sqrt();
        let mut row = String::new();
        write!(row, "{theta:>6.3}").unwrap();
        write!(row, " {tau1:>9.6} {:>8.1e}", (tau1 - 1.0).abs()).unwrap();
        write!(row, " {tau2:>9.6} {:>8.1e}", (tau2 - 1.0).abs()).unwrap();
        write!(row, " {tau1_t:>9.6} {target1_t:>9.6} {:>8.1e}", (tau1_t - target1_t).abs())
            .unwrap();
        write!(row, " {tau2_t:>9.6} {target2_t:>9.6} {:>8.1e}", (tau2_t - target2_t).abs())
            .unwrap();
        writeln!(out, "{row}")?;
    }
    Ok(())
}

pub fn cmd_sample(args: &SampleArgs, out: &mut impl Write) -> Result<(), CliError> {
    if args.count == 0 {
        return Err(usage("-m must be positive"));
    }
    let spec = parse_copula_arg(&args.copula, args.normalize)?;
    let samples = sample_from(&spec, args.count, args.seed);
    match &args.out {
        Some(path) => {
            let mut buffer = Vec::new();
            write_csv_pairs(&mut buffer, &samples).map_err(estimation_error)?;
            fs::write(path, buffer)?;
            writeln!(out, "wrote {} pairs to {}", samples.len(), path.display())?;
        }
        None => {
            let mut buffer = Vec::new();
            write_csv_pairs(&mut buffer, &samples).map_err(estimation_error)?;
            out.write_all(&buffer)?;
        }
    }
    Ok(())
}

/// Dispatch a parsed command line; returns the process exit code.
pub fn run(cli: &Cli, out: &mut impl Write) -> Result<i32, CliError> {
    match &cli.command {
        Command::Measure(args) => cmd_measure(args, out).map(|_| 0),
        Command::Star(args) => cmd_star(args, out).map(|_| 0),
        Command::Props(args) => cmd_props(args, out),
        Command::Table(args) => cmd_table(args, out).map(|_| 0),
        Command::Sample(args) => cmd_sample(args, out).map(|_| 0),
    }
}
