use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;
use serde::Serialize;

use nnmcert::certify::{
    certify_operator, diagonal_embedding, l1_weak_value, oymak_value, prepare_ground_truth, CertifyOptions,
};
use nnmcert::counterexample::{run_counterexample, summary_path, GridSpec};
use nnmcert::lemmas::{run_suites, LemmaSuites};
use nnmcert::operator::{MeasurementOperator, Measurements};
use nnmcert::solver::{solve_nnm, Method, SolverOptions};
use nnmcert::sweep::{run_sweep, SweepConfig};
use nnmcert::{Error, Matrix, Result};

#[derive(Parser)]
#[command(
    name = "nnmcert",
    version,
    about = "Uniqueness certificates for nuclear norm minimization"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Certify that X is the unique nuclear-norm minimizer for an operator.
    Certify(CertifyArgs),
    /// Solve min ||Y||_* subject to A(Y) = b.
    Solve(SolveArgs),
    /// Reproduce the 2x2 counterexample curve.
    Counterexample(CounterexampleArgs),
    /// Run the randomized lemma suites.
    Lemmas(LemmasArgs),
    /// Cross-check certificates against the solver on random instances.
    Sweep(SweepArgs),
    /// Evaluate the l1 condition value and its diagonal-embedding counterpart.
    L1check(L1Args),
}

#[derive(Args)]
struct CertifyArgs {
    #[arg(long)]
    truth: PathBuf,
    #[arg(long)]
    operator: PathBuf,
    #[arg(long)]
    report: PathBuf,
    #[arg(long)]
    band: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    starts: Option<usize>,
    #[arg(long)]
    iterations: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Splitting,
    Subgradient,
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long)]
    operator: PathBuf,
    #[arg(long)]
    b: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum)]
    method: Option<MethodArg>,
    /// Solver options as JSON; explicit flags take precedence.
    #[arg(long)]
    options: Option<PathBuf>,
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long)]
    restarts: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum FieldArg {
    Real,
    Complex,
}

#[derive(Args)]
struct CounterexampleArgs {
    #[arg(long, value_enum)]
    field: FieldArg,
    #[arg(long, allow_hyphen_values = true)]
    t_min: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    t_max: Option<f64>,
    #[arg(long)]
    step: Option<f64>,
    #[arg(long)]
    a_max: Option<f64>,
    #[arg(long)]
    a_step: Option<f64>,
    /// Angular step in radians.
    #[arg(long)]
    theta_step: Option<f64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct LemmasArgs {
    #[arg(long, default_value_t = 1000)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    r: usize,
    #[arg(long, value_delimiter = ',', required = true)]
    m_list: Vec<usize>,
    #[arg(long)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    report: PathBuf,
}

#[derive(Args)]
struct L1Args {
    /// JSON array of numbers.
    #[arg(long)]
    x: PathBuf,
    /// JSON array of numbers.
    #[arg(long)]
    y: PathBuf,
    /// Comma-separated 0-based support indices.
    #[arg(long = "K", value_delimiter = ',', num_args = 0..)]
    k: Vec<usize>,
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

fn certify(args: CertifyArgs) -> Result<String> {
    let x: Matrix = read_json(&args.truth)?;
    let op: MeasurementOperator = read_json(&args.operator)?;
    let defaults = CertifyOptions::default();
    let opts = CertifyOptions {
        band: args.band,
        starts: args.starts.unwrap_or(defaults.starts),
        iterations: args.iterations.unwrap_or(defaults.iterations),
        seed: args.seed.unwrap_or(defaults.seed),
    };
    let cert = certify_operator(&x, &op, &opts)?;
    write_json(&args.report, &cert)?;
    Ok(format!("status {:?}, mode {:?}", cert.status, cert.mode))
}

fn solve(args: SolveArgs) -> Result<String> {
    let op: MeasurementOperator = read_json(&args.operator)?;
    let b: Measurements = read_json(&args.b)?;
    let mut opts: SolverOptions = match &args.options {
        Some(p) => read_json(p)?,
        None => SolverOptions::default(),
    };
    if let Some(m) = args.method {
        opts.method = match m {
            MethodArg::Splitting => Method::Splitting,
            MethodArg::Subgradient => Method::Subgradient,
        };
    }
    opts.max_iter = args.max_iter.unwrap_or(opts.max_iter);
    opts.restarts = args.restarts.unwrap_or(opts.restarts);
    opts.seed = args.seed.unwrap_or(opts.seed);
    let result = solve_nnm(&op, &b, &opts)?;
    write_json(&args.out, &result)?;
    Ok(format!(
        "objective {:e}, converged {}",
        result.objective, result.converged
    ))
}

fn counterexample(args: CounterexampleArgs) -> Result<String> {
    let grid = match args.field {
        FieldArg::Real => {
            if args.a_max.is_some() || args.a_step.is_some() || args.theta_step.is_some() {
                return Err(Error::Parse(
                    "--a-max, --a-step and --theta-step need --field complex".into(),
                ));
            }
            let GridSpec::Real { t_min, t_max, step } = GridSpec::real_default() else {
                unreachable!()
            };
            GridSpec::Real {
                t_min: args.t_min.unwrap_or(t_min),
                t_max: args.t_max.unwrap_or(t_max),
                step: args.step.unwrap_or(step),
            }
        }
        FieldArg::Complex => {
            if args.t_min.is_some() || args.t_max.is_some() || args.step.is_some() {
                return Err(Error::Parse("--t-min, --t-max and --step need --field real".into()));
            }
            GridSpec::Complex {
                a_max: args.a_max.unwrap_or(2.0),
                a_step: args.a_step.unwrap_or(0.05),
                theta_step: args.theta_step.unwrap_or(PI / 16.0),
            }
        }
    };
    let table = run_counterexample(&grid)?;
    table.write(&args.out)?;
    Ok(format!(
        "{} samples, max abs err {:e}, summary {}",
        table.samples.len(),
        table.summary.max_abs_err,
        summary_path(&args.out).display()
    ))
}

#[derive(Serialize)]
struct SuiteViolation<'a> {
    suite: &'static str,
    trial: usize,
    seed: u64,
    detail: &'a str,
}

#[derive(Serialize)]
struct LemmaReport<'a> {
    trials: usize,
    seed: u64,
    passed: bool,
    violations: Vec<SuiteViolation<'a>>,
    suites: &'a LemmaSuites,
}

fn lemmas(args: LemmasArgs) -> Result<String> {
    let suites = run_suites(args.trials, args.seed)?;
    let named = [
        ("lemma1", &suites.lemma1),
        ("lemma2_forward", &suites.lemma2_forward),
        ("lemma2_reverse", &suites.lemma2_reverse),
        ("lemma3", &suites.lemma3),
        ("lemma3_biconditional", &suites.lemma3_biconditional),
        ("dual_witness", &suites.dual_witness),
    ];
    let violations: Vec<SuiteViolation> = named
        .iter()
        .flat_map(|(suite, r)| {
            r.violations.iter().map(move |v| SuiteViolation {
                suite,
                trial: v.trial,
                seed: v.seed,
                detail: &v.detail,
            })
        })
        .collect();
    let count = violations.len();
    let report = LemmaReport {
        trials: args.trials,
        seed: args.seed,
        passed: suites.passed(),
        violations,
        suites: &suites,
    };
    match &args.report {
        Some(p) => write_json(p, &report)?,
        None => println!("{}", serde_json::to_string_pretty(&report)?),
    }
    Ok(format!("{count} violations"))
}

fn sweep(args: SweepArgs) -> Result<String> {
    let cfg = SweepConfig::new(args.n, args.r, args.m_list, args.trials, args.seed);
    let report = run_sweep(&cfg)?;
    write_json(&args.report, &report)?;
    Ok(format!(
        "agreement {}/{} ({:.4}), {} band-edge",
        report.agreed, report.counted, report.agreement_rate, report.band_edge
    ))
}

#[derive(Serialize)]
struct L1Check {
    l1_value: f64,
    matrix_value: f64,
    abs_diff: f64,
}

fn l1check(args: L1Args) -> Result<String> {
    let x: Vec<f64> = read_json(&args.x)?;
    let y: Vec<f64> = read_json(&args.y)?;
    let l1_value = l1_weak_value(&x, &args.k, &y)?;
    let matrix_value = oymak_value(&prepare_ground_truth(&diagonal_embedding(&x))?, &diagonal_embedding(&y))?;
    let check = L1Check {
        l1_value,
        matrix_value,
        abs_diff: (l1_value - matrix_value).abs(),
    };
    println!("{}", serde_json::to_string(&check)?);
    Ok(String::new())
}

fn run(command: Command) -> (&'static str, Result<String>) {
    match command {
        Command::Certify(a) => ("certify", certify(a)),
        Command::Solve(a) => ("solve", solve(a)),
        Command::Counterexample(a) => ("counterexample", counterexample(a)),
        Command::Lemmas(a) => ("lemmas", lemmas(a)),
        Command::Sweep(a) => ("sweep", sweep(a)),
        Command::L1check(a) => ("l1check", l1check(a)),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let msg = e.to_string();
            let first = msg
                .lines()
                .next()
                .unwrap_or("invalid arguments")
                .trim_start_matches("error: ");
            eprintln!("error: usage: {first}");
            return ExitCode::from(2);
        }
    };
    let started = Instant::now();
    let (name, outcome) = run(cli.command);
    match outcome {
        Ok(summary) => {
            let ts = SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0);
            let sep = if summary.is_empty() { "" } else { " " };
            eprintln!(
                "log: ts={ts} cmd={name} elapsed_ms={}{sep}{summary}",
                started.elapsed().as_millis()
            );
            ExitCode::SUCCESS
        }
        Err(e) => {
            let msg = e.to_string().replace('\n', " ");
            eprintln!("error: {}: {msg}", e.kind());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
