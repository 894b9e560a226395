//! Command-line front end. All logic lives in the library; this binary
//! parses flags, loads configs, and prints reports as key-value text.
//!
//! Exit codes: 0 success, 1 usage, 2 condition failed, 3 result not
//! certified, 4 runtime error.

use clap::{Args, Parser, Subcommand};
use robust_sense::aggregators::{AggregationRule, BaselineXSchedule, Wrapper};
use robust_sense::error::Error;
use robust_sense::estimator::{BoundStatement, Mode};
use robust_sense::harness::{self, ExperimentConfig, Method};
use robust_sense::linalg::{read_matrix, read_vector};
use robust_sense::recover::{
    check_a2_prime, compute_eta_exact, compute_eta_multistart, l1_fit, PartialStructure,
};
use robust_sense::rng::RandomSource;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "robust-sense",
    version,
    about = "Robust distributed mean estimation laboratory"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Certify the recoverability margin of a sensing matrix.
    CheckNsp(CheckNspArgs),
    /// Run the two-timescale estimator from an experiment config.
    RunEstimator(RunArgs),
    /// Run a robust-aggregation baseline from an experiment config.
    RunBaselines(RunBaselinesArgs),
    /// Run several configs on one problem and rank the methods.
    Compare(CompareArgs),
    /// Check the partial-recovery condition and fit the recoverable
    /// component by exact l1 minimization.
    RecoverPartial(RecoverPartialArgs),
    /// End-to-end demo on the bundled tomography network.
    TomographyDemo(TomographyArgs),
}

#[derive(Args)]
struct CheckNspArgs {
    /// Sensing matrix file (one row per line).
    #[arg(long)]
    matrix: PathBuf,
    /// Adversary budget.
    #[arg(long)]
    m: usize,
    /// Force exact enumeration (errors on oversize instances).
    #[arg(long, conflicts_with = "multistart")]
    exact: bool,
    /// Force the multistart upper bound.
    #[arg(long)]
    multistart: bool,
    /// Multistart restarts.
    #[arg(long, default_value_t = 200)]
    starts: usize,
    /// Multistart seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct RunArgs {
    /// Experiment config file.
    #[arg(long)]
    problem: PathBuf,
    #[arg(long)]
    mode: Option<String>,
    /// Rate-statement schedule: s1 | s2 | s3.
    #[arg(long)]
    schedule: Option<String>,
    #[arg(long)]
    n: Option<u64>,
    #[arg(long)]
    r: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<u64>,
    /// Output CSV path (overrides the config).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RunBaselinesArgs {
    #[command(flatten)]
    run: RunArgs,
    /// krum | cm | ctm | rfa | rage-approx.
    #[arg(long)]
    rule: Option<String>,
    /// none | bucketing | buffered.
    #[arg(long)]
    wrapper: Option<String>,
    /// Bucket/buffer size.
    #[arg(long)]
    s: Option<usize>,
    /// sqrt | pow09.
    #[arg(long = "schedule-x")]
    schedule_x: Option<String>,
}

#[derive(Args)]
struct CompareArgs {
    /// Directory for per-method plot series.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Experiment configs sharing one problem and horizon.
    #[arg(required = true)]
    configs: Vec<PathBuf>,
}

#[derive(Args)]
struct RecoverPartialArgs {
    /// Sensing matrix file.
    #[arg(long)]
    matrix: PathBuf,
    /// Recoverable-component basis (d x r).
    #[arg(long)]
    u: PathBuf,
    /// Complementary-component basis (d x s).
    #[arg(long)]
    v: PathBuf,
    /// Observation vector to fit (optional; checks the condition only
    /// when absent).
    #[arg(long)]
    y: Option<PathBuf>,
    /// Corruption sparsity budget.
    #[arg(long)]
    q: usize,
}

#[derive(Args)]
struct TomographyArgs {
    #[arg(long, default_value_t = 10_000)]
    n: u64,
    #[arg(long, default_value_t = 10)]
    trials: u64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::RecoverabilityFailure { .. } => 2,
        Error::TooLargeForExact { .. } | Error::LpNotCertified(_) => 3,
        _ => 4,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap prints help/version through the error path too
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => {
                    ExitCode::SUCCESS
                }
                _ => ExitCode::from(1),
            };
        }
    };
    match dispatch(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}

fn dispatch(cli: Cli) -> Result<u8, Error> {
    match cli.command {
        Command::CheckNsp(args) => check_nsp(args),
        Command::RunEstimator(args) => run_estimator(args),
        Command::RunBaselines(args) => run_baselines(args),
        Command::Compare(args) => compare(args),
        Command::RecoverPartial(args) => recover_partial(args),
        Command::TomographyDemo(args) => tomography(args),
    }
}

fn print_vector(name: &str, v: &ndarray::Array1<f64>) {
    let cells: Vec<String> = v.iter().map(|x| format!("{x}")).collect();
    println!("{name} = {}", cells.join(" "));
}

fn check_nsp(args: CheckNspArgs) -> Result<u8, Error> {
    let a = read_matrix(&args.matrix)?;
    let report = if args.multistart {
        compute_eta_multistart(&a, args.m, args.starts, &RandomSource::new(args.seed))?
    } else if args.exact {
        compute_eta_exact(&a, args.m)?
    } else {
        robust_sense::recover::compute_eta(&a, args.m)?
    };
    println!("matrix = {}", args.matrix.display());
    println!("workers = {}", a.nrows());
    println!("dimension = {}", a.ncols());
    println!("budget = {}", args.m);
    println!(
        "method = {}",
        match report.method {
            robust_sense::recover::EtaMethod::ExactEnumeration => "exact-enumeration",
            robust_sense::recover::EtaMethod::Multistart => "multistart",
        }
    );
    println!("eta = {}", report.eta);
    println!("k = {}", report.k);
    println!("holds_a2 = {}", report.holds_a2);
    println!("certified = {}", report.certified());
    if let Some(w) = &report.witness {
        let subset: Vec<String> = w.subset.iter().map(|j| j.to_string()).collect();
        println!("witness_subset = {}", subset.join(" "));
        print_vector("witness_direction", &w.direction);
    }
    Ok(if !report.holds_a2 {
        2
    } else if !report.certified() {
        3
    } else {
        0
    })
}

fn apply_run_overrides(cfg: &mut ExperimentConfig, args: &RunArgs) -> Result<(), Error> {
    if let Some(mode) = &args.mode {
        cfg.mode = match mode.as_str() {
            "sync" => Mode::Sync,
            "async" => Mode::Async,
            other => {
                return Err(Error::InvalidArgument(format!(
                    "--mode {other:?} is not sync|async"
                )))
            }
        };
    }
    if let Some(n) = args.n {
        cfg.n = n;
    }
    if let Some(r) = args.r {
        cfg.r = r;
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(trials) = args.trials {
        cfg.trials = trials;
    }
    if let Some(out) = &args.out {
        cfg.output = Some(out.clone());
    }
    Ok(())
}

fn parse_statement(s: &str) -> Result<BoundStatement, Error> {
    Ok(match s {
        "s1" => BoundStatement::ConstConst,
        "s2" => BoundStatement::ConstDecay,
        "s3" => BoundStatement::DecayDecay,
        other => {
            return Err(Error::InvalidArgument(format!(
                "--schedule {other:?} is not s1|s2|s3"
            )))
        }
    })
}

fn print_report(report: &harness::RunReport, cfg: &ExperimentConfig) {
    println!("label = {}", report.label);
    println!("attack = {}", report.attack_label);
    println!("trials = {}", cfg.trials);
    println!("n = {}", cfg.n);
    if let Some(rep) = &report.eta_report {
        println!("eta = {}", rep.eta);
        println!("k = {}", rep.k);
    }
    println!(
        "final_f_tail = {} (se {})",
        report.final_f_tail_mean, report.final_f_tail_se
    );
    println!(
        "final_err = {} (se {})",
        report.final_err_mean, report.final_err_se
    );
    if let Some(fit) = &report.slope {
        println!("slope = {} (rms residual {})", fit.slope, fit.rms_residual);
    }
    for note in &report.notes {
        println!("note = {note}");
    }
    if let Some(out) = &cfg.output {
        println!("csv = {}", out.display());
    }
}

fn run_estimator(args: RunArgs) -> Result<u8, Error> {
    let mut cfg = harness::load_config(&args.problem)?;
    let statement = match (&args.schedule, &cfg.method) {
        (Some(s), _) => parse_statement(s)?,
        (None, Method::Estimator { statement }) => *statement,
        (None, _) => BoundStatement::DecayDecay,
    };
    cfg.method = Method::Estimator { statement };
    apply_run_overrides(&mut cfg, &args)?;
    let report = harness::run_experiment(&cfg)?;
    print_report(&report, &cfg);
    Ok(0)
}

fn run_baselines(args: RunBaselinesArgs) -> Result<u8, Error> {
    let mut cfg = harness::load_config(&args.run.problem)?;
    let (mut rule, mut wrapper, mut schedule_x) = match &cfg.method {
        Method::Baseline {
            rule,
            wrapper,
            schedule_x,
        } => (*rule, *wrapper, *schedule_x),
        Method::Estimator { .. } => (
            AggregationRule::CoordinateMedian,
            Wrapper::None,
            BaselineXSchedule::Sqrt,
        ),
    };
    if let Some(r) = &args.rule {
        rule = AggregationRule::parse(r)?;
    }
    let s = args.s.unwrap_or(match wrapper {
        Wrapper::Bucketing { s } | Wrapper::Buffered { s } => s,
        Wrapper::None => 3,
    });
    if let Some(w) = &args.wrapper {
        wrapper = match w.as_str() {
            "none" => Wrapper::None,
            "bucketing" => Wrapper::Bucketing { s },
            "buffered" => Wrapper::Buffered { s },
            other => {
                return Err(Error::InvalidArgument(format!(
                    "--wrapper {other:?} is not none|bucketing|buffered"
                )))
            }
        };
    } else if args.s.is_some() {
        wrapper = match wrapper {
            Wrapper::Bucketing { .. } => Wrapper::Bucketing { s },
            Wrapper::Buffered { .. } => Wrapper::Buffered { s },
            Wrapper::None => Wrapper::None,
        };
    }
    if let Some(x) = &args.schedule_x {
        schedule_x = match x.as_str() {
            "sqrt" => BaselineXSchedule::Sqrt,
            "pow09" => BaselineXSchedule::Pow09,
            other => {
                return Err(Error::InvalidArgument(format!(
                    "--schedule-x {other:?} is not sqrt|pow09"
                )))
            }
        };
    }
    cfg.method = Method::Baseline {
        rule,
        wrapper,
        schedule_x,
    };
    apply_run_overrides(&mut cfg, &args.run)?;
    let report = harness::run_experiment(&cfg)?;
    print_report(&report, &cfg);
    Ok(0)
}

fn compare(args: CompareArgs) -> Result<u8, Error> {
    let configs: Vec<ExperimentConfig> = args
        .configs
        .iter()
        .map(|p| harness::load_config(p))
        .collect::<Result<_, _>>()?;
    let report = harness::compare_methods(&configs, args.out_dir.as_deref())?;
    println!("rank,label,final_err,final_err_se,final_f_tail,final_f_tail_se");
    for (i, row) in report.rows.iter().enumerate() {
        println!(
            "{},{},{},{},{},{}",
            i + 1,
            row.label,
            row.final_err_mean,
            row.final_err_se,
            row.final_f_tail_mean,
            row.final_f_tail_se
        );
    }
    Ok(0)
}

fn recover_partial(args: RecoverPartialArgs) -> Result<u8, Error> {
    let a = read_matrix(&args.matrix)?;
    let u = read_matrix(&args.u)?;
    let v = read_matrix(&args.v)?;
    let structure = PartialStructure::new(u.clone(), v.clone(), args.q)?;
    let report = check_a2_prime(&a, &structure)?;
    println!("condition = partial-recovery");
    println!("q = {}", args.q);
    println!("holds = {}", report.holds);
    println!("certified = {}", report.certified);
    println!("margin = {}", report.margin);
    if !report.holds {
        let subset: Vec<String> = report.witness_subset.iter().map(|j| j.to_string()).collect();
        println!("witness_subset = {}", subset.join(" "));
        print_vector("witness_alpha", &report.witness_alpha);
    }
    if let Some(y_path) = &args.y {
        let y = read_vector(y_path)?;
        let fit = l1_fit(&a, &u, &v, &y)?;
        print_vector("alpha_hat", &fit.alpha);
        print_vector("beta_hat", &fit.beta);
        println!("residual = {}", fit.residual);
    }
    Ok(if !report.holds {
        2
    } else if !report.certified {
        3
    } else {
        0
    })
}

fn tomography(args: TomographyArgs) -> Result<u8, Error> {
    let report = harness::tomography_demo(args.n, args.trials, args.seed, args.sigma)?;
    println!("composed_matches_bundled = true");
    println!("eta = {}", report.eta.eta);
    println!("k = {}", report.eta.k);
    println!("holds_a2 = {}", report.eta.holds_a2);
    println!("initial_err = {}", report.initial_err);
    for (g, e) in &report.checkpoints {
        println!("theta_err[{g}] = {e}");
    }
    println!("final_initial_ratio = {}", report.final_initial_ratio);
    print_vector("link_errors", &report.link_errors);
    Ok(0)
}
