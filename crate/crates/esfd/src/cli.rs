//! Command-line front end: parse a sweep, run it, emit long-format CSV.
//!
//! One schema serves every command: `experiment,n,sigma,lambda,trials,
//! seed,metric,value` with one row per metric per grid point. Floats are
//! rendered with 17 significant digits so the CSV round-trips to the
//! exact binary values, and identical invocations produce byte-identical
//! output at any `--threads` setting.
//!
//! Exit codes: 0 success, 2 usage/validation, 3 I/O, 4 selftest failure.

use std::io::Write;
use std::path::PathBuf;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

use crate::error::{Error, Result};
use crate::experiments::{id, run_experiment, ExperimentRecord, SweepPlan, ThetaSpec};
use crate::objectives::{ObjectiveSpec, OBJECTIVE_NAMES};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_IO: i32 = 3;
pub const EXIT_SELFTEST: i32 = 4;

#[derive(Parser, Debug)]
#[command(
    name = "esfd",
    about = "Evolution-strategies and finite-difference gradient estimator experiments",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Empirical vs exact statistics of the perturbation norm.
    NormStats(SweepArgs),
    /// Exact Gamma ratios against their first-order expansion.
    GammaCheck(SweepArgs),
    /// Distribution of the difference between the central sum and ES.
    GradDiff(SweepArgs),
    /// Agreement of the scaled-FD and central-sum estimates across dimensions.
    ConvergeDim(SweepArgs),
    /// Sphere-shell geometry of high-dimensional Gaussian samples.
    Shell(SweepArgs),
    /// Paired ES/FD gradient descent from one center and one noise stream.
    Optimize(SweepArgs),
    /// Closed-form and algebraic identity checks; nonzero exit on failure.
    Selftest,
}

#[derive(Args, Debug, Default)]
struct SweepArgs {
    /// Problem dimension n.
    #[arg(long, conflicts_with = "dim_grid")]
    dim: Option<usize>,
    /// Comma-separated dimension grid.
    #[arg(long, value_delimiter = ',')]
    dim_grid: Option<Vec<usize>>,
    /// Perturbation scale sigma.
    #[arg(long, conflicts_with = "sigma_grid")]
    sigma: Option<f64>,
    /// Comma-separated sigma grid.
    #[arg(long, value_delimiter = ',')]
    sigma_grid: Option<Vec<f64>>,
    /// Population size lambda.
    #[arg(long, conflicts_with = "lambda_grid")]
    lambda: Option<usize>,
    /// Comma-separated lambda grid.
    #[arg(long, value_delimiter = ',')]
    lambda_grid: Option<Vec<usize>>,
    /// Independent Monte Carlo trials per grid point.
    #[arg(long)]
    trials: Option<usize>,
    /// Base seed; all trial seeds derive from it.
    #[arg(long)]
    seed: Option<u64>,
    /// Objective family: constant, linear, sphere, quadratic, rosenbrock.
    #[arg(long)]
    objective: Option<String>,
    /// Center placement: "origin" or "ball:RADIUS".
    #[arg(long)]
    theta: Option<String>,
    /// Apply the conventional 1/sigma^2 factor to the ES estimate.
    #[arg(long)]
    normalize_es: bool,
    /// Gradient-descent step size (optimize).
    #[arg(long)]
    step: Option<f64>,
    /// Gradient-descent iteration count (optimize).
    #[arg(long)]
    iterations: Option<usize>,
    /// Worker thread cap; output is identical for every value.
    #[arg(long)]
    threads: Option<usize>,
    /// Write CSV here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// A validated invocation.
#[derive(Debug, Clone, PartialEq)]
pub struct CliConfig {
    pub command: CommandKind,
    pub plan: SweepPlan,
    pub out: Option<PathBuf>,
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CommandKind {
    Experiment,
    Selftest,
}

/// Parses and validates argv into a [`CliConfig`]. Every flag value is
/// checked before any computation starts.
pub fn parse_args<I, S>(argv: I) -> Result<CliConfig>
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = Cli::try_parse_from(argv).map_err(|e| Error::usage(e.to_string()))?;
    config_from_cli(cli)
}

fn config_from_cli(cli: Cli) -> Result<CliConfig> {
    let (experiment, args) = match cli.command {
        Command::NormStats(a) => (id::NORM_STATS, a),
        Command::GammaCheck(a) => (id::GAMMA_CHECK, a),
        Command::GradDiff(a) => (id::GRAD_DIFF, a),
        Command::ConvergeDim(a) => (id::CONVERGE_DIM, a),
        Command::Shell(a) => (id::SHELL, a),
        Command::Optimize(a) => (id::OPTIMIZE, a),
        Command::Selftest => {
            return Ok(CliConfig {
                command: CommandKind::Selftest,
                plan: SweepPlan::new(id::NORM_STATS),
                out: None,
                threads: None,
            })
        }
    };

    let mut plan = SweepPlan::new(experiment);

    plan.dims = grid_or_single(args.dim_grid, args.dim, 100, "--dim")?;
    plan.lambdas = grid_or_single(args.lambda_grid, args.lambda, 100, "--lambda")?;
    plan.sigmas = match (args.sigma_grid, args.sigma) {
        (Some(grid), _) => grid,
        (None, Some(s)) => vec![s],
        (None, None) => vec![1.0],
    };
    for &s in &plan.sigmas {
        if !crate::error::positive_real(s) {
            return Err(Error::usage(format!(
                "--sigma/--sigma-grid values must be positive, got {s}"
            )));
        }
    }
    if plan.dims.contains(&0) {
        return Err(Error::usage("--dim/--dim-grid values must be positive"));
    }
    if plan.lambdas.contains(&0) {
        return Err(Error::usage(
            "--lambda/--lambda-grid values must be positive",
        ));
    }

    plan.trials = args.trials.unwrap_or(100);
    if plan.trials == 0 {
        return Err(Error::usage("--trials must be positive"));
    }
    plan.base_seed = args.seed.unwrap_or(42);

    let objective_name = args.objective.unwrap_or_else(|| "sphere".to_string());
    if !OBJECTIVE_NAMES.contains(&objective_name.as_str()) {
        return Err(Error::usage(format!(
            "--objective '{objective_name}' is not one of {OBJECTIVE_NAMES:?}"
        )));
    }
    let mut spec = ObjectiveSpec::new(&objective_name, plan.dims[0]);
    if objective_name == "linear" {
        // Reproducible coefficient direction tied to the sweep seed.
        spec = spec.with_parameter("seed", plan.base_seed as f64);
    }
    plan.objective = Some(spec);

    plan.theta = match args.theta.as_deref() {
        None => ThetaSpec::RandomBall { radius: 1.0 },
        Some("origin") => ThetaSpec::Origin,
        Some(s) => match s.strip_prefix("ball:").map(str::parse::<f64>) {
            Some(Ok(radius)) if radius > 0.0 && radius.is_finite() => {
                ThetaSpec::RandomBall { radius }
            }
            _ => {
                return Err(Error::usage(format!(
                    "--theta must be 'origin' or 'ball:RADIUS' with a positive radius, got '{s}'"
                )))
            }
        },
    };

    plan.normalize_es = args.normalize_es;
    plan.step_size = args.step.unwrap_or(0.05);
    if !crate::error::positive_real(plan.step_size) {
        return Err(Error::usage("--step must be positive"));
    }
    plan.iterations = args.iterations.unwrap_or(2000);
    if plan.iterations == 0 {
        return Err(Error::usage("--iterations must be positive"));
    }

    if args.threads == Some(0) {
        return Err(Error::usage("--threads must be positive"));
    }

    Ok(CliConfig {
        command: CommandKind::Experiment,
        plan,
        out: args.out,
        threads: args.threads,
    })
}

fn grid_or_single(
    grid: Option<Vec<usize>>,
    single: Option<usize>,
    default: usize,
    flag: &str,
) -> Result<Vec<usize>> {
    match (grid, single) {
        (Some(g), _) if g.is_empty() => Err(Error::usage(format!("{flag}-grid must not be empty"))),
        (Some(g), _) => Ok(g),
        (None, Some(v)) => Ok(vec![v]),
        (None, None) => Ok(vec![default]),
    }
}

/// Renders a float with 17 significant digits (round-trippable).
pub fn format_value(v: f64) -> String {
    if v.is_nan() {
        "NaN".to_string()
    } else if v.is_infinite() {
        if v > 0.0 { "inf" } else { "-inf" }.to_string()
    } else {
        format!("{v:.16e}")
    }
}

/// CSV header shared by all commands.
pub const CSV_HEADER: &str = "experiment,n,sigma,lambda,trials,seed,metric,value";

/// Writes records in long format: one row per metric per grid point.
pub fn write_csv<W: Write>(records: &[ExperimentRecord], w: &mut W) -> std::io::Result<()> {
    writeln!(w, "{CSV_HEADER}")?;
    for r in records {
        for (metric, value) in &r.metrics {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{}",
                r.experiment,
                r.n,
                format_value(r.sigma),
                r.lambda,
                r.trials,
                r.seed,
                metric,
                format_value(*value)
            )?;
        }
    }
    Ok(())
}

/// Runs a validated configuration and returns the process exit code.
pub fn run(config: &CliConfig) -> i32 {
    if config.command == CommandKind::Selftest {
        return run_selftest();
    }

    let pool = match rayon::ThreadPoolBuilder::new()
        .num_threads(config.threads.unwrap_or(0))
        .build()
    {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: failed to build thread pool: {e}");
            return EXIT_USAGE;
        }
    };

    let records = match pool.install(|| run_experiment(&config.plan)) {
        Ok(r) => r,
        Err(e @ (Error::Usage(_) | Error::Domain(_))) => {
            eprintln!("error: {e}");
            return EXIT_USAGE;
        }
        Err(Error::Io(e)) => {
            eprintln!("error: {e}");
            return EXIT_IO;
        }
        Err(e) => {
            eprintln!("error: {e}");
            return 1;
        }
    };

    let io_result = match &config.out {
        Some(path) => std::fs::File::create(path).and_then(|mut f| {
            write_csv(&records, &mut f)?;
            f.flush()
        }),
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            write_csv(&records, &mut lock).and_then(|_| lock.flush())
        }
    };
    if let Err(e) = io_result {
        // A closed downstream pipe (`esfd ... | head`) is not a failure.
        if e.kind() == std::io::ErrorKind::BrokenPipe {
            return EXIT_OK;
        }
        eprintln!("error: {e}");
        return EXIT_IO;
    }
    EXIT_OK
}

/// Entry point used by `main`: handles --help/--version and maps parse
/// failures to exit code 2.
pub fn run_cli<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
            let _ = e.print();
            return code;
        }
    };
    match config_from_cli(cli) {
        Ok(config) => run(&config),
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_USAGE
        }
    }
}

/// Closed-form and exact-identity checks, one line per check.
fn run_selftest() -> i32 {
    use crate::estimators::{es_gradient, fd_gradient, gradient_difference, BatchEvaluation};
    use crate::linalg::sub;
    use crate::objectives::{check_gradient, make_objective};
    use crate::sampling::{mirror_batch, sample_batch, ParamVector};
    use crate::specfun::{chi_mean, chi_variance, gamma_ratio_asymptotic, gamma_ratio_exact};
    use std::f64::consts::PI;

    type Check = (&'static str, fn() -> std::result::Result<(), String>);

    fn close(got: f64, want: f64, rel: f64) -> std::result::Result<(), String> {
        if (got - want).abs() <= rel * want.abs() {
            Ok(())
        } else {
            Err(format!("got {got}, want {want} (rel {rel})"))
        }
    }

    let checks: Vec<Check> = vec![
        ("chi_mean(1,1) = sqrt(2/pi)", || {
            close(chi_mean(1, 1.0).unwrap(), (2.0 / PI).sqrt(), 1e-12)
        }),
        ("chi_variance(1,1) = 1 - 2/pi", || {
            close(chi_variance(1, 1.0).unwrap(), 1.0 - 2.0 / PI, 1e-12)
        }),
        ("gamma_ratio_exact(2,1) = 1", || {
            close(gamma_ratio_exact(2.0, 1.0).unwrap(), 1.0, 1e-12)
        }),
        ("gamma_ratio_exact(z+1,z) = z at z=7", || {
            close(gamma_ratio_exact(8.0, 7.0).unwrap(), 7.0, 1e-12)
        }),
        ("gamma_ratio_exact(1,1/2) = 1/sqrt(pi)", || {
            close(gamma_ratio_exact(1.0, 0.5).unwrap(), 1.0 / PI.sqrt(), 1e-12)
        }),
        ("gamma_ratio_asymptotic(50,1,0) = 50", || {
            let got = gamma_ratio_asymptotic(50.0, 1.0, 0.0).unwrap();
            if got == 50.0 {
                Ok(())
            } else {
                Err(format!("got {got}"))
            }
        }),
        ("chi statistics scale as sigma and sigma^2", || {
            close(
                chi_mean(7, 2.5).unwrap(),
                2.5 * chi_mean(7, 1.0).unwrap(),
                1e-12,
            )?;
            close(
                chi_variance(7, 2.5).unwrap(),
                6.25 * chi_variance(7, 1.0).unwrap(),
                1e-12,
            )
        }),
        ("difference identity on a random batch", || {
            let theta = ParamVector::new(vec![0.6; 20]).map_err(|e| e.to_string())?;
            let obj = make_objective(&crate::objectives::ObjectiveSpec::new("sphere", 20))
                .map_err(|e| e.to_string())?;
            let batch = sample_batch(&theta, 0.7, 64, 12345).map_err(|e| e.to_string())?;
            let eval = BatchEvaluation::new(&batch, &obj).map_err(|e| e.to_string())?;
            let closed = eval.difference().map_err(|e| e.to_string())?;
            let by_sub = sub(&eval.central_sum().vector, &eval.es(false).vector);
            let scale = closed.iter().fold(0.0f64, |m, &x| m.max(x.abs()));
            for i in 0..20 {
                if (closed[i] - by_sub[i]).abs() > 1e-10 * scale {
                    return Err(format!("coordinate {i} disagrees"));
                }
            }
            Ok(())
        }),
        ("mirrored batch kills the difference exactly", || {
            let theta = ParamVector::new(vec![0.9; 8]).map_err(|e| e.to_string())?;
            let obj = make_objective(&crate::objectives::ObjectiveSpec::new("sphere", 8))
                .map_err(|e| e.to_string())?;
            let batch = sample_batch(&theta, 1.0, 16, 777).map_err(|e| e.to_string())?;
            let d = gradient_difference(&mirror_batch(&batch), &obj).map_err(|e| e.to_string())?;
            if d.iter().all(|&x| x == 0.0) {
                Ok(())
            } else {
                Err("nonzero".to_string())
            }
        }),
        ("constant objective gives exact zero FD and mirrored ES", || {
            let theta = ParamVector::new(vec![1.0; 6]).map_err(|e| e.to_string())?;
            let obj = make_objective(
                &crate::objectives::ObjectiveSpec::new("constant", 6).with_parameter("value", 7.0),
            )
            .map_err(|e| e.to_string())?;
            let batch = sample_batch(&theta, 1.0, 10, 3).map_err(|e| e.to_string())?;
            if fd_gradient(&batch, &obj)
                .map_err(|e| e.to_string())?
                .vector
                .iter()
                .any(|&x| x != 0.0)
            {
                return Err("FD not zero".to_string());
            }
            let es = es_gradient(&mirror_batch(&batch), &obj).map_err(|e| e.to_string())?;
            if es.vector.iter().any(|&x| x != 0.0) {
                return Err("mirrored ES not zero".to_string());
            }
            Ok(())
        }),
        ("analytic gradients agree with central differences", || {
            for name in OBJECTIVE_NAMES {
                let spec = crate::objectives::ObjectiveSpec::new(name, 5);
                let obj = make_objective(&spec).map_err(|e| e.to_string())?;
                let point = ParamVector::new(vec![0.3, -0.8, 1.1, 0.5, -0.2])
                    .map_err(|e| e.to_string())?;
                let err = check_gradient(&obj, &point, 1e-6).map_err(|e| e.to_string())?;
                if err >= 1e-4 {
                    return Err(format!("{name}: central-difference error {err}"));
                }
            }
            Ok(())
        }),
    ];

    let mut failures = 0;
    for (name, check) in &checks {
        match check() {
            Ok(()) => println!("ok   {name}"),
            Err(msg) => {
                failures += 1;
                println!("FAIL {name}: {msg}");
            }
        }
    }
    println!(
        "selftest: {} passed, {failures} failed",
        checks.len() - failures
    );
    if failures == 0 {
        EXIT_OK
    } else {
        EXIT_SELFTEST
    }
}
