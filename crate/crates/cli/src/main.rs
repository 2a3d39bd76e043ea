use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ndarray::{Array1, Array2};

use rotmix::io::{format_real, write_plan, write_samples, write_sweep, write_trace, ColumnRef};
use rotmix::{
    evaluate, fit, load_csv, load_model, parse_lambda_grid, sample_mixture, save_model, sweep, CsvOptions, Error,
    ErrorKind, Family, FitConfig, FitStatus, InitMethod, MixtureModel, ModelDocument, PenaltyKind, Regularizer,
    SweepMode,
};

const EXIT_CODES: &str = "\
Exit codes:
  0  success (fit: converged; sweep: output written, failed lambdas are marked in their rows)
  2  fit stopped at --max-iters without converging
  3  degenerate fit (collapsed components, non-finite values, too few distinct points)
  4  I/O error
  5  invalid flags, data, or model file";

const EXIT_MAX_ITERS: u8 = 2;
const EXIT_DEGENERATE: u8 = 3;
const EXIT_IO: u8 = 4;
const EXIT_VALIDATION: u8 = 5;

#[derive(Parser, Debug)]
#[command(
    name = "rotmix",
    version,
    about = "Fit exponential-family mixtures by regularized optimal transport",
    long_about = "Fit exponential-family mixtures by regularized optimal transport.\n\n\
                  The strength --lambda moves the estimator from hard clustering (0) \
                  through EM (1, entropic) towards uniform weights (large values).",
    after_help = EXIT_CODES
)]
struct Cli {
    /// Log progress to standard error
    #[arg(short, long, global = true)]
    verbose: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Fit a mixture to observations and write the model
    #[command(after_help = EXIT_CODES)]
    Fit(FitArgs),
    /// Draw observations from a mixture
    #[command(after_help = EXIT_CODES)]
    Sample(SampleArgs),
    /// Evaluate a model on observations with a single plan update
    #[command(after_help = EXIT_CODES)]
    Eval(EvalArgs),
    /// Fit or evaluate over a grid of lambda values
    #[command(after_help = EXIT_CODES)]
    Sweep(SweepArgs),
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum FamilyArg {
    #[value(name = "gaussian_spherical")]
    GaussianSpherical,
    Poisson,
    Bernoulli,
    Exponential,
}

impl FamilyArg {
    fn name(self) -> &'static str {
        match self {
            FamilyArg::GaussianSpherical => "gaussian_spherical",
            FamilyArg::Poisson => "poisson",
            FamilyArg::Bernoulli => "bernoulli",
            FamilyArg::Exponential => "exponential",
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum RegularizerArg {
    Entropic,
    Quadratic,
}

impl From<RegularizerArg> for PenaltyKind {
    fn from(r: RegularizerArg) -> Self {
        match r {
            RegularizerArg::Entropic => PenaltyKind::Entropic,
            RegularizerArg::Quadratic => PenaltyKind::Quadratic,
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum InitArg {
    Kmeanspp,
    Random,
}

impl From<InitArg> for InitMethod {
    fn from(i: InitArg) -> Self {
        match i {
            InitArg::Kmeanspp => InitMethod::KMeansPlusPlus,
            InitArg::Random => InitMethod::RandomPoints,
        }
    }
}

#[derive(Args, Debug)]
struct InputArgs {
    /// Observation CSV (comma-separated, optional header row, `label` column ignored)
    #[arg(long, value_name = "CSV")]
    input: PathBuf,

    /// Column of positive observation weights, by header name or zero-based index
    #[arg(long, value_name = "NAME|INDEX")]
    weight_column: Option<String>,
}

impl InputArgs {
    fn options(&self) -> CsvOptions {
        CsvOptions {
            has_header: None,
            weight_column: self.weight_column.as_deref().map(ColumnRef::parse),
        }
    }
}

#[derive(Args, Debug)]
struct SolverArgs {
    /// Penalty on the transport plan
    #[arg(long, value_enum, default_value = "entropic")]
    regularizer: RegularizerArg,

    /// Initialization of the component means
    #[arg(long, value_enum, default_value = "kmeanspp")]
    init: InitArg,

    /// Seed for the initialization
    #[arg(long, default_value_t = 0)]
    seed: u64,

    /// Maximum number of iterations
    #[arg(long, default_value_t = 500)]
    max_iters: usize,

    /// Relative tolerance on the change of the objective
    #[arg(long, default_value = "1e-8")]
    tol: f64,
}

impl SolverArgs {
    fn config(&self, lambda: f64) -> FitConfig {
        FitConfig {
            lambda,
            penalty: self.regularizer.into(),
            max_iters: self.max_iters,
            rel_tol: self.tol,
            seed: self.seed,
            init: self.init.into(),
            ..FitConfig::default()
        }
    }
}

#[derive(Args, Debug)]
struct FitArgs {
    #[command(flatten)]
    input: InputArgs,

    /// Component family
    #[arg(long, value_enum)]
    family: FamilyArg,

    /// Number of components
    #[arg(long)]
    k: usize,

    /// Regularization strength (0 hard, 1 EM with the entropic penalty)
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,

    #[command(flatten)]
    solver: SolverArgs,

    /// Model file to write
    #[arg(long, value_name = "MODEL")]
    output: PathBuf,

    /// Per-iteration trace CSV to write
    #[arg(long, value_name = "CSV")]
    trace: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SampleArgs {
    /// Model file to sample from
    #[arg(long, value_name = "MODEL", conflicts_with_all = ["family", "weights", "means"], required_unless_present = "means")]
    model: Option<PathBuf>,

    /// Family of an inline model
    #[arg(long, value_enum, requires = "means")]
    family: Option<FamilyArg>,

    /// Weights of an inline model, comma-separated [default: uniform]
    #[arg(long, value_name = "W1,W2,...", requires = "means")]
    weights: Option<String>,

    /// Means of an inline model: coordinates separated by ',', components by ';'
    #[arg(long, value_name = "M11,M12;M21,M22", requires = "family", allow_hyphen_values = true)]
    means: Option<String>,

    /// Number of draws
    #[arg(long)]
    n: usize,

    /// Seed for the draws
    #[arg(long, default_value_t = 0)]
    seed: u64,

    /// Sample CSV to write
    #[arg(long, value_name = "CSV")]
    output: PathBuf,

    /// Add a `label` column with the zero-based component of each draw
    #[arg(long)]
    with_labels: bool,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[command(flatten)]
    input: InputArgs,

    /// Model file to evaluate
    #[arg(long, value_name = "MODEL")]
    model: PathBuf,

    /// Regularization strength [default: the value stored in the model, else 1]
    #[arg(long)]
    lambda: Option<f64>,

    /// Penalty on the transport plan [default: the one stored in the model, else entropic]
    #[arg(long, value_enum)]
    regularizer: Option<RegularizerArg>,

    /// Write the plan (upsilon, pi_1..pi_k per row) to this CSV
    #[arg(long, value_name = "CSV")]
    dump_plan: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[command(flatten)]
    input: InputArgs,

    /// Component family (taken from --model when given)
    #[arg(long, value_enum, required_unless_present = "model")]
    family: Option<FamilyArg>,

    /// Number of components (taken from --model when given)
    #[arg(long, required_unless_present = "model")]
    k: Option<usize>,

    /// Lambda grid: `geometric:LO,HI,STEPS` or an ascending list such as `0,0.5,1`
    #[arg(long, value_name = "GRID")]
    lambdas: String,

    /// Run one plan update per lambda at a fixed model instead of a full fit
    #[arg(long)]
    one_step: bool,

    /// Fixed model for --one-step [default: the seeded initialization]
    #[arg(long, value_name = "MODEL", requires = "one_step", conflicts_with = "k")]
    model: Option<PathBuf>,

    #[command(flatten)]
    solver: SolverArgs,

    /// Sweep CSV to write, one row per lambda
    #[arg(long, value_name = "CSV")]
    output: PathBuf,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let _ = err.print();
            return if err.use_stderr() {
                ExitCode::from(EXIT_VALIDATION)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    env_logger::Builder::new()
        .filter_level(if cli.verbose {
            log::LevelFilter::Debug
        } else {
            log::LevelFilter::Warn
        })
        .format_timestamp(None)
        .init();
    match run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(match err.kind() {
                ErrorKind::Degenerate => EXIT_DEGENERATE,
                ErrorKind::Io => EXIT_IO,
                ErrorKind::Validation => EXIT_VALIDATION,
            })
        }
    }
}

fn run(command: Command) -> Result<u8, Error> {
    match command {
        Command::Fit(args) => cmd_fit(args),
        Command::Sample(args) => cmd_sample(args),
        Command::Eval(args) => cmd_eval(args),
        Command::Sweep(args) => cmd_sweep(args),
    }
}

fn cmd_fit(args: FitArgs) -> Result<u8, Error> {
    let config = args.solver.config(args.lambda);
    config.validate()?;
    if args.k == 0 {
        return Err(Error::InvalidConfig("--k must be at least 1".into()));
    }
    let data = load_csv(&args.input.input, args.family.name(), &args.input.options())?;
    log::info!("loaded {} observations of dimension {}", data.len(), data.dim());
    let result = fit(&data, args.k, &config)?;
    save_model(&ModelDocument::from_fit(&result, &config), &args.output)?;
    if let Some(trace) = &args.trace {
        write_trace(trace, &result.trace)?;
    }
    println!(
        "status={} iterations={} final_objective={} k_active={}",
        result.trace.status.name(),
        result.trace.iterations(),
        format_real(result.trace.final_objective),
        result.model.k()
    );
    Ok(match result.trace.status {
        FitStatus::Converged => 0,
        FitStatus::MaxIterations => EXIT_MAX_ITERS,
    })
}

fn parse_reals(text: &str, what: &str) -> Result<Vec<f64>, Error> {
    text.split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| Error::InvalidConfig(format!("--{what}: `{}` is not a number", s.trim())))
        })
        .collect()
}

fn inline_model(family: FamilyArg, weights: Option<&str>, means: &str) -> Result<MixtureModel, Error> {
    let rows: Vec<Vec<f64>> = means
        .split(';')
        .map(|row| parse_reals(row, "means"))
        .collect::<Result<_, _>>()?;
    let d = rows[0].len();
    if rows.iter().any(|r| r.len() != d) {
        return Err(Error::InvalidConfig("--means: every component needs the same dimension".into()));
    }
    let family = Family::from_name(family.name(), d)?;
    let k = rows.len();
    let means = Array2::from_shape_vec((k, d), rows.concat()).expect("k rows of d values");
    for row in means.rows() {
        if !family.expectation_domain(&row.to_vec()) {
            return Err(Error::InvalidConfig(format!(
                "--means: {row} is outside the {family} expectation domain"
            )));
        }
    }
    match weights {
        Some(w) => MixtureModel::new(family, Array1::from(parse_reals(w, "weights")?), means),
        None => MixtureModel::uniform(family, means),
    }
}

fn cmd_sample(args: SampleArgs) -> Result<u8, Error> {
    let model = match (&args.model, &args.family, &args.means) {
        (Some(path), _, _) => load_model(path)?.model,
        (None, Some(family), Some(means)) => inline_model(*family, args.weights.as_deref(), means)?,
        _ => return Err(Error::InvalidConfig("give --model or --family with --means".into())),
    };
    let sample = sample_mixture(&model, args.n, args.seed);
    write_samples(&args.output, &sample, args.with_labels)?;
    println!("n={} family={} k={} output={}", sample.len(), model.family(), model.k(), display(&args.output));
    Ok(0)
}

fn cmd_eval(args: EvalArgs) -> Result<u8, Error> {
    let document = load_model(&args.model)?;
    let stored = document.config.as_ref().map(|c| &c.0);
    let lambda = args.lambda.or(stored.map(|c| c.lambda)).unwrap_or(1.0);
    let penalty = args
        .regularizer
        .map(PenaltyKind::from)
        .or(stored.map(|c| c.penalty))
        .unwrap_or_default();
    let reg = Regularizer::resolve(penalty, lambda)?;
    let model = &document.model;
    let data = load_csv(&args.input.input, model.family().name(), &args.input.options())?;
    if data.dim() != model.dim() {
        return Err(Error::DimensionMismatch {
            expected: model.dim(),
            found: data.dim(),
        });
    }
    let eval = evaluate(model, &data, &reg)?;
    if let Some(path) = &args.dump_plan {
        write_plan(path, &eval.plan)?;
    }
    println!(
        "objective={} mean_nll={} mean_row_entropy={} lambda={} n={} k={}",
        format_real(eval.objective),
        format_real(eval.mean_nll),
        format_real(eval.mean_row_entropy),
        format_real(lambda),
        data.len(),
        model.k()
    );
    Ok(0)
}

fn cmd_sweep(args: SweepArgs) -> Result<u8, Error> {
    let lambdas = parse_lambda_grid(&args.lambdas)?;
    let config = args.solver.config(lambdas[0]);
    config.validate()?;
    let fixed = args.model.as_deref().map(load_model).transpose()?.map(|doc| doc.model);
    let family = match (&fixed, args.family) {
        (Some(model), Some(f)) if model.family().name() != f.name() => {
            return Err(Error::InvalidConfig(format!(
                "model family {} does not match --family {}",
                model.family().name(),
                f.name()
            )));
        }
        (Some(model), _) => model.family().name(),
        (None, Some(f)) => f.name(),
        (None, None) => unreachable!("clap requires --family or --model"),
    };
    let data = load_csv(&args.input.input, family, &args.input.options())?;
    let mode = match (fixed, args.k) {
        (Some(model), _) => {
            if model.family() != data.family() {
                return Err(Error::InvalidConfig(format!(
                    "model family {} does not match the data ({})",
                    model.family(),
                    data.family()
                )));
            }
            SweepMode::OneStep { model }
        }
        (None, Some(k)) if args.one_step => SweepMode::OneStep {
            model: rotmix::initialize(&data, k, config.init, config.seed)?,
        },
        (None, Some(k)) => SweepMode::FullFit { k },
        (None, None) => unreachable!("clap requires --k or --model"),
    };
    let rows = sweep(&data, &lambdas, &mode, &config);
    write_sweep(&args.output, &rows)?;
    let failed = rows.iter().filter(|r| r.status.is_failure()).count();
    println!(
        "lambdas={} failed={} mode={} output={}",
        rows.len(),
        failed,
        if args.one_step { "one_step" } else { "full_fit" },
        display(&args.output)
    );
    Ok(0)
}

fn display(path: &Path) -> String {
    path.display().to_string()
}
