//! Command-line front end. [`run`] is the whole program; `main` only wires
//! it to the process streams and exit code.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use robust_risk::catoni::{
    check_eta_condition, check_hdelta, default_alpha, eta_condition_lhs, solve_catoni, CatoniConfig, Inequality,
    RootSolveSettings,
};
use robust_risk::harness::{
    parse_methods, read_values_file, run_bench, run_experiment, run_mean_estimation_coverage, write_bench,
    write_results, write_summary, CoverageInfluence, CoverageSpec, ExperimentSpec, Method, ResultTable, Scenario,
};
use robust_risk::influence::{InfluenceSpec, MomentParams};
use robust_risk::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_RUNTIME: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Parser, Debug)]
#[command(name = "robust-risk", version, about = "Heavy-tailed risk minimization experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Catoni mean estimate of the numbers in a values file.
    Estimate(EstimateArgs),
    /// Report the (h, δ) inequalities, and the η-condition if requested.
    Conditions(ConditionArgs),
    /// Regression with symmetrized-Pareto noise.
    Regression(ExperimentArgs),
    /// Regression with Gaussian noise and contaminated responses.
    Contamination(ExperimentArgs),
    /// K-means clustering with heavy-tailed noise.
    Kmeans(ExperimentArgs),
    /// ERM-narrow against the geometric median of subset fits.
    Geomedian(ExperimentArgs),
    /// Monte-Carlo coverage of the mean-estimation deviation bound.
    Coverage(CoverageArgs),
    /// Wall time of each method relative to mean-gradient descent.
    Bench(ExperimentArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum InfluenceArg {
    Wide,
    Narrow,
}

#[derive(Clone, Copy, Debug, Default, ValueEnum)]
enum Format {
    #[default]
    Csv,
}

#[derive(Args, Debug)]
struct EstimateArgs {
    #[arg(long, default_value_t = 1.5)]
    p: f64,
    #[arg(long)]
    alpha: f64,
    /// One decimal number per line.
    #[arg(long)]
    values: PathBuf,
    #[arg(long, value_enum, default_value_t = InfluenceArg::Wide)]
    influence: InfluenceArg,
}

#[derive(Args, Debug)]
struct ConditionArgs {
    #[arg(long, default_value_t = 1.5)]
    p: f64,
    #[arg(long, default_value_t = 1.0)]
    v: f64,
    #[arg(long, default_value_t = 0.5)]
    h: f64,
    #[arg(long, default_value_t = 0.05)]
    delta: f64,
    #[arg(long, default_value_t = 1000)]
    n: usize,
    /// Defaults to the bound-optimal α.
    #[arg(long)]
    alpha: Option<f64>,
    /// Also check the η-condition at this η.
    #[arg(long)]
    eta: Option<f64>,
}

#[derive(Args, Debug)]
struct ExperimentArgs {
    #[arg(long)]
    p: Option<f64>,
    #[arg(long)]
    h: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    v: Option<f64>,
    /// Comma-separated dimensions.
    #[arg(long, value_delimiter = ',')]
    d: Option<Vec<usize>>,
    #[arg(long)]
    n: Option<usize>,
    /// Comma-separated Pareto tail parameters.
    #[arg(long, value_delimiter = ',')]
    a: Option<Vec<f64>>,
    /// Comma-separated contamination rates.
    #[arg(long, value_delimiter = ',')]
    eta: Option<Vec<f64>>,
    /// Comma-separated cluster counts (kmeans).
    #[arg(long = "K", value_delimiter = ',')]
    k: Option<Vec<usize>>,
    /// Number of subsets for the geometric median.
    #[arg(long = "M")]
    m: Option<usize>,
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    tmax: Option<usize>,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Comma-separated method names; `all` and `six` are shorthands.
    #[arg(long)]
    methods: Option<String>,
    /// Centroid spacing (kmeans).
    #[arg(long)]
    separation: Option<f64>,
    /// Output CSV; also writes `<stem>.summary.csv` and `<out>.meta.json`.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Args, Debug)]
struct CoverageArgs {
    #[arg(long, default_value_t = 1.5)]
    p: f64,
    /// Pareto tail parameter; must exceed p.
    #[arg(long, default_value_t = 2.0)]
    a: f64,
    #[arg(long, default_value_t = 500)]
    n: usize,
    #[arg(long, default_value_t = 0.05)]
    delta: f64,
    #[arg(long, default_value_t = 0.5)]
    h: f64,
    #[arg(long, default_value_t = 2000)]
    reps: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long, value_enum, default_value_t = InfluenceArg::Wide)]
    influence: InfluenceArg,
}

/// Failure classes mapped to exit codes.
enum Failure {
    Usage(String),
    Runtime(String),
}

impl Failure {
    fn usage(e: Error) -> Self {
        Failure::Usage(e.to_string())
    }

    fn runtime(e: impl std::fmt::Display) -> Self {
        Failure::Runtime(e.to_string())
    }
}

/// Runs the program on `args` (including the program name) and returns the
/// exit code: 0 on success, 2 for argument errors, 1 for runtime failures.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let rendered = e.render().to_string();
            let sink: &mut dyn Write = if e.use_stderr() { stderr } else { stdout };
            let _ = write!(sink, "{rendered}");
            return code;
        }
    };
    match dispatch(cli.command, stdout) {
        Ok(()) => EXIT_OK,
        Err(Failure::Usage(msg)) => {
            let _ = writeln!(stderr, "error: {msg}\n\nFor more information, try '--help'.");
            EXIT_USAGE
        }
        Err(Failure::Runtime(msg)) => {
            let _ = writeln!(stderr, "error: {msg}");
            EXIT_RUNTIME
        }
    }
}

fn dispatch(command: Command, stdout: &mut dyn Write) -> Result<(), Failure> {
    match command {
        Command::Estimate(a) => estimate(a, stdout),
        Command::Conditions(a) => conditions(a, stdout),
        Command::Regression(a) => experiment(Scenario::Regression, a, stdout),
        Command::Contamination(a) => experiment(Scenario::Contamination, a, stdout),
        Command::Kmeans(a) => experiment(Scenario::KMeans, a, stdout),
        Command::Geomedian(a) => experiment(Scenario::GeoMedianCompare, a, stdout),
        Command::Coverage(a) => coverage(a, stdout),
        Command::Bench(a) => bench(a, stdout),
    }
}

fn influence(kind: InfluenceArg, p: f64) -> Result<InfluenceSpec, Failure> {
    match kind {
        InfluenceArg::Wide => InfluenceSpec::wide(p),
        InfluenceArg::Narrow => InfluenceSpec::narrow(p),
    }
    .map_err(Failure::usage)
}

fn estimate(a: EstimateArgs, out: &mut dyn Write) -> Result<(), Failure> {
    let spec = influence(a.influence, a.p)?;
    if !(a.alpha > 0.0 && a.alpha.is_finite()) {
        return Err(Failure::Usage(format!("--alpha must be positive, got {}", a.alpha)));
    }
    let values = read_values_file(&a.values).map_err(|e| Failure::runtime(format!("{}: {e}", a.values.display())))?;
    let mu = solve_catoni(&values, a.alpha, &spec, &RootSolveSettings::default()).map_err(Failure::runtime)?;
    writeln!(out, "{mu}").map_err(Failure::runtime)
}

fn inequality_line(name: &str, q: &Inequality) -> String {
    format!(
        "{name}: {} lhs={} rhs={} slack={}",
        if q.holds { "holds" } else { "fails" },
        q.lhs,
        q.rhs,
        q.slack
    )
}

fn conditions(a: ConditionArgs, out: &mut dyn Write) -> Result<(), Failure> {
    let moments = MomentParams::new(a.p, a.v).map_err(Failure::usage)?;
    let alpha = match a.alpha {
        Some(x) => x,
        None => default_alpha(&moments, a.h, a.delta, a.n).map_err(Failure::usage)?,
    };
    let cfg = CatoniConfig::new(alpha, a.h, a.delta, a.n, moments).map_err(Failure::usage)?;
    let report = check_hdelta(&cfg);
    let mut text = [
        inequality_line("ineq1", &report.ineq1),
        inequality_line("ineq2", &report.ineq2),
        inequality_line("ineq3", &report.ineq3),
    ]
    .join("\n");
    if let Some(eta) = a.eta {
        let holds = check_eta_condition(&cfg, eta).map_err(Failure::usage)?;
        text.push_str(&format!(
            "\neta: {} lhs={} eta={eta}",
            if holds { "holds" } else { "fails" },
            eta_condition_lhs(&cfg, eta)
        ));
    }
    writeln!(out, "{text}").map_err(Failure::runtime)
}

fn build_spec(scenario: Scenario, a: &ExperimentArgs) -> Result<ExperimentSpec, Failure> {
    let mut s = ExperimentSpec::new(scenario);
    macro_rules! set {
        ($field:ident, $value:expr) => {
            if let Some(x) = $value.clone() {
                s.$field = x;
            }
        };
    }
    set!(p, a.p);
    set!(h, a.h);
    set!(delta, a.delta);
    set!(v, a.v);
    set!(dims, a.d);
    set!(n, a.n);
    set!(tails, a.a);
    set!(etas, a.eta);
    set!(ks, a.k);
    set!(subsets, a.m);
    set!(reps, a.reps);
    set!(gamma, a.gamma);
    set!(t_max, a.tmax);
    set!(separation, a.separation);
    s.master_seed = a.seed;
    if let Some(list) = &a.methods {
        s.methods = parse_methods(list).map_err(Failure::usage)?;
    }
    if a.m.is_some() && !s.methods.contains(&Method::GeoMedian) {
        return Err(Failure::Usage("--M needs the GeoMedian method".into()));
    }
    let _ = a.format;
    s.validate().map_err(Failure::usage)?;
    Ok(s)
}

fn sibling(out: &Path, suffix: &str) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    out.with_file_name(format!("{stem}{suffix}"))
}

fn meta_json(table: &ResultTable) -> serde_json::Value {
    let s = &table.spec;
    let (covariates, noise) = match s.scenario {
        Scenario::Regression | Scenario::GeoMedianCompare => ("standard normal", "symmetrized Pareto(a)"),
        Scenario::Contamination => (
            "standard normal",
            "standard normal; response replaced by symmetrized Pareto(a) with probability eta",
        ),
        Scenario::KMeans => (
            "none",
            if s.etas.is_empty() {
                "symmetrized Pareto(a) per coordinate"
            } else {
                "standard normal per coordinate; point replaced by a symmetrized Pareto(a) vector with probability eta"
            },
        ),
        Scenario::MeanEstimation => ("none", "symmetrized Pareto(a)"),
    };
    serde_json::json!({
        "spec": s,
        "loss": if s.scenario == Scenario::KMeans { "min_k squared Euclidean distance" } else { "squared error" },
        "covariates": covariates,
        "noise": noise,
        "true_parameter": if s.scenario == Scenario::KMeans { "W*_j = j * separation * e_1" } else { "w* = e_1" },
        "initialization": if s.scenario == Scenario::KMeans { "k-means++ from the trial stream" } else { "standard normal from the trial stream" },
        "step_size": s.gamma,
        "stop_grad_norm": 1e-8,
        "stop_step_norm": 1e-12,
        "rows": table.rows.len(),
        "version": env!("CARGO_PKG_VERSION"),
    })
}

fn create(path: &Path) -> Result<BufWriter<File>, Failure> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Failure::runtime(format!("{}: {e}", path.display())))
}

fn experiment(scenario: Scenario, a: ExperimentArgs, stdout: &mut dyn Write) -> Result<(), Failure> {
    let spec = build_spec(scenario, &a)?;
    let table = run_experiment(&spec).map_err(Failure::runtime)?;
    match &a.out {
        None => write_results(stdout, &table.rows).map_err(Failure::runtime),
        Some(path) => {
            write_results(create(path)?, &table.rows).map_err(Failure::runtime)?;
            write_summary(create(&sibling(path, ".summary.csv"))?, &table.summarize()).map_err(Failure::runtime)?;
            let meta_path = PathBuf::from(format!("{}.meta.json", path.display()));
            let mut meta = create(&meta_path)?;
            serde_json::to_writer_pretty(&mut meta, &meta_json(&table)).map_err(Failure::runtime)?;
            writeln!(meta).and_then(|_| meta.flush()).map_err(Failure::runtime)
        }
    }
}

fn coverage(a: CoverageArgs, out: &mut dyn Write) -> Result<(), Failure> {
    let mut spec = CoverageSpec::new(a.p, a.a, a.n, a.delta, a.h, a.reps);
    spec.master_seed = a.seed;
    spec.alpha = a.alpha;
    spec.influence = match a.influence {
        InfluenceArg::Wide => CoverageInfluence::Wide,
        InfluenceArg::Narrow => CoverageInfluence::Narrow,
    };
    let r = run_mean_estimation_coverage(&spec).map_err(|e| match e {
        Error::Domain(_) | Error::InvalidInput(_) => Failure::usage(e),
        other => Failure::runtime(other),
    })?;
    let lines = [
        format!("trials={}", r.trials),
        format!("violations={}", r.violations),
        format!("fraction={}", r.fraction),
        format!("bound={}", r.bound),
        format!("alpha={}", r.alpha),
        format!("v={}", r.v),
        inequality_line("ineq1", &r.hdelta.ineq1),
        inequality_line("ineq2", &r.hdelta.ineq2),
        inequality_line("ineq3", &r.hdelta.ineq3),
    ];
    writeln!(out, "{}", lines.join("\n")).map_err(Failure::runtime)
}

fn bench(a: ExperimentArgs, stdout: &mut dyn Write) -> Result<(), Failure> {
    let mut spec = build_spec(Scenario::Regression, &a)?;
    if a.d.is_none() {
        spec.dims = vec![8];
    }
    if a.a.is_none() {
        spec.tails = vec![1.0];
    }
    if a.reps.is_none() {
        spec.reps = 5;
    }
    if a.tmax.is_none() {
        spec.t_max = 100;
    }
    if a.methods.is_none() {
        spec.methods = vec![Method::Mean, Method::ErmWide, Method::ErmNarrow, Method::Dw];
    }
    let rows = run_bench(&spec).map_err(Failure::runtime)?;
    match &a.out {
        None => write_bench(stdout, &rows),
        Some(path) => write_bench(create(path)?, &rows),
    }
    .map_err(Failure::runtime)
}
