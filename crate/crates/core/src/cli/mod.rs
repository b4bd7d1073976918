//! Command-line front end.
//!
//! Exit codes: 0 success, 1 numerical failure, 2 I/O or parse error,
//! 3 configuration error.

pub mod config_file;
pub mod io;

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use nalgebra::{DMatrix, DVector};

use crate::batch::{batch_fit, default_plan, BatchPlan};
use crate::bench::{generate, run_batch_comparison, run_comparison, run_q_sensitivity, run_scenario, svd_pitfall_demo};
use crate::bench::{Scenario, ScenarioOptions, SyntheticSpec, Table};
use crate::config::SolverConfig;
use crate::error::{Error, Result};
use crate::frame::{pc_affinity, DataMatrix, OrthonormalFrame};
use crate::outliers::{Flagged, OutlierMode};
use crate::solver::{fit, Problem};
use crate::threshold::ScalarKind;

use config_file::ConfigFile;

const EXIT_CODES: &str = "Exit codes: 0 success, 1 numerical failure, 2 I/O or parse error, 3 configuration error.";

#[derive(Debug, Parser)]
#[command(name = "rocpca", version, about = "Robust orthogonal-complement PCA", after_help = EXIT_CODES)]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// File of `key = value` lines mirroring long flag names; flags win.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit a CSV data matrix.
    Fit(FitArgs),
    /// Fit a CSV data matrix in batches of complement directions.
    BatchFit(BatchFitArgs),
    /// Generate synthetic data with known truth.
    Simulate(SimulateArgs),
    /// Run a named benchmark scenario or a scenario file.
    Bench(BenchArgs),
    /// Show the SVD-reduction ceiling on a toy matrix.
    Pitfall(PitfallArgs),
}

#[derive(Debug, Args, Default, Clone)]
struct SolverFlags {
    /// Dimension r of the principal subspace.
    #[arg(long)]
    rank: Option<usize>,
    /// Outlier mode: row or element.
    #[arg(long)]
    mode: Option<String>,
    /// Outlier budget (rows or entries).
    #[arg(long)]
    q: Option<usize>,
    /// Penalty level; selects the penalized problem.
    #[arg(long)]
    lambda: Option<f64>,
    /// Penalty rule for --lambda: soft, hard or hard-ridge.
    #[arg(long)]
    penalty: Option<String>,
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long)]
    kappa: Option<f64>,
    #[arg(long)]
    rho: Option<f64>,
    /// Nonmonotone window T.
    #[arg(long)]
    window: Option<usize>,
    /// Cooling rate.
    #[arg(long)]
    nu: Option<f64>,
    #[arg(long)]
    m0: Option<usize>,
    #[arg(long)]
    n0: Option<usize>,
    #[arg(long)]
    m1: Option<usize>,
    #[arg(long)]
    tol_outer: Option<f64>,
    #[arg(long)]
    tol_inner_s: Option<f64>,
    #[arg(long)]
    tol_grad: Option<f64>,
    #[arg(long)]
    tol_rel_f: Option<f64>,
    #[arg(long)]
    max_outer: Option<usize>,
    #[arg(long)]
    max_inner: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Args)]
struct FitArgs {
    /// CSV data matrix, one observation per row.
    input: PathBuf,
    #[command(flatten)]
    solver: SolverFlags,
    /// True principal frame (p × r CSV) for an affinity score.
    #[arg(long)]
    truth: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct BatchFitArgs {
    input: PathBuf,
    #[command(flatten)]
    solver: SolverFlags,
    /// Comma-separated batch sizes summing to p − r (default: automatic).
    #[arg(long)]
    plan: Option<String>,
    #[arg(long)]
    truth: Option<PathBuf>,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    p: Option<usize>,
    #[arg(long)]
    rank: Option<usize>,
    /// Comma-separated diagonal of D, decreasing.
    #[arg(long)]
    d: Option<String>,
    /// Noise variance (default 1).
    #[arg(long)]
    sigma2: Option<f64>,
    /// Number of outlier rows or entries (default 0).
    #[arg(long)]
    outliers: Option<usize>,
    /// Outlier magnitude.
    #[arg(long)]
    leverage: Option<f64>,
    #[arg(long)]
    mode: Option<String>,
    /// Comma-separated complement mean (default 0).
    #[arg(long)]
    mu: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct BenchArgs {
    /// table1, table2, table4, table8, pitfall, or a scenario file.
    scenario: String,
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// csv or markdown.
    #[arg(long)]
    format: Option<String>,
    /// Comma-separated dimensions for table8 (default 100,300).
    #[arg(long)]
    dims: Option<String>,
    /// Output file (default: standard output).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct PitfallArgs {
    #[arg(long)]
    p: Option<usize>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Io { .. } | Error::Parse { .. } | Error::Data(_) | Error::Dimension(_) => 2,
        Error::Config(_) => 3,
        Error::Feasibility(_) | Error::WrongArity(_) | Error::SingularStep { .. } => 1,
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code. Errors are reported on standard error.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 3 } else { 0 };
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn execute(cli: Cli) -> Result<()> {
    let file = match &cli.config {
        Some(path) => ConfigFile::load(path)?,
        None => ConfigFile::default(),
    };
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = file.pick(cli.threads, "threads")? {
        if n == 0 {
            return Err(Error::Config("--threads must be >= 1".into()));
        }
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    pool.install(move || match &cli.command {
        Command::Fit(args) => cmd_fit(args, &file),
        Command::BatchFit(args) => cmd_batch_fit(args, &file),
        Command::Simulate(args) => cmd_simulate(args, &file),
        Command::Bench(args) => cmd_bench(args, &file),
        Command::Pitfall(args) => cmd_pitfall(args, &file),
    })
}

fn parse_with<T: std::str::FromStr<Err = String>>(raw: Option<String>, default: T) -> Result<T> {
    raw.map_or(Ok(default), |s| s.parse::<T>().map_err(Error::Config))
}

fn parse_list<T: std::str::FromStr>(raw: &str, what: &str) -> Result<Vec<T>> {
    raw.split(',')
        .map(|s| {
            s.trim()
                .parse::<T>()
                .map_err(|_| Error::Config(format!("{what}: cannot parse '{}' in '{raw}'", s.trim())))
        })
        .collect()
}

impl SolverFlags {
    /// Flags over file over defaults. The rank defaults to 1 here; callers
    /// that need one check it themselves.
    fn resolve(&self, file: &ConfigFile) -> Result<SolverConfig> {
        let d = SolverConfig::default();
        Ok(SolverConfig {
            rank_r: file.pick(self.rank, "rank")?.unwrap_or(d.rank_r),
            outlier_mode: parse_with(file.pick(self.mode.clone(), "mode")?, d.outlier_mode)?,
            q: file.pick(self.q, "q")?,
            lambda: file.pick(self.lambda, "lambda")?,
            penalty: parse_with::<ScalarKind>(file.pick(self.penalty.clone(), "penalty")?, d.penalty)?,
            eta: file.pick(self.eta, "eta")?.unwrap_or(d.eta),
            kappa: file.pick(self.kappa, "kappa")?.unwrap_or(d.kappa),
            rho: file.pick(self.rho, "rho")?.unwrap_or(d.rho),
            window_t: file.pick(self.window, "window")?.unwrap_or(d.window_t),
            nu: file.pick(self.nu, "nu")?.unwrap_or(d.nu),
            m0: file.pick(self.m0, "m0")?.unwrap_or(d.m0),
            n0: file.pick(self.n0, "n0")?.unwrap_or(d.n0),
            m1: file.pick(self.m1, "m1")?.unwrap_or(d.m1),
            tol_outer: file.pick(self.tol_outer, "tol-outer")?.unwrap_or(d.tol_outer),
            tol_inner_s: file.pick(self.tol_inner_s, "tol-inner-s")?.unwrap_or(d.tol_inner_s),
            tol_grad: file.pick(self.tol_grad, "tol-grad")?.unwrap_or(d.tol_grad),
            tol_rel_f: file.pick(self.tol_rel_f, "tol-rel-f")?.unwrap_or(d.tol_rel_f),
            max_outer: file.pick(self.max_outer, "max-outer")?.unwrap_or(d.max_outer),
            max_inner: file.pick(self.max_inner, "max-inner")?.unwrap_or(d.max_inner),
            seed: file.pick(self.seed, "seed")?.unwrap_or(d.seed),
        })
    }

    fn resolve_with_rank(&self, file: &ConfigFile) -> Result<SolverConfig> {
        if file.pick(self.rank, "rank")?.is_none() {
            return Err(Error::Config("--rank is required".into()));
        }
        self.resolve(file)
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|source| Error::Io {
        path: dir.to_path_buf(),
        source,
    })
}

fn load_truth(path: &Path, p: usize, r: usize) -> Result<OrthonormalFrame> {
    let m = io::read_matrix(path)?;
    if m.shape() != (p, r) {
        return Err(Error::Dimension(format!(
            "{}: truth frame is {}x{}, expected {p}x{r}",
            path.display(),
            m.nrows(),
            m.ncols()
        )));
    }
    OrthonormalFrame::new(m)
}

fn summary_text(pairs: &[(&str, String)]) -> String {
    let mut out = String::new();
    for (k, v) in pairs {
        let _ = writeln!(out, "{k} = {v}");
    }
    out
}

fn cmd_fit(args: &FitArgs, file: &ConfigFile) -> Result<()> {
    let config = args.solver.resolve_with_rank(file)?;
    let truth_path = file.pick(args.truth.as_ref().map(|p| p.display().to_string()), "truth")?;
    file.check_all_used()?;
    let x = DataMatrix::new(io::read_matrix(&args.input)?)?;
    let (p, r) = (x.p(), config.rank_r);
    let problem = Problem::new(x, config)?;
    let truth = truth_path.map(|t| load_truth(Path::new(&t), p, r)).transpose()?;
    let result = fit(&problem)?;

    create_dir(&args.out)?;
    io::write_matrix(&args.out.join("v_hat.csv"), result.v_hat.as_matrix())?;
    io::write_matrix(&args.out.join("v_perp.csv"), result.v_perp.as_matrix())?;
    io::write_matrix(&args.out.join("mu.csv"), &DMatrix::from_column_slice(result.mu.len(), 1, result.mu.as_slice()))?;
    io::write_matrix(&args.out.join("s.csv"), result.s.values())?;
    let flagged = result.flagged();
    match &flagged {
        Flagged::Rows(rows) => io::write_rows_index(&args.out.join("outliers.csv"), rows)?,
        Flagged::Elements(e) => io::write_element_index(&args.out.join("outliers.csv"), e)?,
    }
    let mut pairs = vec![
        ("variant", result.variant.name().to_string()),
        ("objective", result.objective.to_string()),
        ("outer_iterations", result.outer_iterations.to_string()),
        ("converged", result.converged.to_string()),
        ("candidate", result.candidate.to_string()),
        ("flagged", flagged.len().to_string()),
        ("stationarity_residual", result.stationarity.max_residual().to_string()),
        ("stationarity_scale", result.stationarity.scale.to_string()),
        ("stationarity_certified", result.stationarity.certified().to_string()),
        ("lambda", result.stationarity.lambda.to_string()),
    ];
    if let Some(t) = &truth {
        pairs.push(("affinity", pc_affinity(&result.v_hat, t)?.to_string()));
    }
    let text = summary_text(&pairs);
    io::write_text(&args.out.join("summary.txt"), &text)?;
    print!("{text}");
    Ok(())
}

fn cmd_batch_fit(args: &BatchFitArgs, file: &ConfigFile) -> Result<()> {
    let config = args.solver.resolve_with_rank(file)?;
    let plan_text = file.pick(args.plan.clone(), "plan")?;
    let truth_path = file.pick(args.truth.as_ref().map(|p| p.display().to_string()), "truth")?;
    file.check_all_used()?;
    let x = DataMatrix::new(io::read_matrix(&args.input)?)?;
    let (p, r) = (x.p(), config.rank_r);
    if r == 0 || r >= p {
        return Err(Error::Config(format!("rank must satisfy 1 <= r < p = {p}, got {r}")));
    }
    let plan = match plan_text {
        Some(text) => BatchPlan::from_sizes(parse_list(&text, "--plan")?, config.tol_outer)?,
        None => {
            let sizes = default_plan(p, r)?.sizes;
            BatchPlan::from_sizes(sizes, config.tol_outer)?
        }
    };
    plan.validate(p, r).map_err(|e| Error::Config(e.to_string()))?;
    let truth = truth_path.map(|t| load_truth(Path::new(&t), p, r)).transpose()?;
    let v_hat = batch_fit(&x, r, &plan, &config)?;

    create_dir(&args.out)?;
    io::write_matrix(&args.out.join("v_hat.csv"), v_hat.as_matrix())?;
    let join = |v: &[String]| v.join(",");
    let mut pairs = vec![
        ("plan", join(&plan.sizes.iter().map(usize::to_string).collect::<Vec<_>>())),
        (
            "tolerances",
            join(&plan.tolerance_schedule.iter().map(f64::to_string).collect::<Vec<_>>()),
        ),
    ];
    if let Some(t) = &truth {
        pairs.push(("affinity", pc_affinity(&v_hat, t)?.to_string()));
    }
    let text = summary_text(&pairs);
    io::write_text(&args.out.join("summary.txt"), &text)?;
    print!("{text}");
    Ok(())
}

fn spec_from(
    file: &ConfigFile,
    n: Option<usize>,
    p: Option<usize>,
    rank: Option<usize>,
    d: Option<String>,
    extras: (Option<f64>, Option<usize>, Option<f64>, Option<String>, Option<String>, Option<u64>),
) -> Result<SyntheticSpec> {
    let (sigma2, outliers, leverage, mode, mu, seed) = extras;
    let required = |v: Option<usize>, name: &str| v.ok_or_else(|| Error::Config(format!("--{name} is required")));
    let n = required(file.pick(n, "n")?, "n")?;
    let p = required(file.pick(p, "p")?, "p")?;
    let r = required(file.pick(rank, "rank")?, "rank")?;
    let d_values: Vec<f64> = match file.pick(d, "d")? {
        Some(text) => parse_list(&text, "--d")?,
        None => return Err(Error::Config("--d is required".into())),
    };
    if d_values.len() != r {
        return Err(Error::Config(format!("--d lists {} values for rank {r}", d_values.len())));
    }
    let mode: OutlierMode = parse_with(file.pick(mode, "mode")?, OutlierMode::Row)?;
    let mu_star = file
        .pick(mu, "mu")?
        .map(|text| parse_list::<f64>(&text, "--mu").map(DVector::from_vec))
        .transpose()?;
    let spec = SyntheticSpec {
        n,
        p,
        r,
        d_values,
        sigma2: file.pick(sigma2, "sigma2")?.unwrap_or(1.0),
        mu_star,
        outlier_mode: mode,
        num_outliers: file.pick(outliers, "outliers")?.unwrap_or(0),
        leverage: file.pick(leverage, "leverage")?.unwrap_or(0.0),
        seed: file.pick(seed, "seed")?.unwrap_or(0),
    };
    spec.validate().map_err(|e| match e {
        Error::Config(_) => e,
        other => Error::Config(other.to_string()),
    })?;
    Ok(spec)
}

fn cmd_simulate(args: &SimulateArgs, file: &ConfigFile) -> Result<()> {
    let spec = spec_from(
        file,
        args.n,
        args.p,
        args.rank,
        args.d.clone(),
        (args.sigma2, args.outliers, args.leverage, args.mode.clone(), args.mu.clone(), args.seed),
    )?;
    file.check_all_used()?;
    let (x, truth) = generate(&spec)?;
    create_dir(&args.out)?;
    io::write_matrix(&args.out.join("x.csv"), x.values())?;
    io::write_matrix(&args.out.join("truth_v.csv"), truth.v_star.as_matrix())?;
    io::write_matrix(&args.out.join("truth_vperp.csv"), truth.v_perp_star.as_matrix())?;
    io::write_matrix(&args.out.join("truth_s.csv"), truth.s_star.values())?;
    match &truth.outliers {
        Flagged::Rows(rows) => io::write_rows_index(&args.out.join("outlier_index.csv"), rows)?,
        Flagged::Elements(e) => io::write_element_index(&args.out.join("outlier_index.csv"), e)?,
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Format {
    Csv,
    Markdown,
}

fn render(table: &Table, format: Format) -> Result<String> {
    match format {
        Format::Csv => table.to_csv(),
        Format::Markdown => Ok(table.to_markdown()),
    }
}

fn cmd_bench(args: &BenchArgs, file: &ConfigFile) -> Result<()> {
    let format = match file.pick(args.format.clone(), "format")?.as_deref() {
        None | Some("csv") => Format::Csv,
        Some("markdown") | Some("md") => Format::Markdown,
        Some(other) => return Err(Error::Config(format!("unknown format '{other}' (expected csv or markdown)"))),
    };
    let reps = file.pick(args.reps, "reps")?;
    let seed = file.pick(args.seed, "seed")?.unwrap_or(0);
    let dims = file.pick(args.dims.clone(), "dims")?;
    file.check_all_used()?;
    if reps == Some(0) {
        return Err(Error::Config("--reps must be >= 1".into()));
    }

    let table = match args.scenario.parse::<Scenario>() {
        Ok(scenario) => {
            let mut opts = ScenarioOptions {
                seed,
                ..ScenarioOptions::default()
            };
            if let Some(reps) = reps {
                opts.reps = reps;
            }
            if let Some(text) = dims {
                opts.table8_p = parse_list(&text, "--dims")?;
            }
            run_scenario(scenario, &opts)?
        }
        Err(unknown) => {
            let path = Path::new(&args.scenario);
            if !path.is_file() {
                return Err(unknown);
            }
            run_scenario_file(path, reps, seed)?
        }
    };
    let text = render(&table, format)?;
    match &args.out {
        Some(path) => io::write_text(path, &text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

/// A scenario file holds `kind` (`q-sensitivity`, `comparison` or `batch`),
/// the synthetic spec keys of `simulate`, and `alphas`, `alpha`, `q`,
/// `plain-pca` as the kind needs.
fn run_scenario_file(path: &Path, reps: Option<usize>, seed: u64) -> Result<Table> {
    let file = ConfigFile::load(path)?;
    let kind: String = file
        .pick(None, "kind")?
        .ok_or_else(|| Error::Config(format!("{}: missing 'kind'", path.display())))?;
    let reps = file.pick(reps, "reps")?.unwrap_or(20);
    let spec = spec_from(&file, None, None, None, None, (None, None, None, None, None, Some(seed)))?;
    let template = SolverConfig::default();
    let table = match kind.as_str() {
        "q-sensitivity" => {
            let alphas: Vec<f64> = match file.pick::<String>(None, "alphas")? {
                Some(text) => parse_list(&text, "alphas")?,
                None => crate::bench::scenarios::ALPHA_GRID.to_vec(),
            };
            file.check_all_used()?;
            run_q_sensitivity(&spec, &alphas, reps, &template)?
        }
        "comparison" => {
            let alpha = file.pick(None, "alpha")?.unwrap_or(2.0);
            let plain = file.pick(None, "plain-pca")?.unwrap_or(true);
            file.check_all_used()?;
            run_comparison(&[spec], alpha, reps, plain, &template)?
        }
        "batch" => {
            let q = file
                .pick(None, "q")?
                .ok_or_else(|| Error::Config(format!("{}: batch scenarios need 'q'", path.display())))?;
            file.check_all_used()?;
            run_batch_comparison(&[spec], q, reps, &template)?
        }
        other => {
            return Err(Error::Config(format!(
                "{}: unknown kind '{other}' (expected q-sensitivity, comparison or batch)",
                path.display()
            )))
        }
    };
    Ok(table)
}

fn cmd_pitfall(args: &PitfallArgs, file: &ConfigFile) -> Result<()> {
    let p = file.pick(args.p, "p")?.unwrap_or(10001);
    let epsilon = file.pick(args.epsilon, "epsilon")?.unwrap_or(0.1);
    let n = file.pick(args.n, "n")?.unwrap_or(20);
    let seed = file.pick(args.seed, "seed")?.unwrap_or(0);
    file.check_all_used()?;
    let report = svd_pitfall_demo(p, epsilon, n, seed)?;
    print!(
        "{}",
        summary_text(&[
            ("p", p.to_string()),
            ("epsilon", epsilon.to_string()),
            ("n", n.to_string()),
            ("rank", report.rank.to_string()),
            ("closed_form_affinity", (100.0 * report.closed_form).to_string()),
            ("ceiling_affinity", report.ceiling_affinity().to_string()),
            ("pca_affinity", (100.0 * report.pca_cosine).to_string()),
        ])
    );
    Ok(())
}
