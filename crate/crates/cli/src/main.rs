use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use cogarch_core::aux_ar::{aux_estimate, ArMethod};
use cogarch_core::bench::config::StudyConfig;
use cogarch_core::bench::grid::{build_grid, ParameterGrid};
use cogarch_core::bench::io::{read_returns_csv, write_path_csv, write_returns_csv, write_study_outputs};
use cogarch_core::bench::study::{run_study_with_threads, study_domain};
use cogarch_core::binding::{binding, moment_estimate, BindingBackend, MonteCarloConfig};
use cogarch_core::cogarch::{simulate_returns, Recording, ReturnsSeries, SimConfig};
use cogarch_core::estimators::{iie_sim, iie_star, mm_estimate, IieConfig, WeightMatrix};
use cogarch_core::rng::StreamId;
use cogarch_core::{CogarchParams, Error, LevyModel};
use serde_json::json;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

const EXIT_CONFIG: u8 = 2;
const EXIT_INFEASIBLE: u8 = 3;

#[derive(Parser)]
#[command(name = "cogarch", version, about = "COGARCH(1,1) simulation and estimation")]
struct Cli {
    /// Master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads (default: COGARCH_THREADS, then available cores).
    #[arg(long, global = true, env = "COGARCH_THREADS")]
    threads: Option<usize>,

    /// Study configuration (JSON or TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a return series.
    Simulate(SimulateArgs),
    /// Estimate parameters from a return series.
    Estimate(EstimateArgs),
    /// Print the binding function and moment summary.
    Binding(BindingArgs),
    /// Build the restricted parameter grid.
    Grid(GridArgs),
    /// Run a replication study.
    Study(StudyArgs),
}

#[derive(Args, Clone)]
struct ModelArgs {
    /// Variance Gamma jump intensity C.
    #[arg(long, default_value_t = 1.0)]
    vg_c: f64,

    /// Observation spacing.
    #[arg(long, default_value_t = 1.0)]
    delta: f64,
}

impl ModelArgs {
    fn model(&self, cfg: Option<&StudyConfig>) -> anyhow::Result<LevyModel> {
        match cfg {
            Some(c) => Ok(c.model.clone()),
            None => Ok(LevyModel::variance_gamma(self.vg_c)?),
        }
    }
}

#[derive(Args, Clone)]
struct ThetaArgs {
    #[arg(long, default_value_t = 0.04)]
    beta: f64,
    #[arg(long, default_value_t = 0.053)]
    eta: f64,
    #[arg(long, default_value_t = 0.038)]
    phi: f64,
}

impl ThetaArgs {
    fn theta(&self) -> anyhow::Result<CogarchParams> {
        Ok(CogarchParams::new(self.beta, self.eta, self.phi)?)
    }
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    theta: ThetaArgs,
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, default_value_t = 10_000)]
    n: usize,
    #[arg(long, default_value_t = cogarch_core::cogarch::DEFAULT_SUBSTEPS)]
    substeps: usize,
    #[arg(long, default_value_t = cogarch_core::cogarch::DEFAULT_BURN_IN)]
    burn_in: usize,
    /// Replication index of the observed stream.
    #[arg(long, default_value_t = 0)]
    rep: u32,
    /// Returns CSV (index, G_i); stdout when omitted.
    #[arg(long, short)]
    output: Option<PathBuf>,
    /// Volatility CSV (t, sigma2) at the observation times.
    #[arg(long)]
    volatility: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Mm,
    IieStar,
    IieSim,
}

#[derive(Clone, Copy, ValueEnum)]
enum OmegaArg {
    Identity,
}

#[derive(Clone, Copy, ValueEnum)]
enum ArArg {
    Yw,
    Ls,
}

impl From<ArArg> for ArMethod {
    fn from(a: ArArg) -> Self {
        match a {
            ArArg::Yw => ArMethod::YuleWalker,
            ArArg::Ls => ArMethod::LeastSquares,
        }
    }
}

#[derive(Args)]
struct EstimateArgs {
    #[arg(long, value_enum)]
    method: MethodArg,
    /// Returns CSV with a G_i column (or a single column of values).
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value_t = 70)]
    r: usize,
    /// Simulated paths for iie-sim.
    #[arg(long = "K", default_value_t = 20)]
    k: usize,
    #[arg(long, value_enum, default_value = "identity")]
    omega: OmegaArg,
    /// Grid JSON written by `cogarch grid`; built from the box when omitted.
    #[arg(long)]
    grid: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "yw")]
    ar: ArArg,
    /// Search box is [spacing, factor * reference] with the reference θ below.
    #[command(flatten)]
    reference: ThetaArgs,
    #[arg(long, default_value_t = 3.0)]
    upper_factor: f64,
    #[arg(long, default_value_t = 0.002)]
    spacing: f64,
    #[command(flatten)]
    model: ModelArgs,
}

#[derive(Args)]
struct BindingArgs {
    #[command(flatten)]
    theta: ThetaArgs,
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, default_value_t = 70)]
    r: usize,
    /// Monte Carlo backend with this many paths instead of the closed form.
    #[arg(long)]
    mc_paths: Option<usize>,
    #[arg(long, default_value_t = 200_000)]
    mc_length: usize,
}

#[derive(Args)]
struct GridArgs {
    #[command(flatten)]
    reference: ThetaArgs,
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, default_value_t = 0.002)]
    spacing: f64,
    #[arg(long, default_value_t = 3.0)]
    upper_factor: f64,
    /// Grid JSON; stdout summary only when omitted.
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct StudyArgs {
    /// Output directory (overrides the config).
    #[arg(long, short)]
    output_dir: Option<PathBuf>,
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long)]
    n: Option<usize>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &anyhow::Error) -> u8 {
    match e.downcast_ref::<Error>() {
        Some(err) if err.is_infeasible() => EXIT_INFEASIBLE,
        Some(Error::Config(_) | Error::InvalidArgument(_) | Error::Unsupported(_)) => EXIT_CONFIG,
        _ => 1,
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let config = cli.config.as_deref().map(StudyConfig::from_path).transpose()?;
    let threads = cli.threads.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    if threads == 0 {
        return Err(Error::Config("--threads must be >= 1".into()).into());
    }
    let seed = cli.seed.or(config.as_ref().map(|c| c.master_seed)).unwrap_or(2024);
    match cli.command {
        Command::Simulate(a) => simulate(a, seed, config.as_ref()),
        Command::Estimate(a) => estimate(a, seed, config.as_ref(), threads),
        Command::Binding(a) => binding_cmd(a, seed, config.as_ref()),
        Command::Grid(a) => grid_cmd(a, config.as_ref()),
        Command::Study(a) => study(a, cli.seed, config, threads),
    }
}

fn writer(path: Option<&Path>) -> anyhow::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn print_json(value: &impl serde::Serialize) -> anyhow::Result<()> {
    let mut out = io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    Ok(())
}

fn simulate(a: SimulateArgs, seed: u64, cfg: Option<&StudyConfig>) -> anyhow::Result<()> {
    let model = a.model.model(cfg)?;
    let theta = a.theta.theta()?;
    let mut sim = SimConfig::new(a.model.delta, a.n, StreamId::observed(seed, a.rep));
    sim.substeps = a.substeps;
    sim.burn_in = a.burn_in;
    sim.record = if a.volatility.is_some() {
        Recording::ObservationGrid
    } else {
        Recording::None
    };
    let (series, path) = simulate_returns(&theta, &model, &sim)?;
    write_returns_csv(&series, writer(a.output.as_deref())?)?;
    if let Some(p) = &a.volatility {
        write_path_csv(&path, writer(Some(p))?)?;
    }
    Ok(())
}

fn estimate(a: EstimateArgs, seed: u64, cfg: Option<&StudyConfig>, threads: usize) -> anyhow::Result<()> {
    let model = a.model.model(cfg)?;
    let file = File::open(&a.input).with_context(|| format!("opening {}", a.input.display()))?;
    let returns = ReturnsSeries {
        values: read_returns_csv(file)?,
        delta: a.model.delta,
        theta_used: a.reference.theta()?,
        seed_used: None,
    };
    let omega = match a.omega {
        OmegaArg::Identity => WeightMatrix::identity(a.r + 2),
    };
    let study_like = StudyConfig {
        theta_true: a.reference.theta()?,
        grid_spacing: [a.spacing; 3],
        upper_factor: a.upper_factor,
        ..Default::default()
    };
    let domain = study_domain(&study_like)?;
    let ar_method: ArMethod = a.ar.into();
    let result = match a.method {
        MethodArg::Mm => mm_estimate(&returns, a.r, &model, &domain)?,
        MethodArg::IieStar => {
            let pi_hat = aux_estimate(&returns, a.r, ar_method)?;
            let start = mm_estimate(&returns, a.r, &model, &domain)
                .map(|e| e.theta_hat)
                .unwrap_or_else(|_| domain.centre());
            iie_star(&pi_hat, &model, a.model.delta, &omega, &domain, &BindingBackend::Analytic, &start)?
        }
        MethodArg::IieSim => {
            let grid = match &a.grid {
                Some(p) => {
                    let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
                    serde_json::from_str::<ParameterGrid>(&text)
                        .map_err(|e| Error::Config(format!("grid file {}: {e}", p.display())))?
                }
                None => build_grid(&domain, [a.spacing; 3], &model)?,
            };
            let mut c = IieConfig::new(a.k, a.r, seed);
            c.omega = omega;
            c.ar_method = ar_method;
            in_pool(threads, || iie_sim(&returns, &model, a.r, &grid, &c))??
        }
    };
    print_json(&result)
}

fn in_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> anyhow::Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| anyhow!(e))?;
    Ok(pool.install(f))
}

fn binding_cmd(a: BindingArgs, seed: u64, cfg: Option<&StudyConfig>) -> anyhow::Result<()> {
    let model = a.model.model(cfg)?;
    let theta = a.theta.theta()?;
    let backend = match a.mc_paths {
        Some(paths) => BindingBackend::MonteCarlo(MonteCarloConfig {
            paths,
            n_per_path: a.mc_length,
            seed,
            ..Default::default()
        }),
        None => BindingBackend::Analytic,
    };
    let moments = moment_estimate(&theta, &model, a.model.delta, &backend)?;
    let pi = binding(&theta, &model, a.model.delta, a.r, &backend)?;
    print_json(&json!({
        "theta": theta,
        "pi": pi.to_vector().as_slice(),
        "aux": pi,
        "moments": moments,
    }))
}

fn grid_cmd(a: GridArgs, cfg: Option<&StudyConfig>) -> anyhow::Result<()> {
    let model = a.model.model(cfg)?;
    let study_like = StudyConfig {
        theta_true: a.reference.theta()?,
        grid_spacing: [a.spacing; 3],
        upper_factor: a.upper_factor,
        ..Default::default()
    };
    let domain = study_domain(&study_like)?;
    let grid = build_grid(&domain, [a.spacing; 3], &model)?;
    if let Some(p) = &a.output {
        let mut w = writer(Some(p))?;
        serde_json::to_writer(&mut w, &grid)?;
        w.flush()?;
    }
    print_json(&json!({
        "points": grid.len(),
        "eta_phi_pairs": grid.eta_phi.len(),
        "axis_counts": grid.axis_counts,
        "filtered": grid.filtered,
        "spacing": grid.spacing,
        "bounds": grid.bounds,
    }))
}

fn study(a: StudyArgs, seed: Option<u64>, cfg: Option<StudyConfig>, threads: usize) -> anyhow::Result<()> {
    let mut cfg = cfg.unwrap_or_default();
    if let Some(s) = seed {
        cfg.master_seed = s;
    }
    if let Some(r) = a.reps {
        cfg.reps = r;
    }
    if let Some(n) = a.n {
        cfg.n = n;
    }
    if a.output_dir.is_some() {
        cfg.output_dir = a.output_dir;
    }
    let dir = cfg.output_dir.clone().unwrap_or_else(|| PathBuf::from("study-output"));
    cfg.validate()?;
    let report = run_study_with_threads(&cfg, threads)?;
    let files = write_study_outputs(&report, &dir)?;
    print_json(&json!({
        "included": report.included,
        "excluded": report.excluded,
        "rows": report.rows,
        "files": files,
    }))
}
