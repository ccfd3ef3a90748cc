//! Command-line front end.

use std::ffi::OsString;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Arg, ArgMatches, Args, FromArgMatches, Parser, Subcommand, ValueEnum};
use nalgebra::DVector;
use rayon::prelude::*;

use crate::config::{AlgoConfig, CONSTANT_NAMES};
use crate::error::{Error, Result};
use crate::exact::{eig_psd, exact_psd_ridge_scores, SpectralData};
use crate::formats::{read_matrix, read_vector, write_lrkf, write_matrix, write_vector};
use crate::generate::{
    gen_counterexample, gen_hard_instance, gen_spectrum_psd, geometric_spectrum, power_law_spectrum, spike_spectrum,
    HardInstanceSpec, HardVariant,
};
use crate::hardbench::{run_budget_experiment, success_rate, to_csv, BenchAlgorithm, Budget};
use crate::linalg::gaussian_matrix;
use crate::lowrank::{
    algorithm1_frobenius, algorithm2_spectral, psd_output, sqrt_route_baseline_with, LowRankFactor, RunReport,
};
use crate::matrix::PsdMatrix;
use crate::oracle::PsdOracle;
use crate::pcp::{column_pcp, verify_pcp};
use crate::regression::{evaluate_ridge, sublinear_ridge, RidgeProblem};
use crate::rng::Seed;
use crate::scores::{approx_sqrt_ridge_scores, ScoreTarget};

/// Largest dimension for which reports are scored against an exact eigendecomposition.
pub const EXACT_LIMIT: usize = 4096;

/// Environment variable capping the worker pool.
pub const THREADS_ENV: &str = "PSDSKETCH_THREADS";

#[derive(Debug, Parser)]
#[command(name = "psdsketch", version, about = "Sublinear-access low-rank approximation for PSD matrices")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a generated matrix as PSDM (or CSV by extension).
    Gen(GenArgs),
    /// Frobenius-error rank-k approximation.
    Approx(RunArgs),
    /// Spectral-error rank-k approximation.
    Spectral(RunArgs),
    /// Rank-k approximation with a PSD output `M·Mᵀ`.
    PsdApprox(RunArgs),
    /// Ridge regression through a spectral approximation.
    Ridge(RidgeArgs),
    /// Approximation through a sampled square root.
    Baseline(RunArgs),
    /// Checks every pipeline and score bound on one matrix against exact values.
    Verify(RunArgs),
    /// Query-budget experiment on block hard instances.
    Bench(BenchArgs),
    /// Access counts of the Frobenius pipeline over a sweep of sizes.
    Scaling(ScalingArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Kind {
    Powerlaw,
    Spectrum,
    Hard,
    Identity,
    Counterexample,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Profile {
    Geometric,
    Spike,
    Powerlaw,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Variant {
    Mu,
    Nu,
    Gamma,
    GammaB,
}

impl From<Variant> for HardVariant {
    fn from(v: Variant) -> Self {
        match v {
            Variant::Mu => HardVariant::Mu,
            Variant::Nu => HardVariant::Nu,
            Variant::Gamma => HardVariant::Gamma,
            Variant::GammaB => HardVariant::GammaB,
        }
    }
}

/// `--const-<name> VALUE` for every tunable constant.
#[derive(Debug, Clone, Default)]
struct ConstOverrides(Vec<(String, String)>);

impl ConstOverrides {
    fn config(&self) -> Result<AlgoConfig> {
        let mut c = AlgoConfig::default();
        for (name, value) in &self.0 {
            c.set(name, value)?;
        }
        c.validate()?;
        Ok(c)
    }
}

impl FromArgMatches for ConstOverrides {
    fn from_arg_matches(m: &ArgMatches) -> std::result::Result<Self, clap::Error> {
        let mut out = Self::default();
        out.update_from_arg_matches(m)?;
        Ok(out)
    }

    fn update_from_arg_matches(&mut self, m: &ArgMatches) -> std::result::Result<(), clap::Error> {
        for name in CONSTANT_NAMES {
            if let Some(v) = m.get_one::<String>(name) {
                self.0.retain(|(n, _)| n != name);
                self.0.push((name.to_string(), v.clone()));
            }
        }
        Ok(())
    }
}

impl Args for ConstOverrides {
    fn augment_args(cmd: clap::Command) -> clap::Command {
        CONSTANT_NAMES.iter().fold(cmd, |c, &name| {
            c.arg(
                Arg::new(name)
                    .long(format!("const-{name}"))
                    .value_name("VALUE")
                    .allow_negative_numbers(true)
                    .help_heading("Constants")
                    .help(format!("Override the constant {name}")),
            )
        })
    }

    fn augment_args_for_update(cmd: clap::Command) -> clap::Command {
        Self::augment_args(cmd)
    }
}

#[derive(Debug, Args)]
struct GenArgs {
    #[arg(long, value_enum)]
    kind: Kind,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Number of blocks (hard) or rank (counterexample).
    #[arg(long, default_value_t = 1)]
    k: usize,
    #[arg(long, default_value_t = 0.5)]
    eps: f64,
    /// Eigenvalue decay exponent for `powerlaw`.
    #[arg(long, default_value_t = 1.0)]
    exponent: f64,
    /// Built-in eigenvalue profile for `spectrum`.
    #[arg(long, value_enum, default_value_t = Profile::Geometric)]
    profile: Profile,
    /// Eigenvalues for `spectrum`, one per line; overrides `--profile`.
    #[arg(long)]
    eigs: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Variant::GammaB)]
    variant: Variant,
    #[arg(long, default_value_t = 10.0)]
    alpha: f64,
    #[arg(long, default_value_t = 1.0)]
    beta: f64,
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct RunArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    k: usize,
    #[arg(long, default_value_t = 0.5)]
    eps: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Factor output (LRKF).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Report output; printed to stdout when absent.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Write `wall_ms` as 0 so repeated runs give identical reports.
    #[arg(long)]
    no_wall_time: bool,
    #[command(flatten)]
    consts: ConstOverrides,
}

#[derive(Debug, Args)]
struct RidgeArgs {
    #[arg(long = "in")]
    input: PathBuf,
    /// Right-hand side (CSV or binary); a seeded Gaussian vector when absent.
    #[arg(long)]
    y: Option<PathBuf>,
    #[arg(long)]
    lambda: f64,
    #[arg(long, default_value_t = 0.5)]
    eps: f64,
    /// Known upper bound on the statistical dimension; estimated when absent.
    #[arg(long)]
    s_lambda: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Solution output (CSV or binary by extension).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long)]
    no_wall_time: bool,
    #[command(flatten)]
    consts: ConstOverrides,
}

#[derive(Debug, Args)]
struct BenchArgs {
    #[arg(long, default_value_t = 1024)]
    n: usize,
    #[arg(long, default_value_t = 4)]
    k: usize,
    #[arg(long, default_value_t = 0.5)]
    eps: f64,
    #[arg(long, value_enum, default_value_t = Variant::GammaB)]
    variant: Variant,
    /// Comma-separated budgets; `match` uses whatever the Frobenius pipeline read.
    #[arg(long, default_value = "match")]
    budget: String,
    #[arg(long, default_value_t = 25)]
    repeats: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Table output (CSV); printed to stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long)]
    no_wall_time: bool,
    #[command(flatten)]
    consts: ConstOverrides,
}

#[derive(Debug, Args)]
struct ScalingArgs {
    #[arg(long, value_delimiter = ',', default_value = "512,1024,2048")]
    ns: Vec<usize>,
    #[arg(long, default_value_t = 5)]
    k: usize,
    #[arg(long, default_value_t = 1.0)]
    eps: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long)]
    no_wall_time: bool,
    #[command(flatten)]
    consts: ConstOverrides,
}

/// Runs the command line and returns the process exit code: 0 on success,
/// 2 on invalid input, 3 on a numerical failure that survived the retries.
pub fn cli_main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    if let Err(e) = configure_threads() {
        eprintln!("error: {e}");
        return e.exit_code();
    }
    match run(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn configure_threads() -> Result<()> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let threads: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&t| t > 0)
        .ok_or_else(|| Error::validation(format!("{THREADS_ENV} must be a positive integer, got {raw:?}")))?;
    // A second call in the same process keeps the first pool.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    Ok(())
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Gen(a) => gen(a),
        Command::Approx(a) => pipeline(a, Pipeline::Frobenius),
        Command::Spectral(a) => pipeline(a, Pipeline::Spectral),
        Command::PsdApprox(a) => pipeline(a, Pipeline::Psd),
        Command::Baseline(a) => pipeline(a, Pipeline::Baseline),
        Command::Verify(a) => verify(a),
        Command::Ridge(a) => ridge(a),
        Command::Bench(a) => bench(a),
        Command::Scaling(a) => scaling(a),
    }
}

fn emit_report(report: RunReport, path: Option<&Path>, no_wall_time: bool) -> Result<()> {
    let report = if no_wall_time { report.without_wall_time() } else { report };
    let json = report.to_json();
    match path {
        Some(p) => std::fs::write(p, json)?,
        None => std::io::stdout().write_all(json.as_bytes())?,
    }
    Ok(())
}

fn emit_text(text: &str, path: Option<&Path>) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, text)?,
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

/// Builds the instance a `gen` invocation describes.
fn generate(a: &GenArgs) -> Result<PsdMatrix> {
    let n = a.n;
    if n == 0 {
        return Err(Error::validation("n must be at least 1"));
    }
    let seed = Seed(a.seed);
    match a.kind {
        Kind::Identity => Ok(PsdMatrix::identity(n)),
        Kind::Powerlaw => gen_spectrum_psd(n, &power_law_spectrum(n, a.exponent), seed),
        Kind::Spectrum => {
            let eigs = match &a.eigs {
                Some(p) => read_vector(p)?.iter().copied().collect(),
                None => match a.profile {
                    Profile::Geometric => geometric_spectrum(n),
                    Profile::Spike => spike_spectrum(n),
                    Profile::Powerlaw => power_law_spectrum(n, a.exponent),
                },
            };
            gen_spectrum_psd(n, &eigs, seed)
        }
        Kind::Hard => {
            let spec = HardInstanceSpec { n, k: a.k, eps: a.eps, variant: a.variant.into(), seed };
            Ok(gen_hard_instance(&spec)?.matrix)
        }
        Kind::Counterexample => Ok(gen_counterexample(n, a.k, a.alpha, a.beta, a.eps)?.a),
    }
}

fn gen(a: GenArgs) -> Result<()> {
    let m = generate(&a)?;
    write_matrix(&a.out, &m)?;
    if let Some(path) = &a.report {
        let mut report = RunReport::new("gen", m.n(), a.k, a.eps, Seed(a.seed), &AlgoConfig::default());
        report.detail("trace", m.trace());
        report.detail("frobenius_sq", m.frobenius_sq());
        emit_report(report, Some(path), true)?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy)]
enum Pipeline {
    Frobenius,
    Spectral,
    Psd,
    Baseline,
}

fn run_pipeline(
    which: Pipeline,
    oracle: &PsdOracle,
    k: usize,
    eps: f64,
    config: &AlgoConfig,
    seed: Seed,
) -> Result<(LowRankFactor, RunReport)> {
    match which {
        Pipeline::Frobenius => algorithm1_frobenius(oracle, k, eps, config, seed),
        Pipeline::Spectral => algorithm2_spectral(oracle, k, eps, config, seed),
        Pipeline::Psd => psd_output(oracle, k, eps, config, seed),
        Pipeline::Baseline => sqrt_route_baseline_with(oracle, k, eps, config, seed),
    }
}

fn exact_spectrum(a: &PsdMatrix) -> Result<Option<SpectralData>> {
    if a.n() > EXACT_LIMIT {
        return Ok(None);
    }
    eig_psd(a).map(Some)
}

fn pipeline(args: RunArgs, which: Pipeline) -> Result<()> {
    let config = args.consts.config()?;
    let a = read_matrix(&args.input)?;
    let oracle = PsdOracle::new(&a);
    let (factor, mut report) = run_pipeline(which, &oracle, args.k, args.eps, &config, Seed(args.seed))?;
    if let Some(spectrum) = exact_spectrum(&a)? {
        match which {
            Pipeline::Spectral => report.evaluate_spectral(a.as_dmatrix(), &spectrum, &factor),
            _ => report.evaluate_frobenius(a.as_dmatrix(), &spectrum, &factor),
        }
    } else {
        report.flag("exact_evaluation_skipped");
    }
    if let Some(out) = &args.out {
        write_lrkf(out, &factor)?;
    }
    emit_report(report, args.report.as_deref(), args.no_wall_time)
}

fn ridge(args: RidgeArgs) -> Result<()> {
    let config = args.consts.config()?;
    let a = read_matrix(&args.input)?;
    let seed = Seed(args.seed);
    let y = match &args.y {
        Some(p) => read_vector(p)?,
        None => DVector::from_column_slice(gaussian_matrix(a.n(), 1, &mut seed.derive("y").stream("y")).as_slice()),
    };
    let oracle = PsdOracle::new(&a);
    let problem = RidgeProblem::new(&oracle, y.clone(), args.lambda, args.s_lambda)?;
    let (x, mut report) = sublinear_ridge(&problem, args.eps, &config, seed)?;
    if let Some(spectrum) = exact_spectrum(&a)? {
        evaluate_ridge(&mut report, &a, &spectrum, &y, args.lambda, &x)?;
    } else {
        report.flag("exact_evaluation_skipped");
    }
    if let Some(out) = &args.out {
        write_vector(out, &x)?;
    }
    emit_report(report, args.report.as_deref(), args.no_wall_time)
}

/// Runs every pipeline plus the score and sketch checks on one matrix and
/// records each measured quantity; `violations` counts failed checks.
fn verify(args: RunArgs) -> Result<()> {
    let config = args.consts.config()?;
    let a = read_matrix(&args.input)?;
    let (n, k, eps, seed) = (a.n(), args.k, args.eps, Seed(args.seed));
    let mut report = RunReport::new("verify", n, k, eps, seed, &config);
    let Some(spectrum) = exact_spectrum(&a)? else {
        report.flag("exact_evaluation_skipped");
        return emit_report(report, args.report.as_deref(), args.no_wall_time);
    };
    let dense = a.as_dmatrix();
    let mut violations = 0u32;
    let mut check = |report: &mut RunReport, name: &str, value: f64, ok: bool| {
        report.detail(name, value);
        if !ok {
            report.flag(&format!("violated_{name}"));
            violations += 1;
        }
    };

    let recon = (spectrum.reconstruct() - dense).norm();
    check(&mut report, "eig_residual", recon, recon <= 1e-8 * (1.0 + dense.norm()));

    let tau = exact_psd_ridge_scores(&spectrum, k, ScoreTarget::OfA)?;
    let tau_sqrt = exact_psd_ridge_scores(&spectrum, k, ScoreTarget::OfSqrtA)?;
    check(&mut report, "score_sum", tau.sum, tau.sum <= 2.0 * k as f64 + 1e-6);
    let transfer = 2.0 * (n as f64 / k as f64).sqrt();
    let worst_transfer = tau
        .scores
        .iter()
        .zip(&tau_sqrt.scores)
        .map(|(t, s)| t - transfer * s)
        .fold(f64::NEG_INFINITY, f64::max);
    check(&mut report, "score_transfer_excess", worst_transfer, worst_transfer <= 1e-8);

    let approx_oracle = PsdOracle::new(&a);
    let approx = approx_sqrt_ridge_scores(&approx_oracle, k, &config, seed.derive("scores"))?;
    let ratios = approx.scores.iter().zip(&tau_sqrt.scores).map(|(e, t)| e / t.max(1e-300));
    let (lo, hi) = ratios.fold((f64::INFINITY, 0.0f64), |(lo, hi), r| (lo.min(r), hi.max(r)));
    check(&mut report, "approx_score_min_ratio", lo, lo >= 1.0 - 1e-9);
    check(&mut report, "approx_score_max_ratio", hi, hi <= 3.0 + 1e-9);

    let pcp_oracle = PsdOracle::new(&a);
    let sketch = column_pcp(&pcp_oracle, k, eps, &config, seed.derive("pcp"))?;
    let pcp = verify_pcp(&sketch, &a, 100, seed.derive("pcp_battery"))?;
    check(&mut report, "column_pcp_distortion", pcp.worst_distortion, pcp.worst_distortion <= eps);

    if 4 * k < n {
        for (which, name) in [
            (Pipeline::Frobenius, "algorithm1"),
            (Pipeline::Spectral, "algorithm2"),
            (Pipeline::Psd, "psd_output"),
            (Pipeline::Baseline, "baseline"),
        ] {
            let oracle = PsdOracle::new(&a);
            let (factor, mut r) = run_pipeline(which, &oracle, k, eps, &config, seed.derive(name))?;
            match which {
                Pipeline::Spectral => r.evaluate_spectral(dense, &spectrum, &factor),
                _ => r.evaluate_frobenius(dense, &spectrum, &factor),
            }
            let bound = if matches!(which, Pipeline::Baseline) { 1.0 + 3.0 * eps } else { 1.0 + eps };
            let ratio = r.ratio.unwrap_or(f64::INFINITY);
            check(&mut report, &format!("{name}_ratio"), ratio, ratio <= bound);
            report.size(&format!("{name}_accesses"), r.accesses as usize);
        }
    } else {
        report.flag("pipelines_skipped");
    }
    report.detail("violations", violations as f64);
    report.opt_frob_tail_sq = Some(spectrum.frob_tail_sq(k));
    report.opt_spec_tail_sq = Some(spectrum.spec_tail_sq(k));
    emit_report(report, args.report.as_deref(), args.no_wall_time)
}

fn parse_budgets(text: &str) -> Result<Vec<Budget>> {
    text.split(',')
        .map(|s| match s.trim() {
            "match" => Ok(Budget::MatchAlgorithm1),
            other => other
                .parse()
                .map(Budget::Fixed)
                .map_err(|_| Error::validation(format!("budget {other:?} is neither an integer nor `match`"))),
        })
        .collect()
}

fn bench(args: BenchArgs) -> Result<()> {
    let config = args.consts.config()?;
    let budgets = parse_budgets(&args.budget)?;
    let spec = HardInstanceSpec { n: args.n, k: args.k, eps: args.eps, variant: args.variant.into(), seed: Seed(args.seed) };
    let start = std::time::Instant::now();
    let algorithms = [BenchAlgorithm::Algorithm1, BenchAlgorithm::UniformStrawman];
    let rows = run_budget_experiment(&spec, &algorithms, &budgets, args.repeats, &config, Seed(args.seed))?;
    emit_text(&to_csv(&rows), args.out.as_deref())?;
    if let Some(path) = &args.report {
        let mut report = RunReport::new("bench", args.n, args.k, args.eps, Seed(args.seed), &config);
        report.accesses = rows.iter().map(|r| r.accesses_used).sum();
        report.wall_ms = start.elapsed().as_secs_f64() * 1e3;
        report.size("repeats", args.repeats);
        for alg in algorithms {
            report.detail(&format!("success_rate_{}", alg.tag()), success_rate(&rows, alg));
        }
        emit_report(report, Some(path), args.no_wall_time)?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalingPoint {
    pub n: usize,
    pub accesses: u64,
    pub wall_ms: f64,
}

impl ScalingPoint {
    pub fn per_n2(&self) -> f64 {
        self.accesses as f64 / (self.n as f64 * self.n as f64)
    }
}

/// Least-squares slope of `log(accesses)` against `log(n)`.
pub fn loglog_slope(points: &[ScalingPoint]) -> f64 {
    let xs: Vec<f64> = points.iter().map(|p| (p.n as f64).ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| (p.accesses as f64).ln()).collect();
    let m = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / m, ys.iter().sum::<f64>() / m);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

/// Runs the Frobenius pipeline on a power-law instance at each size.
pub fn scaling_sweep(ns: &[usize], k: usize, eps: f64, config: &AlgoConfig, seed: Seed) -> Result<Vec<ScalingPoint>> {
    ns.par_iter()
        .map(|&n| {
            let a = gen_spectrum_psd(n, &power_law_spectrum(n, 1.0), seed.derive_indexed("instance", n as u64))?;
            let oracle = PsdOracle::new(&a);
            let (_, report) = algorithm1_frobenius(&oracle, k, eps, config, seed.derive_indexed("run", n as u64))?;
            Ok(ScalingPoint { n, accesses: report.accesses, wall_ms: report.wall_ms })
        })
        .collect()
}

pub const SCALING_HEADER: &str = "n,accesses,accesses_per_n2";

fn scaling(args: ScalingArgs) -> Result<()> {
    let config = args.consts.config()?;
    if args.ns.len() < 2 {
        return Err(Error::validation("scaling needs at least two sizes"));
    }
    let start = std::time::Instant::now();
    let points = scaling_sweep(&args.ns, args.k, args.eps, &config, Seed(args.seed))?;
    let mut csv = format!("{SCALING_HEADER}\n");
    for p in &points {
        csv.push_str(&format!("{},{},{:e}\n", p.n, p.accesses, p.per_n2()));
    }
    emit_text(&csv, args.out.as_deref())?;
    if let Some(path) = &args.report {
        let n_max = points.iter().map(|p| p.n).max().unwrap_or(0);
        let mut report = RunReport::new("scaling", n_max, args.k, args.eps, Seed(args.seed), &config);
        report.accesses = points.iter().map(|p| p.accesses).sum();
        report.wall_ms = start.elapsed().as_secs_f64() * 1e3;
        report.detail("loglog_slope", loglog_slope(&points));
        for p in &points {
            report.size(&format!("accesses_n{}", p.n), p.accesses as usize);
        }
        emit_report(report, Some(path), args.no_wall_time)?;
    }
    Ok(())
}
