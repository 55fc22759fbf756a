use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use super::experiments::{run_experiment, tidy_to_csv, ExperimentSpec, KernelRef};
use super::io::{matrix_to_csv, read_matrix, write_text};
use crate::coupling::{block_size, rate_chi, rate_xi, rate_zaitsev, PairCoupler, RateParams, Regime};
use crate::covest::{qhat_with, Centering, CovProcess};
use crate::error::{Error, Result};
use crate::inference::{quantile_mc_detailed, run_test, Statistic, TestConfig};
use crate::matops::{trace_norm, SymMat};
use crate::procmodel::{gen_path, replicate_rng, InnovationStream};

/// Environment variable supplying the default seed.
pub const SEED_ENV: &str = "SEQGAUSS_SEED";

#[derive(Debug, Parser)]
#[command(name = "seqgauss", version, about = "Gaussian approximation tools for nonstationary time series")]
struct Cli {
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate a path from a kernel and write it as CSV.
    Simulate(SimulateArgs),
    /// Estimate the cumulative long-run covariance process of a CSV path.
    EstimateCov(EstimateArgs),
    /// Run the sequential mean or CUSUM test on a CSV path.
    Test(TestArgs),
    /// Monte-Carlo quantile of a statistic for a covariance process.
    Calibrate(CalibrateArgs),
    /// Print the approximation rates and block sizes.
    Rates(RatesArgs),
    /// Check the Gaussian pair coupling by simulation.
    VerifyCoupling(CouplingArgs),
    /// Run an experiment described by a JSON spec.
    Experiment(ExperimentArgs),
}

#[derive(Debug, Args)]
struct SimulateArgs {
    /// Kernel JSON file or demo name (iid, ma1, lipschitz, jump, categorical).
    #[arg(long)]
    kernel: String,
    #[arg(long)]
    n: usize,
    /// Dimension override (demo kernels default to 1).
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Write a `x1,...,xd` header line.
    #[arg(long)]
    header: bool,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EstimateArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    bandwidth: Option<usize>,
    /// Subtract the global sample mean first.
    #[arg(long)]
    center: bool,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct TestArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value = "seq")]
    stat: Statistic,
    #[arg(long, default_value_t = 0.1)]
    alpha: f64,
    #[arg(long)]
    bandwidth: Option<usize>,
    /// Monte-Carlo paths.
    #[arg(long, default_value_t = 2000)]
    mc: usize,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    nu: Option<f64>,
    #[arg(long)]
    center: bool,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct CalibrateArgs {
    /// Covariance process JSON as written by `estimate-cov`.
    #[arg(long)]
    cov: PathBuf,
    #[arg(long, default_value = "seq")]
    stat: Statistic,
    #[arg(long, default_value_t = 0.1)]
    alpha: f64,
    #[arg(long, default_value_t = 2000)]
    mc: usize,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct RatesArgs {
    #[arg(long)]
    q: f64,
    #[arg(long)]
    beta: f64,
    /// With `--d`, also print block sizes and the comparator rate.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    d: Option<usize>,
}

#[derive(Debug, Args)]
struct CouplingArgs {
    /// First covariance: inline JSON rows (e.g. `[[2,0],[0,1]]`) or a file.
    #[arg(long)]
    sigma1: String,
    #[arg(long)]
    sigma2: String,
    #[arg(long, default_value_t = 100_000)]
    reps: usize,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ExperimentArgs {
    #[arg(long)]
    spec: PathBuf,
    /// Overrides the spec's seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    output: Option<PathBuf>,
    /// Tidy CSV, one row per grid point and replicate.
    #[arg(long)]
    tidy: Option<PathBuf>,
}

fn resolve_seed(flag: Option<u64>) -> Result<u64> {
    if let Some(s) = flag {
        return Ok(s);
    }
    match std::env::var(SEED_ENV) {
        Ok(v) => v.trim().parse().map_err(|_| Error::invalid(format!("{SEED_ENV} must be an unsigned integer"))),
        Err(_) => Ok(0),
    }
}

fn emit(out: &mut dyn Write, path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => write_text(p, text),
        None => out.write_all(text.as_bytes()).map_err(Error::from),
    }
}

fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}

fn parse_matrix_arg(arg: &str) -> Result<SymMat> {
    let text = if arg.trim_start().starts_with('[') {
        arg.to_string()
    } else {
        std::fs::read_to_string(arg).map_err(|e| Error::Io(format!("{arg}: {e}")))?
    };
    let rows: Vec<Vec<f64>> = serde_json::from_str(&text)?;
    let dense = crate::matops::Matrix::from_rows(&rows)?;
    let d = dense.rows();
    if dense.cols() != d {
        return Err(Error::invalid("covariance must be square"));
    }
    let sym = SymMat::from_dense(d, dense.as_slice())?;
    // a non-PSD argument is bad input, not a numerical failure
    crate::matops::sqrt_psd(&sym).map_err(|e| match e {
        Error::NotPsd { .. } => Error::invalid(format!("{arg}: {e}")),
        other => other,
    })?;
    Ok(sym)
}

#[derive(Serialize)]
struct CalibrationOutput {
    statistic: Statistic,
    alpha: f64,
    seed: u64,
    quantile: f64,
    quantile_se: f64,
    mc_reps: usize,
    projected_increments: usize,
    clipped_mass: f64,
}

#[derive(Serialize)]
struct CouplingOutput {
    d: usize,
    reps: usize,
    seed: u64,
    expected_sq_distance: f64,
    mean_sq_distance: f64,
    relative_distance_error: f64,
    target_cov_relative_error: f64,
    clamped: f64,
    interpolated: bool,
}

fn run(cli: Cli, out: &mut dyn Write) -> Result<()> {
    match cli.command {
        Command::Simulate(a) => {
            let seed = resolve_seed(a.seed)?;
            let spec = KernelRef::Named(a.kernel).resolve(None)?;
            let d = a.d.unwrap_or_else(|| spec.dim());
            let kernel = spec.with_shape(a.n, d)?.build()?;
            let x = gen_path(kernel.as_ref(), a.n, &InnovationStream::new(seed))?;
            emit(out, a.output.as_deref(), &matrix_to_csv(&x, a.header))
        }
        Command::EstimateCov(a) => {
            let x = read_matrix(&a.input)?;
            let b = a.bandwidth.unwrap_or_else(|| crate::covest::bandwidth_default(x.rows()));
            let centering = if a.center { Centering::Global } else { Centering::None };
            let q = qhat_with(&x, b, centering)?;
            let mut text = q.to_json();
            text.push('\n');
            emit(out, a.output.as_deref(), &text)
        }
        Command::Test(a) => {
            let x = read_matrix(&a.input)?;
            let cfg = TestConfig {
                statistic: a.stat,
                alpha: a.alpha,
                nu: a.nu,
                tau: a.tau,
                bandwidth: a.bandwidth,
                mc_reps: a.mc,
                seed: resolve_seed(a.seed)?,
                centering: if a.center { Centering::Global } else { Centering::None },
            };
            let report = run_test(&x, &cfg)?;
            emit(out, a.output.as_deref(), &to_json(&report))
        }
        Command::Calibrate(a) => {
            let seed = resolve_seed(a.seed)?;
            let q = CovProcess::from_file(&a.cov)?;
            let est = quantile_mc_detailed(&q, a.stat, a.alpha, a.mc, seed)?;
            let o = CalibrationOutput {
                statistic: a.stat,
                alpha: a.alpha,
                seed,
                quantile: est.quantile,
                quantile_se: est.standard_error,
                mc_reps: est.mc_reps,
                projected_increments: est.projected_increments,
                clipped_mass: est.clipped_mass,
            };
            emit(out, a.output.as_deref(), &to_json(&o))
        }
        Command::Rates(a) => {
            let mut text = format!("chi={}\n", rate_chi(a.q, a.beta)?);
            match rate_xi(a.q, a.beta) {
                Ok(xi) => text.push_str(&format!("xi={xi}\n")),
                Err(_) => text.push_str("xi=undefined (needs beta > 2)\n"),
            }
            match (a.n, a.d) {
                (Some(n), Some(d)) => {
                    let p = RateParams { q: a.q, beta: a.beta, n, d };
                    text.push_str(&format!("block_chi={}\n", block_size(p, Regime::Chi)?));
                    if a.beta > 2.0 {
                        text.push_str(&format!("block_xi={}\n", block_size(p, Regime::Xi)?));
                    }
                    text.push_str(&format!("zaitsev={}\n", rate_zaitsev(a.q, d, n)?));
                }
                (None, None) => {}
                _ => return Err(Error::invalid("--n and --d go together")),
            }
            emit(out, None, &text)
        }
        Command::VerifyCoupling(a) => {
            let seed = resolve_seed(a.seed)?;
            let s1 = parse_matrix_arg(&a.sigma1)?;
            let s2 = parse_matrix_arg(&a.sigma2)?;
            if a.reps < 10 {
                return Err(Error::invalid("need at least 10 replications"));
            }
            let c = PairCoupler::new(&s1, &s2)?;
            let d = c.dim();
            let mut rng = replicate_rng(seed, 0);
            let mut cov = SymMat::zeros(d);
            let mut dist = 0.0;
            for _ in 0..a.reps {
                let (y, y2) = c.sample(&mut rng);
                cov.add_outer(1.0, &y2);
                dist += y.iter().zip(&y2).map(|(u, v)| (u - v).powi(2)).sum::<f64>();
            }
            let r = a.reps as f64;
            let mean = dist / r;
            let expected = trace_norm(&s2.sub(&s1));
            let cov_err = cov.scale(1.0 / r).sub(&s2).frobenius() / s2.frobenius().max(f64::MIN_POSITIVE);
            let o = CouplingOutput {
                d,
                reps: a.reps,
                seed,
                expected_sq_distance: expected,
                mean_sq_distance: mean,
                relative_distance_error: if expected > 0.0 { (mean - expected).abs() / expected } else { mean },
                target_cov_relative_error: cov_err,
                clamped: c.clamped(),
                interpolated: c.interpolated(),
            };
            emit(out, a.output.as_deref(), &to_json(&o))
        }
        Command::Experiment(a) => {
            let text = std::fs::read_to_string(&a.spec).map_err(|e| Error::Io(format!("{}: {e}", a.spec.display())))?;
            let mut spec = ExperimentSpec::from_json(&text)?;
            if let Some(s) = a.seed {
                spec.seed = s;
            } else if std::env::var(SEED_ENV).is_ok() && !text.contains("\"seed\"") {
                spec.seed = resolve_seed(None)?;
            }
            let base = a.spec.parent().map(Path::to_path_buf);
            let res = run_experiment(&spec, base.as_deref())?;
            let output = a.output.or_else(|| spec.output.as_ref().map(|p| resolve(base.as_deref(), p)));
            let tidy = a.tidy.or_else(|| spec.tidy_output.as_ref().map(|p| resolve(base.as_deref(), p)));
            if let Some(t) = tidy {
                write_text(&t, &tidy_to_csv(&res.tidy))?;
            }
            emit(out, output.as_deref(), &to_json(&res.report))
        }
    }
}

fn resolve(base: Option<&Path>, p: &Path) -> PathBuf {
    match base {
        Some(b) if p.is_relative() => b.join(p),
        _ => p.to_path_buf(),
    }
}

/// Runs the command line front end and returns the process exit code:
/// 0 on success, 1 for invalid input or usage errors, 2 for numerical
/// failures.
pub fn run_cli<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 { out.write_all(text.as_bytes()) } else { err.write_all(text.as_bytes()) };
            return code;
        }
    };
    let result = match cli.jobs {
        Some(0) => Err(Error::invalid("--jobs must be positive")),
        Some(j) => rayon::ThreadPoolBuilder::new()
            .num_threads(j)
            .build()
            .map_err(|e| Error::Numerical(format!("thread pool: {e}")))
            .and_then(|pool| {
                let mut buf = Vec::new();
                pool.install(|| run(cli, &mut buf))?;
                out.write_all(&buf).map_err(Error::from)
            }),
        None => run(cli, out),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

/// Entry point used by the binary.
pub fn cli_main() -> i32 {
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    let mut out = stdout.lock();
    let mut err = stderr.lock();
    let code = run_cli(std::env::args_os(), &mut out, &mut err);
    let _ = out.flush();
    code
}
