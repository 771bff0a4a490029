mod commands;
mod manifest;
mod render;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

pub const VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), " (container TVSPEC01)");

const EXIT_USAGE: u8 = 2;
const EXIT_DATA: u8 = 3;
const EXIT_STRICT: u8 = 4;

#[derive(Parser)]
#[command(name = "tvspec", version = VERSION, about = "Adaptive time-varying spectral density estimation")]
#[command(after_help = "Environment:\n  TVSPEC_THREADS  number of worker threads (default: all cores)\n  RUST_LOG        log filter (default: info)\n\nExit status: 0 success, 2 usage error, 3 data error, 4 warning escalated by --strict.")]
pub struct Cli {
    /// Treat configuration warnings as errors (exit status 4).
    #[arg(long, global = true)]
    strict: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Model {
    /// White noise whose standard deviation jumps at t0.
    WnBreak,
    /// Time-varying MA(1) `cos(2 pi t/T) Z_t - (t/T)^2 Z_{t-1}`.
    Tvma2,
    /// White noise up to t0, then the shifted time-varying MA(1).
    Tvma2Break,
}

#[derive(Args, Clone, Debug)]
pub struct ModelArgs {
    /// Model to simulate.
    #[arg(long, value_enum)]
    model: Model,
    /// Series length.
    #[arg(long = "T", value_name = "N")]
    len: usize,
    /// Break index in samples [default: 576/1024 of T for wn-break, 410/1024 for tvma2-break].
    #[arg(long)]
    t0: Option<usize>,
    /// Standard deviation before the break [default: 1].
    #[arg(long)]
    sigma: Option<f64>,
    /// Standard deviation after the break, wn-break only [default: sqrt(10) * sigma].
    #[arg(long)]
    sigma2: Option<f64>,
    /// Rescaled-time shift of the moving average after the break, tvma2-break only [default: 0.2].
    #[arg(long)]
    shift: Option<f64>,
}

#[derive(Args, Clone, Copy, Debug)]
pub struct GridArgs {
    /// Keep every d-th half-integer time of the raw grid in the output [default: 1, or the config value].
    #[arg(long = "dt", value_name = "D")]
    d_t: Option<usize>,
    /// Keep every d-th frequency of the raw grid in the output [default: 1, or the config value].
    #[arg(long = "df", value_name = "D")]
    d_f: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum RawFormat {
    /// Binary TVSPEC01 container.
    Bin,
    /// Long CSV `tau,j,value`.
    Csv,
}

#[derive(Subcommand)]
pub enum Command {
    /// Simulate a series from one of the built-in models.
    Simulate {
        #[command(flatten)]
        model: ModelArgs,
        /// Seed of the innovation generator.
        #[arg(long)]
        seed: u64,
        /// Output series CSV (`t,value`).
        #[arg(long)]
        out: PathBuf,
        /// Also write the true spectrum (`u,lambda,f`) on the estimation grid.
        #[arg(long)]
        truth: Option<PathBuf>,
        #[command(flatten)]
        grid: GridArgs,
    },
    /// Compute the modified pre-periodogram of a series.
    Preperiodogram {
        /// Input series CSV with a `value` column, or a single headerless column.
        #[arg(long = "in", value_name = "PATH")]
        input: PathBuf,
        /// Output file.
        #[arg(long)]
        out: PathBuf,
        /// Output format.
        #[arg(long, value_enum, default_value_t = RawFormat::Bin)]
        format: RawFormat,
    },
    /// Nonadaptive kernel estimate with global bandwidths.
    Baseline {
        /// Raw plane container written by `preperiodogram`.
        #[arg(long)]
        raw: PathBuf,
        /// Time bandwidth in rescaled time, in (0, 1].
        #[arg(long)]
        bt: f64,
        /// Frequency bandwidth in radians, in (0, 2 pi].
        #[arg(long)]
        bf: f64,
        /// Output plane CSV (`u,lambda,f`).
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        grid: GridArgs,
    },
    /// Run the adaptive estimator.
    ///
    /// Writes estimate.csv, diagnostics.jsonl (one JSON object per
    /// iteration), config.toml (the full configuration used) and
    /// manifest.json into the output directory. With --history it also
    /// writes history.bin, a container holding for every snapshot the planes
    /// f_hat, n_hat, b_eff and theta, in that order.
    Estimate {
        /// Raw plane container written by `preperiodogram`.
        #[arg(long)]
        raw: PathBuf,
        /// Flat TOML file overriding estimator defaults; unknown keys are errors.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output directory (created if missing).
        #[arg(long)]
        out: PathBuf,
        /// Also write the per-iteration state planes.
        #[arg(long)]
        history: bool,
    },
    /// Compare an estimated plane with the true spectrum.
    Evaluate {
        /// Estimated plane CSV.
        #[arg(long)]
        est: PathBuf,
        /// Model giving the truth, as `name[:key=value,...]` with keys t0, sigma, sigma2, shift,
        /// e.g. `wn-break:t0=288`.
        #[arg(long, conflicts_with = "truth", required_unless_present = "truth")]
        truth_model: Option<String>,
        /// True spectrum as a plane CSV on the same grid.
        #[arg(long)]
        truth: Option<PathBuf>,
        /// Output JSON report.
        #[arg(long)]
        report: PathBuf,
        /// Exclude a margin of one default initial bandwidth at every edge.
        #[arg(long)]
        margin: bool,
    },
    /// Reconstruct the final adaptive kernel of one grid point.
    ///
    /// The run in the result directory is replayed from its recorded raw
    /// input and config.toml. The output lists every raw point with nonzero
    /// weight as `u,lambda,weight,penalty`; penalty is the last iteration's
    /// statistic (NaN outside its search window).
    Kernel {
        /// Directory written by `estimate`.
        #[arg(long)]
        result: PathBuf,
        /// Rescaled time of the point.
        #[arg(long)]
        u: f64,
        /// Frequency of the point in [0, pi].
        #[arg(long)]
        lambda: f64,
        /// Output CSV.
        #[arg(long)]
        out: PathBuf,
    },
    /// Render a plane as a PPM heatmap with a JSON sidecar recording the scaling.
    Render {
        /// Plane CSV.
        #[arg(long)]
        plane: PathBuf,
        /// Output PPM; the sidecar is written to `<out>.json`.
        #[arg(long)]
        out: PathBuf,
        /// Colour ramp.
        #[arg(long, value_enum, default_value_t = render::Ramp::Heat)]
        ramp: render::Ramp,
    },
    /// Simulate, estimate, and compare against nonadaptive baselines.
    ///
    /// Writes series.csv, truth.csv, raw.bin, estimate.csv, na_same.csv,
    /// na_opt.csv, diagnostics.jsonl, config.toml, estimate.ppm,
    /// summary.json and manifest.json into the output directory.
    Demo {
        /// Example to run.
        #[arg(long, value_enum)]
        example: Model,
        /// Series length.
        #[arg(long = "T", value_name = "N", default_value_t = 256)]
        len: usize,
        /// Seed of the innovation generator.
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Output directory (created if missing).
        #[arg(long, default_value = "demo_out")]
        out: PathBuf,
        /// Flat TOML file overriding estimator defaults.
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        grid: GridArgs,
    },
}

/// Failure classes mapped onto exit statuses.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Data(String),
    Strict(Vec<String>),
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Usage(m) | Failure::Data(m) => f.write_str(m),
            Failure::Strict(w) => write!(f, "warnings escalated by --strict: {}", w.join("; ")),
        }
    }
}

impl std::error::Error for Failure {}

fn exit_code(err: &anyhow::Error) -> u8 {
    if let Some(f) = err.downcast_ref::<Failure>() {
        return match f {
            Failure::Usage(_) => EXIT_USAGE,
            Failure::Data(_) => EXIT_DATA,
            Failure::Strict(_) => EXIT_STRICT,
        };
    }
    if let Some(e) = err.downcast_ref::<tvspec_core::Error>() {
        return if e.is_data_error() { EXIT_DATA } else { EXIT_USAGE };
    }
    if err.downcast_ref::<std::io::Error>().is_some()
        || err.downcast_ref::<serde_json::Error>().is_some()
    {
        return EXIT_DATA;
    }
    EXIT_USAGE
}

fn init_threads() -> anyhow::Result<()> {
    let Ok(v) = std::env::var("TVSPEC_THREADS") else { return Ok(()) };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Failure::Usage(format!("TVSPEC_THREADS must be a positive integer, got {v:?}")))?;
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = init_threads().and_then(|_| commands::run(cli.command, cli.strict));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
