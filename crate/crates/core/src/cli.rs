//! Command-line front end. Exit codes: 0 when the null is not rejected,
//! 2 when it is, 1 on any error.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::goftest::{
    bootstrap_test, significance_trace, write_trace_csv, QuadratureGrid, TestConfig, TestReport, WeightFunction,
    DEFAULT_QUAD_POINTS,
};
use crate::io::{format_float, read_dataset_file};
use crate::kernels::{BandwidthMatrix, KernelFamily, KernelSpec};
use crate::simulation::{load_scenario, run_scenario, write_results_csv};
use crate::trend::{ols_fit, IterConfig, TrendModel};
use crate::variography::{
    default_max_lag, empirical_semivariogram, fit_variogram_wls, initial_model, VariogramFamily, VariogramFit,
    DEFAULT_BINS,
};

pub const EXIT_ACCEPT: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_REJECT: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "spatial-gof", version, about = "Goodness-of-fit tests for spatial trend models")]
pub struct Cli {
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true, env = "SPATIAL_GOF_THREADS")]
    pub threads: Option<usize>,

    /// Increase log verbosity (-v, -vv).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, clap::Args)]
pub struct FitArgs {
    /// Dataset CSV with columns x, y, z.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub trend_degree: usize,
    /// exponential, spherical or rational-quadratic.
    #[arg(long, default_value = "exponential")]
    pub variogram: VariogramFamily,
}

#[derive(Debug, clap::Args)]
pub struct TestArgs {
    #[command(flatten)]
    pub fit: FitArgs,
    /// Bootstrap replicates.
    #[arg(long = "B", default_value_t = 500)]
    pub replicates: usize,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    /// Drawn from system entropy and printed when omitted.
    #[arg(long)]
    pub seed: Option<u64>,
    /// `one` or `box:x0,x1,y0,y1`.
    #[arg(long, default_value = "one")]
    pub weight: WeightFunction,
    #[arg(long, default_value_t = DEFAULT_QUAD_POINTS)]
    pub quad_points: usize,
    /// triweight or gaussian.
    #[arg(long, default_value = "triweight")]
    pub kernel: KernelFamily,
    /// Refit the variogram on every bootstrap sample.
    #[arg(long)]
    pub refit_variogram: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Bootstrap test at one bandwidth; prints a JSON report.
    Test {
        #[command(flatten)]
        args: TestArgs,
        /// Diagonal bandwidth `h1,h2`.
        #[arg(long)]
        bandwidth: String,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
    },
    /// p-values over a bandwidth grid.
    Trace {
        #[command(flatten)]
        args: TestArgs,
        /// `h1min:h1max:steps,h2min:h2max:steps`.
        #[arg(long)]
        bandwidth_grid: String,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
    },
    /// Empirical semivariogram of the least squares residuals and fits of
    /// every variogram family.
    Variogram {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value_t = 1)]
        trend_degree: usize,
        #[arg(long, default_value_t = DEFAULT_BINS)]
        bins: usize,
        /// Defaults to half the largest pairwise distance.
        #[arg(long)]
        max_lag: Option<f64>,
        /// Bins and fitted curves; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Fitted parameters per family; stderr when omitted.
        #[arg(long)]
        fits_out: Option<PathBuf>,
    },
    /// Rejection proportions for a scenario file.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the replicate count of the config.
        #[arg(long)]
        replicates: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// `h1,h2,...` into a diagonal bandwidth.
pub fn parse_bandwidth(spec: &str) -> Result<BandwidthMatrix> {
    let values = spec
        .split(',')
        .map(|v| {
            v.trim()
                .parse::<f64>()
                .map_err(|_| Error::InvalidInput(format!("bad bandwidth entry '{v}'")))
        })
        .collect::<Result<Vec<f64>>>()?;
    BandwidthMatrix::diagonal_from(values)
}

/// `min:max:steps` per axis, comma separated; the grid is the Cartesian
/// product with the first axis varying slowest. One step yields `min`.
pub fn parse_bandwidth_grid(spec: &str) -> Result<Vec<BandwidthMatrix>> {
    if spec.trim().is_empty() {
        return Err(Error::InvalidInput("empty bandwidth grid".into()));
    }
    let axes = spec
        .split(',')
        .map(|axis| {
            let parts: Vec<&str> = axis.split(':').map(str::trim).collect();
            let [lo, hi, steps] = parts[..] else {
                return Err(Error::InvalidInput(format!("bandwidth axis '{axis}' is not min:max:steps")));
            };
            let num = |s: &str| s.parse::<f64>().map_err(|_| Error::InvalidInput(format!("bad number '{s}' in bandwidth grid")));
            let (lo, hi) = (num(lo)?, num(hi)?);
            let steps: usize = steps
                .parse()
                .map_err(|_| Error::InvalidInput(format!("bad step count '{steps}' in bandwidth grid")))?;
            if steps == 0 || !(lo > 0.0) || hi < lo || !hi.is_finite() {
                return Err(Error::InvalidInput(format!("bandwidth axis '{axis}' needs 0 < min <= max and steps >= 1")));
            }
            Ok(if steps == 1 {
                vec![lo]
            } else {
                (0..steps).map(|i| lo + (hi - lo) * i as f64 / (steps - 1) as f64).collect()
            })
        })
        .collect::<Result<Vec<Vec<f64>>>>()?;
    let mut grid: Vec<Vec<f64>> = vec![Vec::new()];
    for axis in &axes {
        grid = grid
            .into_iter()
            .flat_map(|prefix| {
                axis.iter().map(move |v| {
                    let mut p = prefix.clone();
                    p.push(*v);
                    p
                })
            })
            .collect();
    }
    grid.into_iter().map(BandwidthMatrix::diagonal_from).collect()
}

fn open_output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(std::io::BufWriter::new(
            std::fs::File::create(p).map_err(|e| Error::Io(format!("{}: {e}", p.display())))?,
        )),
        None => Box::new(std::io::stdout().lock()),
    })
}

fn resolve_seed(seed: Option<u64>) -> u64 {
    seed.unwrap_or_else(|| {
        let s = rand::random::<u64>();
        eprintln!("seed: {s}");
        s
    })
}

struct Prepared {
    data: crate::smoothing::SpatialDataset,
    model: TrendModel,
    kernel: KernelSpec,
    quad: QuadratureGrid,
    config: TestConfig,
    seed: u64,
}

fn prepare(args: &TestArgs) -> Result<Prepared> {
    if !(args.alpha > 0.0 && args.alpha < 1.0) {
        return Err(Error::InvalidInput(format!("alpha must lie in (0, 1), got {}", args.alpha)));
    }
    let data = read_dataset_file(&args.fit.data)?;
    let model = TrendModel::polynomial(data.dim(), args.fit.trend_degree)?;
    let kernel = KernelSpec::new(args.kernel, data.dim())?;
    let quad = QuadratureGrid::bounding(data.dim(), data.locations(), args.quad_points)?;
    let config = TestConfig {
        replicates: args.replicates,
        refit_variogram: args.refit_variogram,
        iter: IterConfig::default(),
    };
    Ok(Prepared {
        data,
        model,
        kernel,
        quad,
        config,
        seed: resolve_seed(args.seed),
    })
}

#[derive(Serialize)]
struct TestOutput<'a> {
    seed: u64,
    alpha: f64,
    reject: bool,
    #[serde(flatten)]
    report: &'a TestReport,
}

fn cmd_test(args: &TestArgs, bandwidth: &str, format: Format) -> Result<i32> {
    let h = parse_bandwidth(bandwidth)?;
    let p = prepare(args)?;
    let report = bootstrap_test(
        &p.data,
        &p.model,
        args.fit.variogram,
        &p.kernel,
        &h,
        &args.weight,
        &p.quad,
        &p.config,
        p.seed,
    )?;
    let reject = report.rejects(args.alpha);
    let mut out = open_output(args.out.as_deref())?;
    match format {
        Format::Json => {
            let doc = TestOutput {
                seed: p.seed,
                alpha: args.alpha,
                reject,
                report: &report,
            };
            serde_json::to_writer_pretty(&mut out, &doc).map_err(|e| Error::Io(e.to_string()))?;
            writeln!(out)?;
        }
        Format::Csv => {
            let mut wtr = csv::Writer::from_writer(&mut out);
            let mut header: Vec<String> = (1..=h.dim()).map(|i| format!("h{i}")).collect();
            header.extend(["t_n", "p_value", "B", "seed", "reject"].map(String::from));
            wtr.write_record(&header).map_err(|e| Error::Io(e.to_string()))?;
            let mut row: Vec<String> = h.diagonal().iter().map(|v| format_float(*v)).collect();
            row.extend([
                format_float(report.t_n),
                format_float(report.p_value),
                report.replicates.to_string(),
                p.seed.to_string(),
                reject.to_string(),
            ]);
            wtr.write_record(&row).map_err(|e| Error::Io(e.to_string()))?;
            wtr.flush()?;
        }
    }
    out.flush()?;
    Ok(if reject { EXIT_REJECT } else { EXIT_ACCEPT })
}

fn cmd_trace(args: &TestArgs, grid_spec: &str, format: Format) -> Result<i32> {
    let grid = parse_bandwidth_grid(grid_spec)?;
    let p = prepare(args)?;
    let entries = significance_trace(
        &p.data,
        &p.model,
        args.fit.variogram,
        &p.kernel,
        &grid,
        &args.weight,
        &p.quad,
        &p.config,
        p.seed,
    )?;
    let mut out = open_output(args.out.as_deref())?;
    match format {
        Format::Csv => write_trace_csv(&entries, &mut out)?,
        Format::Json => {
            serde_json::to_writer_pretty(&mut out, &entries).map_err(|e| Error::Io(e.to_string()))?;
            writeln!(out)?;
        }
    }
    out.flush()?;
    for e in entries.iter().filter(|e| e.p_value.is_none()) {
        log::warn!("bandwidth {}: {}", e.bandwidth, e.reason.as_deref().unwrap_or(""));
    }
    let reject = entries.iter().any(|e| e.p_value.is_some_and(|p| p <= args.alpha));
    Ok(if reject { EXIT_REJECT } else { EXIT_ACCEPT })
}

fn cmd_variogram(
    data: &Path,
    degree: usize,
    bins: usize,
    max_lag: Option<f64>,
    out: Option<&Path>,
    fits_out: Option<&Path>,
) -> Result<i32> {
    let data = read_dataset_file(data)?;
    let model = TrendModel::polynomial(data.dim(), degree)?;
    let fitted = ols_fit(&model, &data)?.fitted(data.locations());
    let residuals: Vec<f64> = data.responses().iter().zip(&fitted).map(|(z, m)| z - m).collect();
    let max_lag = max_lag.unwrap_or_else(|| default_max_lag(data.dim(), data.locations()));
    let emp = empirical_semivariogram(data.dim(), data.locations(), &residuals, bins, max_lag)?;
    if emp.len() < 3 {
        log::warn!("only {} nonempty lag bins; variogram fits need at least 3", emp.len());
    }
    let fits: Vec<(VariogramFamily, Result<VariogramFit>)> = VariogramFamily::ALL
        .iter()
        .map(|&f| (f, initial_model(&emp, f).and_then(|start| fit_variogram_wls(&emp, f, &start))))
        .collect();

    let io = |e: csv::Error| Error::Io(e.to_string());
    let mut wtr = csv::Writer::from_writer(open_output(out)?);
    let mut header = vec!["lag".to_string(), "gamma".to_string(), "npairs".to_string()];
    header.extend(fits.iter().map(|(f, _)| format!("gamma_{}", f.name().replace('-', "_"))));
    wtr.write_record(&header).map_err(io)?;
    for j in 0..emp.len() {
        let h = emp.bin_centers[j];
        let mut row = vec![format_float(h), format_float(emp.gamma_hat[j]), emp.pair_counts[j].to_string()];
        row.extend(fits.iter().map(|(_, fit)| match fit {
            Ok(fit) => format_float(fit.model.semivariance(h)),
            Err(_) => "NA".to_string(),
        }));
        wtr.write_record(&row).map_err(io)?;
    }
    wtr.flush()?;

    let sink: Box<dyn Write> = match fits_out {
        Some(p) => open_output(Some(p))?,
        None => Box::new(std::io::stderr().lock()),
    };
    let mut wtr = csv::Writer::from_writer(sink);
    wtr.write_record(["family", "nugget", "partial_sill", "range", "objective", "converged", "at_boundary", "error"])
        .map_err(io)?;
    for (family, fit) in &fits {
        let row: Vec<String> = match fit {
            Ok(f) => vec![
                family.name().into(),
                format_float(f.model.nugget),
                format_float(f.model.partial_sill),
                format_float(f.model.range),
                format_float(f.objective),
                f.converged.to_string(),
                f.at_boundary.to_string(),
                String::new(),
            ],
            Err(e) => {
                let mut r = vec![family.name().to_string()];
                r.extend(["NA"; 6].map(String::from));
                r.push(e.to_string());
                r
            }
        };
        wtr.write_record(&row).map_err(io)?;
    }
    wtr.flush()?;
    if fits.iter().all(|(_, f)| f.is_err()) {
        return Err(fits.into_iter().find_map(|(_, f)| f.err()).expect("all fits failed"));
    }
    Ok(EXIT_ACCEPT)
}

fn cmd_simulate(config: &Path, replicates: Option<usize>, out: Option<&Path>) -> Result<i32> {
    let mut cfg = load_scenario(config)?;
    if let Some(r) = replicates {
        cfg.replicates = r;
        cfg.validate()?;
    }
    let result = run_scenario(&cfg)?;
    write_results_csv(&result.rows, open_output(out)?)?;
    if let Some(path) = out {
        let meta = path.with_extension("meta.json");
        let doc = serde_json::json!({
            "config": cfg,
            "grid_convention": result.grid_convention,
            "failures": result.failures,
            "failures_excluded": result.failures_excluded,
        });
        std::fs::write(&meta, serde_json::to_string_pretty(&doc).map_err(|e| Error::Io(e.to_string()))?)?;
    }
    eprintln!(
        "{} replicates, {} failed{}",
        cfg.replicates,
        result.failures.len(),
        if result.failures.is_empty() {
            ""
        } else if result.failures_excluded {
            " (excluded from proportions)"
        } else {
            " (counted as non-rejections)"
        }
    );
    for row in &result.rows {
        eprintln!("h = ({}, {}): {:.3}", row.h1, row.h2, row.proportion);
    }
    Ok(EXIT_ACCEPT)
}

/// Runs a parsed command; returns the process exit code.
pub fn execute(cli: Cli) -> Result<i32> {
    match &cli.command {
        Command::Test { args, bandwidth, format } => cmd_test(args, bandwidth, *format),
        Command::Trace {
            args,
            bandwidth_grid,
            format,
        } => cmd_trace(args, bandwidth_grid, *format),
        Command::Variogram {
            data,
            trend_degree,
            bins,
            max_lag,
            out,
            fits_out,
        } => cmd_variogram(data, *trend_degree, *bins, *max_lag, out.as_deref(), fits_out.as_deref()),
        Command::Simulate { config, replicates, out } => cmd_simulate(config, *replicates, out.as_deref()),
    }
}

/// Parses arguments, configures logging and threads, and runs. Errors are
/// printed to stderr prefixed with their pipeline stage.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_ERROR } else { EXIT_ACCEPT };
            let _ = e.print();
            return code;
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).try_init();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            log::debug!("thread pool already configured: {e}");
        }
    }
    match execute(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error [{}]: {e}", e.stage());
            EXIT_ERROR
        }
    }
}
