use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use convlab::harness::report::{footprint_rows, write_footprint_csv};
use convlab::harness::verify::{VERIFY_ABS_TOL, VERIFY_REL_TOL};
use convlab::harness::{
    benchmark, emit_csv, parse_network_file, verify_with, LayerConfig, Outcome, Tolerance, VerifyOptions, DEFAULT_RUNS,
};
use convlab::{Error, GemmBackend, Method};

const EXIT_FAILURE: u8 = 1;
const EXIT_USAGE: u8 = 2;

/// Verify, benchmark and account convolution methods on CNN layer shapes.
#[derive(Parser)]
#[command(name = "convlab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check every method against the direct-sum oracle.
    Verify(VerifyArgs),
    /// Time methods over a network's layers.
    Bench(BenchArgs),
    /// Print closed-form memory footprints.
    Footprint(FootprintArgs),
}

#[derive(Args)]
struct Common {
    /// Network description file (`name C H W M k [stride]` per line).
    #[arg(long)]
    net: PathBuf,
    /// Comma-separated method names, or `all`.
    #[arg(long, default_value = "all")]
    methods: String,
}

#[derive(Args)]
struct GemmArgs {
    /// GEMM backend: reference, blocked or parallel.
    #[arg(long, default_value = "parallel")]
    backend: String,
    /// Worker threads for the parallel backend (default: available cores).
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args)]
struct VerifyArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Clamp layer height and width to at most this value.
    #[arg(long)]
    max_hw: Option<usize>,
    #[command(flatten)]
    gemm: GemmArgs,
    #[arg(long, default_value_t = VERIFY_REL_TOL)]
    rel_tol: f32,
    #[arg(long, default_value_t = VERIFY_ABS_TOL)]
    abs_tol: f32,
    /// Pass when within twice the f32 rounding-error bound of the oracle,
    /// instead of the rel/abs tolerance.
    #[arg(long)]
    error_bound: bool,
    /// Corrupt one intermediate value of this method (negative control).
    #[arg(long, hide = true)]
    inject_fault: Option<String>,
}

#[derive(Args)]
struct BenchArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, default_value_t = DEFAULT_RUNS)]
    runs: usize,
    #[command(flatten)]
    gemm: GemmArgs,
    /// Write results as CSV.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct FootprintArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Verify(args) => run_verify(args),
        Command::Bench(args) => run_bench(args),
        Command::Footprint(args) => run_footprint(args),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_USAGE)
        }
    }
}

fn load(common: &Common) -> Result<(Vec<LayerConfig>, Vec<Method>), Error> {
    let layers = parse_network_file(&common.net)?;
    let methods = Method::parse_list(&common.methods)?;
    let usable = layers
        .into_iter()
        .filter(|l| {
            if l.is_strided() {
                eprintln!("warning: skipping strided layer {} (stride {})", l.name, l.stride);
            }
            !l.is_strided()
        })
        .collect();
    Ok((usable, methods))
}

fn backend(args: &GemmArgs) -> Result<GemmBackend, Error> {
    let threads = args
        .threads
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    GemmBackend::from_name(&args.backend, threads)
}

fn run_verify(args: VerifyArgs) -> Result<u8, Error> {
    let (layers, methods) = load(&args.common)?;
    let gemm = backend(&args.gemm)?;
    let opts = VerifyOptions {
        tolerance: if args.error_bound {
            Tolerance::ErrorBound
        } else {
            Tolerance::AllClose {
                rel: args.rel_tol,
                abs: args.abs_tol,
            }
        },
        fault: args.inject_fault.as_deref().map(str::parse).transpose()?,
    };
    let mut failures = 0usize;
    let mut checked = 0usize;
    for layer in &layers {
        let layer = match args.max_hw {
            Some(cap) => layer.capped(cap),
            None => layer.clone(),
        };
        let report = verify_with(&layer, &methods, args.seed, &gemm, &opts)?;
        for (method, outcome) in &report.results {
            let detail = match outcome {
                Outcome::Pass { max_abs_diff } | Outcome::Fail { max_abs_diff } => {
                    format!("max_abs_diff={max_abs_diff:.3e}")
                }
                Outcome::Error(e) => e.clone(),
                Outcome::Skipped => "not applicable".to_string(),
            };
            println!(
                "{:<28} {:<16} {:<5} {}",
                layer.name,
                method.name(),
                outcome.label(),
                detail
            );
            if !matches!(outcome, Outcome::Skipped) {
                checked += 1;
            }
            if outcome.is_failure() {
                failures += 1;
            }
        }
    }
    println!("{checked} checks, {failures} failures");
    Ok(if failures > 0 { EXIT_FAILURE } else { 0 })
}

fn run_bench(args: BenchArgs) -> Result<u8, Error> {
    let (layers, methods) = load(&args.common)?;
    let gemm = backend(&args.gemm)?;
    let mut results = Vec::new();
    let mut failed = false;
    for layer in &layers {
        for &method in methods.iter().filter(|m| m.applies_to(layer.kernel_size)) {
            match benchmark(layer, method, args.runs, &gemm, args.seed) {
                Ok(run) => {
                    let r = run.result;
                    println!(
                        "{:<28} {:<16} mean={:.6}s min={:.6}s sd={:.6}s intermediate={}B",
                        r.layer, r.method, r.mean_s, r.min_s, r.stddev_s, r.intermediate_bytes
                    );
                    results.push(r);
                }
                Err(e) => {
                    eprintln!("{} {}: {e}", layer.name, method);
                    failed = true;
                }
            }
        }
    }
    if let Some(path) = &args.out {
        emit_csv(&results, path)?;
    }
    Ok(if failed { EXIT_FAILURE } else { 0 })
}

fn run_footprint(args: FootprintArgs) -> Result<u8, Error> {
    let (layers, methods) = load(&args.common)?;
    let rows = footprint_rows(&layers, &methods)?;
    match &args.out {
        Some(path) => write_footprint_csv(&rows, std::fs::File::create(path)?)?,
        None => write_footprint_csv(&rows, std::io::stdout().lock())?,
    }
    Ok(0)
}
