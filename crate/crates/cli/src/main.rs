use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use cmainj::harness::{
    clip_stats, compare, parse_clip_mode, run_scenario, InjectionMode, ScenarioConfig,
};
use cmainj::{ClipMode, Error};

const EXIT_CONFIG: u8 = 64;
const EXIT_IO: u8 = 74;

#[derive(Parser)]
#[command(
    name = "cmainj",
    version,
    about = "CMA-ES with injected solutions: benchmark runs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write its per-iteration log as CSV.
    Run(RunArgs),
    /// Compare evaluations-to-target of two scenario files over common seeds.
    Compare(CompareArgs),
    /// Estimate how often a sampled step would be clipped.
    Clipstats(ClipstatsArgs),
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    problem: String,
    #[arg(long)]
    dim: usize,
    #[arg(long)]
    lambda: Option<usize>,
    #[arg(long)]
    sigma0: Option<f64>,
    /// none, near-optimum, direction, mean-shift or best-ever
    #[arg(long, default_value = "none", value_parser = parse_injection)]
    inject: InjectionMode,
    #[arg(long, default_value_t = 1e-4)]
    inject_scale: f64,
    /// hard, cdf or off
    #[arg(long, default_value = "hard", value_parser = parse_clip)]
    clip: ClipMode,
    /// Per-iteration cap of the log step-size change; `inf` disables it.
    #[arg(long)]
    dsigma_max: Option<f64>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    target: f64,
    #[arg(long)]
    max_evals: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CompareArgs {
    #[arg(long)]
    base: PathBuf,
    #[arg(long)]
    variant: PathBuf,
    #[arg(long, value_delimiter = ',', required = true)]
    seeds: Vec<u64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ClipstatsArgs {
    #[arg(long)]
    dim: usize,
    #[arg(long)]
    samples: u64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

fn parse_injection(s: &str) -> Result<InjectionMode, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_clip(s: &str) -> Result<ClipMode, String> {
    parse_clip_mode(s).map_err(|e| e.to_string())
}

fn exit_for(err: &Error) -> ExitCode {
    match err {
        Error::Io(_) => ExitCode::from(EXIT_IO),
        _ => ExitCode::from(EXIT_CONFIG),
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, Error> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn read_config(path: &Path) -> Result<ScenarioConfig, Error> {
    let text =
        fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    ScenarioConfig::parse(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

fn run(args: RunArgs) -> Result<ExitCode, Error> {
    let cfg = ScenarioConfig {
        problem: args.problem,
        dim: args.dim,
        lambda: args.lambda,
        sigma0: args.sigma0,
        injection_mode: args.inject,
        injection_scale: args.inject_scale,
        clip_policy: args.clip,
        delta_sigma_max: args.dsigma_max,
        seed: args.seed,
        target_f: args.target,
        max_evals: args.max_evals,
        ..ScenarioConfig::default()
    };
    let log = run_scenario(&cfg)?;
    log.write_csv(create(&args.out)?)?;
    match log.evals_to_target {
        Some(evals) => println!(
            "{}: {evals} evaluations, best f = {:e}",
            log.status.name(),
            log.best_f
        ),
        None => println!(
            "{} after {} evaluations, best f = {:e}",
            log.status.name(),
            log.total_evals,
            log.best_f
        ),
    }
    Ok(ExitCode::from(log.status.exit_code() as u8))
}

fn run_compare(args: CompareArgs) -> Result<ExitCode, Error> {
    let base = read_config(&args.base)?;
    let variant = read_config(&args.variant)?;
    let report = compare(&variant, &base, &args.seeds)?;
    report.write_csv(create(&args.out)?)?;
    println!("{}", report.summary());
    Ok(ExitCode::SUCCESS)
}

fn run_clipstats(args: ClipstatsArgs) -> Result<ExitCode, Error> {
    let stats = clip_stats(args.dim, args.samples, args.seed)?;
    println!(
        "n = {}, c_y = {:.6}, clipped fraction = {:.6} (standard error {:.2e}, {} samples)",
        stats.n, stats.c_y, stats.fraction, stats.std_error, stats.samples
    );
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(EXIT_CONFIG),
            };
        }
    };
    let result = match cli.command {
        Command::Run(args) => run(args),
        Command::Compare(args) => run_compare(args),
        Command::Clipstats(args) => run_clipstats(args),
    };
    result.unwrap_or_else(|e| {
        eprintln!("error: {e}");
        exit_for(&e)
    })
}
