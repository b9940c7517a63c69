//! Command-line surface over the votecert library. Every number printed
//! here is produced by the corresponding library call; stdout carries the
//! payload, stderr the diagnostics. Exit codes: 0 success, 1 usage error,
//! 2 runtime error.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use votecert::bounds::BoundReport;
use votecert::dist::CategoricalDistribution;
use votecert::exact::{exact_error_dp, exact_error_enumeration};
use votecert::ingest::{parse_source_arg, VoteSource};
use votecert::mmc::{run_certificate_fallible, CertificateConfig, CertificateOutcome, PriorSpec};
use votecert::sim::{
    bound_comparison, mmc_sweep, write_bounds_csv, write_sweep_csv, SweepConfig, TailProfile,
    DEFAULT_DP_LIMIT,
};
use votecert::tilt::{
    grpo_center, loo_advantages, snr_curve_tilt, snr_reward, temper, ttrl_tilt, RewardKind,
    RewardSample, TiltParams,
};

const SCHEMA_VERSION: u32 = 1;

#[derive(Parser)]
#[command(name = "votecert", version, about = "Certify categorical majority votes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Exact majority-error probability for a known distribution.
    Exact(ExactArgs),
    /// Every closed-form bound at one (p, n) pair.
    Bounds(BoundsArgs),
    /// Hoeffding sample-size inversion.
    Samplesize(SampleSizeArgs),
    /// Run the sequential certificate over a vote source.
    Certify(CertifyArgs),
    /// Seeded Monte Carlo sweeps emitting CSV plus a metadata sidecar.
    Simulate(SimulateArgs),
    /// Sharpen a distribution by tilting or tempering.
    Tilt(TiltArgs),
    /// Group rewards and leave-one-out advantages for an answer batch.
    Reward(RewardArgs),
}

#[derive(Args)]
struct ExactArgs {
    /// Comma-separated probabilities, e.g. 0.6,0.4
    #[arg(long)]
    probs: String,
    #[arg(long)]
    n: u64,
    #[arg(long, value_enum, default_value_t = ExactMethod::Dp)]
    method: ExactMethod,
}

#[derive(Clone, Copy, ValueEnum)]
enum ExactMethod {
    Dp,
    Enum,
}

#[derive(Args)]
struct BoundsArgs {
    #[arg(long)]
    probs: String,
    #[arg(long)]
    n: u64,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Args)]
struct SampleSizeArgs {
    #[arg(long)]
    delta: f64,
    #[arg(long)]
    k: usize,
    #[arg(long)]
    epsilon: f64,
}

#[derive(Args)]
struct CertifyArgs {
    /// memory:a,b,c | jsonl:votes.jsonl | http:sampler.json
    #[arg(long)]
    source: String,
    #[arg(long)]
    epsilon: f64,
    #[arg(long)]
    budget: u64,
    #[arg(long, value_enum, default_value_t = PriorChoice::Jeffreys)]
    prior: PriorChoice,
    #[arg(long, default_value_t = 2)]
    m: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum PriorChoice {
    Jeffreys,
    Laplace,
    PointShared,
    PointRatio,
}

impl PriorChoice {
    fn to_spec(self) -> PriorSpec {
        match self {
            PriorChoice::Jeffreys => PriorSpec::jeffreys(),
            PriorChoice::Laplace => PriorSpec::laplace(),
            PriorChoice::PointShared => PriorSpec::point_shared_default(),
            PriorChoice::PointRatio => PriorSpec::point_ratio_default(),
        }
    }
}

#[derive(Args)]
struct SimulateArgs {
    #[command(subcommand)]
    what: SimulateKind,
}

#[derive(Subcommand)]
enum SimulateKind {
    /// Monte Carlo error vs the bound family over an n-grid.
    Bounds(SimulateCommon),
    /// Certificate stopping-time sweep over a δ-grid.
    Mmc(SimulateCommon),
}

#[derive(Args)]
struct SimulateCommon {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Master seed; required so every run is reproducible.
    #[arg(long)]
    seed: u64,
}

#[derive(Args)]
struct TiltArgs {
    #[arg(long)]
    probs: String,
    #[arg(long, value_enum)]
    mode: TiltMode,
    #[arg(long)]
    beta: f64,
    /// Comma-separated κ grid for the SNR curve.
    #[arg(long)]
    kappa_grid: Option<String>,
    /// Tilt target label index; defaults to the mode of p.
    #[arg(long)]
    c_hat: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum TiltMode {
    Ttrl,
    Temper,
}

#[derive(Args)]
struct RewardArgs {
    /// Comma-separated answer labels, e.g. a,a,b
    #[arg(long)]
    answers: String,
    #[arg(long, value_enum)]
    kind: RewardKindArg,
    /// Center the advantages to zero mean.
    #[arg(long)]
    grpo: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum RewardKindArg {
    Snr,
    Entropy,
}

enum CliError {
    Usage(String),
    Runtime(String),
}

impl CliError {
    fn usage<E: std::fmt::Display>(e: E) -> Self {
        CliError::Usage(e.to_string())
    }

    fn runtime<E: std::fmt::Display>(e: E) -> Self {
        CliError::Runtime(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprint!("{e}");
            return ExitCode::from(1);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(CliError::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Exact(args) => cmd_exact(args),
        Command::Bounds(args) => cmd_bounds(args),
        Command::Samplesize(args) => cmd_samplesize(args),
        Command::Certify(args) => cmd_certify(args),
        Command::Simulate(args) => cmd_simulate(args),
        Command::Tilt(args) => cmd_tilt(args),
        Command::Reward(args) => cmd_reward(args),
    }
}

/// Up to 12 significant digits, trailing zeros trimmed; display only, the
/// underlying values are never rounded.
fn fmt_sig(v: f64) -> String {
    if !v.is_finite() {
        return v.to_string();
    }
    let s = format!("{v:.*e}", 11);
    let val: f64 = s.parse().expect("formatted float parses");
    let mut out = format!("{val}");
    if out.contains('.') && !out.contains('e') {
        while out.ends_with('0') {
            out.pop();
        }
        if out.ends_with('.') {
            out.pop();
        }
    }
    out
}

fn parse_probs(arg: &str) -> Result<CategoricalDistribution, CliError> {
    let probs: Vec<f64> = arg
        .split(',')
        .map(|s| s.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|e| CliError::Usage(format!("bad probability list {arg:?}: {e}")))?;
    CategoricalDistribution::new(probs).map_err(CliError::usage)
}

fn cmd_exact(args: ExactArgs) -> Result<(), CliError> {
    let p = parse_probs(&args.probs)?;
    let value = match args.method {
        ExactMethod::Dp => exact_error_dp(&p, args.n),
        ExactMethod::Enum => exact_error_enumeration(&p, args.n),
    }
    .map_err(CliError::usage)?;
    println!("{}", fmt_sig(value));
    Ok(())
}

fn cmd_bounds(args: BoundsArgs) -> Result<(), CliError> {
    let p = parse_probs(&args.probs)?;
    let report = BoundReport::compute(&p, args.n).map_err(CliError::usage)?;
    match args.format {
        Format::Csv => {
            println!(
                "n,hoeffding,bernstein,bernstein_loose,chernoff_markov,clt,clt_refined,clt_refined_uninformative,bahadur_rao,sanov_exponent"
            );
            println!(
                "{},{},{},{},{},{},{},{},{},{}",
                args.n,
                report.hoeffding,
                report.bernstein,
                report.bernstein_loose,
                report.chernoff_markov,
                report.clt,
                report.clt_refined,
                report.clt_refined_uninformative,
                report.bahadur_rao,
                report.sanov_exponent
            );
        }
        Format::Json => {
            #[derive(Serialize)]
            struct Payload<'a> {
                schema_version: u32,
                probs: &'a [f64],
                n: u64,
                bounds: &'a BoundReport,
            }
            let payload = Payload {
                schema_version: SCHEMA_VERSION,
                probs: p.probs(),
                n: args.n,
                bounds: &report,
            };
            println!("{}", serde_json::to_string(&payload).expect("payload serializes"));
        }
    }
    Ok(())
}

fn cmd_samplesize(args: SampleSizeArgs) -> Result<(), CliError> {
    let n = votecert::bounds::hoeffding_sample_size(args.delta, args.k, args.epsilon)
        .map_err(CliError::usage)?;
    println!("{n}");
    Ok(())
}

#[derive(Serialize)]
struct CertifyPayload {
    schema_version: u32,
    #[serde(flatten)]
    outcome: CertificateOutcome<String>,
    stream_error: Option<String>,
}

fn cmd_certify(args: CertifyArgs) -> Result<(), CliError> {
    let spec = parse_source_arg(&args.source).map_err(CliError::Usage)?;
    let source = VoteSource::open(spec).map_err(CliError::usage)?;
    let config = CertificateConfig::new(args.epsilon, args.budget, args.m, args.prior.to_spec())
        .map_err(CliError::usage)?;
    let (outcome, stream_error) =
        run_certificate_fallible(source, config).map_err(CliError::runtime)?;
    let payload = CertifyPayload {
        schema_version: SCHEMA_VERSION,
        outcome,
        stream_error: stream_error.as_ref().map(|e| e.to_string()),
    };
    println!("{}", serde_json::to_string(&payload).expect("payload serializes"));
    match stream_error {
        Some(e) => Err(CliError::runtime(e)),
        None => Ok(()),
    }
}

#[derive(Deserialize, Serialize)]
struct BoundsSweepFile {
    probs: Vec<f64>,
    n_grid: Vec<u64>,
    trials: u64,
    #[serde(default = "default_dp_limit")]
    dp_limit: u64,
}

fn default_dp_limit() -> u64 {
    DEFAULT_DP_LIMIT
}

#[derive(Deserialize)]
struct MmcSweepFile {
    k: usize,
    delta_grid: Vec<f64>,
    #[serde(default = "default_tail")]
    tail: TailProfile,
    epsilon: f64,
    budget: u64,
    #[serde(default = "default_m")]
    m: usize,
    prior: PriorSpec,
    trials: u64,
}

fn default_tail() -> TailProfile {
    TailProfile::Uniform
}

fn default_m() -> usize {
    2
}

fn cmd_simulate(args: SimulateArgs) -> Result<(), CliError> {
    let (common, is_bounds) = match &args.what {
        SimulateKind::Bounds(c) => (c, true),
        SimulateKind::Mmc(c) => (c, false),
    };
    let raw = std::fs::read(&common.config)
        .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", common.config.display())))?;
    std::fs::create_dir_all(&common.out).map_err(CliError::runtime)?;

    if is_bounds {
        let file: BoundsSweepFile = serde_json::from_slice(&raw)
            .map_err(|e| CliError::Usage(format!("malformed config: {e}")))?;
        let p = CategoricalDistribution::new(file.probs.clone()).map_err(CliError::usage)?;
        let rows = bound_comparison(&p, &file.n_grid, file.trials, common.seed, file.dp_limit)
            .map_err(CliError::runtime)?;
        let csv_path = common.out.join("bounds.csv");
        let f = std::fs::File::create(&csv_path).map_err(CliError::runtime)?;
        write_bounds_csv(&rows, f).map_err(CliError::runtime)?;
        let meta = serde_json::json!({
            "schema_version": SCHEMA_VERSION,
            "kind": "bounds",
            "config": file,
            "seed": common.seed,
        });
        write_metadata(&common.out, &meta)?;
        eprintln!("wrote {}", csv_path.display());
    } else {
        let file: MmcSweepFile = serde_json::from_slice(&raw)
            .map_err(|e| CliError::Usage(format!("malformed config: {e}")))?;
        let cfg = SweepConfig {
            k: file.k,
            delta_grid: file.delta_grid,
            tail: file.tail,
            epsilon: file.epsilon,
            budget: file.budget,
            m: file.m,
            prior: file.prior,
            trials: file.trials,
            master_seed: common.seed,
        };
        let rows = mmc_sweep(&cfg).map_err(CliError::runtime)?;
        let csv_path = common.out.join("mmc.csv");
        let f = std::fs::File::create(&csv_path).map_err(CliError::runtime)?;
        write_sweep_csv(&rows, f).map_err(CliError::runtime)?;
        let meta = serde_json::json!({
            "schema_version": SCHEMA_VERSION,
            "kind": "mmc",
            "config": cfg,
        });
        write_metadata(&common.out, &meta)?;
        eprintln!("wrote {}", csv_path.display());
    }
    Ok(())
}

fn write_metadata(dir: &std::path::Path, meta: &serde_json::Value) -> Result<(), CliError> {
    let path = dir.join("metadata.json");
    let mut f = std::fs::File::create(&path).map_err(CliError::runtime)?;
    writeln!(f, "{}", serde_json::to_string_pretty(meta).expect("metadata serializes"))
        .map_err(CliError::runtime)?;
    Ok(())
}

fn cmd_tilt(args: TiltArgs) -> Result<(), CliError> {
    let p = parse_probs(&args.probs)?;
    let c_hat = args.c_hat.unwrap_or_else(|| p.argmax());
    let q = match args.mode {
        TiltMode::Ttrl => ttrl_tilt(&p, c_hat, args.beta).map_err(CliError::usage)?,
        TiltMode::Temper => {
            let params = TiltParams::for_temper(args.beta).map_err(|_| {
                CliError::Usage(format!(
                    "temper requires beta > 1 so that kappa = beta/(beta-1) >= 1, got {}",
                    args.beta
                ))
            })?;
            temper(&p, params.kappa).map_err(CliError::usage)?
        }
    };
    let mut line = String::new();
    for (i, &v) in q.probs().iter().enumerate() {
        if i > 0 {
            line.push(',');
        }
        let _ = write!(line, "{}", fmt_sig(v));
    }
    println!("{line}");

    if let Some(grid_arg) = args.kappa_grid {
        let grid: Vec<f64> = grid_arg
            .split(',')
            .map(|s| s.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| CliError::Usage(format!("bad kappa grid: {e}")))?;
        let curve = match args.mode {
            TiltMode::Ttrl => snr_curve_tilt(&p, c_hat, &grid).map_err(CliError::usage)?,
            TiltMode::Temper => grid
                .iter()
                .map(|&kappa| {
                    temper(&p, kappa)
                        .map(|q| q.mode_profile().snr)
                        .map_err(CliError::usage)
                })
                .collect::<Result<_, _>>()?,
        };
        println!("kappa,snr");
        for (kappa, snr) in grid.iter().zip(curve) {
            println!("{kappa},{snr}");
        }
    }
    Ok(())
}

fn cmd_reward(args: RewardArgs) -> Result<(), CliError> {
    let answers: Vec<String> = args.answers.split(',').map(|s| s.to_string()).collect();
    let sample = RewardSample::new(answers).map_err(CliError::usage)?;
    let kind = match args.kind {
        RewardKindArg::Snr => RewardKind::Snr,
        RewardKindArg::Entropy => RewardKind::Entropy,
    };
    let value = match kind {
        RewardKind::Snr => snr_reward(&sample).value,
        RewardKind::Entropy => votecert::tilt::entropy_reward(&sample),
    };
    println!("{}", fmt_sig(value));
    let advantages = loo_advantages(&sample, kind);
    let advantages = if args.grpo {
        grpo_center(&advantages)
    } else {
        advantages
    };
    let line: Vec<String> = advantages.iter().map(|&a| fmt_sig(a)).collect();
    println!("{}", line.join(","));
    Ok(())
}
