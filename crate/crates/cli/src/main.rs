use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use coded_amp::harness::{self, CodeSpec, ExperimentKind, ExperimentSpec};
use coded_amp::Error;

#[derive(Parser, Debug)]
#[command(name = "coded-amp", version, about = "AMP detection experiments for coded random linear systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Scalar MMSE transfer of a constellation over a SINR grid.
    MmseCurve(Common),
    /// State-evolution trajectory to the fixed point.
    SeTrace(Common),
    /// Constrained capacity by the two formulas.
    Capacity(Common),
    /// Capacity and achievable rates of AMP, AMP-then-decode and Turbo-LMMSE.
    Rates(Common),
    /// Transfer chart: omega_s, phi_inv, target and (with --code) the measured decoder curve.
    TransferChart(Common),
    /// Coded AMP BER/FER campaign.
    Ber(Common),
    /// Tunnel check and threshold prediction from a measured decoder curve.
    Match(Common),
    /// Curve-matched degree-distribution design.
    Optimize(Common),
}

#[derive(Args, Debug, Default)]
struct Common {
    /// TOML file with spec fields; flags given here override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    beta: Option<f64>,
    /// Comma-separated list or `start:step:stop`.
    #[arg(long, allow_hyphen_values = true)]
    snr_db: Option<String>,
    /// bpsk, qpsk, 8psk, 16qam, gaussian or a CSV path.
    #[arg(long)]
    constellation: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Monte Carlo trials per point; frame cap for `ber`.
    #[arg(long)]
    trials: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// 0 uses every core.
    #[arg(long)]
    workers: Option<usize>,
    /// Sequential execution for bit-exact reproduction.
    #[arg(long)]
    deterministic: bool,
    /// `regular:n:dv:dc[:seed]`, `degrees:n:lambda.csv:rho.csv[:seed]` or an alist path.
    #[arg(long)]
    code: Option<String>,
    #[arg(long)]
    target_frame_errors: Option<usize>,
    #[arg(long)]
    outer_iters: Option<usize>,
    #[arg(long)]
    inner_iters: Option<usize>,
    #[arg(long)]
    rho_min: Option<f64>,
    #[arg(long)]
    rho_max: Option<f64>,
    #[arg(long)]
    points: Option<usize>,
    /// Design for this code rate instead of at each SNR point.
    #[arg(long)]
    rate: Option<f64>,
    #[arg(long)]
    dv_max: Option<usize>,
    /// Check degrees, comma-separated.
    #[arg(long, value_delimiter = ',')]
    dc: Option<Vec<usize>>,
}

impl Command {
    fn split(self) -> (ExperimentKind, Common) {
        match self {
            Command::MmseCurve(c) => (ExperimentKind::MmseCurve, c),
            Command::SeTrace(c) => (ExperimentKind::SeTrace, c),
            Command::Capacity(c) => (ExperimentKind::Capacity, c),
            Command::Rates(c) => (ExperimentKind::Rates, c),
            Command::TransferChart(c) => (ExperimentKind::TransferChart, c),
            Command::Ber(c) => (ExperimentKind::Ber, c),
            Command::Match(c) => (ExperimentKind::Match, c),
            Command::Optimize(c) => (ExperimentKind::Optimize, c),
        }
    }
}

/// Parses `a,b,c` or `start:step:stop` (inclusive).
fn parse_snr_list(s: &str) -> Result<Vec<f64>, Error> {
    let bad = || Error::InvalidSpec {
        field: "snr_db".into(),
        reason: format!("cannot parse `{s}`"),
    };
    let num = |t: &str| t.trim().parse::<f64>().map_err(|_| bad());
    let parts: Vec<&str> = s.split(':').collect();
    match parts[..] {
        [a, step, b] => {
            let (a, step, b) = (num(a)?, num(step)?, num(b)?);
            if !(step > 0.0) || b < a || !a.is_finite() || !b.is_finite() {
                return Err(bad());
            }
            let count = ((b - a) / step + 1e-9).floor() as usize + 1;
            Ok((0..count).map(|i| a + step * i as f64).collect())
        }
        [_] => s.split(',').map(num).collect(),
        _ => Err(bad()),
    }
}

fn build_spec(kind: ExperimentKind, args: Common) -> anyhow::Result<ExperimentSpec> {
    let mut spec = match &args.config {
        Some(path) => {
            let text =
                std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
            toml::from_str::<ExperimentSpec>(&text).with_context(|| format!("parsing config {}", path.display()))?
        }
        None => ExperimentSpec::default(),
    };
    spec.kind = kind;
    if let Some(s) = &args.snr_db {
        spec.snr_db = parse_snr_list(s)?;
    }
    if let Some(code) = &args.code {
        spec.code = Some(code.parse::<CodeSpec>()?);
    }
    macro_rules! set {
        ($($f:ident),*) => { $(if let Some(v) = args.$f { spec.$f = v; })* };
    }
    set!(beta, constellation, seed, trials, out, workers, target_frame_errors, outer_iters, inner_iters);
    set!(rho_min, rho_max, points, dv_max, dc);
    if args.rate.is_some() {
        spec.rate = args.rate;
    }
    spec.deterministic |= args.deterministic;
    Ok(spec)
}

/// 2 for spec errors, 3 for numeric blowup, 1 otherwise.
fn exit_code(e: &anyhow::Error) -> u8 {
    if e.downcast_ref::<toml::de::Error>().is_some() {
        return 2;
    }
    match e.downcast_ref::<Error>() {
        Some(Error::InvalidSpec { .. } | Error::Parse(_) | Error::Unsupported(_)) => 2,
        Some(Error::NumericBlowup { .. }) => 3,
        _ => 1,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let (kind, args) = cli.command.split();
    let result = build_spec(kind, args).and_then(|spec| {
        log::info!("running {kind} into {}", spec.out.display());
        Ok(harness::run(&spec)?)
    });
    match result {
        Ok(out) => {
            println!("{}", out.csv.display());
            println!("{}", out.metadata.display());
            for p in &out.extra {
                println!("{}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
