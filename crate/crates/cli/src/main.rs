use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use interlacement::config::RunConfig;
use interlacement::harness::ReportBundle;
use interlacement::pipeline::{self, Which};
use interlacement::Error;

#[derive(Parser)]
#[command(name = "interlace", version, about = "Random interlacements on Z^d: potentials, sampling and checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the escape field and write the equilibrium measure and capacity.
    Potential(Common),
    /// Sample with the classical construction.
    Classical(Common),
    /// Sample with the two-sided (intrinsic time) construction.
    Twosided(Common),
    /// Compare both constructions; exit status 1 if any check fails.
    Compare(Common),
    /// Check time-reversal invariance of both constructions.
    Reversal(Common),
}

#[derive(Args)]
struct Common {
    /// Run configuration (TOML, or JSON when the extension is `.json`).
    #[arg(long)]
    config: PathBuf,
    /// Master seed, overriding the configuration.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads, overriding the configuration.
    #[arg(long)]
    workers: Option<usize>,
    /// Output directory, overriding the configuration.
    #[arg(long)]
    out: Option<PathBuf>,
}

enum Failure {
    Load(Error),
    Run(Error),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Load(_) => 2,
            Failure::Run(e) => match e {
                Error::Config { .. }
                | Error::DomainTooSmall { .. }
                | Error::BoxTooLarge { .. }
                | Error::DimensionMismatch { .. } => 2,
                Error::NonConvergence { .. } => 3,
                _ => 4,
            },
        }
    }

    fn error(&self) -> &Error {
        match self {
            Failure::Load(e) | Failure::Run(e) => e,
        }
    }
}

fn load(common: &Common) -> Result<(RunConfig, PathBuf), Failure> {
    let mut cfg = RunConfig::load(&common.config).map_err(|e| match e {
        Error::Io(io) => Failure::Load(Error::Config {
            key: "--config".into(),
            message: format!("{}: {io}", common.config.display()),
        }),
        other => Failure::Load(other),
    })?;
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if let Some(w) = common.workers {
        cfg.workers = w;
    }
    cfg.validate().map_err(Failure::Load)?;
    let out = common.out.clone().unwrap_or_else(|| PathBuf::from(&cfg.out));
    Ok((cfg, out))
}

fn print_written(paths: &[PathBuf]) {
    for p in paths {
        println!("wrote {}", p.display());
    }
}

fn finish_report(cfg: &RunConfig, out: &Path, stem: &str, bundle: &ReportBundle) -> Result<bool, Failure> {
    for r in &bundle.reports {
        println!("{}", r.summary());
    }
    print_written(&pipeline::write_report(cfg, out, stem, bundle).map_err(Failure::Run)?);
    println!("{}: {}", bundle.name, if bundle.pass { "all checks passed" } else { "FAILED" });
    Ok(bundle.pass)
}

fn run(cli: Cli) -> Result<bool, Failure> {
    match cli.command {
        Command::Potential(c) => {
            let (cfg, out) = load(&c)?;
            let res = pipeline::potential(&cfg).map_err(Failure::Run)?;
            println!(
                "cap = {:.6} (extrapolated; R = {}: {:.6}, R = {}: {:.6})",
                res.capacity.cap_extrapolated,
                res.capacity.radius,
                res.capacity.cap_r,
                res.capacity.radius2,
                res.capacity.cap_r2
            );
            print_written(&pipeline::write_potential(&cfg, &out, &res).map_err(Failure::Run)?);
            Ok(true)
        }
        Command::Classical(c) => sample(&c, Which::Classical),
        Command::Twosided(c) => sample(&c, Which::TwoSided),
        Command::Compare(c) => {
            let (cfg, out) = load(&c)?;
            let bundle = pipeline::compare(&cfg).map_err(Failure::Run)?;
            finish_report(&cfg, &out, "compare", &bundle)
        }
        Command::Reversal(c) => {
            let (cfg, out) = load(&c)?;
            let bundle = pipeline::reversal(&cfg).map_err(Failure::Run)?;
            finish_report(&cfg, &out, "reversal", &bundle)
        }
    }
}

fn sample(c: &Common, which: Which) -> Result<bool, Failure> {
    let (cfg, out) = load(c)?;
    let (prep, stats) = pipeline::sample(&cfg, which).map_err(Failure::Run)?;
    let (mean, se) = stats.forward.count_mean();
    println!(
        "{}: {} runs, mean trajectories per run {mean:.4} +/- {se:.4} (level * cap = {:.4})",
        stats.construction,
        stats.runs,
        cfg.level * prep.capacity()
    );
    print_written(&pipeline::write_sample(&cfg, &out, which, &prep, &stats).map_err(Failure::Run)?);
    Ok(true)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(f) => {
            eprintln!("error: {}", f.error());
            ExitCode::from(f.code())
        }
    }
}
