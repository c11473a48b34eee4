use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use portres::config::PipelineConfig;
use portres::fixture::{self, FixtureOptions};
use portres::stages::{with_threads, Context, Stage};
use portres::{PipelineError, Result};

/// Port resilience pipeline: AIS ingest through count-model report.
#[derive(Debug, Parser)]
#[command(name = "portres", version, about)]
struct Cli {
    /// Pipeline configuration (TOML). Defaults to ./portres.toml when present.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,
    /// Worker threads; 0 uses every core. Results do not depend on it.
    #[arg(long, global = true, value_name = "N", default_value_t = 0)]
    threads: usize,
    /// Output directory for artifacts.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// AIS positions to port calls, daily counts and OD legs.
    Ingest,
    /// Port/cyclone interactions with gauge and station conditions.
    Exposure,
    /// Masked counterfactual forecasts per port.
    Baseline,
    /// Impact windows and resilience metrics.
    Detect,
    /// Weekly freight graphs and the assembled interaction table.
    Network,
    /// Screening, stepwise selection and final count-model fits.
    Fit {
        /// Exit with code 4 when a final fit does not converge.
        #[arg(long)]
        strict: bool,
    },
    /// Average marginal effects on the held-out records.
    Effects,
    /// Markdown report and coefficient table.
    Report,
    /// Write the synthetic fixture set into the output directory.
    Simulate,
    /// Every stage in order.
    RunAll {
        /// Exit with code 4 when a final fit does not converge.
        #[arg(long)]
        strict: bool,
    },
}

fn load_config(cli: &Cli) -> Result<PipelineConfig> {
    let mut cfg = match &cli.config {
        Some(p) => PipelineConfig::load(p)?,
        None if PathBuf::from("portres.toml").exists() => {
            PipelineConfig::load("portres.toml".as_ref())?
        }
        None => PipelineConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<()> {
    if let Command::Simulate = cli.command {
        let dir = cli.out.clone().unwrap_or_else(|| PathBuf::from("fixture"));
        let seed = cli.seed.unwrap_or(PipelineConfig::default().seed);
        let s = with_threads(cli.threads, || {
            fixture::generate(&dir, seed, &FixtureOptions::default())
        })??;
        println!("{}", serde_json::to_string(&s)?);
        return Ok(());
    }
    let cfg = load_config(&cli)?;
    let out = cli
        .out
        .clone()
        .or_else(|| cfg.out.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    let mut ctx = Context::new(cfg, out);
    let stage = match cli.command {
        Command::Ingest => Some(Stage::Ingest),
        Command::Exposure => Some(Stage::Exposure),
        Command::Baseline => Some(Stage::Baseline),
        Command::Detect => Some(Stage::Detect),
        Command::Network => Some(Stage::Network),
        Command::Fit { strict } => {
            ctx.strict = strict;
            Some(Stage::Fit)
        }
        Command::Effects => Some(Stage::Effects),
        Command::Report => Some(Stage::Report),
        Command::RunAll { strict } => {
            ctx.strict = strict;
            None
        }
        Command::Simulate => unreachable!("handled above"),
    };
    with_threads(cli.threads, || match stage {
        Some(s) => ctx.run(s).map(drop),
        None => ctx.run_all().map(drop),
    })?
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 3 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &PipelineError) -> u8 {
    e.exit_code().clamp(1, 255) as u8
}
