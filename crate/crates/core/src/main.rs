use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use pricegame::experiments::{self, ConfigError, ExperimentConfig, Format, Report};

#[derive(Parser)]
#[command(name = "pricegame", version, about = "Supplier / two-manufacturer discrete pricing game")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Flat `key = value` config file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override one config key; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    set: Vec<String>,
    /// Write the report here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = OutFormat::Csv, global = true)]
    format: OutFormat,
    /// Supplier price.
    #[arg(long, global = true)]
    q: Option<f64>,
    /// Price denomination.
    #[arg(long, global = true)]
    delta: Option<f64>,
    #[arg(long, global = true)]
    q_step: Option<f64>,
    #[arg(long, global = true)]
    q_max: Option<f64>,
    /// Seed for randomized oracle sampling.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum OutFormat {
    Csv,
    Json,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Check the config and print derived thresholds.
    Validate,
    /// All equilibria at one supplier price, exhaustive versus closed form.
    NeEnumerate,
    /// Equilibrium counts over the reference (alpha, eps, delta) rows.
    NeCountTable,
    /// Symmetric equilibrium prices as the supplier price grows.
    NeVsQ,
    /// Supplier utility at the focal equilibrium over a grid of quotes.
    SupplierSweep,
    /// Operating-equilibrium counts while halving the denomination.
    MinDelta,
    /// Randomized comparison of closed forms against exhaustive search.
    OracleCheck,
}

fn build_config(cli: &Cli) -> Result<ExperimentConfig, ConfigError> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    for pair in &cli.set {
        cfg.set_pair(pair)?;
    }
    if let Some(q) = cli.q {
        cfg.q = Some(q);
    }
    if let Some(d) = cli.delta {
        cfg.delta = d;
    }
    if let Some(s) = cli.q_step {
        cfg.q_step = Some(s);
    }
    if let Some(m) = cli.q_max {
        cfg.q_max = Some(m);
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    cfg.validate()
}

fn run(cli: &Cli, cfg: &ExperimentConfig) -> Result<Report, ConfigError> {
    match cli.command {
        Command::Validate => experiments::cmd_validate(cfg),
        Command::NeEnumerate => experiments::cmd_ne_enumerate(cfg),
        Command::NeCountTable => experiments::cmd_ne_count_table(cfg),
        Command::NeVsQ => experiments::cmd_ne_vs_q(cfg),
        Command::SupplierSweep => experiments::cmd_supplier_sweep(cfg),
        Command::MinDelta => experiments::cmd_min_delta(cfg),
        Command::OracleCheck => experiments::cmd_oracle_check(cfg),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let report = match build_config(&cli).and_then(|cfg| run(&cli, &cfg).map(|r| (r, cfg))) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let (report, cfg) = report;
    let format = match cli.format {
        OutFormat::Csv => Format::Csv,
        OutFormat::Json => Format::Json,
    };
    let body = report.render(format, &cfg);
    match &cli.out {
        Some(path) => {
            if let Err(e) = std::fs::write(path, body) {
                eprintln!("error: cannot write {}: {e}", path.display());
                return ExitCode::from(2);
            }
        }
        None => print!("{body}"),
    }
    for line in &report.summary {
        eprintln!("{line}");
    }
    if report.agree {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}
