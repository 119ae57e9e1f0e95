use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

mod commands;
mod config;
mod table;

use commands::Failure;
use config::ScenarioConfig;

#[derive(Parser, Debug)]
#[command(name = "cvpriv", version, about = "Privacy of distributed phase sensing with Gaussian networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Scenario file (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output file; stdout when omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Overrides the seed in the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; 0 uses all cores.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Tree QFIm spectrum over depth and squeezing.
    Spectrum,
    /// Privacy of the configured state over the sweep grid.
    PrivacySweep,
    /// Tree, cluster and product states at four modes.
    CompareStates,
    /// Lossy two-mode squeezed vacuum and its optimal homodyne readout.
    TwoMode,
    /// Monte-Carlo estimation of the average phase.
    ProtocolSim,
    /// Fock-space cross-check of the phase-space QFIm.
    OracleCheck,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum Format {
    Csv,
    Json,
}

const DEFAULT_SEED: u64 = 0x5eed;

fn run(cli: &Cli) -> Result<table::Table, Failure> {
    let path = cli.config.as_ref().ok_or_else(|| Failure::Config("--config is required".into()))?;
    let text = std::fs::read_to_string(path).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
    let mut cfg = ScenarioConfig::from_toml(&text).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
    if cli.seed.is_some() {
        cfg.seed = cli.seed;
    }
    let seed = cfg.seed.unwrap_or(DEFAULT_SEED);
    cfg.seed = Some(seed);

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads)
        .build()
        .map_err(|e| Failure::Config(format!("thread pool: {e}")))?;
    let mut t = pool.install(|| match cli.command {
        Command::Spectrum => commands::spectrum(&cfg),
        Command::PrivacySweep => commands::privacy_sweep(&cfg),
        Command::CompareStates => commands::compare_states(&cfg),
        Command::TwoMode => commands::two_mode(&cfg),
        Command::ProtocolSim => commands::protocol_sim(&cfg, seed),
        Command::OracleCheck => commands::oracle_check(&cfg),
    })?;
    let hash = cfg.hash();
    t.prepend(&[("config_hash", hash.as_str()), ("version", env!("CARGO_PKG_VERSION"))]);
    Ok(t)
}

fn emit(cli: &Cli, t: &table::Table) -> io::Result<()> {
    let sink: Box<dyn Write> = match &cli.out {
        Some(p) => Box::new(File::create(p)?),
        None => Box::new(io::stdout().lock()),
    };
    let mut w = BufWriter::new(sink);
    match cli.format {
        Format::Csv => t.write_csv(&mut w).map_err(io::Error::other)?,
        Format::Json => t.write_json(&mut w)?,
    }
    w.flush()
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(t) => match emit(&cli, &t) {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) => {
                eprintln!("error: writing output: {e}");
                ExitCode::FAILURE
            }
        },
        Err(Failure::Config(m)) => {
            eprintln!("config error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Invariant(v)) => {
            for m in &v {
                eprintln!("invariant violated: {m}");
            }
            ExitCode::from(3)
        }
    }
}
