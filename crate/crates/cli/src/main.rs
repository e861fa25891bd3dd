use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use synfreq_cli::{cmd_run, parse_config, CliResult, Command, Overrides};

#[derive(Parser)]
#[command(name = "synfreq", version, about = "Synthetic frequency lattice experiments")]
struct Cli {
    #[command(subcommand)]
    command: Sub,
    /// Experiment config (TOML)
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory
    #[arg(long, global = true, env = "SYNFREQ_OUT", default_value = "synfreq-out")]
    out: PathBuf,
    /// Also write SVG heatmaps
    #[arg(long, global = true)]
    svg: bool,
    /// Worker threads for sweeps
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,
    /// Seed for shot sampling
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Readout shots per point (0 = ideal populations)
    #[arg(long, global = true)]
    shots: Option<u32>,
}

#[derive(Subcommand, Clone, Copy)]
enum Sub {
    /// Vacuum Rabi swap between the qubit and one mode
    Rabi,
    /// Quantum walk from a single site
    Walk,
    /// Bloch oscillations under a detuned drive
    Bloch,
    /// Band structure from quadrature readout
    Band,
    /// Two-tone drive with a synthetic flux
    Flux,
    /// Detuning reversal with a wave packet
    Unidir,
    /// Run one experiment over a list of parameter values
    Sweep,
}

impl From<Sub> for Command {
    fn from(s: Sub) -> Self {
        match s {
            Sub::Rabi => Command::Rabi,
            Sub::Walk => Command::Walk,
            Sub::Bloch => Command::Bloch,
            Sub::Band => Command::Band,
            Sub::Flux => Command::Flux,
            Sub::Unidir => Command::Unidir,
            Sub::Sweep => Command::Sweep,
        }
    }
}

fn run(cli: &Cli) -> CliResult<()> {
    let command = Command::from(cli.command);
    let overrides = Overrides { svg: cli.svg, seed: cli.seed, shots: cli.shots };
    let config = match &cli.config {
        Some(path) => parse_config(path, command, &overrides)?,
        None => synfreq_cli::parse_config_str("", command, &overrides)?,
    };
    let manifest = cmd_run(&config, &cli.out, cli.jobs)?;
    for e in &manifest.errors {
        log::warn!("{e}");
    }
    println!("{}", cli.out.join("manifest.json").display());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("synfreq: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
