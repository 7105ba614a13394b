use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};
use serde_json::json;

use drumhead_cli::acceptance;
use drumhead_cli::commands::{
    cmd_calibrate, cmd_couplings, cmd_crystal, cmd_modes, cmd_precess, cmd_sweep, RunContext,
};
use drumhead_cli::config::ScenarioConfig;

/// Planar ion-crystal simulator: equilibria, transverse modes, engineered
/// spin-spin couplings, and collective-spin echo dynamics.
#[derive(Parser)]
#[command(name = "drumhead", version, about)]
struct Cli {
    /// Scenario file (TOML). Defaults to the built-in 217-ion reference
    /// scenario.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory for emitted data files.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    /// Worker threads for internal parallelism (defaults to all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the crystal equilibrium and write positions (JSON + CSV).
    Crystal,
    /// Solve the transverse modes and write the spectrum and eigenvectors.
    Modes {
        /// How many leading eigenvectors to dump.
        #[arg(long, default_value_t = 14)]
        top: usize,
    },
    /// Evaluate the coupling matrix at the configured drive and fit its
    /// range law.
    Couplings,
    /// Sweep the drive detuning and tabulate mean coupling and range
    /// exponent.
    Sweep {
        /// Also write a pairwise coupling file per detuning.
        #[arg(long)]
        pairs: bool,
    },
    /// Run the echo sequence over a tipping-angle grid.
    Precess,
    /// Report drive calibration quantities for the configured scenario.
    Calibrate,
    /// Run the full validation suite (ignores --config).
    Validate,
}

fn run(cli: Cli) -> Result<ExitCode> {
    let config = match &cli.config {
        Some(path) => ScenarioConfig::load(path)?,
        None => ScenarioConfig::default(),
    };
    let ctx = RunContext::new(config, cli.out.clone());

    let summary = match cli.command {
        Command::Crystal => cmd_crystal(&ctx)?,
        Command::Modes { top } => cmd_modes(&ctx, top)?,
        Command::Couplings => cmd_couplings(&ctx)?,
        Command::Sweep { pairs } => cmd_sweep(&ctx, pairs)?,
        Command::Precess => cmd_precess(&ctx)?,
        Command::Calibrate => cmd_calibrate(&ctx)?,
        Command::Validate => {
            let results = acceptance::run_all();
            for r in &results {
                println!("{}", r.report_line());
            }
            let failed: Vec<usize> = results.iter().filter(|r| !r.passed).map(|r| r.id).collect();
            return Ok(if failed.is_empty() {
                ExitCode::SUCCESS
            } else {
                eprintln!("failed criteria: {failed:?}");
                ExitCode::FAILURE
            });
        }
    };
    println!("{}", serde_json::to_string_pretty(&summary)?);
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();

    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            eprintln!("{}", json!({ "error": format!("thread pool: {e}") }));
            return ExitCode::FAILURE;
        }
    }

    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            println!("{}", json!({ "error": format!("{e:#}") }));
            ExitCode::FAILURE
        }
    }
}
