use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use ergodic_cli::commands::{self, RunOptions};
use ergodic_cli::CliError;

#[derive(Parser)]
#[command(
    name = "ergodic",
    version,
    about = "Multi-agent ergodic exploration simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write its artifacts
    Run {
        scenario: PathBuf,
        #[arg(long, value_name = "K")]
        snapshot_every: Option<u64>,
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,
    },
    /// Run one scenario per axis value and compare them
    Sweep { spec: PathBuf },
    /// Render an ESF1 snapshot as an 8-bit PGM image
    ExportHeatmap { snapshot: PathBuf, out: PathBuf },
    /// Check a scenario file without running it
    Validate { scenario: PathBuf },
}

fn execute(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run {
            scenario,
            snapshot_every,
            out,
        } => {
            let summary = commands::run_scenario(
                &scenario,
                &RunOptions {
                    snapshot_every,
                    out,
                },
            )?;
            print!("{summary}");
        }
        Command::Sweep { spec } => {
            let rows = commands::sweep(&spec)?;
            for row in &rows {
                match (&row.error, row.final_v, row.integral_v) {
                    (Some(err), _, _) => println!("{:<24} failed: {err}", row.label),
                    (None, Some(v), Some(iv)) => {
                        println!("{:<24} V = {v:.6}  integral = {iv:.3}", row.label)
                    }
                    _ => println!("{:<24} no data", row.label),
                }
            }
            let failed = rows.iter().filter(|r| r.error.is_some()).count();
            if failed > 0 {
                return Err(CliError::Runtime(format!(
                    "{failed} of {} sweep runs failed",
                    rows.len()
                )));
            }
        }
        Command::ExportHeatmap { snapshot, out } => commands::export_heatmap(&snapshot, &out)?,
        Command::Validate { scenario } => {
            let (config, _) = commands::validate(&scenario)?;
            println!(
                "ok: {} agents, {} components, {} steps",
                config.agents.len(),
                config.components.len(),
                config.max_steps
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
